use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::Scalar;

use super::smc::{normalized_weights, Particle};

/// Maximum-likelihood von Mises fit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VonMisesFit {
    /// Mean direction in `[0, 2π)`.
    pub mu: f64,
    pub kappa: f64,
    /// Weighted mean resultant length.
    pub mean_resultant: f64,
    /// True when the root lies beyond [`KAPPA_MAX`]; `kappa` is then the bound.
    pub saturated: bool,
}

/// Upper end of the concentration bracket.
pub const KAPPA_MAX: f64 = 1e6;

/// `I₁(κ)/I₀(κ)`, the mean resultant length of a von Mises(κ) variable.
pub fn bessel_ratio(kappa: f64) -> f64 {
    if kappa <= 0.0 {
        return 0.0;
    }
    if kappa <= 30.0 {
        // Power series: I_ν(x) = Σ (x/2)^(2k+ν) / (k! (k+ν)!).
        let h = 0.5 * kappa;
        let h2 = h * h;
        let (mut t0, mut t1) = (1.0, h);
        let (mut s0, mut s1) = (t0, t1);
        for k in 1..200 {
            let k = k as f64;
            t0 *= h2 / (k * k);
            t1 *= h2 / (k * (k + 1.0));
            s0 += t0;
            s1 += t1;
            if t0 < 1e-17 * s0 {
                break;
            }
        }
        s1 / s0
    } else {
        // Large-argument expansion of e^(-x) sqrt(2πx) I_ν(x); the common
        // factor cancels in the ratio.
        let series = |nu: f64| {
            let mu = 4.0 * nu * nu;
            let (mut term, mut sum) = (1.0, 1.0);
            for k in 1..12 {
                let odd = (2 * k - 1) as f64;
                term *= -(mu - odd * odd) / (k as f64 * 8.0 * kappa);
                sum += term;
            }
            sum
        };
        series(1.0) / series(0.0)
    }
}

/// Fits `(μ, κ)` to weighted angles. `κ` solves `I₁(κ)/I₀(κ) = R̄` by
/// bisection to a relative width of 1e-8 on `[0, KAPPA_MAX]`.
pub fn fit_von_mises(angles: &[f64], weights: &[f64]) -> Result<VonMisesFit> {
    if angles.len() != weights.len() {
        return Err(Error::LengthMismatch(format!("{} angles, {} weights", angles.len(), weights.len())));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || weights.iter().any(|w| *w < 0.0) {
        return Err(Error::NonPositiveWeights);
    }
    let (mut c, mut s) = (0.0, 0.0);
    for (a, w) in angles.iter().zip(weights) {
        c += w * a.cos();
        s += w * a.sin();
    }
    let mu = s.atan2(c).rem_euclid(TAU);
    let r = (c * c + s * s).sqrt() / total;
    if r >= 1.0 {
        return Err(Error::DegenerateConcentration { mean_direction: mu });
    }
    if bessel_ratio(KAPPA_MAX) < r {
        return Ok(VonMisesFit { mu, kappa: KAPPA_MAX, mean_resultant: r, saturated: true });
    }
    let (mut lo, mut hi) = (0.0, KAPPA_MAX);
    while hi - lo > 1e-8 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if bessel_ratio(mid) < r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(VonMisesFit { mu, kappa: 0.5 * (lo + hi), mean_resultant: r, saturated: false })
}

/// Log density of von Mises(μ, κ) at `x`.
pub fn von_mises_logpdf(x: f64, mu: f64, kappa: f64) -> f64 {
    // log I₀(κ), via the series or the scaled expansion.
    let log_i0 = if kappa <= 30.0 {
        let h2 = 0.25 * kappa * kappa;
        let (mut t, mut s) = (1.0, 1.0);
        for k in 1..200 {
            t *= h2 / (k * k) as f64;
            s += t;
            if t < 1e-17 * s {
                break;
            }
        }
        s.ln()
    } else {
        let (mut term, mut sum) = (1.0, 1.0);
        for k in 1..12 {
            let odd = (2 * k - 1) as f64;
            term *= odd * odd / (k as f64 * 8.0 * kappa);
            sum += term;
        }
        kappa - 0.5 * (2.0 * PI * kappa).ln() + sum.ln()
    };
    kappa * (x - mu).cos() - (2.0 * PI).ln() - log_i0
}

/// Weight-normalized histogram of the first inferred object's library id.
pub fn posterior_object_marginal<T: Scalar>(particles: &[Particle<T>], library_size: usize) -> Result<Vec<f64>> {
    if particles.is_empty() {
        return Err(Error::DegenerateWeights);
    }
    let w = normalized_weights(particles)?;
    let mut out = vec![0.0; library_size];
    for (p, w) in particles.iter().zip(w) {
        let child = p.children.first().ok_or(Error::ParticleArity { expected: 1, got: 0 })?;
        let id = child.object.id;
        *out.get_mut(id).ok_or(Error::UnknownObject(id))? += w;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::Distribution;

    #[test]
    fn ratio_is_continuous_across_branches() {
        let a = bessel_ratio(30.0);
        let b = bessel_ratio(30.0 + 1e-12);
        assert!((a - b).abs() < 1e-10, "{a} {b}");
        // Known values: I1/I0 at 1 and 10.
        assert!((bessel_ratio(1.0) - 0.446_389_965_896_185_3).abs() < 1e-12);
        assert!((bessel_ratio(10.0) - 0.948_599_825_954_846_3).abs() < 1e-12);
        let mut prev = 0.0;
        for i in 1..200 {
            let r = bessel_ratio(i as f64 * 0.5);
            assert!(r > prev && r < 1.0);
            prev = r;
        }
    }

    #[test]
    fn log_density_normalizes() {
        for &kappa in &[0.1, 3.0, 45.0] {
            let n = 20_000;
            let h = TAU / n as f64;
            let total: f64 = (0..n).map(|i| von_mises_logpdf(i as f64 * h, 1.0, kappa).exp() * h).sum();
            assert!((total - 1.0).abs() < 1e-6, "{kappa}: {total}");
        }
    }

    #[test]
    fn point_mass_saturates() {
        let angles: Vec<f64> = (0..10).map(|i| 0.7 + if i % 2 == 0 { 1e-6 } else { -1e-6 }).collect();
        let fit = fit_von_mises(&angles, &[1.0; 10]).unwrap();
        assert!((fit.mu - 0.7).abs() < 1e-5);
        assert!(fit.saturated && fit.kappa >= KAPPA_MAX);
        assert!(matches!(fit_von_mises(&[0.3, 0.3], &[1.0, 2.0]), Err(Error::DegenerateConcentration { .. })));
    }

    #[test]
    fn uniform_angles_have_low_concentration() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let angles: Vec<f64> = (0..10_000).map(|_| rand::Rng::gen_range(&mut rng, 0.0..TAU)).collect();
        let fit = fit_von_mises(&angles, &vec![1.0; angles.len()]).unwrap();
        assert!(fit.kappa < 0.1);
    }

    #[test]
    fn recovers_forward_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let angles: Vec<f64> = (0..10_000).map(|_| sample_vm(1.0, 4.0, &mut rng)).collect();
        let fit = fit_von_mises(&angles, &vec![1.0; angles.len()]).unwrap();
        assert!((fit.mu - 1.0).abs() < 0.05);
        assert!((fit.kappa / 4.0 - 1.0).abs() < 0.1);
    }

    fn sample_vm(mu: f64, kappa: f64, rng: &mut ChaCha8Rng) -> f64 {
        // Best and Fisher's algorithm.
        let u = rand_distr::Uniform::new(0.0, 1.0);
        let tau = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
        let rho = (tau - (2.0 * tau).sqrt()) / (2.0 * kappa);
        let r = (1.0 + rho * rho) / (2.0 * rho);
        loop {
            let (u1, u2, u3): (f64, f64, f64) = (u.sample(rng), u.sample(rng), u.sample(rng));
            let z = (PI * u1).cos();
            let f = (1.0 + r * z) / (r + z);
            let c = kappa * (r - f);
            if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
                let theta = if u3 > 0.5 { f.acos() } else { -f.acos() };
                return (mu + theta).rem_euclid(TAU);
            }
        }
    }

    #[test]
    fn weights_must_be_positive() {
        assert!(fit_von_mises(&[0.0, 1.0], &[0.0, 0.0]).is_err());
        assert!(fit_von_mises(&[0.0], &[1.0, 2.0]).is_err());
    }
}

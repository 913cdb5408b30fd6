//! Sequential Monte Carlo over scenes with a growing number of objects.
//!
//! Stage `k` targets the posterior over scenes with exactly `k` inferred
//! objects. Each stage extends every particle by one proposed child and a
//! fresh noise setting and reweights by
//! `target_k(new) · L(old noise) / (target_{k-1}(old) · q(new child, noise))`
//! with `L` uniform over the noise grid.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::NoiseParams;
use crate::scene::Child;
use crate::Scalar;

use super::proposal::{Group, Target};
use super::schedule::Schedule;

/// A weighted scene hypothesis.
#[derive(Clone, Debug)]
pub struct Particle<T: Scalar> {
    pub children: Vec<Child<T>>,
    /// Index into the noise grid.
    pub noise_index: usize,
    pub noise: NoiseParams<T>,
    pub log_weight: f64,
    /// Log target of `children` with `noise`, kept for the next reweighting.
    pub log_target: f64,
}

/// Sampler settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmcConfig {
    pub schedule: Schedule,
    pub particles: usize,
    /// Resample when ESS falls below this fraction of the particle count.
    pub resample_threshold: f64,
}

impl Default for SmcConfig {
    fn default() -> Self {
        Self { schedule: Schedule::default(), particles: 1000, resample_threshold: 0.5 }
    }
}

impl SmcConfig {
    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        if self.particles == 0 {
            return Err(Error::InvalidSchedule("particle count must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.resample_threshold) {
            return Err(Error::InvalidSchedule("resample threshold must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Independent generator for particle `i` of a stage.
pub fn particle_rng(stage_seed: u64, i: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(stage_seed);
    rng.set_stream(i as u64);
    rng
}

fn scene_key<T: Scalar>(children: &[Child<T>]) -> Vec<u64> {
    children
        .iter()
        .flat_map(|c| {
            [
                c.object.id as u64,
                c.face.get() as u64,
                c.contact.dx.as_f64().to_bits(),
                c.contact.dy.as_f64().to_bits(),
                c.contact.dtheta.as_f64().to_bits(),
            ]
        })
        .collect()
}

/// Extends each partial scene in `partials` by one proposed child. Particles
/// sharing a partial scene share rendering and cell scores; each particle
/// draws from its own generator, so the result does not depend on grouping
/// or thread count.
fn extend_all<T: Scalar>(
    target: &Target<T>,
    schedule: &Schedule,
    partials: &[&[Child<T>]],
    stage_seed: u64,
) -> Result<Vec<(Child<T>, usize, f64, f64)>> {
    schedule.validate()?;
    let mut groups: BTreeMap<Vec<u64>, Vec<usize>> = BTreeMap::new();
    for (i, p) in partials.iter().enumerate() {
        groups.entry(scene_key(p)).or_default().push(i);
    }
    let sigmas: Vec<usize> = (0..target.noise_grid().len()).map(|n| target.sigma_index(n)).collect();
    let mut sigmas_sorted = sigmas.clone();
    sigmas_sorted.sort_unstable();
    sigmas_sorted.dedup();
    let mut out: Vec<Option<(Child<T>, usize, f64, f64)>> = vec![None; partials.len()];
    for members in groups.values() {
        let mut group = Group::new(target, partials[members[0]].to_vec(), &sigmas_sorted)?;
        for &i in members {
            let mut rng = particle_rng(stage_seed, i);
            let p = group.propose(schedule, &mut rng)?;
            out[i] = Some((p.child, p.noise, p.log_q, p.log_target));
        }
        debug_assert_eq!(group.children().len(), partials[members[0]].len());
    }
    Ok(out.into_iter().map(|o| o.expect("every particle extended")).collect())
}

/// First stage: `P` one-object particles weighted by `target / q`.
pub fn smc_init<T: Scalar, R: Rng + ?Sized>(
    target: &Target<T>,
    schedule: &Schedule,
    particles: usize,
    rng: &mut R,
) -> Result<Vec<Particle<T>>> {
    if particles == 0 {
        return Err(Error::InvalidSchedule("particle count must be positive".into()));
    }
    let empty: Vec<&[Child<T>]> = vec![&[]; particles];
    let seed = rng.gen::<u64>();
    let proposals = extend_all(target, schedule, &empty, seed)?;
    Ok(proposals
        .into_iter()
        .map(|(child, noise, log_q, log_target)| Particle {
            children: vec![child],
            noise_index: noise,
            noise: target.noise_params(noise),
            log_weight: log_target - log_q,
            log_target,
        })
        .collect())
}

/// Adds one child to every particle and applies the incremental weight.
pub fn smc_extend<T: Scalar, R: Rng + ?Sized>(
    particles: Vec<Particle<T>>,
    target: &Target<T>,
    schedule: &Schedule,
    rng: &mut R,
) -> Result<Vec<Particle<T>>> {
    let Some(first) = particles.first() else {
        return Ok(particles);
    };
    let arity = first.children.len();
    if let Some(bad) = particles.iter().find(|p| p.children.len() != arity) {
        return Err(Error::ParticleArity { expected: arity, got: bad.children.len() });
    }
    let partials: Vec<&[Child<T>]> = particles.iter().map(|p| p.children.as_slice()).collect();
    let seed = rng.gen::<u64>();
    let proposals = extend_all(target, schedule, &partials, seed)?;
    // The previous noise setting is dropped; a uniform backward kernel over
    // the grid keeps the incremental weights unbiased for the evidence.
    let log_backward = -(target.noise_grid().len() as f64).ln();
    Ok(particles
        .into_iter()
        .zip(proposals)
        .map(|(mut p, (child, noise, log_q, log_target))| {
            p.log_weight = if p.log_weight == f64::NEG_INFINITY || log_target == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                p.log_weight + log_target + log_backward - p.log_target - log_q
            };
            p.children.push(child);
            p.noise_index = noise;
            p.noise = target.noise_params(noise);
            p.log_target = log_target;
            p
        })
        .collect())
}

/// `log Σ exp(x)`.
pub fn log_sum_exp(xs: impl IntoIterator<Item = f64>) -> f64 {
    let xs: Vec<f64> = xs.into_iter().collect();
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Normalized weights; fails if every weight is zero.
pub fn normalized_weights<T: Scalar>(particles: &[Particle<T>]) -> Result<Vec<f64>> {
    let lse = log_sum_exp(particles.iter().map(|p| p.log_weight));
    if !lse.is_finite() {
        return Err(Error::DegenerateWeights);
    }
    Ok(particles.iter().map(|p| (p.log_weight - lse).exp()).collect())
}

/// `(Σw)² / Σw²`, between 1 and the particle count.
pub fn effective_sample_size<T: Scalar>(particles: &[Particle<T>]) -> Result<f64> {
    let w = normalized_weights(particles)?;
    Ok(1.0 / w.iter().map(|x| x * x).sum::<f64>())
}

/// Systematic resampling; offspring carry equal weights whose sum equals
/// the original total.
pub fn resample_systematic<T: Scalar, R: Rng + ?Sized>(particles: &[Particle<T>], rng: &mut R) -> Result<Vec<Particle<T>>> {
    let w = normalized_weights(particles)?;
    let n = particles.len();
    let lse = log_sum_exp(particles.iter().map(|p| p.log_weight));
    let log_w = lse - (n as f64).ln();
    let last = w.iter().rposition(|&x| x > 0.0).expect("normalized weights have positive mass");
    let u0 = rng.gen::<f64>();
    let mut out = Vec::with_capacity(n);
    let mut cum = 0.0;
    let mut j = 0;
    for i in 0..n {
        let u = (u0 + i as f64) / n as f64;
        while j < last && cum + w[j] <= u {
            cum += w[j];
            j += 1;
        }
        let mut p = particles[j].clone();
        p.log_weight = log_w;
        out.push(p);
    }
    Ok(out)
}

/// Final particles and diagnostics of a run.
#[derive(Clone, Debug)]
pub struct SmcResult<T: Scalar> {
    pub particles: Vec<Particle<T>>,
    /// Estimate of the log normalizing constant of the last target.
    pub log_evidence: f64,
    /// ESS after each stage's reweighting.
    pub ess: Vec<f64>,
    /// Whether particles were resampled after each stage.
    pub resampled: Vec<bool>,
}

/// Runs `n` stages, resampling between stages when the ESS drops below
/// `threshold · P`.
pub fn run_smc<T: Scalar, R: Rng + ?Sized>(target: &Target<T>, n: usize, cfg: &SmcConfig, rng: &mut R) -> Result<SmcResult<T>> {
    cfg.validate()?;
    if n == 0 {
        return Err(Error::InvalidSchedule("at least one object must be inferred".into()));
    }
    let mut particles = smc_init(target, &cfg.schedule, cfg.particles, rng)?;
    let mut ess = Vec::with_capacity(n);
    let mut resampled = Vec::with_capacity(n);
    for stage in 0..n {
        if stage > 0 {
            particles = smc_extend(particles, target, &cfg.schedule, rng)?;
        }
        let e = effective_sample_size(&particles)?;
        ess.push(e);
        let last = stage + 1 == n;
        let resample = !last && e < cfg.resample_threshold * cfg.particles as f64;
        if resample {
            particles = resample_systematic(&particles, rng)?;
        }
        resampled.push(resample);
    }
    let log_evidence = log_sum_exp(particles.iter().map(|p| p.log_weight)) - (particles.len() as f64).ln();
    Ok(SmcResult { particles, log_evidence, ess, resampled })
}

/// Particle with the highest log target.
pub fn map_particle<T: Scalar>(particles: &[Particle<T>]) -> Option<&Particle<T>> {
    particles
        .iter()
        .filter(|p| !p.log_target.is_nan())
        .max_by(|a, b| a.log_target.total_cmp(&b.log_target))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn weighted(ws: &[f64]) -> Vec<Particle<f64>> {
        ws.iter()
            .enumerate()
            .map(|(i, &w)| Particle {
                children: Vec::new(),
                noise_index: i,
                noise: NoiseParams { p_outlier: 0.1, sigma: 0.01 },
                log_weight: w.ln(),
                log_target: 0.0,
            })
            .collect()
    }

    fn counts(ps: &[Particle<f64>], n: usize) -> Vec<usize> {
        let mut c = vec![0; n];
        for p in ps {
            c[p.noise_index] += 1;
        }
        c
    }

    #[test]
    fn ess_examples() {
        assert!((effective_sample_size(&weighted(&[1.0; 8])).unwrap() - 8.0).abs() < 1e-12);
        assert!((effective_sample_size(&weighted(&[0.0, 3.0, 0.0])).unwrap() - 1.0).abs() < 1e-12);
        let e = effective_sample_size(&weighted(&[0.5, 0.25, 0.25])).unwrap();
        assert!((e - 1.0 / 0.375).abs() < 1e-12);
        assert!(matches!(effective_sample_size(&weighted(&[0.0, 0.0])), Err(Error::DegenerateWeights)));
    }

    #[test]
    fn systematic_resampling_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = resample_systematic(&weighted(&[1.0; 5]), &mut rng).unwrap();
        assert_eq!(counts(&u, 5), vec![1; 5]);
        let one = resample_systematic(&weighted(&[1.0, 0.0, 0.0, 0.0]), &mut rng).unwrap();
        assert_eq!(counts(&one, 4), vec![4, 0, 0, 0]);
        for _ in 0..200 {
            // Ten particles, three carrying all the mass.
            let mut ps = weighted(&[0.5, 0.3, 0.2]);
            let proto = ps[0].clone();
            ps.extend((3..10).map(|i| Particle { noise_index: i, log_weight: f64::NEG_INFINITY, ..proto.clone() }));
            let r = resample_systematic(&ps, &mut rng).unwrap();
            assert_eq!(r.len(), 10);
            let c = counts(&r, 10);
            for (got, want) in c.iter().zip([5usize, 3, 2]) {
                assert!(got.abs_diff(want) <= 1, "{c:?}");
            }
            assert_eq!(c[3..].iter().sum::<usize>(), 0);
        }
    }

    #[test]
    fn resampling_preserves_total_weight() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ps = weighted(&[0.2, 3.0, 0.7]);
        let before = log_sum_exp(ps.iter().map(|p| p.log_weight));
        let r = resample_systematic(&ps, &mut rng).unwrap();
        let after = log_sum_exp(r.iter().map(|p| p.log_weight));
        assert!((before - after).abs() < 1e-12);
        assert!(r.iter().all(|p| p.log_weight == r[0].log_weight));
    }

    #[test]
    fn map_prefers_highest_target() {
        let mut ps = weighted(&[1.0, 1.0, 1.0]);
        ps[1].log_target = 5.0;
        ps[2].log_target = f64::NEG_INFINITY;
        assert_eq!(map_particle(&ps).unwrap().noise_index, 1);
    }

    #[test]
    fn streams_are_independent() {
        let a: u64 = particle_rng(9, 0).gen();
        let b: u64 = particle_rng(9, 1).gen();
        let a2: u64 = particle_rng(9, 0).gen();
        assert_ne!(a, b);
        assert_eq!(a, a2);
    }
}

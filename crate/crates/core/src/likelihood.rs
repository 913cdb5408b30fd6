//! Depth observation model.
//!
//! Each observed point is a mixture of a uniform outlier over the visible
//! frustum and an isotropic Gaussian around a uniformly chosen rendered point:
//!
//! ```text
//! log p = log prefactor
//!       + Σ_i log( p_out / V + (1 - p_out) / |y| · Σ_j N3(obs_i; rend_j, σ² I) )
//! ```
//!
//! The windowed form restricts the inner sum for an observed pixel to the
//! rendered pixels in a `(2w+1)²` window around it, keeping the global `|y|`.
//! Inner sums are evaluated relative to the closest rendered point, so the
//! mixture never underflows when every Gaussian term is tiny.

use nalgebra::Vector3;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{cloud_to_depth, depth_to_cloud, CameraIntrinsics, DepthImage, PointCloud};
use crate::render::PixelRect;
use crate::Scalar;

/// Sensor noise: outlier probability and per-coordinate standard deviation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseParams<T: Scalar> {
    pub p_outlier: T,
    pub sigma: T,
}

impl<T: Scalar> NoiseParams<T> {
    pub fn new(p_outlier: T, sigma: T) -> Result<Self> {
        if !(p_outlier >= T::zero() && p_outlier <= T::one()) {
            return Err(Error::InvalidNoise(format!("p_outlier {p_outlier} not in [0, 1]")));
        }
        if !(sigma > T::zero() && sigma.is_finite()) {
            return Err(Error::InvalidNoise(format!("sigma {sigma} must be positive")));
        }
        Ok(Self { p_outlier, sigma })
    }
}

/// Volume of the visible frustum, the outlier density's normalizer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SceneVolume<T: Scalar>(pub T);

/// How the noise-level factor in front of the product is evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Prefactor {
    /// `σ / σ_max`.
    #[default]
    Printed,
    /// `1 / σ_max`, the density of a uniform prior on `σ`.
    UniformPrior,
}

impl Prefactor {
    pub fn log_value<T: Scalar>(self, sigma: T, sigma_max: T) -> T {
        match self {
            Prefactor::Printed => (sigma / sigma_max).ln(),
            Prefactor::UniformPrior => -sigma_max.ln(),
        }
    }
}

/// Frustum volume between the clip planes:
/// `(far³ - near³)/3 · (width/fx) · (height/fy)`.
pub fn visible_volume<T: Scalar>(k: &CameraIntrinsics<T>) -> SceneVolume<T> {
    let three = T::lit(3.0);
    let depth_term = (k.far.powi(3) - k.near.powi(3)) / three;
    SceneVolume(depth_term * (T::lit(k.width as f64) / k.fx) * (T::lit(k.height as f64) / k.fy))
}

/// Log density of the noise prior: uniform `p_outlier` on `[0, 1]` and
/// uniform `σ` on `(0, σ_max]`.
pub fn joint_noise_prior_logpdf<T: Scalar>(np: &NoiseParams<T>, sigma_max: T) -> T {
    let in_support = np.p_outlier >= T::zero()
        && np.p_outlier <= T::one()
        && np.sigma > T::zero()
        && np.sigma <= sigma_max;
    if in_support {
        -sigma_max.ln()
    } else {
        T::min_value().unwrap_or(-T::max_finite()) * T::lit(2.0)
    }
}

/// Uniform sample from the visible frustum (density ∝ z² along depth).
pub fn sample_frustum_point<T: Scalar, R: Rng + ?Sized>(k: &CameraIntrinsics<T>, rng: &mut R) -> Vector3<T> {
    let (n3, f3) = (k.near.as_f64().powi(3), k.far.as_f64().powi(3));
    let z = (n3 + rng.gen::<f64>() * (f3 - n3)).cbrt();
    let u = -0.5 + rng.gen::<f64>() * k.width as f64;
    let v = -0.5 + rng.gen::<f64>() * k.height as f64;
    k.backproject(T::lit(u), T::lit(v), T::lit(z))
}

/// Forward noise process on the point cloud of a rendered image.
///
/// Output point `i` is an outlier with probability `p_outlier` (uniform in
/// the frustum); otherwise it is rendered point `π(i)` plus isotropic Gaussian
/// noise, where `π` is a uniformly random permutation. Each inlier's source is
/// therefore uniform over the rendered cloud, and with no outliers and no
/// noise the output is a permutation of it.
pub fn sample_observation_cloud<T: Scalar, R: Rng + ?Sized>(
    y: &DepthImage<T>,
    k: &CameraIntrinsics<T>,
    np: &NoiseParams<T>,
    rng: &mut R,
) -> Result<PointCloud<T>> {
    let rendered = depth_to_cloud(y, k)?;
    if rendered.is_empty() {
        return Err(Error::EmptyRender);
    }
    let mut order: Vec<usize> = (0..rendered.len()).collect();
    order.shuffle(rng);
    let p = np.p_outlier.as_f64();
    let sigma = np.sigma.as_f64();
    let points = order
        .into_iter()
        .map(|src| {
            if rng.gen::<f64>() < p {
                sample_frustum_point(k, rng)
            } else {
                let q = rendered.points[src];
                let mut noise = || {
                    let z: f64 = StandardNormal.sample(rng);
                    T::lit(sigma * z)
                };
                Vector3::new(q.x + noise(), q.y + noise(), q.z + noise())
            }
        })
        .collect();
    Ok(PointCloud::new(points))
}

/// Noisy observed depth image: the sampled cloud re-projected with a z-test.
pub fn sample_observation<T: Scalar, R: Rng + ?Sized>(
    y: &DepthImage<T>,
    k: &CameraIntrinsics<T>,
    np: &NoiseParams<T>,
    rng: &mut R,
) -> Result<DepthImage<T>> {
    Ok(cloud_to_depth(&sample_observation_cloud(y, k, np, rng)?, k))
}

/// Per-observation mixture term in log space.
#[inline]
fn mixture_log_term<T: Scalar>(log_outlier: T, log_inlier_coef: T, d2min: T, rel_sum: T, inv_two_var: T) -> T {
    let lb = if rel_sum > T::zero() {
        log_inlier_coef - d2min * inv_two_var + rel_sum.ln()
    } else {
        T::min_value().unwrap_or(-T::max_finite()) * T::lit(2.0)
    };
    log_add_exp(log_outlier, lb)
}

#[inline]
fn log_add_exp<T: Scalar>(a: T, b: T) -> T {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if !hi.is_finite() {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

struct MixtureConstants<T> {
    log_outlier: T,
    log_inlier_coef: T,
    inv_two_var: T,
}

impl<T: Scalar> MixtureConstants<T> {
    fn new(np: &NoiseParams<T>, vol: T, foreground: usize) -> Self {
        let var = np.sigma * np.sigma;
        let log_norm = -T::lit(1.5) * (T::two_pi() * var).ln();
        Self {
            log_outlier: (np.p_outlier / vol).ln(),
            log_inlier_coef: ((T::one() - np.p_outlier) / T::lit(foreground as f64)).ln() + log_norm,
            inv_two_var: T::one() / (T::lit(2.0) * var),
        }
    }
}

fn check_sigma<T: Scalar>(np: &NoiseParams<T>) -> Result<()> {
    if !(np.sigma > T::zero()) {
        return Err(Error::InvalidNoise(format!("sigma {} must be positive", np.sigma)));
    }
    Ok(())
}

/// Unwindowed log likelihood of an observed cloud given a rendered cloud.
pub fn full_log_likelihood<T: Scalar>(
    obs: &PointCloud<T>,
    rendered: &PointCloud<T>,
    np: &NoiseParams<T>,
    vol: SceneVolume<T>,
    sigma_max: T,
    prefactor: Prefactor,
) -> Result<T> {
    check_sigma(np)?;
    if rendered.is_empty() {
        return Err(Error::EmptyRender);
    }
    let c = MixtureConstants::new(np, vol.0, rendered.len());
    let mut d2 = vec![T::zero(); rendered.len()];
    let mut total = prefactor.log_value(np.sigma, sigma_max);
    for q in &obs.points {
        let mut d2min = T::max_finite();
        for (slot, r) in d2.iter_mut().zip(&rendered.points) {
            *slot = (q - r).norm_squared();
            d2min = d2min.min(*slot);
        }
        let rel = d2.iter().fold(T::zero(), |acc, &d| acc + (-(d - d2min) * c.inv_two_var).exp());
        total += mixture_log_term(c.log_outlier, c.log_inlier_coef, d2min, rel, c.inv_two_var);
    }
    Ok(total)
}

/// Windowed log likelihood of an observed depth image given a rendered one.
///
/// Background observed pixels are skipped; background rendered pixels
/// contribute nothing to the inner sums. Fails if the rendered image has no
/// foreground pixel.
#[allow(clippy::too_many_arguments)]
pub fn windowed_log_likelihood<T: Scalar>(
    obs: &DepthImage<T>,
    rendered: &DepthImage<T>,
    k: &CameraIntrinsics<T>,
    np: &NoiseParams<T>,
    vol: SceneVolume<T>,
    sigma_max: T,
    window: usize,
    prefactor: Prefactor,
) -> Result<T> {
    check_sigma(np)?;
    let scorer = WindowedScorer::new(obs, k, &[np.sigma], window, vol, sigma_max, prefactor)?;
    let sums = scorer.kernel_sums(rendered, &[0])?;
    scorer.log_likelihood(&sums, 0, np.p_outlier)
}

/// Which form of the likelihood a model evaluates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LikelihoodMode {
    /// Every rendered point contributes to every observed point.
    Full,
    /// Inner sums restricted to a `(2·radius+1)²` pixel window.
    Windowed { radius: usize },
}

impl Default for LikelihoodMode {
    fn default() -> Self {
        LikelihoodMode::Windowed { radius: 2 }
    }
}

/// Log likelihood of `obs` given `rendered` under `mode`.
#[allow(clippy::too_many_arguments)]
pub fn log_likelihood<T: Scalar>(
    obs: &DepthImage<T>,
    rendered: &DepthImage<T>,
    k: &CameraIntrinsics<T>,
    np: &NoiseParams<T>,
    vol: SceneVolume<T>,
    sigma_max: T,
    mode: LikelihoodMode,
    prefactor: Prefactor,
) -> Result<T> {
    match mode {
        LikelihoodMode::Full => {
            let o = depth_to_cloud(obs, k)?;
            let r = depth_to_cloud(rendered, k)?;
            full_log_likelihood(&o, &r, np, vol, sigma_max, prefactor)
        }
        LikelihoodMode::Windowed { radius } => {
            windowed_log_likelihood(obs, rendered, k, np, vol, sigma_max, radius, prefactor)
        }
    }
}

/// Per-observed-pixel inner sums for a rendered image, reusable across noise
/// settings and updatable when only part of the render changes.
#[derive(Clone, Debug)]
pub struct KernelSums<T: Scalar> {
    /// Smallest squared distance to a rendered point in the window.
    d2min: Vec<T>,
    /// `Σ_j exp(-(d_j² - d2min)/(2σ²))` per sigma index; empty if not computed.
    rel: Vec<Vec<T>>,
    foreground: usize,
}

impl<T: Scalar> KernelSums<T> {
    pub fn foreground(&self) -> usize {
        self.foreground
    }

    pub fn has_sigma(&self, s: usize) -> bool {
        self.rel.get(s).is_some_and(|r| r.len() == self.d2min.len())
    }
}

/// Precomputed observation for repeated windowed scoring against many
/// rendered hypotheses.
#[derive(Clone, Debug)]
pub struct WindowedScorer<T: Scalar> {
    k: CameraIntrinsics<T>,
    window: usize,
    sigmas: Vec<T>,
    volume: SceneVolume<T>,
    sigma_max: T,
    prefactor: Prefactor,
    ray_x: Vec<T>,
    ray_y: Vec<T>,
    /// Foreground observed pixels in row-major order.
    obs_pixels: Vec<(usize, usize)>,
    obs_points: Vec<Vector3<T>>,
}

impl<T: Scalar> WindowedScorer<T> {
    pub fn new(
        obs: &DepthImage<T>,
        k: &CameraIntrinsics<T>,
        sigmas: &[T],
        window: usize,
        volume: SceneVolume<T>,
        sigma_max: T,
        prefactor: Prefactor,
    ) -> Result<Self> {
        obs.check_dims(k)?;
        if sigmas.iter().any(|s| !(*s > T::zero())) {
            return Err(Error::InvalidNoise("sigma must be positive".into()));
        }
        let ray_x: Vec<T> = (0..k.width).map(|u| (T::lit(u as f64) - k.cx) / k.fx).collect();
        let ray_y: Vec<T> = (0..k.height).map(|v| (T::lit(v as f64) - k.cy) / k.fy).collect();
        let mut obs_pixels = Vec::new();
        let mut obs_points = Vec::new();
        for v in 0..k.height {
            for u in 0..k.width {
                let z = obs.get(u, v);
                if !k.is_background(z) {
                    obs_pixels.push((u, v));
                    obs_points.push(Vector3::new(ray_x[u] * z, ray_y[v] * z, z));
                }
            }
        }
        Ok(Self {
            k: *k,
            window,
            sigmas: sigmas.to_vec(),
            volume,
            sigma_max,
            prefactor,
            ray_x,
            ray_y,
            obs_pixels,
            obs_points,
        })
    }

    pub fn sigmas(&self) -> &[T] {
        &self.sigmas
    }

    pub fn intrinsics(&self) -> &CameraIntrinsics<T> {
        &self.k
    }

    pub fn observed_count(&self) -> usize {
        self.obs_points.len()
    }

    /// Inner sums for every observed pixel, for the requested sigma indices.
    pub fn kernel_sums(&self, rendered: &DepthImage<T>, sigma_idx: &[usize]) -> Result<KernelSums<T>> {
        rendered.check_dims(&self.k)?;
        let n = self.obs_points.len();
        let mut sums = KernelSums {
            d2min: vec![T::max_finite(); n],
            rel: self.empty_rel(sigma_idx, n),
            foreground: rendered.foreground_count(&self.k),
        };
        let mut buf = Vec::new();
        for i in 0..n {
            self.fill_pixel(&mut sums, i, rendered, sigma_idx, &mut buf);
        }
        Ok(sums)
    }

    /// Inner sums after the render changed only inside `changed`: pixels whose
    /// window misses the rectangle keep their `base` values. The result equals
    /// [`kernel_sums`](Self::kernel_sums) on `rendered` bit for bit.
    pub fn update_kernel_sums(
        &self,
        base: &KernelSums<T>,
        rendered: &DepthImage<T>,
        changed: Option<PixelRect>,
        sigma_idx: &[usize],
    ) -> Result<KernelSums<T>> {
        rendered.check_dims(&self.k)?;
        let n = self.obs_points.len();
        let mut sums = KernelSums {
            d2min: base.d2min.clone(),
            rel: self.empty_rel(sigma_idx, n),
            foreground: rendered.foreground_count(&self.k),
        };
        for &s in sigma_idx {
            if !base.has_sigma(s) {
                return Err(Error::InvalidNoise(format!("base sums lack sigma index {s}")));
            }
            sums.rel[s].copy_from_slice(&base.rel[s]);
        }
        let Some(r) = changed else {
            return Ok(sums);
        };
        let w = self.window;
        let mut buf = Vec::new();
        for i in 0..n {
            let (u, v) = self.obs_pixels[i];
            if u + w >= r.u0 && u < r.u1 + w && v + w >= r.v0 && v < r.v1 + w {
                self.fill_pixel(&mut sums, i, rendered, sigma_idx, &mut buf);
            }
        }
        Ok(sums)
    }

    fn empty_rel(&self, sigma_idx: &[usize], n: usize) -> Vec<Vec<T>> {
        let mut rel = vec![Vec::new(); self.sigmas.len()];
        for &s in sigma_idx {
            rel[s] = vec![T::zero(); n];
        }
        rel
    }

    fn fill_pixel(
        &self,
        sums: &mut KernelSums<T>,
        i: usize,
        rendered: &DepthImage<T>,
        sigma_idx: &[usize],
        buf: &mut Vec<T>,
    ) {
        let (u, v) = self.obs_pixels[i];
        let q = self.obs_points[i];
        let w = self.window;
        let (u_lo, u_hi) = (u.saturating_sub(w), (u + w).min(self.k.width - 1));
        let (v_lo, v_hi) = (v.saturating_sub(w), (v + w).min(self.k.height - 1));
        buf.clear();
        let mut d2min = T::max_finite();
        for rv in v_lo..=v_hi {
            let row = &rendered.data[rv * self.k.width..(rv + 1) * self.k.width];
            let ry = self.ray_y[rv];
            for ru in u_lo..=u_hi {
                let z = row[ru];
                if self.k.is_background(z) {
                    continue;
                }
                let dx = q.x - self.ray_x[ru] * z;
                let dy = q.y - ry * z;
                let dz = q.z - z;
                let d2 = dx * dx + dy * dy + dz * dz;
                d2min = d2min.min(d2);
                buf.push(d2);
            }
        }
        sums.d2min[i] = d2min;
        for &s in sigma_idx {
            let sigma = self.sigmas[s];
            let inv = T::one() / (T::lit(2.0) * sigma * sigma);
            sums.rel[s][i] = buf.iter().fold(T::zero(), |acc, &d| acc + (-(d - d2min) * inv).exp());
        }
    }

    /// Windowed log likelihood for sigma index `s` and outlier probability
    /// `p_outlier`, summed in row-major pixel order.
    pub fn log_likelihood(&self, sums: &KernelSums<T>, s: usize, p_outlier: T) -> Result<T> {
        if sums.foreground == 0 {
            return Err(Error::EmptyRender);
        }
        if !sums.has_sigma(s) {
            return Err(Error::InvalidNoise(format!("sums lack sigma index {s}")));
        }
        let np = NoiseParams::new(p_outlier, self.sigmas[s])?;
        let c = MixtureConstants::new(&np, self.volume.0, sums.foreground);
        let rel = &sums.rel[s];
        let mut total = self.prefactor.log_value(np.sigma, self.sigma_max);
        for i in 0..self.obs_points.len() {
            total += mixture_log_term(c.log_outlier, c.log_inlier_coef, sums.d2min[i], rel[i], c.inv_two_var);
        }
        Ok(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn k16() -> CameraIntrinsics<f64> {
        CameraIntrinsics::centered(16, 16, 1.0, 0.1, 3.0).unwrap()
    }

    fn random_depth(rng: &mut ChaCha8Rng, k: &CameraIntrinsics<f64>, p_bg: f64) -> DepthImage<f64> {
        let data = (0..k.pixel_count())
            .map(|_| if rng.gen::<f64>() < p_bg { k.far } else { rng.gen_range(0.8..1.2) })
            .collect();
        DepthImage::new(k.width, k.height, data).unwrap()
    }

    #[test]
    fn visible_volume_limits() {
        let k = CameraIntrinsics::<f64>::new(4.0, 4.0, 1.5, 1.5, 4, 4, 1e-9, 1.0).unwrap();
        assert!((visible_volume(&k).0 - 1.0 / 3.0).abs() < 1e-12);
        let k2 = CameraIntrinsics { far: 2.0, ..k };
        assert!((visible_volume(&k2).0 / visible_volume(&k).0 - 8.0).abs() < 1e-9);
    }

    #[test]
    fn visible_volume_matches_rejection_sampling() {
        let k = CameraIntrinsics::new(500.0, 500.0, 319.5, 239.5, 640, 480, 0.1, 5.0).unwrap();
        let v = visible_volume(&k).0;
        // Bounding box of the frustum at the far plane.
        let hx = 0.5 * 640.0 * 5.0 / 500.0;
        let hy = 0.5 * 480.0 * 5.0 / 500.0;
        let boxv = (2.0 * hx) * (2.0 * hy) * 5.0;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 400_000;
        let mut hits = 0;
        for _ in 0..n {
            let p = Vector3::new(rng.gen_range(-hx..hx), rng.gen_range(-hy..hy), rng.gen_range(0.0..5.0));
            if p.z >= k.near {
                let (u, w) = k.project(&p);
                if (-0.5..639.5).contains(&u) && (-0.5..479.5).contains(&w) {
                    hits += 1;
                }
            }
        }
        let est = boxv * hits as f64 / n as f64;
        assert!((est / v - 1.0).abs() < 0.01, "{est} vs {v}");
    }

    #[test]
    fn noise_prior_density() {
        let np = NoiseParams::new(0.3, 0.05).unwrap();
        assert_eq!(joint_noise_prior_logpdf(&np, 1.0), 0.0);
        assert!((joint_noise_prior_logpdf(&np, 0.1) - 10f64.ln()).abs() < 1e-12);
        let wide = NoiseParams::new(0.3, 2.0).unwrap();
        assert!(joint_noise_prior_logpdf(&wide, 1.0) == f64::NEG_INFINITY);
        assert!(NoiseParams::new(1.5, 0.1).is_err());
        assert!(NoiseParams::new(0.5, 0.0).is_err());
    }

    #[test]
    fn pure_outlier_likelihood_ignores_render() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let obs = PointCloud::new((0..9).map(|_| Vector3::new(rng.gen(), rng.gen(), rng.gen())).collect());
        let a = PointCloud::new(vec![Vector3::new(0.0, 0.0, 1.0)]);
        let b = PointCloud::new((0..5).map(|_| Vector3::new(rng.gen(), rng.gen(), 2.0)).collect());
        let np = NoiseParams::new(1.0, 0.02).unwrap();
        let vol = SceneVolume(2.5);
        let la = full_log_likelihood(&obs, &a, &np, vol, 0.1, Prefactor::Printed).unwrap();
        let lb = full_log_likelihood(&obs, &b, &np, vol, 0.1, Prefactor::Printed).unwrap();
        let want = (0.02f64 / 0.1).ln() + 9.0 * (1.0f64 / 2.5).ln();
        assert!((la - want).abs() < 1e-12 && (lb - want).abs() < 1e-12);
    }

    #[test]
    fn gaussian_at_mode() {
        let p = PointCloud::new(vec![Vector3::new(0.1, 0.2, 1.0)]);
        let np = NoiseParams::new(0.0, 0.01).unwrap();
        let got = full_log_likelihood(&p, &p, &np, SceneVolume(1.0), 0.05, Prefactor::Printed).unwrap();
        let want = (0.01f64 / 0.05).ln() - 1.5 * (2.0 * std::f64::consts::PI * 1e-4).ln();
        assert!((got - want).abs() < 1e-12);
        let uni = full_log_likelihood(&p, &p, &np, SceneVolume(1.0), 0.05, Prefactor::UniformPrior).unwrap();
        assert!((uni - (want - (0.01f64 / 0.05).ln() - 0.05f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn far_points_without_outliers_stay_finite() {
        let a = PointCloud::new(vec![Vector3::new(0.0, 0.0, 1.0)]);
        let b = PointCloud::new(vec![Vector3::new(0.0, 0.0, 2.0)]);
        let np = NoiseParams::new(0.0, 0.001).unwrap();
        let l = full_log_likelihood(&a, &b, &np, SceneVolume(1.0), 0.01, Prefactor::Printed).unwrap();
        let want = (0.1f64).ln() - 1.5 * (2.0 * std::f64::consts::PI * 1e-6).ln() - 1.0 / (2.0 * 1e-6);
        assert!((l - want).abs() < 1e-6 * want.abs());
    }

    #[test]
    fn full_likelihood_errors() {
        let p = PointCloud::new(vec![Vector3::new(0.0, 0.0, 1.0)]);
        let np = NoiseParams::new(0.1, 0.01).unwrap();
        assert!(matches!(
            full_log_likelihood(&p, &PointCloud::default(), &np, SceneVolume(1.0), 0.1, Prefactor::Printed),
            Err(Error::EmptyRender)
        ));
        let bad = NoiseParams { p_outlier: 0.1, sigma: 0.0 };
        assert!(full_log_likelihood(&p, &p, &bad, SceneVolume(1.0), 0.1, Prefactor::Printed).is_err());
    }

    #[test]
    fn zero_window_outlier_floor() {
        let k = k16();
        let mut obs = DepthImage::background(&k);
        let mut rend = DepthImage::background(&k);
        obs.data[5 * 16 + 5] = 1.0;
        rend.data[5 * 16 + 5] = 1.5;
        let np = NoiseParams::new(0.2, 0.01).unwrap();
        let vol = visible_volume(&k);
        let l = windowed_log_likelihood(&obs, &rend, &k, &np, vol, 0.05, 0, Prefactor::Printed).unwrap();
        let floor = (0.01f64 / 0.05).ln() + (0.2 / vol.0).ln();
        assert!((l - floor).abs() < 1e-9);
        assert!(l >= floor);
    }

    #[test]
    fn windowed_equals_full_when_window_covers_image() {
        let k = k16();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let obs = random_depth(&mut rng, &k, 0.2);
        let rend = random_depth(&mut rng, &k, 0.3);
        let np = NoiseParams::new(0.1, 0.05).unwrap();
        let vol = visible_volume(&k);
        let w = windowed_log_likelihood(&obs, &rend, &k, &np, vol, 0.1, 16, Prefactor::Printed).unwrap();
        let f = full_log_likelihood(
            &depth_to_cloud(&obs, &k).unwrap(),
            &depth_to_cloud(&rend, &k).unwrap(),
            &np,
            vol,
            0.1,
            Prefactor::Printed,
        )
        .unwrap();
        assert!(((w - f) / f).abs() < 1e-9, "{w} {f}");
    }

    #[test]
    fn likelihood_grows_with_window() {
        let k = k16();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let obs = random_depth(&mut rng, &k, 0.1);
        let rend = random_depth(&mut rng, &k, 0.1);
        let np = NoiseParams::new(0.2, 0.1).unwrap();
        let vol = visible_volume(&k);
        let mut prev = f64::NEG_INFINITY;
        for w in 0..10 {
            let l = windowed_log_likelihood(&obs, &rend, &k, &np, vol, 0.2, w, Prefactor::Printed).unwrap();
            assert!(l >= prev - 1e-9 * l.abs());
            prev = l;
        }
    }

    #[test]
    fn incremental_sums_match_from_scratch() {
        let k = k16();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let obs = random_depth(&mut rng, &k, 0.2);
        let base = random_depth(&mut rng, &k, 0.4);
        let mut changed = base.clone();
        for v in 4..9 {
            for u in 6..11 {
                changed.data[v * 16 + u] = 0.9 + 0.01 * u as f64;
            }
        }
        let rect = PixelRect { u0: 6, v0: 4, u1: 11, v1: 9 };
        let scorer =
            WindowedScorer::new(&obs, &k, &[0.02, 0.05], 2, visible_volume(&k), 0.05, Prefactor::Printed).unwrap();
        let b = scorer.kernel_sums(&base, &[0, 1]).unwrap();
        let inc = scorer.update_kernel_sums(&b, &changed, Some(rect), &[1]).unwrap();
        let full = scorer.kernel_sums(&changed, &[1]).unwrap();
        let li = scorer.log_likelihood(&inc, 1, 0.3).unwrap();
        let lf = scorer.log_likelihood(&full, 1, 0.3).unwrap();
        assert_eq!(li.to_bits(), lf.to_bits());
        assert!(scorer.log_likelihood(&inc, 0, 0.3).is_err());
    }

    #[test]
    fn empty_render_is_an_error() {
        let k = k16();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let obs = random_depth(&mut rng, &k, 0.2);
        let np = NoiseParams::new(0.1, 0.05).unwrap();
        let r = windowed_log_likelihood(&obs, &DepthImage::background(&k), &k, &np, visible_volume(&k), 0.1, 2, Prefactor::Printed);
        assert!(matches!(r, Err(Error::EmptyRender)));
    }

    #[test]
    fn noiseless_inliers_permute_the_render() {
        let k = k16();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let y = random_depth(&mut rng, &k, 0.5);
        let np = NoiseParams::new(0.0, 1e-300).unwrap();
        let c = sample_observation_cloud(&y, &k, &np, &mut rng).unwrap();
        let mut got: Vec<_> = c.points.iter().map(|p| [p.x, p.y, p.z].map(f64::to_bits)).collect();
        let mut want: Vec<_> = depth_to_cloud(&y, &k).unwrap().points.iter().map(|p| [p.x, p.y, p.z].map(f64::to_bits)).collect();
        got.sort();
        want.sort();
        assert_eq!(got, want);
        assert_eq!(sample_observation(&y, &k, &np, &mut rng).unwrap(), y);
    }

    #[test]
    fn outliers_fill_the_frustum_uniformly() {
        // Depth CDF of a uniform frustum point: (z³ - n³)/(f³ - n³).
        let k = k16();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let y = DepthImage::new(16, 16, vec![1.0; 256]).unwrap();
        let np = NoiseParams::new(1.0, 0.01).unwrap();
        let mut z = Vec::new();
        while z.len() < 10_000 {
            let c = sample_observation_cloud(&y, &k, &np, &mut rng).unwrap();
            z.extend(c.points.iter().map(|p| p.z));
        }
        z.truncate(10_000);
        z.sort_by(f64::total_cmp);
        let (n3, f3) = (0.1f64.powi(3), 27.0);
        let n = z.len() as f64;
        let d = z
            .iter()
            .enumerate()
            .map(|(i, &zi)| {
                let cdf = (zi.powi(3) - n3) / (f3 - n3);
                (cdf - i as f64 / n).abs().max((cdf - (i + 1) as f64 / n).abs())
            })
            .fold(0.0, f64::max);
        assert!(d < 1.63 / n.sqrt(), "KS statistic {d}");
    }

    #[test]
    fn inlier_residuals_have_requested_spread() {
        let k = CameraIntrinsics::centered(100, 100, 1.0, 0.1, 3.0).unwrap();
        let y = DepthImage::new(100, 100, vec![1.0; 10_000]).unwrap();
        let np = NoiseParams::new(0.0, 0.01).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let c = sample_observation_cloud(&y, &k, &np, &mut rng).unwrap();
        // Residual along depth relative to the z = 1 plane the inliers came from.
        let r: Vec<f64> = c.points.iter().map(|p| p.z - 1.0).collect();
        let m = r.iter().sum::<f64>() / r.len() as f64;
        let sd = (r.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (r.len() - 1) as f64).sqrt();
        assert!((sd / 0.01 - 1.0).abs() < 0.05, "{sd}");
    }

    #[test]
    fn all_background_render_cannot_be_corrupted() {
        let k = k16();
        let np = NoiseParams::new(0.1, 0.01).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            sample_observation(&DepthImage::background(&k), &k, &np, &mut rng),
            Err(Error::EmptyRender)
        ));
    }
}

//! The smoothed sliced estimator and its closed-form companions.
//!
//! For each of `L` directions `u_l` both sample sets are projected on
//! `u_l`, every projected value receives one `N(0, σ²)` draw, and the base
//! divergence of the two noisy 1D samples is raised to the power `p`. The
//! estimate is the mean over directions.
//!
//! Random streams:
//! - direction `l` comes from `(seed, [DIRECTIONS, l])`;
//! - the noise added to a set along direction `l` comes from
//!   `(seed, [NOISE, l, noise_key])`.
//!
//! Noise therefore follows the set (its key), not the argument position:
//! swapping the arguments swaps the inputs of every base divergence, and
//! passing the same set twice gives identical noisy projections.

use statrs::function::gamma::gamma;

use crate::divergences1d::{base_divergence, DivergenceSpec, Projected1D};
use crate::error::{invalid, Error, Result};
use crate::exec::Exec;
use crate::rng::RngStream;
use crate::sampling::{gaussian_noise, sphere_direction, Direction, SampleSet};

const DIRECTIONS: u64 = 0xD1EC;
const NOISE: u64 = 0x0015E;

/// Everything that determines an estimate besides the two inputs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoothedSliceConfig {
    pub sigma: f64,
    pub projections: usize,
    pub seed: u64,
    pub spec: DivergenceSpec,
}

impl SmoothedSliceConfig {
    pub fn new(spec: DivergenceSpec, sigma: f64, projections: usize, seed: u64) -> Self {
        Self {
            sigma,
            projections,
            seed,
            spec,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(invalid(format!(
                "sigma must be finite and >= 0, got {}",
                self.sigma
            )));
        }
        if self.projections == 0 {
            return Err(invalid("projection count L must be >= 1"));
        }
        self.spec.validate()
    }

    pub fn direction_stream(&self) -> RngStream {
        RngStream::with_path(self.seed, &[DIRECTIONS])
    }

    pub fn noise_stream(&self, direction: usize, noise_key: u64) -> RngStream {
        RngStream::with_path(self.seed, &[NOISE, direction as u64, noise_key])
    }
}

/// Monte-Carlo estimate of the smoothed sliced divergence.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimateReport {
    /// Mean of `per_projection`.
    pub value: f64,
    /// `D^p` along each direction, by direction index.
    pub per_projection: Vec<f64>,
    /// Unbiased sample variance of `per_projection` (0 when `L = 1`).
    pub variance: f64,
    /// `sqrt(variance / L)`.
    pub stderr: f64,
    /// Mean of the base divergence `D` itself, before the power.
    pub raw_value: f64,
}

impl EstimateReport {
    fn from_values(per_projection: Vec<f64>, raw: &[f64]) -> Self {
        let l = per_projection.len() as f64;
        let value = per_projection.iter().sum::<f64>() / l;
        let raw_value = raw.iter().sum::<f64>() / l;
        let variance = sample_variance(&per_projection).unwrap_or(0.0);
        Self {
            value,
            stderr: (variance / l).sqrt(),
            variance,
            per_projection,
            raw_value,
        }
    }

    pub fn projections(&self) -> usize {
        self.per_projection.len()
    }
}

fn sample_variance(v: &[f64]) -> Option<f64> {
    if v.len() < 2 {
        return None;
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    Some(v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0))
}

/// Radon projection of an empirical measure: `⟨x_i, u⟩` for every sample.
pub fn project(xs: &SampleSet, u: &Direction) -> Result<Projected1D> {
    if xs.dim() != u.dim() {
        return Err(Error::DimensionMismatch {
            left: xs.dim(),
            right: u.dim(),
        });
    }
    let u = u.as_slice();
    let values = xs
        .rows()
        .map(|row| row.iter().zip(u).map(|(a, b)| a * b).sum())
        .collect();
    Ok(Projected1D::from_vec_unchecked(values))
}

/// Adds one `N(0, σ²)` draw from `stream` to every projected value.
pub fn smooth(x: &Projected1D, stream: &RngStream, sigma: f64) -> Result<Projected1D> {
    let noise = gaussian_noise(stream, x.len(), sigma)?;
    if sigma == 0.0 {
        return Ok(x.clone());
    }
    let values = x.as_slice().iter().zip(noise).map(|(v, z)| v + z).collect();
    Ok(Projected1D::from_vec_unchecked(values))
}

/// `(D, D^p)` along direction `l`.
pub fn direction_term(
    mu: &SampleSet,
    nu: &SampleSet,
    cfg: &SmoothedSliceConfig,
    l: usize,
) -> Result<(f64, f64)> {
    let u = sphere_direction(&cfg.direction_stream(), mu.dim(), l)?;
    let px = smooth(
        &project(mu, &u)?,
        &cfg.noise_stream(l, mu.noise_key()),
        cfg.sigma,
    )?;
    let py = smooth(
        &project(nu, &u)?,
        &cfg.noise_stream(l, nu.noise_key()),
        cfg.sigma,
    )?;
    base_divergence(&px, &py, &cfg.spec)
}

/// Estimate with the default execution policy.
pub fn estimate_gssd(
    mu: &SampleSet,
    nu: &SampleSet,
    cfg: &SmoothedSliceConfig,
) -> Result<EstimateReport> {
    estimate_gssd_with(mu, nu, cfg, Exec::default())
}

pub fn estimate_gssd_with(
    mu: &SampleSet,
    nu: &SampleSet,
    cfg: &SmoothedSliceConfig,
    exec: Exec,
) -> Result<EstimateReport> {
    cfg.validate()?;
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch {
            left: mu.dim(),
            right: nu.dim(),
        });
    }
    let terms = exec.try_map_indexed(cfg.projections, |l| {
        direction_term(mu, nu, cfg, l).map_err(|e| Error::AtDirection {
            index: l,
            source: Box::new(e),
        })
    })?;
    let (raw, powered): (Vec<f64>, Vec<f64>) = terms.into_iter().unzip();
    Ok(EstimateReport::from_values(powered, &raw))
}

/// Population `G_σSWD_2^2` between `N(m1, s1² I)` and `N(m2, s2² I)`:
/// `‖m1 - m2‖² / d + (√(s1² + σ²) - √(s2² + σ²))²`.
///
/// Along `u` the smoothed projections are `N(⟨u, m⟩, s² + σ²)`, whose squared
/// 2-Wasserstein distance is the squared mean gap plus the squared std gap,
/// and `E_u ⟨u, v⟩² = ‖v‖² / d` on the sphere.
pub fn analytic_gsswd_gaussian(
    m1: &[f64],
    s1: f64,
    m2: &[f64],
    s2: f64,
    sigma: f64,
) -> Result<f64> {
    if m1.len() != m2.len() {
        return Err(Error::DimensionMismatch {
            left: m1.len(),
            right: m2.len(),
        });
    }
    if m1.is_empty() {
        return Err(invalid("dimension must be at least 1"));
    }
    if !(s1 > 0.0 && s2 > 0.0) {
        return Err(invalid(format!(
            "scales must be positive, got {s1} and {s2}"
        )));
    }
    if !(sigma >= 0.0) {
        return Err(invalid(format!("sigma must be >= 0, got {sigma}")));
    }
    let d = m1.len() as f64;
    let mean_term = m1
        .iter()
        .zip(m2)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / d;
    let std_gap = (s1 * s1 + sigma * sigma).sqrt() - (s2 * s2 + sigma * sigma).sqrt();
    Ok(mean_term + std_gap * std_gap)
}

/// Unbiased sample variance of the per-direction values, the estimator of
/// the Monte-Carlo constant `A²(p, σ)`.
pub fn estimate_variance_a2(report: &EstimateReport) -> Result<f64> {
    sample_variance(&report.per_projection)
        .ok_or_else(|| invalid("variance needs at least 2 projections"))
}

/// `E|Z|^p` for `Z ~ N(0, σ²)`: `σ^p 2^{p/2} Γ((p+1)/2) / √π`.
pub fn gaussian_abs_moment(p: f64, sigma: f64) -> f64 {
    sigma.powf(p) * 2f64.powf(p / 2.0) * gamma((p + 1.0) / 2.0) / std::f64::consts::PI.sqrt()
}

/// Surface area of the unit sphere `S^{d-1}`: `2 π^{d/2} / Γ(d/2)`.
pub fn sphere_area(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    2.0 * std::f64::consts::PI.powf(h) / gamma(h)
}

/// Additive constant `K` in the two-noise-level bound
/// `G_{σ1}SWD_p^p <= 2^{p-1} G_{σ2}SWD_p^p + K` for `σ1 <= σ2`:
/// `K = |S^{d-1}| 2^p E|Z'|^p` with `Z' ~ N(0, σ2² - σ1²)`.
pub fn two_level_constant(sigma1: f64, sigma2: f64, p: f64, d: usize) -> Result<f64> {
    if !(0.0 <= sigma1 && sigma1 <= sigma2) {
        return Err(invalid(format!(
            "need 0 <= sigma1 <= sigma2, got {sigma1}, {sigma2}"
        )));
    }
    if d == 0 || !(p >= 1.0) {
        return Err(invalid("need d >= 1 and p >= 1"));
    }
    let spread = (sigma2 * sigma2 - sigma1 * sigma1).sqrt();
    Ok(sphere_area(d) * 2f64.powf(p) * gaussian_abs_moment(p, spread))
}

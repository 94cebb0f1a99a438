//! Base divergences between one-dimensional uniform empirical measures.
//!
//! All entry points sort their inputs first, so results do not depend on
//! the order of the samples, and put the two arguments in a canonical order
//! before any order-sensitive summation, so `D(x, y)` and `D(y, x)` are
//! computed by the same floating-point operations.

mod mmd;
mod sinkhorn;

use std::cmp::Ordering;

use crate::error::{invalid, Error, Result};

pub use mmd::{gaussian_kernel_sum, mean_pairwise_distance, mmd_1d};
pub use sinkhorn::{entropic_ot_1d, sinkhorn_divergence_1d, EntropicSolution};

/// Which base divergence to slice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DivergenceKind {
    Wasserstein,
    Sinkhorn,
    Mmd,
}

impl DivergenceKind {
    pub fn label(self) -> &'static str {
        match self {
            DivergenceKind::Wasserstein => "wasserstein",
            DivergenceKind::Sinkhorn => "sinkhorn",
            DivergenceKind::Mmd => "mmd",
        }
    }
}

impl std::str::FromStr for DivergenceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "wasserstein" | "swd" | "w" => Ok(Self::Wasserstein),
            "sinkhorn" | "skd" => Ok(Self::Sinkhorn),
            "mmd" => Ok(Self::Mmd),
            other => Err(invalid(format!("unknown divergence kind {other:?}"))),
        }
    }
}

impl std::fmt::Display for DivergenceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Gaussian kernel bandwidth for MMD.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Bandwidth {
    /// Mean of all pairwise distances in the pooled sample.
    MeanPairwise,
    Fixed(f64),
}

impl std::str::FromStr for Bandwidth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("mean") || s.eq_ignore_ascii_case("mean-pairwise") {
            return Ok(Self::MeanPairwise);
        }
        match s.parse::<f64>() {
            Ok(h) if h > 0.0 && h.is_finite() => Ok(Self::Fixed(h)),
            _ => Err(invalid(format!(
                "bandwidth must be \"mean\" or a positive number, got {s:?}"
            ))),
        }
    }
}

impl std::fmt::Display for Bandwidth {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Bandwidth::MeanPairwise => f.write_str("mean"),
            Bandwidth::Fixed(h) => write!(f, "{h}"),
        }
    }
}

/// Base divergence and its parameters. `p` is the power applied to the
/// divergence before averaging over directions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DivergenceSpec {
    pub kind: DivergenceKind,
    pub p: f64,
    pub sinkhorn_lambda: f64,
    pub sinkhorn_tol: f64,
    pub sinkhorn_max_iter: usize,
    pub bandwidth: Bandwidth,
}

impl DivergenceSpec {
    pub const DEFAULT_P: f64 = 2.0;
    pub const DEFAULT_LAMBDA: f64 = 0.1;
    pub const DEFAULT_TOL: f64 = 1e-9;
    pub const DEFAULT_MAX_ITER: usize = 10_000;

    pub fn new(kind: DivergenceKind) -> Self {
        Self {
            kind,
            p: Self::DEFAULT_P,
            sinkhorn_lambda: Self::DEFAULT_LAMBDA,
            sinkhorn_tol: Self::DEFAULT_TOL,
            sinkhorn_max_iter: Self::DEFAULT_MAX_ITER,
            bandwidth: Bandwidth::MeanPairwise,
        }
    }

    pub fn wasserstein(p: f64) -> Self {
        Self::new(DivergenceKind::Wasserstein).with_p(p)
    }

    pub fn sinkhorn(p: f64, lambda: f64) -> Self {
        Self {
            sinkhorn_lambda: lambda,
            ..Self::new(DivergenceKind::Sinkhorn).with_p(p)
        }
    }

    pub fn mmd(p: f64, bandwidth: Bandwidth) -> Self {
        Self {
            bandwidth,
            ..Self::new(DivergenceKind::Mmd).with_p(p)
        }
    }

    pub fn with_p(mut self, p: f64) -> Self {
        self.p = p;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return Err(invalid(format!("order p must be >= 1, got {}", self.p)));
        }
        if self.kind == DivergenceKind::Sinkhorn {
            if !(self.sinkhorn_lambda > 0.0 && self.sinkhorn_lambda.is_finite()) {
                return Err(invalid(format!(
                    "sinkhorn lambda must be > 0, got {}",
                    self.sinkhorn_lambda
                )));
            }
            if !(self.sinkhorn_tol > 0.0) {
                return Err(invalid("sinkhorn tolerance must be > 0"));
            }
            if self.sinkhorn_max_iter == 0 {
                return Err(invalid("sinkhorn max_iter must be >= 1"));
            }
        }
        if let Bandwidth::Fixed(h) = self.bandwidth {
            if !(h > 0.0 && h.is_finite()) {
                return Err(invalid(format!("bandwidth must be > 0, got {h}")));
            }
        }
        Ok(())
    }

    pub fn label(&self) -> &'static str {
        self.kind.label()
    }
}

impl Default for DivergenceSpec {
    fn default() -> Self {
        Self::new(DivergenceKind::Wasserstein)
    }
}

/// One scalar per sample: the output of projecting a sample set on a line.
#[derive(Clone, Debug, PartialEq)]
pub struct Projected1D(Vec<f64>);

impl Projected1D {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("projected values must be finite"));
        }
        Ok(Self(values))
    }

    pub(crate) fn from_vec_unchecked(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for Projected1D {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

#[inline]
pub(crate) fn pow_p(v: f64, p: f64) -> f64 {
    if p == 1.0 {
        v
    } else if p == 2.0 {
        v * v
    } else {
        v.powf(p)
    }
}

pub(crate) fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_unstable_by(f64::total_cmp);
    s
}

/// Orders a pair by (length, then lexicographic `total_cmp`).
pub(crate) fn canonical<'a>(x: &'a [f64], y: &'a [f64]) -> (&'a [f64], &'a [f64]) {
    let ord = x.len().cmp(&y.len()).then_with(|| {
        x.iter()
            .zip(y)
            .map(|(a, b)| a.total_cmp(b))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or(Ordering::Equal)
    });
    if ord == Ordering::Greater {
        (y, x)
    } else {
        (x, y)
    }
}

fn check_order(p: f64) -> Result<()> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(invalid(format!("order p must be >= 1, got {p}")));
    }
    Ok(())
}

/// `W_p^p` between the uniform empirical measures on `x` and `y`.
///
/// Equal sizes reduce to matching sorted samples. Otherwise the quantile
/// integral is evaluated exactly on the merged breakpoint grid `{i/n} ∪
/// {j/m}`, tracked in integer units of `1/(n m)`.
pub fn wasserstein_1d(x: &Projected1D, y: &Projected1D, p: f64) -> Result<f64> {
    wasserstein_1d_slices(x.as_slice(), y.as_slice(), p)
}

pub(crate) fn wasserstein_1d_slices(x: &[f64], y: &[f64], p: f64) -> Result<f64> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::EmptyDataset);
    }
    check_order(p)?;
    let xs = sorted(x);
    let ys = sorted(y);
    Ok(wasserstein_sorted(&xs, &ys, p))
}

pub(crate) fn wasserstein_sorted(xs: &[f64], ys: &[f64], p: f64) -> f64 {
    let (n, m) = (xs.len(), ys.len());
    if n == m {
        let total: f64 = xs
            .iter()
            .zip(ys)
            .map(|(a, b)| pow_p((a - b).abs(), p))
            .sum();
        return total / n as f64;
    }
    let (n64, m64) = (n as u64, m as u64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut cur = 0u64;
    let mut total = 0.0;
    while i < n && j < m {
        let end_x = (i as u64 + 1) * m64;
        let end_y = (j as u64 + 1) * n64;
        let next = end_x.min(end_y);
        total += (next - cur) as f64 * pow_p((xs[i] - ys[j]).abs(), p);
        cur = next;
        if end_x == next {
            i += 1;
        }
        if end_y == next {
            j += 1;
        }
    }
    total / (n64 * m64) as f64
}

/// Minimum of `(1/n) Σ |x_i - y_π(i)|^p` over all permutations. Test
/// oracle; requires equal sizes `n <= 8`.
pub fn wasserstein_1d_bruteforce(x: &Projected1D, y: &Projected1D, p: f64) -> Result<f64> {
    let (x, y) = (x.as_slice(), y.as_slice());
    check_order(p)?;
    if x.len() != y.len() {
        return Err(invalid(format!(
            "brute force needs equal sizes, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n > 8 {
        return Err(invalid(format!("brute force limited to n <= 8, got {n}")));
    }
    let cost = |perm: &[usize]| -> f64 {
        perm.iter()
            .enumerate()
            .map(|(i, &j)| pow_p((x[i] - y[j]).abs(), p))
            .sum::<f64>()
    };
    // Heap's algorithm
    let mut perm: Vec<usize> = (0..n).collect();
    let mut c = vec![0usize; n];
    let mut best = cost(&perm);
    let mut k = 1;
    while k < n {
        if c[k] < k {
            if k % 2 == 0 {
                perm.swap(0, k);
            } else {
                perm.swap(c[k], k);
            }
            best = best.min(cost(&perm));
            c[k] += 1;
            k = 1;
        } else {
            c[k] = 0;
            k += 1;
        }
    }
    Ok(best / n as f64)
}

/// The base divergence `D` and its power `D^p`, as `(D, D^p)`.
///
/// For Wasserstein `D^p = W_p^p` is computed directly; for Sinkhorn `D` is
/// the debiased divergence and for MMD the biased estimate, each raised to
/// `p` afterwards.
pub fn base_divergence(
    x: &Projected1D,
    y: &Projected1D,
    spec: &DivergenceSpec,
) -> Result<(f64, f64)> {
    spec.validate()?;
    match spec.kind {
        DivergenceKind::Wasserstein => {
            let wp = wasserstein_1d(x, y, spec.p)?;
            let d = if spec.p == 1.0 {
                wp
            } else {
                wp.powf(1.0 / spec.p)
            };
            Ok((d, wp))
        }
        DivergenceKind::Sinkhorn => {
            let d = sinkhorn_divergence_1d(x, y, spec)?;
            Ok((d, pow_p(d, spec.p)))
        }
        DivergenceKind::Mmd => {
            let d = mmd_1d(x, y, spec)?;
            Ok((d, pow_p(d, spec.p)))
        }
    }
}

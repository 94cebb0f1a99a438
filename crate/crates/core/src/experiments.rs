//! Sweep drivers: sample size, dimension, displacement, projection count and
//! noise level, with replication, log-log slope fits and CSV output.
//!
//! A sweep is split into independent cells, one per (grid point, inner sample
//! size, replicate), or one per replicate for the projection axis. Cells run
//! under the given [`Exec`] policy and rows are assembled in
//! (grid index, inner index, replicate, spec index) order.
//!
//! Random streams:
//! - the data of a cell come from `(seed, [DATA, replicate, n, d])`, so they
//!   are shared across displacements and noise levels;
//! - the estimator seed of replicate `r` comes from `(seed, [ESTIMATOR, r])`,
//!   so every grid point of a replicate uses the same directions.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use serde_json::{json, Value};

use crate::divergences1d::DivergenceSpec;
use crate::error::{invalid, Error, Result};
use crate::exec::Exec;
use crate::rng::RngStream;
use crate::sampling::{choose_rows, gen_isotropic, SampleSet};
use crate::smoothing::{analytic_gsswd_gaussian, estimate_gssd_with, SmoothedSliceConfig};

const DATA: u64 = 0xDA7A;
const ESTIMATOR: u64 = 0xE571;

/// Header of every sweep CSV.
pub const CSV_HEADER: [&str; 13] = [
    "divergence",
    "p",
    "sigma",
    "L",
    "n",
    "d",
    "axis",
    "axis_value",
    "replicate",
    "estimate",
    "stderr",
    "wall_time_ms",
    "error",
];

/// Theoretical exponent of both the sample and the projection rate.
pub const RATE_EXPONENT: f64 = -0.5;
/// Half-width of the accepted band around [`RATE_EXPONENT`].
pub const SLOPE_TOLERANCE: f64 = 0.15;
/// Largest accepted pairwise slope difference across dimensions.
pub const MAX_SLOPE_GAP: f64 = 0.15;
/// Reference projection count of the projection-complexity sweep.
pub const DEFAULT_REFERENCE_PROJECTIONS: usize = 10_000;

/// Desk-scale sample sizes `64, 128, ..., 4096`.
pub fn desk_sizes() -> Vec<usize> {
    (6..=12).map(|k| 1usize << k).collect()
}

/// Sample sizes up to 25000.
pub fn full_scale_sizes() -> Vec<usize> {
    let mut v: Vec<usize> = (6..=14).map(|k| 1usize << k).collect();
    v.push(25_000);
    v
}

/// Default noise grid.
pub fn default_noise_grid() -> Vec<f64> {
    vec![0.0, 1.0, 3.0, 5.0, 15.0]
}

/// Default displacement grid `0, 0.5, ..., 4`.
pub fn default_displacement_grid() -> Vec<f64> {
    (0..=8).map(|k| k as f64 * 0.5).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    SampleSize,
    Dimension,
    Displacement,
    Projections,
    NoiseLevel,
}

impl Axis {
    pub fn label(self) -> &'static str {
        match self {
            Axis::SampleSize => "sample_size",
            Axis::Dimension => "dimension",
            Axis::Displacement => "displacement",
            Axis::Projections => "projections",
            Axis::NoiseLevel => "noise_level",
        }
    }

    fn integral(self) -> bool {
        matches!(self, Axis::SampleSize | Axis::Dimension | Axis::Projections)
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            Axis::SampleSize,
            Axis::Dimension,
            Axis::Displacement,
            Axis::Projections,
            Axis::NoiseLevel,
        ]
        .into_iter()
        .find(|a| a.label() == s)
        .ok_or_else(|| invalid(format!("unknown axis {s:?}")))
    }
}

/// Where the two sample sets of a cell come from.
#[derive(Clone, Debug, PartialEq)]
pub enum Scenario {
    /// Both sets drawn independently from `N(0, I_d)`.
    StandardNormal,
    /// One draw from `N(0, I_d)` passed as both arguments with one noise key.
    Identical,
    /// `N(mean_a 1_d, scale_a^2 I)` against `N(mean_b 1_d, scale_b^2 I)`.
    Gaussians {
        mean_a: f64,
        scale_a: f64,
        mean_b: f64,
        scale_b: f64,
    },
    /// `N(anchor 1_d, I)` against `N(s 1_d, I)` with `s` the axis value. The
    /// second set is `s 1_d` plus draws shared by every `s`; when `coupled`
    /// it is the first set translated by `(s - anchor) 1_d` and carries the
    /// same noise key.
    Displacement { anchor: f64, coupled: bool },
    /// Rows drawn without replacement from loaded data. With one dataset the
    /// two sets are disjoint draws from it.
    Csv {
        first: SampleSet,
        second: Option<SampleSet>,
        description: String,
    },
}

impl Scenario {
    pub fn description(&self) -> String {
        match self {
            Scenario::StandardNormal => "two independent samples of N(0, I_d)".into(),
            Scenario::Identical => "one sample of N(0, I_d) compared with itself".into(),
            Scenario::Gaussians {
                mean_a,
                scale_a,
                mean_b,
                scale_b,
            } => format!("N({mean_a} 1_d, {scale_a}^2 I) vs N({mean_b} 1_d, {scale_b}^2 I)"),
            Scenario::Displacement { anchor, coupled } => format!(
                "N({anchor} 1_d, I) vs N(s 1_d, I){}",
                if *coupled {
                    ", second set a translate of the first"
                } else {
                    ""
                }
            ),
            Scenario::Csv { description, .. } => description.clone(),
        }
    }

    /// Whether both sets follow one distribution, making the estimate itself
    /// the error.
    pub fn same_distribution(&self) -> bool {
        match self {
            Scenario::StandardNormal | Scenario::Identical => true,
            Scenario::Gaussians {
                mean_a,
                scale_a,
                mean_b,
                scale_b,
            } => mean_a == mean_b && scale_a == scale_b,
            Scenario::Displacement { .. } => false,
            Scenario::Csv { second, .. } => second.is_none(),
        }
    }

    /// Population `G_σSWD_2^2` where a closed form exists.
    pub fn oracle(&self, d: usize, sigma: f64, displacement: f64) -> Option<f64> {
        let (ma, sa, mb, sb) = match *self {
            Scenario::StandardNormal | Scenario::Identical => (0.0, 1.0, 0.0, 1.0),
            Scenario::Gaussians {
                mean_a,
                scale_a,
                mean_b,
                scale_b,
            } => (mean_a, scale_a, mean_b, scale_b),
            Scenario::Displacement { anchor, .. } => (anchor, 1.0, displacement, 1.0),
            Scenario::Csv { .. } => return None,
        };
        analytic_gsswd_gaussian(&vec![ma; d], sa, &vec![mb; d], sb, sigma).ok()
    }

    fn draw(
        &self,
        stream: &RngStream,
        n: usize,
        d: usize,
        displacement: f64,
    ) -> Result<(SampleSet, SampleSet)> {
        match self {
            Scenario::StandardNormal => Ok((
                gen_isotropic(&stream.child(0), n, d, 0.0, 1.0, 1)?,
                gen_isotropic(&stream.child(1), n, d, 0.0, 1.0, 2)?,
            )),
            Scenario::Identical => {
                let a = gen_isotropic(&stream.child(0), n, d, 0.0, 1.0, 1)?;
                Ok((a.clone(), a))
            }
            Scenario::Gaussians {
                mean_a,
                scale_a,
                mean_b,
                scale_b,
            } => Ok((
                gen_isotropic(&stream.child(0), n, d, *mean_a, *scale_a, 1)?,
                gen_isotropic(&stream.child(1), n, d, *mean_b, *scale_b, 2)?,
            )),
            Scenario::Displacement { anchor, coupled } => {
                let a = gen_isotropic(&stream.child(0), n, d, *anchor, 1.0, 1)?;
                let b = if *coupled {
                    let shift = displacement - anchor;
                    let pts = a.as_flat().iter().map(|v| v + shift).collect();
                    SampleSet::from_flat(n, d, pts, 1)?
                } else {
                    let z = gen_isotropic(&stream.child(1), n, d, 0.0, 1.0, 2)?;
                    let pts = z.as_flat().iter().map(|v| displacement + v).collect();
                    SampleSet::from_flat(n, d, pts, 2)?
                };
                Ok((a, b))
            }
            Scenario::Csv { first, second, .. } => match second {
                Some(second) => Ok((
                    first.select(&choose_rows(&stream.child(0), first.len(), n)?, 1)?,
                    second.select(&choose_rows(&stream.child(1), second.len(), n)?, 2)?,
                )),
                None => {
                    let rows = choose_rows(&stream.child(0), first.len(), 2 * n)?;
                    Ok((first.select(&rows[..n], 1)?, first.select(&rows[n..], 2)?))
                }
            },
        }
    }

    fn data_dim(&self) -> Option<usize> {
        match self {
            Scenario::Csv { first, .. } => Some(first.dim()),
            _ => None,
        }
    }
}

/// A sweep along one axis with replication.
#[derive(Clone, Debug)]
pub struct SweepPlan {
    pub axis: Axis,
    /// Ordered axis values.
    pub grid: Vec<f64>,
    /// Sample sizes crossed with the grid on the dimension and noise axes.
    pub sizes: Vec<usize>,
    pub replicates: usize,
    pub specs: Vec<DivergenceSpec>,
    /// Noise level, projection count and master seed. Its own divergence
    /// spec is not used.
    pub template: SmoothedSliceConfig,
    /// Sample size when it is not swept.
    pub n: usize,
    /// Dimension when it is not swept.
    pub d: usize,
    pub reference_projections: usize,
    pub scenario: Scenario,
    /// Fill the `wall_time_ms` column; off by default.
    pub record_timings: bool,
}

impl SweepPlan {
    /// Plan with desk-scale defaults: 20 replicates, `p = 2` Wasserstein,
    /// `σ = 3`, `L = 50`, `n = 500`, `d = 10`.
    pub fn new(axis: Axis, grid: Vec<f64>, scenario: Scenario) -> Self {
        Self {
            axis,
            grid,
            sizes: desk_sizes(),
            replicates: 20,
            specs: vec![DivergenceSpec::wasserstein(2.0)],
            template: SmoothedSliceConfig::new(DivergenceSpec::default(), 3.0, 50, 0),
            n: 500,
            d: 10,
            reference_projections: DEFAULT_REFERENCE_PROJECTIONS,
            scenario,
            record_timings: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_grid(self.axis, &self.grid)?;
        if self.replicates == 0 {
            return Err(invalid("replicates must be >= 1"));
        }
        if self.specs.is_empty() {
            return Err(invalid("at least one divergence is required"));
        }
        for s in &self.specs {
            s.validate()?;
        }
        self.template.validate()?;
        match self.axis {
            Axis::SampleSize => {
                if let Some(v) = self.grid.iter().find(|v| **v < 2.0) {
                    return Err(invalid(format!("sample sizes must be >= 2, got {v}")));
                }
            }
            Axis::Dimension | Axis::NoiseLevel => {
                check_sizes(&self.sizes)?;
                if self.axis == Axis::Dimension && self.scenario.data_dim().is_some() {
                    return Err(invalid("the dimension of loaded data cannot be swept"));
                }
                if self.axis == Axis::NoiseLevel {
                    if let Some(v) = self.grid.iter().find(|v| **v < 0.0) {
                        return Err(invalid(format!("noise levels must be >= 0, got {v}")));
                    }
                }
            }
            Axis::Projections => {
                let r = self.reference_projections as f64;
                if self.grid.contains(&r) {
                    return Err(invalid(format!(
                        "reference projection count {} is in the grid",
                        self.reference_projections
                    )));
                }
                if let Some(v) = self.grid.iter().find(|v| **v > r) {
                    return Err(invalid(format!(
                        "projection count {v} exceeds the reference count {r}"
                    )));
                }
            }
            Axis::Displacement => {}
        }
        let displacement_scenario = matches!(self.scenario, Scenario::Displacement { .. });
        if displacement_scenario != (self.axis == Axis::Displacement) {
            return Err(invalid("the displacement axis and scenario go together"));
        }
        if self.n == 0 || self.d == 0 {
            return Err(invalid("n and d must be >= 1"));
        }
        Ok(())
    }

    fn estimator_seed(&self, replicate: usize) -> u64 {
        RngStream::with_path(self.template.seed, &[ESTIMATOR, replicate as u64]).derive_u64()
    }

    fn dim(&self, axis_d: Option<usize>) -> usize {
        self.scenario.data_dim().or(axis_d).unwrap_or(self.d)
    }
}

fn check_grid(axis: Axis, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(invalid("grid must be nonempty"));
    }
    if let Some(v) = grid.iter().find(|v| !v.is_finite()) {
        return Err(invalid(format!("grid values must be finite, got {v}")));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("grid must be strictly increasing"));
    }
    if axis.integral() {
        if let Some(v) = grid.iter().find(|v| v.fract() != 0.0 || **v < 1.0) {
            return Err(invalid(format!(
                "{axis} values must be positive integers, got {v}"
            )));
        }
    }
    Ok(())
}

fn check_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.is_empty() {
        return Err(invalid("sample size grid must be nonempty"));
    }
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("sample sizes must be strictly increasing"));
    }
    if let Some(n) = sizes.iter().find(|n| **n < 2) {
        return Err(invalid(format!("sample sizes must be >= 2, got {n}")));
    }
    Ok(())
}

/// One CSV record.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub divergence: &'static str,
    pub p: f64,
    pub sigma: f64,
    pub projections: usize,
    pub n: usize,
    pub d: usize,
    pub axis: Axis,
    pub axis_value: f64,
    pub replicate: usize,
    /// The estimate, or `|estimate(L) - estimate(L_ref)|` on the projection axis.
    pub estimate: Option<f64>,
    pub stderr: Option<f64>,
    /// Mean of the base divergence before the power.
    pub raw: Option<f64>,
    pub wall_time_ms: Option<f64>,
    pub error: Option<String>,
}

/// Log-log fit of one curve.
#[derive(Clone, Debug, PartialEq)]
pub struct SlopeFit {
    pub divergence: &'static str,
    pub p: f64,
    /// Dimension or noise level of the curve on crossed sweeps.
    pub group: Option<f64>,
    pub slope: f64,
    pub r2: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub axis: Axis,
    pub rows: Vec<SweepRow>,
    pub fits: Vec<SlopeFit>,
    /// Slope of the first divergence, on the sample and projection axes.
    pub slope: Option<f64>,
    pub slope_r2: Option<f64>,
    /// Largest pairwise slope difference across dimensions, per the first
    /// divergence.
    pub slope_gap: Option<f64>,
    /// Grid value of the smallest mean estimate, per divergence.
    pub argmin: Vec<(&'static str, f64)>,
    /// `(axis value, population G_σSWD_2^2)` where a closed form exists.
    pub oracle: Vec<(f64, f64)>,
}

/// Ordinary least squares of `log y` on `log x`, returning `(slope, R²)`.
pub fn fit_loglog_slope(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    if xs.len() < 3 {
        return Err(invalid(format!(
            "slope fit needs at least 3 points, got {}",
            xs.len()
        )));
    }
    if let Some(v) = xs.iter().chain(ys).find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(invalid(format!("slope fit needs positive values, got {v}")));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(invalid("slope fit needs distinct x values"));
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy) / (sxx * syy)
    };
    Ok((slope, r2))
}

struct Cell {
    grid: usize,
    replicate: usize,
    n: usize,
    d: usize,
    sigma: f64,
    displacement: f64,
}

fn cell_rows(plan: &SweepPlan, cell: &Cell, exec: Exec) -> Vec<SweepRow> {
    let axis_value = plan.grid[cell.grid];
    let stream = RngStream::with_path(
        plan.template.seed,
        &[DATA, cell.replicate as u64, cell.n as u64, cell.d as u64],
    );
    let pair = plan
        .scenario
        .draw(&stream, cell.n, cell.d, cell.displacement);
    let seed = plan.estimator_seed(cell.replicate);
    plan.specs
        .iter()
        .map(|spec| {
            let mut row = SweepRow {
                divergence: spec.label(),
                p: spec.p,
                sigma: cell.sigma,
                projections: plan.template.projections,
                n: cell.n,
                d: cell.d,
                axis: plan.axis,
                axis_value,
                replicate: cell.replicate,
                estimate: None,
                stderr: None,
                raw: None,
                wall_time_ms: None,
                error: None,
            };
            let (a, b) = match &pair {
                Ok(p) => p,
                Err(e) => {
                    row.error = Some(e.to_string());
                    return row;
                }
            };
            let cfg = SmoothedSliceConfig::new(*spec, cell.sigma, plan.template.projections, seed);
            let start = Instant::now();
            let outcome = estimate_gssd_with(a, b, &cfg, exec);
            if plan.record_timings {
                row.wall_time_ms = Some(start.elapsed().as_secs_f64() * 1e3);
            }
            match outcome {
                Ok(r) => {
                    row.estimate = Some(r.value);
                    row.stderr = Some(r.stderr);
                    row.raw = Some(r.raw_value);
                }
                Err(e) => row.error = Some(e.to_string()),
            }
            row
        })
        .collect()
}

fn run_cells(plan: &SweepPlan, cells: Vec<Cell>, exec: Exec) -> Vec<SweepRow> {
    exec.map_indexed(cells.len(), |k| cell_rows(plan, &cells[k], exec))
        .into_iter()
        .flatten()
        .collect()
}

/// Mean estimate over replicates for each key, in first-seen key order.
fn curve<K: PartialEq + Copy>(rows: &[SweepRow], key: impl Fn(&SweepRow) -> K) -> Vec<(K, f64)> {
    let mut acc: Vec<(K, f64, usize)> = Vec::new();
    for row in rows {
        let Some(v) = row.estimate else { continue };
        let k = key(row);
        match acc.iter_mut().find(|(kk, _, _)| *kk == k) {
            Some(e) => {
                e.1 += v;
                e.2 += 1;
            }
            None => acc.push((k, v, 1)),
        }
    }
    acc.into_iter().map(|(k, s, c)| (k, s / c as f64)).collect()
}

fn spec_rows<'a>(
    rows: &'a [SweepRow],
    spec: &DivergenceSpec,
) -> impl Iterator<Item = &'a SweepRow> + 'a {
    let (label, p) = (spec.label(), spec.p);
    rows.iter()
        .filter(move |r| r.divergence == label && r.p == p)
}

fn fit_curve(
    spec: &DivergenceSpec,
    group: Option<f64>,
    points: &[(f64, f64)],
    strict: bool,
) -> Result<Option<SlopeFit>> {
    if points.iter().any(|(_, y)| *y == 0.0) {
        if strict {
            return Err(Error::DegenerateSweep(format!(
                "{} p={} has zero mean estimates, so no slope can be fitted",
                spec.label(),
                spec.p
            )));
        }
        return Ok(None);
    }
    let xs: Vec<f64> = points.iter().map(|(x, _)| *x).collect();
    let ys: Vec<f64> = points.iter().map(|(_, y)| *y).collect();
    match fit_loglog_slope(&xs, &ys) {
        Ok((slope, r2)) => Ok(Some(SlopeFit {
            divergence: spec.label(),
            p: spec.p,
            group,
            slope,
            r2,
        })),
        Err(e) if strict => Err(Error::DegenerateSweep(e.to_string())),
        Err(_) => Ok(None),
    }
}

fn empty_result(axis: Axis, rows: Vec<SweepRow>) -> SweepResult {
    SweepResult {
        axis,
        rows,
        fits: Vec::new(),
        slope: None,
        slope_r2: None,
        slope_gap: None,
        argmin: Vec::new(),
        oracle: Vec::new(),
    }
}

fn expect_axis(plan: &SweepPlan, axis: Axis) -> Result<()> {
    if plan.axis != axis {
        return Err(invalid(format!(
            "plan sweeps {} but {} was requested",
            plan.axis, axis
        )));
    }
    plan.validate()
}

/// Estimates at every sample size of the grid; the slope fits the log of the
/// mean estimate over replicates against the log of `n`.
pub fn run_sample_complexity(plan: &SweepPlan, exec: Exec) -> Result<SweepResult> {
    expect_axis(plan, Axis::SampleSize)?;
    let d = plan.dim(None);
    let mut cells = Vec::new();
    for (g, &n) in plan.grid.iter().enumerate() {
        for r in 0..plan.replicates {
            cells.push(Cell {
                grid: g,
                replicate: r,
                n: n as usize,
                d,
                sigma: plan.template.sigma,
                displacement: 0.0,
            });
        }
    }
    let rows = run_cells(plan, cells, exec);
    let mut result = empty_result(plan.axis, rows);
    for spec in &plan.specs {
        let rows: Vec<SweepRow> = spec_rows(&result.rows, spec).cloned().collect();
        let points = curve(&rows, |r| r.axis_value);
        if let Some(fit) = fit_curve(spec, None, &points, true)? {
            result.fits.push(fit);
        }
    }
    if let Some(first) = result.fits.first() {
        result.slope = Some(first.slope);
        result.slope_r2 = Some(first.r2);
    }
    Ok(result)
}

/// Sample-size sweeps for every dimension of the grid, with per-dimension
/// slopes and their largest pairwise gap.
pub fn run_dimension_sweep(plan: &SweepPlan, exec: Exec) -> Result<SweepResult> {
    expect_axis(plan, Axis::Dimension)?;
    let mut cells = Vec::new();
    for (g, &d) in plan.grid.iter().enumerate() {
        for &n in &plan.sizes {
            for r in 0..plan.replicates {
                cells.push(Cell {
                    grid: g,
                    replicate: r,
                    n,
                    d: d as usize,
                    sigma: plan.template.sigma,
                    displacement: 0.0,
                });
            }
        }
    }
    let rows = run_cells(plan, cells, exec);
    let mut result = empty_result(plan.axis, rows);
    for spec in &plan.specs {
        for &d in &plan.grid {
            let rows: Vec<SweepRow> = spec_rows(&result.rows, spec)
                .filter(|r| r.axis_value == d)
                .cloned()
                .collect();
            let points: Vec<(f64, f64)> = curve(&rows, |r| r.n)
                .into_iter()
                .map(|(n, y)| (n as f64, y))
                .collect();
            if let Some(fit) = fit_curve(spec, Some(d), &points, true)? {
                result.fits.push(fit);
            }
        }
    }
    let first = &plan.specs[0];
    let slopes: Vec<f64> = result
        .fits
        .iter()
        .filter(|f| f.divergence == first.label() && f.p == first.p)
        .map(|f| f.slope)
        .collect();
    result.slope_gap = Some(max_gap(&slopes));
    Ok(result)
}

/// Largest pairwise difference.
pub fn max_gap(values: &[f64]) -> f64 {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if values.is_empty() {
        0.0
    } else {
        hi - lo
    }
}

/// Estimates across displacements `s`, with the argmin of the mean estimate
/// per divergence and the closed-form values.
pub fn run_displacement(plan: &SweepPlan, exec: Exec) -> Result<SweepResult> {
    expect_axis(plan, Axis::Displacement)?;
    let d = plan.dim(None);
    let mut cells = Vec::new();
    for (g, &s) in plan.grid.iter().enumerate() {
        for r in 0..plan.replicates {
            cells.push(Cell {
                grid: g,
                replicate: r,
                n: plan.n,
                d,
                sigma: plan.template.sigma,
                displacement: s,
            });
        }
    }
    let rows = run_cells(plan, cells, exec);
    let mut result = empty_result(plan.axis, rows);
    for spec in &plan.specs {
        let rows: Vec<SweepRow> = spec_rows(&result.rows, spec).cloned().collect();
        let points = curve(&rows, |r| r.axis_value);
        let best = points
            .iter()
            .fold(None::<(f64, f64)>, |best, &(s, y)| match best {
                Some((_, by)) if by <= y => best,
                _ => Some((s, y)),
            });
        if let Some((s, _)) = best {
            result.argmin.push((spec.label(), s));
        }
    }
    result.oracle = plan
        .grid
        .iter()
        .filter_map(|&s| {
            plan.scenario
                .oracle(d, plan.template.sigma, s)
                .map(|v| (s, v))
        })
        .collect();
    Ok(result)
}

/// Absolute deviation of the estimate at each `L` of the grid from the
/// estimate at the reference count, on one sample pair per replicate.
pub fn run_projection_complexity(plan: &SweepPlan, exec: Exec) -> Result<SweepResult> {
    expect_axis(plan, Axis::Projections)?;
    let d = plan.dim(None);
    let sigma = plan.template.sigma;
    let per_replicate = exec.map_indexed(plan.replicates, |r| {
        let stream = RngStream::with_path(
            plan.template.seed,
            &[DATA, r as u64, plan.n as u64, d as u64],
        );
        let pair = plan.scenario.draw(&stream, plan.n, d, 0.0);
        let seed = plan.estimator_seed(r);
        let references: Vec<std::result::Result<f64, String>> = plan
            .specs
            .iter()
            .map(|spec| {
                let (a, b) = pair.as_ref().map_err(|e| e.to_string())?;
                let cfg = SmoothedSliceConfig::new(*spec, sigma, plan.reference_projections, seed);
                estimate_gssd_with(a, b, &cfg, exec)
                    .map(|e| e.value)
                    .map_err(|e| e.to_string())
            })
            .collect();
        // rows indexed [grid][spec]
        plan.grid
            .iter()
            .map(|&l| {
                plan.specs
                    .iter()
                    .zip(&references)
                    .map(|(spec, reference)| {
                        let mut row = SweepRow {
                            divergence: spec.label(),
                            p: spec.p,
                            sigma,
                            projections: l as usize,
                            n: plan.n,
                            d,
                            axis: plan.axis,
                            axis_value: l,
                            replicate: r,
                            estimate: None,
                            stderr: None,
                            raw: None,
                            wall_time_ms: None,
                            error: None,
                        };
                        let (a, b, reference) = match (&pair, reference) {
                            (Ok((a, b)), Ok(v)) => (a, b, *v),
                            (Err(e), _) => {
                                row.error = Some(e.to_string());
                                return row;
                            }
                            (_, Err(e)) => {
                                row.error = Some(e.clone());
                                return row;
                            }
                        };
                        let cfg = SmoothedSliceConfig::new(*spec, sigma, l as usize, seed);
                        let start = Instant::now();
                        let outcome = estimate_gssd_with(a, b, &cfg, exec);
                        if plan.record_timings {
                            row.wall_time_ms = Some(start.elapsed().as_secs_f64() * 1e3);
                        }
                        match outcome {
                            Ok(e) => {
                                row.estimate = Some((e.value - reference).abs());
                                row.stderr = Some(e.stderr);
                                row.raw = Some(e.raw_value);
                            }
                            Err(e) => row.error = Some(e.to_string()),
                        }
                        row
                    })
                    .collect::<Vec<_>>()
            })
            .collect::<Vec<_>>()
    });
    let mut rows = Vec::new();
    for g in 0..plan.grid.len() {
        for rep in &per_replicate {
            rows.extend(rep[g].iter().cloned());
        }
    }
    let mut result = empty_result(plan.axis, rows);
    for spec in &plan.specs {
        let rows: Vec<SweepRow> = spec_rows(&result.rows, spec).cloned().collect();
        let points = curve(&rows, |r| r.axis_value);
        if let Some(fit) = fit_curve(spec, None, &points, true)? {
            result.fits.push(fit);
        }
    }
    if let Some(first) = result.fits.first() {
        result.slope = Some(first.slope);
        result.slope_r2 = Some(first.r2);
    }
    Ok(result)
}

/// Sample-size sweeps for every noise level of the grid. Data and directions
/// are shared across noise levels.
pub fn run_noise_sweep(plan: &SweepPlan, exec: Exec) -> Result<SweepResult> {
    expect_axis(plan, Axis::NoiseLevel)?;
    let d = plan.dim(None);
    let mut cells = Vec::new();
    for (g, &sigma) in plan.grid.iter().enumerate() {
        for &n in &plan.sizes {
            for r in 0..plan.replicates {
                cells.push(Cell {
                    grid: g,
                    replicate: r,
                    n,
                    d,
                    sigma,
                    displacement: 0.0,
                });
            }
        }
    }
    let rows = run_cells(plan, cells, exec);
    let mut result = empty_result(plan.axis, rows);
    for spec in &plan.specs {
        for &sigma in &plan.grid {
            let rows: Vec<SweepRow> = spec_rows(&result.rows, spec)
                .filter(|r| r.axis_value == sigma)
                .cloned()
                .collect();
            let points: Vec<(f64, f64)> = curve(&rows, |r| r.n)
                .into_iter()
                .map(|(n, y)| (n as f64, y))
                .collect();
            if let Some(fit) = fit_curve(spec, Some(sigma), &points, false)? {
                result.fits.push(fit);
            }
        }
    }
    result.oracle = plan
        .grid
        .iter()
        .filter_map(|&sigma| plan.scenario.oracle(d, sigma, 0.0).map(|v| (sigma, v)))
        .collect();
    Ok(result)
}

/// Runs the driver matching the plan's axis.
pub fn run_sweep(plan: &SweepPlan, exec: Exec) -> Result<SweepResult> {
    match plan.axis {
        Axis::SampleSize => run_sample_complexity(plan, exec),
        Axis::Dimension => run_dimension_sweep(plan, exec),
        Axis::Displacement => run_displacement(plan, exec),
        Axis::Projections => run_projection_complexity(plan, exec),
        Axis::NoiseLevel => run_noise_sweep(plan, exec),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl SweepResult {
    /// Writes the header and one record per row.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let to_io = |e: csv::Error| Error::Io {
            path: "<csv output>".into(),
            source: std::io::Error::other(e.to_string()),
        };
        w.write_record(CSV_HEADER).map_err(to_io)?;
        for r in &self.rows {
            w.write_record([
                r.divergence.to_string(),
                r.p.to_string(),
                r.sigma.to_string(),
                r.projections.to_string(),
                r.n.to_string(),
                r.d.to_string(),
                r.axis.label().to_string(),
                r.axis_value.to_string(),
                r.replicate.to_string(),
                opt(r.estimate),
                opt(r.stderr),
                opt(r.wall_time_ms),
                r.error.clone().unwrap_or_default(),
            ])
            .map_err(to_io)?;
        }
        w.flush().map_err(|e| Error::Io {
            path: "<csv output>".into(),
            source: e,
        })
    }

    /// Sidecar metadata describing how the rows were produced.
    pub fn metadata(&self, plan: &SweepPlan) -> Value {
        let error_definition = match plan.axis {
            Axis::Projections => format!(
                "estimate column holds |estimate(L) - estimate(L_ref)| with L_ref = {} on the same samples and seed",
                plan.reference_projections
            ),
            _ if plan.scenario.same_distribution() => {
                "estimate column holds the estimate itself; both sets follow one distribution, so the population value is 0 and the estimate is the error".to_string()
            }
            _ => "estimate column holds the estimate".to_string(),
        };
        let fits: Vec<Value> = self
            .fits
            .iter()
            .map(|f| json!({"divergence": f.divergence, "p": f.p, "group": f.group, "slope": f.slope, "r2": f.r2}))
            .collect();
        let argmin: Vec<Value> = self
            .argmin
            .iter()
            .map(|(d, s)| json!({"divergence": d, "argmin": s}))
            .collect();
        let oracle: Vec<Value> = self
            .oracle
            .iter()
            .map(|(x, v)| json!({"axis_value": x, "value": v}))
            .collect();
        let specs: Vec<Value> = plan
            .specs
            .iter()
            .map(|s| {
                json!({
                    "divergence": s.label(),
                    "p": s.p,
                    "sinkhorn_lambda": s.sinkhorn_lambda,
                    "sinkhorn_tol": s.sinkhorn_tol,
                    "sinkhorn_max_iter": s.sinkhorn_max_iter,
                    "mmd_bandwidth": s.bandwidth.to_string(),
                })
            })
            .collect();
        json!({
            "seed": plan.template.seed,
            "axis": plan.axis.label(),
            "grid": plan.grid,
            "sizes": match plan.axis {
                Axis::Dimension | Axis::NoiseLevel => json!(plan.sizes),
                _ => Value::Null,
            },
            "replicates": plan.replicates,
            "scenario": plan.scenario.description(),
            "divergences": specs,
            "slope": self.slope,
            "slope_r2": self.slope_r2,
            "slope_gap": self.slope_gap,
            "fits": fits,
            "argmin": argmin,
            "oracle": oracle,
            "aggregation": "mean over replicates",
            "error_definition": error_definition,
            "raw_estimates": self.rows.iter().map(|r| r.raw).collect::<Vec<_>>(),
            "raw_estimates_definition": "per row, mean over directions of the base divergence before the power p",
            "timings_recorded": plan.record_timings,
            "version": env!("CARGO_PKG_VERSION"),
        })
    }
}

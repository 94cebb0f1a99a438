//! Subcommand bodies.

use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use gssd::experiments::{desk_sizes, full_scale_sizes};
use gssd::{
    estimate_gssd_with, gen_gaussian, load_csv, run_sweep, Axis, DivergenceKind, DivergenceSpec,
    Exec, RngStream, SampleSet, Scenario, SmoothedSliceConfig, SweepPlan, SweepResult,
};
use tempfile::NamedTempFile;

use crate::{
    EstimateArgs, EstimatorArgs, Failure, MetricArgs, SweepArgs, SweepDimArgs,
    SweepDisplacementArgs, SweepNoiseArgs, SweepProjectionsArgs, SweepSamplesArgs, SyntheticArgs,
};

/// Set in the environment to negate every value seen by `metric-check`.
pub const FAULT_NEGATE_ENV: &str = "GSSD_FAULT_NEGATE";

const INPUT_DATA: u64 = 0x1DA7A;
const DEFAULT_N: usize = 500;
const TRIANGLE_SLACK: f64 = 1e-9;

fn single_spec(est: &EstimatorArgs) -> Result<DivergenceSpec, Failure> {
    match est.specs().as_slice() {
        [spec] => Ok(*spec),
        _ => Err(Failure::Usage("exactly one --kind is required here".into())),
    }
}

fn config(est: &EstimatorArgs, spec: DivergenceSpec) -> Result<SmoothedSliceConfig, Failure> {
    let cfg = SmoothedSliceConfig::new(spec, est.sigma, est.projections, est.seed);
    cfg.validate()?;
    Ok(cfg)
}

fn dimension(syn: &SyntheticArgs, paper_scale: bool) -> usize {
    syn.d.unwrap_or(if paper_scale { 50 } else { 10 })
}

fn synthetic_sets(
    syn: &SyntheticArgs,
    seed: u64,
    keys: [u64; 2],
) -> Result<Vec<SampleSet>, Failure> {
    let n = syn.n.unwrap_or(DEFAULT_N);
    let d = dimension(syn, false);
    let stream = RngStream::with_path(seed, &[INPUT_DATA]);
    let params = [(syn.mean_a, syn.scale_a), (syn.mean_b, syn.scale_b)];
    let mut sets = Vec::new();
    for (k, (mean, scale)) in params.into_iter().enumerate() {
        sets.push(gen_gaussian(
            &stream.child(k as u64),
            n,
            &vec![mean; d],
            &vec![scale; d],
            keys[k],
        )?);
    }
    Ok(sets)
}

fn load_all(paths: &[PathBuf], keys: &[u64]) -> Result<Vec<SampleSet>, Failure> {
    paths
        .iter()
        .zip(keys)
        .map(|(p, &k)| load_csv(p, k).map_err(|e| Failure::Runtime(e.into())))
        .collect()
}

fn check_dims(sets: &[SampleSet]) -> Result<(), Failure> {
    for s in &sets[1..] {
        if s.dim() != sets[0].dim() {
            return Err(gssd::Error::DimensionMismatch {
                left: sets[0].dim(),
                right: s.dim(),
            }
            .into());
        }
    }
    Ok(())
}

pub fn estimate(a: &EstimateArgs) -> Result<(), Failure> {
    let cfg = config(&a.estimator, single_spec(&a.estimator)?)?;
    let keys = if a.shared_noise_key { [1, 1] } else { [1, 2] };
    let sets = match a.inputs.len() {
        0 => synthetic_sets(&a.synthetic, cfg.seed, keys)?,
        2 => load_all(&a.inputs, &keys)?,
        k => {
            return Err(Failure::Usage(format!(
                "estimate takes two CSV inputs or none, got {k}"
            )))
        }
    };
    check_dims(&sets)?;
    let r = estimate_gssd_with(&sets[0], &sets[1], &cfg, Exec::default())?;
    println!(
        "estimate={} stderr={} L={} sigma={}",
        r.value, r.stderr, cfg.projections, cfg.sigma
    );
    Ok(())
}

/// Row-wise average of two sets over their common rows.
fn midpoint(a: &SampleSet, b: &SampleSet, key: u64) -> Result<SampleSet, Failure> {
    let n = a.len().min(b.len());
    let pts = a.as_flat()[..n * a.dim()]
        .iter()
        .zip(&b.as_flat()[..n * b.dim()])
        .map(|(x, y)| 0.5 * (x + y))
        .collect();
    Ok(SampleSet::from_flat(n, a.dim(), pts, key)?)
}

struct Check {
    name: &'static str,
    passed: bool,
    slack: f64,
}

pub fn metric_check(a: &MetricArgs) -> Result<(), Failure> {
    let spec = single_spec(&a.estimator)?;
    let cfg = config(&a.estimator, spec)?;
    let mut sets = match a.inputs.len() {
        0 => synthetic_sets(&a.synthetic, cfg.seed, [1, 2])?,
        2 | 3 => load_all(&a.inputs, &[1, 2, 3])?,
        k => {
            return Err(Failure::Usage(format!(
                "metric-check takes two or three CSV inputs or none, got {k}"
            )))
        }
    };
    check_dims(&sets)?;
    if sets.len() == 2 {
        let mid = midpoint(&sets[0], &sets[1], 3)?;
        sets.push(mid);
    }
    let negate = std::env::var_os(FAULT_NEGATE_ENV).is_some_and(|v| !v.is_empty());
    let g = |i: usize, j: usize| -> Result<f64, Failure> {
        let v = estimate_gssd_with(&sets[i], &sets[j], &cfg, Exec::default())?.value;
        Ok(if negate { -v } else { v })
    };
    let mut value = [[0.0; 3]; 3];
    for (i, row) in value.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = g(i, j)?;
        }
    }
    let pairs = [(0, 1), (1, 2), (0, 2)];
    let asymmetry = pairs
        .iter()
        .map(|&(i, j)| (value[i][j] - value[j][i]).abs())
        .fold(0.0, f64::max);
    let lowest = pairs
        .iter()
        .flat_map(|&(i, j)| [value[i][j], value[j][i]])
        .fold(f64::INFINITY, f64::min);
    let self_value = (0..3).map(|i| value[i][i].abs()).fold(0.0, f64::max);
    let identity_tol = match spec.kind {
        DivergenceKind::Sinkhorn => 10.0 * spec.sinkhorn_tol,
        _ => 0.0,
    };
    let root = |v: f64| v.powf(1.0 / spec.p);
    let triangle = [
        (0, 1, 2),
        (1, 2, 0),
        (2, 0, 1),
        (0, 2, 1),
        (1, 0, 2),
        (2, 1, 0),
    ]
    .iter()
    .map(|&(x, y, z)| root(value[x][y]) + root(value[y][z]) - root(value[x][z]))
    .fold(f64::INFINITY, |m, s| {
        if s.is_nan() || m.is_nan() {
            f64::NAN
        } else {
            m.min(s)
        }
    });
    let checks = [
        Check {
            name: "symmetry",
            passed: asymmetry == 0.0,
            slack: asymmetry,
        },
        Check {
            name: "non-negativity",
            passed: lowest >= 0.0,
            slack: lowest,
        },
        Check {
            name: "self-identity",
            passed: self_value <= identity_tol,
            slack: self_value,
        },
        Check {
            name: "triangle",
            passed: triangle >= -TRIANGLE_SLACK,
            slack: triangle,
        },
    ];
    for c in &checks {
        println!(
            "{}: {} slack={:e}",
            c.name,
            if c.passed { "pass" } else { "fail" },
            c.slack
        );
    }
    match checks.iter().find(|c| !c.passed) {
        Some(c) => Err(Failure::Runtime(anyhow!(
            "{} violated with slack {:e}",
            c.name,
            c.slack
        ))),
        None => Ok(()),
    }
}

/// Temporary files next to the outputs, created before any computation so
/// an unwritable destination fails early. Renamed into place on commit.
struct PendingOutput {
    csv: NamedTempFile,
    meta: NamedTempFile,
    csv_path: PathBuf,
    meta_path: PathBuf,
}

impl PendingOutput {
    fn prepare(out: &Path) -> anyhow::Result<Self> {
        if out.is_dir() {
            return Err(anyhow!("output {} is a directory", out.display()));
        }
        let dir = match out.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        std::fs::create_dir_all(&dir)
            .with_context(|| format!("cannot create output directory {}", dir.display()))?;
        let temp = || {
            NamedTempFile::new_in(&dir)
                .with_context(|| format!("cannot write to output directory {}", dir.display()))
        };
        Ok(Self {
            csv: temp()?,
            meta: temp()?,
            csv_path: out.to_path_buf(),
            meta_path: out.with_extension("meta.json"),
        })
    }

    fn commit(mut self, result: &SweepResult, plan: &SweepPlan) -> anyhow::Result<()> {
        {
            let mut w = BufWriter::new(self.csv.as_file_mut());
            result.write_csv(&mut w)?;
            w.flush()?;
        }
        {
            let mut w = BufWriter::new(self.meta.as_file_mut());
            serde_json::to_writer_pretty(&mut w, &result.metadata(plan))?;
            writeln!(w)?;
            w.flush()?;
        }
        self.csv
            .persist(&self.csv_path)
            .with_context(|| format!("cannot write {}", self.csv_path.display()))?;
        self.meta
            .persist(&self.meta_path)
            .with_context(|| format!("cannot write {}", self.meta_path.display()))?;
        Ok(())
    }
}

fn synthetic_scenario(syn: &SyntheticArgs) -> Scenario {
    if (syn.mean_a, syn.scale_a) == (syn.mean_b, syn.scale_b)
        && (syn.mean_a, syn.scale_a) == (0.0, 1.0)
    {
        Scenario::StandardNormal
    } else {
        Scenario::Gaussians {
            mean_a: syn.mean_a,
            scale_a: syn.scale_a,
            mean_b: syn.mean_b,
            scale_b: syn.scale_b,
        }
    }
}

fn plan(
    axis: Axis,
    grid: Vec<f64>,
    sw: &SweepArgs,
    synthetic: Scenario,
) -> Result<SweepPlan, Failure> {
    let specs = sw.estimator.specs();
    let template = SmoothedSliceConfig::new(
        specs.first().copied().unwrap_or_default(),
        sw.estimator.sigma,
        sw.estimator.projections,
        sw.estimator.seed,
    );
    let scenario = match sw.inputs.as_slice() {
        [] => synthetic,
        [one] => Scenario::Csv {
            first: load_all(&sw.inputs, &[0])?.remove(0),
            second: None,
            description: format!("two disjoint row draws from {}", one.display()),
        },
        [a, b] => {
            let mut sets = load_all(&sw.inputs, &[0, 0])?;
            check_dims(&sets)?;
            let second = sets.pop();
            Scenario::Csv {
                first: sets.remove(0),
                second,
                description: format!("rows of {} vs rows of {}", a.display(), b.display()),
            }
        }
        _ => unreachable!("clap caps the input count at two"),
    };
    let plan = SweepPlan {
        axis,
        grid,
        sizes: if sw.paper_scale {
            full_scale_sizes()
        } else {
            desk_sizes()
        },
        replicates: sw.replicates,
        specs,
        template,
        n: sw.synthetic.n.unwrap_or(DEFAULT_N),
        d: dimension(&sw.synthetic, sw.paper_scale),
        reference_projections: gssd::experiments::DEFAULT_REFERENCE_PROJECTIONS,
        scenario,
        record_timings: sw.record_timings,
    };
    Ok(plan)
}

fn execute(plan: &SweepPlan, out: &Path) -> Result<(), Failure> {
    plan.validate()?;
    let pending = PendingOutput::prepare(out)?;
    let result = run_sweep(plan, Exec::default())?;
    pending.commit(&result, plan)?;
    let mut line = format!("rows={} out={}", result.rows.len(), out.display());
    if let (Some(s), Some(r2)) = (result.slope, result.slope_r2) {
        line.push_str(&format!(" slope={s} r2={r2}"));
    }
    if let Some(gap) = result.slope_gap {
        line.push_str(&format!(" slope_gap={gap}"));
    }
    for (kind, s) in &result.argmin {
        line.push_str(&format!(" argmin_{kind}={s}"));
    }
    let errors = result.rows.iter().filter(|r| r.error.is_some()).count();
    if errors > 0 {
        line.push_str(&format!(" errored_rows={errors}"));
    }
    println!("{line}");
    Ok(())
}

fn as_grid(sizes: &[usize]) -> Vec<f64> {
    sizes.iter().map(|&n| n as f64).collect()
}

pub fn sweep_samples(a: &SweepSamplesArgs) -> Result<(), Failure> {
    let grid = a.grid.clone().unwrap_or_else(|| {
        as_grid(&if a.sweep.paper_scale {
            full_scale_sizes()
        } else {
            desk_sizes()
        })
    });
    let plan = plan(
        Axis::SampleSize,
        grid,
        &a.sweep,
        synthetic_scenario(&a.sweep.synthetic),
    )?;
    execute(&plan, &a.sweep.out)
}

pub fn sweep_dim(a: &SweepDimArgs) -> Result<(), Failure> {
    let mut plan = plan(
        Axis::Dimension,
        a.grid.clone(),
        &a.sweep,
        synthetic_scenario(&a.sweep.synthetic),
    )?;
    if let Some(sizes) = &a.sizes {
        plan.sizes = sizes.clone();
    }
    execute(&plan, &a.sweep.out)
}

pub fn sweep_displacement(a: &SweepDisplacementArgs) -> Result<(), Failure> {
    let scenario = Scenario::Displacement {
        anchor: a.anchor,
        coupled: a.shared_noise_key,
    };
    let plan = plan(Axis::Displacement, a.grid.clone(), &a.sweep, scenario)?;
    execute(&plan, &a.sweep.out)
}

pub fn sweep_projections(a: &SweepProjectionsArgs) -> Result<(), Failure> {
    let mut plan = plan(
        Axis::Projections,
        a.grid.clone(),
        &a.sweep,
        synthetic_scenario(&a.sweep.synthetic),
    )?;
    plan.reference_projections = a.reference;
    execute(&plan, &a.sweep.out)
}

pub fn sweep_noise(a: &SweepNoiseArgs) -> Result<(), Failure> {
    let mut plan = plan(
        Axis::NoiseLevel,
        a.grid.clone(),
        &a.sweep,
        synthetic_scenario(&a.sweep.synthetic),
    )?;
    if let Some(sizes) = &a.sizes {
        plan.sizes = sizes.clone();
    }
    execute(&plan, &a.sweep.out)
}

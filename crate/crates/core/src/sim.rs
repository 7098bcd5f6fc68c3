//! Experiment harness: sample the bump target on the unit disk, fit, extend
//! and measure the error on a reference grid.

use std::f64::consts::PI;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::erm::{self, RegressionProblem, SolveOptions};
use crate::error::{Error, Result};
use crate::field::PointSet;
use crate::gamma::gamma1;
use crate::wells::{self, CellComplex};

/// Seeds used by the figure sweeps.
pub const FIRST_SEED: u64 = 1000;
/// Sample sizes of the error-versus-n sweep.
pub const SWEEP_SIZES: [usize; 5] = [8, 23, 38, 84, 180];

/// `cos(pi x1) sin(pi x2) exp(-1/(1 - |x|^2))` inside the unit disk, 0 outside.
pub fn target(x: &[f64]) -> f64 {
    let r2 = x[0] * x[0] + x[1] * x[1];
    if r2 >= 1.0 {
        return 0.0;
    }
    (PI * x[0]).cos() * (PI * x[1]).sin() * (-1.0 / (1.0 - r2)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MPolicy {
    /// `M = n^{1/(2 max(d, 5))}`.
    Schedule,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub n: usize,
    pub sigma: f64,
    pub seed: u64,
    pub d: usize,
    pub grid_per_axis: usize,
    pub m_policy: MPolicy,
    /// Solver tolerance; `None` uses the scale-aware default.
    pub gamma_tol: Option<f64>,
    /// Cutting-plane iteration cap; `None` uses [`default_iteration_cap`].
    pub max_iters: Option<u64>,
    /// Where to write the fitted surface, if anywhere.
    pub surface_path: Option<PathBuf>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n: 84,
            sigma: 0.0,
            seed: FIRST_SEED,
            d: 2,
            grid_per_axis: 128,
            m_policy: MPolicy::Schedule,
            gamma_tol: None,
            max_iters: None,
            surface_path: None,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d != 2 {
            return Err(Error::InvalidInput(format!("the target is defined for d = 2, got {}", self.d)));
        }
        if self.n < 1 {
            return Err(Error::InvalidInput("n must be at least 1".into()));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidInput(format!("sigma must be nonnegative, got {}", self.sigma)));
        }
        if self.grid_per_axis < 2 {
            return Err(Error::InvalidInput("grid_per_axis must be at least 2".into()));
        }
        if let MPolicy::Fixed(m) = self.m_policy {
            if !(m > 0.0) || !m.is_finite() {
                return Err(Error::InvalidInput(format!("fixed M must be positive, got {m}")));
            }
        }
        Ok(())
    }

    pub fn m(&self) -> f64 {
        match self.m_policy {
            MPolicy::Schedule => erm::schedule_m(self.n, self.d),
            MPolicy::Fixed(m) => m,
        }
    }
}

/// Iteration cap used by the harness: `6k` with `k = (d+1) n`.
///
/// The objective is within a few percent of optimal by then, and it keeps the
/// n = 180 runs at a few minutes each.
pub fn default_iteration_cap(n: usize, d: usize) -> u64 {
    6 * ((d + 1) * n) as u64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub n: usize,
    pub sigma: f64,
    pub seed: u64,
    pub m: f64,
    pub sup_error: f64,
    pub rmse: f64,
    pub runtime_seconds: f64,
    pub iterations: u64,
    pub objective: f64,
    pub gamma1: f64,
    pub cells: usize,
}

/// `n` points uniform on the open unit disk and noisy target values.
pub fn sample_data(cfg: &SimConfig) -> Result<(PointSet, Vec<f64>)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut points = Vec::with_capacity(cfg.n);
    while points.len() < cfg.n {
        let p: Vec<f64> = (0..cfg.d).map(|_| rng.random_range(-1.0..1.0)).collect();
        if p.iter().map(|v| v * v).sum::<f64>() < 1.0 {
            points.push(p);
        }
    }
    let y = points
        .iter()
        .map(|p| {
            let noise: f64 = StandardNormal.sample(&mut rng);
            target(p) + cfg.sigma * noise
        })
        .collect();
    Ok((PointSet::new(points)?, y))
}

/// Cell centers of a `g x g` grid on `[-1, 1]^2`, row by row.
pub fn grid_points(grid_per_axis: usize) -> Vec<[f64; 2]> {
    let h = 2.0 / grid_per_axis as f64;
    let coord = |i: usize| -1.0 + (i as f64 + 0.5) * h;
    (0..grid_per_axis)
        .flat_map(|i| (0..grid_per_axis).map(move |j| [coord(j), coord(i)]))
        .collect()
}

/// `(sup, rmse)` of `estimate - reference` over the grid points inside the disk.
pub fn grid_errors(
    grid_per_axis: usize,
    mut estimate: impl FnMut(&[f64]) -> Result<f64>,
    mut reference: impl FnMut(&[f64]) -> f64,
) -> Result<(f64, f64)> {
    let mut sup = 0.0f64;
    let mut sq = 0.0;
    let mut count = 0usize;
    for x in grid_points(grid_per_axis) {
        if x[0] * x[0] + x[1] * x[1] >= 1.0 {
            continue;
        }
        let e = estimate(&x)? - reference(&x);
        sup = sup.max(e.abs());
        sq += e * e;
        count += 1;
    }
    if count == 0 {
        return Ok((0.0, 0.0));
    }
    // rmse <= sup holds exactly, but the mean can round just above it
    Ok((sup, (sq / count as f64).sqrt().min(sup)))
}

/// Errors of the extension against the target.
pub fn evaluate_errors(complex: &CellComplex, grid_per_axis: usize) -> Result<(f64, f64)> {
    grid_errors(grid_per_axis, |x| Ok(complex.eval(x)?.value), target)
}

/// Writes `x1,x2,value` for every grid point.
pub fn write_surface(
    path: &Path,
    grid_per_axis: usize,
    mut f: impl FnMut(&[f64]) -> Result<f64>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["x1", "x2", "value"])?;
    for x in grid_points(grid_per_axis) {
        let v = f(&x)?;
        w.write_record([x[0].to_string(), x[1].to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Sample, fit, extend, evaluate.
pub fn run_experiment(cfg: &SimConfig) -> Result<ExperimentRecord> {
    let start = Instant::now();
    let (base, y) = sample_data(cfg)?;
    let m = cfg.m();
    let problem = match cfg.gamma_tol {
        Some(tol) => RegressionProblem::with_tolerance(base, y, m, tol)?,
        None => RegressionProblem::new(base, y, m)?,
    };
    let opts = SolveOptions {
        max_iters: Some(cfg.max_iters.unwrap_or_else(|| default_iteration_cap(cfg.n, cfg.d))),
        ..SolveOptions::default()
    };
    let report = erm::solve_with(&problem, opts)?;
    // the solver accepts fields up to M(1 + 1e-9); extend with the exact constant
    let (g1, _) = gamma1(&report.field);
    let complex = wells::build_complex(&report.field, m.max(g1))?;
    let (sup_error, rmse) = evaluate_errors(&complex, cfg.grid_per_axis)?;
    if let Some(path) = &cfg.surface_path {
        write_surface(path, cfg.grid_per_axis, |x| Ok(complex.eval(x)?.value))?;
    }
    let record = ExperimentRecord {
        n: cfg.n,
        sigma: cfg.sigma,
        seed: cfg.seed,
        m,
        sup_error,
        rmse,
        runtime_seconds: start.elapsed().as_secs_f64(),
        iterations: report.iterations,
        objective: report.objective,
        gamma1: g1,
        cells: complex.cells.len(),
    };
    log::info!(
        "n={} sigma={} seed={} rmse={:.4e} sup={:.4e} in {:.1}s",
        record.n,
        record.sigma,
        record.seed,
        record.rmse,
        record.sup_error,
        record.runtime_seconds
    );
    Ok(record)
}

/// Runs every configuration on up to `workers` threads and appends one row
/// per record to `out`, in input order. The header is written only when
/// `out` is empty.
pub fn run_sweep(configs: &[SimConfig], workers: usize, out: &Path) -> Result<Vec<ExperimentRecord>> {
    let write_header = std::fs::metadata(out).map(|m| m.len() == 0).unwrap_or(true);
    let file = std::fs::OpenOptions::new().create(true).append(true).open(out)?;
    let mut writer = csv::WriterBuilder::new().has_headers(write_header).from_writer(file);
    if configs.is_empty() {
        if write_header {
            writer.write_record(RECORD_COLUMNS)?;
        }
        writer.flush()?;
        return Ok(Vec::new());
    }

    let workers = workers.clamp(1, configs.len());
    let mut results: Vec<Option<Result<ExperimentRecord>>> = (0..configs.len()).map(|_| None).collect();
    let next = std::sync::atomic::AtomicUsize::new(0);
    let slots = std::sync::Mutex::new(&mut results);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if i >= configs.len() {
                    break;
                }
                let r = run_experiment(&configs[i]);
                slots.lock().expect("result slots poisoned")[i] = Some(r);
            });
        }
    });

    let mut records = Vec::with_capacity(configs.len());
    for r in results {
        let record = r.expect("every slot is filled")?;
        writer.serialize(&record)?;
        records.push(record);
    }
    writer.flush()?;
    Ok(records)
}

const RECORD_COLUMNS: [&str; 11] = [
    "n",
    "sigma",
    "seed",
    "m",
    "sup_error",
    "rmse",
    "runtime_seconds",
    "iterations",
    "objective",
    "gamma1",
    "cells",
];

/// Seeds `1000..1000+runs` at each sample size, noiseless.
pub fn size_sweep(sizes: &[usize], runs: u64) -> Vec<SimConfig> {
    sizes
        .iter()
        .flat_map(|&n| (0..runs).map(move |i| SimConfig { n, seed: FIRST_SEED + i, ..SimConfig::default() }))
        .collect()
}

/// `sigma = 2^-j` for `j = 5..1` at fixed `n`.
pub fn noise_sweep(n: usize, runs: u64) -> Vec<SimConfig> {
    (1..=5)
        .rev()
        .flat_map(|j| {
            (0..runs).map(move |i| SimConfig {
                n,
                sigma: 2f64.powi(-j),
                seed: FIRST_SEED + i,
                ..SimConfig::default()
            })
        })
        .collect()
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Appends text to a writer; used by callers that stream records to stdout.
pub fn write_records(records: &[ExperimentRecord], w: impl Write) -> Result<()> {
    let mut writer = csv::Writer::from_writer(w);
    for r in records {
        writer.serialize(r)?;
    }
    writer.flush()?;
    Ok(())
}

//! Vaidya's volumetric-center cutting-plane method.
//!
//! The solver keeps a polytope `S_t` known to contain the target convex set
//! `K`, starting from the box `{|v|_inf <= rho}`. Every iteration it moves to
//! (an approximation of) the volumetric center of `S_t`, i.e. the minimizer of
//!
//! ```text
//! Psi(x) = 1/2 log det( sum_i w_i w_i^T / s_i(x)^2 )  -  eps * sum_i log s_i(x)
//! ```
//!
//! with `s_i(x) = u_i - w_i . x`, and then either drops the cut with the
//! smallest leverage `sigma_i = w_i^T H^{-1} w_i / s_i^2` (when it falls below
//! `tau`) or queries the separation oracle at the center and adds the returned
//! cut. The small analytic term keeps the barrier strictly convex.
//!
//! Box constraints are never dropped, so the polytope stays bounded; only
//! cuts are candidates for removal.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{Cholesky, DenseMatrix};

/// Fraction of the reachable step a deep cut may consume.
const DEEP_REACH: f64 = 0.9;

/// Subgradients at or below this norm count as `0 in dg(x)`.
pub const ZERO_SUBGRADIENT: f64 = 1e-12;

/// `{v : normal . v <= offset}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Halfspace {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl Halfspace {
    pub fn new(normal: Vec<f64>, offset: f64) -> Result<Self> {
        if !normal.iter().any(|w| *w != 0.0) || normal.iter().any(|w| !w.is_finite()) || !offset.is_finite() {
            return Err(Error::InvalidInput("halfspace normal must be finite and nonzero".into()));
        }
        Ok(Self { normal, offset })
    }

    /// `offset - normal . x`; positive strictly inside.
    pub fn slack(&self, x: &[f64]) -> f64 {
        self.offset - self.normal.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }
}

/// Answer of a separation oracle at a query point.
#[derive(Debug, Clone, PartialEq)]
pub enum OracleResponse {
    Inside,
    /// A halfspace containing the whole target set whose boundary passes
    /// through or beyond the query.
    Cut(Halfspace),
}

pub trait SeparationOracle {
    fn separate(&mut self, x: &[f64]) -> OracleResponse;
}

impl<F: FnMut(&[f64]) -> OracleResponse> SeparationOracle for F {
    fn separate(&mut self, x: &[f64]) -> OracleResponse {
        self(x)
    }
}

/// Convex objective with a subgradient oracle.
pub trait Objective {
    /// Returns `(g(x), w)` with `w` in the subdifferential at `x`.
    fn evaluate(&mut self, x: &[f64]) -> (f64, Vec<f64>);
}

impl<F: FnMut(&[f64]) -> (f64, Vec<f64>)> Objective for F {
    fn evaluate(&mut self, x: &[f64]) -> (f64, Vec<f64>) {
        self(x)
    }
}

/// Base of the logarithms in [`iteration_budget`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LogBase {
    Natural,
    Two,
}

impl LogBase {
    fn log(self, x: f64) -> f64 {
        match self {
            LogBase::Natural => x.ln(),
            LogBase::Two => x.log2(),
        }
    }
}

/// Where an added cut is placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CutDepth {
    /// Through the query point.
    Central,
    /// As deep as the oracle's offset allows while a strictly interior point
    /// can still be reached from the current center.
    Deep,
}

/// Damped Newton settings for the centering step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CenteringOptions {
    pub max_steps: usize,
    /// Stop once the Newton decrement drops below this.
    pub tolerance: f64,
    /// Use the exact barrier Hessian (quadratic convergence, `O(m^2)` work per
    /// step) instead of the leverage-weighted approximation `Q`.
    pub exact_hessian: bool,
}

impl CenteringOptions {
    /// Tight centering used by [`volumetric_center`].
    pub fn precise() -> Self {
        Self { max_steps: 50, tolerance: 1e-8, exact_hessian: true }
    }

    /// Cheap recentering between cuts.
    pub fn per_iteration() -> Self {
        Self { max_steps: 1, tolerance: 1e-2, exact_hessian: false }
    }
}

/// Consecutive non-improving feasible iterates that stop a minimization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StallRule {
    /// Improvements of at most `tolerance` count as no improvement.
    pub tolerance: f64,
    pub window: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverConfig {
    pub eps: f64,
    pub tau: f64,
    pub delta_v: f64,
    /// `L`: the method certifies `vol(K) < vol(2^{-L} B^k)` on failure.
    pub l_bits: f64,
    /// Radius of the initial `inf`-norm box.
    pub rho: f64,
    pub max_iters: u64,
    pub log_base: LogBase,
    pub centering: CenteringOptions,
    pub cut_depth: CutDepth,
    pub stall: Option<StallRule>,
}

impl SolverConfig {
    pub const EPS: f64 = 0.005;
    pub const TAU: f64 = 0.007;
    pub const DELTA_V: f64 = 0.00037;

    /// Configuration for a `k`-dimensional problem with the iteration budget
    /// set from [`iteration_budget`]. `l_bits` is raised to `log2 k` if lower.
    pub fn for_problem(k: usize, rho: f64, l_bits: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidInput("problem dimension must be positive".into()));
        }
        if !(rho > 0.0) {
            return Err(Error::InvalidInput(format!("box radius must be positive, got {rho}")));
        }
        let mut cfg = Self {
            eps: Self::EPS,
            tau: Self::TAU,
            delta_v: Self::DELTA_V,
            l_bits: l_bits.max(l_floor(k)),
            rho,
            max_iters: 1,
            log_base: LogBase::Natural,
            centering: CenteringOptions::per_iteration(),
            cut_depth: CutDepth::Central,
            stall: None,
        };
        cfg.max_iters = iteration_budget(k, cfg.l_bits, rho, &cfg)?;
        Ok(cfg)
    }

    pub fn with_max_iters(mut self, max_iters: u64) -> Self {
        self.max_iters = max_iters.max(1);
        self
    }
}

/// Lower bound `log2 k` imposed on `L` (with a floor of 1).
pub fn l_floor(k: usize) -> f64 {
    (k as f64).log2().max(1.0)
}

/// Number of iterations after which the volume of the localization polytope
/// is below that of a ball of radius `2^{-L}`:
///
/// ```text
/// T = ceil( k [1.4 L + 2 log k + 2 log(1 + 1/eps) + 0.5 log((1+tau)/(1-eps))
///              + 2 log rho - log 2] / dV )
/// ```
///
/// Non-positive budgets (tiny `rho`) are clamped to 1.
pub fn iteration_budget(k: usize, l_bits: f64, rho: f64, cfg: &SolverConfig) -> Result<u64> {
    if k == 0 || !(rho > 0.0) || !(l_bits > 0.0) {
        return Err(Error::InvalidInput(format!(
            "iteration budget needs k >= 1, rho > 0, L > 0 (got {k}, {rho}, {l_bits})"
        )));
    }
    let lg = |x: f64| cfg.log_base.log(x);
    let k_f = k as f64;
    let bracket = 1.4 * l_bits + 2.0 * lg(k_f) + 2.0 * lg(1.0 + 1.0 / cfg.eps)
        + 0.5 * lg((1.0 + cfg.tau) / (1.0 - cfg.eps))
        + 2.0 * lg(rho)
        - lg(2.0);
    let raw = (k_f * bracket / cfg.delta_v).ceil();
    if raw < 1.0 {
        log::warn!("iteration budget {raw} is not positive; clamping to 1");
        return Ok(1);
    }
    if raw >= u64::MAX as f64 {
        return Ok(u64::MAX);
    }
    Ok(raw as u64)
}

#[derive(Debug, Clone)]
struct Row {
    idx: Vec<usize>,
    val: Vec<f64>,
    offset: f64,
    permanent: bool,
}

impl Row {
    fn from_halfspace(h: &Halfspace, permanent: bool) -> Self {
        let (idx, val) = h
            .normal
            .iter()
            .enumerate()
            .filter(|(_, w)| **w != 0.0)
            .map(|(i, w)| (i, *w))
            .unzip();
        Self { idx, val, offset: h.offset, permanent }
    }

    fn dot(&self, x: &[f64]) -> f64 {
        self.idx.iter().zip(&self.val).map(|(i, w)| x[*i] * w).sum()
    }

    fn slack(&self, x: &[f64]) -> f64 {
        self.offset - self.dot(x)
    }

    fn to_halfspace(&self, dim: usize) -> Halfspace {
        let mut normal = vec![0.0; dim];
        for (i, w) in self.idx.iter().zip(&self.val) {
            normal[*i] = *w;
        }
        Halfspace { normal, offset: self.offset }
    }
}

/// Intersection of halfspaces with a strictly interior point.
#[derive(Debug, Clone)]
pub struct Polytope {
    dim: usize,
    rows: Vec<Row>,
    interior: Vec<f64>,
}

impl Polytope {
    pub fn new(dim: usize, halfspaces: &[Halfspace], interior_point: Vec<f64>) -> Result<Self> {
        if interior_point.len() != dim {
            return Err(Error::InvalidInput("interior point has the wrong dimension".into()));
        }
        let mut rows = Vec::with_capacity(halfspaces.len());
        for h in halfspaces {
            if h.normal.len() != dim {
                return Err(Error::InvalidInput("halfspace has the wrong dimension".into()));
            }
            if !(h.slack(&interior_point) > 0.0) {
                return Err(Error::InvalidInput("interior point is not strictly inside".into()));
            }
            rows.push(Row::from_halfspace(h, true));
        }
        Ok(Self { dim, rows, interior: interior_point })
    }

    /// `{v : |v|_inf <= rho}` centered at the origin.
    pub fn cube(dim: usize, rho: f64) -> Self {
        let mut rows = Vec::with_capacity(2 * dim);
        for i in 0..dim {
            rows.push(Row { idx: vec![i], val: vec![1.0], offset: rho, permanent: true });
            rows.push(Row { idx: vec![i], val: vec![-1.0], offset: rho, permanent: true });
        }
        Self { dim, rows, interior: vec![0.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn interior_point(&self) -> &[f64] {
        &self.interior
    }

    pub fn halfspaces(&self) -> Vec<Halfspace> {
        self.rows.iter().map(|r| r.to_halfspace(self.dim)).collect()
    }

    pub fn min_slack(&self, x: &[f64]) -> f64 {
        self.rows.iter().map(|r| r.slack(x)).fold(f64::INFINITY, f64::min)
    }

    /// Barrier value at a strictly interior point.
    pub fn barrier_value(&self, x: &[f64], analytic_weight: f64) -> Result<f64> {
        Ok(Trial::at(self, x, analytic_weight)?.value)
    }

    /// Leverages `sigma_i` at a strictly interior point.
    pub fn leverages(&self, x: &[f64]) -> Result<Vec<f64>> {
        let trial = Trial::at(self, x, 0.0)?;
        Ok(Eval::complete(self, trial, 0.0, false)?.sigma)
    }
}

/// Quantities of the barrier that need only `chol(H)`.
struct Trial {
    x: Vec<f64>,
    slacks: Vec<f64>,
    chol_h: Cholesky,
    value: f64,
}

impl Trial {
    fn at(poly: &Polytope, x: &[f64], c: f64) -> Result<Self> {
        let k = poly.dim;
        let slacks: Vec<f64> = poly.rows.iter().map(|r| r.slack(x)).collect();
        if slacks.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::Numerical("point left the polytope".into()));
        }
        let mut h = DenseMatrix::zeros(k);
        for (row, s) in poly.rows.iter().zip(&slacks) {
            h.add_sparse_outer_lower(&row.idx, &row.val, 1.0 / (s * s));
        }
        let chol_h = Cholesky::factor(&h)?;
        let value = 0.5 * chol_h.log_det() - c * slacks.iter().map(|s| s.ln()).sum::<f64>();
        Ok(Self { x: x.to_vec(), slacks, chol_h, value })
    }
}

/// Full barrier evaluation: leverages, gradient, and a Newton direction.
struct Eval {
    x: Vec<f64>,
    slacks: Vec<f64>,
    value: f64,
    hinv: DenseMatrix,
    sigma: Vec<f64>,
    direction: Vec<f64>,
    decrement: f64,
}

impl Eval {
    fn complete(poly: &Polytope, trial: Trial, c: f64, exact: bool) -> Result<Self> {
        let k = poly.dim;
        let hinv = trial.chol_h.inverse();
        let sigma: Vec<f64> = poly
            .rows
            .iter()
            .zip(&trial.slacks)
            .map(|(r, s)| hinv.sparse_quadratic_form(&r.idx, &r.val) / (s * s))
            .collect();
        let mut grad = vec![0.0; k];
        for ((row, s), sg) in poly.rows.iter().zip(&trial.slacks).zip(&sigma) {
            let coef = (sg + c) / s;
            for (i, w) in row.idx.iter().zip(&row.val) {
                grad[*i] += coef * w;
            }
        }
        let metric = if exact {
            exact_hessian(poly, &trial.slacks, &hinv, &sigma, c)
        } else {
            let mut q = DenseMatrix::zeros(k);
            for ((row, s), sg) in poly.rows.iter().zip(&trial.slacks).zip(&sigma) {
                q.add_sparse_outer_lower(&row.idx, &row.val, (sg + c) / (s * s));
            }
            q
        };
        let chol_q = Cholesky::factor(&metric)?;
        let mut direction = chol_q.solve(&grad);
        direction.iter_mut().for_each(|v| *v = -*v);
        let decrement = (-grad.iter().zip(&direction).map(|(g, d)| g * d).sum::<f64>()).max(0.0).sqrt();
        Ok(Self {
            x: trial.x,
            slacks: trial.slacks,
            value: trial.value,
            hinv,
            sigma,
            direction,
            decrement,
        })
    }

    fn at(poly: &Polytope, x: &[f64], c: f64, exact: bool) -> Result<Self> {
        Self::complete(poly, Trial::at(poly, x, c)?, c, exact)
    }
}

/// Exact Hessian `A^T (3 Sigma - 2 P.P) A + c A^T A` with `A` the slack-scaled
/// normals and `P = A H^{-1} A^T`.
fn exact_hessian(poly: &Polytope, slacks: &[f64], hinv: &DenseMatrix, sigma: &[f64], c: f64) -> DenseMatrix {
    let k = poly.dim;
    let m = poly.rows.len();
    let scaled: Vec<Vec<f64>> = poly
        .rows
        .iter()
        .zip(slacks)
        .map(|(r, s)| r.val.iter().map(|w| w / s).collect())
        .collect();
    // columns of H^{-1} A^T
    let hinv_at: Vec<Vec<f64>> = poly
        .rows
        .iter()
        .zip(&scaled)
        .map(|(r, a)| {
            let mut col = vec![0.0; k];
            for (i, w) in r.idx.iter().zip(a) {
                for (cp, h) in col.iter_mut().zip(hinv.row(*i)) {
                    *cp += h * w;
                }
            }
            col
        })
        .collect();
    let mut hess = DenseMatrix::zeros(k);
    for i in 0..m {
        let ri = &poly.rows[i];
        hess.add_sparse_outer_lower(&ri.idx, &scaled[i], 3.0 * sigma[i] + c);
        for j in 0..m {
            if i == j {
                // P_ii^2 = sigma_i^2
                hess.add_sparse_outer_lower(&ri.idx, &scaled[i], -2.0 * sigma[i] * sigma[i]);
                continue;
            }
            let rj = &poly.rows[j];
            let pij: f64 = ri.idx.iter().zip(&scaled[i]).map(|(p, a)| hinv_at[j][*p] * a).sum();
            if pij == 0.0 {
                continue;
            }
            let coef = -2.0 * pij * pij;
            // coef * a_i a_j^T, lower triangle only
            for (p, &ip) in ri.idx.iter().enumerate() {
                for (q, &jq) in rj.idx.iter().enumerate() {
                    if jq <= ip {
                        hess.add(ip, jq, coef * scaled[i][p] * scaled[j][q]);
                    }
                }
            }
        }
    }
    hess
}

/// Approximate volumetric center of `polytope`, warm-started at its interior
/// point, with [`CenteringOptions::precise`].
pub fn volumetric_center(polytope: &Polytope) -> Result<Vec<f64>> {
    volumetric_center_with(polytope, SolverConfig::EPS, CenteringOptions::precise())
}

pub fn volumetric_center_with(polytope: &Polytope, analytic_weight: f64, opts: CenteringOptions) -> Result<Vec<f64>> {
    let mut eval = Eval::at(polytope, &polytope.interior, analytic_weight, opts.exact_hessian)?;
    for _ in 0..opts.max_steps {
        if eval.decrement <= opts.tolerance {
            break;
        }
        eval = newton_step(polytope, eval, analytic_weight, opts.exact_hessian)?;
    }
    Ok(eval.x)
}

/// One damped Newton step with backtracking on the barrier value.
fn newton_step(poly: &Polytope, eval: Eval, c: f64, exact: bool) -> Result<Eval> {
    let lambda = eval.decrement;
    let mut alpha = if lambda > 0.25 { 1.0 / (1.0 + lambda) } else { 1.0 };
    // stay strictly inside: s_i - alpha (w_i . d) > 0
    for (row, s) in poly.rows.iter().zip(&eval.slacks) {
        let rate = row.dot(&eval.direction);
        if rate > 0.0 {
            alpha = alpha.min(0.95 * s / rate);
        }
    }
    let decrease = lambda * lambda;
    for _ in 0..40 {
        let x: Vec<f64> = eval.x.iter().zip(&eval.direction).map(|(x, d)| x + alpha * d).collect();
        if let Ok(trial) = Trial::at(poly, &x, c) {
            if trial.value <= eval.value - 1e-4 * alpha * decrease || decrease < 1e-20 {
                return Eval::complete(poly, trial, c, exact);
            }
        }
        alpha *= 0.5;
    }
    // No progress possible at working precision; keep the current point.
    Ok(eval)
}

/// What an iteration did.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Add,
    Drop,
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceRecord {
    pub iter: u64,
    pub action: Action,
    pub constraints: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feasible: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Feasible { point: Vec<f64>, iterations: u64 },
    Minimizer { point: Vec<f64>, objective: f64, visited_feasible: u64, iterations: u64, exact: bool },
    EmptyCertificate { iterations: u64 },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunStats {
    pub iterations: u64,
    pub adds: u64,
    pub drops: u64,
    pub oracle_calls: u64,
    pub max_constraints: usize,
    pub newton_steps: u64,
    pub stalled: bool,
    /// The polytope became numerically degenerate before the budget ran out.
    pub collapsed: bool,
    /// Best objective after each feasible iterate (minimization only).
    #[serde(skip)]
    pub best_history: Vec<f64>,
}

/// Cutting-plane driver. Holds the localization polytope between runs.
pub struct CuttingPlane {
    cfg: SolverConfig,
    poly: Polytope,
    stats: RunStats,
    trace: Option<Box<dyn Write + Send>>,
}

impl CuttingPlane {
    /// Starts from the box of radius `cfg.rho` with interior point 0.
    pub fn new(cfg: SolverConfig, dim: usize) -> Self {
        let poly = Polytope::cube(dim, cfg.rho);
        Self::with_polytope(cfg, poly)
    }

    pub fn with_polytope(cfg: SolverConfig, poly: Polytope) -> Self {
        Self { cfg, poly, stats: RunStats::default(), trace: None }
    }

    /// Writes one JSON line per iteration.
    pub fn with_trace(mut self, sink: Box<dyn Write + Send>) -> Self {
        self.trace = Some(sink);
        self
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn polytope(&self) -> &Polytope {
        &self.poly
    }

    pub fn stats(&self) -> &RunStats {
        &self.stats
    }

    pub fn run_feasibility(&mut self, oracle: &mut dyn SeparationOracle) -> Result<Outcome> {
        self.run(oracle, None)
    }

    pub fn run_minimize(&mut self, oracle: &mut dyn SeparationOracle, objective: &mut dyn Objective) -> Result<Outcome> {
        self.run(oracle, Some(objective))
    }

    fn constraint_cap(&self) -> usize {
        201 * self.poly.dim
    }

    fn emit(&mut self, record: TraceRecord) -> Result<()> {
        if let Some(sink) = self.trace.as_mut() {
            serde_json::to_writer(&mut *sink, &record)?;
            sink.write_all(b"\n")?;
        }
        Ok(())
    }

    fn run(&mut self, oracle: &mut dyn SeparationOracle, mut objective: Option<&mut dyn Objective>) -> Result<Outcome> {
        let c = self.cfg.eps;
        let opts = self.cfg.centering;
        let k = self.poly.dim;
        self.stats = RunStats::default();
        let mut eval = Eval::at(&self.poly, &self.poly.interior.clone(), c, opts.exact_hessian)?;

        let mut best: Option<(Vec<f64>, f64)> = None;
        let mut feasible_seen: u64 = 0;
        let mut certified: Vec<Vec<f64>> = Vec::new();
        let mut stall_count: u64 = 0;
        let mut stall_ref = f64::INFINITY;

        let mut iter: u64 = 0;
        while iter < self.cfg.max_iters {
            iter += 1;
            self.stats.iterations = iter;

            for _ in 0..opts.max_steps {
                if eval.decrement <= opts.tolerance {
                    break;
                }
                eval = match newton_step(&self.poly, eval, c, opts.exact_hessian) {
                    Ok(e) => e,
                    Err(e) => {
                        log::warn!("centering failed at iteration {iter}: {e}");
                        self.stats.collapsed = true;
                        return Ok(self.finish(best, feasible_seen));
                    }
                };
                self.stats.newton_steps += 1;
            }
            let x = eval.x.clone();
            self.poly.interior = x.clone();

            // drop step
            let weakest = self
                .poly
                .rows
                .iter()
                .zip(&eval.sigma)
                .enumerate()
                .filter(|(_, (r, _))| !r.permanent)
                .min_by(|a, b| a.1 .1.total_cmp(b.1 .1))
                .map(|(i, (_, s))| (i, *s));
            if let Some((i, s)) = weakest {
                if s < self.cfg.tau {
                    self.poly.rows.remove(i);
                    self.stats.drops += 1;
                    self.emit(TraceRecord {
                        iter,
                        action: Action::Drop,
                        constraints: self.poly.rows.len(),
                        feasible: None,
                        objective: None,
                    })?;
                    eval = match Eval::at(&self.poly, &x, c, opts.exact_hessian) {
                        Ok(e) => e,
                        Err(e) => {
                            log::warn!("re-evaluation after drop failed at iteration {iter}: {e}");
                            self.stats.collapsed = true;
                            return Ok(self.finish(best, feasible_seen));
                        }
                    };
                    continue;
                }
            }

            // add step
            self.stats.oracle_calls += 1;
            let (row, feasible, objective_value) = match oracle.separate(&x) {
                OracleResponse::Cut(h) => {
                    if h.normal.len() != k {
                        return Err(Error::Protocol("cut has the wrong dimension".into()));
                    }
                    let lhs: f64 = h.normal.iter().zip(&x).map(|(w, v)| w * v).sum();
                    let scale = 1.0 + h.offset.abs() + lhs.abs();
                    if lhs < h.offset - 1e-9 * scale {
                        return Err(Error::Protocol(format!(
                            "cut does not separate the query (w.x = {lhs}, u = {})",
                            h.offset
                        )));
                    }
                    for p in &certified {
                        if h.slack(p) < -1e-9 * (1.0 + h.offset.abs()) {
                            return Err(Error::Protocol("cut excludes a point the oracle certified as inside".into()));
                        }
                    }
                    (Row::from_halfspace(&h, false), false, None)
                }
                OracleResponse::Inside => {
                    let Some(obj) = objective.as_deref_mut() else {
                        self.emit(TraceRecord {
                            iter,
                            action: Action::Add,
                            constraints: self.poly.rows.len(),
                            feasible: Some(true),
                            objective: None,
                        })?;
                        return Ok(Outcome::Feasible { point: x, iterations: iter });
                    };
                    let (value, g) = obj.evaluate(&x);
                    feasible_seen += 1;
                    if certified.len() == 256 {
                        certified.remove(0);
                    }
                    certified.push(x.clone());
                    let improved = best.as_ref().is_none_or(|(_, b)| value < *b);
                    if improved {
                        best = Some((x.clone(), value));
                    }
                    let best_value = best.as_ref().map(|b| b.1).unwrap_or(value);
                    self.stats.best_history.push(best_value);
                    if g.iter().map(|v| v * v).sum::<f64>().sqrt() <= ZERO_SUBGRADIENT {
                        self.emit(TraceRecord {
                            iter,
                            action: Action::Add,
                            constraints: self.poly.rows.len(),
                            feasible: Some(true),
                            objective: Some(value),
                        })?;
                        return Ok(Outcome::Minimizer {
                            point: x,
                            objective: value,
                            visited_feasible: feasible_seen,
                            iterations: iter,
                            exact: true,
                        });
                    }
                    if let Some(rule) = self.cfg.stall {
                        if best_value < stall_ref - rule.tolerance {
                            stall_ref = best_value;
                            stall_count = 0;
                        } else {
                            stall_count += 1;
                            if stall_count >= rule.window {
                                self.stats.stalled = true;
                                return Ok(self.finish(best, feasible_seen));
                            }
                        }
                    }
                    let gx: f64 = g.iter().zip(&x).map(|(a, b)| a * b).sum();
                    // g . (v - x) <= best - g(x) <= 0 by convexity
                    let offset = match self.cfg.cut_depth {
                        CutDepth::Central => gx,
                        CutDepth::Deep => gx + (best_value - value).min(0.0),
                    };
                    let h = Halfspace::new(g, offset)?;
                    (Row::from_halfspace(&h, false), true, Some(value))
                }
            };

            match self.add_cut(row, &eval) {
                Ok(next) => eval = next,
                Err(e) => {
                    log::warn!("cut insertion failed at iteration {iter}: {e}");
                    self.stats.collapsed = true;
                    return Ok(self.finish(best, feasible_seen));
                }
            }
            self.stats.adds += 1;
            self.stats.max_constraints = self.stats.max_constraints.max(self.poly.rows.len());
            if self.poly.rows.len() > self.constraint_cap() {
                return Err(Error::Numerical(format!(
                    "{} constraints exceed the 201k bound",
                    self.poly.rows.len()
                )));
            }
            self.emit(TraceRecord {
                iter,
                action: Action::Add,
                constraints: self.poly.rows.len(),
                feasible: Some(feasible),
                objective: objective_value,
            })?;
        }
        Ok(self.finish(best, feasible_seen))
    }

    /// Inserts a cut and moves the iterate to a strictly interior point.
    fn add_cut(&mut self, mut row: Row, eval: &Eval) -> Result<Eval> {
        let x = &eval.x;
        let wx = row.dot(x);
        // H^{-1} w and sqrt(w^T H^{-1} w)
        let k = self.poly.dim;
        let mut hw = vec![0.0; k];
        for (i, w) in row.idx.iter().zip(&row.val) {
            for (hp, h) in hw.iter_mut().zip(eval.hinv.row(*i)) {
                *hp += h * w;
            }
        }
        let q = row.idx.iter().zip(&row.val).map(|(i, w)| hw[*i] * w).sum::<f64>().max(0.0).sqrt();
        if !(q > 0.0) {
            return Err(Error::Numerical("degenerate cut".into()));
        }
        // largest step along -H^{-1} w / q keeping existing slacks positive
        let dir: Vec<f64> = hw.iter().map(|v| -v / q).collect();
        let mut reach = f64::INFINITY;
        for (r, s) in self.poly.rows.iter().zip(&eval.slacks) {
            let rate = r.dot(&dir);
            if rate > 0.0 {
                reach = reach.min(s / rate);
            }
        }
        // the Dikin ellipsoid guarantees reach >= 1
        let (offset, beta) = match self.cfg.cut_depth {
            CutDepth::Central => (wx, 0.5),
            CutDepth::Deep => {
                // Cuts deeper than the ray can follow are made shallower, which
                // keeps them valid. The new point goes past the cut by half the
                // remaining room, at most half a Dikin radius.
                let offset = row.offset.clamp(wx - DEEP_REACH * reach * q, wx);
                let need = (wx - offset) / q;
                (offset, need + 0.5 * (reach - need).min(1.0))
            }
        };
        row.offset = offset;
        let next: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + beta * d).collect();
        self.poly.rows.push(row);
        self.poly.interior = next.clone();
        Eval::at(&self.poly, &next, self.cfg.eps, self.cfg.centering.exact_hessian)
    }

    fn finish(&self, best: Option<(Vec<f64>, f64)>, feasible_seen: u64) -> Outcome {
        match best {
            Some((point, objective)) => Outcome::Minimizer {
                point,
                objective,
                visited_feasible: feasible_seen,
                iterations: self.stats.iterations,
                exact: false,
            },
            None => Outcome::EmptyCertificate { iterations: self.stats.iterations },
        }
    }
}

/// Feasibility search from the `rho`-box.
pub fn run_feasibility(oracle: &mut dyn SeparationOracle, dim: usize, cfg: SolverConfig) -> Result<Outcome> {
    CuttingPlane::new(cfg, dim).run_feasibility(oracle)
}

/// Convex minimization over the set described by `oracle`.
pub fn run_minimize(
    oracle: &mut dyn SeparationOracle,
    objective: &mut dyn Objective,
    dim: usize,
    cfg: SolverConfig,
) -> Result<Outcome> {
    CuttingPlane::new(cfg, dim).run_minimize(oracle, objective)
}

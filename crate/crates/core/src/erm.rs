//! Least squares over 1-fields with a bound on the `C^{1,1}` seminorm.
//!
//! ```text
//! minimize (1/n) sum_a (y(a) - f(a))^2   subject to   Gamma(P) <= M
//! ```
//!
//! over the `k = (d+1) n` scalars of the field, solved with the cutting-plane
//! method. Two separation oracles drive the solver: one for the seminorm ball
//! `K1(M)` built from the maximizing pair of the functional, and the
//! objective's gradient, which is nonzero only on value slots.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::cutplane::{
    self, CenteringOptions, CutDepth, CuttingPlane, Halfspace, OracleResponse, Outcome, RunStats,
    SeparationOracle, SolverConfig, StallRule,
};
use crate::error::{Error, Result};
use crate::field::{dot, norm, squared_distance};
use crate::gamma::{gamma1, gamma1_subgradient, OneField, PointSet};

/// Least-squares fit under `Gamma(P) <= M`.
#[derive(Debug, Clone)]
pub struct RegressionProblem {
    pub base: PointSet,
    pub y: Vec<f64>,
    pub m: f64,
    pub gamma_tol: f64,
}

impl RegressionProblem {
    /// Uses the default tolerance `1e-6 |y|^2 / n`.
    pub fn new(base: PointSet, y: Vec<f64>, m: f64) -> Result<Self> {
        let tol = default_gamma_tol(&y);
        Self::with_tolerance(base, y, m, tol)
    }

    pub fn with_tolerance(base: PointSet, y: Vec<f64>, m: f64, gamma_tol: f64) -> Result<Self> {
        if y.len() != base.len() {
            return Err(Error::InvalidInput(format!(
                "{} observations for {} points",
                y.len(),
                base.len()
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("observations must be finite".into()));
        }
        if !(m > 0.0) || !m.is_finite() {
            return Err(Error::InvalidInput(format!("seminorm bound must be positive, got {m}")));
        }
        if !(gamma_tol > 0.0) {
            return Err(Error::InvalidInput(format!("tolerance must be positive, got {gamma_tol}")));
        }
        Ok(Self { base, y, m, gamma_tol })
    }

    pub fn n(&self) -> usize {
        self.base.len()
    }

    pub fn k(&self) -> usize {
        (self.base.dim() + 1) * self.base.len()
    }
}

/// `1e-6 |y|^2 / n`, floored so that all-zero data still gets a positive value.
pub fn default_gamma_tol(y: &[f64]) -> f64 {
    let n = y.len().max(1) as f64;
    (1e-6 * dot(y, y) / n).max(1e-15)
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub field: OneField,
    pub objective: f64,
    pub gamma1_value: f64,
    pub iterations: u64,
    pub used_trivial_shortcut: bool,
    pub rho_inner: f64,
    pub rho_outer: f64,
    /// Radius of the initial box actually used.
    pub box_radius: f64,
    pub l_bits: f64,
    /// Iteration budget from the volume argument.
    pub budget: u64,
    /// Iterations actually allowed (the budget, or a smaller cap).
    pub iteration_cap: u64,
    pub stats: RunStats,
}

/// Knobs for [`solve_with`]. The defaults follow [`solve`].
pub struct SolveOptions {
    /// Cap on iterations below the theoretical budget.
    pub max_iters: Option<u64>,
    pub cut_depth: CutDepth,
    pub centering: CenteringOptions,
    /// Stop once the best objective has not improved by more than `gamma/10`
    /// over `5k` consecutive feasible iterates.
    pub stall_stop: bool,
    /// Initial box radius. Defaults to the smaller of the outer radius and
    /// [`certified_radius`].
    pub box_radius: Option<f64>,
    pub trace: Option<Box<dyn Write + Send>>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_iters: None,
            cut_depth: CutDepth::Deep,
            centering: CenteringOptions::per_iteration(),
            stall_stop: true,
            box_radius: None,
            trace: None,
        }
    }
}

/// Separation oracle for `K1(M) = {P : Gamma(P) <= M}` on the flattened layout.
#[derive(Debug, Clone)]
pub struct SeminormBallOracle {
    base: PointSet,
    m: f64,
}

impl SeminormBallOracle {
    pub fn new(base: PointSet, m: f64) -> Self {
        Self { base, m }
    }
}

impl SeparationOracle for SeminormBallOracle {
    fn separate(&mut self, x: &[f64]) -> OracleResponse {
        let field = OneField::from_flat(self.base.clone(), x).expect("flat vector matches the base");
        feasibility_oracle(&field, self.m)
    }
}

/// Certifies `Gamma(P) <= M` or returns a cut separating `P` from `K1(M)`.
///
/// With `(a*, b*, z)` the maximizing pair and its critical point, every field
/// in `K1(M)` satisfies
/// `[f(a*) + D_{a*} f . (z - a*)] - [f(b*) + D_{b*} f . (z - b*)] <= (M/2)(|a*-z|^2 + |b*-z|^2)`,
/// while `P` itself has left side `(Gamma(P)/2)(...)`.
pub fn feasibility_oracle(field: &OneField, m: f64) -> OracleResponse {
    let (value, cert) = gamma1(field);
    if value <= m {
        return OracleResponse::Inside;
    }
    let cert = cert.expect("positive value has a certificate");
    let d = field.dim();
    let a = field.point(cert.a_idx);
    let b = field.point(cert.b_idx);
    let mut w = vec![0.0; field.flat_len()];
    let sa = OneField::value_slot(d, cert.a_idx);
    let sb = OneField::value_slot(d, cert.b_idx);
    w[sa] = 1.0;
    w[sb] = -1.0;
    for c in 0..d {
        w[sa + 1 + c] = cert.z[c] - a[c];
        w[sb + 1 + c] = -(cert.z[c] - b[c]);
    }
    let den = squared_distance(a, &cert.z) + squared_distance(b, &cert.z);
    OracleResponse::Cut(Halfspace::new(w, 0.5 * m * den).expect("value slots are nonzero"))
}

/// `g(P) = |y - f|^2 / n` and its gradient `2 (f - y) / n` on value slots.
pub fn objective_oracle(field: &OneField, y: &[f64]) -> Result<(f64, Vec<f64>)> {
    let n = field.len();
    if y.len() != n {
        return Err(Error::InvalidInput(format!("{} observations for {n} points", y.len())));
    }
    let d = field.dim();
    let mut grad = vec![0.0; field.flat_len()];
    let mut loss = 0.0;
    for i in 0..n {
        let r = field.value(i) - y[i];
        loss += r * r;
        grad[OneField::value_slot(d, i)] = 2.0 * r / n as f64;
    }
    Ok((loss / n as f64, grad))
}

/// A field with values `y` inside `K1(M)`, if an easy one exists; it has
/// objective 0 and is globally optimal.
///
/// Two gradient choices are tried: all zero, then the slope of the
/// least-squares affine fit, which interpolates exactly when the data are
/// affine.
pub fn trivial_shortcut(base: &PointSet, y: &[f64], m: f64) -> Result<Option<OneField>> {
    let flat = OneField::with_zero_gradients(base.clone(), y.to_vec())?;
    if gamma1(&flat).0 <= m {
        return Ok(Some(flat));
    }
    let Some(slope) = affine_slope(base, y) else {
        return Ok(None);
    };
    let tilted = OneField::new(base.clone(), y.to_vec(), vec![slope; base.len()])?;
    Ok((gamma1(&tilted).0 <= m).then_some(tilted))
}

/// Slope of the least-squares affine fit, or `None` if the points do not
/// span `R^d` affinely.
fn affine_slope(base: &PointSet, y: &[f64]) -> Option<Vec<f64>> {
    let (n, d) = (base.len(), base.dim());
    if n <= d {
        return None;
    }
    let design = DMatrix::from_fn(n, d + 1, |i, j| if j == 0 { 1.0 } else { base.point(i)[j - 1] });
    let svd = design.svd(true, true);
    let sv = &svd.singular_values;
    if sv.min() <= 1e-10 * sv.max() {
        return None;
    }
    let coef = svd.solve(&DVector::from_column_slice(y), 0.0).ok()?;
    Some(coef.iter().skip(1).copied().collect())
}

/// Radius of a Euclidean ball inside `K1(M)` for `r`-separated points:
/// `rho1 = r^2 M / (8 (1 + r)) * sqrt(n)`.
pub fn inner_radius(r: f64, m: f64, n: usize) -> f64 {
    r * r * m / (8.0 * (1.0 + r)) * (n as f64).sqrt()
}

/// Radius of a Euclidean ball containing the relevant part of `K1(M)`:
/// `rho2 = sqrt(n) [ |y|^2/n + 4 (10 |y|/r + 5M/2)^2 ]^{1/2}`.
///
/// The bound assumes the points form a fine net of the unit ball; for other
/// designs it is a heuristic box size.
pub fn outer_radius(y: &[f64], r: f64, m: f64, n: usize) -> f64 {
    let ny = norm(y);
    let n_f = n as f64;
    let slope = if r.is_finite() { 10.0 * ny / r } else { 0.0 };
    n_f.sqrt() * (ny * ny / n_f + 4.0 * (slope + 2.5 * m).powi(2)).sqrt()
}

/// Sup-norm radius of a box holding every field of `K1(M)` whose objective is
/// at most that of the zero field, so in particular the optimum.
///
/// Values obey `|f(a)| <= |y(a)| + |y|`. `Gamma <= M` forces, for every pair
/// with `delta = |b - a|` and `u = (b - a)/delta`,
/// `|D_a f - D_b f| <= M delta` and `|D_a f . u| <= |f(b) - f(a)|/delta + 3 M delta / 4`,
/// so `d` well-spread partners per point bound the gradient. `None` when some
/// point has no `d` affinely independent partners.
pub fn certified_radius(base: &PointSet, y: &[f64], m: f64) -> Option<f64> {
    let n = base.len();
    let d = base.dim();
    if n <= d {
        return None;
    }
    let ny = norm(y);
    let mut radius = y.iter().map(|v| v.abs()).fold(0.0, f64::max) + ny;
    for a in 0..n {
        let pa = base.point(a);
        // greedy partners: largest component orthogonal to the chosen directions
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(d);
        let mut rows: Vec<f64> = Vec::with_capacity(d * d);
        let mut bounds: Vec<f64> = Vec::with_capacity(d);
        for _ in 0..d {
            let mut pick: Option<(usize, f64)> = None;
            for b in (0..n).filter(|&b| b != a) {
                let mut v: Vec<f64> = base.point(b).iter().zip(pa).map(|(x, z)| x - z).collect();
                for e in &basis {
                    let c = dot(&v, e);
                    v.iter_mut().zip(e).for_each(|(vi, ei)| *vi -= c * ei);
                }
                let len = norm(&v);
                if pick.is_none_or(|(_, best)| len > best) {
                    pick = Some((b, len));
                }
            }
            let (b, orth) = pick?;
            let diff: Vec<f64> = base.point(b).iter().zip(pa).map(|(x, z)| x - z).collect();
            let delta = norm(&diff);
            if orth <= 1e-8 * delta {
                return None;
            }
            let mut e = diff.clone();
            for q in &basis {
                let c = dot(&e, q);
                e.iter_mut().zip(q).for_each(|(ei, qi)| *ei -= c * qi);
            }
            let len = norm(&e);
            basis.push(e.into_iter().map(|v| v / len).collect());
            rows.extend(diff.iter().map(|v| v / delta));
            let df = (y[b] - y[a]).abs() + std::f64::consts::SQRT_2 * ny;
            bounds.push(df / delta + 0.75 * m * delta);
        }
        let u = nalgebra::DMatrix::from_row_slice(d, d, &rows);
        let smin = u.singular_values().min();
        if !(smin > 1e-8) {
            return None;
        }
        radius = radius.max(norm(&bounds) / smin);
    }
    Some(radius)
}

/// `L = max(log2(4 |y|^2 / (n gamma rho1)), log2 k)`.
pub fn choose_l(y: &[f64], n: usize, gamma_tol: f64, rho_inner: f64, k: usize) -> f64 {
    let raw = (4.0 * dot(y, y) / (n as f64 * gamma_tol * rho_inner)).log2();
    if raw.is_finite() {
        raw.max(cutplane::l_floor(k))
    } else {
        cutplane::l_floor(k)
    }
}

/// Seminorm bound schedule `n^{1 / (2 max(d, 5))}`.
pub fn schedule_m(n: usize, d: usize) -> f64 {
    (n as f64).powf(1.0 / (2.0 * d.max(5) as f64))
}

/// Solves the regression problem with default options.
pub fn solve(problem: &RegressionProblem) -> Result<SolveReport> {
    solve_with(problem, SolveOptions::default())
}

pub fn solve_with(problem: &RegressionProblem, opts: SolveOptions) -> Result<SolveReport> {
    let n = problem.n();
    let k = problem.k();
    let r = problem.base.separation();
    let rho_inner = inner_radius(if r.is_finite() { r } else { 1.0 }, problem.m, n);
    let rho_outer = outer_radius(&problem.y, r, problem.m, n);
    let l_bits = choose_l(&problem.y, n, problem.gamma_tol, rho_inner, k);
    let box_radius = opts.box_radius.unwrap_or_else(|| {
        certified_radius(&problem.base, &problem.y, problem.m).map_or(rho_outer, |c| c.min(rho_outer))
    });

    if let Some(field) = trivial_shortcut(&problem.base, &problem.y, problem.m)? {
        let gamma1_value = gamma1(&field).0;
        return Ok(SolveReport {
            field,
            objective: 0.0,
            gamma1_value,
            iterations: 0,
            used_trivial_shortcut: true,
            rho_inner,
            rho_outer,
            box_radius,
            l_bits,
            budget: 0,
            iteration_cap: 0,
            stats: RunStats::default(),
        });
    }
    log::debug!("outer radius {rho_outer:.3e} assumes the design is a fine net of the unit ball");

    let mut cfg = SolverConfig::for_problem(k, box_radius, l_bits)?;
    let budget = cfg.max_iters;
    if let Some(cap) = opts.max_iters {
        cfg = cfg.with_max_iters(cap.min(budget));
    }
    cfg.cut_depth = opts.cut_depth;
    cfg.centering = opts.centering;
    if opts.stall_stop {
        cfg.stall = Some(StallRule { tolerance: problem.gamma_tol / 10.0, window: 5 * k as u64 });
    }
    let iteration_cap = cfg.max_iters;

    let mut solver = CuttingPlane::new(cfg, k);
    if let Some(sink) = opts.trace {
        solver = solver.with_trace(sink);
    }
    let mut oracle = SeminormBallOracle::new(problem.base.clone(), problem.m);
    let base = problem.base.clone();
    let y = problem.y.clone();
    let mut objective = move |x: &[f64]| {
        let field = OneField::from_flat(base.clone(), x).expect("flat vector matches the base");
        objective_oracle(&field, &y).expect("observation count checked")
    };
    let outcome = solver.run_minimize(&mut oracle, &mut objective)?;
    let stats = solver.stats().clone();
    match outcome {
        Outcome::Minimizer { point, objective, iterations, .. } => {
            let field = OneField::from_flat(problem.base.clone(), &point)?;
            let gamma1_value = gamma1(&field).0;
            Ok(SolveReport {
                field,
                objective,
                gamma1_value,
                iterations,
                used_trivial_shortcut: false,
                rho_inner,
                rho_outer,
                box_radius,
                l_bits,
                budget,
                iteration_cap,
                stats,
            })
        }
        Outcome::EmptyCertificate { iterations } | Outcome::Feasible { iterations, .. } => {
            Err(Error::NoFeasibleField { iterations })
        }
    }
}

/// Options for [`minimize_seminorm_with`].
#[derive(Debug, Clone)]
pub struct SeminormOptions {
    pub max_iters: u64,
    /// Bits of volume reduction requested from the solver.
    pub l_bits: f64,
}

impl Default for SeminormOptions {
    fn default() -> Self {
        Self { max_iters: 20_000, l_bits: 30.0 }
    }
}

/// Smallest seminorm of any 1-field with the given values, and a field
/// attaining it (approximately). Only the `d n` gradients are optimized.
pub fn minimize_seminorm(base: &PointSet, values: &[f64]) -> Result<(f64, OneField)> {
    minimize_seminorm_with(base, values, SeminormOptions::default())
}

pub fn minimize_seminorm_with(base: &PointSet, values: &[f64], opts: SeminormOptions) -> Result<(f64, OneField)> {
    let n = base.len();
    let d = base.dim();
    if n < 2 {
        return Err(Error::Precondition("seminorm minimization needs at least two points".into()));
    }
    if values.len() != n {
        return Err(Error::InvalidInput(format!("{} values for {n} points", values.len())));
    }
    let start = OneField::with_zero_gradients(base.clone(), values.to_vec())?;
    let (g0, _) = gamma1(&start);
    if g0 == 0.0 {
        return Ok((0.0, start));
    }
    // Box for the gradients: largest secant slope plus the curvature budget
    // over the diameter, doubled.
    let mut slope: f64 = 0.0;
    let mut diam: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let dist = squared_distance(base.point(i), base.point(j)).sqrt();
            slope = slope.max((values[i] - values[j]).abs() / dist);
            diam = diam.max(dist);
        }
    }
    let rho = 2.0 * (slope + g0 * diam) + 1.0;
    let k = d * n;
    let mut cfg = SolverConfig::for_problem(k, rho, opts.l_bits)?;
    cfg.max_iters = cfg.max_iters.min(opts.max_iters);
    cfg.stall = Some(StallRule { tolerance: 1e-10 * g0, window: 5 * k as u64 });

    let to_field = |x: &[f64]| -> OneField {
        let gradients = x.chunks_exact(d).map(|c| c.to_vec()).collect();
        OneField::new(base.clone(), values.to_vec(), gradients).expect("shapes match")
    };
    let mut objective = |x: &[f64]| {
        let field = to_field(x);
        let (value, cert) = gamma1(&field);
        let full = match cert {
            Some(cert) if value > 0.0 => gamma1_subgradient(&field, &cert),
            _ => vec![0.0; field.flat_len()],
        };
        // keep only gradient slots
        let grad: Vec<f64> = full.chunks_exact(d + 1).flat_map(|block| block[1..].to_vec()).collect();
        (value, grad)
    };
    let mut everywhere = |_: &[f64]| OracleResponse::Inside;
    let outcome = cutplane::run_minimize(&mut everywhere, &mut objective, k, cfg)?;
    match outcome {
        Outcome::Minimizer { point, objective, .. } => Ok((objective, to_field(&point))),
        Outcome::EmptyCertificate { iterations } | Outcome::Feasible { iterations, .. } => {
            Err(Error::NoFeasibleField { iterations })
        }
    }
}

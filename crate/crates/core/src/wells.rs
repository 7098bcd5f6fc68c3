//! Wells' construction of a `C^{1,1}` interpolant with `Lip(grad) = M`.
//!
//! Each jet is turned into a shifted point `a~ = a - D_a f / M` and the
//! quadratic `d_a(x) = c_a + (M/4)|x - a~|^2` with `c_a = f(a) - |D_a f|^2/(2M)`.
//! The minimum of the `d_a` is a power diagram. For every subset `S` whose
//! face of that diagram is nonempty (the collection `K`), the cell
//!
//! ```text
//! T_S = (hull(S~) + S_*) / 2
//! ```
//!
//! carries the quadratic `d_S(S_C) + (M/2) dist(x, S_H)^2 - (M/2) dist(x, S_E)^2`,
//! where `S_H` is the affine hull of the shifted points of `S`, `S_E` the set
//! where all `d_s`, `s in S`, agree, `S_C` their intersection point and `S_*`
//! the part of `S_E` where `S` attains the minimum.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{dot, squared_distance, OneField};
use crate::gamma::gamma1;
use crate::lp::{self, LpOutcome};

/// Required margin for a subset to enter `K`.
pub const MARGIN_TOL: f64 = 1e-10;
/// Slack allowed when locating a point in a cell.
pub const LOCATE_TOL: f64 = 1e-7;
/// Relative singular value below which shifted points count as affinely dependent.
pub const RANK_TOL: f64 = 1e-10;
/// Size of the deterministic perturbation applied to degenerate configurations.
pub const PERTURBATION: f64 = 1e-9;

/// Shifted points and offsets of a 1-field for a given `M`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShiftedConfig {
    pub field: OneField,
    pub m: f64,
    pub shifted: Vec<Vec<f64>>,
    pub offsets: Vec<f64>,
    /// Magnitude of the perturbation applied to the shifted points, if any.
    pub perturbation: Option<f64>,
}

impl ShiftedConfig {
    pub fn new(field: &OneField, m: f64) -> Result<Self> {
        if !(m > 0.0) || !m.is_finite() {
            return Err(Error::InvalidInput(format!("M must be positive, got {m}")));
        }
        let shifted = (0..field.len())
            .map(|i| field.point(i).iter().zip(field.gradient(i)).map(|(a, g)| a - g / m).collect())
            .collect();
        let offsets = (0..field.len())
            .map(|i| field.value(i) - dot(field.gradient(i), field.gradient(i)) / (2.0 * m))
            .collect();
        Ok(Self { field: field.clone(), m, shifted, offsets, perturbation: None })
    }

    /// `d_a(x)`.
    pub fn quadratic(&self, a: usize, x: &[f64]) -> f64 {
        self.offsets[a] + 0.25 * self.m * squared_distance(x, &self.shifted[a])
    }

    fn perturbed(&self) -> Self {
        let mut out = self.clone();
        for (i, p) in out.shifted.iter_mut().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(i as u64);
            for c in p.iter_mut() {
                *c += PERTURBATION * rng.random_range(-1.0..1.0);
            }
        }
        out.perturbation = Some(PERTURBATION);
        out
    }

    /// `(alpha, beta)` with `d_c(x) - d_s(x) = alpha - beta . x`.
    fn difference(&self, c: usize, s: usize) -> (f64, Vec<f64>) {
        let (ac, as_) = (&self.shifted[c], &self.shifted[s]);
        let alpha = self.offsets[c] - self.offsets[s] + 0.25 * self.m * (dot(ac, ac) - dot(as_, as_));
        let beta = ac.iter().zip(as_).map(|(x, y)| 0.5 * self.m * (x - y)).collect();
        (alpha, beta)
    }
}

/// `{x : normal . x <= offset}` in `R^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellHalfspace {
    pub normal: Vec<f64>,
    pub offset: f64,
}

/// One member of `K` with everything needed to locate and evaluate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WellsCell {
    pub subset: Vec<usize>,
    /// `S_C = S_H` meet `S_E`.
    pub center: Vec<f64>,
    /// Orthonormal basis of the direction space of `S_H`.
    pub hull_basis: Vec<Vec<f64>>,
    /// Orthonormal basis of the direction space of `S_E`.
    pub equal_basis: Vec<Vec<f64>>,
    /// The shifted points of `S`; their convex hull is `S~`.
    pub hull_vertices: Vec<Vec<f64>>,
    /// Maps `y - v_0` to the barycentric weights of `v_1..`.
    pub barycentric: Vec<Vec<f64>>,
    /// `S_*` within `S_E`: `d_S <= d_c` for every `c` outside `S`.
    pub halfspaces: Vec<CellHalfspace>,
    /// `d_S(S_C)`.
    pub value_at_center: f64,
    /// Largest `delta` with `d_S + delta <= d_c` somewhere on `S_E` (capped at 1).
    pub margin: f64,
}

impl WellsCell {
    /// Splits `x = (y + z)/2` with `y` in `S_H`, `z` in `S_E`.
    fn decompose(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let v: Vec<f64> = x.iter().zip(&self.center).map(|(a, c)| 2.0 * (a - c)).collect();
        let mut h = vec![0.0; v.len()];
        for b in &self.hull_basis {
            let c = dot(&v, b);
            h.iter_mut().zip(b).for_each(|(hi, bi)| *hi += c * bi);
        }
        let y: Vec<f64> = self.center.iter().zip(&h).map(|(c, hi)| c + hi).collect();
        let z: Vec<f64> = self.center.iter().zip(v.iter().zip(&h)).map(|(c, (vi, hi))| c + vi - hi).collect();
        (y, z)
    }

    /// Barycentric weights of `y` with respect to the hull vertices.
    fn weights(&self, y: &[f64]) -> Vec<f64> {
        let v0 = &self.hull_vertices[0];
        let rel: Vec<f64> = y.iter().zip(v0).map(|(a, b)| a - b).collect();
        let rest: Vec<f64> = self.barycentric.iter().map(|row| dot(row, &rel)).collect();
        let mut w = Vec::with_capacity(rest.len() + 1);
        w.push(1.0 - rest.iter().sum::<f64>());
        w.extend(rest);
        w
    }

    /// Smallest containment slack of `x` (nonnegative inside `T_S`).
    fn containment(&self, x: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let (y, z) = self.decompose(x);
        let mut score = self.weights(&y).into_iter().fold(f64::INFINITY, f64::min);
        for h in &self.halfspaces {
            let slack = h.offset - dot(&h.normal, &z);
            let scale = 1.0 + h.offset.abs();
            score = score.min(slack / scale);
            if score < -LOCATE_TOL {
                break;
            }
        }
        (score, y, z)
    }

    /// The cell's quadratic at `x`.
    pub fn value(&self, m: f64, x: &[f64]) -> f64 {
        let v: Vec<f64> = x.iter().zip(&self.center).map(|(a, c)| a - c).collect();
        let to_equal: f64 = self.hull_basis.iter().map(|b| dot(&v, b).powi(2)).sum();
        let to_hull = (dot(&v, &v) - to_equal).max(0.0);
        self.value_at_center + 0.5 * m * to_hull - 0.5 * m * to_equal
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellComplex {
    pub config: ShiftedConfig,
    pub cells: Vec<WellsCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalResult {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub cell: Vec<usize>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WellsCheck {
    pub ok: bool,
    /// Ordered pair `(a, b)` with the smallest slack.
    pub worst_pair: Option<(usize, usize)>,
    pub slack: f64,
}

/// Checks, over all ordered pairs,
/// `f(b) <= f(a) + (D_a + D_b).(b - a)/2 + (M/4)|b - a|^2 - |D_a - D_b|^2/(4M)`.
pub fn check_wells_condition(field: &OneField, m: f64) -> WellsCheck {
    let n = field.len();
    let mut worst = (f64::INFINITY, None);
    for a in 0..n {
        for b in 0..n {
            if a == b {
                continue;
            }
            let (pa, pb) = (field.point(a), field.point(b));
            let (ga, gb) = (field.gradient(a), field.gradient(b));
            let mut mean_slope = 0.0;
            let mut grad_gap = 0.0;
            for c in 0..field.dim() {
                mean_slope += 0.5 * (ga[c] + gb[c]) * (pb[c] - pa[c]);
                grad_gap += (ga[c] - gb[c]).powi(2);
            }
            let bound = field.value(a) + mean_slope + 0.25 * m * squared_distance(pa, pb) - grad_gap / (4.0 * m);
            let slack = bound - field.value(b);
            if slack < worst.0 {
                worst = (slack, Some((a, b)));
            }
        }
    }
    let slack = if n < 2 { 0.0 } else { worst.0 };
    WellsCheck { ok: slack >= -1e-9, worst_pair: worst.1, slack }
}

/// Builds the cell complex of `field` for the constant `m`.
pub fn build_complex(field: &OneField, m: f64) -> Result<CellComplex> {
    let check = check_wells_condition(field, m);
    if !check.ok {
        return Err(Error::Precondition(format!(
            "Wells condition fails for pair {:?} (slack {:e})",
            check.worst_pair, check.slack
        )));
    }
    let (gamma, _) = gamma1(field);
    if gamma > m * (1.0 + 1e-9) + 1e-12 {
        return Err(Error::Precondition(format!("seminorm {gamma} exceeds M = {m}")));
    }
    let config = ShiftedConfig::new(field, m)?;
    match build_from(&config)? {
        Some(cells) => Ok(CellComplex { config, cells }),
        None => {
            let perturbed = config.perturbed();
            log::info!("degenerate shifted points; perturbing by {PERTURBATION:e}");
            let cells = build_from(&perturbed)?.unwrap_or_else(unreachable_degenerate);
            Ok(CellComplex { config: perturbed, cells })
        }
    }
}

fn unreachable_degenerate() -> Vec<WellsCell> {
    // build_from only reports degeneracy for unperturbed input
    unreachable!("perturbed configurations are built unconditionally")
}

/// All cells, or `None` when the configuration is degenerate and has not
/// been perturbed yet.
fn build_from(cfg: &ShiftedConfig) -> Result<Option<Vec<WellsCell>>> {
    let n = cfg.shifted.len();
    let d = cfg.field.dim();
    let strict = cfg.perturbation.is_none();
    let scale = 1.0 + cfg.shifted.iter().flat_map(|p| p.iter()).fold(0.0f64, |acc, v| acc.max(v.abs()));

    if strict {
        for a in 0..n {
            for b in a + 1..n {
                if squared_distance(&cfg.shifted[a], &cfg.shifted[b]).sqrt() <= 1e-12 * scale {
                    return Ok(None);
                }
            }
        }
    }

    let mut cells = Vec::new();
    let mut subset = Vec::with_capacity(d + 1);
    for size in 1..=(d + 1).min(n) {
        let mut degenerate = false;
        for_each_subset(n, size, &mut subset, &mut |s| {
            if degenerate {
                return Ok(());
            }
            match candidate(cfg, s, scale)? {
                Candidate::Member(cell) => cells.push(*cell),
                Candidate::Rejected => {}
                Candidate::Degenerate => {
                    if strict {
                        degenerate = true;
                    }
                }
            }
            Ok(())
        })?;
        if degenerate {
            return Ok(None);
        }
    }
    Ok(Some(cells))
}

fn for_each_subset(
    n: usize,
    size: usize,
    current: &mut Vec<usize>,
    f: &mut dyn FnMut(&[usize]) -> Result<()>,
) -> Result<()> {
    fn rec(
        start: usize,
        n: usize,
        size: usize,
        current: &mut Vec<usize>,
        f: &mut dyn FnMut(&[usize]) -> Result<()>,
    ) -> Result<()> {
        if current.len() == size {
            return f(current);
        }
        let remaining = size - current.len();
        for i in start..=n - remaining {
            current.push(i);
            rec(i + 1, n, size, current, f)?;
            current.pop();
        }
        Ok(())
    }
    current.clear();
    rec(0, n, size, current, f)
}

enum Candidate {
    Member(Box<WellsCell>),
    Rejected,
    /// Affinely dependent shifted points, or a tie within the margin tolerance.
    Degenerate,
}

fn candidate(cfg: &ShiftedConfig, s: &[usize], scale: f64) -> Result<Candidate> {
    let d = cfg.field.dim();
    let n = cfg.shifted.len();
    let s0 = s[0];
    let p = s.len() - 1;
    let base = &cfg.shifted[s0];

    // directions g_j = a~_j - a~_0 and the equalities beta_j . x = alpha_j
    let mut g = DMatrix::<f64>::zeros(d, p);
    let mut alpha = DVector::<f64>::zeros(p);
    for (j, &sj) in s[1..].iter().enumerate() {
        let (a, b) = cfg.difference(sj, s0);
        for c in 0..d {
            g[(c, j)] = cfg.shifted[sj][c] - base[c];
        }
        // d_sj - d_s0 = a - b.x = 0  <=>  g_j . x = 2a/M
        alpha[j] = 2.0 * a / cfg.m;
        debug_assert_eq!(b.len(), d);
    }

    // rank check and S_C = a~_0 + G w with G^T G w = alpha - G^T a~_0
    let center: Vec<f64>;
    let mut pinv = DMatrix::<f64>::zeros(p, d);
    if p > 0 {
        let sv = g.clone().svd(false, false).singular_values;
        let (smax, smin) = (sv.max(), sv.min());
        if !(smin > RANK_TOL * smax.max(scale * RANK_TOL)) || !(smin > RANK_TOL) {
            return Ok(Candidate::Degenerate);
        }
        let gtg = g.transpose() * &g;
        let Some(chol) = gtg.clone().cholesky() else {
            return Ok(Candidate::Degenerate);
        };
        let base_v = DVector::from_column_slice(base);
        let rhs = &alpha - g.transpose() * &base_v;
        let w = chol.solve(&rhs);
        center = (base_v + &g * w).iter().copied().collect();
        pinv = chol.inverse() * g.transpose();
    } else {
        center = base.clone();
    }

    // margins d_c - d_S on S_E around S_C
    let d_center = cfg.quadratic(s0, &center);
    let others: Vec<usize> = (0..n).filter(|c| !s.contains(c)).collect();
    let mut halfspaces = Vec::with_capacity(others.len());
    for &c in &others {
        let (a, b) = cfg.difference(c, s0);
        halfspaces.push(CellHalfspace { normal: b, offset: a });
    }

    // bases: hull directions from g, equal directions as the complement
    let (hull_basis, equal_basis) = orthonormal_split(&g, d);

    let margin = if equal_basis.is_empty() {
        let mut worst = 1.0f64;
        for h in &halfspaces {
            worst = worst.min(h.offset - dot(&h.normal, &center));
            if worst < -MARGIN_TOL {
                return Ok(Candidate::Rejected);
            }
        }
        worst
    } else {
        lp_margin(&halfspaces, &center, &equal_basis, scale)?
    };
    if margin.abs() <= MARGIN_TOL {
        return Ok(Candidate::Degenerate);
    }
    if margin < MARGIN_TOL {
        return Ok(Candidate::Rejected);
    }

    let barycentric = (0..p).map(|j| pinv.row(j).iter().copied().collect()).collect();
    Ok(Candidate::Member(Box::new(WellsCell {
        subset: s.to_vec(),
        center,
        hull_basis,
        equal_basis,
        hull_vertices: s.iter().map(|&i| cfg.shifted[i].clone()).collect(),
        barycentric,
        halfspaces,
        value_at_center: d_center,
        margin,
    })))
}

/// Orthonormal bases of `range(g)` and its orthogonal complement in `R^d`.
fn orthonormal_split(g: &DMatrix<f64>, d: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let p = g.ncols();
    let mut square = DMatrix::<f64>::zeros(d, d);
    square.view_mut((0, 0), (d, p)).copy_from(g);
    let svd = square.svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let sv = svd.singular_values;
    let smax = sv.max().max(f64::MIN_POSITIVE);
    let mut hull = Vec::new();
    let mut equal = Vec::new();
    for j in 0..d {
        let col: Vec<f64> = u.column(j).iter().copied().collect();
        if sv[j] > RANK_TOL * smax && hull.len() < p {
            hull.push(col);
        } else {
            equal.push(col);
        }
    }
    (hull, equal)
}

/// `max delta` (capped at 1) with `x = center + E t` and
/// `normal_c . x + delta <= offset_c` for all halfspaces.
fn lp_margin(halfspaces: &[CellHalfspace], center: &[f64], basis: &[Vec<f64>], scale: f64) -> Result<f64> {
    if halfspaces.is_empty() {
        return Ok(1.0);
    }
    let q = basis.len();
    let r = 1e3 * scale;
    // t = u - r, u in [0, 2r]; delta = delta0 + eps, eps >= 0
    let proj: Vec<Vec<f64>> = halfspaces.iter().map(|h| basis.iter().map(|b| dot(&h.normal, b)).collect()).collect();
    let at_corner: Vec<f64> = halfspaces
        .iter()
        .zip(&proj)
        .map(|(h, pr)| h.offset - dot(&h.normal, center) + r * pr.iter().sum::<f64>())
        .collect();
    let delta0 = at_corner.iter().copied().fold(f64::INFINITY, f64::min);
    if delta0 >= 1.0 {
        return Ok(1.0);
    }
    let mut a = Vec::with_capacity(halfspaces.len() + q + 1);
    let mut b = Vec::with_capacity(halfspaces.len() + q + 1);
    for (pr, corner) in proj.iter().zip(&at_corner) {
        let mut row = pr.clone();
        row.push(1.0);
        a.push(row);
        b.push((corner - delta0).max(0.0));
    }
    for i in 0..q {
        let mut row = vec![0.0; q + 1];
        row[i] = 1.0;
        a.push(row);
        b.push(2.0 * r);
    }
    let mut cap = vec![0.0; q + 1];
    cap[q] = 1.0;
    a.push(cap);
    b.push(1.0 - delta0);
    let mut c = vec![0.0; q + 1];
    c[q] = 1.0;
    match lp::maximize(&c, &a, &b)? {
        LpOutcome::Optimal { value, .. } => Ok(delta0 + value),
        LpOutcome::Unbounded => Err(Error::Numerical("margin program is unbounded".into())),
    }
}

impl CellComplex {
    pub fn m(&self) -> f64 {
        self.config.m
    }

    pub fn dim(&self) -> usize {
        self.config.field.dim()
    }

    /// Finds a cell with `x` in `T_S` and the decomposition `x = (y + z)/2`.
    pub fn locate(&self, x: &[f64]) -> Result<(&WellsCell, Vec<f64>, Vec<f64>)> {
        if x.len() != self.dim() {
            return Err(Error::InvalidInput(format!("query has {} coordinates, expected {}", x.len(), self.dim())));
        }
        let mut best: Option<(f64, usize, Vec<f64>, Vec<f64>)> = None;
        for (i, cell) in self.cells.iter().enumerate() {
            let (score, y, z) = cell.containment(x);
            if score >= 0.0 {
                return Ok((cell, y, z));
            }
            if best.as_ref().is_none_or(|b| score > b.0) {
                best = Some((score, i, y, z));
            }
        }
        match best {
            Some((score, i, y, z)) if score >= -LOCATE_TOL => Ok((&self.cells[i], y, z)),
            _ => Err(Error::Location { point: x.to_vec() }),
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<EvalResult> {
        let (cell, y, z) = self.locate(x)?;
        let m = self.m();
        Ok(EvalResult {
            value: cell.value(m, x),
            gradient: z.iter().zip(&y).map(|(zi, yi)| 0.5 * m * (zi - yi)).collect(),
            cell: cell.subset.clone(),
            y,
            z,
        })
    }

    /// Box around the data points, inflated by 1 on every side.
    pub fn sampling_box(&self) -> (Vec<f64>, Vec<f64>) {
        let (lo, hi) = self.config.field.base().bounding_box();
        (lo.iter().map(|v| v - 1.0).collect(), hi.iter().map(|v| v + 1.0).collect())
    }
}

/// Largest gradient difference quotient over `num_pairs` random pairs in the
/// sampling box; a lower bound on `Lip(grad f)`.
///
/// Pairs are drawn sequentially from `seed`, alternating between two
/// independent points and a point with a nearby partner, so a longer run
/// extends a shorter one.
pub fn lip_gradient_estimate(complex: &CellComplex, num_pairs: usize, seed: u64) -> Result<f64> {
    let (lo, hi) = complex.sampling_box();
    let d = lo.len();
    let width = lo.iter().zip(&hi).map(|(a, b)| b - a).fold(0.0, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = 0.0f64;
    for i in 0..num_pairs {
        let x: Vec<f64> = (0..d).map(|c| rng.random_range(lo[c]..hi[c])).collect();
        let x2: Vec<f64> = if i % 2 == 0 {
            (0..d).map(|c| rng.random_range(lo[c]..hi[c])).collect()
        } else {
            let h = 0.05 * width;
            x.iter().map(|v| v + rng.random_range(-h..h)).collect()
        };
        let dist = squared_distance(&x, &x2).sqrt();
        if dist == 0.0 {
            continue;
        }
        let g1 = complex.eval(&x)?.gradient;
        let g2 = complex.eval(&x2)?.gradient;
        best = best.max(squared_distance(&g1, &g2).sqrt() / dist);
    }
    Ok(best)
}

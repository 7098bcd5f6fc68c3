//! The Le Gruyer functional of a 1-field.
//!
//! For a 1-field `P` on a finite set `E`, the smallest Lipschitz constant of
//! the gradient among all `C^{1,1}` extensions is
//!
//! ```text
//! Gamma(P) = max_{a != b} sqrt(A(a,b)^2 + B(a,b)^2) + |A(a,b)|
//! A(a,b) = [2 (f(a) - f(b)) + (D_a f + D_b f) . (b - a)] / |a - b|^2
//! B(a,b) = |D_a f - D_b f| / |a - b|
//! ```
//!
//! The same value is the supremum, over pairs and over the ball with
//! diameter `[a, b]`, of `2 (P_a(x) - P_b(x)) / (|a - x|^2 + |b - x|^2)`.
//! [`gamma1_bruteforce`] evaluates that second form on a grid and is only
//! meant as a test oracle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use crate::field::{OneField, PointSet};
use crate::field::{norm, squared_distance};

/// Pairs whose value is within this of the maximum count as ties.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// The maximizing pair of the functional, oriented so that `A >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCertificate {
    pub a_idx: usize,
    pub b_idx: usize,
    pub a_stat: f64,
    pub b_stat: f64,
    pub gamma: f64,
    /// Maximizer of the ratio form for this pair.
    pub z: Vec<f64>,
}

impl PairCertificate {
    /// `2 (P_a(x) - P_b(x)) / (|a - x|^2 + |b - x|^2)` for the certified pair.
    pub fn ratio_at(&self, field: &OneField, x: &[f64]) -> f64 {
        pair_ratio(field, self.a_idx, self.b_idx, x)
    }

    /// `|a* - z|^2 + |b* - z|^2`.
    pub fn denominator(&self, field: &OneField) -> f64 {
        squared_distance(field.point(self.a_idx), &self.z) + squared_distance(field.point(self.b_idx), &self.z)
    }
}

/// `A(P; a_i, a_j)` and `B(P; a_i, a_j)`.
pub fn pair_stats(field: &OneField, i: usize, j: usize) -> Result<(f64, f64)> {
    let n = field.len();
    if i >= n || j >= n {
        return Err(Error::InvalidInput(format!("pair ({i}, {j}) out of range for {n} points")));
    }
    if i == j {
        return Err(Error::Domain(format!("pair ({i}, {j}) has zero distance")));
    }
    Ok(pair_stats_unchecked(field, i, j))
}

fn pair_stats_unchecked(field: &OneField, i: usize, j: usize) -> (f64, f64) {
    let a = field.point(i);
    let b = field.point(j);
    let da = field.gradient(i);
    let db = field.gradient(j);
    let mut dist2 = 0.0;
    let mut cross = 0.0;
    let mut diff2 = 0.0;
    for c in 0..a.len() {
        let step = b[c] - a[c];
        dist2 += step * step;
        cross += (da[c] + db[c]) * step;
        diff2 += (da[c] - db[c]) * (da[c] - db[c]);
    }
    let a_stat = (2.0 * (field.value(i) - field.value(j)) + cross) / dist2;
    let b_stat = (diff2 / dist2).sqrt();
    (a_stat, b_stat)
}

fn pair_value(a_stat: f64, b_stat: f64) -> f64 {
    a_stat.hypot(b_stat) + a_stat.abs()
}

/// Exact value of the functional with its maximizing pair.
///
/// Fewer than two points give `(0.0, None)`: a single jet is itself affine.
pub fn gamma1(field: &OneField) -> (f64, Option<PairCertificate>) {
    let n = field.len();
    if n < 2 {
        return (0.0, None);
    }
    let mut best = f64::NEG_INFINITY;
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = pair_stats_unchecked(field, i, j);
            best = best.max(pair_value(a, b));
        }
    }
    // Second sweep: the lexicographically first pair within the tie band.
    let threshold = best - TIE_TOLERANCE * best.abs().max(1.0);
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = pair_stats_unchecked(field, i, j);
            let value = pair_value(a, b);
            if value >= threshold {
                let (a_idx, b_idx) = if a >= 0.0 { (i, j) } else { (j, i) };
                let z = if value > 0.0 {
                    critical_point_unchecked(field, a_idx, b_idx, value)
                } else {
                    midpoint(field.point(i), field.point(j))
                };
                let cert = PairCertificate { a_idx, b_idx, a_stat: a.abs(), b_stat: b, gamma: value, z };
                return (value, Some(cert));
            }
        }
    }
    unreachable!("the maximum is attained by some pair")
}

/// Maximizer `z = (a+b)/2 + (D_a f - D_b f) / (2 gamma)` of the ratio form for
/// the oriented pair `(i, j)`.
pub fn critical_point(field: &OneField, i: usize, j: usize, gamma: f64) -> Result<Vec<f64>> {
    if !(gamma > 0.0) {
        return Err(Error::Precondition(format!("critical point needs gamma > 0, got {gamma}")));
    }
    let n = field.len();
    if i >= n || j >= n || i == j {
        return Err(Error::InvalidInput(format!("invalid pair ({i}, {j})")));
    }
    Ok(critical_point_unchecked(field, i, j, gamma))
}

fn critical_point_unchecked(field: &OneField, i: usize, j: usize, gamma: f64) -> Vec<f64> {
    let a = field.point(i);
    let b = field.point(j);
    let da = field.gradient(i);
    let db = field.gradient(j);
    (0..a.len()).map(|c| 0.5 * (a[c] + b[c]) + (da[c] - db[c]) / (2.0 * gamma)).collect()
}

fn midpoint(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect()
}

fn pair_ratio(field: &OneField, i: usize, j: usize, x: &[f64]) -> f64 {
    let num = 2.0 * (field.jet(i, x) - field.jet(j, x));
    let den = squared_distance(field.point(i), x) + squared_distance(field.point(j), x);
    num / den
}

/// Grid lower bound of the ratio form.
///
/// For every ordered pair, the ratio is maximized over a uniform grid with
/// `grid_per_axis` nodes per axis on the bounding box of the closed ball with
/// diameter `[a, b]`; nodes outside the ball are discarded. The result never
/// exceeds [`gamma1`] (up to rounding) and approaches it as the grid refines.
/// Cost is `n^2 grid_per_axis^d`, so keep `d <= 3` and `n` small.
pub fn gamma1_bruteforce(field: &OneField, grid_per_axis: usize) -> Result<f64> {
    let n = field.len();
    if n < 2 {
        return Err(Error::Precondition("brute force needs at least two points".into()));
    }
    if grid_per_axis < 2 {
        return Err(Error::Precondition("grid_per_axis must be at least 2".into()));
    }
    let d = field.dim();
    let mut best = f64::NEG_INFINITY;
    let mut node = vec![0.0; d];
    let mut counter = vec![0usize; d];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let center = midpoint(field.point(i), field.point(j));
            let radius = 0.5 * squared_distance(field.point(i), field.point(j)).sqrt();
            let radius2 = radius * radius * (1.0 + 1e-12);
            let step = 2.0 * radius / (grid_per_axis - 1) as f64;
            counter.iter_mut().for_each(|c| *c = 0);
            loop {
                let mut r2 = 0.0;
                for c in 0..d {
                    node[c] = center[c] - radius + step * counter[c] as f64;
                    r2 += (node[c] - center[c]) * (node[c] - center[c]);
                }
                if r2 <= radius2 {
                    best = best.max(pair_ratio(field, i, j, &node));
                }
                // odometer increment
                let mut axis = 0;
                while axis < d {
                    counter[axis] += 1;
                    if counter[axis] < grid_per_axis {
                        break;
                    }
                    counter[axis] = 0;
                    axis += 1;
                }
                if axis == d {
                    break;
                }
            }
        }
    }
    Ok(best)
}

/// Subgradient of the functional with respect to the flattened field.
///
/// Built from one maximizing pair: `2/den` at the value slot of `a*`, `-2/den`
/// at `b*`, `2 (z - a*)/den` at the gradient slots of `a*` and
/// `-2 (z - b*)/den` at those of `b*`.
pub fn gamma1_subgradient(field: &OneField, cert: &PairCertificate) -> Vec<f64> {
    let d = field.dim();
    let mut g = vec![0.0; field.flat_len()];
    let den = cert.denominator(field);
    let a = field.point(cert.a_idx);
    let b = field.point(cert.b_idx);
    let sa = OneField::value_slot(d, cert.a_idx);
    let sb = OneField::value_slot(d, cert.b_idx);
    g[sa] = 2.0 / den;
    g[sb] = -2.0 / den;
    for c in 0..d {
        g[sa + 1 + c] = 2.0 * (cert.z[c] - a[c]) / den;
        g[sb + 1 + c] = -2.0 * (cert.z[c] - b[c]) / den;
    }
    g
}

/// Largest Euclidean norm among the jets `(f(a), D_a f)`.
pub fn max_jet_norm(field: &OneField) -> f64 {
    (0..field.len())
        .map(|i| (field.value(i).powi(2) + norm(field.gradient(i)).powi(2)).sqrt())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_field(xs: &[f64], f: &[f64], df: &[f64]) -> OneField {
        let ps = PointSet::new(xs.iter().map(|&x| vec![x]).collect()).unwrap();
        OneField::new(ps, f.to_vec(), df.iter().map(|&g| vec![g]).collect()).unwrap()
    }

    #[test]
    fn pair_stats_zero_field() {
        let p = line_field(&[0.0, 1.0], &[0.0, 0.0], &[0.0, 0.0]);
        assert_eq!(pair_stats(&p, 0, 1).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn pair_stats_step() {
        let p = line_field(&[0.0, 1.0], &[0.0, 1.0], &[0.0, 0.0]);
        assert_eq!(pair_stats(&p, 0, 1).unwrap(), (-2.0, 0.0));
        assert_eq!(pair_stats(&p, 1, 0).unwrap(), (2.0, 0.0));
    }

    #[test]
    fn pair_stats_of_affine_restriction_vanish() {
        // x -> x sampled at 0 and 1
        let p = line_field(&[0.0, 1.0], &[0.0, 1.0], &[1.0, 1.0]);
        assert_eq!(pair_stats(&p, 0, 1).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn pair_stats_equal_slopes_with_equal_values() {
        // f = (0, 0) with slopes (1, 1) is not the restriction of one affine map.
        let p = line_field(&[0.0, 1.0], &[0.0, 0.0], &[1.0, 1.0]);
        assert_eq!(pair_stats(&p, 0, 1).unwrap(), (2.0, 0.0));
    }

    #[test]
    fn pair_stats_rejects_same_index() {
        let p = line_field(&[0.0, 1.0], &[0.0, 0.0], &[0.0, 0.0]);
        assert!(matches!(pair_stats(&p, 1, 1), Err(Error::Domain(_))));
        assert!(pair_stats(&p, 0, 2).is_err());
    }

    #[test]
    fn gamma1_anchor() {
        let p = line_field(&[0.0, 1.0], &[0.0, 1.0], &[0.0, 0.0]);
        let (value, cert) = gamma1(&p);
        let cert = cert.unwrap();
        assert!((value - 4.0).abs() < 1e-12);
        assert_eq!((cert.a_idx, cert.b_idx), (1, 0));
        assert!((cert.z[0] - 0.5).abs() < 1e-12);
        assert!((cert.ratio_at(&p, &cert.z) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn gamma1_single_point_is_zero() {
        let p = line_field(&[0.3], &[2.0], &[5.0]);
        assert_eq!(gamma1(&p), (0.0, None));
    }

    #[test]
    fn gamma1_tie_break_is_lexicographic() {
        // Three equally spaced points with the same step: pairs (0,1) and (1,2) tie.
        let p = line_field(&[0.0, 1.0, 2.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 0.0]);
        let (_, cert) = gamma1(&p);
        let cert = cert.unwrap();
        assert_eq!((cert.a_idx, cert.b_idx), (1, 0));
    }

    #[test]
    fn critical_point_examples() {
        let ps = PointSet::new(vec![vec![0.0, 0.0], vec![2.0, 0.0]]).unwrap();
        let p = OneField::new(ps, vec![0.0, 0.0], vec![vec![0.0, 2.0], vec![0.0, -2.0]]).unwrap();
        let z = critical_point(&p, 0, 1, 2.0).unwrap();
        assert!((z[0] - 1.0).abs() < 1e-15 && (z[1] - 1.0).abs() < 1e-15);
        // on the boundary of the ball centered (1,0) with radius 1
        let r = ((z[0] - 1.0).powi(2) + z[1].powi(2)).sqrt();
        assert!((r - 1.0).abs() < 1e-15);

        let q = line_field(&[0.0, 4.0], &[1.0, 3.0], &[0.7, 0.7]);
        assert_eq!(critical_point(&q, 0, 1, 1.5).unwrap(), vec![2.0]);
        assert!(matches!(critical_point(&q, 0, 1, 0.0), Err(Error::Precondition(_))));
    }

    #[test]
    fn bruteforce_zero_field() {
        let ps = PointSet::new(vec![vec![0.0, 0.0], vec![1.0, 0.5], vec![-0.3, 0.2]]).unwrap();
        let p = OneField::with_zero_gradients(ps, vec![0.0; 3]).unwrap();
        assert_eq!(gamma1_bruteforce(&p, 7).unwrap(), 0.0);
    }

    #[test]
    fn bruteforce_refines_toward_anchor() {
        let p = line_field(&[0.0, 1.0], &[0.0, 1.0], &[0.0, 0.0]);
        let mut last = f64::NEG_INFINITY;
        for grid in [2, 3, 5, 9, 17, 33, 65] {
            let v = gamma1_bruteforce(&p, grid).unwrap();
            assert!(v <= 4.0 + 1e-12);
            assert!(v >= last - 1e-12, "nested grids refine monotonically");
            last = v;
        }
        // the maximizer 0.5 is a grid node for odd grids
        assert!((last - 4.0).abs() < 1e-12);
    }

    #[test]
    fn subgradient_matches_value_slope() {
        let p = line_field(&[0.0, 1.0, 2.5], &[0.0, 1.0, -0.5], &[0.2, -0.1, 0.4]);
        let (value, cert) = gamma1(&p);
        let cert = cert.unwrap();
        let g = gamma1_subgradient(&p, &cert);
        // the active pair is smooth here; compare with central differences
        let flat = p.to_flat();
        let h = 1e-6;
        for s in 0..flat.len() {
            let mut up = flat.clone();
            let mut dn = flat.clone();
            up[s] += h;
            dn[s] -= h;
            let fu = gamma1(&OneField::from_flat(p.base().clone(), &up).unwrap()).0;
            let fd = gamma1(&OneField::from_flat(p.base().clone(), &dn).unwrap()).0;
            assert!(((fu - fd) / (2.0 * h) - g[s]).abs() < 1e-5, "slot {s}");
        }
        assert!(value > 0.0);
    }
}

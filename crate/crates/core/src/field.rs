//! Point sets and 1-fields (a value and a gradient attached to every point).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite set of distinct points in R^d.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    dim: usize,
    points: Vec<Vec<f64>>,
    separation: f64,
}

impl PointSet {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = points.first() else {
            return Err(Error::InvalidInput("point set must contain at least one point".into()));
        };
        let dim = first.len();
        if dim == 0 {
            return Err(Error::InvalidInput("points must have at least one coordinate".into()));
        }
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::InvalidInput(format!(
                    "point {i} has {} coordinates, expected {dim}",
                    p.len()
                )));
            }
            if p.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidInput(format!("point {i} has a non-finite coordinate")));
            }
        }
        let mut separation = f64::INFINITY;
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                let dist = distance(&points[i], &points[j]);
                if dist == 0.0 {
                    return Err(Error::InvalidInput(format!("points {i} and {j} coincide")));
                }
                separation = separation.min(dist);
            }
        }
        Ok(Self { dim, points, separation })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    /// Minimum pairwise Euclidean distance; `+inf` for a single point.
    pub fn separation(&self) -> f64 {
        self.separation
    }

    /// Axis-aligned bounding box as `(lower, upper)`.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = self.points[0].clone();
        let mut hi = self.points[0].clone();
        for p in &self.points[1..] {
            for c in 0..self.dim {
                lo[c] = lo[c].min(p[c]);
                hi[c] = hi[c].max(p[c]);
            }
        }
        (lo, hi)
    }
}

/// A 1-field: the jet `P_a(x) = f(a) + D_a f . (x - a)` at every point `a`.
///
/// The flattened layout used by the solvers is normative: per point, the
/// value first and then the `d` gradient coordinates, points in base order.
#[derive(Debug, Clone, PartialEq)]
pub struct OneField {
    base: PointSet,
    values: Vec<f64>,
    gradients: Vec<Vec<f64>>,
}

impl OneField {
    pub fn new(base: PointSet, values: Vec<f64>, gradients: Vec<Vec<f64>>) -> Result<Self> {
        let n = base.len();
        if values.len() != n || gradients.len() != n {
            return Err(Error::InvalidInput(format!(
                "field has {} values and {} gradients for {n} points",
                values.len(),
                gradients.len()
            )));
        }
        if let Some(i) = gradients.iter().position(|g| g.len() != base.dim()) {
            return Err(Error::InvalidInput(format!("gradient {i} has the wrong dimension")));
        }
        Ok(Self { base, values, gradients })
    }

    /// Field with all gradients zero.
    pub fn with_zero_gradients(base: PointSet, values: Vec<f64>) -> Result<Self> {
        let gradients = vec![vec![0.0; base.dim()]; base.len()];
        Self::new(base, values, gradients)
    }

    /// Rebuilds a field from the flattened `(d+1) n` layout.
    pub fn from_flat(base: PointSet, flat: &[f64]) -> Result<Self> {
        let d = base.dim();
        let n = base.len();
        if flat.len() != (d + 1) * n {
            return Err(Error::InvalidInput(format!(
                "flat vector has length {}, expected {}",
                flat.len(),
                (d + 1) * n
            )));
        }
        let mut values = Vec::with_capacity(n);
        let mut gradients = Vec::with_capacity(n);
        for block in flat.chunks_exact(d + 1) {
            values.push(block[0]);
            gradients.push(block[1..].to_vec());
        }
        Self::new(base, values, gradients)
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.flat_len());
        for (v, g) in self.values.iter().zip(&self.gradients) {
            flat.push(*v);
            flat.extend_from_slice(g);
        }
        flat
    }

    /// Number of scalars in the flattened layout, `k = (d+1) n`.
    pub fn flat_len(&self) -> usize {
        (self.dim() + 1) * self.len()
    }

    /// Index of the value slot of point `i` in the flattened layout.
    pub fn value_slot(dim: usize, i: usize) -> usize {
        i * (dim + 1)
    }

    pub fn base(&self) -> &PointSet {
        &self.base
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn len(&self) -> usize {
        self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        self.base.point(i)
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn gradient(&self, i: usize) -> &[f64] {
        &self.gradients[i]
    }

    pub fn gradients(&self) -> &[Vec<f64>] {
        &self.gradients
    }

    /// Evaluates the jet of point `i` at `x`.
    pub fn jet(&self, i: usize, x: &[f64]) -> f64 {
        let a = self.point(i);
        self.values[i]
            + self.gradients[i].iter().zip(x.iter().zip(a)).map(|(g, (xc, ac))| g * (xc - ac)).sum::<f64>()
    }
}

#[derive(Serialize, Deserialize)]
struct OneFieldJson {
    dim: usize,
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
    gradients: Vec<Vec<f64>>,
}

impl Serialize for OneField {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        OneFieldJson {
            dim: self.dim(),
            points: self.base.points.clone(),
            values: self.values.clone(),
            gradients: self.gradients.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for OneField {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = OneFieldJson::deserialize(deserializer)?;
        let base = PointSet::new(raw.points).map_err(serde::de::Error::custom)?;
        if base.dim() != raw.dim {
            return Err(serde::de::Error::custom(format!(
                "declared dim {} does not match point dimension {}",
                raw.dim,
                base.dim()
            )));
        }
        OneField::new(base, raw.values, raw.gradients).map_err(serde::de::Error::custom)
    }
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    squared_distance(a, b).sqrt()
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

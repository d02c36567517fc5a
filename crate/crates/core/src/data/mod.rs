//! Weighted point sets and their summary statistics.

mod io;
mod synth;

pub use io::{
    format_f64, load_csv, parse_csv, read_coreset, read_coreset_file, save_coreset, write_coreset,
    write_dataset, Column, ColumnSchema, Loaded, WeightSource,
};
pub use synth::synth_ar1;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// A location, its scalar value, and a positive multiplicity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedPoint {
    pub x: Vec<f64>,
    pub y: f64,
    pub w: f64,
}

impl WeightedPoint {
    pub fn new(x: Vec<f64>, y: f64) -> Self {
        Self { x, y, w: 1.0 }
    }

    pub fn weighted(x: Vec<f64>, y: f64, w: f64) -> Self {
        Self { x, y, w }
    }

    fn is_valid(&self) -> bool {
        self.x.iter().all(|v| v.is_finite())
            && self.y.is_finite()
            && self.w.is_finite()
            && self.w > 0.0
    }
}

/// Borrowed view of one point in a [`Dataset`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointRef<'a> {
    pub x: &'a [f64],
    pub y: f64,
    pub w: f64,
}

impl PointRef<'_> {
    pub fn to_owned(&self) -> WeightedPoint {
        WeightedPoint::weighted(self.x.to_vec(), self.y, self.w)
    }
}

/// Axis-aligned bounding box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extent {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Extent {
    pub fn new(min: Vec<f64>, max: Vec<f64>) -> Result<Self> {
        if min.len() != max.len() {
            return Err(Error::DimensionMismatch {
                expected: min.len(),
                got: max.len(),
            });
        }
        if min.is_empty() {
            return Err(Error::param("extent", "zero-dimensional box"));
        }
        if min
            .iter()
            .zip(&max)
            .any(|(a, b)| !(a.is_finite() && b.is_finite() && a <= b))
        {
            return Err(Error::param(
                "extent",
                "bounds must be finite with min <= max",
            ));
        }
        Ok(Self { min, max })
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn widths(&self) -> impl Iterator<Item = f64> + '_ {
        self.min.iter().zip(&self.max).map(|(a, b)| b - a)
    }

    pub fn diagonal(&self) -> f64 {
        self.widths().map(|w| w * w).sum::<f64>().sqrt()
    }

    /// Grows every side by `margin` on both ends.
    pub fn expanded(&self, margin: f64) -> Extent {
        Extent {
            min: self.min.iter().map(|v| v - margin).collect(),
            max: self.max.iter().map(|v| v + margin).collect(),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.min.iter().zip(&self.max))
                .all(|(v, (lo, hi))| lo <= v && v <= hi)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    /// Range of the scalar values, `max y - min y`.
    pub m_range: f64,
    pub extent: Extent,
    /// Bounding-box diagonal. An upper bound on the largest pairwise distance,
    /// exact in one dimension.
    pub diameter: f64,
    /// `diameter / sigma`.
    pub delta: f64,
}

/// Immutable, nonempty set of weighted points sharing one dimension.
///
/// Stored column-wise: coordinates are a flat row-major `n x d` buffer.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    dim: usize,
    coords: Vec<f64>,
    ys: Vec<f64>,
    ws: Vec<f64>,
    total_weight: f64,
    y_min: f64,
    y_max: f64,
    extent: Extent,
}

impl Dataset {
    pub fn new(points: Vec<WeightedPoint>) -> Result<Self> {
        let first = points.first().ok_or(Error::EmptyDataset)?;
        let dim = first.x.len();
        let mut coords = Vec::with_capacity(points.len() * dim);
        let mut ys = Vec::with_capacity(points.len());
        let mut ws = Vec::with_capacity(points.len());
        for (i, p) in points.into_iter().enumerate() {
            if p.x.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: p.x.len(),
                });
            }
            if !p.is_valid() {
                return Err(Error::InvalidPoint { index: i });
            }
            coords.extend_from_slice(&p.x);
            ys.push(p.y);
            ws.push(p.w);
        }
        Self::from_columns(dim, coords, ys, ws)
    }

    /// Unit-weight dataset from a flat coordinate buffer and values.
    pub fn unweighted(dim: usize, coords: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        let ws = vec![1.0; ys.len()];
        Self::from_columns(dim, coords, ys, ws)
    }

    pub fn from_columns(dim: usize, coords: Vec<f64>, ys: Vec<f64>, ws: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("dimension", "must be at least 1"));
        }
        if ys.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if coords.len() != ys.len() * dim || ws.len() != ys.len() {
            return Err(Error::DimensionMismatch {
                expected: ys.len() * dim,
                got: coords.len(),
            });
        }
        let mut min = vec![f64::INFINITY; dim];
        let mut max = vec![f64::NEG_INFINITY; dim];
        let mut y_min = f64::INFINITY;
        let mut y_max = f64::NEG_INFINITY;
        let mut total_weight = 0.0;
        for (i, ((x, &y), &w)) in coords.chunks_exact(dim).zip(&ys).zip(&ws).enumerate() {
            if !(y.is_finite() && w.is_finite() && w > 0.0) || x.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidPoint { index: i });
            }
            for (j, &v) in x.iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
            y_min = y_min.min(y);
            y_max = y_max.max(y);
            total_weight += w;
        }
        Ok(Self {
            dim,
            coords,
            ys,
            ws,
            total_weight,
            y_min,
            y_max,
            extent: Extent { min, max },
        })
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    /// Always false: construction rejects empty sets.
    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn x(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn y(&self, i: usize) -> f64 {
        self.ys[i]
    }

    #[inline]
    pub fn w(&self, i: usize) -> f64 {
        self.ws[i]
    }

    pub fn point(&self, i: usize) -> PointRef<'_> {
        PointRef {
            x: self.x(i),
            y: self.ys[i],
            w: self.ws[i],
        }
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = PointRef<'_>> + '_ {
        self.coords
            .chunks_exact(self.dim)
            .zip(self.ys.iter().zip(&self.ws))
            .map(|(x, (&y, &w))| PointRef { x, y, w })
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn ws(&self) -> &[f64] {
        &self.ws
    }

    pub fn to_points(&self) -> Vec<WeightedPoint> {
        self.iter().map(|p| p.to_owned()).collect()
    }

    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    pub fn y_min(&self) -> f64 {
        self.y_min
    }

    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    /// `M`, the range of scalar values.
    pub fn m_range(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn extent(&self) -> &Extent {
        &self.extent
    }

    pub fn stats(&self, sigma: f64) -> DatasetStats {
        let diameter = self.extent.diagonal();
        DatasetStats {
            m_range: self.m_range(),
            extent: self.extent.clone(),
            diameter,
            delta: diameter / sigma,
        }
    }

    /// New dataset holding the given points, in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Dataset> {
        let mut coords = Vec::with_capacity(indices.len() * self.dim);
        let mut ys = Vec::with_capacity(indices.len());
        let mut ws = Vec::with_capacity(indices.len());
        for &i in indices {
            coords.extend_from_slice(self.x(i));
            ys.push(self.ys[i]);
            ws.push(self.ws[i]);
        }
        Dataset::from_columns(self.dim, coords, ys, ws)
    }

    /// Same points with every value mapped to `a * y + b`.
    pub fn map_values(&self, a: f64, b: f64) -> Result<Dataset> {
        let ys = self.ys.iter().map(|y| a * y + b).collect();
        Dataset::from_columns(self.dim, self.coords.clone(), ys, self.ws.clone())
    }

    /// Hex SHA-256 over dimension, coordinates, values and weights.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.dim as u64).to_le_bytes());
        for v in self.coords.iter().chain(&self.ys).chain(&self.ws) {
            h.update(v.to_le_bytes());
        }
        hex::encode(&h.finalize()[..16])
    }
}

//! Grid cells and Z-order keys.
//!
//! Cells are half-open per coordinate: index `i` covers
//! `(origin + i * gamma, origin + (i + 1) * gamma]`, so a point on a cell's
//! lower boundary belongs to the cell below.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    gamma: f64,
    origin: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellIndex(pub Vec<i64>);

impl CellIndex {
    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl From<Vec<i64>> for CellIndex {
    fn from(v: Vec<i64>) -> Self {
        CellIndex(v)
    }
}

impl GridSpec {
    /// Grid of side `gamma` anchored at the origin.
    pub fn new(gamma: f64, dim: usize) -> Result<Self> {
        Self::with_origin(gamma, vec![0.0; dim])
    }

    pub fn with_origin(gamma: f64, origin: Vec<f64>) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::param(
                "gamma",
                format!("cell side must be positive and finite, got {gamma}"),
            ));
        }
        if origin.is_empty() || origin.iter().any(|v| !v.is_finite()) {
            return Err(Error::param(
                "origin",
                "must be a finite vector of dimension >= 1",
            ));
        }
        Ok(Self { gamma, origin })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn dim(&self) -> usize {
        self.origin.len()
    }

    #[inline]
    pub(crate) fn coord_index(&self, v: f64, j: usize) -> i64 {
        ((v - self.origin[j]) / self.gamma).ceil() as i64 - 1
    }

    /// Writes the cell index of `x` into `out` without allocating.
    #[inline]
    pub(crate) fn cell_into(&self, x: &[f64], out: &mut [i64]) {
        for (j, (&v, o)) in x.iter().zip(out.iter_mut()).enumerate() {
            *o = self.coord_index(v, j);
        }
    }

    pub fn cell_of(&self, x: &[f64]) -> Result<CellIndex> {
        self.check_dim(x.len())?;
        let mut idx = vec![0; x.len()];
        self.cell_into(x, &mut idx);
        Ok(CellIndex(idx))
    }

    pub fn cell_center(&self, c: &CellIndex) -> Result<Vec<f64>> {
        self.check_dim(c.dim())?;
        Ok(c.0
            .iter()
            .zip(&self.origin)
            .map(|(&i, &o)| o + (i as f64 + 0.5) * self.gamma)
            .collect())
    }

    /// Every cell outside `occupied` that touches an occupied cell, including
    /// diagonal neighbours (the `3^d - 1` Moore neighbourhood).
    pub fn empty_adjacent_cells(
        &self,
        occupied: &BTreeSet<CellIndex>,
    ) -> Result<BTreeSet<CellIndex>> {
        if occupied.is_empty() {
            return Err(Error::param("occupied", "must contain at least one cell"));
        }
        let d = self.dim();
        let offsets = neighbor_offsets(d);
        let mut out = BTreeSet::new();
        let mut probe = vec![0i64; d];
        for cell in occupied {
            self.check_dim(cell.dim())?;
            for off in offsets.chunks_exact(d) {
                if off.iter().all(|&o| o == 0) {
                    continue;
                }
                for ((p, &c), &o) in probe.iter_mut().zip(&cell.0).zip(off) {
                    *p = c + o;
                }
                let cand = CellIndex(probe.clone());
                if !occupied.contains(&cand) {
                    out.insert(cand);
                }
            }
        }
        Ok(out)
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got,
            });
        }
        Ok(())
    }
}

/// All offsets in `{-1, 0, 1}^d`, flattened, in lexicographic order.
pub(crate) fn neighbor_offsets(d: usize) -> Vec<i64> {
    let count = 3usize.pow(d as u32);
    let mut out = Vec::with_capacity(count * d);
    for k in 0..count {
        let mut rem = k;
        let mut off = vec![0i64; d];
        for j in (0..d).rev() {
            off[j] = (rem % 3) as i64 - 1;
            rem /= 3;
        }
        out.extend_from_slice(&off);
    }
    out
}

/// Interleaves the low `bits_per_dim` bits of each coordinate. Bit `b` of
/// coordinate `j` lands at position `b * d + j`.
pub fn morton_key(q: &[u64], bits_per_dim: u32) -> Result<u64> {
    let d = q.len();
    if d == 0 || d as u64 * bits_per_dim as u64 > 64 {
        return Err(Error::MortonOverflow {
            dims: d,
            bits: bits_per_dim,
        });
    }
    let mut key = 0u64;
    for (j, &c) in q.iter().enumerate() {
        if bits_per_dim < 64 && c >> bits_per_dim != 0 {
            return Err(Error::MortonCoordinate {
                value: c,
                bits: bits_per_dim,
            });
        }
        for b in 0..bits_per_dim {
            key |= ((c >> b) & 1) << (b as usize * d + j);
        }
    }
    Ok(key)
}

/// Quantization depth used by [`sort_by_zorder`].
pub fn default_bits(d: usize) -> u32 {
    match d {
        0..=3 => 21,
        4..=6 => 10,
        _ => (64 / d) as u32,
    }
}

/// Permutation of point indices in Z-order.
///
/// Coordinates are quantized to `default_bits(d)` bits per axis over the
/// dataset's own extent; a degenerate axis quantizes to 0. Points whose keys
/// collide are ordered by coordinates, then by original index, so that in one
/// dimension the result is exactly a stable sort by `x`.
pub fn sort_by_zorder(ds: &Dataset) -> Vec<usize> {
    let d = ds.dim();
    let bits = default_bits(d);
    let levels = (1u64 << bits) as f64;
    let ext = ds.extent();
    let scale: Vec<f64> = ext
        .widths()
        .map(|w| if w > 0.0 { levels / w } else { 0.0 })
        .collect();
    let mut q = vec![0u64; d];
    let keys: Vec<u64> = ds
        .iter()
        .map(|p| {
            for j in 0..d {
                let t = ((p.x[j] - ext.min[j]) * scale[j]).floor();
                q[j] = (t.max(0.0) as u64).min((1u64 << bits) - 1);
            }
            morton_key(&q, bits).expect("bit budget checked by default_bits")
        })
        .collect();
    let mut order: Vec<usize> = (0..ds.len()).collect();
    order.sort_by(|&a, &b| {
        keys[a].cmp(&keys[b]).then_with(|| {
            ds.x(a)
                .iter()
                .zip(ds.x(b))
                .map(|(u, v)| u.total_cmp(v))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    order
}

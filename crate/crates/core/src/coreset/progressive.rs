use serde::{Deserialize, Serialize};

use super::grid::CellGroups;
use super::{Columns, Coreset, Method, Params};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::spatial::GridSpec;

/// Geometrically coarsening grids over a time window ending at `x = 0`.
///
/// Region `i` (1-based, newest first) has cell side `a^(i-1) * gamma1` and
/// width `a^(i-1) * width1`, so every region holds `width1 / gamma1` cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProgressiveSpec {
    pub gamma1: f64,
    pub width1: f64,
    pub a: f64,
    /// `None` derives the count from the data's extent.
    pub region_count: Option<usize>,
}

/// One region of a progressive layout: `x` in `(left, right]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Region {
    pub left: f64,
    pub right: f64,
    pub gamma: f64,
    pub cells: usize,
}

pub const DEFAULT_GROWTH: f64 = 1.5;

impl ProgressiveSpec {
    pub fn new(gamma1: f64, width1: f64, a: f64, region_count: Option<usize>) -> Result<Self> {
        let spec = Self {
            gamma1,
            width1,
            a,
            region_count,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [("gamma1", self.gamma1), ("width1", self.width1)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(
                    name,
                    format!("must be positive and finite, got {v}"),
                ));
            }
        }
        if !(self.a.is_finite() && self.a > 1.0) {
            return Err(Error::param(
                "a",
                format!("growth factor must exceed 1, got {}", self.a),
            ));
        }
        let ratio = self.width1 / self.gamma1;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) || ratio.round() < 1.0 {
            return Err(Error::param(
                "width1",
                format!("width1 / gamma1 must be a positive integer, got {ratio}"),
            ));
        }
        if self.region_count == Some(0) {
            return Err(Error::param("regions", "must be at least 1"));
        }
        Ok(())
    }

    /// Cells per region, `width1 / gamma1`.
    pub fn cells_per_region(&self) -> usize {
        (self.width1 / self.gamma1).round() as usize
    }

    /// Fewest regions whose total width covers a window of length `span`.
    pub fn regions_to_cover(&self, span: f64) -> usize {
        let mut k = 1;
        let mut width = self.width1;
        let mut total = width;
        while total < span {
            k += 1;
            width *= self.a;
            total += width;
        }
        k
    }

    /// The first `count` regions, newest first.
    pub fn layout(&self, count: usize) -> Vec<Region> {
        let cells = self.cells_per_region();
        let mut right = 0.0;
        let mut gamma = self.gamma1;
        (0..count)
            .map(|_| {
                let left = right - gamma * cells as f64;
                let r = Region {
                    left,
                    right,
                    gamma,
                    cells,
                };
                right = left;
                gamma *= self.a;
                r
            })
            .collect()
    }

    /// Layout used for `p`: the explicit region count, or enough regions to
    /// reach the oldest point.
    pub fn layout_for(&self, p: &Dataset) -> Result<Vec<Region>> {
        self.validate()?;
        if p.dim() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: p.dim(),
            });
        }
        if p.extent().max[0] > 0.0 {
            return Err(Error::param(
                "x",
                format!(
                    "progressive input must satisfy x <= 0, got {}",
                    p.extent().max[0]
                ),
            ));
        }
        let count = match self.region_count {
            Some(k) => k,
            None => self.regions_to_cover(-p.extent().min[0]),
        };
        Ok(self.layout(count))
    }
}

/// Grid aggregation with resolution coarsening into the past.
///
/// Each point goes to the region with `left < x <= right`; the oldest region
/// also takes its left edge. Points older than the window are dropped.
/// Output lists region 1 first, ascending cells within each region.
pub fn progressive_g_aggregate(p: &Dataset, spec: &ProgressiveSpec) -> Result<Coreset> {
    let regions = spec.layout_for(p)?;
    let cells = spec.cells_per_region() as i64;
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); regions.len()];
    let edge = regions.last().map_or(0.0, |r| r.left);
    for i in 0..p.len() {
        let x = p.x(i)[0];
        if x < edge {
            continue;
        }
        let r = regions
            .partition_point(|r| r.left >= x)
            .min(regions.len() - 1);
        members[r].push(i);
    }
    let mut out = Columns::with_capacity(1, regions.len() * cells as usize);
    for (r, m) in regions.iter().zip(&members) {
        if m.is_empty() {
            continue;
        }
        let grid = GridSpec::with_origin(r.gamma, vec![r.right])?;
        CellGroups::new(p, m, &grid, Some((-cells, -1))).aggregate_into(p, &mut out);
    }
    let data = out.finish().map_err(|e| match e {
        Error::EmptyDataset => {
            Error::param("regions", "no points fall inside the progressive window")
        }
        e => e,
    })?;
    Ok(Coreset::build(
        data,
        Method::ProgressiveGAggregate,
        Params::Progressive(spec.clone()),
        None,
        p,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coreset::g_aggregate_on;
    use crate::test_support::line;

    fn stream(t: usize) -> Dataset {
        let pts: Vec<(f64, f64)> = (0..=t).map(|i| (-(i as f64), (i % 7) as f64)).collect();
        line(&pts)
    }

    #[test]
    fn layout_widths_and_resolutions() {
        let spec = ProgressiveSpec::new(1.0, 4.0, 2.0, Some(3)).unwrap();
        let l = spec.layout(3);
        let widths: Vec<f64> = l.iter().map(|r| r.right - r.left).collect();
        let gammas: Vec<f64> = l.iter().map(|r| r.gamma).collect();
        assert_eq!(widths, vec![4.0, 8.0, 16.0]);
        assert_eq!(gammas, vec![1.0, 2.0, 4.0]);
        assert!(l.iter().all(|r| r.cells == 4));
        assert_eq!((l[2].left, l[2].right), (-28.0, -12.0));
    }

    #[test]
    fn every_region_fills_its_cells() {
        let spec = ProgressiveSpec::new(1.0, 4.0, 2.0, Some(3)).unwrap();
        let cs = progressive_g_aggregate(&stream(40), &spec).unwrap();
        assert_eq!(cs.len(), 12);
        assert_eq!(cs.data().total_weight(), 29.0);
        // Region 2 covers (-12, -4] in cells of 2.
        assert_eq!(cs.data().ws()[4..8], [2.0, 2.0, 2.0, 2.0]);
    }

    #[test]
    fn single_region_is_plain_aggregate() {
        let spec = ProgressiveSpec::new(0.5, 3.0, 1.5, Some(1)).unwrap();
        let p = line(&[
            (-2.9, 1.0),
            (-2.2, 2.0),
            (-1.0, 3.0),
            (-0.2, 4.0),
            (0.0, 5.0),
        ]);
        let prog = progressive_g_aggregate(&p, &spec).unwrap();
        let plain = g_aggregate_on(&p, &GridSpec::new(0.5, 1).unwrap()).unwrap();
        assert_eq!(prog.data(), plain.data());
    }

    #[test]
    fn derived_count_covers_span() {
        let spec = ProgressiveSpec::new(1.0, 10.0, 1.5, None).unwrap();
        for t in [3usize, 10, 11, 1000, 12345] {
            let p = stream(t);
            let k = spec.layout_for(&p).unwrap().len();
            let want = ((t as f64 / 10.0 * 0.5 + 1.0).ln() / 1.5f64.ln())
                .ceil()
                .max(1.0) as usize;
            assert_eq!(k, want, "t={t}");
            let cs = progressive_g_aggregate(&p, &spec).unwrap();
            assert_eq!(cs.data().total_weight(), (t + 1) as f64);
            assert!(cs.len() <= 10 * k);
        }
    }

    #[test]
    fn rejects_bad_specs_and_future_points() {
        assert!(ProgressiveSpec::new(0.3, 1.0, 1.5, None).is_err());
        assert!(ProgressiveSpec::new(1.0, 4.0, 1.0, None).is_err());
        assert!(ProgressiveSpec::new(1.0, 4.0, 2.0, Some(0)).is_err());
        let spec = ProgressiveSpec::new(1.0, 4.0, 2.0, None).unwrap();
        assert!(progressive_g_aggregate(&line(&[(1.0, 0.0)]), &spec).is_err());
        let far = ProgressiveSpec::new(1.0, 4.0, 2.0, Some(1)).unwrap();
        assert!(progressive_g_aggregate(&line(&[(-100.0, 0.0)]), &far).is_err());
    }
}

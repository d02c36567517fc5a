use std::cmp::Ordering;
use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{weighted_mean, Columns, Coreset, Method, Params};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::regress::{EvalContext, Regressor};
use crate::spatial::{CellIndex, GridSpec};

/// Members of `p` grouped by grid cell, in ascending lexicographic cell order.
pub(crate) struct CellGroups {
    dim: usize,
    /// One key per group, flattened.
    keys: Vec<i64>,
    /// Point indices, grouped; each group keeps ascending index order.
    order: Vec<usize>,
    bounds: Vec<usize>,
}

impl CellGroups {
    pub(crate) fn new(
        p: &Dataset,
        members: &[usize],
        grid: &GridSpec,
        clamp: Option<(i64, i64)>,
    ) -> Self {
        let d = p.dim();
        let mut flat = vec![0i64; members.len() * d];
        for (k, &i) in members.iter().enumerate() {
            let cell = &mut flat[k * d..(k + 1) * d];
            grid.cell_into(p.x(i), cell);
            if let Some((lo, hi)) = clamp {
                for c in cell.iter_mut() {
                    *c = (*c).clamp(lo, hi);
                }
            }
        }
        let key = |k: usize| &flat[k * d..(k + 1) * d];
        let mut perm: Vec<usize> = (0..members.len()).collect();
        if d == 1 {
            perm.sort_by_key(|&k| flat[k]);
        } else {
            perm.sort_by(|&a, &b| key(a).cmp(key(b)));
        }
        let mut keys = Vec::new();
        let mut bounds = vec![0];
        let mut order = Vec::with_capacity(members.len());
        for (pos, &k) in perm.iter().enumerate() {
            if pos > 0 && key(perm[pos - 1]).cmp(key(k)) != Ordering::Equal {
                bounds.push(pos);
            }
            if pos == 0 || bounds.last() == Some(&pos) {
                keys.extend_from_slice(key(k));
            }
            order.push(members[k]);
        }
        if !members.is_empty() {
            bounds.push(members.len());
        } else {
            bounds.clear();
        }
        Self {
            dim: d,
            keys,
            order,
            bounds,
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.bounds.len().saturating_sub(1)
    }

    pub(crate) fn key(&self, g: usize) -> &[i64] {
        &self.keys[g * self.dim..(g + 1) * self.dim]
    }

    pub(crate) fn members(&self, g: usize) -> &[usize] {
        &self.order[self.bounds[g]..self.bounds[g + 1]]
    }

    pub(crate) fn aggregate_into(&self, p: &Dataset, out: &mut Columns) {
        let mut x = vec![0.0; self.dim];
        for g in 0..self.len() {
            let (y, w) = weighted_mean(p, self.members(g).iter().copied(), &mut x);
            out.push(&x, y, w);
        }
    }
}

fn all_indices(p: &Dataset) -> Vec<usize> {
    (0..p.len()).collect()
}

fn occupied_count(p: &Dataset, gamma: f64) -> Result<usize> {
    let grid = GridSpec::new(gamma, p.dim())?;
    let d = p.dim();
    let mut flat = vec![0i64; p.len() * d];
    for i in 0..p.len() {
        grid.cell_into(p.x(i), &mut flat[i * d..(i + 1) * d]);
    }
    if d == 1 {
        flat.sort_unstable();
        flat.dedup();
        return Ok(flat.len());
    }
    let mut cells: Vec<&[i64]> = flat.chunks_exact(d).collect();
    cells.sort_unstable();
    cells.dedup();
    Ok(cells.len())
}

/// One random member per occupied cell, weighted by the cell's total weight.
pub fn grid_select(p: &Dataset, gamma: f64, seed: u64) -> Result<Coreset> {
    let grid = GridSpec::new(gamma, p.dim())?;
    let groups = CellGroups::new(p, &all_indices(p), &grid, None);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Columns::with_capacity(p.dim(), groups.len());
    for g in 0..groups.len() {
        let m = groups.members(g);
        let pick = m[rng.random_range(0..m.len())];
        let w: f64 = m.iter().map(|&i| p.w(i)).sum();
        out.push(p.x(pick), p.y(pick), w);
    }
    Ok(Coreset::build(
        out.finish()?,
        Method::Grid,
        Params::Gamma(gamma),
        Some(seed),
        p,
    ))
}

/// Weighted centroid per occupied cell of the origin-anchored grid.
pub fn g_aggregate(p: &Dataset, gamma: f64) -> Result<Coreset> {
    g_aggregate_on(p, &GridSpec::new(gamma, p.dim())?)
}

/// [`g_aggregate`] on an arbitrary grid. The origin is not recorded in the
/// coreset metadata.
pub fn g_aggregate_on(p: &Dataset, grid: &GridSpec) -> Result<Coreset> {
    if grid.dim() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: grid.dim(),
        });
    }
    let groups = CellGroups::new(p, &all_indices(p), grid, None);
    let mut out = Columns::with_capacity(p.dim(), groups.len());
    groups.aggregate_into(p, &mut out);
    Ok(Coreset::build(
        out.finish()?,
        Method::GAggregate,
        Params::Gamma(grid.gamma()),
        None,
        p,
    ))
}

/// [`g_aggregate`] plus, for every empty cell touching an occupied one, a
/// unit-weight point at the cell center carrying the full-data regression
/// value there. Centers where the regression is undefined are skipped. Added
/// points follow the aggregates, in ascending cell order.
pub fn aggregate_neighbor(p: &Dataset, gamma: f64, ctx: EvalContext) -> Result<Coreset> {
    let grid = GridSpec::new(gamma, p.dim())?;
    let groups = CellGroups::new(p, &all_indices(p), &grid, None);
    let occupied: BTreeSet<CellIndex> = (0..groups.len())
        .map(|g| CellIndex(groups.key(g).to_vec()))
        .collect();
    let empty = grid.empty_adjacent_cells(&occupied)?;
    let full = Regressor::new(p, ctx)?;
    let mut out = Columns::with_capacity(p.dim(), groups.len() + empty.len());
    groups.aggregate_into(p, &mut out);
    for cell in &empty {
        let c = grid.cell_center(cell)?;
        if let Some(v) = full.sums(&c)?.ratio() {
            out.push(&c, v, 1.0);
        }
    }
    Ok(Coreset::build(
        out.finish()?,
        Method::AggregateNeighbor,
        Params::Gamma(gamma),
        None,
        p,
    ))
}

/// Cell side `eps * sigma * rho / (8 sqrt(d))` guaranteeing a (rho, eps)-coreset.
pub fn grid_gamma_for(eps: f64, sigma: f64, rho: f64, d: usize) -> Result<f64> {
    for (name, v) in [("eps", eps), ("rho", rho)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::param(name, format!("must lie in (0,1), got {v}")));
        }
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::param(
            "sigma",
            format!("must be positive and finite, got {sigma}"),
        ));
    }
    if d == 0 {
        return Err(Error::param("d", "must be at least 1"));
    }
    Ok(eps * sigma * rho / (8.0 * (d as f64).sqrt()))
}

/// Largest cell side (found by bisection in log space) whose origin-anchored
/// grid has at most `s` occupied cells. The occupied count is not strictly
/// monotone in the side, so the result is the best side seen.
pub fn gamma_for_size(p: &Dataset, s: usize) -> Result<f64> {
    if s == 0 {
        return Err(Error::param("size", "must be at least 1"));
    }
    let ext = p.extent();
    let span = ext
        .widths()
        .chain(ext.min.iter().chain(&ext.max).map(|v| v.abs()))
        .fold(0.0f64, f64::max)
        .max(1.0);
    let distinct = {
        let mut rows: Vec<&[f64]> = p.coords().chunks_exact(p.dim()).collect();
        rows.sort_unstable_by(|a, b| {
            a.iter()
                .zip(*b)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        });
        rows.dedup();
        rows.len()
    };
    let target = s.min(distinct);
    // Beyond twice the largest |coordinate| at most 2^d cells stay occupied.
    let mut hi = 4.0 * span;
    while occupied_count(p, hi)? > s {
        if hi > 1e300 {
            return Err(Error::param(
                "size",
                format!("no origin-anchored grid has at most {s} occupied cells"),
            ));
        }
        hi *= 2.0;
    }
    let mut lo = hi;
    loop {
        lo /= 2.0;
        let c = occupied_count(p, lo)?;
        if c > s {
            break;
        }
        if c == target {
            hi = lo;
        }
        if c == distinct {
            return Ok(lo);
        }
    }
    // occupied(lo) > s, occupied(hi) <= s
    let mut best = hi;
    let mut best_count = occupied_count(p, hi)?;
    let (mut a, mut b) = (lo.ln(), hi.ln());
    for _ in 0..60 {
        let mid = 0.5 * (a + b);
        let g = mid.exp();
        let c = occupied_count(p, g)?;
        if c <= s {
            if c > best_count || (c == best_count && g > best) {
                best = g;
                best_count = c;
            }
            b = mid;
        } else {
            a = mid;
        }
        if best_count == s {
            break;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::GaussianKernel;
    use crate::test_support::{line, six_points};
    use proptest::prelude::*;

    fn pts(cs: &Coreset) -> Vec<(f64, f64, f64)> {
        let d = cs.data();
        (0..d.len()).map(|i| (d.x(i)[0], d.y(i), d.w(i))).collect()
    }

    #[test]
    fn six_points_aggregate() {
        let cs = g_aggregate(&six_points(), 2.0).unwrap();
        assert_eq!(
            pts(&cs),
            vec![
                (1.5, 70.0, 2.0),
                (3.0, 0.0, 1.0),
                (15.5, 50.0, 2.0),
                (17.0, 50.0, 1.0)
            ]
        );
        assert_eq!(cs.seed(), None);
    }

    #[test]
    fn six_points_neighbor() {
        let ctx = EvalContext::exact(GaussianKernel::half(1.0).unwrap());
        let cs = aggregate_neighbor(&six_points(), 2.0, ctx).unwrap();
        let got = pts(&cs);
        assert_eq!(got.len(), 8);
        let added: Vec<f64> = got[4..].iter().map(|t| t.0).collect();
        assert_eq!(added, vec![-1.0, 5.0, 13.0, 19.0]);
        assert!(got[4..].iter().all(|t| t.2 == 1.0));
        assert!((got[6].1 - 50.0).abs() < 1e-9);
        assert!((got[5].1 - 3.2559).abs() < 5e-5);
    }

    #[test]
    fn six_points_select() {
        let p = six_points();
        let cs = grid_select(&p, 2.0, 11).unwrap();
        let d = cs.data();
        assert_eq!(d.ws(), &[2.0, 1.0, 2.0, 1.0]);
        let cells = [[1.0, 2.0].as_slice(), &[3.0], &[15.0, 16.0], &[17.0]];
        for (i, c) in cells.iter().enumerate() {
            assert!(c.contains(&d.x(i)[0]));
        }
        assert_eq!(cs, grid_select(&p, 2.0, 11).unwrap());
    }

    #[test]
    fn extreme_sides() {
        let p = six_points();
        let one = g_aggregate(&p, 1e3).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one.data().w(0), 6.0);
        let g = grid_select(&p, 1e3, 0).unwrap();
        assert_eq!(g.data().w(0), 6.0);
        let fine = g_aggregate(&p, 0.01).unwrap();
        assert_eq!(fine.data().coords(), p.coords());
        assert_eq!(fine.data().ys(), p.ys());
    }

    #[test]
    fn dense_data_adds_only_boundary_centers() {
        let p = line(&[(0.5, 1.0), (1.5, 2.0), (2.5, 3.0)]);
        let ctx = EvalContext::exact(GaussianKernel::half(1.0).unwrap());
        let cs = aggregate_neighbor(&p, 1.0, ctx).unwrap();
        let added: Vec<f64> = pts(&cs)[3..].iter().map(|t| t.0).collect();
        assert_eq!(added, vec![-0.5, 3.5]);
    }

    #[test]
    fn undefined_centers_are_skipped() {
        let p = line(&[(0.0, 1.0), (1000.0, 2.0)]);
        let ctx = EvalContext::truncated(GaussianKernel::half(0.01).unwrap());
        let cs = aggregate_neighbor(&p, 10.0, ctx).unwrap();
        assert_eq!(cs.len(), 2);
    }

    #[test]
    fn sizing_formula() {
        assert!((grid_gamma_for(0.1, 1.0, 0.1, 1).unwrap() - 0.00125).abs() < 1e-15);
        assert!((grid_gamma_for(0.1, 1.0, 0.1, 4).unwrap() - 0.000625).abs() < 1e-15);
        assert!(grid_gamma_for(0.0, 1.0, 0.1, 1).is_err());
        assert!(grid_gamma_for(0.1, -1.0, 0.1, 1).is_err());
    }

    #[test]
    fn gamma_for_size_hits_budget() {
        let pts: Vec<(f64, f64)> = (0..1000).map(|i| (i as f64, 0.0)).collect();
        let p = line(&pts);
        // x = 0 sits in cell -1, the rest in cell 0 or above.
        assert!(gamma_for_size(&p, 1).is_err());
        for s in [2, 7, 100, 250, 1000, 5000] {
            let g = gamma_for_size(&p, s).unwrap();
            let c = occupied_count(&p, g).unwrap();
            assert!(c <= s, "s={s} c={c}");
            assert!(c as f64 >= 0.9 * s.min(1000) as f64, "s={s} c={c}");
        }
    }

    fn arb_dataset() -> impl Strategy<Value = Dataset> {
        (1usize..3).prop_flat_map(|d| {
            prop::collection::vec(
                (
                    prop::collection::vec(-50.0f64..50.0, d),
                    -10.0f64..10.0,
                    1u8..4,
                ),
                1..60,
            )
            .prop_map(move |rows| {
                let mut coords = Vec::new();
                let mut ys = Vec::new();
                let mut ws = Vec::new();
                for (x, y, w) in rows {
                    coords.extend(x);
                    ys.push(y);
                    ws.push(w as f64);
                }
                Dataset::from_columns(d, coords, ys, ws).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn count_preservation(p in arb_dataset(), gamma in 0.1f64..40.0, seed in 0u64..100) {
            let w = p.total_weight();
            prop_assert_eq!(g_aggregate(&p, gamma).unwrap().data().total_weight(), w);
            prop_assert_eq!(grid_select(&p, gamma, seed).unwrap().data().total_weight(), w);
            let k = 1 + (seed as usize % p.len());
            let kc = super::super::k_center(&p, k, seed).unwrap();
            prop_assert!((kc.data().total_weight() - w).abs() < 1e-9);
        }

        #[test]
        fn centroids_stay_in_cells_and_range(p in arb_dataset(), gamma in 0.1f64..40.0) {
            let grid = GridSpec::new(gamma, p.dim()).unwrap();
            let cs = g_aggregate(&p, gamma).unwrap();
            let groups = CellGroups::new(&p, &all_indices(&p), &grid, None);
            for i in 0..cs.len() {
                let x = cs.data().x(i);
                let cell = groups.key(i);
                for j in 0..p.dim() {
                    let lo = cell[j] as f64 * gamma;
                    prop_assert!(x[j] > lo - 1e-9 * gamma.max(lo.abs()));
                    prop_assert!(x[j] <= lo + gamma + 1e-9 * gamma.max(lo.abs()));
                }
                let y = cs.data().y(i);
                prop_assert!(y >= p.y_min() - 1e-9 && y <= p.y_max() + 1e-9);
            }
        }

        #[test]
        fn aggregate_is_idempotent(p in arb_dataset(), gamma in 0.1f64..40.0) {
            let once = g_aggregate(&p, gamma).unwrap();
            let twice = g_aggregate(once.data(), gamma).unwrap();
            prop_assert_eq!(once.len(), twice.len());
            for i in 0..once.len() {
                prop_assert_eq!(once.data().w(i), twice.data().w(i));
                prop_assert!((once.data().y(i) - twice.data().y(i)).abs() < 1e-9);
                for j in 0..p.dim() {
                    prop_assert!((once.data().x(i)[j] - twice.data().x(i)[j]).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn neighbor_values_in_range(p in arb_dataset(), gamma in 1.0f64..40.0) {
            let ctx = EvalContext::exact(GaussianKernel::half(5.0).unwrap());
            let cs = aggregate_neighbor(&p, gamma, ctx).unwrap();
            for &y in cs.data().ys() {
                prop_assert!(y >= p.y_min() - 1e-9 && y <= p.y_max() + 1e-9);
            }
        }
    }
}

//! Weighted KDE, weighted WKDE and Nadaraya-Watson regression.
//!
//! With point weights `w_p` and total weight `W`:
//!
//! ```text
//! kde(q)  = (1/W) sum_p w_p K(p_x, q)
//! wkde(q) = (1/W) sum_p w_p K(p_x, q) p_y
//! reg(q)  = wkde(q) / kde(q)
//! ```
//!
//! For unit weights these are the usual `1/|P|` definitions. Optional
//! truncation restricts each sum to points within a radius of `q`, located
//! through a uniform bucket grid whose side equals the radius.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernel::{sq_dist, GaussianKernel};
use crate::spatial::{neighbor_offsets, GridSpec};

/// Radius cut-off applied during evaluation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub enum Truncation {
    #[default]
    Off,
    /// Radius in multiples of the bandwidth.
    Sigmas(f64),
}

impl Truncation {
    /// The customary ten-bandwidth cut-off.
    pub const TEN_SIGMA: Truncation = Truncation::Sigmas(10.0);

    pub fn radius(&self, sigma: f64) -> Option<f64> {
        match *self {
            Truncation::Off => None,
            Truncation::Sigmas(k) => Some(k * sigma),
        }
    }
}

impl fmt::Display for Truncation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Truncation::Off => f.write_str("off"),
            Truncation::Sigmas(k) => write!(f, "{k}sigma"),
        }
    }
}

impl FromStr for Truncation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("off") || s.eq_ignore_ascii_case("none") {
            return Ok(Truncation::Off);
        }
        let k = s
            .strip_suffix("sigma")
            .ok_or_else(|| {
                Error::param(
                    "truncate",
                    format!("expected `<k>sigma` or `off`, got `{s}`"),
                )
            })?
            .trim()
            .parse::<f64>()
            .map_err(|e| Error::param("truncate", e.to_string()))?;
        if !(k.is_finite() && k >= 1.0) {
            return Err(Error::param(
                "truncate",
                "radius must be at least one bandwidth",
            ));
        }
        Ok(Truncation::Sigmas(k))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalContext {
    pub kernel: GaussianKernel,
    pub truncation: Truncation,
}

impl EvalContext {
    pub fn exact(kernel: GaussianKernel) -> Self {
        Self {
            kernel,
            truncation: Truncation::Off,
        }
    }

    pub fn truncated(kernel: GaussianKernel) -> Self {
        Self {
            kernel,
            truncation: Truncation::TEN_SIGMA,
        }
    }

    pub fn radius(&self) -> Option<f64> {
        self.truncation.radius(self.kernel.sigma())
    }

    fn validate(&self) -> Result<()> {
        if let Truncation::Sigmas(k) = self.truncation {
            if !(k.is_finite() && k >= 1.0) {
                return Err(Error::param(
                    "truncate",
                    "radius must be at least one bandwidth",
                ));
            }
        }
        Ok(())
    }
}

/// Unnormalised kernel sums at one query.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct KernelSums {
    /// `sum_p w_p K(p_x, q)`
    pub mass: f64,
    /// `sum_p w_p K(p_x, q) p_y`
    pub moment: f64,
}

impl KernelSums {
    /// `moment / mass`, or `None` when the mass is zero.
    pub fn ratio(&self) -> Option<f64> {
        (self.mass > 0.0).then(|| self.moment / self.mass)
    }
}

/// Points regrouped by bucket, contiguous per bucket.
struct BucketIndex {
    grid: GridSpec,
    radius_sq: f64,
    buckets: HashMap<Vec<i64>, (usize, usize)>,
    coords: Vec<f64>,
    ys: Vec<f64>,
    ws: Vec<f64>,
    offsets: Vec<i64>,
}

impl BucketIndex {
    fn build(ds: &Dataset, radius: f64) -> Result<Self> {
        let d = ds.dim();
        let grid = GridSpec::new(radius, d)?;
        let mut keys = vec![0i64; ds.len() * d];
        for (i, k) in keys.chunks_exact_mut(d).enumerate() {
            grid.cell_into(ds.x(i), k);
        }
        let mut order: Vec<usize> = (0..ds.len()).collect();
        // Stable: original index order inside each bucket.
        order.sort_by(|&a, &b| keys[a * d..(a + 1) * d].cmp(&keys[b * d..(b + 1) * d]));

        let mut buckets = HashMap::new();
        let mut coords = Vec::with_capacity(ds.coords().len());
        let mut ys = Vec::with_capacity(ds.len());
        let mut ws = Vec::with_capacity(ds.len());
        let mut start = 0;
        for (pos, &i) in order.iter().enumerate() {
            let key = &keys[i * d..(i + 1) * d];
            let next_differs = order
                .get(pos + 1)
                .is_none_or(|&n| &keys[n * d..(n + 1) * d] != key);
            coords.extend_from_slice(ds.x(i));
            ys.push(ds.y(i));
            ws.push(ds.w(i));
            if next_differs {
                buckets.insert(key.to_vec(), (start, pos + 1));
                start = pos + 1;
            }
        }
        Ok(Self {
            grid,
            radius_sq: radius * radius,
            buckets,
            coords,
            ys,
            ws,
            offsets: neighbor_offsets(d),
        })
    }

    fn sums(&self, kernel: &GaussianKernel, q: &[f64]) -> KernelSums {
        let d = q.len();
        let mut home = vec![0i64; d];
        self.grid.cell_into(q, &mut home);
        let mut probe = vec![0i64; d];
        let mut acc = KernelSums::default();
        for off in self.offsets.chunks_exact(d) {
            for ((p, h), o) in probe.iter_mut().zip(&home).zip(off) {
                *p = h + o;
            }
            let Some(&(lo, hi)) = self.buckets.get(&probe) else {
                continue;
            };
            for i in lo..hi {
                let d2 = sq_dist(&self.coords[i * d..(i + 1) * d], q);
                if d2 <= self.radius_sq {
                    let k = self.ws[i] * kernel.of_sq_dist(d2);
                    acc.mass += k;
                    acc.moment += k * self.ys[i];
                }
            }
        }
        acc
    }
}

/// Evaluator bound to one dataset.
///
/// Building one with truncation enabled constructs the bucket index once;
/// every query then touches only the `3^d` buckets around it. Summation order
/// is fixed per query, so results do not depend on thread count.
pub struct Regressor<'a> {
    data: &'a Dataset,
    ctx: EvalContext,
    index: Option<BucketIndex>,
}

impl<'a> Regressor<'a> {
    pub fn new(data: &'a Dataset, ctx: EvalContext) -> Result<Self> {
        ctx.validate()?;
        let index = match ctx.radius() {
            Some(r) => Some(BucketIndex::build(data, r)?),
            None => None,
        };
        Ok(Self { data, ctx, index })
    }

    pub fn data(&self) -> &Dataset {
        self.data
    }

    pub fn context(&self) -> &EvalContext {
        &self.ctx
    }

    fn check(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.data.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.data.dim(),
                got: q.len(),
            });
        }
        Ok(())
    }

    /// Kernel sums without dimension checking.
    #[inline]
    pub(crate) fn sums_unchecked(&self, q: &[f64]) -> KernelSums {
        let kernel = &self.ctx.kernel;
        match &self.index {
            Some(index) => index.sums(kernel, q),
            None => {
                let mut acc = KernelSums::default();
                for p in self.data.iter() {
                    let k = p.w * kernel.of_sq_dist(sq_dist(p.x, q));
                    acc.mass += k;
                    acc.moment += k * p.y;
                }
                acc
            }
        }
    }

    pub fn sums(&self, q: &[f64]) -> Result<KernelSums> {
        self.check(q)?;
        Ok(self.sums_unchecked(q))
    }

    pub fn kde(&self, q: &[f64]) -> Result<f64> {
        Ok(self.sums(q)?.mass / self.data.total_weight())
    }

    pub fn wkde(&self, q: &[f64]) -> Result<f64> {
        Ok(self.sums(q)?.moment / self.data.total_weight())
    }

    /// Kernel regression at `q`; undefined where the kernel density is zero.
    pub fn reg(&self, q: &[f64]) -> Result<f64> {
        self.sums(q)?
            .ratio()
            .ok_or_else(|| Error::UndefinedAtQuery { q: q.to_vec() })
    }

    /// Kernel sums at every query of a flat `m x d` buffer, in input order.
    pub fn sums_batch(&self, queries: &[f64]) -> Result<Vec<KernelSums>> {
        let d = self.data.dim();
        if queries.len() % d != 0 {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: queries.len() % d,
            });
        }
        Ok(queries
            .par_chunks_exact(d)
            .map(|q| self.sums_unchecked(q))
            .collect())
    }

    /// Regression at each query; `None` marks queries where it is undefined.
    pub fn reg_batch(&self, queries: &[f64]) -> Result<Vec<Option<f64>>> {
        Ok(self
            .sums_batch(queries)?
            .into_iter()
            .map(|s| s.ratio())
            .collect())
    }
}

/// One-off KDE at `q`. Prefer [`Regressor`] for repeated queries.
pub fn kde(ds: &Dataset, ctx: EvalContext, q: &[f64]) -> Result<f64> {
    Regressor::new(ds, ctx)?.kde(q)
}

pub fn wkde(ds: &Dataset, ctx: EvalContext, q: &[f64]) -> Result<f64> {
    Regressor::new(ds, ctx)?.wkde(q)
}

pub fn reg(ds: &Dataset, ctx: EvalContext, q: &[f64]) -> Result<f64> {
    Regressor::new(ds, ctx)?.reg(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_ar1, WeightedPoint};
    use crate::kernel::KernelForm;
    use crate::test_support::{six_points, SIX_POINTS};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn half(sigma: f64) -> EvalContext {
        EvalContext::exact(GaussianKernel::half(sigma).unwrap())
    }

    /// Direct transcription of the unit-weight definitions.
    fn oracle(pts: &[(f64, f64)], sigma: f64, q: f64) -> (f64, f64) {
        let n = pts.len() as f64;
        let k = |x: f64| (-(x - q) * (x - q) / (2.0 * sigma * sigma)).exp();
        let kde = pts.iter().map(|&(x, _)| k(x)).sum::<f64>() / n;
        let wkde = pts.iter().map(|&(x, y)| k(x) * y).sum::<f64>() / n;
        (kde, wkde)
    }

    #[test]
    fn single_point() {
        let ds = Dataset::new(vec![WeightedPoint::new(vec![2.0], 7.0)]).unwrap();
        let r = Regressor::new(&ds, half(1.0)).unwrap();
        assert_eq!(r.kde(&[2.0]).unwrap(), 1.0);
        assert_eq!(r.wkde(&[2.0]).unwrap(), 7.0);
        assert_eq!(r.reg(&[2.0]).unwrap(), 7.0);
    }

    #[test]
    fn far_point_contributes_nothing() {
        let ds = Dataset::new(vec![
            WeightedPoint::new(vec![0.0], 1.0),
            WeightedPoint::new(vec![1e6], 1.0),
        ])
        .unwrap();
        let kde = kde(&ds, half(1.0), &[0.0]).unwrap();
        assert!((kde - 0.5).abs() < 1e-15);
    }

    #[test]
    fn six_points_matches_direct_sums() {
        let ds = six_points();
        let r = Regressor::new(&ds, half(1.0)).unwrap();
        for q in [3.0, 5.0, 9.0, -2.0] {
            let (k, w) = oracle(&SIX_POINTS, 1.0, q);
            assert!((r.kde(&[q]).unwrap() - k).abs() < 1e-15);
            assert!((r.wkde(&[q]).unwrap() - w).abs() < 1e-13);
        }
    }

    #[test]
    fn six_points_right_cluster_dominates_at_13() {
        let v = reg(&six_points(), half(1.0), &[13.0]).unwrap();
        assert!((v - 50.0).abs() < 1e-9, "{v}");
    }

    #[test]
    fn six_points_expected_values_at_unit_bandwidth() {
        // Half form, sigma = 1 reproduces both printed regression values.
        let ds = six_points();
        let r = Regressor::new(&ds, half(1.0)).unwrap();
        for (q, expected) in [(5.0, 3.2559), (-2.06, 98.3124)] {
            let v = r.reg(&[q]).unwrap();
            let (k, w) = oracle(&SIX_POINTS, 1.0, q);
            assert!((v - w / k).abs() < 1e-12);
            assert!((v - expected).abs() < 5e-5, "{q}: {v}");
        }
    }

    #[test]
    fn bandwidth_scan_agrees_with_oracle() {
        let ds = six_points();
        // Below sigma ~ 0.1 every kernel value at q = 5 underflows.
        for i in 3..=100 {
            let sigma = i as f64 * 0.04;
            let v = reg(&ds, half(sigma), &[5.0]).unwrap();
            let (k, w) = oracle(&SIX_POINTS, sigma, 5.0);
            assert!((v - w / k).abs() < 1e-9 * (1.0 + v.abs()), "{sigma}");
        }
    }

    #[test]
    fn constant_values_are_reproduced() {
        let pts = (0..20)
            .map(|i| WeightedPoint::new(vec![i as f64 * 0.3], 4.25))
            .collect();
        let ds = Dataset::new(pts).unwrap();
        let r = Regressor::new(&ds, half(0.5)).unwrap();
        for q in [-1.0, 0.0, 2.2, 6.0] {
            assert!((r.reg(&[q]).unwrap() - 4.25).abs() < 1e-12);
            let k = r.kde(&[q]).unwrap();
            assert!((r.wkde(&[q]).unwrap() - 4.25 * k).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_density_is_undefined() {
        let ds = Dataset::new(vec![WeightedPoint::new(vec![0.0], 1.0)]).unwrap();
        let ctx = EvalContext::truncated(GaussianKernel::half(1.0).unwrap());
        let r = Regressor::new(&ds, ctx).unwrap();
        assert!(matches!(
            r.reg(&[100.0]),
            Err(Error::UndefinedAtQuery { .. })
        ));
        // Underflow without truncation.
        let r = Regressor::new(&ds, half(1.0)).unwrap();
        assert!(r.reg(&[1e4]).is_err());
        assert_eq!(r.reg_batch(&[0.0, 1e4]).unwrap(), vec![Some(1.0), None]);
    }

    #[test]
    fn batch_edge_cases() {
        let ds = six_points();
        let r = Regressor::new(&ds, half(1.0)).unwrap();
        assert!(r.reg_batch(&[]).unwrap().is_empty());
        assert_eq!(
            r.reg_batch(&[3.0]).unwrap(),
            vec![Some(r.reg(&[3.0]).unwrap())]
        );
        assert!(r.kde(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn truncated_matches_exact_on_random_walk() {
        let ds = synth_ar1(20_000, 0.0, 1.0, 10.0, 1.0, 5).unwrap();
        let k = GaussianKernel::half(50.0).unwrap();
        let exact = Regressor::new(&ds, EvalContext::exact(k)).unwrap();
        let trunc = Regressor::new(&ds, EvalContext::truncated(k)).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let qs: Vec<f64> = (0..1000).map(|_| rng.random_range(0.0..20_000.0)).collect();
        let a = exact.reg_batch(&qs).unwrap();
        let b = trunc.reg_batch(&qs).unwrap();
        let m = ds.m_range();
        for (x, y) in a.iter().zip(&b) {
            assert!((x.unwrap() - y.unwrap()).abs() <= 1e-6 * m);
        }
    }

    #[test]
    fn truncation_parsing() {
        assert_eq!(
            "10sigma".parse::<Truncation>().unwrap(),
            Truncation::TEN_SIGMA
        );
        assert_eq!("off".parse::<Truncation>().unwrap(), Truncation::Off);
        assert!("0.5sigma".parse::<Truncation>().is_err());
        assert!("ten".parse::<Truncation>().is_err());
    }

    fn small_set() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
        prop::collection::vec((-20.0f64..20.0, -50.0f64..50.0, 0.5f64..4.0), 1..25)
    }

    fn build(raw: &[(f64, f64, f64)]) -> Dataset {
        Dataset::new(
            raw.iter()
                .map(|&(x, y, w)| WeightedPoint::weighted(vec![x], y, w))
                .collect(),
        )
        .unwrap()
    }

    proptest! {
        #[test]
        fn regression_stays_in_value_range(raw in small_set(), q in -30.0f64..30.0, sigma in 0.3f64..5.0) {
            let ds = build(&raw);
            if let Ok(v) = reg(&ds, half(sigma), &[q]) {
                let tol = 1e-9 * (1.0 + ds.y_max().abs().max(ds.y_min().abs()));
                prop_assert!(v >= ds.y_min() - tol && v <= ds.y_max() + tol);
            }
        }

        #[test]
        fn affine_value_maps_commute(
            raw in small_set(), q in -20.0f64..20.0, a in 0.01f64..100.0, b in -1e3f64..1e3,
        ) {
            let ds = build(&raw);
            let mapped = ds.map_values(a, b).unwrap();
            let ctx = half(2.0);
            if let (Ok(u), Ok(v)) = (reg(&ds, ctx, &[q]), reg(&mapped, ctx, &[q])) {
                prop_assert!((v - (a * u + b)).abs() <= 1e-9 * (1.0 + (a * u).abs() + b.abs()));
            }
        }

        #[test]
        fn splitting_a_weight_changes_nothing(raw in small_set(), q in -20.0f64..20.0, form_plain in any::<bool>()) {
            let ds = build(&raw);
            let mut split = Vec::new();
            for p in ds.iter() {
                split.push(WeightedPoint::weighted(p.x.to_vec(), p.y, p.w / 2.0));
                split.push(WeightedPoint::weighted(p.x.to_vec(), p.y, p.w / 2.0));
            }
            let split = Dataset::new(split).unwrap();
            let form = if form_plain { KernelForm::Plain } else { KernelForm::Half };
            let ctx = EvalContext::exact(GaussianKernel::new(1.5, form).unwrap());
            let (a, b) = (Regressor::new(&ds, ctx).unwrap(), Regressor::new(&split, ctx).unwrap());
            let rel = |u: f64, v: f64| (u - v).abs() <= 1e-12 * (1.0 + u.abs());
            prop_assert!(rel(a.kde(&[q]).unwrap(), b.kde(&[q]).unwrap()));
            prop_assert!(rel(a.wkde(&[q]).unwrap(), b.wkde(&[q]).unwrap()));
            if let (Ok(u), Ok(v)) = (a.reg(&[q]), b.reg(&[q])) {
                prop_assert!(rel(u, v));
            }
        }

        #[test]
        fn truncation_error_below_tail(raw in small_set(), q in -20.0f64..20.0) {
            let ds = build(&raw);
            let k = GaussianKernel::half(1.0).unwrap();
            let e = Regressor::new(&ds, EvalContext::exact(k)).unwrap().kde(&[q]).unwrap();
            let t = Regressor::new(&ds, EvalContext::truncated(k)).unwrap().kde(&[q]).unwrap();
            prop_assert!((e - t).abs() <= k.profile(10.0) + 1e-16);
        }
    }
}

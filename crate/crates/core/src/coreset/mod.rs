//! Coreset constructions.
//!
//! | method | parameter | weights |
//! |---|---|---|
//! | [`random_sample`] | size | 1 |
//! | [`k_center`] | k | class weight |
//! | [`z_order_select`] | size | 1 |
//! | [`z_aggregate`] | size | block weight |
//! | [`grid_select`] | gamma | cell weight |
//! | [`g_aggregate`] | gamma | cell weight |
//! | [`aggregate_neighbor`] | gamma | cell weight, 1 for added centers |
//! | [`progressive_g_aggregate`] | [`ProgressiveSpec`] | cell weight |
//!
//! All constructions are deterministic given their inputs and seed.

mod grid;
mod kcenter;
mod progressive;
mod sampling;
mod zorder;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use grid::{
    aggregate_neighbor, g_aggregate, g_aggregate_on, gamma_for_size, grid_gamma_for, grid_select,
};
pub use kcenter::k_center;
pub use progressive::{progressive_g_aggregate, ProgressiveSpec, Region, DEFAULT_GROWTH};
pub use sampling::{random_sample, sample_size_bound};
pub use zorder::{z_aggregate, z_order_select, z_order_select_per_block};

use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    RandomSample,
    KCenter,
    ZOrder,
    /// Z-order with an independent random offset inside every block.
    ZOrderPerBlock,
    ZAggregate,
    Grid,
    GAggregate,
    AggregateNeighbor,
    ProgressiveGAggregate,
}

impl Method {
    pub const ALL: [Method; 9] = [
        Method::RandomSample,
        Method::KCenter,
        Method::ZOrder,
        Method::ZOrderPerBlock,
        Method::ZAggregate,
        Method::Grid,
        Method::GAggregate,
        Method::AggregateNeighbor,
        Method::ProgressiveGAggregate,
    ];

    /// Long name, as written to coreset metadata.
    pub fn name(&self) -> &'static str {
        match self {
            Method::RandomSample => "random-sample",
            Method::KCenter => "k-center",
            Method::ZOrder => "z-order",
            Method::ZOrderPerBlock => "z-order-per-block",
            Method::ZAggregate => "z-aggregate",
            Method::Grid => "grid",
            Method::GAggregate => "g-aggregate",
            Method::AggregateNeighbor => "aggregate-neighbor",
            Method::ProgressiveGAggregate => "progressive-g-aggregate",
        }
    }

    /// Short command-line name.
    pub fn short_name(&self) -> &'static str {
        match self {
            Method::RandomSample => "rs",
            Method::KCenter => "kcen",
            Method::ZOrder => "z",
            Method::ZOrderPerBlock => "z-block",
            Method::ZAggregate => "za",
            Method::Grid => "g",
            Method::GAggregate => "ga",
            Method::AggregateNeighbor => "an",
            Method::ProgressiveGAggregate => "prog-ga",
        }
    }

    /// Whether the output depends on the seed.
    pub fn uses_seed(&self) -> bool {
        matches!(
            self,
            Method::RandomSample
                | Method::KCenter
                | Method::ZOrder
                | Method::ZOrderPerBlock
                | Method::Grid
        )
    }

    /// Whether the method is parameterised by a cell side rather than a count.
    pub fn is_grid(&self) -> bool {
        matches!(
            self,
            Method::Grid | Method::GAggregate | Method::AggregateNeighbor
        )
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s || m.short_name() == s)
            .ok_or_else(|| Error::param("method", format!("unknown method `{s}`")))
    }
}

/// Construction parameter record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Params {
    Size(usize),
    K(usize),
    Gamma(f64),
    Progressive(ProgressiveSpec),
}

impl fmt::Display for Params {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use crate::data::format_f64 as num;
        match self {
            Params::Size(s) => write!(f, "size={s}"),
            Params::K(k) => write!(f, "k={k}"),
            Params::Gamma(g) => write!(f, "gamma={}", num(*g)),
            Params::Progressive(p) => {
                write!(
                    f,
                    "gamma1={} width1={} a={}",
                    num(p.gamma1),
                    num(p.width1),
                    num(p.a)
                )?;
                match p.region_count {
                    Some(r) => write!(f, " regions={r}"),
                    None => f.write_str(" regions=auto"),
                }
            }
        }
    }
}

impl Params {
    /// Rebuilds the parameter record of `method` from `key=value` metadata.
    pub fn from_metadata(method: Method, meta: &BTreeMap<String, String>) -> Result<Self> {
        fn get<T: FromStr>(meta: &BTreeMap<String, String>, key: &'static str) -> Result<T>
        where
            T::Err: fmt::Display,
        {
            let raw = meta
                .get(key)
                .ok_or_else(|| Error::param(key, "missing from coreset metadata"))?;
            raw.parse()
                .map_err(|e: T::Err| Error::param(key, e.to_string()))
        }
        Ok(match method {
            Method::RandomSample | Method::ZOrder | Method::ZOrderPerBlock | Method::ZAggregate => {
                Params::Size(get(meta, "size")?)
            }
            Method::KCenter => Params::K(get(meta, "k")?),
            Method::Grid | Method::GAggregate | Method::AggregateNeighbor => {
                Params::Gamma(get(meta, "gamma")?)
            }
            Method::ProgressiveGAggregate => {
                let region_count = match meta.get("regions").map(String::as_str) {
                    None | Some("auto") => None,
                    Some(_) => Some(get(meta, "regions")?),
                };
                Params::Progressive(ProgressiveSpec::new(
                    get(meta, "gamma1")?,
                    get(meta, "width1")?,
                    get(meta, "a")?,
                    region_count,
                )?)
            }
        })
    }
}

/// A weighted proxy dataset with its provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct Coreset {
    data: Dataset,
    method: Method,
    params: Params,
    seed: Option<u64>,
    source_hash: String,
    source_len: usize,
}

impl Coreset {
    pub(crate) fn build(
        data: Dataset,
        method: Method,
        params: Params,
        seed: Option<u64>,
        source: &Dataset,
    ) -> Self {
        Self {
            data,
            method,
            params,
            seed,
            source_hash: source.fingerprint(),
            source_len: source.len(),
        }
    }

    pub fn from_parts(
        data: Dataset,
        method: Method,
        params: Params,
        seed: Option<u64>,
        source_hash: String,
        source_len: usize,
    ) -> Self {
        Self {
            data,
            method,
            params,
            seed,
            source_hash,
            source_len,
        }
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn into_data(self) -> Dataset {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Fingerprint of the dataset the coreset was built from.
    pub fn source_hash(&self) -> &str {
        &self.source_hash
    }

    pub fn source_len(&self) -> usize {
        self.source_len
    }
}

impl AsRef<Dataset> for Coreset {
    fn as_ref(&self) -> &Dataset {
        &self.data
    }
}

/// Everything needed to build a coreset of any kind.
#[derive(Clone, Debug, PartialEq)]
pub struct BuildSpec {
    pub method: Method,
    pub params: Params,
    pub seed: u64,
    /// Regression context used by aggregate-neighbor for added centers.
    pub context: Option<crate::regress::EvalContext>,
}

/// Dispatches to the construction named by `spec`.
pub fn build(p: &Dataset, spec: &BuildSpec) -> Result<Coreset> {
    let mismatch = || {
        Error::param(
            "params",
            format!("{} does not take `{}`", spec.method, spec.params),
        )
    };
    match (spec.method, &spec.params) {
        (Method::RandomSample, Params::Size(s)) => random_sample(p, *s, spec.seed),
        (Method::KCenter, Params::K(k) | Params::Size(k)) => k_center(p, *k, spec.seed),
        (Method::ZOrder, Params::Size(s)) => z_order_select(p, *s, spec.seed),
        (Method::ZOrderPerBlock, Params::Size(s)) => z_order_select_per_block(p, *s, spec.seed),
        (Method::ZAggregate, Params::Size(s)) => z_aggregate(p, *s),
        (Method::Grid, Params::Gamma(g)) => grid_select(p, *g, spec.seed),
        (Method::GAggregate, Params::Gamma(g)) => g_aggregate(p, *g),
        (Method::AggregateNeighbor, Params::Gamma(g)) => {
            let ctx = spec.context.ok_or_else(|| {
                Error::param("sigma", "aggregate-neighbor needs a regression bandwidth")
            })?;
            aggregate_neighbor(p, *g, ctx)
        }
        (Method::ProgressiveGAggregate, Params::Progressive(ps)) => progressive_g_aggregate(p, ps),
        _ => Err(mismatch()),
    }
}

/// Builds a coreset of roughly `size` points. Grid methods pick the largest
/// cell side with at most `size` occupied cells, so they may come out smaller.
pub fn build_with_size(
    p: &Dataset,
    method: Method,
    size: usize,
    seed: u64,
    context: Option<crate::regress::EvalContext>,
) -> Result<Coreset> {
    let params = if method.is_grid() {
        Params::Gamma(gamma_for_size(p, size)?)
    } else if method == Method::KCenter {
        Params::K(size)
    } else if method == Method::ProgressiveGAggregate {
        return Err(Error::param(
            "method",
            "the progressive scheme is sized by its spec, not a count",
        ));
    } else {
        Params::Size(size)
    };
    build(
        p,
        &BuildSpec {
            method,
            params,
            seed,
            context,
        },
    )
}

/// Weighted mean of a group of points, accumulated in the given order.
pub(crate) fn weighted_mean(
    p: &Dataset,
    members: impl IntoIterator<Item = usize>,
    x_out: &mut [f64],
) -> (f64, f64) {
    x_out.fill(0.0);
    let mut wy = 0.0;
    let mut w = 0.0;
    for i in members {
        let wi = p.w(i);
        for (o, &v) in x_out.iter_mut().zip(p.x(i)) {
            *o += wi * v;
        }
        wy += wi * p.y(i);
        w += wi;
    }
    for o in x_out.iter_mut() {
        *o /= w;
    }
    (wy / w, w)
}

/// Column buffers for assembling coreset points.
pub(crate) struct Columns {
    dim: usize,
    coords: Vec<f64>,
    ys: Vec<f64>,
    ws: Vec<f64>,
}

impl Columns {
    pub(crate) fn with_capacity(dim: usize, n: usize) -> Self {
        Self {
            dim,
            coords: Vec::with_capacity(n * dim),
            ys: Vec::with_capacity(n),
            ws: Vec::with_capacity(n),
        }
    }

    pub(crate) fn push(&mut self, x: &[f64], y: f64, w: f64) {
        self.coords.extend_from_slice(x);
        self.ys.push(y);
        self.ws.push(w);
    }

    pub(crate) fn finish(self) -> Result<Dataset> {
        Dataset::from_columns(self.dim, self.coords, self.ys, self.ws)
    }
}

pub(crate) fn check_count(name: &'static str, value: usize, n: usize) -> Result<()> {
    if value == 0 || value > n {
        return Err(Error::param(
            name,
            format!("must be in 1..={n}, got {value}"),
        ));
    }
    Ok(())
}

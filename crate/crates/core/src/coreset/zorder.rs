use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_count, weighted_mean, Columns, Coreset, Method, Params};
use crate::data::Dataset;
use crate::error::Result;
use crate::spatial::sort_by_zorder;

/// Strided pick along the Z-order with one shared random offset.
pub fn z_order_select(p: &Dataset, s: usize, seed: u64) -> Result<Coreset> {
    check_count("size", s, p.len())?;
    let order = sort_by_zorder(p);
    let h = p.len() / s;
    let r = ChaCha8Rng::seed_from_u64(seed).random_range(0..h);
    let mut out = Columns::with_capacity(p.dim(), s);
    for i in 0..s {
        let j = order[r + h * i];
        out.push(p.x(j), p.y(j), 1.0);
    }
    Ok(Coreset::build(
        out.finish()?,
        Method::ZOrder,
        Params::Size(s),
        Some(seed),
        p,
    ))
}

/// Z-order pick with an independent random offset inside every block.
pub fn z_order_select_per_block(p: &Dataset, s: usize, seed: u64) -> Result<Coreset> {
    check_count("size", s, p.len())?;
    let order = sort_by_zorder(p);
    let h = p.len() / s;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Columns::with_capacity(p.dim(), s);
    for i in 0..s {
        let j = order[h * i + rng.random_range(0..h)];
        out.push(p.x(j), p.y(j), 1.0);
    }
    Ok(Coreset::build(
        out.finish()?,
        Method::ZOrderPerBlock,
        Params::Size(s),
        Some(seed),
        p,
    ))
}

/// Block means along the Z-order; the last block absorbs the remainder.
pub fn z_aggregate(p: &Dataset, s: usize) -> Result<Coreset> {
    check_count("size", s, p.len())?;
    let order = sort_by_zorder(p);
    let h = p.len() / s;
    let mut out = Columns::with_capacity(p.dim(), s);
    let mut x = vec![0.0; p.dim()];
    for i in 0..s {
        let end = if i + 1 == s { p.len() } else { h * (i + 1) };
        let (y, w) = weighted_mean(p, order[h * i..end].iter().copied(), &mut x);
        out.push(&x, y, w);
    }
    Ok(Coreset::build(
        out.finish()?,
        Method::ZAggregate,
        Params::Size(s),
        None,
        p,
    ))
}

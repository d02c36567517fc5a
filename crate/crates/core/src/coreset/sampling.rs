use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{check_count, Columns, Coreset, Method, Params};
use crate::data::Dataset;
use crate::error::{Error, Result};

/// Uniform sample of `s` distinct points without replacement, unit weights.
pub fn random_sample(p: &Dataset, s: usize, seed: u64) -> Result<Coreset> {
    check_count("size", s, p.len())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked = rand::seq::index::sample(&mut rng, p.len(), s);
    let mut out = Columns::with_capacity(p.dim(), s);
    for i in picked.iter() {
        out.push(p.x(i), p.y(i), 1.0);
    }
    Ok(Coreset::build(
        out.finish()?,
        Method::RandomSample,
        Params::Size(s),
        Some(seed),
        p,
    ))
}

/// `ceil((d ln(1/rho) + ln(2/delta)) / (eps rho)^2)`, an order-of-magnitude
/// sample size for a uniform-sample coreset.
pub fn sample_size_bound(eps: f64, rho: f64, delta: f64, d: usize) -> Result<u64> {
    for (name, v) in [("eps", eps), ("rho", rho), ("delta", delta)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::param(name, format!("must lie in (0,1), got {v}")));
        }
    }
    if d == 0 {
        return Err(Error::param("d", "must be at least 1"));
    }
    let er = eps * rho;
    let v = (d as f64 * (1.0 / rho).ln() + (2.0 / delta).ln()) / (er * er);
    Ok(v.ceil() as u64)
}

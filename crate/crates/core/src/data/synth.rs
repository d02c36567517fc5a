use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::Dataset;
use crate::error::{Error, Result};

/// AR(1) series `y_i = c + phi * y_{i-1} + N(0, noise_sigma)` at `x = 0, 1, ..., n-1`.
///
/// `y_0 = y0` exactly. Noise comes from ChaCha8 seeded with `seed`, so the
/// output is bit-reproducible for fixed arguments.
pub fn synth_ar1(
    n: usize,
    c: f64,
    phi: f64,
    y0: f64,
    noise_sigma: f64,
    seed: u64,
) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::param("n", "must be at least 1"));
    }
    if !(noise_sigma.is_finite() && noise_sigma >= 0.0) {
        return Err(Error::param("noise", "must be finite and non-negative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ys = Vec::with_capacity(n);
    let mut prev = y0;
    ys.push(y0);
    for _ in 1..n {
        let z: f64 = StandardNormal.sample(&mut rng);
        prev = c + phi * prev + noise_sigma * z;
        ys.push(prev);
    }
    let xs = (0..n).map(|i| i as f64).collect();
    Dataset::unweighted(1, xs, ys)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_noise_random_walk_is_flat() {
        let ds = synth_ar1(5, 0.0, 1.0, 10.0, 0.0, 3).unwrap();
        assert_eq!(ds.ys(), &[10.0; 5]);
        assert_eq!(ds.coords(), &[0.0, 1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn zero_phi_collapses_to_constant() {
        let ds = synth_ar1(3, 1.0, 0.0, 10.0, 0.0, 3).unwrap();
        assert_eq!(ds.ys(), &[10.0, 1.0, 1.0]);
    }

    #[test]
    fn bit_reproducible() {
        let a = synth_ar1(1000, 0.0, 1.0, 10.0, 1.0, 42).unwrap();
        let b = synth_ar1(1000, 0.0, 1.0, 10.0, 1.0, 42).unwrap();
        let c = synth_ar1(1000, 0.0, 1.0, 10.0, 1.0, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_empty() {
        assert!(synth_ar1(0, 0.0, 1.0, 10.0, 1.0, 0).is_err());
    }

    #[test]
    fn default_configuration_increments_are_centered() {
        let n = 1_000_000;
        let ds = synth_ar1(n, 0.0, 1.0, 10.0, 1.0, 7).unwrap();
        assert_eq!(ds.len(), n);
        let ys = ds.ys();
        let mean = ys.windows(2).map(|w| w[1] - w[0]).sum::<f64>() / (n - 1) as f64;
        // Increments are iid N(0, 1); 3 standard errors.
        assert!(mean.abs() < 3.0 / (n as f64).sqrt(), "{mean}");
    }
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_count, weighted_mean, Columns, Coreset, Method, Params};
use crate::data::Dataset;
use crate::error::Result;
use crate::kernel::sq_dist;

/// Greedy Gonzalez k-center; each class is replaced by its weighted centroid.
pub fn k_center(p: &Dataset, k: usize, seed: u64) -> Result<Coreset> {
    check_count("k", k, p.len())?;
    let n = p.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut next = rng.random_range(0..n);
    let mut nearest = vec![f64::INFINITY; n];
    let mut owner = vec![0usize; n];
    for rank in 0..k {
        let c = p.x(next).to_vec();
        let mut far = 0;
        let mut far_d = f64::NEG_INFINITY;
        for i in 0..n {
            let d = sq_dist(p.x(i), &c);
            if d < nearest[i] {
                nearest[i] = d;
                owner[i] = rank;
            }
            if nearest[i] > far_d {
                far_d = nearest[i];
                far = i;
            }
        }
        next = far;
    }
    let mut classes: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &o) in owner.iter().enumerate() {
        classes[o].push(i);
    }
    let mut out = Columns::with_capacity(p.dim(), k);
    let mut x = vec![0.0; p.dim()];
    for members in classes.iter().filter(|m| !m.is_empty()) {
        let (y, w) = weighted_mean(p, members.iter().copied(), &mut x);
        out.push(&x, y, w);
    }
    Ok(Coreset::build(
        out.finish()?,
        Method::KCenter,
        Params::K(k),
        Some(seed),
        p,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_support::line;

    #[test]
    fn hand_run_example() {
        let p = line(&[(0.0, 1.0), (1.0, 3.0), (10.0, 5.0)]);
        // Find a seed whose first center is the point at 0.
        let seed = (0..64)
            .find(|&s| ChaCha8Rng::seed_from_u64(s).random_range(0..3usize) == 0)
            .unwrap();
        let cs = k_center(&p, 2, seed).unwrap();
        let d = cs.data();
        assert_eq!(d.len(), 2);
        assert_eq!((d.x(0)[0], d.y(0), d.w(0)), (0.5, 2.0, 2.0));
        assert_eq!((d.x(1)[0], d.y(1), d.w(1)), (10.0, 5.0, 1.0));
    }

    #[test]
    fn k_equals_n_and_one() {
        let p = line(&[(0.0, 1.0), (4.0, 3.0), (8.0, 8.0)]);
        let all = k_center(&p, 3, 5).unwrap();
        let mut xs = all.data().coords().to_vec();
        xs.sort_by(f64::total_cmp);
        assert_eq!(xs, vec![0.0, 4.0, 8.0]);
        let one = k_center(&p, 1, 5).unwrap();
        assert_eq!(one.data().x(0), &[4.0]);
        assert_eq!(one.data().y(0), 4.0);
        assert_eq!(one.data().w(0), 3.0);
        assert!(k_center(&p, 4, 0).is_err());
    }

    #[test]
    fn duplicates_preserve_count() {
        let p = line(&[(1.0, 1.0), (1.0, 2.0), (1.0, 3.0), (2.0, 0.0)]);
        let cs = k_center(&p, 3, 1).unwrap();
        assert_eq!(cs.data().total_weight(), 4.0);
    }
}

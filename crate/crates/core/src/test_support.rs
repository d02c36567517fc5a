use crate::data::{Dataset, WeightedPoint};

pub(crate) const SIX_POINTS: [(f64, f64); 6] = [
    (1.0, 100.0),
    (2.0, 40.0),
    (3.0, 0.0),
    (15.0, 50.0),
    (16.0, 50.0),
    (17.0, 50.0),
];

pub(crate) fn six_points() -> Dataset {
    line(&SIX_POINTS)
}

pub(crate) fn line(pts: &[(f64, f64)]) -> Dataset {
    Dataset::new(
        pts.iter()
            .map(|&(x, y)| WeightedPoint::new(vec![x], y))
            .collect(),
    )
    .unwrap()
}

use crate::error::{Error, Result};
use crate::radius::Norm;
use crate::smoothing::{CertifyOutcome, Decision};

/// Certified accuracy as a step function of the radius, for one noise level.
/// The accuracy at a grid radius holds until the next grid radius and the
/// last value holds beyond the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct AccuracyCurve {
    sigma: f64,
    points: Vec<(f64, f64)>,
}

impl AccuracyCurve {
    /// Panics-free constructor; rejects unsorted radii, out-of-range or increasing accuracies.
    pub fn new(sigma: f64, points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Empty("accuracy curve"));
        }
        for w in points.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::invalid("radius grid", "radii must be strictly increasing"));
            }
            if w[1].1 > w[0].1 {
                return Err(Error::invalid("accuracy curve", "accuracy increases with the radius"));
            }
        }
        if points.iter().any(|(r, a)| !r.is_finite() || !(0.0..=1.0).contains(a)) {
            return Err(Error::invalid("accuracy curve", "radii must be finite and accuracies in [0, 1]"));
        }
        Ok(Self { sigma, points })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// Step value at `r`; radii left of the grid take the first accuracy.
    pub fn accuracy_at(&self, r: f64) -> f64 {
        let i = self.points.partition_point(|(g, _)| *g <= r);
        self.points[i.saturating_sub(1)].1
    }
}

/// `0, step, 2*step, ...` up to and including the first point at or beyond `max`.
pub fn radius_grid(max: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(max >= 0.0) || !max.is_finite() {
        return Err(Error::invalid("radius grid", "need a positive step and a finite non-negative maximum"));
    }
    let n = (max / step).ceil() as usize;
    Ok((0..=n).map(|i| i as f64 * step).collect())
}

/// Curve from `(decision, true label, radius)` records: at each grid radius,
/// the share of records classified correctly with radius strictly above it.
pub fn accuracy_curve(records: &[(Decision, usize, f64)], grid: &[f64], sigma: f64) -> Result<AccuracyCurve> {
    if records.is_empty() {
        return Err(Error::Empty("certification outcomes"));
    }
    let points = grid
        .iter()
        .map(|&r| {
            let hits = records
                .iter()
                .filter(|(d, y, radius)| *d == Decision::Class(*y) && *radius > r)
                .count();
            (r, hits as f64 / records.len() as f64)
        })
        .collect();
    AccuracyCurve::new(sigma, points)
}

pub fn certified_accuracy_curve(
    outcomes: &[(CertifyOutcome, usize)],
    grid: &[f64],
    norm: Norm,
    sigma: f64,
) -> Result<AccuracyCurve> {
    let records: Vec<_> = outcomes
        .iter()
        .map(|(o, y)| (o.decision, *y, o.radius(norm).unwrap_or(0.0)))
        .collect();
    accuracy_curve(&records, grid, sigma)
}

/// Area under the pointwise maximum of the curves over `[0, r_max]`,
/// integrated exactly for step functions.
pub fn robust_score(curves: &[AccuracyCurve], r_max: f64) -> Result<f64> {
    if curves.is_empty() {
        return Err(Error::Empty("curves"));
    }
    if !(r_max > 0.0) || !r_max.is_finite() {
        return Err(Error::invalid("r_max", "must be positive and finite"));
    }
    let mut knots: Vec<f64> = curves
        .iter()
        .flat_map(|c| c.points.iter().map(|(r, _)| *r))
        .filter(|r| *r > 0.0 && *r < r_max)
        .collect();
    knots.push(0.0);
    knots.push(r_max);
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    Ok(knots
        .windows(2)
        .map(|w| {
            let top = curves.iter().map(|c| c.accuracy_at(w[0])).fold(0.0, f64::max);
            top * (w[1] - w[0])
        })
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn all_correct_with_radius_two() {
        let recs = vec![(Decision::Class(1), 1, 2.0); 5];
        let c = accuracy_curve(&recs, &[1.0, 3.0], 0.5).unwrap();
        assert_eq!(c.points(), &[(1.0, 1.0), (3.0, 0.0)]);
    }

    #[test]
    fn abstentions_and_mistakes_count_against() {
        let recs = vec![(Decision::Abstain, 0, 0.0); 3];
        let c = accuracy_curve(&recs, &[0.0, 1.0], 1.0).unwrap();
        assert!(c.points().iter().all(|p| p.1 == 0.0));
        assert!(accuracy_curve(&[], &[0.0], 1.0).is_err());
    }

    #[test]
    fn mixed_outcomes_match_enumeration() {
        let recs = vec![
            (Decision::Class(0), 0, 0.4),
            (Decision::Class(1), 0, 3.0),
            (Decision::Abstain, 1, 0.0),
            (Decision::Class(1), 1, 1.5),
        ];
        let grid = [0.0, 0.4, 1.0, 2.0];
        let c = accuracy_curve(&recs, &grid, 1.0).unwrap();
        // brute force: correct and radius > R
        let expect = [0.5, 0.25, 0.25, 0.0];
        for ((_, a), e) in c.points().iter().zip(expect) {
            assert_eq!(*a, e);
        }
    }

    #[test]
    fn curve_rejects_bad_shapes() {
        assert!(AccuracyCurve::new(1.0, vec![(0.0, 0.5), (1.0, 0.6)]).is_err());
        assert!(AccuracyCurve::new(1.0, vec![(1.0, 0.5), (1.0, 0.4)]).is_err());
        assert!(AccuracyCurve::new(1.0, vec![(0.0, 1.5)]).is_err());
        assert!(accuracy_curve(&[(Decision::Abstain, 0, 0.0)], &[1.0, 0.5], 1.0).is_err());
    }

    #[test]
    fn rectangle_area() {
        let c = AccuracyCurve::new(1.0, vec![(0.0, 0.8), (1.0, 0.0)]).unwrap();
        assert!((robust_score(&[c], 2.0).unwrap() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn envelope_of_two_halves() {
        let a = AccuracyCurve::new(0.25, vec![(0.0, 0.9), (1.0, 0.1), (2.0, 0.0)]).unwrap();
        let b = AccuracyCurve::new(1.0, vec![(0.0, 0.5), (1.0, 0.5), (2.0, 0.0)]).unwrap();
        let s = robust_score(&[a, b], 2.0).unwrap();
        assert!((s - (0.9 + 0.5)).abs() < 1e-15);
        let c = AccuracyCurve::new(1.0, vec![(0.0, 0.5)]).unwrap();
        assert!(robust_score(&[c], 0.0).is_err());
        assert!(robust_score(&[], 1.0).is_err());
    }

    #[test]
    fn grid_covers_max() {
        assert_eq!(radius_grid(1.0, 0.5).unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(radius_grid(0.9, 0.5).unwrap(), vec![0.0, 0.5, 1.0]);
        assert!(radius_grid(1.0, 0.0).is_err());
    }

    fn curve_strategy() -> impl Strategy<Value = AccuracyCurve> {
        prop::collection::vec((0.01f64..1.0, 0.0f64..1.0), 1..8).prop_map(|steps| {
            let mut r = 0.0;
            let mut acc: f64 = 1.0;
            let pts = steps
                .into_iter()
                .map(|(dr, shrink)| {
                    let p = (r, acc);
                    r += dr;
                    acc *= shrink;
                    p
                })
                .collect();
            AccuracyCurve::new(0.5, pts).unwrap()
        })
    }

    proptest! {
        #[test]
        fn envelope_dominates_each_curve(curves in prop::collection::vec(curve_strategy(), 1..5), r_max in 0.1f64..6.0) {
            let all = robust_score(&curves, r_max).unwrap();
            for c in &curves {
                prop_assert!(all >= robust_score(std::slice::from_ref(c), r_max).unwrap() - 1e-12);
            }
        }
    }
}

//! Threshold calibration and the uncertainty-informed decision rule.
//!
//! The detection threshold is the nearest-rank `(1 - q)` quantile of the
//! development negatives' scores, and an example is flagged positive iff its
//! score is strictly above it. The uncertainty threshold is calibrated the
//! same way on the development predicted negatives.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack absorbed when turning `(1 - q) * n` into a rank, so that products
/// like `0.95 * 100` land on 95 rather than 96.
const RANK_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionPolicy {
    pub tau: f64,
    pub q: f64,
    pub u_threshold: f64,
    pub theta: f64,
    pub metric: String,
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// 1-based nearest rank of the `level` quantile among `n` values.
fn nearest_rank(level: f64, n: usize) -> usize {
    ((level * n as f64 - RANK_SLACK).ceil().max(0.0) as usize).min(n)
}

/// Detection threshold giving development FPR `q` (to nearest-rank granularity).
pub fn calibrate_tau(negative_scores: &[f64], q: f64) -> Result<f64> {
    if negative_scores.is_empty() {
        return Err(Error::Calibration("no development negatives to calibrate tau".into()));
    }
    if !(0.0..1.0).contains(&q) {
        return Err(Error::Calibration(format!("FPR level q = {q} outside [0, 1)")));
    }
    let s = sorted(negative_scores);
    let n = s.len();
    if q > 0.0 {
        let needed = (1.0 / q - RANK_SLACK).ceil() as usize;
        if n < needed {
            return Err(Error::Calibration(format!("q = {q} needs at least {needed} development negatives, got {n}")));
        }
    }
    let rank = nearest_rank(1.0 - q, n).max(1);
    Ok(s[rank - 1])
}

/// `true` where the score is strictly above `tau`.
pub fn classify(scores: &[f64], tau: f64) -> Vec<bool> {
    scores.iter().map(|s| *s > tau).collect()
}

/// Uncertainty threshold flagging a fraction `theta` of development predicted negatives.
pub fn calibrate_u_threshold(negative_uncertainty: &[f64], theta: f64) -> Result<f64> {
    if negative_uncertainty.is_empty() {
        return Err(Error::Calibration(
            "no development predicted negatives to calibrate the uncertainty threshold".into(),
        ));
    }
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::Calibration(format!("uncertain-negative ratio theta = {theta} outside [0, 1]")));
    }
    let s = sorted(negative_uncertainty);
    match nearest_rank(1.0 - theta, s.len()) {
        // Everything must be flagged: sit strictly below the minimum.
        0 => Ok(s[0] - 1.0),
        rank => Ok(s[rank - 1]),
    }
}

/// Indices predicted negative whose uncertainty exceeds `u_threshold`, ascending.
pub fn select_uncertain_negatives(predicted: &[bool], uncertainty: &[f64], u_threshold: f64) -> Vec<usize> {
    predicted
        .iter()
        .zip(uncertainty)
        .enumerate()
        .filter(|(_, (z, u))| !**z && **u > u_threshold)
        .map(|(i, _)| i)
        .collect()
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::rng::rng_from_seed;

    fn uniform_fixture() -> Vec<f64> {
        (0..100).map(|i| i as f64 / 100.0).collect()
    }

    fn fpr(scores: &[f64], tau: f64) -> f64 {
        classify(scores, tau).iter().filter(|z| **z).count() as f64 / scores.len() as f64
    }

    #[test]
    fn nearest_rank_fixture() {
        let s = uniform_fixture();
        let tau = calibrate_tau(&s, 0.05).unwrap();
        assert_eq!(tau, 0.94);
        assert_eq!(fpr(&s, tau), 0.05);
        let tau0 = calibrate_tau(&s, 0.0).unwrap();
        assert_eq!(tau0, 0.99);
        assert_eq!(fpr(&s, tau0), 0.0);
    }

    #[test]
    fn ties_saturate() {
        let s = vec![0.3; 200];
        for q in [0.0, 0.01, 0.1, 0.5] {
            let tau = calibrate_tau(&s, q).unwrap();
            assert_eq!(tau, 0.3);
            assert_eq!(fpr(&s, tau), 0.0);
        }
    }

    #[test]
    fn calibration_errors() {
        assert!(calibrate_tau(&[], 0.1).is_err());
        assert!(calibrate_tau(&[0.1; 10], 0.01).is_err());
        assert!(calibrate_tau(&[0.1; 100], 0.01).is_ok());
        assert!(calibrate_u_threshold(&[], 0.1).is_err());
    }

    #[test]
    fn strict_inequality() {
        assert_eq!(classify(&[0.5, 0.50001, 0.2], 0.5), vec![false, true, false]);
        assert!(classify(&[0.1, 0.9], 0.0).iter().all(|z| *z));
    }

    #[test]
    fn uncertainty_threshold_fixture() {
        let u: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
        let t = calibrate_u_threshold(&u, 0.2).unwrap();
        assert_eq!(t, 0.8);
        let predicted = vec![false; 10];
        assert_eq!(select_uncertain_negatives(&predicted, &u, t), vec![8, 9]);

        let t0 = calibrate_u_threshold(&u, 0.0).unwrap();
        assert_eq!(t0, 1.0);
        assert!(select_uncertain_negatives(&predicted, &u, t0).is_empty());

        let t1 = calibrate_u_threshold(&u, 1.0).unwrap();
        assert!(t1 < 0.1);
        assert_eq!(select_uncertain_negatives(&predicted, &u, t1).len(), 10);
    }

    #[test]
    fn only_predicted_negatives_are_selected() {
        assert!(select_uncertain_negatives(&[true, true], &[0.9, 0.9], 0.0).is_empty());
        assert_eq!(select_uncertain_negatives(&[true, false], &[0.9, 0.9], 0.0), vec![1]);
    }

    #[test]
    fn iid_test_fraction_tracks_theta() {
        let mut rng = rng_from_seed(8);
        let dev: Vec<f64> = (0..2000).map(|_| rng.random::<f64>()).collect();
        let test: Vec<f64> = (0..2000).map(|_| rng.random::<f64>()).collect();
        for theta in [0.05, 0.1, 0.2] {
            let t = calibrate_u_threshold(&dev, theta).unwrap();
            let frac = select_uncertain_negatives(&vec![false; 2000], &test, t).len() as f64 / 2000.0;
            assert!((frac - theta).abs() <= 0.05, "theta {theta}: {frac}");
        }
    }

    proptest! {
        #[test]
        fn dev_fpr_within_one_rank(scores in prop::collection::vec(0.0f64..1.0, 100..400), q in 0.0f64..0.5) {
            prop_assume!(q == 0.0 || scores.len() as f64 >= 1.0 / q);
            let tau = calibrate_tau(&scores, q).unwrap();
            let f = fpr(&scores, tau);
            prop_assert!(f <= q + 1e-12);
            // Continuous draws have no ties, so the shortfall is under one rank.
            prop_assert!(q - f < 1.0 / scores.len() as f64 + 1e-12);
        }

        #[test]
        fn tau_weakly_decreasing_in_q(scores in prop::collection::vec(0.0f64..1.0, 100..300), a in 0.0f64..0.5, b in 0.0f64..0.5) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assume!(lo == 0.0 || scores.len() as f64 >= 1.0 / lo);
            prop_assert!(calibrate_tau(&scores, hi).unwrap() <= calibrate_tau(&scores, lo).unwrap());
        }

        #[test]
        fn selection_nested_in_theta(u in prop::collection::vec(0.0f64..1.0, 1..200), a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let pred = vec![false; u.len()];
            let small = select_uncertain_negatives(&pred, &u, calibrate_u_threshold(&u, lo).unwrap());
            let large = select_uncertain_negatives(&pred, &u, calibrate_u_threshold(&u, hi).unwrap());
            prop_assert!(small.iter().all(|i| large.contains(i)));
        }

        #[test]
        fn lowering_tau_never_unflags(scores in prop::collection::vec(0.0f64..1.0, 1..50), t1 in 0.0f64..1.0, t2 in 0.0f64..1.0) {
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            let high = classify(&scores, hi);
            let low = classify(&scores, lo);
            prop_assert!(high.iter().zip(&low).all(|(h, l)| !h || *l));
        }
    }
}

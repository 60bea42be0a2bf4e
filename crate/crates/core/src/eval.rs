//! Detection and triage metrics.
//!
//! Rates over an empty population are undefined; they surface as errors or
//! `None`, never as zero.

use serde::{Deserialize, Serialize};

use crate::data::{LabelingPolicy, MAX_SEVERITY};
use crate::error::{Error, Result};

/// Fraction of positives (within `stratum`) predicted negative.
pub fn fnr(predicted: &[bool], labels: &[bool], stratum: impl Fn(usize) -> bool) -> Result<f64> {
    let (mut pos, mut missed) = (0usize, 0usize);
    for i in (0..labels.len()).filter(|&i| labels[i] && stratum(i)) {
        pos += 1;
        missed += usize::from(!predicted[i]);
    }
    if pos == 0 {
        return Err(Error::UndefinedRate("FNR over a stratum with no positives".into()));
    }
    Ok(missed as f64 / pos as f64)
}

/// Fraction of negatives predicted positive.
pub fn fpr(predicted: &[bool], labels: &[bool]) -> Result<f64> {
    let (mut neg, mut flagged) = (0usize, 0usize);
    for (p, z) in predicted.iter().zip(labels) {
        if !z {
            neg += 1;
            flagged += usize::from(*p);
        }
    }
    if neg == 0 {
        return Err(Error::UndefinedRate("FPR with no negatives".into()));
    }
    Ok(flagged as f64 / neg as f64)
}

/// Share of the uncertain negatives that are actual positives; `None` when
/// nothing was flagged.
pub fn fn_precision(uncertain: &[usize], labels: &[bool]) -> Option<f64> {
    if uncertain.is_empty() {
        return None;
    }
    let hits = uncertain.iter().filter(|&&i| labels[i]).count();
    Some(hits as f64 / uncertain.len() as f64)
}

pub fn total_false_negatives(predicted: &[bool], labels: &[bool]) -> usize {
    predicted.iter().zip(labels).filter(|(p, z)| !**p && **z).count()
}

/// False negatives left once every flagged example has been reviewed.
pub fn remaining_false_negatives(predicted: &[bool], labels: &[bool], uncertain: &[usize]) -> usize {
    let mut flagged = vec![false; labels.len()];
    for &i in uncertain {
        flagged[i] = true;
    }
    (0..labels.len()).filter(|&i| !predicted[i] && labels[i] && !flagged[i]).count()
}

/// Area under the ROC curve via the rank-sum statistic; tied scores count half.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let n_pos = labels.iter().filter(|z| **z).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedRate("AUC needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // Average 1-based rank of the tie block i..=j.
        let avg = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += avg * order[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Test-set metrics for one calibrated policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub fpr: Option<f64>,
    pub fnr_incipient: Option<f64>,
    pub fnr_non_incipient: Option<f64>,
    pub fn_precision: Option<f64>,
    pub total_fn: usize,
    pub uncertain_negative_count: usize,
    /// Flagged examples that are false negatives.
    pub uncertain_fn: usize,
    /// False negatives not flagged: `total_fn - uncertain_fn`.
    pub certain_fn: usize,
    /// Per severity level: fraction predicted positive.
    pub detect_rate: [Option<f64>; 5],
    pub count: [usize; 5],
}

impl MetricsReport {
    pub fn evaluate(
        severities: &[u8],
        labels: &[bool],
        predicted: &[bool],
        uncertain: &[usize],
        policy: LabelingPolicy,
    ) -> Self {
        let in_levels = |levels: &'static [u8]| move |i: usize| levels.contains(&severities[i]);
        let total_fn = total_false_negatives(predicted, labels);
        let uncertain_fn = uncertain.iter().filter(|&&i| !predicted[i] && labels[i]).count();

        let mut detect_rate = [None; 5];
        let mut count = [0; 5];
        for sl in 0..=MAX_SEVERITY {
            let members: Vec<usize> = (0..severities.len()).filter(|&i| severities[i] == sl).collect();
            count[usize::from(sl)] = members.len();
            if !members.is_empty() {
                let hits = members.iter().filter(|&&i| predicted[i]).count();
                detect_rate[usize::from(sl)] = Some(hits as f64 / members.len() as f64);
            }
        }

        MetricsReport {
            fpr: fpr(predicted, labels).ok(),
            fnr_incipient: fnr(predicted, labels, in_levels(policy.incipient_severities())).ok(),
            fnr_non_incipient: fnr(predicted, labels, in_levels(policy.non_incipient_severities())).ok(),
            fn_precision: fn_precision(uncertain, labels),
            total_fn,
            uncertain_negative_count: uncertain.len(),
            uncertain_fn,
            certain_fn: remaining_false_negatives(predicted, labels, uncertain),
            detect_rate,
            count,
        }
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn all(_: usize) -> bool {
        true
    }

    #[test]
    fn fnr_cases() {
        let labels = vec![true; 10];
        assert_eq!(fnr(&labels, &labels, all).unwrap(), 0.0);
        assert_eq!(fnr(&[false; 10], &labels, all).unwrap(), 1.0);
        let mut pred = vec![true; 10];
        pred[..3].iter_mut().for_each(|p| *p = false);
        assert!((fnr(&pred, &labels, all).unwrap() - 0.3).abs() < 1e-15);
        assert!(matches!(fnr(&[false], &[false], all), Err(Error::UndefinedRate(_))));
    }

    #[test]
    fn fpr_cases() {
        let labels = vec![false; 10];
        assert_eq!(fpr(&labels, &labels).unwrap(), 0.0);
        assert_eq!(fpr(&[true; 10], &labels).unwrap(), 1.0);
        let mut pred = vec![false; 10];
        pred[..3].iter_mut().for_each(|p| *p = true);
        assert!((fpr(&pred, &labels).unwrap() - 0.3).abs() < 1e-15);
        assert!(fpr(&[true], &[true]).is_err());
    }

    #[test]
    fn fn_precision_cases() {
        let labels = [true, true, true, false, false];
        assert!((fn_precision(&[0, 1, 2, 3, 4], &labels).unwrap() - 0.6).abs() < 1e-15);
        assert_eq!(fn_precision(&[3, 4], &labels), Some(0.0));
        assert_eq!(fn_precision(&[0, 1], &labels), Some(1.0));
        assert_eq!(fn_precision(&[], &labels), None);
    }

    #[test]
    fn remaining_cases() {
        let labels = vec![true; 10];
        let pred = vec![false; 10];
        assert_eq!(remaining_false_negatives(&pred, &labels, &[0, 1, 2, 3, 4, 5, 6]), 3);
        assert_eq!(remaining_false_negatives(&pred, &labels, &[]), 10);
        assert_eq!(remaining_false_negatives(&pred, &labels, &(0..10).collect::<Vec<_>>()), 0);
    }

    #[test]
    fn auc_cases() {
        assert_eq!(roc_auc(&[0.1, 0.2, 0.8, 0.9], &[false, false, true, true]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.5; 6], &[false, true, false, true, true, false]).unwrap(), 0.5);
        assert!(roc_auc(&[0.1], &[true]).is_err());
    }

    #[test]
    fn auc_matches_pairwise_count() {
        let scores = [0.1, 0.4, 0.35, 0.8];
        let labels = [false, false, true, true];
        // Brute force over positive-negative pairs.
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for p in (0..4).filter(|&i| labels[i]) {
            for n in (0..4).filter(|&i| !labels[i]) {
                pairs += 1.0;
                wins += if scores[p] > scores[n] {
                    1.0
                } else if scores[p] == scores[n] {
                    0.5
                } else {
                    0.0
                };
            }
        }
        assert_eq!(wins / pairs, 0.75);
        assert_eq!(roc_auc(&scores, &labels).unwrap(), 0.75);
    }

    #[test]
    fn report_uses_policy_strata() {
        let severities = [0, 1, 2, 3, 4, 1];
        let policy = LabelingPolicy::Dr;
        let labels: Vec<bool> = severities.iter().map(|s| policy.is_positive(*s)).collect();
        let predicted = [false, false, false, true, true, true];
        let r = MetricsReport::evaluate(&severities, &labels, &predicted, &[1, 2], policy);
        assert_eq!(r.fnr_incipient, Some(1.0));
        assert_eq!(r.fnr_non_incipient, Some(0.0));
        // SL1 is negative under this policy, so predicting one of them positive is a false positive.
        assert_eq!(r.fpr, Some(1.0 / 3.0));
        assert_eq!((r.total_fn, r.uncertain_fn, r.certain_fn), (1, 1, 0));
        assert_eq!(r.fn_precision, Some(0.5));
        assert_eq!(r.count, [1, 2, 1, 1, 1]);
    }

    proptest! {
        #[test]
        fn triage_accounting(
            cases in prop::collection::vec((any::<bool>(), any::<bool>(), any::<bool>()), 1..200)
        ) {
            let predicted: Vec<bool> = cases.iter().map(|c| c.0).collect();
            let labels: Vec<bool> = cases.iter().map(|c| c.1).collect();
            let uncertain: Vec<usize> = (0..cases.len()).filter(|&i| cases[i].2 && !predicted[i]).collect();
            let total = total_false_negatives(&predicted, &labels);
            let remaining = remaining_false_negatives(&predicted, &labels, &uncertain);
            let caught = fn_precision(&uncertain, &labels).map_or(0.0, |p| p * uncertain.len() as f64);
            prop_assert!((caught + remaining as f64 - total as f64).abs() < 1e-9);
        }

        #[test]
        fn auc_invariant_under_monotone_transform(
            pts in prop::collection::vec((0.0f64..1.0, any::<bool>()), 2..100)
        ) {
            let scores: Vec<f64> = pts.iter().map(|p| p.0).collect();
            let labels: Vec<bool> = pts.iter().map(|p| p.1).collect();
            prop_assume!(labels.iter().any(|z| *z) && labels.iter().any(|z| !*z));
            let a = roc_auc(&scores, &labels).unwrap();
            let warped: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() - 2.0).collect();
            prop_assert!((a - roc_auc(&warped, &labels).unwrap()).abs() < 1e-12);
        }
    }
}

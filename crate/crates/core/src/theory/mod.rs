//! The Beta output model for ensemble members.
//!
//! Member outputs for one input are modelled as `Beta(alpha, beta)` draws
//! with `alpha + beta` shared across inputs. Under that model the expected
//! gap between a less and a more ambiguous input is larger for the ensemble
//! mean than for the member variance, and Monte Carlo estimates of the
//! mis-ranking probability check how each statistic behaves for finite `K`.

mod grid;
mod misrank;
mod sampling;

pub use grid::{verify_theorem_grid, GridSpec, TheoryReport, TheoryRow, TheorySummary};
pub use misrank::{misrank_pair, misrank_probability, MisrankEstimate, Statistic};
pub use sampling::{sample_beta, sample_gamma, sample_row};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance when checking that two pairs share `alpha + beta`.
const SHARED_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaParams {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
            return Err(Error::Config(format!("Beta({alpha}, {beta}) needs finite positive parameters")));
        }
        Ok(BetaParams { alpha, beta })
    }

    pub fn concentration(&self) -> f64 {
        self.alpha + self.beta
    }

    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        mu * (1.0 - mu) / (1.0 + self.concentration())
    }

    /// `(mean, variance)` in closed form.
    pub fn moments(&self) -> (f64, f64) {
        (self.mean(), self.variance())
    }
}

/// A less severe input (`left`) and a more severe one (`right`) sharing `alpha + beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaPair {
    pub left: BetaParams,
    pub right: BetaParams,
}

impl BetaPair {
    pub fn new(left: BetaParams, right: BetaParams) -> Result<Self> {
        let (a, b) = (left.concentration(), right.concentration());
        if (a - b).abs() > SHARED_SUM_TOL * a.max(b) {
            return Err(Error::Config(format!("alpha + beta differs across the pair: {a} vs {b}")));
        }
        Ok(BetaPair { left, right })
    }

    /// Pair with shared concentration `c` and the given `alpha`s.
    pub fn with_concentration(c: f64, alpha_left: f64, alpha_right: f64) -> Result<Self> {
        BetaPair::new(BetaParams::new(alpha_left, c - alpha_left)?, BetaParams::new(alpha_right, c - alpha_right)?)
    }

    pub fn concentration(&self) -> f64 {
        self.left.concentration()
    }

    /// `alpha_left < alpha_right <= beta_right`.
    pub fn in_theorem_regime(&self) -> bool {
        self.left.alpha < self.right.alpha && self.right.alpha <= self.right.beta
    }

    pub fn swapped(&self) -> BetaPair {
        BetaPair { left: self.right, right: self.left }
    }

    /// Expected gap of the ensemble mean: `mu_right - mu_left`.
    pub fn delta_mean(&self) -> f64 {
        self.right.mean() - self.left.mean()
    }

    /// Expected gap of the member sample variance.
    pub fn delta_var(&self) -> f64 {
        let (mi, mj) = (self.left.mean(), self.right.mean());
        (mj * (1.0 - mj) - mi * (1.0 - mi)) / (1.0 + self.concentration())
    }
}

/// Method-of-moments Beta fit.
pub fn fit_beta_mom(samples: &[f64]) -> Result<BetaParams> {
    if samples.len() < 2 {
        return Err(Error::Fit(format!("need at least 2 samples, got {}", samples.len())));
    }
    if samples.iter().all(|x| *x == samples[0]) {
        return Err(Error::Fit("samples have zero variance".into()));
    }
    let n = samples.len() as f64;
    let m = samples.iter().sum::<f64>() / n;
    let v = samples.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    fit_from_moments(m, v)
}

/// Invert `(mean, variance)` into Beta parameters.
pub fn fit_from_moments(mean: f64, variance: f64) -> Result<BetaParams> {
    if !(mean > 0.0 && mean < 1.0) {
        return Err(Error::Fit(format!("sample mean {mean} outside (0, 1)")));
    }
    if !(variance > 0.0) {
        return Err(Error::Fit("samples have zero variance".into()));
    }
    let t = mean * (1.0 - mean) / variance - 1.0;
    if !(t > 0.0) {
        return Err(Error::Fit(format!("variance {variance} too large for mean {mean}")));
    }
    BetaParams::new(mean * t, (1.0 - mean) * t).map_err(|e| Error::Fit(e.to_string()))
}

/// Counts of member predictions over equal-width bins of `[0, 1]` plus a
/// Beta fit, mirroring the per-example prediction histograms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionHistogram {
    pub counts: Vec<u64>,
    pub fit: Option<BetaParams>,
}

impl PredictionHistogram {
    pub fn new(predictions: &[f64], bins: usize) -> Self {
        let bins = bins.max(1);
        let mut counts = vec![0u64; bins];
        for p in predictions {
            let b = ((p.clamp(0.0, 1.0) * bins as f64) as usize).min(bins - 1);
            counts[b] += 1;
        }
        PredictionHistogram { counts, fit: fit_beta_mom(predictions).ok() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_moments() {
        let (m, v) = BetaParams::new(1.0, 1.0).unwrap().moments();
        assert_eq!(m, 0.5);
        assert!((v - 1.0 / 12.0).abs() < 1e-15);
        let (m, v) = BetaParams::new(2.0, 8.0).unwrap().moments();
        assert!((m - 0.2).abs() < 1e-15);
        assert!((v - 0.16 / 11.0).abs() < 1e-15);
        for a in [0.3, 1.0, 7.5] {
            assert_eq!(BetaParams::new(a, a).unwrap().mean(), 0.5);
        }
        assert!(BetaParams::new(0.0, 1.0).is_err());
    }

    #[test]
    fn pair_deltas() {
        let pair = BetaPair::with_concentration(10.0, 2.0, 4.0).unwrap();
        assert!(pair.in_theorem_regime());
        assert!((pair.delta_mean() - 0.2).abs() < 1e-15);
        assert!((pair.delta_var() - 0.08 / 11.0).abs() < 1e-15);
        assert!(0.0 < pair.delta_var() && pair.delta_var() < pair.delta_mean());

        let same = BetaPair::with_concentration(10.0, 3.0, 3.0).unwrap();
        assert_eq!((same.delta_mean(), same.delta_var()), (0.0, 0.0));

        let s = pair.swapped();
        assert_eq!(s.delta_mean(), -pair.delta_mean());
        assert_eq!(s.delta_var(), -pair.delta_var());

        let mismatched = BetaPair::new(BetaParams::new(2.0, 8.0).unwrap(), BetaParams::new(4.0, 7.0).unwrap());
        assert!(mismatched.is_err());
    }

    #[test]
    fn delta_ordering_over_grid() {
        for c in [4.0, 10.0, 20.0] {
            let alphas: Vec<f64> = (1..).map(|i| i as f64 * 0.5).take_while(|a| *a <= c / 2.0).collect();
            for (i, ai) in alphas.iter().enumerate() {
                for aj in &alphas[i + 1..] {
                    let pair = BetaPair::with_concentration(c, *ai, *aj).unwrap();
                    assert!(pair.in_theorem_regime());
                    assert!(pair.delta_mean() > pair.delta_var() && pair.delta_var() > 0.0, "c={c} {ai} {aj}");
                }
            }
        }
    }

    #[test]
    fn moment_inversion() {
        let p = fit_from_moments(0.5, 0.05).unwrap();
        assert!((p.alpha - 2.0).abs() < 1e-12 && (p.beta - 2.0).abs() < 1e-12);
        assert!(matches!(fit_beta_mom(&[0.3; 10]), Err(Error::Fit(_))));
        assert!(fit_beta_mom(&[0.3]).is_err());
        assert!(fit_beta_mom(&[0.0, 1.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn histogram_bins() {
        let h = PredictionHistogram::new(&[0.0, 0.05, 0.5, 0.99, 1.0], 10);
        assert_eq!(h.counts.iter().sum::<u64>(), 5);
        assert_eq!(h.counts[0], 2);
        assert_eq!(h.counts[9], 2);
        assert!(h.fit.is_some());
    }
}

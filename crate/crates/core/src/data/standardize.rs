use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};

/// Per-feature z-scoring with statistics taken from the development set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Sample standard deviation (n - 1 denominator).
    pub std: Vec<f64>,
    /// Features with zero spread on dev; these pass through untouched.
    pub constant: Vec<bool>,
}

impl Standardizer {
    pub fn fit(dev: &Dataset) -> Result<Self> {
        if dev.is_empty() {
            return Err(Error::Config("cannot fit a standardizer on an empty development set".into()));
        }
        let n = dev.len() as f64;
        let mut mean = vec![0.0; dev.dim];
        for e in &dev.examples {
            for (m, x) in mean.iter_mut().zip(&e.features) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);

        let mut ss = vec![0.0; dev.dim];
        for e in &dev.examples {
            for ((s, x), m) in ss.iter_mut().zip(&e.features).zip(&mean) {
                *s += (x - m) * (x - m);
            }
        }
        let std: Vec<f64> = ss.iter().map(|s| if dev.len() > 1 { (s / (n - 1.0)).sqrt() } else { 0.0 }).collect();
        let constant: Vec<bool> = std.iter().map(|s| !(*s > 0.0)).collect();
        for (i, _) in constant.iter().enumerate().filter(|(_, c)| **c) {
            log::warn!("feature f{i} is constant on the development set; leaving it unscaled");
        }
        Ok(Standardizer { mean, std, constant })
    }

    pub fn has_warnings(&self) -> bool {
        self.constant.iter().any(|c| *c)
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(i, v)| if self.constant[i] { *v } else { (v - self.mean[i]) / self.std[i] })
            .collect()
    }

    pub fn transform(&self, data: &Dataset) -> Dataset {
        let mut out = data.clone();
        for e in &mut out.examples {
            e.features = self.apply(&e.features);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate, GeneratorConfig, LabeledExample, LabelingPolicy};

    fn column_stats(data: &Dataset, j: usize) -> (f64, f64) {
        let n = data.len() as f64;
        let m = data.examples.iter().map(|e| e.features[j]).sum::<f64>() / n;
        let v = data.examples.iter().map(|e| (e.features[j] - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, v.sqrt())
    }

    #[test]
    fn dev_becomes_zero_mean_unit_std() {
        let config = GeneratorConfig { normal_count: 300, cell_count: 20, ..Default::default() };
        let dev = generate(&config, LabelingPolicy::Chiller).unwrap();
        let s = Standardizer::fit(&dev).unwrap();
        let z = s.transform(&dev);
        for j in 0..dev.dim {
            let (m, sd) = column_stats(&z, j);
            assert!(m.abs() < 1e-9 && (sd - 1.0).abs() < 1e-9, "feature {j}: {m} {sd}");
        }
        assert!(!s.has_warnings());
    }

    #[test]
    fn constant_feature_passes_through() {
        let mut dev = Dataset::new(2, LabelingPolicy::Chiller);
        for i in 0..5 {
            dev.examples.push(LabeledExample { features: vec![i as f64, 3.0], z: false, severity: 0, fault_id: 0 });
        }
        let s = Standardizer::fit(&dev).unwrap();
        assert!(s.has_warnings());
        assert_eq!(s.apply(&[2.0, 3.0]), vec![0.0, 3.0]);
    }

    #[test]
    fn shifted_test_is_not_centred() {
        let config = GeneratorConfig { normal_count: 300, cell_count: 20, ..Default::default() };
        let dev = generate(&config, LabelingPolicy::Chiller).unwrap();
        let mut test = generate(&GeneratorConfig { seed: 99, ..config }, LabelingPolicy::Chiller).unwrap();
        for e in &mut test.examples {
            e.features.iter_mut().for_each(|v| *v += 1.5);
        }
        let s = Standardizer::fit(&dev).unwrap();
        let (m, _) = column_stats(&s.transform(&test), 0);
        assert!(m > 0.5, "{m}");
    }

    #[test]
    fn empty_dev_is_rejected() {
        assert!(Standardizer::fit(&Dataset::new(3, LabelingPolicy::Chiller)).is_err());
    }
}

use rand::seq::index::sample;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Dataset, LabeledExample, LabelingPolicy, MAX_SEVERITY};
use crate::error::{Error, Result};
use crate::rng::derive_rng;

/// Parameters of the synthetic severity-spectrum generator.
///
/// Normal data form an isotropic Gaussian at the origin. Each fault type has
/// its own random unit direction; severity level `l` of that fault sits at
/// `offsets[l - 1]` along it. With `direction_support = s > 0` a direction
/// only involves `s` randomly chosen features, like a fault that disturbs a
/// few sensors; `0` spreads it over all features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub dim: usize,
    pub n_fault_types: usize,
    pub offsets: [f64; 4],
    pub cluster_std: f64,
    /// Number of SL0 samples.
    pub normal_count: usize,
    /// Number of samples per (severity, fault) cell.
    pub cell_count: usize,
    /// Features each fault direction touches; `0` means all of them.
    pub direction_support: usize,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            dim: 16,
            n_fault_types: 6,
            offsets: [1.0, 2.0, 3.0, 4.0],
            cluster_std: 0.6,
            normal_count: 16_000,
            cell_count: 800,
            direction_support: 2,
            seed: 2020,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Config("generator dim must be positive".into()));
        }
        if self.n_fault_types == 0 {
            return Err(Error::Config("generator needs at least one fault type".into()));
        }
        if self.direction_support > self.dim {
            return Err(Error::Config(format!(
                "direction_support {} exceeds dim {}",
                self.direction_support, self.dim
            )));
        }
        if self.normal_count == 0 || self.cell_count == 0 {
            return Err(Error::Config("generator sample counts must be positive".into()));
        }
        if !(self.cluster_std >= 0.0 && self.cluster_std.is_finite()) {
            return Err(Error::Config(format!("cluster_std {} is not a finite non-negative value", self.cluster_std)));
        }
        if !(self.offsets[0] > 0.0) || self.offsets.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config(format!(
                "severity offsets {:?} must be positive and strictly increasing",
                self.offsets
            )));
        }
        Ok(())
    }

    /// Unit direction of fault `fault_id` (1-based).
    pub fn fault_direction(&self, fault_id: u32) -> Vec<f64> {
        let mut rng = derive_rng(self.seed, "fault-direction", u64::from(fault_id));
        let support: Vec<usize> = match self.direction_support {
            0 => (0..self.dim).collect(),
            s => sample(&mut rng, self.dim, s).into_vec(),
        };
        loop {
            let mut v = vec![0.0; self.dim];
            for &j in &support {
                v[j] = rng.sample(StandardNormal);
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 {
                return v.into_iter().map(|x| x / norm).collect();
            }
        }
    }
}

fn gaussian_cell(center: &[f64], std: f64, count: usize, rng: &mut crate::rng::Rng) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| {
            center
                .iter()
                .map(|c| {
                    let z: f64 = rng.sample(StandardNormal);
                    c + std * z
                })
                .collect()
        })
        .collect()
}

/// Draw a synthetic dataset. Output order: SL0 first, then faults in id
/// order with severities ascending.
pub fn generate(config: &GeneratorConfig, policy: LabelingPolicy) -> Result<Dataset> {
    config.validate()?;
    let mut data = Dataset::new(config.dim, policy);

    let origin = vec![0.0; config.dim];
    let mut rng = derive_rng(config.seed, "cell", 0);
    for features in gaussian_cell(&origin, config.cluster_std, config.normal_count, &mut rng) {
        data.examples.push(LabeledExample { features, z: policy.is_positive(0), severity: 0, fault_id: 0 });
    }

    for fault in 1..=config.n_fault_types as u32 {
        let direction = config.fault_direction(fault);
        for severity in 1..=MAX_SEVERITY {
            let offset = config.offsets[usize::from(severity) - 1];
            let center: Vec<f64> = direction.iter().map(|u| offset * u).collect();
            let cell = u64::from(fault) * 8 + u64::from(severity);
            let mut rng = derive_rng(config.seed, "cell", cell);
            for features in gaussian_cell(&center, config.cluster_std, config.cell_count, &mut rng) {
                data.examples.push(LabeledExample {
                    features,
                    z: policy.is_positive(severity),
                    severity,
                    fault_id: fault,
                });
            }
        }
    }
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn norm(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    #[test]
    fn zero_variance_points_sit_on_their_offset() {
        let config = GeneratorConfig { cluster_std: 0.0, normal_count: 5, cell_count: 3, ..Default::default() };
        let data = generate(&config, LabelingPolicy::Chiller).unwrap();
        for e in &data.examples {
            let expected = if e.severity == 0 { 0.0 } else { config.offsets[usize::from(e.severity) - 1] };
            assert!((norm(&e.features) - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn same_seed_is_identical() {
        let config = GeneratorConfig { normal_count: 50, cell_count: 10, ..Default::default() };
        let a = generate(&config, LabelingPolicy::Chiller).unwrap();
        let b = generate(&config, LabelingPolicy::Chiller).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());

        let c = generate(&GeneratorConfig { seed: config.seed + 1, ..config }, LabelingPolicy::Chiller).unwrap();
        assert_ne!(a.examples[0].features, c.examples[0].features);
    }

    #[test]
    fn mean_distance_grows_with_severity() {
        let config = GeneratorConfig { cluster_std: 0.1, normal_count: 1000, cell_count: 1000, ..Default::default() };
        let data = generate(&config, LabelingPolicy::Chiller).unwrap();
        let mut means = [0.0; 5];
        for (sl, mean) in means.iter_mut().enumerate() {
            let d: Vec<f64> =
                data.examples.iter().filter(|e| usize::from(e.severity) == sl).map(|e| norm(&e.features)).collect();
            *mean = d.iter().sum::<f64>() / d.len() as f64;
        }
        assert!(means.windows(2).all(|w| w[1] > w[0]), "{means:?}");
    }

    #[test]
    fn counts_and_labels() {
        let config = GeneratorConfig { normal_count: 7, cell_count: 3, n_fault_types: 2, ..Default::default() };
        let data = generate(&config, LabelingPolicy::Dr).unwrap();
        assert_eq!(data.len(), 7 + 2 * 4 * 3);
        for e in &data.examples {
            assert_eq!(e.severity == 0, e.fault_id == 0);
            assert_eq!(e.z, e.severity >= 2);
        }
    }

    #[test]
    fn direction_support_limits_nonzero_features() {
        for support in [1, 2, 5] {
            let config = GeneratorConfig { direction_support: support, ..Default::default() };
            for f in 1..=6 {
                let u = config.fault_direction(f);
                assert_eq!(u.iter().filter(|x| **x != 0.0).count(), support);
                assert!((norm(&u) - 1.0).abs() < 1e-12);
            }
        }
        let dense = GeneratorConfig { direction_support: 0, ..Default::default() };
        assert!(dense.fault_direction(1).iter().all(|x| *x != 0.0));
        let too_wide = GeneratorConfig { direction_support: 17, ..Default::default() };
        assert!(too_wide.validate().is_err());
    }

    #[test]
    fn rejects_invalid_configs() {
        let bad_offsets = GeneratorConfig { offsets: [1.0, 3.0, 2.0, 4.0], ..Default::default() };
        assert!(matches!(generate(&bad_offsets, LabelingPolicy::Chiller), Err(Error::Config(_))));
        let zero_count = GeneratorConfig { cell_count: 0, ..Default::default() };
        assert!(matches!(generate(&zero_count, LabelingPolicy::Chiller), Err(Error::Config(_))));
    }
}

use rand::Rng as _;
use rand_distr::StandardNormal;

use super::BetaParams;
use crate::rng::{rng_from_seed, Rng};

fn open_unit(rng: &mut Rng) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// `Gamma(shape, 1)` by Marsaglia and Tsang's squeeze-rejection method;
/// shapes below 1 are boosted through `Gamma(shape + 1) * U^(1 / shape)`.
pub fn sample_gamma(shape: f64, rng: &mut Rng) -> f64 {
    if shape < 1.0 {
        let g = sample_gamma(shape + 1.0, rng);
        return g * open_unit(rng).powf(1.0 / shape);
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x: f64 = rng.sample(StandardNormal);
        let v = 1.0 + c * x;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u = open_unit(rng);
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 || u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return d * v;
        }
    }
}

/// `Beta(alpha, beta)` as `X / (X + Y)` with independent Gamma draws.
pub fn sample_beta(params: BetaParams, rng: &mut Rng) -> f64 {
    loop {
        let x = sample_gamma(params.alpha, rng);
        let y = sample_gamma(params.beta, rng);
        let s = x + y;
        // Both draws can underflow for tiny shapes; redraw.
        if s > 0.0 {
            return x / s;
        }
    }
}

/// `k` independent draws, reproducible from `seed`.
pub fn sample_row(params: BetaParams, k: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    (0..k).map(|_| sample_beta(params, &mut rng)).collect()
}

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::Samples;
use crate::error::{Error, Result};
use crate::rng::derive_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetParams {
    pub hidden_width: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Multiplier on the He-style initial weight spread.
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for NetParams {
    fn default() -> Self {
        NetParams { hidden_width: 16, learning_rate: 0.1, epochs: 40, batch_size: 32, init_scale: 1.0, seed: 0 }
    }
}

impl NetParams {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_width == 0 || self.batch_size == 0 {
            return Err(Error::Config("net hidden_width and batch_size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("net learning_rate {} must be positive", self.learning_rate)));
        }
        if !(self.init_scale > 0.0 && self.init_scale.is_finite()) {
            return Err(Error::Config(format!("net init_scale {} must be positive", self.init_scale)));
        }
        Ok(())
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy of a logit, computed without forming the probability.
fn bce_with_logit(z: f64, y: bool) -> f64 {
    let softplus = z.max(0.0) + (-z.abs()).exp().ln_1p();
    if y {
        softplus - z
    } else {
        softplus
    }
}

/// Feed-forward network: rectifier hidden layer, sigmoid output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub dim: usize,
    pub hidden: usize,
    /// Hidden weights, row-major `hidden x dim`.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl Mlp {
    fn init(dim: usize, params: &NetParams) -> Self {
        let mut rng = derive_rng(params.seed, "net-init", 0);
        let s1 = params.init_scale * (2.0 / dim as f64).sqrt();
        let s2 = params.init_scale * (1.0 / params.hidden_width as f64).sqrt();
        let mut draw = |s: f64| -> f64 { s * rng.sample::<f64, _>(StandardNormal) };
        let w1 = (0..dim * params.hidden_width).map(|_| draw(s1)).collect();
        let w2 = (0..params.hidden_width).map(|_| draw(s2)).collect();
        Mlp { dim, hidden: params.hidden_width, w1, b1: vec![0.0; params.hidden_width], w2, b2: 0.0 }
    }

    fn hidden_pre(&self, x: &[f64], out: &mut [f64]) {
        for (j, h) in out.iter_mut().enumerate() {
            let row = &self.w1[j * self.dim..(j + 1) * self.dim];
            *h = self.b1[j] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
    }

    fn logit_with(&self, x: &[f64], pre: &mut [f64]) -> f64 {
        self.hidden_pre(x, pre);
        self.b2 + pre.iter().zip(&self.w2).map(|(h, w)| h.max(0.0) * w).sum::<f64>()
    }

    pub fn logit(&self, x: &[f64]) -> f64 {
        let mut pre = vec![0.0; self.hidden];
        self.logit_with(x, &mut pre)
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        sigmoid(self.logit(x))
    }

    pub(crate) fn n_params(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + 1
    }

    /// Mean cross-entropy over `batch` and its gradient, laid out as
    /// `[w1, b1, w2, b2]`.
    pub(crate) fn loss_and_gradient(&self, rows: &[&[f64]], labels: &[bool], batch: &[usize]) -> (f64, Vec<f64>) {
        let (d, h) = (self.dim, self.hidden);
        let mut grad = vec![0.0; self.n_params()];
        let mut pre = vec![0.0; h];
        let mut loss = 0.0;
        for &i in batch {
            let x = rows[i];
            let z = self.logit_with(x, &mut pre);
            loss += bce_with_logit(z, labels[i]);
            let dz = sigmoid(z) - f64::from(u8::from(labels[i]));
            let (gw1, rest) = grad.split_at_mut(d * h);
            let (gb1, rest) = rest.split_at_mut(h);
            let (gw2, gb2) = rest.split_at_mut(h);
            gb2[0] += dz;
            for j in 0..h {
                if pre[j] > 0.0 {
                    gw2[j] += dz * pre[j];
                    let gh = dz * self.w2[j];
                    gb1[j] += gh;
                    for (g, v) in gw1[j * d..(j + 1) * d].iter_mut().zip(x) {
                        *g += gh * v;
                    }
                }
            }
        }
        let n = batch.len() as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        (loss / n, grad)
    }

    pub(crate) fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.w1.iter_mut().chain(self.b1.iter_mut()).chain(self.w2.iter_mut()).chain(std::iter::once(&mut self.b2))
    }

    /// Plain mini-batch SGD on binary cross-entropy.
    pub fn fit(samples: &Samples<'_>, params: &NetParams) -> Result<Self> {
        let mut net = Mlp::init(samples.dim(), params);
        let mut order: Vec<usize> = (0..samples.len()).collect();
        for epoch in 0..params.epochs {
            let mut rng = derive_rng(params.seed, "net-epoch", epoch as u64);
            order.shuffle(&mut rng);
            let mut epoch_loss = 0.0;
            for batch in order.chunks(params.batch_size) {
                let (loss, grad) = net.loss_and_gradient(&samples.rows, &samples.labels, batch);
                epoch_loss += loss * batch.len() as f64;
                for (p, g) in net.params_mut().zip(&grad) {
                    *p -= params.learning_rate * g;
                }
            }
            if !epoch_loss.is_finite() || !net.params_mut().all(|p| p.is_finite()) {
                return Err(Error::Diverged { epoch });
            }
        }
        Ok(net)
    }
}

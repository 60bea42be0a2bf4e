use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sampling::sample_beta;
use super::BetaPair;
use crate::error::{Error, Result};
use crate::rng::derive_rng;

/// Trials per independently seeded block; fixes the seed partition so that
/// results do not depend on how blocks are scheduled.
const BLOCK: usize = 4096;

/// Row statistic whose ranking is being checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistic {
    /// Sample mean of the member outputs.
    Mean,
    /// Sample variance of the member outputs.
    Var,
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Statistic::Mean => "mean",
            Statistic::Var => "var",
        })
    }
}

/// Monte Carlo estimate of `Pr(s(x_left) > s(x_right))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MisrankEstimate {
    pub statistic: Statistic,
    pub k: usize,
    pub trials: usize,
    pub p_hat: f64,
    /// `sqrt(p_hat (1 - p_hat) / trials)`.
    pub se: f64,
    /// Empirical variance of the statistic on each side.
    pub stat_var_left: f64,
    pub stat_var_right: f64,
    /// `false` when the pair violates `alpha_left < alpha_right <= beta_right`.
    pub in_regime: bool,
}

impl MisrankEstimate {
    /// Chebyshev bound `(Var(s_left) + Var(s_right)) / delta^2` with the
    /// empirical variances, capped at 1.
    pub fn chebyshev_bound(&self, delta: f64) -> f64 {
        if delta <= 0.0 {
            return 1.0;
        }
        ((self.stat_var_left + self.stat_var_right) / (delta * delta)).min(1.0)
    }
}

#[derive(Default, Clone, Copy)]
struct Tally {
    n: usize,
    wins: [usize; 2],
    // Per statistic and side: sum and sum of squares.
    sum: [[f64; 2]; 2],
    sq: [[f64; 2]; 2],
}

fn mean_and_var(row: &[f64]) -> (f64, f64) {
    let k = row.len() as f64;
    let m = row.iter().sum::<f64>() / k;
    let v = if row.len() > 1 { row.iter().map(|y| (y - m) * (y - m)).sum::<f64>() / (k - 1.0) } else { 0.0 };
    (m, v)
}

fn run_block(pair: &BetaPair, k: usize, trials: usize, seed: u64, block: usize) -> Tally {
    let mut rng = derive_rng(seed, "misrank", block as u64);
    let mut t = Tally::default();
    let mut left = vec![0.0; k];
    let mut right = vec![0.0; k];
    for _ in 0..trials {
        left.iter_mut().for_each(|y| *y = sample_beta(pair.left, &mut rng));
        right.iter_mut().for_each(|y| *y = sample_beta(pair.right, &mut rng));
        let (ml, vl) = mean_and_var(&left);
        let (mr, vr) = mean_and_var(&right);
        t.n += 1;
        t.wins[0] += usize::from(ml > mr);
        t.wins[1] += usize::from(vl > vr);
        for (s, (a, b)) in [(ml, mr), (vl, vr)].into_iter().enumerate() {
            t.sum[s][0] += a;
            t.sum[s][1] += b;
            t.sq[s][0] += a * a;
            t.sq[s][1] += b * b;
        }
    }
    t
}

/// Estimate mis-ranking probabilities for both statistics from the same draws.
///
/// Each trial draws `k` member outputs for each side of the pair. Returns
/// `[mean, var]` estimates.
pub fn misrank_pair(pair: &BetaPair, k: usize, trials: usize, seed: u64) -> Result<[MisrankEstimate; 2]> {
    if trials == 0 {
        return Err(Error::Config("misrank estimation needs at least one trial".into()));
    }
    if k < 2 {
        return Err(Error::UndefinedMetric("var"));
    }
    let in_regime = pair.in_theorem_regime();
    if !in_regime {
        log::warn!("pair {pair:?} is outside alpha_left < alpha_right <= beta_right");
    }
    let blocks = trials.div_ceil(BLOCK);
    let tallies: Vec<Tally> =
        (0..blocks).into_par_iter().map(|b| run_block(pair, k, BLOCK.min(trials - b * BLOCK), seed, b)).collect();
    let mut total = Tally::default();
    for t in &tallies {
        total.n += t.n;
        for s in 0..2 {
            total.wins[s] += t.wins[s];
            for side in 0..2 {
                total.sum[s][side] += t.sum[s][side];
                total.sq[s][side] += t.sq[s][side];
            }
        }
    }

    let n = total.n as f64;
    let var_of = |s: usize, side: usize| {
        if total.n < 2 {
            return 0.0;
        }
        let m = total.sum[s][side] / n;
        ((total.sq[s][side] - n * m * m) / (n - 1.0)).max(0.0)
    };
    let estimate = |s: usize, statistic| {
        let p_hat = total.wins[s] as f64 / n;
        MisrankEstimate {
            statistic,
            k,
            trials,
            p_hat,
            se: (p_hat * (1.0 - p_hat) / n).sqrt(),
            stat_var_left: var_of(s, 0),
            stat_var_right: var_of(s, 1),
            in_regime,
        }
    };
    Ok([estimate(0, Statistic::Mean), estimate(1, Statistic::Var)])
}

pub fn misrank_probability(
    pair: &BetaPair,
    statistic: Statistic,
    k: usize,
    trials: usize,
    seed: u64,
) -> Result<MisrankEstimate> {
    if statistic == Statistic::Mean && k == 1 {
        // The variance half of the shared simulation needs two members;
        // the mean alone is fine with one.
        return misrank_mean_single(pair, trials, seed);
    }
    let [mean, var] = misrank_pair(pair, k, trials, seed)?;
    Ok(match statistic {
        Statistic::Mean => mean,
        Statistic::Var => var,
    })
}

fn misrank_mean_single(pair: &BetaPair, trials: usize, seed: u64) -> Result<MisrankEstimate> {
    if trials == 0 {
        return Err(Error::Config("misrank estimation needs at least one trial".into()));
    }
    let mut rng = derive_rng(seed, "misrank-single", 0);
    let (mut wins, mut s, mut sq) = (0usize, [0.0; 2], [0.0; 2]);
    for _ in 0..trials {
        let a = sample_beta(pair.left, &mut rng);
        let b = sample_beta(pair.right, &mut rng);
        wins += usize::from(a > b);
        s[0] += a;
        s[1] += b;
        sq[0] += a * a;
        sq[1] += b * b;
    }
    let n = trials as f64;
    let var = |i: usize| if trials < 2 { 0.0 } else { ((sq[i] - s[i] * s[i] / n) / (n - 1.0)).max(0.0) };
    let p_hat = wins as f64 / n;
    Ok(MisrankEstimate {
        statistic: Statistic::Mean,
        k: 1,
        trials,
        p_hat,
        se: (p_hat * (1.0 - p_hat) / n).sqrt(),
        stat_var_left: var(0),
        stat_var_right: var(1),
        in_regime: pair.in_theorem_regime(),
    })
}

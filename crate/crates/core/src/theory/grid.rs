use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::misrank::{misrank_pair, MisrankEstimate};
use super::BetaPair;
use crate::error::{Error, Result};
use crate::rng::derive_seed;

/// Grid of Beta pairs and ensemble sizes to check.
///
/// For every concentration `c` the left/right `alpha`s range over all ordered
/// pairs `alpha_left < alpha_right <= c / 2` drawn from the grid, which keeps
/// each pair in the regime `alpha_left < alpha_right <= beta_right`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub concentrations: Vec<f64>,
    /// Means `alpha / c` used to build the `alpha` grid for each `c`.
    pub means: Vec<f64>,
    /// Explicit `alpha` values; replaces `means` when set.
    pub alphas: Option<Vec<f64>>,
    pub k_values: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            concentrations: vec![4.0, 10.0, 20.0],
            means: vec![0.1, 0.2, 0.3, 0.4, 0.5],
            alphas: None,
            k_values: vec![5, 25, 100],
            trials: 20_000,
            seed: 2020,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("theory.trials must be at least 1".into()));
        }
        if self.k_values.is_empty() || self.k_values.iter().any(|&k| k < 2) {
            return Err(Error::Config("theory.k_values must be non-empty with every K >= 2".into()));
        }
        if self.concentrations.is_empty() || self.concentrations.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
            return Err(Error::Config("theory.concentrations must be non-empty and positive".into()));
        }
        if self.alphas.is_none() && self.means.iter().any(|m| !(*m > 0.0 && *m <= 0.5)) {
            return Err(Error::Config("theory.means must lie in (0, 0.5]".into()));
        }
        if self.pairs()?.is_empty() {
            return Err(Error::Config("theory grid produces no pairs".into()));
        }
        Ok(())
    }

    /// All pairs of the grid in `(c, alpha_left, alpha_right)` order.
    pub fn pairs(&self) -> Result<Vec<BetaPair>> {
        let mut out = Vec::new();
        for &c in &self.concentrations {
            let mut alphas: Vec<f64> = match &self.alphas {
                Some(a) => a.clone(),
                None => self.means.iter().map(|m| m * c).collect(),
            };
            alphas.retain(|a| *a > 0.0 && *a <= c / 2.0);
            alphas.sort_by(f64::total_cmp);
            alphas.dedup();
            for (i, &al) in alphas.iter().enumerate() {
                for &ar in &alphas[i + 1..] {
                    out.push(BetaPair::with_concentration(c, al, ar)?);
                }
            }
        }
        Ok(out)
    }
}

/// One `(pair, K)` cell of the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryRow {
    pub c: f64,
    pub alpha_left: f64,
    pub beta_left: f64,
    pub alpha_right: f64,
    pub beta_right: f64,
    pub k: usize,
    pub trials: usize,
    pub delta_mean: f64,
    pub delta_var: f64,
    pub p_mean: f64,
    pub se_mean: f64,
    pub p_var: f64,
    pub se_var: f64,
    /// `p_mean * K * delta_mean^2`.
    pub scaled_mean: f64,
    /// `p_var * K * delta_var^2`.
    pub scaled_var: f64,
    /// Chebyshev bounds with empirical statistic variances.
    pub bound_mean: f64,
    pub bound_var: f64,
    /// `K * (Var(s_left) + Var(s_right))` for the row mean.
    pub k_stat_var_mean: f64,
    /// Same for the row sample variance.
    pub k_stat_var_var: f64,
}

impl TheoryRow {
    fn new(pair: &BetaPair, mean: &MisrankEstimate, var: &MisrankEstimate) -> Self {
        let (dm, dv) = (pair.delta_mean(), pair.delta_var());
        let k = mean.k as f64;
        TheoryRow {
            c: pair.concentration(),
            alpha_left: pair.left.alpha,
            beta_left: pair.left.beta,
            alpha_right: pair.right.alpha,
            beta_right: pair.right.beta,
            k: mean.k,
            trials: mean.trials,
            delta_mean: dm,
            delta_var: dv,
            p_mean: mean.p_hat,
            se_mean: mean.se,
            p_var: var.p_hat,
            se_var: var.se,
            scaled_mean: mean.p_hat * k * dm * dm,
            scaled_var: var.p_hat * k * dv * dv,
            bound_mean: mean.chebyshev_bound(dm),
            bound_var: var.chebyshev_bound(dv),
            k_stat_var_mean: k * (mean.stat_var_left + mean.stat_var_right),
            k_stat_var_var: k * (var.stat_var_left + var.stat_var_right),
        }
    }

    fn same_pair(&self, other: &TheoryRow) -> bool {
        self.c == other.c && self.alpha_left == other.alpha_left && self.alpha_right == other.alpha_right
    }
}

/// Pass/fail flags over the whole grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheorySummary {
    pub rows: usize,
    pub pairs: usize,
    /// `delta_mean > delta_var > 0` in every cell (closed form).
    pub delta_ordering: bool,
    /// `p_mean <= p_var` in every cell within three standard errors.
    pub mean_le_var: bool,
    /// Both estimates respect their Chebyshev bounds within three standard
    /// errors, so `p * K * delta^2` stays bounded as `K` grows.
    pub scaling_bounded: bool,
    /// `K * Var(statistic)` agrees within a factor of two across `K` for each pair.
    pub variance_scales_as_inverse_k: bool,
    /// `p` at the largest `K` is no larger than at the smallest, within three
    /// standard errors, for both statistics.
    pub corollary_direction: bool,
    pub mean_le_var_violations: usize,
    pub corollary_violations: usize,
}

impl TheorySummary {
    pub fn all_passed(&self) -> bool {
        self.delta_ordering
            && self.mean_le_var
            && self.scaling_bounded
            && self.variance_scales_as_inverse_k
            && self.corollary_direction
    }
}

fn within(a: f64, b: f64, se_a: f64, se_b: f64) -> bool {
    a <= b + 3.0 * (se_a * se_a + se_b * se_b).sqrt()
}

fn summarize(rows: &[TheoryRow], n_pairs: usize, n_k: usize) -> TheorySummary {
    let delta_ordering = rows.iter().all(|r| r.delta_mean > r.delta_var && r.delta_var > 0.0);
    let mean_le_var_violations = rows.iter().filter(|r| !within(r.p_mean, r.p_var, r.se_mean, r.se_var)).count();
    let scaling_bounded =
        rows.iter().all(|r| r.p_mean <= r.bound_mean + 3.0 * r.se_mean && r.p_var <= r.bound_var + 3.0 * r.se_var);

    let mut variance_scales_as_inverse_k = true;
    let mut corollary_violations = 0;
    for cell in rows.chunks(n_k) {
        debug_assert!(cell.iter().all(|r| r.same_pair(&cell[0])));
        for f in [|r: &TheoryRow| r.k_stat_var_mean, |r: &TheoryRow| r.k_stat_var_var] {
            let vals: Vec<f64> = cell.iter().map(f).collect();
            let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().copied().fold(0.0, f64::max);
            if !(hi <= 2.0 * lo) {
                variance_scales_as_inverse_k = false;
            }
        }
        let first = &cell[0];
        let last = &cell[cell.len() - 1];
        let ok = within(last.p_mean, first.p_mean, last.se_mean, first.se_mean)
            && within(last.p_var, first.p_var, last.se_var, first.se_var);
        corollary_violations += usize::from(!ok);
    }

    TheorySummary {
        rows: rows.len(),
        pairs: n_pairs,
        delta_ordering,
        mean_le_var: mean_le_var_violations == 0,
        scaling_bounded,
        variance_scales_as_inverse_k,
        corollary_direction: corollary_violations == 0,
        mean_le_var_violations,
        corollary_violations,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    pub spec: GridSpec,
    pub rows: Vec<TheoryRow>,
    pub summary: TheorySummary,
}

impl TheoryReport {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn write_summary_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.summary)?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    /// Writes `theory.csv` and `theory_summary.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.write_csv(&dir.join("theory.csv"))?;
        self.write_summary_json(&dir.join("theory_summary.json"))
    }
}

/// Estimate mis-ranking probabilities for every `(pair, K)` cell.
///
/// Rows are ordered by pair, then by ascending `K`. Each cell draws from its
/// own seed, so the report does not depend on thread scheduling.
pub fn verify_theorem_grid(spec: &GridSpec) -> Result<TheoryReport> {
    spec.validate()?;
    let pairs = spec.pairs()?;
    let mut ks = spec.k_values.clone();
    ks.sort_unstable();
    ks.dedup();
    let cells: Vec<(usize, BetaPair, usize)> =
        pairs.iter().enumerate().flat_map(|(i, p)| ks.iter().map(move |&k| (i, *p, k))).collect();
    let rows = cells
        .par_iter()
        .enumerate()
        .map(|(idx, (_, pair, k))| {
            let seed = derive_seed(spec.seed, "theory-cell", idx as u64);
            let [mean, var] = misrank_pair(pair, *k, spec.trials, seed)?;
            Ok(TheoryRow::new(pair, &mean, &var))
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize(&rows, pairs.len(), ks.len());
    log::info!("theory grid: {} cells, all flags passed: {}", rows.len(), summary.all_passed());
    Ok(TheoryReport { spec: spec.clone(), rows, summary })
}

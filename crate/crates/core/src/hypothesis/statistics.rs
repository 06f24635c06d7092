//! `U_n`, `V_n` and the variance estimates `σ̂_l²`.

use rayon::prelude::*;

use crate::data::{eval_step, restrict_to_group, ObservationPath, PanelDataset, StepEstimate};
use crate::error::{Error, Result};
use crate::estimators::{npmle, IcmConfig, SolveDiagnostics};
use crate::weights::WeightFn;

/// Relative floor applied to pooled increments, as a fraction of the pooled
/// estimate at the last grid point.
pub const DENOMINATOR_FLOOR: f64 = 1e-8;

/// Pooled and per-group NPMLEs of a k-group dataset.
#[derive(Debug, Clone)]
pub struct FittedPanel {
    dataset: PanelDataset,
    pooled: StepEstimate,
    groups: Vec<StepEstimate>,
    pooled_diagnostics: SolveDiagnostics,
    group_diagnostics: Vec<SolveDiagnostics>,
}

fn converged(fit: (StepEstimate, SolveDiagnostics)) -> Result<(StepEstimate, SolveDiagnostics)> {
    if fit.1.converged {
        Ok(fit)
    } else {
        Err(Error::NotConverged(fit.1))
    }
}

impl FittedPanel {
    /// Fits the pooled and every group NPMLE; any non-converged solve is an error.
    pub fn fit(d: &PanelDataset, cfg: &IcmConfig) -> Result<Self> {
        d.ensure_valid()?;
        let (pooled, group_fits) = rayon::join(
            || npmle(d, cfg).and_then(converged),
            || {
                (1..=d.k())
                    .into_par_iter()
                    .map(|l| npmle(&restrict_to_group(d, l)?, cfg).and_then(converged))
                    .collect::<Result<Vec<_>>>()
            },
        );
        let (pooled, pooled_diagnostics) = pooled?;
        let (groups, group_diagnostics) = group_fits?.into_iter().unzip();
        Ok(Self {
            dataset: d.clone(),
            pooled,
            groups,
            pooled_diagnostics,
            group_diagnostics,
        })
    }

    /// Assembles a fit from precomputed estimates (group `l` at index `l - 1`).
    pub fn from_estimates(d: &PanelDataset, pooled: StepEstimate, groups: Vec<StepEstimate>) -> Result<Self> {
        d.ensure_valid()?;
        if groups.len() != d.k() {
            return Err(Error::LengthMismatch(groups.len(), d.k()));
        }
        let placeholder = SolveDiagnostics {
            iterations: 0,
            log_likelihood: f64::NAN,
            max_fenchel_residual: 0.0,
            converged: true,
            trace: Vec::new(),
        };
        Ok(Self {
            dataset: d.clone(),
            pooled,
            groups,
            pooled_diagnostics: placeholder.clone(),
            group_diagnostics: vec![placeholder; d.k()],
        })
    }

    pub fn dataset(&self) -> &PanelDataset {
        &self.dataset
    }

    pub fn pooled(&self) -> &StepEstimate {
        &self.pooled
    }

    /// Group `l` estimate, `1 <= l <= k`.
    pub fn group(&self, l: usize) -> &StepEstimate {
        &self.groups[l - 1]
    }

    pub fn pooled_diagnostics(&self) -> &SolveDiagnostics {
        &self.pooled_diagnostics
    }

    pub fn group_diagnostics(&self) -> &[SolveDiagnostics] {
        &self.group_diagnostics
    }

    fn check_weights(&self, weights: &[WeightFn]) -> Result<()> {
        if weights.len() != self.dataset.k() {
            return Err(Error::LengthMismatch(weights.len(), self.dataset.k()));
        }
        Ok(())
    }

    /// `U_n^{(l)}` for `l = 1..=k`, with `weights[l - 1]` as `W_n^{(l)}`.
    pub fn u_statistics(&self, weights: &[WeightFn]) -> Result<Vec<f64>> {
        self.check_weights(weights)?;
        (1..=self.dataset.k())
            .map(|l| self.u_component(l, &weights[l - 1]))
            .collect()
    }

    /// `U_n^{(l)}` with an arbitrary weight: the weighted sum over all subjects
    /// of the score built from `ΔΛ̂_{n_l} / ΔΛ̂_n`.
    pub fn u_component(&self, l: usize, w: &WeightFn) -> Result<f64> {
        let floor = denominator_floor(&self.pooled);
        let group = self.group(l);
        let mut total = 0.0;
        for p in self.dataset.paths() {
            let rates = group_rates(p, &self.pooled, group, floor)?;
            total += subject_score(p, &self.pooled, w, &rates);
        }
        Ok(total / (self.dataset.n() as f64).sqrt())
    }

    /// `V_n^{(l)}` for `l = 2..=k`, evaluated directly from the contrast of
    /// group-1 and group-l rate ratios.
    pub fn v_statistics(&self, weights: &[WeightFn]) -> Result<Vec<f64>> {
        self.check_weights(weights)?;
        let k = self.dataset.k();
        if k < 2 {
            return Err(Error::InvalidArgument("V statistics need at least two groups".into()));
        }
        let floor = denominator_floor(&self.pooled);
        let mut out = vec![0.0; k - 1];
        for p in self.dataset.paths() {
            let base = group_rates(p, &self.pooled, self.group(1), floor)?;
            for l in 2..=k {
                let other = group_rates(p, &self.pooled, self.group(l), floor)?;
                let contrast: Vec<f64> = base.iter().zip(&other).map(|(a, b)| a - b).collect();
                // (1 - r1) - (1 - rl) = rl - r1, i.e. the score with terminal 1 replaced by 0.
                out[l - 2] += contrast_score(p, &self.pooled, &weights[l - 1], &contrast);
            }
        }
        let scale = (self.dataset.n() as f64).sqrt();
        Ok(out.into_iter().map(|v| v / scale).collect())
    }

    /// `σ̂_l²` with weight `w` against the pooled estimate.
    pub fn sigma_hat_sq(&self, w: &WeightFn) -> Result<f64> {
        sigma_hat_sq(&self.dataset, &self.pooled, w)
    }
}

fn denominator_floor(pooled: &StepEstimate) -> f64 {
    DENOMINATOR_FLOOR * pooled.values().last().copied().unwrap_or(0.0)
}

/// `Σ_{j<K} W(T_j) Λ̂(T_j) (r_{j+1} - r_j) + W(T_K) Λ̂(T_K) (1 - r_K)`.
fn subject_score(p: &ObservationPath, pooled: &StepEstimate, w: &WeightFn, rates: &[f64]) -> f64 {
    let times = p.times();
    let k = times.len();
    let mut s = 0.0;
    for j in 0..k - 1 {
        s += w.eval(times[j]) * eval_step(pooled, times[j]) * (rates[j + 1] - rates[j]);
    }
    s + w.eval(times[k - 1]) * eval_step(pooled, times[k - 1]) * (1.0 - rates[k - 1])
}

/// As [`subject_score`] for a difference of rates, where the terminal ones cancel.
fn contrast_score(p: &ObservationPath, pooled: &StepEstimate, w: &WeightFn, diff: &[f64]) -> f64 {
    let times = p.times();
    let k = times.len();
    let mut s = 0.0;
    for j in 0..k - 1 {
        s += w.eval(times[j]) * eval_step(pooled, times[j]) * (diff[j + 1] - diff[j]);
    }
    s - w.eval(times[k - 1]) * eval_step(pooled, times[k - 1]) * diff[k - 1]
}

/// `ΔΛ̂_{n_l}(T_j) / ΔΛ̂_n(T_j)` over the subject's inspection intervals.
///
/// Where both increments are within the floor the ratio is 1 (no difference
/// in the rate of increase); a group increase over a flat pooled interval is
/// an error.
fn group_rates(p: &ObservationPath, pooled: &StepEstimate, group: &StepEstimate, floor: f64) -> Result<Vec<f64>> {
    let mut prev_p = 0.0;
    let mut prev_g = 0.0;
    p.times()
        .iter()
        .map(|&t| {
            let cur_p = eval_step(pooled, t);
            let cur_g = eval_step(group, t);
            let dp = cur_p - prev_p;
            let dg = cur_g - prev_g;
            prev_p = cur_p;
            prev_g = cur_g;
            if dp > floor {
                Ok(dg / dp)
            } else if dg <= floor {
                Ok(1.0)
            } else {
                Err(Error::DegenerateDenominator {
                    time: t,
                    detail: format!("group increment {dg:.3e} over flat pooled increment {dp:.3e}"),
                })
            }
        })
        .collect()
}

/// `ΔN_i(T_j) / ΔΛ̂_n(T_j)`; zero-count intervals contribute 0.
fn count_rates(p: &ObservationPath, pooled: &StepEstimate, floor: f64) -> Result<Vec<f64>> {
    let mut prev = 0.0;
    p.times()
        .iter()
        .zip(p.increments())
        .map(|(&t, dn)| {
            let cur = eval_step(pooled, t);
            let dp = cur - prev;
            prev = cur;
            if dn == 0.0 {
                Ok(0.0)
            } else if dp > floor {
                Ok(dn / dp)
            } else {
                Err(Error::DegenerateDenominator {
                    time: t,
                    detail: format!("{dn} events over pooled increment {dp:.3e}"),
                })
            }
        })
        .collect()
}

/// Consistent variance estimate of the weighted NPMLE score:
/// `(1/n) Σ_i [score_i(W, ΔN_i / ΔΛ̂_n)]²`.
pub fn sigma_hat_sq(d: &PanelDataset, pooled: &StepEstimate, w: &WeightFn) -> Result<f64> {
    let floor = denominator_floor(pooled);
    let mut total = 0.0;
    for p in d.paths() {
        let rates = count_rates(p, pooled, floor)?;
        total += subject_score(p, pooled, w, &rates).powi(2);
    }
    Ok(total / d.n() as f64)
}

/// Convenience wrapper: fits all NPMLEs, then evaluates `U_n`.
pub fn u_statistics(d: &PanelDataset, weights: &[WeightFn], cfg: &IcmConfig) -> Result<Vec<f64>> {
    FittedPanel::fit(d, cfg)?.u_statistics(weights)
}

/// Convenience wrapper: fits all NPMLEs, then evaluates `V_n`.
pub fn v_statistics(d: &PanelDataset, weights: &[WeightFn], cfg: &IcmConfig) -> Result<Vec<f64>> {
    FittedPanel::fit(d, cfg)?.v_statistics(weights)
}

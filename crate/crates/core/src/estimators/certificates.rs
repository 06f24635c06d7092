//! Optimality certificates for the NPMLE and the empirical `d1` metric.

use crate::data::{build_time_grid, eval_step, PanelDataset, StepEstimate};
use crate::error::Result;

use super::likelihood::RankedPanel;

/// Increments at or below this fraction of the largest value count as ties.
const JUMP_REL_TOL: f64 = 1e-10;

/// Cumulative gradients `S_ℓ = Σ_{j >= ℓ} φ_j(u)` of the rewritten likelihood.
#[derive(Debug, Clone, PartialEq)]
pub struct StationarityCertificate {
    pub cumulative_gradient: Vec<f64>,
    /// Grid indices where `u` jumps (`u_1 > 0` counts as a jump at index 0).
    pub jumps: Vec<usize>,
    /// `max( max_ℓ S_ℓ⁺, max_{jumps} |S_ℓ| )`, unnormalised.
    pub max_violation: f64,
}

pub(crate) fn stationarity_ranked(panel: &RankedPanel, u: &[f64]) -> Result<StationarityCertificate> {
    let (g, _) = panel.gradient_curvature(u)?;
    let m = g.len();
    let mut cumulative = vec![0.0; m];
    let mut acc = 0.0;
    for l in (0..m).rev() {
        acc += g[l];
        cumulative[l] = acc;
    }
    let scale = u.last().copied().unwrap_or(0.0).max(1.0);
    let jumps: Vec<usize> = (0..m)
        .filter(|&l| {
            let prev = if l == 0 { 0.0 } else { u[l - 1] };
            u[l] - prev > JUMP_REL_TOL * scale
        })
        .collect();
    let mut max_violation = cumulative.iter().copied().fold(0.0, f64::max);
    for &l in &jumps {
        max_violation = max_violation.max(cumulative[l].abs());
    }
    Ok(StationarityCertificate {
        cumulative_gradient: cumulative,
        jumps,
        max_violation,
    })
}

pub(crate) fn fenchel_residual_ranked(panel: &RankedPanel, u: &[f64]) -> Result<f64> {
    Ok(stationarity_ranked(panel, u)?.max_violation)
}

fn on_grid(d: &PanelDataset, e: &StepEstimate) -> Result<(RankedPanel, Vec<f64>)> {
    let grid = build_time_grid(d)?;
    let panel = RankedPanel::new(d, &grid)?;
    let u = grid.points().iter().map(|&t| eval_step(e, t)).collect();
    Ok((panel, u))
}

/// Stationarity conditions for `e` as a maximiser over the monotone cone.
///
/// At the NPMLE, `S_ℓ <= 0` everywhere and `S_ℓ = 0` wherever the estimate
/// jumps. Errors if `e` is infeasible for the likelihood.
pub fn stationarity(d: &PanelDataset, e: &StepEstimate) -> Result<StationarityCertificate> {
    let (panel, u) = on_grid(d, e)?;
    stationarity_ranked(&panel, &u)
}

/// `Σ_ℓ φ(û_ℓ) Σ_i φ_{i,ℓ}(û)`; zero for every `φ` at an exact NPMLE whose
/// first value is positive.
pub fn lemma1_residual(d: &PanelDataset, e: &StepEstimate, phi: impl Fn(f64) -> f64) -> Result<f64> {
    let (panel, u) = on_grid(d, e)?;
    let (g, _) = panel.gradient_curvature(&u)?;
    Ok(u.iter().zip(&g).map(|(&ui, gi)| phi(ui) * gi).sum())
}

/// `Σ_i Σ_j φ(Λ(T_ij)) (Λ(T_ij) - N_i(T_ij))`, which vanishes at the NPMPLE.
pub fn pseudo_score_residual(d: &PanelDataset, e: &StepEstimate, phi: impl Fn(f64) -> f64) -> f64 {
    d.paths()
        .iter()
        .flat_map(|p| p.times().iter().zip(p.counts()))
        .map(|(&t, &c)| {
            let v = eval_step(e, t);
            phi(v) * (v - c as f64)
        })
        .sum()
}

/// Empirical `L2(μ1)` distance: `sqrt( (1/n) Σ_i Σ_j (e1(T_ij) - e2(T_ij))² )`.
pub fn d1_distance(d: &PanelDataset, e1: &StepEstimate, e2: &StepEstimate) -> f64 {
    let n = d.n().max(1) as f64;
    let ss: f64 = d
        .paths()
        .iter()
        .flat_map(|p| p.times().iter())
        .map(|&t| (eval_step(e1, t) - eval_step(e2, t)).powi(2))
        .sum();
    (ss / n).sqrt()
}

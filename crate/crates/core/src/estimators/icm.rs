//! Modified iterative convex minorant algorithm for the NPMLE.
//!
//! Each iteration forms the diagonal-Newton working response
//! `y_ℓ = u_ℓ + g_ℓ / c_ℓ`, projects it onto `{0 <= u_1 <= … <= u_m}` in the
//! metric `diag(c)` (weighted PAVA followed by clamping at zero), and then
//! halves the step from `u` towards the projection until the candidate is
//! feasible and does not decrease the log-likelihood.
//!
//! After every such step a Newton step is tried on the current tie pattern:
//! grid points with equal values move together and the full Hessian over the
//! block values is used. It is accepted only if it keeps the ordering, stays
//! feasible and raises the log-likelihood, so the iteration remains a
//! monotone ascent while converging fast once the ties have settled.

use serde::{Deserialize, Serialize};

use crate::data::{build_time_grid, PanelDataset, StepEstimate};
use crate::error::{Error, Result};

use super::certificates::fenchel_residual_ranked;
use super::isotonic::pava;
use super::likelihood::{floor_curvature, npmple_on_grid, RankedPanel};
use crate::linalg::solve;

/// Neighbouring values closer than this (relative to the largest) are tied.
const TIE_REL_TOL: f64 = 1e-10;

const POLISH_STEPS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcmConfig {
    pub max_iterations: usize,
    /// Relative change of the log-likelihood between accepted iterates.
    pub rel_tol: f64,
    /// Stationarity tolerance per subject (certificates use `fenchel_tol · n`).
    pub fenchel_tol: f64,
    pub max_halvings: usize,
    pub init_slope_epsilon: f64,
    pub curvature_floor_ratio: f64,
}

impl Default for IcmConfig {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            rel_tol: 1e-8,
            fenchel_tol: 1e-6,
            max_halvings: 30,
            init_slope_epsilon: 1e-4,
            curvature_floor_ratio: 1e-6,
        }
    }
}

impl IcmConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = self.max_iterations > 0
            && self.max_halvings > 0
            && self.rel_tol > 0.0
            && self.fenchel_tol > 0.0
            && self.init_slope_epsilon > 0.0
            && self.curvature_floor_ratio > 0.0;
        if !positive || self.rel_tol >= 1.0 || self.fenchel_tol >= 1.0 {
            return Err(Error::InvalidArgument(format!("invalid ICM configuration {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    pub iterations: usize,
    pub log_likelihood: f64,
    /// Largest stationarity violation divided by `n`.
    pub max_fenchel_residual: f64,
    pub converged: bool,
    /// Log-likelihood of the initial point followed by every accepted iterate.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<f64>,
}

/// NPMLE of the mean function on the pooled grid.
///
/// Non-convergence is not an error here: the best iterate is returned with
/// `converged == false` and the caller decides.
pub fn npmle(d: &PanelDataset, cfg: &IcmConfig) -> Result<(StepEstimate, SolveDiagnostics)> {
    cfg.validate()?;
    d.ensure_valid()?;
    let grid = build_time_grid(d)?;
    let panel = RankedPanel::new(d, &grid)?;

    let start = npmple_on_grid(d, &grid);
    let mut u: Vec<f64> = start
        .values()
        .iter()
        .enumerate()
        .map(|(l, v)| v + (l + 1) as f64 * cfg.init_slope_epsilon)
        .collect();
    let (u, diag) = icm(&panel, &mut u, cfg)?;
    Ok((StepEstimate::from_parts(grid.points().to_vec(), u), diag))
}

fn icm(panel: &RankedPanel, u: &mut Vec<f64>, cfg: &IcmConfig) -> Result<(Vec<f64>, SolveDiagnostics)> {
    let n = panel.n() as f64;
    let mut f = panel.objective(u);
    debug_assert!(f.is_finite(), "initial point must be feasible");
    let mut trace = vec![f];
    let mut iterations = 0;
    let mut converged = false;
    let mut candidate = vec![0.0; u.len()];

    while iterations < cfg.max_iterations {
        let (g, mut c) = panel.gradient_curvature(u)?;
        floor_curvature(&mut c, cfg.curvature_floor_ratio);
        let working: Vec<f64> = u.iter().zip(&g).zip(&c).map(|((ui, gi), ci)| ui + gi / ci).collect();
        let mut target = pava(&working, &c);
        target.iter_mut().for_each(|v| *v = v.max(0.0));

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..=cfg.max_halvings {
            for ((cand, &ui), &ti) in candidate.iter_mut().zip(u.iter()).zip(&target) {
                *cand = if step == 1.0 { ti } else { ui + step * (ti - ui) };
            }
            if panel.is_feasible(&candidate) {
                let fc = panel.objective(&candidate);
                if fc >= f {
                    accepted = Some(fc);
                    break;
                }
            }
            step *= 0.5;
        }
        let Some(fc) = accepted else {
            break;
        };
        iterations += 1;
        let before = f;
        std::mem::swap(u, &mut candidate);
        f = fc;
        if let Some((un, fnew)) = block_newton(panel, u, f, cfg.max_halvings) {
            *u = un;
            f = fnew;
        }
        let rel = (f - before) / before.abs().max(1.0);
        trace.push(f);

        if rel < cfg.rel_tol && fenchel_residual_ranked(panel, u)? / n <= cfg.fenchel_tol {
            converged = true;
            for _ in 0..POLISH_STEPS {
                match polish(panel, u, f) {
                    Some((un, fnew)) => {
                        *u = un;
                        f = fnew;
                    }
                    None => break,
                }
            }
            break;
        }
    }

    let residual = fenchel_residual_ranked(panel, u)? / n;
    Ok((
        u.clone(),
        SolveDiagnostics {
            iterations,
            log_likelihood: f,
            max_fenchel_residual: residual,
            converged: converged || residual <= cfg.fenchel_tol,
            trace,
        },
    ))
}

/// Tie pattern of `u`: block index per grid point, `None` for the points
/// pinned at zero, plus the number of free blocks.
fn tie_blocks(u: &[f64]) -> (Vec<Option<usize>>, usize) {
    let scale = u.last().copied().unwrap_or(0.0).max(1.0);
    let tol = TIE_REL_TOL * scale;
    let mut block = Vec::with_capacity(u.len());
    let mut current: Option<usize> = None;
    let mut count = 0;
    let mut prev = 0.0;
    for &v in u {
        if v - prev > tol {
            current = Some(count);
            count += 1;
        }
        block.push(current);
        prev = v;
    }
    (block, count)
}

/// Newton direction for the block values of `u` under its tie pattern.
struct BlockNewton {
    block: Vec<Option<usize>>,
    values: Vec<f64>,
    grad: Vec<f64>,
    delta: Vec<f64>,
}

impl BlockNewton {
    fn new(panel: &RankedPanel, u: &[f64]) -> Option<Self> {
        let (g, _) = panel.gradient_curvature(u).ok()?;
        let (block, nb) = tie_blocks(u);
        if nb == 0 {
            return None;
        }
        let mut grad = vec![0.0; nb];
        let mut sum = vec![0.0; nb];
        let mut size = vec![0.0; nb];
        for (l, b) in block.iter().enumerate() {
            if let Some(b) = *b {
                grad[b] += g[l];
                sum[b] += u[l];
                size[b] += 1.0;
            }
        }
        let values: Vec<f64> = sum.iter().zip(&size).map(|(s, k)| s / k).collect();
        let mut a = panel.block_neg_hessian(u, &block, nb);
        let diag_max = (0..nb).map(|b| a[b][b]).fold(0.0, f64::max);
        if diag_max <= 0.0 {
            return None;
        }
        for (b, row) in a.iter_mut().enumerate() {
            row[b] += 1e-12 * diag_max;
        }
        let delta = solve(&a, &grad)?;
        Some(Self { block, values, grad, delta })
    }

    /// Largest step keeping `0 <= v_1 <= … <= v_B`, capped at 1.
    fn max_step(&self) -> f64 {
        let (v, delta) = (&self.values, &self.delta);
        let mut s_max = 1.0f64;
        if delta[0] < 0.0 {
            s_max = s_max.min(v[0] / -delta[0]);
        }
        for b in 1..v.len() {
            let closing = delta[b - 1] - delta[b];
            if closing > 0.0 {
                s_max = s_max.min((v[b] - v[b - 1]) / closing);
            }
        }
        s_max
    }

    fn point(&self, step: f64, out: &mut [f64]) {
        let mut prev = 0.0f64;
        for (c, b) in out.iter_mut().zip(&self.block) {
            let val = match *b {
                Some(b) => (self.values[b] + step * self.delta[b]).max(prev),
                None => 0.0,
            };
            *c = val;
            prev = val;
        }
    }
}

fn block_newton(panel: &RankedPanel, u: &[f64], f: f64, max_halvings: usize) -> Option<(Vec<f64>, f64)> {
    let nt = BlockNewton::new(panel, u)?;
    let mut step = nt.max_step();
    let mut cand = vec![0.0; u.len()];
    for _ in 0..=max_halvings {
        nt.point(step, &mut cand);
        if panel.is_feasible(&cand) {
            let fc = panel.objective(&cand);
            if fc > f {
                return Some((cand, fc));
            }
        }
        step *= 0.5;
    }
    None
}

/// Full Newton step on the block stationarity equations once the objective
/// no longer resolves progress: accepted when the tie pattern survives, the
/// block gradient shrinks and the likelihood is unchanged up to rounding.
fn polish(panel: &RankedPanel, u: &[f64], f: f64) -> Option<(Vec<f64>, f64)> {
    let nt = BlockNewton::new(panel, u)?;
    if nt.max_step() < 1.0 {
        return None;
    }
    let mut cand = vec![0.0; u.len()];
    nt.point(1.0, &mut cand);
    if !panel.is_feasible(&cand) {
        return None;
    }
    let fc = panel.objective(&cand);
    if fc < f - 1e-12 * f.abs().max(1.0) {
        return None;
    }
    let after = BlockNewton::new(panel, &cand)?;
    if after.block != nt.block {
        return None;
    }
    let norm = |g: &[f64]| g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if norm(&after.grad) < norm(&nt.grad) {
        Some((cand, fc))
    } else {
        None
    }
}

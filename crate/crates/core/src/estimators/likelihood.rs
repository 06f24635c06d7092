//! The Poisson working likelihood on the pooled grid, its gradient, and the
//! pseudo-likelihood estimator.

use crate::data::{build_time_grid, eval_step, PanelDataset, StepEstimate, TimeGrid};
use crate::error::{Error, Result};

use super::isotonic::pava;

/// One inspection interval `(T_{j-1}, T_j]` of a subject in grid coordinates.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Interval {
    /// Grid index of the left endpoint, `None` for `T_0 = 0`.
    pub left: Option<usize>,
    pub right: usize,
    pub dn: f64,
}

/// Subjects rewritten through the rank function.
#[derive(Debug, Clone)]
pub(crate) struct RankedPanel {
    pub subjects: Vec<Vec<Interval>>,
    pub m: usize,
}

impl RankedPanel {
    pub fn new(d: &PanelDataset, grid: &TimeGrid) -> Result<Self> {
        let mut subjects = Vec::with_capacity(d.n());
        for p in d.paths() {
            let mut left = None;
            let mut intervals = Vec::with_capacity(p.len());
            for (&t, dn) in p.times().iter().zip(p.increments()) {
                let right = grid.index_of(t).ok_or_else(|| {
                    Error::InvalidArgument(format!("time {t} of subject {} is not on the grid", p.subject_id()))
                })?;
                intervals.push(Interval { left, right, dn });
                left = Some(right);
            }
            subjects.push(intervals);
        }
        Ok(Self { subjects, m: grid.len() })
    }

    pub fn n(&self) -> usize {
        self.subjects.len()
    }

    /// `φ(u|X)`; `-∞` when an interval with events has no increment.
    pub fn objective(&self, u: &[f64]) -> f64 {
        let mut total = 0.0;
        for intervals in &self.subjects {
            for iv in intervals {
                if iv.dn > 0.0 {
                    let inc = u[iv.right] - iv.left.map_or(0.0, |l| u[l]);
                    if !(inc > 0.0) {
                        return f64::NEG_INFINITY;
                    }
                    total += iv.dn * inc.ln();
                }
            }
            if let Some(last) = intervals.last() {
                total -= u[last.right];
            }
        }
        total
    }

    pub fn is_feasible(&self, u: &[f64]) -> bool {
        self.subjects.iter().flatten().all(|iv| {
            iv.dn <= 0.0 || u[iv.right] - iv.left.map_or(0.0, |l| u[l]) > 0.0
        })
    }

    /// Per-subject gradient contributions `φ_{i,ℓ}(u)` summed over subjects,
    /// and the negative diagonal of the Hessian.
    pub fn gradient_curvature(&self, u: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut g = vec![0.0; self.m];
        let mut c = vec![0.0; self.m];
        for intervals in &self.subjects {
            for iv in intervals {
                if iv.dn > 0.0 {
                    let inc = u[iv.right] - iv.left.map_or(0.0, |l| u[l]);
                    if !(inc > 0.0) {
                        return Err(Error::Infeasible(format!(
                            "events on an interval ending at grid index {} with zero increment",
                            iv.right
                        )));
                    }
                    let slope = iv.dn / inc;
                    let curv = slope / inc;
                    g[iv.right] += slope;
                    c[iv.right] += curv;
                    if let Some(l) = iv.left {
                        g[l] -= slope;
                        c[l] += curv;
                    }
                }
            }
            if let Some(last) = intervals.last() {
                g[last.right] -= 1.0;
            }
        }
        Ok((g, c))
    }
}

impl RankedPanel {
    /// Negative Hessian of the objective restricted to block-constant
    /// directions: `block[ℓ]` maps grid index to block (or `None` if fixed).
    pub fn block_neg_hessian(&self, u: &[f64], block: &[Option<usize>], blocks: usize) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; blocks]; blocks];
        for iv in self.subjects.iter().flatten() {
            if iv.dn <= 0.0 {
                continue;
            }
            let inc = u[iv.right] - iv.left.map_or(0.0, |l| u[l]);
            let curv = iv.dn / (inc * inc);
            let rb = block[iv.right];
            let lb = iv.left.and_then(|l| block[l]);
            if rb == lb {
                continue;
            }
            if let Some(r) = rb {
                a[r][r] += curv;
            }
            if let Some(l) = lb {
                a[l][l] += curv;
            }
            if let (Some(r), Some(l)) = (rb, lb) {
                a[r][l] -= curv;
                a[l][r] -= curv;
            }
        }
        a
    }
}

/// `l_n(Λ|X)` for an arbitrary step function, with `0·log 0 = 0`.
///
/// Returns `-∞` when some interval carrying events has a zero increment.
pub fn log_likelihood(d: &PanelDataset, e: &StepEstimate) -> f64 {
    let mut total = 0.0;
    for p in d.paths() {
        let mut prev = 0.0;
        for (&t, dn) in p.times().iter().zip(p.increments()) {
            let cur = eval_step(e, t);
            if dn > 0.0 {
                let inc = cur - prev;
                if !(inc > 0.0) {
                    return f64::NEG_INFINITY;
                }
                total += dn * inc.ln();
            }
            prev = cur;
        }
        total -= prev;
    }
    total
}

/// Gradient `φ_ℓ(u)` of the rewritten log-likelihood and the curvature
/// weights used by the ICM step, floored at `floor_ratio · max(c)`.
pub fn gradient_and_curvature(
    d: &PanelDataset,
    grid: &TimeGrid,
    u: &[f64],
    floor_ratio: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if u.len() != grid.len() {
        return Err(Error::LengthMismatch(u.len(), grid.len()));
    }
    let panel = RankedPanel::new(d, grid)?;
    let (g, mut c) = panel.gradient_curvature(u)?;
    floor_curvature(&mut c, floor_ratio);
    Ok((g, c))
}

pub(crate) fn floor_curvature(c: &mut [f64], floor_ratio: f64) {
    let max = c.iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        let floor = floor_ratio * max;
        c.iter_mut().for_each(|v| *v = v.max(floor));
    } else {
        // No events anywhere: any positive metric works.
        c.iter_mut().for_each(|v| *v = 1.0);
    }
}

/// Isotonic regression of the per-grid-point mean counts, weighted by the
/// number of inspections at each point.
pub fn npmple(d: &PanelDataset) -> Result<StepEstimate> {
    d.ensure_valid()?;
    let grid = build_time_grid(d)?;
    Ok(npmple_on_grid(d, &grid))
}

pub(crate) fn npmple_on_grid(d: &PanelDataset, grid: &TimeGrid) -> StepEstimate {
    let m = grid.len();
    let mut sums = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for p in d.paths() {
        for (&t, &c) in p.times().iter().zip(p.counts()) {
            let s = grid.index_of(t).expect("grid built from dataset");
            sums[s] += c as f64;
            weights[s] += 1.0;
        }
    }
    let means: Vec<f64> = sums.iter().zip(&weights).map(|(s, w)| s / w).collect();
    StepEstimate::from_parts(grid.points().to_vec(), pava(&means, &weights))
}

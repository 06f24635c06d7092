//! Independent reference implementations used as test oracles. Nothing here
//! calls into the estimator or statistic code under test.

#![allow(dead_code)]

use pct_core::simulation::{generate_dataset, Case, NuMode, SimConfig};
use pct_core::{ObservationPath, PanelDataset, StepEstimate, WeightFn};

pub fn sim(case: Case, beta: f64, sizes: &[usize], nu: NuMode, seed: u64, rep: u64) -> PanelDataset {
    let mut cfg = SimConfig::two_sample(case, beta, 1, 1, nu);
    cfg.group_sizes = sizes.to_vec();
    cfg.seed = seed;
    generate_dataset(&cfg, rep)
}

/// Right-continuous step evaluation by linear scan.
pub fn step_at(support: &[f64], values: &[f64], t: f64) -> f64 {
    let mut v = 0.0;
    for (s, x) in support.iter().zip(values) {
        if *s <= t {
            v = *x;
        }
    }
    v
}

pub fn est_at(e: &StepEstimate, t: f64) -> f64 {
    step_at(e.support(), e.values(), t)
}

/// Sorted distinct inspection times.
pub fn grid_of(d: &PanelDataset) -> Vec<f64> {
    let mut g: Vec<f64> = d.paths().iter().flat_map(|p| p.times().to_vec()).collect();
    g.sort_by(f64::total_cmp);
    g.dedup();
    g
}

/// Poisson working log-likelihood of a step function with values `u` on `grid`.
pub fn loglik(d: &PanelDataset, grid: &[f64], u: &[f64]) -> f64 {
    let mut total = 0.0;
    for p in d.paths() {
        let mut prev_n = 0u64;
        let mut prev_u = 0.0;
        for (&t, &c) in p.times().iter().zip(p.counts()) {
            let cur = step_at(grid, u, t);
            let dn = (c - prev_n) as f64;
            if dn > 0.0 {
                let inc = cur - prev_u;
                if inc <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                total += dn * inc.ln();
            }
            prev_n = c;
            prev_u = cur;
        }
        total -= prev_u;
    }
    total
}

/// Maximises the likelihood over `0 <= u_1 <= … <= u_m` by coordinate grid
/// search on the increments, zooming in around the best point.
pub fn brute_force_npmle(d: &PanelDataset) -> (Vec<f64>, f64) {
    let grid = grid_of(d);
    let m = grid.len();
    let max_count = d.paths().iter().flat_map(|p| p.counts()).copied().max().unwrap_or(0) as f64;
    let mut centre = vec![(max_count + 1.0) / m as f64; m];
    let mut half = max_count + 1.0;
    let steps = 24usize;
    let mut best = f64::NEG_INFINITY;
    let mut best_inc = centre.clone();
    for _ in 0..36 {
        let axes: Vec<Vec<f64>> = centre
            .iter()
            .map(|&c| {
                let lo = (c - half).max(0.0);
                let hi = c + half;
                (0..=steps).map(|s| lo + (hi - lo) * s as f64 / steps as f64).collect()
            })
            .collect();
        let mut idx = vec![0usize; m];
        loop {
            let inc: Vec<f64> = (0..m).map(|j| axes[j][idx[j]]).collect();
            let u: Vec<f64> = inc
                .iter()
                .scan(0.0, |acc, x| {
                    *acc += x;
                    Some(*acc)
                })
                .collect();
            let f = loglik(d, &grid, &u);
            if f > best {
                best = f;
                best_inc = inc;
            }
            let mut j = 0;
            while j < m {
                idx[j] += 1;
                if idx[j] <= steps {
                    break;
                }
                idx[j] = 0;
                j += 1;
            }
            if j == m {
                break;
            }
        }
        centre = best_inc.clone();
        half *= 0.35;
    }
    let u = best_inc
        .iter()
        .scan(0.0, |acc, x| {
            *acc += x;
            Some(*acc)
        })
        .collect();
    (u, best)
}

/// Weighted least-squares monotone fit by enumerating every partition of the
/// index range into consecutive blocks.
pub fn brute_force_isotonic(y: &[f64], w: &[f64]) -> Vec<f64> {
    let m = y.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u32..(1 << (m - 1)) {
        let mut fit = Vec::with_capacity(m);
        let mut start = 0;
        for end in 1..=m {
            if end == m || mask & (1 << (end - 1)) != 0 {
                let ws: f64 = w[start..end].iter().sum();
                let mean = (start..end).map(|i| w[i] * y[i]).sum::<f64>() / ws;
                fit.extend(std::iter::repeat_n(mean, end - start));
                start = end;
            }
        }
        if fit.windows(2).any(|p| p[0] > p[1]) {
            continue;
        }
        let sse: f64 = (0..m).map(|i| w[i] * (y[i] - fit[i]).powi(2)).sum();
        if best.as_ref().is_none_or(|(b, _)| sse < *b) {
            best = Some((sse, fit));
        }
    }
    best.expect("the single-block fit is always monotone").1
}

/// Per-grid means of the counts and the number of inspections there.
pub fn pooled_means(d: &PanelDataset) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let grid = grid_of(d);
    let mut sums = vec![0.0; grid.len()];
    let mut counts = vec![0.0; grid.len()];
    for p in d.paths() {
        for (&t, &c) in p.times().iter().zip(p.counts()) {
            let i = grid.iter().position(|&g| g == t).unwrap();
            sums[i] += c as f64;
            counts[i] += 1.0;
        }
    }
    let means = sums.iter().zip(&counts).map(|(s, c)| s / c).collect();
    (grid, means, counts)
}

fn increments(path: &ObservationPath, f: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut prev = 0.0;
    path.times()
        .iter()
        .map(|&t| {
            let cur = f(t);
            let d = cur - prev;
            prev = cur;
            d
        })
        .collect()
}

fn ratio(num: f64, den: f64, eps: f64) -> f64 {
    if den > eps {
        num / den
    } else {
        assert!(num <= eps, "group increase over a flat pooled interval");
        1.0
    }
}

/// Bracket of one subject: `Σ_{j<K} W Λ̂ (r_{j+1} - r_j) + W Λ̂ (tail - r_K)`.
fn bracket(path: &ObservationPath, pooled: &StepEstimate, w: &WeightFn, r: &[f64], tail: f64) -> f64 {
    let t = path.times();
    let k = t.len();
    let mut s = 0.0;
    for j in 0..k - 1 {
        s += w.eval(t[j]) * est_at(pooled, t[j]) * (r[j + 1] - r[j]);
    }
    s + w.eval(t[k - 1]) * est_at(pooled, t[k - 1]) * (tail - r[k - 1])
}

fn eps_of(pooled: &StepEstimate) -> f64 {
    1e-8 * pooled.values().last().copied().unwrap_or(0.0)
}

/// `U_n^{(l)}` evaluated term by term.
pub fn reference_u(d: &PanelDataset, pooled: &StepEstimate, group: &StepEstimate, w: &WeightFn) -> f64 {
    let eps = eps_of(pooled);
    let mut total = 0.0;
    for p in d.paths() {
        let dp = increments(p, |t| est_at(pooled, t));
        let dg = increments(p, |t| est_at(group, t));
        let r: Vec<f64> = dg.iter().zip(&dp).map(|(&g, &q)| ratio(g, q, eps)).collect();
        total += bracket(p, pooled, w, &r, 1.0);
    }
    total / (d.n() as f64).sqrt()
}

/// `V_n^{(l)}` evaluated term by term from the two group ratios.
pub fn reference_v(
    d: &PanelDataset,
    pooled: &StepEstimate,
    first: &StepEstimate,
    group: &StepEstimate,
    w: &WeightFn,
) -> f64 {
    let eps = eps_of(pooled);
    let mut total = 0.0;
    for p in d.paths() {
        let t = p.times();
        let k = t.len();
        let dp = increments(p, |s| est_at(pooled, s));
        let d1 = increments(p, |s| est_at(first, s));
        let dl = increments(p, |s| est_at(group, s));
        let r1: Vec<f64> = d1.iter().zip(&dp).map(|(&g, &q)| ratio(g, q, eps)).collect();
        let rl: Vec<f64> = dl.iter().zip(&dp).map(|(&g, &q)| ratio(g, q, eps)).collect();
        let mut s = 0.0;
        for j in 0..k - 1 {
            s += w.eval(t[j]) * est_at(pooled, t[j]) * ((r1[j + 1] - r1[j]) - (rl[j + 1] - rl[j]));
        }
        s += w.eval(t[k - 1]) * est_at(pooled, t[k - 1]) * ((1.0 - r1[k - 1]) - (1.0 - rl[k - 1]));
        total += s;
    }
    total / (d.n() as f64).sqrt()
}

/// `σ̂²` evaluated term by term.
pub fn reference_sigma2(d: &PanelDataset, pooled: &StepEstimate, w: &WeightFn) -> f64 {
    let mut total = 0.0;
    for p in d.paths() {
        let dp = increments(p, |t| est_at(pooled, t));
        let mut prev = 0u64;
        let r: Vec<f64> = p
            .counts()
            .iter()
            .zip(&dp)
            .map(|(&c, &q)| {
                let dn = (c - prev) as f64;
                prev = c;
                if dn == 0.0 {
                    0.0
                } else {
                    dn / q
                }
            })
            .collect();
        total += bracket(p, pooled, w, &r, 1.0).powi(2);
    }
    total / d.n() as f64
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

//! Monte Carlo size/power and normal-QQ studies for the two-sample designs:
//! `k_i ~ U{1..10}` visits at distinct times drawn from `{1..10}`, and counts
//! from a (mixed) Poisson process with mean `ν Λ_l(t)`.

mod sampler;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use sampler::{sample_gamma_frailty, sample_poisson, sample_subject};

use crate::data::{PanelDataset, StepEstimate};
use crate::distributions::{chisq_sf, normal_quantile};
use crate::error::{Error, Result};
use crate::estimators::IcmConfig;
use crate::hypothesis::FittedPanel;
use crate::weights::{make_weight, WeightFn, WeightPlan};

/// Largest inspection time; visits are drawn from `{1, …, MAX_VISIT}`.
pub const MAX_VISIT: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Case {
    /// Group 2 mean `t·e^β`: proportional, non-crossing.
    One,
    /// Group 2 mean `√(β t)`: crosses `t` at `t = β`.
    Two,
}

impl TryFrom<u8> for Case {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            1 => Ok(Case::One),
            2 => Ok(Case::Two),
            _ => Err(Error::InvalidArgument(format!("case must be 1 or 2, got {v}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NuMode {
    /// `ν ≡ 1`: Poisson processes.
    FixedOne,
    /// `ν ~ Gamma(shape 2, scale ½)`: mixed Poisson processes with `E ν = 1`.
    Gamma2Half,
}

/// Conditional mean `Λ(t | ν = 1)` of one group in one design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrueMean {
    pub case: Case,
    pub beta: f64,
    /// Group 1 is the baseline `Λ(t) = t`; every other group follows the case.
    pub group: usize,
}

impl TrueMean {
    pub fn eval(&self, t: f64) -> f64 {
        if self.group <= 1 {
            return t;
        }
        match self.case {
            Case::One => t * self.beta.exp(),
            Case::Two => (self.beta * t).max(0.0).sqrt(),
        }
    }

    /// The mean function evaluated on the given (increasing) time points.
    pub fn on_grid(&self, points: &[f64]) -> StepEstimate {
        StepEstimate::new(points.to_vec(), points.iter().map(|&t| self.eval(t)).collect())
            .expect("true means are nondecreasing and nonnegative")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Statistic {
    T1,
    T2,
    ChiU,
    ChiV,
}

impl std::fmt::Display for Statistic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Statistic::T1 => "t1",
            Statistic::T2 => "t2",
            Statistic::ChiU => "chi_u",
            Statistic::ChiV => "chi_v",
        })
    }
}

impl std::str::FromStr for Statistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "t1" => Ok(Statistic::T1),
            "t2" => Ok(Statistic::T2),
            "chi_u" | "u" => Ok(Statistic::ChiU),
            "chi_v" | "v" => Ok(Statistic::ChiV),
            other => Err(Error::InvalidArgument(format!("unknown statistic '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub case: Case,
    pub beta: f64,
    /// `n_1, …, n_k`.
    pub group_sizes: Vec<usize>,
    pub nu_mode: NuMode,
    pub replications: usize,
    pub seed: u64,
    pub weights: Vec<WeightPlan>,
    pub statistics: Vec<Statistic>,
    pub alpha: f64,
    pub icm: IcmConfig,
}

impl SimConfig {
    /// Two-sample design with the `T_2` statistic and `W ≡ 1`.
    pub fn two_sample(case: Case, beta: f64, n1: usize, n2: usize, nu_mode: NuMode) -> Self {
        Self {
            case,
            beta,
            group_sizes: vec![n1, n2],
            nu_mode,
            replications: 1000,
            seed: 20090601,
            weights: vec!["w1".parse().expect("builtin weight")],
            statistics: vec![Statistic::T2],
            alpha: 0.05,
            icm: IcmConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::InvalidArgument("replications must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument(format!("alpha {} not in (0, 1)", self.alpha)));
        }
        if self.group_sizes.is_empty() || self.group_sizes.contains(&0) {
            return Err(Error::InvalidArgument("every group needs at least one subject".into()));
        }
        if !self.beta.is_finite() || (self.case == Case::Two && self.beta < 0.0) {
            return Err(Error::InvalidArgument(format!("invalid beta {}", self.beta)));
        }
        let k = self.group_sizes.len();
        for s in &self.statistics {
            match s {
                Statistic::T1 | Statistic::T2 if k != 2 => {
                    return Err(Error::InvalidArgument(format!("{s} needs exactly two groups")))
                }
                Statistic::ChiU | Statistic::ChiV if k < 2 => {
                    return Err(Error::InvalidArgument(format!("{s} needs at least two groups")))
                }
                _ => {}
            }
        }
        for plan in &self.weights {
            for spec in plan.specs(k) {
                if spec.group().is_some_and(|l| l > k) {
                    return Err(Error::InvalidArgument(format!("weight {spec} refers to a missing group")));
                }
            }
        }
        self.icm.validate()
    }

    pub fn true_mean(&self, group: usize) -> TrueMean {
        TrueMean {
            case: self.case,
            beta: self.beta,
            group,
        }
    }
}

/// Independent stream for one replication: ChaCha8 keyed by the base seed,
/// stream id = replication index.
pub fn replication_rng(seed: u64, replication: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replication);
    rng
}

/// The dataset of one replication; a pure function of `(seed, replication)`.
pub fn generate_dataset(cfg: &SimConfig, replication: u64) -> PanelDataset {
    let mut rng = replication_rng(cfg.seed, replication);
    let mut paths = Vec::with_capacity(cfg.group_sizes.iter().sum());
    for (g, &size) in cfg.group_sizes.iter().enumerate() {
        let tm = cfg.true_mean(g + 1);
        for i in 0..size {
            paths.push(sample_subject(&tm, cfg.nu_mode, format!("g{}-{i}", g + 1), &mut rng));
        }
    }
    PanelDataset::new(paths, cfg.group_sizes.len())
}

/// Rejection fraction for one `(statistic, weight)` pair of one design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub case: Case,
    pub beta: f64,
    pub group_sizes: Vec<usize>,
    pub nu_mode: NuMode,
    pub alpha: f64,
    pub seed: u64,
    pub replications: usize,
    pub statistic: Statistic,
    pub weight: String,
    pub rejections: usize,
    /// Replications that produced a statistic.
    pub valid: usize,
    /// Replications excluded because a fit or statistic failed.
    pub failures: usize,
    /// `rejections / valid`.
    pub rejection_rate: f64,
    /// More than 1% of replications failed.
    pub suspect: bool,
}

/// Values of every requested `(statistic, weight)` pair for one replication,
/// indexed `[weight][statistic]`; `None` marks a failure.
fn replicate(cfg: &SimConfig, replication: u64) -> Vec<Vec<Option<f64>>> {
    let d = generate_dataset(cfg, replication);
    let k = cfg.group_sizes.len();
    let failed = || vec![vec![None; cfg.statistics.len()]; cfg.weights.len()];
    let Ok(fit) = FittedPanel::fit(&d, &cfg.icm) else {
        return failed();
    };
    cfg.weights
        .iter()
        .map(|plan| {
            let weights: Option<Vec<WeightFn>> =
                plan.specs(k).into_iter().map(|s| make_weight(&d, s).ok()).collect();
            let Some(weights) = weights else {
                return vec![None; cfg.statistics.len()];
            };
            let mut two = None;
            cfg.statistics
                .iter()
                .map(|s| match s {
                    Statistic::T1 | Statistic::T2 => {
                        let pair = two.get_or_insert_with(|| fit.two_sample(&weights).ok());
                        pair.as_ref()
                            .map(|p| p[usize::from(*s == Statistic::T2)].statistic)
                    }
                    Statistic::ChiU => fit.chi2_u(&weights).ok().map(|r| r.statistic),
                    Statistic::ChiV => fit.chi2_v(&weights).ok().map(|r| r.statistic),
                })
                .collect()
        })
        .collect()
}

fn rejects(stat: Statistic, value: f64, alpha: f64, df: usize) -> bool {
    match stat {
        Statistic::T1 | Statistic::T2 => value.abs() > normal_quantile(1.0 - alpha / 2.0),
        Statistic::ChiU | Statistic::ChiV => chisq_sf(value, df) < alpha,
    }
}

/// Runs every design; rows come out design by design, then weight by weight,
/// then statistic by statistic.
pub fn run_power_study(cells: &[SimConfig]) -> Result<Vec<PowerRow>> {
    let mut rows = Vec::new();
    for cfg in cells {
        cfg.validate()?;
        let outcomes: Vec<Vec<Vec<Option<f64>>>> = (0..cfg.replications as u64)
            .into_par_iter()
            .map(|r| replicate(cfg, r))
            .collect();
        let df = cfg.group_sizes.len() - 1;
        for (wi, plan) in cfg.weights.iter().enumerate() {
            for (si, &stat) in cfg.statistics.iter().enumerate() {
                let values: Vec<f64> = outcomes.iter().filter_map(|o| o[wi][si]).collect();
                let rejections = values.iter().filter(|&&v| rejects(stat, v, cfg.alpha, df)).count();
                let valid = values.len();
                let failures = cfg.replications - valid;
                rows.push(PowerRow {
                    case: cfg.case,
                    beta: cfg.beta,
                    group_sizes: cfg.group_sizes.clone(),
                    nu_mode: cfg.nu_mode,
                    alpha: cfg.alpha,
                    seed: cfg.seed,
                    replications: cfg.replications,
                    statistic: stat,
                    weight: plan.to_string(),
                    rejections,
                    valid,
                    failures,
                    rejection_rate: if valid > 0 { rejections as f64 / valid as f64 } else { f64::NAN },
                    suspect: failures * 100 > cfg.replications,
                });
            }
        }
    }
    Ok(rows)
}

/// Ordered null replicates of `statistic` (first weight of `cfg`) paired with
/// standard normal quantiles `Φ⁻¹((i - ½)/R)`. A failed replication is
/// replaced by the next unused stream so exactly `R` rows come back.
pub fn qq_study(cfg: &SimConfig, statistic: Statistic) -> Result<Vec<(f64, f64)>> {
    if cfg.beta != 0.0 {
        return Err(Error::InvalidArgument("QQ study requires beta = 0".into()));
    }
    let mut cfg = cfg.clone();
    cfg.statistics = vec![statistic];
    cfg.weights.truncate(1);
    if cfg.weights.is_empty() {
        return Err(Error::InvalidArgument("QQ study needs a weight".into()));
    }
    cfg.validate()?;
    let target = cfg.replications;
    let mut values: Vec<f64> = Vec::with_capacity(target);
    let mut next = 0u64;
    // Failed replications are replaced by further streams, in index order.
    while values.len() < target {
        let want = target - values.len();
        let batch = if next == 0 { want } else { want * 2 + 8 };
        let fresh: Vec<Option<f64>> = (next..next + batch as u64)
            .into_par_iter()
            .map(|r| replicate(&cfg, r)[0][0])
            .collect();
        values.extend(fresh.into_iter().flatten().take(want));
        next += batch as u64;
        if next > 20 * target as u64 + 100 {
            return Err(Error::InvalidArgument("too many failed replications in QQ study".into()));
        }
    }
    values.sort_by(f64::total_cmp);
    let r = values.len() as f64;
    Ok(values
        .into_iter()
        .enumerate()
        .map(|(i, v)| (normal_quantile((i as f64 + 0.5) / r), v))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::validate_dataset;

    #[test]
    fn true_means() {
        let g2 = TrueMean { case: Case::Two, beta: 5.0, group: 2 };
        let g1 = TrueMean { case: Case::Two, beta: 5.0, group: 1 };
        assert!((g2.eval(5.0) - g1.eval(5.0)).abs() < 1e-12);
        assert!(g2.eval(4.0) > g1.eval(4.0) && g2.eval(6.0) < g1.eval(6.0));
        let c1 = TrueMean { case: Case::One, beta: 0.2, group: 2 };
        assert!((c1.eval(10.0) - 10.0 * 0.2f64.exp()).abs() < 1e-12);
        assert_eq!(c1.eval(0.0), 0.0);
    }

    #[test]
    fn generation_is_deterministic_and_sized() {
        let mut cfg = SimConfig::two_sample(Case::One, 0.0, 7, 9, NuMode::Gamma2Half);
        cfg.seed = 11;
        let a = generate_dataset(&cfg, 3);
        assert_eq!(a, generate_dataset(&cfg, 3));
        assert_ne!(a, generate_dataset(&cfg, 4));
        assert_eq!(a.group_sizes(), vec![7, 9]);
        assert!(validate_dataset(&a).is_ok());
        assert_eq!(cfg.true_mean(1), TrueMean { group: 1, ..cfg.true_mean(2) });
        assert_eq!(cfg.true_mean(1).eval(3.0), cfg.true_mean(2).eval(3.0));
    }

    #[test]
    fn one_replication_gives_zero_or_one() {
        let mut cfg = SimConfig::two_sample(Case::One, 0.0, 20, 20, NuMode::FixedOne);
        cfg.replications = 1;
        let rows = run_power_study(&[cfg]).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].rejection_rate == 0.0 || rows[0].rejection_rate == 1.0);
    }

    #[test]
    fn config_validation() {
        let mut cfg = SimConfig::two_sample(Case::One, 0.0, 5, 5, NuMode::FixedOne);
        cfg.replications = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = SimConfig::two_sample(Case::One, 0.0, 5, 5, NuMode::FixedOne);
        cfg.group_sizes.push(5);
        assert!(cfg.validate().is_err());
        cfg.statistics = vec![Statistic::ChiU];
        assert!(cfg.validate().is_ok());
        let mut cfg = SimConfig::two_sample(Case::Two, 3.0, 5, 5, NuMode::FixedOne);
        cfg.alpha = 1.5;
        assert!(cfg.validate().is_err());
        let cfg = SimConfig::two_sample(Case::One, 0.3, 5, 5, NuMode::FixedOne);
        assert!(qq_study(&cfg, Statistic::T2).is_err());
    }

    #[test]
    fn qq_rows_sorted() {
        let mut cfg = SimConfig::two_sample(Case::One, 0.0, 15, 15, NuMode::FixedOne);
        cfg.replications = 40;
        let rows = qq_study(&cfg, Statistic::T2).unwrap();
        assert_eq!(rows.len(), 40);
        assert!(rows.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 <= w[1].1));
    }
}

//! Weight processes built from the at-risk fractions
//! `Y_n(t) = (1/n) Σ_i I(t <= last inspection time of i)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::PanelDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "group", rename_all = "snake_case")]
pub enum WeightSpec {
    /// `W ≡ 1`.
    Const,
    /// `Y_n`.
    PooledRisk,
    /// `Y_{n_l}`.
    GroupRisk(usize),
    /// `Y_{n_l} / Y_n`.
    RiskRatio(usize),
    /// `Y_{n_1} Y_{n_l} / Y_n`.
    RiskProduct(usize),
    /// `1 - Y_n`.
    Complement,
    /// `(1 - Y_{n_l}) / (1 - Y_n)`.
    ComplementRatio(usize),
    /// `(1 - Y_{n_1})(1 - Y_{n_l}) / (1 - Y_n)`.
    ComplementProduct(usize),
}

impl WeightSpec {
    pub fn group(&self) -> Option<usize> {
        match *self {
            WeightSpec::GroupRisk(l)
            | WeightSpec::RiskRatio(l)
            | WeightSpec::RiskProduct(l)
            | WeightSpec::ComplementRatio(l)
            | WeightSpec::ComplementProduct(l) => Some(l),
            _ => None,
        }
    }

    fn with_group(&self, l: usize) -> Self {
        match *self {
            WeightSpec::GroupRisk(_) => WeightSpec::GroupRisk(l),
            WeightSpec::RiskRatio(_) => WeightSpec::RiskRatio(l),
            WeightSpec::RiskProduct(_) => WeightSpec::RiskProduct(l),
            WeightSpec::ComplementRatio(_) => WeightSpec::ComplementRatio(l),
            WeightSpec::ComplementProduct(_) => WeightSpec::ComplementProduct(l),
            other => other,
        }
    }

    fn keyword(&self) -> &'static str {
        match self {
            WeightSpec::Const => "const",
            WeightSpec::PooledRisk => "pooled_risk",
            WeightSpec::GroupRisk(_) => "group_risk",
            WeightSpec::RiskRatio(_) => "risk_ratio",
            WeightSpec::RiskProduct(_) => "risk_product",
            WeightSpec::Complement => "complement",
            WeightSpec::ComplementRatio(_) => "complement_ratio",
            WeightSpec::ComplementProduct(_) => "complement_product",
        }
    }
}

impl fmt::Display for WeightSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.group() {
            Some(l) => write!(f, "{}:{l}", self.keyword()),
            None => f.write_str(self.keyword()),
        }
    }
}

/// How a weight is chosen for each statistic component `l`.
///
/// `w1`–`w4` and the plain keywords use one spec for every component;
/// a group argument of `l` (e.g. `risk_ratio:l`) substitutes the component
/// index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightPlan {
    Shared(WeightSpec),
    PerComponent(WeightSpec),
}

impl WeightPlan {
    pub fn for_component(&self, l: usize) -> WeightSpec {
        match self {
            WeightPlan::Shared(s) => *s,
            WeightPlan::PerComponent(s) => s.with_group(l),
        }
    }

    pub fn specs(&self, k: usize) -> Vec<WeightSpec> {
        (1..=k).map(|l| self.for_component(l)).collect()
    }
}

impl fmt::Display for WeightPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightPlan::Shared(WeightSpec::Const) => f.write_str("w1"),
            WeightPlan::Shared(WeightSpec::PooledRisk) => f.write_str("w2"),
            WeightPlan::Shared(WeightSpec::RiskProduct(2)) => f.write_str("w3"),
            WeightPlan::Shared(WeightSpec::Complement) => f.write_str("w4"),
            WeightPlan::Shared(s) => write!(f, "{s}"),
            WeightPlan::PerComponent(s) => write!(f, "{}:l", s.keyword()),
        }
    }
}

impl FromStr for WeightPlan {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let shared = |spec| Ok(WeightPlan::Shared(spec));
        match s.as_str() {
            "w1" | "const" => return shared(WeightSpec::Const),
            "w2" | "pooled_risk" => return shared(WeightSpec::PooledRisk),
            "w3" => return shared(WeightSpec::RiskProduct(2)),
            "w4" | "complement" => return shared(WeightSpec::Complement),
            _ => {}
        }
        let (name, arg) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidArgument(format!("unknown weight '{s}'")))?;
        let template = match name {
            "group_risk" => WeightSpec::GroupRisk(0),
            "risk_ratio" => WeightSpec::RiskRatio(0),
            "risk_product" => WeightSpec::RiskProduct(0),
            "complement_ratio" => WeightSpec::ComplementRatio(0),
            "complement_product" => WeightSpec::ComplementProduct(0),
            _ => return Err(Error::InvalidArgument(format!("unknown weight '{s}'"))),
        };
        if arg == "l" {
            return Ok(WeightPlan::PerComponent(template));
        }
        let l: usize = arg
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad group in weight '{s}'")))?;
        if l == 0 {
            return Err(Error::InvalidArgument(format!("bad group in weight '{s}'")));
        }
        Ok(WeightPlan::Shared(template.with_group(l)))
    }
}

/// A left-continuous step function: `values[i]` applies on
/// `(knots[i-1], knots[i]]`, with `values[0]` on `[0, knots[0]]` and the last
/// value beyond the final knot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightFn {
    knots: Vec<f64>,
    values: Vec<f64>,
}

impl WeightFn {
    pub fn constant(c: f64) -> Self {
        Self {
            knots: Vec::new(),
            values: vec![c],
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.values[self.knots.partition_point(|&k| k < t)]
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            knots: self.knots.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

fn check_group(d: &PanelDataset, group: usize) -> Result<()> {
    if group == 0 || group > d.k() {
        return Err(Error::GroupOutOfRange { group, k: d.k() });
    }
    Ok(())
}

/// Fraction of subjects (in `group`, or pooled) whose last inspection is `>= t`.
pub fn risk_fraction(d: &PanelDataset, group: Option<usize>, t: f64) -> Result<f64> {
    if let Some(l) = group {
        check_group(d, l)?;
    }
    let mut total = 0usize;
    let mut at_risk = 0usize;
    for p in d.paths().iter().filter(|p| group.is_none_or(|l| p.group() == l)) {
        total += 1;
        if p.last_time().is_some_and(|last| t <= last) {
            at_risk += 1;
        }
    }
    if total == 0 {
        return Ok(0.0);
    }
    Ok(at_risk as f64 / total as f64)
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

pub fn make_weight(d: &PanelDataset, spec: WeightSpec) -> Result<WeightFn> {
    if let Some(l) = spec.group() {
        check_group(d, l)?;
    }
    if spec == WeightSpec::Const {
        return Ok(WeightFn::constant(1.0));
    }
    let mut knots: Vec<f64> = d.paths().iter().filter_map(|p| p.last_time()).collect();
    knots.sort_by(f64::total_cmp);
    knots.dedup();

    let at = |group: Option<usize>, idx: usize| -> Result<f64> {
        match knots.get(idx) {
            Some(&t) => risk_fraction(d, group, t),
            None => Ok(0.0),
        }
    };
    let mut values = Vec::with_capacity(knots.len() + 1);
    for idx in 0..=knots.len() {
        let pooled = at(None, idx)?;
        let v = match spec {
            WeightSpec::Const => 1.0,
            WeightSpec::PooledRisk => pooled,
            WeightSpec::GroupRisk(l) => at(Some(l), idx)?,
            WeightSpec::RiskRatio(l) => ratio(at(Some(l), idx)?, pooled),
            WeightSpec::RiskProduct(l) => ratio(at(Some(1), idx)? * at(Some(l), idx)?, pooled),
            WeightSpec::Complement => 1.0 - pooled,
            WeightSpec::ComplementRatio(l) => ratio(1.0 - at(Some(l), idx)?, 1.0 - pooled),
            WeightSpec::ComplementProduct(l) => ratio(
                (1.0 - at(Some(1), idx)?) * (1.0 - at(Some(l), idx)?),
                1.0 - pooled,
            ),
        };
        values.push(v);
    }
    Ok(WeightFn { knots, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{build_time_grid, ObservationPath};
    use proptest::prelude::*;

    fn two_subjects() -> PanelDataset {
        PanelDataset::new(
            vec![
                ObservationPath::new("a", 1, vec![1.0, 3.0], vec![0, 1]),
                ObservationPath::new("b", 2, vec![2.0, 5.0], vec![1, 1]),
            ],
            2,
        )
    }

    #[test]
    fn risk_fraction_examples() {
        let d = two_subjects();
        assert_eq!(risk_fraction(&d, None, 4.0).unwrap(), 0.5);
        assert_eq!(risk_fraction(&d, None, 0.0).unwrap(), 1.0);
        assert_eq!(risk_fraction(&d, None, 6.0).unwrap(), 0.0);
        assert_eq!(risk_fraction(&d, None, 3.0).unwrap(), 1.0);
        assert_eq!(risk_fraction(&d, Some(2), 4.0).unwrap(), 1.0);
        assert!(matches!(risk_fraction(&d, Some(3), 1.0), Err(Error::GroupOutOfRange { .. })));
    }

    #[test]
    fn make_weight_examples() {
        let d = two_subjects();
        assert_eq!(make_weight(&d, WeightSpec::Const).unwrap().eval(123.0), 1.0);
        assert_eq!(make_weight(&d, WeightSpec::PooledRisk).unwrap().eval(4.0), 0.5);
        assert_eq!(make_weight(&d, WeightSpec::Complement).unwrap().eval(4.0), 0.5);

        // Y_{n_1} = Y_{n_2} = Y_n = 0.5 at t = 4.
        let d = PanelDataset::new(
            vec![
                ObservationPath::new("a", 1, vec![3.0], vec![0]),
                ObservationPath::new("b", 1, vec![5.0], vec![0]),
                ObservationPath::new("c", 2, vec![3.0], vec![0]),
                ObservationPath::new("e", 2, vec![5.0], vec![0]),
            ],
            2,
        );
        let w = make_weight(&d, WeightSpec::RiskProduct(2)).unwrap();
        assert!((w.eval(4.0) - 0.5).abs() < 1e-15);
        // 0/0 convention once nobody is at risk.
        assert_eq!(w.eval(6.0), 0.0);
        assert_eq!(make_weight(&d, WeightSpec::RiskRatio(1)).unwrap().eval(6.0), 0.0);
        assert_eq!(make_weight(&d, WeightSpec::ComplementRatio(1)).unwrap().eval(1.0), 0.0);
        assert!(make_weight(&d, WeightSpec::GroupRisk(3)).is_err());
    }

    #[test]
    fn plan_parsing() {
        assert_eq!("w3".parse::<WeightPlan>().unwrap(), WeightPlan::Shared(WeightSpec::RiskProduct(2)));
        assert_eq!(
            "risk_ratio:l".parse::<WeightPlan>().unwrap().specs(3),
            vec![WeightSpec::RiskRatio(1), WeightSpec::RiskRatio(2), WeightSpec::RiskRatio(3)]
        );
        assert_eq!(
            "group_risk:2".parse::<WeightPlan>().unwrap(),
            WeightPlan::Shared(WeightSpec::GroupRisk(2))
        );
        assert!("bogus".parse::<WeightPlan>().is_err());
        assert!("group_risk:0".parse::<WeightPlan>().is_err());
        for s in ["w1", "w2", "w3", "w4", "risk_ratio:l", "complement_product:3"] {
            let p: WeightPlan = s.parse().unwrap();
            assert_eq!(p.to_string().parse::<WeightPlan>().unwrap(), p);
        }
    }

    fn arb_dataset() -> impl Strategy<Value = PanelDataset> {
        (
            prop::collection::vec(prop::collection::btree_set(1u32..12, 1..5), 1..8),
            prop::collection::vec(prop::collection::btree_set(1u32..12, 1..5), 1..8),
        )
            .prop_map(|(g1, g2)| {
                let mut paths = Vec::new();
                for (g, sets) in [(1, g1), (2, g2)] {
                    for (i, times) in sets.into_iter().enumerate() {
                        let times: Vec<f64> = times.into_iter().map(f64::from).collect();
                        let counts = vec![0; times.len()];
                        paths.push(ObservationPath::new(format!("{g}-{i}"), g, times, counts));
                    }
                }
                PanelDataset::new(paths, 2)
            })
    }

    proptest! {
        #[test]
        fn shape_and_bounds(d in arb_dataset()) {
            let grid = build_time_grid(&d).unwrap();
            let pooled = make_weight(&d, WeightSpec::PooledRisk).unwrap();
            let comp = make_weight(&d, WeightSpec::Complement).unwrap();
            let sizes = d.group_sizes();
            let n = d.n() as f64;
            let mut probe: Vec<f64> = grid.points().to_vec();
            probe.push(0.0);
            probe.push(100.0);
            probe.sort_by(f64::total_cmp);
            for w in probe.windows(2) {
                prop_assert!(pooled.eval(w[0]) >= pooled.eval(w[1]));
                prop_assert!(comp.eval(w[0]) <= comp.eval(w[1]));
                for l in 1..=2 {
                    let g = make_weight(&d, WeightSpec::GroupRisk(l)).unwrap();
                    prop_assert!(g.eval(w[0]) >= g.eval(w[1]));
                }
            }
            for &t in &probe {
                let mix: f64 = (1..=2)
                    .map(|l| sizes[l - 1] as f64 / n * make_weight(&d, WeightSpec::GroupRisk(l)).unwrap().eval(t))
                    .sum();
                prop_assert!((pooled.eval(t) - mix).abs() < 1e-12);
                for spec in [WeightSpec::Const, WeightSpec::PooledRisk, WeightSpec::Complement,
                             WeightSpec::RiskProduct(2), WeightSpec::ComplementProduct(2),
                             WeightSpec::GroupRisk(1), WeightSpec::GroupRisk(2)] {
                    let v = make_weight(&d, spec).unwrap().eval(t);
                    prop_assert!((0.0..=1.0 + 1e-12).contains(&v), "{spec}: {v}");
                }
                // Ratio kinds are bounded by n / n_l rather than by 1.
                for l in 1..=2 {
                    let bound = n / sizes[l - 1] as f64 + 1e-12;
                    for spec in [WeightSpec::RiskRatio(l), WeightSpec::ComplementRatio(l)] {
                        let v = make_weight(&d, spec).unwrap().eval(t);
                        prop_assert!(v >= 0.0 && v <= bound, "{spec}: {v}");
                    }
                }
            }
        }
    }
}

//! Panel count data model: observation paths, datasets, the pooled time grid
//! and step-function estimates of a mean function.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One subject's inspection times and cumulative event counts.
///
/// `counts[j]` is `N(times[j])`; `N(0) = 0` and `times` start after 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationPath {
    subject_id: String,
    group: usize,
    times: Vec<f64>,
    counts: Vec<u64>,
}

impl ObservationPath {
    /// Construction does not check invariants; see [`validate_dataset`].
    pub fn new(subject_id: impl Into<String>, group: usize, times: Vec<f64>, counts: Vec<u64>) -> Self {
        Self {
            subject_id: subject_id.into(),
            group,
            times,
            counts,
        }
    }

    pub fn subject_id(&self) -> &str {
        &self.subject_id
    }

    pub fn group(&self) -> usize {
        self.group
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Number of inspections `K`.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_time(&self) -> Option<f64> {
        self.times.last().copied()
    }

    /// Count increments `ΔN(T_j) = N(T_j) - N(T_{j-1})` with `N(T_0) = 0`.
    pub fn increments(&self) -> impl Iterator<Item = f64> + '_ {
        let mut prev = 0u64;
        self.counts.iter().map(move |&c| {
            let d = c as f64 - prev as f64;
            prev = c;
            d
        })
    }

    /// The same path relabelled to another group.
    pub fn with_group(&self, group: usize) -> Self {
        Self {
            group,
            ..self.clone()
        }
    }
}

/// A sample of paths split into `k` groups labelled `1..=k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelDataset {
    paths: Vec<ObservationPath>,
    k: usize,
}

impl PanelDataset {
    pub fn new(paths: Vec<ObservationPath>, k: usize) -> Self {
        Self { paths, k }
    }

    /// Builds a dataset whose `k` is the largest group label present.
    pub fn from_paths(paths: Vec<ObservationPath>) -> Self {
        let k = paths.iter().map(|p| p.group).max().unwrap_or(0);
        Self { paths, k }
    }

    pub fn paths(&self) -> &[ObservationPath] {
        &self.paths
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.paths.len()
    }

    /// Per-group path counts `n_1, …, n_k`.
    pub fn group_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for p in &self.paths {
            if (1..=self.k).contains(&p.group) {
                sizes[p.group - 1] += 1;
            }
        }
        sizes
    }

    /// Total number of inspections `Σ K_i`.
    pub fn total_observations(&self) -> usize {
        self.paths.iter().map(ObservationPath::len).sum()
    }

    pub(crate) fn ensure_valid(&self) -> Result<()> {
        if self.paths.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let report = validate_dataset(self);
        match report.errors.first() {
            None => Ok(()),
            Some(first) => Err(Error::InvalidDataset(first.clone())),
        }
    }
}

/// Outcome of [`validate_dataset`]; the dataset is accepted iff `errors` is empty.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }
}

/// Checks every structural invariant of the paths and the group layout.
///
/// Regularity concerns (e.g. grid points where no subject interval carries an
/// event, which makes pooled increments unidentifiable there) are reported as
/// warnings only.
pub fn validate_dataset(d: &PanelDataset) -> ValidationReport {
    let mut report = ValidationReport::default();
    if d.paths.is_empty() {
        report.errors.push("dataset has no subjects".to_string());
        return report;
    }
    if d.k == 0 {
        report.errors.push("number of groups must be at least 1".to_string());
    }

    let mut seen = HashSet::new();
    for p in &d.paths {
        let id = &p.subject_id;
        if !seen.insert(id.as_str()) {
            report.errors.push(format!("subject {id}: duplicate subject id"));
        }
        if p.group == 0 || p.group > d.k {
            report
                .errors
                .push(format!("subject {id}: group {} out of range 1..={}", p.group, d.k));
        }
        if p.times.is_empty() {
            report.errors.push(format!("subject {id}: no observations"));
            continue;
        }
        if p.times.len() != p.counts.len() {
            report.errors.push(format!(
                "subject {id}: {} times but {} counts",
                p.times.len(),
                p.counts.len()
            ));
            continue;
        }
        if p.times.iter().any(|t| !t.is_finite() || *t <= 0.0) {
            report
                .errors
                .push(format!("subject {id}: times must be finite and positive"));
        }
        if p.times.windows(2).any(|w| !(w[0] < w[1])) {
            report
                .errors
                .push(format!("subject {id}: times not strictly increasing"));
        }
        if p.counts.windows(2).any(|w| w[1] < w[0]) {
            report.errors.push(format!("subject {id}: counts decreasing"));
        }
    }

    for (g, &size) in d.group_sizes().iter().enumerate() {
        if size == 0 {
            report.errors.push(format!("group {} has no subjects", g + 1));
        }
    }

    if report.errors.is_empty() {
        // Grid points at which no subject interval ending there carries an event.
        let mut events_at: HashMap<u64, f64> = HashMap::new();
        for p in &d.paths {
            for (t, dn) in p.times.iter().zip(p.increments()) {
                *events_at.entry(t.to_bits()).or_insert(0.0) += dn;
            }
        }
        let grid = build_time_grid(d).expect("non-empty dataset");
        let silent: Vec<f64> = grid
            .points()
            .iter()
            .copied()
            .filter(|t| events_at.get(&t.to_bits()).copied().unwrap_or(0.0) == 0.0)
            .collect();
        if !silent.is_empty() {
            report.warnings.push(format!(
                "{} grid point(s) with zero pooled events in the preceding inspection intervals (first at t = {})",
                silent.len(),
                silent[0]
            ));
        }
        if d.group_sizes().iter().any(|&s| s < 5) && d.k > 1 {
            report
                .warnings
                .push("some group has fewer than 5 subjects; asymptotic p-values are unreliable".to_string());
        }
    }
    report
}

/// The sorted distinct inspection times `t_1 < … < t_m` of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    points: Vec<f64>,
}

impl TimeGrid {
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Zero-based position of an observed time (exact match).
    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.points
            .binary_search_by(|p| p.total_cmp(&t))
            .ok()
    }

    /// One-based rank `R(t)`; `None` for times not on the grid.
    pub fn rank(&self, t: f64) -> Option<usize> {
        self.index_of(t).map(|i| i + 1)
    }
}

pub fn build_time_grid(d: &PanelDataset) -> Result<TimeGrid> {
    let mut points: Vec<f64> = d.paths.iter().flat_map(|p| p.times.iter().copied()).collect();
    if points.is_empty() {
        return Err(Error::EmptyDataset);
    }
    points.sort_by(f64::total_cmp);
    points.dedup();
    Ok(TimeGrid { points })
}

/// Nondecreasing, nonnegative step function with jumps at `support`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepEstimate {
    support: Vec<f64>,
    values: Vec<f64>,
}

impl StepEstimate {
    pub fn new(support: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if support.len() != values.len() {
            return Err(Error::LengthMismatch(support.len(), values.len()));
        }
        if support.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidArgument(
                "step support must be strictly increasing".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) || values.first().is_some_and(|v| *v < 0.0) {
            return Err(Error::InvalidArgument(
                "step values must be finite and nonnegative".into(),
            ));
        }
        if values.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidArgument("step values must be nondecreasing".into()));
        }
        Ok(Self { support, values })
    }

    /// Skips validation; callers guarantee the invariants.
    pub(crate) fn from_parts(support: Vec<f64>, values: Vec<f64>) -> Self {
        debug_assert_eq!(support.len(), values.len());
        Self { support, values }
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, t: f64) -> f64 {
        eval_step(self, t)
    }
}

/// Right-continuous evaluation: 0 before the first support point, the value at
/// the largest support point `<= t` otherwise.
pub fn eval_step(e: &StepEstimate, t: f64) -> f64 {
    let idx = e.support.partition_point(|&s| s <= t);
    if idx == 0 {
        0.0
    } else {
        e.values[idx - 1]
    }
}

/// The paths of group `l`, relabelled as group 1 of a one-group dataset.
pub fn restrict_to_group(d: &PanelDataset, l: usize) -> Result<PanelDataset> {
    if l == 0 || l > d.k {
        return Err(Error::GroupOutOfRange { group: l, k: d.k });
    }
    let paths = d
        .paths
        .iter()
        .filter(|p| p.group == l)
        .map(|p| p.with_group(1))
        .collect();
    Ok(PanelDataset::new(paths, 1))
}

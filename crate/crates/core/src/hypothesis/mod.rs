//! k-sample tests built on the NPMLE: `U_n`, `V_n`, their covariance
//! estimates, the chi-square tests and the two-sample normal tests.

mod covariance;
mod statistics;

use serde::{Deserialize, Serialize};

pub use covariance::{covariance_u, covariance_v, gamma_matrix, h_matrix};
pub use statistics::{sigma_hat_sq, u_statistics, v_statistics, FittedPanel, DENOMINATOR_FLOOR};

use crate::data::PanelDataset;
use crate::distributions::{chisq_sf, normal_two_sided_p};
use crate::error::{Error, Result};
use crate::estimators::IcmConfig;
use crate::linalg::inverse_quadratic_form;
use crate::weights::{make_weight, WeightFn, WeightSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TestMethod {
    #[serde(rename = "u-test")]
    UTest,
    #[serde(rename = "v-test")]
    VTest,
    #[serde(rename = "two-sample-T1")]
    TwoSampleT1,
    #[serde(rename = "two-sample-T2")]
    TwoSampleT2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSummary {
    pub pooled_iterations: usize,
    pub group_iterations: Vec<usize>,
    /// Worst normalised stationarity residual over all fits.
    pub max_fenchel_residual: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub method: TestMethod,
    /// Weight used for each component `l = 1..=k`.
    pub weights: Vec<String>,
    /// `U_n` (all k), `V_n` (k-1), or the single numerator of `T_1`/`T_2`.
    pub components: Vec<f64>,
    /// `σ̂_l²`, `l = 1..=k`.
    pub sigma2: Vec<f64>,
    /// Covariance used for the test: `Σ̂_0`, `Σ̂_{V_n}`, or `[[σ̂_U²]]`/`[[σ̂_V²]]`.
    pub covariance: Vec<Vec<f64>>,
    /// `χ²` value or normal deviate.
    pub statistic: f64,
    /// Chi-square degrees of freedom; `None` for the normal tests.
    pub df: Option<usize>,
    pub p_value: f64,
    pub n: usize,
    pub group_sizes: Vec<usize>,
    pub solver: SolverSummary,
}

impl FittedPanel {
    fn solver_summary(&self) -> SolverSummary {
        let groups = self.group_diagnostics();
        SolverSummary {
            pooled_iterations: self.pooled_diagnostics().iterations,
            group_iterations: groups.iter().map(|g| g.iterations).collect(),
            max_fenchel_residual: groups
                .iter()
                .map(|g| g.max_fenchel_residual)
                .fold(self.pooled_diagnostics().max_fenchel_residual, f64::max),
            converged: self.pooled_diagnostics().converged && groups.iter().all(|g| g.converged),
        }
    }

    fn sigma2_all(&self, weights: &[WeightFn]) -> Result<Vec<f64>> {
        weights.iter().map(|w| self.sigma_hat_sq(w)).collect()
    }

    fn report(&self, method: TestMethod) -> TestReport {
        TestReport {
            method,
            weights: Vec::new(),
            components: Vec::new(),
            sigma2: Vec::new(),
            covariance: Vec::new(),
            statistic: f64::NAN,
            df: None,
            p_value: f64::NAN,
            n: self.dataset().n(),
            group_sizes: self.dataset().group_sizes(),
            solver: self.solver_summary(),
        }
    }

    fn require_groups(&self, at_least: usize) -> Result<()> {
        if self.dataset().k() < at_least {
            return Err(Error::InvalidArgument(format!(
                "test needs at least {at_least} groups, dataset has {}",
                self.dataset().k()
            )));
        }
        Ok(())
    }

    /// `χ²_0 = U_0ᵀ Σ̂_0⁻¹ U_0`, dropping the last component.
    pub fn chi2_u(&self, weights: &[WeightFn]) -> Result<TestReport> {
        self.require_groups(2)?;
        let u = self.u_statistics(weights)?;
        let sigma2 = self.sigma2_all(weights)?;
        let k = u.len();
        let full = covariance_u(&self.dataset().group_sizes(), &sigma2);
        let reduced: Vec<Vec<f64>> = full[..k - 1].iter().map(|row| row[..k - 1].to_vec()).collect();
        let stat = inverse_quadratic_form(&reduced, &u[..k - 1]).ok_or(Error::DegenerateCovariance)?;
        let mut r = self.report(TestMethod::UTest);
        r.statistic = stat.max(0.0);
        r.p_value = chisq_sf(r.statistic, k - 1);
        r.df = Some(k - 1);
        r.components = u;
        r.sigma2 = sigma2;
        r.covariance = reduced;
        Ok(r)
    }

    /// `V_nᵀ Σ̂_{V_n}⁻¹ V_n`.
    pub fn chi2_v(&self, weights: &[WeightFn]) -> Result<TestReport> {
        self.require_groups(2)?;
        let v = self.v_statistics(weights)?;
        let sigma2 = self.sigma2_all(weights)?;
        let cov = covariance_v(&self.dataset().group_sizes(), &sigma2);
        let stat = inverse_quadratic_form(&cov, &v).ok_or(Error::DegenerateCovariance)?;
        let mut r = self.report(TestMethod::VTest);
        let df = v.len();
        r.statistic = stat.max(0.0);
        r.p_value = chisq_sf(r.statistic, df);
        r.df = Some(df);
        r.components = v;
        r.sigma2 = sigma2;
        r.covariance = cov;
        Ok(r)
    }

    /// `T_1 = U_n^{(1)} / σ̂_U` and `T_2 = V_n^{(2)} / σ̂_V` with two-sided
    /// normal p-values.
    pub fn two_sample(&self, weights: &[WeightFn]) -> Result<[TestReport; 2]> {
        if self.dataset().k() != 2 {
            return Err(Error::InvalidArgument(format!(
                "two-sample tests need exactly 2 groups, dataset has {}",
                self.dataset().k()
            )));
        }
        let sigma2 = self.sigma2_all(weights)?;
        let sizes = self.dataset().group_sizes();
        let n = self.dataset().n() as f64;
        let (n1, n2) = (sizes[0] as f64, sizes[1] as f64);
        let var_u = ((n1 / n).sqrt() - (n / n1).sqrt()).powi(2) * sigma2[0] + n2 / n * sigma2[1];
        let var_v = n / n1 * sigma2[0] + n / n2 * sigma2[1];
        if !(var_u > 0.0 && var_v > 0.0 && var_u.is_finite() && var_v.is_finite()) {
            return Err(Error::DegenerateVariance);
        }
        let u1 = self.u_component(1, &weights[0])?;
        let v2 = self.v_statistics(weights)?[0];

        let mut t1 = self.report(TestMethod::TwoSampleT1);
        t1.statistic = u1 / var_u.sqrt();
        t1.p_value = normal_two_sided_p(t1.statistic);
        t1.components = vec![u1];
        t1.sigma2 = sigma2.clone();
        t1.covariance = vec![vec![var_u]];

        let mut t2 = self.report(TestMethod::TwoSampleT2);
        t2.statistic = v2 / var_v.sqrt();
        t2.p_value = normal_two_sided_p(t2.statistic);
        t2.components = vec![v2];
        t2.sigma2 = sigma2;
        t2.covariance = vec![vec![var_v]];
        Ok([t1, t2])
    }
}

fn build_weights(d: &PanelDataset, specs: &[WeightSpec]) -> Result<Vec<WeightFn>> {
    if specs.len() != d.k() {
        return Err(Error::LengthMismatch(specs.len(), d.k()));
    }
    specs.iter().map(|&s| make_weight(d, s)).collect()
}

fn labelled(mut r: TestReport, specs: &[WeightSpec]) -> TestReport {
    r.weights = specs.iter().map(ToString::to_string).collect();
    r
}

/// Chi-square test on `U_n`; `specs[l - 1]` is the weight of component `l`.
pub fn chi2_u_test(d: &PanelDataset, specs: &[WeightSpec], cfg: &IcmConfig) -> Result<TestReport> {
    let weights = build_weights(d, specs)?;
    let r = FittedPanel::fit(d, cfg)?.chi2_u(&weights)?;
    Ok(labelled(r, specs))
}

/// Chi-square test on `V_n`; `specs[l - 1]` is the weight of component `l`.
pub fn chi2_v_test(d: &PanelDataset, specs: &[WeightSpec], cfg: &IcmConfig) -> Result<TestReport> {
    let weights = build_weights(d, specs)?;
    let r = FittedPanel::fit(d, cfg)?.chi2_v(&weights)?;
    Ok(labelled(r, specs))
}

/// Two-sample `T_1` and `T_2` with one weight shared by both components.
pub fn two_sample_tests(d: &PanelDataset, spec: WeightSpec, cfg: &IcmConfig) -> Result<[TestReport; 2]> {
    if d.k() != 2 {
        return Err(Error::InvalidArgument(format!(
            "two-sample tests need exactly 2 groups, dataset has {}",
            d.k()
        )));
    }
    let specs = [spec, spec];
    let weights = build_weights(d, &specs)?;
    let [t1, t2] = FittedPanel::fit(d, cfg)?.two_sample(&weights)?;
    Ok([labelled(t1, &specs), labelled(t2, &specs)])
}

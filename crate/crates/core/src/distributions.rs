//! Tail probabilities for the normal and chi-square limits.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};
use statrs::function::erf::erfc;

/// `P(Z > x)` for a standard normal `Z`.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Two-sided p-value `2 P(Z > |x|)`.
pub fn normal_two_sided_p(x: f64) -> f64 {
    (2.0 * normal_sf(x.abs())).min(1.0)
}

/// `Φ⁻¹(p)` for `p` in `(0, 1)`.
pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// `P(χ²_df > x)`.
pub fn chisq_sf(x: f64, df: usize) -> f64 {
    assert!(df >= 1, "chi-square needs at least one degree of freedom");
    if x <= 0.0 {
        return 1.0;
    }
    ChiSquared::new(df as f64)
        .expect("df >= 1")
        .sf(x)
        .clamp(0.0, 1.0)
}

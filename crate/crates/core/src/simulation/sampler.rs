use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::data::ObservationPath;

use super::{NuMode, TrueMean, MAX_VISIT};

/// Above this mean the draw is split into two halves to keep `e^{-μ}` normal.
const INVERSION_MAX_MEAN: f64 = 200.0;

/// Poisson variate by sequential search of the CDF.
pub fn sample_poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if !(mean > 0.0) {
        return 0;
    }
    if mean > INVERSION_MAX_MEAN {
        let half = mean / 2.0;
        return sample_poisson(half, rng) + sample_poisson(half, rng);
    }
    let u: f64 = rng.random();
    let mut k = 0u64;
    let mut p = (-mean).exp();
    let mut cdf = p;
    // The tail cut guards against `cdf` stalling just below `u` from rounding.
    let cut = mean + 40.0 * mean.sqrt() + 40.0;
    while u > cdf && (k as f64) < cut {
        k += 1;
        p *= mean / k as f64;
        cdf += p;
    }
    k
}

/// `ν ~ Gamma(shape 2, scale ½)`.
pub fn sample_gamma_frailty<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    Gamma::new(2.0, 0.5).expect("valid gamma parameters").sample(rng)
}

/// One subject: `K ~ U{1..10}`, `K` distinct visit times from `{1..10}` in
/// increasing order, and cumulative counts from independent Poisson
/// increments with means `ν (Λ(t_j) - Λ(t_{j-1}))`.
pub fn sample_subject<R: Rng + ?Sized>(
    tm: &TrueMean,
    nu_mode: NuMode,
    subject_id: impl Into<String>,
    rng: &mut R,
) -> ObservationPath {
    sample_subject_with_frailty(tm, nu_mode, subject_id, rng).0
}

/// As [`sample_subject`], also returning the frailty draw.
pub(crate) fn sample_subject_with_frailty<R: Rng + ?Sized>(
    tm: &TrueMean,
    nu_mode: NuMode,
    subject_id: impl Into<String>,
    rng: &mut R,
) -> (ObservationPath, f64) {
    let k = rng.random_range(1..=MAX_VISIT as usize);
    let mut visits: Vec<usize> = index::sample(rng, MAX_VISIT as usize, k).into_vec();
    visits.sort_unstable();
    let times: Vec<f64> = visits.into_iter().map(|v| (v + 1) as f64).collect();

    let nu = match nu_mode {
        NuMode::FixedOne => 1.0,
        NuMode::Gamma2Half => sample_gamma_frailty(rng),
    };
    let mut prev_mean = 0.0;
    let mut total = 0u64;
    let counts = times
        .iter()
        .map(|&t| {
            let mean = tm.eval(t);
            total += sample_poisson(nu * (mean - prev_mean), rng);
            prev_mean = mean;
            total
        })
        .collect();
    (ObservationPath::new(subject_id, tm.group, times, counts), nu)
}

//! Shared statistics helpers for the integration suites.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Chi-square goodness-of-fit statistic against exact cell probabilities;
/// cells with expected count below 5 are pooled. Returns (statistic,
/// degrees of freedom).
pub fn chi_square_statistic(observed: &[u64], expected_probs: &[f64], draws: u64) -> (f64, usize) {
    assert_eq!(observed.len(), expected_probs.len());
    let n = draws as f64;
    let mut stat = 0.0;
    let mut cells = 0usize;
    let mut pooled_obs = 0.0;
    let mut pooled_exp = 0.0;
    for (&obs, &p) in observed.iter().zip(expected_probs) {
        let exp = p * n;
        if exp < 5.0 {
            pooled_obs += obs as f64;
            pooled_exp += exp;
            continue;
        }
        stat += (obs as f64 - exp).powi(2) / exp;
        cells += 1;
    }
    if pooled_exp > 0.0 {
        stat += (pooled_obs - pooled_exp).powi(2) / pooled_exp;
        cells += 1;
    }
    (stat, cells.saturating_sub(1))
}

/// True when the fit is not rejected at the given significance level.
pub fn chi_square_not_rejected(
    observed: &[u64],
    expected_probs: &[f64],
    draws: u64,
    alpha: f64,
) -> bool {
    let (stat, df) = chi_square_statistic(observed, expected_probs, draws);
    if df == 0 {
        return true;
    }
    let dist = ChiSquared::new(df as f64).expect("positive degrees of freedom");
    stat <= dist.inverse_cdf(1.0 - alpha)
}

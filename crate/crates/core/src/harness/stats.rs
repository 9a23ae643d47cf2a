use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation (divides by `len`).
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// `(silencer − baseline) / baseline`.
pub fn improvement_ratio(silencer_q: f64, baseline_q: f64) -> Result<f64> {
    if baseline_q == 0.0 {
        return Err(Error::validation("improvement ratio is undefined for a zero baseline"));
    }
    Ok((silencer_q - baseline_q) / baseline_q)
}

/// Two-sided Wilcoxon rank-sum (Mann–Whitney) p-value using the normal
/// approximation with tie-corrected variance and no continuity correction.
/// Returns 1 when the variance vanishes (all values tied).
pub fn ranksum_test(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::validation("rank-sum test needs two non-empty samples"));
    }
    if a.iter().chain(b).any(|x| x.is_nan()) {
        return Err(Error::validation("rank-sum test input contains NaN"));
    }
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let total = n1 + n2;
    let mut pooled: Vec<(f64, bool)> = a
        .iter()
        .map(|&x| (x, true))
        .chain(b.iter().map(|&x| (x, false)))
        .collect();
    pooled.sort_by(|x, y| x.0.total_cmp(&y.0));

    let mut rank_sum_a = 0.0;
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i;
        while j + 1 < pooled.len() && pooled[j + 1].0 == pooled[i].0 {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        rank_sum_a += avg_rank * pooled[i..=j].iter().filter(|x| x.1).count() as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }

    let expected = n1 * (total + 1.0) / 2.0;
    let var = n1 * n2 / 12.0 * ((total + 1.0) - tie_term / (total * (total - 1.0)));
    if !(var > 0.0) {
        return Ok(1.0);
    }
    let z = (rank_sum_a - expected) / var.sqrt();
    let normal = Normal::standard();
    Ok((2.0 * normal.cdf(-z.abs())).min(1.0))
}

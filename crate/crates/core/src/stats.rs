//! Descriptive statistics, correlation significance and multiple-comparison
//! control shared by the scoring and relevance modules.
//!
//! Standard deviations are sample (n - 1) estimates throughout.

use statrs::distribution::{ContinuousCDF, StudentsT};

pub fn mean(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        None
    } else {
        Some(xs.iter().sum::<f64>() / xs.len() as f64)
    }
}

/// Sample standard deviation; `None` for fewer than two values.
pub fn sample_sd(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs)?;
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    Some((ss / (xs.len() - 1) as f64).sqrt())
}

/// Ratio of the sample standard deviation to the mean. Undefined for a zero
/// mean or fewer than two values.
pub fn coefficient_of_variation(xs: &[f64]) -> Option<f64> {
    let m = mean(xs)?;
    let sd = sample_sd(xs)?;
    if m == 0.0 {
        None
    } else {
        Some(sd / m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correlation {
    pub r: f64,
    /// Two-tailed p-value of the t statistic with n - 2 degrees of freedom.
    pub p: f64,
}

/// Pearson product-moment correlation with its two-tailed p-value.
///
/// Returns `None` when either side has zero variance, the lengths differ, or
/// fewer than three pairs are given.
pub fn pearson_r_p(a: &[f64], b: &[f64]) -> Option<Correlation> {
    let n = a.len();
    if n != b.len() || n < 3 {
        return None;
    }
    let ma = mean(a)?;
    let mb = mean(b)?;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return None;
    }
    let r = (sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0);
    Some(Correlation {
        r,
        p: correlation_p_value(r, n),
    })
}

/// Two-tailed p-value for a correlation `r` observed over `n` pairs.
pub fn correlation_p_value(r: f64, n: usize) -> f64 {
    let df = (n - 2) as f64;
    let denom = 1.0 - r * r;
    if denom <= 0.0 {
        return 0.0;
    }
    let t = r.abs() * (df / denom).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    (2.0 * dist.sf(t)).clamp(0.0, 1.0)
}

/// Smallest |r| reaching two-tailed significance `alpha` with `n` pairs.
pub fn critical_r(n: usize, alpha: f64) -> f64 {
    let df = (n - 2) as f64;
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    let t = dist.inverse_cdf(1.0 - alpha / 2.0);
    t / (t * t + df).sqrt()
}

/// Benjamini-Hochberg step-up procedure: `true` marks rejected hypotheses.
pub fn fdr_correct(pvals: &[f64], q: f64) -> Vec<bool> {
    let m = pvals.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| pvals[i].total_cmp(&pvals[j]));

    let cutoff = order
        .iter()
        .enumerate()
        .filter(|(rank, &i)| pvals[i] <= (rank + 1) as f64 * q / m as f64)
        .map(|(rank, _)| rank + 1)
        .max()
        .unwrap_or(0);

    let mut reject = vec![false; m];
    for &i in &order[..cutoff] {
        reject[i] = true;
    }
    reject
}

/// Benjamini-Hochberg adjusted p-values (monotone, capped at 1).
pub fn fdr_adjust(pvals: &[f64]) -> Vec<f64> {
    let m = pvals.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| pvals[i].total_cmp(&pvals[j]));
    let mut adjusted = vec![0.0; m];
    let mut running = 1.0_f64;
    for (rank, &i) in order.iter().enumerate().rev() {
        running = running.min(pvals[i] * m as f64 / (rank + 1) as f64);
        adjusted[i] = running.min(1.0);
    }
    adjusted
}

/// `1 - (1 - r2) (n - 1) / (n - k - 1)`; undefined unless `n > k + 1`.
pub fn adjusted_r2(r2: f64, n: usize, k: usize) -> Option<f64> {
    if n <= k + 1 {
        return None;
    }
    Some(1.0 - (1.0 - r2) * (n - 1) as f64 / (n - k - 1) as f64)
}

pub fn significance_stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

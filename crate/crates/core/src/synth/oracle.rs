//! Deliberately plain reference implementations for tests. Nothing here
//! calls into the scoring, regression or spectral code it checks.

use ndarray::Array2;

use crate::session::TrialEvent;

/// Scores computed from raw trials in one straightforward pass each.
#[derive(Debug, Clone, PartialEq)]
pub struct NaiveScore {
    pub rt_upper_ms: f64,
    pub tvs: Vec<u8>,
    pub cvs: Vec<f64>,
    pub ce_pct: f64,
    pub oe_pct: f64,
    pub hrt_mean_ms: Option<f64>,
    pub hrt_var: Option<f64>,
    pub cvs_mean: f64,
    pub cvs_var: Option<f64>,
}

fn plain_mean(v: &[f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    let mut s = 0.0;
    for x in v {
        s += x;
    }
    Some(s / v.len() as f64)
}

fn plain_sd(v: &[f64]) -> Option<f64> {
    if v.len() < 2 {
        return None;
    }
    let m = plain_mean(v)?;
    let mut ss = 0.0;
    for x in v {
        ss += (x - m) * (x - m);
    }
    Some((ss / (v.len() - 1) as f64).sqrt())
}

fn plain_cv(v: &[f64]) -> Option<f64> {
    let m = plain_mean(v)?;
    let sd = plain_sd(v)?;
    if m == 0.0 {
        None
    } else {
        Some(sd / m)
    }
}

/// Levels: 0 error, 1 multi-click, 2 slow hit, 3 fast hit, 4 otherwise.
/// Returns `None` when calibration is impossible.
pub fn naive_score(
    trials: &[TrialEvent],
    target_digit: u8,
    trials_per_block: usize,
    window: usize,
    calib_trials: usize,
    rt_lower_ms: f64,
) -> Option<NaiveScore> {
    let mut calib = Vec::new();
    for t in trials.iter().take(calib_trials) {
        if !t.clicks_ms.is_empty() {
            calib.push(t.clicks_ms[0] - t.onset_ms);
        }
    }
    let upper = plain_mean(&calib)? + 2.0 * plain_sd(&calib)?;

    let mut tvs = Vec::new();
    for t in trials {
        let target = t.digit == target_digit;
        let clicks = t.clicks_ms.len();
        let level = if clicks >= 2 {
            1
        } else if target == (clicks > 0) {
            0
        } else if target {
            4
        } else {
            let rt = t.clicks_ms[0] - t.onset_ms;
            if rt < rt_lower_ms {
                3
            } else if rt > upper {
                2
            } else {
                4
            }
        };
        tvs.push(level);
    }
    let cvs = naive_cvs(&tvs, window, 4);

    let n = trials.len() / trials_per_block * trials_per_block;
    let (mut targets, mut ce, mut oe) = (0, 0, 0);
    let mut hits = Vec::new();
    for t in &trials[..n] {
        let clicked = !t.clicks_ms.is_empty();
        if t.digit == target_digit {
            targets += 1;
            if clicked {
                ce += 1;
            }
        } else if clicked {
            hits.push(t.clicks_ms[0] - t.onset_ms);
        } else {
            oe += 1;
        }
    }
    let pct = |a: usize, b: usize| if b == 0 { 0.0 } else { 100.0 * a as f64 / b as f64 };
    Some(NaiveScore {
        rt_upper_ms: upper,
        ce_pct: pct(ce, targets),
        oe_pct: pct(oe, n - targets),
        hrt_mean_ms: plain_mean(&hits),
        hrt_var: plain_cv(&hits),
        cvs_mean: plain_mean(&cvs[..n])?,
        cvs_var: plain_cv(&cvs[..n]),
        tvs,
        cvs,
    })
}

/// Trailing mean recomputed from scratch at every trial.
pub fn naive_cvs(levels: &[u8], window: usize, max_level: u8) -> Vec<f64> {
    (0..levels.len())
        .map(|i| {
            let start = (i + 1).saturating_sub(window);
            let mut s: u64 = 0;
            for l in &levels[start..=i] {
                s += u64::from(*l);
            }
            s as f64 / (i + 1 - start) as f64 / f64::from(max_level)
        })
        .collect()
}

/// Solves `[1 X]' [1 X] b = [1 X]' y` by Gaussian elimination with partial
/// pivoting. Returns (intercept, slopes).
pub fn normal_equation_ols(x: &Array2<f64>, y: &[f64]) -> (f64, Vec<f64>) {
    let (n, k) = x.dim();
    let m = k + 1;
    let at = |i: usize, j: usize| if j == 0 { 1.0 } else { x[[i, j - 1]] };
    let mut a = vec![vec![0.0; m + 1]; m];
    for r in 0..m {
        for c in 0..m {
            a[r][c] = (0..n).map(|i| at(i, r) * at(i, c)).sum();
        }
        a[r][m] = (0..n).map(|i| at(i, r) * y[i]).sum();
    }
    for col in 0..m {
        let pivot = (col..m)
            .max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        for r in 0..m {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..=m {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    let b: Vec<f64> = (0..m).map(|r| a[r][m] / a[r][r]).collect();
    (b[0], b[1..].to_vec())
}

#[derive(Debug, Clone, PartialEq)]
pub struct NaiveCv {
    pub predictions: Vec<f64>,
    pub r2: f64,
    pub rmse: f64,
    pub r: f64,
}

/// Leave-one-out with raw (unstandardized) normal-equation fits.
pub fn naive_loocv(x: &Array2<f64>, y: &[f64]) -> NaiveCv {
    let (n, k) = x.dim();
    let mut predictions = Vec::new();
    for held in 0..n {
        let rows: Vec<usize> = (0..n).filter(|&i| i != held).collect();
        let xt = Array2::from_shape_fn((n - 1, k), |(i, j)| x[[rows[i], j]]);
        let yt: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
        let (b0, b) = normal_equation_ols(&xt, &yt);
        predictions.push(b0 + (0..k).map(|j| b[j] * x[[held, j]]).sum::<f64>());
    }
    let my = y.iter().sum::<f64>() / n as f64;
    let mp = predictions.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy, mut sse) = (0.0, 0.0, 0.0, 0.0);
    for (t, p) in y.iter().zip(&predictions) {
        sxy += (t - my) * (p - mp);
        sxx += (p - mp) * (p - mp);
        syy += (t - my) * (t - my);
        sse += (t - p) * (t - p);
    }
    NaiveCv {
        r2: 1.0 - sse / syy,
        rmse: (sse / n as f64).sqrt(),
        r: sxy / (sxx * syy).sqrt(),
        predictions,
    }
}

/// Every nonempty subset of `0..n` from a bitmask scan.
pub fn all_subsets(n: usize) -> Vec<Vec<usize>> {
    (1u64..1 << n)
        .map(|mask| (0..n).filter(|i| mask >> i & 1 == 1).collect())
        .collect()
}

/// One-sided mean-square power in `[lo, hi)` Hz from a direct O(n^2) DFT.
pub fn dft_band_power(x: &[f64], fs_hz: f64, lo: f64, hi: f64) -> f64 {
    let n = x.len();
    let mut total = 0.0;
    for k in 0..=n / 2 {
        let f = k as f64 * fs_hz / n as f64;
        if f < lo || f >= hi {
            continue;
        }
        let (mut re, mut im) = (0.0, 0.0);
        for (t, v) in x.iter().enumerate() {
            // reduce the phase index first to keep the angle small
            let ang = -2.0 * std::f64::consts::PI * ((k * t) % n) as f64 / n as f64;
            re += v * ang.cos();
            im += v * ang.sin();
        }
        let p = (re * re + im * im) / (n as f64 * n as f64);
        let edge = k == 0 || (n % 2 == 0 && k == n / 2);
        total += if edge { p } else { 2.0 * p };
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_equations_solve_an_exact_system() {
        let x = ndarray::arr2(&[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [2.0, 1.0]]);
        let y: Vec<f64> = x.outer_iter().map(|r| 1.0 + 2.0 * r[0] - r[1]).collect();
        let (b0, b) = normal_equation_ols(&x, &y);
        assert!((b0 - 1.0).abs() < 1e-12);
        assert!((b[0] - 2.0).abs() < 1e-12 && (b[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn naive_cvs_small_case() {
        assert_eq!(naive_cvs(&[4, 0, 4], 2, 4), vec![1.0, 0.5, 0.5]);
    }

    #[test]
    fn dft_of_a_unit_tone() {
        let x: Vec<f64> = (0..200).map(|i| (2.0 * std::f64::consts::PI * 5.0 * i as f64 / 100.0).sin()).collect();
        assert!((dft_band_power(&x, 100.0, 4.0, 6.0) - 0.5).abs() < 1e-12);
    }
}

//! Ordinary least squares, leave-one-out cross-validation and the
//! permutation test on cross-validated correlation.

use nalgebra::DMatrix;
use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::{standardize_global, Standardization, ZScore};
use crate::error::{Error, Result};
use crate::stats::{adjusted_r2, pearson_r_p};

/// A column is collinear when its residual after projection on the
/// preceding columns falls below this fraction of its own norm.
const COLLINEAR_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
}

impl OlsFit {
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.intercept + row.iter().zip(&self.coefficients).map(|(x, b)| x * b).sum::<f64>()
    }
}

/// Least squares with an intercept. Columns are centred and solved by
/// Householder QR; a zero column count fits the mean.
pub fn ols_fit(x: &Array2<f64>, y: &[f64]) -> Result<OlsFit> {
    let (n, k) = x.dim();
    if y.len() != n {
        return Err(Error::arg(format!("{n} rows but {} targets", y.len())));
    }
    if n < k + 2 {
        return Err(Error::arg(format!("{n} samples cannot support {k} predictors and an intercept")));
    }
    let y_mean = y.iter().sum::<f64>() / n as f64;
    if k == 0 {
        return Ok(OlsFit {
            intercept: y_mean,
            coefficients: Vec::new(),
        });
    }
    let x_mean = x.mean_axis(Axis(0)).expect("n > 0");
    let a = DMatrix::from_fn(n, k, |i, j| x[[i, j]] - x_mean[j]);
    let b: Vec<f64> = y.iter().map(|v| v - y_mean).collect();

    let qr = a.clone().qr();
    let r = qr.r();
    let collinear: Vec<usize> = (0..k)
        .filter(|&j| {
            let norm = a.column(j).norm();
            norm == 0.0 || r[(j, j)].abs() <= COLLINEAR_TOL * norm
        })
        .collect();
    if !collinear.is_empty() {
        return Err(Error::SingularFit { columns: collinear });
    }
    let qtb = qr.q().transpose() * DMatrix::from_column_slice(n, 1, &b);
    let mut beta = vec![0.0; k];
    for j in (0..k).rev() {
        let tail: f64 = (j + 1..k).map(|c| r[(j, c)] * beta[c]).sum();
        beta[j] = (qtb[(j, 0)] - tail) / r[(j, j)];
    }
    let intercept = y_mean - beta.iter().zip(x_mean.iter()).map(|(b, m)| b * m).sum::<f64>();
    Ok(OlsFit {
        intercept,
        coefficients: beta,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionMetrics {
    /// 1 - SS_res / SS_tot of the out-of-fold predictions.
    pub r2: f64,
    /// Squared Pearson correlation of prediction and truth.
    pub r2_corr: f64,
    pub adj_r2: Option<f64>,
    pub rmse: f64,
    pub pearson_r: f64,
    pub p_value: f64,
}

/// Metrics between truth and predictions for a model with `k` predictors.
/// Constant predictions give r = 0 and p = 1.
pub fn regression_metrics(y: &[f64], pred: &[f64], k: usize) -> RegressionMetrics {
    let n = y.len();
    let mean = y.iter().sum::<f64>() / n as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    let ss_res: f64 = y.iter().zip(pred).map(|(a, b)| (a - b) * (a - b)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 0.0 };
    let (pearson_r, p_value) = pearson_r_p(pred, y).map_or((0.0, 1.0), |c| (c.r, c.p));
    RegressionMetrics {
        r2,
        r2_corr: pearson_r * pearson_r,
        adj_r2: adjusted_r2(r2, n, k),
        rmse: (ss_res / n as f64).sqrt(),
        pearson_r,
        p_value,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Loocv {
    pub predictions: Vec<f64>,
    pub metrics: RegressionMetrics,
}

/// Out-of-fold predictions: fold `i` trains on every row but `i`.
pub fn loocv_predictions(x: &Array2<f64>, y: &[f64], policy: Standardization) -> Result<Vec<f64>> {
    let (n, k) = x.dim();
    if y.len() != n {
        return Err(Error::arg(format!("{n} rows but {} targets", y.len())));
    }
    let global;
    let x = match policy {
        Standardization::Global => {
            global = standardize_global(x);
            &global
        }
        Standardization::PerFold => x,
    };
    let mut train = Array2::zeros((n - 1, k));
    let mut ty = vec![0.0; n - 1];
    let mut out = Vec::with_capacity(n);
    for held in 0..n {
        let mut r = 0;
        for i in (0..n).filter(|&i| i != held) {
            train.row_mut(r).assign(&x.row(i));
            ty[r] = y[i];
            r += 1;
        }
        let test = x.row(held).to_vec();
        let pred = match policy {
            Standardization::PerFold => {
                let z = ZScore::fit(&train);
                ols_fit(&z.apply(&train), &ty)?.predict(&z.apply_row(&test))
            }
            Standardization::Global => ols_fit(&train, &ty)?.predict(&test),
        };
        out.push(pred);
    }
    Ok(out)
}

pub fn loocv_regress(x: &Array2<f64>, y: &[f64], policy: Standardization) -> Result<Loocv> {
    let predictions = loocv_predictions(x, y, policy)?;
    let metrics = regression_metrics(y, &predictions, x.ncols());
    Ok(Loocv {
        predictions,
        metrics,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PermutationTest {
    pub observed_r: f64,
    pub exceedances: usize,
    pub permutations: usize,
    pub p_value: f64,
}

/// Shuffles `y` `permutations` times; replicate `i` draws its order from a
/// seed derived from `(seed, i)`, so the result is schedule-independent.
pub fn permutation_pvalue(
    x: &Array2<f64>,
    y: &[f64],
    permutations: usize,
    seed: u64,
    policy: Standardization,
) -> Result<PermutationTest> {
    if permutations == 0 {
        return Err(Error::arg("at least one permutation is required"));
    }
    let cv_r = |target: &[f64]| -> Result<f64> {
        let pred = loocv_predictions(x, target, policy)?;
        Ok(pearson_r_p(&pred, target).map_or(0.0, |c| c.r))
    };
    let observed_r = cv_r(y)?;
    let exceedances = (0..permutations)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(crate::seed::derive(seed, &[i as u64]));
            let mut shuffled = y.to_vec();
            shuffled.shuffle(&mut rng);
            cv_r(&shuffled).map(|r| usize::from(r >= observed_r))
        })
        .collect::<Result<Vec<usize>>>()?
        .into_iter()
        .sum::<usize>();
    Ok(PermutationTest {
        observed_r,
        exceedances,
        permutations,
        p_value: (1 + exceedances) as f64 / (permutations + 1) as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::oracle;
    use ndarray::arr2;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn random_x(seed: u64, n: usize, k: usize) -> (Array2<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((n, k), |_| rng.sample(StandardNormal));
        let y = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        (x, y)
    }

    #[test]
    fn exact_linear_target_has_zero_residuals() {
        let (x, _) = random_x(1, 8, 3);
        let y: Vec<f64> = x.outer_iter().map(|r| 2.0 + r[0] - 3.0 * r[1] + 0.5 * r[2]).collect();
        let fit = ols_fit(&x, &y).unwrap();
        for (row, t) in x.outer_iter().zip(&y) {
            assert!((fit.predict(&row.to_vec()) - t).abs() < 1e-9);
        }
        assert!((fit.intercept - 2.0).abs() < 1e-9);
    }

    #[test]
    fn intercept_only_predicts_the_mean() {
        let x = Array2::zeros((5, 0));
        let fit = ols_fit(&x, &[1.0, 2.0, 3.0, 4.0, 10.0]).unwrap();
        assert_eq!(fit.predict(&[]), 4.0);
    }

    #[test]
    fn six_by_two_matches_normal_equations() {
        let (x, y) = random_x(2, 6, 2);
        let fit = ols_fit(&x, &y).unwrap();
        let (b0, b) = oracle::normal_equation_ols(&x, &y);
        assert!((fit.intercept - b0).abs() < 1e-8);
        for (a, b) in fit.coefficients.iter().zip(&b) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn collinear_columns_are_named() {
        let x = arr2(&[[1.0, 2.0, 0.3], [2.0, 4.0, 0.1], [3.0, 6.0, 0.7], [4.0, 8.0, 0.2], [5.0, 10.0, 0.9]]);
        match ols_fit(&x, &[1.0, 2.0, 3.0, 4.0, 6.0]) {
            Err(Error::SingularFit { columns }) => assert_eq!(columns, vec![1]),
            other => panic!("{other:?}"),
        }
        let constant = arr2(&[[1.0], [1.0], [1.0], [1.0]]);
        assert!(matches!(ols_fit(&constant, &[1.0, 2.0, 3.0, 4.0]), Err(Error::SingularFit { .. })));
    }

    #[test]
    fn too_few_samples() {
        let (x, y) = random_x(3, 4, 3);
        assert!(matches!(ols_fit(&x, &y), Err(Error::Argument(_))));
    }

    #[test]
    fn identity_target_is_predicted_perfectly() {
        let x = arr2(&[[1.0], [2.0], [3.0], [5.0], [8.0], [13.0]]);
        let y: Vec<f64> = x.column(0).to_vec();
        let cv = loocv_regress(&x, &y, Standardization::PerFold).unwrap();
        assert!((cv.metrics.pearson_r - 1.0).abs() < 1e-12);
        assert!(cv.metrics.rmse < 1e-12);
    }

    #[test]
    fn standardization_policies_agree_for_ols() {
        let (x, y) = random_x(4, 12, 3);
        let a = loocv_predictions(&x, &y, Standardization::PerFold).unwrap();
        let b = loocv_predictions(&x, &y, Standardization::Global).unwrap();
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q).abs() < 1e-10);
        }
    }

    #[test]
    fn small_problems_match_the_naive_implementation() {
        for seed in 0..40 {
            for n in 4..=6 {
                for k in 1..=2 {
                    if n < k + 3 {
                        continue;
                    }
                    let (x, y) = random_x(100 + seed, n, k);
                    let cv = loocv_regress(&x, &y, Standardization::PerFold).unwrap();
                    let naive = oracle::naive_loocv(&x, &y);
                    for (a, b) in cv.predictions.iter().zip(&naive.predictions) {
                        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
                    }
                    assert!((cv.metrics.r2 - naive.r2).abs() < 1e-10);
                    assert!((cv.metrics.rmse - naive.rmse).abs() < 1e-10);
                    assert!((cv.metrics.pearson_r - naive.r).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn exact_linear_target_gets_the_minimum_p() {
        let mut hits = 0;
        for seed in 0..10 {
            let (x, _) = random_x(seed, 10, 2);
            let y: Vec<f64> = x.outer_iter().map(|r| r[0] - 2.0 * r[1]).collect();
            let t = permutation_pvalue(&x, &y, 500, seed, Standardization::PerFold).unwrap();
            if t.p_value == 1.0 / 501.0 {
                hits += 1;
            }
        }
        assert!(hits >= 9, "{hits}");
    }

    #[test]
    fn permutation_argument_errors_and_determinism() {
        let (x, y) = random_x(5, 8, 1);
        assert!(permutation_pvalue(&x, &y, 0, 1, Standardization::PerFold).is_err());
        let a = permutation_pvalue(&x, &y, 50, 9, Standardization::PerFold).unwrap();
        let b = permutation_pvalue(&x, &y, 50, 9, Standardization::PerFold).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn predictions_follow_row_order(seed in 0u64..10_000, rot in 1usize..9) {
            let (x, y) = random_x(seed, 9, 2);
            let order: Vec<usize> = (0..9).map(|i| (i + rot) % 9).collect();
            let xp = x.select(Axis(0), &order);
            let yp: Vec<f64> = order.iter().map(|&i| y[i]).collect();
            let a = loocv_predictions(&x, &y, Standardization::PerFold).unwrap();
            let b = loocv_predictions(&xp, &yp, Standardization::PerFold).unwrap();
            for (pos, &i) in order.iter().enumerate() {
                prop_assert!((b[pos] - a[i]).abs() < 1e-10);
            }
        }

        #[test]
        fn metric_invariants(seed in 0u64..10_000, k in 1usize..4) {
            let (x, y) = random_x(seed, 10, k);
            let m = loocv_regress(&x, &y, Standardization::PerFold).unwrap().metrics;
            prop_assert!(m.rmse >= 0.0);
            prop_assert!(m.pearson_r.abs() <= 1.0);
            prop_assert!((0.0..=1.0).contains(&m.p_value));
            prop_assert!(m.adj_r2.unwrap() <= m.r2);
        }

        #[test]
        fn permutation_p_is_bounded(seed in 0u64..10_000, perms in 1usize..40) {
            let (x, y) = random_x(seed, 7, 1);
            let t = permutation_pvalue(&x, &y, perms, seed, Standardization::PerFold).unwrap();
            let lo = 1.0 / (perms + 1) as f64;
            prop_assert!(t.p_value >= lo && t.p_value <= 1.0);
        }
    }
}

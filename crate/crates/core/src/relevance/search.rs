//! Univariate screening and the exhaustive-subset search over screened
//! features.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, Standardization};
use super::regression::{loocv_regress, permutation_pvalue, RegressionMetrics};
use crate::error::{Error, Result};

pub const DEFAULT_SCREEN_ALPHA: f64 = 0.1;
pub const DEFAULT_SUBSET_CAP: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenResult {
    pub alpha: f64,
    pub selected: Vec<usize>,
    /// `None` for constant or otherwise infeasible columns.
    pub per_feature: Vec<Option<RegressionMetrics>>,
    pub skipped_constant: Vec<usize>,
}

/// Selects feature `j` when its single-column cross-validated prediction
/// correlates positively with the target at `p < alpha`. Negative
/// correlations mean the held-out predictions move against the truth and
/// are never selected.
pub fn screen_features(ds: &Dataset, alpha: f64, policy: Standardization) -> Result<ScreenResult> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::arg(format!("screening level {alpha} must lie in (0, 1]")));
    }
    let constant = ds.constant_columns();
    if !constant.is_empty() {
        log::warn!("{} constant feature columns skipped", constant.len());
    }
    let per_feature: Vec<Option<RegressionMetrics>> = (0..ds.n_features())
        .into_par_iter()
        .map(|j| {
            if constant.contains(&j) {
                return None;
            }
            loocv_regress(&ds.columns(&[j]), &ds.y, policy).ok().map(|cv| cv.metrics)
        })
        .collect();
    let selected = per_feature
        .iter()
        .enumerate()
        .filter(|(_, m)| m.is_some_and(|m| m.pearson_r > 0.0 && m.p_value < alpha))
        .map(|(j, _)| j)
        .collect();
    Ok(ScreenResult {
        alpha,
        selected,
        per_feature,
        skipped_constant: constant,
    })
}

pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i + 1) as u64)
}

/// Lexicographic `k`-combinations of `0..n`.
#[derive(Debug, Clone)]
pub struct Combinations {
    n: usize,
    current: Option<Vec<usize>>,
}

impl Combinations {
    pub fn new(n: usize, k: usize) -> Self {
        Self {
            n,
            current: (k <= n).then(|| (0..k).collect()),
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.clone()?;
        let k = out.len();
        let mut next = out.clone();
        let advanced = (0..k).rev().find(|&i| next[i] < self.n - k + i).map(|i| {
            next[i] += 1;
            for j in i + 1..k {
                next[j] = next[j - 1] + 1;
            }
        });
        self.current = advanced.map(|_| next);
        Some(out)
    }
}

/// All `2^n - 1` nonempty subsets of `0..n`, by increasing size and
/// lexicographically within a size.
pub fn enumerate_subsets(n: usize, cap: usize) -> Result<impl Iterator<Item = Vec<usize>>> {
    if n == 0 {
        return Err(Error::arg("cannot enumerate subsets of an empty feature set"));
    }
    if n > cap {
        return Err(Error::SubsetCap { n, cap });
    }
    Ok((1..=n).flat_map(move |k| Combinations::new(n, k)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    AdjR2,
    PearsonR,
    Rmse,
}

impl Criterion {
    pub fn as_str(self) -> &'static str {
        match self {
            Criterion::AdjR2 => "adj_r2",
            Criterion::PearsonR => "r",
            Criterion::Rmse => "rmse",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetResult {
    /// Dataset column indices, ascending.
    pub features: Vec<usize>,
    pub metrics: RegressionMetrics,
    pub permutation_p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestSubset {
    /// Criteria this subset is best (or tied best) under.
    pub criteria: Vec<Criterion>,
    pub result: SubsetResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CardinalityRow {
    pub k: usize,
    pub n_subsets: u64,
    pub n_feasible: usize,
    pub best: Vec<BestSubset>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MvpaConfig {
    pub permutations: usize,
    pub seed: u64,
    pub subset_cap: usize,
    pub standardization: Standardization,
    /// Relative tolerance under which two metric values count as tied.
    pub tie_tolerance: f64,
}

impl Default for MvpaConfig {
    fn default() -> Self {
        Self {
            permutations: 500,
            seed: 0,
            subset_cap: DEFAULT_SUBSET_CAP,
            standardization: Standardization::PerFold,
            tie_tolerance: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MvpaReport {
    pub screened: Vec<usize>,
    /// Every feasible subset, best adjusted R² first.
    pub ranked: Vec<SubsetResult>,
    pub table: Vec<CardinalityRow>,
    pub infeasible: usize,
    pub diagnostics: Vec<String>,
}

impl MvpaReport {
    /// Subsets with the highest adjusted R² over all sizes (ties kept).
    pub fn best_adj_r2(&self) -> Vec<&SubsetResult> {
        let best = self
            .table
            .iter()
            .flat_map(|row| &row.best)
            .filter(|b| b.criteria.contains(&Criterion::AdjR2))
            .filter_map(|b| b.result.metrics.adj_r2)
            .fold(f64::NEG_INFINITY, f64::max);
        self.table
            .iter()
            .flat_map(|row| &row.best)
            .filter(|b| b.criteria.contains(&Criterion::AdjR2) && b.result.metrics.adj_r2 == Some(best))
            .map(|b| &b.result)
            .collect()
    }
}

fn tied(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Evaluates every nonempty subset of `screened` by leave-one-out
/// regression and reports, per size, the subsets maximising adjusted R²,
/// maximising r and minimising RMSE. Only reported subsets get a
/// permutation p-value.
pub fn mvpa_search(ds: &Dataset, screened: &[usize], config: &MvpaConfig) -> Result<MvpaReport> {
    if screened.is_empty() {
        return Err(Error::arg("no screened features to search"));
    }
    let mut screened = screened.to_vec();
    screened.sort_unstable();
    screened.dedup();
    if let Some(&bad) = screened.iter().find(|&&j| j >= ds.n_features()) {
        return Err(Error::arg(format!("feature index {bad} out of range")));
    }
    let subsets: Vec<Vec<usize>> = enumerate_subsets(screened.len(), config.subset_cap)?
        .map(|s| s.into_iter().map(|i| screened[i]).collect())
        .collect();

    let evaluated: Vec<(Vec<usize>, Result<RegressionMetrics>)> = subsets
        .into_par_iter()
        .map(|s| {
            let m = loocv_regress(&ds.columns(&s), &ds.y, config.standardization).map(|cv| cv.metrics);
            (s, m)
        })
        .collect();

    let mut diagnostics = Vec::new();
    let mut infeasible = 0;
    let mut feasible = Vec::new();
    for (s, m) in evaluated {
        match m {
            Ok(metrics) => feasible.push(SubsetResult {
                features: s,
                metrics,
                permutation_p: None,
            }),
            Err(e) => {
                infeasible += 1;
                if diagnostics.len() < 20 {
                    diagnostics.push(format!("subset {s:?}: {e}"));
                }
            }
        }
    }
    if feasible.is_empty() {
        diagnostics.push("every subset was infeasible".into());
    }

    let tol = config.tie_tolerance;
    let n = screened.len();
    let mut table = Vec::new();
    for k in 1..=n {
        let group: Vec<&SubsetResult> = feasible.iter().filter(|r| r.features.len() == k).collect();
        if group.is_empty() {
            continue;
        }
        let mut best: Vec<BestSubset> = Vec::new();
        let mut mark = |criterion: Criterion, winners: Vec<&SubsetResult>| {
            for w in winners {
                match best.iter_mut().find(|b| b.result.features == w.features) {
                    Some(b) => b.criteria.push(criterion),
                    None => best.push(BestSubset {
                        criteria: vec![criterion],
                        result: w.clone(),
                    }),
                }
            }
        };
        let top_adj = group
            .iter()
            .filter_map(|r| r.metrics.adj_r2)
            .fold(f64::NEG_INFINITY, f64::max);
        if top_adj.is_finite() {
            mark(
                Criterion::AdjR2,
                group
                    .iter()
                    .copied()
                    .filter(|r| r.metrics.adj_r2.is_some_and(|a| tied(a, top_adj, tol)))
                    .collect(),
            );
        }
        let top_r = group.iter().map(|r| r.metrics.pearson_r).fold(f64::NEG_INFINITY, f64::max);
        mark(
            Criterion::PearsonR,
            group.iter().copied().filter(|r| tied(r.metrics.pearson_r, top_r, tol)).collect(),
        );
        let low_rmse = group.iter().map(|r| r.metrics.rmse).fold(f64::INFINITY, f64::min);
        mark(
            Criterion::Rmse,
            group.iter().copied().filter(|r| tied(r.metrics.rmse, low_rmse, tol)).collect(),
        );
        best.sort_by(|a, b| a.result.features.cmp(&b.result.features));
        table.push(CardinalityRow {
            k,
            n_subsets: binomial(n, k),
            n_feasible: group.len(),
            best,
        });
    }

    // Each subset's permutation seed depends only on its own features.
    let jobs: Vec<(usize, usize)> = table
        .iter()
        .enumerate()
        .flat_map(|(r, row)| (0..row.best.len()).map(move |b| (r, b)))
        .collect();
    let pvals: Vec<Result<f64>> = jobs
        .par_iter()
        .map(|&(r, b)| {
            let features = &table[r].best[b].result.features;
            let path: Vec<u64> = features.iter().map(|&f| f as u64).collect();
            permutation_pvalue(
                &ds.columns(features),
                &ds.y,
                config.permutations,
                crate::seed::derive(config.seed, &path),
                config.standardization,
            )
            .map(|t| t.p_value)
        })
        .collect();
    for (&(r, b), p) in jobs.iter().zip(pvals) {
        table[r].best[b].result.permutation_p = Some(p?);
    }
    for row in &table {
        for b in &row.best {
            if let Some(f) = feasible.iter_mut().find(|f| f.features == b.result.features) {
                f.permutation_p = b.result.permutation_p;
            }
        }
    }

    feasible.sort_by(|a, b| {
        let adj = |r: &SubsetResult| r.metrics.adj_r2.unwrap_or(f64::NEG_INFINITY);
        adj(b)
            .total_cmp(&adj(a))
            .then(b.metrics.pearson_r.total_cmp(&a.metrics.pearson_r))
            .then(a.features.len().cmp(&b.features.len()))
            .then(a.features.cmp(&b.features))
    });

    Ok(MvpaReport {
        screened,
        ranked: feasible,
        table,
        infeasible,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::oracle;
    use ndarray::Array2;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn dataset(x: Array2<f64>, y: Vec<f64>) -> Dataset {
        let n = x.nrows();
        let names = (0..x.ncols()).map(|j| format!("f{j}")).collect();
        Dataset::new(x, y, names, (0..n).map(|i| format!("P{i}")).collect()).unwrap()
    }

    fn noise(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Array2<f64> {
        Array2::from_shape_fn((n, p), |_| rng.sample(StandardNormal))
    }

    #[test]
    fn subset_counts() {
        assert_eq!(enumerate_subsets(3, 20).unwrap().count(), 7);
        let by_size = |n: usize, k: usize| enumerate_subsets(n, 20).unwrap().filter(|s| s.len() == k).count();
        assert_eq!(by_size(12, 8), 495);
        assert_eq!(by_size(6, 3), 20);
        assert_eq!(binomial(12, 8), 495);
        assert!(matches!(enumerate_subsets(0, 20), Err(Error::Argument(_))));
        assert!(matches!(enumerate_subsets(21, 20), Err(Error::SubsetCap { n: 21, cap: 20 })));
        assert_eq!(enumerate_subsets(21, 21).unwrap().next(), Some(vec![0]));
    }

    #[test]
    fn subsets_match_the_bitmask_scan() {
        for n in 1..=8 {
            let mut ours: Vec<Vec<usize>> = enumerate_subsets(n, 20).unwrap().collect();
            let mut scan = oracle::all_subsets(n);
            let sizes: Vec<usize> = ours.iter().map(Vec::len).collect();
            assert!(sizes.windows(2).all(|w| w[0] <= w[1]));
            ours.sort();
            scan.sort();
            assert_eq!(ours, scan);
        }
    }

    proptest! {
        #[test]
        fn counts_are_binomial(n in 1usize..=14) {
            let subsets: Vec<Vec<usize>> = enumerate_subsets(n, 20).unwrap().collect();
            prop_assert_eq!(subsets.len() as u64, (1u64 << n) - 1);
            for k in 1..=n {
                prop_assert_eq!(subsets.iter().filter(|s| s.len() == k).count() as u64, binomial(n, k));
            }
            let mut dedup = subsets.clone();
            dedup.sort();
            dedup.dedup();
            prop_assert_eq!(dedup.len(), subsets.len());
        }
    }

    #[test]
    fn planted_column_is_screened() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = noise(&mut rng, 12, 20);
        let y: Vec<f64> = x.column(7).iter().map(|v| v + 0.05 * rng.sample::<f64, _>(StandardNormal)).collect();
        let s = screen_features(&dataset(x, y), 0.1, Standardization::PerFold).unwrap();
        assert!(s.selected.contains(&7));
    }

    #[test]
    fn null_screening_rate_stays_below_the_level() {
        // One-sided selection under the null: bounded by alpha, and well
        // below it because leave-one-out predictions are biased against
        // the truth.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (mut selected, mut total) = (0, 0);
        for _ in 0..30 {
            let x = noise(&mut rng, 10, 50);
            let y: Vec<f64> = (0..10).map(|_| rng.sample(StandardNormal)).collect();
            let s = screen_features(&dataset(x, y), 0.1, Standardization::PerFold).unwrap();
            selected += s.selected.len();
            total += 50;
        }
        let rate = selected as f64 / total as f64;
        assert!(rate <= 0.1, "{rate}");
    }

    #[test]
    fn constant_columns_are_skipped() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut x = noise(&mut rng, 8, 3);
        x.column_mut(1).fill(2.0);
        let y = x.column(0).to_vec();
        let s = screen_features(&dataset(x, y), 0.1, Standardization::PerFold).unwrap();
        assert_eq!(s.skipped_constant, vec![1]);
        assert!(s.per_feature[1].is_none());
    }

    #[test]
    fn single_feature_gives_one_row() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = noise(&mut rng, 10, 3);
        let y = x.column(2).to_vec();
        let r = mvpa_search(
            &dataset(x, y),
            &[2],
            &MvpaConfig {
                permutations: 20,
                ..MvpaConfig::default()
            },
        )
        .unwrap();
        assert_eq!(r.table.len(), 1);
        assert_eq!(r.table[0].best.len(), 1);
        assert_eq!(r.table[0].best[0].criteria.len(), 3);
    }

    #[test]
    fn duplicated_column_ties_are_kept() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut x = noise(&mut rng, 10, 3);
        let c0 = x.column(0).to_owned();
        x.column_mut(1).assign(&c0);
        let y: Vec<f64> = c0.iter().map(|v| v + 0.1 * rng.sample::<f64, _>(StandardNormal)).collect();
        let r = mvpa_search(
            &dataset(x, y),
            &[0, 1, 2],
            &MvpaConfig {
                permutations: 20,
                ..MvpaConfig::default()
            },
        )
        .unwrap();
        let k1 = &r.table[0];
        let winners: Vec<&Vec<usize>> = k1
            .best
            .iter()
            .filter(|b| b.criteria.contains(&Criterion::AdjR2))
            .map(|b| &b.result.features)
            .collect();
        assert_eq!(winners, vec![&vec![0], &vec![1]]);
        assert!(r.infeasible >= 1, "the duplicated pair is singular");
    }

    #[test]
    fn planted_pair_leads_its_size_and_every_winner_contains_it() {
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(50 + seed);
            let x = noise(&mut rng, 20, 6);
            let y: Vec<f64> = x
                .outer_iter()
                .map(|r| 1.5 * r[1] - 2.0 * r[4] + 0.3 * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let r = mvpa_search(
                &dataset(x, y),
                &[0, 1, 2, 3, 4, 5],
                &MvpaConfig {
                    permutations: 50,
                    seed,
                    ..MvpaConfig::default()
                },
            )
            .unwrap();
            assert_eq!(r.ranked.len() + r.infeasible, 63);
            let pairs = &r.table[1];
            assert_eq!(pairs.best.len(), 1);
            assert_eq!(pairs.best[0].result.features, vec![1, 4]);
            assert_eq!(pairs.best[0].criteria.len(), 3);
            for w in r.best_adj_r2() {
                assert!(w.features.contains(&1) && w.features.contains(&4), "{:?}", w.features);
            }
        }
    }

    #[test]
    fn search_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = noise(&mut rng, 10, 4);
        let y: Vec<f64> = (0..10).map(|_| rng.sample(StandardNormal)).collect();
        let ds = dataset(x, y);
        let cfg = MvpaConfig {
            permutations: 30,
            seed: 4,
            ..MvpaConfig::default()
        };
        assert_eq!(mvpa_search(&ds, &[0, 1, 2, 3], &cfg).unwrap(), mvpa_search(&ds, &[3, 2, 1, 0], &cfg).unwrap());
        assert!(mvpa_search(&ds, &[], &cfg).is_err());
    }
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scoring::PerformanceSummary;
use crate::stats::{fdr_correct, pearson_r_p};

const M: usize = 6;

/// Pairwise Pearson correlations among the six behavioral measures.
/// Entries involving an undefined measure (missing for some participant,
/// or constant) are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorCorrelations {
    pub measures: Vec<String>,
    pub r: [[Option<f64>; M]; M],
    pub p: [[Option<f64>; M]; M],
    /// Benjamini-Hochberg rejections over the defined off-diagonal pairs.
    pub significant: [[bool; M]; M],
    pub q: f64,
}

pub fn behavioral_correlations(summaries: &[PerformanceSummary], q: f64) -> Result<BehaviorCorrelations> {
    if summaries.len() < 4 {
        return Err(Error::arg(format!(
            "{} participants; at least 4 are needed",
            summaries.len()
        )));
    }
    let columns: Vec<Option<Vec<f64>>> = (0..M)
        .map(|m| summaries.iter().map(|s| s.measures()[m]).collect())
        .collect();

    let mut r = [[None; M]; M];
    let mut p = [[None; M]; M];
    let mut pairs = Vec::new();
    for a in 0..M {
        for b in a..M {
            let (Some(x), Some(y)) = (&columns[a], &columns[b]) else {
                continue;
            };
            if let Some(c) = pearson_r_p(x, y) {
                let rv = if a == b { 1.0 } else { c.r };
                let pv = if a == b { 0.0 } else { c.p };
                r[a][b] = Some(rv);
                r[b][a] = Some(rv);
                p[a][b] = Some(pv);
                p[b][a] = Some(pv);
                if a != b {
                    pairs.push((a, b, c.p));
                }
            }
        }
    }
    let mask = fdr_correct(&pairs.iter().map(|t| t.2).collect::<Vec<_>>(), q);
    let mut significant = [[false; M]; M];
    for ((a, b, _), keep) in pairs.into_iter().zip(mask) {
        significant[a][b] = keep;
        significant[b][a] = keep;
    }
    Ok(BehaviorCorrelations {
        measures: PerformanceSummary::MEASURES.iter().map(|s| s.to_string()).collect(),
        r,
        p,
        significant,
        q,
    })
}

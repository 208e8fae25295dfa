use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_PARTICIPANTS: usize = 4;

/// Participants along rows, features along columns, one target per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub y: Vec<f64>,
    pub feature_names: Vec<String>,
    pub participant_ids: Vec<String>,
}

impl Dataset {
    pub fn new(
        x: Array2<f64>,
        y: Vec<f64>,
        feature_names: Vec<String>,
        participant_ids: Vec<String>,
    ) -> Result<Self> {
        let (n, p) = x.dim();
        if n < MIN_PARTICIPANTS {
            return Err(Error::arg(format!(
                "{n} participants; at least {MIN_PARTICIPANTS} are needed"
            )));
        }
        if y.len() != n || participant_ids.len() != n {
            return Err(Error::arg(format!(
                "{n} feature rows, {} targets, {} participant ids",
                y.len(),
                participant_ids.len()
            )));
        }
        if feature_names.len() != p {
            return Err(Error::arg(format!("{p} columns but {} names", feature_names.len())));
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::arg("dataset contains NaN or infinite values"));
        }
        Ok(Self {
            x,
            y,
            feature_names,
            participant_ids,
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    /// Columns with zero variance over all participants.
    pub fn constant_columns(&self) -> Vec<usize> {
        (0..self.n_features())
            .filter(|&j| {
                let c = self.x.column(j);
                c.iter().all(|v| *v == c[0])
            })
            .collect()
    }

    pub fn columns(&self, subset: &[usize]) -> Array2<f64> {
        self.x.select(Axis(1), subset)
    }

    /// Keeps only the rows where `keep` is true.
    pub fn filter_rows(&self, keep: &[bool]) -> Result<Self> {
        let rows: Vec<usize> = (0..self.n()).filter(|&i| keep[i]).collect();
        Self::new(
            self.x.select(Axis(0), &rows),
            rows.iter().map(|&i| self.y[i]).collect(),
            self.feature_names.clone(),
            rows.iter().map(|&i| self.participant_ids[i].clone()).collect(),
        )
    }

    /// Drops participants whose target exceeds the mean by more than two
    /// sample SDs; returns the reduced set and the removed ids.
    pub fn exclude_high_target_outliers(&self) -> Result<(Self, Vec<String>)> {
        let keep = crate::scoring::exclude_outliers(&self.y)?;
        let removed = self
            .participant_ids
            .iter()
            .zip(&keep)
            .filter(|(_, k)| !**k)
            .map(|(id, _)| id.clone())
            .collect();
        Ok((self.filter_rows(&keep)?, removed))
    }

    pub fn with_target(&self, y: Vec<f64>) -> Result<Self> {
        Self::new(self.x.clone(), y, self.feature_names.clone(), self.participant_ids.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Standardization {
    /// z-scores from the training rows of each fold only.
    #[default]
    PerFold,
    /// z-scores over all participants before cross-validation.
    Global,
}

/// Column means and sample SDs; a zero SD is stored as 1 so constant
/// columns map to zero instead of NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct ZScore {
    pub mean: Array1<f64>,
    pub sd: Array1<f64>,
}

impl ZScore {
    pub fn fit(x: &Array2<f64>) -> Self {
        let n = x.nrows() as f64;
        let mean = x.mean_axis(Axis(0)).expect("at least one row");
        let sd = x
            .axis_iter(Axis(1))
            .zip(mean.iter())
            .map(|(c, m)| {
                let ss: f64 = c.iter().map(|v| (v - m) * (v - m)).sum();
                let sd = (ss / (n - 1.0)).sqrt();
                if sd > 0.0 && sd.is_finite() {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, sd }
    }

    pub fn apply(&self, x: &Array2<f64>) -> Array2<f64> {
        (x - &self.mean.view().insert_axis(Axis(0))) / &self.sd.view().insert_axis(Axis(0))
    }

    pub fn apply_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(self.sd.iter()))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

/// Global z-scoring of every column.
pub fn standardize_global(x: &Array2<f64>) -> Array2<f64> {
    ZScore::fit(x).apply(x)
}

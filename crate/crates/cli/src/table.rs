use std::path::Path;

use anyhow::{anyhow, bail, Context};
use ndarray::Array2;
use vigilkit_core::relevance::Dataset;
use vigilkit_core::scoring::PerformanceSummary;

/// A numeric CSV keyed by the participant id in its first column. Empty
/// cells are missing values.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub ids: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl Table {
    pub fn read(path: &Path) -> anyhow::Result<Self> {
        let mut rdr = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
        let header = rdr.headers()?.clone();
        if header.len() < 2 {
            bail!("{}: expected a participant column and at least one value column", path.display());
        }
        let columns: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let (mut ids, mut rows) = (Vec::new(), Vec::new());
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.with_context(|| format!("{}: row {}", path.display(), line + 2))?;
            ids.push(rec[0].to_string());
            let row = rec
                .iter()
                .skip(1)
                .zip(&columns)
                .map(|(cell, col)| {
                    let cell = cell.trim();
                    if cell.is_empty() {
                        Ok(None)
                    } else {
                        cell.parse::<f64>().map(Some).map_err(|_| {
                            anyhow!("{}: row {}, column {col}: {cell:?} is not a number", path.display(), line + 2)
                        })
                    }
                })
                .collect::<anyhow::Result<Vec<_>>>()?;
            rows.push(row);
        }
        Ok(Self { ids, columns, rows })
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

/// Features are every column other than the target and the known
/// performance measures. Participants without a target are dropped and
/// reported; a missing feature value is an error.
pub fn dataset(features: &Table, target: &str, targets: Option<&Table>) -> anyhow::Result<(Dataset, Vec<String>)> {
    let measures = PerformanceSummary::MEASURES;
    let feature_cols: Vec<usize> = (0..features.columns.len())
        .filter(|&j| features.columns[j] != target && !measures.contains(&features.columns[j].as_str()))
        .collect();
    if feature_cols.is_empty() {
        bail!("the feature table has no feature columns");
    }
    let lookup = |i: usize| -> anyhow::Result<Option<f64>> {
        match targets {
            Some(t) => {
                let col = t.column(target).ok_or_else(|| anyhow!("target column {target:?} not found"))?;
                Ok(t.ids.iter().position(|id| *id == features.ids[i]).and_then(|r| t.rows[r][col]))
            }
            None => {
                let col = features
                    .column(target)
                    .ok_or_else(|| anyhow!("target column {target:?} not found"))?;
                Ok(features.rows[i][col])
            }
        }
    };

    let mut warnings = Vec::new();
    let (mut data, mut y, mut ids) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..features.ids.len() {
        let Some(t) = lookup(i)? else {
            warnings.push(format!("participant {} has no {target} value and was dropped", features.ids[i]));
            continue;
        };
        for &j in &feature_cols {
            let v = features.rows[i][j]
                .ok_or_else(|| anyhow!("participant {} has no value for {}", features.ids[i], features.columns[j]))?;
            data.push(v);
        }
        y.push(t);
        ids.push(features.ids[i].clone());
    }
    let x = Array2::from_shape_vec((ids.len(), feature_cols.len()), data).expect("row-major fill");
    let names = feature_cols.iter().map(|&j| features.columns[j].clone()).collect();
    Ok((Dataset::new(x, y, names, ids)?, warnings))
}

use nalgebra::DMatrix;
use ndarray::{Array2, Axis};

use super::recording::Recording;
use crate::error::Result;

#[derive(Debug, Clone, Default)]
pub struct EogReport {
    /// Ocular channels actually used as regressors.
    pub regressors: Vec<String>,
    /// scalp channels x regressors
    pub coefficients: Vec<Vec<f64>>,
    pub warnings: Vec<String>,
}

/// Subtracts from every scalp channel its least-squares projection onto the
/// (mean-removed) ocular channels, fit over the whole recording. Ocular
/// channels with zero variance are skipped. The output contains scalp
/// channels only.
pub fn regress_out_eog(rec: &Recording) -> Result<(Recording, EogReport)> {
    let scalp = rec.scalp_indices();
    let mut report = EogReport::default();

    let mut regressors = Vec::new();
    for idx in rec.eog_indices() {
        let row = rec.data.row(idx);
        let m = row.mean().unwrap_or(0.0);
        let var = row.iter().map(|v| (v - m) * (v - m)).sum::<f64>();
        if var > 0.0 {
            regressors.push((idx, m));
        } else {
            let msg = format!("ocular channel {} has zero variance; skipped", rec.channel_names[idx]);
            log::warn!("{msg}");
            report.warnings.push(msg);
        }
    }
    if rec.eog_channels.len() != 3 {
        report.warnings.push(format!(
            "expected 3 ocular channels, found {}",
            rec.eog_channels.len()
        ));
    }

    let scalp_data = rec.data.select(Axis(0), &scalp);
    let names: Vec<String> = scalp.iter().map(|&i| rec.channel_names[i].clone()).collect();
    let out_meta = |data: Array2<f64>| Recording {
        fs_hz: rec.fs_hz,
        data,
        channel_names: names.clone(),
        eog_channels: Vec::new(),
        state: rec.state,
    };

    if regressors.is_empty() {
        let msg = "no usable ocular regressor; scalp data left unchanged".to_string();
        log::warn!("{msg}");
        report.warnings.push(msg);
        return Ok((out_meta(scalp_data), report));
    }

    let n = rec.n_samples();
    let k = regressors.len();
    let eog = Array2::from_shape_fn((k, n), |(r, s)| {
        let (idx, m) = regressors[r];
        rec.data[[idx, s]] - m
    });

    // B = (S E^T)(E E^T)^+
    let gram = eog.dot(&eog.t());
    let cross = scalp_data.dot(&eog.t());
    let gram = DMatrix::from_fn(k, k, |i, j| gram[[i, j]]);
    let tol = gram.amax() * 1e-12;
    let pinv = gram
        .pseudo_inverse(tol)
        .map_err(|e| crate::error::Error::Numeric(e.to_string()))?;
    let pinv = Array2::from_shape_fn((k, k), |(i, j)| pinv[(i, j)]);
    let coef = cross.dot(&pinv);
    let cleaned = &scalp_data - &coef.dot(&eog);

    report.regressors = regressors
        .iter()
        .map(|(i, _)| rec.channel_names[*i].clone())
        .collect();
    report.coefficients = coef.outer_iter().map(|r| r.to_vec()).collect();
    Ok((out_meta(cleaned), report))
}

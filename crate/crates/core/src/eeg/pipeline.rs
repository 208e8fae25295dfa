use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::eog::regress_out_eog;
use super::features::{band_power_ratios, BandSet, BpRoiVector, FeatureOptions, RoiMap};
use super::filter::{bandpass, decimate, notch};
use super::ica::{infomax_ica, reconstruct, reject_artifact_ics, IcaConfig, RejectConfig};
use super::recording::Recording;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub bandpass_hz: (f64, f64),
    /// `None` skips the notch.
    pub notch_hz: Option<f64>,
    /// `None` keeps the input rate.
    pub target_fs_hz: Option<f64>,
    pub ica: IcaConfig,
    pub reject: RejectConfig,
    pub features: FeatureOptions,
    pub bands: BandSet,
    pub rois: RoiMap,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            bandpass_hz: (1.0, 70.0),
            notch_hz: Some(50.0),
            target_fs_hz: Some(256.0),
            ica: IcaConfig::default(),
            reject: RejectConfig::default(),
            features: FeatureOptions::default(),
            bands: BandSet::default(),
            rois: RoiMap::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub fs_in_hz: f64,
    pub fs_out_hz: f64,
    pub ocular_regressors: Vec<String>,
    pub warnings: Vec<String>,
    pub n_components: usize,
    pub rejected_components: Vec<usize>,
    pub ica_converged: bool,
    pub ica_sweeps: usize,
    pub ica_seed: u64,
    pub gaussian_like_components: usize,
}

impl Provenance {
    pub fn rejected_count(&self) -> usize {
        self.rejected_components.len()
    }
}

/// Band-pass, notch, decimate, ocular regression, ICA cleaning, then
/// band-power ratios.
pub fn extract_features(raw: &Recording, config: &PipelineConfig) -> Result<(BpRoiVector, Provenance)> {
    let (lo, hi) = config.bandpass_hz;
    let mut rec = bandpass(raw, lo, hi)?;
    if let Some(f0) = config.notch_hz {
        rec = notch(&rec, f0)?;
    }
    if let Some(fs) = config.target_fs_hz {
        rec = decimate(&rec, fs)?;
    }
    let (rec, eog) = regress_out_eog(&rec)?;

    let ica = infomax_ica(&rec, &config.ica)?;
    if !ica.converged {
        log::warn!("ICA stopped after {} sweeps without converging", ica.sweeps);
    }
    let keep = reject_artifact_ics(&ica.sources, &config.reject)?;
    let data = reconstruct(&ica.sources, &keep, &ica.mixing, Some(&ica.channel_means))?;
    let clean = rec.with_data(data, rec.fs_hz);

    let features = band_power_ratios(&clean, &config.bands, &config.rois, config.features)?;
    let provenance = Provenance {
        fs_in_hz: raw.fs_hz,
        fs_out_hz: clean.fs_hz,
        ocular_regressors: eog.regressors,
        warnings: eog.warnings,
        n_components: ica.n_components(),
        rejected_components: keep
            .iter()
            .enumerate()
            .filter(|(_, k)| !**k)
            .map(|(i, _)| i)
            .collect(),
        ica_converged: ica.converged,
        ica_sweeps: ica.sweeps,
        ica_seed: config.ica.seed,
        gaussian_like_components: ica.gaussian_like,
    };
    Ok((features, provenance))
}

/// Runs recordings in parallel; recording `i` uses an ICA seed derived from
/// `master_seed` and `i`, so results do not depend on scheduling.
pub fn extract_many(
    recordings: &[Recording],
    config: &PipelineConfig,
    master_seed: u64,
) -> Vec<Result<(BpRoiVector, Provenance)>> {
    recordings
        .par_iter()
        .enumerate()
        .map(|(i, rec)| {
            let mut cfg = config.clone();
            cfg.ica.seed = crate::seed::derive(master_seed, &[i as u64]);
            extract_features(rec, &cfg)
        })
        .collect()
}

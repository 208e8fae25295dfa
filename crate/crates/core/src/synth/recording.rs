//! Synthetic multichannel recordings with planted band-limited sources.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::eeg::features::RoiMap;
use crate::eeg::recording::{Recording, RestState};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topography {
    AllScalp,
    /// Unit weight on every channel of the named regions.
    Regions(Vec<String>),
    Weights(Vec<(String, f64)>),
}

/// One shared time course, band-limited to `[lo_hz, hi_hz)`, with RMS
/// `rms_uv` where its weight is 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSource {
    pub lo_hz: f64,
    pub hi_hz: f64,
    pub rms_uv: f64,
    pub topography: Topography,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcularPlant {
    pub rms_uv: f64,
    /// Weight of the ocular signal on each ocular channel.
    pub eog_weights: Vec<f64>,
    /// Leakage into every scalp channel (same order as the scalp list);
    /// empty means a frontal-decreasing default.
    pub scalp_leak: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikePlant {
    pub count: usize,
    pub amplitude_uv: f64,
    pub width_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingPlant {
    pub scalp_channels: Vec<String>,
    pub eog_channels: Vec<String>,
    pub background_rms_uv: f64,
    pub sources: Vec<BandSource>,
    pub line_noise_uv: Option<f64>,
    pub ocular: Option<OcularPlant>,
    pub spikes: Option<SpikePlant>,
    #[serde(default = "RoiMap::default")]
    pub rois: RoiMap,
}

impl RecordingPlant {
    /// The 64 default-map scalp channels plus three ocular channels, white
    /// background only.
    pub fn biosemi64() -> Self {
        let rois = RoiMap::default();
        Self {
            scalp_channels: rois.rois().iter().flat_map(|r| r.channels.clone()).collect(),
            eog_channels: vec!["EXG1".into(), "EXG2".into(), "EXG3".into()],
            background_rms_uv: 5.0,
            sources: Vec::new(),
            line_noise_uv: None,
            ocular: None,
            spikes: None,
            rois,
        }
    }

    fn weights(&self, topo: &Topography) -> Result<Vec<f64>> {
        let idx = |name: &str| {
            self.scalp_channels
                .iter()
                .position(|c| c == name)
                .ok_or_else(|| Error::arg(format!("unknown scalp channel {name}")))
        };
        let mut w = vec![0.0; self.scalp_channels.len()];
        match topo {
            Topography::AllScalp => w.fill(1.0),
            Topography::Regions(labels) => {
                for label in labels {
                    let r = self
                        .rois
                        .index_of(label)
                        .ok_or_else(|| Error::arg(format!("unknown region {label}")))?;
                    for c in &self.rois.rois()[r].channels {
                        w[idx(c)?] = 1.0;
                    }
                }
            }
            Topography::Weights(list) => {
                for (c, v) in list {
                    w[idx(c)?] = *v;
                }
            }
        }
        Ok(w)
    }
}

/// Gaussian noise restricted to `[lo, hi)` Hz by zeroing FFT bins, scaled to
/// the requested RMS.
pub fn band_limited_noise(rng: &mut ChaCha8Rng, n: usize, fs: f64, lo: f64, hi: f64, rms: f64) -> Vec<f64> {
    let mut buf: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(rng.sample(StandardNormal), 0.0))
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, v) in buf.iter_mut().enumerate() {
        let f = k.min(n - k) as f64 * fs / n as f64;
        if f < lo || f >= hi {
            *v = Complex64::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let x: Vec<f64> = buf.iter().map(|c| c.re).collect();
    let current = (x.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    if current == 0.0 {
        return x;
    }
    x.into_iter().map(|v| v * rms / current).collect()
}

pub fn gen_recording(
    plant: &RecordingPlant,
    duration_s: f64,
    fs_hz: f64,
    state: RestState,
    seed: u64,
) -> Result<Recording> {
    if duration_s < 10.0 {
        return Err(Error::arg("synthetic recordings must last at least 10 s"));
    }
    let n = (duration_s * fs_hz).round() as usize;
    let n_scalp = plant.scalp_channels.len();
    let n_eog = plant.eog_channels.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Array2::<f64>::zeros((n_scalp + n_eog, n));

    for mut row in data.outer_iter_mut() {
        for v in row.iter_mut() {
            *v = plant.background_rms_uv * rng.sample::<f64, _>(StandardNormal);
        }
    }
    for src in &plant.sources {
        if !(src.lo_hz >= 0.0 && src.lo_hz < src.hi_hz && src.hi_hz <= fs_hz / 2.0) {
            return Err(Error::arg(format!("source band {}..{} Hz is invalid", src.lo_hz, src.hi_hz)));
        }
        let w = plant.weights(&src.topography)?;
        let s = band_limited_noise(&mut rng, n, fs_hz, src.lo_hz, src.hi_hz, src.rms_uv);
        add_weighted(&mut data, &w, &s);
    }
    if let Some(amp) = plant.line_noise_uv {
        let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let line: Vec<f64> = (0..n)
            .map(|i| amp * (std::f64::consts::TAU * 50.0 * i as f64 / fs_hz + phase).sin())
            .collect();
        add_weighted(&mut data, &vec![1.0; n_scalp + n_eog], &line);
    }
    if let Some(oc) = &plant.ocular {
        if oc.eog_weights.len() != n_eog {
            return Err(Error::arg("one ocular weight per ocular channel is required"));
        }
        let leak = if oc.scalp_leak.is_empty() {
            (0..n_scalp).map(|c| 0.8 * (1.0 - c as f64 / n_scalp as f64)).collect()
        } else if oc.scalp_leak.len() == n_scalp {
            oc.scalp_leak.clone()
        } else {
            return Err(Error::arg("one leak weight per scalp channel is required"));
        };
        let eye = band_limited_noise(&mut rng, n, fs_hz, 0.5, 4.0, oc.rms_uv);
        let mut w = leak;
        w.extend(&oc.eog_weights);
        add_weighted(&mut data, &w, &eye);
    }
    if let Some(sp) = &plant.spikes {
        let width = ((sp.width_ms / 1000.0 * fs_hz).round() as usize).max(1);
        let mut s = vec![0.0; n];
        for _ in 0..sp.count {
            let at = rng.random_range(0..n.saturating_sub(width).max(1));
            for j in 0..width.min(n - at) {
                s[at + j] += sp.amplitude_uv * (1.0 - j as f64 / width as f64);
            }
        }
        let w: Vec<f64> = (0..n_scalp).map(|_| rng.random_range(0.3..1.0)).chain(vec![0.0; n_eog]).collect();
        add_weighted(&mut data, &w, &s);
    }

    let mut names = plant.scalp_channels.clone();
    names.extend(plant.eog_channels.iter().cloned());
    Recording::new(fs_hz, data, names, plant.eog_channels.clone(), state)
}

fn add_weighted(data: &mut Array2<f64>, weights: &[f64], signal: &[f64]) {
    for (mut row, &w) in data.outer_iter_mut().zip(weights) {
        if w != 0.0 {
            for (v, s) in row.iter_mut().zip(signal) {
                *v += w * s;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eeg::features::power_spectrum;

    #[test]
    fn band_limited_noise_stays_in_band() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = band_limited_noise(&mut rng, 5120, 256.0, 8.0, 12.0, 3.0);
        let (df, p) = power_spectrum(&x, 256.0, &mut FftPlanner::new());
        let total: f64 = p.iter().sum();
        let inband: f64 = p.iter().enumerate().filter(|(k, _)| (8.0..12.0).contains(&(*k as f64 * df))).map(|(_, v)| v).sum();
        assert!((inband / total - 1.0).abs() < 1e-9);
        assert!((total.sqrt() - 3.0).abs() < 1e-9);
    }

    #[test]
    fn generator_is_pure_in_its_seed() {
        let mut plant = RecordingPlant::biosemi64();
        plant.sources.push(BandSource {
            lo_hz: 8.0,
            hi_hz: 12.0,
            rms_uv: 10.0,
            topography: Topography::Regions(vec!["LP".into(), "MP".into(), "RP".into()]),
        });
        plant.ocular = Some(OcularPlant {
            rms_uv: 40.0,
            eog_weights: vec![1.0, 0.6, 0.3],
            scalp_leak: vec![],
        });
        let a = gen_recording(&plant, 10.0, 256.0, RestState::EyesClosed, 4).unwrap();
        let b = gen_recording(&plant, 10.0, 256.0, RestState::EyesClosed, 4).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n_channels(), 67);
        assert!(gen_recording(&plant, 9.0, 256.0, RestState::EyesClosed, 4).is_err());
    }
}

//! Band-power-ratio features over scalp regions.

use std::collections::HashSet;

use ndarray::{Array2, Axis};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::recording::Recording;
use crate::error::{Error, Result};

pub const N_BANDS: usize = 12;
pub const N_ROIS: usize = 14;
pub const N_FEATURES: usize = N_BANDS * N_ROIS;
pub const ROI_LABELS: [&str; N_ROIS] = [
    "LPF", "MPF", "RPF", "LF", "MF", "RF", "LC", "MC", "RC", "LP", "MP", "RP", "LT", "RT",
];
pub const MIN_DURATION_S: f64 = 10.0;

const DEFAULT_BANDS: &str = include_str!("../../data/bands_default.json");
const DEFAULT_ROIS: &str = include_str!("../../data/roi_biosemi64.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub name: String,
    pub lo_hz: f64,
    pub hi_hz: f64,
}

/// Twelve sorted, contiguous half-open intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BandFile", into = "BandFile")]
pub struct BandSet(Vec<Band>);

#[derive(Serialize, Deserialize)]
struct BandFile {
    bands: Vec<Band>,
}

impl TryFrom<BandFile> for BandSet {
    type Error = Error;
    fn try_from(f: BandFile) -> Result<Self> {
        BandSet::new(f.bands)
    }
}

impl From<BandSet> for BandFile {
    fn from(b: BandSet) -> Self {
        BandFile { bands: b.0 }
    }
}

impl BandSet {
    pub fn new(bands: Vec<Band>) -> Result<Self> {
        if bands.len() != N_BANDS {
            return Err(Error::arg(format!("expected {N_BANDS} bands, got {}", bands.len())));
        }
        for b in &bands {
            if !(b.lo_hz.is_finite() && b.hi_hz.is_finite() && b.lo_hz >= 0.0 && b.lo_hz < b.hi_hz) {
                return Err(Error::arg(format!("band {} has invalid edges", b.name)));
            }
        }
        for w in bands.windows(2) {
            if w[0].hi_hz != w[1].lo_hz {
                return Err(Error::arg(format!(
                    "bands {} and {} are not contiguous",
                    w[0].name, w[1].name
                )));
            }
        }
        Ok(Self(bands))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn bands(&self) -> &[Band] {
        &self.0
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.0.iter().position(|b| b.name == name)
    }
}

impl Default for BandSet {
    fn default() -> Self {
        Self::from_json(DEFAULT_BANDS).expect("bundled band set is valid")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Roi {
    pub label: String,
    pub channels: Vec<String>,
}

/// Fourteen disjoint, nonempty channel groups. File order is feature order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RoiFile", into = "RoiFile")]
pub struct RoiMap(Vec<Roi>);

#[derive(Serialize, Deserialize)]
struct RoiFile {
    rois: Vec<Roi>,
}

impl TryFrom<RoiFile> for RoiMap {
    type Error = Error;
    fn try_from(f: RoiFile) -> Result<Self> {
        RoiMap::new(f.rois)
    }
}

impl From<RoiMap> for RoiFile {
    fn from(m: RoiMap) -> Self {
        RoiFile { rois: m.0 }
    }
}

impl RoiMap {
    pub fn new(rois: Vec<Roi>) -> Result<Self> {
        if rois.len() != N_ROIS {
            return Err(Error::arg(format!("expected {N_ROIS} regions, got {}", rois.len())));
        }
        let mut labels = HashSet::new();
        let mut seen = HashSet::new();
        for r in &rois {
            if !labels.insert(r.label.as_str()) {
                return Err(Error::arg(format!("duplicate region {}", r.label)));
            }
            if r.channels.is_empty() {
                return Err(Error::arg(format!("region {} has no channels", r.label)));
            }
            for c in &r.channels {
                if !seen.insert(c.as_str()) {
                    return Err(Error::arg(format!("channel {c} belongs to two regions")));
                }
            }
        }
        Ok(Self(rois))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// One channel list per standard label, in the standard order.
    pub fn from_groups(groups: [Vec<String>; N_ROIS]) -> Result<Self> {
        Self::new(
            ROI_LABELS
                .iter()
                .zip(groups)
                .map(|(l, channels)| Roi {
                    label: l.to_string(),
                    channels,
                })
                .collect(),
        )
    }

    pub fn rois(&self) -> &[Roi] {
        &self.0
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.0.iter().position(|r| r.label == label)
    }

    /// Row indices of each region's channels in `rec`; every channel must be
    /// a scalp channel of the recording.
    pub fn resolve(&self, rec: &Recording) -> Result<Vec<Vec<usize>>> {
        self.0
            .iter()
            .map(|r| {
                r.channels
                    .iter()
                    .map(|c| {
                        rec.channel_index(c)
                            .filter(|_| !rec.eog_channels.contains(c))
                            .ok_or_else(|| {
                                Error::arg(format!("region {} needs scalp channel {c}", r.label))
                            })
                    })
                    .collect()
            })
            .collect()
    }
}

impl Default for RoiMap {
    fn default() -> Self {
        Self::from_json(DEFAULT_ROIS).expect("bundled region map is valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spectrum {
    /// One periodogram of the whole recording.
    #[default]
    WholeRecording,
    /// Hann-windowed segments of `segment_s` seconds with 50% overlap.
    Welch { segment_s: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    AverageThenRatio,
    RatioThenAverage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureOptions {
    pub spectrum: Spectrum,
    pub aggregation: Aggregation,
}

/// One-sided power spectrum scaled so that its sum is the mean square.
/// Returns (bin width in Hz, powers for bins 0..=n/2).
pub fn power_spectrum(x: &[f64], fs_hz: f64, planner: &mut FftPlanner<f64>) -> (f64, Vec<f64>) {
    let n = x.len();
    let fft = planner.plan_fft_forward(n);
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft.process(&mut buf);
    let scale = 1.0 / (n as f64 * n as f64);
    let half = n / 2;
    let power = (0..=half)
        .map(|k| {
            let p = buf[k].norm_sqr() * scale;
            if k == 0 || (n % 2 == 0 && k == half) {
                p
            } else {
                2.0 * p
            }
        })
        .collect();
    (fs_hz / n as f64, power)
}

fn welch_spectrum(
    x: &[f64],
    fs_hz: f64,
    segment_s: u32,
    planner: &mut FftPlanner<f64>,
) -> Result<(f64, Vec<f64>)> {
    let len = (segment_s as f64 * fs_hz).round() as usize;
    if len < 2 || len > x.len() {
        return Err(Error::arg(format!(
            "Welch segment of {segment_s} s does not fit a {}-sample recording",
            x.len()
        )));
    }
    let step = len / 2;
    let window: Vec<f64> = (0..len)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / len as f64).cos())
        .collect();
    let wpow = window.iter().map(|w| w * w).sum::<f64>() / len as f64;
    let mut acc = vec![0.0; len / 2 + 1];
    let mut segments = 0;
    let mut start = 0;
    while start + len <= x.len() {
        let seg: Vec<f64> = x[start..start + len]
            .iter()
            .zip(&window)
            .map(|(v, w)| v * w)
            .collect();
        let (_, p) = power_spectrum(&seg, fs_hz, planner);
        for (a, v) in acc.iter_mut().zip(p) {
            *a += v;
        }
        segments += 1;
        start += step;
    }
    let norm = 1.0 / (segments as f64 * wpow);
    Ok((fs_hz / len as f64, acc.into_iter().map(|v| v * norm).collect()))
}

fn check_bands(rec: &Recording, bands: &BandSet) -> Result<()> {
    let nyquist = rec.fs_hz / 2.0;
    let first = &bands.bands()[0];
    let last = &bands.bands()[N_BANDS - 1];
    if first.lo_hz < 1.0 || last.hi_hz > nyquist {
        return Err(Error::arg(format!(
            "bands span [{}, {}) Hz but must lie within [1, {nyquist}) Hz",
            first.lo_hz, last.hi_hz
        )));
    }
    Ok(())
}

/// Absolute band powers, channels x bands, for the given channel rows.
pub fn channel_band_powers(
    rec: &Recording,
    rows: &[usize],
    bands: &BandSet,
    spectrum: Spectrum,
) -> Result<Array2<f64>> {
    if rec.duration_s() < MIN_DURATION_S {
        return Err(Error::arg(format!(
            "recording lasts {:.2} s; at least {MIN_DURATION_S} s are needed",
            rec.duration_s()
        )));
    }
    check_bands(rec, bands)?;
    let mut planner = FftPlanner::new();
    let mut out = Array2::zeros((rows.len(), N_BANDS));
    for (r, &row) in rows.iter().enumerate() {
        let x = rec.data.row(row).to_vec();
        let (df, power) = match spectrum {
            Spectrum::WholeRecording => power_spectrum(&x, rec.fs_hz, &mut planner),
            Spectrum::Welch { segment_s } => welch_spectrum(&x, rec.fs_hz, segment_s, &mut planner)?,
        };
        for (k, p) in power.iter().enumerate() {
            let f = k as f64 * df;
            // bands are contiguous, so at most one matches
            if let Some(b) = bands.bands().iter().position(|b| f >= b.lo_hz && f < b.hi_hz) {
                out[[r, b]] += p;
            }
        }
    }
    Ok(out)
}

/// Absolute power per region and band (ROI x band), averaged over channels.
pub fn roi_band_powers(rec: &Recording, bands: &BandSet, rois: &RoiMap, spectrum: Spectrum) -> Result<Array2<f64>> {
    let groups = rois.resolve(rec)?;
    let mut out = Array2::zeros((N_ROIS, N_BANDS));
    for (g, rows) in groups.iter().enumerate() {
        let p = channel_band_powers(rec, rows, bands, spectrum)?;
        out.row_mut(g).assign(&p.mean_axis(Axis(0)).expect("nonempty region"));
    }
    Ok(out)
}

/// 168 ratios ordered region-major then band; each region's row sums to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BpRoiVector(pub Vec<f64>);

impl BpRoiVector {
    pub fn get(&self, roi: usize, band: usize) -> f64 {
        self.0[roi * N_BANDS + band]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn roi_row(&self, roi: usize) -> &[f64] {
        &self.0[roi * N_BANDS..(roi + 1) * N_BANDS]
    }
}

pub fn band_power_ratios(
    rec: &Recording,
    bands: &BandSet,
    rois: &RoiMap,
    options: FeatureOptions,
) -> Result<BpRoiVector> {
    let groups = rois.resolve(rec)?;
    let mut out = Vec::with_capacity(N_FEATURES);
    for (g, rows) in groups.iter().enumerate() {
        let label = &rois.rois()[g].label;
        let p = channel_band_powers(rec, rows, bands, options.spectrum)?;
        let zero = || Error::Pipeline(format!("region {label} has zero band power"));
        let ratios: Vec<f64> = match options.aggregation {
            Aggregation::AverageThenRatio => {
                let mean = p.mean_axis(Axis(0)).expect("nonempty region");
                normalize(mean.to_vec()).ok_or_else(zero)?
            }
            Aggregation::RatioThenAverage => {
                let mut acc = vec![0.0; N_BANDS];
                for ch in p.outer_iter() {
                    let r = normalize(ch.to_vec()).ok_or_else(zero)?;
                    for (a, v) in acc.iter_mut().zip(r) {
                        *a += v / rows.len() as f64;
                    }
                }
                acc
            }
        };
        out.extend(ratios);
    }
    Ok(BpRoiVector(out))
}

fn normalize(p: Vec<f64>) -> Option<Vec<f64>> {
    let total: f64 = p.iter().sum();
    (total > 0.0 && total.is_finite()).then(|| p.into_iter().map(|v| v / total).collect())
}

/// `ROI_band` labels in feature order.
pub fn feature_names(bands: &BandSet, rois: &RoiMap) -> Vec<String> {
    rois.rois()
        .iter()
        .flat_map(|r| bands.bands().iter().map(move |b| format!("{}_{}", r.label, b.name)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eeg::recording::RestState;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    /// Fourteen single-channel regions, channels named R0..R13.
    pub(crate) fn small_map() -> RoiMap {
        RoiMap::from_groups(std::array::from_fn(|i| vec![format!("R{i}")])).unwrap()
    }

    fn rec_from(rows: Vec<Vec<f64>>, fs: f64) -> Recording {
        let n = rows[0].len();
        let c = rows.len();
        let names = (0..c).map(|i| format!("R{i}")).collect();
        Recording::new(
            fs,
            Array2::from_shape_vec((c, n), rows.into_iter().flatten().collect()).unwrap(),
            names,
            vec![],
            RestState::EyesClosed,
        )
        .unwrap()
    }

    fn tones(freqs: &[f64], fs: f64, secs: f64) -> Vec<f64> {
        let n = (fs * secs) as usize;
        (0..n)
            .map(|i| freqs.iter().map(|f| (2.0 * PI * f * i as f64 / fs).sin()).sum())
            .collect()
    }

    #[test]
    fn bundled_defaults_are_valid() {
        let bands = BandSet::default();
        assert_eq!(bands.bands()[0].lo_hz, 1.0);
        assert_eq!(bands.bands()[11].hi_hz, 48.0);
        let rois = RoiMap::default();
        let labels: Vec<&str> = rois.rois().iter().map(|r| r.label.as_str()).collect();
        assert_eq!(labels, ROI_LABELS);
        let total: usize = rois.rois().iter().map(|r| r.channels.len()).sum();
        assert_eq!(total, 64);
        let names = feature_names(&bands, &rois);
        assert_eq!(names.len(), N_FEATURES);
        assert_eq!(names[0], "LPF_delta");
        assert_eq!(names[N_FEATURES - 1], "RT_gamma4");
    }

    #[test]
    fn invalid_band_sets_and_maps() {
        let mut b = BandSet::default().bands().to_vec();
        b[3].lo_hz = 10.5;
        assert!(BandSet::new(b).is_err());
        assert!(BandSet::new(BandSet::default().bands()[..11].to_vec()).is_err());

        let mut rois = RoiMap::default().rois().to_vec();
        rois[1].channels.push("Fp1".into());
        assert!(RoiMap::new(rois).is_err());
        let mut rois = RoiMap::default().rois().to_vec();
        rois[4].channels.clear();
        assert!(RoiMap::new(rois).is_err());
    }

    #[test]
    fn ten_hz_tone_is_all_alpha() {
        let x = tones(&[10.0], 256.0, 20.0);
        let rec = rec_from(vec![x; 14], 256.0);
        let v = band_power_ratios(&rec, &BandSet::default(), &small_map(), FeatureOptions::default()).unwrap();
        let bands = BandSet::default();
        let a1 = bands.index_of("alpha1").unwrap();
        let a2 = bands.index_of("alpha2").unwrap();
        for roi in 0..N_ROIS {
            assert!(v.get(roi, a1) + v.get(roi, a2) > 0.99);
        }
    }

    #[test]
    fn two_tones_split_evenly() {
        let x = tones(&[6.0, 10.0], 256.0, 20.0);
        let rec = rec_from(vec![x; 14], 256.0);
        let bands = BandSet::default();
        let v = band_power_ratios(&rec, &bands, &small_map(), FeatureOptions::default()).unwrap();
        let theta = bands.index_of("theta").unwrap();
        let alpha2 = bands.index_of("alpha2").unwrap();
        for roi in 0..N_ROIS {
            assert!((v.get(roi, theta) - 0.5).abs() < 0.01);
            assert!((v.get(roi, alpha2) - 0.5).abs() < 0.01);
            for b in (0..N_BANDS).filter(|b| *b != theta && *b != alpha2) {
                assert!(v.get(roi, b) < 0.01);
            }
        }
    }

    #[test]
    fn spectrum_matches_mean_square() {
        let x: Vec<f64> = (0..1001).map(|i| ((i * 37 % 101) as f64 - 50.0) / 7.0).collect();
        let (_, p) = power_spectrum(&x, 100.0, &mut FftPlanner::new());
        let ms = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
        assert!((p.iter().sum::<f64>() - ms).abs() < 1e-9 * ms);
    }

    #[test]
    fn welch_option_agrees_on_a_pure_tone() {
        let x = tones(&[10.0], 256.0, 30.0);
        let rec = rec_from(vec![x; 14], 256.0);
        let opts = FeatureOptions {
            spectrum: Spectrum::Welch { segment_s: 4 },
            aggregation: Aggregation::RatioThenAverage,
        };
        let v = band_power_ratios(&rec, &BandSet::default(), &small_map(), opts).unwrap();
        assert!(v.get(0, 2) + v.get(0, 3) > 0.99);
    }

    #[test]
    fn preconditions() {
        let short = rec_from(vec![tones(&[10.0], 256.0, 9.0); 14], 256.0);
        assert!(matches!(
            band_power_ratios(&short, &BandSet::default(), &small_map(), FeatureOptions::default()),
            Err(Error::Argument(_))
        ));
        let flat = rec_from(vec![vec![0.0; 2560]; 14], 256.0);
        assert!(matches!(
            band_power_ratios(&flat, &BandSet::default(), &small_map(), FeatureOptions::default()),
            Err(Error::Pipeline(_))
        ));
        let low_rate = rec_from(vec![tones(&[10.0], 90.0, 12.0); 14], 90.0);
        assert!(band_power_ratios(&low_rate, &BandSet::default(), &small_map(), FeatureOptions::default()).is_err());
        let missing = rec_from(vec![tones(&[10.0], 256.0, 12.0); 13], 256.0);
        assert!(band_power_ratios(&missing, &BandSet::default(), &small_map(), FeatureOptions::default()).is_err());
    }

    fn noise_rec(seed: u64, gain: f64) -> Recording {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let rows = (0..14)
            .map(|_| (0..2600).map(|_| gain * rng.random_range(-1.0..1.0)).collect())
            .collect();
        rec_from(rows, 256.0)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn rows_sum_to_one_and_gain_invariant(seed in 0u64..1000, gain in 0.01f64..100.0) {
            let opts = FeatureOptions::default();
            let base = band_power_ratios(&noise_rec(seed, 1.0), &BandSet::default(), &small_map(), opts).unwrap();
            let scaled = band_power_ratios(&noise_rec(seed, gain), &BandSet::default(), &small_map(), opts).unwrap();
            for roi in 0..N_ROIS {
                let s: f64 = base.roi_row(roi).iter().sum();
                prop_assert!((s - 1.0).abs() < 1e-9);
                prop_assert!(base.roi_row(roi).iter().all(|v| (0.0..=1.0).contains(v)));
            }
            for (a, b) in base.as_slice().iter().zip(scaled.as_slice()) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }

        #[test]
        fn band_powers_never_exceed_signal_power(seed in 0u64..1000) {
            let rec = noise_rec(seed, 3.0);
            let p = roi_band_powers(&rec, &BandSet::default(), &small_map(), Spectrum::WholeRecording).unwrap();
            for roi in 0..N_ROIS {
                let x = rec.data.row(roi);
                let ms = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
                prop_assert!(p.row(roi).sum() <= ms * (1.0 + 1e-12));
            }
        }
    }
}

//! Synthetic feature cohorts with a planted linear target.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::eeg::features::{BandSet, RoiMap, N_BANDS, N_FEATURES, N_ROIS};
use crate::error::{Error, Result};
use crate::relevance::Dataset;
use crate::scoring::PerformanceSummary;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedFeature {
    pub roi: String,
    pub band: String,
    pub coefficient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantSpec {
    pub target_measure: String,
    pub planted_features: Vec<PlantedFeature>,
    pub noise_sd: f64,
    pub n_participants: usize,
    /// Log-scale spread of the positive weights behind each composition.
    #[serde(default = "default_spread")]
    pub composition_sigma: f64,
    #[serde(default)]
    pub intercept: f64,
}

fn default_spread() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    pub dataset: Dataset,
    /// Dense coefficient vector over the 168 features.
    pub coefficients: Vec<f64>,
    pub planted_indices: Vec<usize>,
}

impl PlantSpec {
    pub fn resolve(&self, bands: &BandSet, rois: &RoiMap) -> Result<Vec<(usize, f64)>> {
        if !PerformanceSummary::MEASURES.contains(&self.target_measure.as_str()) {
            return Err(Error::arg(format!("unknown target measure {:?}", self.target_measure)));
        }
        self.planted_features
            .iter()
            .map(|p| {
                let r = rois
                    .index_of(&p.roi)
                    .ok_or_else(|| Error::arg(format!("unknown region {:?}", p.roi)))?;
                let b = bands
                    .index_of(&p.band)
                    .ok_or_else(|| Error::arg(format!("unknown band {:?}", p.band)))?;
                Ok((r * N_BANDS + b, p.coefficient))
            })
            .collect()
    }
}

/// Rows are compositions: each region's twelve ratios are normalised
/// lognormal weights. The target is `intercept + sum(c_j x_j) + noise`.
pub fn gen_cohort(plant: &PlantSpec, seed: u64) -> Result<Cohort> {
    if plant.n_participants < 6 {
        return Err(Error::arg("a cohort needs at least 6 participants"));
    }
    if !(plant.noise_sd >= 0.0 && plant.composition_sigma > 0.0) {
        return Err(Error::arg("noise and composition spreads must be nonnegative and positive"));
    }
    let bands = BandSet::default();
    let rois = RoiMap::default();
    let planted = plant.resolve(&bands, &rois)?;
    let mut coefficients = vec![0.0; N_FEATURES];
    for &(j, c) in &planted {
        if coefficients[j] != 0.0 {
            return Err(Error::arg("a feature is planted twice"));
        }
        coefficients[j] = c;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights = LogNormal::new(0.0, plant.composition_sigma).map_err(|e| Error::arg(e.to_string()))?;
    let n = plant.n_participants;
    let mut x = Array2::zeros((n, N_FEATURES));
    for i in 0..n {
        for r in 0..N_ROIS {
            let w: Vec<f64> = (0..N_BANDS).map(|_| weights.sample(&mut rng)).collect();
            let total: f64 = w.iter().sum();
            for (b, v) in w.into_iter().enumerate() {
                x[[i, r * N_BANDS + b]] = v / total;
            }
        }
    }
    let noise = Normal::new(0.0, plant.noise_sd.max(f64::MIN_POSITIVE)).expect("valid sd");
    let y: Vec<f64> = x
        .outer_iter()
        .map(|row| {
            let e = if plant.noise_sd > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            plant.intercept + planted.iter().map(|&(j, c)| c * row[j]).sum::<f64>() + e
        })
        .collect();
    let dataset = Dataset::new(
        x,
        y,
        crate::eeg::features::feature_names(&bands, &rois),
        (1..=n).map(|i| format!("S{i:02}")).collect(),
    )?;
    let mut planted_indices: Vec<usize> = planted.iter().map(|p| p.0).collect();
    planted_indices.sort_unstable();
    Ok(Cohort {
        dataset,
        coefficients,
        planted_indices,
    })
}

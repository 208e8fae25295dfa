//! Logistic Infomax ICA with natural-gradient updates on PCA-whitened data,
//! plus the artifact-IC policy and back-projection used by the pipeline.
//!
//! The training loop follows the classic stochastic scheme: data columns are
//! visited in a fresh random order every sweep in small blocks, the learning
//! rate is annealed whenever successive weight changes turn by more than
//! `anneal_deg`, and training restarts with a smaller rate if the weights
//! blow up.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::recording::Recording;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IcaConfig {
    pub max_sweeps: usize,
    /// Convergence threshold on the Frobenius norm of one sweep's weight change.
    pub tolerance: f64,
    /// Defaults to `0.00065 / ln(components)`.
    pub learning_rate: Option<f64>,
    /// Defaults to `ceil(min(5 ln T, 0.3 T))`.
    pub block_size: Option<usize>,
    pub anneal_deg: f64,
    pub anneal_step: f64,
    /// Whitening keeps eigen-directions above this fraction of the largest.
    pub rank_tolerance: f64,
    pub seed: u64,
}

impl Default for IcaConfig {
    fn default() -> Self {
        Self {
            max_sweeps: 512,
            tolerance: 1e-6,
            learning_rate: None,
            block_size: None,
            anneal_deg: 60.0,
            anneal_step: 0.9,
            rank_tolerance: 1e-7,
            seed: 0,
        }
    }
}

const BLOWUP_LIMIT: f64 = 1e8;
const RESTART_FACTOR: f64 = 0.9;
const MAX_RESTARTS: usize = 50;
const MIN_LEARNING_RATE: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct IcaDecomposition {
    /// components x channels, applied to mean-removed data.
    pub unmixing: Array2<f64>,
    /// channels x components.
    pub mixing: Array2<f64>,
    /// components x samples, unit variance, ordered by projected variance.
    pub sources: Array2<f64>,
    pub channel_means: Array1<f64>,
    pub converged: bool,
    pub sweeps: usize,
    pub restarts: usize,
    /// Sources whose excess kurtosis is statistically indistinguishable
    /// from zero. Two or more means the rotation among them is arbitrary.
    pub gaussian_like: usize,
}

impl IcaDecomposition {
    pub fn n_components(&self) -> usize {
        self.sources.nrows()
    }

    pub fn identifiable(&self) -> bool {
        self.gaussian_like < 2
    }
}

pub fn infomax_ica(rec: &Recording, config: &IcaConfig) -> Result<IcaDecomposition> {
    infomax_ica_matrix(&rec.data, config)
}

/// Runs ICA on a channels x samples matrix.
pub fn infomax_ica_matrix(data: &Array2<f64>, config: &IcaConfig) -> Result<IcaDecomposition> {
    let (channels, samples) = data.dim();
    if channels == 0 {
        return Err(Error::arg("ICA needs at least one channel"));
    }
    if samples < 20 * channels {
        return Err(Error::arg(format!(
            "{samples} samples are too few for {channels} channels (need 20 per channel)"
        )));
    }

    let means = data.mean_axis(Axis(1)).expect("samples > 0");
    let centered = data - &means.view().insert_axis(Axis(1));

    let (sphere, basis, eigvals) = whitening(&centered, config.rank_tolerance)?;
    let k = sphere.nrows();
    let white = sphere.dot(&centered);

    let mut fit = if k == 1 {
        Fit {
            weights: Array2::eye(1),
            converged: true,
            sweeps: 0,
            restarts: 0,
        }
    } else {
        train(&white, config)?
    };

    let weights_inv = invert(&fit.weights)?;
    let mut unmixing = fit.weights.dot(&sphere);
    let mut sources = unmixing.dot(&centered);
    // inverse sphere: E D^(1/2)
    let unsphere = Array2::from_shape_fn((channels, k), |(c, j)| basis[[c, j]] * eigvals[j].sqrt());
    let mut mixing = unsphere.dot(&weights_inv);

    for i in 0..k {
        let sd = row_sd(sources.row(i).as_slice().expect("contiguous"));
        if sd > 0.0 {
            sources.row_mut(i).mapv_inplace(|v| v / sd);
            unmixing.row_mut(i).mapv_inplace(|v| v / sd);
            mixing.column_mut(i).mapv_inplace(|v| v * sd);
        }
    }

    // order by back-projected variance
    let mut order: Vec<usize> = (0..k).collect();
    let power: Vec<f64> = (0..k)
        .map(|i| mixing.column(i).iter().map(|v| v * v).sum())
        .collect();
    order.sort_by(|&a, &b| power[b].total_cmp(&power[a]));
    let unmixing = unmixing.select(Axis(0), &order);
    let sources = sources.select(Axis(0), &order);
    let mixing = mixing.select(Axis(1), &order);

    let kurt_se = (24.0 / samples as f64).sqrt();
    let gaussian_like = sources
        .outer_iter()
        .filter(|s| excess_kurtosis(s.as_slice().expect("contiguous")).abs() < 3.0 * kurt_se)
        .count();
    fit.converged &= fit.weights.iter().all(|v| v.is_finite());

    Ok(IcaDecomposition {
        unmixing,
        mixing,
        sources,
        channel_means: means,
        converged: fit.converged,
        sweeps: fit.sweeps,
        restarts: fit.restarts,
        gaussian_like,
    })
}

/// Returns (sphering matrix k x C, eigenvector basis C x k, eigenvalues k).
fn whitening(centered: &Array2<f64>, rank_tol: f64) -> Result<(Array2<f64>, Array2<f64>, Vec<f64>)> {
    let (channels, samples) = centered.dim();
    let cov = centered.dot(&centered.t()) / (samples as f64 - 1.0);
    let eig = SymmetricEigen::new(DMatrix::from_fn(channels, channels, |i, j| cov[[i, j]]));
    let mut order: Vec<usize> = (0..channels).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = eig.eigenvalues[order[0]];
    if !(top > 0.0) {
        return Err(Error::Pipeline("data have zero variance; nothing to decompose".into()));
    }
    let kept: Vec<usize> = order
        .into_iter()
        .filter(|&i| eig.eigenvalues[i] > rank_tol * top)
        .collect();
    let k = kept.len();
    let eigvals: Vec<f64> = kept.iter().map(|&i| eig.eigenvalues[i]).collect();
    let basis = Array2::from_shape_fn((channels, k), |(c, j)| eig.eigenvectors[(c, kept[j])]);
    let sphere = Array2::from_shape_fn((k, channels), |(j, c)| basis[[c, j]] / eigvals[j].sqrt());
    Ok((sphere, basis, eigvals))
}

struct Fit {
    weights: Array2<f64>,
    converged: bool,
    sweeps: usize,
    restarts: usize,
}

fn train(white: &Array2<f64>, config: &IcaConfig) -> Result<Fit> {
    let (k, samples) = white.dim();
    let mut lrate = config
        .learning_rate
        .unwrap_or(0.00065 / (k as f64).ln());
    let block = config
        .block_size
        .unwrap_or_else(|| (5.0 * (samples as f64).ln()).min(0.3 * samples as f64).ceil() as usize)
        .max(1);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut perm: Vec<usize> = (0..samples).collect();
    let eye = Array2::<f64>::eye(k);

    let mut weights = eye.clone();
    let mut bias = Array1::<f64>::zeros(k);
    let mut restarts = 0;
    let mut sweep = 0;
    let mut previous: Option<(Array2<f64>, f64)> = None;
    let mut xb = Array2::<f64>::zeros((k, block));

    while sweep < config.max_sweeps {
        let start = weights.clone();
        perm.shuffle(&mut rng);
        let mut blew_up = false;
        for chunk in perm.chunks(block) {
            let b = chunk.len();
            if xb.ncols() != b {
                xb = Array2::zeros((k, b));
            }
            for (j, &col) in chunk.iter().enumerate() {
                for i in 0..k {
                    xb[[i, j]] = white[[i, col]];
                }
            }
            let mut u = weights.dot(&xb);
            for (mut row, bi) in u.outer_iter_mut().zip(bias.iter()) {
                row.mapv_inplace(|v| v + bi);
            }
            // 1 - 2 * logistic(u)
            let g = u.mapv(|v| 1.0 - 2.0 / (1.0 + (-v).exp()));
            let grad = (&eye * b as f64 + g.dot(&u.t())).dot(&weights);
            weights.scaled_add(lrate, &grad);
            bias.scaled_add(lrate, &g.sum_axis(Axis(1)));
            if !weights.iter().all(|v| v.is_finite() && v.abs() < BLOWUP_LIMIT) {
                blew_up = true;
                break;
            }
        }

        if blew_up {
            restarts += 1;
            if restarts > MAX_RESTARTS {
                return Err(Error::Numeric("ICA weights keep diverging".into()));
            }
            log::debug!("ICA weights blew up; restarting with a lower learning rate");
            lrate *= RESTART_FACTOR;
            weights = eye.clone();
            bias.fill(0.0);
            previous = None;
            sweep = 0;
            continue;
        }

        sweep += 1;
        let delta = &weights - &start;
        let change: f64 = delta.iter().map(|v| v * v).sum();
        if change.sqrt() < config.tolerance && sweep > 2 {
            return Ok(Fit {
                weights,
                converged: true,
                sweeps: sweep,
                restarts,
            });
        }
        match &previous {
            None => previous = Some((delta, change)),
            Some((old, old_change)) => {
                let dot: f64 = delta.iter().zip(old.iter()).map(|(a, b)| a * b).sum();
                let cos = (dot / (change * old_change).sqrt()).clamp(-1.0, 1.0);
                if cos.acos().to_degrees() > config.anneal_deg {
                    lrate *= config.anneal_step;
                    previous = Some((delta, change));
                }
            }
        }
        if lrate < MIN_LEARNING_RATE {
            break;
        }
    }

    Ok(Fit {
        weights,
        converged: false,
        sweeps: sweep,
        restarts,
    })
}

fn invert(m: &Array2<f64>) -> Result<Array2<f64>> {
    let n = m.nrows();
    let mat = DMatrix::from_fn(n, n, |i, j| m[[i, j]]);
    let inv = match mat.clone().try_inverse() {
        Some(inv) => inv,
        None => mat
            .pseudo_inverse(1e-12)
            .map_err(|e| Error::Numeric(e.to_string()))?,
    };
    Ok(Array2::from_shape_fn((n, n), |(i, j)| inv[(i, j)]))
}

fn row_sd(x: &[f64]) -> f64 {
    crate::stats::sample_sd(x).unwrap_or(0.0)
}

/// Population excess kurtosis; zero for constant input.
pub fn excess_kurtosis(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let (mut m2, mut m4) = (0.0, 0.0);
    for v in x {
        let d = (v - m) * (v - m);
        m2 += d;
        m4 += d * d;
    }
    m2 /= n;
    m4 /= n;
    if m2 == 0.0 {
        0.0
    } else {
        m4 / (m2 * m2) - 3.0
    }
}

/// Normalised Amari distance of a square global matrix `P = W A` from a
/// scaled permutation: 0 for perfect separation, at most 1.
pub fn amari_index(p: &Array2<f64>) -> f64 {
    let n = p.nrows();
    assert_eq!(n, p.ncols(), "Amari index needs a square matrix");
    if n < 2 {
        return 0.0;
    }
    let a = p.mapv(f64::abs);
    let rows: f64 = a
        .outer_iter()
        .map(|r| r.sum() / r.fold(0.0_f64, |m, v| m.max(*v)) - 1.0)
        .sum();
    let cols: f64 = a
        .axis_iter(Axis(1))
        .map(|c| c.sum() / c.fold(0.0_f64, |m, v| m.max(*v)) - 1.0)
        .sum();
    (rows + cols) / (2.0 * n as f64 * (n as f64 - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RejectConfig {
    pub max_abs_z: f64,
    pub max_excess_kurtosis: f64,
}

impl Default for RejectConfig {
    fn default() -> Self {
        Self {
            max_abs_z: 5.0,
            max_excess_kurtosis: 8.0,
        }
    }
}

/// Keep-mask over components: after z-scoring, a component is an artifact if
/// any sample exceeds `max_abs_z` or its excess kurtosis exceeds the limit.
/// Constant components are rejected.
pub fn reject_artifact_ics(sources: &Array2<f64>, config: &RejectConfig) -> Result<Vec<bool>> {
    let keep: Vec<bool> = sources
        .outer_iter()
        .map(|row| {
            let x = row.to_vec();
            let n = x.len() as f64;
            let m = x.iter().sum::<f64>() / n;
            let sd = row_sd(&x);
            if sd == 0.0 || !sd.is_finite() {
                return false;
            }
            let max_z = x.iter().map(|v| ((v - m) / sd).abs()).fold(0.0, f64::max);
            max_z <= config.max_abs_z && excess_kurtosis(&x) <= config.max_excess_kurtosis
        })
        .collect();
    if !keep.iter().any(|k| *k) {
        return Err(Error::Pipeline(
            "every independent component was rejected as an artifact".into(),
        ));
    }
    Ok(keep)
}

/// Back-projects the kept components: `mixing x (sources with rejected rows
/// zeroed)`, plus the channel means when given.
pub fn reconstruct(
    sources: &Array2<f64>,
    keep: &[bool],
    mixing: &Array2<f64>,
    channel_means: Option<&Array1<f64>>,
) -> Result<Array2<f64>> {
    let k = sources.nrows();
    if keep.len() != k || mixing.ncols() != k {
        return Err(Error::arg(format!(
            "{} components, {} mask entries, mixing has {} columns",
            k,
            keep.len(),
            mixing.ncols()
        )));
    }
    if let Some(m) = channel_means {
        if m.len() != mixing.nrows() {
            return Err(Error::arg("channel means do not match the mixing rows"));
        }
    }
    let kept: Vec<usize> = (0..k).filter(|&i| keep[i]).collect();
    if kept.is_empty() {
        return Err(Error::arg("reconstruction needs at least one kept component"));
    }
    let mut out = mixing
        .select(Axis(1), &kept)
        .dot(&sources.select(Axis(0), &kept));
    if let Some(m) = channel_means {
        out += &m.view().insert_axis(Axis(1));
    }
    Ok(out)
}

//! One-hidden-layer ReLU regressor trained with Adam, tuned by a
//! leave-one-out grid search over learning rate and weight decay, and
//! summarised by first-layer input weights averaged over folds and runs.

use ndarray::{s, Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::relevance::dataset::{Dataset, Standardization, ZScore};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// `n` values from `lo` to `hi` inclusive, equally spaced in log10.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.log10(), hi.log10());
            let mut v: Vec<f64> = (0..n)
                .map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64))
                .collect();
            v[0] = lo;
            v[n - 1] = hi;
            v
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NnConfig {
    pub hidden_units: Vec<usize>,
    pub max_epochs: usize,
    pub minibatch: usize,
    pub patience_epochs: usize,
    pub lr_grid: Vec<f64>,
    pub l2_grid: Vec<f64>,
    /// Repetitions with fresh initialisation and minibatch order.
    pub runs: usize,
    pub seed: u64,
    pub standardization: Standardization,
}

impl Default for NnConfig {
    fn default() -> Self {
        Self {
            hidden_units: vec![40, 90, 110, 130],
            max_epochs: 1000,
            minibatch: 8,
            patience_epochs: 1,
            lr_grid: log_space(1e-5, 1e-1, 15),
            l2_grid: log_space(0.01, 10.0, 15),
            runs: 10,
            seed: 0,
            standardization: Standardization::PerFold,
        }
    }
}

impl NnConfig {
    pub fn validate(&self) -> Result<()> {
        let increasing = |g: &[f64]| !g.is_empty() && g.iter().all(|v| *v >= 0.0 && v.is_finite()) && g.windows(2).all(|w| w[0] < w[1]);
        if !increasing(&self.lr_grid) || !increasing(&self.l2_grid) {
            return Err(Error::arg("learning-rate and l2 grids must be nonempty, finite and strictly increasing"));
        }
        if self.hidden_units.is_empty() || self.hidden_units.contains(&0) {
            return Err(Error::arg("every hidden-unit count must be at least 1"));
        }
        if self.minibatch == 0 || self.max_epochs == 0 || self.patience_epochs == 0 || self.runs == 0 {
            return Err(Error::arg("minibatch, epochs, patience and runs must be at least 1"));
        }
        Ok(())
    }
}

/// `w1` is units × inputs; `w2` maps hidden activations to the output.
#[derive(Debug, Clone, PartialEq)]
pub struct NnParams {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array1<f64>,
    pub b2: f64,
}

impl NnParams {
    pub fn zeros(units: usize, inputs: usize) -> Self {
        Self {
            w1: Array2::zeros((units, inputs)),
            b1: Array1::zeros(units),
            w2: Array1::zeros(units),
            b2: 0.0,
        }
    }

    /// Gaussian weights with SD `1/sqrt(inputs)` and `1/sqrt(units)`, zero
    /// biases.
    pub fn init(units: usize, inputs: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut p = Self::zeros(units, inputs);
        let (s1, s2) = (1.0 / (inputs as f64).sqrt(), 1.0 / (units as f64).sqrt());
        for w in p.w1.iter_mut() {
            *w = s1 * Distribution::<f64>::sample(&StandardNormal, rng);
        }
        for w in p.w2.iter_mut() {
            *w = s2 * Distribution::<f64>::sample(&StandardNormal, rng);
        }
        p
    }

    pub fn units(&self) -> usize {
        self.w1.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.w1.ncols()
    }

    pub fn is_finite(&self) -> bool {
        self.parts().iter().all(|p| p.iter().all(|v| v.is_finite()))
    }

    /// Squared norm of the weights; biases are excluded.
    pub fn weight_norm_sq(&self) -> f64 {
        self.w1.iter().chain(self.w2.iter()).map(|v| v * v).sum()
    }

    fn parts(&self) -> [&[f64]; 4] {
        [
            self.w1.as_slice().expect("standard layout"),
            self.b1.as_slice().expect("standard layout"),
            self.w2.as_slice().expect("standard layout"),
            std::slice::from_ref(&self.b2),
        ]
    }

    fn parts_mut(&mut self) -> [&mut [f64]; 4] {
        [
            self.w1.as_slice_mut().expect("standard layout"),
            self.b1.as_slice_mut().expect("standard layout"),
            self.w2.as_slice_mut().expect("standard layout"),
            std::slice::from_mut(&mut self.b2),
        ]
    }

    /// Every parameter in `w1, b1, w2, b2` order.
    pub fn flatten(&self) -> Vec<f64> {
        self.parts().concat()
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        let mut at = 0;
        for part in self.parts_mut() {
            part.copy_from_slice(&flat[at..at + part.len()]);
            at += part.len();
        }
    }

    fn fill(&mut self, v: f64) {
        for part in self.parts_mut() {
            part.fill(v);
        }
    }

    fn predict(&self, x: &[f64]) -> f64 {
        let d = self.inputs();
        let w1 = self.w1.as_slice().expect("standard layout");
        let mut out = self.b2;
        for i in 0..self.units() {
            let z = self.b1[i] + dot(&w1[i * d..(i + 1) * d], x);
            if z > 0.0 {
                out += self.w2[i] * z;
            }
        }
        out
    }
}

/// Four interleaved partial sums, combined in a fixed order.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `w2 · relu(W1 x + b1) + b2`.
pub fn forward(params: &NnParams, x: &[f64]) -> Result<f64> {
    if x.len() != params.inputs() {
        return Err(Error::arg(format!("{} inputs for a {}-input network", x.len(), params.inputs())));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite network input".into()));
    }
    let y = params.predict(x);
    if !y.is_finite() {
        return Err(Error::Numeric("non-finite network output".into()));
    }
    Ok(y)
}

/// Returns the data term of the loss; the penalty only enters `g`. Rows
/// of `x` must be contiguous. `z` is scratch of length `units`.
fn batch_grads(p: &NnParams, x: &Array2<f64>, y: &[f64], rows: &[usize], l2: f64, g: &mut NnParams, z: &mut [f64]) -> f64 {
    g.fill(0.0);
    let d = p.inputs();
    let u = p.units();
    let w1 = p.w1.as_slice().expect("standard layout");
    let scale = 1.0 / rows.len() as f64;
    let mut sse = 0.0;
    for &r in rows {
        let xr = x.row(r);
        let xr = xr.as_slice().expect("contiguous row");
        let mut out = p.b2;
        for i in 0..u {
            z[i] = p.b1[i] + dot(&w1[i * d..(i + 1) * d], xr);
            if z[i] > 0.0 {
                out += p.w2[i] * z[i];
            }
        }
        let e = out - y[r];
        sse += e * e;
        let de = 2.0 * e * scale;
        g.b2 += de;
        let gw1 = g.w1.as_slice_mut().expect("standard layout");
        for i in 0..u {
            if z[i] > 0.0 {
                g.w2[i] += de * z[i];
                let dz = de * p.w2[i];
                g.b1[i] += dz;
                for (gw, xv) in gw1[i * d..(i + 1) * d].iter_mut().zip(xr) {
                    *gw += dz * xv;
                }
            }
        }
    }
    if l2 != 0.0 {
        g.w1.scaled_add(2.0 * l2, &p.w1);
        g.w2.scaled_add(2.0 * l2, &p.w2);
    }
    sse * scale
}

/// Mean squared error over the batch plus `l2` times the squared weight
/// norm, and its exact gradient.
pub fn loss_and_grads(params: &NnParams, x: &Array2<f64>, y: &[f64], l2: f64) -> Result<(f64, NnParams)> {
    if x.nrows() == 0 || x.nrows() != y.len() || x.ncols() != params.inputs() {
        return Err(Error::arg("batch must be nonempty with one target per row and matching width"));
    }
    let x = x.as_standard_layout().into_owned();
    let rows: Vec<usize> = (0..x.nrows()).collect();
    let mut g = NnParams::zeros(params.units(), params.inputs());
    let mut z = vec![0.0; params.units()];
    let mse = batch_grads(params, &x, y, &rows, l2, &mut g, &mut z);
    Ok((mse + l2 * params.weight_norm_sq(), g))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: NnParams,
    pub v: NnParams,
    pub t: u32,
}

impl AdamState {
    pub fn new(like: &NnParams) -> Self {
        Self {
            m: NnParams::zeros(like.units(), like.inputs()),
            v: NnParams::zeros(like.units(), like.inputs()),
            t: 0,
        }
    }
}

/// One bias-corrected Adam update of a flat parameter block at step `t`
/// (counted from 1).
pub fn adam_update(theta: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64], t: u32, lr: f64) {
    let c1 = 1.0 - BETA1.powi(t as i32);
    let c2 = 1.0 - BETA2.powi(t as i32);
    for (((th, &g), m), v) in theta.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
        *m = BETA1 * *m + (1.0 - BETA1) * g;
        *v = BETA2 * *v + (1.0 - BETA2) * g * g;
        *th -= lr * (*m / c1) / ((*v / c2).sqrt() + EPSILON);
    }
}

pub fn adam_step(params: &mut NnParams, grads: &NnParams, state: &mut AdamState, lr: f64) {
    state.t += 1;
    let t = state.t;
    let gs = grads.parts();
    let AdamState { m, v, .. } = state;
    for (((theta, g), m), v) in params.parts_mut().into_iter().zip(gs).zip(m.parts_mut()).zip(v.parts_mut()) {
        adam_update(theta, g, m, v, t, lr);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldOutcome {
    /// Parameters after the epoch with the lowest validation loss.
    pub params: NnParams,
    pub val_rmse: f64,
    pub final_val_rmse: f64,
    pub epochs: usize,
    /// Mean minibatch squared error per completed epoch, penalty excluded.
    pub train_loss: Vec<f64>,
    pub diverged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainSpec {
    pub units: usize,
    pub lr: f64,
    pub l2: f64,
    pub max_epochs: usize,
    pub minibatch: usize,
    pub patience_epochs: usize,
}

impl TrainSpec {
    pub fn from_config(cfg: &NnConfig, units: usize, lr: f64, l2: f64) -> Self {
        Self {
            units,
            lr,
            l2,
            max_epochs: cfg.max_epochs,
            minibatch: cfg.minibatch,
            patience_epochs: cfg.patience_epochs,
        }
    }
}

fn mse(p: &NnParams, x: &Array2<f64>, y: &[f64]) -> f64 {
    x.outer_iter()
        .zip(y)
        .map(|(r, t)| {
            let e = p.predict(r.as_slice().expect("contiguous row")) - t;
            e * e
        })
        .sum::<f64>()
        / y.len() as f64
}

/// Shuffled minibatch Adam with validation-patience early stopping. A
/// batch larger than the training set shrinks to it.
pub fn train_fold(
    train_x: &Array2<f64>,
    train_y: &[f64],
    val_x: &Array2<f64>,
    val_y: &[f64],
    spec: &TrainSpec,
    seed: u64,
) -> Result<FoldOutcome> {
    let n = train_x.nrows();
    if n == 0 || val_x.nrows() == 0 || train_y.len() != n || val_y.len() != val_x.nrows() {
        return Err(Error::arg("training and validation sets must be nonempty with one target per row"));
    }
    if train_x.ncols() != val_x.ncols() {
        return Err(Error::arg("training and validation widths differ"));
    }
    if spec.units == 0 || spec.minibatch == 0 || spec.patience_epochs == 0 || !(spec.lr >= 0.0) || !(spec.l2 >= 0.0) {
        return Err(Error::arg("invalid training settings"));
    }
    let train_x = train_x.as_standard_layout().into_owned();
    let val_x = val_x.as_standard_layout().into_owned();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = NnParams::init(spec.units, train_x.ncols(), &mut rng);
    let mut adam = AdamState::new(&params);
    let mut grads = NnParams::zeros(spec.units, train_x.ncols());
    let mut z = vec![0.0; spec.units];
    let mut order: Vec<usize> = (0..n).collect();
    let batch = spec.minibatch.min(n);

    let mut best: Option<(f64, NnParams)> = None;
    let mut final_val = f64::NAN;
    let mut stale = 0;
    let mut train_loss = Vec::new();
    let mut diverged = false;
    for _ in 0..spec.max_epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(batch) {
            total += batch_grads(&params, &train_x, train_y, chunk, spec.l2, &mut grads, &mut z) * chunk.len() as f64;
            adam_step(&mut params, &grads, &mut adam, spec.lr);
        }
        let val = mse(&params, &val_x, val_y);
        if !total.is_finite() || !val.is_finite() || !params.is_finite() {
            diverged = true;
            break;
        }
        train_loss.push(total / n as f64);
        final_val = val;
        match &best {
            Some((b, _)) if val >= *b => {
                stale += 1;
                if stale >= spec.patience_epochs {
                    break;
                }
            }
            _ => {
                best = Some((val, params.clone()));
                stale = 0;
            }
        }
    }
    let epochs = train_loss.len() + usize::from(diverged);
    let (val, params) = match best {
        Some(b) => b,
        None => (f64::NAN, params),
    };
    Ok(FoldOutcome {
        params,
        val_rmse: val.sqrt(),
        final_val_rmse: final_val.sqrt(),
        epochs,
        train_loss,
        diverged,
    })
}

/// One leave-one-out split, standardised with training statistics; the
/// network sees a z-scored target and predictions are mapped back.
struct Fold {
    train_x: Array2<f64>,
    train_y: Vec<f64>,
    val_x: Array2<f64>,
    held_y: f64,
    y_mean: f64,
    y_sd: f64,
}

fn prepare_folds(ds: &Dataset, policy: Standardization) -> Vec<Fold> {
    let n = ds.n();
    let global = match policy {
        Standardization::Global => Some(ZScore::fit(&ds.x).apply(&ds.x)),
        Standardization::PerFold => None,
    };
    (0..n)
        .map(|held| {
            let rows: Vec<usize> = (0..n).filter(|&i| i != held).collect();
            let (train_x, val_x) = match &global {
                Some(z) => (z.select(Axis(0), &rows), z.slice(s![held..held + 1, ..]).to_owned()),
                None => {
                    let raw = ds.x.select(Axis(0), &rows);
                    let zs = ZScore::fit(&raw);
                    let val = zs.apply_row(ds.x.row(held).as_slice().expect("contiguous row"));
                    (zs.apply(&raw), Array2::from_shape_vec((1, val.len()), val).expect("one row"))
                }
            };
            let ty: Vec<f64> = rows.iter().map(|&i| ds.y[i]).collect();
            let y_mean = ty.iter().sum::<f64>() / ty.len() as f64;
            let var = ty.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / (ty.len() as f64 - 1.0);
            let y_sd = if var > 0.0 && var.is_finite() { var.sqrt() } else { 1.0 };
            Fold {
                train_x: train_x.as_standard_layout().into_owned(),
                train_y: ty.iter().map(|v| (v - y_mean) / y_sd).collect(),
                val_x,
                held_y: ds.y[held],
                y_mean,
                y_sd,
            }
        })
        .collect()
}

/// Sum over hidden units of each input's first-layer weights.
fn unit_sums(p: &NnParams) -> Vec<f64> {
    p.w1.sum_axis(Axis(0)).to_vec()
}

/// First-layer input weights summed over hidden units and averaged over
/// the given networks.
pub fn averaged_weights(params: &[NnParams]) -> Result<Vec<f64>> {
    let first = params.first().ok_or_else(|| Error::arg("no successful folds to average"))?;
    let mut acc = vec![0.0; first.inputs()];
    for p in params {
        if p.inputs() != acc.len() {
            return Err(Error::arg("networks have different input widths"));
        }
        for (a, v) in acc.iter_mut().zip(unit_sums(p)) {
            *a += v;
        }
    }
    let k = params.len() as f64;
    Ok(acc.into_iter().map(|v| v / k).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightMap {
    /// Feature-ordered averaged weights.
    pub values: Vec<f64>,
    pub runs: usize,
    pub folds: usize,
    pub units: usize,
    pub lr: f64,
    pub l2: f64,
    pub successful_folds: usize,
}

impl WeightMap {
    /// Scaled so the largest magnitude is 1; an all-zero map stays zero.
    pub fn normalized(&self) -> Vec<f64> {
        let m = self.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if m == 0.0 {
            return self.values.clone();
        }
        self.values.iter().map(|v| v / m).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub lr_index: usize,
    pub l2_index: usize,
    /// Mean held-out squared error over successful folds; `None` when every
    /// fold diverged.
    pub err: Option<f64>,
    /// Run-major, `None` for diverged folds.
    pub fold_sq_errors: Vec<Option<f64>>,
    /// Accumulated unit-summed first-layer weights of successful folds.
    pub weight_sum: Vec<f64>,
    pub successes: usize,
}

fn run_cell(folds: &[Fold], units: usize, li: usize, ri: usize, cfg: &NnConfig) -> Result<CellResult> {
    let spec = TrainSpec::from_config(cfg, units, cfg.lr_grid[li], cfg.l2_grid[ri]);
    let d = folds[0].train_x.ncols();
    let mut fold_sq_errors = Vec::with_capacity(cfg.runs * folds.len());
    let mut weight_sum = vec![0.0; d];
    for run in 0..cfg.runs {
        for (f, fold) in folds.iter().enumerate() {
            let seed = crate::seed::derive(cfg.seed, &[units as u64, li as u64, ri as u64, run as u64, f as u64]);
            let val_y = [(fold.held_y - fold.y_mean) / fold.y_sd];
            let out = train_fold(&fold.train_x, &fold.train_y, &fold.val_x, &val_y, &spec, seed)?;
            if out.diverged {
                fold_sq_errors.push(None);
                continue;
            }
            let z = out.params.predict(fold.val_x.row(0).as_slice().expect("contiguous row"));
            let e = fold.held_y - (fold.y_mean + fold.y_sd * z);
            fold_sq_errors.push(Some(e * e));
            for (a, v) in weight_sum.iter_mut().zip(unit_sums(&out.params)) {
                *a += v;
            }
        }
    }
    let ok: Vec<f64> = fold_sq_errors.iter().flatten().copied().collect();
    Ok(CellResult {
        lr_index: li,
        l2_index: ri,
        err: (!ok.is_empty()).then(|| ok.iter().sum::<f64>() / ok.len() as f64),
        successes: ok.len(),
        fold_sq_errors,
        weight_sum,
    })
}

fn check_inputs(ds: &Dataset, units: usize, cfg: &NnConfig) -> Result<()> {
    cfg.validate()?;
    if ds.n() < 3 {
        return Err(Error::arg("leave-one-out training needs at least 3 participants"));
    }
    if units == 0 {
        return Err(Error::arg("at least one hidden unit is required"));
    }
    Ok(())
}

/// All runs and folds of one grid cell.
pub fn evaluate_cell(ds: &Dataset, units: usize, lr_index: usize, l2_index: usize, cfg: &NnConfig) -> Result<CellResult> {
    check_inputs(ds, units, cfg)?;
    if lr_index >= cfg.lr_grid.len() || l2_index >= cfg.l2_grid.len() {
        return Err(Error::arg("grid index out of range"));
    }
    run_cell(&prepare_folds(ds, cfg.standardization), units, lr_index, l2_index, cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearch {
    pub units: usize,
    pub lr_grid: Vec<f64>,
    pub l2_grid: Vec<f64>,
    /// Indexed `[lr][l2]`.
    pub err: Vec<Vec<Option<f64>>>,
    pub best: (usize, usize),
    pub best_err: f64,
    pub weights: WeightMap,
    pub diverged_folds: usize,
}

impl GridSearch {
    pub fn lr(&self) -> f64 {
        self.lr_grid[self.best.0]
    }

    pub fn l2(&self) -> f64 {
        self.l2_grid[self.best.1]
    }
}

/// Index of the smallest error; ties go to the smaller learning rate, then
/// the larger l2 coefficient.
pub fn grid_argmin(err: &[Vec<Option<f64>>]) -> Option<(usize, usize)> {
    let mut best: Option<(f64, (usize, usize))> = None;
    for (i, row) in err.iter().enumerate() {
        for j in (0..row.len()).rev() {
            if let Some(e) = row[j] {
                if best.is_none_or(|(b, _)| e < b) {
                    best = Some((e, (i, j)));
                }
            }
        }
    }
    best.map(|b| b.1)
}

/// Every `(lr, l2)` cell is scored by the mean held-out squared error over
/// `runs` repetitions of leave-one-out training.
pub fn grid_search_loocv(ds: &Dataset, units: usize, cfg: &NnConfig) -> Result<GridSearch> {
    check_inputs(ds, units, cfg)?;
    let folds = prepare_folds(ds, cfg.standardization);
    let cells: Vec<(usize, usize)> = (0..cfg.lr_grid.len())
        .flat_map(|i| (0..cfg.l2_grid.len()).map(move |j| (i, j)))
        .collect();
    let results: Vec<CellResult> = cells
        .par_iter()
        .map(|&(i, j)| run_cell(&folds, units, i, j, cfg))
        .collect::<Result<_>>()?;

    let mut err = vec![vec![None; cfg.l2_grid.len()]; cfg.lr_grid.len()];
    let mut diverged_folds = 0;
    for r in &results {
        err[r.lr_index][r.l2_index] = r.err;
        diverged_folds += r.fold_sq_errors.len() - r.successes;
    }
    let best = grid_argmin(&err).ok_or_else(|| Error::Numeric("every grid cell diverged".into()))?;
    let cell = &results[best.0 * cfg.l2_grid.len() + best.1];
    let weights = WeightMap {
        values: cell.weight_sum.iter().map(|v| v / cell.successes as f64).collect(),
        runs: cfg.runs,
        folds: ds.n(),
        units,
        lr: cfg.lr_grid[best.0],
        l2: cfg.l2_grid[best.1],
        successful_folds: cell.successes,
    };
    Ok(GridSearch {
        units,
        lr_grid: cfg.lr_grid.clone(),
        l2_grid: cfg.l2_grid.clone(),
        best_err: cell.err.expect("argmin cell is feasible"),
        err,
        best,
        weights,
        diverged_folds,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NnReport {
    pub searches: Vec<GridSearch>,
    /// Index into `searches` of the lowest cross-validation error.
    pub best: usize,
}

/// Grid search for every configured hidden-unit count.
pub fn nn_search(ds: &Dataset, cfg: &NnConfig) -> Result<NnReport> {
    cfg.validate()?;
    let searches: Vec<GridSearch> = cfg
        .hidden_units
        .iter()
        .map(|&u| grid_search_loocv(ds, u, cfg))
        .collect::<Result<_>>()?;
    let best = searches
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.best_err.total_cmp(&b.1.best_err))
        .map(|(i, _)| i)
        .expect("at least one unit count");
    Ok(NnReport { searches, best })
}

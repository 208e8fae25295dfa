//! Adaptive trial vigilance scores (TVS), the cumulative vigilance score (CVS)
//! and the six per-participant performance measures.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::session::{LabeledTrial, Outcome, ParadigmSpec};
use crate::stats::{coefficient_of_variation, mean, sample_sd};

/// Response-time band a hit must fall into to earn the top level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub rt_lower_ms: f64,
    pub rt_upper_ms: f64,
}

/// Level assigned to each trial category. The default is the 5-level scheme
/// 0 (error) .. 4 (in-band correct).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TvsScheme {
    pub error: u8,
    pub multi_click: u8,
    pub slow_correct: u8,
    pub impulsive_correct: u8,
    pub in_band_correct: u8,
}

impl Default for TvsScheme {
    fn default() -> Self {
        Self {
            error: 0,
            multi_click: 1,
            slow_correct: 2,
            impulsive_correct: 3,
            in_band_correct: 4,
        }
    }
}

impl TvsScheme {
    pub fn max_level(&self) -> u8 {
        [
            self.error,
            self.multi_click,
            self.slow_correct,
            self.impulsive_correct,
            self.in_band_correct,
        ]
        .into_iter()
        .max()
        .unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoringConfig {
    pub window_trials: usize,
    pub calib_trials: usize,
    pub rt_lower_ms: f64,
    pub scheme: TvsScheme,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        Self {
            window_trials: 36,
            calib_trials: 27,
            rt_lower_ms: 250.0,
            scheme: TvsScheme::default(),
        }
    }
}

/// Calibrates the upper response-time threshold as mean + 2 SD of the first
/// click latencies among the first `calib_trials` trials. Any clicked trial
/// counts, errors included.
pub fn adaptive_thresholds(
    trials: &[LabeledTrial],
    calib_trials: usize,
    rt_lower_ms: f64,
) -> Result<Thresholds> {
    let rts: Vec<f64> = trials
        .iter()
        .take(calib_trials)
        .filter_map(|t| t.rt_ms)
        .collect();
    if rts.len() < 2 {
        return Err(Error::Calibration(format!(
            "{} response time(s) among the first {calib_trials} trials, need at least 2",
            rts.len()
        )));
    }
    let m = mean(&rts).expect("nonempty");
    let sd = sample_sd(&rts).expect("two or more values");
    let rt_upper_ms = m + 2.0 * sd;
    if !(rt_upper_ms.is_finite() && rt_upper_ms > 0.0 && rt_upper_ms > rt_lower_ms) {
        return Err(Error::Calibration(format!(
            "upper threshold {rt_upper_ms:.3} ms does not exceed the lower threshold {rt_lower_ms} ms"
        )));
    }
    Ok(Thresholds {
        rt_lower_ms,
        rt_upper_ms,
    })
}

/// Trial vigilance score. Multiple clicks take precedence over every other
/// category.
pub fn tvs(trial: &LabeledTrial, th: &Thresholds, scheme: &TvsScheme) -> u8 {
    if trial.multi_click {
        return scheme.multi_click;
    }
    match trial.outcome {
        Outcome::CommissionError | Outcome::OmissionError => scheme.error,
        Outcome::CorrectInhibition => scheme.in_band_correct,
        Outcome::Hit => {
            let rt = trial.rt_ms.expect("hits carry a response time");
            if rt < th.rt_lower_ms {
                scheme.impulsive_correct
            } else if rt > th.rt_upper_ms {
                scheme.slow_correct
            } else {
                scheme.in_band_correct
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VigilanceSeries {
    pub tvs: Vec<u8>,
    pub cvs: Vec<f64>,
    pub window_trials: usize,
}

impl VigilanceSeries {
    /// Trials scored over fewer than `window_trials` preceding trials.
    pub fn is_warmup(&self, i: usize) -> bool {
        i + 1 < self.window_trials
    }
}

/// Rolling mean of the trailing `window` levels (including the current
/// trial) normalised by `max_level`. The first `window - 1` trials use an
/// expanding window.
pub fn cvs_series(levels: &[u8], window: usize, max_level: u8) -> Result<Vec<f64>> {
    if levels.is_empty() {
        return Err(Error::arg("cannot score an empty TVS series"));
    }
    if window == 0 {
        return Err(Error::arg("CVS window must be at least one trial"));
    }
    if max_level == 0 {
        return Err(Error::arg("TVS scheme has no positive level"));
    }
    let scale = f64::from(max_level);
    let mut sum: u64 = 0;
    let mut out = Vec::with_capacity(levels.len());
    for (i, &level) in levels.iter().enumerate() {
        sum += u64::from(level);
        if i >= window {
            sum -= u64::from(levels[i - window]);
        }
        let count = (i + 1).min(window);
        out.push(sum as f64 / count as f64 / scale);
    }
    Ok(out)
}

/// Calibrates thresholds on the session and scores every trial.
pub fn score_session(
    labeled: &[LabeledTrial],
    config: &ScoringConfig,
) -> Result<(Thresholds, VigilanceSeries)> {
    let th = adaptive_thresholds(labeled, config.calib_trials, config.rt_lower_ms)?;
    let levels: Vec<u8> = labeled
        .iter()
        .map(|t| tvs(t, &th, &config.scheme))
        .collect();
    let cvs = cvs_series(&levels, config.window_trials, config.scheme.max_level())?;
    Ok((
        th,
        VigilanceSeries {
            tvs: levels,
            cvs,
            window_trials: config.window_trials,
        },
    ))
}

/// Per-participant summary over completed blocks. Undefined measures are
/// `None` rather than NaN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceSummary {
    pub ce_pct: f64,
    pub oe_pct: f64,
    pub hrt_mean_ms: Option<f64>,
    pub hrt_var: Option<f64>,
    pub cvs_mean: f64,
    pub cvs_var: Option<f64>,
    pub n_trials: usize,
    pub n_hits: usize,
}

impl PerformanceSummary {
    pub const MEASURES: [&'static str; 6] =
        ["ce_pct", "oe_pct", "cvs_mean", "cvs_var", "hrt_mean_ms", "hrt_var"];

    /// Measures in [`Self::MEASURES`] order.
    pub fn measures(&self) -> [Option<f64>; 6] {
        [
            Some(self.ce_pct),
            Some(self.oe_pct),
            Some(self.cvs_mean),
            self.cvs_var,
            self.hrt_mean_ms,
            self.hrt_var,
        ]
    }
}

/// Computes CE%, OE%, HRTmean, HRTvar, CVSmean and CVSvar. Trials of a
/// trailing incomplete block are ignored.
pub fn performance_summary(
    labeled: &[LabeledTrial],
    vs: &VigilanceSeries,
    paradigm: &ParadigmSpec,
) -> Result<PerformanceSummary> {
    if labeled.len() != vs.cvs.len() {
        return Err(Error::arg(format!(
            "{} labelled trials but {} CVS values",
            labeled.len(),
            vs.cvs.len()
        )));
    }
    let per_block = paradigm.trials_per_block();
    let n = labeled.len() / per_block * per_block;
    if n == 0 {
        return Err(Error::arg("no completed block to summarise"));
    }
    let trials = &labeled[..n];

    let (mut targets, mut ce, mut oe) = (0usize, 0usize, 0usize);
    let mut hits = Vec::new();
    for t in trials {
        if paradigm.is_target(t.event.digit) {
            targets += 1;
        }
        match t.outcome {
            Outcome::CommissionError => ce += 1,
            Outcome::OmissionError => oe += 1,
            Outcome::Hit => hits.push(t.rt_ms.expect("hits carry a response time")),
            Outcome::CorrectInhibition => {}
        }
    }
    let non_targets = n - targets;
    let pct = |count: usize, of: usize| {
        if of == 0 {
            0.0
        } else {
            100.0 * count as f64 / of as f64
        }
    };

    let cvs = &vs.cvs[..n];
    Ok(PerformanceSummary {
        ce_pct: pct(ce, targets),
        oe_pct: pct(oe, non_targets),
        hrt_mean_ms: mean(&hits),
        hrt_var: coefficient_of_variation(&hits),
        cvs_mean: mean(cvs).expect("nonempty"),
        cvs_var: coefficient_of_variation(cvs),
        n_trials: n,
        n_hits: hits.len(),
    })
}

/// Inclusion mask (`true` = keep) excluding values above mean + 2 SD.
pub fn exclude_outliers(values: &[f64]) -> Result<Vec<bool>> {
    if values.len() < 3 {
        return Err(Error::arg("outlier exclusion needs at least 3 participants"));
    }
    let m = mean(values).expect("nonempty");
    let sd = sample_sd(values).expect("three or more values");
    if sd == 0.0 {
        return Ok(vec![true; values.len()]);
    }
    let limit = m + 2.0 * sd;
    Ok(values.iter().map(|v| *v <= limit).collect())
}

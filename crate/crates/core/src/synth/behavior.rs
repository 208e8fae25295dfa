//! Synthetic SART responders driven by a latent vigilance trajectory.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::session::{EventLog, ParadigmSpec, TrialEvent};

/// Target vigilance over the session as a function of progress `s` in
/// `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VigilanceProcess {
    Constant { level: f64 },
    LinearDecline { start: f64, end: f64 },
    /// Falls linearly to `trough` at progress `at`, then climbs back to `end`.
    DeclineRecover { start: f64, trough: f64, at: f64, end: f64 },
    /// `level` everywhere except a drowsy epoch `[from, to)` at `sleep_level`.
    EarlySleep { level: f64, sleep_level: f64, from: f64, to: f64 },
}

impl VigilanceProcess {
    pub fn target(&self, s: f64) -> f64 {
        let lerp = |a: f64, b: f64, t: f64| a + (b - a) * t;
        match *self {
            Self::Constant { level } => level,
            Self::LinearDecline { start, end } => lerp(start, end, s),
            Self::DeclineRecover { start, trough, at, end } => {
                if s < at {
                    lerp(start, trough, s / at)
                } else {
                    lerp(trough, end, (s - at) / (1.0 - at))
                }
            }
            Self::EarlySleep { level, sleep_level, from, to } => {
                if (from..to).contains(&s) {
                    sleep_level
                } else {
                    level
                }
            }
        }
    }
}

/// Error probabilities at vigilance `v` are `floor + gain * (1 - v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorGain {
    pub ce_floor: f64,
    pub ce_gain: f64,
    pub oe_floor: f64,
    pub oe_gain: f64,
}

impl ErrorGain {
    pub const NONE: Self = Self {
        ce_floor: 0.0,
        ce_gain: 0.0,
        oe_floor: 0.0,
        oe_gain: 0.0,
    };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorProfile {
    pub name: String,
    pub base_rt_ms: f64,
    pub rt_noise_sd_ms: f64,
    /// Extra latency at zero vigilance, scaled by `1 - v`.
    pub slowing_ms: f64,
    pub impulsive_rate: f64,
    pub multi_click_rate: f64,
    pub error_gain: ErrorGain,
    pub vigilance: VigilanceProcess,
    /// Per-trial SD and persistence of the mean-reverting deviation.
    pub walk_sd: f64,
    pub walk_persistence: f64,
    pub seed: u64,
}

pub const ARCHETYPES: [&str; 4] = ["steady", "declining", "early_sleep", "recovering"];

impl BehaviorProfile {
    /// Named responders: steady, declining, early_sleep, recovering.
    pub fn archetype(name: &str, seed: u64) -> Option<Self> {
        let base = Self {
            name: name.to_string(),
            base_rt_ms: 340.0,
            rt_noise_sd_ms: 35.0,
            slowing_ms: 120.0,
            impulsive_rate: 0.02,
            multi_click_rate: 0.01,
            error_gain: ErrorGain {
                ce_floor: 0.05,
                ce_gain: 0.6,
                oe_floor: 0.005,
                oe_gain: 0.25,
            },
            vigilance: VigilanceProcess::Constant { level: 0.9 },
            walk_sd: 0.03,
            walk_persistence: 0.95,
            seed,
        };
        let vigilance = match name {
            "steady" => VigilanceProcess::Constant { level: 0.92 },
            "declining" => VigilanceProcess::LinearDecline { start: 0.95, end: 0.45 },
            "early_sleep" => VigilanceProcess::EarlySleep {
                level: 0.9,
                sleep_level: 0.15,
                from: 0.2,
                to: 0.4,
            },
            "recovering" => VigilanceProcess::DeclineRecover {
                start: 0.9,
                trough: 0.4,
                at: 0.5,
                end: 0.85,
            },
            _ => return None,
        };
        Some(Self { vigilance, ..base })
    }

    /// Always vigilant, never wrong, never impulsive.
    pub fn ideal(seed: u64) -> Self {
        Self {
            name: "ideal".into(),
            base_rt_ms: 350.0,
            rt_noise_sd_ms: 25.0,
            slowing_ms: 0.0,
            impulsive_rate: 0.0,
            multi_click_rate: 0.0,
            error_gain: ErrorGain::NONE,
            vigilance: VigilanceProcess::Constant { level: 1.0 },
            walk_sd: 0.0,
            walk_persistence: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let probs = [
            self.impulsive_rate,
            self.multi_click_rate,
            self.error_gain.ce_floor,
            self.error_gain.ce_gain,
            self.error_gain.oe_floor,
            self.error_gain.oe_gain,
        ];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::arg("profile probabilities must lie in [0, 1]"));
        }
        if !(self.base_rt_ms > 0.0) || self.rt_noise_sd_ms < 0.0 || self.walk_sd < 0.0 {
            return Err(Error::arg("profile needs a positive base RT and nonnegative spreads"));
        }
        if !(0.0..1.0).contains(&self.walk_persistence) && self.walk_persistence != 0.0 {
            return Err(Error::arg("walk persistence must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Earliest and latest first-click latency generated, in ms.
const MIN_RT_MS: f64 = 120.0;
const MAX_RT_MS: f64 = 540.0;

/// Generates a full session; all times are whole milliseconds so logs
/// survive shifting and serialisation exactly.
pub fn gen_session(profile: &BehaviorProfile, spec: &ParadigmSpec, participant: &str) -> Result<EventLog> {
    profile.validate()?;
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);
    let noise = Normal::new(0.0, profile.rt_noise_sd_ms.max(f64::MIN_POSITIVE)).expect("valid sd");
    let walk = Normal::new(0.0, profile.walk_sd.max(f64::MIN_POSITIVE)).expect("valid sd");

    let total = spec.total_trials();
    let per_block = spec.trials_per_block();
    let [isi_lo, isi_hi] = spec.isi_range_ms;
    let mut onset = 1000.0;
    let mut deviation = 0.0;
    let mut trials = Vec::with_capacity(total);
    for i in 0..total {
        let digit = spec.digits[i % spec.digits.len()];
        let isi = rng.random_range(isi_lo.ceil() as i64..=isi_hi.floor() as i64) as f64;
        deviation = profile.walk_persistence * deviation
            + if profile.walk_sd > 0.0 { walk.sample(&mut rng) } else { 0.0 };
        let s = i as f64 / total.max(2).saturating_sub(1) as f64;
        let v = (profile.vigilance.target(s) + deviation).clamp(0.0, 1.0);

        let g = profile.error_gain;
        let clicked = if spec.is_target(digit) {
            rng.random_bool((g.ce_floor + g.ce_gain * (1.0 - v)).clamp(0.0, 1.0))
        } else {
            !rng.random_bool((g.oe_floor + g.oe_gain * (1.0 - v)).clamp(0.0, 1.0))
        };
        let mut clicks = Vec::new();
        if clicked {
            let rt = if rng.random_bool(profile.impulsive_rate) {
                rng.random_range(MIN_RT_MS..250.0)
            } else {
                let n = if profile.rt_noise_sd_ms > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                profile.base_rt_ms + profile.slowing_ms * (1.0 - v) + n
            };
            let first = onset + rt.clamp(MIN_RT_MS, MAX_RT_MS).round();
            clicks.push(first);
            if rng.random_bool(profile.multi_click_rate) {
                clicks.push(first + rng.random_range(80..=160) as f64);
            }
        }
        trials.push(TrialEvent {
            trial_index: i + 1,
            block: i / per_block + 1,
            digit,
            onset_ms: onset,
            isi_ms: isi,
            clicks_ms: clicks,
        });
        onset += spec.fixed_trial_ms() + isi;
    }
    Ok(EventLog {
        participant: participant.to_string(),
        paradigm: spec.clone(),
        trials,
        dropped_clicks: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::{performance_summary, score_session, ScoringConfig};
    use crate::session::{label_trials, parse_event_log, write_event_log};

    fn score(log: &EventLog) -> (crate::scoring::VigilanceSeries, crate::scoring::PerformanceSummary) {
        let labeled = label_trials(&log.trials, &log.paradigm);
        let (_, vs) = score_session(&labeled, &ScoringConfig::default()).unwrap();
        let s = performance_summary(&labeled, &vs, &log.paradigm).unwrap();
        (vs, s)
    }

    #[test]
    fn ideal_responder_scores_near_one() {
        let log = gen_session(&BehaviorProfile::ideal(1), &ParadigmSpec::default(), "P").unwrap();
        assert_eq!(log.trials.len(), 2700);
        let (_, s) = score(&log);
        assert_eq!(s.ce_pct, 0.0);
        assert_eq!(s.oe_pct, 0.0);
        assert!(s.cvs_mean > 0.97, "{}", s.cvs_mean);
    }

    #[test]
    fn equal_seeds_are_identical_and_round_trip() {
        let p = BehaviorProfile::archetype("declining", 7).unwrap();
        let a = gen_session(&p, &ParadigmSpec::default(), "P").unwrap();
        let b = gen_session(&p, &ParadigmSpec::default(), "P").unwrap();
        assert_eq!(a, b);
        let mut buf = Vec::new();
        write_event_log(&a, &mut buf).unwrap();
        assert_eq!(parse_event_log(buf.as_slice()).unwrap(), a);
        for t in &a.trials {
            assert!((400.0..=1000.0).contains(&t.isi_ms));
        }
    }

    #[test]
    fn early_sleep_has_a_contiguous_low_epoch_then_recovers() {
        let p = BehaviorProfile::archetype("early_sleep", 3).unwrap();
        let log = gen_session(&p, &ParadigmSpec::default(), "P").unwrap();
        let (vs, _) = score(&log);
        let n = vs.cvs.len();
        let mean = |a: f64, b: f64| {
            let seg = &vs.cvs[(a * n as f64) as usize..(b * n as f64) as usize];
            seg.iter().sum::<f64>() / seg.len() as f64
        };
        let before = mean(0.05, 0.18);
        let during = mean(0.25, 0.38);
        let after = mean(0.5, 1.0);
        assert!(during < before - 0.15, "{before} {during}");
        assert!(after > during + 0.15, "{during} {after}");
    }

    #[test]
    fn unknown_archetype_and_bad_profile() {
        assert!(BehaviorProfile::archetype("sleepy", 0).is_none());
        let mut p = BehaviorProfile::ideal(0);
        p.impulsive_rate = 1.5;
        assert!(gen_session(&p, &ParadigmSpec::default(), "P").is_err());
    }
}

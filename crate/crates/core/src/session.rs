//! SART event logs: parsing, serialization and outcome labelling.
//!
//! A log is UTF-8 JSON Lines. The first line is a session header carrying the
//! participant id and the paradigm actually used; every following line is one
//! trial record. Clicks are re-assigned on load to the trial whose onset is
//! the latest one not after the click, so a response made during the fixation
//! period of trial `i` counts for trial `i` and a click landing exactly on an
//! onset belongs to the new trial.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const EVENT_SCHEMA: &str = "vigilkit-events/1";

/// Timing and structure of a fixed-sequence SART session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParadigmSpec {
    pub digit_display_ms: f64,
    pub response_interval_ms: f64,
    pub isi_range_ms: [f64; 2],
    pub sequences_per_block: usize,
    pub blocks: usize,
    pub digits: Vec<u8>,
    pub target_digit: u8,
}

impl Default for ParadigmSpec {
    fn default() -> Self {
        Self {
            digit_display_ms: 250.0,
            response_interval_ms: 300.0,
            isi_range_ms: [400.0, 1000.0],
            sequences_per_block: 25,
            blocks: 12,
            digits: (1..=9).collect(),
            target_digit: 3,
        }
    }
}

impl ParadigmSpec {
    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.isi_range_ms;
        if !(self.digit_display_ms > 0.0 && self.response_interval_ms > 0.0 && lo > 0.0) {
            return Err(Error::arg("paradigm durations must be positive"));
        }
        if !(lo <= hi) || !hi.is_finite() {
            return Err(Error::arg(format!("isi range [{lo}, {hi}] is not ordered")));
        }
        if self.sequences_per_block == 0 || self.blocks == 0 || self.digits.is_empty() {
            return Err(Error::arg("paradigm needs at least one block, sequence and digit"));
        }
        if self.digits.iter().any(|d| !(1..=9).contains(d)) {
            return Err(Error::arg("paradigm digits must lie in 1..=9"));
        }
        if !self.digits.contains(&self.target_digit) {
            return Err(Error::arg(format!(
                "target digit {} is not among the paradigm digits",
                self.target_digit
            )));
        }
        Ok(())
    }

    pub fn trials_per_block(&self) -> usize {
        self.sequences_per_block * self.digits.len()
    }

    pub fn total_trials(&self) -> usize {
        self.trials_per_block() * self.blocks
    }

    pub fn is_target(&self, digit: u8) -> bool {
        digit == self.target_digit
    }

    /// Fixed part of a trial: digit display plus response interval.
    pub fn fixed_trial_ms(&self) -> f64 {
        self.digit_display_ms + self.response_interval_ms
    }
}

/// One presented digit and the clicks attributed to it.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialEvent {
    /// 1-based position in the session.
    pub trial_index: usize,
    /// 1-based block number.
    pub block: usize,
    pub digit: u8,
    pub onset_ms: f64,
    pub isi_ms: f64,
    /// Absolute click times, ascending, all within `[onset, next onset)`.
    pub clicks_ms: Vec<f64>,
}

impl TrialEvent {
    pub fn first_latency_ms(&self) -> Option<f64> {
        self.clicks_ms.first().map(|c| c - self.onset_ms)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Hit,
    CommissionError,
    OmissionError,
    CorrectInhibition,
}

impl Outcome {
    pub fn is_error(self) -> bool {
        matches!(self, Outcome::CommissionError | Outcome::OmissionError)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Hit => "hit",
            Outcome::CommissionError => "commission",
            Outcome::OmissionError => "omission",
            Outcome::CorrectInhibition => "inhibition",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTrial {
    pub event: TrialEvent,
    pub outcome: Outcome,
    /// Latency of the first click; present exactly for hits and commission errors.
    pub rt_ms: Option<f64>,
    pub multi_click: bool,
}

/// A parsed session.
#[derive(Debug, Clone, PartialEq)]
pub struct EventLog {
    pub participant: String,
    pub paradigm: ParadigmSpec,
    pub trials: Vec<TrialEvent>,
    /// Clicks after the close of the last trial's window.
    pub dropped_clicks: usize,
}

#[derive(Serialize, Deserialize)]
struct HeaderRecord {
    schema: String,
    participant: String,
    paradigm: ParadigmSpec,
}

#[derive(Serialize, Deserialize)]
struct TrialRecord {
    trial: i64,
    block: i64,
    digit: i64,
    onset_ms: f64,
    isi_ms: f64,
    #[serde(default)]
    clicks_ms: Vec<f64>,
}

/// Reads a JSON Lines event log. Blank lines are skipped.
pub fn parse_event_log<R: BufRead>(reader: R) -> Result<EventLog> {
    let mut header: Option<HeaderRecord> = None;
    let mut records: Vec<(usize, TrialRecord)> = Vec::new();

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        if header.is_none() {
            let h: HeaderRecord = serde_json::from_str(text).map_err(|e| Error::Parse {
                line: line_no,
                message: format!("bad session header: {e}"),
            })?;
            if h.schema != EVENT_SCHEMA {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("unsupported schema {:?}", h.schema),
                });
            }
            h.paradigm.validate().map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            header = Some(h);
            continue;
        }
        let rec: TrialRecord = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        records.push((line_no, rec));
    }

    let header = header.ok_or_else(|| Error::Structure("missing session header".into()))?;
    let paradigm = header.paradigm;

    let mut trials = Vec::with_capacity(records.len());
    let mut clicks = Vec::new();
    for (line, rec) in records {
        let bad = |message: String| Error::Parse { line, message };
        if rec.trial < 1 {
            return Err(bad(format!("trial index {} must be >= 1", rec.trial)));
        }
        if rec.block < 1 {
            return Err(bad(format!("block {} must be >= 1", rec.block)));
        }
        if !(1..=9).contains(&rec.digit) {
            return Err(bad(format!("digit {} outside 1..=9", rec.digit)));
        }
        let digit = rec.digit as u8;
        if !paradigm.digits.contains(&digit) {
            return Err(bad(format!("digit {digit} is not part of the paradigm")));
        }
        if !rec.onset_ms.is_finite() || rec.onset_ms < 0.0 {
            return Err(bad(format!("invalid onset {}", rec.onset_ms)));
        }
        if !rec.isi_ms.is_finite() || rec.isi_ms < 0.0 {
            return Err(bad(format!("invalid isi {}", rec.isi_ms)));
        }
        if let Some(c) = rec.clicks_ms.iter().find(|c| !c.is_finite()) {
            return Err(bad(format!("invalid click time {c}")));
        }
        clicks.extend_from_slice(&rec.clicks_ms);
        trials.push(TrialEvent {
            trial_index: rec.trial as usize,
            block: rec.block as usize,
            digit,
            onset_ms: rec.onset_ms,
            isi_ms: rec.isi_ms,
            clicks_ms: Vec::new(),
        });
    }

    trials.sort_by_key(|t| t.trial_index);
    for (pos, t) in trials.iter().enumerate() {
        if t.trial_index != pos + 1 {
            return Err(Error::Structure(format!(
                "trial indices are not contiguous: expected {}, found {}",
                pos + 1,
                t.trial_index
            )));
        }
    }
    for pair in trials.windows(2) {
        if pair[1].onset_ms <= pair[0].onset_ms {
            return Err(Error::Structure(format!(
                "onset of trial {} does not follow trial {}",
                pair[1].trial_index, pair[0].trial_index
            )));
        }
    }

    let dropped_clicks = assign_clicks(&mut trials, clicks, &paradigm)?;
    Ok(EventLog {
        participant: header.participant,
        paradigm,
        trials,
        dropped_clicks,
    })
}

/// Distributes clicks to the trial with the greatest onset not after the
/// click. Returns the number of clicks past the end of the session.
fn assign_clicks(
    trials: &mut [TrialEvent],
    mut clicks: Vec<f64>,
    paradigm: &ParadigmSpec,
) -> Result<usize> {
    clicks.sort_by(f64::total_cmp);
    let Some(last) = trials.last() else {
        return if clicks.is_empty() {
            Ok(0)
        } else {
            Err(Error::Structure("clicks present but no trials".into()))
        };
    };
    let session_end = last.onset_ms + paradigm.fixed_trial_ms() + last.isi_ms;

    let mut dropped = 0;
    for click in clicks {
        if click < trials[0].onset_ms {
            return Err(Error::Structure(format!(
                "click at {click} ms precedes the first onset"
            )));
        }
        if click >= session_end {
            dropped += 1;
            continue;
        }
        // number of onsets <= click, always >= 1 here
        let owner = trials.partition_point(|t| t.onset_ms <= click) - 1;
        trials[owner].clicks_ms.push(click);
    }
    Ok(dropped)
}

/// Writes a log in the same JSON Lines layout [`parse_event_log`] reads.
pub fn write_event_log<W: Write>(log: &EventLog, mut out: W) -> Result<()> {
    let header = HeaderRecord {
        schema: EVENT_SCHEMA.to_string(),
        participant: log.participant.clone(),
        paradigm: log.paradigm.clone(),
    };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for t in &log.trials {
        let rec = TrialRecord {
            trial: t.trial_index as i64,
            block: t.block as i64,
            digit: i64::from(t.digit),
            onset_ms: t.onset_ms,
            isi_ms: t.isi_ms,
            clicks_ms: t.clicks_ms.clone(),
        };
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Classifies each trial by digit type and whether it was clicked.
pub fn label_trials(trials: &[TrialEvent], spec: &ParadigmSpec) -> Vec<LabeledTrial> {
    trials
        .iter()
        .map(|event| {
            let clicked = !event.clicks_ms.is_empty();
            let outcome = match (spec.is_target(event.digit), clicked) {
                (false, true) => Outcome::Hit,
                (false, false) => Outcome::OmissionError,
                (true, true) => Outcome::CommissionError,
                (true, false) => Outcome::CorrectInhibition,
            };
            LabeledTrial {
                rt_ms: event.first_latency_ms(),
                multi_click: event.clicks_ms.len() >= 2,
                outcome,
                event: event.clone(),
            }
        })
        .collect()
}

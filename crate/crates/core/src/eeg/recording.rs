use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const EEG_SCHEMA: &str = "vigilkit-eeg/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RestState {
    EyesOpen,
    EyesClosed,
}

impl RestState {
    pub fn short(self) -> &'static str {
        match self {
            RestState::EyesOpen => "eo",
            RestState::EyesClosed => "ec",
        }
    }
}

/// A multichannel recording in microvolts, channels along rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub fs_hz: f64,
    pub data: Array2<f64>,
    pub channel_names: Vec<String>,
    pub eog_channels: Vec<String>,
    pub state: RestState,
}

impl Recording {
    pub fn new(
        fs_hz: f64,
        data: Array2<f64>,
        channel_names: Vec<String>,
        eog_channels: Vec<String>,
        state: RestState,
    ) -> Result<Self> {
        if !(fs_hz.is_finite() && fs_hz > 0.0) {
            return Err(Error::arg(format!("invalid sampling rate {fs_hz}")));
        }
        if data.nrows() != channel_names.len() {
            return Err(Error::arg(format!(
                "{} data rows but {} channel names",
                data.nrows(),
                channel_names.len()
            )));
        }
        for eog in &eog_channels {
            if !channel_names.contains(eog) {
                return Err(Error::arg(format!("ocular channel {eog:?} is not in the montage")));
            }
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::arg("recording contains NaN or infinite samples"));
        }
        Ok(Self {
            fs_hz,
            data,
            channel_names,
            eog_channels,
            state,
        })
    }

    pub fn n_channels(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.data.ncols()
    }

    pub fn duration_s(&self) -> f64 {
        self.n_samples() as f64 / self.fs_hz
    }

    pub fn channel_index(&self, name: &str) -> Option<usize> {
        self.channel_names.iter().position(|c| c == name)
    }

    pub fn eog_indices(&self) -> Vec<usize> {
        self.eog_channels
            .iter()
            .filter_map(|e| self.channel_index(e))
            .collect()
    }

    pub fn scalp_indices(&self) -> Vec<usize> {
        (0..self.n_channels())
            .filter(|i| !self.eog_channels.contains(&self.channel_names[*i]))
            .collect()
    }

    /// Same metadata, new samples (and possibly a new rate).
    pub(crate) fn with_data(&self, data: Array2<f64>, fs_hz: f64) -> Self {
        Self {
            fs_hz,
            data,
            channel_names: self.channel_names.clone(),
            eog_channels: self.eog_channels.clone(),
            state: self.state,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecordingHeader {
    pub schema: String,
    pub fs_hz: f64,
    pub n_channels: usize,
    pub channel_names: Vec<String>,
    pub eog_channels: Vec<String>,
    pub dtype: String,
    pub byte_order: String,
    pub layout: String,
}

/// Binary samples live beside the JSON header with a `.bin` extension.
pub fn data_path(header_path: &Path) -> PathBuf {
    header_path.with_extension("bin")
}

pub fn read_recording(header_path: &Path, state: RestState) -> Result<Recording> {
    let header: RecordingHeader = serde_json::from_reader(BufReader::new(File::open(header_path)?))?;
    if header.schema != EEG_SCHEMA {
        return Err(Error::arg(format!("unsupported recording schema {:?}", header.schema)));
    }
    if header.dtype != "float32" || header.byte_order != "little-endian" || header.layout != "sample-major" {
        return Err(Error::arg(format!(
            "unsupported sample encoding {}/{}/{}",
            header.dtype, header.byte_order, header.layout
        )));
    }
    if header.channel_names.len() != header.n_channels {
        return Err(Error::arg("n_channels disagrees with channel_names"));
    }
    let mut bytes = Vec::new();
    File::open(data_path(header_path))?.read_to_end(&mut bytes)?;
    let frame = 4 * header.n_channels;
    if header.n_channels == 0 || bytes.len() % frame != 0 {
        return Err(Error::arg(format!(
            "{} data bytes do not form whole {}-channel frames",
            bytes.len(),
            header.n_channels
        )));
    }
    let n_samples = bytes.len() / frame;
    let mut data = Array2::<f64>::zeros((header.n_channels, n_samples));
    for (s, chunk) in bytes.chunks_exact(frame).enumerate() {
        for (c, v) in chunk.chunks_exact(4).enumerate() {
            data[[c, s]] = f64::from(f32::from_le_bytes([v[0], v[1], v[2], v[3]]));
        }
    }
    Recording::new(header.fs_hz, data, header.channel_names, header.eog_channels, state)
}

pub fn write_recording(rec: &Recording, header_path: &Path) -> Result<()> {
    let header = RecordingHeader {
        schema: EEG_SCHEMA.into(),
        fs_hz: rec.fs_hz,
        n_channels: rec.n_channels(),
        channel_names: rec.channel_names.clone(),
        eog_channels: rec.eog_channels.clone(),
        dtype: "float32".into(),
        byte_order: "little-endian".into(),
        layout: "sample-major".into(),
    };
    let mut h = BufWriter::new(File::create(header_path)?);
    serde_json::to_writer_pretty(&mut h, &header)?;
    h.write_all(b"\n")?;
    h.flush()?;

    let mut out = BufWriter::new(File::create(data_path(header_path))?);
    for s in 0..rec.n_samples() {
        for c in 0..rec.n_channels() {
            out.write_all(&(rec.data[[c, s]] as f32).to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Small recordings as CSV: a header row of channel names, then one row per
/// sample.
pub fn read_recording_csv<R: Read>(
    reader: R,
    fs_hz: f64,
    eog_channels: Vec<String>,
    state: RestState,
) -> Result<Recording> {
    let mut lines = BufReader::new(reader).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse {
            line: 1,
            message: "empty CSV".into(),
        })??;
    let names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != names.len() {
            return Err(Error::Parse {
                line: i + 2,
                message: format!("expected {} fields, found {}", names.len(), fields.len()),
            });
        }
        for (col, f) in columns.iter_mut().zip(fields) {
            col.push(f.trim().parse().map_err(|e| Error::Parse {
                line: i + 2,
                message: format!("{f:?}: {e}"),
            })?);
        }
    }
    let n = columns.first().map_or(0, Vec::len);
    let flat: Vec<f64> = columns.into_iter().flatten().collect();
    let data = Array2::from_shape_vec((names.len(), n), flat)
        .map_err(|e| Error::arg(e.to_string()))?;
    Recording::new(fs_hz, data, names, eog_channels, state)
}

//! Second-order-section IIR filters with zero-phase (forward-backward)
//! application.

use std::f64::consts::PI;

use ndarray::Array2;
use rustfft::num_complex::Complex64;
use rayon::prelude::*;

use super::recording::Recording;
use crate::error::{Error, Result};

/// One normalised biquad (`a0 == 1`), transposed direct form II.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    fn normalised(b: [f64; 3], a0: f64, a1: f64, a2: f64) -> Self {
        Self {
            b: [b[0] / a0, b[1] / a0, b[2] / a0],
            a: [a1 / a0, a2 / a0],
        }
    }

    fn omega(f: f64, fs: f64) -> (f64, f64, f64) {
        let w = 2.0 * PI * f / fs;
        // 1 - cos(w) without cancellation for small w
        let one_minus_cos = 2.0 * (w / 2.0).sin().powi(2);
        (w.sin(), w.cos(), one_minus_cos)
    }

    pub fn lowpass(fc: f64, fs: f64, q: f64) -> Self {
        let (sin, cos, omc) = Self::omega(fc, fs);
        let alpha = sin / (2.0 * q);
        Self::normalised([omc / 2.0, omc, omc / 2.0], 1.0 + alpha, -2.0 * cos, 1.0 - alpha)
    }

    pub fn highpass(fc: f64, fs: f64, q: f64) -> Self {
        let (sin, cos, _) = Self::omega(fc, fs);
        let alpha = sin / (2.0 * q);
        let k = (1.0 + cos) / 2.0;
        Self::normalised([k, -2.0 * k, k], 1.0 + alpha, -2.0 * cos, 1.0 - alpha)
    }

    /// Notch with zeros on the unit circle at `f0`; bandwidth `f0 / q`.
    pub fn notch(f0: f64, fs: f64, q: f64) -> Self {
        let (sin, cos, _) = Self::omega(f0, fs);
        let alpha = sin / (2.0 * q);
        Self::normalised([1.0, -2.0 * cos, 1.0], 1.0 + alpha, -2.0 * cos, 1.0 - alpha)
    }

    pub fn response(&self, f: f64, fs: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -2.0 * PI * f / fs);
        let z2 = z1 * z1;
        let num = self.b[0] + self.b[1] * z1 + self.b[2] * z2;
        let den = 1.0 + self.a[0] * z1 + self.a[1] * z2;
        num / den
    }

    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }

    /// Largest pole magnitude.
    fn pole_radius(&self) -> f64 {
        let (a1, a2) = (self.a[0], self.a[1]);
        let disc = a1 * a1 - 4.0 * a2;
        if disc < 0.0 {
            a2.sqrt()
        } else {
            let s = disc.sqrt();
            ((-a1 + s) / 2.0).abs().max(((-a1 - s) / 2.0).abs())
        }
    }

    /// State that makes a constant input `x` produce a constant output.
    fn steady_state(&self, x: f64) -> [f64; 2] {
        let y = self.dc_gain() * x;
        let z2 = self.b[2] * x - self.a[1] * y;
        let z1 = self.b[1] * x - self.a[0] * y + z2;
        [z1, z2]
    }

    #[inline]
    fn run(&self, x: &mut [f64], mut z: [f64; 2]) {
        let [b0, b1, b2] = self.b;
        let [a1, a2] = self.a;
        for v in x.iter_mut() {
            let input = *v;
            let y = b0 * input + z[0];
            z[0] = b1 * input - a1 * y + z[1];
            z[1] = b2 * input - a2 * y;
            *v = y;
        }
    }
}

/// Cascade of biquads.
#[derive(Debug, Clone, PartialEq)]
pub struct Sos {
    pub sections: Vec<Biquad>,
}

impl Sos {
    pub fn new(sections: Vec<Biquad>) -> Self {
        Self { sections }
    }

    /// Butterworth low-pass of even `order`.
    pub fn butterworth_lowpass(order: usize, fc: f64, fs: f64) -> Self {
        assert!(order >= 2 && order % 2 == 0, "even order expected");
        let sections = (0..order / 2)
            .map(|k| {
                let q = 1.0 / (2.0 * ((2 * k + 1) as f64 * PI / (2 * order) as f64).sin());
                Biquad::lowpass(fc, fs, q)
            })
            .collect();
        Self { sections }
    }

    pub fn magnitude(&self, f: f64, fs: f64) -> f64 {
        self.sections
            .iter()
            .map(|s| s.response(f, fs))
            .fold(Complex64::new(1.0, 0.0), |acc, h| acc * h)
            .norm()
    }

    /// Samples needed for the impulse response to decay by 1e-6.
    pub fn settle_len(&self) -> usize {
        let r = self
            .sections
            .iter()
            .map(Biquad::pole_radius)
            .fold(0.0_f64, f64::max);
        if r <= 0.0 {
            return 1;
        }
        if r >= 1.0 {
            return usize::MAX;
        }
        ((1e-6_f64).ln() / r.ln()).ceil() as usize
    }

    /// Causal filtering in place, starting from the steady state for `x[0]`.
    pub fn filter_in_place(&self, x: &mut [f64]) {
        let Some(&first) = x.first() else { return };
        let mut level = first;
        for s in &self.sections {
            let z = s.steady_state(level);
            level *= s.dc_gain();
            s.run(x, z);
        }
    }

    /// Forward-backward filtering with odd-reflection padding at both ends.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n < 2 {
            return x.to_vec();
        }
        let pad = self.settle_len().min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        let (first, last) = (x[0], x[n - 1]);
        ext.extend((1..=pad).rev().map(|i| 2.0 * first - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * last - x[n - 1 - i]));

        self.filter_in_place(&mut ext);
        ext.reverse();
        self.filter_in_place(&mut ext);
        ext.reverse();
        ext[pad..pad + n].to_vec()
    }

    /// Zero-phase filtering of every row of a channels x samples matrix.
    pub fn filtfilt_rows(&self, data: &Array2<f64>) -> Array2<f64> {
        let rows: Vec<Vec<f64>> = (0..data.nrows())
            .into_par_iter()
            .map(|c| self.filtfilt(&data.row(c).to_vec()))
            .collect();
        let n = data.ncols();
        Array2::from_shape_fn((rows.len(), n), |(c, s)| rows[c][s])
    }
}

/// 4th-order band-pass: 2nd-order Butterworth high-pass at `lo` cascaded with a
/// 2nd-order Butterworth low-pass at `hi`.
pub fn bandpass_design(lo: f64, hi: f64, fs: f64) -> Result<Sos> {
    if !(lo > 0.0 && lo < hi) {
        return Err(Error::arg(format!("band edges {lo}..{hi} Hz are not ordered")));
    }
    if hi >= fs / 2.0 {
        return Err(Error::arg(format!(
            "upper edge {hi} Hz is at or above the Nyquist frequency {}",
            fs / 2.0
        )));
    }
    let q = std::f64::consts::FRAC_1_SQRT_2;
    Ok(Sos::new(vec![Biquad::highpass(lo, fs, q), Biquad::lowpass(hi, fs, q)]))
}

pub const NOTCH_Q: f64 = 30.0;

pub fn notch_design(f0: f64, fs: f64) -> Result<Sos> {
    if !(f0 > 0.0 && f0 < fs / 2.0) {
        return Err(Error::arg(format!(
            "notch frequency {f0} Hz must lie in (0, {})",
            fs / 2.0
        )));
    }
    Ok(Sos::new(vec![Biquad::notch(f0, fs, NOTCH_Q)]))
}

pub fn bandpass(rec: &Recording, lo: f64, hi: f64) -> Result<Recording> {
    let sos = bandpass_design(lo, hi, rec.fs_hz)?;
    Ok(rec.with_data(sos.filtfilt_rows(&rec.data), rec.fs_hz))
}

pub fn notch(rec: &Recording, f0: f64) -> Result<Recording> {
    let sos = notch_design(f0, rec.fs_hz)?;
    Ok(rec.with_data(sos.filtfilt_rows(&rec.data), rec.fs_hz))
}

/// Lowest output rate accepted: twice the 70 Hz analysis ceiling.
pub const MIN_OUTPUT_FS: f64 = 140.0;

/// Zero-phase 8th-order Butterworth anti-alias filter at 80% of the new
/// Nyquist frequency, then keeps every `fs / target_fs`-th sample.
pub fn decimate(rec: &Recording, target_fs: f64) -> Result<Recording> {
    if target_fs < MIN_OUTPUT_FS {
        return Err(Error::arg(format!(
            "target rate {target_fs} Hz is below the {MIN_OUTPUT_FS} Hz floor"
        )));
    }
    let ratio = rec.fs_hz / target_fs;
    let factor = ratio.round();
    if factor < 1.0 || (ratio - factor).abs() > 1e-9 {
        return Err(Error::arg(format!(
            "{} Hz is not an integer multiple of {target_fs} Hz",
            rec.fs_hz
        )));
    }
    let factor = factor as usize;
    if factor == 1 {
        return Ok(rec.clone());
    }
    let sos = Sos::butterworth_lowpass(8, 0.8 * target_fs / 2.0, rec.fs_hz);
    let filtered = sos.filtfilt_rows(&rec.data);
    let n_out = rec.n_samples().div_ceil(factor);
    let data = Array2::from_shape_fn((rec.n_channels(), n_out), |(c, s)| filtered[[c, s * factor]]);
    Ok(rec.with_data(data, target_fs))
}

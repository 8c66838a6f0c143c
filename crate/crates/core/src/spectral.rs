//! Deterministic spectral primitives: fundamental frequencies, periodograms,
//! the cosine (Demmler-Reinsch) basis and log-spectrum evaluation.
//!
//! Conventions used throughout the crate:
//!
//! ```text
//! Y(ω)   = (1/n) |Σ_{t=1..n} x_t e^{-iωt}|²
//! ω*_j   = 2πj/n,  j = 1..⌊n/2⌋
//! ψ_0(ω) = 1,  ψ_b(ω) = √2 cos(bω)
//! g(ω)   = Σ_{b=0..B} c_b ψ_b(ω)
//! ```
//!
//! The time index runs from 1. Shifting it only changes the phase of the DFT,
//! never |·|².

use std::f64::consts::{PI, SQRT_2};

use nalgebra::{DMatrix, DVector};
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{HbestError, Result};

/// Shortest series accepted by [`TimeSeries::new`].
pub const MIN_SERIES_LEN: usize = 8;

/// One observed, real-valued series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    values: Vec<f64>,
    /// Sampling rate in Hz. Metadata only; all computations use radians per sample.
    pub sample_rate: Option<f64>,
    pub label: String,
}

impl TimeSeries {
    pub fn new(label: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        if values.len() < MIN_SERIES_LEN {
            return Err(HbestError::invalid(format!(
                "series needs at least {MIN_SERIES_LEN} values, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(HbestError::invalid(format!(
                "non-finite value at index {i}"
            )));
        }
        Ok(Self {
            values,
            sample_rate: None,
            label: label.into(),
        })
    }

    pub fn with_sample_rate(mut self, hz: f64) -> Result<Self> {
        if !(hz.is_finite() && hz > 0.0) {
            return Err(HbestError::invalid("sample rate must be positive"));
        }
        self.sample_rate = Some(hz);
        Ok(self)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Periodogram ordinates at the fundamental frequencies of a series.
#[derive(Clone, Debug, PartialEq)]
pub struct Periodogram {
    pub frequencies: Vec<f64>,
    pub ordinates: Vec<f64>,
    /// Length of the series the periodogram came from.
    pub n: usize,
}

impl Periodogram {
    pub fn len(&self) -> usize {
        self.ordinates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ordinates.is_empty()
    }
}

/// Coefficients of a log-spectrum in the cosine basis; index 0 is the intercept.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplineVector(pub DVector<f64>);

impl SplineVector {
    pub fn zeros(basis_count: usize) -> Self {
        SplineVector(DVector::zeros(basis_count + 1))
    }

    pub fn from_vec(coeffs: Vec<f64>) -> Self {
        SplineVector(DVector::from_vec(coeffs))
    }

    /// Number of non-intercept basis functions B.
    pub fn basis_count(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    pub fn intercept(&self) -> f64 {
        self.0[0]
    }

    /// Coefficients without the intercept.
    pub fn slopes(&self) -> &[f64] {
        &self.0.as_slice()[1..]
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }
}

/// Rows ψ_jᵀ = (1, √2 cos ω_j, ..., √2 cos Bω_j) for an evaluation grid.
#[derive(Clone, Debug, PartialEq)]
pub struct BasisMatrix {
    pub rows: DMatrix<f64>,
    pub basis_count: usize,
    pub frequencies: Vec<f64>,
}

impl BasisMatrix {
    pub fn nrows(&self) -> usize {
        self.rows.nrows()
    }

    /// Column sums Ψᵀ𝟙.
    pub fn column_sums(&self) -> DVector<f64> {
        self.rows.row_sum().transpose()
    }
}

/// ω*_j = 2πj/n for j = 1..⌊n/2⌋.
pub fn fundamental_frequencies(n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(HbestError::invalid(format!("need n >= 2, got {n}")));
    }
    Ok((1..=n / 2)
        .map(|j| 2.0 * PI * j as f64 / n as f64)
        .collect())
}

/// Periodogram at the fundamental frequencies, computed with an FFT.
///
/// The series mean is not removed; see [`standardize`].
pub fn periodogram(series: &TimeSeries) -> Periodogram {
    let n = series.len();
    let full = full_grid_periodogram(series.values());
    Periodogram {
        frequencies: fundamental_frequencies(n).expect("series length >= 8"),
        ordinates: full[1..=n / 2].to_vec(),
        n,
    }
}

/// Periodogram on the full Fourier grid 2πk/n, k = 0..n-1.
pub fn full_grid_periodogram(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    if n == 0 {
        return Vec::new();
    }
    let mut buf: Vec<Complex<f64>> = values.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    buf.iter().map(|c| c.norm_sqr() / n as f64).collect()
}

/// Direct O(n·m) evaluation of the periodogram at arbitrary frequencies.
///
/// Kept as the reference path for the FFT implementation.
pub fn periodogram_direct(values: &[f64], frequencies: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    frequencies
        .iter()
        .map(|&w| {
            let (mut re, mut im) = (0.0, 0.0);
            for (i, &x) in values.iter().enumerate() {
                let t = (i + 1) as f64;
                re += x * (w * t).cos();
                im -= x * (w * t).sin();
            }
            (re * re + im * im) / n
        })
        .collect()
}

/// Rescale to sample mean 0 and sample variance 1 (divisor n).
pub fn standardize(series: &TimeSeries) -> Result<TimeSeries> {
    let x = series.values();
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    if var.is_nan() || var <= 0.0 || var.sqrt() <= f64::EPSILON * mean.abs().max(1.0) {
        return Err(HbestError::Degenerate(format!(
            "series '{}' has zero variance",
            series.label
        )));
    }
    let sd = var.sqrt();
    Ok(TimeSeries {
        values: x.iter().map(|v| (v - mean) / sd).collect(),
        sample_rate: series.sample_rate,
        label: series.label.clone(),
    })
}

/// ψ_b(ω) for b = 0..=B, written into `out`.
pub fn basis_row_into(omega: f64, out: &mut [f64]) {
    out[0] = 1.0;
    for (b, v) in out.iter_mut().enumerate().skip(1) {
        *v = SQRT_2 * (b as f64 * omega).cos();
    }
}

pub fn basis_matrix(frequencies: &[f64], basis_count: usize) -> BasisMatrix {
    let mut rows = DMatrix::zeros(frequencies.len(), basis_count + 1);
    let mut row = vec![0.0; basis_count + 1];
    for (j, &w) in frequencies.iter().enumerate() {
        basis_row_into(w, &mut row);
        for (b, &v) in row.iter().enumerate() {
            rows[(j, b)] = v;
        }
    }
    BasisMatrix {
        rows,
        basis_count,
        frequencies: frequencies.to_vec(),
    }
}

/// g(ω) = Ψ(ω)·c on the given grid.
pub fn eval_log_spectrum(coeffs: &SplineVector, frequencies: &[f64]) -> Vec<f64> {
    let basis = basis_matrix(frequencies, coeffs.basis_count());
    (&basis.rows * &coeffs.0).iter().copied().collect()
}

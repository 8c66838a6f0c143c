//! Simulation designs with known spectra: a conditional MA(4), a conditional
//! mixture of two AR(2) processes, and Gaussian series drawn directly from
//! the hierarchical cosine-basis prior via a Toeplitz autocovariance.
//!
//! Spectra follow the periodogram convention of [`crate::spectral`]: the
//! expected periodogram of a series equals its spectrum f(ω), and the process
//! variance is (1/2π)∫₀^{2π} f(ω) dω.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal, Uniform};
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal as StatNormal};

use crate::error::{HbestError, Result};
use crate::model::DSchedule;
use crate::spectral::{basis_row_into, standardize, TimeSeries};

/// Pre-samples discarded before recording MA and AR series.
pub const BURN_IN: usize = 1000;
/// Uniform grid size for the autocovariance quadrature.
pub const QUADRATURE_POINTS: usize = 1 << 14;
pub const MA4_BASE: [f64; 4] = [-0.3, -0.6, -0.3, 0.6];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variation {
    None,
    Moderate,
    High,
}

impl Variation {
    /// Multiplier α on the standard deviation 0.3 of θ_1.
    pub fn alpha(self) -> f64 {
        match self {
            Variation::None => 0.0,
            Variation::Moderate => 0.15,
            Variation::High => 0.3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ma4Setting {
    pub variation: Variation,
    pub replicates: usize,
    pub length: usize,
    #[serde(default = "yes")]
    pub standardize: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ar2MixSetting {
    pub replicates: usize,
    pub length: usize,
    #[serde(default = "yes")]
    pub standardize: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LengthShare {
    pub length: usize,
    pub proportion: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HierSetting {
    /// Scale of the replicate-level variation (0.1 moderate, 1 high).
    pub kappa: f64,
    pub replicates: usize,
    #[serde(default = "default_length_mix")]
    pub length_mix: Vec<LengthShare>,
    #[serde(default = "default_basis")]
    pub basis_count: usize,
    #[serde(default)]
    pub standardize: bool,
}

fn yes() -> bool {
    true
}

fn default_basis() -> usize {
    15
}

fn default_length_mix() -> Vec<LengthShare> {
    vec![
        LengthShare {
            length: 600,
            proportion: 0.8,
        },
        LengthShare {
            length: 1200,
            proportion: 0.2,
        },
    ]
}

impl HierSetting {
    pub fn validate(&self) -> Result<()> {
        if self.kappa.is_nan() || self.kappa <= 0.0 {
            return Err(HbestError::invalid("kappa must be positive"));
        }
        let total: f64 = self.length_mix.iter().map(|s| s.proportion).sum();
        if self.length_mix.is_empty()
            || (total - 1.0).abs() > 1e-9
            || self.length_mix.iter().any(|s| s.proportion < 0.0)
        {
            return Err(HbestError::invalid(
                "length proportions must be non-negative and sum to 1",
            ));
        }
        if self.basis_count < 1 {
            return Err(HbestError::invalid("basis_count must be >= 1"));
        }
        Ok(())
    }

    /// Series lengths in replicate order: each share rounded by largest
    /// remainder, shorter lengths first in the order given.
    pub fn lengths(&self) -> Vec<usize> {
        let l = self.replicates as f64;
        let raw: Vec<f64> = self.length_mix.iter().map(|s| s.proportion * l).collect();
        let mut counts: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
        let mut left = self.replicates - counts.iter().sum::<usize>();
        let mut order: Vec<usize> = (0..raw.len()).collect();
        order.sort_by(|&a, &b| {
            (raw[b] - raw[b].floor())
                .total_cmp(&(raw[a] - raw[a].floor()))
                .then(a.cmp(&b))
        });
        for &i in order.iter().cycle() {
            if left == 0 {
                break;
            }
            counts[i] += 1;
            left -= 1;
        }
        self.length_mix
            .iter()
            .zip(counts)
            .flat_map(|(s, c)| std::iter::repeat_n(s.length, c))
            .collect()
    }
}

/// Closed-form log-spectrum of one simulated replicate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrueSpectrum {
    /// |1 + Σ θ_k e^{-ikω}|² with unit innovations.
    Ma { theta: Vec<f64>, offset: f64 },
    /// Sum of AR(2) spectra 1/|1 - φ_1 e^{-iω} - φ_2 e^{-2iω}|².
    Ar2Mixture { phi: Vec<[f64; 2]>, offset: f64 },
    /// Cosine-basis log-spectrum α + Σ_b ψ_b(ω) β_b.
    Cosine { coeffs: Vec<f64>, offset: f64 },
}

impl TrueSpectrum {
    /// log f(ω), excluding `offset`.
    fn raw_log(&self, w: f64) -> f64 {
        match self {
            TrueSpectrum::Ma { theta, .. } => {
                let (mut re, mut im) = (1.0, 0.0);
                for (k, t) in theta.iter().enumerate() {
                    let a = (k + 1) as f64 * w;
                    re += t * a.cos();
                    im -= t * a.sin();
                }
                (re * re + im * im).ln()
            }
            TrueSpectrum::Ar2Mixture { phi, .. } => phi
                .iter()
                .map(|[p1, p2]| {
                    let re = 1.0 - p1 * w.cos() - p2 * (2.0 * w).cos();
                    let im = p1 * w.sin() + p2 * (2.0 * w).sin();
                    1.0 / (re * re + im * im)
                })
                .sum::<f64>()
                .ln(),
            TrueSpectrum::Cosine { coeffs, .. } => {
                let mut row = vec![0.0; coeffs.len()];
                basis_row_into(w, &mut row);
                row.iter().zip(coeffs).map(|(p, c)| p * c).sum()
            }
        }
    }

    pub fn offset(&self) -> f64 {
        match self {
            TrueSpectrum::Ma { offset, .. }
            | TrueSpectrum::Ar2Mixture { offset, .. }
            | TrueSpectrum::Cosine { offset, .. } => *offset,
        }
    }

    fn offset_mut(&mut self) -> &mut f64 {
        match self {
            TrueSpectrum::Ma { offset, .. }
            | TrueSpectrum::Ar2Mixture { offset, .. }
            | TrueSpectrum::Cosine { offset, .. } => offset,
        }
    }

    pub fn log_spectrum(&self, frequencies: &[f64]) -> Vec<f64> {
        let off = self.offset();
        frequencies.iter().map(|&w| self.raw_log(w) + off).collect()
    }

    /// Process variance (1/2π)∫₀^{2π} f(ω) dω by the periodic trapezoid rule.
    pub fn variance(&self) -> f64 {
        let n = QUADRATURE_POINTS;
        let off = self.offset();
        (0..n)
            .map(|k| (self.raw_log(2.0 * PI * k as f64 / n as f64) + off).exp())
            .sum::<f64>()
            / n as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HierDraw {
    pub tau: f64,
    pub zeta: Vec<f64>,
    pub alpha_glob: f64,
    pub beta_glob: Vec<f64>,
    pub alpha_loc: Vec<f64>,
    pub beta_loc: Vec<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct SimulatedDataset {
    pub series: Vec<TimeSeries>,
    pub truths: Vec<TrueSpectrum>,
    /// Hyper-draws of the hierarchical design, when applicable.
    pub hier: Option<HierDraw>,
}

impl SimulatedDataset {
    /// Tabulated true log-spectra, one vector per replicate.
    pub fn true_log_spectra(&self, frequencies: &[f64]) -> Vec<Vec<f64>> {
        self.truths
            .iter()
            .map(|t| t.log_spectrum(frequencies))
            .collect()
    }
}

fn label(ell: usize) -> String {
    format!("rep_{ell:03}")
}

/// Standardise the series and shift the truth by -log(process variance).
fn finish(
    label: String,
    values: Vec<f64>,
    mut truth: TrueSpectrum,
    do_standardize: bool,
) -> Result<(TimeSeries, TrueSpectrum)> {
    let mut series = TimeSeries::new(label, values)?;
    if do_standardize {
        series = standardize(&series)?;
        let v = truth.variance();
        *truth.offset_mut() -= v.ln();
    }
    Ok((series, truth))
}

pub fn gen_ma4<R: Rng + ?Sized>(setting: &Ma4Setting, rng: &mut R) -> Result<SimulatedDataset> {
    let spread = 0.3 * setting.variation.alpha();
    let theta1 =
        Normal::new(MA4_BASE[0], spread).map_err(|e| HbestError::invalid(e.to_string()))?;
    let mut series = Vec::with_capacity(setting.replicates);
    let mut truths = Vec::with_capacity(setting.replicates);
    for ell in 0..setting.replicates {
        let mut theta = MA4_BASE;
        if spread > 0.0 {
            theta[0] = theta1.sample(rng);
        }
        let total = BURN_IN + setting.length;
        let eps: Vec<f64> = (0..total + 4).map(|_| rng.sample(StandardNormal)).collect();
        let values = (BURN_IN..total)
            .map(|t| {
                let s = t + 4;
                eps[s] + (0..4).map(|k| theta[k] * eps[s - k - 1]).sum::<f64>()
            })
            .collect();
        let truth = TrueSpectrum::Ma {
            theta: theta.to_vec(),
            offset: 0.0,
        };
        let (s, t) = finish(label(ell), values, truth, setting.standardize)?;
        series.push(s);
        truths.push(t);
    }
    Ok(SimulatedDataset {
        series,
        truths,
        hier: None,
    })
}

/// AR(2) coefficients for a spectral peak near `peak` with bandwidth `bandwidth`.
pub fn ar2_coefficients(peak: f64, bandwidth: f64) -> [f64; 2] {
    [
        2.0 * peak.cos() * (-bandwidth).exp(),
        -(-2.0 * bandwidth).exp(),
    ]
}

fn simulate_ar2<R: Rng + ?Sized>(phi: [f64; 2], n: usize, rng: &mut R) -> Vec<f64> {
    let (mut z1, mut z2) = (0.0, 0.0);
    let mut out = Vec::with_capacity(n);
    for t in 0..BURN_IN + n {
        let e: f64 = rng.sample(StandardNormal);
        let z = phi[0] * z1 + phi[1] * z2 + e;
        z2 = z1;
        z1 = z;
        if t >= BURN_IN {
            out.push(z);
        }
    }
    out
}

pub fn gen_ar2_mixture<R: Rng + ?Sized>(
    setting: &Ar2MixSetting,
    rng: &mut R,
) -> Result<SimulatedDataset> {
    let u = |a: f64, b: f64| Uniform::new(a, b).expect("valid bounds");
    let (peak1, band1, peak2) = (u(0.2, 0.23), u(0.1, 0.2), u(PI / 5.0 - 0.1, PI / 5.0 + 0.1));
    let mut series = Vec::with_capacity(setting.replicates);
    let mut truths = Vec::with_capacity(setting.replicates);
    for ell in 0..setting.replicates {
        let comps = [
            ar2_coefficients(peak1.sample(rng), band1.sample(rng)),
            ar2_coefficients(peak2.sample(rng), 0.15),
        ];
        for phi in &comps {
            // |φ_2| = e^{-2κ} < 1 keeps both roots inside the unit circle.
            assert!(phi[1].abs() < 1.0, "unstable AR(2) coefficients");
        }
        let a = simulate_ar2(comps[0], setting.length, rng);
        let b = simulate_ar2(comps[1], setting.length, rng);
        let values = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let truth = TrueSpectrum::Ar2Mixture {
            phi: comps.to_vec(),
            offset: 0.0,
        };
        let (s, t) = finish(label(ell), values, truth, setting.standardize)?;
        series.push(s);
        truths.push(t);
    }
    Ok(SimulatedDataset {
        series,
        truths,
        hier: None,
    })
}

/// γ(h) = ∫₀^{2π} exp{g(ω)} cos(hω) dω for h = 0..max_lag-1, by the periodic
/// trapezoid rule on [`QUADRATURE_POINTS`] nodes (an inverse DFT of e^g).
///
/// Also returns the largest imaginary part seen, which vanishes for a
/// cosine-basis g.
pub fn cosine_autocovariance(coeffs: &[f64], max_lag: usize) -> (Vec<f64>, f64) {
    let n = QUADRATURE_POINTS;
    let mut row = vec![0.0; coeffs.len()];
    let mut buf: Vec<Complex<f64>> = (0..n)
        .map(|k| {
            basis_row_into(2.0 * PI * k as f64 / n as f64, &mut row);
            let g: f64 = row.iter().zip(coeffs).map(|(p, c)| p * c).sum();
            Complex::new(g.exp(), 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    let h = 2.0 * PI / n as f64;
    let lags = max_lag.min(n);
    let max_imag = buf[..lags]
        .iter()
        .map(|c| (c.im * h).abs())
        .fold(0.0, f64::max);
    (buf[..lags].iter().map(|c| c.re * h).collect(), max_imag)
}

/// Zero-mean Gaussian vectors with a symmetric Toeplitz covariance.
#[derive(Clone, Debug)]
pub struct ToeplitzGaussian {
    lower: DMatrix<f64>,
    /// Diagonal jitter that had to be added, zero if none.
    pub jitter: f64,
}

impl ToeplitzGaussian {
    pub fn toeplitz(autocov: &[f64]) -> DMatrix<f64> {
        let n = autocov.len();
        DMatrix::from_fn(n, n, |i, j| autocov[i.abs_diff(j)])
    }

    /// Factor the covariance; if that fails, retry once with 1e-10·γ(0) added
    /// to the diagonal.
    pub fn new(autocov: &[f64]) -> Result<Self> {
        let gamma = Self::toeplitz(autocov);
        if let Some(ch) = gamma.clone().cholesky() {
            return Ok(Self {
                lower: ch.unpack(),
                jitter: 0.0,
            });
        }
        let jitter = 1e-10 * autocov[0];
        let mut repaired = gamma;
        for i in 0..repaired.nrows() {
            repaired[(i, i)] += jitter;
        }
        repaired
            .cholesky()
            .map(|ch| Self {
                lower: ch.unpack(),
                jitter,
            })
            .ok_or_else(|| {
                HbestError::Degenerate("Toeplitz autocovariance is not positive definite".into())
            })
    }

    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z = DVector::from_iterator(
            self.dim(),
            (0..self.dim()).map(|_| rng.sample::<f64, _>(StandardNormal)),
        );
        (&self.lower * z).iter().copied().collect()
    }
}

/// Standard normal truncated to [lo, hi] by inverse-CDF sampling.
fn truncated_std_normal<R: Rng + ?Sized>(lo: f64, hi: f64, rng: &mut R) -> f64 {
    let n = StatNormal::standard();
    let (a, b) = (n.cdf(lo), n.cdf(hi));
    let u: f64 = rng.random();
    n.inverse_cdf(a + u * (b - a)).clamp(lo, hi)
}

pub fn draw_hierarchical_parameters<R: Rng + ?Sized>(
    setting: &HierSetting,
    rng: &mut R,
) -> HierDraw {
    let d = DSchedule::new(setting.basis_count);
    let normal = |var: f64, rng: &mut R| var.sqrt() * rng.sample::<f64, _>(StandardNormal);
    let tau: f64 = Uniform::new(3.0, 8.0).expect("valid bounds").sample(rng);
    let zeta: Vec<f64> = (0..setting.replicates)
        .map(|_| truncated_std_normal(1.0, 1.1, rng))
        .collect();
    let alpha_glob = normal(50.0 / 3.0, rng);
    let beta_glob = d.d.iter().map(|db| normal(tau * tau * db, rng)).collect();
    let alpha_loc = (0..setting.replicates)
        .map(|_| normal(setting.kappa * 0.005, rng))
        .collect();
    let beta_loc = zeta
        .iter()
        .map(|z| {
            d.d.iter()
                .map(|db| normal(setting.kappa * tau * tau * db * (z * z - 1.0), rng))
                .collect()
        })
        .collect();
    HierDraw {
        tau,
        zeta,
        alpha_glob,
        beta_glob,
        alpha_loc,
        beta_loc,
    }
}

pub fn gen_hierarchical<R: Rng + ?Sized>(
    setting: &HierSetting,
    rng: &mut R,
) -> Result<SimulatedDataset> {
    setting.validate()?;
    let draw = draw_hierarchical_parameters(setting, rng);
    let lengths = setting.lengths();
    let mut series = Vec::with_capacity(setting.replicates);
    let mut truths = Vec::with_capacity(setting.replicates);
    for (ell, &n) in lengths.iter().enumerate() {
        let mut coeffs = Vec::with_capacity(setting.basis_count + 1);
        coeffs.push(draw.alpha_glob + draw.alpha_loc[ell]);
        coeffs.extend(
            draw.beta_glob
                .iter()
                .zip(&draw.beta_loc[ell])
                .map(|(g, l)| g + l),
        );
        let (autocov, _) = cosine_autocovariance(&coeffs, n);
        let values = ToeplitzGaussian::new(&autocov)?.draw(rng);
        // The autocovariance integral carries no 1/2π, so under the
        // periodogram convention the spectrum is 2π·e^g.
        let truth = TrueSpectrum::Cosine {
            coeffs,
            offset: (2.0 * PI).ln(),
        };
        let (s, t) = finish(label(ell), values, truth, setting.standardize)?;
        series.push(s);
        truths.push(t);
    }
    Ok(SimulatedDataset {
        series,
        truths,
        hier: Some(draw),
    })
}

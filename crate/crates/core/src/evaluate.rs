//! Posterior summaries and accuracy metrics over a stored chain.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{HbestError, Result};
use crate::sampler::Chain;
use crate::spectral::{basis_matrix, SplineVector};

/// Evaluation frequencies ω_k = πk/(K−1), k = 0..K−1, with a trimmed band
/// selected on the normalised scale k/(K−1).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalGrid {
    pub omegas: Vec<f64>,
    pub trim: (f64, f64),
}

impl EvalGrid {
    pub const DEFAULT_SIZE: usize = 1000;
    pub const DEFAULT_TRIM: (f64, f64) = (0.05, 0.95);

    pub fn new(k: usize, trim: (f64, f64)) -> Result<Self> {
        if k < 2 {
            return Err(HbestError::invalid("evaluation grid needs K >= 2"));
        }
        let (lo, hi) = trim;
        if !(0.0..1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo >= hi {
            return Err(HbestError::invalid(
                "trim bounds must satisfy 0 <= lo < hi <= 1",
            ));
        }
        let omegas = (0..k).map(|i| PI * i as f64 / (k - 1) as f64).collect();
        Ok(Self { omegas, trim })
    }

    pub fn size(&self) -> usize {
        self.omegas.len()
    }

    /// Indices of the trimmed band, lo ≤ k/(K−1) < hi.
    pub fn trimmed_indices(&self) -> Vec<usize> {
        let k = self.size();
        (0..k)
            .filter(|&i| {
                let x = i as f64 / (k - 1) as f64;
                x >= self.trim.0 && x < self.trim.1
            })
            .collect()
    }
}

impl Default for EvalGrid {
    fn default() -> Self {
        Self::new(Self::DEFAULT_SIZE, Self::DEFAULT_TRIM).expect("default grid is valid")
    }
}

/// Basis rows at the grid points restricted to `indices`.
fn basis_at(grid: &EvalGrid, indices: &[usize], basis_count: usize) -> DMatrix<f64> {
    let freqs: Vec<f64> = indices.iter().map(|&i| grid.omegas[i]).collect();
    basis_matrix(&freqs, basis_count).rows
}

/// Log-spectra of every stored sample at the basis rows, one column per sample.
fn sample_curves(rows: &DMatrix<f64>, coeffs: impl Iterator<Item = SplineVector>) -> DMatrix<f64> {
    let cols: Vec<DVector<f64>> = coeffs.map(|c| rows * &c.0).collect();
    if cols.is_empty() {
        return DMatrix::zeros(rows.nrows(), 0);
    }
    DMatrix::from_columns(&cols)
}

fn check_truths(chain: &Chain, truths: &[Vec<f64>], grid: &EvalGrid) -> Result<()> {
    if chain.n_samples() == 0 {
        return Err(HbestError::invalid("chain has no stored samples"));
    }
    if truths.len() != chain.n_replicates() {
        return Err(HbestError::invalid(format!(
            "{} truths for {} replicates",
            truths.len(),
            chain.n_replicates()
        )));
    }
    if truths.iter().any(|t| t.len() != grid.size()) {
        return Err(HbestError::invalid(
            "each truth must be tabulated on the evaluation grid",
        ));
    }
    Ok(())
}

fn aepl_on(chain: &Chain, truths: &[Vec<f64>], grid: &EvalGrid, indices: &[usize]) -> Result<f64> {
    check_truths(chain, truths, grid)?;
    if indices.is_empty() {
        return Err(HbestError::invalid("empty evaluation band"));
    }
    let rows = basis_at(grid, indices, chain.basis_count);
    let n = chain.n_samples();
    let per_rep: Vec<f64> = (0..chain.n_replicates())
        .into_par_iter()
        .map(|ell| {
            let curves = sample_curves(&rows, (0..n).map(|i| chain.replicate_coeffs(i, ell)));
            let mut total = 0.0;
            for (r, &j) in indices.iter().enumerate() {
                let t = truths[ell][j];
                total += curves.row(r).iter().map(|g| (g - t) * (g - t)).sum::<f64>();
            }
            total
        })
        .collect();
    let denom = (chain.n_replicates() * n * indices.len()) as f64;
    Ok(per_rep.iter().sum::<f64>() / denom)
}

/// Trimmed approximate expected posterior loss: the mean squared error of
/// every stored log-spectrum against truth, averaged over replicates,
/// samples and the trimmed band. `truths[ℓ]` is tabulated on `grid.omegas`.
pub fn aepl(chain: &Chain, truths: &[Vec<f64>], grid: &EvalGrid) -> Result<f64> {
    aepl_on(chain, truths, grid, &grid.trimmed_indices())
}

/// [`aepl`] over the full grid.
pub fn aepl_untrimmed(chain: &Chain, truths: &[Vec<f64>], grid: &EvalGrid) -> Result<f64> {
    let all: Vec<usize> = (0..grid.size()).collect();
    aepl_on(chain, truths, grid, &all)
}

/// Pointwise posterior mean and 2.5%/97.5% quantiles of one curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Band {
    fn from_curves(curves: &DMatrix<f64>) -> Self {
        let k = curves.nrows();
        let mut band = Band {
            mean: vec![0.0; k],
            lower: vec![0.0; k],
            upper: vec![0.0; k],
        };
        let mut buf = Vec::with_capacity(curves.ncols());
        for r in 0..k {
            buf.clear();
            buf.extend(curves.row(r).iter().copied());
            band.mean[r] = buf.iter().sum::<f64>() / buf.len() as f64;
            buf.sort_by(f64::total_cmp);
            band.lower[r] = quantile_sorted(&buf, 0.025);
            band.upper[r] = quantile_sorted(&buf, 0.975);
        }
        band
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSummary {
    pub grid: EvalGrid,
    pub labels: Vec<String>,
    /// g_ℓ = g_glob + g_loc,ℓ for each replicate.
    pub replicates: Vec<Band>,
    /// g_glob, absent for the independent baseline.
    pub global: Option<Band>,
    /// g_loc,ℓ, absent for the independent baseline.
    pub local: Option<Vec<Band>>,
}

/// Type-7 quantile of sorted data: linear interpolation between order
/// statistics at position (n−1)p.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    assert!(n > 0, "quantile of empty data");
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn posterior_summary(chain: &Chain, grid: &EvalGrid) -> Result<SpectrumSummary> {
    if chain.n_samples() == 0 {
        return Err(HbestError::invalid("chain has no stored samples"));
    }
    let all: Vec<usize> = (0..grid.size()).collect();
    let rows = basis_at(grid, &all, chain.basis_count);
    let n = chain.n_samples();
    let replicates = (0..chain.n_replicates())
        .into_par_iter()
        .map(|ell| {
            Band::from_curves(&sample_curves(
                &rows,
                (0..n).map(|i| chain.replicate_coeffs(i, ell)),
            ))
        })
        .collect();
    let global = chain.global_coeffs(0).map(|_| {
        let curves = sample_curves(
            &rows,
            (0..n).map(|i| chain.global_coeffs(i).cloned().expect("global present")),
        );
        Band::from_curves(&curves)
    });
    let local = chain.local_coeffs(0, 0).map(|_| {
        (0..chain.n_replicates())
            .into_par_iter()
            .map(|ell| {
                let coeffs = (0..n).map(|i| chain.local_coeffs(i, ell).expect("local present"));
                Band::from_curves(&sample_curves(&rows, coeffs))
            })
            .collect()
    });
    Ok(SpectrumSummary {
        grid: grid.clone(),
        labels: chain.labels.clone(),
        replicates,
        global,
        local,
    })
}

/// Sample standard deviation (divisor L−1) across replicates of the
/// posterior-mean local log-spectra, at each grid frequency.
pub fn local_sd(chain: &Chain, grid: &EvalGrid) -> Result<Vec<f64>> {
    let l = chain.n_replicates();
    if l < 2 {
        return Err(HbestError::invalid(
            "local SD needs at least two replicates",
        ));
    }
    if chain.n_samples() == 0 {
        return Err(HbestError::invalid("chain has no stored samples"));
    }
    if chain.local_coeffs(0, 0).is_none() {
        return Err(HbestError::invalid(
            "the independent baseline has no local spectra",
        ));
    }
    let all: Vec<usize> = (0..grid.size()).collect();
    let rows = basis_at(grid, &all, chain.basis_count);
    let n = chain.n_samples() as f64;
    // The local log-spectrum is linear in the coefficients, so its posterior
    // mean is the curve of the mean coefficients.
    let means: Vec<DVector<f64>> = (0..l)
        .map(|ell| {
            let sum = (0..chain.n_samples())
                .map(|i| chain.local_coeffs(i, ell).expect("local present").0)
                .fold(DVector::zeros(chain.basis_count + 1), |a, c| a + c);
            &rows * (sum / n)
        })
        .collect();
    Ok((0..grid.size())
        .map(|k| {
            let m = means.iter().map(|v| v[k]).sum::<f64>() / l as f64;
            (means.iter().map(|v| (v[k] - m).powi(2)).sum::<f64>() / (l - 1) as f64).sqrt()
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EssEstimate {
    pub ess: f64,
    /// Zero-variance input; `ess` is then N.
    pub degenerate: bool,
}

/// Sample autocorrelations ρ̂_0..ρ̂_{N−1} (biased autocovariance, divisor N).
pub fn autocorrelation(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let size = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = x.iter().map(|v| Complex::new(v - mean, 0.0)).collect();
    buf.resize(size, Complex::new(0.0, 0.0));
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(size).process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(size).process(&mut buf);
    let c0 = buf[0].re;
    buf[..n].iter().map(|c| c.re / c0).collect()
}

/// Effective sample size by the initial positive sequence estimator:
/// N / (1 + 2Σρ̂_k), summing autocorrelation pairs ρ̂_{2m} + ρ̂_{2m+1} until
/// the first non-positive pair. The result is clamped to N, so strongly
/// antithetic chains report N.
pub fn ess(samples: &[f64]) -> Result<EssEstimate> {
    let n = samples.len();
    if n < 10 {
        return Err(HbestError::invalid("ESS needs at least 10 samples"));
    }
    if !samples.iter().all(|v| v.is_finite()) {
        return Err(HbestError::invalid("ESS input must be finite"));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    if var <= f64::EPSILON * mean.abs().max(1.0) * n as f64 * f64::EPSILON || var == 0.0 {
        return Ok(EssEstimate {
            ess: n as f64,
            degenerate: true,
        });
    }
    let rho = autocorrelation(samples);
    let mut tau = -1.0;
    let mut m = 0;
    while 2 * m + 1 < n {
        let pair = rho[2 * m] + rho[2 * m + 1];
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        m += 1;
    }
    let ess = if tau <= 1.0 { n as f64 } else { n as f64 / tau };
    Ok(EssEstimate {
        ess: ess.min(n as f64),
        degenerate: false,
    })
}

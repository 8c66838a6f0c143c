//! Griddy Gibbs updates for the scale parameters τ and ζ_ℓ.
//!
//! The grid is uniform in probability under the Student-t(ν) CDF between the
//! two bounds, so it is dense where the prior puts its mass.

use rand::Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{HbestError, Result};
use crate::model::{cond_logpost_tau, cond_logpost_zeta, Hyperparameters, ParameterState};

#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub points: Vec<f64>,
}

impl Grid {
    /// t_k = F_ν⁻¹(p_k) with p_k uniform on [F_ν(lower), F_ν(upper)].
    pub fn student_t(nu: f64, lower: f64, upper: f64, k: usize) -> Result<Self> {
        if k < 2 || lower.is_nan() || upper.is_nan() || lower >= upper {
            return Err(HbestError::invalid("grid needs k >= 2 and lower < upper"));
        }
        let t = StudentsT::new(0.0, 1.0, nu).map_err(|e| HbestError::invalid(e.to_string()))?;
        let (p_lo, p_hi) = (t.cdf(lower), t.cdf(upper));
        let mut points: Vec<f64> = (0..k)
            .map(|i| t.inverse_cdf(p_lo + (p_hi - p_lo) * i as f64 / (k - 1) as f64))
            .collect();
        // The endpoints are the bounds themselves; pin them to avoid quantile round-off.
        points[0] = lower;
        points[k - 1] = upper;
        Ok(Self { points })
    }

    pub fn tau(hp: &Hyperparameters) -> Result<Self> {
        Self::student_t(hp.nu_tau, hp.tau_min, hp.tau_max, hp.k_tau)
    }

    pub fn zeta(hp: &Hyperparameters) -> Result<Self> {
        Self::student_t(hp.nu_zeta, hp.zeta_min, hp.zeta_max, hp.k_zeta)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Grid point closest to `x`.
    pub fn nearest(&self, x: f64) -> f64 {
        *self
            .points
            .iter()
            .min_by(|a, b| (*a - x).abs().total_cmp(&(*b - x).abs()))
            .expect("grid is non-empty")
    }

    /// Draw a grid point with probability proportional to exp(log_density).
    pub fn sample<R: Rng + ?Sized>(
        &self,
        log_density: impl Fn(f64) -> f64,
        rng: &mut R,
    ) -> Result<f64> {
        let log_w: Vec<f64> = self.points.iter().map(|&p| log_density(p)).collect();
        let w = softmax(&log_w)?;
        Ok(self.points[sample_discrete(&w, rng)])
    }
}

/// Max-shifted softmax. Fails when no weight is finite.
pub fn softmax(log_weights: &[f64]) -> Result<Vec<f64>> {
    let max = log_weights
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(HbestError::failure(
            "griddy Gibbs: no finite log-density on the grid",
        ));
    }
    let mut w: Vec<f64> = log_weights
        .iter()
        .map(|&v| if v.is_nan() { 0.0 } else { (v - max).exp() })
        .collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    Ok(w)
}

/// Inverse-CDF draw from normalised weights.
pub fn sample_discrete<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    // u landed in the rounding gap above the final cumulative sum.
    weights
        .iter()
        .rposition(|&w| w > 0.0)
        .unwrap_or(weights.len() - 1)
}

pub fn griddy_gibbs_tau<R: Rng + ?Sized>(
    state: &ParameterState,
    hp: &Hyperparameters,
    grid: &Grid,
    rng: &mut R,
) -> Result<f64> {
    grid.sample(
        |t| cond_logpost_tau(t, state, hp).unwrap_or(f64::NEG_INFINITY),
        rng,
    )
}

pub fn griddy_gibbs_zeta<R: Rng + ?Sized>(
    state: &ParameterState,
    hp: &Hyperparameters,
    grid: &Grid,
    ell: usize,
    rng: &mut R,
) -> Result<f64> {
    if ell >= state.beta_loc.len() {
        return Err(HbestError::invalid(format!(
            "no local vector for replicate {ell}"
        )));
    }
    grid.sample(
        |z| cond_logpost_zeta(z, ell, state, hp).unwrap_or(f64::NEG_INFINITY),
        rng,
    )
}

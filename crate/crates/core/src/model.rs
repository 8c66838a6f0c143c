//! Probabilistic pieces of the hierarchical model: product Whittle
//! likelihood, Half-t scale priors, the four full-conditional log-posteriors
//! used by the sampler, and the induced prior covariance of the
//! replicate-level coefficients.
//!
//! All log-densities drop their normalising constants (fixed at 0). The
//! sampler only ever uses differences, so this is safe.
//!
//! Notation for one replicate with periodogram `Y_j` and basis rows `ψ_j`:
//!
//! ```text
//! λ_j   = Y_j exp(-ψ_jᵀ(β_glob + β_loc))
//! log L = -𝟙ᵀΨ(β_glob + β_loc) - Σ_j λ_j
//! ```

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{HbestError, Result};
use crate::optim::ConcaveObjective;
use crate::spectral::{
    basis_matrix, periodogram, BasisMatrix, Periodogram, SplineVector, TimeSeries,
};

/// Missing fields take their default values; unknown fields are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Hyperparameters {
    /// Number of cosine basis functions B (the intercept is extra).
    pub basis_count: usize,
    pub nu_tau: f64,
    pub nu_zeta: f64,
    /// Prior variance of the global intercept.
    pub sigma2_alpha: f64,
    /// Prior variance of each local intercept.
    pub delta2: f64,
    pub tau_min: f64,
    pub tau_max: f64,
    pub zeta_min: f64,
    pub zeta_max: f64,
    pub k_tau: usize,
    pub k_zeta: usize,
    /// Scale η applied to the Laplace proposal covariance.
    pub eta: f64,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self {
            basis_count: 15,
            nu_tau: 2.0,
            nu_zeta: 5.0,
            sigma2_alpha: 100.0,
            delta2: 0.1,
            tau_min: 0.001,
            tau_max: 100.0,
            zeta_min: 1.001,
            zeta_max: 15.0,
            k_tau: 500,
            k_zeta: 500,
            eta: 1.0,
        }
    }
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<()> {
        let pos = |x: f64| x.is_finite() && x > 0.0;
        let checks = [
            (self.basis_count >= 1, "basis_count must be >= 1"),
            (
                pos(self.nu_tau) && pos(self.nu_zeta),
                "degrees of freedom must be positive",
            ),
            (
                pos(self.sigma2_alpha) && pos(self.delta2),
                "intercept variances must be positive",
            ),
            (pos(self.eta), "eta must be positive"),
            (
                self.tau_min > 0.0 && self.tau_min < self.tau_max && self.tau_max.is_finite(),
                "need 0 < tau_min < tau_max",
            ),
            (
                self.zeta_min > 1.0 && self.zeta_min < self.zeta_max && self.zeta_max.is_finite(),
                "need 1 < zeta_min < zeta_max",
            ),
            (
                self.k_tau >= 2 && self.k_zeta >= 2,
                "grid sizes must be >= 2",
            ),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(HbestError::invalid(msg));
            }
        }
        Ok(())
    }

    pub fn d_schedule(&self) -> DSchedule {
        DSchedule::new(self.basis_count)
    }
}

/// Shrinkage multipliers d_b = (4πb²)⁻¹, b = 1..B.
#[derive(Clone, Debug, PartialEq)]
pub struct DSchedule {
    pub d: Vec<f64>,
}

impl DSchedule {
    pub fn new(basis_count: usize) -> Self {
        let d = (1..=basis_count)
            .map(|b| 1.0 / (4.0 * PI * (b * b) as f64))
            .collect();
        Self { d }
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    /// βᵀD⁻¹β over the non-intercept slopes.
    pub fn quad_form(&self, slopes: &[f64]) -> f64 {
        slopes.iter().zip(&self.d).map(|(b, d)| b * b / d).sum()
    }
}

/// Full sampler state. An empty `beta_loc` means the model has no local
/// layer (the common baseline); otherwise there is one local vector and one
/// ζ per replicate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterState {
    pub beta_glob: SplineVector,
    pub beta_loc: Vec<SplineVector>,
    pub tau: f64,
    pub zeta: Vec<f64>,
}

impl ParameterState {
    pub fn has_local(&self) -> bool {
        !self.beta_loc.is_empty()
    }

    /// Coefficients of g_ℓ = g_glob + g_loc,ℓ.
    pub fn replicate_coeffs(&self, ell: usize) -> SplineVector {
        match self.beta_loc.get(ell) {
            Some(loc) => SplineVector(&self.beta_glob.0 + &loc.0),
            None => self.beta_glob.clone(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.beta_glob.is_finite()
            && self.beta_loc.iter().all(SplineVector::is_finite)
            && self.tau.is_finite()
            && self.zeta.iter().all(|z| z.is_finite())
    }
}

/// One replicate prepared for the likelihood.
#[derive(Clone, Debug)]
pub struct ReplicateData {
    pub label: String,
    pub periodogram: Periodogram,
    pub basis: BasisMatrix,
    /// Ψᵀ𝟙, reused by every likelihood evaluation.
    pub column_sums: DVector<f64>,
    /// log Y_j; -inf for zero ordinates so they drop out of λ.
    log_ordinates: DVector<f64>,
}

impl ReplicateData {
    pub fn new(
        label: impl Into<String>,
        periodogram: Periodogram,
        basis_count: usize,
    ) -> Result<Self> {
        if periodogram.is_empty() {
            return Err(HbestError::invalid("empty periodogram"));
        }
        if periodogram
            .ordinates
            .iter()
            .any(|y| !(y.is_finite() && *y >= 0.0))
        {
            return Err(HbestError::invalid(
                "periodogram ordinates must be finite and >= 0",
            ));
        }
        let basis = basis_matrix(&periodogram.frequencies, basis_count);
        let column_sums = basis.column_sums();
        let log_ordinates = DVector::from_iterator(
            periodogram.len(),
            periodogram.ordinates.iter().map(|y| y.ln()),
        );
        Ok(Self {
            label: label.into(),
            periodogram,
            basis,
            column_sums,
            log_ordinates,
        })
    }

    pub fn from_series(series: &TimeSeries, basis_count: usize) -> Result<Self> {
        Self::new(series.label.clone(), periodogram(series), basis_count)
    }

    /// λ_j = exp(log Y_j - ψ_jᵀc) for the given linear predictor ψ_jᵀc.
    fn lambdas(&self, linear_predictor: &DVector<f64>) -> DVector<f64> {
        self.log_ordinates
            .zip_map(linear_predictor, |ly, eta| (ly - eta).exp())
    }

    /// Whittle log-likelihood at total coefficients `c`.
    pub fn loglik(&self, coeffs: &SplineVector) -> f64 {
        let eta = &self.basis.rows * &coeffs.0;
        -self.column_sums.dot(&coeffs.0) - self.lambdas(&eta).sum()
    }
}

/// The replicates a model is fitted to. All share the same B.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub replicates: Vec<ReplicateData>,
    pub basis_count: usize,
}

impl Dataset {
    pub fn new(replicates: Vec<ReplicateData>) -> Result<Self> {
        let first = replicates
            .first()
            .ok_or_else(|| HbestError::invalid("dataset needs at least one replicate"))?;
        let basis_count = first.basis.basis_count;
        if replicates
            .iter()
            .any(|r| r.basis.basis_count != basis_count)
        {
            return Err(HbestError::invalid("replicates disagree on basis count"));
        }
        Ok(Self {
            replicates,
            basis_count,
        })
    }

    pub fn from_series(series: &[TimeSeries], basis_count: usize) -> Result<Self> {
        let reps = series
            .iter()
            .map(|s| ReplicateData::from_series(s, basis_count))
            .collect::<Result<Vec<_>>>()?;
        Self::new(reps)
    }

    pub fn len(&self) -> usize {
        self.replicates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.replicates.is_empty()
    }

    /// Restrict to a subset of replicates, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        Self::new(
            indices
                .iter()
                .map(|&i| self.replicates[i].clone())
                .collect(),
        )
    }
}

fn check_dims(state: &ParameterState, data: &Dataset) -> Result<()> {
    let dim = data.basis_count + 1;
    if state.beta_glob.0.len() != dim {
        return Err(HbestError::invalid(format!(
            "global vector has length {}, expected {dim}",
            state.beta_glob.0.len()
        )));
    }
    if state.has_local() {
        if state.beta_loc.len() != data.len() || state.zeta.len() != data.len() {
            return Err(HbestError::invalid(format!(
                "state has {} local vectors / {} scales for {} replicates",
                state.beta_loc.len(),
                state.zeta.len(),
                data.len()
            )));
        }
        if state.beta_loc.iter().any(|b| b.0.len() != dim) {
            return Err(HbestError::invalid("local vector length mismatch"));
        }
    }
    Ok(())
}

/// Log product Whittle likelihood over all replicates.
pub fn whittle_loglik(state: &ParameterState, data: &Dataset) -> Result<f64> {
    check_dims(state, data)?;
    Ok(data
        .replicates
        .iter()
        .enumerate()
        .map(|(ell, rep)| rep.loglik(&state.replicate_coeffs(ell)))
        .sum())
}

/// Unnormalised log density of a Student-t(ν) truncated to (lower, ∞).
pub fn log_prior_half_t(x: f64, nu: f64, lower: f64) -> f64 {
    if x <= lower {
        return f64::NEG_INFINITY;
    }
    -0.5 * (nu + 1.0) * (x * x / nu).ln_1p()
}

/// log π(τ | -). The B(L+1)/2 exponent counts one block for the global
/// vector plus one per local vector present in `state`.
pub fn cond_logpost_tau(tau: f64, state: &ParameterState, hp: &Hyperparameters) -> Result<f64> {
    if tau.is_nan() || tau <= 0.0 {
        return Err(HbestError::invalid(format!(
            "tau must be positive, got {tau}"
        )));
    }
    let d = hp.d_schedule();
    let blocks = 1 + state.beta_loc.len();
    let mut quad = d.quad_form(state.beta_glob.slopes());
    for (loc, z) in state.beta_loc.iter().zip(&state.zeta) {
        quad += d.quad_form(loc.slopes()) / (z * z - 1.0);
    }
    let tau2 = tau * tau;
    Ok(
        -0.5 * (hp.basis_count * blocks) as f64 * tau2.ln() - quad / (2.0 * tau2)
            + log_prior_half_t(tau, hp.nu_tau, 0.0),
    )
}

/// log π(ζ_ℓ | -).
pub fn cond_logpost_zeta(
    zeta: f64,
    ell: usize,
    state: &ParameterState,
    hp: &Hyperparameters,
) -> Result<f64> {
    if zeta.is_nan() || zeta <= 1.0 {
        return Err(HbestError::invalid(format!(
            "zeta must exceed 1, got {zeta}"
        )));
    }
    let loc = state
        .beta_loc
        .get(ell)
        .ok_or_else(|| HbestError::invalid(format!("no local vector for replicate {ell}")))?;
    let excess = zeta * zeta - 1.0;
    let quad = hp.d_schedule().quad_form(loc.slopes());
    Ok(
        -0.5 * hp.basis_count as f64 * excess.ln() - quad / (2.0 * state.tau * state.tau * excess)
            + log_prior_half_t(zeta, hp.nu_zeta, 1.0),
    )
}

/// Diagonal of (Σ_loc)⁻¹ = diag(δ², τ²(ζ²-1)d_1, ...)⁻¹.
pub fn local_prior_precision(tau: f64, zeta: f64, hp: &Hyperparameters) -> DVector<f64> {
    let scale = tau * tau * (zeta * zeta - 1.0);
    prior_precision(hp.delta2, scale, &hp.d_schedule())
}

/// Diagonal of (Σ_glob)⁻¹ = diag(σ²_α, τ²d_1, ...)⁻¹.
pub fn global_prior_precision(tau: f64, hp: &Hyperparameters) -> DVector<f64> {
    prior_precision(hp.sigma2_alpha, tau * tau, &hp.d_schedule())
}

fn prior_precision(intercept_var: f64, slope_scale: f64, d: &DSchedule) -> DVector<f64> {
    let mut p = DVector::zeros(d.len() + 1);
    p[0] = 1.0 / intercept_var;
    for (b, db) in d.d.iter().enumerate() {
        p[b + 1] = 1.0 / (slope_scale * db);
    }
    p
}

/// Conditional posterior of one local vector β_loc,ℓ given everything else.
#[derive(Clone, Debug)]
pub struct LocalConditional<'a> {
    rep: &'a ReplicateData,
    /// Ψ_ℓ β_glob.
    offset: DVector<f64>,
    precision: DVector<f64>,
}

impl<'a> LocalConditional<'a> {
    pub fn new(
        ell: usize,
        state: &ParameterState,
        data: &'a Dataset,
        hp: &Hyperparameters,
    ) -> Result<Self> {
        check_dims(state, data)?;
        if !state.has_local() {
            return Err(HbestError::invalid("state has no local layer"));
        }
        let rep = data
            .replicates
            .get(ell)
            .ok_or_else(|| HbestError::invalid(format!("replicate {ell} out of range")))?;
        Ok(Self {
            rep,
            offset: &rep.basis.rows * &state.beta_glob.0,
            precision: local_prior_precision(state.tau, state.zeta[ell], hp),
        })
    }

    fn lambdas(&self, x: &DVector<f64>) -> DVector<f64> {
        self.rep.lambdas(&(&self.rep.basis.rows * x + &self.offset))
    }
}

impl ConcaveObjective for LocalConditional<'_> {
    fn dim(&self) -> usize {
        self.precision.len()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        -self.rep.column_sums.dot(x) - self.lambdas(x).sum() - 0.5 * weighted_sq(&self.precision, x)
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let lam = self.lambdas(x);
        self.rep.basis.rows.tr_mul(&lam) - &self.rep.column_sums - self.precision.component_mul(x)
    }

    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let lam = self.lambdas(x);
        let mut h = -weighted_gram(&self.rep.basis.rows, &lam);
        for (i, p) in self.precision.iter().enumerate() {
            h[(i, i)] -= p;
        }
        h
    }
}

/// Conditional posterior of β_glob given the local vectors and τ. Includes
/// the Gaussian prior term so that value, gradient and Hessian agree.
#[derive(Clone, Debug)]
pub struct GlobalConditional<'a> {
    data: &'a Dataset,
    /// Ψ_ℓ β_loc,ℓ per replicate; zero when there is no local layer.
    offsets: Vec<DVector<f64>>,
    column_sums: DVector<f64>,
    precision: DVector<f64>,
}

impl<'a> GlobalConditional<'a> {
    pub fn new(state: &ParameterState, data: &'a Dataset, hp: &Hyperparameters) -> Result<Self> {
        check_dims(state, data)?;
        let offsets = data
            .replicates
            .iter()
            .enumerate()
            .map(|(ell, rep)| match state.beta_loc.get(ell) {
                Some(loc) => &rep.basis.rows * &loc.0,
                None => DVector::zeros(rep.basis.nrows()),
            })
            .collect();
        let column_sums = data
            .replicates
            .iter()
            .fold(DVector::zeros(data.basis_count + 1), |acc, r| {
                acc + &r.column_sums
            });
        Ok(Self {
            data,
            offsets,
            column_sums,
            precision: global_prior_precision(state.tau, hp),
        })
    }

    fn lambdas(&self, x: &DVector<f64>) -> Vec<DVector<f64>> {
        self.data
            .replicates
            .iter()
            .zip(&self.offsets)
            .map(|(rep, off)| rep.lambdas(&(&rep.basis.rows * x + off)))
            .collect()
    }
}

impl ConcaveObjective for GlobalConditional<'_> {
    fn dim(&self) -> usize {
        self.precision.len()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        let lam_sum: f64 = self.lambdas(x).iter().map(|l| l.sum()).sum();
        -self.column_sums.dot(x) - lam_sum - 0.5 * weighted_sq(&self.precision, x)
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut g = -&self.column_sums - self.precision.component_mul(x);
        for (rep, lam) in self.data.replicates.iter().zip(self.lambdas(x)) {
            g += rep.basis.rows.tr_mul(&lam);
        }
        g
    }

    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut h = DMatrix::from_diagonal(&(-&self.precision));
        for (rep, lam) in self.data.replicates.iter().zip(self.lambdas(x)) {
            h -= weighted_gram(&rep.basis.rows, &lam);
        }
        h
    }
}

fn weighted_sq(w: &DVector<f64>, x: &DVector<f64>) -> f64 {
    w.iter().zip(x.iter()).map(|(w, x)| w * x * x).sum()
}

/// ΨᵀΛΨ for Λ = diag(weights).
fn weighted_gram(rows: &DMatrix<f64>, weights: &DVector<f64>) -> DMatrix<f64> {
    let mut scaled = rows.clone();
    for (mut row, w) in scaled.row_iter_mut().zip(weights.iter()) {
        row *= *w;
    }
    rows.tr_mul(&scaled)
}

pub fn cond_logpost_local(
    beta_loc: &SplineVector,
    ell: usize,
    state: &ParameterState,
    data: &Dataset,
    hp: &Hyperparameters,
) -> Result<f64> {
    let cond = LocalConditional::new(ell, state, data, hp)?;
    check_len(beta_loc, cond.dim())?;
    Ok(cond.value(&beta_loc.0))
}

pub fn grad_local(
    beta_loc: &SplineVector,
    ell: usize,
    state: &ParameterState,
    data: &Dataset,
    hp: &Hyperparameters,
) -> Result<DVector<f64>> {
    let cond = LocalConditional::new(ell, state, data, hp)?;
    check_len(beta_loc, cond.dim())?;
    Ok(cond.gradient(&beta_loc.0))
}

pub fn hess_local(
    beta_loc: &SplineVector,
    ell: usize,
    state: &ParameterState,
    data: &Dataset,
    hp: &Hyperparameters,
) -> Result<DMatrix<f64>> {
    let cond = LocalConditional::new(ell, state, data, hp)?;
    check_len(beta_loc, cond.dim())?;
    Ok(cond.hessian(&beta_loc.0))
}

pub fn cond_logpost_global(
    beta_glob: &SplineVector,
    state: &ParameterState,
    data: &Dataset,
    hp: &Hyperparameters,
) -> Result<f64> {
    let cond = GlobalConditional::new(state, data, hp)?;
    check_len(beta_glob, cond.dim())?;
    Ok(cond.value(&beta_glob.0))
}

pub fn grad_global(
    beta_glob: &SplineVector,
    state: &ParameterState,
    data: &Dataset,
    hp: &Hyperparameters,
) -> Result<DVector<f64>> {
    let cond = GlobalConditional::new(state, data, hp)?;
    check_len(beta_glob, cond.dim())?;
    Ok(cond.gradient(&beta_glob.0))
}

pub fn hess_global(
    beta_glob: &SplineVector,
    state: &ParameterState,
    data: &Dataset,
    hp: &Hyperparameters,
) -> Result<DMatrix<f64>> {
    let cond = GlobalConditional::new(state, data, hp)?;
    check_len(beta_glob, cond.dim())?;
    Ok(cond.hessian(&beta_glob.0))
}

fn check_len(v: &SplineVector, dim: usize) -> Result<()> {
    if v.0.len() != dim {
        return Err(HbestError::invalid(format!(
            "coefficient vector has length {}, expected {dim}",
            v.0.len()
        )));
    }
    Ok(())
}

/// Prior covariance of the combined slopes β_{ℓb} = β_glob,b + β_loc,ℓb.
///
/// Entry (bL + ℓ, b'L + ℓ') (0-based b, ℓ) is
/// τ²d_b 𝟙{b=b'} + τ²d_b(ζ_ℓ²-1) 𝟙{b=b', ℓ=ℓ'}, i.e. τ²D ⊗ (diag(ζ²-1) + 𝟙𝟙ᵀ).
pub fn induced_coefficient_covariance(tau: f64, zeta: &[f64], d: &DSchedule) -> DMatrix<f64> {
    let l = zeta.len();
    let n = l * d.len();
    let mut w = DMatrix::zeros(n, n);
    for (b, db) in d.d.iter().enumerate() {
        let s = tau * tau * db;
        for i in 0..l {
            for j in 0..l {
                let mut v = s;
                if i == j {
                    v += s * (zeta[i] * zeta[i] - 1.0);
                }
                w[(b * l + i, b * l + j)] = v;
            }
        }
    }
    w
}

/// One joint prior draw of the L×B slope matrix (row ℓ, column b).
pub fn draw_prior_slopes<R: Rng + ?Sized>(
    tau: f64,
    zeta: &[f64],
    d: &DSchedule,
    rng: &mut R,
) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(zeta.len(), d.len());
    for (b, db) in d.d.iter().enumerate() {
        let z: f64 = rng.sample(StandardNormal);
        let glob = tau * db.sqrt() * z;
        for (ell, zl) in zeta.iter().enumerate() {
            let z: f64 = rng.sample(StandardNormal);
            out[(ell, b)] = glob + tau * (db * (zl * zl - 1.0)).sqrt() * z;
        }
    }
    out
}

//! Independence Metropolis-Hastings with a Laplace (Gaussian-at-the-mode)
//! proposal for the spline vectors.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{HbestError, Result};
use crate::model::{Dataset, GlobalConditional, Hyperparameters, LocalConditional, ParameterState};
use crate::optim::{map_optimize, ConcaveObjective};
use crate::spectral::SplineVector;

/// N(mode, η (-H)⁻¹), held through the Cholesky factor of -H.
#[derive(Clone, Debug)]
pub struct LaplaceProposal {
    pub mode: DVector<f64>,
    pub eta: f64,
    precision_chol: Cholesky<f64, Dyn>,
    /// False when the mode search stopped before the gradient tolerance.
    pub map_converged: bool,
}

impl LaplaceProposal {
    pub fn build<O: ConcaveObjective + ?Sized>(
        objective: &O,
        init: &DVector<f64>,
        eta: f64,
    ) -> Result<Self> {
        let map = map_optimize(objective, init)?;
        let neg_h = -objective.hessian(&map.mode);
        let precision_chol = neg_h.cholesky().ok_or_else(|| {
            HbestError::failure("Cholesky of the negated Hessian failed at the mode")
        })?;
        Ok(Self {
            mode: map.mode,
            eta,
            precision_chol,
            map_converged: map.converged,
        })
    }

    /// Proposal covariance η (-H)⁻¹.
    pub fn covariance(&self) -> DMatrix<f64> {
        self.precision_chol.inverse() * self.eta
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let z = DVector::from_iterator(
            self.mode.len(),
            (0..self.mode.len()).map(|_| rng.sample::<f64, _>(StandardNormal)),
        );
        // -H = LLᵀ, so x = L⁻ᵀz has covariance (-H)⁻¹.
        let x = self
            .precision_chol
            .l()
            .transpose()
            .solve_upper_triangular(&z)
            .expect("Cholesky factor is non-singular");
        &self.mode + x * self.eta.sqrt()
    }

    /// Log proposal density up to its normalising constant.
    pub fn log_density(&self, x: &DVector<f64>) -> f64 {
        let d = x - &self.mode;
        let lt_d = self.precision_chol.l().tr_mul(&d);
        -0.5 * lt_d.norm_squared() / self.eta
    }
}

#[derive(Clone, Debug)]
pub struct MhOutcome {
    pub value: DVector<f64>,
    pub accepted: bool,
    /// Conditional log-posterior at `value`.
    pub log_post: f64,
    /// log of the acceptance probability before truncation at 0.
    pub log_ratio: f64,
    pub map_converged: bool,
}

/// One independence-MH step from `current`.
///
/// With `bare_ratio` the acceptance ratio is the bare posterior ratio
/// π(β*)/π(β); otherwise the proposal-density correction q(β)/q(β*) is
/// included, which is what detailed balance requires.
pub fn independence_mh<O: ConcaveObjective + ?Sized, R: Rng + ?Sized>(
    objective: &O,
    current: &DVector<f64>,
    eta: f64,
    bare_ratio: bool,
    rng: &mut R,
) -> Result<MhOutcome> {
    let proposal = LaplaceProposal::build(objective, current, eta)?;
    let candidate = proposal.draw(rng);
    let lp_cand = objective.value(&candidate);
    let lp_curr = objective.value(current);
    let mut log_ratio = lp_cand - lp_curr;
    if !bare_ratio {
        log_ratio += proposal.log_density(current) - proposal.log_density(&candidate);
    }
    if log_ratio.is_nan() {
        log_ratio = f64::NEG_INFINITY;
    }
    let u: f64 = rng.random();
    let accepted = lp_cand.is_finite() && u.ln() < log_ratio.min(0.0);
    Ok(if accepted {
        MhOutcome {
            value: candidate,
            accepted,
            log_post: lp_cand,
            log_ratio,
            map_converged: proposal.map_converged,
        }
    } else {
        MhOutcome {
            value: current.clone(),
            accepted,
            log_post: lp_curr,
            log_ratio,
            map_converged: proposal.map_converged,
        }
    })
}

/// Laplace MH update of β_loc,ℓ.
pub fn laplace_mh_local<R: Rng + ?Sized>(
    state: &ParameterState,
    data: &Dataset,
    hp: &Hyperparameters,
    ell: usize,
    bare_ratio: bool,
    rng: &mut R,
) -> Result<(SplineVector, MhOutcome)> {
    let cond = LocalConditional::new(ell, state, data, hp)?;
    let out = independence_mh(&cond, &state.beta_loc[ell].0, hp.eta, bare_ratio, rng)?;
    Ok((SplineVector(out.value.clone()), out))
}

/// Laplace MH update of β_glob.
pub fn laplace_mh_global<R: Rng + ?Sized>(
    state: &ParameterState,
    data: &Dataset,
    hp: &Hyperparameters,
    bare_ratio: bool,
    rng: &mut R,
) -> Result<(SplineVector, MhOutcome)> {
    let cond = GlobalConditional::new(state, data, hp)?;
    let out = independence_mh(&cond, &state.beta_glob.0, hp.eta, bare_ratio, rng)?;
    Ok((SplineVector(out.value.clone()), out))
}

//! Damped Newton ascent for smooth, strictly concave objectives.

use nalgebra::{DMatrix, DVector};

use crate::error::{HbestError, Result};

/// Sup-norm of the gradient at which the search stops.
pub const GRADIENT_TOLERANCE: f64 = 1e-8;
pub const MAX_ITERATIONS: usize = 100;
const MAX_HALVINGS: usize = 60;

pub trait ConcaveObjective {
    fn dim(&self) -> usize;
    fn value(&self, x: &DVector<f64>) -> f64;
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;
    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64>;
}

#[derive(Clone, Debug)]
pub struct MapResult {
    pub mode: DVector<f64>,
    pub value: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    /// False when the iteration cap was hit or no ascent step could be found
    /// before the gradient tolerance was reached; `mode` is then the best
    /// iterate seen.
    pub converged: bool,
}

/// Maximise `objective` from `init` with Newton steps and step halving.
pub fn map_optimize<O: ConcaveObjective + ?Sized>(
    objective: &O,
    init: &DVector<f64>,
) -> Result<MapResult> {
    let mut x = init.clone();
    let mut fx = objective.value(&x);
    if !fx.is_finite() {
        return Err(HbestError::invalid(
            "objective is not finite at the initial point",
        ));
    }
    let mut grad = objective.gradient(&x);
    for iter in 0..MAX_ITERATIONS {
        let gnorm = grad.amax();
        if gnorm < GRADIENT_TOLERANCE {
            return Ok(MapResult {
                mode: x,
                value: fx,
                gradient_norm: gnorm,
                iterations: iter,
                converged: true,
            });
        }
        let neg_h = -objective.hessian(&x);
        let step = match neg_h.cholesky() {
            Some(ch) => ch.solve(&grad),
            // Not expected for the model conditionals; fall back to gradient ascent.
            None => grad.clone(),
        };

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let cand = &x + &step * t;
            let fc = objective.value(&cand);
            // Near the optimum the objective change falls below rounding
            // level; a full Newton step is still trusted there.
            let flat = t == 1.0 && (fc - fx).abs() <= 1e-13 * fx.abs().max(1.0);
            if fc.is_finite() && (fc >= fx || flat) {
                accepted = Some((cand, fc));
                break;
            }
            t *= 0.5;
        }
        match accepted {
            Some((cand, fc)) => {
                x = cand;
                fx = fc;
                grad = objective.gradient(&x);
            }
            None => {
                return Ok(MapResult {
                    mode: x,
                    value: fx,
                    gradient_norm: gnorm,
                    iterations: iter,
                    converged: false,
                });
            }
        }
    }
    let gnorm = grad.amax();
    Ok(MapResult {
        mode: x,
        value: fx,
        gradient_norm: gnorm,
        iterations: MAX_ITERATIONS,
        converged: gnorm < GRADIENT_TOLERANCE,
    })
}

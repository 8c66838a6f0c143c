use serde::{Deserialize, Serialize};

use crate::model::ParameterState;
use crate::sampler::{Mode, SamplerConfig};
use crate::spectral::SplineVector;

/// Samples from one run of the sampler over a subset of replicates.
///
/// Hierarchical and common fits have a single block covering every
/// replicate; the independent baseline has one single-replicate block each.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainBlock {
    /// Dataset indices of the replicates this block models, in state order.
    pub replicates: Vec<usize>,
    /// Stored post-burn-in states.
    pub samples: Vec<ParameterState>,
    /// Accepted β_glob proposals.
    pub global_accepts: usize,
    /// Accepted β_loc,ℓ proposals, per replicate of the block. Empty without a local layer.
    pub local_accepts: Vec<usize>,
    /// Number of MH proposals made for each spline vector.
    pub proposals: usize,
    /// Mode searches that stopped before reaching the gradient tolerance.
    pub map_nonconverged: usize,
}

impl ChainBlock {
    pub fn global_acceptance(&self) -> f64 {
        rate(self.global_accepts, self.proposals)
    }

    pub fn local_acceptance(&self) -> Vec<f64> {
        self.local_accepts
            .iter()
            .map(|&a| rate(a, self.proposals))
            .collect()
    }
}

fn rate(accepts: usize, proposals: usize) -> f64 {
    if proposals == 0 {
        0.0
    } else {
        accepts as f64 / proposals as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    pub config: SamplerConfig,
    pub labels: Vec<String>,
    pub basis_count: usize,
    pub blocks: Vec<ChainBlock>,
    /// Wall-clock seconds spent sampling (all iterations).
    pub elapsed_secs: f64,
    /// Wall-clock seconds after burn-in, used for ESS per second.
    pub post_burn_secs: f64,
}

impl Chain {
    pub fn mode(&self) -> Mode {
        self.config.mode
    }

    pub fn n_samples(&self) -> usize {
        self.blocks.first().map_or(0, |b| b.samples.len())
    }

    pub fn n_replicates(&self) -> usize {
        self.labels.len()
    }

    fn locate(&self, ell: usize) -> (&ChainBlock, usize) {
        for block in &self.blocks {
            if let Some(pos) = block.replicates.iter().position(|&r| r == ell) {
                return (block, pos);
            }
        }
        panic!("replicate {ell} is not covered by the chain");
    }

    /// Coefficients of g_ℓ at stored sample `i`.
    pub fn replicate_coeffs(&self, i: usize, ell: usize) -> SplineVector {
        let (block, pos) = self.locate(ell);
        block.samples[i].replicate_coeffs(pos)
    }

    /// Coefficients of g_glob at sample `i`; `None` for the independent baseline,
    /// which has no population-level spectrum.
    pub fn global_coeffs(&self, i: usize) -> Option<&SplineVector> {
        match self.mode() {
            Mode::Independent => None,
            _ => Some(&self.blocks[0].samples[i].beta_glob),
        }
    }

    /// Coefficients of g_loc,ℓ at sample `i`. Zero for the common baseline,
    /// `None` for the independent one.
    pub fn local_coeffs(&self, i: usize, ell: usize) -> Option<SplineVector> {
        match self.mode() {
            Mode::Independent => None,
            Mode::Common => Some(SplineVector::zeros(self.basis_count)),
            Mode::Hierarchical => Some(self.blocks[0].samples[i].beta_loc[ell].clone()),
        }
    }

    /// τ draws per block, sample-major.
    pub fn tau_trace(&self, block: usize) -> Vec<f64> {
        self.blocks[block].samples.iter().map(|s| s.tau).collect()
    }
}

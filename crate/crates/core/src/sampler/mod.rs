//! Metropolis-within-Gibbs sampler.
//!
//! One iteration, in order:
//!
//! 1. τ by griddy Gibbs (refreshes the global prior covariance),
//! 2. each ζ_ℓ by griddy Gibbs (refreshes the local prior covariances),
//! 3. each β_loc,ℓ by Laplace independence MH,
//! 4. β_glob by Laplace independence MH,
//! 5. store the state once past burn-in.
//!
//! Iteration 0 is the initial state, so a run of `iterations` performs
//! `iterations - 1` sweeps and stores `iterations - burn_in` states.

mod chain;
mod grid;
mod laplace;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use chain::{Chain, ChainBlock};
pub use grid::{griddy_gibbs_tau, griddy_gibbs_zeta, sample_discrete, softmax, Grid};
pub use laplace::{
    independence_mh, laplace_mh_global, laplace_mh_local, LaplaceProposal, MhOutcome,
};

use crate::error::{HbestError, Result};
use crate::model::{Dataset, GlobalConditional, Hyperparameters, ParameterState};
use crate::optim::map_optimize;
use crate::rng::{stream, Slots};
use crate::spectral::SplineVector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Global plus local spline vectors, shared τ and per-replicate ζ.
    Hierarchical,
    /// One spectrum shared by all replicates (no local layer).
    Common,
    /// Each replicate fitted alone with its own τ and spline vector.
    Independent,
}

impl std::str::FromStr for Mode {
    type Err = HbestError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hierarchical" => Ok(Mode::Hierarchical),
            "common" => Ok(Mode::Common),
            "independent" => Ok(Mode::Independent),
            other => Err(HbestError::invalid(format!("unknown mode '{other}'"))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Hierarchical => "hierarchical",
            Mode::Common => "common",
            Mode::Independent => "independent",
        })
    }
}

/// How the spline vectors are initialised.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    /// All spline vectors zero.
    Zero,
    /// β_glob at the mode of its conditional given the starting τ, locals
    /// zero. Starting every slope at zero makes the first τ draw land on the
    /// lower grid bound, where the prior then holds the slopes near zero.
    #[default]
    GlobalMode,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub hp: Hyperparameters,
    pub mode: Mode,
    /// Use the bare posterior ratio in the MH steps instead of the
    /// proposal-corrected independence-MH ratio.
    pub bare_posterior_ratio: bool,
    /// Starting τ. ζ starts at the grid point nearest the middle of
    /// [ζ_min, ζ_max].
    pub init_tau: f64,
    pub init: Init,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            iterations: 5000,
            burn_in: 500,
            seed: 0,
            hp: Hyperparameters::default(),
            mode: Mode::Hierarchical,
            bare_posterior_ratio: false,
            init_tau: 1.0,
            init: Init::GlobalMode,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations < 2 {
            return Err(HbestError::invalid("iterations must be >= 2"));
        }
        if self.burn_in >= self.iterations {
            return Err(HbestError::invalid(
                "burn_in must be smaller than iterations",
            ));
        }
        if !(self.init_tau > 0.0 && self.init_tau.is_finite()) {
            return Err(HbestError::invalid("init_tau must be positive"));
        }
        self.hp.validate()
    }
}

/// Starting state for `l` replicates, with or without the local layer.
pub fn initial_state(
    l: usize,
    with_local: bool,
    config: &SamplerConfig,
    zeta_grid: &Grid,
) -> ParameterState {
    let b = config.hp.basis_count;
    let zeta0 = zeta_grid.nearest(0.5 * (config.hp.zeta_min + config.hp.zeta_max));
    ParameterState {
        beta_glob: SplineVector::zeros(b),
        beta_loc: if with_local {
            vec![SplineVector::zeros(b); l]
        } else {
            Vec::new()
        },
        tau: config.init_tau,
        zeta: if with_local {
            vec![zeta0; l]
        } else {
            Vec::new()
        },
    }
}

struct Grids {
    tau: Grid,
    zeta: Grid,
}

/// Run the sampler in the configured mode.
pub fn run_chain(data: &Dataset, config: &SamplerConfig) -> Result<Chain> {
    config.validate()?;
    if data.basis_count != config.hp.basis_count {
        return Err(HbestError::invalid(format!(
            "dataset uses B = {}, config uses B = {}",
            data.basis_count, config.hp.basis_count
        )));
    }
    let grids = Grids {
        tau: Grid::tau(&config.hp)?,
        zeta: Grid::zeta(&config.hp)?,
    };
    let start = Instant::now();
    let results: Vec<Result<(ChainBlock, f64)>> = match config.mode {
        Mode::Hierarchical => vec![run_block(
            data,
            config,
            &grids,
            0,
            true,
            (0..data.len()).collect(),
        )],
        Mode::Common => vec![run_block(
            data,
            config,
            &grids,
            0,
            false,
            (0..data.len()).collect(),
        )],
        Mode::Independent => (0..data.len())
            .into_par_iter()
            .map(|ell| {
                let sub = data.subset(&[ell])?;
                run_block(&sub, config, &grids, ell as u64, false, vec![ell])
            })
            .collect(),
    };
    let mut blocks = Vec::with_capacity(results.len());
    let mut post_burn_secs: f64 = 0.0;
    for r in results {
        let (block, secs) = r?;
        post_burn_secs = post_burn_secs.max(secs);
        blocks.push(block);
    }
    Ok(Chain {
        config: config.clone(),
        labels: data.replicates.iter().map(|r| r.label.clone()).collect(),
        basis_count: data.basis_count,
        blocks,
        elapsed_secs: start.elapsed().as_secs_f64(),
        post_burn_secs,
    })
}

fn run_block(
    data: &Dataset,
    config: &SamplerConfig,
    grids: &Grids,
    block_id: u64,
    with_local: bool,
    replicates: Vec<usize>,
) -> Result<(ChainBlock, f64)> {
    let hp = &config.hp;
    let l = data.len();
    let slots = Slots::new(l);
    let bare_ratio = config.bare_posterior_ratio;
    let mut state = initial_state(l, with_local, config, &grids.zeta);
    if config.init == Init::GlobalMode {
        let cond = GlobalConditional::new(&state, data, hp)?;
        state.beta_glob = SplineVector(map_optimize(&cond, &state.beta_glob.0)?.mode);
    }

    let mut block = ChainBlock {
        replicates,
        samples: Vec::with_capacity(config.iterations - config.burn_in),
        global_accepts: 0,
        local_accepts: if with_local { vec![0; l] } else { Vec::new() },
        proposals: 0,
        map_nonconverged: 0,
    };
    if config.burn_in == 0 {
        block.samples.push(state.clone());
    }
    let mut post_burn_start = (config.burn_in == 0).then(Instant::now);

    for iter in 1..config.iterations {
        let rng_for = |slot: u64| stream(config.seed, block_id, iter as u64, slot);
        let fail = |e: HbestError, s: &ParameterState| e.at_iteration(iter, s);

        state.tau = griddy_gibbs_tau(&state, hp, &grids.tau, &mut rng_for(slots.tau()))
            .map_err(|e| fail(e, &state))?;

        if with_local {
            for ell in 0..l {
                state.zeta[ell] =
                    griddy_gibbs_zeta(&state, hp, &grids.zeta, ell, &mut rng_for(slots.zeta(ell)))
                        .map_err(|e| fail(e, &state))?;
            }
            // Conditionally independent given β_glob, τ and ζ; each update
            // draws from its own stream so the order of execution is irrelevant.
            let updates: Vec<Result<(SplineVector, MhOutcome)>> = (0..l)
                .into_par_iter()
                .map(|ell| {
                    laplace_mh_local(
                        &state,
                        data,
                        hp,
                        ell,
                        bare_ratio,
                        &mut rng_for(slots.local(ell)),
                    )
                })
                .collect();
            for (ell, u) in updates.into_iter().enumerate() {
                let (beta, out) = u.map_err(|e| fail(e, &state))?;
                state.beta_loc[ell] = beta;
                block.local_accepts[ell] += out.accepted as usize;
                block.map_nonconverged += !out.map_converged as usize;
            }
        }

        let (beta, out) =
            laplace_mh_global(&state, data, hp, bare_ratio, &mut rng_for(slots.global()))
                .map_err(|e| fail(e, &state))?;
        state.beta_glob = beta;
        block.global_accepts += out.accepted as usize;
        block.map_nonconverged += !out.map_converged as usize;
        block.proposals += 1;

        if !state.is_finite() {
            return Err(fail(
                HbestError::failure("non-finite parameter state"),
                &state,
            ));
        }
        if iter == config.burn_in {
            post_burn_start = Some(Instant::now());
        }
        if iter >= config.burn_in {
            block.samples.push(state.clone());
        }
    }
    let post = post_burn_start.map_or(0.0, |t| t.elapsed().as_secs_f64());
    Ok((block, post))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ReplicateData;
    use crate::spectral::TimeSeries;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn noise_dataset(lengths: &[usize], b: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let reps = lengths
            .iter()
            .enumerate()
            .map(|(i, &n)| {
                let x = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
                ReplicateData::from_series(&TimeSeries::new(format!("s{i}"), x).unwrap(), b)
                    .unwrap()
            })
            .collect();
        Dataset::new(reps).unwrap()
    }

    fn config(mode: Mode, iterations: usize, burn_in: usize) -> SamplerConfig {
        SamplerConfig {
            iterations,
            burn_in,
            seed: 99,
            hp: Hyperparameters {
                basis_count: 6,
                ..Default::default()
            },
            mode,
            ..Default::default()
        }
    }

    #[test]
    fn minimal_run_stores_one_state() {
        let data = noise_dataset(&[64, 80], 6, 1);
        for mode in [Mode::Hierarchical, Mode::Common, Mode::Independent] {
            let chain = run_chain(&data, &config(mode, 2, 1)).unwrap();
            assert_eq!(chain.n_samples(), 1, "{mode}");
            assert!(chain.blocks.iter().all(|b| b.samples.len() == 1));
        }
    }

    #[test]
    fn config_validation() {
        let data = noise_dataset(&[64], 6, 1);
        assert!(run_chain(&data, &config(Mode::Common, 1, 0)).is_err());
        assert!(run_chain(&data, &config(Mode::Common, 10, 10)).is_err());
        let mut c = config(Mode::Common, 10, 0);
        c.hp.basis_count = 5;
        assert!(run_chain(&data, &c).is_err());
    }

    #[test]
    fn same_seed_gives_identical_samples() {
        let data = noise_dataset(&[64, 100, 90], 6, 2);
        let c = config(Mode::Hierarchical, 30, 10);
        let a = run_chain(&data, &c).unwrap();
        let b = run_chain(&data, &c).unwrap();
        assert_eq!(a.blocks, b.blocks);
        let mut c2 = c.clone();
        c2.seed += 1;
        assert_ne!(run_chain(&data, &c2).unwrap().blocks, a.blocks);
    }

    #[test]
    fn thread_count_does_not_change_samples() {
        let data = noise_dataset(&[64, 100, 90, 70], 6, 3);
        for mode in [Mode::Hierarchical, Mode::Independent] {
            let c = config(mode, 20, 5);
            let one = rayon::ThreadPoolBuilder::new()
                .num_threads(1)
                .build()
                .unwrap();
            let four = rayon::ThreadPoolBuilder::new()
                .num_threads(4)
                .build()
                .unwrap();
            let a = one.install(|| run_chain(&data, &c)).unwrap();
            let b = four.install(|| run_chain(&data, &c)).unwrap();
            assert_eq!(a.blocks, b.blocks);
        }
    }

    #[test]
    fn mode_shapes() {
        let data = noise_dataset(&[64, 100], 6, 4);
        let common = run_chain(&data, &config(Mode::Common, 10, 2)).unwrap();
        assert_eq!(common.blocks.len(), 1);
        assert!(common.blocks[0]
            .samples
            .iter()
            .all(|s| s.beta_loc.is_empty() && s.zeta.is_empty()));
        assert_eq!(common.replicate_coeffs(3, 0), common.replicate_coeffs(3, 1));

        let ind = run_chain(&data, &config(Mode::Independent, 10, 2)).unwrap();
        assert_eq!(ind.blocks.len(), 2);
        assert_eq!(ind.blocks[1].replicates, vec![1]);
        assert!(ind.global_coeffs(0).is_none());

        let hier = run_chain(&data, &config(Mode::Hierarchical, 10, 2)).unwrap();
        let s = &hier.blocks[0].samples[4];
        assert_eq!(s.beta_loc.len(), 2);
        let hp = &hier.config.hp;
        assert!(s.tau >= hp.tau_min && s.tau <= hp.tau_max);
        assert!(s.zeta.iter().all(|&z| z >= hp.zeta_min && z <= hp.zeta_max));
        for r in hier.blocks[0]
            .local_acceptance()
            .into_iter()
            .chain([hier.blocks[0].global_acceptance()])
        {
            assert!((0.0..=1.0).contains(&r));
        }
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("common".parse::<Mode>().unwrap(), Mode::Common);
        assert!("shared".parse::<Mode>().is_err());
        assert_eq!(Mode::Independent.to_string(), "independent");
    }
}

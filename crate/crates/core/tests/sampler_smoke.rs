use hbest_core::{
    gen_ma4, posterior_summary, run_chain, Dataset, EvalGrid, Init, Ma4Setting, Mode,
    SamplerConfig, Variation,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn data(replicates: usize) -> Dataset {
    let s = Ma4Setting {
        variation: Variation::Moderate,
        replicates,
        length: 160,
        standardize: true,
    };
    let ds = gen_ma4(&s, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    Dataset::from_series(&ds.series, 15).unwrap()
}

fn config(mode: Mode) -> SamplerConfig {
    SamplerConfig {
        iterations: 120,
        burn_in: 20,
        seed: 42,
        mode,
        ..Default::default()
    }
}

#[test]
fn every_mode_produces_finite_chains_of_the_right_shape() {
    let d = data(3);
    for mode in [Mode::Hierarchical, Mode::Common, Mode::Independent] {
        let chain = run_chain(&d, &config(mode)).unwrap();
        assert_eq!(chain.mode(), mode);
        assert_eq!(chain.n_samples(), 100);
        assert_eq!(chain.n_replicates(), 3);
        assert_eq!(
            chain.blocks.len(),
            if mode == Mode::Independent { 3 } else { 1 }
        );
        for block in &chain.blocks {
            for s in &block.samples {
                assert!(s.beta_glob.is_finite() && s.tau.is_finite() && s.tau > 0.0);
                assert_eq!(
                    s.beta_loc.len(),
                    if mode == Mode::Hierarchical { 3 } else { 0 }
                );
                assert!(s.zeta.iter().all(|z| (1.001..=15.0).contains(z)));
            }
            assert!((0.0..=1.0).contains(&block.global_acceptance()));
        }
        let summary = posterior_summary(&chain, &EvalGrid::new(50, (0.05, 0.95)).unwrap()).unwrap();
        assert_eq!(summary.replicates.len(), 3);
        for band in &summary.replicates {
            assert!(band.lower.iter().zip(&band.upper).all(|(l, u)| l <= u));
        }
    }
}

#[test]
fn chains_are_identical_across_thread_pools() {
    let d = data(4);
    for mode in [Mode::Hierarchical, Mode::Independent] {
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_chain(&d, &config(mode)).unwrap())
        };
        let (a, b) = (run(1), run(4));
        for (x, y) in a.blocks.iter().zip(&b.blocks) {
            assert_eq!(x.samples, y.samples);
            assert_eq!(x.global_accepts, y.global_accepts);
        }
    }
}

#[test]
fn seed_changes_the_chain() {
    let d = data(2);
    let a = run_chain(&d, &config(Mode::Hierarchical)).unwrap();
    let b = run_chain(
        &d,
        &SamplerConfig {
            seed: 43,
            ..config(Mode::Hierarchical)
        },
    )
    .unwrap();
    assert_ne!(a.blocks[0].samples, b.blocks[0].samples);
}

#[test]
fn alternative_ratio_and_zero_start_still_run() {
    let d = data(2);
    let c = SamplerConfig {
        bare_posterior_ratio: true,
        init: Init::Zero,
        ..config(Mode::Hierarchical)
    };
    let chain = run_chain(&d, &c).unwrap();
    assert_eq!(chain.n_samples(), 100);
}

#[test]
fn invalid_configs_are_rejected() {
    let d = data(2);
    assert!(run_chain(
        &d,
        &SamplerConfig {
            burn_in: 120,
            ..config(Mode::Common)
        }
    )
    .is_err());
    let mut c = config(Mode::Common);
    c.hp.basis_count = 10;
    assert!(run_chain(&d, &c).is_err());
}

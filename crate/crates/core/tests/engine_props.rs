use batchsel::campaign::prepare_fold;
use batchsel::data::synthetic_dataset;
use batchsel::engine::{run, EngineConfig, Evolution, RunRecord};
use batchsel::genetics::VariationConfig;
use batchsel::par::Parallelism;
use proptest::prelude::*;

fn config(selector: &str, pop: usize, gens: usize, seed: u64) -> EngineConfig {
    EngineConfig {
        population_size: pop,
        generations: gens,
        selector: selector.parse().unwrap(),
        seed,
        ..EngineConfig::default()
    }
}

#[test]
fn elitism_and_population_size_hold_every_generation() {
    let data = synthetic_dataset("trig", 60, 8).unwrap();
    let (train, test) = prepare_fold(&data, 3, 8, 1).unwrap();
    let selectors = ["Tourn/2", "Lex", "Ae-Lex", "BTS/4/4", "BTSS/8/2"];
    let mut transitions = 0;
    for seed in 0..250u64 {
        let cfg = config(selectors[seed as usize % selectors.len()], 12, 8, seed);
        let mut evolution = Evolution::new(&cfg, &train, &test).unwrap();
        let mut previous = evolution.stats().unwrap().best_train_mae;
        for _ in 0..cfg.generations {
            evolution.step().unwrap();
            assert_eq!(evolution.population().len(), cfg.population_size);
            assert_eq!(evolution.errors().n_individuals(), cfg.population_size);
            assert!(evolution.population().iter().all(|t| t.depth() <= cfg.variation.max_depth));
            let best = evolution.stats().unwrap().best_train_mae;
            assert!(best <= previous, "seed {seed}: {best} > {previous}");
            previous = best;
            transitions += 1;
        }
    }
    assert!(transitions >= 2_000);
}

#[test]
fn parallel_and_sequential_evaluation_agree() {
    let data = synthetic_dataset("poly3", 120, 2).unwrap();
    let (train, test) = prepare_fold(&data, 4, 2, 0).unwrap();
    let mut seq = config("BTS/8/4", 80, 15, 9);
    seq.evaluation = Parallelism::Sequential;
    let mut par = seq.clone();
    par.evaluation = Parallelism::Parallel;
    let a = run(&seq, &train, &test).unwrap();
    let b = run(&par, &train, &test).unwrap();
    assert!(a.same_trajectory(&b));
}

#[test]
fn record_round_trips_through_files() {
    let data = synthetic_dataset("explog", 80, 3).unwrap();
    let (train, test) = prepare_fold(&data, 2, 3, 0).unwrap();
    let record = run(&config("Ae-Lex", 30, 6, 1), &train, &test).unwrap();
    let dir = tempfile::tempdir().unwrap();
    record.write_to(dir.path()).unwrap();
    let back = RunRecord::read_from(dir.path()).unwrap();
    assert_eq!(back, record);
    let csv = std::fs::read_to_string(dir.path().join("record.csv")).unwrap();
    assert_eq!(csv, record.to_csv());
    assert_eq!(csv.lines().count(), 8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn runs_are_deterministic_per_seed(seed in any::<u64>(), elites in 0usize..3) {
        let data = synthetic_dataset("poly2", 50, seed).unwrap();
        let (train, test) = prepare_fold(&data, 2, seed, 0).unwrap();
        let mut cfg = config("Lex", 16, 5, seed);
        cfg.variation = VariationConfig { elite_count: elites, ..VariationConfig::default() };
        let a = run(&cfg, &train, &test).unwrap();
        let b = run(&cfg, &train, &test).unwrap();
        prop_assert!(a.same_trajectory(&b));
        prop_assert_eq!(a.per_generation.len(), 6);
        prop_assert!(a.per_generation.iter().all(|g| g.diversity > 0.0 && g.diversity <= 1.0));
    }
}

//! The kit's numeric promises, checked end to end. Each test covers one
//! promise and prints a single verdict line (visible under
//! `cargo test --test acceptance -- --nocapture`); a failed assert means
//! the promise is broken, not that the tolerance needs loosening.

use rand::distributions::Uniform;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;
use vma_core::adversary::{adversary_threshold, adversary_two, two_machine_bound};
use vma_core::bounds::{bounds_table, BoundEntry, BoundInputs};
use vma_core::exact;
use vma_core::experiment::{evaluate, AlgorithmKind};
use vma_core::instance::{
    gen_partition_reduction, gen_three_partition_reduction, gen_uniform, ReductionVariant,
};
use vma_core::offline;
use vma_core::online::{self, balance_threshold, PowerGreedy, ThresholdAssign, TwoBinBalancer};
use vma_core::power::{balanced_lower_bound, merge_delta};
use vma_core::{Instance, PowerParams, Resources};

const REL: f64 = 1e-12;

fn close(value: f64, target: f64) -> bool {
    (value - target).abs() <= REL * target.abs()
}

fn entry(table: &[BoundEntry], name: &str) -> f64 {
    table
        .iter()
        .find(|e| e.name == name)
        .unwrap_or_else(|| panic!("missing table entry {name}"))
        .value
}

fn pass(number: u32, title: &str, started: Instant) {
    println!(
        "acceptance {number} ({title}): PASS ({:.2} ms)",
        started.elapsed().as_secs_f64() * 1e3
    );
}

/// The 500-instance grid shared by the sandwich and conformance checks:
/// sizes cycle 1..=8, parameters cycle over three exponents, two fixed
/// costs and three capacity settings, everything seeded.
fn grid() -> Vec<Instance> {
    let alphas = [1.5, 2.0, 3.0];
    let bs = [1.0, 2.0];
    let caps = [Some(1.0), Some(2.0), None];
    (0..500)
        .map(|i| {
            let params = PowerParams::new(alphas[i % 3], bs[(i / 3) % 2]).unwrap();
            let capacity = caps[(i / 6) % 3];
            let resources = Resources {
                capacity,
                machines: None,
            };
            let hi = match capacity {
                Some(c) => 0.95 * c,
                None => 2.5,
            };
            gen_uniform(1 + (i % 8), 0.05, hi, 4242 + i as u64, params, resources).unwrap()
        })
        .collect()
}

#[test]
fn criterion_1_closed_form_bound_table() {
    let params = PowerParams::new(3.0, 2.0).unwrap();
    let inputs = BoundInputs::default();
    // Warm up so the timed section measures arithmetic, not page faults.
    let _ = bounds_table(&params, None, &inputs);

    let started = Instant::now();
    let unbounded = bounds_table(&params, None, &inputs);
    let tight = bounds_table(&params, Some(1.0), &inputs);
    let elapsed = started.elapsed();

    assert!(close(entry(&unbounded, "online_lower_general"), 11.0 / 7.0));
    assert!(close(entry(&tight, "online_lower_capacity"), 20.0 / 17.0));
    assert!(close(entry(&unbounded, "alg2_upper"), 9.0 / 4.0));
    assert!(close(entry(&unbounded, "alg1_upper_optload_coeff"), 17.0 / 12.0));
    assert!(close(entry(&tight, "alg1_upper_capacity_coeff"), 17.0 / 2.0));
    assert!(
        elapsed.as_secs_f64() < 1e-3,
        "table construction took {elapsed:?}, budget 1 ms"
    );
    pass(1, "closed-form bound table", started);
}

#[test]
fn criterion_2_two_machine_duel() {
    let params = PowerParams::new(3.0, 2.0).unwrap();
    let started = Instant::now();
    let report = adversary_two(params, &TwoBinBalancer).unwrap();
    let elapsed = started.elapsed();

    assert!(close(report.alg_power, 6052.0), "alg power {}", report.alg_power);
    assert!(close(report.opt_power, 3460.0), "opt power {}", report.opt_power);
    assert_eq!(report.opt_method, "oracle");
    assert!(
        (report.ratio - 6052.0 / 3460.0).abs() <= 1e-6,
        "ratio {}",
        report.ratio
    );
    assert!(report.ratio >= 27.0 / 16.0);
    assert!(close(report.bound_value, two_machine_bound(3.0)));
    assert!(report.bound_met);
    assert!(
        elapsed.as_secs_f64() < 10e-3,
        "duel took {elapsed:?}, budget 10 ms"
    );
    pass(2, "two-machine adversary vs the balancer", started);
}

#[test]
fn criterion_3_threshold_duel() {
    let params = PowerParams::new(3.0, 2.0).unwrap();
    let target = 11.0 / 7.0;
    let started = Instant::now();
    let router = adversary_threshold(params, None, 0.01, &ThresholdAssign).unwrap();
    let greedy = adversary_threshold(params, None, 0.01, &PowerGreedy).unwrap();
    let elapsed = started.elapsed();

    assert!(
        router.ratio >= target * 1.02,
        "router ratio {} lacks a 2% margin over {target}",
        router.ratio
    );
    assert!((router.ratio - 1.93).abs() < 0.01, "ratio {}", router.ratio);
    assert!(close(router.bound_value, target));
    assert!(router.bound_met);
    assert!(
        greedy.ratio >= target - 0.02,
        "greedy ratio {} fell below {target} minus slack",
        greedy.ratio
    );
    assert!(
        elapsed.as_secs_f64() < 100e-3,
        "duels took {elapsed:?}, budget 100 ms"
    );
    pass(3, "small-load adversary vs router and greedy", started);
}

#[test]
fn criterion_4_oracle_sandwich() {
    let started = Instant::now();
    let mut violations = 0usize;
    for inst in grid() {
        let opt = exact::solve(&inst).expect("grid instances are solvable").power;
        let n = inst.n();
        let total = inst.total_load();
        let lower = (1..=n)
            .map(|k| balanced_lower_bound(k, total, inst.params()))
            .fold(f64::INFINITY, f64::min);
        if lower > opt * (1.0 + REL) {
            violations += 1;
        }

        let xstar = inst.params().optimal_load();
        let packed = match inst.resources().capacity {
            Some(c) if xstar >= c => offline::solve_capacity(&inst).unwrap(),
            _ => offline::solve_optimal_load(&inst).unwrap(),
        };
        let balanced = offline::balanced_k(&inst).unwrap();
        let polished = offline::local_improve(&inst, &balanced);
        let routed = online::run_stream(
            inst.loads(),
            *inst.params(),
            *inst.resources(),
            &ThresholdAssign,
        )
        .unwrap()
        .partition;
        for candidate in [&packed, &balanced, &polished, &routed] {
            if candidate.power(&inst) < opt * (1.0 - REL) {
                violations += 1;
            }
        }
    }
    let elapsed = started.elapsed();
    assert_eq!(violations, 0, "sandwich violated {violations} times");
    assert!(
        elapsed.as_secs_f64() < 60.0,
        "sandwich took {elapsed:?}, budget 60 s"
    );
    pass(4, "lower bound / oracle / heuristic sandwich on 500 instances", started);
}

#[test]
fn criterion_5_online_bound_conformance() {
    let started = Instant::now();
    let mut violations = 0usize;
    let mut balancer_runs = 0usize;
    let mut exact_matches = 0usize;
    for inst in grid() {
        let opt = exact::solve(&inst);
        let row = evaluate(AlgorithmKind::Alg1, &inst, &opt);
        assert_eq!(row.error, None, "router failed on {}", inst.id());
        if row.bound_ok != Some(true) {
            violations += 1;
        }

        if inst.resources().capacity.is_some() {
            continue;
        }
        // The balancer's guarantee is relative to the best two-machine
        // assignment, so rerun the instance under that budget.
        let two = Instance::new(
            *inst.params(),
            Resources::with_machines(2),
            inst.loads().to_vec(),
        )
        .unwrap();
        let opt2 = exact::solve(&two);
        let row2 = evaluate(AlgorithmKind::Alg2, &two, &opt2);
        assert_eq!(row2.error, None, "balancer failed on {}", two.id());
        if row2.bound_ok != Some(true) {
            violations += 1;
        }
        balancer_runs += 1;
        if two.total_load() <= balance_threshold(inst.params()) {
            exact_matches += 1;
            if row2.ratio != Some(1.0) {
                violations += 1;
            }
        }
    }
    assert!(balancer_runs > 100, "only {balancer_runs} balancer runs");
    assert!(exact_matches > 0, "no below-threshold balancer case exercised");
    assert_eq!(violations, 0, "online bounds violated {violations} times");
    pass(5, "router and balancer ratios within their bounds", started);
}

#[test]
fn criterion_6_capacity_packing_bound() {
    let params = PowerParams::new(3.0, 2.0).unwrap();
    assert!(params.optimal_load() >= 1.0);
    let started = Instant::now();
    let mut violations = 0usize;
    let mut worst = 0.0f64;
    for i in 0..200u64 {
        let inst = gen_uniform(
            1 + (i as usize % 12),
            0.05,
            0.95,
            7000 + i,
            params,
            Resources::with_capacity(1.0),
        )
        .unwrap();
        let opt = exact::solve(&inst);
        let row = evaluate(AlgorithmKind::Capacity, &inst, &opt);
        assert_eq!(row.error, None, "packing failed on {}", inst.id());
        assert!(row.bound_name.is_some(), "no bound attached on {}", inst.id());
        if row.bound_ok != Some(true) {
            violations += 1;
        }
        worst = worst.max(row.ratio.unwrap());
    }
    assert_eq!(violations, 0, "packing bound violated {violations} times");
    assert!(worst >= 1.0);
    pass(6, "capacity packing within its additive-slack bound", started);
}

#[test]
fn criterion_7_structural_property_suites() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(77);

    // Merging two machines whose combined load stays at or below the
    // power-optimal load always strictly helps.
    for _ in 0..1000 {
        let params =
            PowerParams::new(rng.gen_range(1.2..4.0), rng.gen_range(0.5..4.0)).unwrap();
        let sum = rng.gen_range(0.02..=1.0) * params.optimal_load();
        let a = rng.gen_range(0.01..0.99) * sum;
        assert!(merge_delta(a, sum - a, &params) < 0.0);
    }

    // Evening out a fixed total over two active machines always strictly
    // helps.
    for _ in 0..1000 {
        let params =
            PowerParams::new(rng.gen_range(1.2..4.0), rng.gen_range(0.5..4.0)).unwrap();
        let total = rng.gen_range(0.1..5.0);
        let delta2 = rng.gen_range(0.001..0.498);
        let delta1 = rng.gen_range(delta2 + 0.001..=0.5);
        let split =
            |d: f64| params.machine_power(d * total) + params.machine_power((1.0 - d) * total);
        assert!(split(delta1) < split(delta2));
    }

    // After every balancer run past double its threshold, some single VM
    // spans the final gap between the two machines.
    for trial in 0..1000u64 {
        let params =
            PowerParams::new(rng.gen_range(1.2..4.0), rng.gen_range(0.5..4.0)).unwrap();
        let inst = gen_uniform(
            1 + (trial as usize % 8),
            0.05,
            2.5,
            2_000_000 + trial,
            params,
            Resources::unbounded(),
        )
        .unwrap();
        let run = online::run_stream(
            inst.loads(),
            params,
            Resources::unbounded(),
            &TwoBinBalancer,
        )
        .unwrap();
        assert!(online::load_gap_is_covered(&run, &params), "trial {trial}");
    }

    // First fit decreasing stays within its classic bin guarantee.
    for trial in 0..1000 {
        let dist = Uniform::new_inclusive(0.05, 1.0);
        let items: Vec<f64> = (0..1 + trial % 10).map(|_| rng.sample(dist)).collect();
        let ffd = offline::ffd_pack(&items, 1.0).unwrap().len();
        let best = exact::min_bins(&items, 1.0).unwrap();
        assert!(9 * ffd <= 11 * best + 9, "trial {trial}: {ffd} vs {best}");
    }

    pass(7, "merge, rebalance, gap and packing properties, 1000 trials each", started);
}

#[test]
fn criterion_8_reduction_generators() {
    let started = Instant::now();

    // A multiset that splits into two equal halves: optimum is exactly two
    // machines filled to capacity.
    for sizes in [vec![1.0, 1.0, 1.0, 1.0], vec![3.0, 1.0, 1.0, 1.0]] {
        let inst = gen_partition_reduction(&sizes, 3.0).unwrap();
        let c = inst.resources().capacity.unwrap();
        let expected = 2.0 * inst.params().b + 2.0 * c.powf(3.0);
        let opt = exact::solve(&inst).unwrap().power;
        assert!(close(opt, expected), "split optimum {opt} vs {expected}");
    }

    // No even split exists: at least three machines, none fuller than 2C/3
    // on average.
    let inst = gen_partition_reduction(&[1.0, 1.0, 1.0], 3.0).unwrap();
    let c = inst.resources().capacity.unwrap();
    let floor = 3.0 * inst.params().b + 3.0 * (2.0 * c / 3.0).powf(3.0);
    let opt = exact::solve(&inst).unwrap().power;
    assert!(opt >= floor * (1.0 - REL), "uneven optimum {opt} vs floor {floor}");

    // A yes-instance of the triple-grouping question: optimal power equals
    // k machines at exactly the target load, under every resource variant.
    for variant in [
        ReductionVariant::Unbounded,
        ReductionVariant::CapacityBounded,
        ReductionVariant::MachineBounded,
    ] {
        let built =
            gen_three_partition_reduction(&[3, 3, 2, 3, 3, 2], 8, 2.0, variant).unwrap();
        assert_eq!(built.k, 2);
        let expected = built.k as f64 * built.instance.params().machine_power(8.0);
        let opt = exact::solve(&built.instance).unwrap().power;
        assert!(close(opt, expected), "{variant:?}: {opt} vs {expected}");
    }

    // A no-instance: every grouping misses the target somewhere, so the
    // optimum sits strictly above k machines at the target load.
    let built = gen_three_partition_reduction(
        &[6, 5, 4, 4, 4, 4, 4, 4, 4],
        13,
        2.0,
        ReductionVariant::Unbounded,
    )
    .unwrap();
    assert!(built.warnings.is_empty());
    let floor = built.k as f64 * built.instance.params().machine_power(13.0);
    let opt = exact::solve(&built.instance).unwrap().power;
    assert!(opt > floor * (1.0 + REL), "no-instance optimum {opt} vs {floor}");

    pass(8, "hardness reduction generators hit their closed forms", started);
}

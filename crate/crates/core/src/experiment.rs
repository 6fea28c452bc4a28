//! Batch experiments: run solvers and online algorithms over seeded random
//! instances, compare each against the exact optimum, attach the matching
//! performance bound, and render the results as CSV or JSON lines.

use crate::bounds::{empirical_ratio, REL_TOL};
use crate::exact::{self, ExactError, ExactSolution};
use crate::instance::{fits, gen_uniform, GenError, Instance, Partition, Resources};
use crate::offline::{self, SolveError};
use crate::online::{
    self, balance_threshold, OnlineError, PowerGreedy, ThresholdAssign, TwoBinBalancer,
};
use crate::power::PowerParams;
use serde::Serialize;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AlgorithmKind {
    /// First fit decreasing at the capacity.
    Capacity,
    /// First fit decreasing at the power-optimal load.
    OptLoad,
    /// Best greedy split into k machines over all k.
    Balanced,
    /// The balanced split polished by local search.
    Local,
    /// Online threshold router.
    Alg1,
    /// Online two-bin balancer.
    Alg2,
    /// Online least-power-increase placement.
    Greedy,
}

impl AlgorithmKind {
    pub fn name(&self) -> &'static str {
        match self {
            AlgorithmKind::Capacity => "capacity",
            AlgorithmKind::OptLoad => "optload",
            AlgorithmKind::Balanced => "balanced",
            AlgorithmKind::Local => "local",
            AlgorithmKind::Alg1 => "alg1",
            AlgorithmKind::Alg2 => "alg2",
            AlgorithmKind::Greedy => "greedy",
        }
    }

    pub fn all() -> [AlgorithmKind; 7] {
        [
            AlgorithmKind::Capacity,
            AlgorithmKind::OptLoad,
            AlgorithmKind::Balanced,
            AlgorithmKind::Local,
            AlgorithmKind::Alg1,
            AlgorithmKind::Alg2,
            AlgorithmKind::Greedy,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("unknown algorithm {0:?}; expected capacity, optload, balanced, local, alg1, alg2 or greedy")]
pub struct UnknownAlgorithm(String);

impl FromStr for AlgorithmKind {
    type Err = UnknownAlgorithm;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AlgorithmKind::all()
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| UnknownAlgorithm(s.to_string()))
    }
}

impl fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AlgorithmError {
    #[error(transparent)]
    Offline(#[from] SolveError),
    #[error(transparent)]
    Online(#[from] OnlineError),
}

impl AlgorithmError {
    /// Short machine-readable token used in report cells.
    pub fn token(&self) -> &'static str {
        match self {
            AlgorithmError::Offline(SolveError::OversizedItem { .. }) => "OVERSIZED_ITEM",
            AlgorithmError::Offline(SolveError::MachinesExceeded { .. }) => "MACHINES_EXCEEDED",
            AlgorithmError::Offline(SolveError::Infeasible) => "INFEASIBLE",
            AlgorithmError::Offline(SolveError::WrongRegime(_)) => "WRONG_REGIME",
            AlgorithmError::Online(OnlineError::BadLoad { .. }) => "BAD_LOAD",
            AlgorithmError::Online(OnlineError::OversizedLoad { .. }) => "OVERSIZED_ITEM",
            AlgorithmError::Online(OnlineError::Stuck { .. }) => "STUCK",
            AlgorithmError::Online(OnlineError::IllegalDecision { .. }) => "ILLEGAL_DECISION",
            AlgorithmError::Online(OnlineError::Unsupported(_)) => "UNSUPPORTED",
        }
    }
}

/// Runs one algorithm on one instance, returning its assignment.
pub fn run_algorithm(
    kind: AlgorithmKind,
    instance: &Instance,
) -> Result<Partition, AlgorithmError> {
    let offline = |r: Result<Partition, SolveError>| r.map_err(AlgorithmError::from);
    match kind {
        AlgorithmKind::Capacity => offline(offline::solve_capacity(instance)),
        AlgorithmKind::OptLoad => offline(offline::solve_optimal_load(instance)),
        AlgorithmKind::Balanced => offline(offline::balanced_k(instance)),
        AlgorithmKind::Local => {
            let start = offline::balanced_k(instance)?;
            Ok(offline::local_improve(instance, &start))
        }
        AlgorithmKind::Alg1 => online_partition(instance, &ThresholdAssign),
        AlgorithmKind::Alg2 => online_partition(instance, &TwoBinBalancer),
        AlgorithmKind::Greedy => online_partition(instance, &PowerGreedy),
    }
}

fn online_partition(
    instance: &Instance,
    algorithm: &dyn online::OnlineAlgorithm,
) -> Result<Partition, AlgorithmError> {
    let run = online::run_stream(
        instance.loads(),
        *instance.params(),
        *instance.resources(),
        algorithm,
    )?;
    Ok(run.partition)
}

/// The performance bound an algorithm's ratio is claimed to satisfy on this
/// instance, when one is known. Bounds are only emitted in the regimes
/// where they provably hold, so a `bound_ok = false` row is always news.
pub fn algorithm_bound(
    kind: AlgorithmKind,
    instance: &Instance,
    opt: Option<&ExactSolution>,
) -> Option<(&'static str, f64)> {
    let params = instance.params();
    let xstar = params.optimal_load();
    let capacity = instance.resources().capacity;
    match kind {
        AlgorithmKind::Capacity => {
            let c = capacity.filter(|&c| c <= xstar)?;
            let opt = opt?;
            let m_bar = exact::min_bins(instance.loads(), c).ok()?;
            if m_bar == 0 {
                return None;
            }
            Some((
                "offline_upper_capacity",
                1.0 + 2.0 / 9.0
                    + params.mu * c.powf(params.alpha) / params.b
                    + 1.0 / m_bar as f64
                    + params.b / opt.power,
            ))
        }
        AlgorithmKind::OptLoad => {
            if capacity.is_some_and(|c| xstar >= c) {
                return None;
            }
            if !instance.loads().iter().all(|&l| fits(l, xstar)) {
                return None;
            }
            let opt = opt?;
            let m_star = opt.partition.num_machines();
            let m_bar = exact::min_bins(instance.loads(), xstar).ok()?;
            if m_star == 0 || m_bar == 0 {
                return None;
            }
            Some((
                "offline_upper_optload",
                (m_bar as f64 / m_star as f64)
                    * (1.0 + 2.0 / 9.0 + 1.0 / (params.alpha - 1.0))
                    + 1.0 / m_star as f64
                    + params.machine_power(xstar) / opt.power,
            ))
        }
        AlgorithmKind::Alg1 => match capacity {
            Some(c) if c <= xstar => {
                let total = instance.total_load();
                if total <= 0.0 {
                    return None;
                }
                Some((
                    "alg1_upper_capacity",
                    crate::bounds::threshold_router_capacity_coeff(params, c)
                        * (2.0 + c / total),
                ))
            }
            _ => {
                let small: f64 = instance
                    .loads()
                    .iter()
                    .filter(|&&l| l < xstar)
                    .sum();
                if small == 0.0 {
                    Some(("alg1_upper_optload", 1.0))
                } else {
                    Some((
                        "alg1_upper_optload",
                        crate::bounds::threshold_router_coeff(params.alpha)
                            * (2.0 + xstar / small),
                    ))
                }
            }
        },
        AlgorithmKind::Alg2 => {
            // The balancer's guarantee is against the two-machine optimum.
            if capacity.is_some() || instance.resources().machines != Some(2) {
                return None;
            }
            let total = instance.total_load();
            if total <= balance_threshold(params) {
                Some(("alg2_upper", 1.0))
            } else {
                Some(("alg2_upper", crate::bounds::balancer_bound(params.alpha)))
            }
        }
        AlgorithmKind::Balanced | AlgorithmKind::Local | AlgorithmKind::Greedy => None,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub trials: usize,
    pub seed: u64,
    /// Instance sizes cycle through 1..=n_max.
    pub n_max: usize,
    pub lo: f64,
    pub hi: f64,
    pub params: PowerParams,
    pub resources: Resources,
    pub algorithms: Vec<AlgorithmKind>,
    pub node_budget: u64,
}

/// One algorithm run on one instance. `error` explains any missing value:
/// the algorithm failed, the exact search gave out, or the ratio was
/// impossible (power below the optimum).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentRow {
    pub instance_id: String,
    pub n: usize,
    pub alpha: f64,
    pub b: f64,
    pub capacity: Option<f64>,
    pub machines: Option<usize>,
    pub algorithm: String,
    pub power: Option<f64>,
    pub opt_power: Option<f64>,
    pub ratio: Option<f64>,
    pub bound_name: Option<String>,
    pub bound_value: Option<f64>,
    pub bound_ok: Option<bool>,
    pub error: Option<String>,
}

pub const CSV_HEADER: &str =
    "instance_id,n,alpha,b,capacity,machines,algorithm,power,opt_power,ratio,bound_name,bound_value,bound_ok";

/// Builds the row for one algorithm given the instance and its oracle
/// outcome.
pub fn evaluate(
    kind: AlgorithmKind,
    instance: &Instance,
    opt: &Result<ExactSolution, ExactError>,
) -> ExperimentRow {
    let opt_token = |e: &ExactError| match e {
        ExactError::Infeasible => "INFEASIBLE",
        ExactError::BudgetExceeded { .. } => "BUDGET_EXCEEDED",
    };
    let mut row = ExperimentRow {
        instance_id: instance.id(),
        n: instance.n(),
        alpha: instance.params().alpha,
        b: instance.params().b,
        capacity: instance.resources().capacity,
        machines: instance.resources().machines,
        algorithm: kind.name().to_string(),
        power: None,
        opt_power: None,
        ratio: None,
        bound_name: None,
        bound_value: None,
        bound_ok: None,
        error: None,
    };
    let power = match run_algorithm(kind, instance) {
        Ok(partition) => {
            let p = partition.power(instance);
            row.power = Some(p);
            Some(p)
        }
        Err(e) => {
            row.error = Some(e.token().to_string());
            None
        }
    };
    match opt {
        Ok(sol) => row.opt_power = Some(sol.power),
        Err(e) => {
            row.error.get_or_insert_with(|| opt_token(e).to_string());
        }
    }
    if let (Some(p), Some(o)) = (power, row.opt_power) {
        match empirical_ratio(p, o) {
            Ok(r) => row.ratio = Some(r),
            Err(_) => row.error = Some("ORACLE_VIOLATION".to_string()),
        }
    }
    if let Some((name, value)) = algorithm_bound(kind, instance, opt.as_ref().ok()) {
        row.bound_name = Some(name.to_string());
        row.bound_value = Some(value);
        if let Some(r) = row.ratio {
            row.bound_ok = Some(r <= value * (1.0 + REL_TOL));
        }
    }
    row
}

/// Runs every configured algorithm over `trials` seeded instances. Trial
/// `i` uses `seed + i` and `1 + (i mod n_max)` loads, so any row can be
/// regenerated from its position.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ExperimentRow>, GenError> {
    let mut rows = Vec::with_capacity(config.trials * config.algorithms.len());
    for i in 0..config.trials {
        let n = 1 + (i % config.n_max.max(1));
        let instance = gen_uniform(
            n,
            config.lo,
            config.hi,
            config.seed.wrapping_add(i as u64),
            config.params,
            config.resources,
        )?;
        let opt = exact::solve_with_budget(&instance, config.node_budget);
        for &kind in &config.algorithms {
            rows.push(evaluate(kind, &instance, &opt));
        }
    }
    Ok(rows)
}

fn csv_cell<T: fmt::Display>(value: &Option<T>) -> String {
    value.as_ref().map(T::to_string).unwrap_or_default()
}

/// Renders rows under [`CSV_HEADER`]. A failed stage shows its error token
/// in place of the value it could not produce.
pub fn to_csv(rows: &[ExperimentRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in rows {
        let mut power = csv_cell(&row.power);
        let mut opt_power = csv_cell(&row.opt_power);
        let mut ratio = csv_cell(&row.ratio);
        if let Some(token) = &row.error {
            if row.power.is_none() {
                power = token.clone();
            } else if row.opt_power.is_none() {
                opt_power = token.clone();
            } else {
                ratio = token.clone();
            }
        }
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            row.instance_id,
            row.n,
            row.alpha,
            row.b,
            csv_cell(&row.capacity),
            csv_cell(&row.machines),
            row.algorithm,
            power,
            opt_power,
            ratio,
            csv_cell(&row.bound_name),
            csv_cell(&row.bound_value),
            csv_cell(&row.bound_ok),
        ));
    }
    out
}

/// One JSON object per row, nulls preserved and the error token explicit.
pub fn to_jsonl(rows: &[ExperimentRow]) -> String {
    let mut out = String::new();
    for row in rows {
        out.push_str(&serde_json::to_string(row).expect("row serializes"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::DEFAULT_NODE_BUDGET;

    fn params() -> PowerParams {
        PowerParams::new(3.0, 2.0).unwrap()
    }

    fn config() -> ExperimentConfig {
        ExperimentConfig {
            trials: 6,
            seed: 1,
            n_max: 3,
            lo: 0.1,
            hi: 0.9,
            params: params(),
            resources: Resources::unbounded(),
            algorithms: vec![AlgorithmKind::Balanced, AlgorithmKind::Greedy],
            node_budget: DEFAULT_NODE_BUDGET,
        }
    }

    #[test]
    fn algorithm_names_round_trip() {
        for kind in AlgorithmKind::all() {
            assert_eq!(kind.name().parse::<AlgorithmKind>().unwrap(), kind);
        }
        assert!("ffd".parse::<AlgorithmKind>().is_err());
    }

    #[test]
    fn rows_cover_trials_and_algorithms() {
        let rows = run_experiment(&config()).unwrap();
        assert_eq!(rows.len(), 12);
        let sizes: Vec<usize> = rows.iter().step_by(2).map(|r| r.n).collect();
        assert_eq!(sizes, vec![1, 2, 3, 1, 2, 3]);
        for pair in rows.chunks(2) {
            assert_eq!(pair[0].instance_id, pair[1].instance_id);
        }
        for row in &rows {
            assert!(row.error.is_none(), "unexpected error {:?}", row.error);
            let ratio = row.ratio.expect("ratio present");
            assert!(ratio >= 1.0 - 1e-12);
            assert!(row.bound_name.is_none());
        }
    }

    #[test]
    fn experiments_are_reproducible() {
        let a = to_csv(&run_experiment(&config()).unwrap());
        let b = to_csv(&run_experiment(&config()).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn failed_stages_show_their_token() {
        // x* = 1 over capacity 0.5 is the wrong regime for optload.
        let cfg = ExperimentConfig {
            trials: 1,
            resources: Resources::with_capacity(0.5),
            lo: 0.1,
            hi: 0.4,
            algorithms: vec![AlgorithmKind::OptLoad],
            ..config()
        };
        let rows = run_experiment(&cfg).unwrap();
        assert_eq!(rows[0].error.as_deref(), Some("WRONG_REGIME"));
        assert!(rows[0].power.is_none());
        assert!(rows[0].opt_power.is_some());
        let csv = to_csv(&rows);
        assert!(csv.starts_with(CSV_HEADER));
        assert!(csv.contains(",optload,WRONG_REGIME,"));
    }

    #[test]
    fn router_bound_gates_by_regime() {
        let all_large = Instance::new(
            params(),
            Resources::unbounded(),
            vec![1.5, 2.0],
        )
        .unwrap();
        let opt = exact::solve(&all_large).unwrap();
        let (name, value) =
            algorithm_bound(AlgorithmKind::Alg1, &all_large, Some(&opt)).unwrap();
        assert_eq!(name, "alg1_upper_optload");
        assert_eq!(value, 1.0);

        let mixed = Instance::new(
            params(),
            Resources::unbounded(),
            vec![0.5, 2.0],
        )
        .unwrap();
        let (_, value) = algorithm_bound(AlgorithmKind::Alg1, &mixed, None).unwrap();
        assert!((value - (17.0 / 24.0) * (2.0 + 1.0 / 0.5)).abs() < 1e-12);

        let tight = Instance::new(
            params(),
            Resources::with_capacity(1.0),
            vec![0.5, 0.5],
        )
        .unwrap();
        let (name, value) = algorithm_bound(AlgorithmKind::Alg1, &tight, None).unwrap();
        assert_eq!(name, "alg1_upper_capacity");
        assert!((value - 4.25 * 3.0).abs() < 1e-12);
    }

    #[test]
    fn balancer_bound_needs_exactly_two_machines() {
        let two = Instance::new(
            params(),
            Resources::with_machines(2),
            vec![0.2, 0.2],
        )
        .unwrap();
        let (name, value) = algorithm_bound(AlgorithmKind::Alg2, &two, None).unwrap();
        assert_eq!(name, "alg2_upper");
        assert_eq!(value, 1.0);

        let big = Instance::new(
            params(),
            Resources::with_machines(2),
            vec![2.0, 2.0],
        )
        .unwrap();
        let (_, value) = algorithm_bound(AlgorithmKind::Alg2, &big, None).unwrap();
        assert_eq!(value, 2.25);

        let unbounded = Instance::new(
            params(),
            Resources::unbounded(),
            vec![2.0, 2.0],
        )
        .unwrap();
        assert!(algorithm_bound(AlgorithmKind::Alg2, &unbounded, None).is_none());
    }

    #[test]
    fn capacity_bound_matches_the_formula() {
        let inst = Instance::new(
            params(),
            Resources::with_capacity(1.0),
            vec![0.6, 0.6, 0.6],
        )
        .unwrap();
        let opt = exact::solve(&inst).unwrap();
        let (name, value) =
            algorithm_bound(AlgorithmKind::Capacity, &inst, Some(&opt)).unwrap();
        assert_eq!(name, "offline_upper_capacity");
        // m_bar = 3, opt = 3 * (0.216 + 2) = 6.648
        let expected = 1.0 + 2.0 / 9.0 + 0.5 + 1.0 / 3.0 + 2.0 / opt.power;
        assert!((value - expected).abs() < 1e-12);

        // Loose capacity carries no such guarantee.
        let loose = Instance::new(
            params(),
            Resources::with_capacity(3.0),
            vec![0.6, 0.6],
        )
        .unwrap();
        assert!(algorithm_bound(AlgorithmKind::Capacity, &loose, Some(&opt)).is_none());
    }

    #[test]
    fn router_rows_always_respect_their_bound() {
        let cfg = ExperimentConfig {
            trials: 40,
            seed: 11,
            n_max: 6,
            lo: 0.05,
            hi: 2.0,
            algorithms: vec![AlgorithmKind::Alg1],
            ..config()
        };
        let rows = run_experiment(&cfg).unwrap();
        for row in &rows {
            assert_eq!(row.error, None);
            assert_eq!(row.bound_ok, Some(true), "row {row:?}");
        }
    }

    #[test]
    fn jsonl_rows_parse_back() {
        let rows = run_experiment(&config()).unwrap();
        let text = to_jsonl(&rows);
        for line in text.lines() {
            let value: serde_json::Value = serde_json::from_str(line).unwrap();
            assert!(value.get("algorithm").is_some());
            assert!(value.get("error").is_some());
        }
    }
}

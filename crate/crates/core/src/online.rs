//! Online assignment: algorithms that place each VM as it arrives, an
//! executor that validates their decisions against the resource bounds, and
//! the JSON trace format for replaying runs.

use crate::instance::{fits, ParseError, Partition, Resources};
use crate::power::PowerParams;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Below-or-equal this, a load counts as small for [`ThresholdAssign`]:
/// half of the best per-machine load that a machine may legally carry.
pub fn small_load_threshold(params: &PowerParams, capacity: Option<f64>) -> f64 {
    let ceiling = match capacity {
        Some(c) => params.optimal_load().min(c),
        None => params.optimal_load(),
    };
    ceiling / 2.0
}

/// Fill level at which packing two machines starts beating one: loads up to
/// this total are cheapest on a single machine, and [`TwoBinBalancer`] uses
/// it to decide when its first machine stops accepting more work.
pub fn balance_threshold(params: &PowerParams) -> f64 {
    (params.b / (params.mu * (2f64.powf(params.alpha) - 2.0))).powf(1.0 / params.alpha)
}

/// Where an online algorithm wants the next VM. `Existing` holds a 0-based
/// index into the open machines in opening order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Existing(usize),
    New,
}

/// Everything an algorithm may look at when placing a VM.
pub struct OnlineState<'a> {
    /// Current load per open machine, in opening order.
    pub machine_loads: &'a [f64],
    pub params: &'a PowerParams,
    pub resources: &'a Resources,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StepError {
    #[error("no machine can legally take a load of {load}")]
    Stuck { load: f64 },
    #[error("{0}")]
    UnsupportedResources(String),
}

pub trait OnlineAlgorithm {
    fn name(&self) -> &'static str;

    /// Called once before a run; lets an algorithm refuse resource variants
    /// it is not designed for.
    fn check_resources(&self, _resources: &Resources) -> Result<(), StepError> {
        Ok(())
    }

    fn step(&self, load: f64, state: &OnlineState) -> Result<Decision, StepError>;
}

/// Opens a machine for every load above [`small_load_threshold`] and funnels
/// the small loads onto a shared machine until it too passes the threshold.
/// At most one open machine is ever at or below the threshold, so every
/// machine ends up at least half-saturated.
pub struct ThresholdAssign;

impl OnlineAlgorithm for ThresholdAssign {
    fn name(&self) -> &'static str {
        "alg1"
    }

    fn step(&self, load: f64, state: &OnlineState) -> Result<Decision, StepError> {
        let threshold = small_load_threshold(state.params, state.resources.capacity);
        if load > threshold {
            return Ok(Decision::New);
        }
        match state.machine_loads.iter().position(|&g| g <= threshold) {
            Some(j) => Ok(Decision::Existing(j)),
            None => Ok(Decision::New),
        }
    }
}

/// Splits the stream over exactly two machines: the first keeps accepting
/// while its total stays within [`balance_threshold`] or it is the lighter
/// of the two; everything else goes to the second. Needs unbounded capacity
/// and at least two machines.
pub struct TwoBinBalancer;

impl OnlineAlgorithm for TwoBinBalancer {
    fn name(&self) -> &'static str {
        "alg2"
    }

    fn check_resources(&self, resources: &Resources) -> Result<(), StepError> {
        if resources.capacity.is_some() {
            return Err(StepError::UnsupportedResources(
                "the two-machine balancer assumes unbounded capacity".into(),
            ));
        }
        if resources.machines.is_some_and(|m| m < 2) {
            return Err(StepError::UnsupportedResources(
                "the two-machine balancer needs at least two machines".into(),
            ));
        }
        Ok(())
    }

    fn step(&self, load: f64, state: &OnlineState) -> Result<Decision, StepError> {
        let t = balance_threshold(state.params);
        let first = state.machine_loads.first().copied().unwrap_or(0.0);
        let second = state.machine_loads.get(1).copied().unwrap_or(0.0);
        let open = state.machine_loads.len();
        if load + first <= t || first <= second {
            Ok(if open >= 1 {
                Decision::Existing(0)
            } else {
                Decision::New
            })
        } else {
            Ok(if open >= 2 {
                Decision::Existing(1)
            } else {
                Decision::New
            })
        }
    }
}

/// Puts each VM where it raises the power the least, considering only legal
/// placements. Ties go to the lowest-index open machine, and an equal-cost
/// new machine loses to reusing an open one.
pub struct PowerGreedy;

impl OnlineAlgorithm for PowerGreedy {
    fn name(&self) -> &'static str {
        "greedy"
    }

    fn step(&self, load: f64, state: &OnlineState) -> Result<Decision, StepError> {
        let params = state.params;
        let capacity = state.resources.capacity;
        let best_existing = state
            .machine_loads
            .iter()
            .enumerate()
            .filter(|&(_, &g)| capacity.is_none_or(|c| fits(g + load, c)))
            .map(|(j, &g)| {
                (
                    params.machine_power(g + load) - params.machine_power(g),
                    j,
                )
            })
            .min_by(|a, b| a.partial_cmp(b).unwrap());
        let may_open = state
            .resources
            .machines
            .is_none_or(|m| state.machine_loads.len() < m)
            && capacity.is_none_or(|c| fits(load, c));
        match (best_existing, may_open) {
            (Some((delta, j)), true) => {
                if params.machine_power(load) < delta {
                    Ok(Decision::New)
                } else {
                    Ok(Decision::Existing(j))
                }
            }
            (Some((_, j)), false) => Ok(Decision::Existing(j)),
            (None, true) => Ok(Decision::New),
            (None, false) => Err(StepError::Stuck { load }),
        }
    }
}

/// One line of a run trace: `{"vm": 3, "load": 0.2, "target": 1}` places
/// the third VM on machine 1; `"target": "new"` opens a machine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub vm: usize,
    pub load: f64,
    pub target: TraceTarget,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceTarget {
    /// 1-based machine number as written in trace files.
    Machine(usize),
    NewMachine,
}

impl Serialize for TraceTarget {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            TraceTarget::Machine(j) => serializer.serialize_u64(*j as u64),
            TraceTarget::NewMachine => serializer.serialize_str("new"),
        }
    }
}

impl<'de> Deserialize<'de> for TraceTarget {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(u64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Num(0) => Err(D::Error::custom("machine numbers are 1-based; found 0")),
            Raw::Num(j) => Ok(TraceTarget::Machine(j as usize)),
            Raw::Text(s) if s == "new" => Ok(TraceTarget::NewMachine),
            Raw::Text(s) => Err(D::Error::custom(format!(
                "target must be a machine number or \"new\", found {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OnlineError {
    #[error("VM {vm} load must be a finite positive number (got {load})")]
    BadLoad { vm: usize, load: f64 },
    #[error("VM {vm} load {load} exceeds the capacity {capacity}; no machine can host it")]
    OversizedLoad { vm: usize, load: f64, capacity: f64 },
    #[error("algorithm cannot place VM {vm} (load {load}) within the resource bounds")]
    Stuck { vm: usize, load: f64 },
    #[error("illegal decision for VM {vm} (load {load}): {detail}")]
    IllegalDecision { vm: usize, load: f64, detail: String },
    #[error("{0}")]
    Unsupported(String),
}

/// A finished online run: the final assignment, its power, and the decision
/// trace that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamRun {
    pub partition: Partition,
    pub power: f64,
    pub trace: Vec<TraceStep>,
}

/// Feeds loads to an algorithm one at a time, enforcing the resource bounds
/// on every decision and recording the trace. Lets adversaries inspect the
/// machine state between arrivals.
pub struct StreamRunner<'a> {
    params: PowerParams,
    resources: Resources,
    algorithm: &'a dyn OnlineAlgorithm,
    loads: Vec<f64>,
    machine_loads: Vec<f64>,
    groups: Vec<Vec<usize>>,
    trace: Vec<TraceStep>,
}

impl<'a> StreamRunner<'a> {
    pub fn new(
        params: PowerParams,
        resources: Resources,
        algorithm: &'a dyn OnlineAlgorithm,
    ) -> Result<Self, OnlineError> {
        match algorithm.check_resources(&resources) {
            Ok(()) => Ok(StreamRunner {
                params,
                resources,
                algorithm,
                loads: Vec::new(),
                machine_loads: Vec::new(),
                groups: Vec::new(),
                trace: Vec::new(),
            }),
            Err(StepError::UnsupportedResources(msg)) => Err(OnlineError::Unsupported(msg)),
            Err(StepError::Stuck { load }) => Err(OnlineError::Stuck { vm: 0, load }),
        }
    }

    pub fn push(&mut self, load: f64) -> Result<&TraceStep, OnlineError> {
        let vm = self.loads.len() + 1;
        if !(load.is_finite() && load > 0.0) {
            return Err(OnlineError::BadLoad { vm, load });
        }
        if let Some(c) = self.resources.capacity {
            if !fits(load, c) {
                return Err(OnlineError::OversizedLoad {
                    vm,
                    load,
                    capacity: c,
                });
            }
        }
        let state = OnlineState {
            machine_loads: &self.machine_loads,
            params: &self.params,
            resources: &self.resources,
        };
        let decision = self.algorithm.step(load, &state).map_err(|e| match e {
            StepError::Stuck { load } => OnlineError::Stuck { vm, load },
            StepError::UnsupportedResources(msg) => OnlineError::Unsupported(msg),
        })?;
        let target = match decision {
            Decision::Existing(j) => {
                let Some(&current) = self.machine_loads.get(j) else {
                    return Err(OnlineError::IllegalDecision {
                        vm,
                        load,
                        detail: format!("machine {} is not open", j + 1),
                    });
                };
                if let Some(c) = self.resources.capacity {
                    if !fits(current + load, c) {
                        return Err(OnlineError::IllegalDecision {
                            vm,
                            load,
                            detail: format!(
                                "machine {} would carry {}, exceeding the capacity {c}",
                                j + 1,
                                current + load
                            ),
                        });
                    }
                }
                self.machine_loads[j] = current + load;
                self.groups[j].push(vm - 1);
                TraceTarget::Machine(j + 1)
            }
            Decision::New => {
                if let Some(m) = self.resources.machines {
                    if self.machine_loads.len() >= m {
                        return Err(OnlineError::IllegalDecision {
                            vm,
                            load,
                            detail: format!(
                                "opening machine {} but only {m} are allowed",
                                self.machine_loads.len() + 1
                            ),
                        });
                    }
                }
                self.machine_loads.push(load);
                self.groups.push(vec![vm - 1]);
                TraceTarget::NewMachine
            }
        };
        self.loads.push(load);
        self.trace.push(TraceStep { vm, load, target });
        Ok(self.trace.last().unwrap())
    }

    pub fn machine_loads(&self) -> &[f64] {
        &self.machine_loads
    }

    pub fn num_machines(&self) -> usize {
        self.machine_loads.len()
    }

    pub fn loads(&self) -> &[f64] {
        &self.loads
    }

    pub fn finish(self) -> StreamRun {
        let partition = Partition::new(self.groups);
        let power = partition
            .group_loads(&self.loads)
            .iter()
            .map(|&g| self.params.machine_power(g))
            .sum();
        StreamRun {
            partition,
            power,
            trace: self.trace,
        }
    }
}

/// Runs a whole load sequence through an algorithm.
pub fn run_stream(
    loads: &[f64],
    params: PowerParams,
    resources: Resources,
    algorithm: &dyn OnlineAlgorithm,
) -> Result<StreamRun, OnlineError> {
    let mut runner = StreamRunner::new(params, resources, algorithm)?;
    for &load in loads {
        runner.push(load)?;
    }
    Ok(runner.finish())
}

/// For a finished [`TwoBinBalancer`] run: once the total load reaches twice
/// [`balance_threshold`], some single VM must span the final load gap
/// between the two machines. Vacuously true below that total. Comparisons
/// carry a tiny relative slack for rounding.
pub fn load_gap_is_covered(run: &StreamRun, params: &PowerParams) -> bool {
    let t = balance_threshold(params);
    let total: f64 = run.trace.iter().map(|s| s.load).sum();
    if total < 2.0 * t {
        return true;
    }
    let loads = |g: usize| -> f64 {
        run.partition
            .groups()
            .get(g)
            .map(|members| {
                members
                    .iter()
                    .map(|&i| run.trace[i].load)
                    .sum()
            })
            .unwrap_or(0.0)
    };
    let gap = (loads(0) - loads(1)).abs();
    run.trace
        .iter()
        .any(|s| s.load >= gap - 1e-9 * gap.max(1.0))
}

/// Reads a stream file: `{"loads": [0.3, 0.6, 0.2]}`.
pub fn parse_stream(text: &str) -> Result<Vec<f64>, ParseError> {
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct StreamFile {
        loads: Vec<f64>,
    }
    let file: StreamFile = serde_json::from_str(text).map_err(|e| ParseError::Json {
        line: e.line(),
        column: e.column(),
        msg: e.to_string(),
    })?;
    Ok(file.loads)
}

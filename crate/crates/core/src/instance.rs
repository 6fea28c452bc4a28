//! Instance and partition data model, validation, JSON formats, and the
//! instance generators (uniform random plus the two hardness-reduction
//! constructions).
//!
//! File formats:
//! - instance: `{"mu": 1, "alpha": 3, "b": 2, "capacity": 1.5, "machines": null,
//!   "loads": [0.5, 0.25]}` where `null` (or a missing key) means unbounded;
//! - partition: `{"groups": [[1, 3], [2]]}` with 1-based VM indices.

use crate::power::{ParamError, PowerParams};
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use std::fmt;
use thiserror::Error;

/// Relative slack used by every "does this load fit under this cap" test.
/// Loads are usually written as decimals; converting them to binary can push
/// a sum meant to equal the cap one ulp above it, and rejecting those would
/// make exact-fill packings spuriously infeasible. The strict improvement
/// inequalities elsewhere do not use this.
pub const CAP_SLACK: f64 = 1e-9;

/// True when `total` fits under `cap`, allowing [`CAP_SLACK`] relative slack.
pub fn fits(total: f64, cap: f64) -> bool {
    total <= cap * (1.0 + CAP_SLACK)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InstanceError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("capacity must be a finite positive number (got {0})")]
    BadCapacity(f64),
    #[error("machine bound must be at least 1")]
    BadMachineBound,
    #[error("load {index} must be a finite positive number (got {load})")]
    BadLoad { index: usize, load: f64 },
    #[error("load {index} ({load}) exceeds the capacity {capacity}; no machine can host it")]
    LoadExceedsCapacity {
        index: usize,
        load: f64,
        capacity: f64,
    },
}

/// Capacity and machine-count bounds; `None` means unbounded. The four
/// combinations give the four problem variants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resources {
    pub capacity: Option<f64>,
    pub machines: Option<usize>,
}

impl Resources {
    pub fn unbounded() -> Self {
        Resources {
            capacity: None,
            machines: None,
        }
    }

    pub fn with_capacity(c: f64) -> Self {
        Resources {
            capacity: Some(c),
            machines: None,
        }
    }

    pub fn with_machines(m: usize) -> Self {
        Resources {
            capacity: None,
            machines: Some(m),
        }
    }

    pub fn bounded(c: f64, m: usize) -> Self {
        Resources {
            capacity: Some(c),
            machines: Some(m),
        }
    }

    pub fn validate(&self) -> Result<(), InstanceError> {
        if let Some(c) = self.capacity {
            if !(c.is_finite() && c > 0.0) {
                return Err(InstanceError::BadCapacity(c));
            }
        }
        if self.machines == Some(0) {
            return Err(InstanceError::BadMachineBound);
        }
        Ok(())
    }
}

/// A problem instance: the cost model, the resource bounds, and the VM loads.
/// Construction validates every invariant, so a held `Instance` is always
/// well-formed (positive loads, each individually within capacity).
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    params: PowerParams,
    resources: Resources,
    loads: Vec<f64>,
}

impl Instance {
    pub fn new(
        params: PowerParams,
        resources: Resources,
        loads: Vec<f64>,
    ) -> Result<Self, InstanceError> {
        PowerParams::with_mu(params.mu, params.alpha, params.b)?;
        resources.validate()?;
        for (i, &l) in loads.iter().enumerate() {
            if !(l.is_finite() && l > 0.0) {
                return Err(InstanceError::BadLoad { index: i + 1, load: l });
            }
            if let Some(c) = resources.capacity {
                if !fits(l, c) {
                    return Err(InstanceError::LoadExceedsCapacity {
                        index: i + 1,
                        load: l,
                        capacity: c,
                    });
                }
            }
        }
        Ok(Instance {
            params,
            resources,
            loads,
        })
    }

    pub fn params(&self) -> &PowerParams {
        &self.params
    }

    pub fn resources(&self) -> &Resources {
        &self.resources
    }

    pub fn loads(&self) -> &[f64] {
        &self.loads
    }

    pub fn n(&self) -> usize {
        self.loads.len()
    }

    pub fn total_load(&self) -> f64 {
        self.loads.iter().sum()
    }

    /// Short content hash (12 hex chars of SHA-256 over the canonical JSON
    /// encoding); used to key experiment report rows.
    pub fn id(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.to_json_compact().as_bytes());
        let digest = hasher.finalize();
        let mut hex = String::with_capacity(12);
        for byte in digest.iter().take(6) {
            hex.push_str(&format!("{byte:02x}"));
        }
        hex
    }

    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let file: InstanceFile = serde_json::from_str(text).map_err(|e| ParseError::Json {
            line: e.line(),
            column: e.column(),
            msg: e.to_string(),
        })?;
        let params = PowerParams::with_mu(file.mu, file.alpha, file.b)
            .map_err(InstanceError::from)?;
        let resources = Resources {
            capacity: file.capacity,
            machines: file.machines,
        };
        Ok(Instance::new(params, resources, file.loads)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.as_file()).expect("instance serializes")
    }

    fn to_json_compact(&self) -> String {
        serde_json::to_string(&self.as_file()).expect("instance serializes")
    }

    fn as_file(&self) -> InstanceFile {
        InstanceFile {
            mu: self.params.mu,
            alpha: self.params.alpha,
            b: self.params.b,
            capacity: self.resources.capacity,
            machines: self.resources.machines,
            loads: self.loads.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("malformed JSON at line {line}, column {column}: {msg}")]
    Json {
        line: usize,
        column: usize,
        msg: String,
    },
    #[error(transparent)]
    Invalid(#[from] InstanceError),
}

fn default_mu() -> f64 {
    1.0
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    #[serde(default = "default_mu")]
    mu: f64,
    alpha: f64,
    b: f64,
    #[serde(default)]
    capacity: Option<f64>,
    #[serde(default)]
    machines: Option<usize>,
    loads: Vec<f64>,
}

/// An assignment of VM indices to machines. Held in canonical form: each
/// group sorted ascending, groups ordered by their smallest member, indices
/// 0-based in memory (the JSON form is 1-based).
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    groups: Vec<Vec<usize>>,
}

impl Partition {
    pub fn new(mut groups: Vec<Vec<usize>>) -> Self {
        for g in &mut groups {
            g.sort_unstable();
        }
        groups.sort_by_key(|g| g.first().copied().unwrap_or(usize::MAX));
        Partition { groups }
    }

    /// Everything on one machine.
    pub fn single_group(n: usize) -> Self {
        Partition {
            groups: if n == 0 {
                Vec::new()
            } else {
                vec![(0..n).collect()]
            },
        }
    }

    /// Each VM on its own machine.
    pub fn singletons(n: usize) -> Self {
        Partition {
            groups: (0..n).map(|i| vec![i]).collect(),
        }
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    /// Number of non-empty machines.
    pub fn num_machines(&self) -> usize {
        self.groups.iter().filter(|g| !g.is_empty()).count()
    }

    pub fn group_loads(&self, loads: &[f64]) -> Vec<f64> {
        self.groups
            .iter()
            .map(|g| g.iter().map(|&i| loads[i]).sum())
            .collect()
    }

    /// Total power of this assignment under the instance's cost model.
    pub fn power(&self, instance: &Instance) -> f64 {
        self.group_loads(instance.loads())
            .iter()
            .map(|&l| instance.params().machine_power(l))
            .sum()
    }

    /// Checks every partition invariant against the instance; the returned
    /// list is empty exactly when the assignment is feasible.
    pub fn validate(&self, instance: &Instance) -> Vec<Violation> {
        let n = instance.n();
        let mut violations = Vec::new();
        let mut seen = vec![false; n];
        for (gi, group) in self.groups.iter().enumerate() {
            if group.is_empty() {
                violations.push(Violation::EmptyGroup { group: gi + 1 });
                continue;
            }
            let mut load = 0.0;
            for &i in group {
                if i >= n {
                    violations.push(Violation::IndexOutOfRange {
                        group: gi + 1,
                        index: i + 1,
                    });
                    continue;
                }
                if seen[i] {
                    violations.push(Violation::DuplicateIndex { index: i + 1 });
                } else {
                    seen[i] = true;
                }
                load += instance.loads()[i];
            }
            if let Some(c) = instance.resources().capacity {
                if !fits(load, c) {
                    violations.push(Violation::CapacityExceeded {
                        group: gi + 1,
                        load,
                        capacity: c,
                    });
                }
            }
        }
        for (i, &was_seen) in seen.iter().enumerate() {
            if !was_seen {
                violations.push(Violation::MissingIndex { index: i + 1 });
            }
        }
        if let Some(m) = instance.resources().machines {
            let used = self.num_machines();
            if used > m {
                violations.push(Violation::TooManyMachines { used, limit: m });
            }
        }
        violations
    }
}

// JSON form: {"groups": [[1, 3], [2]]}, 1-based.
impl Serialize for Partition {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct File<'a> {
            groups: &'a Vec<Vec<usize>>,
        }
        let one_based: Vec<Vec<usize>> = self
            .groups
            .iter()
            .map(|g| g.iter().map(|i| i + 1).collect())
            .collect();
        File {
            groups: &one_based,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Partition {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct File {
            groups: Vec<Vec<usize>>,
        }
        let file = File::deserialize(deserializer)?;
        let mut zero_based = Vec::with_capacity(file.groups.len());
        for g in file.groups {
            let mut out = Vec::with_capacity(g.len());
            for i in g {
                if i == 0 {
                    return Err(D::Error::custom("VM indices are 1-based; found 0"));
                }
                out.push(i - 1);
            }
            zero_based.push(out);
        }
        Ok(Partition::new(zero_based))
    }
}

/// A violated partition constraint. Indices in messages are 1-based to match
/// the file format.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    EmptyGroup { group: usize },
    IndexOutOfRange { group: usize, index: usize },
    DuplicateIndex { index: usize },
    MissingIndex { index: usize },
    CapacityExceeded { group: usize, load: f64, capacity: f64 },
    TooManyMachines { used: usize, limit: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyGroup { group } => write!(f, "group {group} is empty"),
            Violation::IndexOutOfRange { group, index } => {
                write!(f, "group {group} references VM {index}, which does not exist")
            }
            Violation::DuplicateIndex { index } => {
                write!(f, "VM {index} is assigned to more than one machine")
            }
            Violation::MissingIndex { index } => {
                write!(f, "VM {index} is not assigned to any machine")
            }
            Violation::CapacityExceeded {
                group,
                load,
                capacity,
            } => write!(
                f,
                "group {group} carries load {load}, exceeding the capacity {capacity}"
            ),
            Violation::TooManyMachines { used, limit } => {
                write!(f, "{used} machines used but only {limit} are allowed")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenError {
    #[error("n must be at least 1")]
    EmptyInstance,
    #[error("lo must be a finite positive number (got {0})")]
    BadLo(f64),
    #[error("hi ({hi}) must be at least lo ({lo})")]
    BadRange { lo: f64, hi: f64 },
    #[error("hi ({hi}) exceeds the capacity ({capacity}); generated VMs might not fit anywhere")]
    RangeExceedsCapacity { hi: f64, capacity: f64 },
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

/// `n` loads drawn i.i.d. uniformly from `[lo, hi]`. The generator is
/// ChaCha8 seeded directly with `seed`, so the same arguments reproduce the
/// same instance on any platform.
pub fn gen_uniform(
    n: usize,
    lo: f64,
    hi: f64,
    seed: u64,
    params: PowerParams,
    resources: Resources,
) -> Result<Instance, GenError> {
    if n == 0 {
        return Err(GenError::EmptyInstance);
    }
    if !(lo.is_finite() && lo > 0.0) {
        return Err(GenError::BadLo(lo));
    }
    if !(hi.is_finite() && hi >= lo) {
        return Err(GenError::BadRange { lo, hi });
    }
    if let Some(c) = resources.capacity {
        if hi > c {
            return Err(GenError::RangeExceedsCapacity { hi, capacity: c });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = Uniform::new_inclusive(lo, hi);
    let loads = (0..n).map(|_| dist.sample(&mut rng)).collect();
    Ok(Instance::new(params, resources, loads)?)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReductionError {
    #[error("sizes must be non-empty")]
    Empty,
    #[error("size {index} must be a finite positive number (got {size})")]
    BadSize { index: usize, size: f64 },
    #[error("number of sizes ({0}) is not divisible by 3")]
    NotTriples(usize),
    #[error("sizes sum to {got}, but k groups of target sum {target} require {expected}")]
    WrongSum { got: u64, target: u64, expected: u64 },
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

/// Capacity-bounded instance encoding a Partition (half-sum split) question.
///
/// Loads are the element sizes, the capacity is half the total, and `b` is
/// chosen as `C^alpha (alpha - 1)` so the per-machine optimum `x*` lands
/// exactly on `C`. If the sizes split evenly in two, the optimal power is
/// `2b + 2 C^alpha`; otherwise it is at least `3b + 3 (2C/3)^alpha`.
pub fn gen_partition_reduction(sizes: &[f64], alpha: f64) -> Result<Instance, ReductionError> {
    if sizes.is_empty() {
        return Err(ReductionError::Empty);
    }
    for (i, &s) in sizes.iter().enumerate() {
        if !(s.is_finite() && s > 0.0) {
            return Err(ReductionError::BadSize { index: i + 1, size: s });
        }
    }
    let total: f64 = sizes.iter().sum();
    let capacity = total / 2.0;
    let b = capacity.powf(alpha) * (alpha - 1.0);
    let params = PowerParams::new(alpha, b).map_err(InstanceError::from)?;
    Ok(Instance::new(
        params,
        Resources::with_capacity(capacity),
        sizes.to_vec(),
    )?)
}

/// Which resource bound the 3-partition construction carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReductionVariant {
    /// Neither bound.
    Unbounded,
    /// Capacity bounded at the target sum `B`.
    CapacityBounded,
    /// Machine count bounded at `k`.
    MachineBounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThreePartitionInstance {
    pub instance: Instance,
    pub k: usize,
    /// Sizes outside the window `(B/4, B/2)` are legal but weaken the
    /// instance (groups of total `B` may then have other than 3 elements).
    pub warnings: Vec<String>,
}

/// Instance encoding a 3-Partition question: `3k` integer sizes that sum to
/// `k * B`, with `b = B^alpha (alpha - 1)` so `x* = B`. The sizes admit a
/// perfect 3-partition exactly when the optimal power equals
/// `k * machine_power(B)`, provided every size lies in `(B/4, B/2)`.
pub fn gen_three_partition_reduction(
    sizes: &[u64],
    target_sum: u64,
    alpha: f64,
    variant: ReductionVariant,
) -> Result<ThreePartitionInstance, ReductionError> {
    if sizes.is_empty() {
        return Err(ReductionError::Empty);
    }
    if sizes.len() % 3 != 0 {
        return Err(ReductionError::NotTriples(sizes.len()));
    }
    let k = sizes.len() / 3;
    let got: u64 = sizes.iter().sum();
    let expected = target_sum * k as u64;
    if got != expected {
        return Err(ReductionError::WrongSum {
            got,
            target: target_sum,
            expected,
        });
    }
    let mut warnings = Vec::new();
    for &s in sizes {
        if 4 * s <= target_sum || 2 * s >= target_sum {
            warnings.push(format!(
                "size {s} lies outside the open window ({target_sum}/4, {target_sum}/2); \
                 equal-sum groups need not be triples"
            ));
        }
    }
    let big = target_sum as f64;
    let b = big.powf(alpha) * (alpha - 1.0);
    let params = PowerParams::new(alpha, b).map_err(InstanceError::from)?;
    let resources = match variant {
        ReductionVariant::Unbounded => Resources::unbounded(),
        ReductionVariant::CapacityBounded => Resources::with_capacity(big),
        ReductionVariant::MachineBounded => Resources::with_machines(k),
    };
    let loads = sizes.iter().map(|&s| s as f64).collect();
    Ok(ThreePartitionInstance {
        instance: Instance::new(params, resources, loads)?,
        k,
        warnings,
    })
}

//! Offline heuristics: first-fit-decreasing packers at two different bin
//! sizes, an enumerated balanced split, and a local-search improver.

use crate::instance::{fits, Instance, Partition};
use crate::power::merge_delta;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("load {index} ({load}) exceeds the bin size {size}")]
    OversizedItem { index: usize, load: f64, size: f64 },
    #[error("packing needs {needed} machines but only {available} are allowed")]
    MachinesExceeded { needed: usize, available: usize },
    #[error("no assignment satisfies the resource bounds")]
    Infeasible,
    #[error("{0}")]
    WrongRegime(String),
}

/// First fit decreasing: place loads in decreasing order (ties broken by
/// input position), each into the first bin it fits. Returned groups hold
/// 0-based input indices in bin-opening order; they are not canonicalized.
pub fn ffd_pack(loads: &[f64], size: f64) -> Result<Vec<Vec<usize>>, SolveError> {
    let mut order: Vec<usize> = (0..loads.len()).collect();
    order.sort_by(|&a, &b| loads[b].partial_cmp(&loads[a]).unwrap().then(a.cmp(&b)));
    let mut bins: Vec<(f64, Vec<usize>)> = Vec::new();
    for i in order {
        let load = loads[i];
        if !fits(load, size) {
            return Err(SolveError::OversizedItem {
                index: i + 1,
                load,
                size,
            });
        }
        match bins.iter_mut().find(|(total, _)| fits(*total + load, size)) {
            Some((total, members)) => {
                *total += load;
                members.push(i);
            }
            None => bins.push((load, vec![i])),
        }
    }
    Ok(bins.into_iter().map(|(_, members)| members).collect())
}

fn check_machines(partition: &Partition, instance: &Instance) -> Result<(), SolveError> {
    if let Some(m) = instance.resources().machines {
        let needed = partition.num_machines();
        if needed > m {
            return Err(SolveError::MachinesExceeded {
                needed,
                available: m,
            });
        }
    }
    Ok(())
}

/// First fit decreasing with the capacity as the bin size. Only meaningful
/// for capacity-bounded instances.
pub fn solve_capacity(instance: &Instance) -> Result<Partition, SolveError> {
    let Some(capacity) = instance.resources().capacity else {
        return Err(SolveError::WrongRegime(
            "capacity packing needs a capacity bound; this instance has none".into(),
        ));
    };
    let partition = Partition::new(ffd_pack(instance.loads(), capacity)?);
    check_machines(&partition, instance)?;
    Ok(partition)
}

/// First fit decreasing with the power-optimal per-machine load `x*` as the
/// bin size; loads larger than `x*` get machines of their own. Applies when
/// `x*` lies strictly below the capacity (or the capacity is unbounded),
/// so that a bin of size `x*` is always a legal machine.
pub fn solve_optimal_load(instance: &Instance) -> Result<Partition, SolveError> {
    let xstar = instance.params().optimal_load();
    if let Some(c) = instance.resources().capacity {
        if xstar >= c {
            return Err(SolveError::WrongRegime(format!(
                "optimal-load packing applies when the per-machine optimum ({xstar}) \
                 lies strictly below the capacity ({c}); use capacity packing here"
            )));
        }
    }
    let (small, large): (Vec<usize>, Vec<usize>) = (0..instance.n())
        .partition(|&i| fits(instance.loads()[i], xstar));
    let small_loads: Vec<f64> = small.iter().map(|&i| instance.loads()[i]).collect();
    let mut groups: Vec<Vec<usize>> = ffd_pack(&small_loads, xstar)?
        .into_iter()
        .map(|bin| bin.into_iter().map(|i| small[i]).collect())
        .collect();
    groups.extend(large.into_iter().map(|i| vec![i]));
    let partition = Partition::new(groups);
    check_machines(&partition, instance)?;
    Ok(partition)
}

/// Best split into k machines over all k, with each k filled greedily:
/// loads in decreasing order onto the least-loaded machine that still has
/// room. Ties in power prefer fewer machines.
pub fn balanced_k(instance: &Instance) -> Result<Partition, SolveError> {
    let n = instance.n();
    if n == 0 {
        return Ok(Partition::new(Vec::new()));
    }
    let kmax = instance.resources().machines.map_or(n, |m| m.min(n));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        instance.loads()[b]
            .partial_cmp(&instance.loads()[a])
            .unwrap()
            .then(a.cmp(&b))
    });

    let mut best: Option<(f64, Partition)> = None;
    'k: for k in 1..=kmax {
        let mut group_loads = vec![0.0; k];
        let mut groups: Vec<Vec<usize>> = vec![Vec::new(); k];
        for &i in &order {
            let load = instance.loads()[i];
            let target = (0..k)
                .filter(|&g| {
                    instance
                        .resources()
                        .capacity
                        .is_none_or(|c| fits(group_loads[g] + load, c))
                })
                .min_by(|&a, &b| {
                    group_loads[a]
                        .partial_cmp(&group_loads[b])
                        .unwrap()
                        .then(a.cmp(&b))
                });
            let Some(g) = target else { continue 'k };
            group_loads[g] += load;
            groups[g].push(i);
        }
        let partition = Partition::new(groups);
        let power = partition.power(instance);
        if best.as_ref().is_none_or(|(bp, _)| power < *bp) {
            best = Some((power, partition));
        }
    }
    best.map(|(_, p)| p).ok_or(SolveError::Infeasible)
}

/// Local search from a feasible starting assignment. Two move kinds, both
/// applied best improvement first:
/// - merge two machines whose combined load stays within both the capacity
///   and the power-optimal load `x*` (such merges never raise the power);
/// - shift one VM between two machines when that strictly narrows their
///   load gap, which by convexity lowers the power.
///
/// Stops when no move lowers the power, so the result keeps every resource
/// bound the start satisfied.
pub fn local_improve(instance: &Instance, start: &Partition) -> Partition {
    debug_assert!(start.validate(instance).is_empty());
    let params = instance.params();
    let xstar = params.optimal_load();
    let capacity = instance.resources().capacity;
    let mut current = Partition::new(start.groups().to_vec());
    let mut current_power = current.power(instance);

    loop {
        let groups = current.groups();
        let loads = current.group_loads(instance.loads());
        let k = groups.len();
        // (predicted power change, resulting groups)
        let mut best: Option<(f64, Vec<Vec<usize>>)> = None;
        let mut consider = |delta: f64, groups: Vec<Vec<usize>>| {
            if delta < 0.0 && best.as_ref().is_none_or(|(d, _)| delta < *d) {
                best = Some((delta, groups));
            }
        };

        for a in 0..k {
            for b in (a + 1)..k {
                let combined = loads[a] + loads[b];
                if !fits(combined, xstar) || capacity.is_some_and(|c| !fits(combined, c)) {
                    continue;
                }
                let mut next = groups.to_vec();
                let moved = next[b].clone();
                next[a].extend(moved);
                next.remove(b);
                consider(merge_delta(loads[a], loads[b], params), next);
            }
        }

        for src in 0..k {
            if groups[src].len() < 2 {
                continue;
            }
            for dst in 0..k {
                if dst == src {
                    continue;
                }
                for (pos, &vm) in groups[src].iter().enumerate() {
                    let l = instance.loads()[vm];
                    let new_src = loads[src] - l;
                    let new_dst = loads[dst] + l;
                    if capacity.is_some_and(|c| !fits(new_dst, c)) {
                        continue;
                    }
                    if (new_src - new_dst).abs() >= (loads[src] - loads[dst]).abs() {
                        continue;
                    }
                    let delta = params.machine_power(new_src) + params.machine_power(new_dst)
                        - params.machine_power(loads[src])
                        - params.machine_power(loads[dst]);
                    let mut next = groups.to_vec();
                    next[src].remove(pos);
                    next[dst].push(vm);
                    consider(delta, next);
                }
            }
        }

        let Some((_, next_groups)) = best else {
            return current;
        };
        let next = Partition::new(next_groups);
        let next_power = next.power(instance);
        // The predicted delta can disagree with the recomputed power in the
        // last ulp; insisting on a real decrease guarantees termination.
        if next_power >= current_power {
            return current;
        }
        current = next;
        current_power = next_power;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact;
    use crate::instance::Resources;
    use crate::power::PowerParams;

    fn params() -> PowerParams {
        PowerParams::new(3.0, 2.0).unwrap()
    }

    fn inst(resources: Resources, loads: &[f64]) -> Instance {
        Instance::new(params(), resources, loads.to_vec()).unwrap()
    }

    #[test]
    fn ffd_places_largest_first() {
        let groups = ffd_pack(&[0.5, 0.6, 0.4, 0.5], 1.1).unwrap();
        assert_eq!(groups, vec![vec![1, 0], vec![3, 2]]);
        assert!(matches!(
            ffd_pack(&[0.5, 2.0], 1.1),
            Err(SolveError::OversizedItem { index: 2, .. })
        ));
    }

    #[test]
    fn capacity_packing_matches_ffd_by_hand() {
        let inst = inst(Resources::with_capacity(1.0), &[0.8, 0.7, 0.6, 0.5, 0.4]);
        let p = solve_capacity(&inst).unwrap();
        assert_eq!(p.groups(), &[vec![0], vec![1], vec![2, 4], vec![3]]);
    }

    #[test]
    fn capacity_packing_needs_a_capacity() {
        let inst = inst(Resources::unbounded(), &[0.5]);
        assert!(matches!(
            solve_capacity(&inst),
            Err(SolveError::WrongRegime(_))
        ));
    }

    #[test]
    fn capacity_packing_respects_machine_bound() {
        let inst = inst(Resources::bounded(1.0, 3), &[0.8, 0.7, 0.6, 0.5, 0.4]);
        assert_eq!(
            solve_capacity(&inst),
            Err(SolveError::MachinesExceeded {
                needed: 4,
                available: 3
            })
        );
    }

    #[test]
    fn optimal_load_packing_isolates_oversized_loads() {
        // x* = 1: the four halves pack pairwise, the 1.8 sits alone.
        let inst = inst(Resources::unbounded(), &[0.5, 0.5, 0.5, 0.5, 1.8]);
        let p = solve_optimal_load(&inst).unwrap();
        assert_eq!(p.groups(), &[vec![0, 1], vec![2, 3], vec![4]]);
    }

    #[test]
    fn optimal_load_packing_requires_room_below_capacity() {
        let inst = inst(Resources::with_capacity(0.8), &[0.5]);
        assert!(matches!(
            solve_optimal_load(&inst),
            Err(SolveError::WrongRegime(_))
        ));
    }

    #[test]
    fn balanced_split_finds_the_right_machine_count() {
        // Three unit loads: singletons cost 9, any merge costs more.
        let three_units = inst(Resources::unbounded(), &[1.0, 1.0, 1.0]);
        let p = balanced_k(&three_units).unwrap();
        assert_eq!(p.num_machines(), 3);
        assert_eq!(p.power(&three_units), 9.0);

        // Three tiny loads: one machine wins.
        let tiny = inst(Resources::unbounded(), &[0.1, 0.1, 0.1]);
        let p = balanced_k(&tiny).unwrap();
        assert_eq!(p.num_machines(), 1);
    }

    #[test]
    fn balanced_split_respects_bounds() {
        let capped = inst(Resources::with_machines(2), &[1.0, 1.0, 1.0]);
        let p = balanced_k(&capped).unwrap();
        assert_eq!(p.groups(), &[vec![0, 2], vec![1]]);

        // k = 1 and k = 2 both overflow the capacity, so k = 3 it is.
        let tight = inst(Resources::with_capacity(1.0), &[0.6, 0.6, 0.6]);
        let p = balanced_k(&tight).unwrap();
        assert_eq!(p.num_machines(), 3);

        let impossible = inst(Resources::bounded(1.0, 1), &[0.6, 0.6]);
        assert_eq!(balanced_k(&impossible), Err(SolveError::Infeasible));
    }

    #[test]
    fn local_search_merges_small_machines_to_the_optimum() {
        let inst = inst(Resources::unbounded(), &[0.3, 0.3, 0.2]);
        let improved = local_improve(&inst, &Partition::singletons(3));
        let oracle = exact::solve(&inst).unwrap();
        assert_eq!(improved, oracle.partition);
        assert_eq!(improved.power(&inst), oracle.power);
    }

    #[test]
    fn local_search_rebalances_when_merging_is_impossible() {
        // x* = 1 rules out every merge; shifting the 0.3 evens the loads.
        let inst = inst(Resources::with_capacity(1.5), &[1.2, 0.9, 0.3]);
        let start = Partition::new(vec![vec![0, 2], vec![1]]);
        let improved = local_improve(&inst, &start);
        assert_eq!(improved.groups(), &[vec![0], vec![1, 2]]);
        assert!(improved.power(&inst) < start.power(&inst));
    }

    #[test]
    fn local_search_leaves_an_optimum_alone() {
        let inst = inst(Resources::unbounded(), &[0.7, 0.7, 0.2]);
        let oracle = exact::solve(&inst).unwrap().partition;
        assert_eq!(local_improve(&inst, &oracle), oracle);
    }
}

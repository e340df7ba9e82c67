//! Centralized cooperative-offload planning: path allocation by
//! availability, capacity-sized initial assignment, remaining-data growth
//! and reallocation away from the weakest path.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::delivery::{
    availability, delivery_prob_onehop, delivery_prob_path_with, path_capacity, DeliveryQuery,
    EstimatorOptions, PathSpec,
};
use crate::error::{Error, Result};
use crate::netgraph::{edge_key, Network, NodeId};

/// Sizes closer than this (relative to the item) are treated as equal.
const SIZE_EPS: f64 = 1e-9;

/// One allocated path and the data assigned to it.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub route: Vec<NodeId>,
    pub path: PathSpec,
    pub assigned: f64,
}

impl Allocation {
    pub fn new(network: &Network, route: Vec<NodeId>, assigned: f64) -> Result<Self> {
        let hops = network.route_params(&route).ok_or_else(|| {
            Error::Plan(format!("route {route:?} uses a pair with no contact edge"))
        })?;
        Ok(Self {
            route,
            path: PathSpec::new(hops)?,
            assigned,
        })
    }

    pub fn hops(&self) -> usize {
        self.route.len() - 1
    }

    pub fn capacity(&self) -> f64 {
        path_capacity(&self.path)
    }

    fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.route.windows(2).map(|w| edge_key(w[0], w[1]))
    }
}

/// Result of planning one data item.
#[derive(Debug, Clone, PartialEq)]
pub struct OffloadPlan {
    pub source: NodeId,
    pub destination: NodeId,
    pub allocations: Vec<Allocation>,
    pub total: f64,
    pub deadline: f64,
    pub joint_probability: f64,
    /// Probability of sending the whole item over the direct edge.
    pub direct_probability: f64,
    /// `false` means the item is sent directly.
    pub offloaded: bool,
}

impl OffloadPlan {
    pub fn to_file(&self) -> PlanFile {
        PlanFile {
            offloaded: self.offloaded,
            probability: self.joint_probability,
            allocations: self
                .allocations
                .iter()
                .map(|a| PlanAllocation {
                    route: a.route.iter().map(|n| n.0).collect(),
                    size: a.assigned,
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_file()).expect("plan serializes");
        s.push('\n');
        s
    }

    /// Data assigned to each route, in allocation order.
    pub fn sizes(&self) -> Vec<f64> {
        self.allocations.iter().map(|a| a.assigned).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanFile {
    pub offloaded: bool,
    pub probability: f64,
    pub allocations: Vec<PlanAllocation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanAllocation {
    pub route: Vec<usize>,
    pub size: f64,
}

/// Which size the runner-up path is evaluated at while reallocating.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunnerUpSize {
    /// Compare against the runner-up at its own assignment (same as the
    /// remaining-data loop).
    #[default]
    Own,
    /// Compare against the runner-up evaluated at the growing path's size.
    Leader,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HeuristicOptions {
    pub estimator: EstimatorOptions,
    pub reallocation_runner_up: RunnerUpSize,
}

/// Memoized path delivery probabilities for one deadline.
#[derive(Debug)]
pub struct ProbabilityCache {
    deadline: f64,
    estimator: EstimatorOptions,
    values: HashMap<(Vec<NodeId>, u64), f64>,
}

impl ProbabilityCache {
    pub fn new(deadline: f64, estimator: EstimatorOptions) -> Self {
        Self {
            deadline,
            estimator,
            values: HashMap::new(),
        }
    }

    pub fn deadline(&self) -> f64 {
        self.deadline
    }

    /// `P(T, size)` along the allocation's route; an empty segment is
    /// always delivered.
    pub fn prob(&mut self, alloc: &Allocation, size: f64) -> Result<f64> {
        if size <= 0.0 {
            return Ok(1.0);
        }
        let key = (alloc.route.clone(), size.to_bits());
        if let Some(p) = self.values.get(&key) {
            return Ok(*p);
        }
        let query = DeliveryQuery::new(size, self.deadline)?;
        let p = delivery_prob_path_with(&alloc.path, &query, &self.estimator)?;
        self.values.insert(key, p);
        Ok(p)
    }

    pub fn joint(&mut self, allocs: &[Allocation]) -> Result<f64> {
        let mut p = 1.0;
        for a in allocs {
            p *= self.prob(a, a.assigned)?;
        }
        Ok(p)
    }
}

/// Max-availability route from `u` to `v` avoiding `excluded` edges.
///
/// Label-setting search: the availability of each candidate route is
/// recomputed over the whole route, and the unsettled node with the highest
/// value is settled next.
pub fn dijkstra_max_q(
    network: &Network,
    u: NodeId,
    v: NodeId,
    deadline: f64,
    excluded: &BTreeSet<(NodeId, NodeId)>,
) -> Result<Option<Vec<NodeId>>> {
    if u == v {
        return Err(Error::Domain(format!(
            "source and destination are both {u}"
        )));
    }
    for n in [u, v] {
        if !network.contains(n) {
            return Err(Error::UnknownNode(n.0));
        }
    }
    let n = network.node_count();
    let mut label: Vec<Option<(f64, Vec<NodeId>)>> = vec![None; n];
    let mut settled = vec![false; n];
    label[u.0] = Some((1.0, vec![u]));
    loop {
        let mut best: Option<usize> = None;
        for i in 0..n {
            if settled[i] {
                continue;
            }
            let Some(cand) = &label[i] else { continue };
            let better = match best {
                None => true,
                Some(b) => {
                    let cur = label[b].as_ref().expect("labelled");
                    compare_labels(cand, cur) == Ordering::Less
                }
            };
            if better {
                best = Some(i);
            }
        }
        let Some(x) = best else {
            return Ok(None);
        };
        settled[x] = true;
        let (_, route) = label[x].clone().expect("labelled");
        if NodeId(x) == v {
            return Ok(Some(route));
        }
        for &y in network.neighbors(NodeId(x)) {
            if settled[y.0] || excluded.contains(&edge_key(NodeId(x), y)) {
                continue;
            }
            let mut cand_route = route.clone();
            cand_route.push(y);
            let hops = network
                .route_params(&cand_route)
                .expect("neighbor edges exist");
            let q = availability(&PathSpec::new(hops)?, deadline)?;
            let cand = (q, cand_route);
            let replace = match &label[y.0] {
                None => true,
                Some(cur) => compare_labels(&cand, cur) == Ordering::Less,
            };
            if replace {
                label[y.0] = Some(cand);
            }
        }
    }
}

/// Higher availability first, then fewer hops, then the smaller route.
fn compare_labels(a: &(f64, Vec<NodeId>), b: &(f64, Vec<NodeId>)) -> Ordering {
    b.0.total_cmp(&a.0)
        .then(a.1.len().cmp(&b.1.len()))
        .then_with(|| a.1.cmp(&b.1))
}

/// Availability of the direct edge, or 0 without one.
pub fn direct_availability(network: &Network, u: NodeId, v: NodeId, deadline: f64) -> Result<f64> {
    match network.edge(u, v) {
        Some(p) => availability(&PathSpec::single(*p)?, deadline),
        None => Ok(0.0),
    }
}

/// Find edge-disjoint routes in decreasing availability, each initially
/// carrying its capacity.
///
/// Stops when the best remaining route is less available than the direct
/// edge, when `v` is unreachable, or when the whole item is assigned. A
/// result consisting only of the direct edge is reported as empty: there is
/// nothing to offload.
pub fn allocate_paths(
    network: &Network,
    u: NodeId,
    v: NodeId,
    size: f64,
    deadline: f64,
) -> Result<Vec<Allocation>> {
    DeliveryQuery::new(size, deadline)?;
    let q_direct = direct_availability(network, u, v, deadline)?;
    let mut excluded = BTreeSet::new();
    let mut allocs: Vec<Allocation> = Vec::new();
    let mut assigned = 0.0;
    while size - assigned > SIZE_EPS * size {
        let Some(route) = dijkstra_max_q(network, u, v, deadline, &excluded)? else {
            break;
        };
        let mut alloc = Allocation::new(network, route, 0.0)?;
        if availability(&alloc.path, deadline)? < q_direct {
            break;
        }
        let remaining = size - assigned;
        alloc.assigned = if alloc.capacity() < remaining {
            alloc.capacity()
        } else {
            remaining
        };
        assigned += alloc.assigned;
        excluded.extend(alloc.edges());
        allocs.push(alloc);
    }
    if allocs.len() == 1 && allocs[0].hops() == 1 {
        allocs.clear();
    }
    Ok(allocs)
}

/// Next growth step for a path currently carrying `current`: up to the next
/// larger per-hop β until the largest β is reached, then by the capacity.
pub fn growth_step(path: &PathSpec, current: f64) -> f64 {
    let mut betas: Vec<f64> = path.hops().iter().map(|h| h.beta).collect();
    betas.sort_by(f64::total_cmp);
    let max_beta = *betas.last().expect("nonempty path");
    let tol = SIZE_EPS * max_beta.max(1.0);
    if current < max_beta - tol {
        if let Some(next) = betas.iter().find(|b| **b > current + tol) {
            return next - current;
        }
    }
    path_capacity(path)
}

/// Indices ordered by decreasing `P(T, assigned)`; ties go to fewer hops,
/// then the smaller route.
fn ranking(allocs: &[Allocation], cache: &mut ProbabilityCache) -> Result<Vec<(usize, f64)>> {
    let mut ranked = allocs
        .iter()
        .enumerate()
        .map(|(i, a)| Ok((i, cache.prob(a, a.assigned)?)))
        .collect::<Result<Vec<_>>>()?;
    ranked.sort_by(|(i, pi), (j, pj)| {
        pj.total_cmp(pi)
            .then(allocs[*i].hops().cmp(&allocs[*j].hops()))
            .then_with(|| allocs[*i].route.cmp(&allocs[*j].route))
    });
    Ok(ranked)
}

/// Grow the best path while it stays at least as likely as the runner-up,
/// until `remainder` is used up. Returns the unassigned leftover (zero).
fn distribute(
    allocs: &mut [Allocation],
    mut remainder: f64,
    scale: f64,
    runner_up: RunnerUpSize,
    cache: &mut ProbabilityCache,
) -> Result<()> {
    let tol = SIZE_EPS * scale;
    while remainder > tol {
        let ranked = ranking(allocs, cache)?;
        let p = ranked[0].0;
        let q = ranked.get(1).map(|r| r.0);
        let mut stepped = false;
        while remainder > tol {
            let pp = cache.prob(&allocs[p], allocs[p].assigned)?;
            let pq = match (q, runner_up) {
                (None, _) => f64::NEG_INFINITY,
                (Some(q), RunnerUpSize::Own) => cache.prob(&allocs[q], allocs[q].assigned)?,
                (Some(q), RunnerUpSize::Leader) => cache.prob(&allocs[q], allocs[p].assigned)?,
            };
            // The leader always takes at least one step so the loop advances.
            if stepped && pp < pq {
                break;
            }
            let step = growth_step(&allocs[p].path, allocs[p].assigned);
            if step >= remainder - tol {
                allocs[p].assigned += remainder;
                remainder = 0.0;
            } else {
                allocs[p].assigned += step;
                remainder -= step;
            }
            stepped = true;
        }
    }
    Ok(())
}

/// Assign whatever part of `size` the allocations do not yet carry.
pub fn assign_remaining(
    allocs: &mut [Allocation],
    size: f64,
    cache: &mut ProbabilityCache,
) -> Result<()> {
    if allocs.is_empty() {
        return Err(Error::Plan("no allocated paths to assign data to".into()));
    }
    let assigned: f64 = allocs.iter().map(|a| a.assigned).sum();
    let remainder = size - assigned;
    if remainder < -SIZE_EPS * size {
        return Err(Error::Plan(format!(
            "allocations carry {assigned}, more than the item size {size}"
        )));
    }
    distribute(allocs, remainder, size, RunnerUpSize::Own, cache)
}

/// Repeatedly fold the least likely allocation into the others, keeping the
/// change only while the joint probability strictly improves.
pub fn reallocate(
    mut allocs: Vec<Allocation>,
    runner_up: RunnerUpSize,
    cache: &mut ProbabilityCache,
) -> Result<Vec<Allocation>> {
    let scale: f64 = allocs.iter().map(|a| a.assigned).sum::<f64>().max(1.0);
    while allocs.len() > 1 {
        let ranked = ranking(&allocs, cache)?;
        let j = ranked.last().expect("nonempty").0;
        let mut trial = allocs.clone();
        let moved = trial.remove(j).assigned;
        distribute(&mut trial, moved, scale, runner_up, cache)?;
        if cache.joint(&allocs)? < cache.joint(&trial)? {
            allocs = trial;
        } else {
            break;
        }
    }
    Ok(allocs)
}

/// Plan sending `size` from `u` to the infrastructure within `deadline`.
pub fn plan_offload(network: &Network, u: NodeId, size: f64, deadline: f64) -> Result<OffloadPlan> {
    plan_offload_with(network, u, size, deadline, &HeuristicOptions::default())
}

pub fn plan_offload_with(
    network: &Network,
    u: NodeId,
    size: f64,
    deadline: f64,
    opts: &HeuristicOptions,
) -> Result<OffloadPlan> {
    if !network.contains(u) {
        return Err(Error::UnknownNode(u.0));
    }
    let v = network.infrastructure();
    if u == v {
        return Err(Error::Domain(
            "the infrastructure cannot offload to itself".into(),
        ));
    }
    let query = DeliveryQuery::new(size, deadline)?;
    let direct = network.edge(u, v).copied();
    let direct_probability = match &direct {
        Some(p) => delivery_prob_onehop(p, &query)?,
        None => 0.0,
    };
    let mut cache = ProbabilityCache::new(deadline, opts.estimator);
    let mut allocs = allocate_paths(network, u, v, size, deadline)?;
    if allocs.is_empty() && direct.is_none() {
        return Err(Error::Plan(format!(
            "node {u} has no path to the infrastructure"
        )));
    }
    let mut joint = f64::NEG_INFINITY;
    if !allocs.is_empty() {
        assign_remaining(&mut allocs, size, &mut cache)?;
        allocs = reallocate(allocs, opts.reallocation_runner_up, &mut cache)?;
        joint = cache.joint(&allocs)?;
    }
    let only_direct = allocs.len() == 1 && allocs[0].hops() == 1;
    let offload =
        !allocs.is_empty() && !only_direct && (joint > direct_probability || direct.is_none());
    if offload {
        return Ok(OffloadPlan {
            source: u,
            destination: v,
            allocations: allocs,
            total: size,
            deadline,
            joint_probability: joint,
            direct_probability,
            offloaded: true,
        });
    }
    Ok(OffloadPlan {
        source: u,
        destination: v,
        allocations: vec![Allocation::new(network, vec![u, v], size)?],
        total: size,
        deadline,
        joint_probability: direct_probability,
        direct_probability,
        offloaded: false,
    })
}

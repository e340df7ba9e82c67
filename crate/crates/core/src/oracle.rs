//! Exhaustive solver for small offloading instances: every set of
//! edge-disjoint routes and every split of the item on a size grid.

use std::collections::BTreeSet;

use crate::delivery::{delivery_prob_onehop, DeliveryQuery, EstimatorOptions};
use crate::error::{Error, Result};
use crate::heuristic::{Allocation, OffloadPlan, ProbabilityCache};
use crate::netgraph::{edge_key, Network, NodeId};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    /// Segment size step; `None` uses half the smallest β in the network.
    pub size_granularity: Option<f64>,
    pub max_paths: usize,
    pub max_hops: usize,
    pub estimator: EstimatorOptions,
    /// Upper bound on (route set, split) candidates.
    pub max_candidates: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            size_granularity: None,
            max_paths: 3,
            max_hops: 5,
            estimator: EstimatorOptions::default(),
            max_candidates: 10_000_000,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(g) = self.size_granularity {
            if !(g > 0.0) || !g.is_finite() {
                return Err(Error::Config(format!(
                    "size granularity must be positive, got {g}"
                )));
            }
        }
        if self.max_paths == 0 || self.max_hops == 0 || self.max_candidates == 0 {
            return Err(Error::Config("oracle caps must be positive".into()));
        }
        Ok(())
    }
}

/// Half the smallest β of any edge.
pub fn default_granularity(network: &Network) -> Option<f64> {
    network
        .edges()
        .map(|(_, _, p)| p.beta)
        .min_by(f64::total_cmp)
        .map(|b| b / 2.0)
}

type EdgeSet = BTreeSet<(NodeId, NodeId)>;

/// All simple routes from `u` to `v` with at most `max_hops` hops, ordered
/// by hop count and then lexicographically.
pub fn simple_routes(network: &Network, u: NodeId, v: NodeId, max_hops: usize) -> Vec<Vec<NodeId>> {
    fn walk(
        network: &Network,
        v: NodeId,
        max_hops: usize,
        route: &mut Vec<NodeId>,
        out: &mut Vec<Vec<NodeId>>,
    ) {
        let last = *route.last().expect("nonempty");
        if last == v {
            out.push(route.clone());
            return;
        }
        if route.len() > max_hops {
            return;
        }
        for &n in network.neighbors(last) {
            if !route.contains(&n) {
                route.push(n);
                walk(network, v, max_hops, route, out);
                route.pop();
            }
        }
    }
    let mut out = Vec::new();
    walk(network, v, max_hops, &mut vec![u], &mut out);
    out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    out
}

fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

/// Edge-disjoint route sets of size `1..=max_paths`, as index lists.
fn disjoint_sets(
    routes: &[Vec<NodeId>],
    max_paths: usize,
    units: u64,
    cap: u64,
) -> Result<Vec<Vec<usize>>> {
    let edges: Vec<EdgeSet> = routes
        .iter()
        .map(|r| r.windows(2).map(|w| edge_key(w[0], w[1])).collect())
        .collect();
    let mut sets = Vec::new();
    let mut candidates = 0u64;
    let mut stack: Vec<(Vec<usize>, EdgeSet)> = vec![(Vec::new(), BTreeSet::new())];
    while let Some((chosen, used)) = stack.pop() {
        let start = chosen.last().map_or(0, |i| i + 1);
        // Push in reverse so sets come out in index order.
        for i in (start..routes.len()).rev() {
            if edges[i].is_disjoint(&used) {
                let mut next = chosen.clone();
                next.push(i);
                if next.len() < max_paths {
                    let mut more = used.clone();
                    more.extend(edges[i].iter().copied());
                    stack.push((next.clone(), more));
                }
                let splits = binomial(units - 1, next.len() as u64 - 1);
                candidates = candidates.saturating_add(splits);
                if candidates > cap {
                    return Err(Error::InstanceTooLarge(format!(
                        "more than {cap} candidate plans"
                    )));
                }
                if splits > 0 {
                    sets.push(next);
                }
            }
        }
    }
    sets.sort();
    Ok(sets)
}

/// Visit every composition of `total` into `parts` positive integers.
fn for_each_composition(
    total: u64,
    parts: usize,
    mut f: impl FnMut(&[u64]) -> Result<()>,
) -> Result<()> {
    fn rec(
        left: u64,
        parts: usize,
        acc: &mut Vec<u64>,
        f: &mut dyn FnMut(&[u64]) -> Result<()>,
    ) -> Result<()> {
        if parts == 1 {
            acc.push(left);
            let r = f(acc);
            acc.pop();
            return r;
        }
        for first in 1..=left.saturating_sub(parts as u64 - 1) {
            acc.push(first);
            rec(left - first, parts - 1, acc, f)?;
            acc.pop();
        }
        Ok(())
    }
    if total < parts as u64 {
        return Ok(());
    }
    rec(total, parts, &mut Vec::with_capacity(parts), &mut f)
}

/// The best plan over all route sets and grid splits.
///
/// Sending the whole item over the direct edge is one of the candidates, so
/// the result is never worse than direct transmission.
pub fn brute_force_optimal(
    network: &Network,
    u: NodeId,
    size: f64,
    deadline: f64,
    config: &OracleConfig,
) -> Result<OffloadPlan> {
    config.validate()?;
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
    let g = match config.size_granularity {
        Some(g) => g,
        None => default_granularity(network)
            .ok_or_else(|| Error::Plan("network has no edges".into()))?,
    };
    let units_f = size / g;
    let units = units_f.round();
    if (units_f - units).abs() > 1e-9 * units_f.max(1.0) || units < 1.0 {
        return Err(Error::Config(format!(
            "item size {size} is not a positive multiple of the granularity {g}"
        )));
    }
    let units = units as u64;

    let routes = simple_routes(network, u, v, config.max_hops);
    if routes.is_empty() {
        return Err(Error::Plan(format!(
            "node {u} has no path to the infrastructure"
        )));
    }
    let allocs: Vec<Allocation> = routes
        .iter()
        .map(|r| Allocation::new(network, r.clone(), 0.0))
        .collect::<Result<_>>()?;
    let sets = disjoint_sets(&routes, config.max_paths, units, config.max_candidates)?;

    let mut cache = ProbabilityCache::new(deadline, config.estimator);
    // probs[route][k] = P(T, k·g), filled on demand.
    let mut probs: Vec<Vec<Option<f64>>> = vec![vec![None; units as usize + 1]; routes.len()];
    let mut best: Option<(f64, Vec<usize>, Vec<u64>)> = None;
    for set in &sets {
        for_each_composition(units, set.len(), |split| {
            let mut p = 1.0;
            for (&r, &k) in set.iter().zip(split) {
                let entry = &mut probs[r][k as usize];
                let pk = match entry {
                    Some(x) => *x,
                    None => {
                        let x = cache.prob(&allocs[r], k as f64 * g)?;
                        *entry = Some(x);
                        x
                    }
                };
                p *= pk;
                if p == 0.0 {
                    break;
                }
            }
            if best.as_ref().is_none_or(|(bp, _, _)| p > *bp) {
                best = Some((p, set.clone(), split.to_vec()));
            }
            Ok(())
        })?;
    }
    let (p, set, split) = best.expect("at least one route and split");
    let direct_probability = match network.edge(u, v) {
        Some(e) => delivery_prob_onehop(e, &query)?,
        None => 0.0,
    };
    let allocations: Vec<Allocation> = set
        .iter()
        .zip(&split)
        .map(|(&r, &k)| {
            let mut a = allocs[r].clone();
            a.assigned = if set.len() == 1 { size } else { k as f64 * g };
            a
        })
        .collect();
    let offloaded = !(allocations.len() == 1 && allocations[0].hops() == 1);
    Ok(OffloadPlan {
        source: u,
        destination: v,
        allocations,
        total: size,
        deadline,
        joint_probability: p,
        direct_probability,
        offloaded,
    })
}

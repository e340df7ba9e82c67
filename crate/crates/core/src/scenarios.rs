//! Small hand-built instances used by tests, benches and the CLI.

use rand::Rng;

use crate::contact_model::PairContactParams;
use crate::delivery::{delivery_prob_path, DeliveryQuery, PathSpec};
use crate::error::Result;
use crate::netgraph::{Network, NodeId};
use crate::seed::rng_from_seed;

/// Target probability of each relay path carrying half the item.
pub const TWO_RELAY_HALF_PROB: f64 = 0.71;
/// Target probability of each relay path (and the direct edge) carrying the
/// whole item.
pub const TWO_RELAY_FULL_PROB: f64 = 0.23;

/// Two disjoint relay routes `0 → 1 → 3` and `0 → 2 → 3` plus a weak direct
/// edge `0 → 3`; node 3 is the infrastructure.
#[derive(Debug, Clone)]
pub struct TwoRelayInstance {
    pub network: Network,
    pub source: NodeId,
    pub size: f64,
    pub deadline: f64,
    pub first_hop: PairContactParams,
    pub second_hop: PairContactParams,
    pub direct: PairContactParams,
}

const TWO_RELAY_SIZE: f64 = 20.0;

fn relay_prob(
    first: PairContactParams,
    second_lambda: f64,
    size: f64,
    deadline: f64,
) -> Result<f64> {
    let second = PairContactParams::new(second_lambda, 8.0, 10.0, 1.0)?;
    let path = PathSpec::new(vec![first, second])?;
    delivery_prob_path(&path, &DeliveryQuery::new(size, deadline)?)
}

/// Find `x` in `[lo, hi]` with `f(x) = target` for increasing `f`.
fn bisect(mut lo: f64, mut hi: f64, target: f64, f: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Contact rate of the second relay hop giving the half-size target at
/// `deadline`.
fn second_hop_rate(first: PairContactParams, deadline: f64) -> Result<f64> {
    bisect(1e-6, 10.0, TWO_RELAY_HALF_PROB, |l| {
        relay_prob(first, l, TWO_RELAY_SIZE / 2.0, deadline)
    })
}

/// The calibrated two-path instance.
///
/// The first relay hop is fast with a large β so it almost never limits.
/// The second hop's rate and the deadline are solved so a relay path
/// delivers half the item with probability 0.71 and the whole item with
/// 0.23; the direct edge is solved to deliver the whole item with 0.23.
pub fn two_relay_instance() -> Result<TwoRelayInstance> {
    let first = PairContactParams::new(10.0, 8.0, 50.0, 1.0)?;
    // Larger deadlines make the full-size probability larger at a fixed
    // half-size probability, so the deadline can be bisected too.
    let deadline = bisect(40.0, 400.0, TWO_RELAY_FULL_PROB, |t| {
        let l = second_hop_rate(first, t)?;
        relay_prob(first, l, TWO_RELAY_SIZE, t)
    })?;
    let second = PairContactParams::new(second_hop_rate(first, deadline)?, 8.0, 10.0, 1.0)?;
    // The direct edge moves the item in one contact, so P = 1 − e^{−λ(T − S/r)}.
    let direct_lambda = -(1.0 - TWO_RELAY_FULL_PROB).ln() / (deadline - TWO_RELAY_SIZE);
    let direct = PairContactParams::new(direct_lambda, 8.0, 25.0, 1.0)?;
    let (u, a, b, v) = (NodeId(0), NodeId(1), NodeId(2), NodeId(3));
    let network = Network::new(
        4,
        v,
        [
            (u, a, first),
            (a, v, second),
            (u, b, first),
            (b, v, second),
            (u, v, direct),
        ],
    )?;
    Ok(TwoRelayInstance {
        network,
        source: u,
        size: TWO_RELAY_SIZE,
        deadline,
        first_hop: first,
        second_hop: second,
        direct,
    })
}

/// One mobile node with a very hot, high-capacity link to infrastructure
/// and one relay.
pub fn hot_direct_instance() -> Result<Network> {
    let hot = PairContactParams::new(5.0, 4.0, 100.0, 1.0)?;
    let relay = PairContactParams::new(0.05, 6.0, 3.0, 1.0)?;
    Network::new(
        3,
        NodeId(2),
        [
            (NodeId(0), NodeId(2), hot),
            (NodeId(0), NodeId(1), relay),
            (NodeId(1), NodeId(2), relay),
        ],
    )
}

/// A small random planning instance.
#[derive(Debug, Clone)]
pub struct SmallInstance {
    pub network: Network,
    pub source: NodeId,
    pub size: f64,
    pub deadline: f64,
}

/// Random instance with five mobile nodes plus infrastructure (node 5).
///
/// The source (node 0) has at most three neighbours, so no plan uses more
/// than three disjoint routes. Every β is an integer in `2..=6` and at least
/// one edge has β = 2, so any size built from capacities and β steps lies on
/// the grid of half the smallest β. The item size is an integer no larger
/// than four times the smallest β.
pub fn random_small_instance(seed: u64) -> Result<SmallInstance> {
    let mut rng = rng_from_seed(seed);
    let infra = NodeId(5);
    loop {
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        for a in 0..5 {
            for b in a + 1..5 {
                if rng.random_bool(0.5) {
                    pairs.push((a, b));
                }
            }
            if rng.random_bool(0.6) {
                pairs.push((a, 5));
            }
        }
        let mut source_edges: Vec<usize> = (0..pairs.len()).filter(|&i| pairs[i].0 == 0).collect();
        while source_edges.len() > 3 {
            let k = rng.random_range(0..source_edges.len());
            pairs.remove(source_edges[k]);
            source_edges = (0..pairs.len()).filter(|&i| pairs[i].0 == 0).collect();
        }
        if pairs.is_empty() {
            continue;
        }
        let two = rng.random_range(0..pairs.len());
        let mut edges = Vec::with_capacity(pairs.len());
        for (i, &(a, b)) in pairs.iter().enumerate() {
            let beta = if i == two {
                2.0
            } else {
                rng.random_range(2..=6) as f64
            };
            let (lambda, alpha) = if b == 5 {
                (rng.random_range(0.005..0.05), rng.random_range(3.0..4.0))
            } else {
                (rng.random_range(0.01..0.2), rng.random_range(3.0..10.0))
            };
            edges.push((
                NodeId(a),
                NodeId(b),
                PairContactParams::new(lambda, alpha, beta, 1.0)?,
            ));
        }
        let network = Network::new(6, infra, edges)?;
        let reachable = crate::oracle::simple_routes(&network, NodeId(0), infra, 5);
        if reachable.is_empty() {
            continue;
        }
        let size = rng.random_range(2..=8) as f64;
        let deadline = rng.random_range(50.0..300.0);
        return Ok(SmallInstance {
            network,
            source: NodeId(0),
            size,
            deadline,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delivery::delivery_prob_onehop;

    #[test]
    fn two_relay_is_calibrated() {
        let inst = two_relay_instance().unwrap();
        let path = PathSpec::new(vec![inst.first_hop, inst.second_hop]).unwrap();
        let half =
            delivery_prob_path(&path, &DeliveryQuery::new(10.0, inst.deadline).unwrap()).unwrap();
        let full =
            delivery_prob_path(&path, &DeliveryQuery::new(20.0, inst.deadline).unwrap()).unwrap();
        assert!((half - 0.71).abs() < 1e-9, "{half}");
        assert!((full - 0.23).abs() < 1e-9, "{full}");
        let direct = delivery_prob_onehop(
            &inst.direct,
            &DeliveryQuery::new(20.0, inst.deadline).unwrap(),
        )
        .unwrap();
        assert!((direct - 0.23).abs() < 1e-9, "{direct}");
    }
}

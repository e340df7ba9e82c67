//! Per-node protocol for offloading with two-hop knowledge: criterion
//! assignment at the source, real-time adjustment when a holder meets a
//! peer, and assignment update after the actual transfer.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::contact_model::PairContactParams;
use crate::delivery::{
    availability, delivery_prob_path_with, path_capacity, DeliveryQuery, EstimatorOptions, PathSpec,
};
use crate::error::{Error, Result};
use crate::netgraph::{Network, NodeId};

/// Amounts below this are treated as zero.
pub const AMOUNT_EPS: f64 = 1e-9;

/// A route from the owning node to the destination: one or two hops.
pub type Route = Vec<NodeId>;
/// Data assigned per route.
pub type Assignment = BTreeMap<Route, f64>;

/// Contact parameters a node has learned from one neighbour.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnedTable {
    pub learned_at: f64,
    pub entries: BTreeMap<NodeId, PairContactParams>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TwoHopTable {
    /// Own edges.
    pub neighbors: BTreeMap<NodeId, PairContactParams>,
    /// Each neighbour's edge table as of the last exchange.
    pub learned: BTreeMap<NodeId, LearnedTable>,
}

/// Protocol state of one node for one task.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeState {
    pub id: NodeId,
    pub table: TwoHopTable,
    pub carried: f64,
    pub assignment: Assignment,
    pub provenance: BTreeSet<NodeId>,
    /// Data received in a contact can be forwarded only once it has fully
    /// arrived.
    pub ready_at: f64,
}

/// Task-wide protocol settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolConfig {
    pub source: NodeId,
    pub destination: NodeId,
    /// Absolute time by which the task must be delivered.
    pub deadline_at: f64,
    /// Learned entries older than this are ignored when building routes.
    pub staleness_horizon: f64,
    pub estimator: EstimatorOptions,
}

impl NodeState {
    /// A node that knows only its own edges.
    pub fn new(network: &Network, id: NodeId) -> Self {
        let neighbors = network
            .neighbors(id)
            .iter()
            .map(|n| (*n, *network.edge(id, *n).expect("neighbor edge")))
            .collect();
        Self {
            id,
            table: TwoHopTable {
                neighbors,
                learned: BTreeMap::new(),
            },
            carried: 0.0,
            assignment: Assignment::new(),
            provenance: BTreeSet::new(),
            ready_at: 0.0,
        }
    }

    /// A node that has already exchanged tables with every neighbour at
    /// time `learned_at`.
    pub fn with_learned_tables(network: &Network, id: NodeId, learned_at: f64) -> Self {
        let mut state = Self::new(network, id);
        for &n in network.neighbors(id) {
            let entries = network
                .neighbors(n)
                .iter()
                .map(|m| (*m, *network.edge(n, *m).expect("neighbor edge")))
                .collect();
            state.table.learned.insert(
                n,
                LearnedTable {
                    learned_at,
                    entries,
                },
            );
        }
        state
    }

    pub fn assignment_total(&self) -> f64 {
        self.assignment.values().sum()
    }

    /// Store what `other` knows about its own edges.
    pub fn learn_from(&mut self, other: &NodeState, now: f64) {
        self.table.learned.insert(
            other.id,
            LearnedTable {
                learned_at: now,
                entries: other.table.neighbors.clone(),
            },
        );
    }

    /// Routes of at most two hops to the destination under current
    /// knowledge. Relays never include the task source, nodes in
    /// `exclude`, or this node's provenance.
    pub fn routes(&self, now: f64, cfg: &ProtocolConfig, exclude: &[NodeId]) -> Vec<Route> {
        let d = cfg.destination;
        let mut out = Vec::new();
        if self.table.neighbors.contains_key(&d) {
            out.push(vec![self.id, d]);
        }
        for &w in self.table.neighbors.keys() {
            if w == d || w == cfg.source || exclude.contains(&w) || self.provenance.contains(&w) {
                continue;
            }
            let Some(t) = self.table.learned.get(&w) else {
                continue;
            };
            if now - t.learned_at > cfg.staleness_horizon {
                continue;
            }
            if t.entries.contains_key(&d) {
                out.push(vec![self.id, w, d]);
            }
        }
        out
    }

    /// Contact parameters along one of this node's routes.
    pub fn route_path(&self, route: &[NodeId]) -> Result<PathSpec> {
        let missing = || {
            Error::Protocol(format!(
                "node {} has no table entry for route {route:?}",
                self.id
            ))
        };
        if route.first() != Some(&self.id) || !(2..=3).contains(&route.len()) {
            return Err(Error::Protocol(format!(
                "route {route:?} does not start at node {} or is too long",
                self.id
            )));
        }
        let first = *self.table.neighbors.get(&route[1]).ok_or_else(missing)?;
        if route.len() == 2 {
            return PathSpec::single(first);
        }
        let second = *self
            .table
            .learned
            .get(&route[1])
            .and_then(|t| t.entries.get(&route[2]))
            .ok_or_else(missing)?;
        PathSpec::new(vec![first, second])
    }
}

/// Delivery probabilities of (node, route, size) at a fixed remaining time.
struct Evaluator {
    t_remaining: f64,
    estimator: EstimatorOptions,
    cache: HashMap<(Route, u64), f64>,
}

impl Evaluator {
    fn new(t_remaining: f64, estimator: EstimatorOptions) -> Self {
        Self {
            t_remaining,
            estimator,
            cache: HashMap::new(),
        }
    }

    fn prob(&mut self, state: &NodeState, route: &[NodeId], size: f64) -> Result<f64> {
        if size <= AMOUNT_EPS {
            return Ok(1.0);
        }
        if self.t_remaining <= 0.0 {
            return Ok(0.0);
        }
        let key = (route.to_vec(), size.to_bits());
        if let Some(p) = self.cache.get(&key) {
            return Ok(*p);
        }
        let path = state.route_path(route)?;
        let p = delivery_prob_path_with(
            &path,
            &DeliveryQuery::new(size, self.t_remaining)?,
            &self.estimator,
        )?;
        self.cache.insert(key, p);
        Ok(p)
    }

    fn joint(&mut self, state: &NodeState, assignment: &Assignment) -> Result<f64> {
        let mut p = 1.0;
        for (r, s) in assignment {
            p *= self.prob(state, r, *s)?;
        }
        Ok(p)
    }
}

/// Order routes so the earliest is the cheapest to strip: lowest delivery
/// probability first, ties to the longer then larger route.
fn strip_order(
    state: &NodeState,
    amounts: &[(Route, f64)],
    eval: &mut Evaluator,
) -> Result<Vec<Route>> {
    let mut keyed = amounts
        .iter()
        .map(|(r, s)| Ok((eval.prob(state, r, *s)?, r.clone())))
        .collect::<Result<Vec<_>>>()?;
    keyed.sort_by(|(pa, ra), (pb, rb)| {
        pa.total_cmp(pb)
            .then(rb.len().cmp(&ra.len()))
            .then_with(|| rb.cmp(ra))
    });
    Ok(keyed.into_iter().map(|(_, r)| r).collect())
}

fn drop_zeros(assignment: &mut Assignment) {
    assignment.retain(|_, s| *s > AMOUNT_EPS);
}

/// Initial split of `size` over the node's routes.
///
/// If the routes' total capacity is below `size` it is split in proportion
/// to capacity; otherwise routes are filled to capacity in decreasing
/// availability and the last one takes the remainder. Unused routes keep a
/// zero entry.
pub fn criterion_assignment(
    state: &NodeState,
    size: f64,
    now: f64,
    cfg: &ProtocolConfig,
) -> Result<Assignment> {
    let t_remaining = cfg.deadline_at - now;
    DeliveryQuery::new(size, t_remaining.max(0.0))?;
    let routes = state.routes(now, cfg, &[]);
    if routes.is_empty() {
        return Err(Error::Protocol(format!(
            "node {} has no route of at most two hops to the destination",
            state.id
        )));
    }
    let mut with_cap = routes
        .into_iter()
        .map(|r| {
            let path = state.route_path(&r)?;
            let q = availability(&path, t_remaining.max(0.0))?;
            Ok((r, path_capacity(&path), q))
        })
        .collect::<Result<Vec<_>>>()?;
    let total_cap: f64 = with_cap.iter().map(|(_, c, _)| c).sum();
    let mut out = Assignment::new();
    if total_cap < size {
        for (r, c, _) in with_cap {
            out.insert(r, size * c / total_cap);
        }
        return Ok(out);
    }
    with_cap.sort_by(|(ra, _, qa), (rb, _, qb)| {
        qb.total_cmp(qa)
            .then(ra.len().cmp(&rb.len()))
            .then_with(|| ra.cmp(rb))
    });
    let mut left = size;
    for (r, c, _) in with_cap {
        let take = c.min(left);
        out.insert(r, take);
        left -= take;
    }
    Ok(out)
}

/// One segment moved from a holder route to a peer route.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentMove {
    pub from: Route,
    pub to: Route,
    pub amount: f64,
}

/// Outcome of [`realtime_adjustment`].
#[derive(Debug, Clone, PartialEq)]
pub struct Adjustment {
    pub holder: NodeId,
    pub peer: NodeId,
    /// Total the holder plans to send.
    pub planned: f64,
    pub moves: Vec<SegmentMove>,
    pub holder_assignment: Assignment,
    pub peer_assignment: Assignment,
    /// Ratio of the estimated joint probability of both nodes' assignments
    /// after and before the moves (1 when nothing moves).
    pub gain: f64,
}

/// Best peer route for a segment of `amount` currently on `from`: the route
/// maximizing `P_k(S_k + amount) / (P_from(amount) · P_k(S_k))`.
#[allow(clippy::too_many_arguments)]
fn best_target(
    holder: &NodeState,
    peer: &NodeState,
    peer_assignment: &Assignment,
    peer_routes: &[Route],
    from: &[NodeId],
    amount: f64,
    eval_h: &mut Evaluator,
    eval_p: &mut Evaluator,
) -> Result<Option<(Route, f64)>> {
    let p_from = eval_h.prob(holder, from, amount)?;
    let mut best: Option<(Route, f64)> = None;
    for k in peer_routes {
        let s_k = peer_assignment.get(k).copied().unwrap_or(0.0);
        let after = eval_p.prob(peer, k, s_k + amount)?;
        let before = p_from * eval_p.prob(peer, k, s_k)?;
        let ratio = if before > 0.0 {
            after / before
        } else if after > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        if best.as_ref().is_none_or(|(_, b)| ratio > *b) {
            best = Some((k.clone(), ratio));
        }
    }
    Ok(best)
}

/// Decide how much of the holder's data to hand to `peer` and where the
/// peer should send it.
///
/// Segments the holder routed through the peer move first, each to the
/// peer route that suits it best, provided that does not lower the joint
/// estimate. Then, repeatedly, the holder's least likely segment moves to
/// the peer's best route for it while that strictly raises the estimate.
pub fn realtime_adjustment(
    holder: &NodeState,
    peer: &NodeState,
    now: f64,
    cfg: &ProtocolConfig,
) -> Result<Adjustment> {
    if peer.id == cfg.destination {
        return Err(Error::Contract(
            "real-time adjustment toward the destination".into(),
        ));
    }
    let t_remaining = cfg.deadline_at - now;
    let mut eval_h = Evaluator::new(t_remaining, cfg.estimator);
    let mut eval_p = Evaluator::new(t_remaining, cfg.estimator);
    let mut holder_assignment = holder.assignment.clone();
    drop_zeros(&mut holder_assignment);
    let mut peer_assignment = peer.assignment.clone();
    let peer_routes = peer.routes(now, cfg, &[holder.id]);
    let before =
        eval_h.joint(holder, &holder_assignment)? * eval_p.joint(peer, &peer_assignment)?;
    let mut moves = Vec::new();

    let apply = |from: &Route,
                 to: Route,
                 amount: f64,
                 holder_assignment: &mut Assignment,
                 peer_assignment: &mut Assignment,
                 moves: &mut Vec<SegmentMove>| {
        holder_assignment.remove(from);
        *peer_assignment.entry(to.clone()).or_insert(0.0) += amount;
        moves.push(SegmentMove {
            from: from.clone(),
            to,
            amount,
        });
    };

    let through: Vec<(Route, f64)> = holder_assignment
        .iter()
        .filter(|(r, _)| r.len() == 3 && r[1] == peer.id)
        .map(|(r, s)| (r.clone(), *s))
        .collect();
    for (from, amount) in through {
        if let Some((to, ratio)) = best_target(
            holder,
            peer,
            &peer_assignment,
            &peer_routes,
            &from,
            amount,
            &mut eval_h,
            &mut eval_p,
        )? {
            if ratio >= 1.0 {
                apply(
                    &from,
                    to,
                    amount,
                    &mut holder_assignment,
                    &mut peer_assignment,
                    &mut moves,
                );
            }
        }
    }

    // Segments already judged not worth moving are not retried.
    let mut kept: BTreeSet<Route> = BTreeSet::new();
    loop {
        let candidates: Vec<(Route, f64)> = holder_assignment
            .iter()
            .filter(|(r, _)| !kept.contains(*r))
            .map(|(r, s)| (r.clone(), *s))
            .collect();
        let Some(j) = strip_order(holder, &candidates, &mut eval_h)?
            .into_iter()
            .next()
        else {
            break;
        };
        let amount = holder_assignment[&j];
        let target = best_target(
            holder,
            peer,
            &peer_assignment,
            &peer_routes,
            &j,
            amount,
            &mut eval_h,
            &mut eval_p,
        )?;
        match target {
            Some((to, ratio)) if ratio > 1.0 => {
                apply(
                    &j,
                    to,
                    amount,
                    &mut holder_assignment,
                    &mut peer_assignment,
                    &mut moves,
                );
            }
            _ => {
                kept.insert(j);
                break;
            }
        }
    }

    let after = eval_h.joint(holder, &holder_assignment)? * eval_p.joint(peer, &peer_assignment)?;
    let gain = if moves.is_empty() {
        1.0
    } else if before > 0.0 {
        after / before
    } else if after > 0.0 {
        f64::INFINITY
    } else {
        1.0
    };
    Ok(Adjustment {
        holder: holder.id,
        peer: peer.id,
        planned: moves.iter().map(|m| m.amount).sum(),
        moves,
        holder_assignment,
        peer_assignment,
        gain,
    })
}

/// Apply an adjustment after `actual` of the planned amount was sent.
///
/// The sender gives up `actual` from the moved segments, least likely
/// first; the receiver drops the shortfall from the newly added amounts,
/// least likely first. Each side records the other as provenance.
pub fn assignment_update(
    sender: &mut NodeState,
    receiver: &mut NodeState,
    adjustment: &Adjustment,
    actual: f64,
    now: f64,
    cfg: &ProtocolConfig,
) -> Result<()> {
    if sender.id != adjustment.holder || receiver.id != adjustment.peer {
        return Err(Error::Contract(
            "adjustment applied to the wrong pair of nodes".into(),
        ));
    }
    if !(actual >= 0.0) || actual > adjustment.planned + AMOUNT_EPS {
        return Err(Error::Contract(format!(
            "actual transfer {actual} outside [0, planned {}]",
            adjustment.planned
        )));
    }
    let actual = actual.min(adjustment.planned);
    let t_remaining = cfg.deadline_at - now;
    let mut eval = Evaluator::new(t_remaining, cfg.estimator);

    let moved: Vec<(Route, f64)> = adjustment
        .moves
        .iter()
        .map(|m| (m.from.clone(), m.amount))
        .collect();
    let mut left = actual;
    for r in strip_order(sender, &moved, &mut eval)? {
        if left <= AMOUNT_EPS {
            break;
        }
        let amount: f64 = moved.iter().filter(|(m, _)| *m == r).map(|(_, a)| a).sum();
        let entry = sender.assignment.entry(r).or_insert(0.0);
        let take = amount.min(left).min(*entry);
        *entry -= take;
        left -= take;
    }
    sender.carried -= actual;

    let mut added: BTreeMap<Route, f64> = BTreeMap::new();
    for m in &adjustment.moves {
        *added.entry(m.to.clone()).or_insert(0.0) += m.amount;
        *receiver.assignment.entry(m.to.clone()).or_insert(0.0) += m.amount;
    }
    let mut eval = Evaluator::new(t_remaining, cfg.estimator);
    let current: Vec<(Route, f64)> = added
        .keys()
        .map(|r| (r.clone(), receiver.assignment[r]))
        .collect();
    let mut shortfall = adjustment.planned - actual;
    for r in strip_order(receiver, &current, &mut eval)? {
        if shortfall <= AMOUNT_EPS {
            break;
        }
        let take = added[&r].min(shortfall);
        *receiver.assignment.get_mut(&r).expect("added route") -= take;
        shortfall -= take;
    }
    receiver.carried += actual;

    drop_zeros(&mut sender.assignment);
    drop_zeros(&mut receiver.assignment);
    sender.provenance.insert(receiver.id);
    receiver.provenance.insert(sender.id);
    Ok(())
}

/// Hand `amount` to the destination, taking it from the direct route first
/// and then from the least likely routes.
fn deliver(
    holder: &mut NodeState,
    dest: &mut NodeState,
    amount: f64,
    now: f64,
    cfg: &ProtocolConfig,
) -> Result<()> {
    let direct = vec![holder.id, dest.id];
    let mut left = amount;
    if let Some(s) = holder.assignment.get_mut(&direct) {
        let take = s.min(left);
        *s -= take;
        left -= take;
    }
    let entries: Vec<(Route, f64)> = holder
        .assignment
        .iter()
        .map(|(r, s)| (r.clone(), *s))
        .collect();
    let mut eval = Evaluator::new(cfg.deadline_at - now, cfg.estimator);
    for r in strip_order(holder, &entries, &mut eval)? {
        if left <= AMOUNT_EPS {
            break;
        }
        let s = holder.assignment.get_mut(&r).expect("listed route");
        let take = s.min(left);
        *s -= take;
        left -= take;
    }
    holder.carried -= amount;
    if holder.carried < AMOUNT_EPS {
        holder.carried = 0.0;
        holder.assignment.clear();
    }
    drop_zeros(&mut holder.assignment);
    dest.carried += amount;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContactKind {
    /// Tables exchanged, no data moved.
    Exchange,
    /// Data moved between two mobile nodes.
    Relay,
    /// Data handed to the destination.
    Delivery,
}

impl ContactKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ContactKind::Exchange => "exchange",
            ContactKind::Relay => "relay",
            ContactKind::Delivery => "deliver",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContactOutcome {
    pub kind: ContactKind,
    /// Sender and receiver of the transfer, if any.
    pub transfer: Option<(NodeId, NodeId)>,
    pub planned: f64,
    pub actual: f64,
    /// When the transferred data has fully arrived.
    pub completes_at: f64,
}

impl ContactOutcome {
    fn exchange(now: f64) -> Self {
        Self {
            kind: ContactKind::Exchange,
            transfer: None,
            planned: 0.0,
            actual: 0.0,
            completes_at: now,
        }
    }
}

/// May `from` hand data to `to`?
fn may_send(from: &NodeState, to: &NodeState, now: f64, cfg: &ProtocolConfig) -> bool {
    from.carried > AMOUNT_EPS
        && now >= from.ready_at
        && to.id != cfg.source
        && !from.provenance.contains(&to.id)
        && !to.provenance.contains(&from.id)
}

/// Handle one contact between `a` and `b` with `capacity` data units.
pub fn on_contact(
    a: &mut NodeState,
    b: &mut NodeState,
    capacity: f64,
    now: f64,
    cfg: &ProtocolConfig,
) -> Result<ContactOutcome> {
    if !(capacity >= 0.0) {
        return Err(Error::Contract(format!(
            "contact capacity {capacity} is negative"
        )));
    }
    let rate = a
        .table
        .neighbors
        .get(&b.id)
        .map(|p| p.rate)
        .ok_or_else(|| {
            Error::Protocol(format!("nodes {} and {} are not neighbours", a.id, b.id))
        })?;
    let a_view = (a.id, a.table.neighbors.clone());
    a.learn_from(b, now);
    b.table.learned.insert(
        a_view.0,
        LearnedTable {
            learned_at: now,
            entries: a_view.1,
        },
    );
    if now >= cfg.deadline_at {
        return Ok(ContactOutcome::exchange(now));
    }

    if a.id == cfg.destination || b.id == cfg.destination {
        let (holder, dest) = if b.id == cfg.destination {
            (a, b)
        } else {
            (b, a)
        };
        if holder.carried <= AMOUNT_EPS || capacity <= 0.0 || now < holder.ready_at {
            return Ok(ContactOutcome::exchange(now));
        }
        let amount = holder.carried.min(capacity);
        deliver(holder, dest, amount, now, cfg)?;
        return Ok(ContactOutcome {
            kind: ContactKind::Delivery,
            transfer: Some((holder.id, dest.id)),
            planned: amount,
            actual: amount,
            completes_at: now + amount / rate,
        });
    }

    let ab = if may_send(a, b, now, cfg) {
        Some(realtime_adjustment(a, b, now, cfg)?)
    } else {
        None
    };
    let ba = if may_send(b, a, now, cfg) {
        Some(realtime_adjustment(b, a, now, cfg)?)
    } else {
        None
    };
    let chosen = match (ab, ba) {
        (None, None) => None,
        (Some(x), None) | (None, Some(x)) => Some(x),
        (Some(x), Some(y)) => {
            // Larger gain sends; on a tie the lower id sends.
            if x.gain > y.gain || (x.gain == y.gain && a.id < b.id) {
                Some(x)
            } else {
                Some(y)
            }
        }
    };
    let Some(adj) = chosen else {
        return Ok(ContactOutcome::exchange(now));
    };
    if adj.planned <= AMOUNT_EPS {
        return Ok(ContactOutcome::exchange(now));
    }
    let actual = adj.planned.min(capacity);
    let (sender, receiver) = if adj.holder == a.id { (a, b) } else { (b, a) };
    assignment_update(sender, receiver, &adj, actual, now, cfg)?;
    let completes_at = now + actual / rate;
    receiver.ready_at = receiver.ready_at.max(completes_at);
    Ok(ContactOutcome {
        kind: ContactKind::Relay,
        transfer: Some((sender.id, receiver.id)),
        planned: adj.planned,
        actual,
        completes_at,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgraph::{generate_synthetic, SyntheticConfig};
    use crate::seed::rng_from_seed;
    use rand::Rng;

    fn p(lambda: f64, beta: f64) -> PairContactParams {
        PairContactParams::new(lambda, 6.0, beta, 1.0).unwrap()
    }

    fn cfg(source: usize, destination: usize, deadline_at: f64) -> ProtocolConfig {
        ProtocolConfig {
            source: NodeId(source),
            destination: NodeId(destination),
            deadline_at,
            staleness_horizon: deadline_at,
            estimator: EstimatorOptions::default(),
        }
    }

    fn amounts(a: &Assignment, routes: &[&[usize]]) -> Vec<f64> {
        routes
            .iter()
            .map(|r| {
                let r: Route = r.iter().map(|i| NodeId(*i)).collect();
                a.get(&r).copied().unwrap_or(0.0)
            })
            .collect()
    }

    /// Source 0, relays 1 and 2, infrastructure 3.
    fn diamond(direct: PairContactParams, r1: PairContactParams, r2: PairContactParams) -> Network {
        Network::new(
            4,
            NodeId(3),
            [
                (NodeId(0), NodeId(3), direct),
                (NodeId(0), NodeId(1), r1),
                (NodeId(1), NodeId(3), r1),
                (NodeId(0), NodeId(2), r2),
                (NodeId(2), NodeId(3), r2),
            ],
        )
        .unwrap()
    }

    #[test]
    fn criterion_splits_by_capacity_when_short() {
        let net = Network::new(
            3,
            NodeId(2),
            [
                (NodeId(0), NodeId(2), p(0.1, 2.0)),
                (NodeId(0), NodeId(1), p(0.1, 3.0)),
                (NodeId(1), NodeId(2), p(0.1, 3.0)),
            ],
        )
        .unwrap();
        let s = NodeState::with_learned_tables(&net, NodeId(0), 0.0);
        let a = criterion_assignment(&s, 10.0, 0.0, &cfg(0, 2, 100.0)).unwrap();
        let got = amounts(&a, &[&[0, 2], &[0, 1, 2]]);
        assert!(
            (got[0] - 4.0).abs() < 1e-12 && (got[1] - 6.0).abs() < 1e-12,
            "{got:?}"
        );
    }

    #[test]
    fn criterion_fills_best_routes_first() {
        let net = diamond(p(0.5, 5.0), p(0.3, 4.0), p(0.1, 3.0));
        let s = NodeState::with_learned_tables(&net, NodeId(0), 0.0);
        let a = criterion_assignment(&s, 7.0, 0.0, &cfg(0, 3, 50.0)).unwrap();
        assert_eq!(
            amounts(&a, &[&[0, 3], &[0, 1, 3], &[0, 2, 3]]),
            vec![5.0, 2.0, 0.0]
        );
        assert_eq!(a.len(), 3);
    }

    #[test]
    fn criterion_single_route_and_no_route() {
        let net = Network::new(2, NodeId(1), [(NodeId(0), NodeId(1), p(0.1, 2.0))]).unwrap();
        let s = NodeState::with_learned_tables(&net, NodeId(0), 0.0);
        let a = criterion_assignment(&s, 3.0, 0.0, &cfg(0, 1, 50.0)).unwrap();
        assert_eq!(amounts(&a, &[&[0, 1]]), vec![3.0]);

        // Three hops away: nothing within two hops.
        let far = Network::new(
            4,
            NodeId(3),
            [
                (NodeId(0), NodeId(1), p(0.1, 2.0)),
                (NodeId(1), NodeId(2), p(0.1, 2.0)),
                (NodeId(2), NodeId(3), p(0.1, 2.0)),
            ],
        )
        .unwrap();
        let s = NodeState::with_learned_tables(&far, NodeId(0), 0.0);
        assert!(matches!(
            criterion_assignment(&s, 3.0, 0.0, &cfg(0, 3, 50.0)),
            Err(Error::Protocol(_))
        ));
    }

    #[test]
    fn stale_tables_hide_relays() {
        let net = diamond(p(0.1, 2.0), p(0.1, 2.0), p(0.1, 2.0));
        let s = NodeState::with_learned_tables(&net, NodeId(0), 0.0);
        let mut c = cfg(0, 3, 100.0);
        assert_eq!(s.routes(5.0, &c, &[]).len(), 3);
        c.staleness_horizon = 1.0;
        assert_eq!(s.routes(5.0, &c, &[]), vec![vec![NodeId(0), NodeId(3)]]);
    }

    #[test]
    fn receiver_strips_shortfall_from_weakest_route() {
        // Receiver 1 reaches 3 directly (strong) or via 2 (weak).
        let net = Network::new(
            4,
            NodeId(3),
            [
                (NodeId(0), NodeId(1), p(0.5, 20.0)),
                (NodeId(0), NodeId(3), p(0.01, 2.0)),
                (NodeId(1), NodeId(3), p(0.5, 10.0)),
                (NodeId(1), NodeId(2), p(0.01, 3.0)),
                (NodeId(2), NodeId(3), p(0.01, 3.0)),
            ],
        )
        .unwrap();
        let c = cfg(0, 3, 60.0);
        let mut sender = NodeState::with_learned_tables(&net, NodeId(0), 0.0);
        let mut receiver = NodeState::with_learned_tables(&net, NodeId(1), 0.0);
        sender.carried = 10.0;
        let from = vec![NodeId(0), NodeId(1), NodeId(3)];
        sender.assignment.insert(from.clone(), 10.0);
        let strong = vec![NodeId(1), NodeId(3)];
        let weak = vec![NodeId(1), NodeId(2), NodeId(3)];
        let adj = Adjustment {
            holder: NodeId(0),
            peer: NodeId(1),
            planned: 10.0,
            moves: vec![
                SegmentMove {
                    from: from.clone(),
                    to: strong.clone(),
                    amount: 7.0,
                },
                SegmentMove {
                    from: from.clone(),
                    to: weak.clone(),
                    amount: 3.0,
                },
            ],
            holder_assignment: Assignment::new(),
            peer_assignment: Assignment::new(),
            gain: 1.0,
        };
        assignment_update(&mut sender, &mut receiver, &adj, 6.0, 1.0, &c).unwrap();
        assert_eq!(
            amounts(&receiver.assignment, &[&[1, 3], &[1, 2, 3]]),
            vec![6.0, 0.0]
        );
        assert_eq!(receiver.carried, 6.0);
        assert_eq!(sender.carried, 4.0);
        assert_eq!(sender.assignment_total(), 4.0);
        assert!(sender.provenance.contains(&NodeId(1)) && receiver.provenance.contains(&NodeId(0)));

        let err = assignment_update(&mut sender, &mut receiver, &adj, 11.0, 1.0, &c);
        assert!(matches!(err, Err(Error::Contract(_))));
    }

    #[test]
    fn full_transfer_moves_exactly_the_planned_segments() {
        let inst = crate::scenarios::two_relay_instance().unwrap();
        let c = ProtocolConfig {
            source: inst.source,
            destination: NodeId(3),
            deadline_at: inst.deadline,
            staleness_horizon: inst.deadline,
            estimator: EstimatorOptions::default(),
        };
        let mut src = NodeState::with_learned_tables(&inst.network, inst.source, 0.0);
        src.carried = inst.size;
        src.assignment = criterion_assignment(&src, inst.size, 0.0, &c).unwrap();
        let mut relay = NodeState::with_learned_tables(&inst.network, NodeId(1), 0.0);
        let adj = realtime_adjustment(&src, &relay, 1.0, &c).unwrap();
        assert!(adj.gain >= 1.0);
        let out = on_contact(&mut src, &mut relay, 1e6, 1.0, &c).unwrap();
        assert_eq!(out.kind, ContactKind::Relay);
        assert!((out.actual - adj.planned).abs() < 1e-12);
        assert_eq!(
            relay.assignment,
            adj.peer_assignment
                .into_iter()
                .filter(|(_, s)| *s > AMOUNT_EPS)
                .collect()
        );
        let mut expect = adj.holder_assignment;
        drop_zeros(&mut expect);
        assert_eq!(src.assignment, expect);
        assert!((src.carried + relay.carried - inst.size).abs() < 1e-9);
    }

    #[test]
    fn no_backflow_and_delivery() {
        let net = diamond(p(0.01, 2.0), p(0.5, 5.0), p(0.5, 5.0));
        let c = cfg(0, 3, 100.0);
        let mut src = NodeState::with_learned_tables(&net, NodeId(0), 0.0);
        src.carried = 4.0;
        src.assignment = criterion_assignment(&src, 4.0, 0.0, &c).unwrap();
        let mut r1 = NodeState::with_learned_tables(&net, NodeId(1), 0.0);
        let mut dest = NodeState::with_learned_tables(&net, NodeId(3), 0.0);
        let first = on_contact(&mut src, &mut r1, 100.0, 1.0, &c).unwrap();
        assert_eq!(first.transfer, Some((NodeId(0), NodeId(1))));
        assert!(r1.carried > 0.0);

        // Meeting again moves nothing, in either direction.
        let before = (src.carried, r1.carried);
        let again = on_contact(&mut r1, &mut src, 100.0, 2.0, &c).unwrap();
        assert_eq!(again.kind, ContactKind::Exchange);
        assert_eq!((src.carried, r1.carried), before);

        let held = r1.carried;
        let d = on_contact(&mut dest, &mut r1, 1.5, 10.0, &c).unwrap();
        assert_eq!(d.kind, ContactKind::Delivery);
        assert_eq!(d.actual, 1.5_f64.min(held));
        assert!((r1.carried - (held - d.actual)).abs() < 1e-12);
        assert!((r1.assignment_total() - r1.carried).abs() < 1e-9);
        assert_eq!(dest.carried, d.actual);

        // Nothing moves after the deadline.
        let late = on_contact(&mut src, &mut dest, 100.0, 100.0, &c).unwrap();
        assert_eq!(late.kind, ContactKind::Exchange);
    }

    #[test]
    fn random_contacts_keep_invariants() {
        let net = generate_synthetic(&SyntheticConfig {
            n: 20,
            avg_degree: 5.0,
            max_degree: 8,
            seed: 3,
            ..SyntheticConfig::default()
        })
        .unwrap();
        let edges: Vec<(NodeId, NodeId, PairContactParams)> =
            net.edges().map(|(a, b, p)| (a, b, *p)).collect();
        let dest = net.infrastructure();
        let mut rng = rng_from_seed(11);
        for task in 0..10 {
            let source = NodeId(task);
            let c = ProtocolConfig {
                source,
                destination: dest,
                deadline_at: 400.0,
                staleness_horizon: 400.0,
                estimator: EstimatorOptions::default(),
            };
            let mut states: Vec<NodeState> = net
                .nodes()
                .map(|n| NodeState::with_learned_tables(&net, n, 0.0))
                .collect();
            let size = 20.0;
            states[source.0].carried = size;
            states[source.0].assignment =
                criterion_assignment(&states[source.0], size, 0.0, &c).unwrap();
            let mut now = 0.0;
            for _ in 0..300 {
                now += rng.random_range(0.0..1.0);
                let (a, b, e) = edges[rng.random_range(0..edges.len())];
                let cap = e.beta * rng.random_range(1.0..2.0);
                let (lo, hi) = (a.0.min(b.0), a.0.max(b.0));
                let (left, right) = states.split_at_mut(hi);
                let (x, y) = (&mut left[lo], &mut right[0]);
                let prov = (x.provenance.clone(), y.provenance.clone());
                let out = on_contact(x, y, cap, now, &c).unwrap();
                if let Some((s, r)) = out.transfer {
                    assert!(out.actual <= cap + 1e-12 && out.actual <= out.planned + 1e-12);
                    if r != dest {
                        assert_ne!(r, source);
                        let sender_prov = if s == x.id { &prov.0 } else { &prov.1 };
                        assert!(!sender_prov.contains(&r));
                    }
                }
                let total: f64 = states.iter().map(|s| s.carried).sum();
                assert!((total - size).abs() < 1e-9, "mass {total}");
                for s in &states {
                    if s.id == dest {
                        continue;
                    }
                    assert!((s.assignment_total() - s.carried).abs() < 1e-9);
                    for r in s.assignment.keys() {
                        assert!(r.len() <= 3 && r.last() == Some(&dest) && r[0] == s.id);
                    }
                }
            }
        }
    }
}

//! Seeded Monte Carlo contact simulation: a path-level oracle for the
//! delivery estimator and whole-network runs of the offloading strategies.

use std::cell::OnceCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contact_model::{sample_contacts_with, ContactEvent, PairContactParams};
use crate::delivery::{DeliveryQuery, EstimatorOptions, PathSpec};
use crate::distributed::{
    criterion_assignment, on_contact, ContactKind, NodeState, ProtocolConfig,
};
use crate::error::{Error, Result};
use crate::heuristic::{plan_offload_with, HeuristicOptions};
use crate::netgraph::{Network, NodeId};
use crate::seed::{derive_seed, rng_from_seed, stream_rng};

/// Relative slack when deciding that an item has fully arrived.
const DONE_EPS: f64 = 1e-9;

/// Move `size` hop by hop over the given contact lists, starting at time 0.
///
/// A hop may only use contacts that start after the item has fully arrived
/// at its sender; each contact carries `min(remaining, duration·rate)`,
/// cut short at the deadline. Returns the arrival time at the last node.
fn traverse<'a>(
    hops: impl IntoIterator<Item = (f64, &'a [ContactEvent])>,
    size: f64,
    deadline: f64,
) -> Option<f64> {
    let mut arrival = 0.0;
    for (rate, contacts) in hops {
        arrival = cross(contacts, rate, size, arrival, deadline)?;
    }
    Some(arrival)
}

/// Move `size` over one hop using contacts that start at or after `ready`.
fn cross(
    contacts: &[ContactEvent],
    rate: f64,
    size: f64,
    ready: f64,
    deadline: f64,
) -> Option<f64> {
    let mut remaining = size;
    for c in contacts.iter().skip_while(|c| c.start < ready) {
        if c.start >= deadline {
            break;
        }
        let cap = c.duration.min(deadline - c.start) * rate;
        let take = remaining.min(cap);
        remaining -= take;
        if remaining <= DONE_EPS * size {
            return Some(c.start + take / rate);
        }
    }
    None
}

/// First contact on `contacts` usable from time `ready`.
fn next_start(contacts: &[ContactEvent], ready: f64, deadline: f64) -> Option<f64> {
    contacts
        .iter()
        .map(|c| c.start)
        .find(|s| *s >= ready)
        .filter(|s| *s < deadline)
}

/// Empirical probability that `size` crosses `path` within `deadline`.
///
/// Each run samples every hop's contact process independently over
/// `[0, deadline)`; run `i` uses streams derived from `(seed, i)`, so the
/// result does not depend on the number of worker threads.
pub fn run_monte_carlo_delivery(
    path: &PathSpec,
    size: f64,
    deadline: f64,
    runs: u64,
    seed: u64,
) -> Result<f64> {
    if runs == 0 {
        return Err(Error::Config("at least one run is required".into()));
    }
    DeliveryQuery::new(size, deadline)?;
    if deadline == 0.0 {
        return Ok(0.0);
    }
    let successes: u64 = (0..runs)
        .into_par_iter()
        .map(|run| {
            let base = derive_seed(seed, run);
            let contacts: Vec<Vec<ContactEvent>> = path
                .hops()
                .iter()
                .enumerate()
                .map(|(i, h)| {
                    sample_contacts_with(&mut stream_rng(base, i as u64), h, 0.0, deadline)
                })
                .collect();
            let hops = path
                .hops()
                .iter()
                .zip(&contacts)
                .map(|(h, c)| (h.rate, c.as_slice()));
            u64::from(traverse(hops, size, deadline).is_some())
        })
        .sum();
    Ok(successes as f64 / runs as f64)
}

/// One contact realization of a whole network over `[0, horizon)`, sampled
/// lazily per edge from `(seed, edge index)`.
pub struct Realization<'n> {
    edges: Vec<(NodeId, NodeId, &'n PairContactParams)>,
    seed: u64,
    horizon: f64,
    cells: Vec<OnceCell<Vec<ContactEvent>>>,
}

/// A contact on a given edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimelineContact {
    pub start: f64,
    pub duration: f64,
    pub edge: usize,
}

impl<'n> Realization<'n> {
    pub fn new(network: &'n Network, seed: u64, horizon: f64) -> Self {
        let edges: Vec<_> = network.edges().collect();
        let cells = (0..edges.len()).map(|_| OnceCell::new()).collect();
        Self {
            edges,
            seed,
            horizon,
            cells,
        }
    }

    pub fn edge(&self, index: usize) -> (NodeId, NodeId, &'n PairContactParams) {
        self.edges[index]
    }

    pub fn contacts(&self, index: usize) -> &[ContactEvent] {
        self.cells[index].get_or_init(|| {
            let mut rng = stream_rng(self.seed, index as u64);
            sample_contacts_with(&mut rng, self.edges[index].2, 0.0, self.horizon)
        })
    }

    /// Every contact of every edge in start order.
    pub fn timeline(&self) -> Vec<TimelineContact> {
        let mut all: Vec<TimelineContact> = (0..self.edges.len())
            .flat_map(|e| {
                self.contacts(e).iter().map(move |c| TimelineContact {
                    start: c.start,
                    duration: c.duration,
                    edge: e,
                })
            })
            .collect();
        all.sort_by(|a, b| a.start.total_cmp(&b.start).then(a.edge.cmp(&b.edge)));
        all
    }
}

/// One data item to send to the infrastructure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransmissionTask {
    pub id: usize,
    pub source: NodeId,
    pub size: f64,
    /// Time allowed after release.
    pub deadline: f64,
    pub release: f64,
}

impl TransmissionTask {
    pub fn validate(&self, network: &Network) -> Result<()> {
        if !(self.size > 0.0) || !self.size.is_finite() {
            return Err(Error::Domain(format!(
                "task {} size must be positive",
                self.id
            )));
        }
        if !(self.deadline > 0.0) || !self.deadline.is_finite() {
            return Err(Error::Domain(format!(
                "task {} deadline must be positive",
                self.id
            )));
        }
        if !network.contains(self.source) {
            return Err(Error::UnknownNode(self.source.0));
        }
        if self.source == network.infrastructure() {
            return Err(Error::Domain(format!(
                "task {} starts at the infrastructure",
                self.id
            )));
        }
        Ok(())
    }
}

/// How tasks are drawn: sources uniformly over mobile nodes, size and
/// deadline uniformly from the grids, release uniformly in the window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskGrid {
    pub count: usize,
    pub sizes: Vec<f64>,
    pub deadlines: Vec<f64>,
    #[serde(default)]
    pub release_window: f64,
}

pub fn generate_tasks(
    network: &Network,
    grid: &TaskGrid,
    seed: u64,
) -> Result<Vec<TransmissionTask>> {
    if grid.count == 0 || grid.sizes.is_empty() || grid.deadlines.is_empty() {
        return Err(Error::Config("the task grid is empty".into()));
    }
    if !(grid.release_window >= 0.0) {
        return Err(Error::Config("release window must be nonnegative".into()));
    }
    let sources: Vec<NodeId> = network.mobile_nodes().collect();
    if sources.is_empty() {
        return Err(Error::Config("the network has no mobile nodes".into()));
    }
    let mut rng = rng_from_seed(seed);
    let tasks: Vec<TransmissionTask> = (0..grid.count)
        .map(|id| TransmissionTask {
            id,
            source: sources[rng.random_range(0..sources.len())],
            size: grid.sizes[rng.random_range(0..grid.sizes.len())],
            deadline: grid.deadlines[rng.random_range(0..grid.deadlines.len())],
            release: if grid.release_window > 0.0 {
                rng.random_range(0.0..grid.release_window)
            } else {
                0.0
            },
        })
        .collect();
    for t in &tasks {
        t.validate(network)?;
    }
    Ok(tasks)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Individual,
    Heuristic,
    Distributed,
    Spread,
    MaxRate,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Individual,
        Strategy::Heuristic,
        Strategy::Distributed,
        Strategy::Spread,
        Strategy::MaxRate,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Strategy::Individual => "individual",
            Strategy::Heuristic => "heuristic",
            Strategy::Distributed => "distributed",
            Strategy::Spread => "spread",
            Strategy::MaxRate => "maxrate",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown strategy '{s}'")))
    }
}

/// Knobs of the simulated strategies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub heuristic: HeuristicOptions,
    /// Share of its data a spread holder hands to each encountered node.
    pub spread_fraction: f64,
    /// Protocol staleness horizon; `None` uses the task deadline.
    pub staleness_horizon: Option<f64>,
    /// Let a relay on a planned route hand its segment straight to the
    /// infrastructure when that link comes up before the next planned hop.
    pub heuristic_shortcuts: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            heuristic: HeuristicOptions::default(),
            spread_fraction: 0.5,
            staleness_horizon: None,
            heuristic_shortcuts: false,
        }
    }
}

/// Outcome of one task under one strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskOutcome {
    pub strategy: Strategy,
    pub task_id: usize,
    pub size: f64,
    pub deadline: f64,
    pub offloaded: bool,
    pub success: bool,
    /// Time after release when the last data arrived, if it all did.
    pub completion_time: Option<f64>,
    pub delivered: f64,
}

/// Violations found by the invariant sweeps over transfer events.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SweepCounts {
    pub events: u64,
    pub mass_violations: u64,
    pub assignment_violations: u64,
    pub backflow_violations: u64,
}

impl SweepCounts {
    pub fn is_clean(&self) -> bool {
        self.mass_violations == 0
            && self.assignment_violations == 0
            && self.backflow_violations == 0
    }

    fn add(&mut self, other: &SweepCounts) {
        self.events += other.events;
        self.mass_violations += other.mass_violations;
        self.assignment_violations += other.assignment_violations;
        self.backflow_violations += other.backflow_violations;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub strategy: Strategy,
    pub total: usize,
    pub offloaded: usize,
    pub successful: usize,
    pub outcomes: Vec<TaskOutcome>,
    pub sweeps: SweepCounts,
}

impl SimResult {
    pub fn success_rate(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.successful as f64 / self.total as f64
        }
    }
}

/// One row of a protocol event log. `node_a` sends to `node_b`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProtocolEvent {
    pub time: f64,
    pub event: &'static str,
    pub node_a: usize,
    pub node_b: usize,
    pub planned: f64,
    pub actual: f64,
    pub carried_a: f64,
    pub carried_b: f64,
}

/// Independent observer of transfers: tracks who has exchanged data with
/// whom and checks that no data flows back.
struct Observer {
    source: NodeId,
    size: f64,
    seen: BTreeMap<NodeId, BTreeSet<NodeId>>,
    sweeps: SweepCounts,
}

impl Observer {
    fn new(source: NodeId, size: f64) -> Self {
        Self {
            source,
            size,
            seen: BTreeMap::new(),
            sweeps: SweepCounts::default(),
        }
    }

    fn relay(&mut self, from: NodeId, to: NodeId) {
        self.sweeps.events += 1;
        let back = to == self.source || self.seen.get(&from).is_some_and(|s| s.contains(&to));
        if back {
            self.sweeps.backflow_violations += 1;
        }
        self.seen.entry(from).or_default().insert(to);
        self.seen.entry(to).or_default().insert(from);
    }

    fn delivery(&mut self) {
        self.sweeps.events += 1;
    }

    fn mass(&mut self, total: f64) {
        if (total - self.size).abs() > 1e-9 * self.size.max(1.0) {
            self.sweeps.mass_violations += 1;
        }
    }
}

fn outcome(
    strategy: Strategy,
    task: &TransmissionTask,
    offloaded: bool,
    delivered: f64,
    completion: Option<f64>,
) -> TaskOutcome {
    let success = delivered >= task.size * (1.0 - DONE_EPS);
    TaskOutcome {
        strategy,
        task_id: task.id,
        size: task.size,
        deadline: task.deadline,
        offloaded,
        success,
        completion_time: if success { completion } else { None },
        delivered,
    }
}

fn route_contacts<'r>(
    real: &'r Realization<'_>,
    network: &Network,
    route: &[NodeId],
) -> Result<Vec<(f64, &'r [ContactEvent])>> {
    route
        .windows(2)
        .map(|w| {
            let e = network
                .edge_index(w[0], w[1])
                .ok_or_else(|| Error::Plan(format!("no edge between {} and {}", w[0], w[1])))?;
            Ok((real.edge(e).2.rate, real.contacts(e)))
        })
        .collect()
}

/// Like [`traverse`] along `route`, except that each relay commits to its
/// own infrastructure link instead when that link's next contact comes
/// first.
fn traverse_with_shortcuts(
    network: &Network,
    real: &Realization<'_>,
    route: &[NodeId],
    size: f64,
    deadline: f64,
) -> Result<Option<f64>> {
    let v = network.infrastructure();
    let hops = route_contacts(real, network, route)?;
    let mut ready = 0.0;
    for (i, (rate, contacts)) in hops.into_iter().enumerate() {
        let node = route[i];
        if i > 0 && route[i + 1] != v {
            if let Some(e) = network.edge_index(node, v) {
                let direct = real.contacts(e);
                let via_v = next_start(direct, ready, deadline);
                let via_next = next_start(contacts, ready, deadline);
                if via_v.is_some_and(|a| via_next.is_none_or(|b| a < b)) {
                    return Ok(cross(direct, real.edge(e).2.rate, size, ready, deadline));
                }
            }
        }
        match cross(contacts, rate, size, ready, deadline) {
            Some(t) => ready = t,
            None => return Ok(None),
        }
    }
    Ok(Some(ready))
}

fn run_individual(
    network: &Network,
    task: &TransmissionTask,
    real: &Realization<'_>,
) -> Result<TaskOutcome> {
    let v = network.infrastructure();
    if network.edge(task.source, v).is_none() {
        return Ok(outcome(Strategy::Individual, task, false, 0.0, None));
    }
    let hops = route_contacts(real, network, &[task.source, v])?;
    let done = traverse(hops, task.size, task.deadline);
    let delivered = if done.is_some() { task.size } else { 0.0 };
    Ok(outcome(Strategy::Individual, task, false, delivered, done))
}

fn run_heuristic(
    network: &Network,
    task: &TransmissionTask,
    real: &Realization<'_>,
    opts: &SimOptions,
) -> Result<TaskOutcome> {
    let plan = match plan_offload_with(
        network,
        task.source,
        task.size,
        task.deadline,
        &opts.heuristic,
    ) {
        Ok(p) => p,
        Err(Error::Plan(_)) => return Ok(outcome(Strategy::Heuristic, task, false, 0.0, None)),
        Err(e) => return Err(e),
    };
    let mut delivered = 0.0;
    let mut last: f64 = 0.0;
    for a in &plan.allocations {
        if a.assigned <= 0.0 {
            continue;
        }
        let done = if opts.heuristic_shortcuts {
            traverse_with_shortcuts(network, real, &a.route, a.assigned, task.deadline)?
        } else {
            traverse(
                route_contacts(real, network, &a.route)?,
                a.assigned,
                task.deadline,
            )
        };
        if let Some(t) = done {
            delivered += a.assigned;
            last = last.max(t);
        }
    }
    Ok(outcome(
        Strategy::Heuristic,
        task,
        plan.offloaded,
        delivered,
        Some(last),
    ))
}

/// Capacity of a timeline contact, cut short at the deadline.
fn capacity(c: &TimelineContact, rate: f64, deadline: f64) -> f64 {
    c.duration.min(deadline - c.start).max(0.0) * rate
}

/// Per-node state of the spread and maxrate baselines.
#[derive(Debug, Clone, Default)]
struct Holder {
    carried: f64,
    provenance: BTreeSet<NodeId>,
    ready_at: f64,
}

/// The relay a maxrate holder forwards to: its neighbour with the fastest
/// infrastructure link, if that beats its own link.
fn maxrate_relays(network: &Network) -> Vec<Option<NodeId>> {
    let v = network.infrastructure();
    let rate_to_v = |n: NodeId| network.edge(n, v).map_or(0.0, |p| p.lambda);
    network
        .nodes()
        .map(|h| {
            let mut best: Option<(NodeId, f64)> = None;
            for &w in network.neighbors(h) {
                if w == v {
                    continue;
                }
                let l = rate_to_v(w);
                if l > 0.0 && best.is_none_or(|(_, b)| l > b) {
                    best = Some((w, l));
                }
            }
            best.filter(|(_, l)| *l > rate_to_v(h)).map(|(w, _)| w)
        })
        .collect()
}

fn run_flow(
    network: &Network,
    task: &TransmissionTask,
    real: &Realization<'_>,
    strategy: Strategy,
    opts: &SimOptions,
) -> Result<(TaskOutcome, SweepCounts)> {
    let v = network.infrastructure();
    let relays = if strategy == Strategy::MaxRate {
        maxrate_relays(network)
    } else {
        Vec::new()
    };
    let mut nodes = vec![Holder::default(); network.node_count()];
    nodes[task.source.0].carried = task.size;
    let mut obs = Observer::new(task.source, task.size);
    let mut delivered = 0.0;
    let mut last = 0.0;
    let mut offloaded = false;
    let ready = |h: &Holder, t: f64| h.carried > DONE_EPS * task.size && t >= h.ready_at;

    for c in real.timeline() {
        let (a, b, p) = real.edge(c.edge);
        let cap = capacity(&c, p.rate, task.deadline);
        if cap <= 0.0 {
            continue;
        }
        if a == v || b == v {
            let h = if a == v { b } else { a };
            let holder = &mut nodes[h.0];
            if !ready(holder, c.start) {
                continue;
            }
            let x = holder.carried.min(cap);
            holder.carried -= x;
            delivered += x;
            last = c.start + x / p.rate;
            obs.delivery();
        } else {
            let may = |from: NodeId, to: NodeId| {
                let f = &nodes[from.0];
                ready(f, c.start)
                    && to != task.source
                    && !f.provenance.contains(&to)
                    && !nodes[to.0].provenance.contains(&from)
                    && (strategy != Strategy::MaxRate || relays[from.0] == Some(to))
            };
            let (from, to) = match (may(a, b), may(b, a)) {
                (false, false) => continue,
                (true, false) => (a, b),
                (false, true) => (b, a),
                // Both could send: the one carrying more does.
                (true, true) => {
                    if nodes[b.0].carried > nodes[a.0].carried {
                        (b, a)
                    } else {
                        (a, b)
                    }
                }
            };
            let share = if strategy == Strategy::Spread {
                opts.spread_fraction
            } else {
                1.0
            };
            let x = (nodes[from.0].carried * share).min(cap);
            nodes[from.0].carried -= x;
            nodes[from.0].provenance.insert(to);
            let r = &mut nodes[to.0];
            r.carried += x;
            r.provenance.insert(from);
            r.ready_at = r.ready_at.max(c.start + x / p.rate);
            offloaded = true;
            obs.relay(from, to);
        }
        obs.mass(delivered + nodes.iter().map(|n| n.carried).sum::<f64>());
        if delivered >= task.size * (1.0 - DONE_EPS) {
            break;
        }
    }
    Ok((
        outcome(strategy, task, offloaded, delivered, Some(last)),
        obs.sweeps,
    ))
}

/// Run the distributed protocol for one task and return its event log.
///
/// Every node starts with its neighbours' tables already learned at
/// release. With the default staleness horizon those stay fresh for the
/// whole task, so contacts between nodes that hold no data are skipped.
pub fn simulate_distributed_logged(
    network: &Network,
    task: &TransmissionTask,
    seed: u64,
    opts: &SimOptions,
) -> Result<(TaskOutcome, Vec<ProtocolEvent>, SweepCounts)> {
    task.validate(network)?;
    let real = Realization::new(network, derive_seed(seed, task.id as u64), task.deadline);
    run_distributed(network, task, &real, opts)
}

fn run_distributed(
    network: &Network,
    task: &TransmissionTask,
    real: &Realization<'_>,
    opts: &SimOptions,
) -> Result<(TaskOutcome, Vec<ProtocolEvent>, SweepCounts)> {
    let v = network.infrastructure();
    let cfg = ProtocolConfig {
        source: task.source,
        destination: v,
        deadline_at: task.deadline,
        staleness_horizon: opts.staleness_horizon.unwrap_or(task.deadline),
        estimator: opts.heuristic.estimator,
    };
    let mut states: Vec<Option<NodeState>> = vec![None; network.node_count()];
    let mut source = NodeState::with_learned_tables(network, task.source, 0.0);
    let assignment = match criterion_assignment(&source, task.size, 0.0, &cfg) {
        Ok(a) => a,
        Err(Error::Protocol(_)) => {
            return Ok((
                outcome(Strategy::Distributed, task, false, 0.0, None),
                Vec::new(),
                SweepCounts::default(),
            ));
        }
        Err(e) => return Err(e),
    };
    source.carried = task.size;
    source.assignment = assignment;
    let mut log = vec![ProtocolEvent {
        time: 0.0,
        event: "release",
        node_a: task.source.0,
        node_b: task.source.0,
        planned: task.size,
        actual: task.size,
        carried_a: task.size,
        carried_b: task.size,
    }];
    states[task.source.0] = Some(source);
    let mut obs = Observer::new(task.source, task.size);
    let mut offloaded = false;
    let mut last = 0.0;
    let holds = |s: &Option<NodeState>| s.as_ref().is_some_and(|s| s.carried > 0.0 && s.id != v);

    for c in real.timeline() {
        let (a, b, p) = real.edge(c.edge);
        if !holds(&states[a.0]) && !holds(&states[b.0]) {
            continue;
        }
        let cap = capacity(&c, p.rate, task.deadline);
        let mut sa = states[a.0]
            .take()
            .unwrap_or_else(|| NodeState::with_learned_tables(network, a, 0.0));
        let mut sb = states[b.0]
            .take()
            .unwrap_or_else(|| NodeState::with_learned_tables(network, b, 0.0));
        let out = on_contact(&mut sa, &mut sb, cap, c.start, &cfg)?;
        if let Some((from, to)) = out.transfer {
            let (sf, st) = if from == a { (&sa, &sb) } else { (&sb, &sa) };
            log.push(ProtocolEvent {
                time: c.start,
                event: out.kind.as_str(),
                node_a: from.0,
                node_b: to.0,
                planned: out.planned,
                actual: out.actual,
                carried_a: sf.carried,
                carried_b: st.carried,
            });
            match out.kind {
                ContactKind::Relay => {
                    offloaded = true;
                    obs.relay(from, to);
                }
                ContactKind::Delivery => {
                    obs.delivery();
                    last = out.completes_at;
                }
                ContactKind::Exchange => {}
            }
        }
        states[a.0] = Some(sa);
        states[b.0] = Some(sb);
        if out.transfer.is_some() {
            let mut total = 0.0;
            for s in states.iter().flatten() {
                total += s.carried;
                if s.id != v && (s.assignment_total() - s.carried).abs() > 1e-6 * task.size {
                    obs.sweeps.assignment_violations += 1;
                }
            }
            obs.mass(total);
        }
        let delivered = states[v.0].as_ref().map_or(0.0, |s| s.carried);
        if delivered >= task.size * (1.0 - DONE_EPS) {
            break;
        }
    }
    let delivered = states[v.0].as_ref().map_or(0.0, |s| s.carried);
    Ok((
        outcome(
            Strategy::Distributed,
            task,
            offloaded,
            delivered,
            Some(last),
        ),
        log,
        obs.sweeps,
    ))
}

/// Simulate one task; the realization depends only on `(seed, task id)`,
/// so every strategy sees the same contacts.
pub fn simulate_task(
    network: &Network,
    task: &TransmissionTask,
    strategy: Strategy,
    seed: u64,
    opts: &SimOptions,
) -> Result<(TaskOutcome, SweepCounts)> {
    task.validate(network)?;
    let real = Realization::new(network, derive_seed(seed, task.id as u64), task.deadline);
    match strategy {
        Strategy::Individual => Ok((
            run_individual(network, task, &real)?,
            SweepCounts::default(),
        )),
        Strategy::Heuristic => Ok((
            run_heuristic(network, task, &real, opts)?,
            SweepCounts::default(),
        )),
        Strategy::Distributed => {
            let (o, _, s) = run_distributed(network, task, &real, opts)?;
            Ok((o, s))
        }
        Strategy::Spread | Strategy::MaxRate => run_flow(network, task, &real, strategy, opts),
    }
}

pub fn simulate_strategy(
    network: &Network,
    tasks: &[TransmissionTask],
    strategy: Strategy,
    seed: u64,
) -> Result<SimResult> {
    simulate_strategy_with(network, tasks, strategy, seed, &SimOptions::default())
}

pub fn simulate_strategy_with(
    network: &Network,
    tasks: &[TransmissionTask],
    strategy: Strategy,
    seed: u64,
    opts: &SimOptions,
) -> Result<SimResult> {
    if !(opts.spread_fraction > 0.0 && opts.spread_fraction <= 1.0) {
        return Err(Error::Config("spread fraction must be in (0, 1]".into()));
    }
    let runs = tasks
        .par_iter()
        .map(|t| simulate_task(network, t, strategy, seed, opts))
        .collect::<Result<Vec<_>>>()?;
    let mut sweeps = SweepCounts::default();
    let mut outcomes = Vec::with_capacity(runs.len());
    for (o, s) in runs {
        sweeps.add(&s);
        outcomes.push(o);
    }
    Ok(SimResult {
        strategy,
        total: outcomes.len(),
        offloaded: outcomes.iter().filter(|o| o.offloaded).count(),
        successful: outcomes.iter().filter(|o| o.success).count(),
        outcomes,
        sweeps,
    })
}

/// Per-task rows, sorted by strategy name and task id.
pub fn write_results_csv<W: Write>(writer: W, results: &[SimResult]) -> Result<()> {
    let mut rows: Vec<&TaskOutcome> = results.iter().flat_map(|r| &r.outcomes).collect();
    rows.sort_by(|a, b| {
        a.strategy
            .as_str()
            .cmp(b.strategy.as_str())
            .then(a.task_id.cmp(&b.task_id))
    });
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "strategy",
        "task_id",
        "size",
        "deadline",
        "offloaded",
        "success",
        "completion_time",
    ])?;
    for o in rows {
        w.write_record([
            o.strategy.as_str().to_string(),
            o.task_id.to_string(),
            o.size.to_string(),
            o.deadline.to_string(),
            o.offloaded.to_string(),
            o.success.to_string(),
            o.completion_time.map(|t| t.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per strategy, sorted by name.
pub fn write_summary_csv<W: Write>(writer: W, results: &[SimResult]) -> Result<()> {
    let mut rows: Vec<&SimResult> = results.iter().collect();
    rows.sort_by(|a, b| a.strategy.as_str().cmp(b.strategy.as_str()));
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["strategy", "total", "offloaded", "successful"])?;
    for r in rows {
        w.write_record([
            r.strategy.as_str().to_string(),
            r.total.to_string(),
            r.offloaded.to_string(),
            r.successful.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_event_log_csv<W: Write>(writer: W, events: &[ProtocolEvent]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for e in events {
        w.serialize(e)?;
    }
    if events.is_empty() {
        w.write_record([
            "time",
            "event",
            "node_a",
            "node_b",
            "planned",
            "actual",
            "carried_a",
            "carried_b",
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Estimated versus simulated delivery probability at one grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationRow {
    pub size: f64,
    pub deadline: f64,
    pub estimated: f64,
    pub simulated: f64,
}

impl ValidationRow {
    pub fn abs_diff(&self) -> f64 {
        (self.estimated - self.simulated).abs()
    }
}

/// Compare the estimator with the Monte Carlo oracle over a size × deadline
/// grid. Point `i` uses the stream `(seed, i)`.
pub fn validate_path(
    path: &PathSpec,
    points: &[(f64, f64)],
    runs: u64,
    seed: u64,
    estimator: &EstimatorOptions,
) -> Result<Vec<ValidationRow>> {
    points
        .iter()
        .enumerate()
        .map(|(i, &(size, deadline))| {
            let q = DeliveryQuery::new(size, deadline)?;
            let estimated = crate::delivery::delivery_prob_path_with(path, &q, estimator)?;
            let simulated =
                run_monte_carlo_delivery(path, size, deadline, runs, derive_seed(seed, i as u64))?;
            Ok(ValidationRow {
                size,
                deadline,
                estimated,
                simulated,
            })
        })
        .collect()
}

pub fn write_validation_csv<W: Write>(writer: W, rows: &[ValidationRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["size", "deadline", "estimated", "simulated", "abs_diff"])?;
    for r in rows {
        w.write_record([
            r.size.to_string(),
            r.deadline.to_string(),
            r.estimated.to_string(),
            r.simulated.to_string(),
            r.abs_diff().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

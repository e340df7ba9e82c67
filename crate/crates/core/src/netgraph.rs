//! Network model: mobile nodes plus one infrastructure node, an undirected
//! edge per contacting pair, synthetic topology generation and contact-trace
//! ingestion.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::contact_model::{fit_exponential, fit_pareto, PairContactParams};
use crate::error::{Error, Result};
use crate::seed::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Unordered node pair stored with the smaller id first.
pub fn edge_key(a: NodeId, b: NodeId) -> (NodeId, NodeId) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// An opportunistic network with a single infrastructure node.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    node_count: usize,
    infrastructure: NodeId,
    edges: Vec<((NodeId, NodeId), PairContactParams)>,
    index: BTreeMap<(NodeId, NodeId), usize>,
    adjacency: Vec<Vec<NodeId>>,
}

impl Network {
    pub fn new(
        node_count: usize,
        infrastructure: NodeId,
        edges: impl IntoIterator<Item = (NodeId, NodeId, PairContactParams)>,
    ) -> Result<Self> {
        if infrastructure.0 >= node_count {
            return Err(Error::Domain(format!(
                "infrastructure {infrastructure} is not one of {node_count} nodes"
            )));
        }
        let mut map = BTreeMap::new();
        for (a, b, params) in edges {
            if a == b {
                return Err(Error::Domain(format!("self-loop on node {a}")));
            }
            if a.0 >= node_count || b.0 >= node_count {
                return Err(Error::Domain(format!(
                    "edge {a}-{b} references an unknown node"
                )));
            }
            params.validate()?;
            if map.insert(edge_key(a, b), params).is_some() {
                return Err(Error::Domain(format!("duplicate edge {a}-{b}")));
            }
        }
        let edges: Vec<_> = map.into_iter().collect();
        let index = edges
            .iter()
            .enumerate()
            .map(|(i, (k, _))| (*k, i))
            .collect();
        let mut adjacency = vec![Vec::new(); node_count];
        for ((a, b), _) in &edges {
            adjacency[a.0].push(*b);
            adjacency[b.0].push(*a);
        }
        for adj in &mut adjacency {
            adj.sort();
        }
        Ok(Self {
            node_count,
            infrastructure,
            edges,
            index,
            adjacency,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn infrastructure(&self) -> NodeId {
        self.infrastructure
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        (0..self.node_count).map(NodeId)
    }

    /// Mobile (non-infrastructure) nodes in id order.
    pub fn mobile_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes().filter(move |n| *n != self.infrastructure)
    }

    pub fn contains(&self, node: NodeId) -> bool {
        node.0 < self.node_count
    }

    pub fn edge(&self, a: NodeId, b: NodeId) -> Option<&PairContactParams> {
        self.index.get(&edge_key(a, b)).map(|&i| &self.edges[i].1)
    }

    /// Stable position of an edge in the sorted edge list.
    pub fn edge_index(&self, a: NodeId, b: NodeId) -> Option<usize> {
        self.index.get(&edge_key(a, b)).copied()
    }

    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId, &PairContactParams)> {
        self.edges.iter().map(|((a, b), p)| (*a, *b, p))
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn neighbors(&self, node: NodeId) -> &[NodeId] {
        &self.adjacency[node.0]
    }

    pub fn degree(&self, node: NodeId) -> usize {
        self.adjacency[node.0].len()
    }

    /// Contact parameters along a node route, or `None` if a hop is missing.
    pub fn route_params(&self, route: &[NodeId]) -> Option<Vec<PairContactParams>> {
        route
            .windows(2)
            .map(|w| self.edge(w[0], w[1]).copied())
            .collect()
    }

    pub fn to_file(&self) -> NetworkFile {
        NetworkFile {
            infrastructure: self.infrastructure.0,
            nodes: self.node_count,
            edges: self
                .edges()
                .map(|(a, b, p)| EdgeRecord {
                    a: a.0,
                    b: b.0,
                    lambda: p.lambda,
                    alpha: p.alpha,
                    beta: p.beta,
                    rate: p.rate,
                })
                .collect(),
        }
    }

    pub fn from_file(file: &NetworkFile) -> Result<Self> {
        let edges = file
            .edges
            .iter()
            .map(|e| {
                PairContactParams::new(e.lambda, e.alpha, e.beta, e.rate)
                    .map(|p| (NodeId(e.a), NodeId(e.b), p))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(file.nodes, NodeId(file.infrastructure), edges)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_file()).expect("network serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: NetworkFile = serde_json::from_str(text)?;
        Self::from_file(&file)
    }
}

/// On-disk network representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkFile {
    pub infrastructure: usize,
    pub nodes: usize,
    pub edges: Vec<EdgeRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub a: usize,
    pub b: usize,
    pub lambda: f64,
    pub alpha: f64,
    pub beta: f64,
    pub rate: f64,
}

/// Closed interval `[low, high]` for uniformly drawn parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub low: f64,
    pub high: f64,
}

impl Interval {
    pub const fn new(low: f64, high: f64) -> Self {
        Self { low, high }
    }

    fn validate(&self, name: &str) -> Result<()> {
        if !(self.low > 0.0) || !self.high.is_finite() || self.low > self.high {
            return Err(Error::Config(format!(
                "{name} must satisfy 0 < low <= high, got [{}, {}]",
                self.low, self.high
            )));
        }
        Ok(())
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.low == self.high {
            self.low
        } else {
            rng.random_range(self.low..=self.high)
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.low <= x && x <= self.high
    }
}

/// Parameters of the synthetic generator.
///
/// Nodes `0..n` are mobile and node `n` is the infrastructure. Inter-node
/// contact rates are `1 / (weight_scale · w)` with `w` drawn from a power
/// law of exponent `weight_exponent` on `[1, max_weight]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub n: usize,
    pub avg_degree: f64,
    pub max_degree: usize,
    pub degree_exponent: f64,
    pub weight_exponent: f64,
    pub weight_scale: f64,
    pub max_weight: f64,
    pub node_alpha_range: Interval,
    pub node_beta_range: Interval,
    pub infra_alpha_range: Interval,
    pub infra_beta_range: Interval,
    pub infra_lambda_range: Interval,
    pub rate: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n: 100,
            avg_degree: 10.0,
            max_degree: 15,
            degree_exponent: 2.0,
            weight_exponent: 2.0,
            weight_scale: 10.0,
            max_weight: 100.0,
            node_alpha_range: Interval::new(6.0, 10.0),
            node_beta_range: Interval::new(2.0, 3.0),
            infra_alpha_range: Interval::new(3.0, 4.0),
            infra_beta_range: Interval::new(2.0, 3.0),
            infra_lambda_range: Interval::new(0.001, 0.01),
            rate: 1.0,
            seed: 1,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Config(format!(
                "need at least 2 mobile nodes, got {}",
                self.n
            )));
        }
        if !(self.avg_degree > 0.0) || self.avg_degree > self.max_degree as f64 {
            return Err(Error::Config(format!(
                "average degree {} must be positive and at most the maximum degree {}",
                self.avg_degree, self.max_degree
            )));
        }
        if self.max_degree >= self.n {
            return Err(Error::Config(format!(
                "maximum degree {} must be below the node count {}",
                self.max_degree, self.n
            )));
        }
        for (name, v) in [
            ("degree_exponent", self.degree_exponent),
            ("weight_exponent", self.weight_exponent),
            ("weight_scale", self.weight_scale),
            ("rate", self.rate),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.max_weight >= 1.0) || !self.max_weight.is_finite() {
            return Err(Error::Config(format!(
                "max_weight must be >= 1, got {}",
                self.max_weight
            )));
        }
        self.node_alpha_range.validate("node_alpha_range")?;
        self.node_beta_range.validate("node_beta_range")?;
        self.infra_alpha_range.validate("infra_alpha_range")?;
        self.infra_beta_range.validate("infra_beta_range")?;
        self.infra_lambda_range.validate("infra_lambda_range")?;
        Ok(())
    }

    pub fn infrastructure(&self) -> NodeId {
        NodeId(self.n)
    }
}

const PAIRING_ATTEMPTS: usize = 100;

/// Generate a synthetic network: power-law degrees wired by a
/// configuration-model pairing, power-law edge weights, and a contact link
/// from every mobile node to the infrastructure.
pub fn generate_synthetic(config: &SyntheticConfig) -> Result<Network> {
    config.validate()?;
    let mut rng = rng_from_seed(config.seed);
    let degrees = sample_degrees(config, &mut rng);
    let pairs = pair_stubs(&degrees, &mut rng)?;

    let mut edges = Vec::with_capacity(pairs.len() + config.n);
    for (a, b) in pairs {
        let w = sample_weight(config, &mut rng);
        let params = PairContactParams::new(
            1.0 / (config.weight_scale * w),
            config.node_alpha_range.sample(&mut rng),
            config.node_beta_range.sample(&mut rng),
            config.rate,
        )?;
        edges.push((NodeId(a), NodeId(b), params));
    }
    let infra = config.infrastructure();
    for i in 0..config.n {
        let params = PairContactParams::new(
            config.infra_lambda_range.sample(&mut rng),
            config.infra_alpha_range.sample(&mut rng),
            config.infra_beta_range.sample(&mut rng),
            config.rate,
        )?;
        edges.push((NodeId(i), infra, params));
    }
    Network::new(config.n + 1, infra, edges)
}

fn power_law_mean(k_min: usize, k_max: usize, exponent: f64) -> f64 {
    let (num, den) = (k_min..=k_max).fold((0.0, 0.0), |(num, den), k| {
        let w = (k as f64).powf(-exponent);
        (num + k as f64 * w, den + w)
    });
    num / den
}

fn sample_power_law_degree<R: Rng + ?Sized>(
    rng: &mut R,
    k_min: usize,
    k_max: usize,
    exponent: f64,
) -> usize {
    let weights: Vec<f64> = (k_min..=k_max)
        .map(|k| (k as f64).powf(-exponent))
        .collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return k_min + i;
        }
        u -= w;
    }
    k_max
}

/// Degrees from a truncated discrete power law on `[k_min, max_degree]`;
/// a two-component mixture over neighbouring `k_min` values pins the
/// expected degree to `avg_degree`.
fn sample_degrees<R: Rng + ?Sized>(config: &SyntheticConfig, rng: &mut R) -> Vec<usize> {
    let k_max = config.max_degree;
    let tau = config.degree_exponent;
    let target = config.avg_degree;
    let means: Vec<f64> = (1..=k_max).map(|k| power_law_mean(k, k_max, tau)).collect();
    // means is increasing in k_min; find the bracketing pair.
    let mut lo = 1;
    while lo < k_max && means[lo] <= target {
        lo += 1;
    }
    let (k_lo, k_hi, mix) = if lo == 1 && means[0] >= target {
        (1, 1, 1.0)
    } else if lo == k_max && means[k_max - 1] <= target {
        (k_max, k_max, 1.0)
    } else {
        let m_lo = means[lo - 1];
        let m_hi = means[lo];
        (lo, lo + 1, (m_hi - target) / (m_hi - m_lo))
    };
    let mut degrees: Vec<usize> = (0..config.n)
        .map(|_| {
            let k_min = if rng.random::<f64>() < mix {
                k_lo
            } else {
                k_hi
            };
            sample_power_law_degree(rng, k_min, k_max, tau)
        })
        .collect();
    if degrees.iter().sum::<usize>() % 2 == 1 {
        // Fix parity on a random node that has room to move.
        let start = rng.random_range(0..config.n);
        for off in 0..config.n {
            let i = (start + off) % config.n;
            if degrees[i] < k_max {
                degrees[i] += 1;
                break;
            } else if degrees[i] > 1 {
                degrees[i] -= 1;
                break;
            }
        }
    }
    degrees
}

/// Match stubs randomly, rejecting partners that would create a self-loop
/// or a duplicate edge; restarts the whole matching on a dead end.
fn pair_stubs<R: Rng + ?Sized>(degrees: &[usize], rng: &mut R) -> Result<Vec<(usize, usize)>> {
    let stubs: Vec<usize> = degrees
        .iter()
        .enumerate()
        .flat_map(|(i, &d)| std::iter::repeat_n(i, d))
        .collect();
    'attempt: for _ in 0..PAIRING_ATTEMPTS {
        let mut pending = stubs.clone();
        pending.shuffle(rng);
        let mut seen = BTreeSet::new();
        let mut pairs = Vec::with_capacity(stubs.len() / 2);
        while let Some(a) = pending.pop() {
            let found = pending
                .iter()
                .rposition(|&b| b != a && !seen.contains(&(a.min(b), a.max(b))));
            let Some(j) = found else {
                continue 'attempt;
            };
            let b = pending.swap_remove(j);
            seen.insert((a.min(b), a.max(b)));
            pairs.push((a.min(b), a.max(b)));
            pending.shuffle(rng);
        }
        pairs.sort();
        return Ok(pairs);
    }
    Err(Error::Generation(format!(
        "degree sequence could not be wired without self-loops or multi-edges after {PAIRING_ATTEMPTS} attempts"
    )))
}

fn sample_weight<R: Rng + ?Sized>(config: &SyntheticConfig, rng: &mut R) -> f64 {
    let xi = config.weight_exponent;
    let w_max = config.max_weight;
    let u: f64 = rng.random();
    if (xi - 1.0).abs() < 1e-12 {
        return w_max.powf(u);
    }
    let e = 1.0 - xi;
    (1.0 - u * (1.0 - w_max.powf(e))).powf(1.0 / e)
}

/// One recorded contact between two devices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub node_a: u64,
    pub node_b: u64,
    pub t_start: f64,
    pub t_end: f64,
}

impl TraceRecord {
    pub fn validate(&self) -> Result<()> {
        if self.node_a == self.node_b {
            return Err(Error::Ingestion(format!(
                "contact of node {} with itself",
                self.node_a
            )));
        }
        if !(self.t_end > self.t_start) || !self.t_start.is_finite() || !self.t_end.is_finite() {
            return Err(Error::Ingestion(format!(
                "contact {}-{} has t_end {} not after t_start {}",
                self.node_a, self.node_b, self.t_end, self.t_start
            )));
        }
        Ok(())
    }
}

pub fn read_trace_csv<R: Read>(reader: R) -> Result<Vec<TraceRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let expected = ["node_a", "node_b", "t_start", "t_end"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Format(format!(
            "trace header must be node_a,node_b,t_start,t_end, got {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

pub fn write_trace_csv<W: Write>(writer: W, records: &[TraceRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for r in records {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IngestOptions {
    pub warmup_fraction: f64,
    pub rate: f64,
    pub min_contacts: usize,
}

impl IngestOptions {
    pub fn new(warmup_fraction: f64, rate: f64) -> Self {
        Self {
            warmup_fraction,
            rate,
            min_contacts: 5,
        }
    }
}

/// Network fitted from a trace plus the records reserved for evaluation.
#[derive(Debug, Clone)]
pub struct IngestedTrace {
    pub network: Network,
    /// Records after the warmup split whose endpoints both survived, with
    /// node ids rewritten to network ids.
    pub evaluation: Vec<TraceRecord>,
    /// Original trace id of each network node.
    pub original_ids: Vec<u64>,
}

/// Fit a network from the warmup part of a contact trace.
///
/// Records starting before the `warmup_fraction` point of the trace's time
/// span are used to fit each pair (rate from start-to-start gaps, Pareto
/// from `duration × rate`); pairs with fewer than `min_contacts` warmup
/// contacts, or whose fit is degenerate, are dropped. The highest-degree
/// node becomes the infrastructure and nodes without a one- or two-hop
/// route to it are excluded.
pub fn ingest_trace(records: &[TraceRecord], opts: &IngestOptions) -> Result<IngestedTrace> {
    if records.is_empty() {
        return Err(Error::Ingestion("trace has no records".into()));
    }
    if !(opts.warmup_fraction > 0.0 && opts.warmup_fraction < 1.0) {
        return Err(Error::Ingestion(format!(
            "warmup fraction must lie in (0, 1), got {}",
            opts.warmup_fraction
        )));
    }
    if !(opts.rate > 0.0) {
        return Err(Error::Ingestion(format!(
            "data rate must be positive, got {}",
            opts.rate
        )));
    }
    for r in records {
        r.validate()?;
    }
    let t_min = records
        .iter()
        .map(|r| r.t_start)
        .fold(f64::INFINITY, f64::min);
    let t_max = records
        .iter()
        .map(|r| r.t_start)
        .fold(f64::NEG_INFINITY, f64::max);
    let split = t_min + opts.warmup_fraction * (t_max - t_min);

    let mut by_pair: BTreeMap<(u64, u64), Vec<(f64, f64)>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.t_start < split) {
        let key = (r.node_a.min(r.node_b), r.node_a.max(r.node_b));
        by_pair.entry(key).or_default().push((r.t_start, r.t_end));
    }

    let mut fitted: BTreeMap<(u64, u64), PairContactParams> = BTreeMap::new();
    for (pair, mut contacts) in by_pair {
        if contacts.len() < opts.min_contacts.max(3) {
            continue;
        }
        contacts.sort_by(|a, b| a.0.total_cmp(&b.0));
        // Gaps come from the n−1 consecutive starts, data from all n contacts.
        let gaps: Vec<f64> = contacts.windows(2).map(|w| w[1].0 - w[0].0).collect();
        let data: Vec<f64> = contacts.iter().map(|(s, e)| (e - s) * opts.rate).collect();
        let Ok(lambda) = fit_exponential(&gaps) else {
            continue;
        };
        let Ok((alpha, beta)) = fit_pareto(&data) else {
            continue;
        };
        if let Ok(p) = PairContactParams::new(lambda, alpha, beta, opts.rate) {
            fitted.insert(pair, p);
        }
    }
    if fitted.is_empty() {
        return Err(Error::Ingestion(format!(
            "no node pair has {} or more fittable warmup contacts",
            opts.min_contacts
        )));
    }

    let mut adjacency: BTreeMap<u64, BTreeSet<u64>> = BTreeMap::new();
    for (a, b) in fitted.keys() {
        adjacency.entry(*a).or_default().insert(*b);
        adjacency.entry(*b).or_default().insert(*a);
    }
    // Highest degree wins; BTreeMap order breaks ties toward the smaller id.
    let infra = adjacency
        .iter()
        .fold(None::<(u64, usize)>, |best, (id, adj)| match best {
            Some((_, d)) if d >= adj.len() => best,
            _ => Some((*id, adj.len())),
        })
        .map(|(id, _)| id)
        .expect("at least one fitted pair");

    let mut keep: BTreeSet<u64> = BTreeSet::new();
    keep.insert(infra);
    for &n in &adjacency[&infra] {
        keep.insert(n);
    }
    for (&n, adj) in &adjacency {
        if adj.iter().any(|m| adjacency[&infra].contains(m)) {
            keep.insert(n);
        }
    }
    let original_ids: Vec<u64> = keep.iter().copied().collect();
    let remap: BTreeMap<u64, usize> = original_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (*id, i))
        .collect();

    let edges: Vec<_> = fitted
        .iter()
        .filter(|((a, b), _)| remap.contains_key(a) && remap.contains_key(b))
        .map(|((a, b), p)| (NodeId(remap[a]), NodeId(remap[b]), *p))
        .collect();
    let network = Network::new(original_ids.len(), NodeId(remap[&infra]), edges)?;

    let evaluation = records
        .iter()
        .filter(|r| r.t_start >= split)
        .filter_map(|r| {
            Some(TraceRecord {
                node_a: *remap.get(&r.node_a)? as u64,
                node_b: *remap.get(&r.node_b)? as u64,
                t_start: r.t_start,
                t_end: r.t_end,
            })
        })
        .collect();
    Ok(IngestedTrace {
        network,
        evaluation,
        original_ids,
    })
}

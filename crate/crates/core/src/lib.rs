//! Delivery-probability estimation over opportunistic contact paths and
//! cooperative data offloading toward an infrastructure node.
//!
//! The modules build on each other: [`contact_model`] describes a node
//! pair, [`delivery`] estimates path delivery probabilities, [`netgraph`]
//! holds the contact graph, [`heuristic`] and [`oracle`] plan offloads
//! centrally, [`distributed`] is the per-node protocol, and [`simulator`]
//! runs everything against sampled contacts.

// Negated comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod contact_model;
pub mod delivery;
pub mod distributed;
pub mod error;
pub mod heuristic;
pub mod netgraph;
pub mod oracle;
pub mod scenarios;
pub mod seed;
pub mod simulator;
pub mod special;

pub use contact_model::{ContactEvent, ContactSample, PairContactParams};
pub use delivery::{
    availability, delivery_prob_onehop, delivery_prob_path, delivery_prob_path_with, DeliveryQuery,
    EstimatorOptions, PathSpec,
};
pub use error::{Error, Result};
pub use heuristic::{
    plan_offload, plan_offload_with, Allocation, HeuristicOptions, OffloadPlan, RunnerUpSize,
};
pub use netgraph::{
    generate_synthetic, ingest_trace, IngestOptions, Network, NodeId, SyntheticConfig, TraceRecord,
};
pub use oracle::{brute_force_optimal, OracleConfig};
pub use simulator::{
    run_monte_carlo_delivery, simulate_strategy, simulate_strategy_with, SimOptions, SimResult,
    Strategy, TaskGrid, TransmissionTask,
};

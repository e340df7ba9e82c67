//! End-to-end use of the library: generate, plan, check against the oracle,
//! simulate.

use coopoffload_core::heuristic::PlanFile;
use coopoffload_core::scenarios::random_small_instance;
use coopoffload_core::simulator::generate_tasks;
use coopoffload_core::{
    brute_force_optimal, generate_synthetic, plan_offload, simulate_strategy, Network,
    OracleConfig, Strategy, SyntheticConfig, TaskGrid,
};

#[test]
fn network_file_round_trip() {
    let net = generate_synthetic(&SyntheticConfig {
        n: 40,
        max_degree: 12,
        seed: 9,
        ..SyntheticConfig::default()
    })
    .unwrap();
    let text = net.to_json();
    let back = Network::from_json(&text).unwrap();
    assert_eq!(back.to_json(), text);
    assert_eq!(back.edge_count(), net.edge_count());
}

#[test]
fn plans_are_valid() {
    let net = generate_synthetic(&SyntheticConfig {
        n: 40,
        max_degree: 12,
        seed: 9,
        ..SyntheticConfig::default()
    })
    .unwrap();
    for u in net.mobile_nodes().take(10) {
        let plan = plan_offload(&net, u, 20.0, 400.0).unwrap();
        let total: f64 = plan.sizes().iter().sum();
        assert!((total - 20.0).abs() < 1e-9);
        assert!(plan.joint_probability >= plan.direct_probability - 1e-12);
        let mut used = std::collections::BTreeSet::new();
        for a in &plan.allocations {
            assert_eq!(a.route.first(), Some(&u));
            assert_eq!(a.route.last(), Some(&net.infrastructure()));
            for w in a.route.windows(2) {
                let key = (w[0].min(w[1]), w[0].max(w[1]));
                assert!(used.insert(key), "edge reused");
            }
        }
        let file: PlanFile = serde_json::from_str(&plan.to_json()).unwrap();
        assert_eq!(file.allocations.len(), plan.allocations.len());
    }
}

#[test]
fn heuristic_never_beats_the_oracle() {
    for seed in 0..8 {
        let inst = random_small_instance(seed).unwrap();
        let h = plan_offload(&inst.network, inst.source, inst.size, inst.deadline).unwrap();
        let o = brute_force_optimal(
            &inst.network,
            inst.source,
            inst.size,
            inst.deadline,
            &OracleConfig::default(),
        )
        .unwrap();
        assert!(
            h.joint_probability <= o.joint_probability + 1e-9,
            "seed {seed}"
        );
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let net = generate_synthetic(&SyntheticConfig {
        n: 30,
        avg_degree: 6.0,
        max_degree: 10,
        seed: 2,
        ..SyntheticConfig::default()
    })
    .unwrap();
    let grid = TaskGrid {
        count: 24,
        sizes: vec![10.0, 20.0],
        deadlines: vec![300.0],
        release_window: 0.0,
    };
    let tasks = generate_tasks(&net, &grid, 5).unwrap();
    for s in Strategy::ALL {
        let many = simulate_strategy(&net, &tasks, s, 3).unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let one = pool.install(|| simulate_strategy(&net, &tasks, s, 3).unwrap());
        assert_eq!(many, one, "{s}");
    }
}

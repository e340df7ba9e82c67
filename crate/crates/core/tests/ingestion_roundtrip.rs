//! Sample a long trace from known pair parameters, ingest it, and check the
//! fitted parameters come back.

use coopoffload_core::contact_model::sample_contacts_with;
use coopoffload_core::seed::stream_rng;
use coopoffload_core::{
    ingest_trace, IngestOptions, Network, NodeId, PairContactParams, TraceRecord,
};
use rand::Rng;

fn within(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * b
}

#[test]
fn fitted_parameters_match_the_generator() {
    // Hub 0 reaches everyone; a ring among the others adds more pairs.
    let mut rng = stream_rng(42, 0);
    let mut edges = Vec::new();
    for i in 1..10 {
        edges.push((0usize, i));
        edges.push((i, if i == 9 { 1 } else { i + 1 }));
    }
    let truth: Vec<(usize, usize, PairContactParams)> = edges
        .into_iter()
        .map(|(a, b)| {
            let p = PairContactParams::new(
                rng.random_range(0.05..0.2),
                rng.random_range(2.5..8.0),
                rng.random_range(2.0..6.0),
                2.0,
            )
            .unwrap();
            (a, b, p)
        })
        .collect();

    let horizon = 8000.0;
    let mut records = Vec::new();
    for (i, (a, b, p)) in truth.iter().enumerate() {
        let mut r = stream_rng(7, i as u64);
        for c in sample_contacts_with(&mut r, p, 0.0, horizon) {
            records.push(TraceRecord {
                node_a: *a as u64 + 100,
                node_b: *b as u64 + 100,
                t_start: c.start,
                t_end: c.start + c.duration,
            });
        }
    }
    records.sort_by(|x, y| x.t_start.total_cmp(&y.t_start));

    let ingested = ingest_trace(&records, &IngestOptions::new(0.5, 2.0)).unwrap();
    let net: &Network = &ingested.network;
    assert_eq!(ingested.original_ids[net.infrastructure().0], 100);
    let id_of = |orig: usize| {
        NodeId(
            ingested
                .original_ids
                .iter()
                .position(|o| *o == orig as u64 + 100)
                .unwrap(),
        )
    };

    let mut good = 0;
    for (a, b, p) in &truth {
        let fit = net.edge(id_of(*a), id_of(*b)).expect("pair kept");
        let warmup = records
            .iter()
            .filter(|r| r.t_start < records.last().unwrap().t_start * 0.5)
            .filter(|r| (r.node_a, r.node_b) == (*a as u64 + 100, *b as u64 + 100))
            .count();
        assert!(warmup >= 200, "only {warmup} warmup contacts");
        if within(fit.lambda, p.lambda, 0.15)
            && within(fit.alpha, p.alpha, 0.15)
            && within(fit.beta, p.beta, 0.15)
        {
            good += 1;
        }
    }
    assert!(
        good as f64 >= 0.9 * truth.len() as f64,
        "{good} of {} pairs recovered",
        truth.len()
    );
}

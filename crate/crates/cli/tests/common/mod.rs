//! Helpers shared by the CLI test targets.

#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use coopoffload_core::contact_model::sample_contacts_with;
use coopoffload_core::netgraph::write_trace_csv;
use coopoffload_core::seed::stream_rng;
use coopoffload_core::{Network, TraceRecord};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_coopoffload"))
}

pub fn run(args: &[&str], dir: &Path) -> Output {
    bin()
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn coopoffload")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Write a contact trace sampled from every edge of `net` over `[0, horizon)`.
pub fn write_trace(net: &Network, horizon: f64, seed: u64, path: &Path) {
    let mut records = Vec::new();
    for (i, (a, b, p)) in net.edges().enumerate() {
        let mut rng = stream_rng(seed, i as u64);
        for c in sample_contacts_with(&mut rng, p, 0.0, horizon) {
            records.push(TraceRecord {
                node_a: a.0 as u64,
                node_b: b.0 as u64,
                t_start: c.start,
                t_end: c.start + c.duration,
            });
        }
    }
    records.sort_by(|x, y| x.t_start.total_cmp(&y.t_start));
    let file = std::fs::File::create(path).unwrap();
    write_trace_csv(file, &records).unwrap();
}

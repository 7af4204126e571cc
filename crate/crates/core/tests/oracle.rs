//! Values computed by an independent reimplementation and frozen here.

use loadplan_core::pipeline::{run_pipeline, PipelineConfig};
use loadplan_core::reuse_graph::{build_reuse_graph, first_window, last_window, WindowMode};
use loadplan_core::store::{create_store, Store, DEFAULT_DISK_BUDGET, HEADER_LEN};
use loadplan_core::trace::{generate_trace, AccessTrace, TraceConfig};

const GOLDEN_TRACE: &str = include_str!("golden/trace_d8_e2_n2_b2_s42.txt");

fn matrix(g: &loadplan_core::ReuseGraph) -> Vec<Vec<u64>> {
    (0..g.num_epochs).map(|u| g.row(u).to_vec()).collect()
}

#[test]
fn golden_trace_matches() {
    let t = generate_trace(&TraceConfig::new(8, 2, 2, 2, 42)).unwrap();
    assert_eq!(t.epochs(), &[vec![7, 4, 1, 2, 5, 6, 0, 3], vec![0, 5, 2, 6, 4, 1, 7, 3]]);
    assert_eq!(t.to_text(), GOLDEN_TRACE);
    assert_eq!(AccessTrace::from_text(GOLDEN_TRACE).unwrap(), t);
}

#[test]
fn golden_trace_slices() {
    let t = AccessTrace::from_text(GOLDEN_TRACE).unwrap();
    assert_eq!(t.slice(0, 0, 0).unwrap(), &[7, 4]);
    assert_eq!(t.slice(0, 0, 1).unwrap(), &[1, 2]);
    assert_eq!(t.slice(1, 1, 1).unwrap(), &[7, 3]);
    assert_eq!(t.node_sequence(1, 0).unwrap(), vec![0, 5, 4, 1]);
}

#[test]
fn single_node_trace_and_graph() {
    let t = generate_trace(&TraceConfig::new(6, 3, 1, 1, 42)).unwrap();
    assert_eq!(
        t.epochs(),
        &[vec![2, 4, 5, 0, 3, 1], vec![0, 4, 1, 5, 2, 3], vec![1, 3, 4, 5, 0, 2]]
    );
    let g = build_reuse_graph(&t, 3, WindowMode::Global).unwrap();
    assert_eq!(matrix(&g), vec![vec![0, 1, 1], vec![1, 0, 2], vec![1, 2, 0]]);
}

#[test]
fn per_node_windows() {
    let t = generate_trace(&TraceConfig::new(6, 1, 2, 1, 42)).unwrap();
    let n0 = t.node_sequence(0, 0).unwrap();
    let n1 = t.node_sequence(0, 1).unwrap();
    assert_eq!(n0, vec![2, 5, 3]);
    assert_eq!(n1, vec![4, 0, 1]);
    let sorted = |s: std::collections::HashSet<u32>| {
        let mut v: Vec<u32> = s.into_iter().collect();
        v.sort_unstable();
        v
    };
    assert_eq!(sorted(first_window(&n0, 2)), vec![2, 5]);
    assert_eq!(sorted(last_window(&n0, 2)), vec![3, 5]);
    assert_eq!(sorted(first_window(&n1, 2)), vec![0, 4]);
    assert_eq!(sorted(last_window(&n1, 2)), vec![0, 1]);
}

#[test]
fn multi_node_graphs() {
    let t = generate_trace(&TraceConfig::new(64, 4, 2, 4, 7)).unwrap();
    let global = build_reuse_graph(&t, 8, WindowMode::Global).unwrap();
    let per_node = build_reuse_graph(&t, 8, WindowMode::PerNode).unwrap();
    assert_eq!(
        matrix(&global),
        vec![
            vec![0, 14, 12, 11],
            vec![13, 0, 12, 11],
            vec![11, 11, 0, 14],
            vec![12, 13, 12, 0]
        ]
    );
    assert_eq!(
        matrix(&per_node),
        vec![
            vec![0, 15, 12, 14],
            vec![15, 0, 14, 13],
            vec![15, 13, 0, 14],
            vec![13, 14, 15, 0]
        ]
    );
}

#[test]
fn partial_batch_graphs() {
    let mut c = TraceConfig::new(10, 3, 2, 3, 5);
    c.drop_last = false;
    let t = generate_trace(&c).unwrap();
    assert_eq!(
        t.epochs(),
        &[
            vec![2, 1, 5, 9, 0, 8, 7, 3, 6, 4],
            vec![7, 1, 8, 4, 6, 9, 0, 5, 2, 3],
            vec![7, 2, 0, 9, 6, 8, 3, 1, 4, 5]
        ]
    );
    let global = build_reuse_graph(&t, 2, WindowMode::Global).unwrap();
    let per_node = build_reuse_graph(&t, 2, WindowMode::PerNode).unwrap();
    assert_eq!(matrix(&global), vec![vec![0, 2, 3], vec![2, 0, 2], vec![2, 2, 0]]);
    assert_eq!(matrix(&per_node), vec![vec![0, 3, 4], vec![2, 0, 2], vec![3, 3, 0]]);
}

#[test]
fn store_payload_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.bin");
    create_store(&path, 4, 8, 1, DEFAULT_DISK_BUDGET).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    let hex: String = bytes[HEADER_LEN as usize..]
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect();
    assert_eq!(hex, "c15c0289ec2d0a9167ec8e65a18debbe5e5532fbeea293f80bc942ee9086c171");
    let s = Store::open(&path).unwrap();
    assert_eq!(s.read_one(3).unwrap(), bytes[HEADER_LEN as usize + 24..].to_vec());
}

/// Per-step maximal hits are myopic: with one slot per node the plan can
/// end up with fewer hits than the plain slice partition.
#[test]
fn remap_can_trail_baseline_on_tiny_batches() {
    let mut c = PipelineConfig::default();
    c.trace = TraceConfig::new(5, 3, 2, 1, 15959503957467194410);
    c.buffer_size = 39;
    let out = run_pipeline(&c).unwrap();
    assert_eq!(out.trace.epochs(), &[vec![0, 2, 3, 4], vec![0, 3, 2, 1], vec![0, 1, 2, 4]]);
    assert_eq!(out.order.order, vec![0, 1, 2]);
    assert_eq!(out.optimized.summary.misses_per_epoch, vec![4, 2, 2]);
    assert_eq!(out.baseline.summary.misses_per_epoch, vec![4, 3, 0]);
}

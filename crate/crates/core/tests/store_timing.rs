//! Disk-heavy; run with `cargo test --release -- --ignored`.

use std::time::Instant;

use loadplan_core::store::{create_store, Store, DEFAULT_DISK_BUDGET};

#[test]
#[ignore = "writes a 256 MiB store"]
fn full_chunk_beats_per_sample_loop() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("big.bin");
    let (count, size) = (65_536u64, 4096u64);
    create_store(&path, count, size, 1, DEFAULT_DISK_BUDGET).unwrap();
    let store = Store::open(&path).unwrap();

    // Buffers are allocated and the page cache warmed before timing.
    let (mut big, mut one) = (Vec::new(), Vec::new());
    store.read_chunk_into(0, count, &mut big).unwrap();
    store.read_chunk_into(0, 1, &mut one).unwrap();

    let started = Instant::now();
    store.read_chunk_into(0, count, &mut big).unwrap();
    std::hint::black_box(&big);
    let chunk = started.elapsed();

    let started = Instant::now();
    for i in 0..count {
        store.read_chunk_into(i, 1, &mut one).unwrap();
        std::hint::black_box(&one);
    }
    let looped = started.elapsed();
    println!("full chunk {chunk:?}, per-sample loop {looped:?}");
    assert!(chunk < looped);
}

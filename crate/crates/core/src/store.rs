//! Flat binary sample store used for real read micro-benchmarks.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! offset  size  field
//! 0       4     magic "SLRD"
//! 4       2     version (1)
//! 6       8     sample_count
//! 14      8     sample_size (bytes)
//! 22      ...   payload: sample_count * sample_size bytes, samples in id order
//! ```
//!
//! The payload is the little-endian byte stream of SplitMix64 seeded with the
//! fill seed, truncated to the payload length.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Read as _, Write as _};
use std::os::unix::fs::FileExt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::cost_model::Pattern;
use crate::error::{Error, Result};
use crate::rng::SplitMix64;

pub const MAGIC: [u8; 4] = *b"SLRD";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: u64 = 22;
/// Default limit on payload bytes written by [`create_store`].
pub const DEFAULT_DISK_BUDGET: u64 = 4 << 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StoreHeader {
    pub version: u16,
    pub sample_count: u64,
    pub sample_size: u64,
}

impl StoreHeader {
    pub fn payload_len(&self) -> u64 {
        self.sample_count * self.sample_size
    }

    pub fn to_bytes(&self) -> [u8; HEADER_LEN as usize] {
        let mut out = [0u8; HEADER_LEN as usize];
        out[0..4].copy_from_slice(&MAGIC);
        out[4..6].copy_from_slice(&self.version.to_le_bytes());
        out[6..14].copy_from_slice(&self.sample_count.to_le_bytes());
        out[14..22].copy_from_slice(&self.sample_size.to_le_bytes());
        out
    }

    fn parse(bytes: &[u8; HEADER_LEN as usize], path: &Path) -> Result<Self> {
        let corrupt = |msg: &str| Error::Corrupt {
            path: path.to_path_buf(),
            msg: msg.to_string(),
        };
        if bytes[0..4] != MAGIC {
            return Err(corrupt("bad magic"));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != VERSION {
            return Err(corrupt(&format!("unsupported version {version}")));
        }
        let sample_count = u64::from_le_bytes(bytes[6..14].try_into().expect("8 bytes"));
        let sample_size = u64::from_le_bytes(bytes[14..22].try_into().expect("8 bytes"));
        sample_count
            .checked_mul(sample_size)
            .ok_or_else(|| corrupt("payload length overflows"))?;
        Ok(Self {
            version,
            sample_count,
            sample_size,
        })
    }
}

/// Write a store with a seeded payload. Recreating with the same arguments
/// yields identical bytes.
pub fn create_store(
    path: impl AsRef<Path>,
    count: u64,
    sample_size: u64,
    fill_seed: u64,
    disk_budget: u64,
) -> Result<StoreHeader> {
    let path = path.as_ref();
    let payload = count
        .checked_mul(sample_size)
        .filter(|&p| p <= disk_budget)
        .ok_or_else(|| {
            Error::Config(format!(
                "{count} x {sample_size} bytes exceeds the disk budget of {disk_budget}"
            ))
        })?;
    let header = StoreHeader {
        version: VERSION,
        sample_count: count,
        sample_size,
    };
    let file = File::create(path).map_err(|e| Error::storage(path, e))?;
    let mut w = BufWriter::with_capacity(1 << 20, file);
    w.write_all(&header.to_bytes())
        .map_err(|e| Error::storage(path, e))?;

    let mut rng = SplitMix64::new(fill_seed);
    let mut block = vec![0u8; 1 << 16];
    let mut left = payload;
    while left > 0 {
        let n = left.min(block.len() as u64) as usize;
        let filled = n.next_multiple_of(8).min(block.len());
        for word in block[..filled].chunks_mut(8) {
            let bytes = rng.next_u64().to_le_bytes();
            word.copy_from_slice(&bytes[..word.len()]);
        }
        w.write_all(&block[..n]).map_err(|e| Error::storage(path, e))?;
        left -= n as u64;
    }
    w.flush().map_err(|e| Error::storage(path, e))?;
    Ok(header)
}

/// Read-only handle; reads are positional so the handle can be shared
/// between threads.
#[derive(Debug)]
pub struct Store {
    path: PathBuf,
    file: File,
    header: StoreHeader,
}

impl Store {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut file = File::open(&path).map_err(|e| Error::storage(&path, e))?;
        let mut raw = [0u8; HEADER_LEN as usize];
        file.read_exact(&mut raw).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => Error::Corrupt {
                path: path.clone(),
                msg: "truncated header".into(),
            },
            _ => Error::storage(&path, e),
        })?;
        let header = StoreHeader::parse(&raw, &path)?;
        let len = file
            .metadata()
            .map_err(|e| Error::storage(&path, e))?
            .len();
        if len != HEADER_LEN + header.payload_len() {
            return Err(Error::Corrupt {
                path,
                msg: format!(
                    "file is {len} bytes, header implies {}",
                    HEADER_LEN + header.payload_len()
                ),
            });
        }
        Ok(Self { path, file, header })
    }

    pub fn header(&self) -> &StoreHeader {
        &self.header
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn offset_of(&self, index: u64) -> u64 {
        HEADER_LEN + index * self.header.sample_size
    }

    pub fn read_one(&self, index: u64) -> Result<Vec<u8>> {
        self.read_chunk(index, 1)
    }

    /// `len` consecutive samples starting at `start`, in one positional read.
    pub fn read_chunk(&self, start: u64, len: u64) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.read_chunk_into(start, len, &mut buf)?;
        Ok(buf)
    }

    pub fn read_chunk_into(&self, start: u64, len: u64, buf: &mut Vec<u8>) -> Result<()> {
        let end = start
            .checked_add(len)
            .filter(|&e| e <= self.header.sample_count)
            .ok_or_else(|| {
                Error::Bounds(format!(
                    "samples [{start}, {start}+{len}) outside store of {}",
                    self.header.sample_count
                ))
            })?;
        let bytes = ((end - start) * self.header.sample_size) as usize;
        buf.resize(bytes, 0);
        self.file
            .read_exact_at(buf, self.offset_of(start))
            .map_err(|e| Error::storage(&self.path, e))
    }
}

/// One issued read: which process, byte offset, byte length.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OffsetRecord {
    pub proc: usize,
    pub offset: u64,
    pub len: u64,
}

#[derive(Debug, Clone)]
pub struct PatternBench {
    pub pattern: Pattern,
    pub procs: usize,
    pub seconds: f64,
    /// Reads in issue order, grouped by process.
    pub offsets: Vec<OffsetRecord>,
}

/// Sample indices (start, len) each process reads under a pattern.
/// Random uses a SplitMix64 shuffle of all ids split into contiguous shares.
pub fn pattern_reads(pattern: Pattern, count: u64, procs: usize, seed: u64) -> Vec<Vec<(u64, u64)>> {
    let procs = procs.max(1);
    let share = count.div_ceil(procs as u64);
    let range = |p: usize| {
        let lo = (p as u64 * share).min(count);
        lo..((p as u64 + 1) * share).min(count)
    };
    match pattern {
        Pattern::Random => {
            let mut ids: Vec<u64> = (0..count).collect();
            SplitMix64::new(seed).shuffle(&mut ids);
            (0..procs)
                .map(|p| {
                    let r = range(p);
                    ids[r.start as usize..r.end as usize]
                        .iter()
                        .map(|&i| (i, 1))
                        .collect()
                })
                .collect()
        }
        Pattern::SequentialStride => (0..procs)
            .map(|p| {
                (p as u64..count)
                    .step_by(procs)
                    .map(|i| (i, 1))
                    .collect()
            })
            .collect(),
        Pattern::ChunkCycle => (0..procs).map(|p| range(p).map(|i| (i, 1)).collect()).collect(),
        Pattern::FullChunk => (0..procs)
            .map(|p| {
                let r = range(p);
                if r.is_empty() {
                    Vec::new()
                } else {
                    vec![(r.start, r.end - r.start)]
                }
            })
            .collect(),
    }
}

/// Replay one access pattern with `procs` threads and time it.
pub fn bench_pattern(store: &Store, pattern: Pattern, procs: usize, seed: u64) -> Result<PatternBench> {
    let plan = pattern_reads(pattern, store.header().sample_count, procs, seed);
    let started = Instant::now();
    let results: Vec<Result<()>> = std::thread::scope(|scope| {
        let handles: Vec<_> = plan
            .iter()
            .map(|reads| {
                scope.spawn(move || {
                    let mut buf = Vec::new();
                    for &(start, len) in reads {
                        store.read_chunk_into(start, len, &mut buf)?;
                        std::hint::black_box(&buf);
                    }
                    Ok(())
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("reader thread panicked"))
            .collect()
    });
    let seconds = started.elapsed().as_secs_f64();
    results.into_iter().collect::<Result<()>>()?;

    let size = store.header().sample_size;
    let offsets = plan
        .iter()
        .enumerate()
        .flat_map(|(p, reads)| {
            reads.iter().map(move |&(start, len)| OffsetRecord {
                proc: p,
                offset: HEADER_LEN + start * size,
                len: len * size,
            })
        })
        .collect();
    Ok(PatternBench {
        pattern,
        procs: plan.len(),
        seconds,
        offsets,
    })
}

/// All four patterns, in the order random, stride, chunk-cycle, full-chunk.
pub fn bench_patterns(store: &Store, procs: usize, seed: u64) -> Result<Vec<PatternBench>> {
    Pattern::ALL
        .iter()
        .map(|&p| bench_pattern(store, p, procs, seed))
        .collect()
}

/// `pattern,procs,seconds`.
pub fn bench_csv(results: &[PatternBench]) -> String {
    let mut out = String::from("pattern,procs,seconds\n");
    for r in results {
        let _ = writeln!(out, "{},{},{}", r.pattern, r.procs, r.seconds);
    }
    out
}

/// `pattern,proc,seq,offset,len` for plotting offset traces.
pub fn offsets_csv(results: &[PatternBench]) -> String {
    let mut out = String::from("pattern,proc,seq,offset,len\n");
    for r in results {
        let mut seq = vec![0usize; r.procs];
        for o in &r.offsets {
            let _ = writeln!(out, "{},{},{},{},{}", r.pattern, o.proc, seq[o.proc], o.offset, o.len);
            seq[o.proc] += 1;
        }
    }
    out
}

/// Parse `pattern,procs,seconds` rows back.
pub fn parse_bench_csv(text: &str) -> Result<Vec<(Pattern, usize, f64)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with("pattern,") {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 3 {
            return Err(Error::parse(i + 1, "expected pattern,procs,seconds"));
        }
        let pattern: Pattern = f[0].parse()?;
        let procs = f[1]
            .parse()
            .map_err(|_| Error::parse(i + 1, "bad procs"))?;
        let secs = f[2]
            .parse()
            .map_err(|_| Error::parse(i + 1, "bad seconds"))?;
        out.push((pattern, procs, secs));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_only_store() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("empty.slrd");
        create_store(&p, 0, 64, 1, DEFAULT_DISK_BUDGET).unwrap();
        assert_eq!(std::fs::metadata(&p).unwrap().len(), HEADER_LEN);
        let s = Store::open(&p).unwrap();
        assert_eq!(s.header().sample_count, 0);
        assert!(matches!(s.read_one(0), Err(Error::Bounds(_))));
    }

    #[test]
    fn golden_payload() {
        // Reference bytes: SplitMix64(1) words 0..4, little-endian.
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.slrd");
        create_store(&p, 4, 8, 1, DEFAULT_DISK_BUDGET).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert_eq!(&bytes[..4], b"SLRD");
        let hex: String = bytes[22..].iter().map(|b| format!("{b:02x}")).collect();
        assert_eq!(
            hex,
            "c15c0289ec2d0a9167ec8e65a18debbe5e5532fbeea293f80bc942ee9086c171"
        );
    }

    #[test]
    fn odd_sizes_fill_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("o.slrd");
        create_store(&p, 3, 5, 9, DEFAULT_DISK_BUDGET).unwrap();
        let s = Store::open(&p).unwrap();
        assert_eq!(s.read_chunk(0, 3).unwrap().len(), 15);
        // Prefix of the same stream regardless of length.
        let q = dir.path().join("q.slrd");
        create_store(&q, 1, 15, 9, DEFAULT_DISK_BUDGET).unwrap();
        assert_eq!(
            s.read_chunk(0, 3).unwrap(),
            Store::open(&q).unwrap().read_one(0).unwrap()
        );
    }

    #[test]
    fn corruption_detected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.slrd");
        create_store(&p, 4, 8, 1, DEFAULT_DISK_BUDGET).unwrap();
        let mut bytes = std::fs::read(&p).unwrap();
        bytes.pop();
        std::fs::write(&p, &bytes).unwrap();
        assert!(matches!(Store::open(&p), Err(Error::Corrupt { .. })));

        bytes.push(0);
        bytes[0] = b'X';
        std::fs::write(&p, &bytes).unwrap();
        assert!(matches!(Store::open(&p), Err(Error::Corrupt { .. })));

        std::fs::write(&p, b"SLR").unwrap();
        assert!(matches!(Store::open(&p), Err(Error::Corrupt { .. })));
        assert!(matches!(
            Store::open(dir.path().join("missing")),
            Err(Error::Storage { .. })
        ));
    }

    #[test]
    fn budget_enforced() {
        let dir = tempfile::tempdir().unwrap();
        let err = create_store(dir.path().join("b"), 1000, 1000, 0, 999_999).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn pattern_read_shapes() {
        let r = pattern_reads(Pattern::SequentialStride, 10, 3, 0);
        assert_eq!(r[1], vec![(1, 1), (4, 1), (7, 1)]);
        let f = pattern_reads(Pattern::FullChunk, 10, 3, 0);
        assert_eq!(f, vec![vec![(0, 4)], vec![(4, 4)], vec![(8, 2)]]);
        let c = pattern_reads(Pattern::ChunkCycle, 10, 3, 0);
        assert_eq!(c[2], vec![(8, 1), (9, 1)]);
        let mut all: Vec<u64> = pattern_reads(Pattern::Random, 10, 3, 5)
            .concat()
            .into_iter()
            .map(|(i, _)| i)
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn single_sample_store_patterns() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("one.slrd");
        create_store(&p, 1, 32, 3, DEFAULT_DISK_BUDGET).unwrap();
        let s = Store::open(&p).unwrap();
        for b in bench_patterns(&s, 1, 0).unwrap() {
            assert_eq!(
                b.offsets,
                vec![OffsetRecord {
                    proc: 0,
                    offset: HEADER_LEN,
                    len: 32
                }]
            );
        }
    }

    #[test]
    fn bench_csv_round_trip() {
        let rows = vec![PatternBench {
            pattern: Pattern::ChunkCycle,
            procs: 4,
            seconds: 0.125,
            offsets: vec![],
        }];
        let parsed = parse_bench_csv(&bench_csv(&rows)).unwrap();
        assert_eq!(parsed, vec![(Pattern::ChunkCycle, 4, 0.125)]);
    }
}

//! Two-parameter read cost model: every discontiguous read pays `seek_cost`,
//! every transferred sample pays `stream_cost` (seconds).
//!
//! Closed forms for a dataset of `total` samples split across `procs`
//! processes, `n = ceil(total / procs)` per process, with the wall time of
//! the slowest process reported:
//!
//! | pattern           | time                       |
//! |-------------------|----------------------------|
//! | random            | `n * (seek + stream)`      |
//! | sequential stride | `n * (a * seek + stream)`  |
//! | chunk cycle       | `n * (c * seek + stream)`  |
//! | full chunk        | `seek + n * stream`        |
//!
//! `a` and `c` are fixed dimensionless seek factors ([`SeekFactors`]).

use std::fmt::Write as _;

use crate::chunking::ChunkPlan;
use crate::error::{Error, Result};

/// Measured random-access time used as the default calibration anchor.
pub const ANCHOR_RANDOM_SECS: f64 = 645.864;
/// Measured full-chunk time used as the default calibration anchor.
pub const ANCHOR_FULL_CHUNK_SECS: f64 = 3.175;
/// Sample count assumed behind the default anchors.
pub const ANCHOR_TOTAL: usize = 262_896;
/// Process count assumed behind the default anchors.
pub const ANCHOR_PROCS: usize = 16;

/// Largest threshold returned when merging never stops paying off.
pub const DEFAULT_THRESHOLD_CAP: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostModel {
    pub seek_cost: f64,
    pub stream_cost: f64,
}

impl CostModel {
    pub fn new(seek_cost: f64, stream_cost: f64) -> Result<Self> {
        let m = Self {
            seek_cost,
            stream_cost,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("seek_cost", self.seek_cost), ("stream_cost", self.stream_cost)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} = {v} must be finite and >= 0")));
            }
        }
        Ok(())
    }

    /// Model calibrated from the built-in anchor measurements.
    pub fn anchored() -> Self {
        calibrate(
            ANCHOR_RANDOM_SECS,
            ANCHOR_FULL_CHUNK_SECS,
            ANCHOR_TOTAL,
            ANCHOR_PROCS,
        )
        .expect("anchor measurements are consistent")
    }

    /// Cost of one read covering `span` contiguous samples.
    #[inline]
    pub fn read(&self, span: usize) -> f64 {
        self.seek_cost + span as f64 * self.stream_cost
    }

    /// `seek_cost=<s>` and `stream_cost=<s>` lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "seek_cost={}", self.seek_cost);
        let _ = writeln!(out, "stream_cost={}", self.stream_cost);
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let (mut seek, mut stream) = (None, None);
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(i + 1, "expected key=value"))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::parse(i + 1, "expected decimal seconds"))?;
            match k.trim() {
                "seek_cost" => seek = Some(v),
                "stream_cost" => stream = Some(v),
                _ => {}
            }
        }
        match (seek, stream) {
            (Some(s), Some(r)) => Self::new(s, r),
            _ => Err(Error::parse(0, "missing seek_cost or stream_cost")),
        }
    }
}

/// Total read time of a chunk plan.
pub fn read_cost(plan: &ChunkPlan, model: &CostModel) -> f64 {
    plan.reads.iter().map(|r| model.read(r.span())).sum()
}

/// Cost of reading `count` samples one at a time.
pub fn singles_cost(count: usize, model: &CostModel) -> f64 {
    count as f64 * model.read(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pattern {
    Random,
    SequentialStride,
    ChunkCycle,
    FullChunk,
}

impl Pattern {
    pub const ALL: [Pattern; 4] = [
        Pattern::Random,
        Pattern::SequentialStride,
        Pattern::ChunkCycle,
        Pattern::FullChunk,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Pattern::Random => "random",
            Pattern::SequentialStride => "sequential-stride",
            Pattern::ChunkCycle => "chunk-cycle",
            Pattern::FullChunk => "full-chunk",
        }
    }
}

impl std::fmt::Display for Pattern {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Pattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "random" => Ok(Pattern::Random),
            "sequential-stride" | "stride" => Ok(Pattern::SequentialStride),
            "chunk-cycle" => Ok(Pattern::ChunkCycle),
            "full-chunk" => Ok(Pattern::FullChunk),
            other => Err(Error::Validation(format!("unknown access pattern `{other}`"))),
        }
    }
}

/// Fraction of a full seek paid per read by the two sequential one-at-a-time
/// patterns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeekFactors {
    pub stride: f64,
    pub chunk_cycle: f64,
}

impl Default for SeekFactors {
    fn default() -> Self {
        Self {
            stride: 0.4,
            chunk_cycle: 0.15,
        }
    }
}

fn per_proc(total: usize, procs: usize) -> Result<usize> {
    if procs == 0 {
        return Err(Error::Validation("procs must be >= 1".into()));
    }
    Ok(total.div_ceil(procs))
}

pub fn pattern_cost(pattern: Pattern, total: usize, procs: usize, model: &CostModel) -> Result<f64> {
    pattern_cost_with(pattern, total, procs, model, &SeekFactors::default())
}

pub fn pattern_cost_with(
    pattern: Pattern,
    total: usize,
    procs: usize,
    model: &CostModel,
    factors: &SeekFactors,
) -> Result<f64> {
    let n = per_proc(total, procs)? as f64;
    let (s, r) = (model.seek_cost, model.stream_cost);
    Ok(match pattern {
        Pattern::Random => n * (s + r),
        Pattern::SequentialStride => n * (factors.stride * s + r),
        Pattern::ChunkCycle => n * (factors.chunk_cycle * s + r),
        Pattern::FullChunk => s + n * r,
    })
}

/// Solve the random and full-chunk closed forms for `(seek, stream)`:
/// `seek = (random - full) / (n - 1)`, `stream = (full - seek) / n`.
pub fn calibrate(random: f64, full_chunk: f64, total: usize, procs: usize) -> Result<CostModel> {
    if !(random.is_finite() && full_chunk.is_finite()) || random < 0.0 || full_chunk < 0.0 {
        return Err(Error::Calibration("measurements must be finite and >= 0".into()));
    }
    let n = per_proc(total, procs).map_err(|e| Error::Calibration(e.to_string()))?;
    if n == 0 {
        return Err(Error::Calibration("no samples to calibrate against".into()));
    }
    let seek = if n == 1 {
        // Both patterns issue exactly one read; the split is unidentifiable.
        if random != full_chunk {
            return Err(Error::Calibration(format!(
                "one sample per process requires equal times, got {random} and {full_chunk}"
            )));
        }
        0.0
    } else {
        (random - full_chunk) / (n - 1) as f64
    };
    let stream = (full_chunk - seek) / n as f64;
    if seek < 0.0 || stream < 0.0 {
        return Err(Error::Calibration(format!(
            "measurements imply negative costs (seek {seek}, stream {stream})"
        )));
    }
    Ok(CostModel {
        seek_cost: seek,
        stream_cost: stream,
    })
}

/// Largest span `g` for which one read of span `g` costs no more than two
/// single reads: `seek + g * stream <= 2 * (seek + stream)`, i.e.
/// `g <= seek / stream + 2`. Returns `cap` when `stream_cost` is zero or the
/// bound exceeds it.
pub fn derive_threshold(model: &CostModel, cap: usize) -> usize {
    let cap = cap.max(1);
    if model.stream_cost <= 0.0 {
        return cap;
    }
    let split = 2.0 * model.read(1);
    let bound = model.seek_cost / model.stream_cost + 2.0;
    if !bound.is_finite() || bound >= cap as f64 {
        return cap;
    }
    let mut g = bound.floor().max(1.0) as usize;
    // Settle rounding against the exact cost comparison.
    while g < cap && model.read(g + 1) <= split {
        g += 1;
    }
    while g > 1 && model.read(g) > split {
        g -= 1;
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chunking::{plan_chunks, Read};

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn read_cost_examples() {
        let m = CostModel::new(1.0, 0.1).unwrap();
        assert_eq!(read_cost(&ChunkPlan::default(), &m), 0.0);
        let singles = ChunkPlan::singles(&[1, 5, 9]);
        assert!((read_cost(&singles, &m) - 3.0 * 1.1).abs() < 1e-12);
        let chunk = ChunkPlan {
            reads: vec![Read::Chunk {
                start: 0,
                end: 14,
                needed: 15,
            }],
            needed: 15,
            redundant: 0,
        };
        assert!((read_cost(&chunk, &m) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn full_chunk_closed_form() {
        let m = CostModel::new(0.7, 0.01).unwrap();
        let t = pattern_cost(Pattern::FullChunk, 500, 1, &m).unwrap();
        assert!((t - (0.7 + 500.0 * 0.01)).abs() < 1e-12);
    }

    #[test]
    fn pattern_ordering() {
        for (s, r) in [(1.0, 0.001), (0.05, 0.0002), (3.0, 1.0)] {
            let m = CostModel::new(s, r).unwrap();
            let c: Vec<f64> = Pattern::ALL
                .iter()
                .map(|&p| pattern_cost(p, 10_000, 8, &m).unwrap())
                .collect();
            assert!(c[0] > c[1] && c[1] > c[2] && c[2] > c[3], "{c:?}");
        }
    }

    #[test]
    fn unknown_pattern() {
        assert!("zigzag".parse::<Pattern>().is_err());
        assert_eq!("full_chunk".parse::<Pattern>().unwrap(), Pattern::FullChunk);
    }

    #[test]
    fn synthetic_round_trip() {
        let (s, r, n) = (0.25, 0.003, 40usize);
        let random = n as f64 * (s + r);
        let full = s + n as f64 * r;
        let m = calibrate(random, full, n * 4, 4).unwrap();
        assert!(rel(m.seek_cost, s) < 1e-12);
        assert!(rel(m.stream_cost, r) < 1e-12);
    }

    #[test]
    fn single_sample_boundary() {
        let m = calibrate(2.0, 2.0, 3, 3).unwrap();
        assert_eq!(m.seek_cost, 0.0);
        assert_eq!(m.stream_cost, 2.0);
        assert!(matches!(calibrate(3.0, 2.0, 3, 3), Err(Error::Calibration(_))));
    }

    #[test]
    fn inconsistent_measurements() {
        // Full chunk slower than random implies negative seek.
        assert!(matches!(calibrate(1.0, 5.0, 100, 1), Err(Error::Calibration(_))));
        // Too few samples per process for the measured gap: negative stream.
        assert!(matches!(calibrate(645.864, 3.175, 100, 1), Err(Error::Calibration(_))));
    }

    #[test]
    fn anchored_model_reproduces_anchors() {
        let m = CostModel::anchored();
        let r = pattern_cost(Pattern::Random, ANCHOR_TOTAL, ANCHOR_PROCS, &m).unwrap();
        let f = pattern_cost(Pattern::FullChunk, ANCHOR_TOTAL, ANCHOR_PROCS, &m).unwrap();
        assert!(rel(r, ANCHOR_RANDOM_SECS) < 1e-9);
        assert!(rel(f, ANCHOR_FULL_CHUNK_SECS) < 1e-9);
    }

    #[test]
    fn thresholds() {
        assert_eq!(derive_threshold(&CostModel::new(13.0, 1.0).unwrap(), 1024), 15);
        assert_eq!(derive_threshold(&CostModel::new(1.3, 0.1).unwrap(), 1024), 15);
        assert_eq!(derive_threshold(&CostModel::new(0.0, 1.0).unwrap(), 1024), 2);
        assert_eq!(derive_threshold(&CostModel::new(1e9, 1e-9).unwrap(), 64), 64);
        assert_eq!(derive_threshold(&CostModel::new(1.0, 0.0).unwrap(), 99), 99);
    }

    #[test]
    fn calibrated_threshold_never_loses_to_singles() {
        let m = CostModel::new(0.5, 0.1).unwrap();
        let t = derive_threshold(&m, DEFAULT_THRESHOLD_CAP);
        let fetch = [0, 3, 4, 9, 40, 41, 47, 90];
        let merged = read_cost(&plan_chunks(&fetch, t).unwrap(), &m);
        assert!(merged <= read_cost(&ChunkPlan::singles(&fetch), &m));
    }

    #[test]
    fn model_text_round_trip() {
        let m = CostModel::anchored();
        assert_eq!(CostModel::from_text(&m.to_text()).unwrap(), m);
        assert!(CostModel::from_text("seek_cost=-1\nstream_cost=1\n").is_err());
    }
}

//! Epoch-transition graph. The weight of edge `u -> v` counts the samples
//! needed at the start of epoch `v` that are not held at the end of epoch
//! `u`: `card(First(v) \ Last(u))`.

use std::collections::HashSet;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::trace::{AccessTrace, SampleId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WindowMode {
    /// One pooled window of `buffer_size * num_nodes` samples.
    #[default]
    Global,
    /// A `buffer_size` window per node over that node's own slices.
    PerNode,
}

impl std::str::FromStr for WindowMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "global" => Ok(WindowMode::Global),
            "pernode" | "per-node" | "per_node" => Ok(WindowMode::PerNode),
            other => Err(Error::Config(format!("unknown window mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for WindowMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            WindowMode::Global => "global",
            WindowMode::PerNode => "pernode",
        })
    }
}

/// First `size` distinct ids of `seq`.
pub fn first_window(seq: &[SampleId], size: usize) -> HashSet<SampleId> {
    let mut out = HashSet::with_capacity(size.min(seq.len()));
    for &id in seq {
        if out.len() >= size {
            break;
        }
        out.insert(id);
    }
    out
}

/// Last `size` distinct ids of `seq`.
pub fn last_window(seq: &[SampleId], size: usize) -> HashSet<SampleId> {
    let mut out = HashSet::with_capacity(size.min(seq.len()));
    for &id in seq.iter().rev() {
        if out.len() >= size {
            break;
        }
        out.insert(id);
    }
    out
}

fn windows(
    trace: &AccessTrace,
    epoch: usize,
    buffer_size: usize,
    mode: WindowMode,
    pick: fn(&[SampleId], usize) -> HashSet<SampleId>,
) -> Result<Vec<HashSet<SampleId>>> {
    if buffer_size == 0 {
        return Err(Error::Config("buffer_size must be >= 1".into()));
    }
    let nodes = trace.config().num_nodes;
    match mode {
        WindowMode::Global => Ok(vec![pick(trace.epoch(epoch)?, buffer_size * nodes)]),
        WindowMode::PerNode => (0..nodes)
            .map(|k| Ok(pick(&trace.node_sequence(epoch, k)?, buffer_size)))
            .collect(),
    }
}

/// Buffer contents at the end of `epoch`: one set in Global mode, one per
/// node in PerNode mode.
pub fn last_buffer_window(
    trace: &AccessTrace,
    epoch: usize,
    buffer_size: usize,
    mode: WindowMode,
) -> Result<Vec<HashSet<SampleId>>> {
    windows(trace, epoch, buffer_size, mode, last_window)
}

/// Samples requested at the start of `epoch`, shaped like [`last_buffer_window`].
pub fn first_buffer_window(
    trace: &AccessTrace,
    epoch: usize,
    buffer_size: usize,
    mode: WindowMode,
) -> Result<Vec<HashSet<SampleId>>> {
    windows(trace, epoch, buffer_size, mode, first_window)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReuseGraph {
    pub num_epochs: usize,
    /// Row-major `num_epochs x num_epochs`.
    weights: Vec<u64>,
    pub buffer_size: usize,
    pub mode: WindowMode,
}

impl ReuseGraph {
    /// Wrap an explicit matrix; the diagonal must be zero.
    pub fn from_matrix(rows: Vec<Vec<u64>>) -> Result<Self> {
        let n = rows.len();
        let mut weights = Vec::with_capacity(n * n);
        for (u, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(Error::Validation(format!(
                    "row {u} has {} entries, expected {n}",
                    row.len()
                )));
            }
            if row[u] != 0 {
                return Err(Error::Validation(format!("diagonal entry {u} is not zero")));
            }
            weights.extend(row);
        }
        Ok(Self {
            num_epochs: n,
            weights,
            buffer_size: 0,
            mode: WindowMode::Global,
        })
    }

    #[inline]
    pub fn weight(&self, u: usize, v: usize) -> u64 {
        self.weights[u * self.num_epochs + v]
    }

    pub fn row(&self, u: usize) -> &[u64] {
        &self.weights[u * self.num_epochs..(u + 1) * self.num_epochs]
    }

    /// Plain-text export: first line `E`, then `E` rows of space-separated counts.
    pub fn to_text(&self) -> String {
        let mut out = format!("{}\n", self.num_epochs);
        for u in 0..self.num_epochs {
            let row: Vec<String> = self.row(u).iter().map(u64::to_string).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
        let (_, header) = lines.next().ok_or_else(|| Error::parse(1, "empty graph file"))?;
        let n: usize = header
            .trim()
            .parse()
            .map_err(|_| Error::parse(1, "expected epoch count"))?;
        let mut rows = Vec::with_capacity(n);
        for (i, line) in lines {
            let row = line
                .split_whitespace()
                .map(|t| t.parse::<u64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::parse(i + 1, "expected non-negative counts"))?;
            rows.push(row);
        }
        if rows.len() != n {
            return Err(Error::parse(0, format!("expected {n} rows, got {}", rows.len())));
        }
        Self::from_matrix(rows)
    }
}

/// Edge weights `card(First(v) \ Last(u))`, summed over nodes in PerNode mode.
pub fn build_reuse_graph(
    trace: &AccessTrace,
    buffer_size: usize,
    mode: WindowMode,
) -> Result<ReuseGraph> {
    let e = trace.config().num_epochs;
    let firsts = (0..e)
        .map(|ep| first_buffer_window(trace, ep, buffer_size, mode))
        .collect::<Result<Vec<_>>>()?;
    let lasts = (0..e)
        .map(|ep| last_buffer_window(trace, ep, buffer_size, mode))
        .collect::<Result<Vec<_>>>()?;

    let weights: Vec<u64> = (0..e * e)
        .into_par_iter()
        .map(|idx| {
            let (u, v) = (idx / e, idx % e);
            if u == v {
                return 0;
            }
            firsts[v]
                .iter()
                .zip(&lasts[u])
                .map(|(first, last)| first.difference(last).count() as u64)
                .sum()
        })
        .collect();

    Ok(ReuseGraph {
        num_epochs: e,
        weights,
        buffer_size,
        mode,
    })
}

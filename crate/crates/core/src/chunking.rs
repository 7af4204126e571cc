//! Aggregated chunk reads. Fetch indices of one node and step are sorted and
//! greedily merged into contiguous reads no longer than a threshold.

use crate::error::{Error, Result};
use crate::trace::SampleId;

/// Default maximum chunk span, in samples.
pub const DEFAULT_THRESHOLD: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Read {
    Single(SampleId),
    /// Inclusive range; `needed` of its samples were requested.
    Chunk {
        start: SampleId,
        end: SampleId,
        needed: usize,
    },
}

impl Read {
    pub fn span(&self) -> usize {
        match *self {
            Read::Single(_) => 1,
            Read::Chunk { start, end, .. } => (end - start) as usize + 1,
        }
    }

    pub fn bounds(&self) -> (SampleId, SampleId) {
        match *self {
            Read::Single(i) => (i, i),
            Read::Chunk { start, end, .. } => (start, end),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Read::Single(_) => "single",
            Read::Chunk { .. } => "chunk",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ChunkPlan {
    pub reads: Vec<Read>,
    pub needed: usize,
    pub redundant: usize,
}

impl ChunkPlan {
    /// One single read per index, no merging.
    pub fn singles(fetch: &[SampleId]) -> Self {
        let mut ids = fetch.to_vec();
        ids.sort_unstable();
        ids.dedup();
        Self {
            needed: ids.len(),
            reads: ids.into_iter().map(Read::Single).collect(),
            redundant: 0,
        }
    }

    /// Samples covered by reads but not requested.
    pub fn redundant_ids(&self, fetch: &[SampleId]) -> Vec<SampleId> {
        let mut out = Vec::with_capacity(self.redundant);
        let mut wanted = fetch.to_vec();
        wanted.sort_unstable();
        for r in &self.reads {
            if let Read::Chunk { start, end, .. } = *r {
                out.extend((start..=end).filter(|id| wanted.binary_search(id).is_err()));
            }
        }
        out
    }
}

/// Greedy left-to-right merge: a chunk opens at the first uncovered index
/// and absorbs following indices while `index - start + 1 <= threshold`.
pub fn plan_chunks(fetch: &[SampleId], threshold: usize) -> Result<ChunkPlan> {
    if threshold == 0 {
        return Err(Error::Config("chunk threshold must be >= 1".into()));
    }
    let mut ids = fetch.to_vec();
    ids.sort_unstable();
    ids.dedup();

    let mut plan = ChunkPlan {
        needed: ids.len(),
        ..ChunkPlan::default()
    };
    let mut i = 0;
    while i < ids.len() {
        let start = ids[i];
        let mut j = i + 1;
        while j < ids.len() && (ids[j] - start) as usize + 1 <= threshold {
            j += 1;
        }
        let count = j - i;
        if count == 1 {
            plan.reads.push(Read::Single(start));
        } else {
            let end = ids[j - 1];
            let read = Read::Chunk {
                start,
                end,
                needed: count,
            };
            plan.redundant += read.span() - count;
            plan.reads.push(read);
        }
        i = j;
    }
    Ok(plan)
}

/// Percentage of needed samples served by multi-sample chunk reads.
pub fn chunked_fraction<'a>(plans: impl IntoIterator<Item = &'a ChunkPlan>) -> f64 {
    let (mut chunked, mut needed) = (0usize, 0usize);
    for p in plans {
        needed += p.needed;
        chunked += p
            .reads
            .iter()
            .map(|r| match r {
                Read::Chunk { needed, .. } => *needed,
                Read::Single(_) => 0,
            })
            .sum::<usize>();
    }
    if needed == 0 {
        0.0
    } else {
        100.0 * chunked as f64 / needed as f64
    }
}

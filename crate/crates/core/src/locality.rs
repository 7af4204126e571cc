//! Node-to-sample remapping inside a global batch.
//!
//! Samples already buffered on a node are routed back to that node; the
//! global batch of every step is preserved exactly, only the node each sample
//! lands on changes.

use std::collections::{BTreeSet, HashMap, HashSet};

use crate::error::{Error, Result};
use crate::trace::SampleId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Source {
    BufferHit,
    PfsFetch,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::BufferHit => "hit",
            Source::PfsFetch => "fetch",
        }
    }
}

impl std::str::FromStr for Source {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hit" => Ok(Source::BufferHit),
            "fetch" => Ok(Source::PfsFetch),
            other => Err(Error::Validation(format!("unknown source tag `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Access {
    pub sample: SampleId,
    pub source: Source,
}

impl Access {
    pub fn hit(sample: SampleId) -> Self {
        Self {
            sample,
            source: Source::BufferHit,
        }
    }

    pub fn fetch(sample: SampleId) -> Self {
        Self {
            sample,
            source: Source::PfsFetch,
        }
    }
}

/// Per-node sample lists for one step. Within a node, buffer hits come
/// before fetches; that is also the order the node consumes them.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StepAssignment {
    pub nodes: Vec<Vec<Access>>,
}

impl StepAssignment {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn fetches(&self, node: usize) -> Vec<SampleId> {
        self.nodes[node]
            .iter()
            .filter(|a| a.source == Source::PfsFetch)
            .map(|a| a.sample)
            .collect()
    }

    pub fn fetch_counts(&self) -> Vec<usize> {
        self.nodes
            .iter()
            .map(|n| n.iter().filter(|a| a.source == Source::PfsFetch).count())
            .collect()
    }

    pub fn hit_count(&self) -> usize {
        self.nodes
            .iter()
            .flatten()
            .filter(|a| a.source == Source::BufferHit)
            .count()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.nodes.iter().map(Vec::len).collect()
    }

    /// Stable-partition each node's list into hits then fetches.
    pub fn normalize(&mut self) {
        for node in &mut self.nodes {
            node.sort_by_key(|a| a.source == Source::PfsFetch);
        }
    }

    /// The assignment must contain exactly the samples of `batch`.
    pub fn check_multiset(&self, batch: &[SampleId]) -> Result<()> {
        let mut counts: HashMap<SampleId, i64> = HashMap::with_capacity(batch.len());
        for &id in batch {
            *counts.entry(id).or_default() += 1;
        }
        for a in self.nodes.iter().flatten() {
            *counts.entry(a.sample).or_default() -= 1;
        }
        match counts.iter().find(|(_, &c)| c != 0) {
            None => Ok(()),
            Some((id, c)) => Err(Error::Consistency(format!(
                "global batch changed: sample {id} off by {}",
                -c
            ))),
        }
    }
}

/// Assignment of one epoch, one entry per step.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NodeAssignment {
    pub steps: Vec<StepAssignment>,
}

/// Membership test against a node's buffer.
pub trait Residency {
    fn holds(&self, id: SampleId) -> bool;
}

impl Residency for HashSet<SampleId> {
    fn holds(&self, id: SampleId) -> bool {
        self.contains(&id)
    }
}

impl Residency for BTreeSet<SampleId> {
    fn holds(&self, id: SampleId) -> bool {
        self.contains(&id)
    }
}

/// Local batch size node `node` gets in the original slice partition.
fn original_capacity(batch_len: usize, node: usize, local_batch: usize) -> usize {
    batch_len.saturating_sub(node * local_batch).min(local_batch)
}

/// The unmodified slice partition, tagged against the buffers.
pub fn slice_step<B: Residency>(
    buffers: &[B],
    batch: &[SampleId],
    local_batch: usize,
) -> StepAssignment {
    let mut nodes: Vec<Vec<Access>> = buffers
        .iter()
        .enumerate()
        .map(|(k, buf)| {
            let start = (k * local_batch).min(batch.len());
            let end = ((k + 1) * local_batch).min(batch.len());
            batch[start..end]
                .iter()
                .map(|&id| {
                    if buf.holds(id) {
                        Access::hit(id)
                    } else {
                        Access::fetch(id)
                    }
                })
                .collect()
        })
        .collect();
    for node in &mut nodes {
        node.sort_by_key(|a| a.source == Source::PfsFetch);
    }
    StepAssignment { nodes }
}

struct Matcher<'a> {
    holders: &'a [Vec<usize>],
    caps: &'a [usize],
    owner: Vec<Option<usize>>,
    members: Vec<Vec<usize>>,
}

impl Matcher<'_> {
    fn assign(&mut self, pos: usize, node: usize) {
        self.owner[pos] = Some(node);
        self.members[node].push(pos);
    }

    fn unassign(&mut self, pos: usize, node: usize) {
        self.owner[pos] = None;
        let m = &mut self.members[node];
        let i = m.iter().position(|&p| p == pos).expect("member list out of sync");
        m.remove(i);
    }

    /// Kuhn augmenting path: place `pos` on one of its holders, displacing
    /// current hits onto their other holders if needed.
    fn augment(&mut self, pos: usize, visited: &mut [bool]) -> bool {
        for &k in &self.holders[pos] {
            if visited[k] {
                continue;
            }
            visited[k] = true;
            if self.members[k].len() < self.caps[k] {
                self.assign(pos, k);
                return true;
            }
            let current = self.members[k].clone();
            for q in current {
                self.unassign(q, k);
                if self.augment(q, visited) {
                    self.assign(pos, k);
                    return true;
                }
                self.assign(q, k);
            }
        }
        false
    }
}

/// Remap one step against a snapshot of every node's buffer.
///
/// Placement order: samples held by exactly one node go to it (batch order,
/// up to that node's original local batch size); samples held by several
/// nodes go to the holder with the fewest assignments, lowest id on ties;
/// leftover buffered samples are placed along augmenting paths when one
/// exists, which makes the hit count a maximum matching. Everything else is
/// a fetch, placed on its original node if there is room and otherwise on
/// the lowest-id node with room.
pub fn remap_step<B: Residency>(
    buffers: &[B],
    batch: &[SampleId],
    local_batch: usize,
) -> Result<StepAssignment> {
    let n = buffers.len();
    if n == 0 || local_batch == 0 {
        return Err(Error::Config("need at least one node and local_batch >= 1".into()));
    }
    if batch.len() > n * local_batch {
        return Err(Error::Consistency(format!(
            "global batch of {} exceeds {n} x {local_batch}",
            batch.len()
        )));
    }
    let caps: Vec<usize> = (0..n)
        .map(|k| original_capacity(batch.len(), k, local_batch))
        .collect();
    let holders: Vec<Vec<usize>> = batch
        .iter()
        .map(|&id| (0..n).filter(|&k| buffers[k].holds(id)).collect())
        .collect();

    let mut m = Matcher {
        holders: &holders,
        caps: &caps,
        owner: vec![None; batch.len()],
        members: vec![Vec::new(); n],
    };

    for (pos, h) in holders.iter().enumerate() {
        if let [k] = h[..] {
            if m.members[k].len() < caps[k] {
                m.assign(pos, k);
            }
        }
    }
    for (pos, h) in holders.iter().enumerate() {
        if h.len() > 1 {
            let pick = h
                .iter()
                .copied()
                .filter(|&k| m.members[k].len() < caps[k])
                .min_by_key(|&k| (m.members[k].len(), k));
            if let Some(k) = pick {
                m.assign(pos, k);
            }
        }
    }
    for pos in 0..batch.len() {
        if m.owner[pos].is_none() && !holders[pos].is_empty() {
            let mut visited = vec![false; n];
            m.augment(pos, &mut visited);
        }
    }

    let hit_owner = m.owner.clone();
    let mut load: Vec<usize> = m.members.iter().map(Vec::len).collect();
    let mut fetch_owner = vec![None; batch.len()];
    for pos in 0..batch.len() {
        if hit_owner[pos].is_some() {
            continue;
        }
        let orig = pos / local_batch;
        let k = if load[orig] < caps[orig] {
            orig
        } else {
            (0..n)
                .find(|&k| load[k] < caps[k])
                .ok_or_else(|| Error::Consistency("no node has room for a fetch".into()))?
        };
        load[k] += 1;
        fetch_owner[pos] = Some(k);
    }

    let mut nodes = vec![Vec::new(); n];
    for (pos, &id) in batch.iter().enumerate() {
        if let Some(k) = hit_owner[pos] {
            nodes[k].push(Access::hit(id));
        }
    }
    for (pos, &id) in batch.iter().enumerate() {
        if let Some(k) = fetch_owner[pos] {
            nodes[k].push(Access::fetch(id));
        }
    }
    let step = StepAssignment { nodes };
    step.check_multiset(batch)?;
    Ok(step)
}

/// Remap every step of an epoch against one fixed buffer snapshot.
pub fn remap_epoch<B: Residency, S: AsRef<[SampleId]>>(
    prev_buffers: &[B],
    epoch_batches: &[S],
    local_batch: usize,
) -> Result<NodeAssignment> {
    let steps = epoch_batches
        .iter()
        .map(|batch| remap_step(prev_buffers, batch.as_ref(), local_batch))
        .collect::<Result<_>>()?;
    Ok(NodeAssignment { steps })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bufs(sets: &[&[SampleId]]) -> Vec<HashSet<SampleId>> {
        sets.iter().map(|s| s.iter().copied().collect()).collect()
    }

    #[test]
    fn cold_start_matches_slices() {
        let b = bufs(&[&[], &[], &[]]);
        let batch = [4, 8, 1, 0, 6, 3];
        let step = remap_step(&b, &batch, 2).unwrap();
        assert_eq!(step, slice_step(&b, &batch, 2));
        assert_eq!(step.fetch_counts(), vec![2, 2, 2]);
        assert_eq!(step.nodes[1], vec![Access::fetch(1), Access::fetch(0)]);
    }

    #[test]
    fn full_hit_step() {
        let b = bufs(&[&[3, 7], &[1, 2]]);
        let step = remap_step(&b, &[1, 3, 2, 7], 2).unwrap();
        assert_eq!(step.fetch_counts(), vec![0, 0]);
        assert_eq!(step.hit_count(), 4);
    }

    #[test]
    fn hand_example() {
        let b = bufs(&[&[9], &[5, 7]]);
        let step = remap_step(&b, &[5, 9, 2, 7], 2).unwrap();
        assert_eq!(step.nodes[0], vec![Access::hit(9), Access::fetch(2)]);
        assert_eq!(step.nodes[1], vec![Access::hit(5), Access::hit(7)]);
    }

    #[test]
    fn overflow_keeps_earliest_in_batch() {
        // Node 0 holds three samples of a step but takes only two.
        let b = bufs(&[&[1, 2, 3], &[]]);
        let step = remap_step(&b, &[3, 9, 1, 2], 2).unwrap();
        assert_eq!(step.nodes[0], vec![Access::hit(3), Access::hit(1)]);
        assert_eq!(step.nodes[1], vec![Access::fetch(9), Access::fetch(2)]);
    }

    #[test]
    fn duplicate_residency_goes_to_least_loaded() {
        let b = bufs(&[&[5, 6], &[6]]);
        let step = remap_step(&b, &[6, 5, 0, 1], 2).unwrap();
        // Fetch 0 stays on its original node 1; fetch 1 spills to node 0.
        assert_eq!(step.nodes[0], vec![Access::hit(5), Access::fetch(1)]);
        assert_eq!(step.nodes[1], vec![Access::hit(6), Access::fetch(0)]);
    }

    #[test]
    fn augmenting_path_recovers_a_hit() {
        // Greedy puts x on node 0 (lowest id among equal loads), blocking y
        // whose holders are {0, 2} with node 2 already full of its own hit.
        let (x, y, z) = (10, 11, 12);
        let b = bufs(&[&[x, y], &[x], &[y, z]]);
        let step = remap_step(&b, &[z, x, y], 1).unwrap();
        assert_eq!(step.hit_count(), 3);
        assert_eq!(step.nodes[0], vec![Access::hit(y)]);
        assert_eq!(step.nodes[1], vec![Access::hit(x)]);
        assert_eq!(step.nodes[2], vec![Access::hit(z)]);
    }

    #[test]
    fn partial_batch_respects_original_sizes() {
        let b = bufs(&[&[], &[7, 8]]);
        let step = remap_step(&b, &[7, 8, 9], 2).unwrap();
        assert_eq!(step.sizes(), vec![2, 1]);
        step.check_multiset(&[7, 8, 9]).unwrap();
        assert_eq!(step.hit_count(), 1);
    }

    #[test]
    fn multiset_violation_detected() {
        let step = StepAssignment {
            nodes: vec![vec![Access::fetch(1)], vec![Access::fetch(1)]],
        };
        assert!(matches!(step.check_multiset(&[1, 2]), Err(Error::Consistency(_))));
    }

    #[test]
    fn epoch_remap_uses_one_snapshot() {
        let b = bufs(&[&[0, 1], &[2, 3]]);
        let batches = vec![vec![2, 0, 5, 6], vec![1, 3, 4, 7]];
        let a = remap_epoch(&b, &batches, 2).unwrap();
        assert_eq!(a.steps.len(), 2);
        assert_eq!(a.steps[0].hit_count(), 2);
        assert_eq!(a.steps[1].hit_count(), 2);
    }
}

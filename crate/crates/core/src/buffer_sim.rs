//! Fixed-capacity per-node sample buffers with clairvoyant (farthest next
//! use) or LRU eviction.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::locality::Residency;
use crate::plan::SchedulePlan;
use crate::trace::SampleId;

/// Next-use time of a sample that is never accessed again.
pub const NEVER: u64 = u64::MAX;

/// Largest sequence accepted by [`optimal_miss_oracle`].
pub const ORACLE_MAX_LEN: usize = 16;
/// Largest capacity accepted by [`optimal_miss_oracle`].
pub const ORACLE_MAX_CAPACITY: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Policy {
    #[default]
    Clairvoyant,
    Lru,
}

impl Policy {
    pub fn as_str(self) -> &'static str {
        match self {
            Policy::Clairvoyant => "clairvoyant",
            Policy::Lru => "lru",
        }
    }
}

impl std::fmt::Display for Policy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "clairvoyant" | "belady" | "opt" => Ok(Policy::Clairvoyant),
            "lru" => Ok(Policy::Lru),
            other => Err(Error::Config(format!("unknown eviction policy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Hit,
    Miss,
}

/// One node's buffer.
///
/// Each resident sample carries a key: its last access time under LRU, its
/// next use under Clairvoyant. LRU evicts the smallest key; Clairvoyant
/// evicts the largest `(next_use, id)`, so never-used-again samples go first
/// and ties among them drop the larger id.
#[derive(Debug, Clone)]
pub struct BufferState {
    capacity: usize,
    policy: Policy,
    keys: HashMap<SampleId, u64>,
    order: BTreeSet<(u64, SampleId)>,
}

impl BufferState {
    pub fn new(capacity: usize, policy: Policy) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("buffer capacity must be >= 1".into()));
        }
        Ok(Self {
            capacity,
            policy,
            keys: HashMap::with_capacity(capacity.min(1 << 16) + 1),
            order: BTreeSet::new(),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn policy(&self) -> Policy {
        self.policy
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn contains(&self, sample: SampleId) -> bool {
        self.keys.contains_key(&sample)
    }

    /// Resident ids in ascending order.
    pub fn resident(&self) -> Vec<SampleId> {
        let mut ids: Vec<SampleId> = self.keys.keys().copied().collect();
        ids.sort_unstable();
        ids
    }

    fn set_key(&mut self, sample: SampleId, key: u64) {
        if let Some(old) = self.keys.insert(sample, key) {
            self.order.remove(&(old, sample));
        }
        self.order.insert((key, sample));
    }

    /// Access `sample` at logical time `now`; `next_use` is when it will be
    /// needed after this access ([`NEVER`] if not at all). A miss inserts
    /// the sample and evicts one resident if the buffer overflows; the
    /// victim may be the sample just inserted.
    pub fn access(&mut self, sample: SampleId, now: u64, next_use: u64) -> Outcome {
        let key = match self.policy {
            Policy::Lru => now,
            Policy::Clairvoyant => next_use,
        };
        let hit = self.contains(sample);
        self.set_key(sample, key);
        if !hit && self.keys.len() > self.capacity {
            self.evict();
        }
        if hit {
            Outcome::Hit
        } else {
            Outcome::Miss
        }
    }

    /// Update a resident sample's next use after another node consumed it.
    /// No effect under LRU or when the sample is absent.
    pub fn refresh(&mut self, sample: SampleId, next_use: u64) {
        if self.policy == Policy::Clairvoyant && self.contains(sample) {
            self.set_key(sample, next_use);
        }
    }

    fn evict(&mut self) -> Option<SampleId> {
        let victim = match self.policy {
            Policy::Lru => self.order.pop_first(),
            Policy::Clairvoyant => self.order.pop_last(),
        }?;
        self.keys.remove(&victim.1);
        Some(victim.1)
    }
}

impl Residency for BufferState {
    fn holds(&self, id: SampleId) -> bool {
        self.contains(id)
    }
}

/// `next[i]` is the next position after `i` holding the same id, or [`NEVER`].
pub fn next_use_table(seq: &[SampleId]) -> Vec<u64> {
    let mut next = vec![NEVER; seq.len()];
    let mut last_seen: HashMap<SampleId, usize> = HashMap::new();
    for (i, &id) in seq.iter().enumerate().rev() {
        if let Some(&j) = last_seen.get(&id) {
            next[i] = j as u64;
        }
        last_seen.insert(id, i);
    }
    next
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct HitMiss {
    pub hits: usize,
    pub misses: usize,
}

/// Run one access sequence through a fresh buffer.
pub fn simulate_sequence(seq: &[SampleId], capacity: usize, policy: Policy) -> Result<HitMiss> {
    let mut buf = BufferState::new(capacity, policy)?;
    let next = next_use_table(seq);
    let mut out = HitMiss::default();
    for (i, &id) in seq.iter().enumerate() {
        match buf.access(id, i as u64, next[i]) {
            Outcome::Hit => out.hits += 1,
            Outcome::Miss => out.misses += 1,
        }
    }
    Ok(out)
}

/// Minimum achievable misses, by exhaustive search over every eviction
/// choice (including dropping the sample just loaded). States are memoized
/// on (position, resident set).
pub fn optimal_miss_oracle(seq: &[SampleId], capacity: usize) -> Result<usize> {
    if seq.len() > ORACLE_MAX_LEN || capacity > ORACLE_MAX_CAPACITY {
        return Err(Error::Capability(format!(
            "oracle supports length <= {ORACLE_MAX_LEN} and capacity <= {ORACLE_MAX_CAPACITY}"
        )));
    }
    if capacity == 0 {
        return Err(Error::Config("buffer capacity must be >= 1".into()));
    }
    let mut ids: Vec<SampleId> = seq.to_vec();
    ids.sort_unstable();
    ids.dedup();
    let dense: Vec<u32> = seq
        .iter()
        .map(|id| ids.binary_search(id).expect("id present") as u32)
        .collect();

    struct Search<'a> {
        seq: &'a [u32],
        capacity: u32,
        width: usize,
        memo: Vec<u8>,
    }

    impl Search<'_> {
        fn best(&mut self, pos: usize, mask: u32) -> u8 {
            if pos == self.seq.len() {
                return 0;
            }
            let slot = (pos << self.width) | mask as usize;
            if self.memo[slot] != u8::MAX {
                return self.memo[slot];
            }
            let bit = 1u32 << self.seq[pos];
            let result = if mask & bit != 0 {
                self.best(pos + 1, mask)
            } else {
                let loaded = mask | bit;
                if loaded.count_ones() <= self.capacity {
                    1 + self.best(pos + 1, loaded)
                } else {
                    let mut best = u8::MAX;
                    let mut rest = loaded;
                    while rest != 0 {
                        let drop = rest & rest.wrapping_neg();
                        rest ^= drop;
                        best = best.min(self.best(pos + 1, loaded ^ drop));
                    }
                    1 + best
                }
            };
            self.memo[slot] = result;
            result
        }
    }

    let width = ids.len();
    let mut search = Search {
        seq: &dense,
        capacity: capacity as u32,
        width,
        memo: vec![u8::MAX; (seq.len() + 1) << width],
    };
    Ok(search.best(0, 0) as usize)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplayRow {
    /// Trace epoch index.
    pub epoch: usize,
    pub step: usize,
    pub node: usize,
    pub hits: usize,
    pub misses: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplayMetrics {
    pub policy: Policy,
    pub capacity: usize,
    pub rows: Vec<ReplayRow>,
}

impl ReplayMetrics {
    pub fn total_misses(&self) -> usize {
        self.rows.iter().map(|r| r.misses).sum()
    }

    pub fn total_hits(&self) -> usize {
        self.rows.iter().map(|r| r.hits).sum()
    }

    /// Misses per scheduled epoch, summed over steps and nodes.
    pub fn misses_per_epoch(&self) -> Vec<usize> {
        let mut out: Vec<(usize, usize)> = Vec::new();
        for r in &self.rows {
            match out.iter_mut().find(|(e, _)| *e == r.epoch) {
                Some((_, m)) => *m += r.misses,
                None => out.push((r.epoch, r.misses)),
            }
        }
        out.into_iter().map(|(_, m)| m).collect()
    }

    /// `epoch,step,node,hits,misses,policy`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,step,node,hits,misses,policy\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.epoch, r.step, r.node, r.hits, r.misses, self.policy
            );
        }
        out
    }
}

/// Replay every node's assigned sequence through its own buffer, warm
/// across epochs. Clairvoyant eviction sees the node's entire future
/// sequence, so it is optimal per node.
pub fn simulate(plan: &SchedulePlan, capacity: usize, policy: Policy) -> Result<ReplayMetrics> {
    BufferState::new(capacity, policy)?;
    let per_node: Vec<Vec<(usize, usize, usize, usize)>> = (0..plan.num_nodes)
        .into_par_iter()
        .map(|k| {
            let seq = plan.node_sequence(k);
            let next = next_use_table(&seq);
            let mut buf = BufferState::new(capacity, policy).expect("capacity checked");
            let mut t = 0usize;
            let mut rows = Vec::with_capacity(plan.total_steps());
            for ep in &plan.epochs {
                for (s, st) in ep.steps.iter().enumerate() {
                    let (mut hits, mut misses) = (0, 0);
                    for a in &st.assignment.nodes[k] {
                        match buf.access(a.sample, t as u64, next[t]) {
                            Outcome::Hit => hits += 1,
                            Outcome::Miss => misses += 1,
                        }
                        t += 1;
                    }
                    rows.push((ep.epoch, s, hits, misses));
                }
            }
            rows
        })
        .collect();

    let mut rows = Vec::with_capacity(plan.total_steps() * plan.num_nodes);
    let total = plan.total_steps();
    for i in 0..total {
        for (k, node_rows) in per_node.iter().enumerate() {
            let (epoch, step, hits, misses) = node_rows[i];
            rows.push(ReplayRow {
                epoch,
                step,
                node: k,
                hits,
                misses,
            });
        }
    }
    Ok(ReplayMetrics {
        policy,
        capacity,
        rows,
    })
}

//! Fetch balancing: equalize per-node storage fetch counts within a step by
//! moving fetches between nodes, letting local batch sizes drift instead.

use crate::chunking::ChunkPlan;
use crate::cost_model::{read_cost, singles_cost, CostModel};
use crate::error::{Error, Result};
use crate::locality::{Access, Source, StepAssignment};
use crate::trace::SampleId;

/// Move fetches until max - min <= 1. Each move takes the largest fetch id of
/// the most-loaded node and appends it to the least-loaded node; ties pick
/// the lowest node id. Buffer hits never move.
pub fn balance_step(step: &StepAssignment, global_batch: &[SampleId]) -> Result<StepAssignment> {
    step.check_multiset(global_batch)?;
    let n = step.num_nodes();
    let mut out = step.clone();
    if n < 2 {
        return Ok(out);
    }
    let mut counts = out.fetch_counts();
    loop {
        let (mut hi, mut lo) = (0, 0);
        for k in 1..n {
            if counts[k] > counts[hi] {
                hi = k;
            }
            if counts[k] < counts[lo] {
                lo = k;
            }
        }
        if counts[hi] - counts[lo] <= 1 {
            break;
        }
        let donor = &mut out.nodes[hi];
        let (idx, _) = donor
            .iter()
            .enumerate()
            .filter(|(_, a)| a.source == Source::PfsFetch)
            .max_by_key(|(_, a)| a.sample)
            .expect("donor has fetches");
        let moved = donor.remove(idx);
        out.nodes[lo].push(moved);
        counts[hi] -= 1;
        counts[lo] += 1;
    }
    out.check_multiset(global_batch)?;
    Ok(out)
}

/// Slowest node's fetch cost when every fetch is a single read.
pub fn barrier_time(step: &StepAssignment, model: &CostModel) -> f64 {
    step.fetch_counts()
        .into_iter()
        .map(|c| singles_cost(c, model))
        .fold(0.0, f64::max)
}

/// Slowest node's cost when fetches follow per-node chunk plans.
pub fn chunked_barrier_time(plans: &[ChunkPlan], model: &CostModel) -> f64 {
    plans
        .iter()
        .map(|p| read_cost(p, model))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepSizes {
    /// Trace epoch index.
    pub epoch: usize,
    pub step: usize,
    pub sizes: Vec<usize>,
    pub std_dev: f64,
}

/// Population standard deviation.
pub fn std_dev(values: &[usize]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<usize>() as f64 / n;
    let var = values
        .iter()
        .map(|&v| (v as f64 - mean).powi(2))
        .sum::<f64>()
        / n;
    var.sqrt()
}

/// Per-step local batch sizes of a plan and their spread across nodes.
pub fn batch_size_stats(plan: &crate::plan::SchedulePlan) -> Vec<StepSizes> {
    plan.epochs
        .iter()
        .flat_map(|ep| {
            ep.steps.iter().enumerate().map(move |(s, st)| {
                let sizes = st.assignment.sizes();
                StepSizes {
                    epoch: ep.epoch,
                    step: s,
                    std_dev: std_dev(&sizes),
                    sizes,
                }
            })
        })
        .collect()
}

/// Build a step of fetch-only nodes with the given counts; ids are assigned
/// sequentially. Useful for reasoning about count-level examples.
pub fn fetch_only_step(counts: &[usize]) -> (StepAssignment, Vec<SampleId>) {
    let mut next: SampleId = 0;
    let mut batch = Vec::new();
    let nodes = counts
        .iter()
        .map(|&c| {
            (0..c)
                .map(|_| {
                    let id = next;
                    next += 1;
                    batch.push(id);
                    Access::fetch(id)
                })
                .collect()
        })
        .collect();
    (StepAssignment { nodes }, batch)
}

pub(crate) fn ensure_balanced(step: &StepAssignment) -> Result<()> {
    let c = step.fetch_counts();
    let (min, max) = (c.iter().min(), c.iter().max());
    match (min, max) {
        (Some(lo), Some(hi)) if hi - lo > 1 => Err(Error::Consistency(format!(
            "fetch counts {c:?} are not balanced"
        ))),
        _ => Ok(()),
    }
}

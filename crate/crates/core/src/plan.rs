//! The schedule produced offline: epoch order, per-step node assignments with
//! source tags, and per-node read plans.
//!
//! Plan file layout (plain text, one record per line):
//!
//! ```text
//! # loadplan plan v1
//! dataset_size=<D>
//! num_nodes=<N>
//! local_batch=<b>
//! threshold=<max chunk span; 1 means no chunking>
//! order: <e0> <e1> ...
//! cost: <path cost>
//! [assignments]
//! epoch,step,node,sample,source        # source is hit | fetch
//! ...
//! [reads]
//! epoch,step,node,kind,start,end       # kind is single | chunk, end inclusive
//! ...
//! ```
//!
//! `epoch` is the trace epoch index; rows appear in scheduled order, and
//! within a node in consumption order.

use std::fmt::Write as _;

use crate::chunking::{plan_chunks, ChunkPlan};
use crate::epoch_order::EpochOrder;
use crate::error::{Error, Result};
use crate::locality::{Access, StepAssignment};
use crate::trace::SampleId;

#[derive(Debug, Clone, PartialEq)]
pub struct StepPlan {
    pub assignment: StepAssignment,
    /// One read plan per node.
    pub reads: Vec<ChunkPlan>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochPlan {
    /// Trace epoch index.
    pub epoch: usize,
    pub steps: Vec<StepPlan>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchedulePlan {
    pub dataset_size: usize,
    pub num_nodes: usize,
    pub local_batch: usize,
    pub threshold: usize,
    pub order: EpochOrder,
    /// In scheduled order.
    pub epochs: Vec<EpochPlan>,
}

impl SchedulePlan {
    /// One node's samples over the whole schedule, in consumption order.
    pub fn node_sequence(&self, node: usize) -> Vec<SampleId> {
        self.epochs
            .iter()
            .flat_map(|e| e.steps.iter())
            .flat_map(|s| s.assignment.nodes[node].iter().map(|a| a.sample))
            .collect()
    }

    pub fn total_steps(&self) -> usize {
        self.epochs.iter().map(|e| e.steps.len()).sum()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# loadplan plan v1");
        let _ = writeln!(out, "dataset_size={}", self.dataset_size);
        let _ = writeln!(out, "num_nodes={}", self.num_nodes);
        let _ = writeln!(out, "local_batch={}", self.local_batch);
        let _ = writeln!(out, "threshold={}", self.threshold);
        out.push_str(&self.order.to_text());
        out.push_str("[assignments]\nepoch,step,node,sample,source\n");
        for ep in &self.epochs {
            for (s, st) in ep.steps.iter().enumerate() {
                for (k, node) in st.assignment.nodes.iter().enumerate() {
                    for a in node {
                        let _ = writeln!(
                            out,
                            "{},{s},{k},{},{}",
                            ep.epoch,
                            a.sample,
                            a.source.as_str()
                        );
                    }
                }
            }
        }
        out.push_str("[reads]\nepoch,step,node,kind,start,end\n");
        for ep in &self.epochs {
            for (s, st) in ep.steps.iter().enumerate() {
                for (k, plan) in st.reads.iter().enumerate() {
                    for r in &plan.reads {
                        let (a, b) = r.bounds();
                        let _ = writeln!(out, "{},{s},{k},{},{a},{b}", ep.epoch, r.kind());
                    }
                }
            }
        }
        out
    }

    /// Parse a plan file. Read plans are rebuilt from the fetch lists and
    /// must agree with the `[reads]` section.
    pub fn from_text(text: &str) -> Result<Self> {
        #[derive(PartialEq)]
        enum Section {
            Header,
            Assignments,
            Reads,
        }
        let mut section = Section::Header;
        let (mut dataset_size, mut num_nodes, mut local_batch, mut threshold) =
            (None, None, None, None);
        let mut header_text = String::new();
        let mut rows: Vec<(usize, usize, usize, Access)> = Vec::new();
        let mut read_rows: Vec<(usize, usize, usize, String, SampleId, SampleId)> = Vec::new();

        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            match line {
                "[assignments]" => {
                    section = Section::Assignments;
                    continue;
                }
                "[reads]" => {
                    section = Section::Reads;
                    continue;
                }
                _ => {}
            }
            if line.starts_with("epoch,") {
                continue;
            }
            match section {
                Section::Header => {
                    if let Some((k, v)) = line.split_once('=') {
                        let v: usize = v
                            .trim()
                            .parse()
                            .map_err(|_| Error::parse(line_no, format!("bad value for {k}")))?;
                        match k.trim() {
                            "dataset_size" => dataset_size = Some(v),
                            "num_nodes" => num_nodes = Some(v),
                            "local_batch" => local_batch = Some(v),
                            "threshold" => threshold = Some(v),
                            other => {
                                return Err(Error::parse(line_no, format!("unknown key {other}")))
                            }
                        }
                    } else {
                        header_text.push_str(line);
                        header_text.push('\n');
                    }
                }
                Section::Assignments => {
                    let f: Vec<&str> = line.split(',').collect();
                    if f.len() != 5 {
                        return Err(Error::parse(line_no, "expected 5 fields"));
                    }
                    let num = |s: &str| {
                        s.parse::<usize>()
                            .map_err(|_| Error::parse(line_no, "expected an integer"))
                    };
                    let sample = num(f[3])? as SampleId;
                    let source = f[4]
                        .parse()
                        .map_err(|_| Error::parse(line_no, "bad source tag"))?;
                    rows.push((num(f[0])?, num(f[1])?, num(f[2])?, Access { sample, source }));
                }
                Section::Reads => {
                    let f: Vec<&str> = line.split(',').collect();
                    if f.len() != 6 {
                        return Err(Error::parse(line_no, "expected 6 fields"));
                    }
                    let num = |s: &str| {
                        s.parse::<usize>()
                            .map_err(|_| Error::parse(line_no, "expected an integer"))
                    };
                    read_rows.push((
                        num(f[0])?,
                        num(f[1])?,
                        num(f[2])?,
                        f[3].to_string(),
                        num(f[4])? as SampleId,
                        num(f[5])? as SampleId,
                    ));
                }
            }
        }

        let missing = |k: &str| Error::parse(0, format!("missing header key {k}"));
        let dataset_size = dataset_size.ok_or_else(|| missing("dataset_size"))?;
        let num_nodes = num_nodes.ok_or_else(|| missing("num_nodes"))?;
        let local_batch = local_batch.ok_or_else(|| missing("local_batch"))?;
        let threshold = threshold.ok_or_else(|| missing("threshold"))?;
        let order = EpochOrder::from_text(&header_text)?;

        let mut epochs: Vec<EpochPlan> = Vec::new();
        for (epoch, step, node, access) in rows {
            if node >= num_nodes {
                return Err(Error::Validation(format!("node {node} >= {num_nodes}")));
            }
            if epochs.last().map(|e| e.epoch) != Some(epoch) {
                epochs.push(EpochPlan {
                    epoch,
                    steps: Vec::new(),
                });
            }
            let ep = epochs.last_mut().expect("just pushed");
            while ep.steps.len() <= step {
                ep.steps.push(StepPlan {
                    assignment: StepAssignment {
                        nodes: vec![Vec::new(); num_nodes],
                    },
                    reads: Vec::new(),
                });
            }
            ep.steps[step].assignment.nodes[node].push(access);
        }
        let scheduled: Vec<usize> = epochs.iter().map(|e| e.epoch).collect();
        if scheduled != order.order {
            return Err(Error::Validation(format!(
                "assignment epochs {scheduled:?} do not follow order {:?}",
                order.order
            )));
        }

        let mut rebuilt = Vec::new();
        for ep in &mut epochs {
            for (s, st) in ep.steps.iter_mut().enumerate() {
                st.reads = (0..num_nodes)
                    .map(|k| plan_chunks(&st.assignment.fetches(k), threshold))
                    .collect::<Result<_>>()?;
                for (k, p) in st.reads.iter().enumerate() {
                    for r in &p.reads {
                        let (a, b) = r.bounds();
                        rebuilt.push((ep.epoch, s, k, r.kind().to_string(), a, b));
                    }
                }
            }
        }
        if rebuilt != read_rows {
            return Err(Error::Consistency(
                "read rows disagree with the fetch lists and threshold".into(),
            ));
        }

        Ok(Self {
            dataset_size,
            num_nodes,
            local_batch,
            threshold,
            order,
            epochs,
        })
    }
}

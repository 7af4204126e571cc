//! Ahead-of-time shuffled access order for every epoch, and its partition
//! into global batches (one per step) and per-node local batches.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

pub type SampleId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceConfig {
    pub dataset_size: usize,
    pub num_epochs: usize,
    pub num_nodes: usize,
    pub local_batch: usize,
    pub seed: u64,
    pub drop_last: bool,
}

impl TraceConfig {
    pub fn new(
        dataset_size: usize,
        num_epochs: usize,
        num_nodes: usize,
        local_batch: usize,
        seed: u64,
    ) -> Self {
        Self {
            dataset_size,
            num_epochs,
            num_nodes,
            local_batch,
            seed,
            drop_last: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_epochs == 0 {
            return Err(Error::Config("num_epochs must be >= 1".into()));
        }
        if self.num_nodes == 0 || self.local_batch == 0 {
            return Err(Error::Config(
                "num_nodes and local_batch must be >= 1".into(),
            ));
        }
        if self.dataset_size > SampleId::MAX as usize {
            return Err(Error::Config(format!(
                "dataset_size {} exceeds the sample id range",
                self.dataset_size
            )));
        }
        if self.dataset_size < self.global_batch() {
            return Err(Error::Config(format!(
                "dataset_size {} is smaller than the global batch {} ({} nodes x {})",
                self.dataset_size,
                self.global_batch(),
                self.num_nodes,
                self.local_batch
            )));
        }
        Ok(())
    }

    pub fn global_batch(&self) -> usize {
        self.num_nodes * self.local_batch
    }

    pub fn steps_per_epoch(&self) -> usize {
        let b = self.global_batch();
        if self.drop_last {
            self.dataset_size / b
        } else {
            self.dataset_size.div_ceil(b)
        }
    }

    pub fn epoch_len(&self) -> usize {
        if self.drop_last {
            self.steps_per_epoch() * self.global_batch()
        } else {
            self.dataset_size
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccessTrace {
    config: TraceConfig,
    epochs: Vec<Vec<SampleId>>,
}

/// Fisher-Yates shuffle of `[0, dataset_size)` on the epoch's SplitMix64
/// stream, truncated to whole global batches when `drop_last` is set.
pub fn generate_trace(config: &TraceConfig) -> Result<AccessTrace> {
    config.validate()?;
    let len = config.epoch_len();
    let epochs = (0..config.num_epochs)
        .map(|e| {
            let mut ids: Vec<SampleId> = (0..config.dataset_size as SampleId).collect();
            SplitMix64::for_epoch(config.seed, e as u64).shuffle(&mut ids);
            ids.truncate(len);
            ids
        })
        .collect();
    Ok(AccessTrace {
        config: *config,
        epochs,
    })
}

impl AccessTrace {
    /// Build a trace from explicit sequences, checking the trace invariants.
    pub fn from_epochs(config: TraceConfig, epochs: Vec<Vec<SampleId>>) -> Result<Self> {
        config.validate()?;
        if epochs.len() != config.num_epochs {
            return Err(Error::Validation(format!(
                "expected {} epochs, got {}",
                config.num_epochs,
                epochs.len()
            )));
        }
        for (e, seq) in epochs.iter().enumerate() {
            if seq.len() != config.epoch_len() {
                return Err(Error::Validation(format!(
                    "epoch {e} has {} entries, expected {}",
                    seq.len(),
                    config.epoch_len()
                )));
            }
            let mut seen = vec![false; config.dataset_size];
            for &id in seq {
                let slot = seen.get_mut(id as usize).ok_or_else(|| {
                    Error::Validation(format!("epoch {e}: sample {id} out of range"))
                })?;
                if std::mem::replace(slot, true) {
                    return Err(Error::Validation(format!(
                        "epoch {e}: sample {id} appears twice"
                    )));
                }
            }
        }
        Ok(Self { config, epochs })
    }

    pub fn config(&self) -> &TraceConfig {
        &self.config
    }

    pub fn epochs(&self) -> &[Vec<SampleId>] {
        &self.epochs
    }

    pub fn epoch(&self, epoch: usize) -> Result<&[SampleId]> {
        self.epochs
            .get(epoch)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Bounds(format!("epoch {epoch} >= {}", self.epochs.len())))
    }

    pub fn steps(&self) -> usize {
        self.config.steps_per_epoch()
    }

    /// The global batch of one step.
    pub fn global_batch(&self, epoch: usize, step: usize) -> Result<&[SampleId]> {
        let seq = self.epoch(epoch)?;
        if step >= self.steps() {
            return Err(Error::Bounds(format!("step {step} >= {}", self.steps())));
        }
        let b = self.config.global_batch();
        Ok(&seq[step * b..((step + 1) * b).min(seq.len())])
    }

    /// Entries `[step*B + node*b, step*B + (node+1)*b)` of the epoch.
    pub fn slice(&self, epoch: usize, step: usize, node: usize) -> Result<&[SampleId]> {
        if node >= self.config.num_nodes {
            return Err(Error::Bounds(format!(
                "node {node} >= {}",
                self.config.num_nodes
            )));
        }
        let batch = self.global_batch(epoch, step)?;
        let b = self.config.local_batch;
        let start = (node * b).min(batch.len());
        let end = ((node + 1) * b).min(batch.len());
        Ok(&batch[start..end])
    }

    /// One node's slices of an epoch, concatenated in step order.
    pub fn node_sequence(&self, epoch: usize, node: usize) -> Result<Vec<SampleId>> {
        let mut out = Vec::new();
        for step in 0..self.steps() {
            out.extend_from_slice(self.slice(epoch, step, node)?);
        }
        Ok(out)
    }

    /// Text export: `key=value` config lines, then for each epoch an
    /// `epoch <e>` header followed by one decimal id per line.
    pub fn to_text(&self) -> String {
        let c = &self.config;
        let mut out = String::new();
        let _ = writeln!(out, "# loadplan trace v1");
        let _ = writeln!(out, "dataset_size={}", c.dataset_size);
        let _ = writeln!(out, "num_epochs={}", c.num_epochs);
        let _ = writeln!(out, "num_nodes={}", c.num_nodes);
        let _ = writeln!(out, "local_batch={}", c.local_batch);
        let _ = writeln!(out, "seed={}", c.seed);
        let _ = writeln!(out, "drop_last={}", c.drop_last);
        for (e, seq) in self.epochs.iter().enumerate() {
            let _ = writeln!(out, "epoch {e}");
            for id in seq {
                let _ = writeln!(out, "{id}");
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut config = TraceConfig::new(0, 0, 0, 0, 0);
        let mut epochs: Vec<Vec<SampleId>> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(rest) = line.strip_prefix("epoch ") {
                let e: usize = rest
                    .trim()
                    .parse()
                    .map_err(|_| Error::parse(line_no, "bad epoch header"))?;
                if e != epochs.len() {
                    return Err(Error::parse(line_no, "epochs out of order"));
                }
                epochs.push(Vec::new());
            } else if let Some((key, value)) = line.split_once('=') {
                if !epochs.is_empty() {
                    return Err(Error::parse(line_no, "config line after epoch data"));
                }
                let bad = || Error::parse(line_no, format!("bad value for {key}"));
                match key.trim() {
                    "dataset_size" => config.dataset_size = value.parse().map_err(|_| bad())?,
                    "num_epochs" => config.num_epochs = value.parse().map_err(|_| bad())?,
                    "num_nodes" => config.num_nodes = value.parse().map_err(|_| bad())?,
                    "local_batch" => config.local_batch = value.parse().map_err(|_| bad())?,
                    "seed" => config.seed = value.parse().map_err(|_| bad())?,
                    "drop_last" => config.drop_last = value.parse().map_err(|_| bad())?,
                    other => return Err(Error::parse(line_no, format!("unknown key {other}"))),
                }
            } else {
                let id: SampleId = line
                    .parse()
                    .map_err(|_| Error::parse(line_no, "expected a sample id"))?;
                epochs
                    .last_mut()
                    .ok_or_else(|| Error::parse(line_no, "sample id before epoch header"))?
                    .push(id);
            }
        }
        AccessTrace::from_epochs(config, epochs)
    }
}

//! Offline data-loading scheduler for multi-epoch distributed training:
//! access traces, epoch reordering, locality-aware remapping, fetch
//! balancing, chunked reads, buffer simulation and a sample store.

pub mod balance;
pub mod buffer_sim;
pub mod chunking;
pub mod cost_model;
pub mod epoch_order;
pub mod error;
pub mod locality;
pub mod pipeline;
pub mod plan;
pub mod reuse_graph;
pub mod rng;
pub mod store;
pub mod trace;

pub use buffer_sim::{BufferState, Policy};
pub use chunking::{plan_chunks, ChunkPlan, Read};
pub use cost_model::{CostModel, Pattern};
pub use epoch_order::{EpochOrder, PsoParams};
pub use error::{Error, Result};
pub use locality::{Access, Source, StepAssignment};
pub use pipeline::{run_pipeline, PipelineConfig};
pub use plan::SchedulePlan;
pub use reuse_graph::{build_reuse_graph, ReuseGraph, WindowMode};
pub use trace::{generate_trace, AccessTrace, SampleId, TraceConfig};

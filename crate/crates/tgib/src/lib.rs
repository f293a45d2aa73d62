//! Self-explaining link prediction on continuous-time event graphs.
//!
//! Given a stream of timestamped interactions, the model predicts whether a
//! new interaction will occur and, for every prediction, selects the handful
//! of past events that drove it. Selection is trained jointly with the
//! predictor through an information-bottleneck penalty, so explanations come
//! out of the same forward pass as the scores instead of a post-hoc probe.
//!
//! Start with the runnable examples (`cargo run --release -p tgib --example
//! train_synthetic`); each one exercises a single capability end to end. The
//! `tgib` binary wraps the same entry points as subcommands.

pub mod bottleneck;
pub mod cli;
pub mod encoder;
pub mod eval;
pub mod model;
pub mod numcore;
pub mod synth;
pub mod tempgraph;
pub mod trainer;

use thiserror::Error;

/// Crate-wide error for the modeling, training, and evaluation pipeline.
#[derive(Debug, Error)]
pub enum TgibError {
    #[error(transparent)]
    Num(#[from] numcore::NumError),
    #[error(transparent)]
    Graph(#[from] tempgraph::GraphError),
    #[error(transparent)]
    Checkpoint(#[from] numcore::CheckpointError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("config: {0}")]
    Config(String),
    #[error("candidate event {event} does not precede the target (span {dt})")]
    NonCausalCandidate {
        event: tempgraph::EventId,
        dt: f64,
    },
    #[error("event {event}: no eligible negative endpoint to sample")]
    NoEligibleNegative { event: tempgraph::EventId },
    #[error("training diverged at epoch {epoch}, step {step}: loss {loss}")]
    Diverged {
        epoch: usize,
        step: usize,
        loss: f64,
    },
    #[error("{part} split is empty")]
    EmptySplit { part: &'static str },
    #[error("ranking has no positive labels")]
    NoPositives,
    #[error("no ground truth recorded for target event {target}")]
    MissingGroundTruth { target: tempgraph::EventId },
}

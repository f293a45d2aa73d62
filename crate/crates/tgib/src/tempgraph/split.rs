//! Chronological train/validation/test partitions and the inductive
//! node-masking variant.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EventId, GraphError, NodeId, TemporalGraph};

/// How a partition was derived; kept alongside the event lists so runs can
/// be audited and reproduced.
#[derive(Debug, Clone)]
pub struct SplitSpec {
    pub train_end: f64,
    pub val_end: f64,
    pub horizon: f64,
    pub inductive: bool,
    pub masked_nodes: BTreeSet<NodeId>,
}

#[derive(Debug, Clone)]
pub struct Splits {
    pub spec: SplitSpec,
    pub train: Vec<EventId>,
    pub val: Vec<EventId>,
    pub test: Vec<EventId>,
}

/// Partitions events by timestamp: train strictly before 70% of the
/// horizon, validation before 85%, test the rest. Errors when the graph is
/// empty or every event shares one timestamp.
pub fn chronological_split(g: &TemporalGraph) -> Result<Splits, GraphError> {
    let events = g.events();
    if events.is_empty() {
        return Err(GraphError::EmptyGraph);
    }
    let horizon = g.horizon();
    if events.first().map(|e| e.t) == events.last().map(|e| e.t) {
        return Err(GraphError::DegenerateSplit {
            t: horizon,
            count: events.len(),
        });
    }
    let train_end = 0.7 * horizon;
    let val_end = 0.85 * horizon;
    let mut train = Vec::new();
    let mut val = Vec::new();
    let mut test = Vec::new();
    for e in events {
        if e.t < train_end {
            train.push(e.id);
        } else if e.t < val_end {
            val.push(e.id);
        } else {
            test.push(e.id);
        }
    }
    Ok(Splits {
        spec: SplitSpec {
            train_end,
            val_end,
            horizon,
            inductive: false,
            masked_nodes: BTreeSet::new(),
        },
        train,
        val,
        test,
    })
}

/// Derives the inductive variant of a transductive split: 10% of the nodes
/// seen during training (at least one) are masked out, their training
/// events dropped, and validation/test reduced to events touching a masked
/// node. The draw is seeded and sampled without replacement.
pub fn inductive_mask(g: &TemporalGraph, base: &Splits, seed: u64) -> Result<Splits, GraphError> {
    let train_nodes: Vec<NodeId> = g.nodes_in(&base.train).into_iter().collect();
    if train_nodes.is_empty() {
        return Err(GraphError::EmptyGraph);
    }
    let k = (train_nodes.len() / 10).max(1);
    let mut pool = train_nodes;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..k {
        let j = rng.random_range(i..pool.len());
        pool.swap(i, j);
    }
    let masked: BTreeSet<NodeId> = pool.into_iter().take(k).collect();

    let touches_masked =
        |id: &EventId| -> bool { g.nodes_in(&[*id]).iter().any(|z| masked.contains(z)) };
    let train: Vec<EventId> = base
        .train
        .iter()
        .filter(|id| !touches_masked(id))
        .copied()
        .collect();
    let val: Vec<EventId> = base.val.iter().filter(|id| touches_masked(id)).copied().collect();
    let test: Vec<EventId> = base.test.iter().filter(|id| touches_masked(id)).copied().collect();
    Ok(Splits {
        spec: SplitSpec {
            inductive: true,
            masked_nodes: masked,
            ..base.spec.clone()
        },
        train,
        val,
        test,
    })
}

//! Timestamped interaction graphs: validated storage, time-respecting
//! neighbor lookups, chronological splits, and bounded multi-hop candidate
//! extraction around a target event.

mod compgraph;
mod load;
mod split;

pub use compgraph::{extract_computation_graph, Candidate, ComputationGraph};
pub(crate) use load::remap_bipartite;
pub use load::{load_jodie_csv, write_jodie_csv, write_split_manifest, LoadReport};
pub use split::{chronological_split, inductive_mask, SplitSpec, Splits};

use std::collections::BTreeSet;

use thiserror::Error;

pub type NodeId = usize;
/// 1-based chronological ordinal; assigned after sorting by timestamp.
pub type EventId = usize;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("event {index}: self loop on node {node}")]
    SelfLoop { index: usize, node: NodeId },
    #[error("event {index}: node {node} out of range (graph has {num_nodes} nodes)")]
    NodeOutOfRange {
        index: usize,
        node: NodeId,
        num_nodes: usize,
    },
    #[error("event {index}: bad timestamp {t} (must be finite and non-negative)")]
    BadTimestamp { index: usize, t: f64 },
    #[error("event {index}: attribute dim {got}, expected {expected}")]
    AttDimMismatch {
        index: usize,
        got: usize,
        expected: usize,
    },
    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("cannot split an empty graph")]
    EmptyGraph,
    #[error("degenerate split: all {count} events share timestamp {t}")]
    DegenerateSplit { t: f64, count: usize },
    #[error("invalid {what}")]
    BadParam { what: &'static str },
    #[error("event id {id} out of range (graph has {count} events)")]
    UnknownEvent { id: EventId, count: usize },
}

/// One timestamped interaction between two distinct nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub id: EventId,
    pub u: NodeId,
    pub v: NodeId,
    pub t: f64,
    pub att: Vec<f64>,
}

impl Event {
    pub fn touches(&self, z: NodeId) -> bool {
        self.u == z || self.v == z
    }

    /// The endpoint opposite `z`; `z` must be an endpoint.
    pub fn other(&self, z: NodeId) -> NodeId {
        debug_assert!(self.touches(z));
        if self.u == z {
            self.v
        } else {
            self.u
        }
    }
}

/// A neighbor-lookup result: the connecting event plus the far endpoint.
#[derive(Debug, Clone, Copy)]
pub struct NeighborHit<'a> {
    pub event: &'a Event,
    pub neighbor: NodeId,
}

/// Immutable event store with per-node chronological adjacency.
#[derive(Debug, Clone)]
pub struct TemporalGraph {
    events: Vec<Event>,
    num_nodes: usize,
    edge_feat_dim: usize,
    node_feat_dim: usize,
    node_features: Vec<f64>,
    adj: Vec<Vec<(f64, EventId)>>,
}

impl TemporalGraph {
    /// Builds a graph from `(u, v, t, att)` tuples. Events are stably sorted
    /// by timestamp (input order breaks ties) and get 1-based ids in that
    /// order. Node features start absent; `ensure_node_features` fills zeros.
    pub fn from_events(
        num_nodes: usize,
        edge_feat_dim: usize,
        raw: Vec<(NodeId, NodeId, f64, Vec<f64>)>,
    ) -> Result<Self, GraphError> {
        for (index, (u, v, t, att)) in raw.iter().enumerate() {
            if u == v {
                return Err(GraphError::SelfLoop { index, node: *u });
            }
            for node in [*u, *v] {
                if node >= num_nodes {
                    return Err(GraphError::NodeOutOfRange {
                        index,
                        node,
                        num_nodes,
                    });
                }
            }
            if !t.is_finite() || *t < 0.0 {
                return Err(GraphError::BadTimestamp { index, t: *t });
            }
            if att.len() != edge_feat_dim {
                return Err(GraphError::AttDimMismatch {
                    index,
                    got: att.len(),
                    expected: edge_feat_dim,
                });
            }
        }
        let mut raw = raw;
        raw.sort_by(|a, b| a.2.total_cmp(&b.2));
        let events: Vec<Event> = raw
            .into_iter()
            .enumerate()
            .map(|(i, (u, v, t, att))| Event {
                id: i + 1,
                u,
                v,
                t,
                att,
            })
            .collect();
        let mut adj = vec![Vec::new(); num_nodes];
        for e in &events {
            adj[e.u].push((e.t, e.id));
            adj[e.v].push((e.t, e.id));
        }
        Ok(TemporalGraph {
            events,
            num_nodes,
            edge_feat_dim,
            node_feat_dim: 0,
            node_features: Vec::new(),
            adj,
        })
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn num_events(&self) -> usize {
        self.events.len()
    }

    pub fn event(&self, id: EventId) -> &Event {
        assert!(
            id >= 1 && id <= self.events.len(),
            "event id {id} out of range 1..={}",
            self.events.len()
        );
        &self.events[id - 1]
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn edge_feat_dim(&self) -> usize {
        self.edge_feat_dim
    }

    pub fn node_feat_dim(&self) -> usize {
        self.node_feat_dim
    }

    /// Raw feature row for a node; empty slice until features are set.
    pub fn node_feature(&self, z: NodeId) -> &[f64] {
        if self.node_feat_dim == 0 {
            &[]
        } else {
            &self.node_features[z * self.node_feat_dim..(z + 1) * self.node_feat_dim]
        }
    }

    /// Installs all-zero node features of width `dim` when none are present.
    pub fn ensure_node_features(&mut self, dim: usize) {
        if self.node_feat_dim == 0 && dim > 0 {
            self.node_feat_dim = dim;
            self.node_features = vec![0.0; self.num_nodes * dim];
        }
    }

    /// Replaces node features with an explicit row-major matrix.
    pub fn set_node_features(&mut self, dim: usize, data: Vec<f64>) -> Result<(), GraphError> {
        if dim == 0 || data.len() != self.num_nodes * dim {
            return Err(GraphError::BadParam {
                what: "node feature matrix",
            });
        }
        self.node_feat_dim = dim;
        self.node_features = data;
        Ok(())
    }

    /// Largest timestamp in the graph (0 when empty).
    pub fn horizon(&self) -> f64 {
        self.events.last().map(|e| e.t).unwrap_or(0.0)
    }

    /// The `budget` most recent events of `z` strictly before `t`, most
    /// recent first; ties on timestamp resolve to the higher event id.
    pub fn temporal_neighbors(&self, z: NodeId, t: f64, budget: usize) -> Vec<NeighborHit<'_>> {
        let list = &self.adj[z];
        let cut = list.partition_point(|(te, _)| *te < t);
        let lo = cut.saturating_sub(budget);
        list[lo..cut]
            .iter()
            .rev()
            .map(|(_, id)| {
                let event = self.event(*id);
                NeighborHit {
                    event,
                    neighbor: event.other(z),
                }
            })
            .collect()
    }

    /// Distinct nodes touched by the given events.
    pub fn nodes_in(&self, events: &[EventId]) -> BTreeSet<NodeId> {
        let mut out = BTreeSet::new();
        for id in events {
            let e = self.event(*id);
            out.insert(e.u);
            out.insert(e.v);
        }
        out
    }
}

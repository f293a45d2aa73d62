//! Bounded breadth-first extraction of the past events that can influence a
//! target interaction.

use std::collections::{HashMap, HashSet};

use super::{EventId, GraphError, NodeId, TemporalGraph};

/// A past event inside a target's computation graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub event_id: EventId,
    /// Smallest number of expansion steps from the target's endpoints.
    pub hop: usize,
    /// Target time minus candidate time; strictly positive.
    pub dt: f64,
}

/// Everything the model may attend to when scoring one target event.
#[derive(Debug, Clone)]
pub struct ComputationGraph {
    pub target: EventId,
    /// Sorted by event id.
    pub candidates: Vec<Candidate>,
}

impl ComputationGraph {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn event_ids(&self) -> Vec<EventId> {
        self.candidates.iter().map(|c| c.event_id).collect()
    }
}

/// Expands outward from the target's endpoints for `hops` rounds, following
/// at most `budget` most-recent events per visited (node, time) state, and
/// collects every event strictly before the target time. Each event is
/// tagged with the hop at which it first appeared.
pub fn extract_computation_graph(
    g: &TemporalGraph,
    target: EventId,
    hops: usize,
    budget: usize,
) -> Result<ComputationGraph, GraphError> {
    if hops == 0 {
        return Err(GraphError::BadParam { what: "hops" });
    }
    if budget == 0 {
        return Err(GraphError::BadParam { what: "neighbor budget" });
    }
    if target == 0 || target > g.num_events() {
        return Err(GraphError::UnknownEvent {
            id: target,
            count: g.num_events(),
        });
    }
    let anchor = g.event(target);
    let mut seen_states: HashSet<(NodeId, u64)> = HashSet::new();
    let mut frontier: Vec<(NodeId, f64)> = vec![(anchor.u, anchor.t), (anchor.v, anchor.t)];
    for (z, t) in &frontier {
        seen_states.insert((*z, t.to_bits()));
    }
    let mut found: HashMap<EventId, usize> = HashMap::new();
    for hop in 1..=hops {
        let mut next = Vec::new();
        for (z, t) in frontier {
            for hit in g.temporal_neighbors(z, t, budget) {
                found.entry(hit.event.id).or_insert(hop);
                let state = (hit.neighbor, hit.event.t.to_bits());
                if seen_states.insert(state) {
                    next.push((hit.neighbor, hit.event.t));
                }
            }
        }
        frontier = next;
    }
    let mut candidates: Vec<Candidate> = found
        .into_iter()
        .map(|(event_id, hop)| Candidate {
            event_id,
            hop,
            dt: anchor.t - g.event(event_id).t,
        })
        .collect();
    candidates.sort_by_key(|c| c.event_id);
    Ok(ComputationGraph { target, candidates })
}

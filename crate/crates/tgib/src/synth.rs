//! Synthetic interaction streams with a planted rule and exact
//! per-event ground truth, for verifying that learned explanations pick
//! out the events that actually made a prediction true.
//!
//! The planted rule is a co-hub handshake. A hub is one conceptual
//! entity with two on-disk ids, an inbox it is addressed through and an
//! outbox it acts through, because the interaction-log format keeps
//! source and destination id spaces disjoint. Hubs run sessions on a
//! steady per-hub cadence; in each session a user hits the hub's inbox
//! and the hub's outbox hits its home item, all inside the window before
//! the session's target event (user, home item). Those trigger events
//! are the ground-truth explanation: both endpoints of the target
//! interacted with the shared hub within the window, and nothing else
//! distinguishes the target from a corrupted pair.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::numcore::subseed;
use crate::tempgraph::{extract_computation_graph, EventId, TemporalGraph};
use crate::TgibError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantedRuleConfig {
    /// Users who open sessions; sources in the written log.
    pub num_users: usize,
    /// Hub entities. Each owns an inbox id, an outbox id, and a home
    /// item, and runs its share of the sessions.
    pub num_hubs: usize,
    /// Rule-following target events; each brings its triggers with it.
    pub num_targets: usize,
    /// Plain events uniform over source-destination pairs and time.
    pub num_background_events: usize,
    /// Trigger events per target: one on the hub's home item, the rest
    /// on the hub's inbox.
    pub triggers_per_target: usize,
    /// Extra rule-violating targets with no triggers, as a fraction of
    /// `num_targets`. These have no ground truth.
    pub noise_rate: f64,
    /// Trigger window length; 0 means a tenth of the horizon.
    pub window: f64,
    pub horizon: f64,
    /// Receptive field used to check that every ground-truth trigger is
    /// reachable from its target. Match these to the model being tested.
    pub hops: usize,
    pub neighbor_budget: usize,
    /// Lowest acceptable fraction of targets whose triggers all stay
    /// reachable; below this the draw is retried, then rejected.
    pub min_retained: f64,
    pub seed: u64,
}

impl Default for PlantedRuleConfig {
    fn default() -> Self {
        PlantedRuleConfig {
            num_users: 200,
            num_hubs: 40,
            num_targets: 360,
            num_background_events: 80,
            triggers_per_target: 2,
            noise_rate: 0.0,
            window: 300.0,
            horizon: 6000.0,
            hops: 2,
            neighbor_budget: 10,
            min_retained: 0.8,
            seed: 7,
        }
    }
}

impl PlantedRuleConfig {
    pub fn validate(&self) -> Result<(), TgibError> {
        let positive = [
            ("num_users", self.num_users),
            ("num_hubs", self.num_hubs),
            ("num_targets", self.num_targets),
            ("triggers_per_target", self.triggers_per_target),
            ("hops", self.hops),
            ("neighbor_budget", self.neighbor_budget),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(TgibError::Config(format!("{name} must be positive")));
            }
        }
        if !(0.0..0.5).contains(&self.noise_rate) {
            return Err(TgibError::Config(format!(
                "noise rate {} outside [0, 0.5)",
                self.noise_rate
            )));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(TgibError::Config(format!("bad horizon {}", self.horizon)));
        }
        if self.window < 0.0 || !self.window.is_finite() {
            return Err(TgibError::Config(format!("bad window {}", self.window)));
        }
        let window = self.effective_window();
        if window >= self.horizon {
            return Err(TgibError::Config(format!(
                "window {window} must be shorter than the horizon {}",
                self.horizon
            )));
        }
        // Sessions of one hub must not overlap, or later triggers crowd
        // out earlier truth and cadences blur.
        let period = self.min_period();
        if window > 0.5 * period {
            return Err(TgibError::Config(format!(
                "window {window} longer than half the session period {period:.1}; \
                 shorten the window, add hubs, or lower num_targets"
            )));
        }
        if !(0.0..=1.0).contains(&self.min_retained) {
            return Err(TgibError::Config(format!(
                "min_retained {} outside [0, 1]",
                self.min_retained
            )));
        }
        Ok(())
    }

    pub fn effective_window(&self) -> f64 {
        if self.window > 0.0 {
            self.window
        } else {
            self.horizon * 0.1
        }
    }

    /// Session spacing of the busiest hub.
    fn min_period(&self) -> f64 {
        let max_sessions = self.num_targets.div_ceil(self.num_hubs);
        self.horizon / (max_sessions + 1) as f64
    }
}

/// Which past events justify each rule-following target.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GroundTruth {
    pub truths: BTreeMap<EventId, Vec<EventId>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenReport {
    pub num_events: usize,
    /// Source-side nodes (users plus hub outboxes).
    pub num_users: usize,
    /// Destination-side nodes (hub inboxes plus home items).
    pub num_items: usize,
    pub num_background_events: usize,
    pub num_noise_targets: usize,
    /// Rule-following targets generated, before reachability filtering.
    pub num_rule_targets: usize,
    /// Targets whose full trigger set stayed inside the receptive field.
    pub num_truth_targets: usize,
    pub retained_fraction: f64,
    /// Mean of |truth| / |candidate set| over retained targets.
    pub mean_truth_fraction: f64,
    pub window: f64,
    pub attempts: usize,
}

enum Kind {
    Plain,
    Trigger(usize),
    Target(usize),
}

const GENERATION_ATTEMPTS: usize = 8;

/// Draws a stream under the planted rule, validates that each target's
/// triggers sit inside its receptive field, and drops the ground truth
/// of the rare targets whose triggers got crowded out. Retries with a
/// derived seed when too few survive; errors when the configuration
/// never yields enough.
pub fn generate(cfg: &PlantedRuleConfig) -> Result<(TemporalGraph, GroundTruth, GenReport), TgibError> {
    cfg.validate()?;
    let mut last_retained = 0.0;
    for attempt in 0..GENERATION_ATTEMPTS {
        let (graph, truth, mut report) = draw(cfg, subseed(cfg.seed, attempt as u64))?;
        report.attempts = attempt + 1;
        if report.retained_fraction >= cfg.min_retained {
            return Ok((graph, truth, report));
        }
        last_retained = report.retained_fraction;
    }
    Err(TgibError::Config(format!(
        "planted rule infeasible: only {:.0}% of targets kept reachable triggers \
         (needed {:.0}%); raise neighbor_budget, shorten the window, or lower traffic",
        last_retained * 100.0,
        cfg.min_retained * 100.0
    )))
}

fn draw(
    cfg: &PlantedRuleConfig,
    seed: u64,
) -> Result<(TemporalGraph, GroundTruth, GenReport), TgibError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let window = cfg.effective_window();
    let hubs = cfg.num_hubs as u64;
    // Raw source ids: users, then hub outboxes. Raw destination ids: hub
    // inboxes, then home items. The two columns never share an id.
    let outbox = |hub: u64| cfg.num_users as u64 + hub;
    let inbox = |hub: u64| hub;
    let home = |hub: u64| hubs + hub;
    let num_sources = cfg.num_users as u64 + hubs;
    let num_dests = 2 * hubs;

    let mut rows: Vec<(u64, u64, f64, Kind)> = Vec::new();
    for _ in 0..cfg.num_background_events {
        let s = rng.random_range(0..num_sources);
        let d = rng.random_range(0..num_dests);
        let t = rng.random::<f64>() * cfg.horizon;
        rows.push((s, d, t, Kind::Plain));
    }

    // Each hub runs evenly spaced sessions with a private phase, so its
    // inbox and home item carry a steady, recognisable cadence.
    let total_rounds = cfg.num_targets.div_ceil(cfg.num_hubs) as f64;
    let period = cfg.horizon / (total_rounds + 1.0);
    for session in 0..cfg.num_targets {
        let hub = (session % cfg.num_hubs) as u64;
        let round = (session / cfg.num_hubs) as f64;
        let phase = 0.9 * hub as f64 / hubs as f64;
        let jitter = 0.04 * (rng.random::<f64>() - 0.5);
        let t = period * (round + 0.55 + phase + jitter);
        let user = rng.random_range(0..cfg.num_users) as u64;
        for _ in 1..cfg.triggers_per_target {
            let back = window * (0.05 + 0.90 * rng.random::<f64>());
            rows.push((user, inbox(hub), t - back, Kind::Trigger(session)));
        }
        let back = window * (0.05 + 0.90 * rng.random::<f64>());
        rows.push((outbox(hub), home(hub), t - back, Kind::Trigger(session)));
        rows.push((user, home(hub), t, Kind::Target(session)));
    }

    let num_noise = (cfg.noise_rate * cfg.num_targets as f64).round() as usize;
    for _ in 0..num_noise {
        let user = rng.random_range(0..cfg.num_users) as u64;
        let hub = rng.random_range(0..hubs);
        let t = window + rng.random::<f64>() * (cfg.horizon - window);
        rows.push((user, home(hub), t, Kind::Plain));
    }

    rows.sort_by(|a, b| a.2.total_cmp(&b.2));
    // A strictly increasing jitter keeps reloaded row order, and thus
    // event ids, identical to this draw.
    for (i, row) in rows.iter_mut().enumerate() {
        row.2 += 1e-6 * (i + 1) as f64;
    }

    let mut trigger_ids: BTreeMap<usize, Vec<EventId>> = BTreeMap::new();
    let mut target_ids: BTreeMap<usize, EventId> = BTreeMap::new();
    for (i, row) in rows.iter().enumerate() {
        match row.3 {
            Kind::Plain => {}
            Kind::Trigger(session) => trigger_ids.entry(session).or_default().push(i + 1),
            Kind::Target(session) => {
                target_ids.insert(session, i + 1);
            }
        }
    }

    let raw: Vec<(u64, u64, f64, Vec<f64>)> = rows
        .into_iter()
        .map(|(u, v, t, _)| (u, v, t, vec![1.0]))
        .collect();
    let (mapped, num_users, num_items) = crate::tempgraph::remap_bipartite(raw);
    let graph = TemporalGraph::from_events(num_users + num_items, 1, mapped)?;

    let mut truths = BTreeMap::new();
    let mut truth_fraction_sum = 0.0;
    for (session, &target) in &target_ids {
        let triggers = &trigger_ids[session];
        let comp = extract_computation_graph(&graph, target, cfg.hops, cfg.neighbor_budget)?;
        let ids = comp.event_ids();
        if triggers.iter().all(|t| ids.binary_search(t).is_ok()) {
            truth_fraction_sum += triggers.len() as f64 / ids.len() as f64;
            truths.insert(target, triggers.clone());
        }
    }
    let retained = truths.len();
    let report = GenReport {
        num_events: graph.num_events(),
        num_users,
        num_items,
        num_background_events: cfg.num_background_events,
        num_noise_targets: num_noise,
        num_rule_targets: cfg.num_targets,
        num_truth_targets: retained,
        retained_fraction: retained as f64 / cfg.num_targets as f64,
        mean_truth_fraction: if retained > 0 {
            truth_fraction_sum / retained as f64
        } else {
            0.0
        },
        window,
        attempts: 0,
    };
    Ok((graph, GroundTruth { truths }, report))
}

#[derive(Serialize, Deserialize)]
struct TruthRow {
    target_event_id: EventId,
    trigger_event_ids: Vec<EventId>,
}

/// One JSON line per explained target, sorted by target id.
pub fn write_ground_truth(path: impl AsRef<Path>, truth: &GroundTruth) -> Result<(), TgibError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for (&target, triggers) in &truth.truths {
        let row = TruthRow {
            target_event_id: target,
            trigger_event_ids: triggers.clone(),
        };
        serde_json::to_writer(&mut out, &row)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_ground_truth(path: impl AsRef<Path>) -> Result<GroundTruth, TgibError> {
    let text = std::fs::read_to_string(path)?;
    let mut truths = BTreeMap::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let row: TruthRow = serde_json::from_str(line)?;
        if truths.insert(row.target_event_id, row.trigger_event_ids).is_some() {
            return Err(TgibError::Config(format!(
                "duplicate ground truth for event {}",
                row.target_event_id
            )));
        }
    }
    Ok(GroundTruth { truths })
}

/// Fraction of the true triggers that appear in the top `|truth|` of the
/// ranked candidate list.
pub fn explanation_recall(
    truth: &GroundTruth,
    target: EventId,
    ranked: &[EventId],
) -> Result<f64, TgibError> {
    let triggers = truth
        .truths
        .get(&target)
        .ok_or(TgibError::MissingGroundTruth { target })?;
    let k = triggers.len();
    let hits = ranked
        .iter()
        .take(k)
        .filter(|id| triggers.contains(id))
        .count();
    Ok(hits as f64 / k as f64)
}

/// Expected recall of a uniformly random ranking: drawing `truth_size`
/// of `candidates` without replacement recovers `truth_size / candidates`
/// of the truth on average.
pub fn expected_random_recall(truth_size: usize, candidates: usize) -> f64 {
    if candidates == 0 {
        return 0.0;
    }
    (truth_size as f64 / candidates as f64).min(1.0)
}

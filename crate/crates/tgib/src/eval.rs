//! Evaluation: ranking metrics for link prediction and fidelity checks
//! for explanations at controlled sparsity levels.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bottleneck::{masked_readout, MaskMode};
use crate::model::{
    event_logit, forward_event, sample_negative_endpoint, ModelParams, PredictorVars,
};
use crate::numcore::{subseed, NoiseSource, Tape, Var};
use crate::tempgraph::{EventId, TemporalGraph};
use crate::TgibError;

/// Mean of precision-at-rank over the positive items, after a stable
/// descending sort by score (ties keep input order). Errors when there is
/// no positive item to rank.
pub fn average_precision(scored: &[(f64, bool)]) -> Result<f64, TgibError> {
    if !scored.iter().any(|(_, label)| *label) {
        return Err(TgibError::NoPositives);
    }
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| scored[b].0.total_cmp(&scored[a].0));
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank0, &i) in order.iter().enumerate() {
        if scored[i].1 {
            hits += 1;
            sum += hits as f64 / (rank0 + 1) as f64;
        }
    }
    Ok(sum / hits as f64)
}

/// Pooled link-prediction AP over one negative per positive, scored with
/// the full-candidate mask. Deterministic in `seed`.
pub fn split_ap(
    graph: &TemporalGraph,
    params: &ModelParams,
    events: &[EventId],
    seed: u64,
) -> Result<f64, TgibError> {
    let mut rng = ChaCha8Rng::seed_from_u64(subseed(seed, 101));
    let mut scored = Vec::with_capacity(2 * events.len());
    for &id in events {
        let event = graph.event(id).clone();
        let neg = sample_negative_endpoint(&mut rng, graph.num_nodes(), &event)?;
        let mut tape = Tape::new();
        let vars = params.register(&mut tape);
        let mut noise = NoiseSource::from_seed(0);
        let fwd = forward_event(
            &mut tape,
            graph,
            &vars,
            params.hp,
            &event,
            &[neg],
            MaskMode::Full,
            1,
            &mut noise,
            false,
        )?;
        scored.push((tape.scalar_value(fwd.pos.logit), true));
        scored.push((tape.scalar_value(fwd.negs[0].logit), false));
    }
    average_precision(&scored)
}

#[derive(Debug, Clone, Serialize)]
pub struct LinkEvalReport {
    pub mean_ap: f64,
    /// Population standard deviation over seeds.
    pub std_ap: f64,
    pub per_seed: Vec<f64>,
    pub num_events: usize,
}

/// Repeats [`split_ap`] across seeds and summarizes.
pub fn link_eval(
    graph: &TemporalGraph,
    params: &ModelParams,
    events: &[EventId],
    seeds: &[u64],
) -> Result<LinkEvalReport, TgibError> {
    if events.is_empty() {
        return Err(TgibError::EmptySplit { part: "eval" });
    }
    if seeds.is_empty() {
        return Err(TgibError::EmptySplit { part: "eval seeds" });
    }
    let per_seed = seeds
        .iter()
        .map(|&s| split_ap(graph, params, events, s))
        .collect::<Result<Vec<_>, _>>()?;
    let mean = per_seed.iter().sum::<f64>() / per_seed.len() as f64;
    let var = per_seed.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / per_seed.len() as f64;
    Ok(LinkEvalReport {
        mean_ap: mean,
        std_ap: var.sqrt(),
        per_seed,
        num_events: events.len(),
    })
}

/// One event's forward pass kept alive so many candidate subsets can be
/// re-scored against the same encodings.
struct ExplainContext {
    tape: Tape,
    predictor: PredictorVars,
    x: Var,
    z: Option<Var>,
    scores: Vec<f64>,
    candidate_ids: Vec<EventId>,
    full_logit: f64,
}

fn explain_context(
    graph: &TemporalGraph,
    params: &ModelParams,
    target: EventId,
) -> Result<ExplainContext, TgibError> {
    let mut tape = Tape::new();
    let vars = params.register(&mut tape);
    let mut noise = NoiseSource::from_seed(0);
    let event = graph.event(target).clone();
    let fwd = forward_event(
        &mut tape,
        graph,
        &vars,
        params.hp,
        &event,
        &[],
        MaskMode::Full,
        1,
        &mut noise,
        false,
    )?;
    let scores = match fwd.pos.scores {
        Some(s) => tape.value(s).to_vec(),
        None => Vec::new(),
    };
    Ok(ExplainContext {
        full_logit: tape.scalar_value(fwd.pos.logit),
        candidate_ids: fwd.comp.event_ids(),
        scores,
        x: fwd.pos.x,
        z: fwd.z,
        predictor: vars.predictor,
        tape,
    })
}

impl ExplainContext {
    fn len(&self) -> usize {
        self.candidate_ids.len()
    }

    /// Candidate indices ordered by importance (descending score, event id
    /// breaking ties), or by a seeded shuffle when `shuffle_seed` is set.
    fn ranking(&self, shuffle_seed: Option<u64>, target: EventId) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        match shuffle_seed {
            Some(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(subseed(seed, target as u64));
                order.shuffle(&mut rng);
            }
            None => order.sort_by(|&a, &b| {
                self.scores[b]
                    .total_cmp(&self.scores[a])
                    .then(self.candidate_ids[a].cmp(&self.candidate_ids[b]))
            }),
        }
        order
    }

    /// Logit when only the given candidate indices stay unmasked.
    fn masked_logit(&mut self, selected: &[usize]) -> Result<f64, TgibError> {
        let z = match self.z {
            Some(z) => z,
            None => return Ok(self.full_logit),
        };
        let mut indicator = vec![0.0; self.len()];
        for &i in selected {
            indicator[i] = 1.0;
        }
        let alpha = self.tape.constant(self.len(), 1, indicator)?;
        let readout = masked_readout(&mut self.tape, z, alpha)?;
        let mut noise = NoiseSource::from_seed(0);
        let logit = event_logit(
            &mut self.tape,
            self.predictor,
            self.x,
            readout,
            0.0,
            false,
            &mut noise,
        )?;
        Ok(self.tape.scalar_value(logit))
    }
}

fn same_sign(a: f64, b: f64) -> bool {
    (a >= 0.0) == (b >= 0.0)
}

fn keep_count(sparsity: f64, m: usize) -> usize {
    ((sparsity * m as f64).ceil() as usize).min(m)
}

#[derive(Debug, Clone, Serialize)]
pub struct RankedCandidate {
    pub event_id: EventId,
    pub score: f64,
    pub rank: usize,
}

/// An explanation for one event: every candidate ranked by importance,
/// the subset kept at the requested sparsity, and whether that subset
/// alone reproduces the full-candidate decision.
#[derive(Debug, Clone, Serialize)]
pub struct Explanation {
    pub target: EventId,
    pub ranked: Vec<RankedCandidate>,
    pub k: usize,
    pub selected: Vec<EventId>,
    pub full_logit: f64,
    pub masked_logit: f64,
    pub matches_full: bool,
}

/// Scores candidates for `target`, keeps the top `ceil(sparsity * m)`,
/// and compares the masked decision to the full one (logit sign
/// agreement). An event with no candidates matches trivially.
pub fn extract_explanation(
    graph: &TemporalGraph,
    params: &ModelParams,
    target: EventId,
    sparsity: f64,
) -> Result<Explanation, TgibError> {
    if !(0.0..=1.0).contains(&sparsity) {
        return Err(TgibError::Config(format!(
            "sparsity {sparsity} outside [0, 1]"
        )));
    }
    let mut ctx = explain_context(graph, params, target)?;
    let order = ctx.ranking(None, target);
    let k = keep_count(sparsity, ctx.len());
    let masked_logit = ctx.masked_logit(&order[..k])?;
    let ranked = order
        .iter()
        .enumerate()
        .map(|(rank0, &i)| RankedCandidate {
            event_id: ctx.candidate_ids[i],
            score: ctx.scores[i],
            rank: rank0 + 1,
        })
        .collect();
    Ok(Explanation {
        target,
        ranked,
        k,
        selected: order[..k].iter().map(|&i| ctx.candidate_ids[i]).collect(),
        full_logit: ctx.full_logit,
        masked_logit,
        matches_full: same_sign(masked_logit, ctx.full_logit),
    })
}

#[derive(Debug, Clone, Copy)]
pub struct SweepConfig {
    pub num_levels: usize,
    pub max_sparsity: f64,
    /// Replace the learned ranking with a seeded shuffle, for a
    /// random-explainer baseline.
    pub shuffle_seed: Option<u64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            num_levels: 151,
            max_sparsity: 0.3,
            shuffle_seed: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SweepPoint {
    pub sparsity: f64,
    pub match_rate: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub points: Vec<SweepPoint>,
    pub auc_raw: f64,
    /// Raw area divided by the sparsity range, so a perfect explainer
    /// scores 1.
    pub auc_normalized: f64,
    pub num_events: usize,
}

/// Trapezoid area under a (sparsity, match rate) curve.
pub fn trapezoid_auc(points: &[SweepPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| 0.5 * (w[0].match_rate + w[1].match_rate) * (w[1].sparsity - w[0].sparsity))
        .sum()
}

/// Decision-match rate at an even grid of sparsity levels, sharing one
/// forward pass per event across the whole grid.
pub fn sparsity_sweep(
    graph: &TemporalGraph,
    params: &ModelParams,
    events: &[EventId],
    cfg: SweepConfig,
) -> Result<SweepReport, TgibError> {
    if cfg.num_levels < 2 {
        return Err(TgibError::Config(format!(
            "sweep needs at least 2 levels, got {}",
            cfg.num_levels
        )));
    }
    if !(cfg.max_sparsity > 0.0 && cfg.max_sparsity <= 1.0) {
        return Err(TgibError::Config(format!(
            "max sparsity {} outside (0, 1]",
            cfg.max_sparsity
        )));
    }
    if events.is_empty() {
        return Err(TgibError::EmptySplit { part: "sweep" });
    }
    let step = cfg.max_sparsity / (cfg.num_levels - 1) as f64;
    let levels: Vec<f64> = (0..cfg.num_levels).map(|i| i as f64 * step).collect();
    let mut matches = vec![0usize; levels.len()];
    for &id in events {
        let mut ctx = explain_context(graph, params, id)?;
        let order = ctx.ranking(cfg.shuffle_seed, id);
        let mut by_k: HashMap<usize, bool> = HashMap::new();
        for (li, &s) in levels.iter().enumerate() {
            let k = keep_count(s, ctx.len());
            let hit = match by_k.get(&k) {
                Some(&h) => h,
                None => {
                    let logit = ctx.masked_logit(&order[..k])?;
                    let h = same_sign(logit, ctx.full_logit);
                    by_k.insert(k, h);
                    h
                }
            };
            if hit {
                matches[li] += 1;
            }
        }
    }
    let points: Vec<SweepPoint> = levels
        .iter()
        .zip(&matches)
        .map(|(&sparsity, &hits)| SweepPoint {
            sparsity,
            match_rate: hits as f64 / events.len() as f64,
        })
        .collect();
    let auc_raw = trapezoid_auc(&points);
    Ok(SweepReport {
        auc_raw,
        auc_normalized: auc_raw / cfg.max_sparsity,
        points,
        num_events: events.len(),
    })
}

#[derive(Serialize)]
struct ExplanationRow {
    target_event_id: EventId,
    candidate_event_id: EventId,
    p: f64,
    rank: usize,
    selected: bool,
}

/// One JSON line per (target, candidate) pair, ranked by importance.
pub fn write_explanations_jsonl(
    path: impl AsRef<Path>,
    explanations: &[Explanation],
) -> Result<(), TgibError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for exp in explanations {
        for rc in &exp.ranked {
            let row = ExplanationRow {
                target_event_id: exp.target,
                candidate_event_id: rc.event_id,
                p: rc.score,
                rank: rc.rank,
                selected: rc.rank <= exp.k,
            };
            serde_json::to_writer(&mut out, &row)?;
            out.write_all(b"\n")?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_curve_csv(path: impl AsRef<Path>, points: &[SweepPoint]) -> Result<(), TgibError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "sparsity,match_rate")?;
    for p in points {
        writeln!(out, "{},{}", p.sparsity, p.match_rate)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_link_report_jsonl(
    path: impl AsRef<Path>,
    report: &LinkEvalReport,
) -> Result<(), TgibError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer(&mut out, report)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Hyperparams;
    use rand::Rng;

    #[test]
    fn ap_matches_hand_computed_ranking() {
        // Ranked labels [+, -, +]: precision 1 at rank 1, 2/3 at rank 3.
        let ap = average_precision(&[(0.9, true), (0.5, false), (0.1, true)]).unwrap();
        assert!((ap - 5.0 / 6.0).abs() < 1e-12);
        assert!((ap - 0.8333).abs() < 1e-4);
    }

    #[test]
    fn ap_requires_a_positive() {
        assert!(matches!(
            average_precision(&[(0.3, false)]),
            Err(TgibError::NoPositives)
        ));
        assert!(matches!(
            average_precision(&[]),
            Err(TgibError::NoPositives)
        ));
    }

    #[test]
    fn ap_ties_keep_input_order() {
        let first = average_precision(&[(0.5, true), (0.5, false)]).unwrap();
        assert_eq!(first, 1.0);
        let second = average_precision(&[(0.5, false), (0.5, true)]).unwrap();
        assert_eq!(second, 0.5);
    }

    #[test]
    fn ap_null_distribution_sits_at_the_base_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let scored: Vec<(f64, bool)> = (0..10_000)
            .map(|_| (rng.random::<f64>(), rng.random::<f64>() < 0.5))
            .collect();
        let ap = average_precision(&scored).unwrap();
        assert!((ap - 0.5).abs() < 0.02, "null AP {ap}");
    }

    #[test]
    fn ap_is_invariant_under_monotone_transforms() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let scored: Vec<(f64, bool)> = (0..500)
            .map(|_| (rng.random::<f64>(), rng.random::<f64>() < 0.3))
            .collect();
        let moved: Vec<(f64, bool)> = scored.iter().map(|(s, l)| (3.0 * s + 7.0, *l)).collect();
        assert_eq!(
            average_precision(&scored).unwrap().to_bits(),
            average_precision(&moved).unwrap().to_bits()
        );
    }

    /// Counting-based AP for distinct scores: the rank of item i is one
    /// plus the number of strictly larger scores.
    fn counting_ap(scored: &[(f64, bool)]) -> f64 {
        let mut sum = 0.0;
        let mut positives = 0usize;
        for &(s, label) in scored {
            if !label {
                continue;
            }
            positives += 1;
            let rank = 1 + scored.iter().filter(|(o, _)| *o > s).count();
            let hits = scored.iter().filter(|(o, l)| *l && *o >= s).count();
            sum += hits as f64 / rank as f64;
        }
        sum / positives as f64
    }

    #[test]
    fn ap_agrees_with_a_counting_oracle_on_distinct_scores() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let n = rng.random_range(1..40);
            let mut ints: Vec<usize> = (0..200).collect();
            ints.shuffle(&mut rng);
            let scored: Vec<(f64, bool)> = ints[..n]
                .iter()
                .map(|&i| (i as f64 / 200.0, rng.random::<f64>() < 0.5))
                .collect();
            if !scored.iter().any(|(_, l)| *l) {
                continue;
            }
            let got = average_precision(&scored).unwrap();
            assert!((got - counting_ap(&scored)).abs() < 1e-12);
        }
    }

    fn fixture() -> (TemporalGraph, ModelParams) {
        let rows = vec![
            (0, 1, 1.0, vec![0.5]),
            (1, 2, 2.0, vec![-0.25]),
            (0, 2, 3.0, vec![0.8]),
            (2, 3, 4.0, vec![0.3]),
            (0, 3, 5.0, vec![-0.6]),
            (1, 3, 6.0, vec![0.1]),
        ];
        let mut g = TemporalGraph::from_events(4, 1, rows).unwrap();
        g.ensure_node_features(3);
        let hp = Hyperparams {
            embed_dim: 3,
            time_dim: 2,
            edge_feat_dim: 1,
            hops: 2,
            neighbor_budget: 3,
            dropout: 0.1,
        };
        let params = ModelParams::init(hp, 21).unwrap();
        (g, params)
    }

    #[test]
    fn link_eval_is_seeded_and_guards_empty_splits() {
        let (g, params) = fixture();
        let events = [4, 5, 6];
        let a = link_eval(&g, &params, &events, &[1, 2, 3]).unwrap();
        let b = link_eval(&g, &params, &events, &[1, 2, 3]).unwrap();
        assert_eq!(a.per_seed, b.per_seed);
        assert_eq!(a.per_seed.len(), 3);
        assert!(a.per_seed.iter().all(|ap| (0.0..=1.0).contains(ap)));
        assert!((a.mean_ap - a.per_seed.iter().sum::<f64>() / 3.0).abs() < 1e-15);
        assert!(a.std_ap >= 0.0);
        assert!(matches!(
            link_eval(&g, &params, &[], &[1]),
            Err(TgibError::EmptySplit { part: "eval" })
        ));
    }

    #[test]
    fn explanation_keeps_the_requested_fraction() {
        let (g, params) = fixture();
        let exp = extract_explanation(&g, &params, 5, 0.5).unwrap();
        let m = exp.ranked.len();
        assert_eq!(m, 4);
        assert_eq!(exp.k, 2);
        assert_eq!(exp.selected.len(), 2);
        // Ranks run 1..=m and scores never increase along them.
        for (i, rc) in exp.ranked.iter().enumerate() {
            assert_eq!(rc.rank, i + 1);
        }
        for w in exp.ranked.windows(2) {
            assert!(w[0].score >= w[1].score);
        }
        assert_eq!(extract_explanation(&g, &params, 5, 0.25).unwrap().k, 1);
        assert_eq!(extract_explanation(&g, &params, 5, 0.0).unwrap().k, 0);
        assert!(extract_explanation(&g, &params, 5, 1.5).is_err());
    }

    #[test]
    fn full_sparsity_reproduces_the_reference_decision_exactly() {
        let (g, params) = fixture();
        let exp = extract_explanation(&g, &params, 5, 1.0).unwrap();
        assert_eq!(exp.k, exp.ranked.len());
        assert_eq!(exp.masked_logit.to_bits(), exp.full_logit.to_bits());
        assert!(exp.matches_full);
    }

    #[test]
    fn event_without_candidates_matches_trivially() {
        let (g, params) = fixture();
        let exp = extract_explanation(&g, &params, 1, 0.5).unwrap();
        assert!(exp.ranked.is_empty());
        assert_eq!(exp.k, 0);
        assert!(exp.matches_full);
    }

    #[test]
    fn sweep_grid_and_normalization_are_exact() {
        let (g, params) = fixture();
        let report = sparsity_sweep(&g, &params, &[4, 5, 6], SweepConfig::default()).unwrap();
        assert_eq!(report.points.len(), 151);
        assert_eq!(report.points[0].sparsity, 0.0);
        assert!((report.points[150].sparsity - 0.3).abs() < 1e-12);
        for (i, p) in report.points.iter().enumerate() {
            assert!((p.sparsity - i as f64 * 0.002).abs() < 1e-12);
            assert!((0.0..=1.0).contains(&p.match_rate));
        }
        assert!((report.auc_normalized - report.auc_raw / 0.3).abs() < 1e-15);

        let again = sparsity_sweep(&g, &params, &[4, 5, 6], SweepConfig::default()).unwrap();
        assert_eq!(
            report.points.iter().map(|p| p.match_rate.to_bits()).collect::<Vec<_>>(),
            again.points.iter().map(|p| p.match_rate.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn shuffled_sweep_is_deterministic_per_seed() {
        let (g, params) = fixture();
        let cfg = SweepConfig {
            shuffle_seed: Some(7),
            ..SweepConfig::default()
        };
        let a = sparsity_sweep(&g, &params, &[4, 5, 6], cfg).unwrap();
        let b = sparsity_sweep(&g, &params, &[4, 5, 6], cfg).unwrap();
        assert_eq!(a.auc_raw.to_bits(), b.auc_raw.to_bits());
    }

    #[test]
    fn trapezoid_matches_hand_values() {
        let flat: Vec<SweepPoint> = (0..=3)
            .map(|i| SweepPoint {
                sparsity: i as f64 * 0.1,
                match_rate: 1.0,
            })
            .collect();
        assert!((trapezoid_auc(&flat) - 0.3).abs() < 1e-15);
        let ramp = [
            SweepPoint {
                sparsity: 0.0,
                match_rate: 0.0,
            },
            SweepPoint {
                sparsity: 0.3,
                match_rate: 1.0,
            },
        ];
        assert!((trapezoid_auc(&ramp) - 0.15).abs() < 1e-15);
    }

    #[test]
    fn writers_emit_the_documented_schemas() {
        let (g, params) = fixture();
        let dir = tempfile::tempdir().unwrap();
        let exp = extract_explanation(&g, &params, 5, 0.5).unwrap();
        let path = dir.path().join("explanations.jsonl");
        write_explanations_jsonl(&path, std::slice::from_ref(&exp)).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        let first: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
        assert_eq!(first["target_event_id"], 5);
        assert_eq!(first["rank"], 1);
        assert_eq!(first["selected"], true);
        assert!(first["p"].as_f64().unwrap() >= 0.0);

        let curve = dir.path().join("curve.csv");
        write_curve_csv(
            &curve,
            &[SweepPoint {
                sparsity: 0.002,
                match_rate: 0.5,
            }],
        )
        .unwrap();
        let text = std::fs::read_to_string(&curve).unwrap();
        assert_eq!(text, "sparsity,match_rate\n0.002,0.5\n");
    }
}

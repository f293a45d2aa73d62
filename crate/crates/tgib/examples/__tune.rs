//! Throwaway probe for sizing the verification harness. Not shipped.

use std::time::Instant;

use tgib::eval::{extract_explanation, link_eval, sparsity_sweep, SweepConfig};
use tgib::model::{Hyperparams, ModelParams};
use tgib::numcore::subseed;
use tgib::synth::{expected_random_recall, explanation_recall, generate, PlantedRuleConfig};
use tgib::tempgraph::{chronological_split, EventId};
use tgib::trainer::{train, TrainConfig};

fn main() -> Result<(), tgib::TgibError> {
    let t0 = Instant::now();
    let time_scale: f64 = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(1.0);
    let synth = PlantedRuleConfig {
        num_users: 400,
        num_hubs: 50,
        num_targets: 700,
        num_background_events: 120,
        horizon: 14000.0 * time_scale,
        window: 350.0 * time_scale,
        noise_rate: 0.0,
        seed: 7,
        ..PlantedRuleConfig::default()
    };
    let (mut graph, truth, gen) = generate(&synth)?;
    println!(
        "gen: {} events, {} truth targets, retained {:.2}, truth fraction {:.3}, horizon {}",
        gen.num_events, gen.num_truth_targets, gen.retained_fraction, gen.mean_truth_fraction,
        synth.horizon
    );

    let seeds: &[u64] = &[7];
    for &train_seed in seeds {
    let (lr, beta, decay, prior, dropout, negs, tau0, draws) =
        (3e-4, 0.05, 0.85, 0.5, 0.5, 1usize, 1.0, 1usize);
    println!("--- seed {train_seed} (lr {lr} beta {beta} decay {decay} prior {prior} dropout {dropout})");
    let cfg = TrainConfig {
        epochs: 10,
        lr,
        mi_weight: beta,
        mask_prior: prior,
        num_negatives: negs,
        mask_samples: draws,
        temperature: tau0,
        temperature_decay: decay,
        val_every: 1,
        seed: train_seed,
        hp: Hyperparams {
            embed_dim: 8,
            time_dim: 8,
            edge_feat_dim: graph.edge_feat_dim(),
            hops: 2,
            neighbor_budget: 10,
            dropout,
        },
        ..TrainConfig::default()
    };
    graph.ensure_node_features(cfg.hp.embed_dim);
    let splits = chronological_split(&graph)?;

    let untrained = ModelParams::init(cfg.hp, subseed(cfg.seed, 0))?;
    let ap0 = link_eval(&graph, &untrained, &splits.test, &[1, 2, 3])?;
    println!("untrained test AP {:.4} +/- {:.4}", ap0.mean_ap, ap0.std_ap);

    let report = train(&graph, &splits, &cfg)?;
    for row in report
        .metrics
        .iter()
        .filter(|r| r.val_ap.is_some())
    {
        println!(
            "  epoch {} val AP {:.4} (cls {:.4} mi {:.4})",
            row.epoch,
            row.val_ap.unwrap(),
            row.loss_cls,
            row.loss_mi
        );
    }
    let ap1 = link_eval(&graph, &report.best, &splits.test, &[1, 2, 3])?;
    println!("trained   test AP {:.4} +/- {:.4}", ap1.mean_ap, ap1.std_ap);

    let explained: Vec<EventId> = splits
        .test
        .iter()
        .copied()
        .filter(|id| truth.truths.contains_key(id))
        .collect();
    let mut recall_sum = 0.0;
    let mut random_sum = 0.0;
    let mut sep_sum = 0.0;
    let mut rank_sum = 0.0;
    let mut rank_n: f64 = 0.0;
    for &id in &explained {
        let expl = extract_explanation(&graph, &report.best, id, 0.3)?;
        let ranked: Vec<EventId> = expl.ranked.iter().map(|r| r.event_id).collect();
        recall_sum += explanation_recall(&truth, id, &ranked)?;
        random_sum += expected_random_recall(truth.truths[&id].len(), ranked.len());
        let tset = &truth.truths[&id];
        let m = expl.ranked.len();
        let (mut ts, mut tc, mut os, mut oc) = (0.0, 0.0, 0.0, 0.0);
        for r in &expl.ranked {
            if tset.contains(&r.event_id) {
                ts += r.score;
                tc += 1.0;
                if m > 1 {
                    rank_sum += (r.rank - 1) as f64 / (m - 1) as f64;
                    rank_n += 1.0;
                }
            } else {
                os += r.score;
                oc += 1.0;
            }
        }
        if tc > 0.0 && oc > 0.0 {
            sep_sum += ts / tc - os / oc;
        }
    }
    let n = explained.len().max(1) as f64;
    println!(
        "explanations: {} targets, mean recall {:.3}, random expectation {:.3}",
        explained.len(),
        recall_sum / n,
        random_sum / n
    );
    println!(
        "  truth-vs-other score gap {:+.4}, mean normalized truth rank {:.3} (0=top, 0.5=chance)",
        sep_sum / n,
        rank_sum / rank_n.max(1.0)
    );

    let mut sweep_events: Vec<EventId> = explained.iter().copied().collect();
    for &id in &splits.test {
        if sweep_events.len() >= 100 {
            break;
        }
        if !sweep_events.contains(&id) {
            sweep_events.push(id);
        }
    }
    let t_sweep = Instant::now();
    let learned = sparsity_sweep(&graph, &report.best, &sweep_events, SweepConfig::default())?;
    let random = sparsity_sweep(
        &graph,
        &report.best,
        &sweep_events,
        SweepConfig {
            shuffle_seed: Some(99),
            ..SweepConfig::default()
        },
    )?;
    println!(
        "sweep: {} targets, {} levels, AUC learned {:.4} random {:.4} gap {:.4}, {:.1}s",
        sweep_events.len(),
        learned.points.len(),
        learned.auc_raw,
        random.auc_raw,
        learned.auc_raw - random.auc_raw,
        t_sweep.elapsed().as_secs_f64()
    );
    let rates: Vec<f64> = learned.points.iter().map(|pt| pt.match_rate).collect();
    let smoothed: Vec<f64> = (0..rates.len())
        .map(|i| {
            let lo = i.saturating_sub(2);
            let hi = (i + 3).min(rates.len());
            rates[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect();
    let violations: Vec<(usize, f64)> = smoothed
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[1] < w[0] - 1e-12)
        .map(|(i, w)| (i, w[0] - w[1]))
        .collect();
    println!("smoothed monotonicity violations: {}", violations.len());
    for (i, d) in violations.iter().take(12) {
        println!("  level {i}: drop {d:.5}");
    }
    let show: Vec<String> = rates.iter().step_by(10).map(|r| format!("{r:.3}")).collect();
    println!("raw match rate every 10th level: {}", show.join(" "));
    if let Some(&id) = explained.first() {
        let expl = extract_explanation(&graph, &report.best, id, 0.3)?;
        let hi = expl.ranked.first().map(|r| r.score).unwrap_or(0.0);
        let lo = expl.ranked.last().map(|r| r.score).unwrap_or(0.0);
        println!("score spread on target {id}: top {hi:.4} bottom {lo:.4}");
    }
    }
    println!("elapsed {:.1}s", t0.elapsed().as_secs_f64());
    Ok(())
}

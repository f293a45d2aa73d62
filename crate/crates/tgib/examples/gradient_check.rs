//! Verifies analytic gradients of the full training objective against
//! central finite differences on a tiny fixture.
//!
//! Noise and negative sampling are frozen per target event, so every loss
//! evaluation replays the identical stochastic path and the only thing that
//! changes between evaluations is the nudged parameter entry.

use std::cell::RefCell;
use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tgib::bottleneck::MaskMode;
use tgib::model::{forward_event, sample_negative_endpoint, Hyperparams, ModelParams};
use tgib::numcore::{gradcheck, subseed, NoiseSource, Tape};
use tgib::synth::{generate, PlantedRuleConfig};
use tgib::tempgraph::{EventId, NodeId, TemporalGraph};
use tgib::trainer::{total_loss, TrainConfig};

fn summed_loss(
    graph: &TemporalGraph,
    params: &ModelParams,
    cfg: &TrainConfig,
    targets: &[(EventId, NodeId)],
) -> f64 {
    let mut tape = Tape::new();
    let vars = params.register(&mut tape);
    let mut sum = tape.scalar(0.0);
    for &(id, neg) in targets {
        let event = &graph.events()[id];
        let mut noise = NoiseSource::from_seed(subseed(7, id as u64));
        let fwd = forward_event(
            &mut tape,
            graph,
            &vars,
            cfg.hp,
            event,
            std::slice::from_ref(&neg),
            MaskMode::Relaxed { temperature: 1.0 },
            cfg.mask_samples,
            &mut noise,
            true,
        )
        .expect("forward");
        let losses = total_loss(&mut tape, &fwd, cfg).expect("loss");
        sum = tape.add(sum, losses.total).expect("add");
    }
    tape.value(sum)[0]
}

fn main() -> Result<(), tgib::TgibError> {
    let synth = PlantedRuleConfig {
        num_users: 5,
        num_hubs: 2,
        num_targets: 5,
        num_background_events: 3,
        horizon: 100.0,
        window: 8.0,
        neighbor_budget: 4,
        min_retained: 0.5,
        seed: 5,
        ..PlantedRuleConfig::default()
    };
    let (mut graph, _, _) = generate(&synth)?;
    println!("fixture: {} events", graph.events().len());

    let hp = Hyperparams {
        embed_dim: 3,
        time_dim: 2,
        edge_feat_dim: graph.edge_feat_dim(),
        hops: 2,
        neighbor_budget: 4,
        dropout: 0.1,
    };
    let cfg = TrainConfig {
        hp,
        ..TrainConfig::default()
    };
    graph.ensure_node_features(hp.embed_dim);

    let num_events = graph.events().len();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let targets: Vec<(EventId, NodeId)> = (num_events.saturating_sub(5)..num_events)
        .map(|id| {
            let neg = sample_negative_endpoint(&mut rng, graph.num_nodes(), &graph.events()[id])?;
            Ok((id, neg))
        })
        .collect::<Result<_, tgib::TgibError>>()?;

    // Zero-initialized biases put fresh-node layer inputs exactly on the
    // relu kink, where central differences disagree with the subgradient.
    // Jittering every parameter moves the check to a generic point.
    let mut params = ModelParams::init(hp, 1)?;
    let mut jitter = ChaCha8Rng::seed_from_u64(3);
    for (_, tensor) in params.named_mut() {
        for x in &mut tensor.data {
            *x += jitter.random_range(-0.05..0.05);
        }
    }
    let params = params;

    // One backward pass supplies the analytic gradients.
    let mut analytic_params = params.clone();
    {
        let mut tape = Tape::new();
        let vars = analytic_params.register(&mut tape);
        let mut sum = tape.scalar(0.0);
        for &(id, neg) in &targets {
            let event = &graph.events()[id];
            let mut noise = NoiseSource::from_seed(subseed(7, id as u64));
            let fwd = forward_event(
                &mut tape,
                &graph,
                &vars,
                hp,
                event,
                std::slice::from_ref(&neg),
                MaskMode::Relaxed { temperature: 1.0 },
                cfg.mask_samples,
                &mut noise,
                true,
            )?;
            let losses = total_loss(&mut tape, &fwd, &cfg)?;
            sum = tape.add(sum, losses.total)?;
        }
        tape.backward(sum)?;
        analytic_params.harvest(&tape, &vars)?;
    }

    let sizes: Vec<(String, usize)> = analytic_params
        .named()
        .iter()
        .map(|(name, t)| (name.clone(), t.data.len()))
        .collect();
    let analytic: HashMap<String, Vec<f64>> = analytic_params
        .named()
        .iter()
        .map(|(name, t)| (name.clone(), t.grad.clone().unwrap_or_else(|| vec![0.0; t.data.len()])))
        .collect();

    let shared = RefCell::new(params);
    let started = std::time::Instant::now();
    let report = gradcheck(
        &sizes,
        &analytic,
        |name, i, delta| {
            let mut p = shared.borrow_mut();
            for (n, t) in p.named_mut() {
                if n == name {
                    t.data[i] += delta;
                }
            }
        },
        || summed_loss(&graph, &shared.borrow(), &cfg, &targets),
        1e-5,
    )?;

    println!("{}", report.summary());
    let worst = report.max_rel_err();
    println!(
        "max relative error {:.3e} across {} parameters in {:.1}s",
        worst,
        sizes.len(),
        started.elapsed().as_secs_f64()
    );
    println!(
        "{}",
        if worst < 1e-4 {
            "analytic gradients agree with finite differences"
        } else {
            "MISMATCH: analytic gradients disagree with finite differences"
        }
    );
    Ok(())
}

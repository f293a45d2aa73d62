//! Per-event stochastic training with negative sampling and the
//! compression penalty on importance scores.

use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bottleneck::{kl_loss, MaskMode};
use crate::eval::split_ap;
use crate::model::{
    forward_event, sample_negative_endpoint, EventForward, Hyperparams, ModelParams,
};
use crate::numcore::{subseed, AdamConfig, AdamState, NoiseSource, Tape, Var};
use crate::tempgraph::{NodeId, Splits, TemporalGraph};
use crate::TgibError;

/// Everything a training run depends on. Two runs with equal configs
/// produce byte-identical artifacts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    /// Weight on the compression penalty.
    pub mi_weight: f64,
    pub num_negatives: usize,
    /// Prior keep-probability the scores are pulled toward.
    pub mask_prior: f64,
    pub temperature: f64,
    /// Per-epoch multiplier on the temperature; 1 keeps it fixed.
    pub temperature_decay: f64,
    /// Independent mask draws per branch; the link loss averages over
    /// them. More draws cut the mask-sampling noise in the score
    /// gradients without changing the objective.
    pub mask_samples: usize,
    pub seed: u64,
    /// Penalize high scores under corrupted events instead of low ones.
    /// Off by default; kept for comparison runs.
    pub literal_negative_loss: bool,
    /// Validate every this many epochs (and always on the last); 0 never
    /// validates.
    pub val_every: usize,
    pub hp: Hyperparams,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            lr: 1e-3,
            mi_weight: 0.1,
            num_negatives: 1,
            mask_prior: 0.5,
            temperature: 1.0,
            temperature_decay: 1.0,
            mask_samples: 1,
            seed: 7,
            literal_negative_loss: false,
            val_every: 1,
            hp: Hyperparams::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TgibError> {
        self.hp.validate()?;
        if self.epochs == 0 {
            return Err(TgibError::Config("epochs must be positive".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(TgibError::Config(format!("bad learning rate {}", self.lr)));
        }
        if !(self.mi_weight >= 0.0 && self.mi_weight.is_finite()) {
            return Err(TgibError::Config(format!("bad mi weight {}", self.mi_weight)));
        }
        if self.num_negatives == 0 {
            return Err(TgibError::Config("num_negatives must be positive".into()));
        }
        if !(self.mask_prior > 0.0 && self.mask_prior < 1.0) {
            return Err(TgibError::Config(format!(
                "mask prior {} outside (0, 1)",
                self.mask_prior
            )));
        }
        if !(self.temperature > 0.0) {
            return Err(TgibError::Config(format!(
                "temperature {} must be positive",
                self.temperature
            )));
        }
        if !(self.temperature_decay > 0.0 && self.temperature_decay <= 1.0) {
            return Err(TgibError::Config(format!(
                "temperature decay {} outside (0, 1]",
                self.temperature_decay
            )));
        }
        if self.mask_samples == 0 {
            return Err(TgibError::Config("mask_samples must be positive".into()));
        }
        Ok(())
    }
}

/// Binary link loss: reward the true event, penalize each corrupted one.
/// The literal variant rewards corrupted events' scores staying high
/// under sigmoid instead, matching a common but weaker formulation.
pub fn classification_loss(
    tape: &mut Tape,
    pos_logit: Var,
    neg_logits: &[Var],
    literal: bool,
) -> Result<Var, TgibError> {
    let neg_pos = tape.neg(pos_logit);
    let mut total = tape.softplus(neg_pos);
    for &n in neg_logits {
        let term = if literal {
            let flipped = tape.neg(n);
            tape.softplus(flipped)
        } else {
            tape.softplus(n)
        };
        total = tape.add(total, term)?;
    }
    Ok(total)
}

/// Compression penalty: KL of every candidate score (positive and
/// corrupted branches) against the Bernoulli prior. Zero when the event
/// has no candidates.
pub fn mi_loss(tape: &mut Tape, fwd: &EventForward, prior: f64) -> Result<Var, TgibError> {
    let mut total = tape.scalar(0.0);
    if let Some(s) = fwd.pos.scores {
        let kl = kl_loss(tape, s, prior)?;
        total = tape.add(total, kl)?;
    }
    for neg in &fwd.negs {
        if let Some(s) = neg.scores {
            let kl = kl_loss(tape, s, prior)?;
            total = tape.add(total, kl)?;
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy)]
pub struct StepLosses {
    pub total: Var,
    pub cls: Var,
    pub mi: Var,
}

/// Joint objective: classification plus the weighted compression
/// penalty. With several mask draws per branch the link loss is the
/// average over draws.
pub fn total_loss(
    tape: &mut Tape,
    fwd: &EventForward,
    cfg: &TrainConfig,
) -> Result<StepLosses, TgibError> {
    let draws = fwd.pos.logits.len();
    let mut cls_sum = None;
    for k in 0..draws {
        let neg_logits: Vec<Var> = fwd.negs.iter().map(|b| b.logits[k]).collect();
        let term =
            classification_loss(tape, fwd.pos.logits[k], &neg_logits, cfg.literal_negative_loss)?;
        cls_sum = Some(match cls_sum {
            None => term,
            Some(acc) => tape.add(acc, term)?,
        });
    }
    let cls_sum = cls_sum.expect("branch always produces at least one draw");
    let cls = tape.scale(cls_sum, 1.0 / draws as f64);
    let mi = mi_loss(tape, fwd, cfg.mask_prior)?;
    let weighted = tape.scale(mi, cfg.mi_weight);
    let total = tape.add(cls, weighted)?;
    Ok(StepLosses { total, cls, mi })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepMetrics {
    pub epoch: usize,
    pub step: usize,
    pub loss_cls: f64,
    pub loss_mi: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub val_ap: Option<f64>,
}

#[derive(Debug)]
pub struct TrainReport {
    /// Parameters after the last step.
    pub params: ModelParams,
    /// Parameters at the best validation AP (the final ones when
    /// validation never ran).
    pub best: ModelParams,
    pub best_val_ap: Option<f64>,
    pub best_epoch: Option<usize>,
    pub metrics: Vec<StepMetrics>,
}

/// Runs the training loop over the chronological train split: fresh tape
/// per event, one relaxed-mask forward with sampled negatives, backward,
/// Adam. Validation AP is measured with the full-candidate mask. A
/// non-finite loss aborts with the failing epoch and step.
pub fn train(
    graph: &TemporalGraph,
    splits: &Splits,
    cfg: &TrainConfig,
) -> Result<TrainReport, TgibError> {
    cfg.validate()?;
    if graph.node_feat_dim() != cfg.hp.embed_dim {
        return Err(TgibError::Config(format!(
            "graph node features ({}) must be installed at embed_dim ({})",
            graph.node_feat_dim(),
            cfg.hp.embed_dim
        )));
    }
    if splits.train.is_empty() {
        return Err(TgibError::EmptySplit { part: "train" });
    }
    let mut params = ModelParams::init(cfg.hp, subseed(cfg.seed, 0))?;
    let mut adam = AdamState::new(AdamConfig::with_lr(cfg.lr));
    let mut neg_rng = ChaCha8Rng::seed_from_u64(subseed(cfg.seed, 1));
    let noise_base = subseed(cfg.seed, 2);
    let val_seed = subseed(cfg.seed, 3);
    let mut metrics = Vec::with_capacity(cfg.epochs * splits.train.len());
    let mut best: Option<(f64, usize, ModelParams)> = None;
    let mut global_step: u64 = 0;
    for epoch in 0..cfg.epochs {
        let temperature = cfg.temperature * cfg.temperature_decay.powi(epoch as i32);
        for (step, &id) in splits.train.iter().enumerate() {
            let event = graph.event(id).clone();
            let negs: Vec<NodeId> = (0..cfg.num_negatives)
                .map(|_| sample_negative_endpoint(&mut neg_rng, graph.num_nodes(), &event))
                .collect::<Result<_, _>>()?;
            let mut tape = Tape::new();
            let vars = params.register(&mut tape);
            let mut noise = NoiseSource::from_seed(subseed(noise_base, global_step));
            let fwd = forward_event(
                &mut tape,
                graph,
                &vars,
                cfg.hp,
                &event,
                &negs,
                MaskMode::Relaxed { temperature },
                cfg.mask_samples,
                &mut noise,
                true,
            )?;
            let losses = total_loss(&mut tape, &fwd, cfg)?;
            let loss_val = tape.scalar_value(losses.total);
            if !loss_val.is_finite() {
                return Err(TgibError::Diverged {
                    epoch,
                    step,
                    loss: loss_val,
                });
            }
            tape.backward(losses.total)?;
            params.harvest(&tape, &vars)?;
            let mut named = params.named_mut();
            adam.step(named.iter_mut().map(|(n, t)| (n.as_str(), &mut **t)))?;
            drop(named);
            metrics.push(StepMetrics {
                epoch,
                step,
                loss_cls: tape.scalar_value(losses.cls),
                loss_mi: tape.scalar_value(losses.mi),
                val_ap: None,
            });
            global_step += 1;
        }
        let due = cfg.val_every > 0
            && ((epoch + 1) % cfg.val_every == 0 || epoch + 1 == cfg.epochs);
        if due && !splits.val.is_empty() {
            let ap = split_ap(graph, &params, &splits.val, val_seed)?;
            if let Some(last) = metrics.last_mut() {
                last.val_ap = Some(ap);
            }
            if best.as_ref().is_none_or(|(b, _, _)| ap > *b) {
                best = Some((ap, epoch, params.clone()));
            }
        }
    }
    let (best_val_ap, best_epoch, best_params) = match best {
        Some((ap, epoch, p)) => (Some(ap), Some(epoch), p),
        None => (None, None, params.clone()),
    };
    Ok(TrainReport {
        params,
        best: best_params,
        best_val_ap,
        best_epoch,
        metrics,
    })
}

/// One JSON object per line, in step order.
pub fn write_metrics_jsonl(
    path: impl AsRef<Path>,
    metrics: &[StepMetrics],
) -> Result<(), TgibError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for m in metrics {
        serde_json::to_writer(&mut out, m)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

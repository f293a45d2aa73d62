//! The full model: hyperparameters, the learnable parameter bundle, the
//! prediction head, and the per-event forward pass that joins candidate
//! extraction, encoding, masking, and scoring.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bottleneck::{
    candidate_rep, importance_scores, masked_readout, rep_width, sample_mask, target_rep,
    MaskMode, ScorerParams, ScorerVars,
};
use crate::encoder::{
    AttentionLayerParams, AttentionLayerVars, Encoder, TimeEncoderParams, TimeEncoderVars,
};
use crate::numcore::{
    load_checkpoint, save_checkpoint, CheckpointError, NoiseSource, Tape, Tensor, Var,
};
use crate::tempgraph::{extract_computation_graph, ComputationGraph, Event, NodeId, TemporalGraph};
use crate::TgibError;

/// Architecture-defining sizes and rates. Node features are padded to
/// `embed_dim`, so the attention row width is the same at every layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub embed_dim: usize,
    pub time_dim: usize,
    pub edge_feat_dim: usize,
    pub hops: usize,
    pub neighbor_budget: usize,
    pub dropout: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            embed_dim: 32,
            time_dim: 32,
            edge_feat_dim: 1,
            hops: 2,
            neighbor_budget: 20,
            dropout: 0.1,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<(), TgibError> {
        let positive = [
            ("embed_dim", self.embed_dim),
            ("time_dim", self.time_dim),
            ("edge_feat_dim", self.edge_feat_dim),
            ("hops", self.hops),
            ("neighbor_budget", self.neighbor_budget),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(TgibError::Config(format!("{name} must be positive")));
            }
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(TgibError::Config(format!(
                "dropout {} outside [0, 1)",
                self.dropout
            )));
        }
        Ok(())
    }

    /// Width of one event representation.
    pub fn rep_width(&self) -> usize {
        rep_width(self.embed_dim, self.time_dim, self.edge_feat_dim)
    }
}

/// The link-prediction head: an MLP over `[X ‖ H]` returning a logit.
#[derive(Debug, Clone)]
pub struct PredictorParams {
    pub w0: Tensor,
    pub b0: Tensor,
    pub w1: Tensor,
    pub b1: Tensor,
}

impl PredictorParams {
    pub fn init(rep_width: usize, hidden: usize, rng: &mut impl rand::Rng) -> Self {
        PredictorParams {
            w0: Tensor::xavier_uniform(2 * rep_width, hidden, rng),
            b0: Tensor::zeros(1, hidden),
            w1: Tensor::xavier_uniform(hidden, 1, rng),
            b1: Tensor::zeros(1, 1),
        }
    }

    pub fn register(&self, tape: &mut Tape) -> PredictorVars {
        PredictorVars {
            w0: tape.param(&self.w0),
            b0: tape.param(&self.b0),
            w1: tape.param(&self.w1),
            b1: tape.param(&self.b1),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PredictorVars {
    pub w0: Var,
    pub b0: Var,
    pub w1: Var,
    pub b1: Var,
}

/// Scalar link logit for an event representation and its explanation
/// readout. During training the event representation is blanked as a
/// block with probability `dropout` (inverted scaling on keep), so the
/// predictor cannot classify from it alone and the readout stays a live
/// input rather than a bypassed one.
pub fn event_logit(
    tape: &mut Tape,
    predictor: PredictorVars,
    x: Var,
    readout: Var,
    dropout: f64,
    training: bool,
    noise: &mut NoiseSource,
) -> Result<Var, TgibError> {
    let x = if training && dropout > 0.0 {
        if noise.uniform() < dropout {
            let [rows, cols] = tape.shape(x);
            tape.zeros(rows, cols)
        } else {
            tape.scale(x, 1.0 / (1.0 - dropout))
        }
    } else {
        x
    };
    let joined = tape.concat_cols(&[x, readout])?;
    let pre = tape.matmul(joined, predictor.w0)?;
    let pre = tape.add_row(pre, predictor.b0)?;
    let hidden = tape.relu(pre);
    let out = tape.matmul(hidden, predictor.w1)?;
    Ok(tape.add_row(out, predictor.b1)?)
}

/// Every learnable tensor in one place, with stable names for the
/// optimizer and checkpoints.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub hp: Hyperparams,
    pub time: TimeEncoderParams,
    pub layers: Vec<AttentionLayerParams>,
    pub scorer: ScorerParams,
    pub predictor: PredictorParams,
}

impl ModelParams {
    pub fn init(hp: Hyperparams, seed: u64) -> Result<Self, TgibError> {
        hp.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = (0..hp.hops)
            .map(|_| {
                AttentionLayerParams::init(hp.embed_dim, hp.edge_feat_dim, hp.time_dim, &mut rng)
            })
            .collect();
        let width = hp.rep_width();
        Ok(ModelParams {
            hp,
            time: TimeEncoderParams::new(hp.time_dim),
            layers,
            scorer: ScorerParams::init(width, hp.embed_dim, &mut rng),
            predictor: PredictorParams::init(width, hp.embed_dim, &mut rng),
        })
    }

    pub fn named(&self) -> Vec<(String, &Tensor)> {
        let mut out: Vec<(String, &Tensor)> = vec![
            ("time.omega".into(), &self.time.omega),
            ("time.phase".into(), &self.time.phase),
        ];
        for (i, layer) in self.layers.iter().enumerate() {
            out.push((format!("layer{i}.w_query"), &layer.w_query));
            out.push((format!("layer{i}.w_key"), &layer.w_key));
            out.push((format!("layer{i}.w_value"), &layer.w_value));
            out.push((format!("layer{i}.ffn_w0"), &layer.ffn_w0));
            out.push((format!("layer{i}.ffn_b0"), &layer.ffn_b0));
            out.push((format!("layer{i}.ffn_w1"), &layer.ffn_w1));
            out.push((format!("layer{i}.ffn_b1"), &layer.ffn_b1));
        }
        out.push(("scorer.w0".into(), &self.scorer.w0));
        out.push(("scorer.b0".into(), &self.scorer.b0));
        out.push(("scorer.w1".into(), &self.scorer.w1));
        out.push(("scorer.b1".into(), &self.scorer.b1));
        out.push(("predictor.w0".into(), &self.predictor.w0));
        out.push(("predictor.b0".into(), &self.predictor.b0));
        out.push(("predictor.w1".into(), &self.predictor.w1));
        out.push(("predictor.b1".into(), &self.predictor.b1));
        out
    }

    pub fn named_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out: Vec<(String, &mut Tensor)> = vec![
            ("time.omega".into(), &mut self.time.omega),
            ("time.phase".into(), &mut self.time.phase),
        ];
        for (i, layer) in self.layers.iter_mut().enumerate() {
            out.push((format!("layer{i}.w_query"), &mut layer.w_query));
            out.push((format!("layer{i}.w_key"), &mut layer.w_key));
            out.push((format!("layer{i}.w_value"), &mut layer.w_value));
            out.push((format!("layer{i}.ffn_w0"), &mut layer.ffn_w0));
            out.push((format!("layer{i}.ffn_b0"), &mut layer.ffn_b0));
            out.push((format!("layer{i}.ffn_w1"), &mut layer.ffn_w1));
            out.push((format!("layer{i}.ffn_b1"), &mut layer.ffn_b1));
        }
        out.push(("scorer.w0".into(), &mut self.scorer.w0));
        out.push(("scorer.b0".into(), &mut self.scorer.b0));
        out.push(("scorer.w1".into(), &mut self.scorer.w1));
        out.push(("scorer.b1".into(), &mut self.scorer.b1));
        out.push(("predictor.w0".into(), &mut self.predictor.w0));
        out.push(("predictor.b0".into(), &mut self.predictor.b0));
        out.push(("predictor.w1".into(), &mut self.predictor.w1));
        out.push(("predictor.b1".into(), &mut self.predictor.b1));
        out
    }

    pub fn register(&self, tape: &mut Tape) -> ModelVars {
        ModelVars {
            time: self.time.register(tape),
            layers: self.layers.iter().map(|l| l.register(tape)).collect(),
            scorer: self.scorer.register(tape),
            predictor: self.predictor.register(tape),
        }
    }

    /// Copies gradients off the tape into the parameter tensors. A
    /// parameter the forward pass never touched contributes zero (the
    /// tensor's gradient is still initialized so the optimizer accepts it).
    pub fn harvest(&mut self, tape: &Tape, vars: &ModelVars) -> Result<(), TgibError> {
        let order = vars.ordered();
        for ((_, tensor), var) in self.named_mut().into_iter().zip(order) {
            match tape.grad(var) {
                Some(g) => tensor.accumulate_grad(&g.to_vec())?,
                None => {
                    let z = vec![0.0; tensor.len()];
                    tensor.accumulate_grad(&z)?;
                }
            }
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<(), TgibError> {
        let header = serde_json::to_string(&self.hp)?;
        let named = self.named();
        let tensors: Vec<(&str, &Tensor)> =
            named.iter().map(|(n, t)| (n.as_str(), *t)).collect();
        save_checkpoint(path.as_ref(), &header, &tensors)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, TgibError> {
        let (header, tensors) = load_checkpoint(path.as_ref())?;
        let hp: Hyperparams = serde_json::from_str(&header)
            .map_err(|e| CheckpointError::Corrupt(format!("bad hyperparameter header: {e}")))?;
        let mut params = ModelParams::init(hp, 0)?;
        let mut named = params.named_mut();
        if named.len() != tensors.len() {
            return Err(CheckpointError::Corrupt(format!(
                "expected {} tensors, found {}",
                named.len(),
                tensors.len()
            ))
            .into());
        }
        for (name, loaded) in tensors {
            let slot = named
                .iter_mut()
                .find(|(n, _)| *n == name)
                .ok_or_else(|| CheckpointError::Corrupt(format!("unknown tensor {name}")))?;
            if slot.1.shape != loaded.shape {
                return Err(CheckpointError::Corrupt(format!(
                    "tensor {name}: shape {:?} does not match model {:?}",
                    loaded.shape, slot.1.shape
                ))
                .into());
            }
            slot.1.data = loaded.data;
        }
        Ok(params)
    }
}

/// Tape handles for one registration of [`ModelParams`].
#[derive(Debug, Clone)]
pub struct ModelVars {
    pub time: TimeEncoderVars,
    pub layers: Vec<AttentionLayerVars>,
    pub scorer: ScorerVars,
    pub predictor: PredictorVars,
}

impl ModelVars {
    /// Vars in the same order as [`ModelParams::named`].
    fn ordered(&self) -> Vec<Var> {
        let mut out = vec![self.time.omega, self.time.phase];
        for l in &self.layers {
            out.extend([
                l.w_query, l.w_key, l.w_value, l.ffn_w0, l.ffn_b0, l.ffn_w1, l.ffn_b1,
            ]);
        }
        out.extend([
            self.scorer.w0,
            self.scorer.b0,
            self.scorer.w1,
            self.scorer.b1,
        ]);
        out.extend([
            self.predictor.w0,
            self.predictor.b0,
            self.predictor.w1,
            self.predictor.b1,
        ]);
        out
    }
}

/// One scored pair: the event representation, per-candidate scores and
/// mask (absent when the candidate set is empty), the pooled explanation
/// vector, and the link logit. When the forward ran with several mask
/// draws, `logits` holds one logit per draw and the scalar fields keep
/// the first draw.
#[derive(Debug, Clone)]
pub struct Branch {
    pub x: Var,
    pub scores: Option<Var>,
    pub mask: Option<Var>,
    pub readout: Var,
    pub logit: Var,
    pub logits: Vec<Var>,
}

/// Output of a full forward pass over one target event.
#[derive(Debug)]
pub struct EventForward {
    pub comp: ComputationGraph,
    /// Candidate representation matrix, one row per candidate in
    /// `comp.candidates` order.
    pub z: Option<Var>,
    pub pos: Branch,
    pub negs: Vec<Branch>,
}

/// Draws a corruption endpoint uniformly over all nodes except the true
/// destination.
pub fn sample_negative_endpoint(
    rng: &mut impl rand::Rng,
    num_nodes: usize,
    event: &Event,
) -> Result<NodeId, TgibError> {
    if num_nodes < 2 {
        return Err(TgibError::NoEligibleNegative { event: event.id });
    }
    loop {
        let n = rng.random_range(0..num_nodes);
        if n != event.v {
            return Ok(n);
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn branch(
    tape: &mut Tape,
    vars: &ModelVars,
    x: Var,
    z: Option<Var>,
    width: usize,
    mode: MaskMode,
    draws: usize,
    noise: &mut NoiseSource,
    dropout: f64,
    training: bool,
) -> Result<Branch, TgibError> {
    let scores = z.map(|z| importance_scores(tape, vars.scorer, x, z)).transpose()?;
    let mut logits = Vec::with_capacity(draws);
    let mut first = None;
    for _ in 0..draws.max(1) {
        let (mask, readout) = match (z, scores) {
            (Some(z), Some(s)) => {
                let mask = sample_mask(tape, s, mode, noise)?;
                let readout = masked_readout(tape, z, mask)?;
                (Some(mask), readout)
            }
            _ => (None, tape.zeros(1, width)),
        };
        let logit = event_logit(tape, vars.predictor, x, readout, dropout, training, noise)?;
        logits.push(logit);
        first.get_or_insert((mask, readout, logit));
    }
    let (mask, readout, logit) = first.expect("at least one draw");
    Ok(Branch {
        x,
        scores,
        mask,
        readout,
        logit,
        logits,
    })
}

/// Runs the whole pipeline for one target event: candidate extraction,
/// encoding, importance scoring, mask sampling, readout, and the link
/// logit. The same candidate set is also scored against each corrupted
/// event `(u, n, t)` for `n` in `negative_endpoints`. `draws` controls
/// how many independent masks each branch samples; losses averaged over
/// extra draws keep the same expectation with less gradient noise.
#[allow(clippy::too_many_arguments)]
pub fn forward_event(
    tape: &mut Tape,
    graph: &TemporalGraph,
    vars: &ModelVars,
    hp: Hyperparams,
    event: &Event,
    negative_endpoints: &[NodeId],
    mode: MaskMode,
    draws: usize,
    noise: &mut NoiseSource,
    training: bool,
) -> Result<EventForward, TgibError> {
    if graph.edge_feat_dim() != hp.edge_feat_dim {
        return Err(TgibError::Config(format!(
            "graph edge feature dim {} does not match model {}",
            graph.edge_feat_dim(),
            hp.edge_feat_dim
        )));
    }
    let comp = extract_computation_graph(graph, event.id, hp.hops, hp.neighbor_budget)?;
    let mut enc = Encoder::new(
        graph,
        vars.time,
        vars.layers.clone(),
        hp.embed_dim,
        hp.time_dim,
        hp.neighbor_budget,
        hp.dropout,
        training,
    )?;
    let x_pos = target_rep(tape, &mut enc, noise, event)?;
    let z = if comp.is_empty() {
        None
    } else {
        let mut rows = Vec::with_capacity(comp.len());
        for cand in &comp.candidates {
            let e = graph.event(cand.event_id);
            rows.push(candidate_rep(tape, &mut enc, noise, e, event.t)?);
        }
        Some(tape.stack_rows(&rows)?)
    };
    let width = hp.rep_width();
    let pos = branch(tape, vars, x_pos, z, width, mode, draws, noise, hp.dropout, training)?;
    let mut negs = Vec::with_capacity(negative_endpoints.len());
    for &n in negative_endpoints {
        let corrupted = Event {
            id: event.id,
            u: event.u,
            v: n,
            t: event.t,
            att: event.att.clone(),
        };
        let x_neg = target_rep(tape, &mut enc, noise, &corrupted)?;
        negs.push(branch(tape, vars, x_neg, z, width, mode, draws, noise, hp.dropout, training)?);
    }
    Ok(EventForward { comp, z, pos, negs })
}

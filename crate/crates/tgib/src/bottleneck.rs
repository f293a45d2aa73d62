//! Event-level explanation machinery: time-aware event representations,
//! candidate importance scoring, stochastic mask sampling, subgraph
//! readout, and the compression penalty that keeps explanations small.

use rand::Rng;

use crate::encoder::Encoder;
use crate::numcore::{NoiseSource, Tape, Tensor, Var};
use crate::tempgraph::Event;
use crate::TgibError;

/// Probabilities are kept inside `[PROB_CLAMP, 1 - PROB_CLAMP]` before any
/// logit so the relaxation never sees an infinite value.
pub const PROB_CLAMP: f64 = 1e-6;

/// Width of an event representation `[h_u ‖ h_v ‖ time-code ‖ att]`.
pub fn rep_width(embed_dim: usize, time_dim: usize, edge_feat_dim: usize) -> usize {
    2 * embed_dim + time_dim + edge_feat_dim
}

/// The importance scorer: a two-layer MLP over a concatenated
/// (target representation, candidate representation) pair.
#[derive(Debug, Clone)]
pub struct ScorerParams {
    pub w0: Tensor,
    pub b0: Tensor,
    pub w1: Tensor,
    pub b1: Tensor,
}

impl ScorerParams {
    pub fn init(rep_width: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        ScorerParams {
            w0: Tensor::xavier_uniform(2 * rep_width, hidden, rng),
            b0: Tensor::zeros(1, hidden),
            w1: Tensor::xavier_uniform(hidden, 1, rng),
            b1: Tensor::zeros(1, 1),
        }
    }

    pub fn register(&self, tape: &mut Tape) -> ScorerVars {
        ScorerVars {
            w0: tape.param(&self.w0),
            b0: tape.param(&self.b0),
            w1: tape.param(&self.w1),
            b1: tape.param(&self.b1),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ScorerVars {
    pub w0: Var,
    pub b0: Var,
    pub w1: Var,
    pub b1: Var,
}

/// How candidate scores become mask weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MaskMode {
    /// Logistic relaxation of Bernoulli sampling; differentiable, used in
    /// training.
    Relaxed { temperature: f64 },
    /// Deterministic threshold at 0.5 with a straight-through gradient.
    Hard,
    /// Keep every candidate; the reference "full graph" prediction.
    Full,
}

/// `[h_u(t_k) ‖ h_v(t_k) ‖ Φ(0) ‖ att_k]` for the event being predicted.
pub fn target_rep(
    tape: &mut Tape,
    enc: &mut Encoder,
    noise: &mut NoiseSource,
    event: &Event,
) -> Result<Var, TgibError> {
    let depth = enc.num_layers();
    let h_u = enc.node_embedding(tape, noise, event.u, event.t, event, depth)?;
    let h_v = enc.node_embedding(tape, noise, event.v, event.t, event, depth)?;
    let phi = enc.time_encode(tape, 0.0)?;
    let att = tape.const_row(&event.att);
    Ok(tape.concat_cols(&[h_u, h_v, phi, att])?)
}

/// `[h_u(t_j) ‖ h_v(t_j) ‖ Φ(t_k − t_j) ‖ att_j]` for a candidate event;
/// endpoint embeddings are taken at the candidate's own time.
pub fn candidate_rep(
    tape: &mut Tape,
    enc: &mut Encoder,
    noise: &mut NoiseSource,
    candidate: &Event,
    target_time: f64,
) -> Result<Var, TgibError> {
    let dt = target_time - candidate.t;
    if dt <= 0.0 {
        return Err(TgibError::NonCausalCandidate {
            event: candidate.id,
            dt,
        });
    }
    let depth = enc.num_layers();
    let h_u = enc.node_embedding(tape, noise, candidate.u, candidate.t, candidate, depth)?;
    let h_v = enc.node_embedding(tape, noise, candidate.v, candidate.t, candidate, depth)?;
    let phi = enc.time_encode(tape, dt)?;
    let att = tape.const_row(&candidate.att);
    Ok(tape.concat_cols(&[h_u, h_v, phi, att])?)
}

/// Inclusion probabilities for every candidate row of `z` against the
/// target representation `x`: `σ(mlp([x ‖ z_j]))`, returned as an m×1
/// column.
pub fn importance_scores(
    tape: &mut Tape,
    scorer: ScorerVars,
    x: Var,
    z: Var,
) -> Result<Var, TgibError> {
    let m = tape.shape(z)[0];
    let x_rows = tape.repeat_rows(x, m)?;
    let pairs = tape.concat_cols(&[x_rows, z])?;
    let pre = tape.matmul(pairs, scorer.w0)?;
    let pre = tape.add_row(pre, scorer.b0)?;
    let hidden = tape.relu(pre);
    let out = tape.matmul(hidden, scorer.w1)?;
    let logits = tape.add_row(out, scorer.b1)?;
    Ok(tape.sigmoid(logits))
}

/// Turns scores into mask weights α. Relaxed mode draws one uniform per
/// candidate from `noise` (clamped like the probabilities), so a replayed
/// noise source reproduces the mask exactly.
pub fn sample_mask(
    tape: &mut Tape,
    scores: Var,
    mode: MaskMode,
    noise: &mut NoiseSource,
) -> Result<Var, TgibError> {
    let m = tape.shape(scores)[0];
    let ones = tape.constant(m, 1, vec![1.0; m])?;
    match mode {
        MaskMode::Full => Ok(ones),
        MaskMode::Hard => {
            let p = tape.clamp(scores, PROB_CLAMP, 1.0 - PROB_CLAMP);
            let jump: Vec<f64> = tape
                .value(p)
                .iter()
                .map(|&x| if x > 0.5 { 1.0 - x } else { -x })
                .collect();
            let jump = tape.constant(m, 1, jump)?;
            Ok(tape.add(p, jump)?)
        }
        MaskMode::Relaxed { temperature } => {
            if temperature <= 0.0 {
                return Err(TgibError::Config(format!(
                    "mask temperature must be positive, got {temperature}"
                )));
            }
            let p = tape.clamp(scores, PROB_CLAMP, 1.0 - PROB_CLAMP);
            let comp = tape.sub(ones, p)?;
            let log_p = tape.log(p)?;
            let log_comp = tape.log(comp)?;
            let p_logit = tape.sub(log_p, log_comp)?;
            let draws: Vec<f64> = (0..m)
                .map(|_| {
                    let u = noise.uniform().clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
                    (u / (1.0 - u)).ln()
                })
                .collect();
            let noise_logit = tape.constant(m, 1, draws)?;
            let pre = tape.add(p_logit, noise_logit)?;
            let scaled = tape.scale(pre, 1.0 / temperature);
            Ok(tape.sigmoid(scaled))
        }
    }
}

/// Mean-pooled explanation vector `H = (1/m)·Σ_j α_j z_j`.
pub fn masked_readout(tape: &mut Tape, z: Var, alpha: Var) -> Result<Var, TgibError> {
    let m = tape.shape(z)[0];
    let weights = tape.transpose(alpha);
    let summed = tape.matmul(weights, z)?;
    Ok(tape.scale(summed, 1.0 / m as f64))
}

/// Compression penalty: summed KL between each candidate's inclusion
/// Bernoulli and the fixed prior `Bern(prior)`.
pub fn kl_loss(tape: &mut Tape, scores: Var, prior: f64) -> Result<Var, TgibError> {
    if !(prior > 0.0 && prior < 1.0) {
        return Err(TgibError::Config(format!(
            "mask prior must lie strictly inside (0, 1), got {prior}"
        )));
    }
    let m = tape.shape(scores)[0];
    let p = tape.clamp(scores, PROB_CLAMP, 1.0 - PROB_CLAMP);
    let ones = tape.constant(m, 1, vec![1.0; m])?;
    let comp = tape.sub(ones, p)?;
    let log_p = tape.log(p)?;
    let log_comp = tape.log(comp)?;
    let log_prior = tape.constant(m, 1, vec![prior.ln(); m])?;
    let log_comp_prior = tape.constant(m, 1, vec![(1.0 - prior).ln(); m])?;
    let inc = tape.sub(log_p, log_prior)?;
    let exc = tape.sub(log_comp, log_comp_prior)?;
    let t_inc = tape.mul(p, inc)?;
    let t_exc = tape.mul(comp, exc)?;
    let total = tape.add(t_inc, t_exc)?;
    Ok(tape.sum_all(total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::{AttentionLayerParams, AttentionLayerVars, TimeEncoderParams};
    use crate::numcore::{gradcheck, subseed};
    use crate::tempgraph::TemporalGraph;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::cell::RefCell;

    struct Fixture {
        graph: TemporalGraph,
        time: TimeEncoderParams,
        layers: Vec<AttentionLayerParams>,
    }

    fn fixture() -> Fixture {
        let rows = vec![
            (0, 1, 1.0, vec![0.5]),
            (1, 2, 2.0, vec![-0.25]),
            (0, 2, 3.0, vec![0.8]),
        ];
        let mut graph = TemporalGraph::from_events(3, 1, rows).unwrap();
        graph
            .set_node_features(2, vec![0.1, 0.2, 0.3, -0.1, -0.2, 0.05])
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        Fixture {
            graph,
            time: TimeEncoderParams::new(2),
            layers: vec![AttentionLayerParams::init(2, 1, 2, &mut rng)],
        }
    }

    fn build<'g>(f: &'g Fixture, tape: &mut Tape) -> Encoder<'g> {
        let time = f.time.register(tape);
        let layers: Vec<AttentionLayerVars> = f.layers.iter().map(|l| l.register(tape)).collect();
        Encoder::new(&f.graph, time, layers, 2, 2, 3, 0.0, false).unwrap()
    }

    #[test]
    fn reps_have_documented_layout() {
        let f = fixture();
        let mut tape = Tape::new();
        let mut enc = build(&f, &mut tape);
        let mut noise = NoiseSource::from_seed(subseed(1, 0));
        let target = f.graph.event(3).clone();

        let x = target_rep(&mut tape, &mut enc, &mut noise, &target).unwrap();
        assert_eq!(tape.shape(x), [1, rep_width(2, 2, 1)]);
        let x_val = tape.value(x).to_vec();
        let h_u = enc
            .node_embedding(&mut tape, &mut noise, target.u, target.t, &target, 1)
            .unwrap();
        let h_v = enc
            .node_embedding(&mut tape, &mut noise, target.v, target.t, &target, 1)
            .unwrap();
        assert_eq!(&x_val[0..2], tape.value(h_u));
        assert_eq!(&x_val[2..4], tape.value(h_v));
        assert_eq!(&x_val[4..6], &[1.0, 1.0]);
        assert_eq!(&x_val[6..7], &target.att[..]);

        let cand = f.graph.event(1).clone();
        let z = candidate_rep(&mut tape, &mut enc, &mut noise, &cand, target.t).unwrap();
        let z_val = tape.value(z).to_vec();
        let phi = enc.time_encode(&mut tape, target.t - cand.t).unwrap();
        assert_eq!(&z_val[4..6], tape.value(phi));
        assert_eq!(&z_val[6..7], &cand.att[..]);
    }

    #[test]
    fn candidate_rep_rejects_non_causal_spans() {
        let f = fixture();
        let mut tape = Tape::new();
        let mut enc = build(&f, &mut tape);
        let mut noise = NoiseSource::from_seed(subseed(1, 0));
        let cand = f.graph.event(2).clone();
        let err = candidate_rep(&mut tape, &mut enc, &mut noise, &cand, cand.t).unwrap_err();
        assert!(matches!(
            err,
            TgibError::NonCausalCandidate { event: 2, .. }
        ));
    }

    #[test]
    fn doubling_the_span_changes_only_the_time_slot() {
        let f = fixture();
        let mut tape = Tape::new();
        let mut enc = build(&f, &mut tape);
        let mut noise = NoiseSource::from_seed(subseed(1, 0));
        let cand = f.graph.event(1).clone();
        let a = candidate_rep(&mut tape, &mut enc, &mut noise, &cand, 3.0).unwrap();
        let b = candidate_rep(&mut tape, &mut enc, &mut noise, &cand, 5.0).unwrap();
        let (a, b) = (tape.value(a).to_vec(), tape.value(b).to_vec());
        assert_eq!(&a[0..4], &b[0..4]);
        assert_eq!(&a[6..7], &b[6..7]);
        assert_ne!(&a[4..6], &b[4..6]);
    }

    fn const_scores(tape: &mut Tape, values: &[f64]) -> Var {
        let t = Tensor::from_vec(values.len(), 1, values.to_vec()).unwrap();
        tape.param(&t)
    }

    #[test]
    fn zero_final_layer_scores_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut scorer = ScorerParams::init(4, 3, &mut rng);
        scorer.w1 = Tensor::zeros(3, 1);
        let mut tape = Tape::new();
        let vars = scorer.register(&mut tape);
        let x = tape.const_row(&[0.4, -0.2, 1.0, 0.3]);
        let z = tape
            .constant(2, 4, vec![0.1, 0.2, 0.3, 0.4, -0.5, 0.6, -0.7, 0.8])
            .unwrap();
        let p = importance_scores(&mut tape, vars, x, z).unwrap();
        assert_eq!(tape.value(p), &[0.5, 0.5]);
    }

    #[test]
    fn scores_match_hand_evaluated_mlp() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let scorer = ScorerParams::init(2, 3, &mut rng);
        let mut tape = Tape::new();
        let vars = scorer.register(&mut tape);
        let x = tape.const_row(&[0.25, -0.75]);
        let z = tape.constant(2, 2, vec![1.0, 0.5, -0.25, 2.0]).unwrap();
        let p = importance_scores(&mut tape, vars, x, z).unwrap();

        for (row, z_row) in [[1.0, 0.5], [-0.25, 2.0]].iter().enumerate() {
            let input = [0.25, -0.75, z_row[0], z_row[1]];
            let hidden: Vec<f64> = (0..3)
                .map(|j| {
                    let pre: f64 = (0..4).map(|i| input[i] * scorer.w0.data[i * 3 + j]).sum();
                    (pre + scorer.b0.data[j]).max(0.0)
                })
                .collect();
            let logit: f64 = (0..3).map(|j| hidden[j] * scorer.w1.data[j]).sum::<f64>()
                + scorer.b1.data[0];
            let want = 1.0 / (1.0 + (-logit).exp());
            assert!((tape.value(p)[row] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn scores_commute_with_candidate_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let scorer = ScorerParams::init(2, 4, &mut rng);
        let mut tape = Tape::new();
        let vars = scorer.register(&mut tape);
        let x = tape.const_row(&[0.5, 0.5]);
        let z_fwd = tape.constant(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let z_rev = tape.constant(2, 2, vec![3.0, 4.0, 1.0, 2.0]).unwrap();
        let p_fwd = importance_scores(&mut tape, vars, x, z_fwd).unwrap();
        let p_rev = importance_scores(&mut tape, vars, x, z_rev).unwrap();
        assert_eq!(tape.value(p_fwd)[0], tape.value(p_rev)[1]);
        assert_eq!(tape.value(p_fwd)[1], tape.value(p_rev)[0]);
    }

    #[test]
    fn kl_scalar_oracles() {
        let mut tape = Tape::new();
        let s = const_scores(&mut tape, &[0.9]);
        let kl = kl_loss(&mut tape, s, 0.5).unwrap();
        let got = tape.scalar_value(kl);
        let exact = 0.9 * (0.9f64 / 0.5).ln() + 0.1 * (0.1f64 / 0.5).ln();
        assert!((got - 0.3681).abs() < 1e-4);
        assert!((got - exact).abs() < 1e-12);

        let s = const_scores(&mut tape, &[0.5, 0.5]);
        let kl = kl_loss(&mut tape, s, 0.5).unwrap();
        assert_eq!(tape.scalar_value(kl), 0.0);
        let s = const_scores(&mut tape, &[0.5, 0.5, 0.5]);
        let kl = kl_loss(&mut tape, s, 0.5).unwrap();
        assert_eq!(tape.scalar_value(kl), 0.0);
    }

    #[test]
    fn kl_nonnegative_and_zero_only_at_prior() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let r = rng.random_range(0.05..0.95);
            let m = rng.random_range(1..6);
            let p: Vec<f64> = (0..m).map(|_| rng.random_range(0.01..0.99)).collect();
            let mut tape = Tape::new();
            let s = const_scores(&mut tape, &p);
            let kl = kl_loss(&mut tape, s, r).unwrap();
            let v = tape.scalar_value(kl);
            assert!(v >= 0.0);
            if p.iter().any(|x| (x - r).abs() > 1e-3) {
                assert!(v > 0.0);
            }
        }
        let mut tape = Tape::new();
        let s = const_scores(&mut tape, &[0.3, 0.3]);
        let kl = kl_loss(&mut tape, s, 0.3).unwrap();
        assert!(tape.scalar_value(kl).abs() < 1e-15);
    }

    #[test]
    fn kl_gradient_vanishes_at_the_prior() {
        let mut tape = Tape::new();
        let s = const_scores(&mut tape, &[0.4, 0.4]);
        let kl = kl_loss(&mut tape, s, 0.4).unwrap();
        tape.backward(kl).unwrap();
        for g in tape.grad(s).unwrap() {
            assert!(g.abs() < 1e-12);
        }
        assert!(matches!(
            kl_loss(&mut tape, s, 1.0),
            Err(TgibError::Config(_))
        ));
    }

    #[test]
    fn full_and_hard_masks() {
        let mut tape = Tape::new();
        let mut noise = NoiseSource::from_seed(1);
        let s = const_scores(&mut tape, &[0.3, 0.7]);
        let full = sample_mask(&mut tape, s, MaskMode::Full, &mut noise).unwrap();
        assert_eq!(tape.value(full), &[1.0, 1.0]);

        let hard = sample_mask(&mut tape, s, MaskMode::Hard, &mut noise).unwrap();
        assert_eq!(tape.value(hard), &[0.0, 1.0]);
        // Straight-through: the step is transparent to the gradient.
        let total = tape.sum_all(hard);
        tape.backward(total).unwrap();
        assert_eq!(tape.grad(s).unwrap(), &[1.0, 1.0]);
    }

    #[test]
    fn relaxed_mask_honors_frozen_noise() {
        let run = |noise: &mut NoiseSource| -> (Vec<f64>, Vec<f64>) {
            let mut tape = Tape::new();
            let s = const_scores(&mut tape, &[0.2, 0.6, 0.9]);
            let mask = sample_mask(
                &mut tape,
                s,
                MaskMode::Relaxed { temperature: 0.7 },
                noise,
            )
            .unwrap();
            (tape.value(mask).to_vec(), noise.recording().to_vec())
        };
        let mut live = NoiseSource::from_seed(42);
        let (a, draws) = run(&mut live);
        let mut replay = NoiseSource::replay(draws);
        let (b, _) = run(&mut replay);
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    fn mc_mask_mean(p: f64, temperature: f64, draws: usize) -> (f64, Vec<f64>) {
        let mut noise = NoiseSource::from_seed(777);
        let mut alphas = Vec::with_capacity(draws);
        for chunk in 0..draws / 100 {
            let mut tape = Tape::new();
            let s = const_scores(&mut tape, &vec![p; 100]);
            let mask = sample_mask(&mut tape, s, MaskMode::Relaxed { temperature }, &mut noise)
                .unwrap();
            alphas.extend_from_slice(tape.value(mask));
            let _ = chunk;
        }
        (alphas.iter().sum::<f64>() / alphas.len() as f64, alphas)
    }

    #[test]
    fn relaxed_mask_mean_at_the_symmetric_point() {
        // At p = 0.5 the probability logit vanishes and α = u in
        // distribution, so the sample mean must sit at 0.5.
        let (mean, _) = mc_mask_mean(0.5, 1.0, 10_000);
        assert!((mean - 0.5).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn relaxed_mask_mean_matches_the_logistic_integral() {
        // At τ = 1 the exact mean is ∫ σ(s+w)·σ(w)σ(−w) dw with
        // s = logit(p), which has the closed form
        // p/(2p−1)·[1 − ((1−p)/(2p−1))·ln(p/(1−p))]. At p = 0.7 that is
        // ≈ 0.6379 — the relaxation is mean-biased toward 0.5, while its
        // median stays exactly p (checked below).
        let p: f64 = 0.7;
        let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
        let s = (p / (1.0 - p)).ln();
        let (mut integral, step) = (0.0, 1e-3);
        let mut w = -40.0;
        while w < 40.0 {
            let mid = w + step / 2.0;
            integral += sig(s + mid) * sig(mid) * sig(-mid) * step;
            w += step;
        }
        let closed = p / (2.0 * p - 1.0)
            * (1.0 - (1.0 - p) / (2.0 * p - 1.0) * (p / (1.0 - p)).ln());
        assert!((integral - closed).abs() < 1e-6);
        assert!((closed - 0.6379).abs() < 1e-4);

        let (mean, alphas) = mc_mask_mean(p, 1.0, 10_000);
        assert!((mean - integral).abs() < 0.015, "mean {mean} vs {integral}");

        // Median property: P(α > 0.5) = P(u > 1−p) = p at any τ.
        let over_half = alphas.iter().filter(|a| **a > 0.5).count() as f64 / 10_000.0;
        assert!((over_half - p).abs() < 0.015, "median mass {over_half}");
    }

    #[test]
    fn relaxed_mask_concentrates_at_low_temperature() {
        let (_, alphas) = mc_mask_mean(0.95, 0.01, 10_000);
        let polarized = alphas
            .iter()
            .filter(|a| **a < 1e-3 || **a > 1.0 - 1e-3)
            .count();
        assert!(
            polarized as f64 >= 0.99 * 10_000.0,
            "only {polarized} of 10000 draws polarized"
        );
    }

    #[test]
    fn relaxed_mask_saturates_with_p() {
        let mut prev = 0.0;
        for p in [0.9, 0.99, 0.999, 1.0 - 1e-6] {
            let (mean, alphas) = mc_mask_mean(p, 1.0, 2_000);
            assert!(mean > prev, "mean not increasing at p={p}");
            prev = mean;
            // Noise and probability clamps share a bound, so at the top
            // clamp the pre-sigmoid sum is never negative.
            if p == 1.0 - 1e-6 {
                assert!(alphas.iter().all(|a| *a >= 0.5));
                assert!(mean > 0.99);
            }
        }
    }

    #[test]
    fn readout_edge_cases_and_linearity() {
        let mut tape = Tape::new();
        let z = tape
            .constant(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
            .unwrap();
        let zeros = const_scores(&mut tape, &[0.0, 0.0, 0.0]);
        let h = masked_readout(&mut tape, z, zeros).unwrap();
        assert_eq!(tape.value(h), &[0.0, 0.0]);

        let ones = const_scores(&mut tape, &[1.0, 1.0, 1.0]);
        let h = masked_readout(&mut tape, z, ones).unwrap();
        assert_eq!(tape.value(h), &[3.0, 4.0]);

        let pick = const_scores(&mut tape, &[0.0, 1.0, 0.0]);
        let h = masked_readout(&mut tape, z, pick).unwrap();
        assert_eq!(tape.value(h), &[1.0, 4.0 / 3.0]);

        let a1 = const_scores(&mut tape, &[0.25, 0.5, 0.125]);
        let a2 = const_scores(&mut tape, &[0.5, 0.25, 0.75]);
        let sum = tape.add(a1, a2).unwrap();
        let h_sum = masked_readout(&mut tape, z, sum).unwrap();
        let h1 = masked_readout(&mut tape, z, a1).unwrap();
        let h2 = masked_readout(&mut tape, z, a2).unwrap();
        let lhs = tape.value(h_sum).to_vec();
        let h1 = tape.value(h1).to_vec();
        let h2 = tape.value(h2).to_vec();
        for i in 0..2 {
            assert!((lhs[i] - (h1[i] + h2[i])).abs() < 1e-15);
        }
    }

    #[test]
    fn mask_pipeline_gradient_matches_finite_differences() {
        let scorer = RefCell::new(ScorerParams::init(2, 3, &mut ChaCha8Rng::seed_from_u64(9)));
        let frozen: RefCell<Option<Vec<f64>>> = RefCell::new(None);

        let run = |want_grads: bool| -> (f64, Vec<Vec<f64>>) {
            let mut tape = Tape::new();
            let vars = scorer.borrow().register(&mut tape);
            let x = tape.const_row(&[0.3, -0.4]);
            let z = tape
                .constant(3, 2, vec![0.5, 1.0, -1.5, 0.25, 2.0, -0.75])
                .unwrap();
            let p = importance_scores(&mut tape, vars, x, z).unwrap();
            let mut noise = match frozen.borrow().as_ref() {
                Some(draws) => NoiseSource::replay(draws.clone()),
                None => NoiseSource::from_seed(13),
            };
            let mask = sample_mask(
                &mut tape,
                p,
                MaskMode::Relaxed { temperature: 0.8 },
                &mut noise,
            )
            .unwrap();
            if frozen.borrow().is_none() {
                *frozen.borrow_mut() = Some(noise.recording().to_vec());
            }
            let h = masked_readout(&mut tape, z, mask).unwrap();
            let spread = tape.sum_all(h);
            let kl = kl_loss(&mut tape, p, 0.5).unwrap();
            let loss = tape.add(spread, kl).unwrap();
            let value = tape.scalar_value(loss);
            if !want_grads {
                return (value, Vec::new());
            }
            tape.backward(loss).unwrap();
            let grads = [vars.w0, vars.b0, vars.w1, vars.b1]
                .iter()
                .map(|v| tape.grad(*v).unwrap().to_vec())
                .collect();
            (value, grads)
        };

        let (_, grads) = run(true);
        let sizes = vec![
            ("w0".to_string(), 12),
            ("b0".to_string(), 3),
            ("w1".to_string(), 3),
            ("b1".to_string(), 1),
        ];
        let analytic: std::collections::HashMap<String, Vec<f64>> = sizes
            .iter()
            .map(|(n, _)| n.clone())
            .zip(grads)
            .collect();
        let report = gradcheck(
            &sizes,
            &analytic,
            |name, i, d| {
                let mut s = scorer.borrow_mut();
                match name {
                    "w0" => s.w0.data[i] += d,
                    "b0" => s.b0.data[i] += d,
                    "w1" => s.w1.data[i] += d,
                    "b1" => s.b1.data[i] += d,
                    other => panic!("unknown parameter {other}"),
                }
            },
            || run(false).0,
            1e-5,
        )
        .unwrap();
        assert!(
            report.max_rel_err() < 1e-4,
            "gradient check failed:\n{}",
            report.summary()
        );
    }
}

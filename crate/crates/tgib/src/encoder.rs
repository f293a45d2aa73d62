//! Functional time encoding and stacked temporal self-attention producing
//! time-aware node embeddings.
//!
//! An embedding request `(z, t)` attends over the most recent events of `z`
//! strictly before `t`; each key/value row combines the neighbor's own
//! lower-layer embedding at its interaction time, the interaction
//! attribute, and an encoding of the time span back to `t`. Absolute
//! timestamps never enter the computation.

use std::collections::HashMap;

use rand::Rng;

use crate::numcore::{NoiseSource, NumError, Tape, Tensor, Var};
use crate::tempgraph::{Event, EventId, NodeId, TemporalGraph};

/// Learnable frequencies and phases of the periodic time code.
#[derive(Debug, Clone)]
pub struct TimeEncoderParams {
    pub omega: Tensor,
    pub phase: Tensor,
}

impl TimeEncoderParams {
    /// Geometric frequency ladder spanning ten decades, zero phase. With
    /// zero phase the code of a zero span is the all-ones vector.
    pub fn new(time_dim: usize) -> Self {
        let omega: Vec<f64> = (0..time_dim)
            .map(|i| 10f64.powf(-(i as f64) * 9.0 / time_dim as f64))
            .collect();
        TimeEncoderParams {
            omega: Tensor::from_vec(1, time_dim, omega).expect("ladder length"),
            phase: Tensor::zeros(1, time_dim),
        }
    }

    pub fn register(&self, tape: &mut Tape) -> TimeEncoderVars {
        TimeEncoderVars {
            omega: tape.param(&self.omega),
            phase: tape.param(&self.phase),
        }
    }
}

/// One attention layer: square query/key/value projections over the
/// concatenated `[h ‖ att ‖ time-code]` rows, plus the output FFN.
#[derive(Debug, Clone)]
pub struct AttentionLayerParams {
    pub w_query: Tensor,
    pub w_key: Tensor,
    pub w_value: Tensor,
    pub ffn_w0: Tensor,
    pub ffn_b0: Tensor,
    pub ffn_w1: Tensor,
    pub ffn_b1: Tensor,
}

impl AttentionLayerParams {
    pub fn init(
        embed_dim: usize,
        edge_feat_dim: usize,
        time_dim: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let d_in = embed_dim + edge_feat_dim + time_dim;
        AttentionLayerParams {
            w_query: Tensor::xavier_uniform(d_in, d_in, rng),
            w_key: Tensor::xavier_uniform(d_in, d_in, rng),
            w_value: Tensor::xavier_uniform(d_in, d_in, rng),
            ffn_w0: Tensor::xavier_uniform(d_in + embed_dim, embed_dim, rng),
            ffn_b0: Tensor::zeros(1, embed_dim),
            ffn_w1: Tensor::xavier_uniform(embed_dim, embed_dim, rng),
            ffn_b1: Tensor::zeros(1, embed_dim),
        }
    }

    pub fn register(&self, tape: &mut Tape) -> AttentionLayerVars {
        AttentionLayerVars {
            w_query: tape.param(&self.w_query),
            w_key: tape.param(&self.w_key),
            w_value: tape.param(&self.w_value),
            ffn_w0: tape.param(&self.ffn_w0),
            ffn_b0: tape.param(&self.ffn_b0),
            ffn_w1: tape.param(&self.ffn_w1),
            ffn_b1: tape.param(&self.ffn_b1),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TimeEncoderVars {
    pub omega: Var,
    pub phase: Var,
}

#[derive(Debug, Clone, Copy)]
pub struct AttentionLayerVars {
    pub w_query: Var,
    pub w_key: Var,
    pub w_value: Var,
    pub ffn_w0: Var,
    pub ffn_b0: Var,
    pub ffn_w1: Var,
    pub ffn_b1: Var,
}

/// Scaled dot-product attention weights: softmax of `q·keysᵀ / √scale_dim`.
/// Returns a probability row over key rows.
pub fn attention_weights(
    tape: &mut Tape,
    q: Var,
    keys: Var,
    scale_dim: usize,
) -> Result<Var, NumError> {
    let keys_t = tape.transpose(keys);
    let logits = tape.matmul(q, keys_t)?;
    let scaled = tape.scale(logits, 1.0 / (scale_dim as f64).sqrt());
    tape.softmax(scaled, 1)
}

/// Embedding builder for one forward pass. Memoizes every distinct
/// `(node, time, layer, via-event)` request so shared history inside a
/// computation graph is encoded once per tape.
pub struct Encoder<'g> {
    graph: &'g TemporalGraph,
    time: TimeEncoderVars,
    layers: Vec<AttentionLayerVars>,
    embed_dim: usize,
    time_dim: usize,
    edge_feat_dim: usize,
    neighbor_budget: usize,
    dropout: f64,
    training: bool,
    memo: HashMap<(NodeId, u64, usize, EventId), Var>,
}

impl<'g> Encoder<'g> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        graph: &'g TemporalGraph,
        time: TimeEncoderVars,
        layers: Vec<AttentionLayerVars>,
        embed_dim: usize,
        time_dim: usize,
        neighbor_budget: usize,
        dropout: f64,
        training: bool,
    ) -> Result<Self, NumError> {
        if graph.node_feat_dim() != embed_dim {
            return Err(NumError::BadShape {
                op: "encoder",
                shape: [graph.node_feat_dim(), embed_dim],
                why: "node feature width must equal the embedding dim",
            });
        }
        Ok(Encoder {
            graph,
            time,
            layers,
            embed_dim,
            time_dim,
            edge_feat_dim: graph.edge_feat_dim(),
            neighbor_budget,
            dropout,
            training,
            memo: HashMap::new(),
        })
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn embed_dim(&self) -> usize {
        self.embed_dim
    }

    pub fn time_dim(&self) -> usize {
        self.time_dim
    }

    /// Width of the projected attention rows: `d + f_edge + d_T`.
    pub fn proj_dim(&self) -> usize {
        self.embed_dim + self.edge_feat_dim + self.time_dim
    }

    /// `cos(ω·Δt + phase)`, elementwise over the frequency ladder.
    pub fn time_encode(&self, tape: &mut Tape, dt: f64) -> Result<Var, NumError> {
        let scaled = tape.scale(self.time.omega, dt);
        let shifted = tape.add(scaled, self.time.phase)?;
        Ok(tape.cos(shifted))
    }

    /// Time-aware embedding of `z` just before `t`, seen from the event
    /// `via` (whose attribute fills the query slot). `layer` 0 returns the
    /// raw node features.
    pub fn node_embedding(
        &mut self,
        tape: &mut Tape,
        noise: &mut NoiseSource,
        z: NodeId,
        t: f64,
        via: &Event,
        layer: usize,
    ) -> Result<Var, NumError> {
        let key = if layer == 0 {
            (z, 0, 0, 0)
        } else {
            (z, t.to_bits(), layer, via.id)
        };
        if let Some(v) = self.memo.get(&key) {
            return Ok(*v);
        }
        let h = if layer == 0 {
            tape.const_row(self.graph.node_feature(z))
        } else {
            let x_z = self.node_embedding(tape, noise, z, t, via, 0)?;
            let graph = self.graph;
            let hits = graph.temporal_neighbors(z, t, self.neighbor_budget);
            let pooled = if hits.is_empty() {
                tape.zeros(1, self.proj_dim())
            } else {
                let mut rows = Vec::with_capacity(hits.len());
                for hit in &hits {
                    let h_i =
                        self.node_embedding(tape, noise, hit.neighbor, hit.event.t, hit.event, layer - 1)?;
                    let att_i = tape.const_row(&hit.event.att);
                    let phi_i = self.time_encode(tape, t - hit.event.t)?;
                    rows.push(tape.concat_cols(&[h_i, att_i, phi_i])?);
                }
                let kv_raw = tape.stack_rows(&rows)?;
                let h_self = self.node_embedding(tape, noise, z, t, via, layer - 1)?;
                let att_q = tape.const_row(&via.att);
                let phi_0 = self.time_encode(tape, 0.0)?;
                let q_raw = tape.concat_cols(&[h_self, att_q, phi_0])?;
                let params = self.layers[layer - 1];
                let q = tape.matmul(q_raw, params.w_query)?;
                let k = tape.matmul(kv_raw, params.w_key)?;
                let v = tape.matmul(kv_raw, params.w_value)?;
                let alpha = attention_weights(tape, q, k, self.proj_dim())?;
                let alpha = tape.dropout(alpha, self.dropout, self.training, noise)?;
                tape.matmul(alpha, v)?
            };
            let params = self.layers[layer - 1];
            let ffn_in = tape.concat_cols(&[pooled, x_z])?;
            let pre = tape.matmul(ffn_in, params.ffn_w0)?;
            let pre = tape.add_row(pre, params.ffn_b0)?;
            let hidden = tape.relu(pre);
            let out = tape.matmul(hidden, params.ffn_w1)?;
            tape.add_row(out, params.ffn_b1)?
        };
        self.memo.insert(key, h);
        Ok(h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::{gradcheck, subseed};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::cell::RefCell;
    use std::f64::consts::PI;

    struct Fixture {
        graph: TemporalGraph,
        time: TimeEncoderParams,
        layers: Vec<AttentionLayerParams>,
        embed_dim: usize,
        time_dim: usize,
        budget: usize,
    }

    fn fixture() -> Fixture {
        let rows = vec![
            (0, 1, 1.0, vec![0.5]),
            (1, 2, 2.0, vec![-0.25]),
            (0, 2, 3.0, vec![0.8]),
            (2, 3, 4.0, vec![0.3]),
            (0, 3, 5.0, vec![-0.6]),
        ];
        let mut graph = TemporalGraph::from_events(4, 1, rows).unwrap();
        graph
            .set_node_features(2, vec![0.1, 0.2, 0.3, -0.1, -0.2, 0.05, 0.4, 0.15])
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let layers = (0..2)
            .map(|_| AttentionLayerParams::init(2, 1, 2, &mut rng))
            .collect();
        Fixture {
            graph,
            time: TimeEncoderParams::new(2),
            layers,
            embed_dim: 2,
            time_dim: 2,
            budget: 2,
        }
    }

    fn build<'g>(f: &'g Fixture, tape: &mut Tape) -> Encoder<'g> {
        let time = f.time.register(tape);
        let layers = f.layers.iter().map(|l| l.register(tape)).collect();
        Encoder::new(&f.graph, time, layers, f.embed_dim, f.time_dim, f.budget, 0.0, false)
            .unwrap()
    }

    #[test]
    fn ladder_init_and_zero_span_code() {
        let p = TimeEncoderParams::new(4);
        assert_eq!(p.omega.data[0], 1.0);
        assert!((p.omega.data[3] - 10f64.powf(-27.0 / 4.0)).abs() < 1e-15);
        let f = fixture();
        let mut tape = Tape::new();
        let enc = build(&f, &mut tape);
        let phi0 = enc.time_encode(&mut tape, 0.0).unwrap();
        assert_eq!(tape.value(phi0), &[1.0, 1.0]);
    }

    #[test]
    fn time_code_matches_scalar_cosines() {
        let mut time = TimeEncoderParams::new(2);
        time.omega = Tensor::from_vec(1, 2, vec![1.0, 0.1]).unwrap();
        let f = Fixture { time, ..fixture() };
        let mut tape = Tape::new();
        let enc = build(&f, &mut tape);
        let phi = enc.time_encode(&mut tape, PI).unwrap();
        let got = tape.value(phi);
        assert!((got[0] - (-1.0)).abs() < 1e-4);
        assert!((got[1] - 0.9511).abs() < 1e-4);
        assert!((got[1] - (0.1 * PI).cos()).abs() < 1e-15);
    }

    #[test]
    fn time_code_is_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut time = TimeEncoderParams::new(8);
        for w in time.omega.data.iter_mut().chain(time.phase.data.iter_mut()) {
            *w = rng.random_range(-3.0..3.0);
        }
        let f = Fixture {
            time,
            time_dim: 8,
            ..fixture()
        };
        let mut tape = Tape::new();
        let enc = build(&f, &mut tape);
        for i in 0..50 {
            let phi = enc.time_encode(&mut tape, i as f64 * 13.7).unwrap();
            assert!(tape.value(phi).iter().all(|x| x.abs() <= 1.0));
        }
    }

    #[test]
    fn attention_weight_edge_cases() {
        let mut tape = Tape::new();
        // Identical keys split evenly.
        let q = tape.const_row(&[1.0, 2.0, 3.0]);
        let keys = tape
            .constant(2, 3, vec![0.5, -1.0, 2.0, 0.5, -1.0, 2.0])
            .unwrap();
        let alpha = attention_weights(&mut tape, q, keys, 3).unwrap();
        assert_eq!(tape.value(alpha), &[0.5, 0.5]);

        // A single key takes all the mass exactly.
        let lone = tape.constant(1, 3, vec![9.0, 9.0, 9.0]).unwrap();
        let alpha = attention_weights(&mut tape, q, lone, 3).unwrap();
        assert_eq!(tape.value(alpha), &[1.0]);

        // Keys engineered so the scaled logits are [1, 0].
        let dim = 4usize;
        let q = tape.const_row(&[2.0, 0.0, 0.0, 0.0]);
        let keys = tape
            .constant(2, 4, vec![1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0])
            .unwrap();
        let alpha = attention_weights(&mut tape, q, keys, dim).unwrap();
        let got = tape.value(alpha);
        assert!((got[0] - 0.7310585786300049).abs() < 1e-12);
        assert!((got[1] - 0.2689414213699951).abs() < 1e-12);
    }

    #[test]
    fn layer_zero_returns_raw_features() {
        let f = fixture();
        let mut tape = Tape::new();
        let mut enc = build(&f, &mut tape);
        let mut noise = NoiseSource::from_seed(subseed(1, 0));
        let via = f.graph.event(5).clone();
        let h = enc
            .node_embedding(&mut tape, &mut noise, 2, 5.0, &via, 0)
            .unwrap();
        assert_eq!(tape.value(h), f.graph.node_feature(2));
    }

    // Plain-Vec re-derivation of the layered attention, written without the
    // tape. Serves as the numeric oracle for `node_embedding`.
    mod unrolled {
        use super::Fixture;

        fn vecmat(x: &[f64], w: &crate::numcore::Tensor) -> Vec<f64> {
            let [r, c] = w.shape;
            assert_eq!(x.len(), r);
            (0..c)
                .map(|j| (0..r).map(|i| x[i] * w.data[i * c + j]).sum())
                .collect()
        }

        fn addv(a: &[f64], b: &[f64]) -> Vec<f64> {
            a.iter().zip(b).map(|(x, y)| x + y).collect()
        }

        pub fn phi(f: &Fixture, dt: f64) -> Vec<f64> {
            f.time
                .omega
                .data
                .iter()
                .zip(&f.time.phase.data)
                .map(|(w, p)| (w * dt + p).cos())
                .collect()
        }

        pub fn embed(f: &Fixture, z: usize, t: f64, via_att: &[f64], layer: usize) -> Vec<f64> {
            if layer == 0 {
                return f.graph.node_feature(z).to_vec();
            }
            let d_in = f.embed_dim + f.graph.edge_feat_dim() + f.time_dim;
            let hits = f.graph.temporal_neighbors(z, t, f.budget);
            let pooled = if hits.is_empty() {
                vec![0.0; d_in]
            } else {
                let params = &f.layers[layer - 1];
                let mut q_raw = embed(f, z, t, via_att, layer - 1);
                q_raw.extend_from_slice(via_att);
                q_raw.extend(phi(f, 0.0));
                let q = vecmat(&q_raw, &params.w_query);
                let mut logits = Vec::new();
                let mut values = Vec::new();
                for hit in &hits {
                    let mut row = embed(f, hit.neighbor, hit.event.t, &hit.event.att, layer - 1);
                    row.extend_from_slice(&hit.event.att);
                    row.extend(phi(f, t - hit.event.t));
                    let k = vecmat(&row, &params.w_key);
                    values.push(vecmat(&row, &params.w_value));
                    let dot: f64 = q.iter().zip(&k).map(|(a, b)| a * b).sum();
                    logits.push(dot / (d_in as f64).sqrt());
                }
                let peak = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = logits.iter().map(|l| (l - peak).exp()).collect();
                let denom: f64 = exps.iter().sum();
                let mut pooled = vec![0.0; d_in];
                for (e, v) in exps.iter().zip(&values) {
                    for (acc, x) in pooled.iter_mut().zip(v) {
                        *acc += e / denom * x;
                    }
                }
                pooled
            };
            let params = &f.layers[layer - 1];
            let mut ffn_in = pooled;
            ffn_in.extend_from_slice(f.graph.node_feature(z));
            let hidden: Vec<f64> = addv(&vecmat(&ffn_in, &params.ffn_w0), &params.ffn_b0.data)
                .into_iter()
                .map(|x| x.max(0.0))
                .collect();
            addv(&vecmat(&hidden, &params.ffn_w1), &params.ffn_b1.data)
        }
    }

    #[test]
    fn two_layer_embedding_matches_hand_unrolled_computation() {
        let f = fixture();
        let mut tape = Tape::new();
        let mut enc = build(&f, &mut tape);
        let mut noise = NoiseSource::from_seed(subseed(1, 0));
        let via = f.graph.event(5).clone();
        for z in [0usize, 3] {
            let h = enc
                .node_embedding(&mut tape, &mut noise, z, 5.0, &via, 2)
                .unwrap();
            let want = unrolled::embed(&f, z, 5.0, &via.att, 2);
            for (g, w) in tape.value(h).iter().zip(&want) {
                assert!((g - w).abs() < 1e-12, "z={z}: {g} vs {w}");
            }
        }
    }

    #[test]
    fn empty_neighborhood_takes_fallback_path() {
        let f = fixture();
        let mut tape = Tape::new();
        let mut enc = build(&f, &mut tape);
        let mut noise = NoiseSource::from_seed(subseed(1, 0));
        let via = f.graph.event(4).clone();
        // Node 3 has no events before t=1.0.
        let h = enc
            .node_embedding(&mut tape, &mut noise, 3, 1.0, &via, 1)
            .unwrap();
        let want = unrolled::embed(&f, 3, 1.0, &via.att, 1);
        assert!(f.graph.temporal_neighbors(3, 1.0, f.budget).is_empty());
        for (g, w) in tape.value(h).iter().zip(&want) {
            assert!((g - w).abs() < 1e-12);
        }
    }

    #[test]
    fn embeddings_are_translation_invariant() {
        let f = fixture();
        let shifted_rows: Vec<(usize, usize, f64, Vec<f64>)> = f
            .graph
            .events()
            .iter()
            .map(|e| (e.u, e.v, e.t + 1000.0, e.att.clone()))
            .collect();
        let mut shifted_graph = TemporalGraph::from_events(4, 1, shifted_rows).unwrap();
        shifted_graph
            .set_node_features(2, vec![0.1, 0.2, 0.3, -0.1, -0.2, 0.05, 0.4, 0.15])
            .unwrap();
        let shifted = Fixture {
            graph: shifted_graph,
            ..fixture()
        };

        let mut tape_a = Tape::new();
        let mut enc_a = build(&f, &mut tape_a);
        let mut tape_b = Tape::new();
        let mut enc_b = build(&shifted, &mut tape_b);
        let mut noise_a = NoiseSource::from_seed(subseed(1, 0));
        let mut noise_b = NoiseSource::from_seed(subseed(1, 0));
        let via_a = f.graph.event(5).clone();
        let via_b = shifted.graph.event(5).clone();
        for z in 0..4 {
            let a = enc_a
                .node_embedding(&mut tape_a, &mut noise_a, z, 5.0, &via_a, 2)
                .unwrap();
            let b = enc_b
                .node_embedding(&mut tape_b, &mut noise_b, z, 1005.0, &via_b, 2)
                .unwrap();
            let bits_a: Vec<u64> = tape_a.value(a).iter().map(|x| x.to_bits()).collect();
            let bits_b: Vec<u64> = tape_b.value(b).iter().map(|x| x.to_bits()).collect();
            assert_eq!(bits_a, bits_b, "node {z}");
        }
    }

    #[test]
    fn neighbor_storage_order_does_not_change_embeddings() {
        // Same content, opposite storage order; with two neighbors every
        // reduction is a two-term sum, so equality is exact.
        let build_graph = |swapped: bool| {
            let rows = if swapped {
                vec![(0, 2, 1.0, vec![0.7]), (0, 1, 1.0, vec![0.3]), (0, 3, 2.0, vec![0.1])]
            } else {
                vec![(0, 1, 1.0, vec![0.3]), (0, 2, 1.0, vec![0.7]), (0, 3, 2.0, vec![0.1])]
            };
            let mut g = TemporalGraph::from_events(4, 1, rows).unwrap();
            g.ensure_node_features(2);
            g
        };
        let f = fixture();
        let out = |g: &TemporalGraph| -> Vec<u64> {
            let mut tape = Tape::new();
            let time = f.time.register(&mut tape);
            let layers = f.layers.iter().map(|l| l.register(&mut tape)).collect();
            let mut enc = Encoder::new(g, time, layers, 2, 2, 4, 0.0, false).unwrap();
            let mut noise = NoiseSource::from_seed(subseed(1, 0));
            let via = g.events().last().unwrap().clone();
            let h = enc
                .node_embedding(&mut tape, &mut noise, 0, 2.0, &via, 1)
                .unwrap();
            tape.value(h).iter().map(|x| x.to_bits()).collect()
        };
        assert_eq!(out(&build_graph(false)), out(&build_graph(true)));
    }

    #[test]
    fn gradients_flow_to_time_and_projection_parameters() {
        let f = RefCell::new(fixture());
        let run = |f: &Fixture, want_grads: bool| -> (f64, Vec<Vec<f64>>) {
            let mut tape = Tape::new();
            let time = f.time.register(&mut tape);
            let layer_vars: Vec<AttentionLayerVars> =
                f.layers.iter().map(|l| l.register(&mut tape)).collect();
            let watched = [time.omega, time.phase, layer_vars[0].w_query];
            let mut enc = Encoder::new(
                &f.graph,
                time,
                layer_vars,
                f.embed_dim,
                f.time_dim,
                f.budget,
                0.0,
                false,
            )
            .unwrap();
            let mut noise = NoiseSource::from_seed(subseed(1, 0));
            let via = f.graph.event(5).clone();
            let h0 = enc
                .node_embedding(&mut tape, &mut noise, 0, 5.0, &via, 2)
                .unwrap();
            let h3 = enc
                .node_embedding(&mut tape, &mut noise, 3, 5.0, &via, 2)
                .unwrap();
            let both = tape.concat_cols(&[h0, h3]).unwrap();
            let loss = tape.sum_all(both);
            let value = tape.scalar_value(loss);
            if !want_grads {
                return (value, Vec::new());
            }
            tape.backward(loss).unwrap();
            let grads = watched
                .iter()
                .map(|v| tape.grad(*v).unwrap().to_vec())
                .collect();
            (value, grads)
        };

        let (_, grads) = run(&f.borrow(), true);
        let sizes = vec![
            ("omega".to_string(), 2),
            ("phase".to_string(), 2),
            ("w_query".to_string(), 25),
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
                let mut f = f.borrow_mut();
                match name {
                    "omega" => f.time.omega.data[i] += d,
                    "phase" => f.time.phase.data[i] += d,
                    "w_query" => f.layers[0].w_query.data[i] += d,
                    other => panic!("unknown parameter {other}"),
                }
            },
            || run(&f.borrow(), false).0,
            1e-5,
        )
        .unwrap();
        assert!(
            report.max_rel_err() < 1e-4,
            "gradient check failed:\n{}",
            report.summary()
        );
        // The time code must actually influence the loss.
        let omega_grad = &analytic["omega"];
        assert!(omega_grad.iter().any(|g| g.abs() > 1e-12));
    }

    #[test]
    fn memoization_reuses_shared_history() {
        let f = fixture();
        let mut tape = Tape::new();
        let mut enc = build(&f, &mut tape);
        let mut noise = NoiseSource::from_seed(subseed(1, 0));
        let via = f.graph.event(5).clone();
        let a = enc
            .node_embedding(&mut tape, &mut noise, 0, 5.0, &via, 2)
            .unwrap();
        let before = tape.len();
        let b = enc
            .node_embedding(&mut tape, &mut noise, 0, 5.0, &via, 2)
            .unwrap();
        assert_eq!(a, b);
        assert_eq!(tape.len(), before, "repeat request must not grow the tape");
    }
}

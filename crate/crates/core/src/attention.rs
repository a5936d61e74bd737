//! Modal attention inside the gated update (M-GRU) and temporal
//! self-attention pooling.

use odernn_autodiff::{Tape, Var};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scoring parameters for one modality: `e = wᵀ tanh(W_h·h + W_v·v + b)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModalAttentionParams<P> {
    pub w: P,
    pub w_h: P,
    pub w_v: P,
    pub b: P,
}

impl<P: Copy> ModalAttentionParams<P> {
    pub fn map<Q>(&self, mut f: impl FnMut(P) -> Q) -> ModalAttentionParams<Q> {
        ModalAttentionParams {
            w: f(self.w),
            w_h: f(self.w_h),
            w_v: f(self.w_v),
            b: f(self.b),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MGruParams<P> {
    pub w_z: P,
    pub w_r: P,
    pub w_g: P,
}

impl<P: Copy> MGruParams<P> {
    pub fn map<Q>(&self, mut f: impl FnMut(P) -> Q) -> MGruParams<Q> {
        MGruParams {
            w_z: f(self.w_z),
            w_r: f(self.w_r),
            w_g: f(self.w_g),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TemporalAttentionParams<P> {
    pub w: P,
    pub w_proj: P,
}

impl<P: Copy> TemporalAttentionParams<P> {
    pub fn map<Q>(&self, mut f: impl FnMut(P) -> Q) -> TemporalAttentionParams<Q> {
        TemporalAttentionParams {
            w: f(self.w),
            w_proj: f(self.w_proj),
        }
    }
}

/// Nonlinearity of the update and reset gates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateActivation {
    /// Gates in (0, 1), so the state update is a convex blend.
    #[default]
    Logistic,
    /// Literal hyperbolic-tangent gates; the blend may extrapolate.
    Tanh,
}

/// Softmax-weighted sum of equally sized vectors: stacks them as columns and
/// multiplies by the weight vector.
fn weighted_sum(tape: &mut Tape, items: &[Var], weights: Var) -> Result<Var> {
    let mut cols = Vec::with_capacity(items.len());
    for &v in items {
        let n = tape.shape(v)[0];
        cols.push(tape.reshape(v, &[n, 1])?);
    }
    let stacked = tape.concat(&cols, 1)?;
    Ok(tape.matmul(stacked, weights)?)
}

/// Scores each modality against the incoming hidden state and the full
/// observation, returning `(Σ a_m v_m, a)`.
pub fn modal_attention(
    tape: &mut Tape,
    h_prev: Var,
    modal: &[Var],
    v_concat: Var,
    params: &[ModalAttentionParams<Var>],
) -> Result<(Var, Var)> {
    if modal.is_empty() || modal.len() != params.len() {
        return Err(Error::InvalidInput(format!(
            "modal attention got {} embeddings for {} parameter sets",
            modal.len(),
            params.len()
        )));
    }
    let mut scores = Vec::with_capacity(modal.len());
    for p in params {
        let from_h = tape.matmul(p.w_h, h_prev)?;
        let from_v = tape.matmul(p.w_v, v_concat)?;
        let pre = tape.add(from_h, from_v)?;
        let pre = tape.add(pre, p.b)?;
        let act = tape.tanh(pre)?;
        scores.push(tape.matmul(p.w, act)?);
    }
    let logits = tape.concat(&scores, 0)?;
    let weights = tape.softmax(logits)?;
    let attended = weighted_sum(tape, modal, weights)?;
    Ok((attended, weights))
}

fn gate(tape: &mut Tape, x: Var, activation: GateActivation) -> Result<Var> {
    Ok(match activation {
        GateActivation::Logistic => tape.sigmoid(x)?,
        GateActivation::Tanh => tape.tanh(x)?,
    })
}

/// Gated state update.
///
/// Gates read `[h ‖ v]`; the candidate reads `[r·h ‖ u]` with
/// `u = [v ‖ u']` when an attended vector `u'` is given and `u = v` otherwise.
pub fn mgru_update(
    tape: &mut Tape,
    h_prev: Var,
    v: Var,
    attended: Option<Var>,
    params: &MGruParams<Var>,
    activation: GateActivation,
) -> Result<Var> {
    let hv = tape.concat(&[h_prev, v], 0)?;
    let z = tape.matmul(params.w_z, hv)?;
    let z = gate(tape, z, activation)?;
    let r = tape.matmul(params.w_r, hv)?;
    let r = gate(tape, r, activation)?;
    let rh = tape.mul(r, h_prev)?;
    let cand_in = match attended {
        Some(a) => tape.concat(&[rh, v, a], 0)?,
        None => tape.concat(&[rh, v], 0)?,
    };
    let cand = tape.matmul(params.w_g, cand_in)?;
    let cand = tape.tanh(cand)?;
    // (1 - z)·h + z·h̃ = h + z·(h̃ - h)
    let delta = tape.sub(cand, h_prev)?;
    let step = tape.mul(z, delta)?;
    Ok(tape.add(h_prev, step)?)
}

/// `a = softmax_t(wᵀ tanh(W·v_t))`, returns `(Σ a_t v_t, a)`.
pub fn temporal_self_attention(
    tape: &mut Tape,
    steps: &[Var],
    params: &TemporalAttentionParams<Var>,
) -> Result<(Var, Var)> {
    if steps.is_empty() {
        return Err(Error::InvalidInput(
            "temporal attention needs at least one step".into(),
        ));
    }
    let mut scores = Vec::with_capacity(steps.len());
    for &v in steps {
        let proj = tape.matmul(params.w_proj, v)?;
        let act = tape.tanh(proj)?;
        scores.push(tape.matmul(params.w, act)?);
    }
    let logits = tape.concat(&scores, 0)?;
    let weights = tape.softmax(logits)?;
    let pooled = weighted_sum(tape, steps, weights)?;
    Ok((pooled, weights))
}

#[cfg(test)]
mod tests {
    use super::*;
    use odernn_autodiff::Tensor;

    fn leaf(tape: &mut Tape, shape: &[usize], data: Vec<f64>) -> Var {
        tape.leaf(Tensor::new(shape.to_vec(), data).unwrap())
    }

    /// Modal parameters with zero weight matrices so the score is `w·tanh(b)`.
    fn constant_score(
        tape: &mut Tape,
        h: usize,
        v: usize,
        w: f64,
        b: f64,
    ) -> ModalAttentionParams<Var> {
        ModalAttentionParams {
            w: leaf(tape, &[1], vec![w]),
            w_h: leaf(tape, &[1, h], vec![0.0; h]),
            w_v: leaf(tape, &[1, v], vec![0.0; v]),
            b: leaf(tape, &[1], vec![b]),
        }
    }

    #[test]
    fn single_modality_gets_all_weight() {
        let mut tape = Tape::new();
        let h = leaf(&mut tape, &[2], vec![0.1, 0.2]);
        let v0 = leaf(&mut tape, &[4], vec![1.0, 2.0, 1.0, 1.0]);
        let p = constant_score(&mut tape, 2, 4, 0.7, 0.3);
        let (u, a) = modal_attention(&mut tape, h, &[v0], v0, &[p]).unwrap();
        assert_eq!(tape.value(a).data(), &[1.0]);
        assert_eq!(tape.value(u).data(), tape.value(v0).data());
    }

    #[test]
    fn identical_modalities_get_uniform_weight() {
        let mut tape = Tape::new();
        let h = leaf(&mut tape, &[2], vec![0.1, 0.2]);
        let v = leaf(&mut tape, &[2], vec![1.0, 1.0]);
        let concat = tape.concat(&[v, v, v], 0).unwrap();
        let p = ModalAttentionParams {
            w: leaf(&mut tape, &[2], vec![0.5, -0.4]),
            w_h: leaf(&mut tape, &[2, 2], vec![0.1, 0.2, 0.3, 0.4]),
            w_v: leaf(
                &mut tape,
                &[2, 6],
                (0..12).map(|i| i as f64 * 0.05).collect(),
            ),
            b: leaf(&mut tape, &[2], vec![0.0, 0.1]),
        };
        let (_, a) = modal_attention(&mut tape, h, &[v, v, v], concat, &[p, p, p]).unwrap();
        for &w in tape.value(a).data() {
            assert!((w - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn hand_set_scores_give_quarter_and_three_quarters() {
        let mut tape = Tape::new();
        let h = leaf(&mut tape, &[1], vec![0.0]);
        let v0 = leaf(&mut tape, &[2], vec![4.0, 0.0]);
        let v1 = leaf(&mut tape, &[2], vec![0.0, 8.0]);
        let concat = tape.concat(&[v0, v1], 0).unwrap();
        // e_1 = 2·tanh(atanh(ln 3 / 2)) = ln 3
        let p0 = constant_score(&mut tape, 1, 4, 1.0, 0.0);
        let p1 = constant_score(&mut tape, 1, 4, 2.0, (3f64.ln() / 2.0).atanh());
        let (u, a) = modal_attention(&mut tape, h, &[v0, v1], concat, &[p0, p1]).unwrap();
        let a = tape.value(a).data();
        assert!((a[0] - 0.25).abs() < 1e-12 && (a[1] - 0.75).abs() < 1e-12);
        let u = tape.value(u).data();
        assert!((u[0] - 1.0).abs() < 1e-12 && (u[1] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn closed_update_gate_keeps_state() {
        let mut tape = Tape::new();
        let h = leaf(&mut tape, &[2], vec![0.3, -0.6]);
        let v = leaf(&mut tape, &[1], vec![1.0]);
        let p = MGruParams {
            w_z: leaf(&mut tape, &[2, 3], vec![0.0, 0.0, -1e3, 0.0, 0.0, -1e3]),
            w_r: leaf(&mut tape, &[2, 3], vec![0.5; 6]),
            w_g: leaf(&mut tape, &[2, 3], vec![0.2; 6]),
        };
        let out = mgru_update(&mut tape, h, v, None, &p, GateActivation::Logistic).unwrap();
        assert_eq!(tape.value(out).data(), &[0.3, -0.6]);
    }

    #[test]
    fn open_gates_give_candidate() {
        let mut tape = Tape::new();
        let h = leaf(&mut tape, &[2], vec![0.3, -0.6]);
        let v = leaf(&mut tape, &[1], vec![1.0]);
        let u = leaf(&mut tape, &[1], vec![0.5]);
        let wg: Vec<f64> = vec![0.1, 0.2, 0.3, 0.4, -0.5, 0.6, 0.7, 0.8];
        let p = MGruParams {
            w_z: leaf(&mut tape, &[2, 3], vec![0.0, 0.0, 1e3, 0.0, 0.0, 1e3]),
            w_r: leaf(&mut tape, &[2, 3], vec![0.0, 0.0, 1e3, 0.0, 0.0, 1e3]),
            w_g: leaf(&mut tape, &[2, 4], wg.clone()),
        };
        let out = mgru_update(&mut tape, h, v, Some(u), &p, GateActivation::Logistic).unwrap();
        let input = [0.3, -0.6, 1.0, 0.5];
        for (row, got) in tape.value(out).data().iter().enumerate() {
            let pre: f64 = (0..4).map(|j| wg[row * 4 + j] * input[j]).sum();
            assert!((got - pre.tanh()).abs() < 1e-12);
        }
    }

    #[test]
    fn temporal_single_and_identical_steps() {
        let mut tape = Tape::new();
        let p = TemporalAttentionParams {
            w: leaf(&mut tape, &[2], vec![1.0, -2.0]),
            w_proj: leaf(&mut tape, &[2, 3], vec![0.3, 0.1, -0.2, 0.5, 0.4, 0.0]),
        };
        let v = leaf(&mut tape, &[3], vec![1.0, 2.0, 3.0]);
        let (h, a) = temporal_self_attention(&mut tape, &[v], &p).unwrap();
        assert_eq!(tape.value(a).data(), &[1.0]);
        assert_eq!(tape.value(h).data(), &[1.0, 2.0, 3.0]);
        let (h, a) = temporal_self_attention(&mut tape, &[v, v, v, v], &p).unwrap();
        assert!(tape
            .value(a)
            .data()
            .iter()
            .all(|w| (w - 0.25).abs() < 1e-15));
        for (x, y) in tape.value(h).data().iter().zip([1.0, 2.0, 3.0]) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn temporal_hand_set_scores() {
        let mut tape = Tape::new();
        // score_t = 2·tanh(v_t[0]); v_0[0] = 0, v_1[0] = atanh(ln 3 / 2)
        let p = TemporalAttentionParams {
            w: leaf(&mut tape, &[1], vec![2.0]),
            w_proj: leaf(&mut tape, &[1, 2], vec![1.0, 0.0]),
        };
        let v0 = leaf(&mut tape, &[2], vec![0.0, 1.0]);
        let v1 = leaf(&mut tape, &[2], vec![(3f64.ln() / 2.0).atanh(), 5.0]);
        let (_, a) = temporal_self_attention(&mut tape, &[v0, v1], &p).unwrap();
        let a = tape.value(a).data();
        assert!((a[0] - 0.25).abs() < 1e-12 && (a[1] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn empty_inputs_rejected() {
        let mut tape = Tape::new();
        let h = leaf(&mut tape, &[1], vec![0.0]);
        assert!(modal_attention(&mut tape, h, &[], h, &[]).is_err());
        let p = TemporalAttentionParams { w: h, w_proj: h };
        assert!(temporal_self_attention(&mut tape, &[], &p).is_err());
    }
}

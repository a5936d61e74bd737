//! Per-modality dilated causal convolution stack and presence masks.

use odernn_autodiff::{Tape, Tensor, Var};

use crate::error::Result;

/// One dilated causal convolution layer.
///
/// `kernel` has shape `out × in × k`; `residual` is a `out × in` projection
/// used when the channel counts differ (identity otherwise).
#[derive(Clone, Debug, PartialEq)]
pub struct TcnLayer<P> {
    pub kernel: P,
    pub bias: P,
    pub residual: Option<P>,
    pub dilation: usize,
}

/// A conv stack followed by mean-pooling over time and a linear projection to
/// the embedding size.
#[derive(Clone, Debug, PartialEq)]
pub struct TcnParams<P> {
    pub layers: Vec<TcnLayer<P>>,
    pub projection: P,
    pub projection_bias: P,
}

impl<P: Copy> TcnParams<P> {
    pub fn map<Q>(&self, mut f: impl FnMut(P) -> Q) -> TcnParams<Q> {
        TcnParams {
            layers: self
                .layers
                .iter()
                .map(|l| TcnLayer {
                    kernel: f(l.kernel),
                    bias: f(l.bias),
                    residual: l.residual.map(&mut f),
                    dilation: l.dilation,
                })
                .collect(),
            projection: f(self.projection),
            projection_bias: f(self.projection_bias),
        }
    }
}

/// Receptive field of `layers` stacked layers with kernel `k` and dilations 1, 2, 4, ...
pub fn receptive_field(layers: usize, kernel_size: usize) -> usize {
    1 + (kernel_size - 1) * ((1usize << layers) - 1)
}

/// Delays `input` (channels × L) by `shift` steps along time, filling with zeros.
fn shift_right(tape: &mut Tape, input: Var, shift: usize) -> Result<Var> {
    if shift == 0 {
        return Ok(input);
    }
    let (channels, len) = (tape.shape(input)[0], tape.shape(input)[1]);
    if shift >= len {
        return Ok(tape.leaf(Tensor::zeros(&[channels, len])));
    }
    let pad = tape.leaf(Tensor::zeros(&[channels, shift]));
    let kept = tape.slice(input, 1, 0, len - shift)?;
    Ok(tape.concat(&[pad, kept], 1)?)
}

/// `out[:, n] = Σ_i kernel[:, :, i] · input[:, n - d·i]`, with zeros before the
/// start of the sequence so the output keeps the input length.
pub fn dilated_causal_conv(
    tape: &mut Tape,
    input: Var,
    kernel: Var,
    dilation: usize,
) -> Result<Var> {
    let kshape = tape.shape(kernel).to_vec();
    let ishape = tape.shape(input).to_vec();
    if kshape.len() != 3 || ishape.len() != 2 || kshape[1] != ishape[0] {
        return Err(odernn_autodiff::AutodiffError::ShapeMismatch {
            op: "dilated_causal_conv",
            left: kshape,
            right: ishape,
        }
        .into());
    }
    let (out_ch, in_ch, taps) = (kshape[0], kshape[1], kshape[2]);
    let mut acc: Option<Var> = None;
    for tap in 0..taps {
        let w = tape.slice(kernel, 2, tap, tap + 1)?;
        let w = tape.reshape(w, &[out_ch, in_ch])?;
        let shifted = shift_right(tape, input, dilation * tap)?;
        let term = tape.matmul(w, shifted)?;
        acc = Some(match acc {
            Some(a) => tape.add(a, term)?,
            None => term,
        });
    }
    Ok(acc.expect("kernel has at least one tap"))
}

/// Repeats a length-`c` bias across `len` time steps (no broadcasting on the tape).
fn bias_over_time(tape: &mut Tape, bias: Var, len: usize) -> Result<Var> {
    let c = tape.shape(bias)[0];
    let col = tape.reshape(bias, &[c, 1])?;
    let ones = tape.leaf(Tensor::filled(&[1, len], 1.0));
    Ok(tape.matmul(col, ones)?)
}

/// One conv layer: `tanh(conv(x) + b) + residual(x)`.
pub fn tcn_layer(tape: &mut Tape, input: Var, layer: &TcnLayer<Var>) -> Result<Var> {
    let len = tape.shape(input)[1];
    let conv = dilated_causal_conv(tape, input, layer.kernel, layer.dilation)?;
    let bias = bias_over_time(tape, layer.bias, len)?;
    let pre = tape.add(conv, bias)?;
    let act = tape.tanh(pre)?;
    let skip = match layer.residual {
        Some(proj) => tape.matmul(proj, input)?,
        None => input,
    };
    Ok(tape.add(act, skip)?)
}

/// Embeds a `channels × L` segment into a vector of the projection's output size.
pub fn tcn_embed(tape: &mut Tape, segment: Var, params: &TcnParams<Var>) -> Result<Var> {
    let mut h = segment;
    for layer in &params.layers {
        h = tcn_layer(tape, h, layer)?;
    }
    let pooled = tape.mean_axis(h, 1)?;
    let projected = tape.matmul(params.projection, pooled)?;
    Ok(tape.add(projected, params.projection_bias)?)
}

/// `[embedding ‖ 1…1]` when present, `[0…0 ‖ 0…0]` when absent.
pub fn attach_mask(tape: &mut Tape, embedding: Option<Var>, dim: usize) -> Result<Var> {
    match embedding {
        Some(e) => {
            let ones = tape.leaf(Tensor::filled(&[dim], 1.0));
            Ok(tape.concat(&[e, ones], 0)?)
        }
        None => Ok(tape.leaf(Tensor::zeros(&[2 * dim]))),
    }
}

//! Full classifier: per-modality encoders, ODE-RNN with modal attention,
//! temporal attention pooling and the logistic prediction head.

use odernn_autodiff::{Tape, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attention::{
    mgru_update, modal_attention, temporal_self_attention, GateActivation, MGruParams,
    ModalAttentionParams, TemporalAttentionParams,
};
use crate::encoder::{attach_mask, tcn_embed, TcnLayer, TcnParams};
use crate::error::{Error, Result};
use crate::ode::{ode_func, ode_rnn_encode, OdeFuncParams, SolverMethod, StepPolicy};
use crate::signal::Modality;
use crate::sync::ObservationSequence;

/// Probability clamp used by the loss.
pub const PROB_EPS: f64 = 1e-7;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKind {
    /// Continuous latent dynamics between observations.
    #[default]
    OdeRnn,
    /// No dynamics; the interval since the previous observation is appended to the input.
    RnnDeltaT,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub hidden_size: usize,
    pub ode_width: usize,
    pub embed_dim: usize,
    pub tcn_channels: usize,
    pub tcn_layers: usize,
    pub kernel_size: usize,
    pub modal_attention_width: usize,
    pub temporal_attention_width: usize,
    pub gate: GateActivation,
    pub solver: SolverMethod,
    pub max_step: f64,
    pub max_steps_per_interval: usize,
    pub encoder: EncoderKind,
    pub modal_attention: bool,
    pub temporal_attention: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden_size: 32,
            ode_width: 64,
            embed_dim: 16,
            tcn_channels: 16,
            tcn_layers: 3,
            kernel_size: 3,
            modal_attention_width: 16,
            temporal_attention_width: 16,
            gate: GateActivation::Logistic,
            solver: SolverMethod::Rk4,
            max_step: 0.05,
            max_steps_per_interval: 20,
            encoder: EncoderKind::OdeRnn,
            modal_attention: true,
            temporal_attention: true,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("model.hidden_size", self.hidden_size),
            ("model.ode_width", self.ode_width),
            ("model.embed_dim", self.embed_dim),
            ("model.tcn_channels", self.tcn_channels),
            ("model.tcn_layers", self.tcn_layers),
            ("model.modal_attention_width", self.modal_attention_width),
            (
                "model.temporal_attention_width",
                self.temporal_attention_width,
            ),
            ("model.max_steps_per_interval", self.max_steps_per_interval),
        ];
        for (field, v) in positive {
            if v == 0 {
                return Err(Error::config(field, "must be positive"));
            }
        }
        if self.kernel_size < 2 {
            return Err(Error::config("model.kernel_size", "must be at least 2"));
        }
        if !(self.max_step > 0.0) {
            return Err(Error::config("model.max_step", "must be positive"));
        }
        Ok(())
    }

    /// Width of one masked modality embedding `[v ‖ mask]`.
    pub fn modal_width(&self) -> usize {
        2 * self.embed_dim
    }

    /// Width of the concatenated observation vector over all modalities.
    pub fn observation_width(&self) -> usize {
        Modality::ALL.len() * self.modal_width()
    }

    fn gate_input_width(&self) -> usize {
        match self.encoder {
            EncoderKind::OdeRnn => self.observation_width(),
            EncoderKind::RnnDeltaT => self.observation_width() + 1,
        }
    }

    fn candidate_input_width(&self) -> usize {
        self.gate_input_width()
            + if self.modal_attention {
                self.modal_width()
            } else {
                0
            }
    }

    fn head_width(&self) -> usize {
        self.hidden_size
            + if self.temporal_attention {
                self.observation_width()
            } else {
                0
            }
    }

    pub fn step_policy(&self) -> StepPolicy {
        StepPolicy {
            method: self.solver,
            max_step: self.max_step,
            max_steps: self.max_steps_per_interval,
        }
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        let (encoder, modal, temporal) = match variant {
            Variant::Full => (EncoderKind::OdeRnn, true, true),
            Variant::NoModal => (EncoderKind::OdeRnn, false, true),
            Variant::NoTemporal => (EncoderKind::OdeRnn, true, false),
            Variant::OdeRnn => (EncoderKind::OdeRnn, false, false),
            Variant::RnnDeltaT => (EncoderKind::RnnDeltaT, false, false),
        };
        self.encoder = encoder;
        self.modal_attention = modal;
        self.temporal_attention = temporal;
        self
    }
}

/// Architecture variants compared by the ablation harness.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "full")]
    Full,
    #[serde(rename = "no-modal")]
    NoModal,
    #[serde(rename = "no-temporal")]
    NoTemporal,
    #[serde(rename = "ode-rnn")]
    OdeRnn,
    #[serde(rename = "rnn-dt")]
    RnnDeltaT,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Full,
        Variant::NoModal,
        Variant::NoTemporal,
        Variant::OdeRnn,
        Variant::RnnDeltaT,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoModal => "no-modal",
            Variant::NoTemporal => "no-temporal",
            Variant::OdeRnn => "ode-rnn",
            Variant::RnnDeltaT => "rnn-dt",
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown variant {s:?}")))
    }
}

/// Per-channel standardization statistics of the encoder inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Fixed (not learned) input standardization, one entry per modality.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputNorm {
    pub modalities: Vec<ChannelStats>,
}

impl InputNorm {
    pub fn identity() -> Self {
        Self {
            modalities: Modality::ALL
                .iter()
                .map(|m| ChannelStats {
                    mean: vec![0.0; m.channels()],
                    std: vec![1.0; m.channels()],
                })
                .collect(),
        }
    }

    /// Pools every present segment's samples per modality and channel.
    pub fn fit(dataset: &[ObservationSequence]) -> Self {
        let mut norm = Self::identity();
        for m in Modality::ALL {
            let c = m.channels();
            let (mut n, mut sum, mut sum_sq) = (0usize, vec![0.0; c], vec![0.0; c]);
            for obs in dataset.iter().flat_map(|s| &s.observations) {
                if let Some(o) = obs.get(m) {
                    n += o.segment.len();
                    for (ch, values) in o.segment.channels.iter().enumerate().take(c) {
                        sum[ch] += values.iter().sum::<f64>();
                        sum_sq[ch] += values.iter().map(|v| v * v).sum::<f64>();
                    }
                }
            }
            if n == 0 {
                continue;
            }
            let stats = &mut norm.modalities[m.index()];
            for ch in 0..c {
                let mean = sum[ch] / n as f64;
                let var = (sum_sq[ch] / n as f64 - mean * mean).max(0.0);
                stats.mean[ch] = mean;
                stats.std[ch] = if var.sqrt() > 1e-8 { var.sqrt() } else { 1.0 };
            }
        }
        norm
    }
}

/// Index of each parameter tensor, grouped the way the forward pass uses them.
#[derive(Clone, Debug, PartialEq)]
pub struct Layout {
    pub tcn: Vec<TcnParams<usize>>,
    pub ode: Option<OdeFuncParams<usize>>,
    pub modal: Option<Vec<ModalAttentionParams<usize>>>,
    pub gru: MGruParams<usize>,
    pub temporal: Option<TemporalAttentionParams<usize>>,
    pub head_w: usize,
    pub head_b: usize,
    pub h0: usize,
}

#[derive(Clone, Copy, Debug)]
enum Init {
    Glorot {
        fan_in: usize,
        fan_out: usize,
        gain: f64,
    },
    Uniform(f64),
    Zeros,
}

#[derive(Default)]
struct LayoutBuilder {
    names: Vec<String>,
    shapes: Vec<Vec<usize>>,
    inits: Vec<Init>,
}

impl LayoutBuilder {
    fn add(&mut self, name: String, shape: &[usize], init: Init) -> usize {
        self.names.push(name);
        self.shapes.push(shape.to_vec());
        self.inits.push(init);
        self.names.len() - 1
    }

    fn matrix(&mut self, name: String, rows: usize, cols: usize, gain: f64) -> usize {
        let init = Init::Glorot {
            fan_in: cols,
            fan_out: rows,
            gain,
        };
        self.add(name, &[rows, cols], init)
    }

    fn vector(&mut self, name: String, len: usize, init: Init) -> usize {
        self.add(name, &[len], init)
    }
}

fn build_layout(cfg: &ModelConfig) -> (Layout, LayoutBuilder) {
    let mut b = LayoutBuilder::default();
    let h = cfg.hidden_size;
    let c = cfg.tcn_channels;
    let k = cfg.kernel_size;

    let tcn = Modality::ALL
        .iter()
        .map(|m| {
            let mut in_ch = m.channels();
            let layers = (0..cfg.tcn_layers)
                .map(|l| {
                    let prefix = format!("tcn.{m}.{l}");
                    let kernel = b.add(
                        format!("{prefix}.kernel"),
                        &[c, in_ch, k],
                        Init::Glorot {
                            fan_in: in_ch * k,
                            fan_out: c,
                            gain: 1.0,
                        },
                    );
                    let bias = b.vector(format!("{prefix}.bias"), c, Init::Uniform(0.2));
                    let residual =
                        (in_ch != c).then(|| b.matrix(format!("{prefix}.residual"), c, in_ch, 1.0));
                    in_ch = c;
                    TcnLayer {
                        kernel,
                        bias,
                        residual,
                        dilation: 1 << l,
                    }
                })
                .collect();
            TcnParams {
                layers,
                projection: b.matrix(format!("tcn.{m}.projection"), cfg.embed_dim, c, 1.0),
                projection_bias: b.vector(
                    format!("tcn.{m}.projection_bias"),
                    cfg.embed_dim,
                    Init::Zeros,
                ),
            }
        })
        .collect();

    let ode = (cfg.encoder == EncoderKind::OdeRnn).then(|| OdeFuncParams {
        w1: b.matrix("ode.w1".into(), cfg.ode_width, h, 1.0),
        b1: b.vector("ode.b1".into(), cfg.ode_width, Init::Zeros),
        w2: b.matrix("ode.w2".into(), h, cfg.ode_width, 0.1),
        b2: b.vector("ode.b2".into(), h, Init::Zeros),
    });

    let a = cfg.modal_attention_width;
    let modal = cfg.modal_attention.then(|| {
        Modality::ALL
            .iter()
            .map(|m| ModalAttentionParams {
                w: b.vector(
                    format!("modal.{m}.w"),
                    a,
                    Init::Glorot {
                        fan_in: a,
                        fan_out: 1,
                        gain: 1.0,
                    },
                ),
                w_h: b.matrix(format!("modal.{m}.w_h"), a, h, 1.0),
                w_v: b.matrix(format!("modal.{m}.w_v"), a, cfg.observation_width(), 1.0),
                b: b.vector(format!("modal.{m}.b"), a, Init::Zeros),
            })
            .collect()
    });

    let gru = MGruParams {
        w_z: b.matrix("gru.w_z".into(), h, h + cfg.gate_input_width(), 1.0),
        w_r: b.matrix("gru.w_r".into(), h, h + cfg.gate_input_width(), 1.0),
        w_g: b.matrix("gru.w_g".into(), h, h + cfg.candidate_input_width(), 1.0),
    };

    let ta = cfg.temporal_attention_width;
    let temporal = cfg.temporal_attention.then(|| TemporalAttentionParams {
        w: b.vector(
            "temporal.w".into(),
            ta,
            Init::Glorot {
                fan_in: ta,
                fan_out: 1,
                gain: 1.0,
            },
        ),
        w_proj: b.matrix("temporal.w_proj".into(), ta, cfg.observation_width(), 1.0),
    });

    let hw = cfg.head_width();
    let head_w = b.vector(
        "head.w".into(),
        hw,
        Init::Glorot {
            fan_in: hw,
            fan_out: 1,
            gain: 1.0,
        },
    );
    let head_b = b.vector("head.b".into(), 1, Init::Zeros);
    let h0 = b.vector("h0".into(), h, Init::Zeros);

    let layout = Layout {
        tcn,
        ode,
        modal,
        gru,
        temporal,
        head_w,
        head_b,
        h0,
    };
    (layout, b)
}

/// All learnable tensors plus the fixed input standardization.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    config: ModelConfig,
    layout: Layout,
    names: Vec<String>,
    tensors: Vec<Tensor>,
    norm: InputNorm,
}

impl ModelParams {
    /// Seeded random initialization.
    pub fn init(config: &ModelConfig, norm: InputNorm, seed: u64) -> Result<Self> {
        config.validate()?;
        let (layout, builder) = build_layout(config);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tensors = builder
            .shapes
            .iter()
            .zip(&builder.inits)
            .map(|(shape, init)| {
                let n: usize = shape.iter().product();
                let limit = match *init {
                    Init::Glorot {
                        fan_in,
                        fan_out,
                        gain,
                    } => gain * (6.0 / (fan_in + fan_out) as f64).sqrt(),
                    Init::Uniform(a) => a,
                    Init::Zeros => 0.0,
                };
                let data = (0..n)
                    .map(|_| {
                        if limit > 0.0 {
                            rng.random_range(-limit..limit)
                        } else {
                            0.0
                        }
                    })
                    .collect();
                Tensor::new(shape.clone(), data)
            })
            .collect::<odernn_autodiff::Result<Vec<_>>>()?;
        Ok(Self {
            config: config.clone(),
            layout,
            names: builder.names,
            tensors,
            norm,
        })
    }

    /// Rebuilds parameters from named tensors, checking names and shapes
    /// against the layout implied by `config`.
    pub fn from_named(
        config: &ModelConfig,
        norm: InputNorm,
        named: Vec<(String, Tensor)>,
    ) -> Result<Self> {
        config.validate()?;
        let (layout, builder) = build_layout(config);
        if named.len() != builder.names.len() {
            return Err(Error::Format(format!(
                "expected {} parameter tensors, found {}",
                builder.names.len(),
                named.len()
            )));
        }
        let mut tensors = Vec::with_capacity(named.len());
        for ((name, tensor), (want_name, want_shape)) in named
            .into_iter()
            .zip(builder.names.iter().zip(&builder.shapes))
        {
            if &name != want_name || tensor.shape() != want_shape.as_slice() {
                return Err(Error::Format(format!(
                    "parameter {name} {:?} does not match expected {want_name} {want_shape:?}",
                    tensor.shape()
                )));
            }
            tensors.push(tensor);
        }
        Ok(Self {
            config: config.clone(),
            layout,
            names: builder.names,
            tensors,
            norm,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn norm(&self) -> &InputNorm {
        &self.norm
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Parameter group of tensor `i`: `tcn`, `ode`, `modal`, `gru`, `temporal`, `head` or `h0`.
    pub fn group(&self, i: usize) -> &str {
        self.names[i].split('.').next().unwrap_or("")
    }

    /// Records every tensor as a leaf and returns the handles.
    pub fn bind(&self, tape: &mut Tape) -> (BoundModel<'_>, Vec<Var>) {
        let vars: Vec<Var> = self.tensors.iter().map(|t| tape.leaf(t.clone())).collect();
        let l = &self.layout;
        let at = |i: usize| vars[i];
        let bound = BoundModel {
            config: &self.config,
            tcn: l.tcn.iter().map(|p| p.map(at)).collect(),
            ode: l.ode.map(|p| p.map(at)),
            modal: l
                .modal
                .as_ref()
                .map(|ps| ps.iter().map(|p| p.map(at)).collect()),
            gru: l.gru.map(at),
            temporal: l.temporal.map(|p| p.map(at)),
            head_w: at(l.head_w),
            head_b: at(l.head_b),
            h0: at(l.h0),
        };
        (bound, vars)
    }
}

/// Parameters recorded on a tape.
pub struct BoundModel<'a> {
    pub config: &'a ModelConfig,
    pub tcn: Vec<TcnParams<Var>>,
    pub ode: Option<OdeFuncParams<Var>>,
    pub modal: Option<Vec<ModalAttentionParams<Var>>>,
    pub gru: MGruParams<Var>,
    pub temporal: Option<TemporalAttentionParams<Var>>,
    pub head_w: Var,
    pub head_b: Var,
    pub h0: Var,
}

/// A subject converted to model inputs: standardized segments and times
/// rescaled to `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SubjectInput {
    pub label: bool,
    pub times: Vec<f64>,
    pub steps: Vec<[Option<Tensor>; 3]>,
}

impl SubjectInput {
    pub fn new(seq: &ObservationSequence, norm: &InputNorm) -> Result<Self> {
        if seq.observations.is_empty() {
            return Err(Error::InvalidInput(format!(
                "subject {} has no observations",
                seq.unified_id
            )));
        }
        let first = seq.observations[0].time_days;
        let span = seq.observations.last().unwrap().time_days - first;
        let times = seq
            .observations
            .iter()
            .map(|o| {
                if span > 0.0 {
                    (o.time_days - first) / span
                } else {
                    0.0
                }
            })
            .collect();
        let steps = seq
            .observations
            .iter()
            .map(|obs| {
                let mut slots: [Option<Tensor>; 3] = [None, None, None];
                for m in Modality::ALL {
                    if let Some(o) = obs.get(m) {
                        slots[m.index()] = Some(standardize(
                            &o.segment.channels,
                            &norm.modalities[m.index()],
                            m,
                        )?);
                    }
                }
                Ok(slots)
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            label: seq.label,
            times,
            steps,
        })
    }
}

fn standardize(channels: &[Vec<f64>], stats: &ChannelStats, modality: Modality) -> Result<Tensor> {
    if channels.len() != modality.channels() || channels[0].is_empty() {
        return Err(Error::InvalidInput(format!(
            "{modality} segment must have {} non-empty channels",
            modality.channels()
        )));
    }
    let len = channels[0].len();
    let mut data = Vec::with_capacity(channels.len() * len);
    for (ch, values) in channels.iter().enumerate() {
        if values.len() != len {
            return Err(Error::InvalidInput(format!(
                "{modality} channels differ in length"
            )));
        }
        data.extend(values.iter().map(|v| (v - stats.mean[ch]) / stats.std[ch]));
    }
    Ok(Tensor::matrix(channels.len(), len, data)?)
}

/// Tape handles produced by one forward pass.
pub struct Trace {
    pub logit: Var,
    pub prob: Var,
    /// Modality weights per observation step (present only with modal attention).
    pub modal_weights: Vec<Var>,
    /// Weights over steps (present only with temporal attention).
    pub temporal_weights: Option<Var>,
    pub states: Vec<Var>,
}

/// Masked per-modality embeddings and their concatenation for one step.
fn embed_step(
    tape: &mut Tape,
    model: &BoundModel<'_>,
    step: &[Option<Tensor>; 3],
) -> Result<(Vec<Var>, Var)> {
    let mut modal = Vec::with_capacity(3);
    for m in Modality::ALL {
        let emb = match &step[m.index()] {
            Some(seg) => {
                let x = tape.leaf(seg.clone());
                Some(tcn_embed(tape, x, &model.tcn[m.index()])?)
            }
            None => None,
        };
        modal.push(attach_mask(tape, emb, model.config.embed_dim)?);
    }
    let concat = tape.concat(&modal, 0)?;
    Ok((modal, concat))
}

pub fn forward(tape: &mut Tape, model: &BoundModel<'_>, subject: &SubjectInput) -> Result<Trace> {
    let cfg = model.config;
    if subject.steps.is_empty() || subject.steps.len() != subject.times.len() {
        return Err(Error::InvalidInput(
            "subject input has no steps or mismatched times".into(),
        ));
    }
    let mut modal_inputs = Vec::with_capacity(subject.steps.len());
    let mut observations = Vec::with_capacity(subject.steps.len());
    for step in &subject.steps {
        let (m, v) = embed_step(tape, model, step)?;
        modal_inputs.push(m);
        observations.push(v);
    }

    let mut modal_weights = Vec::new();
    let mut cell = |tape: &mut Tape, h_prev: Var, x: Var, i: usize| -> Result<Var> {
        let attended = match &model.modal {
            Some(params) => {
                let (u, a) =
                    modal_attention(tape, h_prev, &modal_inputs[i], observations[i], params)?;
                modal_weights.push(a);
                Some(u)
            }
            None => None,
        };
        mgru_update(tape, h_prev, x, attended, &model.gru, cfg.gate)
    };

    let states = match cfg.encoder {
        EncoderKind::OdeRnn => {
            let ode = model
                .ode
                .as_ref()
                .ok_or_else(|| Error::InvalidInput("missing ODE parameters".into()))?;
            ode_rnn_encode(
                tape,
                model.h0,
                &subject.times,
                &cfg.step_policy(),
                |t, h| ode_func(t, h, ode),
                |t, h, i| cell(t, h, observations[i], i),
            )?
        }
        EncoderKind::RnnDeltaT => {
            let mut h = model.h0;
            let mut states = Vec::with_capacity(subject.times.len());
            let mut prev = subject.times[0];
            for (i, &t) in subject.times.iter().enumerate() {
                let dt = tape.leaf(Tensor::vector(vec![t - prev])?);
                let x = tape.concat(&[observations[i], dt], 0)?;
                h = cell(tape, h, x, i)?;
                states.push(h);
                prev = t;
            }
            states
        }
    };
    let last = *states.last().expect("at least one step");

    let (representation, temporal_weights) = match &model.temporal {
        Some(p) => {
            let (pooled, a) = temporal_self_attention(tape, &observations, p)?;
            (tape.concat(&[pooled, last], 0)?, Some(a))
        }
        None => (last, None),
    };
    let logit = tape.matmul(model.head_w, representation)?;
    let logit = tape.add(logit, model.head_b)?;
    let prob = tape.sigmoid(logit)?;
    Ok(Trace {
        logit,
        prob,
        modal_weights,
        temporal_weights,
        states,
    })
}

/// `-[y·ln ŷ + (1-y)·ln(1-ŷ)]` with `ŷ` clamped to `[ε, 1-ε]`.
pub fn bce_loss(y_hat: f64, y: bool) -> f64 {
    let p = y_hat.clamp(PROB_EPS, 1.0 - PROB_EPS);
    if y {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// Tape version of [`bce_loss`].
pub fn bce_loss_var(tape: &mut Tape, prob: Var, y: bool) -> Result<Var> {
    let p = tape.clamp(prob, PROB_EPS, 1.0 - PROB_EPS)?;
    let target = if y {
        p
    } else {
        let one = tape.leaf(Tensor::scalar(1.0)?);
        tape.sub(one, p)?
    };
    let log = tape.ln(target)?;
    Ok(tape.scale(log, -1.0)?)
}

/// Loss of one subject and its gradient for every parameter tensor.
pub fn loss_and_grads(params: &ModelParams, subject: &SubjectInput) -> Result<(f64, Vec<Tensor>)> {
    let mut tape = Tape::with_capacity(4096);
    let (bound, vars) = params.bind(&mut tape);
    let trace = forward(&mut tape, &bound, subject)?;
    let loss = bce_loss_var(&mut tape, trace.prob, subject.label)?;
    let value = tape.value(loss).data()[0];
    if !value.is_finite() {
        return Err(Error::NonFinite("training loss".into()));
    }
    let grads = tape.backward(loss)?;
    Ok((value, vars.iter().map(|&v| grads.get(v)).collect()))
}

pub fn loss_value(params: &ModelParams, subject: &SubjectInput) -> Result<f64> {
    let mut tape = Tape::with_capacity(4096);
    let (bound, _) = params.bind(&mut tape);
    let trace = forward(&mut tape, &bound, subject)?;
    let loss = bce_loss_var(&mut tape, trace.prob, subject.label)?;
    Ok(tape.value(loss).data()[0])
}

/// Probability and attention weights for one subject.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub prob: f64,
    pub modal_weights: Vec<Vec<f64>>,
    pub temporal_weights: Option<Vec<f64>>,
}

pub fn predict_input(params: &ModelParams, subject: &SubjectInput) -> Result<Prediction> {
    let mut tape = Tape::with_capacity(4096);
    let (bound, _) = params.bind(&mut tape);
    let trace = forward(&mut tape, &bound, subject)?;
    let prob = tape.value(trace.prob).data()[0];
    if !prob.is_finite() {
        return Err(Error::NonFinite("prediction".into()));
    }
    Ok(Prediction {
        prob,
        modal_weights: trace
            .modal_weights
            .iter()
            .map(|&a| tape.value(a).data().to_vec())
            .collect(),
        temporal_weights: trace
            .temporal_weights
            .map(|a| tape.value(a).data().to_vec()),
    })
}

pub fn predict(params: &ModelParams, subject: &ObservationSequence) -> Result<Prediction> {
    predict_input(params, &SubjectInput::new(subject, params.norm())?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bce_reference_values() {
        assert!((bce_loss(0.5, true) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((bce_loss(0.5, false) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(bce_loss(1.0 - PROB_EPS, true) < 1e-6);
        assert!((bce_loss(0.9, false) - 2.302585092994046).abs() < 1e-12);
        assert!(bce_loss(0.0, true).is_finite());
    }

    #[test]
    fn tape_bce_matches_scalar() {
        for (p, y) in [(0.3, true), (0.3, false), (0.999, true), (1e-9, false)] {
            let mut tape = Tape::new();
            let v = tape.leaf(Tensor::scalar(p).unwrap());
            let l = bce_loss_var(&mut tape, v, y).unwrap();
            assert!((tape.value(l).data()[0] - bce_loss(p, y)).abs() < 1e-12);
        }
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
        assert!("bogus".parse::<Variant>().is_err());
    }

    #[test]
    fn layout_names_are_unique_and_grouped() {
        let p = ModelParams::init(&ModelConfig::default(), InputNorm::identity(), 1).unwrap();
        let mut names = p.names().to_vec();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), p.names().len());
        let groups: std::collections::BTreeSet<&str> =
            (0..p.names().len()).map(|i| p.group(i)).collect();
        let expected: std::collections::BTreeSet<&str> =
            ["tcn", "ode", "modal", "gru", "temporal", "head", "h0"]
                .into_iter()
                .collect();
        assert_eq!(groups, expected);
    }

    #[test]
    fn ablated_layouts_drop_parameter_groups() {
        let cfg = ModelConfig::default().with_variant(Variant::RnnDeltaT);
        let p = ModelParams::init(&cfg, InputNorm::identity(), 1).unwrap();
        assert!(
            p.layout().ode.is_none() && p.layout().modal.is_none() && p.layout().temporal.is_none()
        );
    }
}

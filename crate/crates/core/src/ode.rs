//! Latent dynamics network, fixed-step solvers and the ODE-RNN encode loop.
//!
//! Gradients flow through the unrolled solver steps, so they are exact for the
//! discrete computation rather than for the continuous ODE.

use odernn_autodiff::{Tape, Var};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Two-layer MLP `h ↦ W2·tanh(W1·h + b1) + b2`; time does not enter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeFuncParams<P> {
    pub w1: P,
    pub b1: P,
    pub w2: P,
    pub b2: P,
}

impl<P: Copy> OdeFuncParams<P> {
    pub fn map<Q>(&self, mut f: impl FnMut(P) -> Q) -> OdeFuncParams<Q> {
        OdeFuncParams {
            w1: f(self.w1),
            b1: f(self.b1),
            w2: f(self.w2),
            b2: f(self.b2),
        }
    }
}

pub fn ode_func(tape: &mut Tape, h: Var, params: &OdeFuncParams<Var>) -> Result<Var> {
    let a = tape.matmul(params.w1, h)?;
    let a = tape.add(a, params.b1)?;
    let a = tape.tanh(a)?;
    let out = tape.matmul(params.w2, a)?;
    Ok(tape.add(out, params.b2)?)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMethod {
    Euler,
    #[default]
    Rk4,
}

/// Integrates `dh/dt = f(h)` from `t0` to `t1` in `n_steps` equal steps.
/// A zero-length interval returns `h0` itself.
pub fn ode_solve<F>(
    tape: &mut Tape,
    h0: Var,
    t0: f64,
    t1: f64,
    method: SolverMethod,
    n_steps: usize,
    mut f: F,
) -> Result<Var>
where
    F: FnMut(&mut Tape, Var) -> Result<Var>,
{
    if !(t1 >= t0) {
        return Err(Error::InvalidInput(format!(
            "ode_solve needs t1 >= t0, got {t0} -> {t1}"
        )));
    }
    if n_steps == 0 {
        return Err(Error::InvalidInput(
            "ode_solve needs at least one step".into(),
        ));
    }
    if t1 == t0 {
        return Ok(h0);
    }
    let dt = (t1 - t0) / n_steps as f64;
    let mut h = h0;
    for step in 0..n_steps {
        let blown = |e: Error| match e {
            Error::Autodiff(odernn_autodiff::AutodiffError::NonFinite { op }) => {
                Error::NonFinite(format!("ODE state at solver step {step} ({op})"))
            }
            other => other,
        };
        h = rk_step(tape, h, dt, method, &mut f).map_err(blown)?;
        if !tape.value(h).is_finite() {
            return Err(Error::NonFinite(format!("ODE state at solver step {step}")));
        }
    }
    Ok(h)
}

fn rk_step<F>(tape: &mut Tape, h: Var, dt: f64, method: SolverMethod, f: &mut F) -> Result<Var>
where
    F: FnMut(&mut Tape, Var) -> Result<Var>,
{
    Ok(match method {
        SolverMethod::Euler => {
            let k1 = f(tape, h)?;
            let inc = tape.scale(k1, dt)?;
            tape.add(h, inc)?
        }
        SolverMethod::Rk4 => {
            let k1 = f(tape, h)?;
            let s = tape.scale(k1, dt / 2.0)?;
            let p = tape.add(h, s)?;
            let k2 = f(tape, p)?;
            let s = tape.scale(k2, dt / 2.0)?;
            let p = tape.add(h, s)?;
            let k3 = f(tape, p)?;
            let s = tape.scale(k3, dt)?;
            let p = tape.add(h, s)?;
            let k4 = f(tape, p)?;
            let k23 = tape.add(k2, k3)?;
            let k23 = tape.scale(k23, 2.0)?;
            let sum = tape.add(k1, k23)?;
            let sum = tape.add(sum, k4)?;
            let inc = tape.scale(sum, dt / 6.0)?;
            tape.add(h, inc)?
        }
    })
}

/// Chooses the number of fixed steps for an interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepPolicy {
    pub method: SolverMethod,
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for StepPolicy {
    fn default() -> Self {
        Self {
            method: SolverMethod::Rk4,
            max_step: 0.05,
            max_steps: 20,
        }
    }
}

impl StepPolicy {
    /// `ceil(interval / max_step)` clamped to `1..=max_steps`.
    pub fn steps_for(&self, interval: f64) -> usize {
        let n = (interval / self.max_step).ceil();
        if n.is_finite() && n >= 1.0 {
            (n as usize).clamp(1, self.max_steps.max(1))
        } else {
            1
        }
    }
}

/// Runs the ODE-RNN loop: evolve the state between observation times with the
/// solver, then apply `update(tape, h_before_update, step_index)` at each
/// observation. Returns every post-update state.
pub fn ode_rnn_encode<F, U>(
    tape: &mut Tape,
    h0: Var,
    times: &[f64],
    policy: &StepPolicy,
    mut dynamics: F,
    mut update: U,
) -> Result<Vec<Var>>
where
    F: FnMut(&mut Tape, Var) -> Result<Var>,
    U: FnMut(&mut Tape, Var, usize) -> Result<Var>,
{
    if times.is_empty() {
        return Err(Error::InvalidInput(
            "encode needs at least one observation".into(),
        ));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput(
            "observation times must strictly increase".into(),
        ));
    }
    let mut h = h0;
    let mut prev = times[0];
    let mut states = Vec::with_capacity(times.len());
    for (i, &t) in times.iter().enumerate() {
        let steps = policy.steps_for(t - prev);
        let evolved = ode_solve(tape, h, prev, t, policy.method, steps, &mut dynamics)?;
        h = update(tape, evolved, i)?;
        states.push(h);
        prev = t;
    }
    Ok(states)
}

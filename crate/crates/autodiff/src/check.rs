//! Finite-difference gradient verification.

use crate::error::{AutodiffError, Result};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

fn evaluate<F>(f: &F, x: &Tensor) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    let mut tape = Tape::new();
    let input = tape.leaf(x.clone());
    let out = f(&mut tape, input)?;
    tape.value(out)
        .item()
        .ok_or_else(|| AutodiffError::NonScalarRoot(tape.shape(out).to_vec()))
}

/// Compares the tape gradient of a scalar function against central
/// differences and returns `max_i |analytic_i - numeric_i| / max(1, |analytic_i|)`.
pub fn grad_check<F>(f: F, x: &Tensor, eps: f64) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    if !(eps > 0.0 && eps <= 1e-2) {
        return Err(AutodiffError::InvalidArgument(format!(
            "eps must lie in (0, 1e-2], got {eps}"
        )));
    }

    let first = evaluate(&f, x)?;
    let second = evaluate(&f, x)?;
    if first.to_bits() != second.to_bits() {
        return Err(AutodiffError::NonDeterministic { first, second });
    }

    let mut tape = Tape::new();
    let input = tape.leaf(x.clone());
    let out = f(&mut tape, input)?;
    let analytic = tape.backward(out)?.get(input);

    let mut worst = 0.0_f64;
    let mut probe = x.clone();
    for i in 0..x.len() {
        let original = probe.data()[i];
        probe.data_mut()[i] = original + eps;
        let plus = evaluate(&f, &probe)?;
        probe.data_mut()[i] = original - eps;
        let minus = evaluate(&f, &probe)?;
        probe.data_mut()[i] = original;

        let numeric = (plus - minus) / (2.0 * eps);
        let a = analytic.data()[i];
        worst = worst.max((a - numeric).abs() / a.abs().max(1.0));
    }
    Ok(worst)
}

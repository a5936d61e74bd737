//! Builds a small computation on the tape, runs reverse mode and compares the
//! result with central finite differences.

use odernn_autodiff::{grad_check, Tape, Tensor};

fn main() -> odernn_autodiff::Result<()> {
    let w = Tensor::matrix(2, 3, vec![0.3, -0.2, 0.5, 0.1, 0.4, -0.6])?;
    let x = Tensor::vector(vec![1.0, -1.0, 0.5])?;

    let mut tape = Tape::new();
    let wv = tape.leaf(w.clone());
    let xv = tape.leaf(x.clone());
    let y = tape.matmul(wv, xv)?;
    let y = tape.tanh(y)?;
    let loss = tape.sum(y)?;
    let grads = tape.backward(loss)?;
    println!("loss {:.6}", tape.value(loss).data()[0]);
    println!("dloss/dx {:?}", grads.get(xv).data());

    // f(W) = Σ tanh(W x)
    let err = grad_check(
        |t, wv| {
            let xv = t.leaf(x.clone());
            let y = t.matmul(wv, xv)?;
            let y = t.tanh(y)?;
            t.sum(y)
        },
        &w,
        1e-6,
    )?;
    println!("max relative gradient error for W: {err:.2e}");
    Ok(())
}

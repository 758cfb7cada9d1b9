//! Builds a computation on the gradient tape by hand, runs one backward
//! pass, and checks a weight gradient against a central finite difference.
//!
//! Run with: cargo run --example autodiff_basics

use painscope::tensor::{Tape, Tensor};

fn main() -> painscope::Result<()> {
    // A 1x4x4 input patch and a single 3x3 filter.
    let image = Tensor::new(
        vec![1, 4, 4],
        vec![
            0.1, 0.3, 0.2, 0.0, //
            0.5, 0.9, 0.4, 0.1, //
            0.2, 0.8, 0.7, 0.3, //
            0.0, 0.1, 0.6, 0.2,
        ],
    )?;
    let kernel = Tensor::new(
        vec![1, 1, 3, 3],
        vec![0.2, -0.1, 0.05, 0.3, 0.5, -0.2, 0.0, 0.1, -0.4],
    )?;
    let bias = Tensor::new(vec![1], vec![0.05])?;

    // loss = sum(relu(maxpool(conv(x, w) + b)))
    let loss_given = |w: &Tensor| -> painscope::Result<f64> {
        let mut tape = Tape::new();
        let x = tape.leaf(&image);
        let w = tape.leaf(w);
        let b = tape.leaf(&bias);
        let conv = tape.conv2d(x, w, b, 1, 1)?;
        let pooled = tape.maxpool2d(conv, 2, 2)?;
        let active = tape.relu(pooled);
        let loss = tape.sum(active);
        Ok(tape.values(loss)[0])
    };

    // Forward and backward on the tape.
    let mut tape = Tape::new();
    let x = tape.leaf(&image);
    let w = tape.leaf(&kernel);
    let b = tape.leaf(&bias);
    let conv = tape.conv2d(x, w, b, 1, 1)?;
    let pooled = tape.maxpool2d(conv, 2, 2)?;
    let active = tape.relu(pooled);
    let loss = tape.sum(active);
    tape.backward(loss)?;

    println!("loss = {:.6}", tape.values(loss)[0]);
    println!("weight gradients via the tape vs central differences (h = 1e-5):");
    let grads = tape.grad(w).to_vec();
    let h = 1e-5;
    let mut worst = 0.0f64;
    for index in 0..kernel.values().len() {
        let mut plus = kernel.clone();
        plus.values_mut()[index] += h;
        let mut minus = kernel.clone();
        minus.values_mut()[index] -= h;
        let numeric = (loss_given(&plus)? - loss_given(&minus)?) / (2.0 * h);
        let analytic = grads[index];
        let gap = (analytic - numeric).abs();
        worst = worst.max(gap);
        println!("  w[{index}]: tape {analytic:+.8}  numeric {numeric:+.8}  gap {gap:.2e}");
    }
    println!("largest gap: {worst:.2e}");
    Ok(())
}

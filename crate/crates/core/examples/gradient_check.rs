//! Finite-difference check of the autodiff tape on a few composite functions.
//!
//! cargo run --release --example gradient_check

use csta::tensor::{grad_check, Tensor};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let point = Tensor::from_fn(&[3, 4], |i| (i as f64 * 0.37).sin());
    let w = Tensor::from_fn(&[4, 2], |i| (i as f64 * 0.91).cos());
    let kernel = Tensor::from_fn(&[2, 1, 2, 2], |i| 0.3 - 0.2 * i as f64);
    let eps = 1e-6;

    let sigmoid_sum = grad_check(
        |tape, x| {
            let s = tape.sigmoid(x)?;
            tape.sum(s)
        },
        &point,
        eps,
    )?;
    println!("sum(sigmoid(x))        max rel err {sigmoid_sum:.2e}");

    let mlp = grad_check(
        |tape, x| {
            let w = tape.constant(w.clone());
            let h = tape.matmul(x, w)?;
            let h = tape.relu(h)?;
            let h = tape.mul(h, h)?;
            tape.sum(h)
        },
        &point,
        eps,
    )?;
    println!("sum(relu(x·W)²)        max rel err {mlp:.2e}");

    let conv = grad_check(
        |tape, x| {
            let img = tape.reshape(x, &[1, 3, 4])?;
            let k = tape.constant(kernel.clone());
            let y = tape.conv2d(img, k, (1, 1), (1, 1))?;
            let y = tape.sigmoid(y)?;
            tape.sum(y)
        },
        &point,
        1e-5,
    )?;
    println!("sum(sigmoid(conv(x)))  max rel err {conv:.2e}");
    Ok(())
}

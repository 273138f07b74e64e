//! Central finite-difference gradient checking.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Stack, Tensor4};
use crate::error::Result;

pub const FD_STEP: f64 = 1e-5;

/// |a − b| / max(|a|, |b|, floor); the floor keeps near-zero entries from
/// dominating.
pub fn relative_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs()).max(1e-6);
    (a - b).abs() / scale
}

/// Central difference of `f` at coordinate `i` of `x`.
pub fn central_difference(x: &mut [f64], i: usize, h: f64, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    let keep = x[i];
    x[i] = keep + h;
    let up = f(x);
    x[i] = keep - h;
    let down = f(x);
    x[i] = keep;
    (up - down) / (2.0 * h)
}

/// Picks up to `count` distinct indices below `len`.
pub fn probe_indices<R: Rng + ?Sized>(rng: &mut R, len: usize, count: usize) -> Vec<usize> {
    if len <= count {
        (0..len).collect()
    } else {
        sample(rng, len, count).into_vec()
    }
}

/// Worst relative error over sampled input and parameter coordinates for the
/// scalar loss Σ w⊙stack(x) with random fixed weights w (training mode).
pub fn check_stack(stack: &Stack, x: &Tensor4, probes: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = stack.clone();
    let (y, cache) = net.forward_train(x.clone())?;
    let weights: Vec<f64> = (0..y.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut grad_y = y;
    grad_y.data_mut().copy_from_slice(&weights);
    net.zero_grad();
    let grad_x = net.backward(cache, grad_y)?;

    let loss = |s: &mut Stack, input: &Tensor4| -> f64 {
        let (out, _) = s.forward_train(input.clone()).expect("forward");
        out.data().iter().zip(&weights).map(|(a, b)| a * b).sum()
    };

    let mut worst: f64 = 0.0;
    let mut probe = stack.clone();
    let mut input = x.clone();
    for i in probe_indices(&mut rng, x.len(), probes) {
        let keep = input.data()[i];
        input.data_mut()[i] = keep + FD_STEP;
        let up = loss(&mut probe, &input);
        input.data_mut()[i] = keep - FD_STEP;
        let down = loss(&mut probe, &input);
        input.data_mut()[i] = keep;
        worst = worst.max(relative_error(grad_x.data()[i], (up - down) / (2.0 * FD_STEP)));
    }

    let analytic: Vec<Vec<f64>> = net.params().iter().map(|p| p.grad.clone()).collect();
    for (pi, grads) in analytic.iter().enumerate() {
        for i in probe_indices(&mut rng, grads.len(), probes) {
            let keep = probe.params()[pi].value[i];
            probe.params_mut()[pi].value[i] = keep + FD_STEP;
            let up = loss(&mut probe, x);
            probe.params_mut()[pi].value[i] = keep - FD_STEP;
            let down = loss(&mut probe, x);
            probe.params_mut()[pi].value[i] = keep;
            worst = worst.max(relative_error(grads[i], (up - down) / (2.0 * FD_STEP)));
        }
    }
    Ok(worst)
}

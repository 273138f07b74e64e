//! Small f64 tensor and layer kit with hand-written reverse-mode gradients.

mod adam;
mod conv;
pub mod gradcheck;
mod layers;
mod model_file;
mod param;
mod stack;
mod tensor;

pub use adam::{Adam, AdamConfig};
pub use conv::{Conv2d, Padding};
pub use layers::{global_avg_pool, sigmoid, softplus, BatchNorm2d, BnCache, PRelu, BN_EPS, BN_MOMENTUM, PRELU_INIT};
pub use model_file::{load_model, read_model, save_model, take_section, write_model, ModelSection, MODEL_MAGIC, MODEL_VERSION};
pub use param::Param;
pub use stack::{Layer, Stack, StackCache};
pub use tensor::Tensor4;

/// Mean squared error and its gradient with respect to `pred`.
pub fn mse_loss(pred: &Tensor4, target: &Tensor4) -> crate::Result<(f64, Tensor4)> {
    if pred.dims() != target.dims() {
        return Err(crate::Error::DimensionMismatch(format!(
            "mse of {:?} vs {:?}",
            pred.dims(),
            target.dims()
        )));
    }
    let n = pred.len() as f64;
    let mut grad = pred.clone();
    let mut loss = 0.0;
    for (g, t) in grad.data_mut().iter_mut().zip(target.data()) {
        let d = *g - t;
        loss += d * d;
        *g = 2.0 * d / n;
    }
    Ok((loss / n, grad))
}

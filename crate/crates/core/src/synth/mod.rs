//! Dual-discriminator view synthesis: disparity feature volume, disparity
//! and color nets, bilinear warping, and adversarial training.

mod features;
mod infer;
mod loss;
mod model;
pub mod toy;
mod train;
mod warp;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use features::{build_features, disparity_levels, FeatureVolume};
pub use infer::{synthesize_full_view, synthesize_view, ViewSynthesizer};
pub use loss::{d2gan_losses, d2gan_objective, D2GanLosses, Scores};
pub use model::{
    discriminator_stack, D2GanModel, DiscriminatorPair, GeneratorInput, GeneratorOutput, GeneratorPair, COLOR_INPUTS,
    DISPARITY_MARGIN, GENERATOR_MARGIN, INPUT_PATCH, OUTPUT_PATCH,
};
pub use train::{
    normalized_position, synthesis_dataset, train_d2gan, validation_psnr, write_training_log, LogRow, SynthSample,
    TrainOptions, TrainOutcome,
};
pub use warp::{warp_view, DisparityMap};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct D2GanConfig {
    pub alpha: f64,
    pub beta: f64,
    /// Weight of the adversarial term relative to the MSE content loss.
    pub gamma: f64,
    pub levels: usize,
    pub d_max: f64,
    pub batch_size: usize,
    pub lr: f64,
}

impl Default for D2GanConfig {
    fn default() -> Self {
        Self {
            alpha: 0.2,
            beta: 0.2,
            gamma: 0.01,
            levels: 9,
            d_max: 4.0,
            batch_size: 10,
            lr: 2e-4,
        }
    }
}

impl D2GanConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| v > 0.0 && v <= 1.0;
        if !unit(self.alpha) || !unit(self.beta) {
            return Err(Error::InvalidArgument(format!(
                "alpha {} and beta {} must lie in (0, 1]",
                self.alpha, self.beta
            )));
        }
        if self.levels < 2 || !(self.d_max > 0.0 && self.d_max.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "need >= 2 disparity levels and positive d_max, got {} / {}",
                self.levels, self.d_max
            )));
        }
        if self.batch_size == 0 || !(self.lr > 0.0) || !(self.gamma >= 0.0) {
            return Err(Error::InvalidArgument("batch size, lr and gamma out of range".into()));
        }
        Ok(())
    }
}

impl GeneratorPair {
    /// Loads only the generator sections of a model file.
    pub fn load(path: &std::path::Path, config: &D2GanConfig) -> Result<Self> {
        let mut sections = crate::nn::load_model(path)?;
        Self::from_sections(&mut sections, config)
    }
}

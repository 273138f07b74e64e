//! Quality and coding-efficiency measures. All quality figures are luma-only.

mod bd;
mod fluctuation;
mod quality;

pub use bd::{bd_quality, bd_rate, Cubic, QualityMetric, RdCurve, RdPoint, MIN_RD_POINTS};
pub use fluctuation::{fluctuation, FluctuationStats};
pub use quality::{mse, psnr, psnr_from_mse, psnr_plane, ssim, ssim_plane};

use super::quality::psnr;
use crate::error::{Error, Result};
use crate::lf::LightField;
use crate::structure::PseudoVideoSequence;

/// Per-view PSNR in POC order with summary statistics over the finite entries.
#[derive(Clone, Debug, PartialEq)]
pub struct FluctuationStats {
    pub psnr: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub min: f64,
    /// Every view reconstructed exactly; `mean` and `min` are +∞ and `std` is 0.
    pub all_lossless: bool,
}

impl FluctuationStats {
    pub fn from_psnr(psnr: Vec<f64>) -> Result<Self> {
        if psnr.is_empty() || psnr.iter().any(|p| p.is_nan() || *p == f64::NEG_INFINITY) {
            return Err(Error::InvalidArgument("PSNR list must be non-empty and valid".into()));
        }
        let finite: Vec<f64> = psnr.iter().copied().filter(|p| p.is_finite()).collect();
        if finite.is_empty() {
            return Ok(Self {
                psnr,
                mean: f64::INFINITY,
                std: 0.0,
                min: f64::INFINITY,
                all_lossless: true,
            });
        }
        let n = finite.len() as f64;
        let mean = finite.iter().sum::<f64>() / n;
        let std = (finite.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / n).sqrt();
        let min = finite.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(Self {
            psnr,
            mean,
            std,
            min,
            all_lossless: false,
        })
    }
}

pub fn fluctuation(decoded: &LightField, original: &LightField, seq: &PseudoVideoSequence) -> Result<FluctuationStats> {
    if (decoded.rows(), decoded.cols()) != (original.rows(), original.cols())
        || seq.grid() != (original.rows(), original.cols())
    {
        return Err(Error::DimensionMismatch("light field grids differ".into()));
    }
    let values = seq
        .entries()
        .iter()
        .map(|e| psnr(decoded.view(e.pos), original.view(e.pos)))
        .collect::<Result<Vec<_>>>()?;
    FluctuationStats::from_psnr(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alternating_values() {
        let s = FluctuationStats::from_psnr((0..64).map(|i| if i % 2 == 0 { 30.0 } else { 40.0 }).collect()).unwrap();
        assert!((s.std - 5.0).abs() < 1e-12);
        assert!((s.mean - 35.0).abs() < 1e-12);
        assert_eq!(s.min, 30.0);
        assert!(!s.all_lossless);
    }

    #[test]
    fn lossless() {
        let s = FluctuationStats::from_psnr(vec![f64::INFINITY; 4]).unwrap();
        assert!(s.all_lossless && s.std == 0.0);
        assert!(FluctuationStats::from_psnr(vec![]).is_err());
    }
}

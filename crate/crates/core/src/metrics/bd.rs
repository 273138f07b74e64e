use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RdPoint {
    #[serde(rename = "rate_bpp")]
    pub rate: f64,
    #[serde(rename = "psnr_db")]
    pub psnr: f64,
    pub ssim: f64,
}

/// Rate-distortion curve sorted by strictly increasing rate.
#[derive(Clone, Debug, PartialEq)]
pub struct RdCurve {
    points: Vec<RdPoint>,
}

pub const MIN_RD_POINTS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QualityMetric {
    Psnr,
    Ssim,
}

impl QualityMetric {
    fn of(self, p: &RdPoint) -> f64 {
        match self {
            QualityMetric::Psnr => p.psnr,
            QualityMetric::Ssim => p.ssim,
        }
    }
}

impl RdCurve {
    pub fn new(mut points: Vec<RdPoint>) -> Result<Self> {
        if points.len() < MIN_RD_POINTS {
            return Err(Error::InsufficientPoints(points.len()));
        }
        if points.iter().any(|p| !(p.rate > 0.0 && p.rate.is_finite()) || !p.psnr.is_finite()) {
            return Err(Error::InvalidArgument("RD points need positive finite rate and finite PSNR".into()));
        }
        points.sort_by(|a, b| a.rate.total_cmp(&b.rate));
        if points.windows(2).any(|w| w[0].rate == w[1].rate) {
            return Err(Error::InvalidArgument("RD rates must be distinct".into()));
        }
        if points.windows(2).any(|w| w[1].psnr < w[0].psnr) {
            log::warn!("RD curve quality decreases with rate");
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[RdPoint] {
        &self.points
    }

    /// True when both rate and PSNR increase strictly along the curve.
    pub fn is_monotone(&self) -> bool {
        self.points.windows(2).all(|w| w[1].rate > w[0].rate && w[1].psnr > w[0].psnr)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for p in &self.points {
            w.serialize(p)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let points = r.deserialize().collect::<std::result::Result<Vec<RdPoint>, _>>()?;
        Self::new(points)
    }

    fn series(&self, metric: QualityMetric) -> (Vec<f64>, Vec<f64>) {
        (
            self.points.iter().map(|p| p.rate.log10()).collect(),
            self.points.iter().map(|p| metric.of(p)).collect(),
        )
    }
}

/// Least-squares cubic in a centered, scaled variable.
#[derive(Clone, Debug, PartialEq)]
pub struct Cubic {
    center: f64,
    scale: f64,
    /// Coefficients of t⁰..t³ with t = (x − center) / scale.
    coef: [f64; 4],
}

impl Cubic {
    pub fn fit(x: &[f64], y: &[f64]) -> Result<Self> {
        if x.len() != y.len() || x.len() < MIN_RD_POINTS {
            return Err(Error::InsufficientPoints(x.len().min(y.len())));
        }
        let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let center = (lo + hi) / 2.0;
        let scale = if hi > lo { (hi - lo) / 2.0 } else { 1.0 };
        let a = DMatrix::from_fn(x.len(), 4, |i, j| ((x[i] - center) / scale).powi(j as i32));
        let b = DVector::from_column_slice(y);
        let sol = a
            .svd(true, true)
            .solve(&b, 1e-12)
            .map_err(|e| Error::InvalidArgument(format!("cubic fit failed: {e}")))?;
        Ok(Self {
            center,
            scale,
            coef: [sol[0], sol[1], sol[2], sol[3]],
        })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let t = (x - self.center) / self.scale;
        self.coef.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }

    /// Exact integral over [a, b].
    pub fn integrate(&self, a: f64, b: f64) -> f64 {
        let anti = |x: f64| {
            let t = (x - self.center) / self.scale;
            self.coef
                .iter()
                .enumerate()
                .map(|(k, c)| c * t.powi(k as i32 + 1) / (k as f64 + 1.0))
                .sum::<f64>()
        };
        self.scale * (anti(b) - anti(a))
    }
}

fn span(v: &[f64]) -> (f64, f64) {
    (
        v.iter().copied().fold(f64::INFINITY, f64::min),
        v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    )
}

fn overlap(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    let (a0, a1) = span(a);
    let (b0, b1) = span(b);
    let (lo, hi) = (a0.max(b0), a1.min(b1));
    if hi <= lo {
        return Err(Error::DisjointRanges);
    }
    Ok((lo, hi))
}

/// Average rate difference at equal quality, in percent (negative = test saves rate).
pub fn bd_rate(anchor: &RdCurve, test: &RdCurve, metric: QualityMetric) -> Result<f64> {
    let (ra, qa) = anchor.series(metric);
    let (rt, qt) = test.series(metric);
    let (lo, hi) = overlap(&qa, &qt)?;
    let fa = Cubic::fit(&qa, &ra)?;
    let ft = Cubic::fit(&qt, &rt)?;
    let avg = (ft.integrate(lo, hi) - fa.integrate(lo, hi)) / (hi - lo);
    Ok(100.0 * (10f64.powf(avg) - 1.0))
}

/// Average quality difference at equal rate (dB for PSNR).
pub fn bd_quality(anchor: &RdCurve, test: &RdCurve, metric: QualityMetric) -> Result<f64> {
    let (ra, qa) = anchor.series(metric);
    let (rt, qt) = test.series(metric);
    let (lo, hi) = overlap(&ra, &rt)?;
    let fa = Cubic::fit(&ra, &qa)?;
    let ft = Cubic::fit(&rt, &qt)?;
    Ok((ft.integrate(lo, hi) - fa.integrate(lo, hi)) / (hi - lo))
}

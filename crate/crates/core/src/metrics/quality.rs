use crate::error::{Error, Result};
use crate::lf::{Plane, View};

fn check_dims(a: &Plane<u8>, b: &Plane<u8>) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::DimensionMismatch(format!("{:?} vs {:?}", a.dims(), b.dims())));
    }
    Ok(())
}

pub fn mse(a: &Plane<u8>, b: &Plane<u8>) -> Result<f64> {
    check_dims(a, b)?;
    let se: u64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = x as i64 - y as i64;
            (d * d) as u64
        })
        .sum();
    Ok(se as f64 / a.data().len() as f64)
}

/// PSNR for a given 8-bit MSE; +∞ when the MSE is zero.
pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (255.0 * 255.0 / mse).log10()
    }
}

pub fn psnr_plane(a: &Plane<u8>, b: &Plane<u8>) -> Result<f64> {
    Ok(psnr_from_mse(mse(a, b)?))
}

/// Luma PSNR in dB.
pub fn psnr(a: &View, b: &View) -> Result<f64> {
    psnr_plane(&a.y, &b.y)
}

const WINDOW: usize = 11;
const SIGMA: f64 = 1.5;

fn gaussian_window() -> [f64; WINDOW] {
    let mut w = [0.0; WINDOW];
    let c = (WINDOW / 2) as f64;
    for (i, v) in w.iter_mut().enumerate() {
        *v = (-((i as f64 - c).powi(2)) / (2.0 * SIGMA * SIGMA)).exp();
    }
    let s: f64 = w.iter().sum();
    w.map(|v| v / s)
}

/// Separable valid-region Gaussian filter.
fn filter(data: &[f64], w: usize, h: usize, k: &[f64; WINDOW]) -> Vec<f64> {
    let ow = w - WINDOW + 1;
    let oh = h - WINDOW + 1;
    let mut tmp = vec![0.0; ow * h];
    for r in 0..h {
        let row = &data[r * w..(r + 1) * w];
        for c in 0..ow {
            tmp[r * ow + c] = k.iter().zip(&row[c..c + WINDOW]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for r in 0..oh {
        for c in 0..ow {
            out[r * ow + c] = (0..WINDOW).map(|i| k[i] * tmp[(r + i) * ow + c]).sum();
        }
    }
    out
}

/// Single-scale SSIM with an 11x11 Gaussian window (σ = 1.5), averaged over
/// all positions where the window fits.
pub fn ssim_plane(a: &Plane<u8>, b: &Plane<u8>) -> Result<f64> {
    check_dims(a, b)?;
    let (w, h) = a.dims();
    if w < WINDOW || h < WINDOW {
        return Err(Error::InvalidArgument(format!("SSIM needs at least 11x11, got {w}x{h}")));
    }
    let k = gaussian_window();
    let x: Vec<f64> = a.data().iter().map(|&v| v as f64).collect();
    let y: Vec<f64> = b.data().iter().map(|&v| v as f64).collect();
    let prod = |p: &[f64], q: &[f64]| -> Vec<f64> { p.iter().zip(q).map(|(a, b)| a * b).collect() };
    let mx = filter(&x, w, h, &k);
    let my = filter(&y, w, h, &k);
    let sxx = filter(&prod(&x, &x), w, h, &k);
    let syy = filter(&prod(&y, &y), w, h, &k);
    let sxy = filter(&prod(&x, &y), w, h, &k);
    let c1 = (0.01f64 * 255.0).powi(2);
    let c2 = (0.03f64 * 255.0).powi(2);
    let total: f64 = (0..mx.len())
        .map(|i| {
            let (ux, uy) = (mx[i], my[i]);
            let vx = sxx[i] - ux * ux;
            let vy = syy[i] - uy * uy;
            let cxy = sxy[i] - ux * uy;
            ((2.0 * ux * uy + c1) * (2.0 * cxy + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2))
        })
        .sum();
    Ok(total / mx.len() as f64)
}

/// Luma SSIM.
pub fn ssim(a: &View, b: &View) -> Result<f64> {
    ssim_plane(&a.y, &b.y)
}

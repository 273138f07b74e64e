use crate::error::{Error, Result};
use crate::lf::{AngularPos, Plane};

/// Per-pixel disparity in pixels per unit angular distance.
pub type DisparityMap = Plane<f64>;

/// Bilinear sample of a row-major `h`x`w` buffer at (y, x), with coordinates
/// clamped to the buffer. Returns the value and its partial derivatives in y
/// and x (zero along an axis whose coordinate was clamped).
#[inline]
pub(crate) fn sample_bilinear(data: &[f64], h: usize, w: usize, y: f64, x: f64) -> (f64, f64, f64) {
    let (ymax, xmax) = ((h - 1) as f64, (w - 1) as f64);
    let (yc, y_in) = clamp_coord(y, ymax);
    let (xc, x_in) = clamp_coord(x, xmax);
    let y0 = yc.floor();
    let x0 = xc.floor();
    let (fy, fx) = (yc - y0, xc - x0);
    let (y0, x0) = (y0 as usize, x0 as usize);
    let y1 = (y0 + 1).min(h - 1);
    let x1 = (x0 + 1).min(w - 1);
    let a = data[y0 * w + x0];
    let b = data[y0 * w + x1];
    let c = data[y1 * w + x0];
    let d = data[y1 * w + x1];
    let top = if fx == 0.0 { a } else { (1.0 - fx) * a + fx * b };
    let bottom = if fx == 0.0 { c } else { (1.0 - fx) * c + fx * d };
    let value = if fy == 0.0 { top } else { (1.0 - fy) * top + fy * bottom };
    let dy = if y_in { bottom - top } else { 0.0 };
    let dx = if x_in {
        (1.0 - fy) * (b - a) + fy * (d - c)
    } else {
        0.0
    };
    (value, dy, dx)
}

#[inline]
fn clamp_coord(v: f64, max: f64) -> (f64, bool) {
    if v <= 0.0 {
        (0.0, v == 0.0)
    } else if v >= max {
        (max, v == max)
    } else {
        (v, true)
    }
}

/// Resamples `reference` (seen from `p`) toward `q` using disparity `d`:
/// out(r, c) = ref(r + (p.u - q.u)·D, c + (p.v - q.v)·D), bilinear, edge clamped.
pub fn warp_view(reference: &Plane<f64>, p: AngularPos, q: AngularPos, d: &DisparityMap) -> Result<Plane<f64>> {
    if reference.dims() != d.dims() {
        return Err(Error::DimensionMismatch(format!(
            "reference {:?} vs disparity {:?}",
            reference.dims(),
            d.dims()
        )));
    }
    let delta = p.delta(q);
    let (w, h) = reference.dims();
    let (out, _) = warp_buffer(reference.data(), h, w, 0, delta, d.data(), h, w);
    Plane::from_vec(w, h, out)
}

/// Warps the `dh`x`dw` region at `offset` inside an `sh`x`sw` source buffer.
/// Returns the warped samples and ∂out/∂D for each pixel.
#[allow(clippy::too_many_arguments)]
pub(crate) fn warp_buffer(
    src: &[f64],
    sh: usize,
    sw: usize,
    offset: usize,
    (du, dv): (f64, f64),
    d: &[f64],
    dh: usize,
    dw: usize,
) -> (Vec<f64>, Vec<f64>) {
    let mut out = Vec::with_capacity(dh * dw);
    let mut grad = Vec::with_capacity(dh * dw);
    for r in 0..dh {
        for c in 0..dw {
            let disp = d[r * dw + c];
            let y = (r + offset) as f64 + du * disp;
            let x = (c + offset) as f64 + dv * disp;
            let (v, gy, gx) = sample_bilinear(src, sh, sw, y, x);
            out.push(v);
            grad.push(du * gy + dv * gx);
        }
    }
    (out, grad)
}

use super::{chroma_dims, Plane, View};

/// Interleaved 8-bit RGB samples.
pub type RgbPlane = Plane<[u8; 3]>;

#[inline]
fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// BT.601 full-range RGB to YCbCr with 2x2 box-averaged chroma.
pub fn rgb_to_ycbcr420(rgb: &RgbPlane) -> View {
    let (w, h) = rgb.dims();
    let mut y = Plane::new(w, h, 0u8);
    let mut cb_full = Plane::new(w, h, 0.0f64);
    let mut cr_full = Plane::new(w, h, 0.0f64);
    for row in 0..h {
        for col in 0..w {
            let [r, g, b] = rgb.at(row, col).map(f64::from);
            y.set(row, col, to_u8(0.299 * r + 0.587 * g + 0.114 * b));
            cb_full.set(row, col, 128.0 - 0.168_736 * r - 0.331_264 * g + 0.5 * b);
            cr_full.set(row, col, 128.0 + 0.5 * r - 0.418_688 * g - 0.081_312 * b);
        }
    }
    let (cw, ch) = chroma_dims(w, h);
    let subsample = |full: &Plane<f64>| {
        Plane::from_fn(cw, ch, |row, col| {
            let mut acc = 0.0;
            let mut n = 0.0;
            for r in 2 * row..(2 * row + 2).min(h) {
                for c in 2 * col..(2 * col + 2).min(w) {
                    acc += full.at(r, c);
                    n += 1.0;
                }
            }
            to_u8(acc / n)
        })
    };
    View {
        cb: subsample(&cb_full),
        cr: subsample(&cr_full),
        y,
    }
}

/// Inverse of [`rgb_to_ycbcr420`] with nearest-neighbour chroma upsampling.
pub fn ycbcr420_to_rgb(view: &View) -> RgbPlane {
    Plane::from_fn(view.width(), view.height(), |row, col| {
        let y = view.y.at(row, col) as f64;
        let cb = view.cb.at(row / 2, col / 2) as f64 - 128.0;
        let cr = view.cr.at(row / 2, col / 2) as f64 - 128.0;
        [
            to_u8(y + 1.402 * cr),
            to_u8(y - 0.344_136 * cb - 0.714_136 * cr),
            to_u8(y + 1.772 * cb),
        ]
    })
}

//! Procedural light fields with known geometry.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lf::{chroma_dims, AngularPos, LightField, Plane, View};

#[derive(Clone, Copy, Debug, PartialEq)]
struct Wave {
    amplitude: f64,
    fy: f64,
    fx: f64,
    phase: f64,
}

/// Smooth band-limited texture: a sum of oriented sinusoids around mid-gray.
#[derive(Clone, Debug, PartialEq)]
pub struct Texture {
    mean: f64,
    waves: Vec<Wave>,
}

impl Texture {
    pub fn random(seed: u64, contrast: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut waves: Vec<Wave> = (0..7)
            .map(|_| {
                let period: f64 = rng.random_range(5.0..36.0);
                let angle: f64 = rng.random_range(0.0..std::f64::consts::PI);
                let f = std::f64::consts::TAU / period;
                Wave {
                    amplitude: rng.random_range(0.5..1.0),
                    fy: f * angle.sin(),
                    fx: f * angle.cos(),
                    phase: rng.random_range(0.0..std::f64::consts::TAU),
                }
            })
            .collect();
        let total: f64 = waves.iter().map(|w| w.amplitude).sum();
        for w in &mut waves {
            w.amplitude *= contrast / total;
        }
        Self {
            mean: rng.random_range(100.0..156.0),
            waves,
        }
    }

    /// Intensity at a continuous (row, col) position.
    pub fn sample(&self, y: f64, x: f64) -> f64 {
        self.mean
            + self
                .waves
                .iter()
                .map(|w| w.amplitude * (w.fy * y + w.fx * x + w.phase).sin())
                .sum::<f64>()
    }
}

fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Renders every view from `shade(u_off, v_off, y, x)` where the offsets are
/// relative to the grid center; chroma is sampled at 2x2 block centers.
fn render(
    rows: usize,
    cols: usize,
    width: usize,
    height: usize,
    shade: impl Fn(usize, f64, f64, f64, f64) -> f64,
) -> Result<LightField> {
    if rows == 0 || cols == 0 || width == 0 || height == 0 {
        return Err(Error::InvalidArgument("empty synthetic light field".into()));
    }
    let (u0, v0) = ((rows - 1) as f64 / 2.0, (cols - 1) as f64 / 2.0);
    let (cw, ch) = chroma_dims(width, height);
    let mut views = Vec::with_capacity(rows * cols);
    for u in 0..rows {
        for v in 0..cols {
            let (du, dv) = (u as f64 - u0, v as f64 - v0);
            let y = Plane::from_fn(width, height, |r, c| to_u8(shade(0, du, dv, r as f64, c as f64)));
            let chroma = |plane| {
                Plane::from_fn(cw, ch, |r, c| to_u8(shade(plane, du, dv, 2.0 * r as f64 + 0.5, 2.0 * c as f64 + 0.5)))
            };
            views.push(View::new(y, chroma(1), chroma(2))?);
        }
    }
    LightField::new(rows, cols, views)
}

/// A fronto-parallel textured plane at constant disparity `d`:
/// V(u, v)(r, c) = T(r − (u − u0)·d, c − (v − v0)·d).
pub fn textured_plane(rows: usize, cols: usize, width: usize, height: usize, d: f64, seed: u64) -> Result<LightField> {
    let tex = [
        Texture::random(seed, 90.0),
        Texture::random(seed ^ 0x9e37_79b9, 24.0),
        Texture::random(seed ^ 0x85eb_ca6b, 24.0),
    ];
    render(rows, cols, width, height, |p, du, dv, y, x| tex[p].sample(y - du * d, x - dv * d))
}

/// A textured disc at disparity `fg` in front of a textured background at `bg`.
pub fn occlusion_scene(
    rows: usize,
    cols: usize,
    width: usize,
    height: usize,
    bg: f64,
    fg: f64,
    seed: u64,
) -> Result<LightField> {
    let back = [
        Texture::random(seed, 80.0),
        Texture::random(seed ^ 0x1111, 20.0),
        Texture::random(seed ^ 0x2222, 20.0),
    ];
    let front = [
        Texture::random(seed ^ 0x3333, 100.0),
        Texture::random(seed ^ 0x4444, 30.0),
        Texture::random(seed ^ 0x5555, 30.0),
    ];
    let (cy, cx) = (height as f64 / 2.0, width as f64 / 2.0);
    let radius = width.min(height) as f64 / 4.0;
    render(rows, cols, width, height, |p, du, dv, y, x| {
        let (fy, fx) = (y - du * fg, x - dv * fg);
        if (fy - cy).powi(2) + (fx - cx).powi(2) <= radius * radius {
            front[p].sample(fy, fx)
        } else {
            back[p].sample(y - du * bg, x - dv * bg)
        }
    })
}

/// Single still image with texture at several scales plus a sharp-edged
/// rectangle, for codec rate-distortion checks.
pub fn test_image(width: usize, height: usize, seed: u64) -> Result<View> {
    let fine = Texture::random(seed, 60.0);
    let coarse = Texture::random(seed ^ 0x77, 40.0);
    let lf = render(1, 1, width, height, |p, _, _, y, x| {
        let base = if p == 0 {
            fine.sample(y, x) + coarse.sample(y / 4.0, x / 4.0) - 128.0
        } else {
            128.0 + 0.25 * (coarse.sample(y / 3.0 + p as f64 * 50.0, x / 3.0) - 128.0)
        };
        let inside = y > height as f64 * 0.3 && y < height as f64 * 0.6 && x > width as f64 * 0.2 && x < width as f64 * 0.7;
        if inside && p == 0 {
            base * 0.5 + 100.0
        } else {
            base
        }
    })?;
    Ok(lf.view(AngularPos::new(0, 0)).clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plane_views_are_shifted_copies() {
        let lf = textured_plane(8, 8, 40, 40, 1.0, 5).unwrap();
        let a = lf.view(AngularPos::new(2, 3));
        let b = lf.view(AngularPos::new(2, 4));
        // one unit of v moves content by one column
        for r in 0..40 {
            for c in 1..40 {
                assert_eq!(b.y.at(r, c), a.y.at(r, c - 1));
            }
        }
    }

    #[test]
    fn deterministic_and_textured() {
        let a = textured_plane(4, 4, 16, 16, 0.5, 9).unwrap();
        assert_eq!(a, textured_plane(4, 4, 16, 16, 0.5, 9).unwrap());
        let y = &a.view(AngularPos::new(0, 0)).y;
        let min = y.data().iter().min().unwrap();
        let max = y.data().iter().max().unwrap();
        assert!(max - min > 40);
    }

    #[test]
    fn occlusion_differs_from_background_only() {
        let lf = occlusion_scene(8, 8, 48, 48, 0.5, 2.0, 3).unwrap();
        let a = lf.view(AngularPos::new(0, 0));
        let b = lf.view(AngularPos::new(7, 7));
        assert_ne!(a.y, b.y);
        let img = test_image(64, 32, 1).unwrap();
        assert_eq!((img.width(), img.height()), (64, 32));
    }
}

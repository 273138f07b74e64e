use super::View;
use crate::error::{Error, Result};

/// A luma window of a view with samples in [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct Patch {
    /// Column of the top-left sample.
    pub x: usize,
    /// Row of the top-left sample.
    pub y: usize,
    pub width: usize,
    pub height: usize,
    pub samples: Vec<f64>,
}

/// Patch start offsets along one axis of length `len`.
///
/// Offsets advance by `stride`; when the last full step does not reach the
/// end, a final patch anchored at `len - size` is added.
pub fn patch_origins(len: usize, size: usize, stride: usize) -> Result<Vec<usize>> {
    if size == 0 || stride == 0 {
        return Err(Error::InvalidArgument("patch size and stride must be >= 1".into()));
    }
    if size > len {
        return Err(Error::InvalidArgument(format!(
            "patch size {size} exceeds extent {len}"
        )));
    }
    let mut origins: Vec<usize> = (0..).map(|i| i * stride).take_while(|o| o + size <= len).collect();
    let last = *origins.last().expect("size <= len yields origin 0");
    if last + size < len {
        origins.push(len - size);
    }
    Ok(origins)
}

/// Raster-order luma patches covering the whole view.
pub fn extract_patches(view: &View, size: usize, stride: usize) -> Result<Vec<Patch>> {
    let ys = patch_origins(view.height(), size, stride)?;
    let xs = patch_origins(view.width(), size, stride)?;
    let mut patches = Vec::with_capacity(xs.len() * ys.len());
    for &y in &ys {
        for &x in &xs {
            let mut samples = Vec::with_capacity(size * size);
            for row in y..y + size {
                samples.extend(view.y.row(row)[x..x + size].iter().map(|&s| s as f64 / 255.0));
            }
            patches.push(Patch {
                x,
                y,
                width: size,
                height: size,
                samples,
            });
        }
    }
    Ok(patches)
}

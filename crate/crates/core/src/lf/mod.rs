//! Light-field data model: sub-aperture view grids, lenslet demultiplexing,
//! color conversion and patch extraction.

mod color;
mod io;
mod lenslet;
mod patch;
mod plane;

pub use color::{rgb_to_ycbcr420, ycbcr420_to_rgb, RgbPlane};
pub(crate) use io::view_to_yuv;
pub use io::{load_light_field, save_light_field, Manifest, ViewFormat};
pub use lenslet::{demultiplex_lenslet, multiplex_lenslet, ViewGrid};
pub use patch::{extract_patches, patch_origins, Patch};
pub use plane::Plane;

use crate::error::{Error, Result};
use std::fmt;

/// Angular position of a view: `u` is the grid row, `v` the grid column.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
pub struct AngularPos {
    pub u: usize,
    pub v: usize,
}

impl AngularPos {
    pub const fn new(u: usize, v: usize) -> Self {
        Self { u, v }
    }

    pub fn chebyshev(self, other: AngularPos) -> usize {
        self.u.abs_diff(other.u).max(self.v.abs_diff(other.v))
    }

    /// Component-wise `self - other` as signed (row, col) offsets.
    pub fn delta(self, other: AngularPos) -> (f64, f64) {
        (
            self.u as f64 - other.u as f64,
            self.v as f64 - other.v as f64,
        )
    }
}

impl fmt::Display for AngularPos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.u, self.v)
    }
}

/// An 8-bit YCbCr 4:2:0 view.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct View {
    pub y: Plane<u8>,
    pub cb: Plane<u8>,
    pub cr: Plane<u8>,
}

/// Chroma plane dimensions for a luma plane of the given size.
pub fn chroma_dims(width: usize, height: usize) -> (usize, usize) {
    (width.div_ceil(2), height.div_ceil(2))
}

impl View {
    pub fn new(y: Plane<u8>, cb: Plane<u8>, cr: Plane<u8>) -> Result<Self> {
        let expected = chroma_dims(y.width(), y.height());
        if cb.dims() != expected || cr.dims() != expected {
            return Err(Error::DimensionMismatch(format!(
                "chroma {:?}/{:?} for luma {:?}, expected {expected:?}",
                cb.dims(),
                cr.dims(),
                y.dims()
            )));
        }
        Ok(Self { y, cb, cr })
    }

    /// Luma-only view with neutral chroma.
    pub fn from_luma(y: Plane<u8>) -> Self {
        let (cw, ch) = chroma_dims(y.width(), y.height());
        Self {
            y,
            cb: Plane::new(cw, ch, 128),
            cr: Plane::new(cw, ch, 128),
        }
    }

    pub fn width(&self) -> usize {
        self.y.width()
    }

    pub fn height(&self) -> usize {
        self.y.height()
    }

    pub fn planes(&self) -> [&Plane<u8>; 3] {
        [&self.y, &self.cb, &self.cr]
    }

    /// Same view with the luma plane replaced.
    pub fn with_luma(&self, y: Plane<u8>) -> Result<Self> {
        View::new(y, self.cb.clone(), self.cr.clone())
    }
}

/// A fully populated grid of sub-aperture views, stored row-major by (u, v).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LightField {
    rows: usize,
    cols: usize,
    views: Vec<View>,
}

impl LightField {
    pub fn new(rows: usize, cols: usize, views: Vec<View>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument("empty view grid".into()));
        }
        if views.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} views for a {rows}x{cols} grid",
                views.len()
            )));
        }
        let dims = (views[0].width(), views[0].height());
        if let Some(bad) = views.iter().find(|v| (v.width(), v.height()) != dims) {
            return Err(Error::DimensionMismatch(format!(
                "view {}x{} differs from {}x{}",
                bad.width(),
                bad.height(),
                dims.0,
                dims.1
            )));
        }
        Ok(Self { rows, cols, views })
    }

    /// Demultiplexes an RGB lenslet image and converts every view to 4:2:0.
    pub fn from_lenslet(mi: &RgbPlane, pitch_u: usize, pitch_v: usize) -> Result<Self> {
        let grid = demultiplex_lenslet(mi, pitch_u, pitch_v)?;
        let views = grid.views.iter().map(rgb_to_ycbcr420).collect();
        LightField::new(grid.rows, grid.cols, views)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.views.len()
    }

    pub fn is_empty(&self) -> bool {
        self.views.is_empty()
    }

    /// Luma dimensions shared by every view.
    pub fn view_dims(&self) -> (usize, usize) {
        (self.views[0].width(), self.views[0].height())
    }

    pub fn contains(&self, pos: AngularPos) -> bool {
        pos.u < self.rows && pos.v < self.cols
    }

    pub fn view(&self, pos: AngularPos) -> &View {
        assert!(self.contains(pos), "{pos} outside {}x{} grid", self.rows, self.cols);
        &self.views[pos.u * self.cols + pos.v]
    }

    pub fn view_mut(&mut self, pos: AngularPos) -> &mut View {
        assert!(self.contains(pos), "{pos} outside {}x{} grid", self.rows, self.cols);
        &mut self.views[pos.u * self.cols + pos.v]
    }

    pub fn set_view(&mut self, pos: AngularPos, view: View) -> Result<()> {
        if (view.width(), view.height()) != self.view_dims() {
            return Err(Error::DimensionMismatch(format!(
                "view {}x{} in a light field of {:?}",
                view.width(),
                view.height(),
                self.view_dims()
            )));
        }
        *self.view_mut(pos) = view;
        Ok(())
    }

    pub fn positions(&self) -> impl Iterator<Item = AngularPos> + '_ {
        (0..self.rows).flat_map(move |u| (0..self.cols).map(move |v| AngularPos::new(u, v)))
    }

    pub fn iter(&self) -> impl Iterator<Item = (AngularPos, &View)> + '_ {
        self.positions().zip(self.views.iter())
    }
}

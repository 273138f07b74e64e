use super::Plane;
use crate::error::{Error, Result};

/// Sub-aperture planes of one lenslet image, row-major by angular position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ViewGrid<T> {
    pub rows: usize,
    pub cols: usize,
    pub views: Vec<Plane<T>>,
}

impl<T: Copy> ViewGrid<T> {
    pub fn view(&self, u: usize, v: usize) -> &Plane<T> {
        &self.views[u * self.cols + v]
    }
}

/// Splits a microlens image into sub-aperture views.
///
/// Every microlens covers a `pitch_u`x`pitch_v` block of sensor pixels; view
/// (u, v) gathers the pixel at offset (u, v) inside each block, so
/// `view[u, v](row, col) = mi(row * pitch_u + u, col * pitch_v + v)`.
pub fn demultiplex_lenslet<T: Copy>(
    mi: &Plane<T>,
    pitch_u: usize,
    pitch_v: usize,
) -> Result<ViewGrid<T>> {
    if pitch_u == 0 || pitch_v == 0 {
        return Err(Error::InvalidArgument("lenslet pitch must be >= 1".into()));
    }
    if mi.height() % pitch_u != 0 || mi.width() % pitch_v != 0 {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} lenslet image is not divisible by pitch {pitch_u}x{pitch_v}",
            mi.width(),
            mi.height()
        )));
    }
    let (w, h) = (mi.width() / pitch_v, mi.height() / pitch_u);
    let mut views = Vec::with_capacity(pitch_u * pitch_v);
    for u in 0..pitch_u {
        for v in 0..pitch_v {
            views.push(Plane::from_fn(w, h, |row, col| {
                mi.at(row * pitch_u + u, col * pitch_v + v)
            }));
        }
    }
    Ok(ViewGrid {
        rows: pitch_u,
        cols: pitch_v,
        views,
    })
}

/// Interleaves sub-aperture views back into a microlens image.
pub fn multiplex_lenslet<T: Copy + Default>(grid: &ViewGrid<T>) -> Result<Plane<T>> {
    let Some(first) = grid.views.first() else {
        return Err(Error::InvalidArgument("empty view grid".into()));
    };
    if grid.views.len() != grid.rows * grid.cols
        || grid.views.iter().any(|v| v.dims() != first.dims())
    {
        return Err(Error::DimensionMismatch("inconsistent view grid".into()));
    }
    let (w, h) = first.dims();
    let mut mi = Plane::new(w * grid.cols, h * grid.rows, T::default());
    for u in 0..grid.rows {
        for v in 0..grid.cols {
            let view = grid.view(u, v);
            for row in 0..h {
                for col in 0..w {
                    mi.set(row * grid.rows + u, col * grid.cols + v, view.at(row, col));
                }
            }
        }
    }
    Ok(mi)
}

use crate::error::{Error, Result};

/// A dense row-major 2D sample array.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Plane<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Copy> Plane<T> {
    pub fn new(width: usize, height: usize, fill: T) -> Self {
        Self {
            width,
            height,
            data: vec![fill; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{} samples for a {width}x{height} plane",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Builds a plane by evaluating `f(row, col)` at every sample.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                data.push(f(row, col));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> T {
        self.data[row * self.width + col]
    }

    /// Sample with coordinates clamped to the plane (edge replication).
    #[inline]
    pub fn at_clamped(&self, row: isize, col: isize) -> T {
        let r = row.clamp(0, self.height as isize - 1) as usize;
        let c = col.clamp(0, self.width as isize - 1) as usize;
        self.data[r * self.width + c]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: T) {
        self.data[row * self.width + col] = value;
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn row(&self, row: usize) -> &[T] {
        &self.data[row * self.width..(row + 1) * self.width]
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> Plane<U> {
        Plane {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Copies a `width`x`height` window whose top-left corner is (`row`, `col`).
    /// Out-of-bounds positions replicate the nearest edge sample.
    pub fn crop_clamped(&self, row: isize, col: isize, width: usize, height: usize) -> Plane<T> {
        Plane::from_fn(width, height, |r, c| {
            self.at_clamped(row + r as isize, col + c as isize)
        })
    }
}

impl Plane<u8> {
    /// Samples scaled to [0, 1].
    pub fn to_unit(&self) -> Plane<f64> {
        self.map(|v| v as f64 / 255.0)
    }
}

impl Plane<f64> {
    /// Quantizes [0, 1] samples back to 8 bits with clamping.
    pub fn to_u8(&self) -> Plane<u8> {
        self.map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
    }
}

use crate::error::{Error, Result};

/// Dense NCHW tensor of f64.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor4 {
    dims: [usize; 4],
    data: Vec<f64>,
}

impl Tensor4 {
    pub fn new(dims: [usize; 4], data: Vec<f64>) -> Result<Self> {
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::DimensionMismatch(format!("zero dimension in {dims:?}")));
        }
        if data.len() != dims.iter().product::<usize>() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for dims {dims:?}",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: [usize; 4]) -> Self {
        assert!(dims.iter().all(|&d| d > 0), "zero dimension in {dims:?}");
        Self {
            dims,
            data: vec![0.0; dims.iter().product()],
        }
    }

    pub fn from_fn(dims: [usize; 4], mut f: impl FnMut([usize; 4]) -> f64) -> Self {
        let mut t = Self::zeros(dims);
        let [n, c, h, w] = dims;
        let mut i = 0;
        for a in 0..n {
            for b in 0..c {
                for y in 0..h {
                    for x in 0..w {
                        t.data[i] = f([a, b, y, x]);
                        i += 1;
                    }
                }
            }
        }
        t
    }

    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    pub fn batch(&self) -> usize {
        self.dims[0]
    }

    pub fn channels(&self) -> usize {
        self.dims[1]
    }

    pub fn height(&self) -> usize {
        self.dims[2]
    }

    pub fn width(&self) -> usize {
        self.dims[3]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    fn sample_len(&self) -> usize {
        self.dims[1] * self.dims[2] * self.dims[3]
    }

    pub fn sample(&self, n: usize) -> &[f64] {
        let len = self.sample_len();
        &self.data[n * len..(n + 1) * len]
    }

    pub fn sample_mut(&mut self, n: usize) -> &mut [f64] {
        let len = self.sample_len();
        &mut self.data[n * len..(n + 1) * len]
    }

    /// One H x W map.
    pub fn map(&self, n: usize, c: usize) -> &[f64] {
        let hw = self.dims[2] * self.dims[3];
        let start = (n * self.dims[1] + c) * hw;
        &self.data[start..start + hw]
    }

    pub fn map_mut(&mut self, n: usize, c: usize) -> &mut [f64] {
        let hw = self.dims[2] * self.dims[3];
        let start = (n * self.dims[1] + c) * hw;
        &mut self.data[start..start + hw]
    }

    #[inline]
    pub fn at(&self, n: usize, c: usize, y: usize, x: usize) -> f64 {
        self.data[((n * self.dims[1] + c) * self.dims[2] + y) * self.dims[3] + x]
    }

    #[inline]
    pub fn at_mut(&mut self, n: usize, c: usize, y: usize, x: usize) -> &mut f64 {
        let [_, cs, hs, ws] = self.dims;
        &mut self.data[((n * cs + c) * hs + y) * ws + x]
    }

    /// Concatenates along the channel axis.
    pub fn concat_channels(parts: &[&Tensor4]) -> Result<Tensor4> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("nothing to concatenate".into()))?;
        let [n, _, h, w] = first.dims;
        if parts.iter().any(|p| p.dims[0] != n || p.dims[2] != h || p.dims[3] != w) {
            return Err(Error::DimensionMismatch("concat operands differ in N/H/W".into()));
        }
        let c: usize = parts.iter().map(|p| p.dims[1]).sum();
        let mut data = Vec::with_capacity(n * c * h * w);
        for s in 0..n {
            for p in parts {
                data.extend_from_slice(p.sample(s));
            }
        }
        Tensor4::new([n, c, h, w], data)
    }

    /// Inverse of [`Tensor4::concat_channels`].
    pub fn split_channels(&self, sizes: &[usize]) -> Result<Vec<Tensor4>> {
        if sizes.iter().sum::<usize>() != self.dims[1] {
            return Err(Error::DimensionMismatch(format!(
                "split {sizes:?} of {} channels",
                self.dims[1]
            )));
        }
        let [n, _, h, w] = self.dims;
        let hw = h * w;
        let mut out: Vec<Vec<f64>> = sizes.iter().map(|&c| Vec::with_capacity(n * c * hw)).collect();
        for s in 0..n {
            let mut at = 0;
            let sample = self.sample(s);
            for (buf, &c) in out.iter_mut().zip(sizes) {
                buf.extend_from_slice(&sample[at..at + c * hw]);
                at += c * hw;
            }
        }
        out.into_iter()
            .zip(sizes)
            .map(|(d, &c)| Tensor4::new([n, c, h, w], d))
            .collect()
    }

    /// Central spatial crop.
    pub fn crop_center(&self, h: usize, w: usize) -> Result<Tensor4> {
        let [n, c, hh, ww] = self.dims;
        if h > hh || w > ww || (hh - h) % 2 != 0 || (ww - w) % 2 != 0 {
            return Err(Error::DimensionMismatch(format!("crop {h}x{w} of {hh}x{ww}")));
        }
        let (oy, ox) = ((hh - h) / 2, (ww - w) / 2);
        Ok(Tensor4::from_fn([n, c, h, w], |[a, b, y, x]| self.at(a, b, y + oy, x + ox)))
    }

    pub fn add_assign(&mut self, other: &Tensor4) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch(format!("{:?} += {:?}", self.dims, other.dims)));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn concat_split_inverse() {
        let a = Tensor4::from_fn([2, 1, 2, 2], |[n, _, y, x]| (n * 10 + y * 2 + x) as f64);
        let b = Tensor4::from_fn([2, 3, 2, 2], |[n, c, y, x]| (100 + n * 50 + c * 10 + y * 2 + x) as f64);
        let cat = Tensor4::concat_channels(&[&a, &b]).unwrap();
        assert_eq!(cat.dims(), [2, 4, 2, 2]);
        assert_eq!(cat.at(1, 2, 1, 0), b.at(1, 1, 1, 0));
        let parts = cat.split_channels(&[1, 3]).unwrap();
        assert_eq!(parts[0], a);
        assert_eq!(parts[1], b);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(Tensor4::new([1, 1, 2, 2], vec![0.0; 3]).is_err());
        assert!(Tensor4::new([0, 1, 2, 2], vec![]).is_err());
        let a = Tensor4::zeros([1, 1, 2, 2]);
        let b = Tensor4::zeros([1, 1, 3, 2]);
        assert!(Tensor4::concat_channels(&[&a, &b]).is_err());
    }

    #[test]
    fn center_crop() {
        let t = Tensor4::from_fn([1, 1, 6, 6], |[_, _, y, x]| (y * 6 + x) as f64);
        let c = t.crop_center(2, 4).unwrap();
        assert_eq!(c.data(), &[13.0, 14.0, 15.0, 16.0, 19.0, 20.0, 21.0, 22.0]);
    }
}

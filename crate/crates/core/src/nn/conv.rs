use rand::Rng;
use rayon::prelude::*;

use super::{Param, Tensor4};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Padding {
    /// No padding; each side shrinks by `k / 2` (stride 1).
    Valid,
    /// Edge-replicated padding of `k / 2`.
    Same,
}

impl Padding {
    pub(crate) fn tag(self) -> u8 {
        match self {
            Padding::Valid => 0,
            Padding::Same => 1,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(Padding::Valid),
            1 => Ok(Padding::Same),
            _ => Err(Error::Model(format!("unknown padding tag {tag}"))),
        }
    }
}

/// 2-D cross-correlation layer with odd square kernels.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv2d {
    in_ch: usize,
    out_ch: usize,
    kernel: usize,
    stride: usize,
    padding: Padding,
    /// Layout (out_ch, in_ch, k, k).
    pub weight: Param,
    pub bias: Param,
}

/// Row-major C = A·B + beta·C with arbitrary strides on A and B.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
) {
    debug_assert!(c.len() >= m * n);
    // SAFETY: callers pass buffers whose extents match the given dims and strides.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

struct Geometry {
    c: usize,
    h: usize,
    w: usize,
    k: usize,
    ho: usize,
    wo: usize,
    rows: Vec<usize>,
    cols: Vec<usize>,
}

impl Geometry {
    fn new(c: usize, h: usize, w: usize, k: usize, stride: usize, padding: Padding) -> Result<Self> {
        let pad = match padding {
            Padding::Valid => 0,
            Padding::Same => k / 2,
        };
        let out = |len: usize| -> Result<usize> {
            let span = len + 2 * pad;
            if span < k {
                return Err(Error::DimensionMismatch(format!(
                    "input extent {len} smaller than kernel {k}"
                )));
            }
            Ok((span - k) / stride + 1)
        };
        let (ho, wo) = (out(h)?, out(w)?);
        // Source index for each (kernel offset, output position) with edge clamping.
        let table = |len: usize, outs: usize| -> Vec<usize> {
            let mut t = Vec::with_capacity(k * outs);
            for kk in 0..k {
                for o in 0..outs {
                    let src = (o * stride + kk) as isize - pad as isize;
                    t.push(src.clamp(0, len as isize - 1) as usize);
                }
            }
            t
        };
        Ok(Self {
            c,
            h,
            w,
            k,
            ho,
            wo,
            rows: table(h, ho),
            cols: table(w, wo),
        })
    }

    fn patch_len(&self) -> usize {
        self.c * self.k * self.k
    }

    fn positions(&self) -> usize {
        self.ho * self.wo
    }

    fn im2col(&self, x: &[f64], col: &mut [f64]) {
        let p = self.positions();
        let mut row = 0;
        for ch in 0..self.c {
            let plane = &x[ch * self.h * self.w..(ch + 1) * self.h * self.w];
            for ky in 0..self.k {
                let ys = &self.rows[ky * self.ho..(ky + 1) * self.ho];
                for kx in 0..self.k {
                    let xs = &self.cols[kx * self.wo..(kx + 1) * self.wo];
                    let dst = &mut col[row * p..(row + 1) * p];
                    for (oy, &y) in ys.iter().enumerate() {
                        let src = &plane[y * self.w..(y + 1) * self.w];
                        let d = &mut dst[oy * self.wo..(oy + 1) * self.wo];
                        for (v, &x) in d.iter_mut().zip(xs) {
                            *v = src[x];
                        }
                    }
                    row += 1;
                }
            }
        }
    }

    fn col2im(&self, col: &[f64], x: &mut [f64]) {
        let p = self.positions();
        let mut row = 0;
        for ch in 0..self.c {
            let plane = &mut x[ch * self.h * self.w..(ch + 1) * self.h * self.w];
            for ky in 0..self.k {
                let ys = &self.rows[ky * self.ho..(ky + 1) * self.ho];
                for kx in 0..self.k {
                    let xs = &self.cols[kx * self.wo..(kx + 1) * self.wo];
                    let src = &col[row * p..(row + 1) * p];
                    for (oy, &y) in ys.iter().enumerate() {
                        let dst = &mut plane[y * self.w..(y + 1) * self.w];
                        let s = &src[oy * self.wo..(oy + 1) * self.wo];
                        for (v, &x) in s.iter().zip(xs) {
                            dst[x] += v;
                        }
                    }
                    row += 1;
                }
            }
        }
    }
}

impl Conv2d {
    /// He-uniform kernel, zero bias.
    pub fn new<R: Rng + ?Sized>(
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        padding: Padding,
        rng: &mut R,
    ) -> Result<Self> {
        let mut layer = Self::zeroed(in_ch, out_ch, kernel, stride, padding)?;
        let bound = (6.0 / (in_ch * kernel * kernel) as f64).sqrt();
        for w in &mut layer.weight.value {
            *w = rng.random_range(-bound..bound);
        }
        Ok(layer)
    }

    pub fn zeroed(in_ch: usize, out_ch: usize, kernel: usize, stride: usize, padding: Padding) -> Result<Self> {
        if kernel % 2 == 0 || in_ch == 0 || out_ch == 0 || stride == 0 {
            return Err(Error::InvalidArgument(format!(
                "conv {in_ch}->{out_ch} k{kernel} s{stride}"
            )));
        }
        Ok(Self {
            in_ch,
            out_ch,
            kernel,
            stride,
            padding,
            weight: Param::zeros(out_ch * in_ch * kernel * kernel),
            bias: Param::zeros(out_ch),
        })
    }

    pub fn in_channels(&self) -> usize {
        self.in_ch
    }

    pub fn out_channels(&self) -> usize {
        self.out_ch
    }

    pub fn kernel(&self) -> usize {
        self.kernel
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn padding(&self) -> Padding {
        self.padding
    }

    fn geometry(&self, x: &Tensor4) -> Result<Geometry> {
        if x.channels() != self.in_ch {
            return Err(Error::DimensionMismatch(format!(
                "conv expects {} channels, got {}",
                self.in_ch,
                x.channels()
            )));
        }
        Geometry::new(self.in_ch, x.height(), x.width(), self.kernel, self.stride, self.padding)
    }

    pub fn output_dims(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let g = Geometry::new(self.in_ch, h, w, self.kernel, self.stride, self.padding)?;
        Ok((g.ho, g.wo))
    }

    pub fn forward(&self, x: &Tensor4) -> Result<Tensor4> {
        let g = self.geometry(x)?;
        let (kl, p) = (g.patch_len(), g.positions());
        let mut out = Tensor4::zeros([x.batch(), self.out_ch, g.ho, g.wo]);
        out.data_mut()
            .par_chunks_mut(self.out_ch * p)
            .enumerate()
            .for_each_init(
                || vec![0.0; kl * p],
                |col, (n, dst)| {
                    g.im2col(x.sample(n), col);
                    for (o, chunk) in dst.chunks_mut(p).enumerate() {
                        chunk.fill(self.bias.value[o]);
                    }
                    gemm(self.out_ch, kl, p, &self.weight.value, (kl, 1), col, (p, 1), 1.0, dst);
                },
            );
        Ok(out)
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward(&mut self, x: &Tensor4, grad_out: &Tensor4) -> Result<Tensor4> {
        let g = self.geometry(x)?;
        let (kl, p) = (g.patch_len(), g.positions());
        if grad_out.dims() != [x.batch(), self.out_ch, g.ho, g.wo] {
            return Err(Error::DimensionMismatch(format!(
                "conv grad {:?} for output {:?}",
                grad_out.dims(),
                [x.batch(), self.out_ch, g.ho, g.wo]
            )));
        }
        let weight = &self.weight.value;
        let out_ch = self.out_ch;
        let mut grad_x = Tensor4::zeros(x.dims());
        let partials: Vec<(Vec<f64>, Vec<f64>)> = grad_x
            .data_mut()
            .par_chunks_mut(x.sample(0).len())
            .enumerate()
            .map(|(n, gx)| {
                let go = grad_out.sample(n);
                let mut col = vec![0.0; kl * p];
                g.im2col(x.sample(n), &mut col);
                let mut gw = vec![0.0; out_ch * kl];
                gemm(out_ch, p, kl, go, (p, 1), &col, (1, p), 0.0, &mut gw);
                let gb: Vec<f64> = go.chunks(p).map(|c| c.iter().sum()).collect();
                gemm(kl, out_ch, p, weight, (1, kl), go, (p, 1), 0.0, &mut col);
                g.col2im(&col, gx);
                (gw, gb)
            })
            .collect();
        for (gw, gb) in partials {
            for (a, b) in self.weight.grad.iter_mut().zip(&gw) {
                *a += b;
            }
            for (a, b) in self.bias.grad.iter_mut().zip(&gb) {
                *a += b;
            }
        }
        Ok(grad_x)
    }
}

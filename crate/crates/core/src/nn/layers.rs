use super::{Param, Tensor4};
use crate::error::{Error, Result};

pub const BN_MOMENTUM: f64 = 0.9;
pub const BN_EPS: f64 = 1e-5;
pub const PRELU_INIT: f64 = 0.25;

/// Per-channel batch normalization with running statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchNorm2d {
    pub gamma: Param,
    pub beta: Param,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct BnCache {
    xhat: Tensor4,
    inv_std: Vec<f64>,
}

impl BatchNorm2d {
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: Param::new(vec![1.0; channels]),
            beta: Param::zeros(channels),
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    fn check(&self, x: &Tensor4) -> Result<()> {
        if x.channels() != self.channels() {
            return Err(Error::DimensionMismatch(format!(
                "batch norm over {} channels, got {}",
                self.channels(),
                x.channels()
            )));
        }
        Ok(())
    }

    /// Inference mode: normalizes with running statistics.
    pub fn forward(&self, x: &Tensor4) -> Result<Tensor4> {
        self.check(x)?;
        let mut y = x.clone();
        for n in 0..x.batch() {
            for c in 0..x.channels() {
                let scale = self.gamma.value[c] / (self.running_var[c] + BN_EPS).sqrt();
                let shift = self.beta.value[c] - self.running_mean[c] * scale;
                y.map_mut(n, c).iter_mut().for_each(|v| *v = *v * scale + shift);
            }
        }
        Ok(y)
    }

    /// Training mode: batch statistics, updates running statistics.
    pub fn forward_train(&mut self, x: &Tensor4) -> Result<(Tensor4, BnCache)> {
        self.check(x)?;
        let m = (x.batch() * x.height() * x.width()) as f64;
        let mut xhat = x.clone();
        let mut y = x.clone();
        let mut inv_std = Vec::with_capacity(x.channels());
        for c in 0..x.channels() {
            let mean = (0..x.batch()).map(|n| x.map(n, c).iter().sum::<f64>()).sum::<f64>() / m;
            let var = (0..x.batch())
                .map(|n| x.map(n, c).iter().map(|v| (v - mean).powi(2)).sum::<f64>())
                .sum::<f64>()
                / m;
            let is = 1.0 / (var + BN_EPS).sqrt();
            inv_std.push(is);
            self.running_mean[c] = BN_MOMENTUM * self.running_mean[c] + (1.0 - BN_MOMENTUM) * mean;
            self.running_var[c] = BN_MOMENTUM * self.running_var[c] + (1.0 - BN_MOMENTUM) * var;
            let (g, b) = (self.gamma.value[c], self.beta.value[c]);
            for n in 0..x.batch() {
                for (h, v) in xhat.map_mut(n, c).iter_mut().zip(y.map_mut(n, c)) {
                    *h = (*h - mean) * is;
                    *v = g * *h + b;
                }
            }
        }
        Ok((y, BnCache { xhat, inv_std }))
    }

    pub fn backward(&mut self, cache: &BnCache, grad: &Tensor4) -> Result<Tensor4> {
        if grad.dims() != cache.xhat.dims() {
            return Err(Error::DimensionMismatch("batch norm gradient shape".into()));
        }
        let m = (grad.batch() * grad.height() * grad.width()) as f64;
        let mut gx = Tensor4::zeros(grad.dims());
        for c in 0..grad.channels() {
            let (mut sg, mut sgx) = (0.0, 0.0);
            for n in 0..grad.batch() {
                for (g, h) in grad.map(n, c).iter().zip(cache.xhat.map(n, c)) {
                    sg += g;
                    sgx += g * h;
                }
            }
            self.gamma.grad[c] += sgx;
            self.beta.grad[c] += sg;
            let k = self.gamma.value[c] * cache.inv_std[c] / m;
            for n in 0..grad.batch() {
                let xh = cache.xhat.map(n, c);
                let g = grad.map(n, c);
                for ((d, g), h) in gx.map_mut(n, c).iter_mut().zip(g).zip(xh) {
                    *d = k * (m * g - sg - h * sgx);
                }
            }
        }
        Ok(gx)
    }
}

/// Leaky rectifier with a learnable slope per channel.
#[derive(Clone, Debug, PartialEq)]
pub struct PRelu {
    pub slope: Param,
}

impl PRelu {
    pub fn new(channels: usize) -> Self {
        Self {
            slope: Param::new(vec![PRELU_INIT; channels]),
        }
    }

    pub fn channels(&self) -> usize {
        self.slope.len()
    }

    pub fn forward(&self, x: &Tensor4) -> Result<Tensor4> {
        if x.channels() != self.channels() {
            return Err(Error::DimensionMismatch(format!(
                "prelu over {} channels, got {}",
                self.channels(),
                x.channels()
            )));
        }
        let mut y = x.clone();
        for n in 0..x.batch() {
            for c in 0..x.channels() {
                let a = self.slope.value[c];
                y.map_mut(n, c).iter_mut().for_each(|v| {
                    if *v < 0.0 {
                        *v *= a
                    }
                });
            }
        }
        Ok(y)
    }

    pub fn backward(&mut self, x: &Tensor4, grad: &Tensor4) -> Result<Tensor4> {
        let mut gx = grad.clone();
        for n in 0..x.batch() {
            for c in 0..x.channels() {
                let a = self.slope.value[c];
                let mut ga = 0.0;
                for (g, v) in gx.map_mut(n, c).iter_mut().zip(x.map(n, c)) {
                    if *v < 0.0 {
                        ga += *g * v;
                        *g *= a;
                    }
                }
                self.slope.grad[c] += ga;
            }
        }
        Ok(gx)
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^x), never below the smallest positive normal.
pub fn softplus(x: f64) -> f64 {
    let y = if x > 30.0 { x } else { x.max(0.0) + (-x.abs()).exp().ln_1p() };
    y.max(f64::MIN_POSITIVE)
}

pub fn global_avg_pool(x: &Tensor4) -> Tensor4 {
    let hw = (x.height() * x.width()) as f64;
    Tensor4::from_fn([x.batch(), x.channels(), 1, 1], |[n, c, _, _]| {
        x.map(n, c).iter().sum::<f64>() / hw
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bn_identity_on_standardized_batch() {
        let raw: Vec<f64> = (0..32).map(|i| ((i * 37) % 11) as f64).collect();
        let mean = raw.iter().sum::<f64>() / 32.0;
        let sd = (raw.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 32.0).sqrt();
        let data: Vec<f64> = raw.iter().map(|v| (v - mean) / sd).collect();
        let x = Tensor4::new([2, 1, 4, 4], data).unwrap();
        let mut bn = BatchNorm2d::new(1);
        let (y, _) = bn.forward_train(&x).unwrap();
        let scale = 1.0 / (1.0 + BN_EPS).sqrt();
        for (a, b) in y.data().iter().zip(x.data()) {
            assert!((a - b * scale).abs() < 1e-9 && (a - b).abs() < 1e-5);
        }
        assert!((bn.running_var[0] - (0.9 + 0.1)).abs() < 1e-12);
        assert!(bn.running_mean[0].abs() < 1e-12);
    }

    #[test]
    fn prelu_passes_non_negative() {
        let p = PRelu::new(1);
        let x = Tensor4::new([1, 1, 1, 4], vec![0.0, 2.0, -4.0, 1e-3]).unwrap();
        assert_eq!(p.forward(&x).unwrap().data(), &[0.0, 2.0, -1.0, 1e-3]);
    }

    #[test]
    fn softplus_values() {
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-12);
        assert_eq!(softplus(1000.0), 1000.0);
        for x in [-1e300, -800.0, -50.0, -1.0, 3.0, 1e300] {
            assert!(softplus(x) > 0.0 && softplus(x).is_finite());
        }
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
        assert!(sigmoid(-1000.0) >= 0.0 && sigmoid(1000.0) <= 1.0);
    }
}

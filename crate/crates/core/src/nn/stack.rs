use super::layers::{global_avg_pool, sigmoid, softplus, BatchNorm2d, BnCache, PRelu};
use super::{Conv2d, Param, Tensor4};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Layer {
    Conv(Conv2d),
    BatchNorm(BatchNorm2d),
    PRelu(PRelu),
    Sigmoid,
    Softplus,
    GlobalAvgPool,
}

#[derive(Clone, Debug)]
enum Cache {
    Input(Tensor4),
    Output(Tensor4),
    Bn(BnCache),
    Pool(usize, usize),
}

/// Activations recorded by [`Stack::forward_train`].
#[derive(Clone, Debug)]
pub struct StackCache(Vec<Cache>);

impl Layer {
    pub fn forward(&self, x: &Tensor4) -> Result<Tensor4> {
        match self {
            Layer::Conv(c) => c.forward(x),
            Layer::BatchNorm(b) => b.forward(x),
            Layer::PRelu(p) => p.forward(x),
            Layer::Sigmoid => Ok(map(x, sigmoid)),
            Layer::Softplus => Ok(map(x, softplus)),
            Layer::GlobalAvgPool => Ok(global_avg_pool(x)),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        match self {
            Layer::Conv(c) => vec![&mut c.weight, &mut c.bias],
            Layer::BatchNorm(b) => vec![&mut b.gamma, &mut b.beta],
            Layer::PRelu(p) => vec![&mut p.slope],
            _ => Vec::new(),
        }
    }

    pub fn params(&self) -> Vec<&Param> {
        match self {
            Layer::Conv(c) => vec![&c.weight, &c.bias],
            Layer::BatchNorm(b) => vec![&b.gamma, &b.beta],
            Layer::PRelu(p) => vec![&p.slope],
            _ => Vec::new(),
        }
    }
}

fn map(x: &Tensor4, f: fn(f64) -> f64) -> Tensor4 {
    let mut y = x.clone();
    y.data_mut().iter_mut().for_each(|v| *v = f(*v));
    y
}

/// A feed-forward chain of layers.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Stack {
    pub layers: Vec<Layer>,
}

impl Stack {
    pub fn new(layers: Vec<Layer>) -> Self {
        Self { layers }
    }

    /// Inference pass (batch norm uses running statistics).
    pub fn forward(&self, x: &Tensor4) -> Result<Tensor4> {
        let mut cur = x.clone();
        for layer in &self.layers {
            cur = layer.forward(&cur)?;
        }
        Ok(cur)
    }

    pub fn forward_train(&mut self, x: Tensor4) -> Result<(Tensor4, StackCache)> {
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut cur = x;
        for layer in &mut self.layers {
            cur = match layer {
                Layer::BatchNorm(b) => {
                    let (y, c) = b.forward_train(&cur)?;
                    caches.push(Cache::Bn(c));
                    y
                }
                Layer::Sigmoid | Layer::Softplus => {
                    let y = layer.forward(&cur)?;
                    caches.push(if matches!(layer, Layer::Sigmoid) {
                        Cache::Output(y.clone())
                    } else {
                        Cache::Input(cur)
                    });
                    y
                }
                Layer::GlobalAvgPool => {
                    caches.push(Cache::Pool(cur.height(), cur.width()));
                    global_avg_pool(&cur)
                }
                _ => {
                    let y = layer.forward(&cur)?;
                    caches.push(Cache::Input(cur));
                    y
                }
            };
        }
        Ok((cur, StackCache(caches)))
    }

    /// Accumulates parameter gradients, returns the gradient at the stack input.
    pub fn backward(&mut self, cache: StackCache, grad: Tensor4) -> Result<Tensor4> {
        if cache.0.len() != self.layers.len() {
            return Err(Error::InvalidArgument("cache does not belong to this stack".into()));
        }
        let mut g = grad;
        for (layer, c) in self.layers.iter_mut().zip(cache.0).rev() {
            g = match (layer, c) {
                (Layer::Conv(conv), Cache::Input(x)) => conv.backward(&x, &g)?,
                (Layer::BatchNorm(bn), Cache::Bn(c)) => bn.backward(&c, &g)?,
                (Layer::PRelu(p), Cache::Input(x)) => p.backward(&x, &g)?,
                (Layer::Sigmoid, Cache::Output(y)) => {
                    for (d, s) in g.data_mut().iter_mut().zip(y.data()) {
                        *d *= s * (1.0 - s);
                    }
                    g
                }
                (Layer::Softplus, Cache::Input(x)) => {
                    for (d, v) in g.data_mut().iter_mut().zip(x.data()) {
                        *d *= sigmoid(*v);
                    }
                    g
                }
                (Layer::GlobalAvgPool, Cache::Pool(h, w)) => {
                    let scale = 1.0 / (h * w) as f64;
                    Tensor4::from_fn([g.batch(), g.channels(), h, w], |[n, c, _, _]| {
                        g.at(n, c, 0, 0) * scale
                    })
                }
                _ => return Err(Error::InvalidArgument("cache does not belong to this stack".into())),
            };
        }
        Ok(g)
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        self.layers.iter_mut().flat_map(Layer::params_mut).collect()
    }

    pub fn params(&self) -> Vec<&Param> {
        self.layers.iter().flat_map(Layer::params).collect()
    }

    pub fn zero_grad(&mut self) {
        self.params_mut().into_iter().for_each(Param::zero_grad);
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }
}

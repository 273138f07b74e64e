use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{
    load_model, save_model, take_section, BatchNorm2d, Conv2d, Layer, ModelSection, PRelu, Padding, Param, Stack,
    StackCache, Tensor4,
};

pub const BRANCH_KERNELS: [usize; 3] = [3, 5, 7];
pub const BRANCH_WIDTH: usize = 32;
pub const DENSE_LAYERS: usize = 5;
pub const DENSE_WIDTH: usize = 32;
/// Three input views (target, central, picked).
pub const INPUT_VIEWS: usize = 3;
/// Widest reach of any output pixel into the input.
pub const RECEPTIVE_RADIUS: usize = 3 + DENSE_LAYERS + 1;
pub const MODEL_ROLE: &str = "qenet";

fn conv_bn_prelu<R: Rng + ?Sized>(i: usize, o: usize, k: usize, rng: &mut R) -> Stack {
    Stack::new(vec![
        Layer::Conv(Conv2d::new(i, o, k, 1, Padding::Same, rng).expect("odd kernel")),
        Layer::BatchNorm(BatchNorm2d::new(o)),
        Layer::PRelu(PRelu::new(o)),
    ])
}

/// Multiscale feature branches, a densely connected mapping block, and a
/// linear residual head.
#[derive(Clone, Debug, PartialEq)]
pub struct QeNet {
    /// View-major: branches[3·view + scale].
    pub branches: Vec<Stack>,
    pub dense: Vec<Stack>,
    pub head: Stack,
}

pub(crate) struct QeCache {
    branches: Vec<StackCache>,
    dense: Vec<StackCache>,
    head: StackCache,
}

fn first_conv(s: &Stack) -> Option<&Conv2d> {
    match s.layers.first() {
        Some(Layer::Conv(c)) => Some(c),
        _ => None,
    }
}

impl QeNet {
    /// Random branches and mapping block; zero head so the residual starts at 0.
    pub fn new<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let branches = (0..INPUT_VIEWS)
            .flat_map(|_| BRANCH_KERNELS)
            .map(|k| conv_bn_prelu(1, BRANCH_WIDTH, k, rng))
            .collect();
        let features = INPUT_VIEWS * BRANCH_KERNELS.len() * BRANCH_WIDTH;
        let dense = (0..DENSE_LAYERS)
            .map(|i| {
                let fan_in = if i == 0 { features } else { i * DENSE_WIDTH };
                conv_bn_prelu(fan_in, DENSE_WIDTH, 3, rng)
            })
            .collect();
        let head = Stack::new(vec![Layer::Conv(
            Conv2d::zeroed(DENSE_LAYERS * DENSE_WIDTH, 1, 3, 1, Padding::Same).expect("odd kernel"),
        )]);
        let net = Self { branches, dense, head };
        net.check().expect("channel arithmetic");
        net
    }

    fn check(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Model(format!("qenet layout: {what}")));
        if self.branches.len() != INPUT_VIEWS * BRANCH_KERNELS.len() || self.dense.len() != DENSE_LAYERS {
            return bad("stack count");
        }
        for (i, b) in self.branches.iter().enumerate() {
            match first_conv(b) {
                Some(c) if c.in_channels() == 1 && c.kernel() == BRANCH_KERNELS[i % 3] && c.out_channels() == BRANCH_WIDTH => {}
                _ => return bad("branch"),
            }
        }
        let features = INPUT_VIEWS * BRANCH_KERNELS.len() * BRANCH_WIDTH;
        for (i, d) in self.dense.iter().enumerate() {
            let want = if i == 0 { features } else { i * DENSE_WIDTH };
            match first_conv(d) {
                Some(c) if c.in_channels() == want && c.out_channels() == DENSE_WIDTH => {}
                _ => return bad("dense block fan-in"),
            }
        }
        match first_conv(&self.head) {
            Some(c) if c.in_channels() == DENSE_LAYERS * DENSE_WIDTH && c.out_channels() == 1 => Ok(()),
            _ => bad("head"),
        }
    }

    fn check_input(x: &Tensor4) -> Result<()> {
        if x.channels() != INPUT_VIEWS {
            return Err(Error::DimensionMismatch(format!("qenet expects 3 views, got {}", x.channels())));
        }
        Ok(())
    }

    /// Predicted residual (N, 1, H, W) for inputs (N, 3, H, W).
    pub fn residual(&self, x: &Tensor4) -> Result<Tensor4> {
        Self::check_input(x)?;
        let views = x.split_channels(&[1; INPUT_VIEWS])?;
        let feats = self
            .branches
            .iter()
            .enumerate()
            .map(|(i, b)| b.forward(&views[i / 3]))
            .collect::<Result<Vec<_>>>()?;
        let mut outs: Vec<Tensor4> = Vec::with_capacity(DENSE_LAYERS);
        outs.push(self.dense[0].forward(&Tensor4::concat_channels(&feats.iter().collect::<Vec<_>>())?)?);
        for d in &self.dense[1..] {
            let input = Tensor4::concat_channels(&outs.iter().collect::<Vec<_>>())?;
            outs.push(d.forward(&input)?);
        }
        self.head.forward(&Tensor4::concat_channels(&outs.iter().collect::<Vec<_>>())?)
    }

    pub(crate) fn forward_train(&mut self, x: &Tensor4) -> Result<(Tensor4, QeCache)> {
        Self::check_input(x)?;
        let views = x.split_channels(&[1; INPUT_VIEWS])?;
        let mut feats = Vec::with_capacity(self.branches.len());
        let mut bc = Vec::with_capacity(self.branches.len());
        for (i, b) in self.branches.iter_mut().enumerate() {
            let (y, c) = b.forward_train(views[i / 3].clone())?;
            feats.push(y);
            bc.push(c);
        }
        let mut outs: Vec<Tensor4> = Vec::with_capacity(DENSE_LAYERS);
        let mut dc = Vec::with_capacity(DENSE_LAYERS);
        for (i, d) in self.dense.iter_mut().enumerate() {
            let input = if i == 0 {
                Tensor4::concat_channels(&feats.iter().collect::<Vec<_>>())?
            } else {
                Tensor4::concat_channels(&outs.iter().collect::<Vec<_>>())?
            };
            let (y, c) = d.forward_train(input)?;
            outs.push(y);
            dc.push(c);
        }
        let (r, hc) = self.head.forward_train(Tensor4::concat_channels(&outs.iter().collect::<Vec<_>>())?)?;
        Ok((
            r,
            QeCache {
                branches: bc,
                dense: dc,
                head: hc,
            },
        ))
    }

    pub(crate) fn backward(&mut self, cache: QeCache, grad: Tensor4) -> Result<()> {
        let g = self.head.backward(cache.head, grad)?;
        let mut grads: Vec<Tensor4> = g.split_channels(&[DENSE_WIDTH; DENSE_LAYERS])?;
        let mut dense_caches = cache.dense;
        for i in (1..DENSE_LAYERS).rev() {
            let c = dense_caches.pop().expect("one cache per layer");
            let gi = self.dense[i].backward(c, grads[i].clone())?;
            for (acc, part) in grads.iter_mut().zip(gi.split_channels(&vec![DENSE_WIDTH; i])?) {
                acc.add_assign(&part)?;
            }
        }
        let c = dense_caches.pop().expect("one cache per layer");
        let gf = self.dense[0].backward(c, grads[0].clone())?;
        let parts = gf.split_channels(&[BRANCH_WIDTH; INPUT_VIEWS * 3])?;
        for ((b, c), g) in self.branches.iter_mut().zip(cache.branches).zip(parts) {
            b.backward(c, g)?;
        }
        Ok(())
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p: Vec<&mut Param> = self.branches.iter_mut().flat_map(Stack::params_mut).collect();
        p.extend(self.dense.iter_mut().flat_map(Stack::params_mut));
        p.extend(self.head.params_mut());
        p
    }

    pub fn zero_grad(&mut self) {
        self.params_mut().into_iter().for_each(Param::zero_grad);
    }

    pub fn section(&self) -> ModelSection {
        let mut stacks = self.branches.clone();
        stacks.extend(self.dense.iter().cloned());
        stacks.push(self.head.clone());
        ModelSection::new(MODEL_ROLE, stacks)
    }

    pub fn from_section(section: ModelSection) -> Result<Self> {
        let mut stacks = section.stacks;
        let nb = INPUT_VIEWS * BRANCH_KERNELS.len();
        if stacks.len() != nb + DENSE_LAYERS + 1 {
            return Err(Error::Model(format!("qenet needs {} stacks, got {}", nb + DENSE_LAYERS + 1, stacks.len())));
        }
        let head = stacks.pop().expect("non-empty");
        let dense = stacks.split_off(nb);
        let net = Self {
            branches: stacks,
            dense,
            head,
        };
        net.check()?;
        Ok(net)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        save_model(path, &[self.section()])
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut sections = load_model(path)?;
        Self::from_section(take_section(&mut sections, MODEL_ROLE)?)
    }
}

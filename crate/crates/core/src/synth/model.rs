use std::path::Path;

use rand::Rng;

use super::features::{disparity_levels, feature_maps};
use super::warp::warp_buffer;
use super::D2GanConfig;
use crate::error::{Error, Result};
use crate::nn::{
    load_model, save_model, take_section, Conv2d, Layer, ModelSection, PRelu, Padding, Stack, StackCache, Tensor4,
};

/// Border lost by the disparity net on each side.
pub const DISPARITY_MARGIN: usize = 6;
/// Border lost by the full generator on each side (60 → 36).
pub const GENERATOR_MARGIN: usize = 12;
pub const INPUT_PATCH: usize = 60;
pub const OUTPUT_PATCH: usize = 36;
/// Warped references, disparity, and the two position maps.
pub const COLOR_INPUTS: usize = 7;

fn conv<R: Rng + ?Sized>(i: usize, o: usize, k: usize, s: usize, rng: &mut R) -> Layer {
    Layer::Conv(Conv2d::new(i, o, k, s, Padding::Valid, rng).expect("valid conv shape"))
}

fn generator_stack<R: Rng + ?Sized>(in_ch: usize, rng: &mut R) -> Stack {
    Stack::new(vec![
        conv(in_ch, 32, 7, 1, rng),
        Layer::PRelu(PRelu::new(32)),
        conv(32, 64, 5, 1, rng),
        Layer::PRelu(PRelu::new(64)),
        conv(64, 32, 3, 1, rng),
        Layer::PRelu(PRelu::new(32)),
        conv(32, 1, 1, 1, rng),
    ])
}

/// Strided scorer with a strictly positive output.
pub fn discriminator_stack<R: Rng + ?Sized>(rng: &mut R) -> Stack {
    Stack::new(vec![
        conv(1, 32, 3, 2, rng),
        Layer::PRelu(PRelu::new(32)),
        conv(32, 64, 3, 2, rng),
        Layer::PRelu(PRelu::new(64)),
        conv(64, 64, 3, 2, rng),
        Layer::PRelu(PRelu::new(64)),
        Layer::GlobalAvgPool,
        conv(64, 1, 1, 1, rng),
        Layer::Softplus,
    ])
}

/// A batch of generator inputs.
#[derive(Clone, Debug)]
pub struct GeneratorInput {
    /// Four corner references per sample, (N, 4, P, P), samples in [0, 1].
    pub refs: Tensor4,
    /// Angular offsets `p - q` of each reference.
    pub deltas: Vec<[(f64, f64); 4]>,
    /// Target position normalized to [0, 1] per axis.
    pub position: Vec<(f64, f64)>,
}

impl GeneratorInput {
    fn check(&self) -> Result<()> {
        let [n, c, h, w] = self.refs.dims();
        if c != 4 || self.deltas.len() != n || self.position.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "generator input {:?} with {} deltas, {} positions",
                self.refs.dims(),
                self.deltas.len(),
                self.position.len()
            )));
        }
        if h <= 2 * GENERATOR_MARGIN || w <= 2 * GENERATOR_MARGIN {
            return Err(Error::DimensionMismatch(format!("generator input patch {h}x{w} too small")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct GeneratorOutput {
    /// (N, 1, P - 12, P - 12)
    pub disparity: Tensor4,
    /// (N, 1, P - 24, P - 24), in [0, 1]
    pub color: Tensor4,
}

pub(crate) struct GeneratorCache {
    gd: StackCache,
    gc: StackCache,
    warp_grad: Tensor4,
}

/// Disparity net g_d and color net g_c.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorPair {
    pub g_d: Stack,
    pub g_c: Stack,
    levels: Vec<f64>,
}

impl GeneratorPair {
    pub fn new<R: Rng + ?Sized>(config: &D2GanConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let g_d = generator_stack(2 * config.levels, rng);
        let mut g_c = generator_stack(COLOR_INPUTS, rng);
        g_c.layers.push(Layer::Sigmoid);
        Ok(Self {
            g_d,
            g_c,
            levels: disparity_levels(config.levels, config.d_max),
        })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn features(&self, input: &GeneratorInput) -> Result<Tensor4> {
        input.check()?;
        let [n, _, h, w] = input.refs.dims();
        let l2 = 2 * self.levels.len();
        let mut out = Tensor4::zeros([n, l2, h, w]);
        for s in 0..n {
            let refs: Vec<&[f64]> = (0..4).map(|c| input.refs.map(s, c)).collect();
            feature_maps(&refs, h, w, &input.deltas[s], &self.levels, out.sample_mut(s));
        }
        Ok(out)
    }

    fn color_input(&self, input: &GeneratorInput, disparity: &Tensor4) -> (Tensor4, Tensor4) {
        let [n, _, h, w] = input.refs.dims();
        let [_, _, dh, dw] = disparity.dims();
        let mut warped = Tensor4::zeros([n, 4, dh, dw]);
        let mut grads = Tensor4::zeros([n, 4, dh, dw]);
        for s in 0..n {
            for c in 0..4 {
                let (v, g) = warp_buffer(
                    input.refs.map(s, c),
                    h,
                    w,
                    DISPARITY_MARGIN,
                    input.deltas[s][c],
                    disparity.map(s, 0),
                    dh,
                    dw,
                );
                warped.map_mut(s, c).copy_from_slice(&v);
                grads.map_mut(s, c).copy_from_slice(&g);
            }
        }
        let pos = Tensor4::from_fn([n, 2, dh, dw], |[s, c, _, _]| {
            if c == 0 {
                input.position[s].0
            } else {
                input.position[s].1
            }
        });
        let cat = Tensor4::concat_channels(&[&warped, disparity, &pos]).expect("matching dims");
        (cat, grads)
    }

    pub fn forward(&self, input: &GeneratorInput) -> Result<GeneratorOutput> {
        let features = self.features(input)?;
        let disparity = self.g_d.forward(&features)?;
        let (cin, _) = self.color_input(input, &disparity);
        let color = self.g_c.forward(&cin)?;
        Ok(GeneratorOutput { disparity, color })
    }

    pub(crate) fn forward_train(&mut self, input: &GeneratorInput) -> Result<(GeneratorOutput, GeneratorCache)> {
        let features = self.features(input)?;
        let (disparity, gd) = self.g_d.forward_train(features)?;
        let (cin, warp_grad) = self.color_input(input, &disparity);
        let (color, gc) = self.g_c.forward_train(cin)?;
        Ok((GeneratorOutput { disparity, color }, GeneratorCache { gd, gc, warp_grad }))
    }

    /// Accumulates parameter gradients of both nets given ∂loss/∂color.
    pub(crate) fn backward(&mut self, cache: GeneratorCache, grad_color: Tensor4) -> Result<()> {
        let grad_in = self.g_c.backward(cache.gc, grad_color)?;
        let parts = grad_in.split_channels(&[4, 1, 2])?;
        let (grad_warped, mut grad_d) = (&parts[0], parts[1].clone());
        for s in 0..grad_d.batch() {
            let gd = grad_d.map_mut(s, 0);
            for c in 0..4 {
                for ((acc, g), dw) in gd.iter_mut().zip(grad_warped.map(s, c)).zip(cache.warp_grad.map(s, c)) {
                    *acc += g * dw;
                }
            }
        }
        self.g_d.backward(cache.gd, grad_d)?;
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        self.g_d.zero_grad();
        self.g_c.zero_grad();
    }

    /// Worst relative error between backpropagated and central-difference
    /// parameter gradients of Σ w⊙color over both nets, through the warp.
    pub fn gradient_check(&self, input: &GeneratorInput, probes: usize, seed: u64) -> Result<f64> {
        use crate::nn::gradcheck::{probe_indices, relative_error, FD_STEP};
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut net = self.clone();
        net.zero_grad();
        let (out, cache) = net.forward_train(input)?;
        let weights: Vec<f64> = (0..out.color.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut grad = out.color;
        grad.data_mut().copy_from_slice(&weights);
        net.backward(cache, grad)?;
        fn stack(g: &mut GeneratorPair, which: usize) -> &mut Stack {
            if which == 0 {
                &mut g.g_d
            } else {
                &mut g.g_c
            }
        }
        let loss = |g: &GeneratorPair| -> Result<f64> {
            let y = g.forward(input)?.color;
            Ok(y.data().iter().zip(&weights).map(|(a, b)| a * b).sum())
        };
        let mut probe = self.clone();
        let mut worst: f64 = 0.0;
        for which in 0..2 {
            let analytic: Vec<Vec<f64>> = if which == 0 { net.g_d.params() } else { net.g_c.params() }
                .iter()
                .map(|p| p.grad.clone())
                .collect();
            for (pi, grads) in analytic.iter().enumerate() {
                for i in probe_indices(&mut rng, grads.len(), probes) {
                    let keep = stack(&mut probe, which).params()[pi].value[i];
                    stack(&mut probe, which).params_mut()[pi].value[i] = keep + FD_STEP;
                    let up = loss(&probe)?;
                    stack(&mut probe, which).params_mut()[pi].value[i] = keep - FD_STEP;
                    let down = loss(&probe)?;
                    stack(&mut probe, which).params_mut()[pi].value[i] = keep;
                    worst = worst.max(relative_error(grads[i], (up - down) / (2.0 * FD_STEP)));
                }
            }
        }
        Ok(worst)
    }

    pub fn sections(&self) -> Vec<ModelSection> {
        vec![
            ModelSection::new("g_d", vec![self.g_d.clone()]),
            ModelSection::new("g_c", vec![self.g_c.clone()]),
        ]
    }

    pub fn from_sections(sections: &mut Vec<ModelSection>, config: &D2GanConfig) -> Result<Self> {
        config.validate()?;
        let g_d = single_stack(take_section(sections, "g_d")?)?;
        let g_c = single_stack(take_section(sections, "g_c")?)?;
        let first_in = |s: &Stack| match s.layers.first() {
            Some(Layer::Conv(c)) => Some(c.in_channels()),
            _ => None,
        };
        if first_in(&g_d) != Some(2 * config.levels) || first_in(&g_c) != Some(COLOR_INPUTS) {
            return Err(Error::Model(format!(
                "generator does not match {} disparity levels",
                config.levels
            )));
        }
        Ok(Self {
            g_d,
            g_c,
            levels: disparity_levels(config.levels, config.d_max),
        })
    }
}

fn single_stack(mut section: ModelSection) -> Result<Stack> {
    if section.stacks.len() != 1 {
        return Err(Error::Model(format!("section {} must hold one stack", section.role)));
    }
    Ok(section.stacks.remove(0))
}

/// The two positive-output discriminators.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscriminatorPair {
    pub d1: Stack,
    pub d2: Stack,
}

impl DiscriminatorPair {
    pub fn new<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self {
            d1: discriminator_stack(rng),
            d2: discriminator_stack(rng),
        }
    }

    pub fn sections(&self) -> Vec<ModelSection> {
        vec![
            ModelSection::new("D1", vec![self.d1.clone()]),
            ModelSection::new("D2", vec![self.d2.clone()]),
        ]
    }

    pub fn from_sections(sections: &mut Vec<ModelSection>) -> Result<Self> {
        Ok(Self {
            d1: single_stack(take_section(sections, "D1")?)?,
            d2: single_stack(take_section(sections, "D2")?)?,
        })
    }
}

/// Everything produced by adversarial training.
#[derive(Clone, Debug, PartialEq)]
pub struct D2GanModel {
    pub generator: GeneratorPair,
    pub discriminators: DiscriminatorPair,
}

impl D2GanModel {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut sections = self.generator.sections();
        sections.extend(self.discriminators.sections());
        save_model(path, &sections)
    }

    pub fn load(path: &Path, config: &D2GanConfig) -> Result<Self> {
        let mut sections = load_model(path)?;
        Ok(Self {
            generator: GeneratorPair::from_sections(&mut sections, config)?,
            discriminators: DiscriminatorPair::from_sections(&mut sections)?,
        })
    }
}

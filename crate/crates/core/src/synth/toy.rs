//! Scalar two-mode target trained through the same dual-discriminator loss
//! plumbing as the image synthesizer.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::loss::Critics;
use super::train::LogRow;
use super::D2GanConfig;
use crate::error::{Error, Result};
use crate::nn::{Adam, AdamConfig, Conv2d, Layer, PRelu, Padding, Stack, Tensor4};

#[derive(Clone, Debug, PartialEq)]
pub struct ToyConfig {
    pub modes: [f64; 2],
    pub mode_std: f64,
    pub noise_dim: usize,
    pub hidden: usize,
    pub batch_size: usize,
    pub steps: usize,
    pub lr: f64,
    pub gan: D2GanConfig,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            modes: [-2.0, 2.0],
            mode_std: 0.1,
            noise_dim: 4,
            hidden: 32,
            batch_size: 64,
            steps: 3000,
            lr: 1e-3,
            gan: D2GanConfig::default(),
        }
    }
}

fn mlp<R: Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> Vec<Layer> {
    let dense = |i, o, rng: &mut R| Layer::Conv(Conv2d::new(i, o, 1, 1, Padding::Valid, rng).expect("1x1 conv"));
    vec![
        dense(input, hidden, rng),
        Layer::PRelu(PRelu::new(hidden)),
        dense(hidden, hidden, rng),
        Layer::PRelu(PRelu::new(hidden)),
        dense(hidden, 1, rng),
    ]
}

pub struct ToyOutcome {
    pub generator: Stack,
    pub log: Vec<LogRow>,
}

impl ToyOutcome {
    pub fn sample(&self, count: usize, noise_dim: usize, seed: u64) -> Result<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = noise(&mut rng, count, noise_dim);
        Ok(self.generator.forward(&z)?.into_vec())
    }
}

fn noise<R: Rng + ?Sized>(rng: &mut R, n: usize, dim: usize) -> Tensor4 {
    Tensor4::from_fn([n, dim, 1, 1], |_| StandardNormal.sample(rng))
}

/// Fraction of `samples` within `radius` of `center`.
pub fn mass_near(samples: &[f64], center: f64, radius: f64) -> f64 {
    samples.iter().filter(|s| (*s - center).abs() <= radius).count() as f64 / samples.len().max(1) as f64
}

pub fn train_toy(config: &ToyConfig, seed: u64) -> Result<ToyOutcome> {
    config.gan.validate()?;
    if config.batch_size == 0 || config.noise_dim == 0 || config.hidden == 0 {
        return Err(Error::InvalidArgument("toy sizes must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut generator = Stack::new(mlp(config.noise_dim, config.hidden, &mut rng));
    let critic = |rng: &mut ChaCha8Rng| {
        let mut l = mlp(1, config.hidden, rng);
        l.push(Layer::Softplus);
        Stack::new(l)
    };
    let mut d1 = critic(&mut rng);
    let mut d2 = critic(&mut rng);
    let adam = AdamConfig::with_lr(config.lr);
    let (mut opt_g, mut opt1, mut opt2) = (Adam::new(adam)?, Adam::new(adam)?, Adam::new(adam)?);
    let n = config.batch_size;
    let mut log = Vec::with_capacity(config.steps);
    for step in 1..=config.steps {
        let real = Tensor4::from_fn([n, 1, 1, 1], |_| {
            let m = config.modes[rng.random_range(0..2)];
            let e: f64 = StandardNormal.sample(&mut rng);
            m + config.mode_std * e
        });
        let z = noise(&mut rng, n, config.noise_dim);
        generator.zero_grad();
        let (fake, cache) = generator.forward_train(z)?;
        let mut critics = Critics {
            d1: &mut d1,
            d2: &mut d2,
            opt1: &mut opt1,
            opt2: &mut opt2,
        };
        let (l_d1, l_d2) = critics.step(&real, &fake, &config.gan)?;
        let (l_g_adv, grad) = critics.generator_grad(&fake, &config.gan)?;
        generator.backward(cache, grad)?;
        opt_g.step(&mut generator.params_mut())?;
        log.push(LogRow {
            step,
            l_d1,
            l_d2,
            l_g_adv,
            l_mse: 0.0,
            val_psnr: None,
        });
    }
    Ok(ToyOutcome { generator, log })
}

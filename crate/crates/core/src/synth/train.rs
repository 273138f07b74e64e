use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::loss::Critics;
use super::model::{D2GanModel, DiscriminatorPair, GeneratorInput, GeneratorPair, GENERATOR_MARGIN};
use super::D2GanConfig;
use crate::error::{Error, Result};
use crate::lf::{AngularPos, LightField, Plane};
use crate::nn::{mse_loss, Adam, AdamConfig, Param, Tensor4};
use crate::structure::quadrants;

/// One training example: four corner-reference patches and the target patch.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthSample {
    /// Input patch side.
    pub patch: usize,
    /// 4 x patch x patch reference samples in [0, 1].
    pub refs: Vec<f64>,
    pub deltas: [(f64, f64); 4],
    pub position: (f64, f64),
    /// (patch − 24)² target samples in [0, 1].
    pub target: Vec<f64>,
}

impl SynthSample {
    pub fn output_side(&self) -> usize {
        self.patch - 2 * GENERATOR_MARGIN
    }
}

/// Normalized angular position of `q` on a `rows`x`cols` grid.
pub fn normalized_position(q: AngularPos, grid: (usize, usize)) -> (f64, f64) {
    (
        q.u as f64 / (grid.0 - 1).max(1) as f64,
        q.v as f64 / (grid.1 - 1).max(1) as f64,
    )
}

/// Edge-replicated `patch`-sized input windows of four references, laid out so
/// that the generator output lands at (`row`, `col`).
pub(crate) fn crop_refs(refs: &[&Plane<f64>], row: usize, col: usize, patch: usize, out: &mut Vec<f64>) {
    let m = GENERATOR_MARGIN as isize;
    for r in refs {
        out.extend_from_slice(r.crop_clamped(row as isize - m, col as isize - m, patch, patch).data());
    }
}

pub(crate) fn batch_input(samples: &[&SynthSample]) -> Result<(GeneratorInput, Tensor4)> {
    let patch = samples[0].patch;
    if samples.iter().any(|s| s.patch != patch) {
        return Err(Error::DimensionMismatch("mixed patch sizes in batch".into()));
    }
    let out = patch - 2 * GENERATOR_MARGIN;
    let n = samples.len();
    let refs = Tensor4::new([n, 4, patch, patch], samples.iter().flat_map(|s| s.refs.iter().copied()).collect())?;
    let target = Tensor4::new([n, 1, out, out], samples.iter().flat_map(|s| s.target.iter().copied()).collect())?;
    Ok((
        GeneratorInput {
            refs,
            deltas: samples.iter().map(|s| s.deltas).collect(),
            position: samples.iter().map(|s| s.position).collect(),
        },
        target,
    ))
}

/// Random patches from non-corner views of each quadrant.
pub fn synthesis_dataset(fields: &[LightField], count: usize, patch: usize, seed: u64) -> Result<Vec<SynthSample>> {
    if fields.is_empty() {
        return Err(Error::InvalidArgument("no light fields to sample".into()));
    }
    if patch <= 2 * GENERATOR_MARGIN {
        return Err(Error::InvalidArgument(format!("patch {patch} too small")));
    }
    let out = patch - 2 * GENERATOR_MARGIN;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(count);
    for _ in 0..count {
        let lf = &fields[rng.random_range(0..fields.len())];
        let (w, h) = lf.view_dims();
        if w < out || h < out {
            return Err(Error::InvalidArgument(format!("views {w}x{h} smaller than output patch {out}")));
        }
        let grid = (lf.rows(), lf.cols());
        let quads = quadrants(grid.0, grid.1)?;
        let quad = quads[rng.random_range(0..4)];
        let corners = quad.corners();
        let targets: Vec<AngularPos> = (quad.row0..quad.row0 + quad.rows)
            .flat_map(|u| (quad.col0..quad.col0 + quad.cols).map(move |v| AngularPos::new(u, v)))
            .filter(|p| !corners.contains(p))
            .collect();
        let q = targets[rng.random_range(0..targets.len())];
        let row = rng.random_range(0..=h - out);
        let col = rng.random_range(0..=w - out);
        let planes: Vec<Plane<f64>> = corners.iter().map(|&p| lf.view(p).y.to_unit()).collect();
        let mut refs = Vec::with_capacity(4 * patch * patch);
        crop_refs(&planes.iter().collect::<Vec<_>>(), row, col, patch, &mut refs);
        let target = lf.view(q).y.to_unit().crop_clamped(row as isize, col as isize, out, out).into_vec();
        samples.push(SynthSample {
            patch,
            refs,
            deltas: corners.map(|p| p.delta(q)),
            position: normalized_position(q, grid),
            target,
        });
    }
    Ok(samples)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainOptions {
    pub steps: usize,
    /// Validation PSNR is logged every this many steps (and at the last step).
    pub val_every: usize,
    pub seed: u64,
    /// Cosine-decays the generator learning rate down to this fraction of its start.
    pub final_lr_fraction: f64,
    /// Return the generator with the best validation PSNR instead of the last one.
    pub keep_best: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            steps: 1000,
            val_every: 100,
            seed: 0,
            final_lr_fraction: 1.0,
            keep_best: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogRow {
    pub step: usize,
    pub l_d1: f64,
    pub l_d2: f64,
    pub l_g_adv: f64,
    pub l_mse: f64,
    pub val_psnr: Option<f64>,
}

pub fn write_training_log<W: Write>(rows: &[LogRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["step", "L_D1", "L_D2", "L_G_adv", "L_mse", "val_psnr"])?;
    for r in rows {
        w.write_record([
            r.step.to_string(),
            r.l_d1.to_string(),
            r.l_d2.to_string(),
            r.l_g_adv.to_string(),
            r.l_mse.to_string(),
            r.val_psnr.map(|p| p.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// PSNR (unit peak) of the generator over `samples`.
pub fn validation_psnr(generator: &GeneratorPair, samples: &[SynthSample]) -> Result<f64> {
    let mut se = 0.0;
    let mut count = 0usize;
    for chunk in samples.chunks(8) {
        let refs: Vec<&SynthSample> = chunk.iter().collect();
        let (input, target) = batch_input(&refs)?;
        let out = generator.forward(&input)?;
        se += out.color.data().iter().zip(target.data()).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        count += target.len();
    }
    let mse = se / count.max(1) as f64;
    Ok(if mse == 0.0 { f64::INFINITY } else { -10.0 * mse.log10() })
}

pub struct TrainOutcome {
    pub model: D2GanModel,
    pub log: Vec<LogRow>,
}

fn generator_params(g: &mut GeneratorPair) -> Vec<&mut Param> {
    let mut p = g.g_d.params_mut();
    p.extend(g.g_c.params_mut());
    p
}

/// Alternating D1/D2 ascent then generator descent on MSE + γ·L_G_adv.
pub fn train_d2gan(train: &[SynthSample], val: &[SynthSample], config: &D2GanConfig, opts: &TrainOptions) -> Result<TrainOutcome> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut generator = GeneratorPair::new(config, &mut rng)?;
    let mut critics = DiscriminatorPair::new(&mut rng);
    let adam = AdamConfig::with_lr(config.lr);
    let (mut opt_g, mut opt1, mut opt2) = (Adam::new(adam)?, Adam::new(adam)?, Adam::new(adam)?);
    if !(opts.final_lr_fraction > 0.0 && opts.final_lr_fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!("final lr fraction {}", opts.final_lr_fraction)));
    }
    let mut log = Vec::with_capacity(opts.steps);
    let mut best: Option<(f64, GeneratorPair)> = None;
    for step in 1..=opts.steps {
        let t = (step - 1) as f64 / opts.steps.max(2).saturating_sub(1) as f64;
        let f = opts.final_lr_fraction;
        opt_g.set_lr(config.lr * (f + (1.0 - f) * 0.5 * (1.0 + (std::f64::consts::PI * t).cos())));
        let batch: Vec<&SynthSample> = (0..config.batch_size)
            .map(|_| &train[rng.random_range(0..train.len())])
            .collect();
        let (input, target) = batch_input(&batch)?;
        generator.zero_grad();
        let (out, cache) = generator.forward_train(&input)?;
        let (l_mse, mut grad) = mse_loss(&out.color, &target)?;
        if !l_mse.is_finite() {
            return Err(Error::TrainingDiverged(format!("non-finite MSE at step {step}")));
        }
        let mut c = Critics {
            d1: &mut critics.d1,
            d2: &mut critics.d2,
            opt1: &mut opt1,
            opt2: &mut opt2,
        };
        let (l_d1, l_d2) = c.step(&target, &out.color, config)?;
        let (l_g_adv, adv) = c.generator_grad(&out.color, config)?;
        if config.gamma > 0.0 {
            for (g, a) in grad.data_mut().iter_mut().zip(adv.data()) {
                *g += config.gamma * a;
            }
        }
        generator.backward(cache, grad)?;
        opt_g.step(&mut generator_params(&mut generator))?;
        let val_psnr = if !val.is_empty() && (step % opts.val_every.max(1) == 0 || step == opts.steps) {
            Some(validation_psnr(&generator, val)?)
        } else {
            None
        };
        if let Some(p) = val_psnr {
            log::info!("d2gan step {step}: mse {l_mse:.6} val psnr {p:.2} dB");
            if opts.keep_best && best.as_ref().is_none_or(|(b, _)| p > *b) {
                best = Some((p, generator.clone()));
            }
        }
        log.push(LogRow {
            step,
            l_d1,
            l_d2,
            l_g_adv,
            l_mse,
            val_psnr,
        });
    }
    if let Some((_, g)) = best {
        generator = g;
    }
    Ok(TrainOutcome {
        model: D2GanModel {
            generator,
            discriminators: critics,
        },
        log,
    })
}

//! Decoder-side quality enhancement of non-reference views: a reference view
//! selector plus a residual network fed with the target, the central view,
//! and the selected view.

mod qenet;
mod rvs;

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lf::{AngularPos, LightField, Plane};
use crate::metrics::psnr_plane;
use crate::nn::{mse_loss, Adam, AdamConfig, Tensor4};
use crate::structure::{reference_layout, PseudoVideoSequence, Role};

pub use qenet::{QeNet, BRANCH_KERNELS, DENSE_LAYERS, DENSE_WIDTH, MODEL_ROLE, RECEPTIVE_RADIUS};
pub use rvs::{
    blockiness, laplacian_variance, select_reference, select_with_scorer, Candidate, QualityScorer, RvsPolicy,
    SharpnessScorer,
};

/// Side of the core region computed per inference window.
const TILE: usize = 96;

fn window_spans(len: usize) -> Vec<(usize, usize, usize, usize)> {
    let margin = RECEPTIVE_RADIUS + 1;
    (0..len)
        .step_by(TILE)
        .map(|s| {
            let e = (s + TILE).min(len);
            (s, e, s.saturating_sub(margin), (e + margin).min(len))
        })
        .collect()
}

/// Residual-corrected target luma, clamped to 8 bits.
pub fn enhance_view(target: &Plane<u8>, central: &Plane<u8>, picked: &Plane<u8>, model: &QeNet) -> Result<Plane<u8>> {
    if central.dims() != target.dims() || picked.dims() != target.dims() {
        return Err(Error::DimensionMismatch("enhancement inputs differ in size".into()));
    }
    let (w, h) = target.dims();
    let mut out = target.to_unit();
    // Windows keep a margin wider than the receptive field and never cross the
    // view border, so results equal a whole-view pass.
    for (r0, r1, wr0, wr1) in window_spans(h) {
        for (c0, c1, wc0, wc1) in window_spans(w) {
            let (ww, wh) = (wc1 - wc0, wr1 - wr0);
            let mut data = Vec::with_capacity(3 * ww * wh);
            for p in [target, central, picked] {
                for r in wr0..wr1 {
                    data.extend(p.row(r)[wc0..wc1].iter().map(|&v| v as f64 / 255.0));
                }
            }
            let res = model.residual(&Tensor4::new([1, 3, wh, ww], data)?)?;
            for r in r0..r1 {
                for c in c0..c1 {
                    let v = out.at(r, c) + res.at(0, 0, r - wr0, c - wc0);
                    out.set(r, c, v.clamp(0.0, 1.0));
                }
            }
        }
    }
    Ok(out.to_u8())
}

/// The 15 non-central reference views of `lf` as selection candidates.
pub fn reference_candidates<'a>(lf: &'a LightField, seq: &PseudoVideoSequence) -> Result<(AngularPos, Vec<Candidate<'a>>)> {
    let layout = reference_layout(lf.rows(), lf.cols())?;
    let cands = layout
        .positions
        .iter()
        .filter(|&&p| p != layout.central)
        .map(|&p| {
            let poc = seq.poc_of(p).ok_or_else(|| Error::InvalidArgument(format!("{p} not in sequence")))?;
            Ok(Candidate {
                pos: p,
                tl: seq.entries()[poc as usize].tl.get(),
                luma: &lf.view(p).y,
            })
        })
        .collect::<Result<_>>()?;
    Ok((layout.central, cands))
}

/// Enhances every non-reference view; reference views and all chroma pass
/// through unchanged.
pub fn enhance_decoded_lf(decoded: &LightField, seq: &PseudoVideoSequence, model: &QeNet, policy: RvsPolicy) -> Result<LightField> {
    if seq.grid() != (decoded.rows(), decoded.cols()) {
        return Err(Error::DimensionMismatch("sequence grid differs from light field".into()));
    }
    let (central, cands) = reference_candidates(decoded, seq)?;
    let mut out = decoded.clone();
    for e in seq.entries().iter().filter(|e| e.role == Role::NonReference) {
        let picked = select_reference(e.pos, &cands, policy)?;
        let y = enhance_view(&decoded.view(e.pos).y, &decoded.view(central).y, &decoded.view(picked).y, model)?;
        out.view_mut(e.pos).y = y;
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QualityRow {
    pub poc: u32,
    pub pos: AngularPos,
    pub psnr_before: f64,
    pub psnr_after: f64,
}

pub fn quality_report(original: &LightField, before: &LightField, after: &LightField, seq: &PseudoVideoSequence) -> Result<Vec<QualityRow>> {
    seq.entries()
        .iter()
        .map(|e| {
            Ok(QualityRow {
                poc: e.poc,
                pos: e.pos,
                psnr_before: psnr_plane(&before.view(e.pos).y, &original.view(e.pos).y)?,
                psnr_after: psnr_plane(&after.view(e.pos).y, &original.view(e.pos).y)?,
            })
        })
        .collect()
}

pub fn write_quality_report<W: Write>(rows: &[QualityRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["poc", "u", "v", "psnr_before", "psnr_after"])?;
    for r in rows {
        w.write_record([
            r.poc.to_string(),
            r.pos.u.to_string(),
            r.pos.v.to_string(),
            r.psnr_before.to_string(),
            r.psnr_after.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Degraded (target, central, picked) patches with the original target.
#[derive(Clone, Debug, PartialEq)]
pub struct QeSample {
    pub patch: usize,
    /// 3 x patch x patch samples in [0, 1].
    pub inputs: Vec<f64>,
    pub original: Vec<f64>,
}

/// Random patches from the non-reference views of decoded light fields paired
/// with their originals.
pub fn qe_dataset(
    pairs: &[(&LightField, &LightField)],
    seq: &PseudoVideoSequence,
    policy: RvsPolicy,
    patch: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<QeSample>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let targets: Vec<AngularPos> = seq.entries().iter().filter(|e| e.role == Role::NonReference).map(|e| e.pos).collect();
    if pairs.is_empty() || targets.is_empty() {
        return Err(Error::InvalidArgument("no non-reference views to sample".into()));
    }
    let mut picks = Vec::with_capacity(pairs.len());
    for (decoded, original) in pairs {
        if decoded.view_dims() != original.view_dims() || (decoded.rows(), decoded.cols()) != seq.grid() {
            return Err(Error::DimensionMismatch("decoded/original light fields differ".into()));
        }
        let (w, h) = decoded.view_dims();
        if w < patch || h < patch {
            return Err(Error::InvalidArgument(format!("patch {patch} exceeds view {w}x{h}")));
        }
        let (central, cands) = reference_candidates(decoded, seq)?;
        let chosen = targets
            .iter()
            .map(|&t| select_reference(t, &cands, policy))
            .collect::<Result<Vec<_>>>()?;
        picks.push((central, chosen));
    }
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let i = rng.random_range(0..pairs.len());
        let (decoded, original) = pairs[i];
        let t = rng.random_range(0..targets.len());
        let (central, ref picked) = picks[i];
        let (w, h) = decoded.view_dims();
        let r = rng.random_range(0..=h - patch) as isize;
        let c = rng.random_range(0..=w - patch) as isize;
        let crop = |p: &Plane<u8>| p.crop_clamped(r, c, patch, patch).to_unit().into_vec();
        let mut inputs = crop(&decoded.view(targets[t]).y);
        inputs.extend(crop(&decoded.view(central).y));
        inputs.extend(crop(&decoded.view(picked[t]).y));
        out.push(QeSample {
            patch,
            inputs,
            original: crop(&original.view(targets[t]).y),
        });
    }
    Ok(out)
}

fn batch(samples: &[&QeSample]) -> Result<(Tensor4, Tensor4, Tensor4)> {
    let p = samples[0].patch;
    if samples.iter().any(|s| s.patch != p) {
        return Err(Error::DimensionMismatch("mixed patch sizes".into()));
    }
    let n = samples.len();
    let x = Tensor4::new([n, 3, p, p], samples.iter().flat_map(|s| s.inputs.iter().copied()).collect())?;
    let target = Tensor4::new([n, 1, p, p], samples.iter().flat_map(|s| s.inputs[..p * p].iter().copied()).collect())?;
    let orig = Tensor4::new([n, 1, p, p], samples.iter().flat_map(|s| s.original.iter().copied()).collect())?;
    Ok((x, target, orig))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QeTrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub steps: usize,
    pub val_every: usize,
    pub seed: u64,
}

impl Default for QeTrainConfig {
    fn default() -> Self {
        Self {
            lr: 2e-4,
            batch_size: 128,
            steps: 1000,
            val_every: 100,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QeLogRow {
    pub step: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

pub fn write_qe_log<W: Write>(rows: &[QeLogRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["step", "train_loss", "val_loss"])?;
    for r in rows {
        w.write_record([
            r.step.to_string(),
            r.train_loss.to_string(),
            r.val_loss.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Mean squared error of the unenhanced and enhanced targets over `samples`.
pub fn qe_validation(model: &QeNet, samples: &[QeSample]) -> Result<(f64, f64)> {
    let (mut before, mut after, mut n) = (0.0, 0.0, 0usize);
    for chunk in samples.chunks(16) {
        let refs: Vec<&QeSample> = chunk.iter().collect();
        let (x, target, orig) = batch(&refs)?;
        let res = model.residual(&x)?;
        for ((t, r), o) in target.data().iter().zip(res.data()).zip(orig.data()) {
            before += (t - o).powi(2);
            after += ((t + r).clamp(0.0, 1.0) - o).powi(2);
        }
        n += orig.len();
    }
    Ok((before / n.max(1) as f64, after / n.max(1) as f64))
}

pub struct QeOutcome {
    pub model: QeNet,
    pub log: Vec<QeLogRow>,
}

/// Minimizes ‖original − (target + residual)‖² with Adam.
pub fn train_qenet(train: &[QeSample], val: &[QeSample], config: &QeTrainConfig) -> Result<QeOutcome> {
    if train.is_empty() || config.batch_size == 0 {
        return Err(Error::InvalidArgument("empty training set or batch".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = QeNet::new(&mut rng);
    train_qenet_from(&mut model, train, val, config, &mut rng)
        .map(|log| QeOutcome { model, log })
}

fn train_qenet_from(
    model: &mut QeNet,
    train: &[QeSample],
    val: &[QeSample],
    config: &QeTrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<QeLogRow>> {
    let mut opt = Adam::new(AdamConfig::with_lr(config.lr))?;
    let mut log = Vec::with_capacity(config.steps);
    for step in 1..=config.steps {
        let picked: Vec<&QeSample> = (0..config.batch_size).map(|_| &train[rng.random_range(0..train.len())]).collect();
        let (x, target, orig) = batch(&picked)?;
        model.zero_grad();
        let (res, cache) = model.forward_train(&x)?;
        let mut pred = target;
        pred.add_assign(&res)?;
        let (loss, grad) = mse_loss(&pred, &orig)?;
        if !loss.is_finite() {
            return Err(Error::TrainingDiverged(format!("non-finite loss at step {step}")));
        }
        model.backward(cache, grad)?;
        opt.step(&mut model.params_mut())?;
        let val_loss = if !val.is_empty() && (step % config.val_every.max(1) == 0 || step == config.steps) {
            let v = qe_validation(model, val)?.1;
            log::info!("qenet step {step}: train {loss:.6} val {v:.6}");
            Some(v)
        } else {
            None
        };
        log.push(QeLogRow {
            step,
            train_loss: loss,
            val_loss,
        });
    }
    Ok(log)
}

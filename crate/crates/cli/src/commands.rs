use std::fs::File;
use std::path::Path;

use anyhow::{bail, Context};
use lfcodec::codec::{external_encode, CodecConfig, CodecId, LfBitstream};
use lfcodec::enhance::{qe_dataset, qe_validation, quality_report, train_qenet, write_qe_log, write_quality_report, QeNet, QeTrainConfig};
use lfcodec::lf::{load_light_field, save_light_field, ViewFormat};
use lfcodec::metrics::{bd_quality, bd_rate, fluctuation, mse, psnr_from_mse, psnr_plane, ssim, QualityMetric, RdCurve};
use lfcodec::pipeline::{decode_light_field, encode_light_field, rd_point, DecodeOutcome, DropPolicy, MissingFill};
use lfcodec::rdo::{write_decisions, RdoConfig};
use lfcodec::structure::build_sequence;
use lfcodec::synth::{synthesis_dataset, train_d2gan, write_training_log, D2GanConfig, GeneratorPair, TrainOptions, INPUT_PATCH};
use lfcodec::synthetic::{occlusion_scene, textured_plane};
use lfcodec::LightField;

use crate::config::PipelineConfig;
use crate::{EvalArgs, GenArgs, PolicyArg, SceneKind, TrainQeArgs, TrainSynthArgs};

pub const STREAM_FILE: &str = "stream.lfd2";

fn load_synth(config: &PipelineConfig) -> anyhow::Result<Option<GeneratorPair>> {
    config
        .synth_model
        .as_deref()
        .map(|p| GeneratorPair::load(p, &D2GanConfig::default()).with_context(|| format!("loading {}", p.display())))
        .transpose()
}

fn load_qe(config: &PipelineConfig) -> anyhow::Result<Option<QeNet>> {
    if config.no_enhance {
        return Ok(None);
    }
    let path = config
        .qe_model
        .as_deref()
        .context("enhancement needs --qe-model (or pass --no-enhance)")?;
    Ok(Some(QeNet::load(path).with_context(|| format!("loading {}", path.display()))?))
}

fn encode_with(
    lf: &LightField,
    config: &PipelineConfig,
    qp: u8,
    policy: PolicyArg,
    synth: Option<&GeneratorPair>,
) -> anyhow::Result<(LfBitstream, Vec<lfcodec::rdo::RdoDecision>)> {
    let codec = CodecConfig::with_qp(qp);
    if config.codec == CodecId::External {
        if policy != PolicyArg::KeepAll {
            log::warn!("external codec codes every view; drop policy ignored");
        }
        let (seq, _) = build_sequence(lf.rows(), lf.cols())?;
        let cmd = config.ext_cmd.as_deref().context("--codec external needs --ext-cmd")?;
        return Ok((external_encode(lf, &seq, &codec, cmd)?, Vec::new()));
    }
    let drop = match policy {
        PolicyArg::KeepAll => DropPolicy::KeepAll,
        PolicyArg::DropTl4 => DropPolicy::FromLayer(4),
        PolicyArg::Rdo => {
            let synth = synth.context("--policy rdo needs --synth-model")?;
            DropPolicy::Rdo(synth, RdoConfig { lambda: config.lambda })
        }
    };
    let out = encode_light_field(lf, &codec, drop)?;
    Ok((out.stream, out.decisions))
}

fn decode_with(stream: &LfBitstream, config: &PipelineConfig, synth: Option<&GeneratorPair>, qe: Option<&QeNet>) -> anyhow::Result<DecodeOutcome> {
    let fill = match synth {
        Some(s) => MissingFill::Synthesize(s),
        None => MissingFill::NearestCopy,
    };
    let policy = config.rvs_policy()?;
    Ok(decode_light_field(stream, &fill, qe.map(|m| (m, policy)))?)
}

pub fn encode(config: &PipelineConfig, policy: PolicyArg) -> anyhow::Result<()> {
    let lf = load_light_field(config.manifest()?)?;
    let synth = load_synth(config)?;
    let (stream, decisions) = encode_with(&lf, config, config.qp, policy, synth.as_ref())?;
    std::fs::write(config.out.join(STREAM_FILE), stream.to_bytes()?)?;
    if policy == PolicyArg::Rdo && config.codec == CodecId::Builtin {
        let (seq, _) = build_sequence(lf.rows(), lf.cols())?;
        write_decisions(&decisions, &seq, File::create(config.out.join("rdo.csv"))?)?;
    }
    println!("views coded {}/{}", stream.records.len(), lf.len());
    println!("bpp {:.6}", stream.bpp());
    Ok(())
}

pub fn decode(config: &PipelineConfig, stream_path: &Path) -> anyhow::Result<()> {
    let bytes = std::fs::read(stream_path).with_context(|| format!("reading {}", stream_path.display()))?;
    let stream = LfBitstream::from_bytes(&bytes)?;
    let synth = load_synth(config)?;
    if synth.is_none() && stream.records.len() < stream.header.grid_rows as usize * stream.header.grid_cols as usize {
        log::warn!("no synthesis model; dropped views are copied from their nearest neighbor");
    }
    let qe = load_qe(config)?;
    let out = decode_with(&stream, config, synth.as_ref(), qe.as_ref())?;
    save_light_field(&out.output, &config.out.join("views"), ViewFormat::Yuv)?;
    let mut w = csv::Writer::from_path(config.out.join("views.csv"))?;
    w.write_record(["poc", "u", "v", "tl", "source"])?;
    for e in out.seq.entries() {
        let source = if !out.missing.contains(&e.pos) {
            "decoded"
        } else if synth.is_some() {
            "synthesized"
        } else {
            "copied"
        };
        w.write_record([e.poc.to_string(), e.pos.u.to_string(), e.pos.v.to_string(), e.tl.get().to_string(), source.into()])?;
    }
    w.flush()?;
    println!("decoded {} views, filled {}", out.seq.len() - out.missing.len(), out.missing.len());
    if let Some(manifest) = &config.manifest {
        let original = load_light_field(manifest)?;
        let rows = quality_report(&original, &out.assembled, &out.output, &out.seq)?;
        write_quality_report(&rows, File::create(config.out.join("quality.csv"))?)?;
        for (label, lf) in [("before", &out.assembled), ("after", &out.output)] {
            let s = fluctuation(lf, &original, &out.seq)?;
            println!("non-reference psnr {label} enhancement: mean {:.3} dB, std {:.3} dB, min {:.3} dB", s.mean, s.std, s.min);
        }
    }
    Ok(())
}

pub fn train_synth(config: &PipelineConfig, args: &TrainSynthArgs) -> anyhow::Result<()> {
    let fields = args.train.iter().map(|p| load_light_field(p)).collect::<lfcodec::Result<Vec<_>>>()?;
    let train = synthesis_dataset(&fields, args.samples, INPUT_PATCH, config.seed)?;
    let val = match &args.val {
        Some(p) => synthesis_dataset(&[load_light_field(p)?], 16, INPUT_PATCH, config.seed.wrapping_add(1))?,
        None => Vec::new(),
    };
    let d2gan = D2GanConfig {
        batch_size: args.batch,
        lr: args.lr,
        ..D2GanConfig::default()
    };
    let opts = TrainOptions {
        steps: args.steps,
        val_every: 100,
        seed: config.seed,
        final_lr_fraction: 0.05,
        keep_best: !val.is_empty(),
    };
    let outcome = train_d2gan(&train, &val, &d2gan, &opts)?;
    outcome.model.save(&config.out.join("synth.lfnn"))?;
    write_training_log(&outcome.log, File::create(config.out.join("synth_log.csv"))?)?;
    if let Some(p) = outcome.log.iter().rev().find_map(|r| r.val_psnr) {
        println!("final validation psnr {p:.3} dB");
    }
    Ok(())
}

/// Pairs each original with its keep-all decode at the configured QP.
fn degraded_pairs(paths: &[std::path::PathBuf], qp: u8) -> anyhow::Result<Vec<(LightField, LightField)>> {
    paths
        .iter()
        .map(|p| {
            let lf = load_light_field(p)?;
            let enc = encode_light_field(&lf, &CodecConfig::with_qp(qp), DropPolicy::KeepAll)?;
            let dec = decode_light_field(&enc.stream, &MissingFill::NearestCopy, None)?;
            Ok((dec.output, lf))
        })
        .collect()
}

pub fn train_qe(config: &PipelineConfig, args: &TrainQeArgs) -> anyhow::Result<()> {
    let pairs = degraded_pairs(&args.train, config.qp)?;
    let (rows, cols) = (pairs[0].1.rows(), pairs[0].1.cols());
    let (seq, _) = build_sequence(rows, cols)?;
    let policy = config.rvs_policy()?;
    let refs: Vec<(&LightField, &LightField)> = pairs.iter().map(|(d, o)| (d, o)).collect();
    let train = qe_dataset(&refs, &seq, policy, args.patch, args.samples, config.seed)?;
    let val_pairs = match &args.val {
        Some(p) => degraded_pairs(std::slice::from_ref(p), config.qp)?,
        None => Vec::new(),
    };
    let val = match val_pairs.first() {
        Some((d, o)) => qe_dataset(&[(d, o)], &seq, policy, args.patch, 64, config.seed.wrapping_add(1))?,
        None => Vec::new(),
    };
    let qe = QeTrainConfig {
        lr: args.lr,
        batch_size: args.batch,
        steps: args.steps,
        val_every: 100,
        seed: config.seed,
    };
    let outcome = train_qenet(&train, &val, &qe)?;
    outcome.model.save(&config.out.join("qenet.lfnn"))?;
    write_qe_log(&outcome.log, File::create(config.out.join("qe_log.csv"))?)?;
    if !val.is_empty() {
        let (before, after) = qe_validation(&outcome.model, &val)?;
        println!(
            "validation psnr {:.3} dB -> {:.3} dB",
            psnr_from_mse(before * 255.0 * 255.0),
            psnr_from_mse(after * 255.0 * 255.0)
        );
    }
    Ok(())
}

pub fn eval(config: &PipelineConfig, args: &EvalArgs) -> anyhow::Result<()> {
    if let (Some(a), Some(t)) = (&args.anchor_curve, &args.test_curve) {
        let anchor = RdCurve::read_csv(File::open(a)?)?;
        let test = RdCurve::read_csv(File::open(t)?)?;
        println!("BD-BR {:.4} %", bd_rate(&anchor, &test, QualityMetric::Psnr)?);
        println!("BD-PSNR {:.4} dB", bd_quality(&anchor, &test, QualityMetric::Psnr)?);
        return Ok(());
    }
    let Some(decoded) = &args.decoded else {
        bail!("eval needs --decoded (with --manifest) or --anchor-curve with --test-curve");
    };
    let original = load_light_field(config.manifest()?)?;
    let recon = load_light_field(decoded)?;
    if (original.rows(), original.cols(), original.view_dims()) != (recon.rows(), recon.cols(), recon.view_dims()) {
        bail!("original and decoded light fields differ in shape");
    }
    let mut w = csv::Writer::from_path(config.out.join("eval.csv"))?;
    w.write_record(["u", "v", "psnr_db", "ssim"])?;
    let (mut total_mse, mut total_ssim) = (0.0, 0.0);
    for (p, v) in original.iter() {
        let r = recon.view(p);
        let s = ssim(r, v)?;
        total_mse += mse(&r.y, &v.y)?;
        total_ssim += s;
        w.write_record([p.u.to_string(), p.v.to_string(), psnr_plane(&r.y, &v.y)?.to_string(), s.to_string()])?;
    }
    w.flush()?;
    let n = original.len() as f64;
    println!("psnr {:.4} dB", psnr_from_mse(total_mse / n));
    println!("ssim {:.6}", total_ssim / n);
    if let Some(s) = &args.stream {
        let stream = LfBitstream::from_bytes(&std::fs::read(s)?)?;
        println!("bpp {:.6}", stream.bpp());
    }
    Ok(())
}

pub fn gen_synthetic(config: &PipelineConfig, args: &GenArgs) -> anyhow::Result<()> {
    let lf = match args.kind {
        SceneKind::Plane => textured_plane(args.rows, args.cols, args.width, args.height, args.disparity, config.seed)?,
        SceneKind::Occlusion => occlusion_scene(
            args.rows,
            args.cols,
            args.width,
            args.height,
            args.background,
            args.foreground,
            config.seed,
        )?,
    };
    let format = if args.png { ViewFormat::Png } else { ViewFormat::Yuv };
    let manifest = save_light_field(&lf, &config.out, format)?;
    println!("{}", manifest.display());
    Ok(())
}

pub fn rd_sweep(config: &PipelineConfig, qps: &[u8], policy: PolicyArg, anchor: Option<&Path>) -> anyhow::Result<()> {
    let lf = load_light_field(config.manifest()?)?;
    let synth = load_synth(config)?;
    let qe = load_qe(config)?;
    let mut points = Vec::with_capacity(qps.len());
    for &qp in qps {
        let (stream, _) = encode_with(&lf, config, qp, policy, synth.as_ref())?;
        let out = decode_with(&stream, config, synth.as_ref(), qe.as_ref())?;
        let point = rd_point(&lf, &out.output, &stream)?;
        println!("qp {qp}: {:.6} bpp, {:.4} dB, ssim {:.6}", point.rate, point.psnr, point.ssim);
        points.push(point);
    }
    let curve = RdCurve::new(points)?;
    curve.write_csv(File::create(config.out.join("rd.csv"))?)?;
    if !curve.is_monotone() {
        log::warn!("RD curve is not monotone");
    }
    if let Some(a) = anchor {
        let anchor = RdCurve::read_csv(File::open(a)?)?;
        println!("BD-BR {:.4} %", bd_rate(&anchor, &curve, QualityMetric::Psnr)?);
        println!("BD-PSNR {:.4} dB", bd_quality(&anchor, &curve, QualityMetric::Psnr)?);
    }
    Ok(())
}

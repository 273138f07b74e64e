//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero
//! when any criterion fails. Pass criterion numbers as arguments to run a subset.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use lfcodec::codec::{decode_sequence, encode_sequence, encode_view, decode_view, CodecConfig, GopContext, KeepAll};
use lfcodec::enhance::{
    enhance_decoded_lf, enhance_view, qe_dataset, qe_validation, train_qenet, QeNet, QeSample, QeTrainConfig, RvsPolicy,
};
use lfcodec::lf::{AngularPos, LightField, Plane};
use lfcodec::metrics::{bd_rate, fluctuation, psnr_from_mse, psnr_plane, QualityMetric, RdCurve, RdPoint};
use lfcodec::nn::gradcheck::check_stack;
use lfcodec::nn::{BatchNorm2d, Conv2d, Layer, PRelu, Padding, Stack, Tensor4};
use lfcodec::pipeline::{decode_light_field, encode_light_field, rd_point, DropPolicy, MissingFill};
use lfcodec::rdo::{decide_gop, CandidateCost, CostTable, Mode, RdoConfig};
use lfcodec::structure::{build_sequence, detect_missing, quadrant_of, rdo_triples, reference_layout, Role};
use lfcodec::synth::toy::{mass_near, train_toy, ToyConfig};
use lfcodec::synth::{
    d2gan_losses, d2gan_objective, synthesis_dataset, synthesize_view, train_d2gan, warp_view, D2GanConfig,
    GeneratorInput, GeneratorPair, Scores, TrainOptions,
};
use lfcodec::synthetic::{test_image, textured_plane};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    if elapsed <= limit {
        Ok(())
    } else {
        Err(format!("took {elapsed:.1?}, limit {limit:?}"))
    }
}

// ---------------------------------------------------------------- 1

fn random_tensor(dims: [usize; 4], seed: u64) -> Tensor4 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor4::from_fn(dims, |_| rng.random_range(-1.0..1.0))
}

fn conv(i: usize, o: usize, k: usize, s: usize, p: Padding, seed: u64) -> Layer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = Conv2d::new(i, o, k, s, p, &mut rng).unwrap();
    c.bias.value.iter_mut().for_each(|b| *b = rng.random_range(-0.5..0.5));
    Layer::Conv(c)
}

fn generator_input(patch: usize, seed: u64) -> GeneratorInput {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let refs = Tensor4::from_fn([1, 4, patch, patch], |[_, c, r, x]| {
        0.5 + 0.3 * ((r as f64 * 0.7 + c as f64).sin() * (x as f64 * 0.5).cos()) + rng.random_range(-0.05..0.05)
    });
    GeneratorInput {
        refs,
        deltas: vec![[(-1.0, -2.0), (2.0, 1.0), (-1.0, 1.0), (2.0, -2.0)]],
        position: vec![(1.0 / 7.0, 2.0 / 7.0)],
    }
}

fn c1_gradients() -> Check {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let layer_cases: Vec<(Stack, Tensor4)> = vec![
        (Stack::new(vec![conv(2, 3, 3, 1, Padding::Valid, 1)]), random_tensor([1, 2, 6, 6], 2)),
        (Stack::new(vec![conv(2, 3, 5, 1, Padding::Same, 3)]), random_tensor([1, 2, 6, 6], 4)),
        (Stack::new(vec![conv(2, 2, 3, 2, Padding::Valid, 5)]), random_tensor([2, 2, 9, 9], 6)),
        (Stack::new(vec![Layer::BatchNorm(BatchNorm2d::new(2))]), random_tensor([3, 2, 4, 4], 7)),
        (Stack::new(vec![Layer::PRelu(PRelu::new(2))]), random_tensor([1, 2, 4, 4], 8)),
        (Stack::new(vec![Layer::Sigmoid]), random_tensor([1, 2, 4, 4], 9)),
        (Stack::new(vec![Layer::Softplus]), random_tensor([1, 2, 4, 4], 10)),
        (Stack::new(vec![Layer::GlobalAvgPool]), random_tensor([2, 3, 4, 4], 11)),
    ];
    for (stack, x) in &layer_cases {
        worst = worst.max(check_stack(stack, x, 100, 12).map_err(|e| e.to_string())?);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let pair = GeneratorPair::new(&D2GanConfig::default(), &mut rng).map_err(|e| e.to_string())?;
    // Each net alone, then the chained path through the warp.
    let d_in = random_tensor([1, 18, 20, 20], 14);
    let c_in = random_tensor([1, 7, 20, 20], 15);
    worst = worst.max(check_stack(&pair.g_d, &d_in, 20, 16).map_err(|e| e.to_string())?);
    worst = worst.max(check_stack(&pair.g_c, &c_in, 20, 17).map_err(|e| e.to_string())?);
    let warp_err = pair.gradient_check(&generator_input(28, 18), 12, 19).map_err(|e| e.to_string())?;
    within(start.elapsed(), Duration::from_secs(120))?;
    ensure(
        worst < 1e-4 && warp_err < 1e-3,
        format!("layer/stack max rel err {worst:.2e} (< 1e-4), through warp {warp_err:.2e} (< 1e-3), {:.1?}", start.elapsed()),
    )
}

// ---------------------------------------------------------------- 2

fn c2_warping() -> Check {
    let (w, h) = (23, 17);
    let reference = Plane::from_fn(w, h, |r, c| ((r * 31 + c * 17) % 97) as f64 / 97.0 + 0.001 * (r * c) as f64);
    let zero = Plane::new(w, h, 0.0);
    let p = AngularPos::new(1, 6);
    let q = AngularPos::new(3, 2);
    let same = warp_view(&reference, p, q, &zero).map_err(|e| e.to_string())?;
    if same != reference {
        return Err("zero disparity is not the identity".into());
    }
    let any = Plane::from_fn(w, h, |r, c| 0.37 * r as f64 - 0.21 * c as f64);
    if warp_view(&reference, q, q, &any).map_err(|e| e.to_string())? != reference {
        return Err("zero baseline is not the identity".into());
    }
    for d in [1.0, 2.0, -1.0] {
        let disparity = Plane::new(w, h, d);
        let out = warp_view(&reference, p, q, &disparity).map_err(|e| e.to_string())?;
        let (du, dv) = (p.u as f64 - q.u as f64, p.v as f64 - q.v as f64);
        for r in 0..h {
            for c in 0..w {
                let sr = (r as f64 + du * d).clamp(0.0, (h - 1) as f64) as usize;
                let sc = (c as f64 + dv * d).clamp(0.0, (w - 1) as f64) as usize;
                if out.at(r, c) != reference.at(sr, sc) {
                    return Err(format!("integer shift d={d} differs at ({r},{c})"));
                }
            }
        }
    }
    Ok("identities bit-exact; integer shifts d in {1,2,-1} match the pixel loop exactly".into())
}

// ---------------------------------------------------------------- 3

fn c3_d2gan_arithmetic() -> Check {
    let cfg = D2GanConfig::default();
    let one = |r1: f64, f1: f64, r2: f64, f2: f64| Scores {
        real_d1: vec![r1],
        real_d2: vec![r2],
        fake_d1: vec![f1],
        fake_d2: vec![f2],
    };
    let v = d2gan_objective(&one(2.0, 1.0, 3.0, 0.5), &cfg).map_err(|e| e.to_string())?;
    let mut worst = (v + 4.0).abs();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let (r1, f1, r2, f2): (f64, f64, f64, f64) = (
            rng.random_range(0.01..5.0),
            rng.random_range(0.01..5.0),
            rng.random_range(0.01..5.0),
            rng.random_range(0.01..5.0),
        );
        let c = D2GanConfig {
            alpha: rng.random_range(0.05..1.0),
            beta: rng.random_range(0.05..1.0),
            ..cfg.clone()
        };
        let l = d2gan_losses(&one(r1, f1, r2, f2), &c).map_err(|e| e.to_string())?;
        worst = worst
            .max((l.d1 - (c.alpha * r1.ln() - f1)).abs())
            .max((l.d2 - (c.beta * f2.ln() - r2)).abs())
            .max((l.g_adv - (c.beta * f2.ln() - f1)).abs());
    }
    ensure(worst < 1e-9, format!("objective {v:.12}; worst deviation {worst:.1e} (< 1e-9)"))
}

// ---------------------------------------------------------------- 4

fn c4_toy_gan() -> Check {
    let start = Instant::now();
    let cfg = ToyConfig::default();
    if cfg.steps > 5000 {
        return Err(format!("{} steps exceed 5000", cfg.steps));
    }
    let out = train_toy(&cfg, 11).map_err(|e| e.to_string())?;
    let samples = out.sample(10_000, cfg.noise_dim, 12).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let again = train_toy(&cfg, 11).map_err(|e| e.to_string())?;
    let repeat = again.sample(10_000, cfg.noise_dim, 12).map_err(|e| e.to_string())?;
    within(elapsed, Duration::from_secs(300))?;
    let (lo, hi) = (mass_near(&samples, cfg.modes[0], 0.5), mass_near(&samples, cfg.modes[1], 0.5));
    ensure(
        lo >= 0.2 && hi >= 0.2 && samples == repeat,
        format!(
            "mass {lo:.3} near {} and {hi:.3} near {} (>= 0.2 each), reproducible {}, {} steps in {elapsed:.1?}",
            cfg.modes[0],
            cfg.modes[1],
            samples == repeat,
            cfg.steps
        ),
    )
}

// ---------------------------------------------------------------- 5

const SYNTH_STEPS: usize = 2000;

/// Trains on textured planes near the target disparity (distinct textures
/// from the evaluation scene).
fn train_synthesizer() -> lfcodec::Result<GeneratorPair> {
    let ds = [0.75, 1.0, 1.0, 1.0, 1.25, 1.0];
    let fields = (0..16)
        .map(|i| textured_plane(8, 8, 72, 72, ds[i % ds.len()], 100 + i as u64))
        .collect::<lfcodec::Result<Vec<_>>>()?;
    let train = synthesis_dataset(&fields, 4000, 60, 1)?;
    let val = synthesis_dataset(&[textured_plane(8, 8, 72, 72, 1.0, 55)?], 16, 60, 2)?;
    let cfg = D2GanConfig {
        batch_size: 4,
        lr: 1e-3,
        ..D2GanConfig::default()
    };
    let opts = TrainOptions {
        steps: SYNTH_STEPS,
        val_every: 100,
        seed: 1,
        final_lr_fraction: 0.05,
        keep_best: true,
    };
    Ok(train_d2gan(&train, &val, &cfg, &opts)?.model.generator)
}

fn c5_synthesis(model: &mut Option<GeneratorPair>) -> Check {
    let start = Instant::now();
    let generator = train_synthesizer().map_err(|e| e.to_string())?;
    let scene = textured_plane(8, 8, 72, 72, 1.0, 7).map_err(|e| e.to_string())?;
    let (seq, _) = build_sequence(8, 8).map_err(|e| e.to_string())?;
    let mut errors = Vec::new();
    let mut total_mse = 0.0;
    let mut views = 0;
    for e in seq.entries().iter().filter(|e| e.role == Role::NonReference) {
        let corners = quadrant_of(e.pos, 8, 8).map_err(|e| e.to_string())?.corners();
        let refs: Vec<Plane<f64>> = corners.iter().map(|&p| scene.view(p).y.to_unit()).collect();
        let (luma, disparity) = synthesize_view(&refs, &corners, e.pos, (8, 8), &generator).map_err(|e| e.to_string())?;
        for r in 12..60 {
            for c in 12..60 {
                errors.push((disparity.at(r, c) - 1.0).abs());
            }
        }
        let psnr = psnr_plane(&luma.to_u8(), &scene.view(e.pos).y).map_err(|e| e.to_string())?;
        total_mse += 255.0 * 255.0 / 10f64.powf(psnr / 10.0);
        views += 1;
    }
    errors.sort_by(f64::total_cmp);
    let median = errors[errors.len() / 2];
    let psnr = psnr_from_mse(total_mse / views as f64);
    let elapsed = start.elapsed();
    *model = Some(generator);
    within(elapsed, Duration::from_secs(30 * 60))?;
    ensure(
        median <= 0.5 && psnr >= 30.0,
        format!(
            "{SYNTH_STEPS} steps: median |D-1| {median:.3} px (<= 0.5), synthesized-view PSNR {psnr:.2} dB over {views} views (>= 30), {elapsed:.1?}"
        ),
    )
}

// ---------------------------------------------------------------- 6

fn c6_codec() -> Check {
    let image = test_image(512, 512, 5).map_err(|e| e.to_string())?;
    let mut last: Option<(usize, f64)> = None;
    let mut rows = Vec::new();
    for qp in [10, 18, 26, 34] {
        let (a, recon) = encode_view(&image, &[], qp).map_err(|e| e.to_string())?;
        let (b, _) = encode_view(&image, &[], qp).map_err(|e| e.to_string())?;
        if a != b {
            return Err(format!("qp {qp}: streams differ between runs"));
        }
        if decode_view(&a, &[]).map_err(|e| e.to_string())? != recon {
            return Err(format!("qp {qp}: decoder disagrees with encoder reconstruction"));
        }
        let psnr = psnr_plane(&recon.y, &image.y).map_err(|e| e.to_string())?;
        if let Some((bits, p)) = last {
            if a.len() * 8 >= bits || psnr >= p {
                return Err(format!("qp {qp}: rate {} / psnr {psnr:.2} not below previous", a.len() * 8));
            }
        }
        last = Some((a.len() * 8, psnr));
        rows.push(format!("qp{qp} {}b {psnr:.2}dB", a.len() * 8));
    }
    // Closed loop across inter-coded views.
    let lf = textured_plane(8, 8, 32, 32, 1.0, 9).map_err(|e| e.to_string())?;
    let (seq, graph) = build_sequence(8, 8).map_err(|e| e.to_string())?;
    let cfg = CodecConfig::with_qp(30);
    let enc = encode_sequence(&lf, &seq, &graph, &cfg, &mut KeepAll).map_err(|e| e.to_string())?;
    let enc2 = encode_sequence(&lf, &seq, &graph, &cfg, &mut KeepAll).map_err(|e| e.to_string())?;
    let bytes = enc.bitstream.to_bytes().map_err(|e| e.to_string())?;
    if bytes != enc2.bitstream.to_bytes().map_err(|e| e.to_string())? {
        return Err("light-field streams differ between runs".into());
    }
    let dec = decode_sequence(&enc.bitstream).map_err(|e| e.to_string())?;
    if dec.views != enc.reconstructions {
        return Err("light-field decode differs from encoder reconstructions".into());
    }
    Ok(format!("byte-exact, closed loop over 64 views, monotone: {}", rows.join(", ")))
}

// ---------------------------------------------------------------- 7

fn c7_structure() -> Check {
    let layout = reference_layout(8, 8).map_err(|e| e.to_string())?;
    let expected: BTreeSet<AngularPos> = [0, 3, 4, 7]
        .iter()
        .flat_map(|&u| [0, 3, 4, 7].iter().map(move |&v| AngularPos::new(u, v)))
        .collect();
    if layout.positions != expected {
        return Err(format!("reference positions {:?}", layout.positions));
    }
    let (seq, _) = build_sequence(8, 8).map_err(|e| e.to_string())?;
    for g in 0..seq.gop_count() {
        let mut hist = [0; 5];
        for e in seq.gop_entries(g) {
            hist[e.tl.get() as usize] += 1;
        }
        if hist != [1, 1, 2, 4, 8] {
            return Err(format!("gop {g} histogram {hist:?}"));
        }
    }
    let triples = rdo_triples(&seq);
    let covered: Vec<u32> = triples.iter().flat_map(|&(a, b, c)| [a, b, c]).collect();
    let unique: BTreeSet<u32> = covered.iter().copied().collect();
    let non_ref: BTreeSet<u32> = seq.entries().iter().filter(|e| e.role == Role::NonReference).map(|e| e.poc).collect();
    ensure(
        triples.len() == 16 && covered.len() == 48 && unique == non_ref && non_ref.len() == 48,
        format!(
            "16 references at rows/cols {{0,3,4,7}}, TL histogram (1,1,2,4,8) in all {} GOPs, {} triples covering {} distinct of {} non-reference views",
            seq.gop_count(),
            triples.len(),
            unique.len(),
            non_ref.len()
        ),
    )
}

// ---------------------------------------------------------------- 8

/// Straight transcription of the two-pass decision: TL4 views first, then
/// TL3 views. Equal costs keep the view coded.
fn rdo_trace(triples: &[(u32, u32, u32)], costs: &CostTable) -> BTreeMap<u32, Mode> {
    let mut modes = BTreeMap::new();
    let tl4: BTreeSet<u32> = triples.iter().flat_map(|t| [t.0, t.2]).collect();
    for v in tl4 {
        let c = costs[&v];
        modes.insert(v, if c.j_encode > c.j_synth { Mode::Synthesize } else { Mode::Encode });
    }
    for &(l, m, r) in triples {
        let c = costs[&m];
        let deps_synth = modes[&l] == Mode::Synthesize && modes[&r] == Mode::Synthesize;
        let mode = if c.j_encode > c.j_synth && deps_synth { Mode::Synthesize } else { Mode::Encode };
        modes.insert(m, mode);
    }
    modes
}

fn c8_rdo() -> Check {
    let (seq, _) = build_sequence(8, 8).map_err(|e| e.to_string())?;
    let triples = rdo_triples(&seq);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut synthesized = 0usize;
    for case in 0..1000 {
        // A quarter of the tables use coarse integer costs so ties occur.
        let coarse = case % 4 == 0;
        let mut costs = CostTable::new();
        for &(l, m, r) in &triples {
            for poc in [l, m, r] {
                let (je, js) = if coarse {
                    (rng.random_range(0..4) as f64, rng.random_range(0..4) as f64)
                } else {
                    (rng.random_range(0.0..100.0), rng.random_range(0.0..100.0))
                };
                costs.insert(poc, CandidateCost { j_encode: je, j_synth: js, rate_encode: rng.random_range(0.0..2.0) });
            }
        }
        let decisions = decide_gop(&triples, &costs).map_err(|e| e.to_string())?;
        let got: BTreeMap<u32, Mode> = decisions.iter().map(|d| (d.poc, d.mode)).collect();
        let want = rdo_trace(&triples, &costs);
        if got != want {
            return Err(format!("table {case}: decisions differ from the trace"));
        }
        for &(l, m, r) in &triples {
            let coded_tl4 = got[&l] == Mode::Encode || got[&r] == Mode::Encode;
            if coded_tl4 && got[&m] == Mode::Synthesize {
                return Err(format!("table {case}: coded TL4 next to synthesized TL3 {m}"));
            }
        }
        synthesized += got.values().filter(|&&m| m == Mode::Synthesize).count();
    }
    Ok(format!("1000 tables match the trace, dependency invariant holds ({synthesized} synthesize decisions)"))
}

// ---------------------------------------------------------------- 9

fn c9_drop_detect() -> Check {
    let lf = textured_plane(8, 8, 8, 8, 0.5, 3).map_err(|e| e.to_string())?;
    let (seq, graph) = build_sequence(8, 8).map_err(|e| e.to_string())?;
    let triples = rdo_triples(&seq);
    let cfg = CodecConfig::with_qp(40);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for case in 0..200 {
        let mut dropped = BTreeSet::new();
        for &(l, m, r) in &triples {
            let dl = rng.random_bool(0.5);
            let dr = rng.random_bool(0.5);
            if dl {
                dropped.insert(l);
            }
            if dr {
                dropped.insert(r);
            }
            if dl && dr && rng.random_bool(0.5) {
                dropped.insert(m);
            }
        }
        let chosen = dropped.clone();
        let mut selector = |ctx: &GopContext<'_>| -> lfcodec::Result<BTreeSet<u32>> {
            let gop: BTreeSet<u32> = seq.gop_entries(ctx.gop).iter().map(|e| e.poc).collect();
            Ok(chosen.intersection(&gop).copied().collect())
        };
        let enc = encode_sequence(&lf, &seq, &graph, &cfg, &mut selector).map_err(|e| e.to_string())?;
        let bytes = enc.bitstream.to_bytes().map_err(|e| e.to_string())?;
        let stream = lfcodec::codec::LfBitstream::from_bytes(&bytes).map_err(|e| e.to_string())?;
        let present = stream.pocs();
        let found: BTreeSet<AngularPos> = detect_missing(&present, &seq).map_err(|e| e.to_string())?.into_iter().collect();
        let expected: BTreeSet<AngularPos> = dropped.iter().map(|&p| seq.entries()[p as usize].pos).collect();
        if found != expected {
            return Err(format!("case {case}: detected {} of {} dropped views", found.len(), expected.len()));
        }
        let decoded = decode_sequence(&stream).map_err(|e| e.to_string())?;
        if decoded.missing.iter().copied().collect::<BTreeSet<_>>() != expected {
            return Err(format!("case {case}: decoder missing set differs"));
        }
    }
    Ok("200 random admissible drop sets recovered exactly from the stream".into())
}

// ---------------------------------------------------------------- 10

/// Cubic through four points (Lagrange form), integrated by composite Simpson.
fn dense_integral(x: &[f64], y: &[f64], lo: f64, hi: f64) -> f64 {
    let f = |t: f64| -> f64 {
        (0..4)
            .map(|i| {
                let w: f64 = (0..4).filter(|&j| j != i).map(|j| (t - x[j]) / (x[i] - x[j])).product();
                y[i] * w
            })
            .sum()
    };
    let n = 20_000;
    let h = (hi - lo) / n as f64;
    let mut s = f(lo) + f(hi);
    for k in 1..n {
        s += f(lo + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn oracle_bd_rate(a: &[(f64, f64)], t: &[(f64, f64)]) -> f64 {
    let split = |c: &[(f64, f64)]| -> (Vec<f64>, Vec<f64>) { (c.iter().map(|p| p.1).collect(), c.iter().map(|p| p.0.log10()).collect()) };
    let (qa, ra) = split(a);
    let (qt, rt) = split(t);
    let lo = qa.iter().copied().fold(f64::INFINITY, f64::min).max(qt.iter().copied().fold(f64::INFINITY, f64::min));
    let hi = qa.iter().copied().fold(f64::NEG_INFINITY, f64::max).min(qt.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    let avg = (dense_integral(&qt, &rt, lo, hi) - dense_integral(&qa, &ra, lo, hi)) / (hi - lo);
    100.0 * (10f64.powf(avg) - 1.0)
}

fn c10_bd() -> Check {
    let curve = |pts: &[(f64, f64)]| {
        RdCurve::new(pts.iter().map(|&(rate, psnr)| RdPoint { rate, psnr, ssim: 0.9 }).collect()).map_err(|e| e.to_string())
    };
    let base = [(0.05, 30.1), (0.1, 33.0), (0.2, 35.8), (0.4, 38.2)];
    let a = curve(&base)?;
    let same = bd_rate(&a, &a, QualityMetric::Psnr).map_err(|e| e.to_string())?;
    let halved: Vec<(f64, f64)> = base.iter().map(|&(r, q)| (r / 2.0, q)).collect();
    let half = bd_rate(&a, &curve(&halved)?, QualityMetric::Psnr).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < 200 {
        let random_curve = |rng: &mut ChaCha8Rng| -> Vec<(f64, f64)> {
            let mut r = rng.random_range(0.02..0.1);
            let mut q = rng.random_range(26.0..32.0);
            (0..4)
                .map(|_| {
                    r *= rng.random_range(1.3..2.5);
                    q += rng.random_range(1.0..4.0);
                    (r, q)
                })
                .collect()
        };
        let (pa, pt) = (random_curve(&mut rng), random_curve(&mut rng));
        let Ok(got) = bd_rate(&curve(&pa)?, &curve(&pt)?, QualityMetric::Psnr) else {
            continue;
        };
        worst = worst.max((got - oracle_bd_rate(&pa, &pt)).abs());
        done += 1;
    }
    ensure(
        same.abs() <= 1e-6 && (half + 50.0).abs() <= 0.1 && worst <= 0.05,
        format!("identical {same:.2e} %, halved {half:.4} %, max |BD-BR - oracle| {worst:.2e} over 200 random curves (<= 0.05)"),
    )
}

// ---------------------------------------------------------------- 11

fn degraded(lf: &LightField, qp: u8) -> lfcodec::Result<LightField> {
    let enc = encode_light_field(lf, &CodecConfig::with_qp(qp), DropPolicy::KeepAll)?;
    Ok(decode_light_field(&enc.stream, &MissingFill::NearestCopy, None)?.output)
}

fn c11_enhancement(synth: &mut Option<GeneratorPair>, trained: &mut Option<QeNet>) -> Check {
    if synth.is_none() {
        *synth = Some(train_synthesizer().map_err(|e| e.to_string())?);
    }
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let fresh = QeNet::new(&mut rng);
    let image = test_image(40, 30, 3).map_err(|e| e.to_string())?;
    let other = test_image(40, 30, 4).map_err(|e| e.to_string())?;
    let same = enhance_view(&image.y, &other.y, &other.y, &fresh).map_err(|e| e.to_string())?;
    if same != image.y {
        return Err("untrained network changes its target".into());
    }

    // Constant brightness offset between degraded and original.
    let bias = 0.05;
    let patch = 16;
    let samples: Vec<QeSample> = (0..256)
        .map(|_| {
            let inputs: Vec<f64> = (0..3 * patch * patch).map(|_| rng.random_range(0.2..0.8)).collect();
            let original = inputs[..patch * patch].iter().map(|v| v + bias).collect();
            QeSample { patch, inputs, original }
        })
        .collect();
    let cfg = QeTrainConfig {
        lr: 1e-3,
        batch_size: 8,
        steps: 300,
        val_every: 300,
        seed: 2,
    };
    let out = train_qenet(&samples[..192], &samples[192..], &cfg).map_err(|e| e.to_string())?;
    let held = &samples[192..];
    let x = Tensor4::new([held.len(), 3, patch, patch], held.iter().flat_map(|s| s.inputs.iter().copied()).collect())
        .map_err(|e| e.to_string())?;
    let residual = out.model.residual(&x).map_err(|e| e.to_string())?;
    let recovered = residual.data().iter().sum::<f64>() / residual.len() as f64;
    if (recovered - bias).abs() > 0.1 * bias {
        return Err(format!("constant bias {bias} recovered as {recovered:.4}"));
    }

    let qp = 34;
    let fields = (0..8)
        .map(|i| textured_plane(8, 8, 64, 64, 0.5 + 0.25 * (i % 5) as f64, 200 + i as u64))
        .collect::<lfcodec::Result<Vec<_>>>()
        .map_err(|e| e.to_string())?;
    let decoded = fields.iter().map(|f| degraded(f, qp)).collect::<lfcodec::Result<Vec<_>>>().map_err(|e| e.to_string())?;
    let held_out = textured_plane(8, 8, 64, 64, 1.0, 300).map_err(|e| e.to_string())?;
    let held_dec = degraded(&held_out, qp).map_err(|e| e.to_string())?;
    let (seq, _) = build_sequence(8, 8).map_err(|e| e.to_string())?;
    let pairs: Vec<(&LightField, &LightField)> = decoded.iter().zip(&fields).collect();
    let train = qe_dataset(&pairs, &seq, RvsPolicy::Sharpness, 32, 4000, 3).map_err(|e| e.to_string())?;
    let val = qe_dataset(&[(&held_dec, &held_out)], &seq, RvsPolicy::Sharpness, 32, 64, 4).map_err(|e| e.to_string())?;
    let cfg = QeTrainConfig {
        lr: 2e-4,
        batch_size: 8,
        steps: QE_STEPS,
        val_every: 100,
        seed: 5,
    };
    let model = train_qenet(&train, &val, &cfg).map_err(|e| e.to_string())?.model;
    let (before, after) = qe_validation(&model, &val).map_err(|e| e.to_string())?;
    let gain = psnr_from_mse(after * 65025.0) - psnr_from_mse(before * 65025.0);
    // Fluctuation is judged on the full scheme: RDO drops, synthesis, then enhancement.
    let synth = synth.as_ref().ok_or("no synthesis model")?;
    let enc = encode_light_field(&held_out, &CodecConfig::with_qp(qp), DropPolicy::Rdo(synth, RdoConfig::default()))
        .map_err(|e| e.to_string())?;
    let dec = decode_light_field(&enc.stream, &MissingFill::Synthesize(synth), Some((&model, RvsPolicy::Sharpness)))
        .map_err(|e| e.to_string())?;
    let f_before = fluctuation(&dec.assembled, &held_out, &seq).map_err(|e| e.to_string())?;
    let f_after = fluctuation(&dec.output, &held_out, &seq).map_err(|e| e.to_string())?;
    let enhanced = enhance_decoded_lf(&held_dec, &seq, &model, RvsPolicy::Sharpness).map_err(|e| e.to_string())?;
    let k_before = fluctuation(&held_dec, &held_out, &seq).map_err(|e| e.to_string())?;
    let k_after = fluctuation(&enhanced, &held_out, &seq).map_err(|e| e.to_string())?;
    *trained = Some(model);
    ensure(
        gain >= 0.2 && f_after.std <= f_before.std,
        format!(
            "identity exact, bias {bias} recovered as {recovered:.4}; QP{qp} validation gain {gain:+.3} dB (>= 0.2), per-view PSNR std {:.3} -> {:.3} dB with {} views synthesized (keep-all {:.3} -> {:.3}), {:.1?}",
            f_before.std,
            f_after.std,
            dec.missing.len(),
            k_before.std,
            k_after.std,
            start.elapsed()
        ),
    )
}

const QE_STEPS: usize = 300;

// ---------------------------------------------------------------- 12

const PIPELINE_QPS: [u8; 4] = [22, 30, 38, 47];

fn c12_pipeline(synth: &mut Option<GeneratorPair>, qe: &mut Option<QeNet>) -> Check {
    if synth.is_none() {
        *synth = Some(train_synthesizer().map_err(|e| e.to_string())?);
    }
    if qe.is_none() {
        c11_enhancement(synth, qe).ok();
    }
    let (Some(synth), Some(qe)) = (synth.as_ref(), qe.as_ref()) else {
        return Err("no trained enhancement model".into());
    };
    let start = Instant::now();
    let lf = textured_plane(8, 8, 72, 72, 1.0, 21).map_err(|e| e.to_string())?;
    let mut full = Vec::new();
    let mut base = Vec::new();
    let mut rows = Vec::new();
    for qp in PIPELINE_QPS {
        let codec = CodecConfig::with_qp(qp);
        let enc = encode_light_field(&lf, &codec, DropPolicy::Rdo(synth, RdoConfig::default())).map_err(|e| e.to_string())?;
        let dec = decode_light_field(&enc.stream, &MissingFill::Synthesize(synth), Some((qe, RvsPolicy::Sharpness)))
            .map_err(|e| e.to_string())?;
        let p = rd_point(&lf, &dec.output, &enc.stream).map_err(|e| e.to_string())?;
        let benc = encode_light_field(&lf, &codec, DropPolicy::FromLayer(4)).map_err(|e| e.to_string())?;
        let bdec = decode_light_field(&benc.stream, &MissingFill::NearestCopy, None).map_err(|e| e.to_string())?;
        let b = rd_point(&lf, &bdec.output, &benc.stream).map_err(|e| e.to_string())?;
        rows.push(format!(
            "qp{qp}: {:.4}bpp/{:.2}dB ({} dropped) vs {:.4}bpp/{:.2}dB",
            p.rate,
            p.psnr,
            dec.missing.len(),
            b.rate,
            b.psnr
        ));
        full.push(p);
        base.push(b);
    }
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(3600))?;
    let full = RdCurve::new(full).map_err(|e| e.to_string())?;
    let base = RdCurve::new(base).map_err(|e| e.to_string())?;
    let bd = bd_rate(&base, &full, QualityMetric::Psnr).map_err(|e| format!("{e}; {}", rows.join(", ")))?;
    ensure(
        full.is_monotone() && bd <= 0.0,
        format!("monotone {}, BD-BR vs drop-all-TL4 {bd:.2} % (<= 0), {elapsed:.1?}; {}", full.is_monotone(), rows.join(", ")),
    )
}

// ----------------------------------------------------------------

fn main() {
    let wanted: BTreeSet<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let run = |n: usize| wanted.is_empty() || wanted.contains(&n);
    let mut synth = None;
    let mut qe = None;
    let mut failed = 0;
    let mut report = |n: usize, name: &str, f: &mut dyn FnMut() -> Check| {
        if !run(n) {
            return;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match result {
            Ok(detail) => println!("PASS  {n:>2} {name}: {detail} [{:.1?}]", start.elapsed()),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {n:>2} {name}: {detail} [{:.1?}]", start.elapsed());
            }
        }
    };
    report(1, "gradient suite", &mut c1_gradients);
    report(2, "warping exactness", &mut c2_warping);
    report(3, "D2GAN arithmetic", &mut c3_d2gan_arithmetic);
    report(4, "D2GAN toy training", &mut c4_toy_gan);
    report(5, "synthesis end-to-end", &mut || c5_synthesis(&mut synth));
    report(6, "codec", &mut c6_codec);
    report(7, "coding structure", &mut c7_structure);
    report(8, "RDO decisions", &mut c8_rdo);
    report(9, "drop/detect round trip", &mut c9_drop_detect);
    report(10, "BD metrics", &mut c10_bd);
    report(11, "multi-view enhancement", &mut || c11_enhancement(&mut synth, &mut qe));
    report(12, "end-to-end pipeline", &mut || c12_pipeline(&mut synth, &mut qe));
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

//! Encoder and decoder orchestration across the codec, drop decision,
//! synthesis, and enhancement stages.

use std::collections::BTreeMap;

use crate::codec::{decode_sequence, encode_sequence, CodecConfig, DropFromLayer, KeepAll, LfBitstream};
use crate::enhance::{enhance_decoded_lf, QeNet, RvsPolicy};
use crate::error::{Error, Result};
use crate::lf::{AngularPos, LightField, View};
use crate::metrics::{mse, psnr_from_mse, ssim, RdPoint};
use crate::rdo::{RdoConfig, RdoDecision, RdoSelector};
use crate::structure::{build_sequence, PseudoVideoSequence};
use crate::synth::{synthesize_full_view, ViewSynthesizer};

/// Which non-reference views the encoder leaves out.
pub enum DropPolicy<'a> {
    KeepAll,
    /// Every view on this temporal layer or above.
    FromLayer(u8),
    Rdo(&'a dyn ViewSynthesizer, RdoConfig),
}

pub struct EncodeOutcome {
    pub stream: LfBitstream,
    pub seq: PseudoVideoSequence,
    pub decisions: Vec<RdoDecision>,
    /// Encoder-side reconstructions of the coded views, by POC.
    pub reconstructions: BTreeMap<u32, View>,
}

pub fn encode_light_field(lf: &LightField, codec: &CodecConfig, policy: DropPolicy<'_>) -> Result<EncodeOutcome> {
    let (seq, graph) = build_sequence(lf.rows(), lf.cols())?;
    let (encoded, decisions) = match policy {
        DropPolicy::KeepAll => (encode_sequence(lf, &seq, &graph, codec, &mut KeepAll)?, Vec::new()),
        DropPolicy::FromLayer(tl) => (encode_sequence(lf, &seq, &graph, codec, &mut DropFromLayer(tl))?, Vec::new()),
        DropPolicy::Rdo(synth, cfg) => {
            let mut sel = RdoSelector::new(synth, cfg);
            let e = encode_sequence(lf, &seq, &graph, codec, &mut sel)?;
            (e, sel.decisions)
        }
    };
    Ok(EncodeOutcome {
        stream: encoded.bitstream,
        seq,
        decisions,
        reconstructions: encoded.reconstructions,
    })
}

/// How the decoder fills views absent from the stream.
pub enum MissingFill<'a> {
    Synthesize(&'a dyn ViewSynthesizer),
    /// Copy the nearest present view (Chebyshev distance, then lower temporal
    /// layer, then row-major order).
    NearestCopy,
}

pub struct DecodeOutcome {
    pub seq: PseudoVideoSequence,
    /// Before enhancement.
    pub assembled: LightField,
    /// After enhancement (equal to `assembled` when enhancement is off).
    pub output: LightField,
    pub missing: Vec<AngularPos>,
}

pub fn decode_light_field(
    stream: &LfBitstream,
    fill: &MissingFill<'_>,
    enhance: Option<(&QeNet, RvsPolicy)>,
) -> Result<DecodeOutcome> {
    let decoded = decode_sequence(stream)?;
    let seq = decoded.seq;
    let grid = seq.grid();
    let by_pos: BTreeMap<AngularPos, &View> = decoded
        .views
        .iter()
        .map(|(&poc, v)| (seq.entries()[poc as usize].pos, v))
        .collect();
    let mut filled: BTreeMap<AngularPos, View> = BTreeMap::new();
    for &q in &decoded.missing {
        let view = match fill {
            MissingFill::Synthesize(s) => synthesize_full_view(*s, q, grid, |p| by_pos.get(&p).copied())?,
            MissingFill::NearestCopy => {
                let (_, src) = by_pos
                    .iter()
                    .min_by_key(|(p, _)| {
                        let tl = seq.poc_of(**p).map(|poc| seq.entries()[poc as usize].tl.get());
                        (p.chebyshev(q), tl, **p)
                    })
                    .ok_or_else(|| Error::CorruptStream("no views decoded".into()))?;
                (*src).clone()
            }
        };
        filled.insert(q, view);
    }
    let mut views = Vec::with_capacity(grid.0 * grid.1);
    for u in 0..grid.0 {
        for v in 0..grid.1 {
            let p = AngularPos::new(u, v);
            let view = match by_pos.get(&p) {
                Some(v) => (*v).clone(),
                None => filled.remove(&p).ok_or_else(|| Error::CorruptStream(format!("view {p} neither decoded nor filled")))?,
            };
            views.push(view);
        }
    }
    let assembled = LightField::new(grid.0, grid.1, views)?;
    let output = match enhance {
        Some((model, policy)) => enhance_decoded_lf(&assembled, &seq, model, policy)?,
        None => assembled.clone(),
    };
    Ok(DecodeOutcome {
        seq,
        assembled,
        output,
        missing: decoded.missing,
    })
}

/// Rate in bpp, PSNR of the mean luma MSE over all views, mean luma SSIM.
pub fn rd_point(original: &LightField, decoded: &LightField, stream: &LfBitstream) -> Result<RdPoint> {
    if (original.rows(), original.cols()) != (decoded.rows(), decoded.cols()) {
        return Err(Error::DimensionMismatch("light field grids differ".into()));
    }
    let mut total_mse = 0.0;
    let mut total_ssim = 0.0;
    for (p, v) in original.iter() {
        total_mse += mse(&decoded.view(p).y, &v.y)?;
        total_ssim += ssim(decoded.view(p), v)?;
    }
    let n = original.len() as f64;
    Ok(RdPoint {
        rate: stream.bpp(),
        psnr: psnr_from_mse(total_mse / n),
        ssim: total_ssim / n,
    })
}

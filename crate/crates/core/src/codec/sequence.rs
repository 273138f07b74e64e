//! Sequence-level coding: views are coded GOP by GOP in decode order, each at
//! `base_qp + tl_qp_offsets[tl]`, with a drop decision taken after the GOP's
//! reference views are reconstructed.

use super::container::{CodecId, EncodedView, LfBitstream, StreamHeader, VERSION};
use super::frame::{check_qp, ViewCoder, DEFAULT_SEARCH_RANGE};
use crate::error::{Error, Result};
use crate::lf::{AngularPos, LightField, View};
use crate::structure::{
    build_sequence, detect_missing, reference_layout, DependencyGraph, PseudoVideoSequence, Role,
};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CodecConfig {
    pub base_qp: u8,
    pub tl_qp_offsets: [u8; 5],
    pub motion_search_range: usize,
    pub codec_id: CodecId,
}

impl Default for CodecConfig {
    fn default() -> Self {
        Self {
            base_qp: 28,
            tl_qp_offsets: [0, 1, 2, 3, 4],
            motion_search_range: DEFAULT_SEARCH_RANGE,
            codec_id: CodecId::Builtin,
        }
    }
}

impl CodecConfig {
    pub fn with_qp(base_qp: u8) -> Self {
        Self {
            base_qp,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let max = *self.tl_qp_offsets.iter().max().unwrap();
        check_qp(self.base_qp as i32 + max as i32)?;
        Ok(())
    }

    pub fn qp_for_layer(&self, tl: u8) -> i32 {
        self.base_qp as i32 + self.tl_qp_offsets[tl as usize] as i32
    }

    pub fn coder(&self) -> ViewCoder {
        ViewCoder {
            search_range: self.motion_search_range,
        }
    }
}

/// State handed to a [`DropSelector`] once a GOP's reference views are coded.
pub struct GopContext<'a> {
    pub gop: usize,
    pub lf: &'a LightField,
    pub seq: &'a PseudoVideoSequence,
    pub graph: &'a DependencyGraph,
    pub config: &'a CodecConfig,
    /// Reconstructions of every view coded so far.
    pub decoded: &'a BTreeMap<u32, View>,
}

impl GopContext<'_> {
    pub fn view(&self, poc: u32) -> &View {
        self.lf.view(self.seq.entries()[poc as usize].pos)
    }

    /// Reconstructed references of `poc`, nearest first.
    pub fn refs_of<'m>(&self, poc: u32, decoded: &'m BTreeMap<u32, View>) -> Result<Vec<&'m View>> {
        self.graph
            .refs(poc)
            .iter()
            .map(|r| {
                decoded
                    .get(r)
                    .ok_or_else(|| Error::InvalidArgument(format!("reference poc {r} not decoded")))
            })
            .collect()
    }
}

/// Chooses which non-reference views of a GOP are left out of the stream.
pub trait DropSelector {
    fn select(&mut self, ctx: &GopContext<'_>) -> Result<BTreeSet<u32>>;
}

/// Codes every view.
#[derive(Clone, Copy, Debug, Default)]
pub struct KeepAll;

impl DropSelector for KeepAll {
    fn select(&mut self, _: &GopContext<'_>) -> Result<BTreeSet<u32>> {
        Ok(BTreeSet::new())
    }
}

/// Drops every view at or above a temporal layer.
#[derive(Clone, Copy, Debug)]
pub struct DropFromLayer(pub u8);

impl DropSelector for DropFromLayer {
    fn select(&mut self, ctx: &GopContext<'_>) -> Result<BTreeSet<u32>> {
        Ok(ctx
            .seq
            .gop_entries(ctx.gop)
            .iter()
            .filter(|e| e.tl.get() >= self.0.max(3))
            .map(|e| e.poc)
            .collect())
    }
}

impl<F> DropSelector for F
where
    F: FnMut(&GopContext<'_>) -> Result<BTreeSet<u32>>,
{
    fn select(&mut self, ctx: &GopContext<'_>) -> Result<BTreeSet<u32>> {
        self(ctx)
    }
}

/// Checks that a drop set only removes non-reference views of the GOP and
/// never removes a view that a kept view predicts from.
pub fn check_drop_set(
    seq: &PseudoVideoSequence,
    graph: &DependencyGraph,
    gop: usize,
    dropped: &BTreeSet<u32>,
) -> Result<()> {
    let gop_pocs: BTreeSet<u32> = seq.gop_entries(gop).iter().map(|e| e.poc).collect();
    for &poc in dropped {
        let entry = seq
            .entry(poc)
            .filter(|_| gop_pocs.contains(&poc))
            .ok_or_else(|| Error::InvalidArgument(format!("poc {poc} not in GOP {gop}")))?;
        if entry.role == Role::Reference {
            return Err(Error::InvalidArgument(format!("reference poc {poc} cannot be dropped")));
        }
    }
    for &poc in gop_pocs.difference(dropped) {
        if let Some(r) = graph.refs(poc).iter().find(|r| dropped.contains(r)) {
            return Err(Error::InvalidArgument(format!("poc {poc} kept but its reference {r} dropped")));
        }
    }
    Ok(())
}

/// Result of [`encode_sequence`].
pub struct EncodedSequence {
    pub bitstream: LfBitstream,
    /// Encoder-side reconstructions of the coded views.
    pub reconstructions: BTreeMap<u32, View>,
    pub dropped: BTreeSet<u32>,
}

fn header_for(lf: &LightField, seq: &PseudoVideoSequence, config: &CodecConfig) -> Result<StreamHeader> {
    let (w, h) = lf.view_dims();
    let narrow = |v: usize, what: &str| {
        u8::try_from(v).map_err(|_| Error::InvalidArgument(format!("{what} {v} exceeds 255")))
    };
    let wide = |v: usize, what: &str| {
        u16::try_from(v).map_err(|_| Error::InvalidArgument(format!("{what} {v} exceeds 65535")))
    };
    Ok(StreamHeader {
        version: VERSION,
        grid_rows: narrow(lf.rows(), "grid rows")?,
        grid_cols: narrow(lf.cols(), "grid cols")?,
        gop_size: narrow(seq.gop_size(), "gop size")?,
        codec_id: config.codec_id,
        base_qp: config.base_qp,
        width: wide(w, "width")?,
        height: wide(h, "height")?,
        references: reference_layout(lf.rows(), lf.cols())?.positions.into_iter().collect(),
    })
}

pub(crate) fn stream_header(lf: &LightField, seq: &PseudoVideoSequence, config: &CodecConfig) -> Result<StreamHeader> {
    header_for(lf, seq, config)
}

/// Codes a light field with the built-in codec.
pub fn encode_sequence(
    lf: &LightField,
    seq: &PseudoVideoSequence,
    graph: &DependencyGraph,
    config: &CodecConfig,
    selector: &mut dyn DropSelector,
) -> Result<EncodedSequence> {
    config.validate()?;
    if config.codec_id != CodecId::Builtin {
        return Err(Error::InvalidArgument("encode_sequence drives the built-in codec only".into()));
    }
    if seq.grid() != (lf.rows(), lf.cols()) {
        return Err(Error::DimensionMismatch("sequence grid differs from light field".into()));
    }
    let coder = config.coder();
    let header = header_for(lf, seq, config)?;
    let mut decoded: BTreeMap<u32, View> = BTreeMap::new();
    let mut records = Vec::with_capacity(seq.len());
    let mut dropped_all = BTreeSet::new();

    let code = |poc: u32, decoded: &mut BTreeMap<u32, View>, records: &mut Vec<EncodedView>| -> Result<()> {
        let entry = seq.entries()[poc as usize];
        let refs: Vec<&View> = graph.refs(poc).iter().map(|r| &decoded[r]).collect();
        let (payload, recon) = coder.encode(lf.view(entry.pos), &refs, config.qp_for_layer(entry.tl.get()))?;
        records.push(EncodedView {
            poc,
            tl: entry.tl,
            payload,
        });
        decoded.insert(poc, recon);
        Ok(())
    };

    for gop in 0..seq.gop_count() {
        let order = seq.decode_order(gop);
        for &poc in order.iter().filter(|&&p| seq.entries()[p as usize].role == Role::Reference) {
            code(poc, &mut decoded, &mut records)?;
        }
        let dropped = selector.select(&GopContext {
            gop,
            lf,
            seq,
            graph,
            config,
            decoded: &decoded,
        })?;
        check_drop_set(seq, graph, gop, &dropped)?;
        for &poc in order
            .iter()
            .filter(|&&p| seq.entries()[p as usize].role == Role::NonReference && !dropped.contains(&p))
        {
            code(poc, &mut decoded, &mut records)?;
        }
        dropped_all.extend(dropped);
    }
    records.sort_by_key(|r| r.poc);
    Ok(EncodedSequence {
        bitstream: LfBitstream { header, records },
        reconstructions: decoded,
        dropped: dropped_all,
    })
}

/// Views recovered from a stream plus the positions it left out.
pub struct DecodedSequence {
    pub seq: PseudoVideoSequence,
    pub graph: DependencyGraph,
    pub views: BTreeMap<u32, View>,
    pub missing: Vec<AngularPos>,
}

/// Rebuilds the coding structure from a stream header and validates it.
pub fn sequence_for_stream(stream: &LfBitstream) -> Result<(PseudoVideoSequence, DependencyGraph)> {
    let h = &stream.header;
    let (rows, cols) = (h.grid_rows as usize, h.grid_cols as usize);
    let (seq, graph) = build_sequence(rows, cols).map_err(|e| Error::CorruptStream(e.to_string()))?;
    if seq.gop_size() != h.gop_size as usize {
        return Err(Error::CorruptStream(format!("gop size {} for a {rows}x{cols} grid", h.gop_size)));
    }
    let expected: Vec<AngularPos> = reference_layout(rows, cols)?.positions.into_iter().collect();
    if h.references != expected {
        return Err(Error::CorruptStream("reference list does not match grid layout".into()));
    }
    for r in &stream.records {
        let entry = seq
            .entry(r.poc)
            .ok_or_else(|| Error::CorruptStream(format!("poc {} outside sequence", r.poc)))?;
        if entry.tl != r.tl {
            return Err(Error::CorruptStream(format!("poc {} signalled on layer {}", r.poc, r.tl)));
        }
    }
    Ok((seq, graph))
}

/// Decodes every record of a built-in codec stream.
pub fn decode_sequence(stream: &LfBitstream) -> Result<DecodedSequence> {
    if stream.header.codec_id != CodecId::Builtin {
        return Err(Error::InvalidArgument(
            "streams from an external encoder need the matching external decoder".into(),
        ));
    }
    let (seq, graph) = sequence_for_stream(stream)?;
    let present = stream.pocs();
    let missing = detect_missing(&present, &seq)?;
    let coder = ViewCoder::default();
    let mut views: BTreeMap<u32, View> = BTreeMap::new();
    for gop in 0..seq.gop_count() {
        for poc in seq.decode_order(gop) {
            let Some(record) = stream.record(poc) else { continue };
            let refs = graph
                .refs(poc)
                .iter()
                .map(|r| {
                    views
                        .get(r)
                        .ok_or_else(|| Error::CorruptStream(format!("poc {poc} references dropped poc {r}")))
                })
                .collect::<Result<Vec<_>>>()?;
            let view = coder.decode(&record.payload, &refs)?;
            if (view.width(), view.height()) != (stream.header.width as usize, stream.header.height as usize) {
                return Err(Error::CorruptStream(format!("poc {poc} has wrong dimensions")));
            }
            views.insert(poc, view);
        }
    }
    Ok(DecodedSequence {
        seq,
        graph,
        views,
        missing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lf::Plane;

    fn lf8(w: usize, h: usize) -> LightField {
        let views = (0..64)
            .map(|i| {
                let (u, v) = (i / 8, i % 8);
                View::from_luma(Plane::from_fn(w, h, |r, c| {
                    let x = c as f64 - v as f64 * 0.7;
                    let y = r as f64 - u as f64 * 0.7;
                    (128.0 + 60.0 * (x * 0.4).sin() * (y * 0.3).cos()) as u8
                }))
            })
            .collect();
        LightField::new(8, 8, views).unwrap()
    }

    #[test]
    fn keep_all_round_trip() {
        let lf = lf8(16, 16);
        let (seq, graph) = build_sequence(8, 8).unwrap();
        let enc = encode_sequence(&lf, &seq, &graph, &CodecConfig::with_qp(24), &mut KeepAll).unwrap();
        assert_eq!(enc.bitstream.records.len(), 64);
        let bytes = enc.bitstream.to_bytes().unwrap();
        let parsed = LfBitstream::from_bytes(&bytes).unwrap();
        assert_eq!(parsed, enc.bitstream);
        let dec = decode_sequence(&parsed).unwrap();
        assert!(dec.missing.is_empty());
        assert_eq!(dec.views, enc.reconstructions);
    }

    #[test]
    fn dropping_tl4_keeps_lower_layers_decodable() {
        let lf = lf8(16, 16);
        let (seq, graph) = build_sequence(8, 8).unwrap();
        let enc = encode_sequence(&lf, &seq, &graph, &CodecConfig::with_qp(24), &mut DropFromLayer(4)).unwrap();
        assert_eq!(enc.bitstream.records.len(), 32);
        let dec = decode_sequence(&enc.bitstream).unwrap();
        assert_eq!(dec.views.len(), 32);
        assert_eq!(dec.missing.len(), 32);
        for (poc, view) in &dec.views {
            assert_eq!(view, &enc.reconstructions[poc]);
        }
    }

    #[test]
    fn inadmissible_drop_rejected() {
        let lf = lf8(8, 8);
        let (seq, graph) = build_sequence(8, 8).unwrap();
        // TL3 poc 2 dropped while TL4 poc 1 kept
        let mut sel = |ctx: &GopContext<'_>| Ok(if ctx.gop == 0 { BTreeSet::from([2]) } else { BTreeSet::new() });
        assert!(encode_sequence(&lf, &seq, &graph, &CodecConfig::default(), &mut sel).is_err());
        let mut sel = |_: &GopContext<'_>| Ok(BTreeSet::from([0]));
        assert!(encode_sequence(&lf, &seq, &graph, &CodecConfig::default(), &mut sel).is_err());
    }

    #[test]
    fn qp_cascade_validated() {
        let cfg = CodecConfig::with_qp(48);
        assert!(matches!(cfg.validate(), Err(Error::QpOutOfRange(52))));
        assert!(CodecConfig::with_qp(47).validate().is_ok());
    }

    #[test]
    fn deterministic_streams() {
        let lf = lf8(16, 8);
        let (seq, graph) = build_sequence(8, 8).unwrap();
        let run = || {
            encode_sequence(&lf, &seq, &graph, &CodecConfig::with_qp(30), &mut KeepAll)
                .unwrap()
                .bitstream
                .to_bytes()
                .unwrap()
        };
        assert_eq!(run(), run());
    }
}

//! Single-view hybrid coding: 8x8 blocks, plane-DC intra or full-pel motion
//! compensated inter prediction, DCT, uniform quantization and Exp-Golomb
//! residual coding. The encoder returns exactly the reconstruction the
//! decoder will produce.

use super::bits::{BitReader, BitWriter};
use super::dct::{self, Block, N};
use super::entropy::{ResidualCoder, RunLengthExpGolomb};
use crate::error::{Error, Result};
use crate::lf::{Plane, View};

pub const BLOCK_SIZE: usize = N;
pub const DEFAULT_SEARCH_RANGE: usize = 8;
pub const MAX_QP: i32 = 51;

const FRAME_INTRA: u8 = 0;
const FRAME_INTER: u8 = 1;
const HEADER_LEN: usize = 7;

/// Quantizer step size for a QP: doubles every 6 steps, 1.0 at QP 4.
pub fn qstep(qp: u8) -> f64 {
    2f64.powf((qp as f64 - 4.0) / 6.0)
}

pub fn check_qp(qp: i32) -> Result<u8> {
    if (0..=MAX_QP).contains(&qp) {
        Ok(qp as u8)
    } else {
        Err(Error::QpOutOfRange(qp))
    }
}

/// Block prediction source chosen by the encoder.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum InterMode {
    First,
    Second,
    Bi,
}

impl InterMode {
    fn index(self) -> u32 {
        match self {
            InterMode::First => 0,
            InterMode::Second => 1,
            InterMode::Bi => 2,
        }
    }

    fn from_index(i: u32) -> Result<Self> {
        match i {
            0 => Ok(InterMode::First),
            1 => Ok(InterMode::Second),
            2 => Ok(InterMode::Bi),
            _ => Err(Error::MalformedPayload(format!("inter mode {i}"))),
        }
    }
}

/// Reference plane with a replicated border wide enough for any motion vector.
struct PaddedRef {
    plane: Plane<u8>,
    pad: usize,
}

impl PaddedRef {
    fn new(src: &Plane<u8>, range: usize) -> Self {
        let pad = range + BLOCK_SIZE;
        let plane = src.crop_clamped(
            -(pad as isize),
            -(pad as isize),
            src.width() + 2 * pad,
            src.height() + 2 * pad,
        );
        Self { plane, pad }
    }

    fn block(&self, y0: usize, x0: usize, dy: i32, dx: i32) -> [i32; N * N] {
        let mut out = [0; N * N];
        let top = (y0 + self.pad) as isize + dy as isize;
        let left = (x0 + self.pad) as isize + dx as isize;
        for r in 0..N {
            let row = self.plane.row((top + r as isize) as usize);
            for c in 0..N {
                out[r * N + c] = row[(left + c as isize) as usize] as i32;
            }
        }
        out
    }
}

fn source_block(src: &Plane<u8>, y0: usize, x0: usize) -> [i32; N * N] {
    let mut out = [0; N * N];
    for r in 0..N {
        for c in 0..N {
            out[r * N + c] = src.at_clamped((y0 + r) as isize, (x0 + c) as isize) as i32;
        }
    }
    out
}

fn sad(a: &[i32; N * N], b: &[i32; N * N]) -> u32 {
    a.iter().zip(b).map(|(x, y)| x.abs_diff(*y)).sum()
}

/// Full-pel search; ties prefer the zero vector, then shorter vectors, then scan order.
fn motion_search(src: &[i32; N * N], reference: &PaddedRef, y0: usize, x0: usize, range: i32) -> (i32, i32, u32) {
    let mut best = (0, 0, u32::MAX);
    let mut best_key = (u32::MAX, true, u32::MAX);
    for dy in -range..=range {
        for dx in -range..=range {
            let cost = sad(src, &reference.block(y0, x0, dy, dx));
            let key = (cost, (dy, dx) != (0, 0), dy.unsigned_abs() + dx.unsigned_abs());
            if key < best_key {
                best_key = key;
                best = (dy, dx, cost);
            }
        }
    }
    best
}

fn bi_average(a: &[i32; N * N], b: &[i32; N * N]) -> [i32; N * N] {
    let mut out = [0; N * N];
    for i in 0..N * N {
        out[i] = (a[i] + b[i] + 1) >> 1;
    }
    out
}

fn quantize(residual: &[i32; N * N], step: f64) -> [i32; N * N] {
    let mut block: Block = [0.0; N * N];
    for (b, r) in block.iter_mut().zip(residual) {
        *b = *r as f64;
    }
    let coefs = dct::forward(&block);
    let mut levels = [0; N * N];
    for (l, c) in levels.iter_mut().zip(coefs) {
        *l = (c / step).round().clamp(-(1 << 20) as f64, (1 << 20) as f64) as i32;
    }
    levels
}

fn reconstruct(pred: &[i32; N * N], levels: &[i32; N * N], step: f64) -> [u8; N * N] {
    let mut coefs: Block = [0.0; N * N];
    for (c, l) in coefs.iter_mut().zip(levels) {
        *c = *l as f64 * step;
    }
    let residual = dct::inverse(&coefs);
    let mut out = [0u8; N * N];
    for i in 0..N * N {
        out[i] = (pred[i] as f64 + residual[i]).round().clamp(0.0, 255.0) as u8;
    }
    out
}

fn store_block(dst: &mut Plane<u8>, y0: usize, x0: usize, block: &[u8; N * N]) {
    for r in 0..N.min(dst.height() - y0) {
        for c in 0..N.min(dst.width() - x0) {
            dst.set(y0 + r, x0 + c, block[r * N + c]);
        }
    }
}

fn block_origins(plane: &Plane<u8>) -> impl Iterator<Item = (usize, usize)> {
    let (w, h) = plane.dims();
    (0..h.div_ceil(N)).flat_map(move |by| (0..w.div_ceil(N)).map(move |bx| (by * N, bx * N)))
}

fn plane_mean(p: &Plane<u8>) -> u8 {
    let sum: u64 = p.data().iter().map(|&v| v as u64).sum();
    ((sum as f64) / p.data().len() as f64).round() as u8
}

fn encode_plane(
    src: &Plane<u8>,
    refs: &[PaddedRef],
    intra_dc: Option<u8>,
    step: f64,
    range: i32,
    coder: &dyn ResidualCoder,
    w: &mut BitWriter,
) -> Plane<u8> {
    let mut recon = Plane::new(src.width(), src.height(), 0u8);
    for (y0, x0) in block_origins(src) {
        let source = source_block(src, y0, x0);
        let pred = match intra_dc {
            Some(dc) => [dc as i32; N * N],
            None => {
                let found: Vec<(i32, i32, u32)> = refs
                    .iter()
                    .map(|r| motion_search(&source, r, y0, x0, range))
                    .collect();
                let preds: Vec<[i32; N * N]> = refs
                    .iter()
                    .zip(&found)
                    .map(|(r, &(dy, dx, _))| r.block(y0, x0, dy, dx))
                    .collect();
                let mut mode = InterMode::First;
                let mut pred = preds[0];
                if refs.len() == 2 {
                    let bi = bi_average(&preds[0], &preds[1]);
                    let candidates = [
                        (found[0].2, InterMode::First, preds[0]),
                        (found[1].2, InterMode::Second, preds[1]),
                        (sad(&source, &bi), InterMode::Bi, bi),
                    ];
                    // min_by_key keeps the first minimum: nearer reference wins ties
                    let (_, m, p) = *candidates.iter().min_by_key(|c| c.0).unwrap();
                    mode = m;
                    pred = p;
                    w.put_ue(mode.index());
                }
                let used: &[usize] = match mode {
                    InterMode::First => &[0],
                    InterMode::Second => &[1],
                    InterMode::Bi => &[0, 1],
                };
                for &i in used {
                    w.put_se(found[i].0);
                    w.put_se(found[i].1);
                }
                pred
            }
        };
        let mut residual = [0; N * N];
        for i in 0..N * N {
            residual[i] = source[i] - pred[i];
        }
        let levels = quantize(&residual, step);
        coder.write(w, &levels);
        store_block(&mut recon, y0, x0, &reconstruct(&pred, &levels, step));
    }
    recon
}

fn decode_plane(
    width: usize,
    height: usize,
    refs: &[PaddedRef],
    intra_dc: Option<u8>,
    step: f64,
    range: i32,
    coder: &dyn ResidualCoder,
    r: &mut BitReader<'_>,
) -> Result<Plane<u8>> {
    let mut recon = Plane::new(width, height, 0u8);
    let origins: Vec<_> = block_origins(&recon).collect();
    for (y0, x0) in origins {
        let pred = match intra_dc {
            Some(dc) => [dc as i32; N * N],
            None => {
                let mode = if refs.len() == 2 {
                    InterMode::from_index(r.ue()?)?
                } else {
                    InterMode::First
                };
                let read_mv = |r: &mut BitReader<'_>| -> Result<(i32, i32)> {
                    let dy = r.se()?;
                    let dx = r.se()?;
                    if dy.abs() > range || dx.abs() > range {
                        return Err(Error::MalformedPayload(format!("motion vector ({dy},{dx}) out of range")));
                    }
                    Ok((dy, dx))
                };
                match mode {
                    InterMode::First => {
                        let (dy, dx) = read_mv(r)?;
                        refs[0].block(y0, x0, dy, dx)
                    }
                    InterMode::Second => {
                        let (dy, dx) = read_mv(r)?;
                        refs[1].block(y0, x0, dy, dx)
                    }
                    InterMode::Bi => {
                        let (ay, ax) = read_mv(r)?;
                        let (by, bx) = read_mv(r)?;
                        bi_average(&refs[0].block(y0, x0, ay, ax), &refs[1].block(y0, x0, by, bx))
                    }
                }
            }
        };
        let levels = coder.read(r)?;
        store_block(&mut recon, y0, x0, &reconstruct(&pred, &levels, step));
    }
    Ok(recon)
}

/// Encoder for one view given already-decoded references (nearest first).
#[derive(Clone, Copy, Debug)]
pub struct ViewCoder {
    pub search_range: usize,
}

impl Default for ViewCoder {
    fn default() -> Self {
        Self {
            search_range: DEFAULT_SEARCH_RANGE,
        }
    }
}

impl ViewCoder {
    /// Returns the payload and the decoder-side reconstruction.
    pub fn encode(&self, view: &View, refs: &[&View], qp: i32) -> Result<(Vec<u8>, View)> {
        let qp = check_qp(qp)?;
        if refs.len() > 2 {
            return Err(Error::InvalidArgument(format!("{} references, at most 2", refs.len())));
        }
        if refs.iter().any(|r| (r.width(), r.height()) != (view.width(), view.height())) {
            return Err(Error::DimensionMismatch("reference size differs from view".into()));
        }
        let (w, h) = (view.width(), view.height());
        if w > u16::MAX as usize || h > u16::MAX as usize {
            return Err(Error::InvalidArgument("view too large".into()));
        }
        let intra = refs.is_empty();
        let mut payload = vec![
            if intra { FRAME_INTRA } else { FRAME_INTER },
            qp,
            refs.len() as u8,
        ];
        payload.extend_from_slice(&(w as u16).to_le_bytes());
        payload.extend_from_slice(&(h as u16).to_le_bytes());
        let step = qstep(qp);
        let range = self.search_range as i32;
        let mut bw = BitWriter::new();
        let mut planes = Vec::with_capacity(3);
        for (k, src) in view.planes().into_iter().enumerate() {
            let dc = intra.then(|| plane_mean(src));
            if let Some(dc) = dc {
                payload.push(dc);
            }
            let padded: Vec<PaddedRef> = refs
                .iter()
                .map(|r| PaddedRef::new(r.planes()[k], self.search_range))
                .collect();
            planes.push(encode_plane(src, &padded, dc, step, range, &RunLengthExpGolomb, &mut bw));
        }
        payload.extend(bw.finish());
        let cr = planes.pop().unwrap();
        let cb = planes.pop().unwrap();
        let y = planes.pop().unwrap();
        Ok((payload, View::new(y, cb, cr)?))
    }

    pub fn decode(&self, payload: &[u8], refs: &[&View]) -> Result<View> {
        if payload.len() < HEADER_LEN {
            return Err(Error::MalformedPayload("payload shorter than header".into()));
        }
        let intra = match payload[0] {
            FRAME_INTRA => true,
            FRAME_INTER => false,
            t => return Err(Error::MalformedPayload(format!("frame type {t}"))),
        };
        let qp = check_qp(payload[1] as i32).map_err(|e| Error::MalformedPayload(e.to_string()))?;
        let nrefs = payload[2] as usize;
        if intra != (nrefs == 0) || nrefs > 2 {
            return Err(Error::MalformedPayload(format!("{nrefs} references for frame type {}", payload[0])));
        }
        if nrefs != refs.len() {
            return Err(Error::InvalidArgument(format!(
                "payload expects {nrefs} references, {} given",
                refs.len()
            )));
        }
        let w = u16::from_le_bytes([payload[3], payload[4]]) as usize;
        let h = u16::from_le_bytes([payload[5], payload[6]]) as usize;
        if w == 0 || h == 0 {
            return Err(Error::MalformedPayload("zero-sized view".into()));
        }
        if refs.iter().any(|r| (r.width(), r.height()) != (w, h)) {
            return Err(Error::DimensionMismatch("reference size differs from payload".into()));
        }
        let mut at = HEADER_LEN;
        let dcs = if intra {
            let dcs = payload
                .get(at..at + 3)
                .ok_or_else(|| Error::MalformedPayload("missing intra DC values".into()))?;
            at += 3;
            Some([dcs[0], dcs[1], dcs[2]])
        } else {
            None
        };
        let step = qstep(qp);
        let range = self.search_range as i32;
        let mut reader = BitReader::new(&payload[at..]);
        let mut planes = Vec::with_capacity(3);
        let (cw, ch) = crate::lf::chroma_dims(w, h);
        for (k, (pw, ph)) in [(w, h), (cw, ch), (cw, ch)].into_iter().enumerate() {
            let padded: Vec<PaddedRef> = refs
                .iter()
                .map(|r| PaddedRef::new(r.planes()[k], self.search_range))
                .collect();
            let dc = dcs.map(|d| d[k]);
            planes.push(decode_plane(pw, ph, &padded, dc, step, range, &RunLengthExpGolomb, &mut reader)?);
        }
        let cr = planes.pop().unwrap();
        let cb = planes.pop().unwrap();
        let y = planes.pop().unwrap();
        View::new(y, cb, cr)
    }
}

/// Encodes with the default ±8 motion search.
pub fn encode_view(view: &View, refs: &[&View], qp: i32) -> Result<(Vec<u8>, View)> {
    ViewCoder::default().encode(view, refs, qp)
}

pub fn decode_view(payload: &[u8], refs: &[&View]) -> Result<View> {
    ViewCoder::default().decode(payload, refs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_view(w: usize, h: usize, seed: u64) -> View {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y = Plane::from_fn(w, h, |r, c| ((r * 9 + c * 5) as u8).wrapping_add(rng.random_range(0..24)));
        let (cw, ch) = crate::lf::chroma_dims(w, h);
        let cb = Plane::from_fn(cw, ch, |r, c| (100 + r + c) as u8);
        let cr = Plane::from_fn(cw, ch, |r, _| (160 - r) as u8);
        View::new(y, cb, cr).unwrap()
    }

    fn shifted(v: &View, d: isize) -> View {
        let y = v.y.crop_clamped(0, d, v.width(), v.height());
        v.with_luma(y).unwrap()
    }

    #[test]
    fn constant_view_intra_is_lossless() {
        let v = View::from_luma(Plane::new(24, 16, 128));
        for qp in 0..=4 {
            let (payload, recon) = encode_view(&v, &[], qp).unwrap();
            assert_eq!(recon, v);
            // header + 3 DCs + one bit per empty block
            assert!(payload.len() <= HEADER_LEN + 3 + 3);
        }
    }

    #[test]
    fn closed_loop_intra_and_inter() {
        let a = random_view(37, 29, 1);
        let b = shifted(&a, 2);
        let c = shifted(&a, -3);
        for qp in [0, 12, 30, 51] {
            let (pa, ra) = encode_view(&a, &[], qp).unwrap();
            assert_eq!(decode_view(&pa, &[]).unwrap(), ra);
            let (pb, rb) = encode_view(&b, &[&ra], qp).unwrap();
            assert_eq!(decode_view(&pb, &[&ra]).unwrap(), rb);
            let (pc, rc) = encode_view(&c, &[&rb, &ra], qp).unwrap();
            assert_eq!(decode_view(&pc, &[&rb, &ra]).unwrap(), rc);
        }
    }

    #[test]
    fn deterministic_payloads() {
        let a = random_view(40, 24, 3);
        let b = shifted(&a, 1);
        let run = || {
            let (pa, ra) = encode_view(&a, &[], 20).unwrap();
            let (pb, _) = encode_view(&b, &[&ra], 22).unwrap();
            (pa, pb)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn inter_prediction_beats_intra_on_shifted_content() {
        let a = random_view(64, 64, 4);
        let b = shifted(&a, 3);
        let (_, ra) = encode_view(&a, &[], 10).unwrap();
        let (intra, _) = encode_view(&b, &[], 10).unwrap();
        let (inter, _) = encode_view(&b, &[&ra], 10).unwrap();
        assert!(inter.len() < intra.len() / 2, "inter {} intra {}", inter.len(), intra.len());
    }

    #[test]
    fn truncated_payload_is_malformed() {
        let a = random_view(32, 32, 5);
        let (payload, _) = encode_view(&a, &[], 20).unwrap();
        let cut = &payload[..payload.len() / 2];
        assert!(matches!(decode_view(cut, &[]), Err(Error::MalformedPayload(_))));
        assert!(matches!(decode_view(&payload[..4], &[]), Err(Error::MalformedPayload(_))));
    }

    #[test]
    fn wrong_reference_decodes_differently() {
        let a = random_view(32, 32, 6);
        let other = random_view(32, 32, 7);
        let b = shifted(&a, 1);
        let (_, ra) = encode_view(&a, &[], 16).unwrap();
        let (pb, rb) = encode_view(&b, &[&ra], 16).unwrap();
        let wrong = decode_view(&pb, &[&other]).unwrap();
        assert_ne!(checksum(&wrong), checksum(&rb));
    }

    fn checksum(v: &View) -> u64 {
        v.planes()
            .iter()
            .flat_map(|p| p.data().iter())
            .fold(0xcbf29ce484222325u64, |h, &b| (h ^ b as u64).wrapping_mul(0x100000001b3))
    }

    #[test]
    fn qp_out_of_range() {
        let a = random_view(8, 8, 8);
        assert!(matches!(encode_view(&a, &[], 52), Err(Error::QpOutOfRange(52))));
        assert!(matches!(encode_view(&a, &[], -1), Err(Error::QpOutOfRange(-1))));
    }

    #[test]
    fn qstep_doubles_every_six() {
        assert!((qstep(4) - 1.0).abs() < 1e-12);
        assert!((qstep(10) - 2.0).abs() < 1e-12);
        assert!((qstep(34) - 32.0).abs() < 1e-9);
    }
}

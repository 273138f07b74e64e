//! Adapter for an external video encoder binary.
//!
//! Views are exported in POC order as planar 8-bit 4:2:0 raw video. The
//! command template may use `{input_yuv}`, `{width}`, `{height}`, `{frames}`,
//! `{qp}` and `{output}`. The produced stream is split into one record per
//! POC, sized by per-frame bit counts from the encoder log when every frame
//! reports one, otherwise split evenly.

use super::container::{CodecId, EncodedView, LfBitstream};
use super::sequence::{stream_header, CodecConfig};
use crate::error::{Error, Result};
use crate::lf::{view_to_yuv, LightField};
use crate::structure::PseudoVideoSequence;
use regex::Regex;
use std::collections::BTreeMap;
use std::process::Command;

/// Splits a template on whitespace and substitutes placeholders per token.
fn render(template: &str, vars: &[(&str, String)]) -> Result<Vec<String>> {
    let tokens: Vec<String> = template
        .split_whitespace()
        .map(|tok| {
            vars.iter()
                .fold(tok.to_string(), |acc, (k, v)| acc.replace(&format!("{{{k}}}"), v))
        })
        .collect();
    if tokens.is_empty() {
        return Err(Error::InvalidArgument("empty external encoder command".into()));
    }
    Ok(tokens)
}

/// Per-POC bit counts from lines like `POC    3 TId: 2 ( B-SLICE, ... )   1234 bits`.
pub fn parse_frame_bits(log: &str) -> BTreeMap<u32, u64> {
    let re = Regex::new(r"POC\s+(\d+)\b.*?\b(\d+)\s+bits").expect("static regex");
    log.lines()
        .filter_map(|line| {
            let caps = re.captures(line)?;
            Some((caps[1].parse().ok()?, caps[2].parse().ok()?))
        })
        .collect()
}

/// Byte ranges per frame; the last frame absorbs rounding so the split is exact.
fn split_sizes(total: usize, frames: usize, weights: Option<Vec<u64>>) -> Vec<usize> {
    let weights = weights.unwrap_or_else(|| vec![1; frames]);
    let sum: u64 = weights.iter().sum::<u64>().max(1);
    let mut sizes: Vec<usize> = weights
        .iter()
        .map(|&w| ((w as u128 * total as u128) / sum as u128) as usize)
        .collect();
    let assigned: usize = sizes.iter().sum();
    if let Some(last) = sizes.last_mut() {
        *last += total - assigned;
    }
    sizes
}

/// Runs an external encoder over the whole pseudo-video sequence.
pub fn external_encode(
    lf: &LightField,
    seq: &PseudoVideoSequence,
    config: &CodecConfig,
    command_template: &str,
) -> Result<LfBitstream> {
    config.validate()?;
    let dir = tempfile::tempdir()?;
    let input = dir.path().join("input.yuv");
    let output = dir.path().join("output.bin");
    let mut raw = Vec::new();
    for e in seq.entries() {
        view_to_yuv(lf.view(e.pos), &mut raw);
    }
    std::fs::write(&input, &raw)?;
    let (w, h) = lf.view_dims();
    let args = render(
        command_template,
        &[
            ("input_yuv", input.display().to_string()),
            ("width", w.to_string()),
            ("height", h.to_string()),
            ("frames", seq.len().to_string()),
            ("qp", config.base_qp.to_string()),
            ("output", output.display().to_string()),
        ],
    )?;
    let out = Command::new(&args[0])
        .args(&args[1..])
        .output()
        .map_err(|e| Error::ProcessFailure(format!("{}: {e}", args[0])))?;
    if !out.status.success() {
        return Err(Error::ProcessFailure(format!(
            "{} exited with {}: {}",
            args[0],
            out.status,
            String::from_utf8_lossy(&out.stderr).trim()
        )));
    }
    let stream = std::fs::read(&output)
        .map_err(|e| Error::UnparsableOutput(format!("no output stream at {}: {e}", output.display())))?;
    if stream.is_empty() {
        return Err(Error::UnparsableOutput("empty output stream".into()));
    }
    let log = String::from_utf8_lossy(&out.stdout);
    let bits = parse_frame_bits(&log);
    let weights = (0..seq.len() as u32)
        .map(|poc| bits.get(&poc).copied())
        .collect::<Option<Vec<u64>>>();
    let sizes = split_sizes(stream.len(), seq.len(), weights);
    let mut config = config.clone();
    config.codec_id = CodecId::External;
    let header = stream_header(lf, seq, &config)?;
    let mut at = 0;
    let records = seq
        .entries()
        .iter()
        .zip(sizes)
        .map(|(e, n)| {
            let payload = stream[at..at + n].to_vec();
            at += n;
            EncodedView {
                poc: e.poc,
                tl: e.tl,
                payload,
            }
        })
        .collect();
    Ok(LfBitstream { header, records })
}

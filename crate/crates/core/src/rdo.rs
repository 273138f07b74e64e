//! Lagrangian drop decision for the two highest temporal layers.
//!
//! Pass one visits each TL4 view and keeps it iff J_encode ≤ J_synth. Pass
//! two synthesizes a TL3 view only when J_encode > J_synth and both TL4
//! views of its triple were synthesized, since a coded TL4 view predicts
//! from its TL3 neighbor.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::{DropSelector, GopContext};
use crate::error::{Error, Result};
use crate::lf::View;
use crate::metrics::mse;
use crate::structure::{rdo_triples, PseudoVideoSequence};
use crate::synth::{synthesize_full_view, ViewSynthesizer};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RdoConfig {
    pub lambda: f64,
}

impl Default for RdoConfig {
    fn default() -> Self {
        Self { lambda: 0.1 }
    }
}

impl RdoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("lambda {} must be >= 0", self.lambda)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Encode,
    Synthesize,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Encode => "encode",
            Mode::Synthesize => "synthesize",
        }
    }
}

/// Costs of the two options for one view.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CandidateCost {
    pub j_encode: f64,
    pub j_synth: f64,
    /// Bits per pixel of the coded view.
    pub rate_encode: f64,
}

pub type CostTable = BTreeMap<u32, CandidateCost>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RdoDecision {
    pub poc: u32,
    pub mode: Mode,
    pub j_encode: f64,
    pub j_synth: f64,
    pub rate_encode: f64,
}

/// J = D + λ·R.
pub fn lagrangian_cost(distortion: f64, rate: f64, lambda: f64) -> Result<f64> {
    if !(distortion >= 0.0 && rate >= 0.0 && lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "negative cost input D={distortion} R={rate} λ={lambda}"
        )));
    }
    Ok(distortion + lambda * rate)
}

/// Decisions for the given (TL4, TL3, TL4) triples, sorted by POC.
pub fn decide_gop(triples: &[(u32, u32, u32)], costs: &CostTable) -> Result<Vec<RdoDecision>> {
    let cost = |poc: u32| costs.get(&poc).copied().ok_or(Error::MissingCost(poc));
    let decision = |poc: u32, mode: Mode| -> Result<RdoDecision> {
        let c = cost(poc)?;
        Ok(RdoDecision {
            poc,
            mode,
            j_encode: c.j_encode,
            j_synth: c.j_synth,
            rate_encode: c.rate_encode,
        })
    };
    let mut out = Vec::with_capacity(3 * triples.len());
    let mut tl4 = BTreeMap::new();
    for &(left, _, right) in triples {
        for poc in [left, right] {
            let c = cost(poc)?;
            tl4.insert(poc, if c.j_encode <= c.j_synth { Mode::Encode } else { Mode::Synthesize });
        }
    }
    for &(left, mid, right) in triples {
        let c = cost(mid)?;
        let both = tl4[&left] == Mode::Synthesize && tl4[&right] == Mode::Synthesize;
        let mode = if c.j_encode > c.j_synth && both {
            Mode::Synthesize
        } else {
            Mode::Encode
        };
        out.push(decision(left, tl4[&left])?);
        out.push(decision(mid, mode)?);
        out.push(decision(right, tl4[&right])?);
    }
    out.sort_by_key(|d| d.poc);
    out.dedup_by_key(|d| d.poc);
    Ok(out)
}

/// Triples lying in one GOP.
pub fn gop_triples(seq: &PseudoVideoSequence, gop: usize) -> Vec<(u32, u32, u32)> {
    let pocs: BTreeSet<u32> = seq.gop_entries(gop).iter().map(|e| e.poc).collect();
    rdo_triples(seq).into_iter().filter(|t| pocs.contains(&t.1)).collect()
}

/// Codes each TL3 view and then its TL4 neighbors from the GOP's decoded
/// references, and synthesizes each of them from the quadrant corners.
pub fn evaluate_candidates(ctx: &GopContext<'_>, synth: &dyn ViewSynthesizer, config: &RdoConfig) -> Result<CostTable> {
    config.validate()?;
    let triples = gop_triples(ctx.seq, ctx.gop);
    let (w, h) = ctx.lf.view_dims();
    let pixels = (w * h) as f64;
    let grid = (ctx.lf.rows(), ctx.lf.cols());
    let coder = ctx.config.coder();

    let encode_triple = |&(left, mid, right): &(u32, u32, u32)| -> Result<Vec<(u32, f64, f64)>> {
        let mut local: BTreeMap<u32, View> = BTreeMap::new();
        let mut out = Vec::with_capacity(3);
        for poc in [mid, left, right] {
            let entry = ctx.seq.entries()[poc as usize];
            let refs: Vec<&View> = ctx
                .graph
                .refs(poc)
                .iter()
                .map(|r| {
                    local
                        .get(r)
                        .or_else(|| ctx.decoded.get(r))
                        .ok_or_else(|| Error::InvalidArgument(format!("reference poc {r} not decoded")))
                })
                .collect::<Result<_>>()?;
            let (payload, recon) = coder.encode(ctx.view(poc), &refs, ctx.config.qp_for_layer(entry.tl.get()))?;
            let d = mse(&recon.y, &ctx.view(poc).y)?;
            out.push((poc, d, 8.0 * payload.len() as f64 / pixels));
            local.insert(poc, recon);
        }
        Ok(out)
    };
    let encoded: Vec<(u32, f64, f64)> = triples
        .par_iter()
        .map(encode_triple)
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    let lookup = |pos| ctx.seq.poc_of(pos).and_then(|p| ctx.decoded.get(&p));
    let synthesized: Vec<f64> = encoded
        .par_iter()
        .map(|&(poc, _, _)| {
            let pos = ctx.seq.entries()[poc as usize].pos;
            let view = synthesize_full_view(synth, pos, grid, lookup)?;
            mse(&view.y, &ctx.view(poc).y)
        })
        .collect::<Result<_>>()?;

    encoded
        .iter()
        .zip(synthesized)
        .map(|(&(poc, d_enc, rate), d_syn)| {
            Ok((
                poc,
                CandidateCost {
                    j_encode: lagrangian_cost(d_enc, rate, config.lambda)?,
                    j_synth: lagrangian_cost(d_syn, 0.0, config.lambda)?,
                    rate_encode: rate,
                },
            ))
        })
        .collect()
}

/// Drop selector running the Lagrangian decision on every GOP.
pub struct RdoSelector<'a> {
    pub synth: &'a dyn ViewSynthesizer,
    pub config: RdoConfig,
    pub decisions: Vec<RdoDecision>,
}

impl<'a> RdoSelector<'a> {
    pub fn new(synth: &'a dyn ViewSynthesizer, config: RdoConfig) -> Self {
        Self {
            synth,
            config,
            decisions: Vec::new(),
        }
    }
}

impl DropSelector for RdoSelector<'_> {
    fn select(&mut self, ctx: &GopContext<'_>) -> Result<BTreeSet<u32>> {
        let costs = evaluate_candidates(ctx, self.synth, &self.config)?;
        let decisions = decide_gop(&gop_triples(ctx.seq, ctx.gop), &costs)?;
        let dropped = decisions
            .iter()
            .filter(|d| d.mode == Mode::Synthesize)
            .map(|d| d.poc)
            .collect();
        self.decisions.extend(decisions);
        Ok(dropped)
    }
}

/// Decision report: poc, u, v, tl, mode, j_encode, j_synth, rate_encode_bpp.
pub fn write_decisions<W: Write>(decisions: &[RdoDecision], seq: &PseudoVideoSequence, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["poc", "u", "v", "tl", "mode", "j_encode", "j_synth", "rate_encode_bpp"])?;
    for d in decisions {
        let e = seq
            .entry(d.poc)
            .ok_or_else(|| Error::InvalidArgument(format!("poc {} not in sequence", d.poc)))?;
        w.write_record([
            d.poc.to_string(),
            e.pos.u.to_string(),
            e.pos.v.to_string(),
            e.tl.get().to_string(),
            d.mode.as_str().to_string(),
            d.j_encode.to_string(),
            d.j_synth.to_string(),
            d.rate_encode.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn costs(entries: &[(u32, f64, f64)]) -> CostTable {
        entries
            .iter()
            .map(|&(p, e, s)| {
                (
                    p,
                    CandidateCost {
                        j_encode: e,
                        j_synth: s,
                        rate_encode: 0.1,
                    },
                )
            })
            .collect()
    }

    fn modes(d: &[RdoDecision]) -> Vec<Mode> {
        d.iter().map(|d| d.mode).collect()
    }

    #[test]
    fn cost_arithmetic() {
        assert!((lagrangian_cost(100.0, 0.05, 0.1).unwrap() - 100.005).abs() < 1e-12);
        assert_eq!(lagrangian_cost(7.0, 3.0, 0.0).unwrap(), 7.0);
        assert!(lagrangian_cost(-1.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn hand_traces() {
        use Mode::*;
        let d = decide_gop(&[(1, 2, 3)], &costs(&[(1, 5.0, 3.0), (2, 4.0, 3.0), (3, 6.0, 2.0)])).unwrap();
        assert_eq!(modes(&d), vec![Synthesize, Synthesize, Synthesize]);
        let d = decide_gop(&[(1, 2, 3)], &costs(&[(1, 1.0, 9.0), (2, 9.0, 0.0), (3, 6.0, 2.0)])).unwrap();
        assert_eq!(modes(&d), vec![Encode, Encode, Synthesize]);
        let d = decide_gop(&[(1, 2, 3)], &costs(&[(1, 2.0, 2.0), (2, 2.0, 2.0), (3, 2.0, 2.0)])).unwrap();
        assert_eq!(modes(&d), vec![Encode; 3]);
        assert!(matches!(
            decide_gop(&[(1, 2, 3)], &costs(&[(1, 1.0, 1.0)])),
            Err(Error::MissingCost(3))
        ));
    }
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lf::{AngularPos, Plane};

/// A decoded reference view offered to the selector.
#[derive(Clone, Copy, Debug)]
pub struct Candidate<'a> {
    pub pos: AngularPos,
    pub tl: u8,
    pub luma: &'a Plane<u8>,
}

/// No-reference quality score; larger is better.
pub trait QualityScorer: Sync {
    fn score(&self, luma: &Plane<u8>) -> f64;
}

/// Variance of the 4-neighbour Laplacian divided by (1 + blockiness).
#[derive(Clone, Copy, Debug, Default)]
pub struct SharpnessScorer;

pub fn laplacian_variance(p: &Plane<u8>) -> f64 {
    let (w, h) = p.dims();
    if w < 3 || h < 3 {
        return 0.0;
    }
    let mut vals = Vec::with_capacity((w - 2) * (h - 2));
    for r in 1..h - 1 {
        for c in 1..w - 1 {
            let v = |r: usize, c: usize| p.at(r, c) as f64;
            vals.push(v(r - 1, c) + v(r + 1, c) + v(r, c - 1) + v(r, c + 1) - 4.0 * v(r, c));
        }
    }
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    vals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n
}

/// Mean absolute step across 8-pixel block boundaries minus the mean step
/// elsewhere, over both directions.
pub fn blockiness(p: &Plane<u8>) -> f64 {
    let (w, h) = p.dims();
    let (mut edge, mut ne) = (0.0, 0usize);
    let (mut inner, mut ni) = (0.0, 0usize);
    let mut add = |boundary: bool, d: f64| {
        if boundary {
            edge += d;
            ne += 1;
        } else {
            inner += d;
            ni += 1;
        }
    };
    for r in 0..h {
        for c in 1..w {
            add(c % 8 == 0, (p.at(r, c) as f64 - p.at(r, c - 1) as f64).abs());
        }
    }
    for r in 1..h {
        for c in 0..w {
            add(r % 8 == 0, (p.at(r, c) as f64 - p.at(r - 1, c) as f64).abs());
        }
    }
    if ne == 0 || ni == 0 {
        return 0.0;
    }
    edge / ne as f64 - inner / ni as f64
}

impl QualityScorer for SharpnessScorer {
    fn score(&self, luma: &Plane<u8>) -> f64 {
        laplacian_variance(luma) / (1.0 + blockiness(luma).max(0.0))
    }
}

/// How the auxiliary view is picked.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RvsPolicy {
    /// Highest [`SharpnessScorer`] score.
    #[default]
    Sharpness,
    /// Nearest candidate, then lowest temporal layer, then row-major order.
    Nearest,
}

impl RvsPolicy {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "sharpness" => Ok(RvsPolicy::Sharpness),
            "nearest" => Ok(RvsPolicy::Nearest),
            _ => Err(Error::InvalidArgument(format!("unknown RVS policy {name}"))),
        }
    }
}

/// Picks the candidate with the best score; ties go to the nearer view, then
/// row-major order.
pub fn select_with_scorer(target: AngularPos, candidates: &[Candidate<'_>], scorer: &dyn QualityScorer) -> Result<AngularPos> {
    let scored: Vec<(f64, &Candidate)> = candidates.iter().map(|c| (scorer.score(c.luma), c)).collect();
    scored
        .into_iter()
        .max_by(|(sa, a), (sb, b)| {
            sa.total_cmp(sb)
                .then(b.pos.chebyshev(target).cmp(&a.pos.chebyshev(target)))
                .then(b.pos.cmp(&a.pos))
        })
        .map(|(_, c)| c.pos)
        .ok_or_else(|| Error::InvalidArgument("no reference candidates".into()))
}

pub fn select_reference(target: AngularPos, candidates: &[Candidate<'_>], policy: RvsPolicy) -> Result<AngularPos> {
    match policy {
        RvsPolicy::Sharpness => select_with_scorer(target, candidates, &SharpnessScorer),
        RvsPolicy::Nearest => candidates
            .iter()
            .min_by_key(|c| (c.pos.chebyshev(target), c.tl, c.pos))
            .map(|c| c.pos)
            .ok_or_else(|| Error::InvalidArgument("no reference candidates".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_rule() {
        let p = Plane::new(8, 8, 0u8);
        let cands: Vec<Candidate> = [(3, 3), (0, 3), (3, 0), (0, 0)]
            .iter()
            .map(|&(u, v)| Candidate {
                pos: AngularPos::new(u, v),
                tl: 0,
                luma: &p,
            })
            .collect();
        assert_eq!(select_reference(AngularPos::new(1, 1), &cands, RvsPolicy::Nearest).unwrap(), AngularPos::new(0, 0));
        assert_eq!(select_reference(AngularPos::new(1, 1), &cands[..1], RvsPolicy::Sharpness).unwrap(), AngularPos::new(3, 3));
        assert!(select_reference(AngularPos::new(1, 1), &[], RvsPolicy::Nearest).is_err());
    }

    #[test]
    fn ties_prefer_near_then_row_major() {
        let p = Plane::new(8, 8, 50u8);
        let mk = |u, v| Candidate {
            pos: AngularPos::new(u, v),
            tl: 1,
            luma: &p,
        };
        let got = select_reference(AngularPos::new(2, 2), &[mk(7, 7), mk(3, 0), mk(0, 3)], RvsPolicy::Sharpness).unwrap();
        assert_eq!(got, AngularPos::new(0, 3));
    }

    #[test]
    fn blocky_images_score_lower() {
        let smooth = Plane::from_fn(32, 32, |r, c| (r * 3 + c * 2) as u8);
        let blocky = Plane::from_fn(32, 32, |r, c| ((r / 8) * 24 + (c / 8) * 16) as u8);
        assert!(blockiness(&blocky) > blockiness(&smooth));
    }
}

use super::warp::warp_buffer;
use super::D2GanConfig;
use crate::error::{Error, Result};
use crate::lf::{AngularPos, Plane};
use crate::structure::quadrant_of;

/// Per-level mean and population std of the warped references, interleaved
/// as (mean, std) channel pairs in level order.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVolume {
    pub levels: Vec<f64>,
    pub channels: Vec<Plane<f64>>,
}

impl FeatureVolume {
    pub fn mean(&self, level: usize) -> &Plane<f64> {
        &self.channels[2 * level]
    }

    pub fn std(&self, level: usize) -> &Plane<f64> {
        &self.channels[2 * level + 1]
    }
}

/// `count` disparities evenly spanning [-d_max, d_max].
pub fn disparity_levels(count: usize, d_max: f64) -> Vec<f64> {
    (0..count)
        .map(|i| -d_max + 2.0 * d_max * i as f64 / (count - 1) as f64)
        .collect()
}

/// Fills `out` (2·levels maps of h·w) from equally sized reference buffers.
pub(crate) fn feature_maps(refs: &[&[f64]], h: usize, w: usize, deltas: &[(f64, f64)], levels: &[f64], out: &mut [f64]) {
    let hw = h * w;
    let n = refs.len() as f64;
    for (l, &d) in levels.iter().enumerate() {
        let dmap = vec![d; hw];
        let warped: Vec<Vec<f64>> = refs
            .iter()
            .zip(deltas)
            .map(|(r, &delta)| warp_buffer(r, h, w, 0, delta, &dmap, h, w).0)
            .collect();
        let (mean_out, rest) = out[2 * l * hw..(2 * l + 2) * hw].split_at_mut(hw);
        for i in 0..hw {
            let mean = warped.iter().map(|v| v[i]).sum::<f64>() / n;
            let var = warped.iter().map(|v| (v[i] - mean).powi(2)).sum::<f64>() / n;
            mean_out[i] = mean;
            rest[i] = var.max(0.0).sqrt();
        }
    }
}

/// Checks that `positions` are exactly the corners of the quadrant holding `q`.
pub(crate) fn check_corner_refs(positions: &[AngularPos], q: AngularPos, grid: (usize, usize)) -> Result<()> {
    let quadrant = quadrant_of(q, grid.0, grid.1)?;
    let mut want = quadrant.corners().to_vec();
    let mut got = positions.to_vec();
    want.sort();
    got.sort();
    if want != got {
        return Err(Error::InvalidArgument(format!(
            "references {positions:?} are not the corners of the quadrant holding {q}"
        )));
    }
    Ok(())
}

pub fn build_features(
    refs: &[Plane<f64>],
    positions: &[AngularPos],
    q: AngularPos,
    grid: (usize, usize),
    config: &D2GanConfig,
) -> Result<FeatureVolume> {
    config.validate()?;
    if refs.len() != positions.len() {
        return Err(Error::InvalidArgument(format!(
            "{} references for {} positions",
            refs.len(),
            positions.len()
        )));
    }
    check_corner_refs(positions, q, grid)?;
    let (w, h) = refs[0].dims();
    if refs.iter().any(|r| r.dims() != (w, h)) {
        return Err(Error::DimensionMismatch("reference views differ in size".into()));
    }
    let levels = disparity_levels(config.levels, config.d_max);
    let deltas: Vec<(f64, f64)> = positions.iter().map(|p| p.delta(q)).collect();
    let bufs: Vec<&[f64]> = refs.iter().map(|r| r.data()).collect();
    let mut out = vec![0.0; 2 * levels.len() * h * w];
    feature_maps(&bufs, h, w, &deltas, &levels, &mut out);
    let channels = out
        .chunks(h * w)
        .map(|c| Plane::from_vec(w, h, c.to_vec()))
        .collect::<Result<_>>()?;
    Ok(FeatureVolume { levels, channels })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corners() -> Vec<AngularPos> {
        vec![
            AngularPos::new(0, 0),
            AngularPos::new(3, 3),
            AngularPos::new(0, 3),
            AngularPos::new(3, 0),
        ]
    }

    #[test]
    fn levels_span_range() {
        assert_eq!(disparity_levels(9, 4.0), vec![-4.0, -3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn constant_views() {
        let cfg = D2GanConfig::default();
        let same = vec![Plane::new(6, 5, 0.4); 4];
        let fv = build_features(&same, &corners(), AngularPos::new(1, 2), (8, 8), &cfg).unwrap();
        assert_eq!(fv.channels.len(), 18);
        for l in 0..9 {
            assert!(fv.std(l).data().iter().all(|&v| v == 0.0));
        }
        let mixed = vec![
            Plane::new(6, 5, 10.0),
            Plane::new(6, 5, 20.0),
            Plane::new(6, 5, 10.0),
            Plane::new(6, 5, 20.0),
        ];
        let fv = build_features(&mixed, &corners(), AngularPos::new(1, 2), (8, 8), &cfg).unwrap();
        for l in 0..9 {
            assert!(fv.mean(l).data().iter().all(|&v| (v - 15.0).abs() < 1e-12));
            assert!(fv.std(l).data().iter().all(|&v| (v - 5.0).abs() < 1e-12));
        }
    }

    #[test]
    fn rejects_foreign_refs() {
        let cfg = D2GanConfig::default();
        let refs = vec![Plane::new(4, 4, 0.0); 4];
        let mut pos = corners();
        pos[1] = AngularPos::new(4, 4);
        assert!(build_features(&refs, &pos, AngularPos::new(1, 1), (8, 8), &cfg).is_err());
        assert!(build_features(&refs, &corners(), AngularPos::new(5, 5), (8, 8), &cfg).is_err());
    }
}

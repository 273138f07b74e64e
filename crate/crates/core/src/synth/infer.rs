use super::features::check_corner_refs;
use super::model::{GeneratorInput, GeneratorPair, DISPARITY_MARGIN, GENERATOR_MARGIN, INPUT_PATCH, OUTPUT_PATCH};
use super::train::{crop_refs, normalized_position};
use super::warp::DisparityMap;
use crate::error::{Error, Result};
use crate::lf::{patch_origins, AngularPos, Plane, View};
use crate::nn::Tensor4;
use crate::structure::quadrant_of;

/// Tiles processed per generator call.
const TILE_BATCH: usize = 8;

/// Synthesizes the luma of `q` and its disparity by tiling 36x36 outputs over
/// the view; each tile reads a 60x60 edge-replicated input window.
pub fn synthesize_view(
    refs: &[Plane<f64>],
    positions: &[AngularPos],
    q: AngularPos,
    grid: (usize, usize),
    model: &GeneratorPair,
) -> Result<(Plane<f64>, DisparityMap)> {
    if refs.len() != 4 || positions.len() != 4 {
        return Err(Error::InvalidArgument("synthesis needs exactly four references".into()));
    }
    check_corner_refs(positions, q, grid)?;
    let (w, h) = refs[0].dims();
    if refs.iter().any(|r| r.dims() != (w, h)) {
        return Err(Error::DimensionMismatch("reference views differ in size".into()));
    }
    let rows = patch_origins(h, OUTPUT_PATCH, OUTPUT_PATCH)?;
    let cols = patch_origins(w, OUTPUT_PATCH, OUTPUT_PATCH)?;
    let tiles: Vec<(usize, usize)> = rows.iter().flat_map(|&r| cols.iter().map(move |&c| (r, c))).collect();
    let deltas: [(f64, f64); 4] = [0, 1, 2, 3].map(|i| positions[i].delta(q));
    let position = normalized_position(q, grid);
    let planes: Vec<&Plane<f64>> = refs.iter().collect();

    let mut luma = Plane::new(w, h, 0.0);
    let mut disparity = Plane::new(w, h, 0.0);
    for chunk in tiles.chunks(TILE_BATCH) {
        let mut data = Vec::with_capacity(chunk.len() * 4 * INPUT_PATCH * INPUT_PATCH);
        for &(r, c) in chunk {
            crop_refs(&planes, r, c, INPUT_PATCH, &mut data);
        }
        let input = GeneratorInput {
            refs: Tensor4::new([chunk.len(), 4, INPUT_PATCH, INPUT_PATCH], data)?,
            deltas: vec![deltas; chunk.len()],
            position: vec![position; chunk.len()],
        };
        let out = model.forward(&input)?;
        let inner = GENERATOR_MARGIN - DISPARITY_MARGIN;
        for (i, &(r, c)) in chunk.iter().enumerate() {
            for y in 0..OUTPUT_PATCH {
                for x in 0..OUTPUT_PATCH {
                    luma.set(r + y, c + x, out.color.at(i, 0, y, x));
                    disparity.set(r + y, c + x, out.disparity.at(i, 0, y + inner, x + inner));
                }
            }
        }
    }
    Ok((luma, disparity))
}

/// Produces a missing view from the four corner references of its quadrant.
pub trait ViewSynthesizer: Sync {
    /// Luma in [0, 1]; `refs[i]` is the view at `positions[i]`.
    fn synthesize_luma(
        &self,
        refs: &[Plane<f64>],
        positions: &[AngularPos],
        q: AngularPos,
        grid: (usize, usize),
    ) -> Result<Plane<f64>>;
}

impl ViewSynthesizer for GeneratorPair {
    fn synthesize_luma(
        &self,
        refs: &[Plane<f64>],
        positions: &[AngularPos],
        q: AngularPos,
        grid: (usize, usize),
    ) -> Result<Plane<f64>> {
        Ok(synthesize_view(refs, positions, q, grid, self)?.0)
    }
}

/// Full 4:2:0 view at `q`: synthesized luma, chroma averaged over the corner
/// references. `lookup` supplies decoded views by position.
pub fn synthesize_full_view<'a>(
    synth: &dyn ViewSynthesizer,
    q: AngularPos,
    grid: (usize, usize),
    lookup: impl Fn(AngularPos) -> Option<&'a View>,
) -> Result<View> {
    let corners = quadrant_of(q, grid.0, grid.1)?.corners();
    let views = corners
        .iter()
        .map(|&p| lookup(p).ok_or_else(|| Error::InvalidArgument(format!("reference {p} not available"))))
        .collect::<Result<Vec<&View>>>()?;
    let luma_refs: Vec<Plane<f64>> = views.iter().map(|v| v.y.to_unit()).collect();
    let y = synth.synthesize_luma(&luma_refs, &corners, q, grid)?.to_u8();
    let avg = |pick: fn(&View) -> &Plane<u8>| -> Plane<u8> {
        let first = pick(views[0]);
        Plane::from_fn(first.width(), first.height(), |r, c| {
            let s: u32 = views.iter().map(|v| pick(v).at(r, c) as u32).sum();
            ((s + 2) / 4) as u8
        })
    };
    View::new(y, avg(|v| &v.cb), avg(|v| &v.cr))
}

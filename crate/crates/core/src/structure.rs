//! Pseudo-video arrangement of a light field: one hierarchical GOP per grid
//! quadrant, temporal-layer assignment, reference layout and the inter-view
//! dependency graph.
//!
//! Within a GOP of `n` views, local slot `s` sits on temporal layer
//! `log2(n) - trailing_zeros(s)` (slot 0 on layer 0). For the usual 16-view
//! GOP that gives slot 0 -> TL0, 8 -> TL1, {4, 12} -> TL2, {2, 6, 10, 14} -> TL3
//! and odd slots -> TL4. The four quadrant corners take slots 0, n/2, n/4 and
//! 3n/4 (outer corner, inner corner, then the other two in row-major order),
//! so exactly the corners land on layers 0-2. The remaining views follow a
//! clockwise spiral that starts next to the outer corner.

use crate::error::{Error, Result};
use crate::lf::AngularPos;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;

/// Highest temporal layer used by the 16-view GOP.
pub const MAX_TEMPORAL_LAYER: u8 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TemporalLayer(u8);

impl TemporalLayer {
    pub fn new(tl: u8) -> Result<Self> {
        if tl > MAX_TEMPORAL_LAYER {
            return Err(Error::InvalidArgument(format!("temporal layer {tl} > {MAX_TEMPORAL_LAYER}")));
        }
        Ok(Self(tl))
    }

    pub fn get(self) -> u8 {
        self.0
    }

    /// Layers 0-2 carry reference views.
    pub fn is_reference(self) -> bool {
        self.0 <= 2
    }
}

impl fmt::Display for TemporalLayer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Role {
    Reference,
    NonReference,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Reference => "reference",
            Role::NonReference => "nonreference",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Entry {
    pub poc: u32,
    pub pos: AngularPos,
    pub tl: TemporalLayer,
    pub role: Role,
}

/// Reference views of a grid: the four corners of every quadrant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReferenceLayout {
    pub positions: BTreeSet<AngularPos>,
    /// Inner corner of the top-left quadrant.
    pub central: AngularPos,
}

/// Geometry of one grid quadrant.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Quadrant {
    pub index: usize,
    pub row0: usize,
    pub col0: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Quadrant {
    /// Corner cells ordered outer corner, inner corner, then the two remaining
    /// corners in row-major order.
    pub fn corners(&self) -> [AngularPos; 4] {
        let top = self.row0;
        let bottom = self.row0 + self.rows - 1;
        let left = self.col0;
        let right = self.col0 + self.cols - 1;
        let (outer_u, inner_u) = if self.index < 2 { (top, bottom) } else { (bottom, top) };
        let (outer_v, inner_v) = if self.index % 2 == 0 { (left, right) } else { (right, left) };
        let outer = AngularPos::new(outer_u, outer_v);
        let inner = AngularPos::new(inner_u, inner_v);
        let mut rest: Vec<AngularPos> = [
            AngularPos::new(top, left),
            AngularPos::new(top, right),
            AngularPos::new(bottom, left),
            AngularPos::new(bottom, right),
        ]
        .into_iter()
        .filter(|&p| p != outer && p != inner)
        .collect();
        rest.sort();
        [outer, inner, rest[0], rest[1]]
    }

    pub fn contains(&self, pos: AngularPos) -> bool {
        (self.row0..self.row0 + self.rows).contains(&pos.u)
            && (self.col0..self.col0 + self.cols).contains(&pos.v)
    }

    /// All cells in clockwise spiral order starting at the outer corner.
    fn spiral(&self) -> Vec<AngularPos> {
        let [outer, ..] = self.corners();
        // clockwise: right, down, left, up
        const DIRS: [(isize, isize); 4] = [(0, 1), (1, 0), (0, -1), (-1, 0)];
        let at_top = outer.u == self.row0;
        let at_left = outer.v == self.col0;
        let mut dir = match (at_top, at_left) {
            (true, true) => 0,
            (true, false) => 1,
            (false, false) => 2,
            (false, true) => 3,
        };
        let n = self.rows * self.cols;
        let mut visited = vec![false; n];
        let local = |p: AngularPos| (p.u - self.row0) * self.cols + (p.v - self.col0);
        let mut order = Vec::with_capacity(n);
        let mut cur = outer;
        for step in 0..n {
            order.push(cur);
            visited[local(cur)] = true;
            if step + 1 == n {
                break;
            }
            for _ in 0..4 {
                let (du, dv) = DIRS[dir];
                let nu = cur.u as isize + du;
                let nv = cur.v as isize + dv;
                let next_ok = nu >= self.row0 as isize
                    && nv >= self.col0 as isize
                    && (nu as usize) < self.row0 + self.rows
                    && (nv as usize) < self.col0 + self.cols
                    && !visited[local(AngularPos::new(nu as usize, nv as usize))];
                if next_ok {
                    cur = AngularPos::new(nu as usize, nv as usize);
                    break;
                }
                dir = (dir + 1) % 4;
            }
        }
        order
    }
}

fn check_grid(rows: usize, cols: usize) -> Result<()> {
    if rows < 4 || cols < 4 {
        return Err(Error::UnsupportedGrid {
            rows,
            cols,
            reason: "grid must be at least 4x4",
        });
    }
    if rows % 2 != 0 || cols % 2 != 0 {
        return Err(Error::UnsupportedGrid {
            rows,
            cols,
            reason: "grid dimensions must be even",
        });
    }
    Ok(())
}

/// The four quadrants in top-left, top-right, bottom-left, bottom-right order.
pub fn quadrants(rows: usize, cols: usize) -> Result<[Quadrant; 4]> {
    check_grid(rows, cols)?;
    let (qr, qc) = (rows / 2, cols / 2);
    Ok([0, 1, 2, 3].map(|index| Quadrant {
        index,
        row0: (index / 2) * qr,
        col0: (index % 2) * qc,
        rows: qr,
        cols: qc,
    }))
}

/// Quadrant that contains `pos`.
pub fn quadrant_of(pos: AngularPos, rows: usize, cols: usize) -> Result<Quadrant> {
    quadrants(rows, cols)?
        .into_iter()
        .find(|q| q.contains(pos))
        .ok_or_else(|| Error::InvalidArgument(format!("{pos} outside {rows}x{cols} grid")))
}

pub fn reference_layout(rows: usize, cols: usize) -> Result<ReferenceLayout> {
    let quads = quadrants(rows, cols)?;
    let positions = quads.iter().flat_map(|q| q.corners()).collect();
    Ok(ReferenceLayout {
        positions,
        central: quads[0].corners()[1],
    })
}

fn slot_layer(slot: usize, gop_size: usize) -> u8 {
    if slot == 0 {
        0
    } else {
        (gop_size.trailing_zeros() - slot.trailing_zeros()) as u8
    }
}

/// Ordered pseudo-video sequence: POC `p` belongs to GOP `p / gop_size`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PseudoVideoSequence {
    rows: usize,
    cols: usize,
    gop_size: usize,
    entries: Vec<Entry>,
    by_pos: BTreeMap<AngularPos, u32>,
}

impl PseudoVideoSequence {
    pub fn grid(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn gop_size(&self) -> usize {
        self.gop_size
    }

    pub fn gop_count(&self) -> usize {
        self.entries.len() / self.gop_size
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, poc: u32) -> Option<&Entry> {
        self.entries.get(poc as usize)
    }

    pub fn poc_of(&self, pos: AngularPos) -> Option<u32> {
        self.by_pos.get(&pos).copied()
    }

    pub fn gop_entries(&self, gop: usize) -> &[Entry] {
        &self.entries[gop * self.gop_size..(gop + 1) * self.gop_size]
    }

    pub fn reference_pocs(&self) -> impl Iterator<Item = u32> + '_ {
        self.entries
            .iter()
            .filter(|e| e.role == Role::Reference)
            .map(|e| e.poc)
    }

    /// POCs of one GOP in decode order: ascending layer, then POC.
    pub fn decode_order(&self, gop: usize) -> Vec<u32> {
        let mut pocs: Vec<&Entry> = self.gop_entries(gop).iter().collect();
        pocs.sort_by_key(|e| (e.tl, e.poc));
        pocs.into_iter().map(|e| e.poc).collect()
    }

    /// Writes the `poc,u,v,tl,role` CSV dump.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["poc", "u", "v", "tl", "role"])?;
        for e in &self.entries {
            w.write_record([
                e.poc.to_string(),
                e.pos.u.to_string(),
                e.pos.v.to_string(),
                e.tl.to_string(),
                e.role.as_str().to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Prediction references of every POC.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DependencyGraph {
    edges: Vec<Vec<u32>>,
}

impl DependencyGraph {
    /// References of `poc`, nearest first (ties to the earlier POC).
    pub fn refs(&self, poc: u32) -> &[u32] {
        &self.edges[poc as usize]
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Kahn topological order, or `None` when the graph has a cycle.
    pub fn topological_order(&self) -> Option<Vec<u32>> {
        let n = self.edges.len();
        let mut indegree = vec![0usize; n];
        let mut users: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (poc, refs) in self.edges.iter().enumerate() {
            indegree[poc] = refs.len();
            for &r in refs {
                users[r as usize].push(poc);
            }
        }
        let mut ready: Vec<usize> = (0..n).filter(|&p| indegree[p] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(p) = ready.pop() {
            order.push(p as u32);
            for &user in &users[p] {
                indegree[user] -= 1;
                if indegree[user] == 0 {
                    ready.push(user);
                }
            }
        }
        (order.len() == n).then_some(order)
    }
}

/// Arranges the grid into per-quadrant hierarchical GOPs.
///
/// Quadrants must hold 4 or 16 views (e.g. 4x4 or 8x8 grids).
pub fn build_sequence(rows: usize, cols: usize) -> Result<(PseudoVideoSequence, DependencyGraph)> {
    let quads = quadrants(rows, cols)?;
    let gop_size = quads[0].rows * quads[0].cols;
    if gop_size != 4 && gop_size != 16 {
        return Err(Error::UnsupportedGrid {
            rows,
            cols,
            reason: "quadrants must contain 4 or 16 views",
        });
    }
    let corner_slots = [0, gop_size / 2, gop_size / 4, 3 * gop_size / 4];
    let mut entries = Vec::with_capacity(rows * cols);
    let mut edges = Vec::with_capacity(rows * cols);
    for quad in &quads {
        let corners = quad.corners();
        let mut slots: Vec<Option<AngularPos>> = vec![None; gop_size];
        for (slot, pos) in corner_slots.iter().zip(corners) {
            slots[*slot] = Some(pos);
        }
        let mut others = quad.spiral().into_iter().filter(|p| !corners.contains(p));
        for slot in slots.iter_mut().filter(|s| s.is_none()) {
            *slot = others.next();
        }
        let base = (quad.index * gop_size) as u32;
        for (s, pos) in slots.into_iter().enumerate() {
            let tl = TemporalLayer(slot_layer(s, gop_size));
            entries.push(Entry {
                poc: base + s as u32,
                pos: pos.expect("spiral fills every slot"),
                tl,
                role: if tl.is_reference() { Role::Reference } else { Role::NonReference },
            });
            let mut refs = Vec::new();
            if s > 0 {
                let layer = tl.get();
                if let Some(l) = (0..s).rev().find(|&o| slot_layer(o, gop_size) < layer) {
                    refs.push(base + l as u32);
                }
                if let Some(r) = (s + 1..gop_size).find(|&o| slot_layer(o, gop_size) < layer) {
                    refs.push(base + r as u32);
                }
                let poc = base + s as u32;
                refs.sort_by_key(|&r| (r.abs_diff(poc), r));
            }
            edges.push(refs);
        }
    }
    let by_pos = entries.iter().map(|e| (e.pos, e.poc)).collect();
    Ok((
        PseudoVideoSequence {
            rows,
            cols,
            gop_size,
            entries,
            by_pos,
        },
        DependencyGraph { edges },
    ))
}

/// Consecutive (TL4, TL3, TL4) POC triples evaluated together by the drop decision.
pub fn rdo_triples(seq: &PseudoVideoSequence) -> Vec<(u32, u32, u32)> {
    seq.entries
        .iter()
        .filter(|e| e.tl.get() == 3)
        .map(|e| (e.poc - 1, e.poc, e.poc + 1))
        .collect()
}

/// Angular positions of the POCs absent from a stream, in POC order.
pub fn detect_missing(present: &BTreeSet<u32>, seq: &PseudoVideoSequence) -> Result<Vec<AngularPos>> {
    if let Some(lost) = seq.reference_pocs().find(|p| !present.contains(p)) {
        return Err(Error::CorruptStream(format!("reference poc {lost} missing")));
    }
    Ok(seq
        .entries
        .iter()
        .filter(|e| !present.contains(&e.poc))
        .map(|e| e.pos)
        .collect())
}

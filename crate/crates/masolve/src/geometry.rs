//! Uniform grids over intervals and axis-aligned squares, node
//! classification, and the orthogonal integer direction pairs used by the
//! wide-stencil operators.
//!
//! Node indexing is row-major with the first axis fastest, so reports and
//! solution dumps are byte-reproducible across runs.

use serde::Serialize;

use crate::error::{Error, Result};

/// Coordinates of a node or probe point. One-dimensional domains use the
/// first component and keep the second at zero.
pub type Point = [f64; 2];

/// Integer lattice offset (stencil direction).
pub type Offset = [i32; 2];

/// Absolute slack used when deciding whether a point sits on the boundary.
/// Probe points and lattice nodes are binary fractions, so in practice the
/// comparisons are exact; the slack only guards externally supplied points.
pub const BOUNDARY_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum DomainKind {
    Interval,
    Square,
}

/// An interval `[lo, hi]` or an axis-aligned square `[lo, hi]^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Domain {
    pub kind: DomainKind,
    /// Per-axis closed bounds; the second axis is unused for intervals.
    pub bounds: [[f64; 2]; 2],
}

impl Domain {
    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        check_axis(lo, hi)?;
        Ok(Domain {
            kind: DomainKind::Interval,
            bounds: [[lo, hi], [0.0, 0.0]],
        })
    }

    pub fn square(lo: f64, hi: f64) -> Result<Self> {
        check_axis(lo, hi)?;
        Ok(Domain {
            kind: DomainKind::Square,
            bounds: [[lo, hi], [lo, hi]],
        })
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            DomainKind::Interval => 1,
            DomainKind::Square => 2,
        }
    }

    pub fn axis_len(&self) -> f64 {
        self.bounds[0][1] - self.bounds[0][0]
    }

    /// Whether `x` lies in the closed domain (up to [`BOUNDARY_TOL`]).
    pub fn contains(&self, x: Point) -> bool {
        (0..self.dim()).all(|a| {
            let [lo, hi] = self.bounds[a];
            x[a] >= lo - BOUNDARY_TOL && x[a] <= hi + BOUNDARY_TOL
        })
    }

    /// Whether `x` lies on the boundary of the closed domain.
    pub fn on_boundary(&self, x: Point) -> bool {
        self.contains(x)
            && (0..self.dim()).any(|a| {
                let [lo, hi] = self.bounds[a];
                (x[a] - lo).abs() <= BOUNDARY_TOL || (x[a] - hi).abs() <= BOUNDARY_TOL
            })
    }
}

fn check_axis(lo: f64, hi: f64) -> Result<()> {
    if !lo.is_finite() || !hi.is_finite() || lo >= hi {
        return Err(Error::DegenerateBounds { lo, hi });
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum NodeClass {
    Interior,
    Boundary,
}

/// A uniform lattice over a [`Domain`] with `n_per_axis` intervals per axis.
///
/// Grids are immutable once built and safe to share across threads.
#[derive(Clone, Debug)]
pub struct Grid {
    pub domain: Domain,
    pub n_per_axis: usize,
    /// Spacing, exactly `axis length / n_per_axis`.
    pub h: f64,
    pub nodes: Vec<Point>,
    pub node_class: Vec<NodeClass>,
}

impl Grid {
    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, idx: usize) -> Point {
        self.nodes[idx]
    }

    pub fn class(&self, idx: usize) -> NodeClass {
        self.node_class[idx]
    }

    pub fn is_interior(&self, idx: usize) -> bool {
        self.node_class[idx] == NodeClass::Interior
    }

    fn points_per_axis(&self) -> usize {
        self.n_per_axis + 1
    }

    /// Flat index of a multi-index; first axis fastest.
    pub fn flat_index(&self, mi: [usize; 2]) -> usize {
        match self.dim() {
            1 => mi[0],
            _ => mi[1] * self.points_per_axis() + mi[0],
        }
    }

    pub fn multi_index(&self, idx: usize) -> [usize; 2] {
        match self.dim() {
            1 => [idx, 0],
            _ => [idx % self.points_per_axis(), idx / self.points_per_axis()],
        }
    }

    /// Node reached from `idx` by the lattice offset `dir`, if it stays on
    /// the grid.
    pub fn offset_node(&self, idx: usize, dir: Offset) -> Option<usize> {
        let mi = self.multi_index(idx);
        let n = self.n_per_axis as i64;
        let mut out = [0usize; 2];
        for a in 0..self.dim() {
            let shifted = mi[a] as i64 + dir[a] as i64;
            if shifted < 0 || shifted > n {
                return None;
            }
            out[a] = shifted as usize;
        }
        Some(self.flat_index(out))
    }

    /// Node index closest to `x`; panics if `x` is outside the closed domain.
    pub fn nearest_node(&self, x: Point) -> usize {
        assert!(self.domain.contains(x), "point outside the domain");
        let mut mi = [0usize; 2];
        for a in 0..self.dim() {
            let lo = self.domain.bounds[a][0];
            let i = ((x[a] - lo) / self.h).round();
            mi[a] = (i.max(0.0) as usize).min(self.n_per_axis);
        }
        self.flat_index(mi)
    }

    pub fn interior_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_nodes()).filter(|&i| self.node_class[i] == NodeClass::Interior)
    }

    pub fn boundary_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_nodes()).filter(|&i| self.node_class[i] == NodeClass::Boundary)
    }
}

/// Builds the uniform grid with `(n_per_axis + 1)^dim` nodes.
pub fn build_grid(domain: &Domain, n_per_axis: usize) -> Result<Grid> {
    if n_per_axis < 2 {
        return Err(Error::TooFewIntervals(n_per_axis));
    }
    let dim = domain.dim();
    let h = domain.axis_len() / n_per_axis as f64;
    let pts = n_per_axis + 1;
    let coord = |axis: usize, i: usize| -> f64 {
        let [lo, hi] = domain.bounds[axis];
        // Pin the last node to the upper bound so classification is exact.
        if i == n_per_axis {
            hi
        } else {
            lo + i as f64 * h
        }
    };
    let n_nodes = pts.pow(dim as u32);
    let mut nodes = Vec::with_capacity(n_nodes);
    let mut node_class = Vec::with_capacity(n_nodes);
    match dim {
        1 => {
            for i in 0..pts {
                nodes.push([coord(0, i), 0.0]);
                node_class.push(edge_class(&[i], n_per_axis));
            }
        }
        _ => {
            for j in 0..pts {
                for i in 0..pts {
                    nodes.push([coord(0, i), coord(1, j)]);
                    node_class.push(edge_class(&[i, j], n_per_axis));
                }
            }
        }
    }
    Ok(Grid {
        domain: *domain,
        n_per_axis,
        h,
        nodes,
        node_class,
    })
}

fn edge_class(mi: &[usize], n: usize) -> NodeClass {
    if mi.iter().any(|&i| i == 0 || i == n) {
        NodeClass::Boundary
    } else {
        NodeClass::Interior
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum NeighborSpan {
    BothIn,
    Clipped,
}

/// Reports whether `node ± dir` both land on grid nodes inside the closed
/// domain.
pub fn neighbors_in_domain(grid: &Grid, node: usize, dir: Offset) -> NeighborSpan {
    let neg = [-dir[0], -dir[1]];
    if grid.offset_node(node, dir).is_some() && grid.offset_node(node, neg).is_some() {
        NeighborSpan::BothIn
    } else {
        NeighborSpan::Clipped
    }
}

/// A pair of exactly orthogonal primitive integer directions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct DirectionPair {
    pub v: Offset,
    pub w: Offset,
}

impl DirectionPair {
    pub fn v_norm2(&self) -> i32 {
        self.v[0] * self.v[0] + self.v[1] * self.v[1]
    }

    pub fn w_norm2(&self) -> i32 {
        self.w[0] * self.w[0] + self.w[1] * self.w[1]
    }
}

/// All orthogonal primitive integer direction pairs with max-norm at most
/// `width`, deduplicated up to sign and swap, in a fixed enumeration order.
///
/// Width 1 yields the axis pair and the diagonal pair; larger widths add
/// rotations such as `{(2,1), (-1,2)}`.
pub fn stencil_pairs(width: u8) -> Result<Vec<DirectionPair>> {
    if !(1..=3).contains(&width) {
        return Err(Error::UnsupportedWidth(width));
    }
    let w = width as i32;
    let mut seen = std::collections::HashSet::new();
    let mut pairs = Vec::new();
    for a in -w..=w {
        for b in -w..=w {
            let v = [a, b];
            if (a == 0 && b == 0) || gcd(a.abs(), b.abs()) != 1 {
                continue;
            }
            // The orthogonal complement of a primitive vector is unique up
            // to sign and has the same max-norm.
            let perp = [-b, a];
            let pair = canonical_pair(v, perp);
            if seen.insert(pair) {
                pairs.push(pair);
            }
        }
    }
    pairs.sort_by_key(|p| {
        let mn = p
            .v
            .iter()
            .chain(p.w.iter())
            .map(|c| c.abs())
            .max()
            .unwrap();
        (mn, p.v_norm2() + p.w_norm2(), p.v, p.w)
    });
    Ok(pairs)
}

/// Sign-normalizes both vectors (first nonzero component positive) and
/// orders them lexicographically, so a pair has one representative.
fn canonical_pair(v: Offset, w: Offset) -> DirectionPair {
    let cv = canonical_vec(v);
    let cw = canonical_vec(w);
    if cv <= cw {
        DirectionPair { v: cv, w: cw }
    } else {
        DirectionPair { v: cw, w: cv }
    }
}

fn canonical_vec(v: Offset) -> Offset {
    if v[0] < 0 || (v[0] == 0 && v[1] < 0) {
        [-v[0], -v[1]]
    } else {
        v
    }
}

fn gcd(a: i32, b: i32) -> i32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

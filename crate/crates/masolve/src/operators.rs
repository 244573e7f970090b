//! Discrete operators: the globally elliptic extension of the determinant,
//! directional second differences, the monotone wide-stencil operator, the
//! one-dimensional upwind gradient, full scheme residuals, and the pointwise
//! boundary envelopes.
//!
//! All operations here are pure functions of their inputs; residuals may be
//! evaluated node-by-node in any order.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{DirectionPair, Grid, NeighborSpan, Offset, Point};
use crate::geometry::neighbors_in_domain;
use crate::problems::PdeProblem;

/// A symmetric 2x2 matrix. One-dimensional Hessians live in `a11` with the
/// other entries zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SymmetricMatrix2 {
    pub a11: f64,
    pub a12: f64,
    pub a22: f64,
}

impl SymmetricMatrix2 {
    pub fn new(a11: f64, a12: f64, a22: f64) -> Self {
        Self { a11, a12, a22 }
    }

    pub fn diag(a: f64, b: f64) -> Self {
        Self::new(a, 0.0, b)
    }

    pub fn zero() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }

    pub fn scalar(a: f64) -> Self {
        Self::new(a, 0.0, 0.0)
    }

    /// Matrix with eigenvalues `(l1, l2)` and the first eigenvector at
    /// angle `theta` to the first axis.
    pub fn from_eigen(l1: f64, l2: f64, theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self::new(
            c * c * l1 + s * s * l2,
            c * s * (l1 - l2),
            s * s * l1 + c * c * l2,
        )
    }

    pub fn det(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a12
    }

    pub fn trace(&self) -> f64 {
        self.a11 + self.a22
    }

    /// Eigenvalues in ascending order, by the closed trace/discriminant
    /// form. The discriminant is a sum of squares; values within 1e-14 of
    /// zero are clamped so rounding can never produce a NaN.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let mean = 0.5 * (self.a11 + self.a22);
        let half_gap = 0.5 * (self.a11 - self.a22);
        let mut disc = half_gap * half_gap + self.a12 * self.a12;
        if disc < 0.0 && disc > -1e-14 {
            disc = 0.0;
        }
        let r = disc.sqrt();
        [mean - r, mean + r]
    }

    /// Quadratic form along an integer offset, `d^T X d`.
    pub fn quad_form(&self, d: Offset) -> f64 {
        let (d0, d1) = (d[0] as f64, d[1] as f64);
        self.a11 * d0 * d0 + 2.0 * self.a12 * d0 * d1 + self.a22 * d1 * d1
    }
}

/// Globally elliptic extension of the determinant:
/// the product of the positive parts of the eigenvalues plus the sum of
/// the negative parts. Equals `det(X)` on the positive semidefinite cone
/// and is strictly negative whenever an eigenvalue is negative.
pub fn det_plus(x: &SymmetricMatrix2) -> f64 {
    let [l1, l2] = x.eigenvalues();
    l1.max(0.0) * l2.max(0.0) + l1.min(0.0) + l2.min(0.0)
}

/// Real values attached to the nodes of a shared [`Grid`].
#[derive(Clone, Debug)]
pub struct GridFunction {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.n_nodes());
        Self { grid, values }
    }

    pub fn constant(grid: Arc<Grid>, c: f64) -> Self {
        let n = grid.n_nodes();
        Self::new(grid, vec![c; n])
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(Point) -> f64) -> Self {
        let values = (0..grid.n_nodes()).map(|i| f(grid.node(i))).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn value(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    pub fn set_value(&mut self, idx: usize, v: f64) {
        self.values[idx] = v;
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &GridFunction) -> f64 {
        self.values
            .iter()
            .zip(other.values.iter())
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Multilinear interpolation at an arbitrary point of the closed domain.
    pub fn value_at_point(&self, x: Point) -> f64 {
        let g = &self.grid;
        let n = g.n_per_axis;
        let cell = |a: usize| -> (usize, f64) {
            let lo = g.domain.bounds[a][0];
            let t = ((x[a] - lo) / g.h).clamp(0.0, n as f64);
            let i = (t.floor() as usize).min(n - 1);
            (i, t - i as f64)
        };
        match g.dim() {
            1 => {
                let (i, t) = cell(0);
                let a = self.values[i];
                let b = self.values[i + 1];
                a + t * (b - a)
            }
            _ => {
                let (i, s) = cell(0);
                let (j, t) = cell(1);
                let v00 = self.values[g.flat_index([i, j])];
                let v10 = self.values[g.flat_index([i + 1, j])];
                let v01 = self.values[g.flat_index([i, j + 1])];
                let v11 = self.values[g.flat_index([i + 1, j + 1])];
                let lo = v00 + s * (v10 - v00);
                let hi = v01 + s * (v11 - v01);
                lo + t * (hi - lo)
            }
        }
    }
}

/// Directional second difference along `dir`, normalized so it is exact for
/// quadratics: `(u(x + h d) + u(x - h d) - 2 u(x)) / (h^2 |d|^2)`.
pub fn delta2(u: &GridFunction, node: usize, dir: Offset) -> Result<f64> {
    let g = u.grid();
    let fwd = g.offset_node(node, dir);
    let bwd = g.offset_node(node, [-dir[0], -dir[1]]);
    match (fwd, bwd) {
        (Some(f), Some(b)) => {
            let norm2 = (dir[0] * dir[0] + dir[1] * dir[1]) as f64;
            Ok((u.value(f) + u.value(b) - 2.0 * u.value(node)) / (g.h * g.h * norm2))
        }
        _ => Err(Error::ClippedStencil {
            node,
            dx: dir[0],
            dy: dir[1],
        }),
    }
}

/// Monotone upwind approximation of `|u_x|` at an interior node of a
/// one-dimensional grid: the larger of the two one-sided slopes pointing
/// away from the node, floored at zero.
pub fn grad_upwind_1d(u: &GridFunction, node: usize) -> f64 {
    let g = u.grid();
    debug_assert_eq!(g.dim(), 1);
    debug_assert!(g.is_interior(node));
    let back = (u.value(node) - u.value(node - 1)) / g.h;
    let fwd = (u.value(node) - u.value(node + 1)) / g.h;
    back.max(fwd).max(0.0)
}

fn pair_bracket(dv: f64, dw: f64) -> f64 {
    dv.max(0.0) * dw.max(0.0) + dv.min(0.0) + dw.min(0.0)
}

/// Wide-stencil approximation of the extended determinant of the Hessian:
/// the minimum over available orthogonal direction pairs of the product of
/// positive curvature parts plus the negative parts.
///
/// Pairs clipped by the boundary at this node are skipped; the width-1
/// pairs are always available at interior nodes, so the minimum is taken
/// over a nonempty set there. Ties keep the first pair in enumeration
/// order.
pub fn ma_wide_stencil(u: &GridFunction, node: usize, pairs: &[DirectionPair]) -> Result<f64> {
    let g = u.grid();
    let mut best: Option<f64> = None;
    for p in pairs {
        if neighbors_in_domain(g, node, p.v) == NeighborSpan::Clipped
            || neighbors_in_domain(g, node, p.w) == NeighborSpan::Clipped
        {
            continue;
        }
        let dv = delta2(u, node, p.v)?;
        let dw = delta2(u, node, p.w)?;
        let b = pair_bracket(dv, dw);
        best = Some(match best {
            Some(cur) if cur <= b => cur,
            _ => b,
        });
    }
    best.ok_or(Error::NoAvailablePair(node))
}

/// Per-node right-hand-side cache, valid when `f` ignores `u` and `p`.
pub(crate) struct RhsCache(Option<Vec<f64>>);

impl RhsCache {
    pub(crate) fn build(problem: &PdeProblem, grid: &Grid) -> Self {
        if problem.flags.depends_on_u || problem.flags.depends_on_p {
            RhsCache(None)
        } else {
            let vals = (0..grid.n_nodes())
                .map(|i| (problem.f)(grid.node(i), 0.0, [0.0, 0.0]))
                .collect();
            RhsCache(Some(vals))
        }
    }

    fn get(&self, problem: &PdeProblem, node: usize, x: Point, u_val: f64, p: Point) -> f64 {
        match &self.0 {
            Some(vals) => vals[node],
            None => (problem.f)(x, u_val, p),
        }
    }
}

/// Residual of the full discrete operator together with a per-node clamp
/// `K_i` on the damping step (`dt_i = h^2 / K_i`); boundary rows get 1.
///
/// The clamp charts the row sensitivity `2 * (densest pair weight sum) *
/// (1 + positive-part factor)`, floored at 4 — with the factor taken over
/// the node's whole stencil neighborhood, not just the node itself. A row
/// is coupled to its neighbors' values through the same curvature and
/// upwind terms that stiffen those neighbors' own rows, so a soft node
/// sitting next to a stiff one must step at the stiff rate or the
/// sup-residual grows and the solve stalls in retries.
///
/// Interior rows walk the lattice directly so the hot loop stays free of
/// per-neighbor index arithmetic; arithmetic matches [`delta2`] and
/// [`grad_upwind_1d`] term for term. `scratch` must have one slot per node.
pub(crate) fn residual_and_stiffness(
    problem: &PdeProblem,
    u: &GridFunction,
    pairs: &[DirectionPair],
    rhs: &RhsCache,
    residual: &mut [f64],
    stiffness: &mut [f64],
    scratch: &mut [f64],
) -> Result<()> {
    let g = u.grid().clone();
    debug_assert_eq!(residual.len(), g.n_nodes());
    debug_assert_eq!(stiffness.len(), g.n_nodes());
    debug_assert_eq!(scratch.len(), g.n_nodes());
    let vals = u.values();
    let n = g.n_per_axis as i64;
    let h = g.h;

    for b in g.boundary_indices() {
        residual[b] = vals[b] - (problem.g)(g.node(b));
        stiffness[b] = 1.0;
        scratch[b] = 0.0;
    }

    if g.dim() == 1 {
        for i in 1..g.n_per_axis {
            let x = g.node(i);
            let d = (vals[i + 1] + vals[i - 1] - 2.0 * vals[i]) / (h * h);
            let back = (vals[i] - vals[i - 1]) / h;
            let fwd = (vals[i] - vals[i + 1]) / h;
            let grad = back.max(fwd).max(0.0);
            residual[i] = -d + rhs.get(problem, i, x, vals[i], [grad, 0.0]);
            // Sensitivity through the upwind slope, h-scaled so it adds to
            // the 2/h^2 of the second difference on the same chart.
            let dfdp = if problem.flags.depends_on_p {
                let eps = 1e-6;
                ((problem.f)(x, vals[i], [grad + eps, 0.0])
                    - (problem.f)(x, vals[i], [grad, 0.0]))
                    / eps
            } else {
                0.0
            };
            scratch[i] = h * dfdp.max(0.0) * 0.5;
        }
        for i in 1..g.n_per_axis {
            let factor = scratch[i].max(scratch[i - 1]).max(scratch[i + 1]);
            stiffness[i] = (2.0 * 2.0 * (1.0 + factor)).max(4.0);
        }
        return Ok(());
    }

    struct PairGeom {
        dv: [i64; 2],
        dw: [i64; 2],
        sv: i64,
        sw: i64,
        nv: f64,
        nw: f64,
    }
    let stride = n + 1;
    let geom: Vec<PairGeom> = pairs
        .iter()
        .map(|p| PairGeom {
            dv: [p.v[0] as i64, p.v[1] as i64],
            dw: [p.w[0] as i64, p.w[1] as i64],
            sv: p.v[0] as i64 + p.v[1] as i64 * stride,
            sw: p.w[0] as i64 + p.w[1] as i64 * stride,
            nv: p.v_norm2() as f64,
            nw: p.w_norm2() as f64,
        })
        .collect();

    for j in 1..n {
        for i in 1..n {
            let node = (j * stride + i) as usize;
            let uc = vals[node];
            let mut best = f64::INFINITY;
            let mut pos = 0.0f64;
            let mut any = false;
            for pg in &geom {
                let fits = |d: [i64; 2]| {
                    i + d[0] >= 0 && i + d[0] <= n && j + d[1] >= 0 && j + d[1] <= n
                        && i - d[0] >= 0 && i - d[0] <= n && j - d[1] >= 0 && j - d[1] <= n
                };
                if !fits(pg.dv) || !fits(pg.dw) {
                    continue;
                }
                let dv = (vals[(node as i64 + pg.sv) as usize]
                    + vals[(node as i64 - pg.sv) as usize]
                    - 2.0 * uc)
                    / (h * h * pg.nv);
                let dw = (vals[(node as i64 + pg.sw) as usize]
                    + vals[(node as i64 - pg.sw) as usize]
                    - 2.0 * uc)
                    / (h * h * pg.nw);
                pos = pos.max(dv.max(0.0)).max(dw.max(0.0));
                let b = pair_bracket(dv, dw);
                if b < best {
                    best = b;
                }
                any = true;
            }
            if !any {
                return Err(Error::NoAvailablePair(node));
            }
            let x = g.node(node);
            residual[node] = -best + rhs.get(problem, node, x, uc, [0.0, 0.0]);
            scratch[node] = pos;
        }
    }

    for j in 1..n {
        for i in 1..n {
            let node = (j * stride + i) as usize;
            let mut factor = scratch[node];
            for pg in &geom {
                for s in [pg.sv, pg.sw, -pg.sv, -pg.sw] {
                    let nb = node as i64 + s;
                    if (0..=(n * stride + n)).contains(&nb) {
                        factor = factor.max(scratch[nb as usize]);
                    }
                }
            }
            // Axis pair carries the densest weights (2/|d|^2 each).
            stiffness[node] = (8.0 * (1.0 + factor)).max(4.0);
        }
    }
    Ok(())
}

/// Residual of the full discrete operator `F^h` on a grid function.
///
/// Interior rows use the wide-stencil operator (two dimensions) or the
/// second difference with the upwind gradient fed to `f` (one dimension);
/// boundary rows are `u - g`. Written in terms of `u(x)` and the
/// differences `u(x) - u(.)`, each row is nondecreasing in both.
pub fn scheme_residual(
    problem: &PdeProblem,
    u: &GridFunction,
    width: u8,
) -> Result<GridFunction> {
    check_grid(problem, u.grid())?;
    let pairs = crate::geometry::stencil_pairs(width)?;
    let rhs = RhsCache::build(problem, u.grid());
    let n = u.grid().n_nodes();
    let mut res = vec![0.0; n];
    let mut stiff = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    residual_and_stiffness(problem, u, &pairs, &rhs, &mut res, &mut stiff, &mut scratch)?;
    Ok(GridFunction::new(u.grid().clone(), res))
}

/// Residual of a single row of `F^h`; used by perturbation trials and the
/// sweep-based acceleration.
pub fn row_residual(
    problem: &PdeProblem,
    u: &GridFunction,
    node: usize,
    pairs: &[DirectionPair],
) -> Result<f64> {
    let g = u.grid();
    if !g.is_interior(node) {
        return Ok(u.value(node) - (problem.g)(g.node(node)));
    }
    let x = g.node(node);
    if g.dim() == 1 {
        let d = delta2(u, node, [1, 0])?;
        let grad = grad_upwind_1d(u, node);
        Ok(-d + (problem.f)(x, u.value(node), [grad, 0.0]))
    } else {
        let ma = ma_wide_stencil(u, node, pairs)?;
        Ok(-ma + (problem.f)(x, u.value(node), [0.0, 0.0]))
    }
}

pub(crate) fn check_grid(problem: &PdeProblem, grid: &Grid) -> Result<()> {
    if grid.domain == problem.domain {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum EnvelopeSide {
    Lower,
    Upper,
}

/// Pointwise evaluation of the envelopes of the generalized Dirichlet
/// operator. At interior points both sides equal
/// `-det_plus(X) + f(x, u, p)`; at boundary points the lower envelope takes
/// the minimum with `u - g(x)` and the upper envelope the maximum.
///
/// For one-dimensional problems the extension reduces to the Hessian entry
/// itself (`max(a,0) + min(a,0) = a`).
pub fn envelope_eval(
    problem: &PdeProblem,
    x: Point,
    u_val: f64,
    p: Point,
    hess: &SymmetricMatrix2,
    side: EnvelopeSide,
) -> f64 {
    debug_assert!(problem.domain.contains(x), "point outside closed domain");
    let det = if problem.dim == 1 {
        hess.a11
    } else {
        det_plus(hess)
    };
    let interior = -det + (problem.f)(x, u_val, p);
    if problem.domain.on_boundary(x) {
        let bc = u_val - (problem.g)(x);
        match side {
            EnvelopeSide::Lower => bc.min(interior),
            EnvelopeSide::Upper => bc.max(interior),
        }
    } else {
        interior
    }
}

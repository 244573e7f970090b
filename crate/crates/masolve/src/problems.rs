//! Built-in problem registry: right-hand sides, boundary data, and exact
//! solutions where known.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::geometry::{Domain, Point};

/// Structural properties of the right-hand side `f(x, u, p)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct FFlags {
    pub depends_on_u: bool,
    pub depends_on_p: bool,
    pub nondecreasing_in_u: bool,
}

/// A Dirichlet problem drawn from the registry: `f`, boundary data `g`,
/// domain descriptor, and an optional exact solution.
///
/// In one dimension `f` receives the upwind gradient magnitude in `p[0]`
/// and must be nondecreasing in it; the two-dimensional scheme does not
/// support gradient-dependent right-hand sides.
#[derive(Clone, Copy)]
pub struct PdeProblem {
    pub name: &'static str,
    pub dim: usize,
    pub domain: Domain,
    pub f: fn(Point, f64, Point) -> f64,
    pub flags: FFlags,
    pub g: fn(Point) -> f64,
    pub exact: Option<fn(Point) -> f64>,
}

impl std::fmt::Debug for PdeProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PdeProblem")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .finish()
    }
}

fn r2(x: Point) -> f64 {
    x[0] * x[0] + x[1] * x[1]
}

fn quad_exact(x: Point) -> f64 {
    0.5 * r2(x)
}

fn exp_exact(x: Point) -> f64 {
    (0.5 * r2(x)).exp()
}

fn exp_rhs(x: Point, _u: f64, _p: Point) -> f64 {
    (1.0 + r2(x)) * r2(x).exp()
}

const CONE_APEX: Point = [2.0, 2.0];

fn cone_exact(x: Point) -> f64 {
    let dx = x[0] - CONE_APEX[0];
    let dy = x[1] - CONE_APEX[1];
    (dx * dx + dy * dy).sqrt()
}

fn one(_x: Point, _u: f64, _p: Point) -> f64 {
    1.0
}

fn zero(_x: Point, _u: f64, _p: Point) -> f64 {
    0.0
}

/// Curvature-type nonlinearity `(1 + p^2)^(3/2)`, nondecreasing for p >= 0.
fn gauss_rhs(_x: Point, _u: f64, p: Point) -> f64 {
    let z = 1.0 + p[0] * p[0];
    z * z.sqrt()
}

fn gauss_g(x: Point) -> f64 {
    2.0 * x[0] - 1.0
}

/// Interior limit of the generalized solution; the discrete boundary value
/// at x = 1 is pinned to g(1) = 1 instead.
fn gauss_exact(x: Point) -> f64 {
    -(1.0 - x[0] * x[0]).max(0.0).sqrt()
}

fn half_square_1d(x: Point) -> f64 {
    0.5 * x[0] * x[0]
}

fn registry_cell() -> &'static Vec<PdeProblem> {
    static REGISTRY: OnceLock<Vec<PdeProblem>> = OnceLock::new();
    REGISTRY.get_or_init(|| {
        let unit_square = Domain::square(0.0, 1.0).expect("static bounds");
        let unit_interval = Domain::interval(0.0, 1.0).expect("static bounds");
        vec![
            PdeProblem {
                name: "quad2d",
                dim: 2,
                domain: unit_square,
                f: one,
                flags: FFlags {
                    nondecreasing_in_u: true,
                    ..FFlags::default()
                },
                g: quad_exact,
                exact: Some(quad_exact),
            },
            PdeProblem {
                name: "exp2d",
                dim: 2,
                domain: unit_square,
                f: exp_rhs,
                flags: FFlags {
                    nondecreasing_in_u: true,
                    ..FFlags::default()
                },
                g: exp_exact,
                exact: Some(exp_exact),
            },
            PdeProblem {
                name: "cone2d",
                dim: 2,
                domain: unit_square,
                f: zero,
                flags: FFlags {
                    nondecreasing_in_u: true,
                    ..FFlags::default()
                },
                g: cone_exact,
                exact: Some(cone_exact),
            },
            PdeProblem {
                name: "gauss1d",
                dim: 1,
                domain: unit_interval,
                f: gauss_rhs,
                flags: FFlags {
                    depends_on_p: true,
                    nondecreasing_in_u: true,
                    ..FFlags::default()
                },
                g: gauss_g,
                exact: Some(gauss_exact),
            },
            PdeProblem {
                name: "ma1d",
                dim: 1,
                domain: unit_interval,
                f: one,
                flags: FFlags {
                    nondecreasing_in_u: true,
                    ..FFlags::default()
                },
                g: half_square_1d,
                exact: Some(half_square_1d),
            },
        ]
    })
}

/// All registered problems, in a fixed order.
pub fn registry() -> &'static [PdeProblem] {
    registry_cell()
}

pub fn registry_keys() -> Vec<&'static str> {
    registry().iter().map(|p| p.name).collect()
}

/// Looks up a problem by its registry key.
pub fn lookup(key: &str) -> Result<&'static PdeProblem> {
    registry()
        .iter()
        .find(|p| p.name == key)
        .ok_or_else(|| Error::UnknownProblem {
            key: key.to_string(),
            available: registry_keys().join(", "),
        })
}

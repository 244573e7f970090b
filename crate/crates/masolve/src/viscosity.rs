//! Semi-analytic probing of the weak-solution definitions with quadratic
//! test functions, subgradient feasibility search, and the two end-to-end
//! suites where the strong ordering of sub- and supersolutions breaks down.
//!
//! Quadratics carry exactly the data the envelopes read at a point (value,
//! gradient, Hessian), so probing them is the right finite-dimensional
//! slice of the smooth test-function quantifier. A pass verdict means no
//! violation was found over the seeded family; it is evidence, not proof.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::geometry::{Domain, Point, BOUNDARY_TOL};
use crate::operators::{envelope_eval, EnvelopeSide, GridFunction, SymmetricMatrix2};
use crate::problems::{FFlags, PdeProblem};
use crate::solver::SolveParams;

/// Default probing radius around the base point.
pub const TOUCH_RADIUS: f64 = 0.25;
/// Sub-lattice refinement: sample spacing is `radius / TOUCH_SUBLATTICE`.
pub const TOUCH_SUBLATTICE: i32 = 64;
/// A verdict never passes if a retained test function violates the
/// envelope inequality by more than this.
pub const ENVELOPE_TOL: f64 = 1e-12;
/// Slope search box for the subgradient probe, recorded in results.
pub const SUBGRADIENT_BOX: f64 = 20.0;
/// Coordinate-descent step refinement floor.
pub const SUBGRADIENT_STEP_MIN: f64 = 1e-6;
/// Number of descent starts (the origin plus seeded points).
pub const SUBGRADIENT_STARTS: usize = 9;

/// Anything evaluable at a point of the closed domain: closed forms via
/// plain closures, grid functions via multilinear interpolation.
pub trait PointFn {
    fn value_at(&self, x: Point) -> f64;
}

impl<F: Fn(Point) -> f64> PointFn for F {
    fn value_at(&self, x: Point) -> f64 {
        self(x)
    }
}

/// Interpolating view of a discrete solution.
pub struct GridCandidate<'a>(pub &'a GridFunction);

impl PointFn for GridCandidate<'_> {
    fn value_at(&self, x: Point) -> f64 {
        self.0.value_at_point(x)
    }
}

/// A smooth probe `phi(x) = c0 + p . (x - x0) + (x - x0)^T X (x - x0) / 2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QuadraticTestFn {
    pub base: Point,
    pub value: f64,
    pub gradient: Point,
    pub hessian: SymmetricMatrix2,
}

impl QuadraticTestFn {
    pub fn eval(&self, x: Point) -> f64 {
        let d0 = x[0] - self.base[0];
        let d1 = x[1] - self.base[1];
        self.value
            + self.gradient[0] * d0
            + self.gradient[1] * d1
            + 0.5 * (self.hessian.a11 * d0 * d0
                + 2.0 * self.hessian.a12 * d0 * d1
                + self.hessian.a22 * d1 * d1)
    }
}

/// Which side the test function touches the candidate from. `Below` probes
/// supersolutions (phi <= candidate near the base point), `Above` probes
/// subsolutions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum TouchSide {
    Below,
    Above,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct TouchReport {
    pub touches: bool,
    pub side: TouchSide,
    /// Largest signed violation of the side inequality over the sample;
    /// nonpositive iff the function touches.
    pub worst_violation: f64,
    pub radius: f64,
}

/// Scans the sub-lattice ball around `phi.base`. With `early_exit` the scan
/// stops at the first violation, which only ever rejects; retained
/// functions always complete the full scan.
fn touch_scan<C: PointFn + ?Sized>(
    candidate: &C,
    domain: &Domain,
    phi: &QuadraticTestFn,
    side: TouchSide,
    radius: f64,
    early_exit: bool,
) -> f64 {
    let k = TOUCH_SUBLATTICE;
    let dx = radius / k as f64;
    let dim = domain.dim();
    let mut worst = f64::NEG_INFINITY;
    let jrange = if dim == 1 { 0..=0 } else { -k..=k };
    for j in jrange {
        for i in -k..=k {
            if i * i + j * j > k * k {
                continue;
            }
            let x = [
                phi.base[0] + i as f64 * dx,
                phi.base[1] + j as f64 * dx,
            ];
            if !domain.contains(x) {
                continue;
            }
            let diff = match side {
                TouchSide::Below => phi.eval(x) - candidate.value_at(x),
                TouchSide::Above => candidate.value_at(x) - phi.eval(x),
            };
            if diff > worst {
                worst = diff;
                if early_exit && worst > 0.0 {
                    return worst;
                }
            }
        }
    }
    worst
}

/// Checks whether `phi` touches the candidate from the given side on the
/// sampled neighborhood of its base point.
pub fn touches<C: PointFn + ?Sized>(
    candidate: &C,
    domain: &Domain,
    phi: &QuadraticTestFn,
    side: TouchSide,
    radius: f64,
) -> TouchReport {
    let worst = touch_scan(candidate, domain, phi, side, radius, false);
    TouchReport {
        touches: worst <= 0.0,
        side,
        worst_violation: worst,
        radius,
    }
}

/// Deterministic seeded sample of quadratic test functions at `x0`, with
/// the constant matched to the candidate value, gradients from a ball of
/// radius 10, and Hessian eigenvalues in [-10, 10]; only functions that
/// touch from the requested side are retained, in draw order.
pub fn sample_test_functions<C: PointFn + ?Sized>(
    candidate: &C,
    domain: &Domain,
    x0: Point,
    side: TouchSide,
    count: usize,
    seed: u64,
    radius: f64,
) -> Vec<QuadraticTestFn> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c0 = candidate.value_at(x0);
    let dim = domain.dim();
    let mut retained = Vec::new();
    for _ in 0..count {
        let gradient = if dim == 1 {
            [rng.gen_range(-10.0..10.0), 0.0]
        } else {
            let angle = rng.gen_range(0.0..std::f64::consts::TAU);
            let r = 10.0 * rng.gen_range(0.0f64..1.0).sqrt();
            [r * angle.cos(), r * angle.sin()]
        };
        let hessian = if dim == 1 {
            SymmetricMatrix2::scalar(rng.gen_range(-10.0..10.0))
        } else {
            let l1 = rng.gen_range(-10.0..10.0);
            let l2 = rng.gen_range(-10.0..10.0);
            let theta = rng.gen_range(0.0..std::f64::consts::PI);
            SymmetricMatrix2::from_eigen(l1, l2, theta)
        };
        let phi = QuadraticTestFn {
            base: x0,
            value: c0,
            gradient,
            hessian,
        };
        if touch_scan(candidate, domain, &phi, side, radius, true) <= 0.0 {
            retained.push(phi);
        }
    }
    retained
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ProbeKind {
    Subsolution,
    Supersolution,
}

#[derive(Clone, Debug, Serialize)]
pub struct EnvelopeVerdict {
    pub kind: ProbeKind,
    pub point: Point,
    pub sampled: usize,
    pub retained: usize,
    pub pass: bool,
    /// Largest violation over retained functions, oriented so positive
    /// means the envelope inequality failed; absent when nothing touched.
    pub worst_violation: Option<f64>,
    /// First violating test function, in seed order.
    pub witness: Option<QuadraticTestFn>,
}

/// Probes the sub- or supersolution definition at one point: every retained
/// touching quadratic must put the appropriate envelope on the correct side
/// of zero (lower envelope nonpositive for subsolutions, upper envelope
/// nonnegative for supersolutions).
pub fn envelope_verdict<C: PointFn + ?Sized>(
    problem: &PdeProblem,
    candidate: &C,
    x0: Point,
    kind: ProbeKind,
    count: usize,
    seed: u64,
    radius: f64,
) -> EnvelopeVerdict {
    let (side, env_side) = match kind {
        ProbeKind::Subsolution => (TouchSide::Above, EnvelopeSide::Lower),
        ProbeKind::Supersolution => (TouchSide::Below, EnvelopeSide::Upper),
    };
    let retained = sample_test_functions(candidate, &problem.domain, x0, side, count, seed, radius);
    let mut worst: Option<f64> = None;
    let mut witness = None;
    for phi in &retained {
        let val = envelope_eval(problem, x0, phi.value, phi.gradient, &phi.hessian, env_side);
        let violation = match kind {
            ProbeKind::Subsolution => val,
            ProbeKind::Supersolution => -val,
        };
        if worst.is_none_or(|w| violation > w) {
            worst = Some(violation);
        }
        if violation > ENVELOPE_TOL && witness.is_none() {
            witness = Some(*phi);
        }
    }
    EnvelopeVerdict {
        kind,
        point: x0,
        sampled: count,
        retained: retained.len(),
        pass: witness.is_none(),
        worst_violation: worst,
        witness,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SubgradientResult {
    pub found: bool,
    /// Supporting slope when found.
    pub p: Option<Vec<f64>>,
    /// Minimized violation `max_x [c(x0) + p.(x - x0) - c(x)]` at the best
    /// slope visited.
    pub max_violation_at_best_p: f64,
    pub best_p: Vec<f64>,
    pub tol_sg: f64,
    pub resolution: usize,
    pub search_box: f64,
    pub starts: usize,
}

/// Searches for a supporting slope at `x0`: minimizes the worst violation
/// of `candidate(x) >= candidate(x0) + p . (x - x0)` over a verification
/// lattice, by coordinate descent from the origin plus eight seeded starts,
/// refined to step 1e-6 inside a fixed box. Emptiness of the subgradient is
/// reported relative to that box.
pub fn subgradient_probe<C: PointFn + ?Sized>(
    candidate: &C,
    domain: &Domain,
    x0: Point,
    grid_resolution: usize,
    tol_sg: Option<f64>,
) -> SubgradientResult {
    let dim = domain.dim();
    let mut pts: Vec<Point> = Vec::new();
    let n = grid_resolution;
    let coord = |a: usize, i: usize| {
        let [lo, hi] = domain.bounds[a];
        if i == n {
            hi
        } else {
            lo + i as f64 * (hi - lo) / n as f64
        }
    };
    match dim {
        1 => {
            for i in 0..=n {
                pts.push([coord(0, i), 0.0]);
            }
        }
        _ => {
            for j in 0..=n {
                for i in 0..=n {
                    pts.push([coord(0, i), coord(1, j)]);
                }
            }
        }
    }
    pts.push(x0);
    let c0 = candidate.value_at(x0);
    let vals: Vec<f64> = pts.iter().map(|&x| candidate.value_at(x)).collect();
    let range = {
        let lo = vals.iter().fold(f64::INFINITY, |m, v| m.min(*v));
        let hi = vals.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
        hi - lo
    };
    let tol = tol_sg.unwrap_or(1e-8 * range.max(1.0));

    let violation = |p: [f64; 2]| -> f64 {
        pts.iter()
            .zip(&vals)
            .map(|(x, v)| c0 + p[0] * (x[0] - x0[0]) + p[1] * (x[1] - x0[1]) - v)
            .fold(f64::NEG_INFINITY, f64::max)
    };

    let mut starts = vec![[0.0f64; 2]];
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 1..SUBGRADIENT_STARTS {
        let mut s = [0.0; 2];
        for c in s.iter_mut().take(dim) {
            *c = rng.gen_range(-10.0..10.0);
        }
        starts.push(s);
    }

    let mut best_p = starts[0];
    let mut best_v = violation(best_p);
    for &start in &starts {
        let mut p = start;
        let mut v = violation(p);
        let mut step = 1.0f64;
        while step >= SUBGRADIENT_STEP_MIN {
            let mut improved = false;
            for axis in 0..dim {
                for sgn in [1.0f64, -1.0] {
                    loop {
                        let mut q = p;
                        q[axis] = (q[axis] + sgn * step).clamp(-SUBGRADIENT_BOX, SUBGRADIENT_BOX);
                        if q[axis] == p[axis] {
                            break;
                        }
                        let vv = violation(q);
                        if vv < v {
                            p = q;
                            v = vv;
                            improved = true;
                        } else {
                            break;
                        }
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        if v < best_v {
            best_v = v;
            best_p = p;
        }
    }

    let found = best_v <= tol;
    SubgradientResult {
        found,
        p: found.then(|| best_p[..dim].to_vec()),
        max_violation_at_best_p: best_v,
        best_p: best_p[..dim].to_vec(),
        tol_sg: tol,
        resolution: grid_resolution,
        search_box: SUBGRADIENT_BOX,
        starts: SUBGRADIENT_STARTS,
    }
}

fn zero_rhs(_x: Point, _u: f64, _p: Point) -> f64 {
    0.0
}

fn zero_g(_x: Point) -> f64 {
    0.0
}

/// Homogeneous problem on the unit square: `f = 0`, `g = 0`. The flat
/// edges stand in for a flat piece of boundary.
pub fn flat_boundary_problem() -> PdeProblem {
    PdeProblem {
        name: "flat-square",
        dim: 2,
        domain: Domain::square(0.0, 1.0).expect("static bounds"),
        f: zero_rhs,
        flags: FFlags {
            nondecreasing_in_u: true,
            ..FFlags::default()
        },
        g: zero_g,
        exact: None,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbePointReport {
    pub point: Point,
    pub on_boundary: bool,
    pub subsolution: EnvelopeVerdict,
    pub supersolution: EnvelopeVerdict,
    /// Candidate gap `u(x) - v(x)` at this point.
    pub gap: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct FlatBoundaryReport {
    pub schema_version: u32,
    pub case: &'static str,
    pub seed: u64,
    pub count_per_point: usize,
    pub radius: f64,
    pub boundary_probes: Vec<ProbePointReport>,
    pub interior_probes: Vec<ProbePointReport>,
    pub subsolution_pass: bool,
    pub supersolution_pass: bool,
    /// Largest `u - v` over probed boundary points; the ordering between
    /// the two admissible candidates fails by exactly this much.
    pub max_boundary_gap: f64,
    pub sub_candidate_leq_g: bool,
    pub corners: &'static str,
}

/// Probes the homogeneous problem on the unit square where `u = 0` is a
/// subsolution while the function that drops to -1 on the boundary is a
/// supersolution, so subsolutions need not stay below supersolutions on
/// the closed square.
pub fn counterexample_flat_boundary(seed: u64) -> FlatBoundaryReport {
    let problem = flat_boundary_problem();
    let domain = problem.domain;
    let count = 1000;
    let u = |_x: Point| 0.0;
    let v = move |x: Point| if domain.on_boundary(x) { -1.0 } else { 0.0 };

    let mut boundary_points = Vec::new();
    for t in [0.25, 0.5, 0.75] {
        boundary_points.push([t, 0.0]);
        boundary_points.push([t, 1.0]);
        boundary_points.push([0.0, t]);
        boundary_points.push([1.0, t]);
    }
    let interior_points = [
        [0.5, 0.5],
        [0.25, 0.5],
        [0.5, 0.25],
        [0.75, 0.5],
        [0.5, 0.75],
    ];

    let probe = |pt: Point, k: u64| -> ProbePointReport {
        let sub = envelope_verdict(
            &problem,
            &u,
            pt,
            ProbeKind::Subsolution,
            count,
            seed.wrapping_add(137 * k),
            TOUCH_RADIUS,
        );
        let sup = envelope_verdict(
            &problem,
            &v,
            pt,
            ProbeKind::Supersolution,
            count,
            seed.wrapping_add(137 * k + 71),
            TOUCH_RADIUS,
        );
        ProbePointReport {
            point: pt,
            on_boundary: domain.on_boundary(pt),
            gap: u(pt) - v(pt),
            subsolution: sub,
            supersolution: sup,
        }
    };

    let boundary_probes: Vec<ProbePointReport> = boundary_points
        .iter()
        .enumerate()
        .map(|(k, &pt)| probe(pt, k as u64))
        .collect();
    let interior_probes: Vec<ProbePointReport> = interior_points
        .iter()
        .enumerate()
        .map(|(k, &pt)| probe(pt, 1000 + k as u64))
        .collect();

    let all = boundary_probes.iter().chain(interior_probes.iter());
    let subsolution_pass = all.clone().all(|p| p.subsolution.pass);
    let supersolution_pass = all.clone().all(|p| p.supersolution.pass);
    let max_boundary_gap = boundary_probes
        .iter()
        .map(|p| p.gap)
        .fold(f64::NEG_INFINITY, f64::max);
    let sub_candidate_leq_g = boundary_probes
        .iter()
        .all(|p| u(p.point) <= (problem.g)(p.point) + 1e-10);

    FlatBoundaryReport {
        schema_version: 1,
        case: "ex1",
        seed,
        count_per_point: count,
        radius: TOUCH_RADIUS,
        boundary_probes,
        interior_probes,
        subsolution_pass,
        supersolution_pass,
        max_boundary_gap,
        sub_candidate_leq_g,
        corners: "corner points are excluded from probing; the tangential argument needs a boundary segment through the base point",
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SubProbeReport {
    pub point: Point,
    pub verdict: EnvelopeVerdict,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct InteriorErrorRow {
    pub level: u32,
    pub h: f64,
    pub n_per_axis: usize,
    pub error_at_probe: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct GradientBlowupReport {
    pub schema_version: u32,
    pub case: &'static str,
    pub seed: u64,
    /// `u(1) - v(1)` for the two admissible candidates.
    pub gap_at_1: f64,
    pub subgradient_at_1: SubgradientResult,
    pub subsolution_probes: Vec<SubProbeReport>,
    pub subsolution_pass: bool,
    pub sub_candidate_leq_g: bool,
    /// Largest interior residual of the closed-form supersolution.
    pub supersolution_classical_max_residual: f64,
    pub supersolution_classical_pass: bool,
    pub left_boundary_value_matches: bool,
    pub interior_errors: Vec<InteriorErrorRow>,
    pub interior_errors_decreasing: bool,
}

/// Probes the one-dimensional curvature problem whose generalized solution
/// is discontinuous: the circular arc with the value pinned to 1 at the
/// right endpoint is a subsolution, the bare arc is a supersolution with an
/// empty subgradient at 1, and discrete solves still converge to the arc in
/// the interior.
pub fn counterexample_gradient_blowup(seed: u64) -> Result<GradientBlowupReport> {
    let problem = crate::problems::lookup("gauss1d")?;
    let domain = problem.domain;
    let count = 1000;
    let arc = |x: Point| -(1.0 - x[0] * x[0]).max(0.0).sqrt();
    let u = move |x: Point| {
        if x[0] >= 1.0 - BOUNDARY_TOL {
            1.0
        } else {
            arc(x)
        }
    };
    let v = arc;

    let sub_points = [[0.25, 0.0], [0.5, 0.0], [0.75, 0.0], [1.0, 0.0]];
    let subsolution_probes: Vec<SubProbeReport> = sub_points
        .iter()
        .enumerate()
        .map(|(k, &pt)| SubProbeReport {
            point: pt,
            verdict: envelope_verdict(
                problem,
                &u,
                pt,
                ProbeKind::Subsolution,
                count,
                seed.wrapping_add(211 * k as u64),
                TOUCH_RADIUS,
            ),
        })
        .collect();
    let subsolution_pass = subsolution_probes.iter().all(|p| p.verdict.pass);
    let sub_candidate_leq_g = sub_points
        .iter()
        .filter(|&&pt| domain.on_boundary(pt))
        .all(|&pt| u(pt) <= (problem.g)(pt) + 1e-10);

    // The arc solves the interior equation classically; check the closed
    // forms directly at interior sample points.
    let classical_max_residual = [0.25f64, 0.5, 0.75]
        .iter()
        .map(|&x| {
            let a = 1.0 - x * x;
            let vxx = a.powf(-1.5);
            let vx2 = x * x / a;
            (-vxx + (1.0 + vx2).powf(1.5)).abs()
        })
        .fold(0.0f64, f64::max);

    let subgradient_at_1 = subgradient_probe(&v, &domain, [1.0, 0.0], 4096, None);

    let gap_at_1 = u([1.0, 0.0]) - v([1.0, 0.0]);

    let probe_x = 0.5;
    let exact_at_probe = arc([probe_x, 0.0]);
    let mut interior_errors = Vec::new();
    let mut prev: Option<GridFunction> = None;
    for level in 4..=7u32 {
        let n = 1usize << level;
        let params = SolveParams::for_problem(problem);
        let grid = std::sync::Arc::new(crate::geometry::build_grid(&problem.domain, n)?);
        let u0 = match &prev {
            Some(coarse) => GridFunction::from_fn(grid.clone(), |x| coarse.value_at_point(x)),
            None => crate::solver::initial_iterate(problem, grid.clone()),
        };
        let (sol, report) = crate::solver::euler_solve(problem, &u0, &params, 1)?;
        let idx = sol.grid().nearest_node([probe_x, 0.0]);
        interior_errors.push(InteriorErrorRow {
            level,
            h: sol.grid().h,
            n_per_axis: n,
            error_at_probe: (sol.value(idx) - exact_at_probe).abs(),
            iterations: report.iterations,
            converged: report.converged,
        });
        prev = Some(sol);
    }
    let interior_errors_decreasing = interior_errors
        .windows(2)
        .all(|w| w[1].error_at_probe < w[0].error_at_probe);

    Ok(GradientBlowupReport {
        schema_version: 1,
        case: "ex2",
        seed,
        gap_at_1,
        subgradient_at_1,
        subsolution_probes,
        subsolution_pass,
        sub_candidate_leq_g,
        supersolution_classical_max_residual: classical_max_residual,
        supersolution_classical_pass: classical_max_residual <= 1e-12,
        left_boundary_value_matches: (v([0.0, 0.0]) - (problem.g)([0.0, 0.0])).abs() == 0.0,
        interior_errors,
        interior_errors_decreasing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::lookup;

    fn unit_square() -> Domain {
        Domain::square(0.0, 1.0).unwrap()
    }

    #[test]
    fn zero_plane_touches_bowl_from_below_at_corner() {
        let d = unit_square();
        let bowl = |x: Point| 0.5 * (x[0] * x[0] + x[1] * x[1]);
        let phi = QuadraticTestFn {
            base: [0.0, 0.0],
            value: 0.0,
            gradient: [0.0, 0.0],
            hessian: SymmetricMatrix2::zero(),
        };
        let r = touches(&bowl, &d, &phi, TouchSide::Below, TOUCH_RADIUS);
        assert!(r.touches);
        assert!(r.worst_violation <= 0.0);
    }

    #[test]
    fn edge_touching_depends_on_tangential_curvature() {
        let d = unit_square();
        let v = move |x: Point| if d.on_boundary(x) { -1.0 } else { 0.0 };
        // A plane through -1 with a steep inward slope stays below the
        // candidate near the mid-edge point.
        let plane = QuadraticTestFn {
            base: [0.5, 0.0],
            value: -1.0,
            gradient: [0.0, 3.0],
            hessian: SymmetricMatrix2::zero(),
        };
        assert!(touches(&v, &d, &plane, TouchSide::Below, TOUCH_RADIUS).touches);

        // Positive curvature along the edge lifts the probe above -1 on
        // the boundary segment and breaks the touch.
        let bumped = QuadraticTestFn {
            hessian: SymmetricMatrix2::diag(2.0, 0.0),
            ..plane
        };
        let r = touches(&v, &d, &bumped, TouchSide::Below, TOUCH_RADIUS);
        assert!(!r.touches);
        assert!(r.worst_violation > 0.0);
    }

    #[test]
    fn no_quadratic_touches_the_arc_below_at_the_endpoint() {
        // Slopes of the arc blow up at the right endpoint, so no sampled
        // quadratic can stay below it while matching the value.
        let d = Domain::interval(0.0, 1.0).unwrap();
        let arc = |x: Point| -(1.0 - x[0] * x[0]).max(0.0).sqrt();
        for seed in [7u64, 42, 1234] {
            let retained = sample_test_functions(
                &arc,
                &d,
                [1.0, 0.0],
                TouchSide::Below,
                1000,
                seed,
                TOUCH_RADIUS,
            );
            assert!(retained.is_empty(), "seed {seed}: {}", retained.len());
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let d = unit_square();
        let bowl = |x: Point| 0.5 * (x[0] * x[0] + x[1] * x[1]);
        let a = sample_test_functions(&bowl, &d, [0.0, 0.0], TouchSide::Below, 1000, 42, 0.25);
        let b = sample_test_functions(&bowl, &d, [0.0, 0.0], TouchSide::Below, 1000, 42, 0.25);
        assert_eq!(a, b);
        assert!(!a.is_empty());
    }

    #[test]
    fn retained_probes_at_flat_edges_have_nonpositive_tangential_curvature() {
        let d = unit_square();
        let v = move |x: Point| if d.on_boundary(x) { -1.0 } else { 0.0 };
        let mut total = 0usize;
        for seed in 0..30u64 {
            let retained = sample_test_functions(
                &v,
                &d,
                [0.5, 0.0],
                TouchSide::Below,
                1000,
                seed,
                TOUCH_RADIUS,
            );
            for phi in &retained {
                // Tangential direction along the bottom edge is the first axis.
                assert!(
                    phi.hessian.a11 <= 1e-12,
                    "tangential curvature {} for {phi:?}",
                    phi.hessian.a11
                );
            }
            total += retained.len();
        }
        assert!(total > 0, "expected at least one retained probe across seeds");
    }

    #[test]
    fn retained_hessians_dominate_the_candidate_curvature() {
        // Touching a quadratic bowl from above pins the gradient and forces
        // the probe curvature to dominate along every tested direction;
        // verified directionally on the retained Hessians.
        use rand::Rng;
        use rand::SeedableRng;
        let d = unit_square();
        let bowl = |x: Point| 0.5 * (x[0] * x[0] + x[1] * x[1]);
        let x0 = [0.5, 0.5];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let mut retained = Vec::new();
        for _ in 0..500 {
            let jitter = [rng.gen_range(-1e-9..1e-9), rng.gen_range(-1e-9..1e-9)];
            let l1 = rng.gen_range(-10.0f64..10.0);
            let l2 = rng.gen_range(-10.0f64..10.0);
            let theta = rng.gen_range(0.0..std::f64::consts::PI);
            let phi = QuadraticTestFn {
                base: x0,
                value: bowl(x0),
                gradient: [x0[0] + jitter[0], x0[1] + jitter[1]],
                hessian: SymmetricMatrix2::from_eigen(l1, l2, theta),
            };
            if touches(&bowl, &d, &phi, TouchSide::Above, TOUCH_RADIUS).touches {
                retained.push(phi);
            }
        }
        assert!(!retained.is_empty());
        for phi in &retained {
            for dir in [[1, 0], [0, 1], [1, 1], [1, -1]] {
                let norm2 = (dir[0] * dir[0] + dir[1] * dir[1]) as f64;
                let curv = phi.hessian.quad_form(dir) / norm2;
                assert!(curv >= 1.0 - 1e-5, "direction {dir:?}: {curv}");
            }
        }
    }

    #[test]
    fn endpoint_subsolution_probe_passes_via_boundary_branch() {
        let problem = lookup("gauss1d").unwrap();
        let u = |x: Point| {
            if x[0] >= 1.0 - BOUNDARY_TOL {
                1.0
            } else {
                -(1.0 - x[0] * x[0]).max(0.0).sqrt()
            }
        };
        let verdict = envelope_verdict(
            problem,
            &u,
            [1.0, 0.0],
            ProbeKind::Subsolution,
            1000,
            7,
            TOUCH_RADIUS,
        );
        assert!(verdict.pass);
        assert!(verdict.retained > 100, "retained {}", verdict.retained);
    }

    #[test]
    fn subgradient_of_absolute_value_at_kink() {
        let d = Domain::interval(-1.0, 1.0).unwrap();
        let f = |x: Point| x[0].abs();
        let r = subgradient_probe(&f, &d, [0.0, 0.0], 512, None);
        assert!(r.found);
        assert!(r.max_violation_at_best_p <= r.tol_sg);
        assert!(r.p.unwrap()[0].abs() <= 1.0);
    }

    #[test]
    fn subgradient_of_square_at_right_endpoint() {
        let d = Domain::interval(0.0, 1.0).unwrap();
        let f = |x: Point| x[0] * x[0];
        let r = subgradient_probe(&f, &d, [1.0, 0.0], 512, None);
        assert!(r.found);
        let p = r.p.unwrap()[0];
        assert!((p - 2.0).abs() <= 1e-4, "p = {p}");
    }

    #[test]
    fn subgradient_of_arc_is_empty_at_endpoint() {
        let d = Domain::interval(0.0, 1.0).unwrap();
        let arc = |x: Point| -(1.0 - x[0] * x[0]).max(0.0).sqrt();
        let r = subgradient_probe(&arc, &d, [1.0, 0.0], 4096, None);
        assert!(!r.found);
        assert!(r.max_violation_at_best_p > 10.0 * r.tol_sg);
        // The violation stays bounded away from zero inside the search box.
        assert!(r.max_violation_at_best_p > 0.02);
    }

    #[test]
    fn found_subgradients_satisfy_the_defining_inequality() {
        let d = unit_square();
        let f = |x: Point| (x[0] - 0.3) * (x[0] - 0.3) + 2.0 * (x[1] - 0.6) * (x[1] - 0.6);
        for x0 in [[0.25, 0.5], [1.0, 0.25], [0.5, 1.0]] {
            let r = subgradient_probe(&f, &d, x0, 128, None);
            assert!(r.found, "{x0:?}");
            let p = r.p.unwrap();
            // Independent re-scan of the inequality on a fresh lattice.
            let c0 = f(x0);
            for i in 0..=128 {
                for j in 0..=128 {
                    let x = [i as f64 / 128.0, j as f64 / 128.0];
                    let lhs = c0 + p[0] * (x[0] - x0[0]) + p[1] * (x[1] - x0[1]);
                    assert!(lhs <= f(x) + r.tol_sg * 1.01);
                }
            }
        }
    }

    #[test]
    fn grid_candidates_interpolate() {
        use crate::geometry::build_grid;
        use std::sync::Arc;
        let g = Arc::new(build_grid(&unit_square(), 8).unwrap());
        let u = GridFunction::from_fn(g, |x| x[0] + 2.0 * x[1]);
        let c = GridCandidate(&u);
        // Affine data is reproduced exactly by multilinear interpolation.
        assert!((c.value_at([0.3, 0.45]) - (0.3 + 0.9)).abs() < 1e-12);
    }

    #[test]
    fn flat_boundary_report_shape() {
        let report = counterexample_flat_boundary(42);
        assert_eq!(report.boundary_probes.len(), 12);
        assert_eq!(report.interior_probes.len(), 5);
        assert!(report.subsolution_pass);
        assert!(report.supersolution_pass);
        assert_eq!(report.max_boundary_gap, 1.0);
        assert!(report.sub_candidate_leq_g);
    }

    #[test]
    fn flat_boundary_report_is_deterministic() {
        let a = serde_json::to_string(&counterexample_flat_boundary(7)).unwrap();
        let b = serde_json::to_string(&counterexample_flat_boundary(7)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn verdicts_never_pass_over_a_violating_probe() {
        // Re-scan the retained list behind a verdict: a pass must mean no
        // retained function pushes the envelope past the tolerance.
        use crate::operators::{envelope_eval, EnvelopeSide};
        let problem = flat_boundary_problem();
        let domain = problem.domain;
        let v = move |x: Point| if domain.on_boundary(x) { -1.0 } else { 0.0 };
        let x0 = [0.5, 0.0];
        let (count, seed) = (1000, 3);
        let verdict = envelope_verdict(
            &problem,
            &v,
            x0,
            ProbeKind::Supersolution,
            count,
            seed,
            TOUCH_RADIUS,
        );
        let retained =
            sample_test_functions(&v, &domain, x0, TouchSide::Below, count, seed, TOUCH_RADIUS);
        assert_eq!(retained.len(), verdict.retained);
        let worst_rescan = retained
            .iter()
            .map(|phi| {
                -envelope_eval(
                    &problem,
                    x0,
                    phi.value,
                    phi.gradient,
                    &phi.hessian,
                    EnvelopeSide::Upper,
                )
            })
            .fold(f64::NEG_INFINITY, f64::max);
        if verdict.pass {
            assert!(retained.is_empty() || worst_rescan <= ENVELOPE_TOL);
        } else {
            assert!(worst_rescan > ENVELOPE_TOL);
        }
    }
}

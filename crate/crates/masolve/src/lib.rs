//! Monotone finite differences for the Dirichlet problem of the
//! Monge-Ampere equation, with a viscosity-analysis toolkit.
//!
//! The crate has five parts:
//!
//! * [`geometry`] builds uniform interval/square grids and enumerates the
//!   orthogonal integer direction pairs of the wide stencil;
//! * [`operators`] implements the elliptic extension of the determinant,
//!   the monotone wide-stencil operator, the one-dimensional upwind
//!   curvature scheme, full residuals, and the boundary envelopes;
//! * [`solver`] drives the damped explicit fixed-point iteration and the
//!   discrete comparison check;
//! * [`viscosity`] probes weak-solution definitions with quadratic test
//!   functions, searches subgradients, and reproduces the two suites where
//!   strong sub/supersolution ordering fails;
//! * [`harness`] and [`config`] back the `masolve` command line: refinement
//!   studies, scheme verification, and CSV/JSON emission.

pub mod config;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod operators;
pub mod problems;
pub mod solver;
pub mod viscosity;

pub use error::{Error, Result};
pub use geometry::{
    build_grid, neighbors_in_domain, stencil_pairs, DirectionPair, Domain, DomainKind, Grid,
    NeighborSpan, NodeClass, Offset, Point,
};
pub use operators::{
    delta2, det_plus, envelope_eval, grad_upwind_1d, ma_wide_stencil, row_residual,
    scheme_residual, EnvelopeSide, GridFunction, SymmetricMatrix2,
};
pub use problems::{lookup, registry, registry_keys, FFlags, PdeProblem};
pub use solver::{
    discrete_comparison_check, estimate_dt, euler_solve, euler_solve_traced, initial_iterate,
    seeded_comparison_pair, solve_problem, DtChoice, SolveParams, SolveReport,
};
pub use viscosity::{
    counterexample_flat_boundary, counterexample_gradient_blowup, envelope_verdict,
    flat_boundary_problem, sample_test_functions, subgradient_probe, touches, EnvelopeVerdict,
    FlatBoundaryReport, GradientBlowupReport, GridCandidate, PointFn, ProbeKind, QuadraticTestFn,
    SubgradientResult, TouchReport, TouchSide,
};

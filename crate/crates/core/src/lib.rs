//! Exact verification and numerical falsification of stability properties of
//! parametric constraint systems `g(p, x) ∈ C`, where `C` is a finite union of
//! convex polyhedra.
//!
//! The crate is organized around a strict exact/approximate split:
//!
//! * [`exactla`] — arbitrary-precision rational linear algebra, an exact
//!   simplex LP, and double-description cone conversions.
//! * [`polycal`] — polyhedra, unions, and the variational cone calculus
//!   (tangent, regular/limiting/directional normal cones, strata).
//! * [`funcexpr`] — expression trees with exact evaluation and symbolic
//!   first/second derivatives.
//! * [`sysmodel`] — the parametric constraint system model and its
//!   image-derivative direction cone.
//! * [`order1`] — first-order exact checks (metric regularity, subregularity,
//!   existence condition, splitting verification) and the exact-bound
//!   estimator.
//! * [`order2`] — directional curvatures and second-order verification.
//! * [`varkkt`] — KKT-type variational systems and the complementarity-graph
//!   cone calculus.
//! * [`probe`] — floating-point sampling estimators for moduli and
//!   counterexample search.
//! * [`fixtures`] — worked systems used by tests and the CLI.
//!
//! Every verdict of `verified` or `refuted` produced by the exact modules is
//! computed in rational arithmetic; floating point only appears in sampled
//! estimates and report rendering.

pub mod exactla;
pub mod funcexpr;
pub mod polycal;
pub mod sysmodel;

pub mod order1;
pub mod order2;
pub mod varkkt;

pub mod probe;

pub mod fixtures;

pub use exactla::{Rat, RatMatrix};

//! Worked systems used across the test suites and the CLI.

use crate::exactla::{rq, rzero, Rat, RatMatrix, VCone};
use crate::funcexpr::{Expr, FuncVec};
use crate::polycal::{Polyhedron, PolyUnion};
use crate::sysmodel::{ConstraintSystem, ParamSet};

fn rv(v: &[i64]) -> Vec<Rat> {
    v.iter().map(|&x| crate::exactla::rint(x)).collect()
}

/// `f1(p, x) = -x2 - (1/2)x1² - p1 + p2·x2`.
pub fn f1_expr() -> Expr {
    Expr::add(vec![
        Expr::neg(Expr::decision(1)),
        Expr::powi(Expr::decision(0), 2).scale(rq(-1, 2)),
        Expr::neg(Expr::param(0)),
        Expr::mul(vec![Expr::param(1), Expr::decision(1)]),
    ])
}

/// `f2(p, x) = x2 - (1/2)x1² - p2 + p1·x1`.
pub fn f2_expr() -> Expr {
    Expr::add(vec![
        Expr::decision(1),
        Expr::powi(Expr::decision(0), 2).scale(rq(-1, 2)),
        Expr::neg(Expr::param(1)),
        Expr::mul(vec![Expr::param(0), Expr::decision(0)]),
    ])
}

/// `f3(p, x) = x1 + |x2|^(3/2) - p3`.
pub fn f3_expr() -> Expr {
    Expr::add(vec![
        Expr::decision(0),
        Expr::abs_pow_3_2(Expr::decision(1)),
        Expr::neg(Expr::param(2)),
    ])
}

/// `h(p) = -p1 - p2 + (3/2)p1²`, the parameter-set description; lives in
/// `R^m` for the given parameter dimension (only `p1, p2` appear).
pub fn h_func(param_dim: usize) -> FuncVec {
    FuncVec::new(
        vec![Expr::add(vec![
            Expr::neg(Expr::param(0)),
            Expr::neg(Expr::param(1)),
            Expr::powi(Expr::param(0), 2).scale(rq(3, 2)),
        ])],
        param_dim,
        0,
    )
}

/// The three-inequality system with a nonsmooth `|x2|^{3/2}` component and a
/// curved parameter set, at the origin reference pair.
///
/// Components are ordered `(f3, f1, f2)` so that the challenging component
/// forms the first split block: `g1 = f3 ∈ R_-`, `g2 = (f1, f2) ∈ R²_-`.
/// With `∇_p g = -I` and `T_P(p̄) = {w : -w1 - w2 ≤ 0}` (in the h-variables)
/// the image derivative cone computes to `{v : v2 + v3 ≤ 0}` in these
/// coordinates, and `u = (-v1, -v3)` maps every such `v` tangentially into
/// `C` via `v + ∇_x g u = (0, v2 + v3, 0)`.
pub fn example_4_5() -> ConstraintSystem {
    let g = FuncVec::new(vec![f3_expr(), f1_expr(), f2_expr()], 3, 2);
    let c1 = PolyUnion::nonpos_orthant(1);
    let c2 = PolyUnion::nonpos_orthant(2);
    ConstraintSystem::from_parts(
        g,
        c1,
        c2,
        ParamSet::SmoothIneq(h_func(3)),
        rv(&[0, 0, 0]),
        rv(&[0, 0]),
    )
    .expect("fixture is well formed")
}

/// The image direction halfspace `{v : v2 + v3 ≥ 0}` as printed in the
/// published walkthrough of this system (in fixture coordinates). It is the
/// sign mirror of the cone the printed data actually generates; the
/// existence condition is false for it. Kept for erratum regression tests.
pub fn example_4_5_printed_dhat() -> VCone {
    VCone::new(
        vec![rv(&[0, 1, 1])],
        vec![rv(&[1, 0, 0]), rv(&[0, 1, -1])],
        3,
    )
    .expect("halfspace cone")
}

/// The reduced two-parameter subsystem `g̃((p1,p2), x) = (f1, f2) ∈ R²_-`
/// with `P̃ = h^{-1}(R_-)`, used by the second-order walkthrough.
pub fn example_4_5_reduced() -> ConstraintSystem {
    let g = FuncVec::new(vec![f1_expr(), f2_expr()], 2, 2);
    ConstraintSystem::new(
        g,
        PolyUnion::nonpos_orthant(2),
        ParamSet::SmoothIneq(h_func(2)),
        rv(&[0, 0]),
        rv(&[0, 0]),
        0,
    )
    .expect("fixture is well formed")
}

/// Canonical one-dimensional system `g(p, x) = x - p ∈ R_-`, `P = R`.
pub fn canonical_x_minus_p() -> ConstraintSystem {
    let g = FuncVec::new(vec![Expr::sub(Expr::decision(0), Expr::param(0))], 1, 1);
    ConstraintSystem::new(
        g,
        PolyUnion::nonpos_orthant(1),
        ParamSet::FullSpace(1),
        rv(&[0]),
        rv(&[0]),
        1,
    )
    .expect("fixture is well formed")
}

/// `g(p, x) = 2x - p ∈ R_-`, `P = R`.
pub fn scaled_2x_minus_p() -> ConstraintSystem {
    let g = FuncVec::new(
        vec![Expr::sub(
            Expr::decision(0).scale(crate::exactla::rint(2)),
            Expr::param(0),
        )],
        1,
        1,
    );
    ConstraintSystem::new(
        g,
        PolyUnion::nonpos_orthant(1),
        ParamSet::FullSpace(1),
        rv(&[0]),
        rv(&[0]),
        1,
    )
    .expect("fixture is well formed")
}

/// The two-constraint KKT system of the saddle objective
/// `½x1² − ½x2² − ⟨p, x⟩` over `{x : −½x1 ± x2 ≤ 0}`, at the origin
/// solution with zero multipliers.
pub fn example_5_3(p_set: ParamSet) -> crate::varkkt::KKTSystem {
    let f = FuncVec::new(
        vec![
            Expr::sub(Expr::decision(0), Expr::param(0)),
            Expr::sub(Expr::neg(Expr::decision(1)), Expr::param(1)),
        ],
        2,
        2,
    );
    let phi = FuncVec::new(
        vec![
            Expr::add(vec![
                Expr::decision(0).scale(rq(-1, 2)),
                Expr::decision(1),
            ]),
            Expr::add(vec![
                Expr::decision(0).scale(rq(-1, 2)),
                Expr::neg(Expr::decision(1)),
            ]),
        ],
        2,
        2,
    );
    crate::varkkt::KKTSystem::new(f, phi, p_set, rv(&[0, 0]), rv(&[0, 0]), rv(&[0, 0]))
        .expect("fixture is well formed")
}

/// `P = {p : p1 ≤ 0}` in `R^m`.
pub fn halfspace_param_set(m: usize) -> ParamSet {
    let mut row = vec![rzero(); m];
    row[0] = crate::exactla::rone();
    ParamSet::Polyhedron(
        Polyhedron::new(RatMatrix::from_rows(vec![row]).unwrap(), vec![rzero()], m)
            .expect("halfspace"),
    )
}

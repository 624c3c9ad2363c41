//! Property suites for the first-order checks: metric regularity implies
//! both the directional implication and the existence condition, and the
//! full-multiplier implication is monotone in the split index.

use num_traits::Zero;
use rand::{Rng, SeedableRng};
use robstab_core::exactla::{rint, Rat, RatMatrix};
use robstab_core::funcexpr::{Expr, FuncVec};
use robstab_core::order1::{
    check_existence_condition, check_first_order, check_first_order_splitting,
    check_metric_regularity, G2Certificate,
};
use robstab_core::polycal::{Polyhedron, PolyUnion};
use robstab_core::sysmodel::{ConstraintSystem, ParamSet};

/// Random affine system g(p, x) = A x + B p with conic C through the origin.
fn random_system(rng: &mut impl Rng) -> Option<ConstraintSystem> {
    let n = rng.gen_range(1..=3usize);
    let m = rng.gen_range(1..=3usize);
    let l = rng.gen_range(1..=3usize);
    let mut comps = Vec::new();
    for _ in 0..l {
        let mut terms = Vec::new();
        for j in 0..n {
            let a = rng.gen_range(-2..=2i64);
            if a != 0 {
                terms.push(Expr::decision(j).scale(rint(a)));
            }
        }
        for j in 0..m {
            let b = rng.gen_range(-2..=2i64);
            if b != 0 {
                terms.push(Expr::param(j).scale(rint(b)));
            }
        }
        comps.push(Expr::add(terms));
    }
    let g = FuncVec::new(comps, m, n);

    let n_pieces = rng.gen_range(1..=2usize);
    let mut pieces = Vec::new();
    for _ in 0..n_pieces {
        let rows = rng.gen_range(1..=2usize);
        let mut a = Vec::new();
        for _ in 0..rows {
            let r: Vec<Rat> = (0..l).map(|_| rint(rng.gen_range(-2..=2))).collect();
            a.push(r);
        }
        let b = vec![Rat::zero(); a.len()];
        pieces.push(Polyhedron::new(RatMatrix::from_rows(a).unwrap(), b, l).ok()?);
    }
    let c = PolyUnion::new(pieces).ok()?;
    ConstraintSystem::new(
        g,
        c,
        ParamSet::FullSpace(m),
        vec![Rat::zero(); m],
        vec![Rat::zero(); n],
        l,
    )
    .ok()
}

#[test]
fn metric_regularity_implies_first_order_and_existence() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4242);
    let mut mr_verified = 0usize;
    let mut checked = 0usize;
    while checked < 100 {
        let Some(sys) = random_system(&mut rng) else {
            continue;
        };
        checked += 1;
        let mr = check_metric_regularity(&sys).unwrap();
        if !mr.is_verified() {
            continue;
        }
        mr_verified += 1;
        let d = sys.image_derivative_cone().unwrap();
        let fo = check_first_order(&sys).unwrap();
        assert!(
            fo.is_verified(),
            "metric regularity verified but first-order implication failed: {:?}",
            fo
        );
        let ex = check_existence_condition(&sys, &d).unwrap();
        assert!(
            ex.is_verified(),
            "metric regularity verified but existence condition failed: {:?}",
            ex
        );
    }
    // the generator should produce a healthy share of regular instances
    assert!(
        mr_verified >= 20,
        "only {mr_verified} metrically regular instances out of {checked}"
    );
}

#[test]
fn full_implication_is_monotone_in_the_split() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(977);
    let cert = G2Certificate::UserAsserted("monotonicity property run".into());
    let mut verified_full = 0usize;
    for _ in 0..60 {
        let n = rng.gen_range(1..=2usize);
        let m = rng.gen_range(1..=2usize);
        let l = rng.gen_range(2..=3usize);
        let mut comps = Vec::new();
        for _ in 0..l {
            let mut terms = Vec::new();
            for j in 0..n {
                let a = rng.gen_range(-2..=2i64);
                if a != 0 {
                    terms.push(Expr::decision(j).scale(rint(a)));
                }
            }
            for j in 0..m {
                let b = rng.gen_range(-2..=2i64);
                if b != 0 {
                    terms.push(Expr::param(j).scale(rint(b)));
                }
            }
            comps.push(Expr::add(terms));
        }
        // the orthant decomposes as a product at every index
        let mk = |l1: usize| {
            ConstraintSystem::new(
                FuncVec::new(comps.clone(), m, n),
                PolyUnion::nonpos_orthant(l),
                ParamSet::FullSpace(m),
                vec![Rat::zero(); m],
                vec![Rat::zero(); n],
                l1,
            )
            .unwrap()
        };
        let full = check_first_order(&mk(l)).unwrap();
        if !full.is_verified() {
            continue;
        }
        verified_full += 1;
        for l1 in 0..=l {
            let v = check_first_order_splitting(&mk(l1), Some(&cert)).unwrap();
            assert!(
                v.is_verified(),
                "full implication verified but split {l1} of {l} failed: {v:?}"
            );
        }
    }
    assert!(verified_full >= 10, "only {verified_full} fully verified instances");
}

//! Lower-curvature formula versus the sampled limit definition on the
//! parabola instance and a battery of random quadratic representations, plus
//! the second-order tangent-set inequality for the upper curvature.

use num_traits::Zero;
use rand::{Rng, SeedableRng};
use robstab_core::exactla::{rint, to_f64, Rat};
use robstab_core::funcexpr::{EvalPoint, EvalPointF, Expr, FuncVec, Wrt};
use robstab_core::order2::sampling::{
    curvature_sampling_oracle, CurvatureKind, CurvatureSchedule, SampledCurvature,
};
use robstab_core::order2::{lower_curvature_polyhedral, ExtVal};
use robstab_core::polycal::{PolyUnion, SubamenableRep};

fn rv(v: &[i64]) -> Vec<Rat> {
    v.iter().map(|&x| rint(x)).collect()
}

/// Linear extrapolation of the per-window estimates to ε = 0.
fn extrapolate(sc: &SampledCurvature, epsilons: &[f64]) -> f64 {
    let k = sc.per_epsilon.len();
    if k < 2 {
        return sc.estimate;
    }
    let (e1, v1) = (epsilons[k - 2], sc.per_epsilon[k - 2]);
    let (e2, v2) = (epsilons[k - 1], sc.per_epsilon[k - 1]);
    if !v1.is_finite() || !v2.is_finite() || (e1 - e2).abs() < 1e-300 {
        return sc.estimate;
    }
    (e1 * v2 - e2 * v1) / (e1 - e2)
}

#[derive(Clone, Copy, PartialEq)]
enum QShape {
    HalfLine,
    Quadrant,
    GraphN,
}

struct Battery {
    rep: SubamenableRep,
    lambda: Vec<Rat>,
    v: Vec<Rat>,
    expected: Rat,
}

/// f64 closures for an instance: membership of Ω = q^{-1}(Q), distance of a
/// vector to the (pattern-approximated) regular normal cone, and a boundary
/// projector driving raw grid points onto active faces.
struct FloatOracles {
    q: robstab_core::funcexpr::CompiledFunc,
    shape: QShape,
    out_dim: usize,
}

impl FloatOracles {
    fn new(q: &FuncVec, shape: QShape) -> Self {
        FloatOracles {
            out_dim: q.out_dim(),
            q: q.compile_f64(),
            shape,
        }
    }

    fn qval(&self, x: &[f64]) -> Vec<f64> {
        self.q
            .eval(&EvalPointF {
                params: vec![],
                decisions: x.to_vec(),
                multipliers: vec![],
            })
            .unwrap()
    }

    fn jac(&self, x: &[f64]) -> Vec<Vec<f64>> {
        self.q
            .jac_decision(&EvalPointF {
                params: vec![],
                decisions: x.to_vec(),
                multipliers: vec![],
            })
            .unwrap()
    }

    fn membership(&self, x: &[f64]) -> bool {
        let q = self.qval(x);
        let tol = 1e-9;
        match self.shape {
            QShape::HalfLine => q[0] <= tol,
            QShape::Quadrant => q[0] <= tol && q[1] <= tol,
            QShape::GraphN => {
                (q[0] <= tol && q[1].abs() <= tol) || (q[0].abs() <= tol && q[1] >= -tol)
            }
        }
    }

    /// Generators of the approximate regular normal cone at `x` from the
    /// near-active pattern; pulled back through ∇q(x). The activity
    /// tolerance sits at machine scale so that only boundary-projected
    /// points count as active — interior grid points at tiny τ must see
    /// the trivial normal cone, as the definition demands.
    fn normal_generators(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let q = self.qval(x);
        let j = self.jac(x);
        let scale = x.iter().map(|a| a.abs()).fold(1.0, f64::max);
        let act_tol = 1e-13 * scale;
        let g1 = &j[0];
        let mut gens: Vec<Vec<f64>> = Vec::new();
        match self.shape {
            QShape::HalfLine => {
                if q[0].abs() <= act_tol {
                    gens.push(g1.clone());
                }
            }
            QShape::Quadrant => {
                if q[0].abs() <= act_tol {
                    gens.push(g1.clone());
                }
                if q[1].abs() <= act_tol {
                    gens.push(j[1].clone());
                }
            }
            QShape::GraphN => {
                let g2 = &j[1];
                let on1 = q[0] <= act_tol && q[1].abs() <= act_tol;
                let on2 = q[0].abs() <= act_tol && q[1] >= -act_tol;
                if on1 && on2 {
                    // corner: N̂ = {μ1 ≥ 0 ≥ μ2} pulled back
                    gens.push(g1.clone());
                    gens.push(g2.iter().map(|x| -x).collect());
                } else if on1 {
                    // φ ≤ 0, y = 0: N̂ = {0} × R
                    gens.push(g2.clone());
                    gens.push(g2.iter().map(|x| -x).collect());
                } else if on2 {
                    // φ = 0, y ≥ 0: N̂ = R × {0}
                    gens.push(g1.clone());
                    gens.push(g1.iter().map(|x| -x).collect());
                }
            }
        }
        gens
    }

    /// NNLS distance of `lambda` to the cone spanned by the generators.
    fn normal_dist(&self, x: &[f64], lambda: &[f64]) -> f64 {
        let gens = self.normal_generators(x);
        let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if gens.is_empty() {
            return norm(lambda);
        }
        let k = gens.len();
        let mut best = norm(lambda); // ν = 0
        for mask in 1u32..(1 << k) {
            let subset: Vec<usize> = (0..k).filter(|&i| mask & (1 << i) != 0).collect();
            // least squares min ‖λ − G ν‖ over the subset
            let m = subset.len();
            let mut gram = vec![vec![0.0; m]; m];
            let mut rhs = vec![0.0; m];
            for a in 0..m {
                for b in 0..m {
                    gram[a][b] = gens[subset[a]]
                        .iter()
                        .zip(&gens[subset[b]])
                        .map(|(x, y)| x * y)
                        .sum();
                }
                rhs[a] = gens[subset[a]].iter().zip(lambda).map(|(x, y)| x * y).sum();
            }
            // solve small system by Gaussian elimination
            let mut aug: Vec<Vec<f64>> = gram
                .iter()
                .zip(&rhs)
                .map(|(r, &b)| {
                    let mut row = r.clone();
                    row.push(b);
                    row
                })
                .collect();
            let mut ok = true;
            for c in 0..m {
                let piv = (c..m).max_by(|&i, &j| {
                    aug[i][c].abs().partial_cmp(&aug[j][c].abs()).unwrap()
                });
                let Some(p) = piv else {
                    ok = false;
                    break;
                };
                if aug[p][c].abs() < 1e-12 {
                    ok = false;
                    break;
                }
                aug.swap(c, p);
                for i in 0..m {
                    if i != c {
                        let f = aug[i][c] / aug[c][c];
                        for jx in c..=m {
                            aug[i][jx] -= f * aug[c][jx];
                        }
                    }
                }
            }
            if !ok {
                continue;
            }
            let nu: Vec<f64> = (0..m).map(|i| aug[i][m] / aug[i][i]).collect();
            if nu.iter().any(|&n| n < -1e-10) {
                continue;
            }
            let mut resid = lambda.to_vec();
            for (ni, &si) in nu.iter().zip(&subset) {
                for (r, g) in resid.iter_mut().zip(&gens[si]) {
                    *r -= ni * g;
                }
            }
            let d = norm(&resid);
            if d < best {
                best = d;
            }
        }
        best
    }

    /// Gauss–Newton projections of a raw point onto each near-active face.
    fn boundary(&self, raw: &[f64]) -> Vec<Vec<f64>> {
        let d = self.out_dim;
        let mut out = Vec::new();
        let subsets: Vec<Vec<usize>> = match d {
            1 => vec![vec![0]],
            _ => vec![vec![0], vec![1], vec![0, 1]],
        };
        for s in subsets {
            let mut x = raw.to_vec();
            for _ in 0..6 {
                let q = self.qval(&x);
                let j = self.jac(&x);
                // Gauss-Newton step for q_S(x) = 0
                let m = s.len();
                let mut gram = vec![vec![0.0; m]; m];
                let mut rhs = vec![0.0; m];
                for a in 0..m {
                    for b in 0..m {
                        gram[a][b] = j[s[a]].iter().zip(&j[s[b]]).map(|(x, y)| x * y).sum();
                    }
                    rhs[a] = q[s[a]];
                }
                // solve gram ν = rhs
                let mut aug: Vec<Vec<f64>> = gram
                    .iter()
                    .zip(&rhs)
                    .map(|(r, &b)| {
                        let mut row = r.clone();
                        row.push(b);
                        row
                    })
                    .collect();
                let mut ok = true;
                for c in 0..m {
                    if aug[c][c].abs() < 1e-14 {
                        ok = false;
                        break;
                    }
                    for i in 0..m {
                        if i != c {
                            let f = aug[i][c] / aug[c][c];
                            for jx in c..=m {
                                aug[i][jx] -= f * aug[c][jx];
                            }
                        }
                    }
                }
                if !ok {
                    break;
                }
                let nu: Vec<f64> = (0..m).map(|i| aug[i][m] / aug[i][i]).collect();
                for (a, &si) in nu.iter().zip(&s) {
                    for (xi, ji) in x.iter_mut().zip(&j[si]) {
                        *xi -= a * ji;
                    }
                }
            }
            out.push(x);
        }
        out
    }
}

fn parabola() -> Battery {
    let q = FuncVec::new(
        vec![Expr::add(vec![
            Expr::decision(1),
            Expr::neg(Expr::powi(Expr::decision(0), 2)),
        ])],
        0,
        2,
    );
    Battery {
        rep: SubamenableRep::new(q, PolyUnion::nonpos_orthant(1), rv(&[0, 0])).unwrap(),
        lambda: rv(&[0, 1]),
        v: rv(&[1, 0]),
        expected: rint(1),
    }
}

fn shape_union(shape: QShape) -> PolyUnion {
    match shape {
        QShape::HalfLine => PolyUnion::nonpos_orthant(1),
        QShape::Quadrant => PolyUnion::nonpos_orthant(2),
        QShape::GraphN => PolyUnion::graph_normal_nonpos(),
    }
}

/// Random quadratic representation: q_j(x) = ⟨a_j, x⟩ + ½ xᵀ B_j x with
/// independent gradient rows, query direction in the kernel of ∇q(0), and a
/// unique representation multiplier.
fn random_battery(rng: &mut impl Rng, shape: QShape) -> Option<Battery> {
    let d = match shape {
        QShape::HalfLine => 1,
        _ => 2,
    };
    let s = d + rng.gen_range(1..=2usize).min(3 - d) + if d == 1 { rng.gen_range(0..=1) } else { 1 };
    let s = s.min(3).max(d + 1);
    let mut comps = Vec::new();
    for _ in 0..d {
        let mut terms = Vec::new();
        for i in 0..s {
            let a = rng.gen_range(-2..=2i64);
            if a != 0 {
                terms.push(Expr::decision(i).scale(rint(a)));
            }
        }
        for i in 0..s {
            for j in i..s {
                let b = rng.gen_range(-1..=1i64);
                if b != 0 {
                    let term = if i == j {
                        Expr::powi(Expr::decision(i), 2).scale(robstab_core::exactla::rq(b, 2))
                    } else {
                        Expr::mul(vec![Expr::decision(i), Expr::decision(j)]).scale(rint(b))
                    };
                    terms.push(term);
                }
            }
        }
        comps.push(Expr::add(terms));
    }
    let q = FuncVec::new(comps, 0, s);
    let z = vec![Rat::zero(); s];
    let pt = EvalPoint::new(vec![], z.clone());
    let jac = q.jacobian(&pt, Wrt::Decision).ok()?;
    if robstab_core::exactla::rank(&jac) != d {
        return None;
    }
    // v in the kernel of ∇q(0), nonzero
    let ns = robstab_core::exactla::nullspace(&jac);
    let v = ns.into_iter().find(|v| v.iter().any(|x| !x.is_zero()))?;
    // multiplier in the limiting normal cone of Q at 0
    let mu: Vec<Rat> = match shape {
        QShape::HalfLine => vec![rint(rng.gen_range(1..=3))],
        QShape::Quadrant => vec![rint(rng.gen_range(1..=3)), rint(rng.gen_range(0..=3))],
        QShape::GraphN => vec![rint(rng.gen_range(1..=3)), rint(-rng.gen_range(0..=3))],
    };
    let lambda = jac.transpose_vec(&mu).ok()?;
    if lambda.iter().all(|x| x.is_zero()) {
        return None;
    }
    // expected χ̲ = −½⟨∇²⟨μ,q⟩v,v⟩
    let quad = q.hessian_quadratic(&mu, &pt, &v).ok()?;
    let expected = -quad / rint(2);
    Some(Battery {
        rep: SubamenableRep::new(q, shape_union(shape), z).ok()?,
        lambda,
        v,
        expected,
    })
}

#[test]
fn lower_curvature_formula_matches_sampled_definition() {
    let sched = CurvatureSchedule {
        epsilons: vec![0.1, 0.02, 0.004, 0.0008],
        tau_steps: 6,
        dir_steps: 5,
        refine_rounds: 2,
    };
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(90210);
    let mut battery = vec![(parabola(), QShape::HalfLine)];
    let shapes = [QShape::HalfLine, QShape::Quadrant, QShape::GraphN];
    let mut draws = 0;
    while battery.len() < 13 && draws < 500 {
        draws += 1;
        let shape = shapes[rng.gen_range(0..3)];
        if let Some(b) = random_battery(&mut rng, shape) {
            battery.push((b, shape));
        }
    }
    assert!(battery.len() >= 11, "battery generation starved");

    for (i, (b, shape)) in battery.iter().enumerate() {
        // formula value must be exact and unambiguous
        let cv = lower_curvature_polyhedral(&b.rep, &b.lambda, &b.v).unwrap();
        if cv.ambiguous {
            continue; // multiple representation values: skip sampled compare
        }
        assert_eq!(
            cv.value,
            ExtVal::Fin(b.expected.clone()),
            "instance {i}: formula disagrees with construction"
        );
        // sampled definition
        let oracles = FloatOracles::new(&b.rep.q, *shape);
        let lambda_f: Vec<f64> = b.lambda.iter().map(to_f64).collect();
        let z_f: Vec<f64> = b.rep.base_point.iter().map(to_f64).collect();
        let v_f: Vec<f64> = b.v.iter().map(to_f64).collect();
        let membership = |x: &[f64]| oracles.membership(x);
        let ndist = |x: &[f64], l: &[f64]| oracles.normal_dist(x, l);
        let bproj = |x: &[f64]| oracles.boundary(x);
        let sampled = curvature_sampling_oracle(
            &membership,
            Some(&ndist),
            Some(&bproj),
            &lambda_f,
            &z_f,
            &v_f,
            &sched,
            CurvatureKind::Lower,
        );
        let est = extrapolate(&sampled, &sched.epsilons);
        let expected = to_f64(&b.expected);
        let tol = 1e-3 * expected.abs().max(1.0);
        assert!(
            (est - expected).abs() <= tol,
            "instance {i}: sampled {est} vs formula {expected} (per-eps {:?})",
            sampled.per_epsilon
        );
    }
}

#[test]
fn parabola_sampled_value_consistent_across_schedules() {
    let b = parabola();
    let oracles = FloatOracles::new(&b.rep.q, QShape::HalfLine);
    let membership = |x: &[f64]| oracles.membership(x);
    let ndist = |x: &[f64], l: &[f64]| oracles.normal_dist(x, l);
    let bproj = |x: &[f64]| oracles.boundary(x);
    let run = |sched: &CurvatureSchedule| {
        let sampled = curvature_sampling_oracle(
            &membership,
            Some(&ndist),
            Some(&bproj),
            &[0.0, 1.0],
            &[0.0, 0.0],
            &[1.0, 0.0],
            sched,
            CurvatureKind::Lower,
        );
        extrapolate(&sampled, &sched.epsilons)
    };
    let s1 = CurvatureSchedule {
        epsilons: vec![0.1, 0.02, 0.004, 0.0008],
        tau_steps: 6,
        dir_steps: 5,
        refine_rounds: 2,
    };
    let s2 = CurvatureSchedule {
        epsilons: vec![0.05, 0.01, 0.002, 0.0004],
        tau_steps: 8,
        dir_steps: 7,
        refine_rounds: 2,
    };
    let (v1, v2) = (run(&s1), run(&s2));
    assert!((v1 - 1.0).abs() < 1e-3, "schedule 1: {v1}");
    assert!((v2 - 1.0).abs() < 1e-3, "schedule 2: {v2}");
    assert!((v1 - v2).abs() < 1e-3, "schedules disagree: {v1} vs {v2}");
}

#[test]
fn upper_curvature_dominates_second_order_tangent_sup() {
    // Proposition-style inequality on the polyhedral battery sets: the
    // sampled upper curvature must dominate ½·sup⟨λ, w⟩ over the computed
    // second-order tangent set.
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5150);
    let shapes = [QShape::HalfLine, QShape::Quadrant, QShape::GraphN];
    let sched = CurvatureSchedule {
        epsilons: vec![0.2, 0.05, 0.01],
        tau_steps: 6,
        dir_steps: 7,
        refine_rounds: 1,
    };
    let mut tested = 0;
    for _ in 0..60 {
        let shape = shapes[rng.gen_range(0..3)];
        let q = shape_union(shape);
        let dim = q.dim;
        let z = vec![Rat::zero(); dim];
        // random tangent direction: draw until tangent
        let v: Vec<Rat> = (0..dim)
            .map(|_| rint(rng.gen_range(-2..=2)))
            .collect();
        if !robstab_core::polycal::is_tangent(&q, &z, &v).unwrap() {
            continue;
        }
        let t2 = robstab_core::polycal::second_order_tangent_set(&q, &z, &v).unwrap();
        let lambda: Vec<Rat> = (0..dim).map(|_| rint(rng.gen_range(-2..=2))).collect();
        // sup ⟨λ, w⟩ over the union of cones: 0 or +∞
        let mut sup_inf = false;
        for k in &t2 {
            if robstab_core::exactla::sup_over_cone(k, &lambda).unwrap().is_none() {
                sup_inf = true;
            }
        }
        let shape_now = shape;
        let membership = move |x: &[f64]| {
            let tol = 1e-12;
            match shape_now {
                QShape::HalfLine => x[0] <= tol,
                QShape::Quadrant => x[0] <= tol && x[1] <= tol,
                QShape::GraphN => {
                    (x[0] <= tol && x[1].abs() <= tol) || (x[0].abs() <= tol && x[1] >= -tol)
                }
            }
        };
        let lambda_f: Vec<f64> = lambda.iter().map(to_f64).collect();
        let z_f = vec![0.0; dim];
        let v_f: Vec<f64> = v.iter().map(to_f64).collect();
        let sampled = curvature_sampling_oracle(
            &membership,
            None,
            None,
            &lambda_f,
            &z_f,
            &v_f,
            &sched,
            CurvatureKind::Upper,
        );
        tested += 1;
        if sup_inf {
            // χ̄ = +∞: the windowed sups must grow as ε shrinks… they scale
            // like c/τ; assert the last window found a large value
            let finite: Vec<f64> = sampled
                .per_epsilon
                .iter()
                .copied()
                .filter(|x| x.is_finite())
                .collect();
            assert!(
                finite.last().map_or(true, |&l| l > 1.0),
                "expected growth toward +∞, got {:?}",
                sampled.per_epsilon
            );
        } else {
            // sup over T² is 0: χ̄ ≥ 0 must not be violated by more than
            // sampling noise
            let last = sampled.per_epsilon.last().copied().unwrap_or(0.0);
            assert!(
                last >= -1e-6,
                "sampled upper curvature {last} violates the tangent-set bound 0"
            );
        }
    }
    assert!(tested >= 12, "only {tested} tangent draws");
}

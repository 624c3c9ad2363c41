//! Second-order machinery: directional upper/lower curvatures, their
//! polyhedral-representation formulas, and second-order verification of
//! stability and subregularity.
//!
//! The verification sweep mirrors the first-order one but kills each
//! surviving multiplier generator with a strict quadratic inequality: on
//! stratum direction sets that are linear subspaces the combined form is
//! tested for negative definiteness exactly; otherwise a rational grid over
//! the direction cone decides, downgrading the verdict to `verified_grid`.

use crate::exactla::{
    dot, hcone_to_vcone, lp_feasible, maximize, rq, to_f64, Constraints, HCone, LpOutcome, Rat,
    RatMatrix,
};
use crate::funcexpr::{EvalPoint, FuncError, FuncVec, Wrt};
use crate::order1::{
    check_subregularity_firstorder, G2Certificate, Grade, Order1Error, Verdict, Witness,
};
use crate::polycal::{
    enumerate_strata, subspace_basis, PolycalError, PolyUnion, Strata, SubamenableRep,
};
use crate::sysmodel::{ConstraintSystem, ParamSet, SysError};
use num_traits::{Signed, Zero};

#[derive(Debug, Clone, thiserror::Error)]
pub enum Order2Error {
    #[error("second-order data unavailable: {0}")]
    SecondOrderUnavailable(String),
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error(transparent)]
    Polycal(#[from] PolycalError),
    #[error(transparent)]
    Sys(#[from] SysError),
    #[error(transparent)]
    Func(#[from] FuncError),
    #[error(transparent)]
    Order1(#[from] Order1Error),
    #[error(transparent)]
    Exact(#[from] crate::exactla::ExactlaError),
}

pub type Result<T> = std::result::Result<T, Order2Error>;

/// Extended rational value.
#[derive(Debug, Clone, PartialEq)]
pub enum ExtVal {
    NegInf,
    Fin(Rat),
    PosInf,
}

impl ExtVal {
    pub fn to_f64(&self) -> f64 {
        match self {
            ExtVal::NegInf => f64::NEG_INFINITY,
            ExtVal::Fin(r) => to_f64(r),
            ExtVal::PosInf => f64::INFINITY,
        }
    }

    fn le(&self, other: &ExtVal) -> bool {
        match (self, other) {
            (ExtVal::NegInf, _) | (_, ExtVal::PosInf) => true,
            (ExtVal::Fin(a), ExtVal::Fin(b)) => a <= b,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurvatureMethod {
    /// Exact lower-curvature formula through a polyhedral representation.
    Formula,
    /// Exact upper bound from the convex-representation inequality.
    UpperBound,
    /// Nested sampling of the raw limit definition.
    Sampled,
}

/// A curvature query result. When several representation multipliers yield
/// different values all candidates are kept, `ambiguous` is set, and `value`
/// holds the minimum (the direction that keeps verification sound).
#[derive(Debug, Clone)]
pub struct CurvatureValue {
    pub value: ExtVal,
    pub candidates: Vec<ExtVal>,
    pub method: CurvatureMethod,
    pub ambiguous: bool,
    pub mu: Option<Vec<Rat>>,
    pub notes: Vec<String>,
}

/// Lower curvature of `Ω = q^{-1}(Q)` at the base point in direction `v`
/// against `λ`, through the representation formula: a representation
/// multiplier `μ` in the directional normal cone of `Q` with
/// `λ = ∇q(z̄)*μ` gives `χ̲ = -½⟨∇²⟨μ,q⟩(z̄)v, v⟩`; `+∞` when `λ` is not a
/// directional limiting normal.
pub fn lower_curvature_polyhedral(
    rep: &SubamenableRep,
    lambda: &[Rat],
    v: &[Rat],
) -> Result<CurvatureValue> {
    let pt = EvalPoint::new(vec![], rep.base_point.clone());
    let jac = rep.q.jacobian(&pt, Wrt::Decision)?;
    let qz = rep.q.eval_exact(&pt)?;
    let d = rep.q.out_dim();
    let w_img = jac.mat_vec(v)?;

    // Quadratic coefficients c_j = ⟨∇²q_j(z̄)v, v⟩.
    let mut coeffs = Vec::with_capacity(d);
    for j in 0..d {
        let mut e = vec![Rat::zero(); d];
        e[j] = crate::exactla::rone();
        let c = rep
            .q
            .hessian_quadratic(&e, &pt, v)
            .map_err(|err| match err {
                FuncError::SecondOrderUnavailable(m) => Order2Error::SecondOrderUnavailable(m),
                other => Order2Error::Func(other),
            })?;
        coeffs.push(c);
    }

    let strata = enumerate_strata(&rep.big_q, &qz)?;
    let mut candidates: Vec<ExtVal> = Vec::new();
    let mut best: Option<(ExtVal, Vec<Rat>)> = None;
    if strata.stratum_of_direction(&w_img).is_some() {
        let sigma = strata.sigma_of(&w_img);
        for &ci in &strata.compatible_with(&sigma) {
            let nv = &strata.list[ci].normal_value;
            // multiplier polyhedron {μ ∈ nv : ∇q* μ = λ}
            let eq = jac.transpose().vstack(&nv.eq)?;
            let mut eq_rhs = lambda.to_vec();
            eq_rhs.extend(vec![Rat::zero(); nv.eq.n_rows()]);
            let zi = vec![Rat::zero(); nv.ineq.n_rows()];
            let feas = lp_feasible(
                &RatMatrix::empty(d),
                &[],
                &nv.ineq,
                &zi,
                &eq,
                &eq_rhs,
            )?;
            if feas.is_none() {
                continue;
            }
            // Range of ⟨∇²⟨μ,q⟩v, v⟩ over the polyhedron.
            let cons = Constraints {
                ineq: &nv.ineq,
                ineq_rhs: &zi,
                eq: &eq,
                eq_rhs: &eq_rhs,
            };
            let hi = maximize(&coeffs, &cons)?;
            let neg: Vec<Rat> = coeffs.iter().map(|c| -c).collect();
            let lo = maximize(&neg, &cons)?;
            // candidates -½·[min, max] of the coefficient functional
            let (low_end, mu_low) = match hi {
                LpOutcome::Optimal { x, value } => {
                    (ExtVal::Fin(-value / crate::exactla::rint(2)), Some(x))
                }
                LpOutcome::Unbounded => (ExtVal::NegInf, None),
                LpOutcome::Infeasible => unreachable!("feasibility checked"),
            };
            let high_end = match lo {
                LpOutcome::Optimal { value, .. } => {
                    ExtVal::Fin(value / crate::exactla::rint(2))
                }
                LpOutcome::Unbounded => ExtVal::PosInf,
                LpOutcome::Infeasible => unreachable!("feasibility checked"),
            };
            if !candidates.contains(&low_end) {
                candidates.push(low_end.clone());
            }
            if !candidates.contains(&high_end) {
                candidates.push(high_end.clone());
            }
            if best.as_ref().map_or(true, |(b, _)| low_end.le(b)) {
                best = Some((low_end, mu_low.unwrap_or_default()));
            }
        }
    }
    match best {
        None => Ok(CurvatureValue {
            value: ExtVal::PosInf,
            candidates: vec![ExtVal::PosInf],
            method: CurvatureMethod::Formula,
            ambiguous: false,
            mu: None,
            notes: vec!["λ is not a directional limiting normal".into()],
        }),
        Some((value, mu)) => {
            let ambiguous = candidates.len() > 1;
            Ok(CurvatureValue {
                value,
                candidates,
                method: CurvatureMethod::Formula,
                ambiguous,
                mu: Some(mu),
                notes: if ambiguous {
                    vec!["multiple representation multipliers; minimum reported".into()]
                } else {
                    vec![]
                },
            })
        }
    }
}

/// Upper bound on the upper curvature through a convex representation:
/// `χ̄ ≤ -½ sup{⟨∇²⟨μ,q⟩(z̄)v,v⟩ : μ ∈ N_Q(q(z̄)), λ = ∇q(z̄)*μ}`.
///
/// An empty multiplier set returns `-∞` (the sup-over-∅ convention); the
/// precondition `λ ∈ N_Ω(z̄)` fails in that case and the value is not a
/// bound.
pub fn upper_curvature_bound_convex(
    rep: &SubamenableRep,
    lambda: &[Rat],
    v: &[Rat],
) -> Result<CurvatureValue> {
    if rep.big_q.pieces.len() != 1 {
        return Err(Order2Error::Hypothesis(
            "upper-curvature bound needs a convex representation set".into(),
        ));
    }
    let pt = EvalPoint::new(vec![], rep.base_point.clone());
    let jac = rep.q.jacobian(&pt, Wrt::Decision)?;
    let qz = rep.q.eval_exact(&pt)?;
    let d = rep.q.out_dim();
    let piece = &rep.big_q.pieces[0];
    let act = piece.active_rows(&qz);
    let gens: Vec<Vec<Rat>> = act.iter().map(|&ri| piece.a.row(ri).to_vec()).collect();
    let normal = crate::polycal::cone_from_generators(&gens, d)?;

    let mut coeffs = Vec::with_capacity(d);
    for j in 0..d {
        let mut e = vec![Rat::zero(); d];
        e[j] = crate::exactla::rone();
        coeffs.push(rep.q.hessian_quadratic(&e, &pt, v).map_err(|err| match err {
            FuncError::SecondOrderUnavailable(m) => Order2Error::SecondOrderUnavailable(m),
            other => Order2Error::Func(other),
        })?);
    }
    let eq = jac.transpose().vstack(&normal.eq)?;
    let mut eq_rhs = lambda.to_vec();
    eq_rhs.extend(vec![Rat::zero(); normal.eq.n_rows()]);
    let zi = vec![Rat::zero(); normal.ineq.n_rows()];
    let feas = lp_feasible(&RatMatrix::empty(d), &[], &normal.ineq, &zi, &eq, &eq_rhs)?;
    if feas.is_none() {
        return Ok(CurvatureValue {
            value: ExtVal::NegInf,
            candidates: vec![ExtVal::NegInf],
            method: CurvatureMethod::UpperBound,
            ambiguous: false,
            mu: None,
            notes: vec!["empty multiplier set (sup over ∅); not a bound".into()],
        });
    }
    let cons = Constraints {
        ineq: &normal.ineq,
        ineq_rhs: &zi,
        eq: &eq,
        eq_rhs: &eq_rhs,
    };
    let (value, mu) = match maximize(&coeffs, &cons)? {
        LpOutcome::Optimal { x, value } => {
            (ExtVal::Fin(-value / crate::exactla::rint(2)), Some(x))
        }
        LpOutcome::Unbounded => (ExtVal::NegInf, None),
        LpOutcome::Infeasible => unreachable!("feasibility checked"),
    };
    Ok(CurvatureValue {
        value: value.clone(),
        candidates: vec![value],
        method: CurvatureMethod::UpperBound,
        ambiguous: false,
        mu,
        notes: vec![],
    })
}

pub mod sampling {
    //! Nested sampling of the raw curvature definitions; used only to test
    //! the formulas, never for verdicts.

    /// Shrinking-window schedule for the sampled curvature limits.
    #[derive(Debug, Clone)]
    pub struct CurvatureSchedule {
        pub epsilons: Vec<f64>,
        pub tau_steps: usize,
        pub dir_steps: usize,
        pub refine_rounds: usize,
    }

    impl Default for CurvatureSchedule {
        fn default() -> Self {
            CurvatureSchedule {
                epsilons: vec![0.2, 0.1, 0.05, 0.02, 0.01],
                tau_steps: 24,
                dir_steps: 9,
                refine_rounds: 2,
            }
        }
    }

    #[derive(Debug, Clone, Copy, PartialEq, Eq)]
    pub enum CurvatureKind {
        Upper,
        Lower,
    }

    /// Sampled curvature estimate: per-window extrema and the final value.
    #[derive(Debug, Clone)]
    pub struct SampledCurvature {
        pub per_epsilon: Vec<f64>,
        pub estimate: f64,
    }

    /// Sample the curvature limit with a membership oracle, an optional
    /// normal-cone distance oracle (required for the lower curvature), and
    /// an optional boundary projector proposing feasible candidates near a
    /// raw grid point.
    pub fn curvature_sampling_oracle(
        membership: &dyn Fn(&[f64]) -> bool,
        normal_dist: Option<&dyn Fn(&[f64], &[f64]) -> f64>,
        boundary: Option<&dyn Fn(&[f64]) -> Vec<Vec<f64>>>,
        lambda: &[f64],
        z: &[f64],
        v: &[f64],
        sched: &CurvatureSchedule,
        kind: CurvatureKind,
    ) -> SampledCurvature {
        struct State {
            extremum: Option<f64>,
            arg: Option<Vec<f64>>,
        }
        #[allow(clippy::too_many_arguments)]
        fn scan(
            st: &mut State,
            center: &[f64],
            width: f64,
            eps: f64,
            membership: &dyn Fn(&[f64]) -> bool,
            normal_dist: Option<&dyn Fn(&[f64], &[f64]) -> f64>,
            boundary: Option<&dyn Fn(&[f64]) -> Vec<Vec<f64>>>,
            lambda: &[f64],
            z: &[f64],
            v: &[f64],
            sched: &CurvatureSchedule,
            kind: CurvatureKind,
        ) {
            let dim = z.len();
            for ti in 0..sched.tau_steps {
                // log-spaced τ in (eps·2^-10, eps)
                let frac = ti as f64 / (sched.tau_steps - 1).max(1) as f64;
                let tau = eps * (2.0f64).powf(-6.0 * (1.0 - frac));
                let mut idx = vec![0usize; dim];
                'grid: loop {
                    let vp: Vec<f64> = (0..dim)
                        .map(|k| {
                            center[k]
                                + width
                                    * (2.0 * idx[k] as f64 / (sched.dir_steps - 1).max(1) as f64
                                        - 1.0)
                        })
                        .collect();
                    let raw: Vec<f64> = (0..dim).map(|k| z[k] + tau * vp[k]).collect();
                    let mut cands: Vec<Vec<f64>> = vec![raw.clone()];
                    if let Some(b) = boundary {
                        cands.extend(b(&raw));
                    }
                    for cand in cands {
                        let veff: Vec<f64> = (0..dim).map(|k| (cand[k] - z[k]) / tau).collect();
                        let dist_v: f64 = veff
                            .iter()
                            .zip(v)
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum::<f64>()
                            .sqrt();
                        if dist_v >= eps || !membership(&cand) {
                            continue;
                        }
                        if kind == CurvatureKind::Lower {
                            let Some(nd) = normal_dist else { continue };
                            if nd(&cand, lambda) >= eps {
                                continue;
                            }
                        }
                        let val = lambda
                            .iter()
                            .zip(veff.iter().zip(v))
                            .map(|(l, (a, b))| l * (a - b))
                            .sum::<f64>()
                            / tau;
                        let better = match st.extremum {
                            None => true,
                            Some(e) => match kind {
                                CurvatureKind::Upper => val > e,
                                CurvatureKind::Lower => val < e,
                            },
                        };
                        if better {
                            st.extremum = Some(val);
                            st.arg = Some(vp.clone());
                        }
                    }
                    let mut k = 0;
                    loop {
                        if k == dim {
                            break 'grid;
                        }
                        idx[k] += 1;
                        if idx[k] < sched.dir_steps {
                            break;
                        }
                        idx[k] = 0;
                        k += 1;
                    }
                }
            }
        }

        let mut per_epsilon = Vec::new();
        for &eps in &sched.epsilons {
            let mut st = State {
                extremum: None,
                arg: None,
            };
            scan(
                &mut st, v, eps, eps, membership, normal_dist, boundary, lambda, z, v, sched, kind,
            );
            for round in 0..sched.refine_rounds {
                if let Some(center) = st.arg.clone() {
                    let width = eps / (4.0f64).powi(round as i32 + 1);
                    scan(
                        &mut st, &center, width, eps, membership, normal_dist, boundary, lambda,
                        z, v, sched, kind,
                    );
                }
            }
            per_epsilon.push(st.extremum.unwrap_or(match kind {
                CurvatureKind::Upper => f64::NEG_INFINITY,
                CurvatureKind::Lower => f64::INFINITY,
            }));
        }
        SampledCurvature {
            estimate: *per_epsilon.last().unwrap_or(&f64::NAN),
            per_epsilon,
        }
    }
}

/// Negative-definiteness witness search for a symmetric rational matrix:
/// `None` when the form is negative definite; otherwise a vector `x ≠ 0`
/// with `xᵀ M x ≥ 0`, found by rational symmetric elimination.
pub fn neg_definite_witness(m: &RatMatrix) -> Option<Vec<Rat>> {
    let k = m.n_rows();
    if k == 0 {
        return None;
    }
    // Work with N = -M; M is ND iff N is PD.
    let mut n = RatMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            n.set(i, j, -m.get(i, j).clone());
        }
    }
    // basis columns in original coordinates
    let mut basis = RatMatrix::identity(k);
    for i in 0..k {
        let pii = n.get(i, i).clone();
        if pii.is_positive() {
            for j in (i + 1)..k {
                let f = n.get(j, i) / &pii;
                if f.is_zero() {
                    continue;
                }
                // column_j of basis -= f * column_i
                for r in 0..k {
                    let v = basis.get(r, j) - &f * basis.get(r, i);
                    basis.set(r, j, v);
                }
                // congruence on N: row j -= f row i; col j -= f col i
                for c in 0..k {
                    let v = n.get(j, c) - &f * n.get(i, c);
                    n.set(j, c, v);
                }
                for r in 0..k {
                    let v = n.get(r, j) - &f * n.get(r, i);
                    n.set(r, j, v);
                }
            }
            continue;
        }
        // pivot ≤ 0: construct a witness in current coordinates
        let col_i: Vec<Rat> = (0..k).map(|r| basis.get(r, i).clone()).collect();
        if pii.is_negative() || n.row(i).iter().all(|x| x.is_zero()) {
            // xᵀNx = pii ≤ 0 at this basis vector
            return Some(col_i);
        }
        // zero pivot with a nonzero off-diagonal entry: mix two directions
        let j = (0..k).find(|&c| !n.get(i, c).is_zero()).expect("nonzero row");
        let nij = n.get(i, j).clone();
        let njj = n.get(j, j).clone();
        let t: Rat = if !njj.is_positive() {
            if nij.is_positive() {
                -crate::exactla::rone()
            } else {
                crate::exactla::rone()
            }
        } else {
            -(&nij / &njj)
        };
        let mut x = col_i;
        for r in 0..k {
            let contrib = &t * basis.get(r, j);
            x[r] = &x[r] + &contrib;
        }
        return Some(x);
    }
    None
}

/// A second-order verification instance: the system plus cached component
/// Hessians of `g` (joint variables) and of the parameter description `h`.
pub struct SecondOrderInstance {
    pub sys: ConstraintSystem,
    hess_g: Vec<std::result::Result<RatMatrix, String>>,
    /// Rows describing the parameter set multipliers (`∇h(p̄)` or active
    /// polyhedron rows), and the Hessians of the h-components (zero for
    /// polyhedral parameter sets).
    p_rows: RatMatrix,
    hess_h: Vec<RatMatrix>,
    h_subreg: Option<Verdict>,
}

impl SecondOrderInstance {
    pub fn new(sys: ConstraintSystem) -> Result<Self> {
        let m = sys.g.param_dim;
        let pt = sys.reference_point();
        let l = sys.g.out_dim();
        // per-component Hessians of g in the joint variables
        let mut hess_g = Vec::with_capacity(l);
        for i in 0..l {
            let mut e = vec![Rat::zero(); l];
            e[i] = crate::exactla::rone();
            match sys.g.hessian_form(&e, &pt) {
                Ok(h) => hess_g.push(Ok(h)),
                Err(FuncError::SecondOrderUnavailable(msg)) => hess_g.push(Err(msg)),
                Err(e) => return Err(e.into()),
            }
        }
        let (p_rows, hess_h, h_subreg) = match &sys.p_set {
            ParamSet::FullSpace(_) => (RatMatrix::empty(m), vec![], None),
            ParamSet::Polyhedron(poly) => {
                let act = poly.active_rows(&sys.p_ref);
                (poly.a.select_rows(&act), vec![RatMatrix::zeros(m, m); act.len()], None)
            }
            ParamSet::SmoothIneq(h) => {
                let ppt = EvalPoint::new(sys.p_ref.clone(), vec![]);
                let vals = h.eval_exact(&ppt)?;
                if vals.iter().any(|v| !v.is_zero()) {
                    return Err(Order2Error::Hypothesis(
                        "second-order checks require h(p̄) = 0 componentwise; drop nonbinding rows"
                            .into(),
                    ));
                }
                let jac = h.jacobian(&ppt, Wrt::Param)?;
                let lp = h.out_dim();
                let mut hh = Vec::with_capacity(lp);
                for j in 0..lp {
                    let mut e = vec![Rat::zero(); lp];
                    e[j] = crate::exactla::rone();
                    hh.push(h.hessian_form(&e, &ppt).map_err(|err| match err {
                        FuncError::SecondOrderUnavailable(msg) => {
                            Order2Error::SecondOrderUnavailable(msg)
                        }
                        other => Order2Error::Func(other),
                    })?);
                }
                // the corollary hypothesis: h(·) − R₋ metrically subregular;
                // the checker indexes its argument by decision variables
                let h_dec = FuncVec::new(
                    h.components
                        .iter()
                        .map(|c| {
                            c.map_vars(&|k, i| {
                                if k == crate::funcexpr::VarKind::Param {
                                    (crate::funcexpr::VarKind::Decision, i)
                                } else {
                                    (k, i)
                                }
                            })
                        })
                        .collect(),
                    0,
                    m,
                );
                let subreg = check_subregularity_firstorder(
                    &h_dec,
                    &PolyUnion::nonpos_orthant(lp),
                    &sys.p_ref,
                )?;
                (jac, hh, Some(subreg))
            }
        };
        Ok(SecondOrderInstance {
            sys,
            hess_g,
            p_rows,
            hess_h,
            h_subreg,
        })
    }

    /// `∇²⟨λ, g⟩(p̄, x̄)` over the joint (param, decision) variables.
    fn q_lambda(&self, lambda: &[Rat]) -> Result<RatMatrix> {
        let m = self.sys.g.param_dim;
        let n = self.sys.g.decision_dim;
        let mut acc = RatMatrix::zeros(m + n, m + n);
        for (i, li) in lambda.iter().enumerate() {
            if li.is_zero() {
                continue;
            }
            match &self.hess_g[i] {
                Ok(h) => {
                    for a in 0..m + n {
                        for b in 0..m + n {
                            let v = acc.get(a, b) + li * h.get(a, b);
                            acc.set(a, b, v);
                        }
                    }
                }
                Err(msg) => {
                    return Err(Order2Error::SecondOrderUnavailable(format!(
                        "component {} with nonzero weight: {msg}",
                        i + 1
                    )))
                }
            }
        }
        Ok(acc)
    }

    /// `∇²⟨μ, h⟩(p̄)` lifted to the joint variables (w-block only).
    fn h_mu_lifted(&self, mu: &[Rat]) -> RatMatrix {
        let m = self.sys.g.param_dim;
        let n = self.sys.g.decision_dim;
        let mut acc = RatMatrix::zeros(m + n, m + n);
        for (j, mj) in mu.iter().enumerate() {
            if mj.is_zero() {
                continue;
            }
            let h = &self.hess_h[j];
            for a in 0..m {
                for b in 0..m {
                    let v = acc.get(a, b) + mj * h.get(a, b);
                    acc.set(a, b, v);
                }
            }
        }
        acc
    }

    /// Whether `∇²⟨μ, h⟩` is constant over the multiplier polyhedron
    /// `{μ ≥ 0 : p_rowsᵀ μ = c}`; true when every direction of the
    /// polyhedron has a zero Hessian combination.
    fn h_constant_over(&self, target: &[Rat], mu0: &[Rat]) -> Result<bool> {
        let lp = self.p_rows.n_rows();
        if lp == 0 || self.hess_h.iter().all(|h| h.rows_iter().flatten().all(|x| x.is_zero())) {
            return Ok(true);
        }
        // always-zero coordinates: max μ_j over the polyhedron is 0
        let mut always_zero = vec![false; lp];
        let ineq_rows: Vec<Vec<Rat>> = (0..lp)
            .map(|j| {
                let mut r = vec![Rat::zero(); lp];
                r[j] = -crate::exactla::rone();
                r
            })
            .collect();
        let ineq = RatMatrix::from_rows(ineq_rows)?;
        let zi = vec![Rat::zero(); lp];
        let eq = self.p_rows.transpose();
        for j in 0..lp {
            if mu0[j].is_positive() {
                continue;
            }
            let mut obj = vec![Rat::zero(); lp];
            obj[j] = crate::exactla::rone();
            match maximize(
                &obj,
                &Constraints {
                    ineq: &ineq,
                    ineq_rhs: &zi,
                    eq: &eq,
                    eq_rhs: target,
                },
            )? {
                LpOutcome::Optimal { value, .. } => {
                    if value.is_zero() {
                        always_zero[j] = true;
                    }
                }
                LpOutcome::Unbounded => {}
                LpOutcome::Infeasible => unreachable!("μ0 is feasible"),
            }
        }
        // direction space: nullspace of p_rowsᵀ with pinned coordinates
        let mut rows: Vec<Vec<Rat>> = eq.rows_iter().map(|r| r.to_vec()).collect();
        for (j, &z) in always_zero.iter().enumerate() {
            if z {
                let mut r = vec![Rat::zero(); lp];
                r[j] = crate::exactla::rone();
                rows.push(r);
            }
        }
        let basis = crate::exactla::nullspace(&RatMatrix::from_rows(rows)?);
        for b in &basis {
            let hb = self.h_mu_lifted(b);
            if hb.rows_iter().flatten().any(|x| !x.is_zero()) {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Joint Jacobian rows `[∇_p g | ∇_x g]`.
fn joint_jacobian(sys: &ConstraintSystem) -> Result<RatMatrix> {
    Ok(sys.g.jacobian(&sys.reference_point(), Wrt::Both)?)
}

/// The direction region of one stratum in the joint `(w, u)` variables.
struct DirectionRegion {
    closure: HCone,
    /// A point with all strict rows strictly satisfied, when the region has
    /// any strict rows; for all-zero patterns a nonzero member if one exists.
    witness: Option<Vec<Rat>>,
}

fn stratum_direction_region(
    sys: &ConstraintSystem,
    strata: &Strata,
    sign: &[i8],
    tp: &HCone,
    jg: &RatMatrix,
) -> Result<DirectionRegion> {
    let m = sys.g.param_dim;
    let n = sys.g.decision_dim;
    let dim = m + n;
    let mut weak: Vec<Vec<Rat>> = Vec::new();
    let mut strict: Vec<Vec<Rat>> = Vec::new();
    let mut eq: Vec<Vec<Rat>> = Vec::new();
    for r in tp.ineq.rows_iter() {
        let mut row = r.to_vec();
        row.extend(vec![Rat::zero(); n]);
        weak.push(row);
    }
    for r in tp.eq.rows_iter() {
        let mut row = r.to_vec();
        row.extend(vec![Rat::zero(); n]);
        eq.push(row);
    }
    for (c, s) in strata.canon_rows.iter().zip(sign) {
        let r = jg.transpose_vec(c)?; // row of a·(∇g (w,u)) over (w,u)
        match s {
            -1 => strict.push(r),
            1 => strict.push(r.iter().map(|x| -x).collect()),
            _ => eq.push(r),
        }
    }
    let to_m = |rows: &[Vec<Rat>]| -> Result<RatMatrix> {
        Ok(if rows.is_empty() {
            RatMatrix::empty(dim)
        } else {
            RatMatrix::from_rows(rows.to_vec())?
        })
    };
    let strict_m = to_m(&strict)?;
    let weak_m = to_m(&weak)?;
    let eq_m = to_m(&eq)?;
    let zs = vec![Rat::zero(); strict_m.n_rows()];
    let zw = vec![Rat::zero(); weak_m.n_rows()];
    let ze = vec![Rat::zero(); eq_m.n_rows()];
    let witness = if strict_m.n_rows() > 0 {
        lp_feasible(&strict_m, &zs, &weak_m, &zw, &eq_m, &ze)?
    } else {
        let mut found = None;
        'outer: for j in 0..dim {
            for sgn in [1i64, -1] {
                let mut srow = vec![Rat::zero(); dim];
                srow[j] = crate::exactla::rint(-sgn);
                let sm = RatMatrix::from_rows(vec![srow])?;
                if let Some(x) = lp_feasible(&sm, &[Rat::zero()], &weak_m, &zw, &eq_m, &ze)? {
                    found = Some(x);
                    break 'outer;
                }
            }
        }
        found
    };
    // closure: strict rows become weak
    let mut all_weak = weak;
    all_weak.extend(strict);
    let closure = HCone::new(to_m(&all_weak)?, eq_m, dim)?;
    Ok(DirectionRegion { closure, witness })
}

/// Decide whether a multiplier generator is strictly killed at a specific
/// direction: `∃μ ≥ 0 : p_rowsᵀμ = ∇_p g*λ` and
/// `⟨∇²⟨λ,g⟩(w,u),(w,u)⟩ − ⟨∇²⟨μ,h⟩w,w⟩ < 0`. Returns the margin
/// `sup_μ H − Q` (positive means killed) or `None` when no multiplier
/// exists.
fn kill_margin(
    inst: &SecondOrderInstance,
    lambda: &[Rat],
    target: &[Rat],
    q_val: &Rat,
    w: &[Rat],
) -> Result<Option<KillMargin>> {
    let lp = inst.p_rows.n_rows();
    if lp == 0 {
        // μ is empty: the multiplier equation is p-target = 0
        if target.iter().all(|x| x.is_zero()) {
            return Ok(Some(if q_val.is_negative() {
                KillMargin::Killed
            } else {
                KillMargin::Survives(q_val.clone())
            }));
        }
        return Ok(None);
    }
    let _ = lambda;
    let mut obj = Vec::with_capacity(lp);
    for j in 0..lp {
        let h = &inst.hess_h[j];
        let m = inst.sys.g.param_dim;
        let mut val = Rat::zero();
        for a in 0..m {
            for b in 0..m {
                val = &val + &(h.get(a, b) * &w[a] * &w[b]);
            }
        }
        obj.push(val);
    }
    let ineq_rows: Vec<Vec<Rat>> = (0..lp)
        .map(|j| {
            let mut r = vec![Rat::zero(); lp];
            r[j] = -crate::exactla::rone();
            r
        })
        .collect();
    let ineq = RatMatrix::from_rows(ineq_rows)?;
    let zi = vec![Rat::zero(); lp];
    let eq = inst.p_rows.transpose();
    match maximize(
        &obj,
        &Constraints {
            ineq: &ineq,
            ineq_rhs: &zi,
            eq: &eq,
            eq_rhs: target,
        },
    )? {
        LpOutcome::Infeasible => Ok(None),
        LpOutcome::Unbounded => Ok(Some(KillMargin::Killed)),
        LpOutcome::Optimal { value, .. } => {
            if *q_val < value {
                Ok(Some(KillMargin::Killed))
            } else {
                Ok(Some(KillMargin::Survives(q_val - &value)))
            }
        }
    }
}

enum KillMargin {
    Killed,
    /// The quadratic inequality is satisfiable at this direction (the form
    /// margin `Q − sup H` is nonnegative).
    Survives(#[allow(dead_code)] Rat),
}

/// Exact re-validation of a second-order refutation candidate against the
/// raw conditions (direction tangency, directional normal membership,
/// kernel equation, and the bound inequality).
fn revalidate_second_order(
    inst: &SecondOrderInstance,
    strata: &Strata,
    tp: &HCone,
    jg: &RatMatrix,
    jx: &RatMatrix,
    jp: &RatMatrix,
    l1: usize,
    w: &[Rat],
    u: &[Rat],
    lambda: &[Rat],
) -> Result<bool> {
    let m = inst.sys.g.param_dim;
    if w.iter().all(|x| x.is_zero()) && u.iter().all(|x| x.is_zero()) {
        return Ok(false);
    }
    if lambda[..l1].iter().all(|x| x.is_zero()) {
        return Ok(false);
    }
    if !tp.contains(w) {
        return Ok(false);
    }
    let mut wu = w.to_vec();
    wu.extend(u.to_vec());
    let img = jg.mat_vec(&wu)?;
    let Some(_) = strata.stratum_of_direction(&img) else {
        return Ok(false);
    };
    let sigma = strata.sigma_of(&img);
    let in_directional = strata
        .compatible_with(&sigma)
        .iter()
        .any(|&ci| strata.list[ci].normal_value.contains(lambda));
    if !in_directional {
        return Ok(false);
    }
    let jt = jx.transpose_vec(lambda)?;
    if jt.iter().any(|x| !x.is_zero()) {
        return Ok(false);
    }
    let q = inst.q_lambda(lambda)?;
    let qwu = q.mat_vec(&wu)?;
    let q_val = dot(&qwu, &wu);
    let target = jp.transpose_vec(lambda)?;
    debug_assert_eq!(target.len(), m);
    match kill_margin(inst, lambda, &target, &q_val, w)? {
        None => Ok(true),                       // no μ exists: condition satisfied vacuously
        Some(KillMargin::Survives(_)) => Ok(true),
        Some(KillMargin::Killed) => Ok(false),
    }
}

/// The second-order sweep shared by all three checks.
fn second_order_sweep(inst: &SecondOrderInstance, l1: usize) -> Result<Verdict> {
    let sys = &inst.sys;
    let gbar = sys.g_ref()?;
    let jg = joint_jacobian(sys)?;
    let jx = sys.jac_x()?;
    let jp = sys.jac_p()?;
    let tp = sys.tangent_cone_p()?;
    let m = sys.g.param_dim;
    let n = sys.g.decision_dim;
    let strata = enumerate_strata(&sys.c, &gbar)?;
    let mut notes: Vec<String> = Vec::new();

    // Existence precondition: every w ∈ T_P admits u with ∇g(w,u) tangent.
    let mut targets = Vec::new();
    for piece in &sys.c.pieces {
        if !piece.contains(&gbar) {
            continue;
        }
        let act = piece.active_rows(&gbar);
        let mut rows = Vec::new();
        for &ri in &act {
            rows.push(jg.transpose_vec(piece.a.row(ri))?);
        }
        let lifted = HCone::new(
            if rows.is_empty() {
                RatMatrix::empty(m + n)
            } else {
                RatMatrix::from_rows(rows)?
            },
            RatMatrix::empty(m + n),
            m + n,
        )?;
        targets.push(crate::exactla::project_cone(&lifted, &(0..m).collect::<Vec<_>>())?);
    }
    match crate::order1::check_cone_coverage(&tp, &targets)? {
        crate::order1::CoverOutcome::Covered => {}
        crate::order1::CoverOutcome::NotCovered(wdir) => {
            return Ok(Verdict::refuted(Witness::UncoveredDirection {
                v: wdir,
                certificates: vec![],
            })
            .with_note("existence precondition fails: this parameter direction has no tangent lift"));
        }
        crate::order1::CoverOutcome::Capacity => {
            notes.push("existence precondition checked on generators only".into());
            let v = hcone_to_vcone(&tp)?;
            for g in v.generators_signed() {
                let covered = targets.iter().any(|t| t.contains(&g));
                if !covered {
                    return Ok(Verdict::graded(Grade::Inconclusive).with_note(format!(
                        "existence precondition fails on generator {g:?}"
                    )));
                }
            }
        }
    }

    let mut any_grid = false;
    for stratum in &strata.list {
        let region = stratum_direction_region(sys, &strata, &stratum.sign, &tp, &jg)?;
        let Some(_) = region.witness else { continue };
        for &ci in &strata.compatible_with(&stratum.sign) {
            let nv = &strata.list[ci].normal_value;
            // Λ = nv ∩ ker ∇_x g*
            let lam_cone = HCone::new(
                nv.ineq.clone(),
                nv.eq.vstack(&jx.transpose())?,
                nv.dim,
            )?;
            let gens = hcone_to_vcone(&lam_cone)?;
            let lam_generators = gens.generators_signed();
            if lam_generators
                .iter()
                .all(|g| g[..l1].iter().all(|x| x.is_zero()))
            {
                continue; // λ¹ = 0 forced on this component
            }
            // Every generator must be strictly killed.
            let mut exact_ok = true;
            for lam in &lam_generators {
                let target = jp.transpose_vec(lam)?;
                // multiplier polyhedron feasibility
                let lp = inst.p_rows.n_rows();
                let mu0 = if lp == 0 {
                    if target.iter().all(|x| x.is_zero()) {
                        Some(vec![])
                    } else {
                        None
                    }
                } else {
                    let ineq_rows: Vec<Vec<Rat>> = (0..lp)
                        .map(|j| {
                            let mut r = vec![Rat::zero(); lp];
                            r[j] = -crate::exactla::rone();
                            r
                        })
                        .collect();
                    let ineq = RatMatrix::from_rows(ineq_rows)?;
                    let zi = vec![Rat::zero(); lp];
                    lp_feasible(
                        &RatMatrix::empty(lp),
                        &[],
                        &ineq,
                        &zi,
                        &inst.p_rows.transpose(),
                        &target,
                    )?
                };
                let Some(mu0) = mu0 else {
                    // No representation multiplier: the true upper curvature
                    // of P against this λ is +∞, so the inequality is
                    // satisfiable — a genuine refutation candidate if the
                    // triple re-validates.
                    let wit = region.witness.clone().expect("region nonempty");
                    let (w, u) = (wit[..m].to_vec(), wit[m..].to_vec());
                    if revalidate_second_order(
                        inst, &strata, &tp, &jg, &jx, &jp, l1, &w, &u, lam,
                    )? {
                        let q = inst.q_lambda(lam)?;
                        let mut wu = w.clone();
                        wu.extend(u.clone());
                        let qv = q.mat_vec(&wu)?;
                        let form_value = dot(&qv, &wu);
                        return Ok(Verdict::refuted(Witness::SecondOrder {
                            w,
                            u,
                            lambda: lam.clone(),
                            form_value,
                        })
                        .with_note(
                            "no parameter multiplier represents ∇_p g*λ; curvature unbounded",
                        ));
                    }
                    exact_ok = false;
                    continue;
                };
                // constant-Hessian fast path on subspace regions
                let constant = inst.h_constant_over(&target, &mu0)?;
                let sub = if constant {
                    subspace_basis(&region.closure)?
                } else {
                    None
                };
                match sub {
                    Some(basis) if !basis.is_empty() => {
                        let q = inst.q_lambda(lam)?;
                        let h = inst.h_mu_lifted(&mu0);
                        let dimb = basis.len();
                        // F = Q − H restricted to the basis
                        let mut f = RatMatrix::zeros(dimb, dimb);
                        for a in 0..dimb {
                            for b in 0..dimb {
                                let qa = q.mat_vec(&basis[a])?;
                                let ha = h.mat_vec(&basis[a])?;
                                let val = dot(&qa, &basis[b]) - dot(&ha, &basis[b]);
                                f.set(a, b, val);
                            }
                        }
                        if let Some(xc) = neg_definite_witness(&f) {
                            // map back to (w, u) coordinates
                            let mut wu = vec![Rat::zero(); m + n];
                            for (c, bvec) in xc.iter().zip(&basis) {
                                for (t, bv) in wu.iter_mut().zip(bvec) {
                                    *t = &*t + c * bv;
                                }
                            }
                            let (w, u) = (wu[..m].to_vec(), wu[m..].to_vec());
                            if revalidate_second_order(
                                inst, &strata, &tp, &jg, &jx, &jp, l1, &w, &u, lam,
                            )? {
                                let qv = q.mat_vec(&wu)?;
                                let form_value = dot(&qv, &wu);
                                return Ok(Verdict::refuted(Witness::SecondOrder {
                                    w,
                                    u,
                                    lambda: lam.clone(),
                                    form_value,
                                })
                                .with_note("negative definiteness fails on the stratum subspace"));
                            }
                            exact_ok = false;
                        }
                        // ND: generator killed exactly on this region
                    }
                    Some(_) => { /* region = {0}: vacuous */ }
                    None => {
                        exact_ok = false;
                    }
                }
            }
            if exact_ok {
                continue;
            }
            // Grid fallback over the region closure.
            any_grid = true;
            let vgen = hcone_to_vcone(&region.closure)?;
            let gens_wu = vgen.generators_signed();
            if gens_wu.is_empty() {
                continue;
            }
            let samples = grid_samples(&gens_wu, m + n);
            for lam in &lam_generators {
                let target = jp.transpose_vec(lam)?;
                let q = inst.q_lambda(lam)?;
                for wu in &samples {
                    if wu.iter().all(|x| x.is_zero()) {
                        continue;
                    }
                    let qv = q.mat_vec(wu)?;
                    let q_val = dot(&qv, wu);
                    let w = &wu[..m];
                    match kill_margin(inst, lam, &target, &q_val, w)? {
                        Some(KillMargin::Killed) => {}
                        _ => {
                            let (wv, uv) = (w.to_vec(), wu[m..].to_vec());
                            if revalidate_second_order(
                                inst, &strata, &tp, &jg, &jx, &jp, l1, &wv, &uv, lam,
                            )? {
                                return Ok(Verdict::refuted(Witness::SecondOrder {
                                    w: wv,
                                    u: uv,
                                    lambda: lam.clone(),
                                    form_value: q_val,
                                })
                                .with_note("grid sample satisfies the second-order inequality"));
                            }
                            // boundary artifact: direction belongs to a
                            // neighboring stratum; skip
                        }
                    }
                }
            }
        }
    }

    let mut verdict = if any_grid {
        Verdict::graded(Grade::VerifiedGrid)
            .with_note("some strata decided on a rational direction grid")
    } else {
        Verdict::verified()
    };
    verdict.notes.extend(notes);
    if let Some(hs) = &inst.h_subreg {
        if hs.is_verified() {
            verdict
                .notes
                .push("subregularity of the parameter description verified".into());
        } else {
            verdict.notes.push(
                "subregularity of the parameter description NOT verified; verdict downgraded"
                    .into(),
            );
            if verdict.grade.is_verified() {
                verdict.grade = Grade::Inconclusive;
            }
        }
    }
    Ok(verdict)
}

/// Rational sample directions over the cone spanned by `gens`: single
/// generators, pairwise and triple mixtures with a few weights, covering the
/// grid quantifier at desk scale.
fn grid_samples(gens: &[Vec<Rat>], dim: usize) -> Vec<Vec<Rat>> {
    let weights = [rq(1, 1), rq(1, 2), rq(2, 1), rq(1, 4)];
    let mut out: Vec<Vec<Rat>> = Vec::new();
    let mut push = |v: Vec<Rat>| {
        if v.iter().any(|x| !x.is_zero()) && !out.contains(&v) {
            out.push(v);
        }
    };
    for g in gens {
        push(g.clone());
    }
    for (i, a) in gens.iter().enumerate() {
        for b in gens.iter().skip(i + 1) {
            for wa in &weights {
                for wb in &weights {
                    let v: Vec<Rat> = (0..dim)
                        .map(|k| wa * &a[k] + wb * &b[k])
                        .collect();
                    push(v);
                }
            }
        }
    }
    for (i, a) in gens.iter().enumerate() {
        for (j, b) in gens.iter().enumerate().skip(i + 1) {
            for c in gens.iter().skip(j + 1) {
                let v: Vec<Rat> = (0..dim)
                    .map(|k| a[k].clone() + &b[k] + &c[k])
                    .collect();
                push(v);
            }
        }
    }
    out
}

/// Second-order stability verification for systems over unions of convex
/// polyhedra with a smooth-inequality (or polyhedral) parameter set: every
/// multiplier surviving the first-order conditions must be killed by the
/// strict quadratic inequality. Kills the full multiplier (no splitting).
pub fn check_second_order_polyhedral(inst: &SecondOrderInstance) -> Result<Verdict> {
    second_order_sweep(inst, inst.sys.g.out_dim())
}

/// General second-order verification with splitting: the upper curvature of
/// `P` is replaced by its convex-representation upper bound (sound for
/// verification) and the lower curvature of the polyhedral `C` is zero.
/// `Verified` needs a `g₂` certificate when the split is proper.
pub fn check_second_order_general(
    inst: &SecondOrderInstance,
    g2_cert: Option<&G2Certificate>,
) -> Result<Verdict> {
    let l1 = inst.sys.split_l1;
    let mut verdict = second_order_sweep(inst, l1)?;
    if l1 < inst.sys.g.out_dim() && verdict.grade.is_verified() {
        match g2_cert {
            Some(cert) => verdict
                .notes
                .push(format!("g2 stability certificate: {}", cert.describe())),
            None => {
                verdict.grade = Grade::Inconclusive;
                verdict.notes.push(
                    "implication verified but no stability certificate for the g2 subsystem"
                        .into(),
                );
            }
        }
    }
    Ok(verdict)
}

/// Second-order sufficient condition for metric subregularity of
/// `x ↦ f(x) − C` at `x̄`: the parameter-free specialization.
pub fn check_subregularity_second_order(
    f: &FuncVec,
    c: &PolyUnion,
    x_ref: &[Rat],
) -> Result<Verdict> {
    let sys = ConstraintSystem::new(
        FuncVec::new(f.components.clone(), 0, f.decision_dim),
        c.clone(),
        ParamSet::FullSpace(0),
        vec![],
        x_ref.to_vec(),
        f.out_dim(),
    )?;
    let inst = SecondOrderInstance::new(sys)?;
    check_second_order_polyhedral(&inst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactla::{rint, rzero};
    use crate::fixtures;
    use crate::funcexpr::Expr;

    fn rv(v: &[i64]) -> Vec<Rat> {
        v.iter().map(|&x| rint(x)).collect()
    }

    /// Ω = {x ∈ R² : x2 − x1² ≤ 0} as q⁻¹(R₋).
    fn parabola_rep() -> SubamenableRep {
        let q = FuncVec::new(
            vec![Expr::add(vec![
                Expr::decision(1),
                Expr::neg(Expr::powi(Expr::decision(0), 2)),
            ])],
            0,
            2,
        );
        SubamenableRep::new(q, PolyUnion::nonpos_orthant(1), rv(&[0, 0])).unwrap()
    }

    #[test]
    fn lower_curvature_parabola() {
        let rep = parabola_rep();
        let cv = lower_curvature_polyhedral(&rep, &rv(&[0, 1]), &rv(&[1, 0])).unwrap();
        assert_eq!(cv.value, ExtVal::Fin(rint(1)));
        assert_eq!(cv.mu.as_deref(), Some(&rv(&[1])[..]));
        assert!(!cv.ambiguous);
    }

    #[test]
    fn lower_curvature_linear_rep_is_zero() {
        // Ω = R²₋ with q = identity: zero Hessian everywhere.
        let q = FuncVec::new(vec![Expr::decision(0), Expr::decision(1)], 0, 2);
        let rep = SubamenableRep::new(q, PolyUnion::nonpos_orthant(2), rv(&[0, 0])).unwrap();
        let cv = lower_curvature_polyhedral(&rep, &rv(&[0, 1]), &rv(&[-1, 0])).unwrap();
        assert_eq!(cv.value, ExtVal::Fin(rzero()));
    }

    #[test]
    fn lower_curvature_outside_directional_cone_is_pos_inf() {
        let rep = parabola_rep();
        // λ = (0, -1) points into the set; not a normal along v = (1, 0)
        let cv = lower_curvature_polyhedral(&rep, &rv(&[0, -1]), &rv(&[1, 0])).unwrap();
        assert_eq!(cv.value, ExtVal::PosInf);
    }

    #[test]
    fn upper_bound_examples() {
        // h-description of the curved parameter set: q = h, Q = R₋.
        let rep = SubamenableRep::new(
            fixtures::h_func(2),
            PolyUnion::nonpos_orthant(1),
            rv(&[0, 0]),
        );
        // h is a param-only function; rebuild over decisions for the rep
        let h_dec = FuncVec::new(
            vec![Expr::add(vec![
                Expr::neg(Expr::decision(0)),
                Expr::neg(Expr::decision(1)),
                Expr::powi(Expr::decision(0), 2).scale(crate::exactla::rq(3, 2)),
            ])],
            0,
            2,
        );
        drop(rep);
        let rep = SubamenableRep::new(h_dec, PolyUnion::nonpos_orthant(1), rv(&[0, 0])).unwrap();
        // λ = ∇h*μ with μ = 2: λ = (-2, -2); v = w = (1, -1):
        // bound = -½·⟨∇²⟨μ,h⟩w,w⟩ = -½·3μ·w1² = -3
        let cv = upper_curvature_bound_convex(&rep, &rv(&[-2, -2]), &rv(&[1, -1])).unwrap();
        assert_eq!(cv.value, ExtVal::Fin(rint(-3)));
        assert_eq!(cv.mu.as_deref(), Some(&rv(&[2])[..]));

        // linear q → bound 0
        let lin = SubamenableRep::new(
            FuncVec::new(vec![Expr::decision(0)], 0, 1),
            PolyUnion::nonpos_orthant(1),
            rv(&[0]),
        )
        .unwrap();
        let cv0 = upper_curvature_bound_convex(&lin, &rv(&[1]), &rv(&[0])).unwrap();
        assert_eq!(cv0.value, ExtVal::Fin(rzero()));

        // empty multiplier set → -∞ (sup over ∅ convention)
        let cv_empty = upper_curvature_bound_convex(&lin, &rv(&[-1]), &rv(&[0])).unwrap();
        assert_eq!(cv_empty.value, ExtVal::NegInf);
    }

    #[test]
    fn neg_definite_witness_works() {
        // -I is negative definite
        let m = RatMatrix::from_rows(vec![rv(&[-1, 0]), rv(&[0, -1])]).unwrap();
        assert!(neg_definite_witness(&m).is_none());
        // indefinite
        let m2 = RatMatrix::from_rows(vec![rv(&[-1, 0]), rv(&[0, 1])]).unwrap();
        let w2 = neg_definite_witness(&m2).unwrap();
        let v = m2.mat_vec(&w2).unwrap();
        assert!(!dot(&v, &w2).is_negative());
        // negative semidefinite with null direction
        let m3 = RatMatrix::from_rows(vec![rv(&[-1, 1]), rv(&[1, -1])]).unwrap();
        let w3 = neg_definite_witness(&m3).unwrap();
        let v3 = m3.mat_vec(&w3).unwrap();
        assert!(dot(&v3, &w3).is_zero());
        // the decisive fixture form -2u² ± 2wu - w² is negative definite
        // for either cross-term sign
        for s in [2i64, -2] {
            let mf =
                RatMatrix::from_rows(vec![vec![rint(-1), rint(s) / rint(2)], vec![rint(s) / rint(2), rint(-2)]])
                    .unwrap();
            assert!(neg_definite_witness(&mf).is_none(), "sign {s}");
        }
    }

    #[test]
    fn second_order_reduced_fixture_verified() {
        let sys = fixtures::example_4_5_reduced();
        let inst = SecondOrderInstance::new(sys).unwrap();
        let v = check_second_order_polyhedral(&inst).unwrap();
        assert_eq!(v.grade, Grade::Verified, "notes: {:?}", v.notes);
    }

    #[test]
    fn second_order_all_linear_verified() {
        // all-linear g and h with the first-order check verified
        let g = FuncVec::new(
            vec![Expr::sub(Expr::decision(0), Expr::param(0))],
            1,
            1,
        );
        let h = FuncVec::new(vec![Expr::neg(Expr::param(0))], 1, 0);
        // h(0) = 0 required
        let sys = ConstraintSystem::new(
            g,
            PolyUnion::nonpos_orthant(1),
            ParamSet::SmoothIneq(h),
            rv(&[0]),
            rv(&[0]),
            1,
        )
        .unwrap();
        assert!(crate::order1::check_first_order(&sys).unwrap().is_verified());
        let inst = SecondOrderInstance::new(sys).unwrap();
        let v = check_second_order_polyhedral(&inst).unwrap();
        assert_eq!(v.grade, Grade::Verified, "notes: {:?}", v.notes);
    }

    #[test]
    fn second_order_refutes_squared_equality() {
        // g(p, x) = x² − p ∈ {0}, P = {p : −p ≤ 0}: the parameter direction
        // w = 1 has no tangent lift (∇g(w, u) = −w for every u), so the
        // existence hypothesis fails with a concrete witness.
        let g = FuncVec::new(
            vec![Expr::sub(Expr::powi(Expr::decision(0), 2), Expr::param(0))],
            1,
            1,
        );
        let h = FuncVec::new(vec![Expr::neg(Expr::param(0))], 1, 0);
        let sys = ConstraintSystem::new(
            g,
            PolyUnion::origin(1),
            ParamSet::SmoothIneq(h),
            rv(&[0]),
            rv(&[0]),
            1,
        )
        .unwrap();
        let inst = SecondOrderInstance::new(sys).unwrap();
        let v = check_second_order_polyhedral(&inst).unwrap();
        assert_eq!(v.grade, Grade::Refuted, "notes: {:?}", v.notes);
    }

    #[test]
    fn subregularity_second_order_examples() {
        // f(x) = x², C = R₋ at 0: the premise admits λ = 1, so the
        // sufficient condition is refuted (subregularity itself holds; the
        // verdict grades the condition).
        let f = FuncVec::new(vec![Expr::powi(Expr::decision(0), 2)], 0, 1);
        let c = PolyUnion::nonpos_orthant(1);
        let v = check_subregularity_second_order(&f, &c, &rv(&[0])).unwrap();
        assert_eq!(v.grade, Grade::Refuted);
        match &v.witness {
            Some(Witness::SecondOrder { form_value, .. }) => {
                assert!(!form_value.is_negative());
            }
            other => panic!("unexpected witness {other:?}"),
        }

        // f(x) = x: verified
        let fl = FuncVec::new(vec![Expr::decision(0)], 0, 1);
        assert!(check_subregularity_second_order(&fl, &c, &rv(&[0]))
            .unwrap()
            .is_verified());

        // f(x1, x2) = x2 − x1²: verified
        let fp = FuncVec::new(
            vec![Expr::add(vec![
                Expr::decision(1),
                Expr::neg(Expr::powi(Expr::decision(0), 2)),
            ])],
            0,
            2,
        );
        let v3 = check_subregularity_second_order(&fp, &c, &rv(&[0, 0])).unwrap();
        assert!(v3.is_verified(), "notes: {:?}", v3.notes);
    }

    #[test]
    fn general_route_agrees_with_polyhedral_route() {
        // Cross-validation of the two code paths on the reduced fixture and
        // the linear fixture.
        let sys = fixtures::example_4_5_reduced();
        let inst = SecondOrderInstance::new(sys).unwrap();
        let a = check_second_order_polyhedral(&inst).unwrap();
        let b = check_second_order_general(&inst, None).unwrap();
        // l1 = l here (split 0 means l1 = 0… the reduced fixture has
        // split 0, so the general route kills nothing and verifies trivially
        // with certificate note handling)
        assert!(a.grade.is_verified());
        assert!(b.grade.is_verified() || b.grade == Grade::Inconclusive);

        // a proper split on the full fixture: the general route with the
        // subsystem certificate verifies
        let full = fixtures::example_4_5();
        let inst_full = SecondOrderInstance::new(full).unwrap();
        let cert = G2Certificate::SecondOrder("reduced subsystem verified".into());
        let v = check_second_order_general(&inst_full, Some(&cert));
        // the full fixture has |x2|^(3/2) in g1 = f3; second-order data for
        // that component is unavailable at the origin, so the sweep must
        // refuse when a surviving λ weights it — or verify if none does.
        match v {
            Ok(verdict) => {
                assert!(
                    verdict.grade.is_verified() || verdict.grade == Grade::Inconclusive,
                    "unexpected grade {:?} ({:?})",
                    verdict.grade,
                    verdict.notes
                );
            }
            Err(Order2Error::SecondOrderUnavailable(_)) => {}
            Err(e) => panic!("unexpected error {e}"),
        }
    }
}

//! KKT-type variational systems: the constraint-system reformulation of
//! `0 ∈ F(p, x) + N̂_{Ω(p)}(x)` with `Ω(p) = {x : φ(p, x) ≤ 0}`, the
//! specialized complementarity-graph cone calculus, first-order
//! verification, and piecewise solution-map enumeration.

use crate::exactla::{rone, rzero, solve_general, ExactlaError, HCone, Rat, RatMatrix};
use crate::funcexpr::{EvalPoint, Expr, FuncError, FuncVec, VarKind, Wrt};
use crate::order1::{check_existence_condition, check_first_order, Grade, Order1Error, Verdict};
use crate::polycal::{PolycalError, PolyUnion};
use crate::sysmodel::{ConstraintSystem, ParamSet, SysError};
use num_traits::{Signed, Zero};

#[derive(Debug, Clone, thiserror::Error)]
pub enum KktError {
    #[error("reference violates the complementarity graph: {0}")]
    GraphViolation(String),
    #[error("Lagrangian does not vanish at the reference: {0}")]
    LagrangianNonzero(String),
    #[error("capacity: {0}")]
    Capacity(String),
    #[error("branch system is not linear in (x, y): {0}")]
    NonlinearBranch(String),
    #[error(transparent)]
    Sys(#[from] SysError),
    #[error(transparent)]
    Polycal(#[from] PolycalError),
    #[error(transparent)]
    Func(#[from] FuncError),
    #[error(transparent)]
    Order1(#[from] Order1Error),
    #[error(transparent)]
    Exact(#[from] ExactlaError),
}

pub type Result<T> = std::result::Result<T, KktError>;

/// A parametric variational system in KKT form.
#[derive(Debug, Clone)]
pub struct KKTSystem {
    /// `F : R^m × R^n → R^n`.
    pub f: FuncVec,
    /// `φ : R^m × R^n → R^{l_I}`.
    pub phi: FuncVec,
    pub p_set: ParamSet,
    pub p_ref: Vec<Rat>,
    pub x_ref: Vec<Rat>,
    pub y_ref: Vec<Rat>,
}

/// Per-component state of a point of the complementarity graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrNState {
    /// `φ < 0 = y`
    PhiNegYZero,
    /// `φ = 0 < y`
    PhiZeroYPos,
    /// `φ = 0 = y`
    Corner,
}

/// Classify `(φ, y)`; errors when the pair is off the graph.
pub fn grn_state(phi: &Rat, y: &Rat) -> Result<GrNState> {
    if phi.is_negative() && y.is_zero() {
        Ok(GrNState::PhiNegYZero)
    } else if phi.is_zero() && y.is_positive() {
        Ok(GrNState::PhiZeroYPos)
    } else if phi.is_zero() && y.is_zero() {
        Ok(GrNState::Corner)
    } else {
        Err(KktError::GraphViolation(format!(
            "(φ, y) = ({phi}, {y}) violates φ ≤ 0 ≤ y, φ·y = 0"
        )))
    }
}

fn line_cone(normal_to: [i64; 2]) -> HCone {
    // {z : ⟨normal_to, z⟩ = 0} in the plane
    HCone::new(
        RatMatrix::empty(2),
        RatMatrix::from_rows(vec![vec![
            crate::exactla::rint(normal_to[0]),
            crate::exactla::rint(normal_to[1]),
        ]])
        .unwrap(),
        2,
    )
    .unwrap()
}

fn rows_cone(rows: &[[i64; 2]]) -> HCone {
    HCone::from_ineq_rows(
        rows.iter()
            .map(|r| vec![crate::exactla::rint(r[0]), crate::exactla::rint(r[1])])
            .collect(),
        2,
    )
    .unwrap()
}

/// Tangent cone pieces of the planar graph at a state.
pub fn grn_tangent(state: GrNState) -> Vec<HCone> {
    match state {
        GrNState::PhiNegYZero => vec![line_cone([0, 1])],
        GrNState::PhiZeroYPos => vec![line_cone([1, 0])],
        GrNState::Corner => vec![
            // s ≤ 0, v = 0
            HCone::new(
                RatMatrix::from_rows(vec![vec![rone(), rzero()]]).unwrap(),
                RatMatrix::from_rows(vec![vec![rzero(), rone()]]).unwrap(),
                2,
            )
            .unwrap(),
            // s = 0, v ≥ 0
            HCone::new(
                RatMatrix::from_rows(vec![vec![rzero(), -rone()]]).unwrap(),
                RatMatrix::from_rows(vec![vec![rone(), rzero()]]).unwrap(),
                2,
            )
            .unwrap(),
        ],
    }
}

/// Regular normal cone of the planar graph at a state.
pub fn grn_regular_normal(state: GrNState) -> HCone {
    match state {
        GrNState::PhiNegYZero => line_cone([1, 0]), // λ = 0
        GrNState::PhiZeroYPos => line_cone([0, 1]), // d = 0
        GrNState::Corner => rows_cone(&[[-1, 0], [0, 1]]), // λ ≥ 0 ≥ d
    }
}

/// Limiting normal cone pieces at a state.
pub fn grn_limiting_normal(state: GrNState) -> Vec<HCone> {
    match state {
        GrNState::Corner => vec![
            rows_cone(&[[-1, 0], [0, 1]]),
            line_cone([1, 0]),
            line_cone([0, 1]),
        ],
        other => vec![grn_regular_normal(other)],
    }
}

/// Directional limiting normal cone at a state in a tangent direction;
/// empty when the direction is not tangent.
pub fn grn_directional_normal(state: GrNState, dir: (&Rat, &Rat)) -> Vec<HCone> {
    let (s, v) = dir;
    match state {
        GrNState::PhiNegYZero => {
            if v.is_zero() {
                vec![grn_regular_normal(state)]
            } else {
                vec![]
            }
        }
        GrNState::PhiZeroYPos => {
            if s.is_zero() {
                vec![grn_regular_normal(state)]
            } else {
                vec![]
            }
        }
        GrNState::Corner => {
            // direction must lie on the graph itself
            match grn_state(s, v) {
                Ok(GrNState::Corner) => grn_limiting_normal(GrNState::Corner),
                Ok(dir_state) => vec![grn_regular_normal(dir_state)],
                Err(_) => vec![],
            }
        }
    }
}

/// Componentwise product cones, kept per-component and expanded to explicit
/// polyhedra in the interleaved coordinates only on demand.
pub fn grn_product_expand(per_component: &[Vec<HCone>]) -> Vec<HCone> {
    let k = per_component.len();
    let mut out: Vec<HCone> = vec![HCone::full(0)];
    for comp in per_component.iter() {
        let mut next = Vec::with_capacity(out.len() * comp.len());
        for base in &out {
            for piece in comp {
                next.push(product_hcone(base, piece));
            }
        }
        out = next;
        if out.is_empty() {
            return vec![];
        }
    }
    debug_assert!(out.iter().all(|c| c.dim == 2 * k));
    out
}

fn product_hcone(a: &HCone, b: &HCone) -> HCone {
    let dim = a.dim + b.dim;
    let embed = |m: &RatMatrix, left: bool| -> Vec<Vec<Rat>> {
        m.rows_iter()
            .map(|r| {
                let mut row = Vec::with_capacity(dim);
                if left {
                    row.extend(r.to_vec());
                    row.extend(vec![Rat::zero(); b.dim]);
                } else {
                    row.extend(vec![Rat::zero(); a.dim]);
                    row.extend(r.to_vec());
                }
                row
            })
            .collect()
    };
    let mut ineq = embed(&a.ineq, true);
    ineq.extend(embed(&b.ineq, false));
    let mut eq = embed(&a.eq, true);
    eq.extend(embed(&b.eq, false));
    HCone::new(
        if ineq.is_empty() {
            RatMatrix::empty(dim)
        } else {
            RatMatrix::from_rows(ineq).unwrap()
        },
        if eq.is_empty() {
            RatMatrix::empty(dim)
        } else {
            RatMatrix::from_rows(eq).unwrap()
        },
        dim,
    )
    .unwrap()
}

impl KKTSystem {
    pub fn new(
        f: FuncVec,
        phi: FuncVec,
        p_set: ParamSet,
        p_ref: Vec<Rat>,
        x_ref: Vec<Rat>,
        y_ref: Vec<Rat>,
    ) -> Result<Self> {
        let sys = KKTSystem {
            f,
            phi,
            p_set,
            p_ref,
            x_ref,
            y_ref,
        };
        sys.validate()?;
        Ok(sys)
    }

    pub fn n(&self) -> usize {
        self.f.out_dim()
    }

    pub fn l_i(&self) -> usize {
        self.phi.out_dim()
    }

    fn reference_point(&self) -> EvalPoint {
        EvalPoint::new(self.p_ref.clone(), self.x_ref.clone())
    }

    /// Per-component states of `(φ(p̄, x̄), ȳ)`.
    pub fn states(&self) -> Result<Vec<GrNState>> {
        let phis = self.phi.eval_exact(&self.reference_point())?;
        phis.iter()
            .zip(&self.y_ref)
            .enumerate()
            .map(|(i, (p, y))| {
                grn_state(p, y).map_err(|e| {
                    KktError::GraphViolation(format!("component {}: {e}", i + 1))
                })
            })
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if self.l_i() > 10 {
            return Err(KktError::Capacity(format!(
                "{} complementarity components exceed the branch cap of 10",
                self.l_i()
            )));
        }
        self.states()?;
        // Lagrangian residual G(p̄, x̄, ȳ) = F + ∇_xφ* y = 0
        let pt = self.reference_point();
        let fv = self.f.eval_exact(&pt)?;
        let jty = if self.l_i() == 0 {
            vec![Rat::zero(); self.n()]
        } else {
            let jphi = self.phi.jacobian(&pt, Wrt::Decision)?;
            jphi.transpose_vec(&self.y_ref)?
        };
        for i in 0..self.n() {
            let g = &fv[i] + &jty[i];
            if !g.is_zero() {
                return Err(KktError::LagrangianNonzero(format!(
                    "component {}: residual {g}",
                    i + 1
                )));
            }
        }
        Ok(())
    }
}

/// Reformulate the variational system as a parametric constraint system
/// `g(p, x, y) := (G(p,x,y), (φ_1, y_1), …, (φ_k, y_k)) ∈ {0}^n × Π Gr N`,
/// decision variables `(x, y)`, split after the Lagrangian block.
pub fn build_kkt_system(k: &KKTSystem) -> Result<ConstraintSystem> {
    let n = k.n();
    let l_i = k.l_i();
    let m = k.f.param_dim;
    // Lift multiplier variables into the decision block: y_j ↦ x_{n+j}.
    let lift = |e: &Expr| -> Expr {
        e.map_vars(&|kind, i| match kind {
            VarKind::Multiplier => (VarKind::Decision, n + i),
            other => (other, i),
        })
    };
    let mut components: Vec<Expr> = Vec::with_capacity(n + 2 * l_i);
    // G_i = F_i + Σ_j ∂φ_j/∂x_i · y_j
    for i in 0..n {
        let mut terms = vec![k.f.components[i].clone()];
        for j in 0..l_i {
            let dphi = k.phi.components[j].derivative(VarKind::Decision, i);
            terms.push(Expr::mul(vec![dphi, Expr::multiplier(j)]));
        }
        components.push(lift(&Expr::add(terms)));
    }
    for j in 0..l_i {
        components.push(lift(&k.phi.components[j]));
        components.push(Expr::decision(n + j));
    }
    let g = FuncVec::new(components, m, n + l_i);
    // C = {0}^n × Π Gr N, interleaved
    let mut c2 = PolyUnion::graph_normal_nonpos();
    for _ in 1..l_i {
        c2 = c2.product(&PolyUnion::graph_normal_nonpos());
    }
    let c1 = PolyUnion::origin(n);
    let mut x_full = k.x_ref.clone();
    x_full.extend(k.y_ref.clone());
    if l_i == 0 {
        return Ok(ConstraintSystem::new(
            g,
            c1,
            k.p_set.clone(),
            k.p_ref.clone(),
            x_full,
            n,
        )?);
    }
    Ok(ConstraintSystem::from_parts(
        g,
        c1,
        c2,
        k.p_set.clone(),
        k.p_ref.clone(),
        x_full,
    )?)
}

/// First-order stability verification for the KKT reformulation: the
/// existence condition and the full directional kernel implication on the
/// built system. Witnesses come back in `(z, λ, d)` block structure.
pub fn check_kkt_first_order(k: &KKTSystem) -> Result<Verdict> {
    let sys = build_kkt_system(k)?;
    let d = sys.image_derivative_cone()?;
    let existence = check_existence_condition(&sys, &d)?;
    if existence.grade == Grade::Refuted {
        return Ok(existence.with_note("existence of tangent lifts fails"));
    }
    let implication = check_first_order(&sys)?;
    let mut verdict = implication;
    verdict
        .notes
        .push(format!("existence condition: {}", existence.grade.as_str()));
    for n in existence.notes {
        verdict.notes.push(format!("existence: {n}"));
    }
    if verdict.grade == Grade::Verified && existence.grade != Grade::Verified {
        verdict.grade = existence.grade;
    }
    Ok(verdict)
}

/// One branch solution of the piecewise enumeration.
#[derive(Debug, Clone)]
pub struct BranchSolution {
    pub active: Vec<usize>,
    pub x: Vec<Rat>,
    pub y: Vec<Rat>,
}

/// Outcome of [`enumerate_solution_map`]: solutions plus the branches whose
/// linear systems were singular (excluded, reported).
#[derive(Debug, Clone)]
pub struct SolutionEnumeration {
    pub solutions: Vec<BranchSolution>,
    pub singular_branches: Vec<Vec<usize>>,
}

/// Enumerate the solution map at a parameter by active-set branches: each
/// pattern pins `φ_i = 0` (active) or `y_i = 0` (inactive), the resulting
/// square system must be linear in `(x, y)`, and branch-feasible solutions
/// are kept.
pub fn enumerate_solution_map(k: &KKTSystem, p: &[Rat]) -> Result<SolutionEnumeration> {
    let n = k.n();
    let l_i = k.l_i();
    let dim = n + l_i;
    // Substituted expressions in (x, y) decision variables.
    let lift = |e: &Expr| -> Expr {
        e.map_vars(&|kind, i| match kind {
            VarKind::Multiplier => (VarKind::Decision, n + i),
            other => (other, i),
        })
    };
    let mut g_rows: Vec<Expr> = Vec::with_capacity(n);
    for i in 0..n {
        let mut terms = vec![k.f.components[i].clone()];
        for j in 0..l_i {
            let dphi = k.phi.components[j].derivative(VarKind::Decision, i);
            terms.push(Expr::mul(vec![dphi, Expr::multiplier(j)]));
        }
        g_rows.push(lift(&Expr::add(terms)).substitute_params(p));
    }
    let phi_rows: Vec<Expr> = (0..l_i)
        .map(|j| lift(&k.phi.components[j]).substitute_params(p))
        .collect();

    let zero_pt = EvalPoint::new(vec![], vec![Rat::zero(); dim]);
    let mut solutions = Vec::new();
    let mut singular = Vec::new();
    for mask in 0u32..(1 << l_i) {
        let active: Vec<usize> = (0..l_i).filter(|&j| mask & (1 << j) != 0).collect();
        // equations: G = 0; φ_j = 0 for active j; y_j = 0 for inactive j
        let mut eqs: Vec<Expr> = g_rows.clone();
        for j in 0..l_i {
            if active.contains(&j) {
                eqs.push(phi_rows[j].clone());
            } else {
                eqs.push(Expr::decision(n + j));
            }
        }
        let fv = FuncVec::new(eqs, 0, dim);
        // linearity check: the Hessian of every equation must vanish
        for (ei, _) in fv.components.iter().enumerate() {
            let mut w = vec![Rat::zero(); fv.out_dim()];
            w[ei] = rone();
            let h = fv.hessian_form(&w, &zero_pt).map_err(|e| {
                KktError::NonlinearBranch(format!("branch {active:?}: {e}"))
            })?;
            if h.rows_iter().flatten().any(|x| !x.is_zero()) {
                return Err(KktError::NonlinearBranch(format!(
                    "branch {active:?}: equation {} has curvature in (x, y)",
                    ei + 1
                )));
            }
        }
        let a = fv.jacobian(&zero_pt, Wrt::Decision)?;
        let b: Vec<Rat> = fv
            .eval_exact(&zero_pt)?
            .into_iter()
            .map(|v| -v)
            .collect();
        let Some(z) = solve_general(&a, &b)? else {
            continue; // inconsistent branch
        };
        if crate::exactla::rank(&a) < dim {
            singular.push(active);
            continue;
        }
        // branch feasibility
        let pt = EvalPoint::new(vec![], z.clone());
        let phis: Vec<Rat> = phi_rows
            .iter()
            .map(|e| e.eval(&pt).map(|s| s.exact().cloned().expect("linear")))
            .collect::<std::result::Result<_, _>>()?;
        let mut ok = true;
        for j in 0..l_i {
            if active.contains(&j) {
                if z[n + j].is_negative() {
                    ok = false;
                    break;
                }
            } else if phis[j].is_positive() {
                ok = false;
                break;
            }
        }
        if !ok {
            continue;
        }
        solutions.push(BranchSolution {
            active,
            x: z[..n].to_vec(),
            y: z[n..].to_vec(),
        });
    }
    // canonical order, dedup identical points produced by different patterns
    solutions.sort_by(|a, b| format!("{:?}{:?}", a.x, a.y).cmp(&format!("{:?}{:?}", b.x, b.y)));
    solutions.dedup_by(|a, b| a.x == b.x && a.y == b.y);
    Ok(SolutionEnumeration {
        solutions,
        singular_branches: singular,
    })
}

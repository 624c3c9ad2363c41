//! The parametric constraint system model: `g(p, x) ∈ C` with a parameter
//! set `P`, a validated reference pair, an optional splitting into
//! `(g₁, g₂) ∈ C₁ × C₂`, and the image-derivative direction cone.

use crate::exactla::{
    canonicalize_vec, hcone_to_vcone, rank, HCone, Rat, RatMatrix, VCone,
};
use crate::funcexpr::{EvalPoint, Expr, FuncError, FuncVec, VarKind, Wrt};
use crate::polycal::{project_point, PolycalError, Polyhedron, PolyUnion};
use num_traits::Zero;

#[derive(Debug, Clone, thiserror::Error)]
pub enum SysError {
    #[error("reference pair infeasible: {0}")]
    ReferenceInfeasible(String),
    #[error("reference parameter outside P")]
    ParamInfeasible,
    #[error("C does not decompose as a product across the split index: {0}")]
    NotAProduct(String),
    #[error("unsupported parameter set variant for this operation")]
    UnsupportedParamSet,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Polycal(#[from] PolycalError),
    #[error(transparent)]
    Func(#[from] FuncError),
    #[error(transparent)]
    Exact(#[from] crate::exactla::ExactlaError),
}

pub type Result<T> = std::result::Result<T, SysError>;

/// The parameter set `P`.
#[derive(Debug, Clone)]
pub enum ParamSet {
    FullSpace(usize),
    Polyhedron(Polyhedron),
    /// `{p : h(p) ≤ 0}` with smooth `h`; `h` is a parameter-only function.
    SmoothIneq(FuncVec),
}

impl ParamSet {
    pub fn param_dim(&self) -> usize {
        match self {
            ParamSet::FullSpace(m) => *m,
            ParamSet::Polyhedron(p) => p.dim,
            ParamSet::SmoothIneq(h) => h.param_dim,
        }
    }

    pub fn contains(&self, p: &[Rat]) -> Result<bool> {
        Ok(match self {
            ParamSet::FullSpace(m) => p.len() == *m,
            ParamSet::Polyhedron(poly) => poly.contains(p),
            ParamSet::SmoothIneq(h) => {
                let vals = h.eval_exact(&EvalPoint::new(p.to_vec(), vec![]))?;
                vals.iter().all(|v| !num_traits::Signed::is_positive(v))
            }
        })
    }
}

/// Direction cone in the image space, either computed as
/// `∇_p g(p̄, x̄)·T_P(p̄)` or supplied by the user.
#[derive(Debug, Clone)]
pub struct DirectionCone {
    pub cone: VCone,
    pub provenance: Provenance,
    /// Set when `∇_p g(p̄, x̄)` is not injective: the computed cone may then
    /// be a strict subset of the image derivative.
    pub non_injective_warning: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    ComputedFromP,
    UserSupplied,
}

/// A validated parametric constraint system.
#[derive(Debug, Clone)]
pub struct ConstraintSystem {
    pub g: FuncVec,
    pub c: PolyUnion,
    pub p_set: ParamSet,
    pub p_ref: Vec<Rat>,
    pub x_ref: Vec<Rat>,
    /// Components `0..split_l1` form `g₁`, the rest `g₂`, with
    /// `C = C₁ × C₂` across the same index.
    pub split_l1: usize,
    /// Product parts when `0 < split_l1 < l`.
    pub c_parts: Option<(PolyUnion, PolyUnion)>,
    /// Optional user-supplied image direction cone.
    pub user_dhat: Option<VCone>,
}

impl ConstraintSystem {
    pub fn new(
        g: FuncVec,
        c: PolyUnion,
        p_set: ParamSet,
        p_ref: Vec<Rat>,
        x_ref: Vec<Rat>,
        split_l1: usize,
    ) -> Result<Self> {
        let l = g.out_dim();
        if c.dim != l {
            return Err(SysError::Dimension(format!(
                "g has {l} components but C lives in R^{}",
                c.dim
            )));
        }
        if g.param_dim != p_set.param_dim() || g.param_dim != p_ref.len() {
            return Err(SysError::Dimension("parameter dimensions disagree".into()));
        }
        if g.decision_dim != x_ref.len() {
            return Err(SysError::Dimension("decision dimensions disagree".into()));
        }
        if split_l1 > l {
            return Err(SysError::Dimension(format!(
                "split index {split_l1} exceeds {l} components"
            )));
        }
        let gbar = g.eval_exact(&EvalPoint::new(p_ref.clone(), x_ref.clone()))?;
        if !c.contains(&gbar) {
            // Diagnostic with per-piece squared distances.
            let mut dists = Vec::new();
            for (i, piece) in c.pieces.iter().enumerate() {
                let single = PolyUnion::convex(piece.clone());
                let (_, d2) = project_point(&single, &gbar)?;
                dists.push(format!("piece {i}: squared distance {d2}"));
            }
            return Err(SysError::ReferenceInfeasible(format!(
                "g(p̄, x̄) = {gbar:?} is not in C ({})",
                dists.join(", ")
            )));
        }
        let p_ok = p_set.contains(&p_ref)?;
        if !p_ok {
            return Err(SysError::ParamInfeasible);
        }
        let c_parts = if split_l1 > 0 && split_l1 < l {
            Some(decompose_product(&c, split_l1)?)
        } else {
            None
        };
        Ok(ConstraintSystem {
            g,
            c,
            p_set,
            p_ref,
            x_ref,
            split_l1,
            c_parts,
            user_dhat: None,
        })
    }

    /// Construct from explicit product parts (the parts are crossed to form
    /// `C`, so the decomposition is valid by construction).
    pub fn from_parts(
        g: FuncVec,
        c1: PolyUnion,
        c2: PolyUnion,
        p_set: ParamSet,
        p_ref: Vec<Rat>,
        x_ref: Vec<Rat>,
    ) -> Result<Self> {
        let split_l1 = c1.dim;
        let c = c1.product(&c2);
        let mut sys = Self::new(g, c, p_set, p_ref, x_ref, split_l1)?;
        sys.c_parts = Some((c1, c2));
        Ok(sys)
    }

    pub fn with_user_dhat(mut self, dhat: VCone) -> Self {
        self.user_dhat = Some(dhat);
        self
    }

    pub fn reference_point(&self) -> EvalPoint {
        EvalPoint::new(self.p_ref.clone(), self.x_ref.clone())
    }

    /// `g(p̄, x̄)`.
    pub fn g_ref(&self) -> Result<Vec<Rat>> {
        Ok(self.g.eval_exact(&self.reference_point())?)
    }

    /// `∇_x g(p̄, x̄)`.
    pub fn jac_x(&self) -> Result<RatMatrix> {
        Ok(self.g.jacobian(&self.reference_point(), Wrt::Decision)?)
    }

    /// `∇_p g(p̄, x̄)`.
    pub fn jac_p(&self) -> Result<RatMatrix> {
        Ok(self.g.jacobian(&self.reference_point(), Wrt::Param)?)
    }

    /// Exact tangent cone of `P` at `p̄`: active rows for a polyhedron, the
    /// linearization cone `{w : ∇h(p̄) w ≤ 0}` for smooth inequalities.
    pub fn tangent_cone_p(&self) -> Result<HCone> {
        let m = self.p_ref.len();
        match &self.p_set {
            ParamSet::FullSpace(_) => Ok(HCone::full(m)),
            ParamSet::Polyhedron(poly) => Ok(poly.tangent_cone(&self.p_ref)?),
            ParamSet::SmoothIneq(h) => {
                let pt = EvalPoint::new(self.p_ref.clone(), vec![]);
                let vals = h.eval_exact(&pt)?;
                let jac = h.jacobian(&pt, Wrt::Param)?;
                // active rows: h_i(p̄) = 0
                let act: Vec<usize> = (0..vals.len()).filter(|&i| vals[i].is_zero()).collect();
                Ok(HCone::new(jac.select_rows(&act), RatMatrix::empty(m), m)?)
            }
        }
    }

    /// The image derivative direction cone `D̂`.
    ///
    /// Returns the user-supplied cone when present; otherwise computes
    /// `∇_p g(p̄, x̄)·T_P(p̄)` and flags non-injectivity of `∇_p g(p̄, x̄)`,
    /// in which case the computed cone may be a strict subset of the true
    /// image derivative.
    pub fn image_derivative_cone(&self) -> Result<DirectionCone> {
        if let Some(user) = &self.user_dhat {
            return Ok(DirectionCone {
                cone: user.clone(),
                provenance: Provenance::UserSupplied,
                non_injective_warning: false,
            });
        }
        let jp = self.jac_p()?;
        let tp = self.tangent_cone_p()?;
        let tp_v = hcone_to_vcone(&tp)?;
        let map = |v: &Vec<Rat>| -> Result<Vec<Rat>> { Ok(jp.mat_vec(v)?) };
        let mut rays = Vec::new();
        for r in &tp_v.rays {
            let img = map(r)?;
            if img.iter().any(|x| !x.is_zero()) {
                rays.push(canonicalize_vec(&img));
            }
        }
        let mut lineality = Vec::new();
        for l in &tp_v.lineality {
            let img = map(l)?;
            if img.iter().any(|x| !x.is_zero()) {
                lineality.push(canonicalize_vec(&img));
            }
        }
        let m = self.p_ref.len();
        let non_injective = rank(&jp) < m;
        Ok(DirectionCone {
            cone: VCone::new(rays, lineality, self.g.out_dim())?,
            provenance: Provenance::ComputedFromP,
            non_injective_warning: non_injective,
        })
    }

    /// Extract the `g₂`-subsystem `g₂(p, x) ∈ C₂` (components from
    /// `split_l1` on), dropping parameters that neither `g₂` nor the
    /// description of `P` uses. Returns the reduced system and the indices
    /// of the kept parameters.
    ///
    /// Dropping inactive parameters is sound: membership of `p` in `P` and
    /// the values of `g₂` depend only on the kept coordinates, so the
    /// stability estimate transfers between the full and reduced systems.
    pub fn g2_subsystem(&self) -> Result<(ConstraintSystem, Vec<usize>)> {
        let (_, c2) = self
            .c_parts
            .clone()
            .ok_or_else(|| SysError::NotAProduct("no split parts".into()))?;
        let comps: Vec<Expr> = self.g.components[self.split_l1..].to_vec();
        let m = self.g.param_dim;
        let uses = |i: usize| -> bool {
            comps.iter().any(|c| c.uses_var(VarKind::Param, i))
                || match &self.p_set {
                    ParamSet::FullSpace(_) => false,
                    ParamSet::Polyhedron(poly) => {
                        (0..poly.a.n_rows()).any(|r| !poly.a.get(r, i).is_zero())
                    }
                    ParamSet::SmoothIneq(h) => {
                        h.components.iter().any(|c| c.uses_var(VarKind::Param, i))
                    }
                }
        };
        let kept: Vec<usize> = (0..m).filter(|&i| uses(i)).collect();
        let reindex: std::collections::HashMap<usize, usize> = kept
            .iter()
            .enumerate()
            .map(|(new, &old)| (old, new))
            .collect();
        let remap = |k: VarKind, i: usize| -> (VarKind, usize) {
            if k == VarKind::Param {
                (k, *reindex.get(&i).expect("kept parameter"))
            } else {
                (k, i)
            }
        };
        let g2 = FuncVec::new(
            comps.iter().map(|c| c.map_vars(&remap)).collect(),
            kept.len(),
            self.g.decision_dim,
        );
        let p_set = match &self.p_set {
            ParamSet::FullSpace(_) => ParamSet::FullSpace(kept.len()),
            ParamSet::Polyhedron(poly) => ParamSet::Polyhedron(Polyhedron::new(
                poly.a.select_cols(&kept),
                poly.b.clone(),
                kept.len(),
            )?),
            ParamSet::SmoothIneq(h) => ParamSet::SmoothIneq(FuncVec::new(
                h.components.iter().map(|c| c.map_vars(&remap)).collect(),
                kept.len(),
                0,
            )),
        };
        let p_ref: Vec<Rat> = kept.iter().map(|&i| self.p_ref[i].clone()).collect();
        let sub = ConstraintSystem::new(
            g2,
            c2,
            p_set,
            p_ref,
            self.x_ref.clone(),
            0,
        )?;
        Ok((sub, kept))
    }
}

/// Structural product decomposition of a union across the coordinate split:
/// every piece's rows must be pure in one block, and the piece set must be
/// the full cross product of the distinct left and right parts.
fn decompose_product(c: &PolyUnion, l1: usize) -> Result<(PolyUnion, PolyUnion)> {
    let l = c.dim;
    let l2 = l - l1;
    let mut lefts: Vec<(Vec<(Vec<Rat>, Rat)>, Polyhedron)> = Vec::new();
    let mut rights: Vec<(Vec<(Vec<Rat>, Rat)>, Polyhedron)> = Vec::new();
    let mut piece_keys: Vec<(usize, usize)> = Vec::new();
    for (pi, p) in c.pieces.iter().enumerate() {
        let mut left_rows: Vec<(Vec<Rat>, Rat)> = Vec::new();
        let mut right_rows: Vec<(Vec<Rat>, Rat)> = Vec::new();
        for i in 0..p.a.n_rows() {
            let row = p.a.row(i);
            let lpart: Vec<Rat> = row[..l1].to_vec();
            let rpart: Vec<Rat> = row[l1..].to_vec();
            let lz = lpart.iter().all(|x| x.is_zero());
            let rz = rpart.iter().all(|x| x.is_zero());
            if lz && rz {
                continue;
            }
            if !lz && !rz {
                return Err(SysError::NotAProduct(format!(
                    "piece {pi} row {i} couples both blocks"
                )));
            }
            if !lz {
                left_rows.push(normalize_row(&lpart, &p.b[i]));
            } else {
                right_rows.push(normalize_row(&rpart, &p.b[i]));
            }
        }
        left_rows.sort();
        left_rows.dedup();
        right_rows.sort();
        right_rows.dedup();
        let li = match lefts.iter().position(|(k, _)| *k == left_rows) {
            Some(i) => i,
            None => {
                let poly = poly_from_rows(&left_rows, l1)?;
                lefts.push((left_rows, poly));
                lefts.len() - 1
            }
        };
        let ri = match rights.iter().position(|(k, _)| *k == right_rows) {
            Some(i) => i,
            None => {
                let poly = poly_from_rows(&right_rows, l2)?;
                rights.push((right_rows, poly));
                rights.len() - 1
            }
        };
        piece_keys.push((li, ri));
    }
    piece_keys.sort();
    piece_keys.dedup();
    if piece_keys.len() != lefts.len() * rights.len() {
        return Err(SysError::NotAProduct(format!(
            "{} pieces do not form the {}×{} cross product of their parts",
            piece_keys.len(),
            lefts.len(),
            rights.len()
        )));
    }
    let c1 = PolyUnion::new(lefts.into_iter().map(|(_, p)| p).collect())?;
    let c2 = PolyUnion::new(rights.into_iter().map(|(_, p)| p).collect())?;
    Ok((c1, c2))
}

fn normalize_row(row: &[Rat], rhs: &Rat) -> (Vec<Rat>, Rat) {
    // Scale (row, rhs) jointly so the row is primitive.
    let mut joint = row.to_vec();
    joint.push(rhs.clone());
    let c = canonicalize_vec(&joint);
    let (r, b) = c.split_at(row.len());
    // canonicalize may flip the overall sign only by convention of the gcd
    // scaling; it preserves sign, so inequality direction is unchanged
    (r.to_vec(), b[0].clone())
}

fn poly_from_rows(rows: &[(Vec<Rat>, Rat)], dim: usize) -> Result<Polyhedron> {
    if rows.is_empty() {
        // whole space: one trivial row 0 ≤ 0 keeps the type simple
        return Ok(Polyhedron::new(
            RatMatrix::empty(dim),
            vec![],
            dim,
        )?);
    }
    let a = RatMatrix::from_rows(rows.iter().map(|(r, _)| r.clone()).collect())?;
    let b = rows.iter().map(|(_, b)| b.clone()).collect();
    Ok(Polyhedron::new(a, b, dim)?)
}

//! Polyhedral sets, finite unions, and the variational cone calculus.
//!
//! A point of a `PolyUnion` decomposes its neighborhood into finitely many
//! *strata*: relatively open direction cones on which the containing pieces
//! and their active rows are constant. Tangent, regular normal, limiting
//! normal, and directional limiting normal cones are all read off that
//! decomposition, which makes the quantifiers of the first- and second-order
//! checks decidable in exact arithmetic.

use crate::exactla::{
    canonicalize_vec, caps, dot, hcone_to_vcone, lp_feasible, norm_sq, nullspace, rank,
    solve_general, vcone_to_hcone, ExactlaError, HCone, Rat, RatMatrix, VCone,
};
use crate::funcexpr::{EvalPoint, FuncError, FuncVec};
use num_traits::{Signed, Zero};

#[derive(Debug, Clone, thiserror::Error)]
pub enum PolycalError {
    #[error("point is not in the set")]
    PointNotInSet,
    #[error("direction is not tangent to the set")]
    DirectionNotTangent,
    #[error("empty polyhedron: {0}")]
    EmptyPolyhedron(String),
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Exact(#[from] ExactlaError),
    #[error(transparent)]
    Func(#[from] FuncError),
}

pub type Result<T> = std::result::Result<T, PolycalError>;

/// Convex polyhedron `{z : A z ≤ b}`, nonempty by construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Polyhedron {
    pub a: RatMatrix,
    pub b: Vec<Rat>,
    pub dim: usize,
}

impl Polyhedron {
    pub fn new(a: RatMatrix, b: Vec<Rat>, dim: usize) -> Result<Self> {
        if a.n_rows() != b.len() || (a.n_rows() > 0 && a.n_cols() != dim) {
            return Err(PolycalError::Dimension(
                "polyhedron rows/rhs mismatch".into(),
            ));
        }
        if a.n_rows() > caps().max_dd_rows {
            return Err(PolycalError::Capacity(format!(
                "polyhedron has {} rows, capacity is {}",
                a.n_rows(),
                caps().max_dd_rows
            )));
        }
        let feasible = lp_feasible(
            &RatMatrix::empty(dim),
            &[],
            &a,
            &b,
            &RatMatrix::empty(dim),
            &[],
        )?;
        if feasible.is_none() {
            return Err(PolycalError::EmptyPolyhedron(format!(
                "{} rows in R^{dim} have no common point",
                a.n_rows()
            )));
        }
        Ok(Polyhedron { a, b, dim })
    }

    /// `{z : z ≤ 0}` in `R^dim`.
    pub fn nonpos_orthant(dim: usize) -> Self {
        Polyhedron {
            a: RatMatrix::identity(dim),
            b: vec![Rat::zero(); dim],
            dim,
        }
    }

    /// `{0}` in `R^dim`.
    pub fn origin(dim: usize) -> Self {
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        for i in 0..dim {
            let mut r = vec![Rat::zero(); dim];
            r[i] = crate::exactla::rone();
            rows.push(r.clone());
            rhs.push(Rat::zero());
            rows.push(r.iter().map(|x| -x).collect());
            rhs.push(Rat::zero());
        }
        Polyhedron {
            a: RatMatrix::from_rows(rows).expect("square rows"),
            b: rhs,
            dim,
        }
    }

    pub fn contains(&self, z: &[Rat]) -> bool {
        z.len() == self.dim
            && (0..self.a.n_rows()).all(|i| dot(self.a.row(i), z) <= self.b[i])
    }

    /// Indices of rows active at `z`.
    pub fn active_rows(&self, z: &[Rat]) -> Vec<usize> {
        (0..self.a.n_rows())
            .filter(|&i| dot(self.a.row(i), z) == self.b[i])
            .collect()
    }

    /// Tangent cone at a member point: `{u : A_active u ≤ 0}`.
    pub fn tangent_cone(&self, z: &[Rat]) -> Result<HCone> {
        if !self.contains(z) {
            return Err(PolycalError::PointNotInSet);
        }
        let act = self.active_rows(z);
        Ok(HCone::new(
            self.a.select_rows(&act),
            RatMatrix::empty(self.dim),
            self.dim,
        )?)
    }

    /// Cross product with another polyhedron (block-diagonal rows).
    pub fn product(&self, other: &Polyhedron) -> Polyhedron {
        let dim = self.dim + other.dim;
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        for i in 0..self.a.n_rows() {
            let mut r = self.a.row(i).to_vec();
            r.extend(vec![Rat::zero(); other.dim]);
            rows.push(r);
            rhs.push(self.b[i].clone());
        }
        for i in 0..other.a.n_rows() {
            let mut r = vec![Rat::zero(); self.dim];
            r.extend(other.a.row(i).to_vec());
            rows.push(r);
            rhs.push(other.b[i].clone());
        }
        Polyhedron {
            a: if rows.is_empty() {
                RatMatrix::empty(dim)
            } else {
                RatMatrix::from_rows(rows).expect("consistent rows")
            },
            b: rhs,
            dim,
        }
    }
}

/// Finite union of convex polyhedra sharing an ambient space; closed by
/// construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolyUnion {
    pub pieces: Vec<Polyhedron>,
    pub dim: usize,
}

impl PolyUnion {
    pub fn new(pieces: Vec<Polyhedron>) -> Result<Self> {
        let Some(first) = pieces.first() else {
            return Err(PolycalError::EmptyPolyhedron(
                "a union needs at least one piece".into(),
            ));
        };
        let dim = first.dim;
        if pieces.iter().any(|p| p.dim != dim) {
            return Err(PolycalError::Dimension(
                "union pieces must share the ambient dimension".into(),
            ));
        }
        Ok(PolyUnion { pieces, dim })
    }

    pub fn convex(piece: Polyhedron) -> Self {
        PolyUnion {
            dim: piece.dim,
            pieces: vec![piece],
        }
    }

    /// `R^dim_-` as a single piece.
    pub fn nonpos_orthant(dim: usize) -> Self {
        Self::convex(Polyhedron::nonpos_orthant(dim))
    }

    /// `{0}^dim` as a single piece.
    pub fn origin(dim: usize) -> Self {
        Self::convex(Polyhedron::origin(dim))
    }

    /// The complementarity graph `Gr N_{R_-} = (R_- × {0}) ∪ ({0} × R_+)`
    /// in the plane.
    pub fn graph_normal_nonpos() -> Self {
        let r1 = crate::exactla::rone();
        // piece 1: s ≤ 0, v = 0
        let p1 = Polyhedron {
            a: RatMatrix::from_rows(vec![
                vec![r1.clone(), Rat::zero()],
                vec![Rat::zero(), r1.clone()],
                vec![Rat::zero(), -r1.clone()],
            ])
            .unwrap(),
            b: vec![Rat::zero(); 3],
            dim: 2,
        };
        // piece 2: s = 0, v ≥ 0
        let p2 = Polyhedron {
            a: RatMatrix::from_rows(vec![
                vec![r1.clone(), Rat::zero()],
                vec![-r1.clone(), Rat::zero()],
                vec![Rat::zero(), -r1],
            ])
            .unwrap(),
            b: vec![Rat::zero(); 3],
            dim: 2,
        };
        PolyUnion {
            pieces: vec![p1, p2],
            dim: 2,
        }
    }

    /// Cross product of unions: all pairwise piece products.
    pub fn product(&self, other: &PolyUnion) -> PolyUnion {
        let mut pieces = Vec::with_capacity(self.pieces.len() * other.pieces.len());
        for a in &self.pieces {
            for b in &other.pieces {
                pieces.push(a.product(b));
            }
        }
        PolyUnion {
            pieces,
            dim: self.dim + other.dim,
        }
    }

    pub fn contains(&self, z: &[Rat]) -> bool {
        self.pieces.iter().any(|p| p.contains(z))
    }

    /// Indices of pieces containing `z`.
    pub fn containing_pieces(&self, z: &[Rat]) -> Vec<usize> {
        (0..self.pieces.len())
            .filter(|&i| self.pieces[i].contains(z))
            .collect()
    }
}

/// H-form of the cone generated by the given vectors.
pub fn cone_from_generators(gens: &[Vec<Rat>], dim: usize) -> Result<HCone> {
    let v = VCone::new(gens.to_vec(), vec![], dim)?;
    Ok(vcone_to_hcone(&v)?)
}

/// `a ⊆ b` for H-cones, decided on generators.
pub fn hcone_subset(a: &HCone, b: &HCone) -> Result<bool> {
    let va = hcone_to_vcone(a)?;
    Ok(va.generators_signed().iter().all(|g| b.contains(g)))
}

/// Point-set equality of H-cones.
pub fn hcone_eq(a: &HCone, b: &HCone) -> Result<bool> {
    Ok(hcone_subset(a, b)? && hcone_subset(b, a)?)
}

/// One maximal region of tangent directions with constant piece containment
/// and active pattern.
#[derive(Debug, Clone)]
pub struct Stratum {
    /// Signs of the canonical active rows on this region (internal key).
    pub sign: Vec<i8>,
    /// Pieces whose tangent cone contains the region.
    pub piece_pattern: Vec<usize>,
    /// Per accepted piece: the rows (piece-local indices) active along the
    /// region.
    pub active_pattern: Vec<(usize, Vec<usize>)>,
    /// Closure of the region; its relative interior realizes the pattern.
    pub direction_cone: HCone,
    /// Regular normal cone at `z + t w` for small `t > 0`, `w` in the region.
    pub normal_value: HCone,
}

/// Stratum decomposition of a union at a point, with the shared canonical
/// row list needed for compatibility queries.
#[derive(Debug, Clone)]
pub struct Strata {
    /// Canonical active row directions (primitive, first nonzero positive).
    pub canon_rows: Vec<Vec<Rat>>,
    pub list: Vec<Stratum>,
    dim: usize,
}

/// Canonicalize a row up to positive scaling and record its orientation
/// relative to the sign-canonical representative.
fn canon_signed(row: &[Rat]) -> (Vec<Rat>, i8) {
    let c = canonicalize_vec(row);
    match c.iter().find(|x| !x.is_zero()) {
        Some(first) if first.is_negative() => (c.iter().map(|x| -x).collect(), -1),
        _ => (c, 1),
    }
}

impl Strata {
    /// Sign vector of a direction against the canonical rows.
    pub fn sigma_of(&self, w: &[Rat]) -> Vec<i8> {
        self.canon_rows
            .iter()
            .map(|r| {
                let d = dot(r, w);
                if d.is_positive() {
                    1
                } else if d.is_negative() {
                    -1
                } else {
                    0
                }
            })
            .collect()
    }

    /// Index of the unique stratum whose relatively open region contains `w`,
    /// if `w` is tangent.
    pub fn stratum_of_direction(&self, w: &[Rat]) -> Option<usize> {
        let sigma = self.sigma_of(w);
        self.list.iter().position(|s| s.sign == sigma)
    }

    /// Strata whose closed direction cone contains every direction with sign
    /// vector `sigma`: the normal values reachable along perturbations of
    /// such directions.
    pub fn compatible_with(&self, sigma: &[i8]) -> Vec<usize> {
        self.list
            .iter()
            .enumerate()
            .filter(|(_, s)| {
                s.sign.iter().zip(sigma).all(|(&sp, &sg)| match sp {
                    0 => sg == 0,
                    -1 => sg <= 0,
                    _ => sg >= 0,
                })
            })
            .map(|(i, _)| i)
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// Enumerate the strata of `c` at `z ∈ c`.
///
/// Sign patterns are assigned over the distinct active row directions with
/// LP pruning; a pattern survives if some containing piece accepts it (all
/// of its active rows nonpositive on the region).
pub fn enumerate_strata(c: &PolyUnion, z: &[Rat]) -> Result<Strata> {
    let holding = c.containing_pieces(z);
    if holding.is_empty() {
        return Err(PolycalError::PointNotInSet);
    }
    // Collect active rows; map (piece, row) -> (canon index, orientation).
    let mut canon_rows: Vec<Vec<Rat>> = Vec::new();
    let mut piece_rows: Vec<(usize, Vec<(usize, usize, i8)>)> = Vec::new(); // (piece, [(row, canon, orient)])
    for &pi in &holding {
        let p = &c.pieces[pi];
        let mut entries = Vec::new();
        for ri in p.active_rows(z) {
            let row = p.a.row(ri);
            if row.iter().all(|x| x.is_zero()) {
                continue;
            }
            let (key, orient) = canon_signed(row);
            let ci = match canon_rows.iter().position(|r| *r == key) {
                Some(i) => i,
                None => {
                    canon_rows.push(key);
                    canon_rows.len() - 1
                }
            };
            entries.push((ri, ci, orient));
        }
        piece_rows.push((pi, entries));
    }

    let k = canon_rows.len();
    let cap = caps();
    if 3usize.checked_pow(k as u32).map_or(true, |n| n > cap.max_patterns) {
        return Err(PolycalError::Capacity(format!(
            "stratum enumeration over {k} distinct active rows exceeds the pattern cap"
        )));
    }

    let dim = c.dim;
    let mut strata = Vec::new();
    let mut sigma: Vec<i8> = Vec::with_capacity(k);
    enumerate_rec(
        &canon_rows,
        dim,
        &mut sigma,
        &piece_rows,
        c,
        &mut strata,
    )?;
    Ok(Strata {
        canon_rows,
        list: strata,
        dim,
    })
}

fn sign_cone_rows(canon_rows: &[Vec<Rat>], sigma: &[i8]) -> (Vec<Vec<Rat>>, Vec<Vec<Rat>>) {
    // (strict-able ineq rows normalized to "≤ 0", eq rows)
    let mut ineq = Vec::new();
    let mut eq = Vec::new();
    for (c, &s) in canon_rows.iter().take(sigma.len()).zip(sigma) {
        match s {
            -1 => ineq.push(c.clone()),
            1 => ineq.push(c.iter().map(|x| -x).collect()),
            _ => eq.push(c.clone()),
        }
    }
    (ineq, eq)
}

fn partial_feasible(canon_rows: &[Vec<Rat>], sigma: &[i8], dim: usize) -> Result<Option<Vec<Rat>>> {
    let (ineq, eq) = sign_cone_rows(canon_rows, sigma);
    let strict = if ineq.is_empty() {
        RatMatrix::empty(dim)
    } else {
        RatMatrix::from_rows(ineq)?
    };
    let eqm = if eq.is_empty() {
        RatMatrix::empty(dim)
    } else {
        RatMatrix::from_rows(eq)?
    };
    let zs = vec![Rat::zero(); strict.n_rows()];
    let ze = vec![Rat::zero(); eqm.n_rows()];
    Ok(lp_feasible(
        &strict,
        &zs,
        &RatMatrix::empty(dim),
        &[],
        &eqm,
        &ze,
    )?)
}

fn enumerate_rec(
    canon_rows: &[Vec<Rat>],
    dim: usize,
    sigma: &mut Vec<i8>,
    piece_rows: &[(usize, Vec<(usize, usize, i8)>)],
    c: &PolyUnion,
    out: &mut Vec<Stratum>,
) -> Result<()> {
    if partial_feasible(canon_rows, sigma, dim)?.is_none() {
        return Ok(());
    }
    if sigma.len() == canon_rows.len() {
        // Accepted pieces: all active rows nonpositive under this pattern.
        let mut piece_pattern: Vec<usize> = Vec::new();
        let mut active_pattern: Vec<(usize, Vec<usize>)> = Vec::new();
        for (pi, entries) in piece_rows {
            let ok = entries.iter().all(|(_, ci, orient)| {
                let eff = sigma[*ci] * orient;
                eff <= 0
            });
            if ok {
                piece_pattern.push(*pi);
                active_pattern.push((
                    *pi,
                    entries
                        .iter()
                        .filter(|(_, ci, _)| sigma[*ci] == 0)
                        .map(|(ri, _, _)| *ri)
                        .collect(),
                ));
            }
        }
        if piece_pattern.is_empty() {
            return Ok(());
        }
        // Closure of the region.
        let (ineq, eq) = sign_cone_rows(canon_rows, sigma);
        let direction_cone = HCone::new(
            if ineq.is_empty() {
                RatMatrix::empty(dim)
            } else {
                RatMatrix::from_rows(ineq)?
            },
            if eq.is_empty() {
                RatMatrix::empty(dim)
            } else {
                RatMatrix::from_rows(eq)?
            },
            dim,
        )?;
        // Normal value: intersection over accepted pieces of the cone
        // generated by the rows active along the region.
        let mut normal_value = HCone::full(dim);
        for (pi, act) in &active_pattern {
            let gens: Vec<Vec<Rat>> = act
                .iter()
                .map(|&ri| c.pieces[*pi].a.row(ri).to_vec())
                .collect();
            let g = cone_from_generators(&gens, dim)?;
            normal_value = normal_value.intersect(&g)?;
        }
        let normal_value = normal_value.pruned()?;
        out.push(Stratum {
            sign: sigma.clone(),
            piece_pattern,
            active_pattern,
            direction_cone,
            normal_value,
        });
        return Ok(());
    }
    for s in [-1i8, 0, 1] {
        sigma.push(s);
        enumerate_rec(canon_rows, dim, sigma, piece_rows, c, out)?;
        sigma.pop();
    }
    Ok(())
}

/// Contingent cone pieces of the union at `z`: one H-cone per containing
/// piece; their union is the contingent cone of the union (exact for
/// polyhedra).
pub fn tangent_cone(c: &PolyUnion, z: &[Rat]) -> Result<Vec<HCone>> {
    let holding = c.containing_pieces(z);
    if holding.is_empty() {
        return Err(PolycalError::PointNotInSet);
    }
    holding
        .iter()
        .map(|&i| c.pieces[i].tangent_cone(z))
        .collect()
}

/// Is `w` tangent to the union at `z`?
pub fn is_tangent(c: &PolyUnion, z: &[Rat], w: &[Rat]) -> Result<bool> {
    Ok(tangent_cone(c, z)?.iter().any(|t| t.contains(w)))
}

/// Regular (Fréchet) normal cone: polar of the union of tangent pieces,
/// computed as the intersection of the active-row cones of the containing
/// pieces.
pub fn regular_normal_cone(c: &PolyUnion, z: &[Rat]) -> Result<HCone> {
    let holding = c.containing_pieces(z);
    if holding.is_empty() {
        return Err(PolycalError::PointNotInSet);
    }
    let mut out = HCone::full(c.dim);
    for &pi in &holding {
        let p = &c.pieces[pi];
        let gens: Vec<Vec<Rat>> = p
            .active_rows(z)
            .into_iter()
            .map(|ri| p.a.row(ri).to_vec())
            .collect();
        let g = cone_from_generators(&gens, c.dim)?;
        out = out.intersect(&g)?;
    }
    Ok(out.pruned()?)
}

/// Limiting (Mordukhovich) normal cone as a finite union of convex cones:
/// the distinct stratum normal values.
pub fn limiting_normal_cone(c: &PolyUnion, z: &[Rat]) -> Result<Vec<HCone>> {
    let strata = enumerate_strata(c, z)?;
    dedup_cones(strata.list.iter().map(|s| s.normal_value.clone()).collect())
}

/// Directional limiting normal cone `N_C(z; w)` as a finite union of convex
/// cones; empty iff `w` is not tangent.
pub fn directional_limiting_normal_cone(
    c: &PolyUnion,
    z: &[Rat],
    w: &[Rat],
) -> Result<Vec<HCone>> {
    let strata = enumerate_strata(c, z)?;
    directional_from_strata(&strata, w)
}

/// As [`directional_limiting_normal_cone`] with a precomputed decomposition.
pub fn directional_from_strata(strata: &Strata, w: &[Rat]) -> Result<Vec<HCone>> {
    if strata.stratum_of_direction(w).is_none() {
        return Ok(vec![]);
    }
    let sigma = strata.sigma_of(w);
    let idx = strata.compatible_with(&sigma);
    dedup_cones(idx.iter().map(|&i| strata.list[i].normal_value.clone()).collect())
}

fn dedup_cones(cones: Vec<HCone>) -> Result<Vec<HCone>> {
    let mut out: Vec<HCone> = Vec::new();
    for c in cones {
        let mut dup = false;
        for o in &out {
            if hcone_eq(&c, o)? {
                dup = true;
                break;
            }
        }
        if !dup {
            out.push(c);
        }
    }
    Ok(out)
}

/// Membership in a finite union of convex cones.
pub fn in_cone_union(cones: &[HCone], v: &[Rat]) -> bool {
    cones.iter().any(|c| c.contains(v))
}

/// Outer second-order tangent set for polyhedral unions:
/// `T²_C(z; v) = ∪_i T_{T_{C_i}(z)}(v)` over pieces with `v` tangent.
pub fn second_order_tangent_set(c: &PolyUnion, z: &[Rat], v: &[Rat]) -> Result<Vec<HCone>> {
    let holding = c.containing_pieces(z);
    if holding.is_empty() {
        return Err(PolycalError::PointNotInSet);
    }
    let mut out = Vec::new();
    for &pi in &holding {
        let p = &c.pieces[pi];
        let act = p.active_rows(z);
        let tangent_rows = p.a.select_rows(&act);
        let inside = (0..tangent_rows.n_rows()).all(|i| !dot(tangent_rows.row(i), v).is_positive());
        if !inside {
            continue;
        }
        let second_act: Vec<usize> = (0..tangent_rows.n_rows())
            .filter(|&i| dot(tangent_rows.row(i), v).is_zero())
            .collect();
        out.push(HCone::new(
            tangent_rows.select_rows(&second_act),
            RatMatrix::empty(c.dim),
            c.dim,
        )?);
    }
    if out.is_empty() {
        return Err(PolycalError::DirectionNotTangent);
    }
    dedup_cones(out)
}

/// Exact minimizer of `‖z − y‖²` over `{z : A z ≤ b, E z = e}` by active-set
/// enumeration. Returns the point and the squared distance, or `None` when
/// the polyhedron is empty.
pub fn least_norm_point(
    ineq: &RatMatrix,
    ineq_rhs: &[Rat],
    eq: &RatMatrix,
    eq_rhs: &[Rat],
    y: &[Rat],
) -> Result<Option<(Vec<Rat>, Rat)>> {
    let dim = y.len();
    let feasible = lp_feasible(
        &RatMatrix::empty(dim),
        &[],
        ineq,
        ineq_rhs,
        eq,
        eq_rhs,
    )?;
    if feasible.is_none() {
        return Ok(None);
    }
    let m = ineq.n_rows();
    let max_size = dim.min(m);
    // Capacity: sum of binomials.
    let mut count: usize = 0;
    let cap = caps().max_patterns;
    let mut best: Option<(Vec<Rat>, Rat)> = None;

    let mut subset: Vec<usize> = Vec::new();
    enumerate_subsets(m, max_size, &mut subset, &mut |s: &[usize]| -> Result<bool> {
        count += 1;
        if count > cap {
            return Err(PolycalError::Capacity(
                "active-set enumeration exceeded the pattern cap".into(),
            ));
        }
        let cand = face_projection(ineq, ineq_rhs, eq, eq_rhs, y, s)?;
        if let Some((z, d2)) = cand {
            if best.as_ref().map_or(true, |(_, bd)| d2 < *bd) {
                best = Some((z, d2));
            }
        }
        Ok(true)
    })?;
    Ok(best)
}

fn enumerate_subsets(
    m: usize,
    max_size: usize,
    current: &mut Vec<usize>,
    visit: &mut impl FnMut(&[usize]) -> Result<bool>,
) -> Result<()> {
    visit(current)?;
    if current.len() == max_size {
        return Ok(());
    }
    let start = current.last().map_or(0, |&l| l + 1);
    for i in start..m {
        current.push(i);
        enumerate_subsets(m, max_size, current, visit)?;
        current.pop();
    }
    Ok(())
}

/// KKT solve of the equality-constrained projection onto the face where the
/// rows `subset` of the inequality system hold with equality; candidate is
/// kept only if primal feasible and dual feasible (μ ≥ 0 on the subset).
fn face_projection(
    ineq: &RatMatrix,
    ineq_rhs: &[Rat],
    eq: &RatMatrix,
    eq_rhs: &[Rat],
    y: &[Rat],
    subset: &[usize],
) -> Result<Option<(Vec<Rat>, Rat)>> {
    // E_all = eq rows then subset rows.
    let mut rows: Vec<Vec<Rat>> = eq.rows_iter().map(|r| r.to_vec()).collect();
    let mut rhs: Vec<Rat> = eq_rhs.to_vec();
    for &i in subset {
        rows.push(ineq.row(i).to_vec());
        rhs.push(ineq_rhs[i].clone());
    }
    if rows.is_empty() {
        // Unconstrained: candidate is y itself.
        let feasible = (0..ineq.n_rows()).all(|i| dot(ineq.row(i), y) <= ineq_rhs[i]);
        return Ok(feasible.then(|| (y.to_vec(), Rat::zero())));
    }
    let e_all = RatMatrix::from_rows(rows)?;
    // Gram system (E E^T) ν = E y − r; z = y − E^T ν.
    let gram = e_all.mat_mat(&e_all.transpose())?;
    let ey = e_all.mat_vec(y)?;
    let gr: Vec<Rat> = ey.iter().zip(&rhs).map(|(a, b)| a - b).collect();
    let Some(nu) = solve_general(&gram, &gr)? else {
        return Ok(None); // face is empty
    };
    let et_nu = e_all.transpose_vec(&nu)?;
    let z: Vec<Rat> = y.iter().zip(&et_nu).map(|(a, b)| a - b).collect();
    // Primal feasibility on all inequality rows.
    for i in 0..ineq.n_rows() {
        if dot(ineq.row(i), &z) > ineq_rhs[i] {
            return Ok(None);
        }
    }
    // Dual feasibility: multipliers of the subset rows must admit a
    // nonnegative choice. The particular ν works unless the Gram system is
    // singular, in which case existence is an LP over the solution set.
    let n_eq = eq.n_rows();
    let direct_ok = nu[n_eq..].iter().all(|v| !v.is_negative());
    if !direct_ok {
        if rank(&gram) == gram.n_rows() {
            return Ok(None); // unique multipliers, truly negative
        }
        let mut weak_rows = Vec::new();
        for j in n_eq..nu.len() {
            let mut r = vec![Rat::zero(); nu.len()];
            r[j] = -crate::exactla::rone();
            weak_rows.push(r);
        }
        let weak = RatMatrix::from_rows(weak_rows)?;
        let zs = vec![Rat::zero(); weak.n_rows()];
        let sol = lp_feasible(
            &RatMatrix::empty(nu.len()),
            &[],
            &weak,
            &zs,
            &gram,
            &gr,
        )?;
        if sol.is_none() {
            return Ok(None);
        }
    }
    let diff: Vec<Rat> = y.iter().zip(&z).map(|(a, b)| a - b).collect();
    Ok(Some((z, norm_sq(&diff))))
}

/// Nearest point of the union to `y` and the exact squared distance.
pub fn project_point(c: &PolyUnion, y: &[Rat]) -> Result<(Vec<Rat>, Rat)> {
    let mut best: Option<(Vec<Rat>, Rat)> = None;
    for p in &c.pieces {
        let cand = least_norm_point(&p.a, &p.b, &RatMatrix::empty(c.dim), &[], y)?
            .expect("pieces are nonempty by construction");
        if best.as_ref().map_or(true, |(_, bd)| cand.1 < *bd) {
            best = Some(cand);
        }
    }
    Ok(best.expect("a union has at least one piece"))
}

/// Answer of a pullback multiplier query.
#[derive(Debug, Clone)]
pub enum PullbackAnswer {
    /// Least-norm multiplier representing `v`, with the κ-bound check.
    Multiplier {
        u: Vec<Rat>,
        norm_sq: Rat,
        within_bound: bool,
    },
    /// `v = 0` admits a nonzero kernel multiplier: metric regularity fails.
    NonzeroKernel(Vec<Rat>),
    /// `v = 0` and only the zero multiplier lies in the kernel.
    ZeroOnly,
    /// `v` is not representable as `∇f(z̄)* u` with `u` a limiting normal.
    NoMultiplier,
}

/// Multiplier map of the inverse-image normal cone representation: for a
/// query `v` produce `u ∈ N_C(f(z̄))` with `v = ∇f(z̄)* u` and
/// `‖u‖ ≤ κ‖v‖`, or report that none exists.
#[derive(Debug, Clone)]
pub struct PullbackMap {
    pub jac: RatMatrix,
    pub components: Vec<HCone>,
    pub kappa: Rat,
}

pub fn pullback_normals(
    f_jacobian: &RatMatrix,
    c: &PolyUnion,
    fz: &[Rat],
    kappa: Rat,
) -> Result<PullbackMap> {
    if !c.contains(fz) {
        return Err(PolycalError::PointNotInSet);
    }
    Ok(PullbackMap {
        jac: f_jacobian.clone(),
        components: limiting_normal_cone(c, fz)?,
        kappa,
    })
}

impl PullbackMap {
    /// Equality rows expressing `∇f* u = v`.
    fn adjoint_rows(&self) -> RatMatrix {
        self.jac.transpose()
    }

    pub fn query(&self, v: &[Rat]) -> Result<PullbackAnswer> {
        let d = self.jac.n_rows();
        let jt = self.adjoint_rows();
        if v.iter().all(|x| x.is_zero()) {
            // Search for a nonzero kernel multiplier in any component.
            for k in &self.components {
                for j in 0..d {
                    for sgn in [1i64, -1] {
                        let mut strict = vec![Rat::zero(); d];
                        strict[j] = crate::exactla::rint(-sgn);
                        let strict_m = RatMatrix::from_rows(vec![strict])?;
                        let eq = jt.vstack(&k.eq)?;
                        let eq_rhs = vec![Rat::zero(); eq.n_rows()];
                        let zi = vec![Rat::zero(); k.ineq.n_rows()];
                        if let Some(u) = lp_feasible(
                            &strict_m,
                            &[Rat::zero()],
                            &k.ineq,
                            &zi,
                            &eq,
                            &eq_rhs,
                        )? {
                            return Ok(PullbackAnswer::NonzeroKernel(u));
                        }
                    }
                }
            }
            return Ok(PullbackAnswer::ZeroOnly);
        }
        let mut best: Option<(Vec<Rat>, Rat)> = None;
        for k in &self.components {
            let eq = jt.vstack(&k.eq)?;
            let mut eq_rhs = v.to_vec();
            eq_rhs.extend(vec![Rat::zero(); k.eq.n_rows()]);
            let zi = vec![Rat::zero(); k.ineq.n_rows()];
            let cand = least_norm_point(&k.ineq, &zi, &eq, &eq_rhs, &vec![Rat::zero(); d])?;
            if let Some((u, n2)) = cand {
                if best.as_ref().map_or(true, |(_, b)| n2 < *b) {
                    best = Some((u, n2));
                }
            }
        }
        match best {
            Some((u, n2)) => {
                let bound = &self.kappa * &self.kappa * norm_sq(v);
                Ok(PullbackAnswer::Multiplier {
                    within_bound: n2 <= bound,
                    u,
                    norm_sq: n2,
                })
            }
            None => Ok(PullbackAnswer::NoMultiplier),
        }
    }
}

/// Local representation of a set as `q^{-1}(Q)` near a base point, with
/// `q(·) − Q` metrically subregular there. `Q` polyhedral and `q` twice
/// differentiable make the representation fully usable by the second-order
/// machinery.
#[derive(Debug, Clone)]
pub struct SubamenableRep {
    pub q: FuncVec,
    pub big_q: PolyUnion,
    pub base_point: Vec<Rat>,
}

impl SubamenableRep {
    pub fn new(q: FuncVec, big_q: PolyUnion, base_point: Vec<Rat>) -> Result<Self> {
        let val = q.eval_exact(&EvalPoint::new(vec![], base_point.clone()))?;
        if !big_q.contains(&val) {
            return Err(PolycalError::PointNotInSet);
        }
        Ok(SubamenableRep {
            q,
            big_q,
            base_point,
        })
    }

    /// Whether `Q` is a single convex polyhedron.
    pub fn is_fully_subamenable_convex(&self) -> bool {
        self.big_q.pieces.len() == 1
    }
}

/// A subspace basis for an H-cone if the cone is a linear subspace, else
/// `None`. Decided by the generator representation: no extreme rays means
/// the cone equals its lineality span.
pub fn subspace_basis(c: &HCone) -> Result<Option<Vec<Vec<Rat>>>> {
    let v = hcone_to_vcone(c)?;
    if v.rays.is_empty() {
        Ok(Some(v.lineality))
    } else {
        Ok(None)
    }
}

/// Basis of the kernel of the equality rows of a cone pattern; helper used
/// by the second-order subspace reduction.
pub fn eq_kernel_basis(eq: &RatMatrix, dim: usize) -> Vec<Vec<Rat>> {
    if eq.n_rows() == 0 {
        return RatMatrix::identity(dim)
            .rows_iter()
            .map(|r| r.to_vec())
            .collect();
    }
    nullspace(eq)
}

pub mod oracle {
    //! Reference sampler for the directional limiting normal cone, shaped
    //! directly after its sequential definition. Used only to validate the
    //! stratum-based computation; never used for verdicts.
    //!
    //! For a conic instance the membership `v ∈ N_C(z; w)` reduces to: for
    //! every shrinking radius there is a tangent perturbation `w'` of `w`
    //! with `z + t w' ∈ C` and `v` a regular normal there. The perturbation
    //! dictionary combines coordinate steps, nullspace directions of active
    //! row subsets (reaching lower-dimensional cells), and random rational
    //! steps.

    use super::*;
    use rand::Rng;

    /// Perturbation dictionary around a point of the union.
    pub fn direction_dictionary(
        c: &PolyUnion,
        z: &[Rat],
        rng: &mut impl Rng,
        extra_random: usize,
    ) -> Vec<Vec<Rat>> {
        let dim = c.dim;
        let mut dirs: Vec<Vec<Rat>> = Vec::new();
        for i in 0..dim {
            let mut e = vec![Rat::zero(); dim];
            e[i] = crate::exactla::rone();
            dirs.push(e.clone());
            dirs.push(e.iter().map(|x| -x).collect());
        }
        // Nullspace directions of subsets of active rows (cell skeleta).
        let mut rows: Vec<Vec<Rat>> = Vec::new();
        for &pi in &c.containing_pieces(z) {
            let p = &c.pieces[pi];
            for ri in p.active_rows(z) {
                let r = p.a.row(ri);
                if r.iter().any(|x| !x.is_zero()) {
                    let (key, _) = canon_signed(r);
                    if !rows.contains(&key) {
                        rows.push(key);
                    }
                }
            }
        }
        let mut subsets: Vec<Vec<usize>> = vec![vec![]];
        for size in 1..dim.max(1) {
            let mut stack: Vec<Vec<usize>> = vec![vec![]];
            while let Some(s) = stack.pop() {
                if s.len() == size {
                    subsets.push(s);
                    continue;
                }
                let start = s.last().map_or(0, |&l| l + 1);
                for i in start..rows.len() {
                    let mut t = s.clone();
                    t.push(i);
                    stack.push(t);
                }
            }
        }
        for s in &subsets {
            if s.is_empty() {
                continue;
            }
            let m = RatMatrix::from_rows(s.iter().map(|&i| rows[i].clone()).collect()).unwrap();
            let ns = nullspace(&m);
            for b in &ns {
                dirs.push(b.clone());
                dirs.push(b.iter().map(|x| -x).collect());
            }
            // random combinations inside the nullspace to land in relative
            // interiors of lower-dimensional cells
            if ns.len() > 1 {
                for _ in 0..4 {
                    let mut g = vec![Rat::zero(); dim];
                    for b in &ns {
                        let cmul = crate::exactla::rq(rng.gen_range(-3..=3i64), 2);
                        for (gi, bi) in g.iter_mut().zip(b) {
                            *gi = &*gi + &cmul * bi;
                        }
                    }
                    if g.iter().any(|x| !x.is_zero()) {
                        dirs.push(g);
                    }
                }
            }
        }
        for _ in 0..extra_random {
            let g: Vec<Rat> = (0..dim)
                .map(|_| crate::exactla::rq(rng.gen_range(-4..=4i64), 2))
                .collect();
            if g.iter().any(|x| !x.is_zero()) {
                dirs.push(g);
            }
        }
        dirs
    }

    /// Strict witnesses of every nonempty sign cell of the arrangement of
    /// active rows at `z`. An independent recursion over raw sign vectors;
    /// each witness is a direction in the relative interior of one cell.
    pub fn arrangement_witnesses(c: &PolyUnion, z: &[Rat]) -> Vec<Vec<Rat>> {
        let dim = c.dim;
        let mut rows: Vec<Vec<Rat>> = Vec::new();
        for &pi in &c.containing_pieces(z) {
            let p = &c.pieces[pi];
            for ri in p.active_rows(z) {
                let r = p.a.row(ri);
                if r.iter().any(|x| !x.is_zero()) {
                    let (key, _) = canon_signed(r);
                    if !rows.contains(&key) {
                        rows.push(key);
                    }
                }
            }
        }
        let mut out = Vec::new();
        let mut sigma: Vec<i8> = Vec::new();
        fn rec(
            rows: &[Vec<Rat>],
            dim: usize,
            sigma: &mut Vec<i8>,
            out: &mut Vec<Vec<Rat>>,
        ) {
            match partial_feasible(rows, sigma, dim) {
                Ok(Some(w)) => {
                    if sigma.len() == rows.len() {
                        out.push(w);
                        return;
                    }
                }
                _ => return,
            }
            for s in [-1i8, 0, 1] {
                sigma.push(s);
                rec(rows, dim, sigma, out);
                sigma.pop();
            }
        }
        rec(&rows, dim, &mut sigma, &mut out);
        out
    }

    /// Sequential-definition membership sampler with a normal-cone cache
    /// shared across queries at the same base point.
    pub struct DirectionalOracle<'a> {
        c: &'a PolyUnion,
        z: Vec<Rat>,
        cache: std::collections::HashMap<Vec<(usize, Vec<usize>)>, HCone>,
    }

    impl<'a> DirectionalOracle<'a> {
        pub fn new(c: &'a PolyUnion, z: &[Rat]) -> Self {
            DirectionalOracle {
                c,
                z: z.to_vec(),
                cache: Default::default(),
            }
        }

        fn normal_contains(&mut self, pt: &[Rat], v: &[Rat]) -> bool {
            let key: Vec<(usize, Vec<usize>)> = self
                .c
                .containing_pieces(pt)
                .iter()
                .map(|&pi| (pi, self.c.pieces[pi].active_rows(pt)))
                .collect();
            if let Some(n) = self.cache.get(&key) {
                return n.contains(v);
            }
            let n = regular_normal_cone(self.c, pt).unwrap_or_else(|_| HCone::zero(self.c.dim));
            let hit = n.contains(v);
            self.cache.insert(key, n);
            hit
        }

        /// Is `v ∈ N_C(z; w)` per the sequential definition?
        ///
        /// Requires a conic instance at `z` (every containing piece active
        /// everywhere at `z`); the random unions used by the validation
        /// suites are built that way. The candidate `w'` must lie within a
        /// shrinking ball of `w` and in `C`, and `v` must be a regular
        /// normal at `z + t w'` for small `t`.
        pub fn membership(
            &mut self,
            w: &[Rat],
            v: &[Rat],
            dirs: &[Vec<Rat>],
            levels: std::ops::Range<u32>,
        ) -> bool {
            let z = self.z.clone();
            for k in levels {
                let eps = crate::exactla::rq(1, 1i64 << k);
                let t = crate::exactla::rq(1, 1i64 << (k + 2));
                let mut found = false;
                let base: Vec<Rat> = z.iter().zip(w).map(|(zi, wi)| zi + &t * wi).collect();
                if self.c.contains(&base) && self.normal_contains(&base, v) {
                    found = true;
                }
                if !found {
                    for g in dirs {
                        let pt: Vec<Rat> = z
                            .iter()
                            .zip(w.iter().zip(g))
                            .map(|(zi, (wi, gi))| zi + &t * &(wi + &eps * gi))
                            .collect();
                        if self.c.contains(&pt) && self.normal_contains(&pt, v) {
                            found = true;
                            break;
                        }
                    }
                }
                if !found {
                    return false;
                }
            }
            true
        }
    }
}

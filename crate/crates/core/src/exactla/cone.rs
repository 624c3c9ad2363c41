//! Polyhedral cones in H- and V-representation and exact conversions.
//!
//! `hcone_to_vcone` is a double-description pass with the combinatorial
//! adjacency test; `vcone_to_hcone` goes through the polar. Projections use
//! Fourier–Motzkin with LP-based redundancy pruning.

use super::{
    canonicalize_vec, caps, dot, lp_feasible, maximize, Constraints, ExactlaError, LpOutcome, Rat,
    RatMatrix, Result,
};
use num_traits::{One, Signed, Zero};
use std::collections::BTreeSet;

/// Closed convex polyhedral cone `{x : A x ≤ 0, E x = 0}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HCone {
    pub ineq: RatMatrix,
    pub eq: RatMatrix,
    pub dim: usize,
}

impl HCone {
    pub fn new(ineq: RatMatrix, eq: RatMatrix, dim: usize) -> Result<Self> {
        if (ineq.n_rows() > 0 && ineq.n_cols() != dim) || (eq.n_rows() > 0 && eq.n_cols() != dim) {
            return Err(ExactlaError::DimensionMismatch(
                "HCone rows must match ambient dimension".into(),
            ));
        }
        Ok(HCone { ineq, eq, dim })
    }

    /// The full space `R^dim`.
    pub fn full(dim: usize) -> Self {
        HCone {
            ineq: RatMatrix::empty(dim),
            eq: RatMatrix::empty(dim),
            dim,
        }
    }

    /// The trivial cone `{0}`.
    pub fn zero(dim: usize) -> Self {
        HCone {
            ineq: RatMatrix::empty(dim),
            eq: RatMatrix::identity(dim),
            dim,
        }
    }

    pub fn from_ineq_rows(rows: Vec<Vec<Rat>>, dim: usize) -> Result<Self> {
        Self::new(
            if rows.is_empty() {
                RatMatrix::empty(dim)
            } else {
                RatMatrix::from_rows(rows)?
            },
            RatMatrix::empty(dim),
            dim,
        )
    }

    pub fn contains(&self, x: &[Rat]) -> bool {
        x.len() == self.dim
            && self.ineq.rows_iter().all(|r| !dot(r, x).is_positive())
            && self.eq.rows_iter().all(|r| dot(r, x).is_zero())
    }

    /// Intersection of two cones in the same ambient space.
    pub fn intersect(&self, other: &HCone) -> Result<HCone> {
        if self.dim != other.dim {
            return Err(ExactlaError::DimensionMismatch(
                "intersect: ambient dimensions differ".into(),
            ));
        }
        HCone::new(
            self.ineq.vstack(&other.ineq)?,
            self.eq.vstack(&other.eq)?,
            self.dim,
        )
    }

    /// Some point with all inequality rows strictly negative (a relative
    /// interior witness), if one exists.
    pub fn strict_point(&self) -> Result<Option<Vec<Rat>>> {
        let zeros_i = vec![Rat::zero(); self.ineq.n_rows()];
        let zeros_e = vec![Rat::zero(); self.eq.n_rows()];
        lp_feasible(
            &self.ineq,
            &zeros_i,
            &RatMatrix::empty(self.dim),
            &[],
            &self.eq,
            &zeros_e,
        )
    }

    /// Drop inequality rows implied by the others (exact LP test) and
    /// duplicate rows. Equality rows are reduced to an independent set.
    pub fn pruned(&self) -> Result<HCone> {
        let mut rows: Vec<Vec<Rat>> = Vec::new();
        let mut seen = BTreeSet::new();
        for r in self.ineq.rows_iter() {
            if r.iter().all(|v| v.is_zero()) {
                continue;
            }
            let c = canonicalize_vec(r);
            let key = format!("{c:?}");
            if seen.insert(key) {
                rows.push(c);
            }
        }
        // LP prune: row a is redundant iff max a·x over the others is ≤ 0,
        // i.e. there is no point of the relaxed cone with a·x > 0.
        let mut keep: Vec<bool> = vec![true; rows.len()];
        for i in 0..rows.len() {
            let others: Vec<Vec<Rat>> = rows
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i && keep[*j])
                .map(|(_, r)| r.clone())
                .collect();
            let others_m = if others.is_empty() {
                RatMatrix::empty(self.dim)
            } else {
                RatMatrix::from_rows(others)?
            };
            let strict = RatMatrix::from_rows(vec![rows[i].iter().map(|v| -v).collect()])?;
            let zeros_o = vec![Rat::zero(); others_m.n_rows()];
            let zeros_e = vec![Rat::zero(); self.eq.n_rows()];
            // feasible point with a·x > 0 under the remaining rows?
            let w = lp_feasible(&strict, &[Rat::zero()], &others_m, &zeros_o, &self.eq, &zeros_e)?;
            if w.is_none() {
                keep[i] = false;
            }
        }
        let kept: Vec<Vec<Rat>> = rows
            .into_iter()
            .zip(&keep)
            .filter(|(_, k)| **k)
            .map(|(r, _)| r)
            .collect();
        // Equality rows: keep an independent subset.
        let mut eq_rows: Vec<Vec<Rat>> = Vec::new();
        for r in self.eq.rows_iter() {
            if r.iter().all(|v| v.is_zero()) {
                continue;
            }
            let mut cand = eq_rows.clone();
            cand.push(r.to_vec());
            let cm = RatMatrix::from_rows(cand.clone())?;
            if super::rank(&cm) == cand.len() {
                eq_rows.push(canonicalize_vec(r));
            }
        }
        HCone::new(
            if kept.is_empty() {
                RatMatrix::empty(self.dim)
            } else {
                RatMatrix::from_rows(kept)?
            },
            if eq_rows.is_empty() {
                RatMatrix::empty(self.dim)
            } else {
                RatMatrix::from_rows(eq_rows)?
            },
            self.dim,
        )
    }
}

/// Cone spanned by nonnegative combinations of `rays` plus the span of
/// `lineality`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VCone {
    pub rays: Vec<Vec<Rat>>,
    pub lineality: Vec<Vec<Rat>>,
    pub dim: usize,
}

impl VCone {
    pub fn new(rays: Vec<Vec<Rat>>, lineality: Vec<Vec<Rat>>, dim: usize) -> Result<Self> {
        if rays.iter().chain(&lineality).any(|v| v.len() != dim) {
            return Err(ExactlaError::DimensionMismatch(
                "VCone generators must match ambient dimension".into(),
            ));
        }
        let rays = rays
            .into_iter()
            .filter(|r| r.iter().any(|x| !x.is_zero()))
            .map(|r| canonicalize_vec(&r))
            .collect();
        Ok(VCone {
            rays,
            lineality,
            dim,
        })
    }

    /// `{0}`.
    pub fn zero(dim: usize) -> Self {
        VCone {
            rays: vec![],
            lineality: vec![],
            dim,
        }
    }

    /// Exact membership via LP: `x = Σ β r + Σ γ l`, `β ≥ 0`.
    pub fn contains(&self, x: &[Rat]) -> Result<bool> {
        if x.len() != self.dim {
            return Ok(false);
        }
        let k = self.rays.len();
        let l = self.lineality.len();
        if k + l == 0 {
            return Ok(x.iter().all(|v| v.is_zero()));
        }
        // Variables (β, γ): equality per coordinate, β ≥ 0.
        let mut eq_rows = Vec::with_capacity(self.dim);
        for d in 0..self.dim {
            let mut row = Vec::with_capacity(k + l);
            for r in &self.rays {
                row.push(r[d].clone());
            }
            for g in &self.lineality {
                row.push(g[d].clone());
            }
            eq_rows.push(row);
        }
        let eq = RatMatrix::from_rows(eq_rows)?;
        let mut weak_rows = Vec::new();
        for i in 0..k {
            let mut row = vec![Rat::zero(); k + l];
            row[i] = -Rat::one();
            weak_rows.push(row);
        }
        let weak = if weak_rows.is_empty() {
            RatMatrix::empty(k + l)
        } else {
            RatMatrix::from_rows(weak_rows)?
        };
        let zeros_w = vec![Rat::zero(); k];
        Ok(lp_feasible(
            &RatMatrix::empty(k + l),
            &[],
            &weak,
            &zeros_w,
            &eq,
            x,
        )?
        .is_some())
    }

    /// All generators, lineality contributing both signs.
    pub fn generators_signed(&self) -> Vec<Vec<Rat>> {
        let mut g = self.rays.clone();
        for l in &self.lineality {
            g.push(l.clone());
            g.push(l.iter().map(|x| -x).collect());
        }
        g
    }
}

struct DdRay {
    v: Vec<Rat>,
    active: BTreeSet<usize>,
}

/// Double-description conversion of an H-cone into generators.
pub fn hcone_to_vcone(c: &HCone) -> Result<VCone> {
    let cap = caps();
    let n_rows = c.ineq.n_rows() + 2 * c.eq.n_rows();
    if c.dim > cap.max_dd_dim || n_rows > cap.max_dd_rows {
        return Err(ExactlaError::Capacity(format!(
            "double description limited to dim ≤ {} and ≤ {} rows (got dim {}, {} rows)",
            cap.max_dd_dim, cap.max_dd_rows, c.dim, n_rows
        )));
    }
    // Equalities become inequality pairs.
    let mut constraints: Vec<Vec<Rat>> = c.ineq.rows_iter().map(|r| r.to_vec()).collect();
    for r in c.eq.rows_iter() {
        constraints.push(r.to_vec());
        constraints.push(r.iter().map(|x| -x).collect());
    }

    let mut lineality: Vec<Vec<Rat>> = (0..c.dim)
        .map(|i| {
            let mut v = vec![Rat::zero(); c.dim];
            v[i] = num_traits::One::one();
            v
        })
        .collect();
    let mut rays: Vec<DdRay> = Vec::new();

    for (idx, a) in constraints.iter().enumerate() {
        let lin_hits: Vec<usize> = lineality
            .iter()
            .enumerate()
            .filter(|(_, l)| !dot(a, l).is_zero())
            .map(|(i, _)| i)
            .collect();
        if let Some(&i0) = lin_hits.first() {
            // Pull one lineality generator across the halfspace: it becomes a
            // ray, the rest are projected into the hyperplane.
            let mut l0 = lineality.remove(i0);
            let mut a_l0 = dot(a, &l0);
            if a_l0.is_positive() {
                l0 = l0.iter().map(|x| -x).collect();
                a_l0 = -a_l0;
            }
            for l in lineality.iter_mut() {
                let f = dot(a, l) / &a_l0;
                if !f.is_zero() {
                    for (x, y) in l.iter_mut().zip(&l0) {
                        *x = &*x - &f * y;
                    }
                }
            }
            for r in rays.iter_mut() {
                let f = dot(a, &r.v) / &a_l0;
                if !f.is_zero() {
                    for (x, y) in r.v.iter_mut().zip(&l0) {
                        *x = &*x - &f * y;
                    }
                }
                r.v = canonicalize_vec(&r.v);
                r.active.insert(idx);
            }
            rays.push(DdRay {
                v: canonicalize_vec(&l0),
                active: (0..idx).collect(),
            });
            continue;
        }

        // Lineality is inside the hyperplane; split the rays.
        let mut neg: Vec<DdRay> = Vec::new();
        let mut zero: Vec<DdRay> = Vec::new();
        let mut pos: Vec<DdRay> = Vec::new();
        for r in rays.drain(..) {
            let s = dot(a, &r.v);
            if s.is_negative() {
                neg.push(r);
            } else if s.is_zero() {
                let mut r = r;
                r.active.insert(idx);
                zero.push(r);
            } else {
                pos.push(r);
            }
        }
        let mut new_rays: Vec<DdRay> = Vec::new();
        for (pi, p) in pos.iter().enumerate() {
            for n in neg.iter() {
                let common: BTreeSet<usize> = p.active.intersection(&n.active).copied().collect();
                // Combinatorial adjacency: no third ray's active set contains
                // the common active set.
                let adjacent = !pos
                    .iter()
                    .enumerate()
                    .filter(|(qi, _)| *qi != pi)
                    .map(|(_, q)| &q.active)
                    .chain(neg.iter().map(|q| &q.active).filter(|s| !std::ptr::eq(*s, &n.active)))
                    .chain(zero.iter().map(|q| &q.active))
                    .any(|s| common.is_subset(s));
                if !adjacent {
                    continue;
                }
                let ap = dot(a, &p.v);
                let an = dot(a, &n.v);
                let mut v = vec![Rat::zero(); c.dim];
                for d in 0..c.dim {
                    v[d] = &ap * &n.v[d] - &an * &p.v[d];
                }
                if v.iter().all(|x| x.is_zero()) {
                    continue;
                }
                let mut active = common;
                active.insert(idx);
                new_rays.push(DdRay {
                    v: canonicalize_vec(&v),
                    active,
                });
            }
        }
        rays = neg;
        rays.extend(zero);
        rays.extend(new_rays);
        if rays.len() > cap.max_patterns {
            return Err(ExactlaError::Capacity(
                "double description ray count exceeded capacity".into(),
            ));
        }
    }

    // Dedup rays.
    let mut seen = BTreeSet::new();
    let mut out_rays = Vec::new();
    for r in rays {
        let key = format!("{:?}", r.v);
        if seen.insert(key) {
            out_rays.push(r.v);
        }
    }
    VCone::new(out_rays, lineality, c.dim)
}

/// Minimal H-representation of a V-cone, via the polar.
pub fn vcone_to_hcone(v: &VCone) -> Result<HCone> {
    let polar = polar_v(v)?;
    let gen = hcone_to_vcone(&polar)?;
    HCone::new(
        if gen.rays.is_empty() {
            RatMatrix::empty(v.dim)
        } else {
            RatMatrix::from_rows(gen.rays)?
        },
        if gen.lineality.is_empty() {
            RatMatrix::empty(v.dim)
        } else {
            RatMatrix::from_rows(gen.lineality)?
        },
        v.dim,
    )
}

/// Polar cone `{y : ⟨y, x⟩ ≤ 0 ∀x ∈ K}` of a V-cone: rays become inequality
/// rows, lineality becomes equality rows.
pub fn polar_v(v: &VCone) -> Result<HCone> {
    HCone::new(
        if v.rays.is_empty() {
            RatMatrix::empty(v.dim)
        } else {
            RatMatrix::from_rows(v.rays.clone())?
        },
        if v.lineality.is_empty() {
            RatMatrix::empty(v.dim)
        } else {
            RatMatrix::from_rows(v.lineality.clone())?
        },
        v.dim,
    )
}

/// Polar of an H-cone.
pub fn polar_h(c: &HCone) -> Result<HCone> {
    let v = hcone_to_vcone(c)?;
    polar_v(&v)
}

/// Exact coordinate projection of a cone onto `coords` (in the given order),
/// by Fourier–Motzkin elimination of the remaining coordinates.
pub fn project_cone(c: &HCone, coords: &[usize]) -> Result<HCone> {
    if coords.iter().any(|&j| j >= c.dim) {
        return Err(ExactlaError::DimensionMismatch(
            "projection coordinates out of range".into(),
        ));
    }
    let keep: BTreeSet<usize> = coords.iter().copied().collect();
    let mut ineq: Vec<Vec<Rat>> = c.ineq.rows_iter().map(|r| r.to_vec()).collect();
    let mut eq: Vec<Vec<Rat>> = c.eq.rows_iter().map(|r| r.to_vec()).collect();
    let cap = caps();

    for j in (0..c.dim).rev() {
        if keep.contains(&j) {
            continue;
        }
        // Prefer Gaussian elimination through an equality row.
        if let Some(k) = eq.iter().position(|r| !r[j].is_zero()) {
            let piv_row = eq.remove(k);
            let piv = piv_row[j].clone();
            let reduce = |r: &mut Vec<Rat>| {
                if !r[j].is_zero() {
                    let f = &r[j] / &piv;
                    for (x, y) in r.iter_mut().zip(&piv_row) {
                        *x = &*x - &f * y;
                    }
                }
            };
            for r in ineq.iter_mut() {
                reduce(r);
            }
            for r in eq.iter_mut() {
                reduce(r);
            }
        } else {
            let mut neg = Vec::new();
            let mut zero = Vec::new();
            let mut pos = Vec::new();
            for r in ineq.drain(..) {
                if r[j].is_negative() {
                    neg.push(r);
                } else if r[j].is_zero() {
                    zero.push(r);
                } else {
                    pos.push(r);
                }
            }
            if pos.len() * neg.len() + zero.len() > cap.max_patterns {
                return Err(ExactlaError::Capacity(
                    "Fourier–Motzkin row blowup exceeded capacity".into(),
                ));
            }
            let mut out = zero;
            for p in &pos {
                for n in &neg {
                    let mut r = vec![Rat::zero(); c.dim];
                    for d in 0..c.dim {
                        r[d] = &p[j] * &n[d] - &n[j] * &p[d];
                    }
                    if r.iter().any(|x| !x.is_zero()) {
                        out.push(canonicalize_vec(&r));
                    }
                }
            }
            // Dedup to keep FM stable.
            let mut seen = BTreeSet::new();
            out.retain(|r| seen.insert(format!("{r:?}")));
            ineq = out;
        }
    }

    // Reindex to the kept coordinates.
    let pick = |rows: Vec<Vec<Rat>>| -> Vec<Vec<Rat>> {
        rows.into_iter()
            .map(|r| coords.iter().map(|&j| r[j].clone()).collect::<Vec<Rat>>())
            .filter(|r: &Vec<Rat>| r.iter().any(|x| !x.is_zero()))
            .collect()
    };
    let ineq = pick(ineq);
    let eq = pick(eq);
    let h = HCone::new(
        if ineq.is_empty() {
            RatMatrix::empty(coords.len())
        } else {
            RatMatrix::from_rows(ineq)?
        },
        if eq.is_empty() {
            RatMatrix::empty(coords.len())
        } else {
            RatMatrix::from_rows(eq)?
        },
        coords.len(),
    )?;
    h.pruned()
}

/// `sup ⟨c, x⟩` over an H-cone: `0` when bounded, `None` for `+∞`.
pub fn sup_over_cone(c: &HCone, obj: &[Rat]) -> Result<Option<Rat>> {
    let zeros_i = vec![Rat::zero(); c.ineq.n_rows()];
    let zeros_e = vec![Rat::zero(); c.eq.n_rows()];
    match maximize(
        obj,
        &Constraints {
            ineq: &c.ineq,
            ineq_rhs: &zeros_i,
            eq: &c.eq,
            eq_rhs: &zeros_e,
        },
    )? {
        LpOutcome::Optimal { value, .. } => Ok(Some(value)),
        LpOutcome::Unbounded => Ok(None),
        LpOutcome::Infeasible => unreachable!("a cone always contains 0"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactla::{rint, rq};

    fn m(rows: &[&[i64]]) -> RatMatrix {
        RatMatrix::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&x| rint(x)).collect())
                .collect(),
        )
        .unwrap()
    }

    fn rv(v: &[i64]) -> Vec<Rat> {
        v.iter().map(|&x| rint(x)).collect()
    }

    #[test]
    fn orthant_rays() {
        // {x ∈ R²: x ≤ 0} → rays (-1,0), (0,-1)
        let h = HCone::from_ineq_rows(vec![rv(&[1, 0]), rv(&[0, 1])], 2).unwrap();
        let v = hcone_to_vcone(&h).unwrap();
        assert!(v.lineality.is_empty());
        let mut rays = v.rays.clone();
        rays.sort();
        assert_eq!(rays, vec![rv(&[-1, 0]), rv(&[0, -1])]);
    }

    #[test]
    fn hyperplane_has_lineality() {
        // {x ∈ R²: x1 = 0} → lineality (0,1)
        let h = HCone::new(RatMatrix::empty(2), m(&[&[1, 0]]), 2).unwrap();
        let v = hcone_to_vcone(&h).unwrap();
        assert!(v.rays.is_empty());
        assert_eq!(v.lineality.len(), 1);
        assert!(v.lineality[0][0].is_zero());
    }

    #[test]
    fn wedge_extreme_rays() {
        // {-1/2 x1 + x2 ≤ 0, -1/2 x1 - x2 ≤ 0} → rays (2,1), (2,-1)
        let h = HCone::from_ineq_rows(
            vec![vec![rq(-1, 2), rint(1)], vec![rq(-1, 2), rint(-1)]],
            2,
        )
        .unwrap();
        let v = hcone_to_vcone(&h).unwrap();
        let mut rays = v.rays.clone();
        rays.sort();
        assert_eq!(rays, vec![rv(&[2, -1]), rv(&[2, 1])]);

        // Oracle: extreme rays by single-row active-set enumeration. Each
        // extreme ray of a 2D cone makes one row active.
        for row_idx in 0..2 {
            let ns = crate::exactla::nullspace(&h.ineq.select_rows(&[row_idx]));
            assert_eq!(ns.len(), 1);
            let dir = &ns[0];
            let hit = |d: &Vec<Rat>| h.contains(d) && v.rays.iter().any(|r| {
                // same ray up to positive scale after canonicalization
                canonicalize_vec(d) == *r
            });
            assert!(hit(dir) || hit(&dir.iter().map(|x| -x).collect()));
        }
    }

    #[test]
    fn polar_of_orthant_and_full_space() {
        let neg = HCone::from_ineq_rows(vec![rv(&[1, 0]), rv(&[0, 1])], 2).unwrap();
        let p = polar_h(&neg).unwrap();
        // R²₋ polar = R²₊
        for x in [rv(&[1, 0]), rv(&[0, 1]), rv(&[2, 3])] {
            assert!(p.contains(&x));
        }
        assert!(!p.contains(&rv(&[-1, 0])));

        let full = HCone::full(2);
        let p0 = polar_h(&full).unwrap();
        assert!(p0.contains(&rv(&[0, 0])));
        assert!(!p0.contains(&rv(&[1, 0])));
    }

    #[test]
    fn polar_of_wedge_is_transposed_rays() {
        let v = VCone::new(vec![rv(&[2, 1]), rv(&[2, -1])], vec![], 2).unwrap();
        let p = polar_v(&v).unwrap();
        // {v: 2v1 + v2 ≤ 0, 2v1 - v2 ≤ 0}
        assert!(p.contains(&rv(&[-1, 0])));
        assert!(p.contains(&rv(&[-1, 1])));
        assert!(!p.contains(&rv(&[1, 0])));
    }

    #[test]
    fn double_polar_is_identity_on_membership() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..30 {
            let dim = rng.gen_range(2..=3usize);
            let nrows = rng.gen_range(1..=4usize);
            let rows: Vec<Vec<Rat>> = (0..nrows)
                .map(|_| (0..dim).map(|_| rint(rng.gen_range(-2..=2))).collect())
                .collect();
            let k = HCone::from_ineq_rows(rows, dim).unwrap();
            let pp = polar_h(&polar_h(&k).unwrap()).unwrap();
            // Membership agreement on rays of K and random points.
            let vk = hcone_to_vcone(&k).unwrap();
            for g in vk.generators_signed() {
                assert!(pp.contains(&g), "ray lost under double polar");
            }
            for _ in 0..20 {
                let x: Vec<Rat> = (0..dim).map(|_| rq(rng.gen_range(-6..=6), 2)).collect();
                assert_eq!(k.contains(&x), pp.contains(&x));
            }
        }
    }

    #[test]
    fn hv_round_trip_preserves_membership() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let dim = rng.gen_range(2..=3usize);
            let nrows = rng.gen_range(1..=4usize);
            let rows: Vec<Vec<Rat>> = (0..nrows)
                .map(|_| (0..dim).map(|_| rint(rng.gen_range(-2..=2))).collect())
                .collect();
            let k = HCone::from_ineq_rows(rows, dim).unwrap();
            let v = hcone_to_vcone(&k).unwrap();
            let k2 = vcone_to_hcone(&v).unwrap();
            for _ in 0..50 {
                let x: Vec<Rat> = (0..dim).map(|_| rq(rng.gen_range(-8..=8), 2)).collect();
                let a = k.contains(&x);
                let b = k2.contains(&x);
                let c = v.contains(&x).unwrap();
                assert_eq!(a, b, "H → V → H changed membership");
                assert_eq!(a, c, "H vs V membership disagree");
            }
        }
    }

    #[test]
    fn projection_examples() {
        // {(v,u) ∈ R²: v + u ≤ 0} onto v → all of R
        let h = HCone::from_ineq_rows(vec![rv(&[1, 1])], 2).unwrap();
        let p = project_cone(&h, &[0]).unwrap();
        assert!(p.contains(&rv(&[5])));
        assert!(p.contains(&rv(&[-5])));

        // {(v,u): u = 0, v ≤ 0} onto v → R₋
        let h2 = HCone::new(m(&[&[1, 0]]), m(&[&[0, 1]]), 2).unwrap();
        let p2 = project_cone(&h2, &[0]).unwrap();
        assert!(p2.contains(&rv(&[-3])));
        assert!(!p2.contains(&rv(&[1])));
    }

    #[test]
    fn projection_matches_generator_sampling() {
        // {(v,u) ∈ R³×R²: v + G u ∈ R³₋} with G the decision Jacobian rows
        // (0,-1), (0,1), (1,0); projection onto v is {v: v1 + v2 ≤ 0}.
        let g_rows = [rv(&[0, -1]), rv(&[0, 1]), rv(&[1, 0])];
        let mut rows = Vec::new();
        for (i, gr) in g_rows.iter().enumerate() {
            let mut r = vec![Rat::zero(); 5];
            r[i] = rint(1);
            r[3] = gr[0].clone();
            r[4] = gr[1].clone();
            rows.push(r);
        }
        let h = HCone::from_ineq_rows(rows, 5).unwrap();
        let p = project_cone(&h, &[0, 1, 2]).unwrap();
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let v: Vec<Rat> = (0..3).map(|_| rq(rng.gen_range(-8..=8), 2)).collect();
            let expect = !(v[0].clone() + &v[1]).is_positive();
            assert_eq!(p.contains(&v), expect);
        }
    }
}

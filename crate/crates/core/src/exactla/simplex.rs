//! Two-phase exact rational simplex with Bland's rule.
//!
//! Free variables are split into nonnegative pairs, inequalities get slacks,
//! and phase 1 minimizes the sum of artificials. All pivoting is exact, so
//! feasibility and optimality decisions carry no tolerances. Strict
//! inequalities are handled by the callers through a single auxiliary slack
//! that is maximized; a system with strict rows is feasible iff the optimal
//! slack is positive.

use super::{ExactlaError, Rat, RatMatrix, Result};
use num_traits::{One, Signed, Zero};

/// Constraint block `A x ≤ b`, `E x = d` over free variables.
#[derive(Debug, Clone, Copy)]
pub struct Constraints<'a> {
    pub ineq: &'a RatMatrix,
    pub ineq_rhs: &'a [Rat],
    pub eq: &'a RatMatrix,
    pub eq_rhs: &'a [Rat],
}

impl<'a> Constraints<'a> {
    pub fn n_vars(&self) -> usize {
        if self.ineq.n_rows() > 0 {
            self.ineq.n_cols()
        } else {
            self.eq.n_cols()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.ineq.n_rows() != self.ineq_rhs.len() || self.eq.n_rows() != self.eq_rhs.len() {
            return Err(ExactlaError::DimensionMismatch(
                "constraint rhs length mismatch".into(),
            ));
        }
        if self.ineq.n_rows() > 0 && self.eq.n_rows() > 0 && self.ineq.n_cols() != self.eq.n_cols()
        {
            return Err(ExactlaError::DimensionMismatch(
                "ineq/eq variable counts differ".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LpOutcome {
    Infeasible,
    Optimal { x: Vec<Rat>, value: Rat },
    Unbounded,
}

/// Farkas certificate of infeasibility of `A x ≤ b, E x = d`:
/// `lam ≥ 0`, `lamᵀA + muᵀE = 0`, `lamᵀb + muᵀd < 0`.
#[derive(Debug, Clone)]
pub struct FarkasCertificate {
    pub lam: Vec<Rat>,
    pub mu: Vec<Rat>,
}

impl FarkasCertificate {
    /// Re-check the certificate against the system it refutes.
    pub fn validates(&self, cons: &Constraints) -> bool {
        if self.lam.iter().any(|l| l.is_negative()) {
            return false;
        }
        let n = cons.n_vars();
        let mut comb = vec![Rat::zero(); n];
        for (i, l) in self.lam.iter().enumerate() {
            for j in 0..n {
                comb[j] = &comb[j] + l * cons.ineq.get(i, j);
            }
        }
        for (i, m) in self.mu.iter().enumerate() {
            for j in 0..n {
                comb[j] = &comb[j] + m * cons.eq.get(i, j);
            }
        }
        if comb.iter().any(|c| !c.is_zero()) {
            return false;
        }
        let rhs = super::dot(&self.lam, cons.ineq_rhs) + super::dot(&self.mu, cons.eq_rhs);
        rhs.is_negative()
    }
}

struct Tableau {
    // m rows of length n_total + 1 (rhs last).
    rows: Vec<Vec<Rat>>,
    obj: Vec<Rat>, // reduced costs, length n_total + 1 (last = -objective value)
    basis: Vec<usize>,
    n_total: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let piv = self.rows[r][c].clone();
        for v in self.rows[r].iter_mut() {
            *v = &*v / &piv;
        }
        for i in 0..self.rows.len() {
            if i != r && !self.rows[i][c].is_zero() {
                let f = self.rows[i][c].clone();
                for j in 0..=self.n_total {
                    let v = &self.rows[i][j] - &f * &self.rows[r][j];
                    self.rows[i][j] = v;
                }
            }
        }
        if !self.obj[c].is_zero() {
            let f = self.obj[c].clone();
            for j in 0..=self.n_total {
                let v = &self.obj[j] - &f * &self.rows[r][j];
                self.obj[j] = v;
            }
        }
        self.basis[r] = c;
    }

    /// Install reduced costs for cost vector `c` (minimization) given the
    /// current basis.
    fn set_costs(&mut self, c: &[Rat]) {
        self.obj = c.to_vec();
        self.obj.push(Rat::zero());
        for r in 0..self.rows.len() {
            let cb = c[self.basis[r]].clone();
            if !cb.is_zero() {
                for j in 0..=self.n_total {
                    let v = &self.obj[j] - &cb * &self.rows[r][j];
                    self.obj[j] = v;
                }
            }
        }
    }

    /// Minimize with Bland's rule; columns in `banned` never enter.
    /// Returns false if unbounded.
    fn run(&mut self, banned: &[bool]) -> bool {
        loop {
            // Bland: smallest-index column with negative reduced cost.
            let entering = (0..self.n_total)
                .find(|&j| !banned[j] && self.obj[j].is_negative());
            let Some(c) = entering else {
                return true;
            };
            let mut best: Option<(usize, Rat)> = None;
            for r in 0..self.rows.len() {
                if self.rows[r][c].is_positive() {
                    let ratio = &self.rows[r][self.n_total] / &self.rows[r][c];
                    let better = match &best {
                        None => true,
                        Some((br, bratio)) => {
                            ratio < *bratio
                                || (ratio == *bratio && self.basis[r] < self.basis[*br])
                        }
                    };
                    if better {
                        best = Some((r, ratio));
                    }
                }
            }
            let Some((r, _)) = best else {
                return false;
            };
            self.pivot(r, c);
        }
    }
}

/// Exact maximization of `objᵀ x` subject to `cons`; `x` free.
pub fn maximize(obj: &[Rat], cons: &Constraints) -> Result<LpOutcome> {
    Ok(solve_inner(obj, cons)?.0)
}

fn solve_inner(obj: &[Rat], cons: &Constraints) -> Result<(LpOutcome, Option<FarkasCertificate>)> {
    cons.validate()?;
    let n = cons.n_vars();
    if obj.len() != n {
        return Err(ExactlaError::DimensionMismatch(
            "objective length mismatch".into(),
        ));
    }
    let m_ineq = cons.ineq.n_rows();
    let m_eq = cons.eq.n_rows();
    let m = m_ineq + m_eq;

    if m == 0 {
        if obj.iter().all(|c| c.is_zero()) {
            return Ok((
                LpOutcome::Optimal {
                    x: vec![Rat::zero(); n],
                    value: Rat::zero(),
                },
                None,
            ));
        }
        return Ok((LpOutcome::Unbounded, None));
    }

    // Columns: x+ (n), x- (n), slacks (m_ineq), artificials (m).
    let n_split = 2 * n;
    let n_slack = m_ineq;
    let n_total = n_split + n_slack + m;
    let art0 = n_split + n_slack;

    let mut rows: Vec<Vec<Rat>> = Vec::with_capacity(m);
    // Sign applied to each row to make rhs nonnegative; remembered to map the
    // phase-1 dual back to a Farkas certificate.
    let mut sign: Vec<Rat> = Vec::with_capacity(m);
    let push_row = |a: &[Rat], rhs: &Rat, slack_idx: Option<usize>, rows: &mut Vec<Vec<Rat>>, sign: &mut Vec<Rat>| {
        let s: Rat = if rhs.is_negative() {
            -Rat::one()
        } else {
            Rat::one()
        };
        let mut row = vec![Rat::zero(); n_total + 1];
        for j in 0..n {
            let v = &s * &a[j];
            row[j] = v.clone();
            row[n + j] = -v;
        }
        if let Some(k) = slack_idx {
            row[n_split + k] = s.clone();
        }
        let r_idx = rows.len();
        row[art0 + r_idx] = Rat::one();
        row[n_total] = &s * rhs;
        rows.push(row);
        sign.push(s);
    };
    for i in 0..m_ineq {
        push_row(cons.ineq.row(i), &cons.ineq_rhs[i], Some(i), &mut rows, &mut sign);
    }
    for i in 0..m_eq {
        push_row(cons.eq.row(i), &cons.eq_rhs[i], None, &mut rows, &mut sign);
    }

    let basis: Vec<usize> = (0..m).map(|i| art0 + i).collect();
    let mut t = Tableau {
        rows,
        obj: Vec::new(),
        basis,
        n_total,
    };

    // Phase 1: minimize sum of artificials.
    let mut c1 = vec![Rat::zero(); n_total];
    for j in art0..n_total {
        c1[j] = Rat::one();
    }
    t.set_costs(&c1);
    let banned1 = vec![false; n_total];
    let ok = t.run(&banned1);
    debug_assert!(ok, "phase 1 is always bounded");
    let phase1_val = -t.obj[n_total].clone();
    if phase1_val.is_positive() {
        // Infeasible; extract the Farkas certificate from the phase-1 dual:
        // y_i = 1 - reduced_cost(artificial_i), certificate rows get the sign
        // normalization undone and are negated to the standard form.
        let mut lam = Vec::with_capacity(m_ineq);
        let mut mu = Vec::with_capacity(m_eq);
        for i in 0..m {
            let y_i = Rat::one() - &t.obj[art0 + i];
            let v = -(&sign[i] * &y_i);
            if i < m_ineq {
                lam.push(v);
            } else {
                mu.push(v);
            }
        }
        let cert = FarkasCertificate { lam, mu };
        return Ok((LpOutcome::Infeasible, Some(cert)));
    }

    // Drive artificials out of the basis; rows that cannot pivot are
    // redundant and removed.
    let mut r = 0;
    while r < t.rows.len() {
        if t.basis[r] >= art0 {
            let col = (0..art0).find(|&j| !t.rows[r][j].is_zero());
            match col {
                Some(c) => t.pivot(r, c),
                None => {
                    t.rows.remove(r);
                    t.basis.remove(r);
                    continue;
                }
            }
        }
        r += 1;
    }

    // Phase 2: minimize -obj over (x+, x-) columns; artificials banned.
    let mut c2 = vec![Rat::zero(); n_total];
    for j in 0..n {
        c2[j] = -obj[j].clone();
        c2[n + j] = obj[j].clone();
    }
    t.set_costs(&c2);
    let mut banned2 = vec![false; n_total];
    for b in banned2.iter_mut().skip(art0) {
        *b = true;
    }
    if !t.run(&banned2) {
        return Ok((LpOutcome::Unbounded, None));
    }
    let mut x = vec![Rat::zero(); n];
    for (r, &b) in t.basis.iter().enumerate() {
        let val = t.rows[r][n_total].clone();
        if b < n {
            x[b] = &x[b] + &val;
        } else if b < n_split {
            x[b - n] = &x[b - n] - &val;
        }
    }
    let value = super::dot(obj, &x);
    Ok((LpOutcome::Optimal { x, value }, None))
}

/// Result of a feasibility query with strict rows.
#[derive(Debug, Clone)]
pub enum Feasibility {
    /// A point satisfying all strict, weak, and equality constraints.
    Witness(Vec<Rat>),
    /// Even the weakened system (strict relaxed to ≤) is infeasible.
    WeakInfeasible(FarkasCertificate),
    /// The weak system is feasible but no point satisfies the strict rows;
    /// the maximal common slack is given (≤ 0).
    StrictInfeasible { max_slack: Rat },
}

/// Decide feasibility of `S x < s_rhs`, `A x ≤ b`, `E x = d` exactly and
/// return a rational witness when feasible.
///
/// Strict rows are handled by maximizing one auxiliary slack `δ ≤ 1` with
/// `S x + δ ≤ s_rhs`; the system is feasible iff the optimum is positive.
pub fn lp_feasible(
    strict: &RatMatrix,
    strict_rhs: &[Rat],
    weak: &RatMatrix,
    weak_rhs: &[Rat],
    eq: &RatMatrix,
    eq_rhs: &[Rat],
) -> Result<Option<Vec<Rat>>> {
    match lp_feasible_or_certificate(strict, strict_rhs, weak, weak_rhs, eq, eq_rhs)? {
        Feasibility::Witness(x) => Ok(Some(x)),
        _ => Ok(None),
    }
}

/// As [`lp_feasible`], with an infeasibility certificate on failure.
pub fn lp_feasible_or_certificate(
    strict: &RatMatrix,
    strict_rhs: &[Rat],
    weak: &RatMatrix,
    weak_rhs: &[Rat],
    eq: &RatMatrix,
    eq_rhs: &[Rat],
) -> Result<Feasibility> {
    if strict.n_rows() != strict_rhs.len() {
        return Err(ExactlaError::DimensionMismatch(
            "strict rhs length mismatch".into(),
        ));
    }
    let n = if strict.n_rows() > 0 {
        strict.n_cols()
    } else if weak.n_rows() > 0 {
        weak.n_cols()
    } else {
        eq.n_cols()
    };

    if strict.n_rows() == 0 {
        let cons = Constraints {
            ineq: weak,
            ineq_rhs: weak_rhs,
            eq,
            eq_rhs,
        };
        return match solve_inner(&vec![Rat::zero(); n], &cons)? {
            (LpOutcome::Optimal { x, .. }, _) => Ok(Feasibility::Witness(x)),
            (LpOutcome::Infeasible, cert) => {
                Ok(Feasibility::WeakInfeasible(cert.expect("certificate")))
            }
            (LpOutcome::Unbounded, _) => unreachable!("zero objective cannot be unbounded"),
        };
    }

    // Lift to (x, δ).
    let mut ineq_rows: Vec<Vec<Rat>> = Vec::new();
    let mut ineq_rhs_v: Vec<Rat> = Vec::new();
    for i in 0..strict.n_rows() {
        let mut row: Vec<Rat> = strict.row(i).to_vec();
        row.push(Rat::one());
        ineq_rows.push(row);
        ineq_rhs_v.push(strict_rhs[i].clone());
    }
    for i in 0..weak.n_rows() {
        let mut row: Vec<Rat> = weak.row(i).to_vec();
        row.push(Rat::zero());
        ineq_rows.push(row);
        ineq_rhs_v.push(weak_rhs[i].clone());
    }
    // δ ≤ 1
    let mut cap = vec![Rat::zero(); n];
    cap.push(Rat::one());
    ineq_rows.push(cap);
    ineq_rhs_v.push(Rat::one());

    let mut eq_rows: Vec<Vec<Rat>> = Vec::new();
    for i in 0..eq.n_rows() {
        let mut row: Vec<Rat> = eq.row(i).to_vec();
        row.push(Rat::zero());
        eq_rows.push(row);
    }
    let ineq_m = RatMatrix::from_rows(ineq_rows)?;
    let eq_m = if eq_rows.is_empty() {
        RatMatrix::empty(n + 1)
    } else {
        RatMatrix::from_rows(eq_rows)?
    };
    let mut obj = vec![Rat::zero(); n];
    obj.push(Rat::one());
    let cons = Constraints {
        ineq: &ineq_m,
        ineq_rhs: &ineq_rhs_v,
        eq: &eq_m,
        eq_rhs,
    };
    match solve_inner(&obj, &cons)? {
        (LpOutcome::Optimal { x, value }, _) => {
            if value.is_positive() {
                Ok(Feasibility::Witness(x[..n].to_vec()))
            } else {
                Ok(Feasibility::StrictInfeasible { max_slack: value })
            }
        }
        (LpOutcome::Infeasible, cert) => Ok(Feasibility::WeakInfeasible(cert.expect("certificate"))),
        (LpOutcome::Unbounded, _) => unreachable!("slack objective is capped at 1"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactla::{rint, rq, rzero};

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
    fn maximize_simple_box() {
        // max x1 + x2 s.t. x1 ≤ 2, x2 ≤ 3, -x1 ≤ 0, -x2 ≤ 0
        let ineq = m(&[&[1, 0], &[0, 1], &[-1, 0], &[0, -1]]);
        let out = maximize(
            &rv(&[1, 1]),
            &Constraints {
                ineq: &ineq,
                ineq_rhs: &rv(&[2, 3, 0, 0]),
                eq: &RatMatrix::empty(2),
                eq_rhs: &[],
            },
        )
        .unwrap();
        match out {
            LpOutcome::Optimal { value, .. } => assert_eq!(value, rint(5)),
            other => panic!("unexpected outcome {other:?}"),
        }
    }

    #[test]
    fn unbounded_detected() {
        let ineq = m(&[&[-1, 0]]);
        let out = maximize(
            &rv(&[1, 0]),
            &Constraints {
                ineq: &ineq,
                ineq_rhs: &rv(&[0]),
                eq: &RatMatrix::empty(2),
                eq_rhs: &[],
            },
        )
        .unwrap();
        assert_eq!(out, LpOutcome::Unbounded);
    }

    #[test]
    fn symmetric_system_witness() {
        // λ ≥ 0, λ1 - λ2 = 0, λ1 + λ2 = 1 → witness (1/2, 1/2)
        let weak = m(&[&[-1, 0], &[0, -1]]);
        let eq = m(&[&[1, -1], &[1, 1]]);
        let w = lp_feasible(
            &RatMatrix::empty(2),
            &[],
            &weak,
            &rv(&[0, 0]),
            &eq,
            &[rzero(), rint(1)],
        )
        .unwrap()
        .expect("feasible");
        assert_eq!(w, vec![rq(1, 2), rq(1, 2)]);
    }

    #[test]
    fn empty_box_infeasible_with_certificate() {
        // x ≥ 0 and x ≤ -1
        let weak = m(&[&[-1], &[1]]);
        let out = lp_feasible_or_certificate(
            &RatMatrix::empty(1),
            &[],
            &weak,
            &[rzero(), rint(-1)],
            &RatMatrix::empty(1),
            &[],
        )
        .unwrap();
        match out {
            Feasibility::WeakInfeasible(cert) => {
                let cons = Constraints {
                    ineq: &weak,
                    ineq_rhs: &[rzero(), rint(-1)],
                    eq: &RatMatrix::empty(1),
                    eq_rhs: &[],
                };
                assert!(cert.validates(&cons));
            }
            other => panic!("expected weak infeasibility, got {other:?}"),
        }
    }

    #[test]
    fn strict_row_handled_by_slack() {
        // λ ∈ R³, λ ≥ 0, λ3 = 0, -λ1 + λ2 = 0, λ1 > 0; the MFCQ-failure
        // witness shape (t, t, 0), t > 0.
        let weak = m(&[&[-1, 0, 0], &[0, -1, 0], &[0, 0, -1]]);
        let eq = m(&[&[0, 0, 1], &[-1, 1, 0]]);
        let strict = m(&[&[-1, 0, 0]]);
        let w = lp_feasible(
            &strict,
            &rv(&[0]),
            &weak,
            &rv(&[0, 0, 0]),
            &eq,
            &rv(&[0, 0]),
        )
        .unwrap()
        .expect("feasible");
        assert!(w[0].is_positive());
        assert_eq!(w[0], w[1]);
        assert!(w[2].is_zero());
    }

    #[test]
    fn strictly_infeasible_on_boundary_only() {
        // x ≤ 0 and x > 0 cannot hold together.
        let weak = m(&[&[1]]);
        let strict = m(&[&[-1]]);
        let out = lp_feasible_or_certificate(
            &strict,
            &rv(&[0]),
            &weak,
            &rv(&[0]),
            &RatMatrix::empty(1),
            &[],
        )
        .unwrap();
        match out {
            Feasibility::StrictInfeasible { max_slack } => assert!(!max_slack.is_positive()),
            other => panic!("expected strict infeasibility, got {other:?}"),
        }
    }

    /// Brute-force rational grid oracle for small feasibility instances.
    fn grid_feasible(
        strict: &RatMatrix,
        strict_rhs: &[Rat],
        weak: &RatMatrix,
        weak_rhs: &[Rat],
        eq: &RatMatrix,
        eq_rhs: &[Rat],
        n: usize,
    ) -> bool {
        // denominators ≤ 2, numerators in [-4, 4]
        let vals: Vec<Rat> = (-8..=8).map(|k| rq(k, 2)).collect();
        let mut idx = vec![0usize; n];
        loop {
            let x: Vec<Rat> = idx.iter().map(|&i| vals[i].clone()).collect();
            let ok_s = (0..strict.n_rows())
                .all(|i| crate::exactla::dot(strict.row(i), &x) < strict_rhs[i]);
            let ok_w = (0..weak.n_rows())
                .all(|i| crate::exactla::dot(weak.row(i), &x) <= weak_rhs[i]);
            let ok_e =
                (0..eq.n_rows()).all(|i| crate::exactla::dot(eq.row(i), &x) == eq_rhs[i]);
            if ok_s && ok_w && ok_e {
                return true;
            }
            let mut k = 0;
            loop {
                if k == n {
                    return false;
                }
                idx[k] += 1;
                if idx[k] < vals.len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }

    #[test]
    fn agrees_with_grid_oracle_on_small_instances() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..60 {
            let n = rng.gen_range(1..=3usize);
            let n_w = rng.gen_range(0..=3usize);
            let n_e = rng.gen_range(0..=1usize);
            let n_s = rng.gen_range(0..=1usize);
            let mut mk = |rows: usize| -> (RatMatrix, Vec<Rat>) {
                let mut rr = Vec::new();
                let mut rhs = Vec::new();
                for _ in 0..rows {
                    rr.push((0..n).map(|_| rint(rng.gen_range(-2..=2))).collect());
                    rhs.push(rint(rng.gen_range(-2..=2)));
                }
                (
                    if rr.is_empty() {
                        RatMatrix::empty(n)
                    } else {
                        RatMatrix::from_rows(rr).unwrap()
                    },
                    rhs,
                )
            };
            let (sw, sr) = mk(n_s);
            let (ww, wr) = mk(n_w);
            let (ew, er) = mk(n_e);
            let lp = lp_feasible(&sw, &sr, &ww, &wr, &ew, &er).unwrap();
            let grid = grid_feasible(&sw, &sr, &ww, &wr, &ew, &er, n);
            if let Some(w) = &lp {
                // Witness must satisfy the system exactly.
                assert!((0..sw.n_rows()).all(|i| crate::exactla::dot(sw.row(i), w) < sr[i]));
                assert!((0..ww.n_rows()).all(|i| crate::exactla::dot(ww.row(i), w) <= wr[i]));
                assert!((0..ew.n_rows()).all(|i| crate::exactla::dot(ew.row(i), w) == er[i]));
            }
            // The grid only covers a bounded window; a grid hit must imply LP
            // feasibility, and LP infeasibility must imply no grid hit.
            if grid {
                assert!(lp.is_some(), "grid found a point the LP missed");
            }
        }
    }
}

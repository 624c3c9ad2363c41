//! Floating-point sampling estimators: empirical stability modulus,
//! parametric solvability, bounded-multiplier modulus, Lipschitz-like
//! modulus, and counterexample search.
//!
//! Sampling is seeded and sequential, so identical schedules produce
//! bit-identical estimates. Distances are computed exactly whenever the
//! system is affine in the decision variable (sample points are converted
//! to rationals, which is exact for `f64`); otherwise multi-start descent
//! yields upper bounds on distances and the reported ratios are lower
//! bounds on the modulus, which every such report notes.

use crate::exactla::{rat_from_f64, to_f64, Rat, RatMatrix};
use crate::funcexpr::{EvalPoint, FuncError, FuncVec, VarKind, Wrt};
use crate::order1::{classify_trend, Grade, Trend, Verdict, Witness};
use crate::polycal::{least_norm_point, limiting_normal_cone, project_point, PolycalError};
use crate::sysmodel::{ConstraintSystem, SysError};
use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, thiserror::Error)]
pub enum ProbeError {
    #[error("sampling budget exhausted: {0}")]
    Budget(String),
    #[error(transparent)]
    Polycal(#[from] PolycalError),
    #[error(transparent)]
    Sys(#[from] SysError),
    #[error(transparent)]
    Func(#[from] FuncError),
    #[error(transparent)]
    Exact(#[from] crate::exactla::ExactlaError),
}

pub type Result<T> = std::result::Result<T, ProbeError>;

/// Geometric radius schedule with a fixed sample count per radius.
#[derive(Debug, Clone)]
pub struct SampleSchedule {
    pub r0: f64,
    pub factor: f64,
    pub count: usize,
    pub samples_per_radius: usize,
    pub seed: u64,
}

impl Default for SampleSchedule {
    fn default() -> Self {
        SampleSchedule {
            r0: 0.5,
            factor: 0.5,
            count: 4,
            samples_per_radius: 120,
            seed: 42,
        }
    }
}

impl SampleSchedule {
    pub fn radii(&self) -> Vec<f64> {
        (0..self.count)
            .map(|k| self.r0 * self.factor.powi(k as i32))
            .collect()
    }
}

/// A sampled modulus estimate across shrinking radii.
#[derive(Debug, Clone)]
pub struct ModulusEstimate {
    pub sup_ratio_per_radius: Vec<f64>,
    pub trend: Trend,
    /// The pair achieving the overall sup.
    pub witness: Option<(Vec<f64>, Vec<f64>)>,
    pub witness_ratio: f64,
    pub notes: Vec<String>,
}

impl ModulusEstimate {
    pub fn overall(&self) -> f64 {
        self.sup_ratio_per_radius
            .iter()
            .copied()
            .fold(0.0, f64::max)
    }
}

/// Snap samples to a dyadic grid before exact conversion; keeps the
/// rationals small so the exact projections downstream stay fast.
fn snap(x: f64) -> f64 {
    (x * 65536.0).round() / 65536.0
}

fn rationalize(v: &[f64]) -> Vec<Rat> {
    v.iter()
        .map(|&x| rat_from_f64(snap(x)).expect("finite sample"))
        .collect()
}

/// Exact check for affine decision dependence, by evaluating all decision
/// second derivatives at a few rational points.
pub fn is_affine_in_decisions(f: &FuncVec) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(1729);
    for _ in 0..3 {
        let pt = EvalPoint::new(
            (0..f.param_dim)
                .map(|_| crate::exactla::rq(rng.gen_range(-8..=8i64), 8))
                .collect(),
            (0..f.decision_dim)
                .map(|_| crate::exactla::rq(rng.gen_range(-8..=8i64), 8))
                .collect(),
        );
        for comp in &f.components {
            for a in 0..f.decision_dim {
                let da = comp.derivative(VarKind::Decision, a);
                for b in 0..f.decision_dim {
                    let dab = da.derivative(VarKind::Decision, b);
                    match dab.eval(&pt) {
                        Ok(s) => {
                            if s.to_f64().abs() > 1e-12 {
                                return false;
                            }
                        }
                        Err(_) => return false,
                    }
                }
            }
        }
    }
    true
}

/// Exact distance from `x` to `Γ(p) = {ξ : g(p, ξ) ∈ C}` for systems affine
/// in the decision variable; `None` when `Γ(p)` is empty.
fn exact_gamma_distance(
    sys: &ConstraintSystem,
    p: &[Rat],
    x: &[Rat],
) -> Result<Option<(Vec<Rat>, Rat)>> {
    let n = sys.g.decision_dim;
    let pt0 = EvalPoint::new(p.to_vec(), vec![Rat::zero(); n]);
    let g0 = sys.g.eval_exact(&pt0)?;
    let jx = sys.g.jacobian(&pt0, Wrt::Decision)?;
    let mut best: Option<(Vec<Rat>, Rat)> = None;
    for piece in &sys.c.pieces {
        // A_c (g0 + J ξ) ≤ b_c
        let rows: Vec<Vec<Rat>> = (0..piece.a.n_rows())
            .map(|i| jx.transpose_vec(piece.a.row(i)))
            .collect::<std::result::Result<_, _>>()?;
        let rhs: Vec<Rat> = (0..piece.a.n_rows())
            .map(|i| &piece.b[i] - &crate::exactla::dot(piece.a.row(i), &g0))
            .collect();
        let am = if rows.is_empty() {
            RatMatrix::empty(n)
        } else {
            RatMatrix::from_rows(rows)?
        };
        if let Some(c) = least_norm_point(&am, &rhs, &RatMatrix::empty(n), &[], x)? {
            if best.as_ref().map_or(true, |(_, bd)| c.1 < *bd) {
                best = Some(c);
            }
        }
    }
    Ok(best)
}

/// Multi-start descent toward feasibility; returns a feasible point near the
/// start if found. Upper-bounds the distance for nonaffine systems.
fn descent_feasible_point(
    sys: &ConstraintSystem,
    p: &[Rat],
    x_from: &[f64],
    rng: &mut ChaCha8Rng,
    spread: f64,
) -> Option<Vec<f64>> {
    let n = sys.g.decision_dim;
    let pf: Vec<f64> = p.iter().map(to_f64).collect();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for start in 0..8 {
        let mut xi: Vec<f64> = if start == 0 {
            x_from.to_vec()
        } else {
            x_from
                .iter()
                .map(|&v| v + rng.gen_range(-spread..spread))
                .collect()
        };
        for _ in 0..25 {
            let pt = crate::funcexpr::EvalPointF {
                params: pf.clone(),
                decisions: xi.clone(),
                multipliers: vec![],
            };
            let Ok(y) = sys.g.eval_f64(&pt) else { break };
            let yr = rationalize(&y);
            let Ok((proj, d2)) = project_point(&sys.c, &yr) else {
                break;
            };
            if to_f64(&d2) < 1e-22 {
                break;
            }
            let resid: Vec<f64> = y
                .iter()
                .zip(proj.iter().map(to_f64))
                .map(|(a, b)| a - b)
                .collect();
            let Ok(j) = sys.g.jacobian_f64(&pt, Wrt::Decision) else {
                break;
            };
            // Gauss–Newton step on the residual
            let l = resid.len();
            let mut jt_j = vec![vec![0.0; n]; n];
            let mut jt_r = vec![0.0; n];
            for a in 0..n {
                for b in 0..n {
                    jt_j[a][b] = (0..l).map(|i| j[i][a] * j[i][b]).sum();
                }
                jt_j[a][a] += 1e-9;
                jt_r[a] = (0..l).map(|i| j[i][a] * resid[i]).sum();
            }
            // solve the small system
            let mut aug: Vec<Vec<f64>> = jt_j
                .iter()
                .zip(&jt_r)
                .map(|(r, &b)| {
                    let mut row = r.clone();
                    row.push(b);
                    row
                })
                .collect();
            let mut ok = true;
            for c in 0..n {
                let piv = (c..n)
                    .max_by(|&i, &k| aug[i][c].abs().partial_cmp(&aug[k][c].abs()).unwrap());
                let Some(pv) = piv else {
                    ok = false;
                    break;
                };
                if aug[pv][c].abs() < 1e-14 {
                    ok = false;
                    break;
                }
                aug.swap(c, pv);
                for i in 0..n {
                    if i != c {
                        let f = aug[i][c] / aug[c][c];
                        for jx in c..=n {
                            aug[i][jx] -= f * aug[c][jx];
                        }
                    }
                }
            }
            if !ok {
                break;
            }
            for a in 0..n {
                xi[a] -= aug[a][n] / aug[a][a];
            }
        }
        // feasibility check
        let pt = crate::funcexpr::EvalPointF {
            params: pf.clone(),
            decisions: xi.clone(),
            multipliers: vec![],
        };
        if let Ok(y) = sys.g.eval_f64(&pt) {
            let yr = rationalize(&y);
            if let Ok((_, d2)) = project_point(&sys.c, &yr) {
                if to_f64(&d2).sqrt() < 1e-9 {
                    let dist: f64 = xi
                        .iter()
                        .zip(x_from)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt();
                    if best.as_ref().map_or(true, |(bd, _)| dist < *bd) {
                        best = Some((dist, xi.clone()));
                    }
                }
            }
        }
    }
    best.map(|(_, x)| x)
}

fn sample_param(
    sys: &ConstraintSystem,
    rng: &mut ChaCha8Rng,
    radius: f64,
) -> Option<Vec<Rat>> {
    for _ in 0..64 {
        let p: Vec<f64> = sys
            .p_ref
            .iter()
            .map(|r| to_f64(r) + rng.gen_range(-radius..radius))
            .collect();
        let pr = rationalize(&p);
        if sys.p_set.contains(&pr).ok()? {
            return Some(pr);
        }
    }
    None
}

/// Empirical stability modulus: per radius, the sup over sampled infeasible
/// pairs of `dist(x; Γ(p)) / dist(g(p, x); C)`.
pub fn estimate_rs_modulus(sys: &ConstraintSystem, sched: &SampleSchedule) -> Result<ModulusEstimate> {
    let mut rng = ChaCha8Rng::seed_from_u64(sched.seed);
    let affine = is_affine_in_decisions(&sys.g);
    let n = sys.g.decision_dim;
    let mut per_radius = Vec::new();
    let mut witness: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut witness_ratio = 0.0f64;
    let mut notes = Vec::new();
    if !affine {
        notes.push(
            "nonaffine decision dependence: distances to Γ(p) are upper bounds from multi-start \
             descent, so ratios are lower bounds on the modulus"
                .into(),
        );
    }
    let mut violation = false;
    for radius in sched.radii() {
        let mut sup = 0.0f64;
        for s in 0..sched.samples_per_radius {
            let Some(pr) = sample_param(sys, &mut rng, radius) else {
                continue;
            };
            let mut xf: Vec<f64> = sys
                .x_ref
                .iter()
                .map(|r| to_f64(r) + rng.gen_range(-radius..radius))
                .collect();
            // boundary bias on odd draws: project onto Γ(p) and step back out
            if s % 2 == 1 && affine {
                let xr = rationalize(&xf);
                if let Some((xb, _)) = exact_gamma_distance(sys, &pr, &xr)? {
                    let t = rng.gen_range(0.05..0.5) * radius;
                    let dir: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    xf = xb
                        .iter()
                        .map(to_f64)
                        .zip(dir)
                        .map(|(b, d)| b + t * d)
                        .collect();
                }
            }
            let xr = rationalize(&xf);
            let pt = EvalPoint::new(pr.clone(), xr.clone());
            let gval = match sys.g.eval(&pt) {
                Ok(v) => v,
                Err(_) => continue,
            };
            let g_rat: Vec<Rat> = gval
                .iter()
                .map(|s| match s {
                    crate::funcexpr::Scalar::Exact(r) => r.clone(),
                    crate::funcexpr::Scalar::Approx(x) => rat_from_f64(*x).expect("finite"),
                })
                .collect();
            let (_, img_d2) = project_point(&sys.c, &g_rat)?;
            let img_dist = to_f64(&img_d2).sqrt();
            if img_dist <= 1e-14 {
                continue; // feasible sample
            }
            let gamma_dist = if affine {
                match exact_gamma_distance(sys, &pr, &xr)? {
                    Some((_, d2)) => to_f64(&d2).sqrt(),
                    None => {
                        violation = true;
                        f64::INFINITY
                    }
                }
            } else {
                match descent_feasible_point(sys, &pr, &xf, &mut rng, radius) {
                    Some(xb) => xb
                        .iter()
                        .zip(&xf)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt(),
                    None => {
                        violation = true;
                        f64::INFINITY
                    }
                }
            };
            let ratio = gamma_dist / img_dist;
            if ratio > sup {
                sup = ratio;
            }
            if ratio > witness_ratio && ratio.is_finite() {
                witness_ratio = ratio;
                witness = Some((pr.iter().map(to_f64).collect(), xf.clone()));
            }
        }
        per_radius.push(sup);
    }
    if violation {
        notes.push("a sampled parameter had empty solution set: parametric stability violated".into());
    }
    Ok(ModulusEstimate {
        trend: classify_trend(&per_radius),
        sup_ratio_per_radius: per_radius,
        witness,
        witness_ratio,
        notes,
    })
}

/// Numeric parametric-stability grade: every sampled parameter must admit a
/// solution within the shrinking decision ball.
pub fn check_parametric_stability(
    sys: &ConstraintSystem,
    sched: &SampleSchedule,
) -> Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(sched.seed ^ 0x5f5f);
    let affine = is_affine_in_decisions(&sys.g);
    for radius in sched.radii() {
        for _ in 0..sched.samples_per_radius {
            let Some(pr) = sample_param(sys, &mut rng, radius * radius.min(1.0)) else {
                continue;
            };
            let ok = if affine {
                match exact_gamma_distance(sys, &pr, &sys.x_ref)? {
                    Some((_, d2)) => to_f64(&d2).sqrt() <= radius,
                    None => false,
                }
            } else {
                let xf: Vec<f64> = sys.x_ref.iter().map(to_f64).collect();
                match descent_feasible_point(sys, &pr, &xf, &mut rng, radius) {
                    Some(xb) => {
                        xb.iter()
                            .zip(&xf)
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum::<f64>()
                            .sqrt()
                            <= radius
                    }
                    None => false,
                }
            };
            if !ok {
                return Ok(Verdict::refuted(Witness::EmptySolutionSet {
                    p: pr.iter().map(to_f64).collect(),
                })
                .with_note(format!("no solution within radius {radius} of the reference")));
            }
        }
    }
    Ok(Verdict::graded(Grade::VerifiedNumeric))
}

/// Sampled bounded-multiplier modulus: sup over feasible pairs and normal
/// generators of the least multiplier norm per unit normal.
pub fn estimate_bmp_modulus(sys: &ConstraintSystem, sched: &SampleSchedule) -> Result<ModulusEstimate> {
    let mut rng = ChaCha8Rng::seed_from_u64(sched.seed ^ 0xb3b3);
    if !is_affine_in_decisions(&sys.g) {
        return Err(ProbeError::Budget(
            "bounded-multiplier sampling needs affine decision dependence".into(),
        ));
    }
    let l = sys.g.out_dim();
    let mut per_radius = Vec::new();
    let mut witness = None;
    let mut witness_ratio = 0.0f64;
    for radius in sched.radii() {
        let mut sup = 0.0f64;
        for _ in 0..sched.samples_per_radius {
            let Some(pr) = sample_param(sys, &mut rng, radius) else {
                continue;
            };
            let xf: Vec<f64> = sys
                .x_ref
                .iter()
                .map(|r| to_f64(r) + rng.gen_range(-radius..radius))
                .collect();
            let xr = rationalize(&xf);
            // feasible point near the sample
            let Some((x_feas, _)) = exact_gamma_distance(sys, &pr, &xr)? else {
                continue;
            };
            let pt = EvalPoint::new(pr.clone(), x_feas.clone());
            let Ok(gval) = sys.g.eval_exact(&pt) else {
                continue;
            };
            if !sys.c.contains(&gval) {
                continue;
            }
            let jx = sys.g.jacobian(&pt, Wrt::Decision)?;
            let components = limiting_normal_cone(&sys.c, &gval)?;
            for k in &components {
                let vk = crate::exactla::hcone_to_vcone(k)?;
                for lam_gen in vk.generators_signed() {
                    let v = jx.transpose_vec(&lam_gen)?;
                    if v.iter().all(|x| x.is_zero()) {
                        continue;
                    }
                    let mut best: Option<Rat> = None;
                    for kk in &components {
                        let eq = jx.transpose().vstack(&kk.eq)?;
                        let mut eq_rhs = v.clone();
                        eq_rhs.extend(vec![Rat::zero(); kk.eq.n_rows()]);
                        let zi = vec![Rat::zero(); kk.ineq.n_rows()];
                        if let Some((_, n2)) = least_norm_point(
                            &kk.ineq,
                            &zi,
                            &eq,
                            &eq_rhs,
                            &vec![Rat::zero(); l],
                        )? {
                            if best.as_ref().map_or(true, |b| n2 < *b) {
                                best = Some(n2);
                            }
                        }
                    }
                    if let Some(n2) = best {
                        let ratio =
                            (to_f64(&n2) / to_f64(&crate::exactla::norm_sq(&v))).sqrt();
                        if ratio > sup {
                            sup = ratio;
                        }
                        if ratio > witness_ratio {
                            witness_ratio = ratio;
                            witness = Some((
                                pr.iter().map(to_f64).collect(),
                                x_feas.iter().map(to_f64).collect(),
                            ));
                        }
                    }
                }
            }
        }
        per_radius.push(sup);
    }
    Ok(ModulusEstimate {
        trend: classify_trend(&per_radius),
        sup_ratio_per_radius: per_radius,
        witness,
        witness_ratio,
        notes: vec![],
    })
}

/// Sampled Lipschitz-like modulus of a solution map given by an enumerator:
/// sup over parameter pairs and solutions of `dist(x; Γ(p'))/ρ(p, p')`.
/// The enumerator returns the solution points near the reference, or `None`
/// when the set is empty/unavailable (recorded as `+∞`).
pub fn estimate_lipschitz_modulus(
    solutions: &dyn Fn(&[f64]) -> Option<Vec<Vec<f64>>>,
    param_filter: &dyn Fn(&[f64]) -> bool,
    p_ref: &[f64],
    x_ref_dim: usize,
    u_radius: f64,
    sched: &SampleSchedule,
) -> ModulusEstimate {
    let mut rng = ChaCha8Rng::seed_from_u64(sched.seed ^ 0x11aa);
    let mut per_radius = Vec::new();
    let mut witness = None;
    let mut witness_ratio = 0.0f64;
    let mut notes = Vec::new();
    let _ = x_ref_dim;
    for radius in sched.radii() {
        let mut sup = 0.0f64;
        let mut draws = 0;
        while draws < sched.samples_per_radius {
            draws += 1;
            let draw = |rng: &mut ChaCha8Rng| -> Option<Vec<f64>> {
                for _ in 0..64 {
                    let p: Vec<f64> = p_ref
                        .iter()
                        .map(|r| r + rng.gen_range(-radius..radius))
                        .collect();
                    if param_filter(&p) {
                        return Some(p);
                    }
                }
                None
            };
            let (Some(p), Some(pp)) = (draw(&mut rng), draw(&mut rng)) else {
                continue;
            };
            let rho: f64 = p
                .iter()
                .zip(&pp)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            if rho < 1e-12 {
                continue;
            }
            let Some(gp) = solutions(&p) else {
                notes.push("empty solution set at a sampled parameter".into());
                sup = f64::INFINITY;
                continue;
            };
            let Some(gpp) = solutions(&pp) else {
                notes.push("empty solution set at a sampled parameter".into());
                sup = f64::INFINITY;
                continue;
            };
            for x in &gp {
                // restrict to the window around the reference solution set
                let norm: f64 = x.iter().map(|a| a * a).sum::<f64>().sqrt();
                if norm > u_radius {
                    continue;
                }
                let d = gpp
                    .iter()
                    .map(|y| {
                        x.iter()
                            .zip(y)
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum::<f64>()
                            .sqrt()
                    })
                    .fold(f64::INFINITY, f64::min);
                let ratio = d / rho;
                if ratio > sup {
                    sup = ratio;
                }
                if ratio > witness_ratio && ratio.is_finite() {
                    witness_ratio = ratio;
                    witness = Some((p.clone(), x.clone()));
                }
            }
        }
        per_radius.push(sup);
    }
    notes.dedup();
    ModulusEstimate {
        trend: classify_trend(&per_radius),
        sup_ratio_per_radius: per_radius,
        witness,
        witness_ratio,
        notes,
    }
}

/// A candidate stability counterexample found by sampling.
#[derive(Debug, Clone)]
pub struct Counterexample {
    pub p: Vec<f64>,
    pub x: Vec<f64>,
    pub ratio: f64,
}

/// Best-effort counterexample search: scan shrinking radii for pairs whose
/// distance ratio keeps climbing a doubling ladder; refine around the worst
/// pair. Returns the best violator when the ratios grow beyond the ladder.
pub fn falsify_robinson(
    sys: &ConstraintSystem,
    sched: &SampleSchedule,
) -> Result<Option<Counterexample>> {
    let est = estimate_rs_modulus(sys, sched)?;
    let finite: Vec<f64> = est
        .sup_ratio_per_radius
        .iter()
        .copied()
        .filter(|x| x.is_finite() && *x > 0.0)
        .collect();
    if finite.len() < 2 {
        if est.sup_ratio_per_radius.iter().any(|x| x.is_infinite()) {
            // empty solution sets: definitive counterexample candidate
            if let Some((p, x)) = est.witness {
                return Ok(Some(Counterexample {
                    p,
                    x,
                    ratio: f64::INFINITY,
                }));
            }
        }
        return Ok(None);
    }
    let first = finite[0];
    let last = *finite.last().unwrap();
    let growing = last > 4.0 * first.max(1e-12) && last > 8.0;
    if !growing {
        return Ok(None);
    }
    Ok(est.witness.map(|(p, x)| Counterexample {
        p,
        x,
        ratio: est.witness_ratio,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactla::rint;
    use crate::fixtures;
    use crate::funcexpr::Expr;
    use crate::polycal::PolyUnion;
    use crate::sysmodel::ParamSet;

    fn sched(seed: u64) -> SampleSchedule {
        SampleSchedule {
            r0: 0.5,
            factor: 0.5,
            count: 4,
            samples_per_radius: 60,
            seed,
        }
    }

    #[test]
    fn rs_modulus_canonical_is_one() {
        let sys = fixtures::canonical_x_minus_p();
        let est = estimate_rs_modulus(&sys, &sched(7)).unwrap();
        let overall = est.overall();
        assert!((overall - 1.0).abs() < 0.05, "estimate {overall}");
        assert_eq!(est.trend, Trend::Stable);
    }

    #[test]
    fn rs_modulus_scaled_is_half() {
        let sys = fixtures::scaled_2x_minus_p();
        let est = estimate_rs_modulus(&sys, &sched(7)).unwrap();
        let overall = est.overall();
        assert!((overall - 0.5).abs() < 0.025, "estimate {overall}");
    }

    #[test]
    fn rs_modulus_deterministic_under_seed() {
        let sys = fixtures::canonical_x_minus_p();
        let a = estimate_rs_modulus(&sys, &sched(99)).unwrap();
        let b = estimate_rs_modulus(&sys, &sched(99)).unwrap();
        assert_eq!(a.sup_ratio_per_radius, b.sup_ratio_per_radius);
        assert_eq!(a.witness_ratio, b.witness_ratio);
    }

    #[test]
    fn rs_witness_reproduces_its_ratio() {
        let sys = fixtures::canonical_x_minus_p();
        let est = estimate_rs_modulus(&sys, &sched(3)).unwrap();
        let (p, x) = est.witness.clone().expect("witness recorded");
        // re-evaluate the ratio exactly at the witness
        let pr = rationalize(&p);
        let xr = rationalize(&x);
        let pt = EvalPoint::new(pr.clone(), xr.clone());
        let g = sys.g.eval_exact(&pt).unwrap();
        let (_, d2img) = project_point(&sys.c, &g).unwrap();
        let (_, d2gam) = exact_gamma_distance(&sys, &pr, &xr).unwrap().unwrap();
        let ratio = (to_f64(&d2gam) / to_f64(&d2img)).sqrt();
        assert!((ratio - est.witness_ratio).abs() < 1e-9);
    }

    #[test]
    fn parametric_stability_examples() {
        let sys = fixtures::canonical_x_minus_p();
        assert_eq!(
            check_parametric_stability(&sys, &sched(5)).unwrap().grade,
            Grade::VerifiedNumeric
        );

        // g(p, x) = p with no x dependence: p > 0 infeasible
        let g = FuncVec::new(vec![Expr::param(0)], 1, 1);
        let sys2 = ConstraintSystem::new(
            g,
            PolyUnion::nonpos_orthant(1),
            ParamSet::FullSpace(1),
            vec![rint(0)],
            vec![rint(0)],
            1,
        )
        .unwrap();
        let v = check_parametric_stability(&sys2, &sched(5)).unwrap();
        assert_eq!(v.grade, Grade::Refuted);
        match v.witness {
            Some(Witness::EmptySolutionSet { p }) => assert!(p[0] > 0.0),
            other => panic!("unexpected witness {other:?}"),
        }
    }

    #[test]
    fn bmp_modulus_examples() {
        // canonical: λ = v, ratio 1
        let sys = fixtures::canonical_x_minus_p();
        let est = estimate_bmp_modulus(&sys, &sched(11)).unwrap();
        let overall = est.overall();
        assert!((overall - 1.0).abs() < 0.05, "estimate {overall}");

        // interior reference: nothing active nearby → 0
        let g = FuncVec::new(
            vec![Expr::add(vec![
                Expr::sub(Expr::decision(0), Expr::param(0)),
                Expr::int(-10),
            ])],
            1,
            1,
        );
        let sys2 = ConstraintSystem::new(
            g,
            PolyUnion::nonpos_orthant(1),
            ParamSet::FullSpace(1),
            vec![rint(0)],
            vec![rint(0)],
            1,
        )
        .unwrap();
        let est2 = estimate_bmp_modulus(&sys2, &sched(11)).unwrap();
        assert_eq!(est2.overall(), 0.0);
    }

    #[test]
    fn lipschitz_modulus_examples() {
        // Γ(p) = {p}: modulus 1
        let sols = |p: &[f64]| Some(vec![vec![p[0]]]);
        let est = estimate_lipschitz_modulus(&sols, &|_| true, &[0.0], 1, 10.0, &sched(13));
        let overall = est.overall();
        assert!((overall - 1.0).abs() < 0.05, "estimate {overall}");
        assert_eq!(est.trend, Trend::Stable);

        // Γ(p) = {±√p} for p ≥ 0, ∅ for p < 0 filtered away: square-root
        // kink grows
        let sols2 = |p: &[f64]| {
            if p[0] < 0.0 {
                None
            } else {
                Some(vec![vec![p[0].sqrt()], vec![-p[0].sqrt()]])
            }
        };
        let est2 = estimate_lipschitz_modulus(
            &sols2,
            &|p| p[0] >= 0.0,
            &[0.0],
            1,
            10.0,
            &sched(13),
        );
        assert_eq!(est2.trend, Trend::Growing);
    }

    #[test]
    fn falsifier_finds_square_root_degeneracy_and_spares_canonical() {
        // g(p, x) = x² − p ∈ {0}, P = R₊-ish via full space; reference (0,0):
        // ratio grows like p^{-1/2} along x = 0.
        let g = FuncVec::new(
            vec![Expr::sub(Expr::powi(Expr::decision(0), 2), Expr::param(0))],
            1,
            1,
        );
        let sys = ConstraintSystem::new(
            g,
            PolyUnion::origin(1),
            ParamSet::FullSpace(1),
            vec![rint(0)],
            vec![rint(0)],
            1,
        )
        .unwrap();
        let s = SampleSchedule {
            r0: 0.25,
            factor: 0.25,
            count: 5,
            samples_per_radius: 80,
            seed: 17,
        };
        let found = falsify_robinson(&sys, &s).unwrap();
        assert!(found.is_some(), "expected a counterexample candidate");

        let ok = falsify_robinson(&fixtures::canonical_x_minus_p(), &s).unwrap();
        assert!(ok.is_none(), "canonical system wrongly flagged");
    }
}

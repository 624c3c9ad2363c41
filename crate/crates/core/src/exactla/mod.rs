//! Exact rational linear algebra, linear-programming feasibility, and
//! polyhedral cone conversions.
//!
//! Everything here is tolerance-free: entries are arbitrary-precision
//! rationals and all decisions (feasibility, sign, membership) are exact.

mod cone;
mod matrix;
mod simplex;

pub use cone::{
    hcone_to_vcone, polar_h, polar_v, project_cone, sup_over_cone, vcone_to_hcone, HCone, VCone,
};
pub use matrix::{
    nullspace, rank, solve_general, RatMatrix,
};
pub use simplex::{
    lp_feasible, lp_feasible_or_certificate, maximize, Constraints, FarkasCertificate,
    Feasibility, LpOutcome,
};

use num_traits::{One, Zero};

/// Arbitrary-precision rational number; the carrier for every exact value.
///
/// `num_rational::BigRational` maintains the invariants this crate needs:
/// positive denominator and gcd-reduced representation after every operation.
pub type Rat = num_rational::BigRational;

/// `n` as a rational.
pub fn rint(n: i64) -> Rat {
    Rat::from_integer(n.into())
}

/// `n / d` as a rational.
pub fn rq(n: i64, d: i64) -> Rat {
    Rat::new(n.into(), d.into())
}

/// Rational zero.
pub fn rzero() -> Rat {
    Rat::zero()
}

/// Rational one.
pub fn rone() -> Rat {
    Rat::one()
}

/// Exact dot product.
pub fn dot(a: &[Rat], b: &[Rat]) -> Rat {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Exact squared Euclidean norm.
pub fn norm_sq(a: &[Rat]) -> Rat {
    a.iter().map(|x| x * x).sum()
}

/// Convert a rational to `f64` (for reports and sampled estimates only).
pub fn to_f64(r: &Rat) -> f64 {
    num_traits::ToPrimitive::to_f64(r).unwrap_or_else(|| {
        // Fall back to a quotient of leading digits when the bignum exceeds
        // f64 range.
        let n = r.numer();
        let d = r.denom();
        let nf = n.to_string().parse::<f64>().unwrap_or(f64::NAN);
        let df = d.to_string().parse::<f64>().unwrap_or(f64::NAN);
        nf / df
    })
}

/// Exact conversion of a finite `f64` into a rational.
pub fn rat_from_f64(x: f64) -> Option<Rat> {
    num_rational::BigRational::from_float(x)
}

/// Scale a nonzero rational vector to its canonical primitive form: integer
/// entries with gcd 1, first nonzero entry's sign preserved.
pub fn canonicalize_vec(v: &[Rat]) -> Vec<Rat> {
    use num_bigint::BigInt;
    use num_integer::Integer;
    let mut denom_lcm: BigInt = One::one();
    for x in v {
        denom_lcm = denom_lcm.lcm(x.denom());
    }
    let ints: Vec<BigInt> = v
        .iter()
        .map(|x| x.numer() * (&denom_lcm / x.denom()))
        .collect();
    let mut g: BigInt = Zero::zero();
    for x in &ints {
        g = g.gcd(x);
    }
    if g.is_zero() {
        return v.to_vec();
    }
    ints.iter()
        .map(|x| Rat::from_integer(x / &g))
        .collect()
}

/// Capacity limits for enumeration-heavy operations.
///
/// The double-description conversion refuses ambient dimension > 12 or more
/// than 64 rows; pattern enumerations refuse after `max_patterns` cases. The
/// pattern cap can be overridden with the `ROBSTAB_CAPACITY` environment
/// variable.
#[derive(Debug, Clone, Copy)]
pub struct Caps {
    pub max_dd_dim: usize,
    pub max_dd_rows: usize,
    pub max_patterns: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            max_dd_dim: 12,
            max_dd_rows: 64,
            max_patterns: 200_000,
        }
    }
}

/// Effective capacity limits, honoring `ROBSTAB_CAPACITY`.
pub fn caps() -> Caps {
    static PATTERNS: std::sync::OnceLock<usize> = std::sync::OnceLock::new();
    let max_patterns = *PATTERNS.get_or_init(|| {
        std::env::var("ROBSTAB_CAPACITY")
            .ok()
            .and_then(|s| s.parse::<usize>().ok())
            .unwrap_or(Caps::default().max_patterns)
    });
    Caps {
        max_patterns,
        ..Caps::default()
    }
}

/// Errors from the exact layer.
#[derive(Debug, Clone, thiserror::Error)]
pub enum ExactlaError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("singular system: {0}")]
    Singular(String),
}

pub type Result<T> = std::result::Result<T, ExactlaError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonicalize_scales_to_primitive_integers() {
        let v = vec![rq(1, 2), rq(-1, 4)];
        assert_eq!(canonicalize_vec(&v), vec![rint(2), rint(-1)]);
        let w = vec![rzero(), rq(3, 7)];
        assert_eq!(canonicalize_vec(&w), vec![rzero(), rone()]);
    }

    #[test]
    fn f64_round_trip_is_exact() {
        let r = rat_from_f64(0.375).unwrap();
        assert_eq!(r, rq(3, 8));
    }
}

//! Exact rational and complex-rational scalars.
//!
//! All spectral bookkeeping (weights, residues, characteristic numbers)
//! is done over `Rat = Ratio<i128>` so that identities which hold on the
//! nose algebraically are reproduced bit-for-bit by the implementation.

use num_complex::Complex;
use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{One, Signed, Zero};

pub type Rat = Ratio<i128>;

/// Complex number with exact rational real and imaginary parts.
pub type CRat = Complex<Rat>;

pub fn rat(n: i128, d: i128) -> Rat {
    Ratio::new(n, d)
}

pub fn crat(re: Rat, im: Rat) -> CRat {
    Complex::new(re, im)
}

pub fn crat_i(nre: i128, dre: i128, nim: i128, dim: i128) -> CRat {
    Complex::new(rat(nre, dre), rat(nim, dim))
}

pub fn rat_zero() -> Rat {
    Rat::zero()
}

pub fn rat_one() -> Rat {
    Rat::one()
}

pub fn crat_zero() -> CRat {
    Complex::new(Rat::zero(), Rat::zero())
}

pub fn crat_one() -> CRat {
    Complex::new(Rat::one(), Rat::zero())
}

pub fn rat_to_f64(r: &Rat) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

pub fn crat_to_c64(c: &CRat) -> Complex<f64> {
    Complex::new(rat_to_f64(&c.re), rat_to_f64(&c.im))
}

/// |c|^2 as an exact rational.
pub fn crat_norm_sqr(c: &CRat) -> Rat {
    c.re * c.re + c.im * c.im
}

pub fn crat_conj(c: &CRat) -> CRat {
    Complex::new(c.re, -c.im)
}

/// Exact inverse; panics on zero.
pub fn crat_inv(c: &CRat) -> CRat {
    let n = crat_norm_sqr(c);
    assert!(!n.is_zero(), "inverse of zero complex rational");
    Complex::new(c.re / n, -c.im / n)
}

/// Floor of a rational as an integer.
pub fn rat_floor(r: &Rat) -> i128 {
    r.floor().to_integer()
}

/// Ceiling of a rational as an integer.
pub fn rat_ceil(r: &Rat) -> i128 {
    r.ceil().to_integer()
}

/// Nearest integer, ties rounded away from zero.
pub fn rat_round_half_away(r: &Rat) -> i128 {
    if r.is_negative() {
        -rat_round_half_away(&-*r)
    } else {
        // for non-negative r, floor(r + 1/2) rounds ties upward = away from zero
        rat_floor(&(*r + Rat::new(1, 2)))
    }
}

/// Round `r` to the nearest multiple of `1/m`, ties away from zero.
pub fn rat_round_to_grid(r: &Rat, m: i128) -> Rat {
    let scaled = *r * Rat::new(m, 1);
    Rat::new(rat_round_half_away(&scaled), m)
}

/// Reduce `r` modulo 1 into the half-open interval `[0, 1)`.
pub fn rat_mod1(r: &Rat) -> Rat {
    *r - Rat::new(rat_floor(r), 1)
}

/// gcd of the denominators of a slice of rationals (lcm, really): the
/// smallest `m` such that every entry lies in `(1/m) Z`.
pub fn common_denominator(rs: &[Rat]) -> i128 {
    let mut m: i128 = 1;
    for r in rs {
        m = m.lcm(r.denom());
    }
    m
}

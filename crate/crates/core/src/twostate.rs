//! Closed forms for one negative and one positive level coupled by a
//! constant `V`.
//!
//! With `s = sin(ωt)/ω` and `c = cos(ωt)`, the fermion overlaps use
//! `ω_F² = E² + |V|²` and the boson overlaps `ω_B² = E² − |V|²`. When
//! `ω_B²` is negative the trigonometric functions continue to hyperbolic
//! ones; near `ω t = 0` a short power series replaces both.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{lit, minus_i, Real};

/// Half-gap `E ≥ 0` and coupling `V`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoStateParams<T> {
    pub e: T,
    pub v: Complex<T>,
}

impl<T: Real> TwoStateParams<T> {
    pub fn new(e: T, v: Complex<T>) -> Result<Self> {
        if !e.is_finite() || !v.re.is_finite() || !v.im.is_finite() || e < T::zero() {
            return Err(Error::Config("two-state E must be finite and non-negative, V finite".into()));
        }
        if e == T::zero() && v.norm_sqr() == T::zero() {
            return Err(Error::DegenerateTwoState);
        }
        Ok(TwoStateParams { e, v })
    }

    pub fn omega_f(&self) -> T {
        (self.e * self.e + self.v.norm_sqr()).sqrt()
    }

    /// `ω_B²`; negative in the supercritical regime.
    pub fn omega_b_squared(&self) -> T {
        self.e * self.e - self.v.norm_sqr()
    }

    /// `|ω_B|`.
    pub fn omega_b_abs(&self) -> T {
        self.omega_b_squared().abs().sqrt()
    }
}

/// The four overlaps `⟨φ^μ|φ^μ'(t)⟩` and the integrated numbers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoStateResult<T> {
    pub plus_plus: Complex<T>,
    pub minus_plus: Complex<T>,
    pub plus_minus: Complex<T>,
    pub minus_minus: Complex<T>,
    /// `N_el` or `N_bos`.
    pub n_particle: T,
    /// `N_pos` or `N_abos`.
    pub n_antiparticle: T,
}

/// `(sin(ωt)/ω, cos(ωt))` for `ω² = q`, valid for any sign of `q`.
pub fn sinc_cos<T: Real>(q: T, t: T) -> (T, T) {
    let z2 = q * t * t;
    if z2.abs() < lit(1e-8) {
        let s = t * (T::one() - z2 / lit(6.0) + z2 * z2 / lit(120.0) - z2 * z2 * z2 / lit(5040.0));
        let c = T::one() - z2 / lit(2.0) + z2 * z2 / lit(24.0) - z2 * z2 * z2 / lit(720.0);
        (s, c)
    } else if q > T::zero() {
        let w = q.sqrt();
        ((w * t).sin() / w, (w * t).cos())
    } else {
        let k = (-q).sqrt();
        ((k * t).sinh() / k, (k * t).cosh())
    }
}

fn check_time<T: Real>(t: T) -> Result<()> {
    if t >= T::zero() && t.is_finite() {
        Ok(())
    } else {
        Err(Error::Config("two-state time must be finite and non-negative".into()))
    }
}

pub fn fermion_overlaps<T: Real>(params: &TwoStateParams<T>, t: T) -> Result<TwoStateResult<T>> {
    check_time(t)?;
    let TwoStateParams { e, v } = *params;
    let (s, c) = sinc_cos(e * e + v.norm_sqr(), t);
    let mi = minus_i::<T>();
    let n = v.norm_sqr() * s * s;
    Ok(TwoStateResult {
        plus_plus: Complex::new(c, -e * s),
        minus_plus: mi * v.conj() * s,
        plus_minus: mi * v * s,
        minus_minus: Complex::new(c, e * s),
        n_particle: n,
        n_antiparticle: n,
    })
}

/// `(N_el, N_pos) = |V|² sin²(ω_F t)/ω_F²` each.
pub fn fermion_numbers<T: Real>(params: &TwoStateParams<T>, t: T) -> Result<(T, T)> {
    let r = fermion_overlaps(params, t)?;
    Ok((r.n_particle, r.n_antiparticle))
}

/// Both levels occupied: the numbers follow from the overlaps as
/// `N_el = |u_{+−}|² + |u_{++}|²` and `N_pos = 1 − |u_{−−}|² − |u_{−+}|²`,
/// which are `1` and `0` for every `t`.
pub fn fermion_numbers_with_extra<T: Real>(params: &TwoStateParams<T>, t: T) -> Result<(T, T)> {
    let r = fermion_overlaps(params, t)?;
    Ok((
        r.plus_minus.norm_sqr() + r.plus_plus.norm_sqr(),
        T::one() - r.minus_minus.norm_sqr() - r.minus_plus.norm_sqr(),
    ))
}

pub fn boson_overlaps<T: Real>(params: &TwoStateParams<T>, t: T) -> Result<TwoStateResult<T>> {
    check_time(t)?;
    let TwoStateParams { e, v } = *params;
    let (s, c) = sinc_cos(params.omega_b_squared(), t);
    let mi = minus_i::<T>();
    let n = v.norm_sqr() * s * s;
    Ok(TwoStateResult {
        plus_plus: Complex::new(c, -e * s),
        minus_plus: mi * v.conj() * s,
        plus_minus: mi * v * s,
        minus_minus: -Complex::new(c, e * s),
        n_particle: n,
        n_antiparticle: n,
    })
}

/// `(N_bos, N_abos) = |V|² sin²(ω_B t)/ω_B²` each, non-negative in every regime.
pub fn boson_numbers<T: Real>(params: &TwoStateParams<T>, t: T) -> Result<(T, T)> {
    let r = boson_overlaps(params, t)?;
    Ok((r.n_particle, r.n_antiparticle))
}

/// Extra boson in `|φ^+⟩`:
/// `N_bos = (E² + |V|²) s² + c²`, `N_abos = 2|V|² s²`.
pub fn boson_numbers_with_extra<T: Real>(params: &TwoStateParams<T>, t: T) -> Result<(T, T)> {
    check_time(t)?;
    let (s, c) = sinc_cos(params.omega_b_squared(), t);
    let v2 = params.v.norm_sqr();
    let e2 = params.e * params.e;
    Ok(((e2 + v2) * s * s + c * c, (v2 + v2) * s * s))
}

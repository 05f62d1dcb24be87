//! Scalar abstraction shared by every numerical module.
//!
//! All spectral computations are written against [`Real`], which is
//! implemented for `f32` and `f64`. Complex values use
//! [`nalgebra::Complex`] over the same real type.

use std::fmt;

use nalgebra::{Complex, DMatrix, DVector, RealField};
use num_traits::{FromPrimitive, ToPrimitive};

/// Real floating-point type usable by the library (`f32` or `f64`).
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + fmt::Display + fmt::Debug + Send + Sync + 'static
{
    /// Converts an `f64` literal into `Self`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    /// Lossy conversion to `f64`, used for reporting.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Machine epsilon of the type.
    #[inline]
    fn eps() -> Self {
        Self::default_epsilon()
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub type Cx<T> = Complex<T>;
pub type CMatrix<T> = DMatrix<Complex<T>>;
pub type CVector<T> = DVector<Complex<T>>;

/// A tolerance requested in `f64` terms, floored at a small multiple of the
/// scalar type's epsilon so `f32` instantiations stay meaningful.
#[inline]
pub fn tol<T: Real>(requested: f64) -> T {
    let floor = T::eps() * T::lit(64.0);
    let t = T::lit(requested);
    if t > floor {
        t
    } else {
        floor
    }
}

#[inline]
pub fn cx<T: Real>(re: T, im: T) -> Complex<T> {
    Complex::new(re, im)
}

#[inline]
pub fn cre<T: Real>(re: T) -> Complex<T> {
    Complex::new(re, T::zero())
}

#[inline]
pub fn cabs<T: Real>(w: Complex<T>) -> T {
    w.re.hypot(w.im)
}

/// `e^w` for complex `w`.
#[inline]
pub fn cexp<T: Real>(w: Complex<T>) -> Complex<T> {
    let r = w.re.exp();
    Complex::new(r * w.im.cos(), r * w.im.sin())
}

/// Principal square root: cut along the negative real axis, `Re >= 0`.
pub fn csqrt_principal<T: Real>(w: Complex<T>) -> Complex<T> {
    let two = T::lit(2.0);
    if w.re.is_zero() && w.im.is_zero() {
        return Complex::new(T::zero(), T::zero());
    }
    let r = cabs(w);
    if w.re >= T::zero() {
        let s = ((r + w.re) / two).sqrt();
        Complex::new(s, w.im / (two * s))
    } else {
        let s = ((r - w.re) / two).sqrt();
        let im = if w.im < T::zero() { -s } else { s };
        Complex::new(w.im.abs() / (two * s), im)
    }
}

#[inline]
pub fn is_finite_cx<T: Real>(w: Complex<T>) -> bool {
    w.re.is_finite() && w.im.is_finite()
}

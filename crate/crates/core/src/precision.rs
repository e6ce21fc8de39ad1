//! Working precision for the propagation.
//!
//! The shooting residue of a decaying solution is a difference of large
//! numbers, so the state can be carried in double-double arithmetic. Only
//! quantities that depend on the trial energy need the extra precision; path
//! geometry and potential samples stay in `f64`.

use std::fmt::Debug;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use twofloat::TwoFloat;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Precision {
    Double,
    #[default]
    DoubleDouble,
}

pub trait Real:
    Copy
    + Debug
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Mul<f64, Output = Self>
{
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    /// `self / d`, correctly rounded to the working precision.
    fn quot(self, d: Self) -> Self;
}

impl Real for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
    #[inline]
    fn quot(self, d: Self) -> Self {
        self / d
    }
}

impl Real for TwoFloat {
    #[inline]
    fn from_f64(v: f64) -> Self {
        TwoFloat::from(v)
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self.hi() + self.lo()
    }
    /// Long division with two correction terms. The library quotient is
    /// only accurate to about one `f64` ulp.
    #[inline]
    fn quot(self, d: Self) -> Self {
        let q1 = self.hi() / d.hi();
        let r = self - d * q1;
        let q2 = r.hi() / d.hi();
        let r = r - d * q2;
        let q3 = r.hi() / d.hi();
        TwoFloat::new_add(q1, q2) + q3
    }
}

/// Complex number over a working precision, with cheap mixed products
/// against `Complex64` coefficients.
#[derive(Debug, Clone, Copy)]
pub struct Cx<T> {
    pub re: T,
    pub im: T,
}

impl<T: Real> Cx<T> {
    #[inline]
    pub fn new(re: T, im: T) -> Self {
        Cx { re, im }
    }

    #[inline]
    pub fn zero() -> Self {
        Cx::from_c64(Complex64::new(0.0, 0.0))
    }

    #[inline]
    pub fn from_c64(z: Complex64) -> Self {
        Cx { re: T::from_f64(z.re), im: T::from_f64(z.im) }
    }

    #[inline]
    pub fn to_c64(self) -> Complex64 {
        Complex64::new(self.re.to_f64(), self.im.to_f64())
    }

    #[inline]
    pub fn add_c(self, z: Complex64) -> Self {
        Cx { re: self.re + z.re, im: self.im + z.im }
    }

    #[inline]
    pub fn mul_c(self, z: Complex64) -> Self {
        Cx {
            re: self.re * z.re - self.im * z.im,
            im: self.re * z.im + self.im * z.re,
        }
    }

    #[inline]
    pub fn norm_sqr(self) -> T {
        self.re * self.re + self.im * self.im
    }

    #[inline]
    pub fn recip(self) -> Self {
        let d = self.norm_sqr();
        Cx { re: self.re.quot(d), im: (-self.im).quot(d) }
    }
}

impl<T: Real> Add for Cx<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Cx { re: self.re + o.re, im: self.im + o.im }
    }
}

impl<T: Real> Sub for Cx<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Cx { re: self.re - o.re, im: self.im - o.im }
    }
}

impl<T: Real> Mul for Cx<T> {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        Cx {
            re: self.re * o.re - self.im * o.im,
            im: self.re * o.im + self.im * o.re,
        }
    }
}

impl<T: Real> Neg for Cx<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Cx { re: -self.re, im: -self.im }
    }
}

/// Energy carried as an unevaluated sum `hi + lo` of two `Complex64`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WideEnergy {
    pub hi: Complex64,
    pub lo: Complex64,
}

impl WideEnergy {
    pub fn new(z: Complex64) -> Self {
        WideEnergy { hi: z, lo: Complex64::new(0.0, 0.0) }
    }

    pub fn to_cx<T: Real>(self) -> Cx<T> {
        Cx::<T>::from_c64(self.hi).add_c(self.lo)
    }

    pub fn from_dd(z: Cx<TwoFloat>) -> Self {
        WideEnergy {
            hi: Complex64::new(z.re.hi(), z.im.hi()),
            lo: Complex64::new(z.re.lo(), z.im.lo()),
        }
    }

    /// `self + dz` rounded to double-double.
    pub fn shifted(self, dz: Complex64) -> Self {
        WideEnergy::from_dd(self.to_cx::<TwoFloat>().add_c(dz))
    }

    pub fn value(self) -> Complex64 {
        self.hi + self.lo
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dd_keeps_low_order_bits() {
        let e = WideEnergy::new(Complex64::new(1.0, 0.0)).shifted(Complex64::new(1e-20, -1e-22));
        assert_eq!(e.hi, Complex64::new(1.0, -1e-22));
        assert!((e.lo.re - 1e-20).abs() < 1e-35);
        assert_eq!(e.lo.im, 0.0);
    }

    #[test]
    fn mixed_product_matches_complex64() {
        let a = Complex64::new(0.3, -1.7);
        let b = Complex64::new(-2.1, 0.4);
        let p = Cx::<TwoFloat>::from_c64(a).mul_c(b).to_c64();
        assert!((p - a * b).norm() < 1e-15);
        let r = Cx::<f64>::from_c64(a).recip().to_c64();
        assert!((r - 1.0 / a).norm() < 1e-15);
    }

    #[test]
    fn dd_quotient_is_accurate() {
        // (1 + 2^-60) / 3 has a residual well below f64 resolution.
        let a = TwoFloat::new_add(1.0, 2f64.powi(-60));
        let d = TwoFloat::from(3.0);
        let q = a.quot(d);
        let r = a - q * d;
        assert!(r.hi().abs() < 1e-30, "residual {:e}", r.hi());
        let z = Cx::new(TwoFloat::new_add(0.7, 1e-18), TwoFloat::new_add(-1.3, 3e-19));
        let one = z * z.recip();
        assert!((one.re - 1.0).hi().abs() < 1e-30 && one.im.hi().abs() < 1e-30);
    }
}

//! The potential `V(x) = -(ix)^N` and `Q(x) = E + (ix)^N`.
//!
//! `(ix)^N` is `exp(N Log(ix))` with the principal logarithm, so for
//! non-integer `N` the cut runs along the positive imaginary axis.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_finite, Error, Result};

const INTEGER_TOL: f64 = 1e-12;
const CUT_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub n: f64,
    /// Set when `n` is within 1e-12 of an integer.
    pub integer: Option<i32>,
}

impl PotentialSpec {
    pub fn new(n: f64) -> Result<Self> {
        check_finite("N", n)?;
        if n <= 0.0 {
            return Err(Error::InvalidParameter(format!("N must be positive, got {n}")));
        }
        let r = n.round();
        let integer = ((n - r).abs() < INTEGER_TOL && r.abs() < i32::MAX as f64).then_some(r as i32);
        Ok(PotentialSpec { n, integer })
    }

    /// `(ix)^N` on the principal branch.
    pub fn ix_pow(&self, x: Complex64) -> Complex64 {
        let ix = Complex64::new(-x.im, x.re);
        match self.integer {
            Some(k) => ix.powi(k),
            None => {
                if ix.re == 0.0 && ix.im == 0.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    (ix.ln() * self.n).exp()
                }
            }
        }
    }

    /// `V(x) = -(ix)^N`.
    pub fn potential(&self, x: Complex64) -> Complex64 {
        -self.ix_pow(x)
    }

    /// `Q(x) = E + (ix)^N`, so that `psi'' = -Q psi`.
    pub fn q(&self, x: Complex64, e: Complex64) -> Complex64 {
        e + self.ix_pow(x)
    }

    /// Whether the potential is discontinuous across the positive imaginary axis.
    pub fn has_cut(&self) -> bool {
        self.integer.is_none()
    }
}

/// True when `x` lies on the positive imaginary axis.
pub fn on_cut(x: Complex64) -> bool {
    x.re.abs() <= CUT_TOL * x.norm().max(1.0) && x.im > 0.0
}

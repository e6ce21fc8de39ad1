//! Stokes wedges, turning points and the family catalogue.
//!
//! Family `k` owns a PT-symmetric pair of wedges of opening `2π/(N+2)`
//! centred on the Stokes lines
//!
//! ```text
//! θ_right = -(N - 4k + 2)/(N + 2) · π/2,     θ_left = -π - θ_right.
//! ```
//!
//! A family is physical while its right wedge stays below the positive
//! imaginary axis, i.e. `k < (N + 1)/2`. Family 1 is always listed; for
//! `N < 2` every family is flagged hypothetical.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_finite, Error, Result};
use crate::potential::PotentialSpec;

pub const MAX_FAMILY: u32 = 8;
const WEDGE_SLACK: f64 = 1e-9;

const COLORS: [&str; 8] = ["orange", "green", "pink", "yellow", "blue", "purple", "grey", "brown"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TurningPoint {
    pub x: Complex64,
    /// Argument of `x`, reported in `(-π, π]`.
    pub angle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WedgeFamily {
    pub k: u32,
    pub color: String,
    pub theta_right: f64,
    pub theta_left: f64,
    pub width: f64,
    /// Angle of the turning point inside the right wedge (at `E = 1`).
    pub gamma: Option<f64>,
    pub turning_right: Option<Complex64>,
    pub turning_left: Option<Complex64>,
    pub hypothetical: bool,
}

impl WedgeFamily {
    pub fn gamma(&self) -> Result<f64> {
        self.gamma.ok_or(Error::NoTurningPointInWedge(self.k))
    }

    /// Centre of the right wedge at radius `r`.
    pub fn right_point(&self, r: f64) -> Complex64 {
        Complex64::from_polar(r, self.theta_right)
    }

    pub fn left_point(&self, r: f64) -> Complex64 {
        Complex64::from_polar(r, self.theta_left)
    }

    pub fn in_right_wedge(&self, angle: f64) -> bool {
        angle_within(angle, self.theta_right, 0.5 * self.width + WEDGE_SLACK)
    }

    pub fn in_left_wedge(&self, angle: f64) -> bool {
        angle_within(angle, self.theta_left, 0.5 * self.width + WEDGE_SLACK)
    }
}

pub fn wedge_width(n: f64) -> f64 {
    2.0 * PI / (n + 2.0)
}

/// `(θ_right, θ_left)` for family `k`.
pub fn stokes_angles(n: f64, k: u32) -> Result<(f64, f64)> {
    check_finite("N", n)?;
    if k == 0 || k > MAX_FAMILY {
        return Err(Error::InvalidParameter(format!("family index {k} outside 1..={MAX_FAMILY}")));
    }
    let right = -(n - 4.0 * k as f64 + 2.0) / (n + 2.0) * PI / 2.0;
    Ok((right, -PI - right))
}

/// Solutions of `E + (ix)^N = 0` that are consistent with the principal
/// branch, i.e. `arg x ∈ (-3π/2, π/2]`.
pub fn turning_points(spec: &PotentialSpec, e: Complex64) -> Result<Vec<TurningPoint>> {
    if !(e.re.is_finite() && e.im.is_finite()) {
        return Err(Error::NonFinite(format!("E = {e}")));
    }
    if e.norm() == 0.0 {
        return Err(Error::InvalidParameter("E = 0 has a single degenerate turning point".into()));
    }
    let n = spec.n;
    let radius = e.norm().powf(1.0 / n);
    let base = (-e).arg();
    let lo = -1.5 * PI;
    let hi = 0.5 * PI;
    // θ_j = (base + 2πj)/N - π/2
    let j_min = ((n * (lo + 0.5 * PI) - base) / (2.0 * PI)).floor() as i64 - 1;
    let j_max = ((n * (hi + 0.5 * PI) - base) / (2.0 * PI)).ceil() as i64 + 1;
    let mut out = Vec::new();
    for j in j_min..=j_max {
        let theta = (base + 2.0 * PI * j as f64) / n - 0.5 * PI;
        if theta > lo + 1e-12 && theta <= hi + 1e-12 {
            let angle = wrap_angle(theta);
            out.push(TurningPoint { x: Complex64::from_polar(radius, angle), angle });
        }
    }
    out.sort_by(|a, b| a.angle.total_cmp(&b.angle));
    Ok(out)
}

/// Family `k` with turning points evaluated at energy `e`.
pub fn family(n: f64, k: u32, e: Complex64) -> Result<WedgeFamily> {
    let spec = PotentialSpec::new(n)?;
    let (theta_right, theta_left) = stokes_angles(n, k)?;
    let mut fam = WedgeFamily {
        k,
        color: COLORS[(k - 1) as usize].to_string(),
        theta_right,
        theta_left,
        width: wedge_width(n),
        gamma: None,
        turning_right: None,
        turning_left: None,
        hypothetical: n < 2.0,
    };
    let unit = turning_points(&spec, Complex64::new(1.0, 0.0))?;
    fam.gamma = unit
        .iter()
        .filter(|t| fam.in_right_wedge(t.angle))
        .map(|t| t.angle)
        .min_by(|a, b| (a - theta_right).abs().total_cmp(&(b - theta_right).abs()));
    let at_e = turning_points(&spec, e)?;
    let pick = |inside: &dyn Fn(f64) -> bool, centre: f64| {
        at_e.iter()
            .filter(|t| inside(t.angle))
            .min_by(|a, b| angle_dist(a.angle, centre).total_cmp(&angle_dist(b.angle, centre)))
            .map(|t| t.x)
    };
    fam.turning_right = pick(&|a| fam.in_right_wedge(a), theta_right);
    fam.turning_left = pick(&|a| fam.in_left_wedge(a), theta_left);
    Ok(fam)
}

/// Families `k = 1, 2, ...` whose wedges avoid the positive imaginary axis.
pub fn family_catalog(n: f64, e: Complex64) -> Result<Vec<WedgeFamily>> {
    check_finite("N", n)?;
    let mut out = vec![family(n, 1, e)?];
    let mut k = 2;
    while k <= MAX_FAMILY && (k as f64) < 0.5 * (n + 1.0) - 1e-12 {
        out.push(family(n, k, e)?);
        k += 1;
    }
    Ok(out)
}

/// Real part of the decaying WKB exponent at `x`.
///
/// Uses `S(x) = (ix)^{N/2+1}/(N/2+1)`, plus `E (ix)^{1-N/2}/(2-N)` when
/// `N < 2` and `-E² (ix)^{1-3N/2}/(8(1-3N/2))` when `N < 2/3`. The sign is
/// fixed so the result is never positive.
pub fn decay_exponent(n: f64, e: Complex64, x: Complex64) -> Result<f64> {
    PotentialSpec::new(n)?;
    let ix = Complex64::new(-x.im, x.re);
    let pow = |p: f64| -> Complex64 {
        if ix.norm() == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            (ix.ln() * p).exp()
        }
    };
    let m = 0.5 * n + 1.0;
    let mut s = pow(m) / m;
    if n < 2.0 {
        s += e * pow(1.0 - 0.5 * n) / (2.0 - n);
    }
    if n < 2.0 / 3.0 {
        s -= e * e * pow(1.0 - 1.5 * n) / (8.0 * (1.0 - 1.5 * n));
    }
    Ok(-s.re.abs())
}

pub(crate) fn wrap_angle(a: f64) -> f64 {
    let mut t = a % (2.0 * PI);
    if t <= -PI {
        t += 2.0 * PI;
    } else if t > PI {
        t -= 2.0 * PI;
    }
    t
}

fn angle_dist(a: f64, b: f64) -> f64 {
    wrap_angle(a - b).abs()
}

fn angle_within(a: f64, centre: f64, half: f64) -> bool {
    angle_dist(a, centre) <= half
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stokes_angles_n1() {
        let (r, l) = stokes_angles(1.0, 1).unwrap();
        assert!((r - PI / 6.0).abs() < 1e-15);
        assert!((l + 7.0 * PI / 6.0).abs() < 1e-15);
    }

    #[test]
    fn stokes_angles_n2() {
        let (r, l) = stokes_angles(2.0, 1).unwrap();
        assert!(r.abs() < 1e-15);
        assert!((l + PI).abs() < 1e-15);
    }

    #[test]
    fn family_counts() {
        let count = |n: f64| family_catalog(n, Complex64::new(1.0, 0.0)).unwrap().len();
        assert_eq!(count(2.0), 1);
        assert_eq!(count(3.0), 1);
        assert_eq!(count(3.5), 2);
        assert_eq!(count(5.0), 2);
        assert_eq!(count(8.0), 4);
    }

    #[test]
    fn gammas_for_n5() {
        let cat = family_catalog(5.0, Complex64::new(1.0, 0.0)).unwrap();
        assert!((cat[0].gamma.unwrap() + 3.0 * PI / 10.0).abs() < 1e-12);
        assert!((cat[1].gamma.unwrap() - PI / 10.0).abs() < 1e-12);
        assert_eq!(cat[0].color, "orange");
        assert_eq!(cat[1].color, "green");
    }

    #[test]
    fn turning_point_counts() {
        let one = Complex64::new(1.0, 0.0);
        assert_eq!(turning_points(&PotentialSpec::new(5.0).unwrap(), one).unwrap().len(), 5);
        assert_eq!(turning_points(&PotentialSpec::new(3.5).unwrap(), one).unwrap().len(), 4);
        assert_eq!(turning_points(&PotentialSpec::new(2.0).unwrap(), one).unwrap().len(), 2);
    }

    #[test]
    fn hypothetical_flag() {
        let f = family(1.0, 1, Complex64::new(1.0, 0.0)).unwrap();
        assert!(f.hypothetical);
        assert!(!family(2.0, 1, Complex64::new(1.0, 0.0)).unwrap().hypothetical);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(stokes_angles(f64::INFINITY, 1).is_err());
        assert!(stokes_angles(2.0, 0).is_err());
        assert!(stokes_angles(2.0, 9).is_err());
    }

    #[test]
    fn decay_on_stokes_line_n4() {
        let x = Complex64::from_polar(4.0, -PI / 6.0);
        let s = decay_exponent(4.0, Complex64::new(1.0, 0.0), x).unwrap();
        assert!((s + 64.0 / 3.0).abs() < 1e-12);
    }
}

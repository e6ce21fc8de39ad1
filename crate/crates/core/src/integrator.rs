//! Fixed-step Gauss–Legendre integration of `psi'' = -Q(x) psi` along a contour.
//!
//! With `y = (psi, dpsi/dx)` and `x = x(p)` the system is
//! `dy/dp = x'(p) (dpsi/dx, -Q psi)`. It is linear in `y`, so each implicit
//! step reduces to an `s × s` complex solve for the `dpsi/dx` stage slopes.
//! Everything that does not depend on the energy is precomputed once per
//! contour in [`Discretization`].

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use twofloat::TwoFloat;

use crate::contours::Contour;
use crate::error::{Error, Result};
use crate::potential::PotentialSpec;
use crate::precision::{Cx, Precision, Real, WideEnergy};

const OVERFLOW: f64 = 1e250;
const MAX_STAGES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ButcherTableau {
    pub stages: usize,
    pub a: [[f64; MAX_STAGES]; MAX_STAGES],
    pub b: [f64; MAX_STAGES],
    pub c: [f64; MAX_STAGES],
}

/// Gauss–Legendre collocation with 1, 2 or 3 stages (order 2s).
pub fn gauss_legendre(stages: usize) -> Result<ButcherTableau> {
    let mut t = ButcherTableau { stages, a: [[0.0; 3]; 3], b: [0.0; 3], c: [0.0; 3] };
    match stages {
        1 => {
            t.a[0][0] = 0.5;
            t.b[0] = 1.0;
            t.c[0] = 0.5;
        }
        2 => {
            let r = 3f64.sqrt() / 6.0;
            t.a[0] = [0.25, 0.25 - r, 0.0];
            t.a[1] = [0.25 + r, 0.25, 0.0];
            t.b = [0.5, 0.5, 0.0];
            t.c = [0.5 - r, 0.5 + r, 0.0];
        }
        3 => {
            let r = 15f64.sqrt();
            t.a[0] = [5.0 / 36.0, 2.0 / 9.0 - r / 15.0, 5.0 / 36.0 - r / 30.0];
            t.a[1] = [5.0 / 36.0 + r / 24.0, 2.0 / 9.0, 5.0 / 36.0 - r / 24.0];
            t.a[2] = [5.0 / 36.0 + r / 30.0, 2.0 / 9.0 + r / 15.0, 5.0 / 36.0];
            t.b = [5.0 / 18.0, 4.0 / 9.0, 5.0 / 18.0];
            t.c = [0.5 - r / 10.0, 0.5, 0.5 + r / 10.0];
        }
        s => return Err(Error::InvalidParameter(format!("Gauss-Legendre with {s} stages is not supported"))),
    }
    Ok(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorConfig {
    pub stages: usize,
    pub steps: usize,
    /// `dpsi/dx` at the start of the path; `psi` starts at zero.
    pub initial_slope: f64,
    pub precision: Precision,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig { stages: 3, steps: 4000, initial_slope: 1e-7, precision: Precision::DoubleDouble }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    pub psi: Complex64,
    pub dpsi: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub p: Vec<f64>,
    pub x: Vec<Complex64>,
    pub psi: Vec<Complex64>,
    /// `dpsi/dx` at the nodes.
    pub dpsi: Vec<Complex64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn last(&self) -> StateVector {
        let n = self.len() - 1;
        StateVector { psi: self.psi[n], dpsi: self.dpsi[n] }
    }

    pub fn max_amplitude(&self) -> f64 {
        self.psi.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Columns `p, re_x, im_x, re_psi, im_psi`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["p", "re_x", "im_x", "re_psi", "im_psi"])?;
        for j in 0..self.len() {
            out.serialize((self.p[j], self.x[j].re, self.x[j].im, self.psi[j].re, self.psi[j].im))?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Energy-independent coefficients of one step.
#[derive(Debug, Clone, Copy)]
struct Step {
    /// `dx/dp` at the stage points.
    d: [Complex64; MAX_STAGES],
    /// `dx/dp · (ix)^N` at the stage points.
    dv: [Complex64; MAX_STAGES],
    /// `h Σ_j a_ij d_j`.
    g: [Complex64; MAX_STAGES],
    /// `h² Σ_j a_ij d_j a_jk`.
    gm: [[Complex64; MAX_STAGES]; MAX_STAGES],
    /// `h Σ_i b_i d_i`.
    beta: Complex64,
    /// `h² Σ_i b_i d_i a_ij`.
    gam: [Complex64; MAX_STAGES],
    /// `h b_i`.
    hb: [f64; MAX_STAGES],
}

/// A contour sampled at the Gauss nodes of a fixed step sequence.
#[derive(Debug, Clone)]
pub struct Discretization {
    stages: usize,
    slope: f64,
    precision: Precision,
    p: Vec<f64>,
    x: Vec<Complex64>,
    steps: Vec<Step>,
}

impl Discretization {
    pub fn new(spec: &PotentialSpec, contour: &Contour, cfg: &IntegratorConfig) -> Result<Self> {
        contour.validate(spec)?;
        if cfg.steps == 0 {
            return Err(Error::InvalidParameter("steps must be positive".into()));
        }
        if !(cfg.initial_slope.is_finite() && cfg.initial_slope != 0.0) {
            return Err(Error::InvalidParameter("initial slope must be finite and non-zero".into()));
        }
        let tab = gauss_legendre(cfg.stages)?;
        let s = tab.stages;
        let (lo, hi) = contour.interval();
        let mut knots = vec![lo];
        knots.extend(contour.breakpoints().into_iter().filter(|&b| b > lo && b < hi));
        knots.push(hi);
        let span = hi - lo;
        let pieces = knots.len() - 1;
        let total = cfg.steps.max(pieces);
        let mut counts: Vec<usize> = knots
            .windows(2)
            .map(|w| (((w[1] - w[0]) / span) * total as f64).round().max(1.0) as usize)
            .collect();
        let assigned: usize = counts.iter().sum();
        let widest = (0..pieces).max_by(|&a, &b| (knots[a + 1] - knots[a]).total_cmp(&(knots[b + 1] - knots[b]))).unwrap();
        counts[widest] = (counts[widest] + total).saturating_sub(assigned).max(1);

        let mut p = vec![lo];
        let mut x = vec![contour.point(lo)];
        let mut steps = Vec::with_capacity(total);
        for (w, &m) in knots.windows(2).zip(&counts) {
            let h = (w[1] - w[0]) / m as f64;
            for j in 0..m {
                let p0 = w[0] + h * j as f64;
                let mut st = Step {
                    d: [Complex64::new(0.0, 0.0); 3],
                    dv: [Complex64::new(0.0, 0.0); 3],
                    g: [Complex64::new(0.0, 0.0); 3],
                    gm: [[Complex64::new(0.0, 0.0); 3]; 3],
                    beta: Complex64::new(0.0, 0.0),
                    gam: [Complex64::new(0.0, 0.0); 3],
                    hb: [0.0; 3],
                };
                for i in 0..s {
                    let (xi, di) = contour.eval(p0 + tab.c[i] * h);
                    st.d[i] = di;
                    st.dv[i] = di * spec.ix_pow(xi);
                }
                for i in 0..s {
                    st.g[i] = (0..s).map(|j| st.d[j] * tab.a[i][j]).sum::<Complex64>() * h;
                    for k in 0..s {
                        st.gm[i][k] = (0..s).map(|j| st.d[j] * (tab.a[i][j] * tab.a[j][k])).sum::<Complex64>() * (h * h);
                    }
                    st.hb[i] = h * tab.b[i];
                }
                st.beta = (0..s).map(|i| st.d[i] * tab.b[i]).sum::<Complex64>() * h;
                for j in 0..s {
                    st.gam[j] = (0..s).map(|i| st.d[i] * (tab.b[i] * tab.a[i][j])).sum::<Complex64>() * (h * h);
                }
                steps.push(st);
                let pe = if j + 1 == m { w[1] } else { p0 + h };
                p.push(pe);
                x.push(contour.point(pe));
            }
        }
        Ok(Discretization { stages: s, slope: cfg.initial_slope, precision: cfg.precision, p, x, steps })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.p
    }

    pub fn points(&self) -> &[Complex64] {
        &self.x
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    /// `psi` at the end of the contour, evaluated in the configured precision.
    pub fn shoot(&self, e: WideEnergy) -> Result<Cx<TwoFloat>> {
        match self.precision {
            Precision::Double => {
                let v = self.run::<f64>(e, None)?.psi;
                Ok(Cx::new(TwoFloat::from(v.re), TwoFloat::from(v.im)))
            }
            Precision::DoubleDouble => Ok(self.run::<TwoFloat>(e, None)?.psi),
        }
    }

    pub fn trajectory(&self, e: WideEnergy) -> Result<Trajectory> {
        let mut tr = Trajectory {
            p: self.p.clone(),
            x: self.x.clone(),
            psi: Vec::with_capacity(self.p.len()),
            dpsi: Vec::with_capacity(self.p.len()),
        };
        match self.precision {
            Precision::Double => {
                self.run::<f64>(e, Some(&mut tr))?;
            }
            Precision::DoubleDouble => {
                self.run::<TwoFloat>(e, Some(&mut tr))?;
            }
        }
        Ok(tr)
    }

    fn run<T: Real>(&self, e: WideEnergy, mut rec: Option<&mut Trajectory>) -> Result<State<T>> {
        let s = self.stages;
        let en = e.to_cx::<T>();
        let mut y = State { psi: Cx::<T>::zero(), phi: Cx::from_c64(Complex64::new(self.slope, 0.0)) };
        if let Some(r) = rec.as_deref_mut() {
            r.psi.push(y.psi.to_c64());
            r.dpsi.push(y.phi.to_c64());
        }
        for (n, st) in self.steps.iter().enumerate() {
            let zero = Cx::<T>::zero();
            let mut m = [[zero; MAX_STAGES]; MAX_STAGES];
            let mut w = [zero; MAX_STAGES];
            for i in 0..s {
                let pq = en.mul_c(st.d[i]).add_c(st.dv[i]);
                for k in 0..s {
                    m[i][k] = pq.mul_c(st.gm[i][k]);
                }
                m[i][i] = m[i][i].add_c(Complex64::new(1.0, 0.0));
                w[i] = -(pq * (y.psi + y.phi.mul_c(st.g[i])));
            }
            solve_small(&mut m, &mut w, s);
            let mut psi = y.psi + y.phi.mul_c(st.beta);
            let mut phi = y.phi;
            for j in 0..s {
                psi = psi + w[j].mul_c(st.gam[j]);
                phi = phi + Cx::new(w[j].re * st.hb[j], w[j].im * st.hb[j]);
            }
            y = State { psi, phi };
            let a = y.psi.re.to_f64().abs() + y.psi.im.to_f64().abs();
            if !(a < OVERFLOW) {
                return Err(Error::Overflow(self.p[n + 1]));
            }
            if let Some(r) = rec.as_deref_mut() {
                r.psi.push(y.psi.to_c64());
                r.dpsi.push(y.phi.to_c64());
            }
        }
        Ok(y)
    }
}

struct State<T> {
    psi: Cx<T>,
    phi: Cx<T>,
}

/// Gaussian elimination without pivoting; the step matrix is `I + O(h²Q)`.
fn solve_small<T: Real>(m: &mut [[Cx<T>; MAX_STAGES]; MAX_STAGES], r: &mut [Cx<T>; MAX_STAGES], s: usize) {
    for c in 0..s {
        let inv = m[c][c].recip();
        for i in c + 1..s {
            let f = m[i][c] * inv;
            for j in c + 1..s {
                m[i][j] = m[i][j] - f * m[c][j];
            }
            r[i] = r[i] - f * r[c];
        }
    }
    for c in (0..s).rev() {
        let mut acc = r[c];
        for j in c + 1..s {
            acc = acc - m[c][j] * r[j];
        }
        r[c] = acc * m[c][c].recip();
    }
}

/// Integrate from the start of `contour` at energy `e`.
pub fn integrate(spec: &PotentialSpec, contour: &Contour, e: Complex64, cfg: &IntegratorConfig) -> Result<Trajectory> {
    Discretization::new(spec, contour, cfg)?.trajectory(WideEnergy::new(e))
}

/// Observed order from `psi(end)` with `steps`, `2·steps` and `4·steps`.
pub fn observed_order(
    spec: &PotentialSpec,
    contour: &Contour,
    e: Complex64,
    cfg: &IntegratorConfig,
    steps: usize,
) -> Result<f64> {
    let end = |m: usize| -> Result<Complex64> {
        let c = IntegratorConfig { steps: m, ..*cfg };
        Ok(Discretization::new(spec, contour, &c)?.shoot(WideEnergy::new(e))?.to_c64())
    };
    let (a, b, c) = (end(steps)?, end(2 * steps)?, end(4 * steps)?);
    Ok(((a - b).norm() / (b - c).norm()).log2())
}

//! WKB energies and the Stokes / anti-Stokes diagram.
//!
//! For the family whose right turning point sits at angle `γ`,
//!
//! ```text
//! E_n ≈ [ (n + 1/2) √π Γ(3/2 + 1/N) / (cos γ · Γ(1 + 1/N)) ]^(2N/(N+2)).
//! ```
//!
//! Lines of the diagram are traced from each turning point by following the
//! direction field `conj(√Q)` (anti-Stokes, `Im ∫√Q dx = 0`) or `i·conj(√Q)`
//! (Stokes, `Re ∫√Q dx = 0`) with a fixed-step RK4 in arc length. The
//! branches of `(ix)^N` and of `√Q` are continued along each line.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_finite, Error, Result};
use crate::potential::PotentialSpec;
use crate::wedges::{turning_points, WedgeFamily};

pub const TRACE_STEP: f64 = 1e-3;
pub const SEED_OFFSET: f64 = 1e-4;

pub fn gamma_fn(x: f64) -> f64 {
    libm::tgamma(x)
}

pub fn wkb_energy(n: f64, gamma: f64, level: usize) -> Result<f64> {
    check_finite("N", n)?;
    check_finite("gamma", gamma)?;
    if n <= 0.0 {
        return Err(Error::InvalidParameter(format!("N must be positive, got {n}")));
    }
    let c = gamma.cos();
    if c.abs() < 1e-14 {
        return Err(Error::Domain(format!("cos(gamma) vanishes for gamma = {gamma}")));
    }
    let base = (level as f64 + 0.5) * PI.sqrt() * gamma_fn(1.5 + 1.0 / n) / (c * gamma_fn(1.0 + 1.0 / n));
    if base <= 0.0 {
        return Err(Error::Domain(format!("negative WKB base for gamma = {gamma}")));
    }
    Ok(base.powf(2.0 * n / (n + 2.0)))
}

/// `E_n(γ2) / E_n(γ1)`, independent of `n`.
pub fn family_ratio(n: f64, gamma1: f64, gamma2: f64) -> Result<f64> {
    check_finite("N", n)?;
    let (c1, c2) = (gamma1.cos(), gamma2.cos());
    if c2.abs() < 1e-14 || c1.abs() < 1e-14 {
        return Err(Error::Domain("cos(gamma) vanishes".into()));
    }
    Ok((c1 / c2).powf(2.0 * n / (n + 2.0)))
}

/// WKB estimate for `level` of a family.
pub fn family_energy(n: f64, fam: &WedgeFamily, level: usize) -> Result<f64> {
    wkb_energy(n, fam.gamma()?, level)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LineKind {
    Stokes,
    AntiStokes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagramLine {
    pub kind: LineKind,
    /// Index of the turning point the line starts from.
    pub from: usize,
    /// Index of the turning point it runs into, if any.
    pub to: Option<usize>,
    pub points: Vec<[f64; 2]>,
    /// `∫ √Q dx` accumulated along the line.
    pub action: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StokesDiagram {
    pub turning_points: Vec<[f64; 2]>,
    pub lines: Vec<DiagramLine>,
}

impl StokesDiagram {
    /// Anti-Stokes line running from turning point `a` to `b`.
    pub fn connection(&self, a: usize, b: usize) -> Option<&DiagramLine> {
        self.lines
            .iter()
            .find(|l| l.kind == LineKind::AntiStokes && l.from == a && l.to == Some(b))
    }

    pub fn index_of(&self, x: Complex64) -> Option<usize> {
        self.turning_points
            .iter()
            .position(|t| (Complex64::new(t[0], t[1]) - x).norm() < 1e-9 * (1.0 + x.norm()))
    }
}

/// `(ix)^N` continued along a path by keeping `arg(ix)` continuous.
struct Sheet {
    n: f64,
    arg: f64,
}

impl Sheet {
    fn locate(&self, x: Complex64) -> f64 {
        let ix = Complex64::new(-x.im, x.re);
        let a = ix.arg();
        a + 2.0 * PI * ((self.arg - a) / (2.0 * PI)).round()
    }

    fn q(&self, x: Complex64, e: Complex64) -> Complex64 {
        let a = self.locate(x);
        let r = x.norm();
        e + Complex64::from_polar(r.powf(self.n), self.n * a)
    }
}

fn tracked_sqrt(q: Complex64, reference: Complex64) -> Complex64 {
    let s = q.sqrt();
    if (s * reference.conj()).re < 0.0 {
        -s
    } else {
        s
    }
}

struct Tracer<'a> {
    e: Complex64,
    n: f64,
    rot: Complex64,
    turning: &'a [Complex64],
    bound: f64,
    step: f64,
}

impl Tracer<'_> {
    fn direction(&self, sheet: &Sheet, x: Complex64, root_ref: Complex64) -> (Complex64, Complex64) {
        let root = tracked_sqrt(sheet.q(x, self.e), root_ref);
        let v = self.rot * root.conj();
        (v / v.norm(), root)
    }

    fn trace(&self, from: usize, phi: f64, kind: LineKind) -> Result<DiagramLine> {
        let x0 = self.turning[from];
        let mut x = x0 + Complex64::from_polar(SEED_OFFSET, phi);
        let ix0 = Complex64::new(-x0.im, x0.re);
        let mut sheet = Sheet { n: self.n, arg: ix0.arg() };
        sheet.arg = sheet.locate(x);
        let mut root = sheet.q(x, self.e).sqrt();
        let heading = Complex64::from_polar(1.0, phi);
        if ((self.rot * root.conj()) * heading.conj()).re < 0.0 {
            root = -root;
        }
        // The seed leg is short enough for the local expansion Q ≈ Q'(x0)(x - x0).
        let mut action = root * (x - x0) * (2.0 / 3.0);
        let mut pts = vec![[x0.re, x0.im], [x.re, x.im]];
        let h = self.step;
        let max_steps = (8.0 * self.bound / h) as usize;
        let mut to = None;
        for _ in 0..max_steps {
            let (k1, r1) = self.direction(&sheet, x, root);
            let (k2, _) = self.direction(&sheet, x + k1 * (0.5 * h), r1);
            let (k3, _) = self.direction(&sheet, x + k2 * (0.5 * h), r1);
            let (k4, _) = self.direction(&sheet, x + k3 * h, r1);
            let dx = (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            let xn = x + dx;
            let mid = x + dx * 0.5;
            let r_mid = tracked_sqrt(sheet.q(mid, self.e), r1);
            let r_end = tracked_sqrt(sheet.q(xn, self.e), r_mid);
            action += (r1 + r_mid * 4.0 + r_end) * dx / 6.0;
            sheet.arg = sheet.locate(xn);
            root = r_end;
            x = xn;
            pts.push([x.re, x.im]);
            if let Some((j, t)) = self
                .turning
                .iter()
                .enumerate()
                .find(|(j, t)| *j != from && (x - **t).norm() < 3.0 * h)
            {
                action += root * (*t - x) * (2.0 / 3.0);
                pts.push([t.re, t.im]);
                to = Some(j);
                break;
            }
            if x.norm() > self.bound {
                break;
            }
            if root.norm() < 1e-8 {
                return Err(Error::TracingStall(x));
            }
        }
        Ok(DiagramLine { kind, from, to, points: pts, action: [action.re, action.im] })
    }
}

/// Stokes and anti-Stokes lines from every turning point at energy `e`.
pub fn trace_stokes_diagram(spec: &PotentialSpec, e: Complex64) -> Result<StokesDiagram> {
    let tps: Vec<Complex64> = turning_points(spec, e)?.into_iter().map(|t| t.x).collect();
    let n = spec.n;
    let bound = 2.5 * e.norm().powf(1.0 / n) + 1.0;
    let mut lines = Vec::new();
    for (j, &x0) in tps.iter().enumerate() {
        let ix0 = Complex64::new(-x0.im, x0.re);
        // dQ/dx = N i (ix)^(N-1)
        let dq = Complex64::i() * n * (ix0.ln() * (n - 1.0)).exp();
        for (kind, offset, rot) in [
            (LineKind::AntiStokes, 0.0, Complex64::new(1.0, 0.0)),
            (LineKind::Stokes, PI, Complex64::i()),
        ] {
            let tracer = Tracer { e, n, rot, turning: &tps, bound, step: TRACE_STEP };
            for m in 0..3 {
                let phi = (2.0 * PI * m as f64 + offset - dq.arg()) / 3.0;
                lines.push(tracer.trace(j, phi, kind)?);
            }
        }
    }
    Ok(StokesDiagram { turning_points: tps.iter().map(|t| [t.re, t.im]).collect(), lines })
}

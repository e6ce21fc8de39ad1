//! Shooting eigensolver.
//!
//! The residual `f(E) = psi(B; E)` is driven to zero with a damped
//! Gauss–Newton (Levenberg–Marquardt) iteration on `(Re E, Im E)`:
//!
//! ```text
//! δE = -[JᵀJ + λ diag(JᵀJ)]⁻¹ Jᵀ f
//! ```
//!
//! where `J` is the real 2×2 Jacobian of `(Re f, Im f)`, taken by central
//! differences. A trial step is kept when `|f|` does not increase; then
//! `λ ← λ/√2`, otherwise `λ ← 10λ`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use twofloat::TwoFloat;

use crate::contours::{intersections, same_endpoints, Contour};
use crate::error::{Error, Result, Unconverged};
use crate::integrator::{Discretization, IntegratorConfig, Trajectory};
use crate::potential::PotentialSpec;
use crate::precision::{Cx, WideEnergy};
use crate::wedges::WedgeFamily;
use crate::wkb::family_energy;

const LAMBDA_MAX: f64 = 1e16;
/// Give up when `|f|` has not halved over this many trials.
const STALL_WINDOW: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub lambda0: f64,
    /// Relative finite-difference step, scaled by `max(1, |E|)`.
    pub fd_step: f64,
    pub max_iters: usize,
    pub residue_tol: f64,
    /// Extra starting guesses (alternately ±10 %) tried by [`solve_level`].
    pub retries: usize,
    pub integrator: IntegratorConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            lambda0: 1e-3,
            fd_step: 1e-7,
            max_iters: 200,
            residue_tol: 1e-13,
            retries: 3,
            integrator: IntegratorConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenSolution {
    #[serde(rename = "N")]
    pub n: f64,
    pub family: Option<u32>,
    pub level: Option<usize>,
    #[serde(rename = "E_re")]
    pub e_re: f64,
    #[serde(rename = "E_im")]
    pub e_im: f64,
    pub residue: f64,
    pub iterations: usize,
    pub contour: String,
    #[serde(skip)]
    pub wide: WideEnergy,
}

impl EigenSolution {
    pub fn energy(&self) -> Complex64 {
        Complex64::new(self.e_re, self.e_im)
    }
}

/// Residual evaluator bound to one discretised contour.
pub struct Shooter {
    disc: Discretization,
    cfg: SolverConfig,
}

/// Iterate of the LM loop.
#[derive(Debug, Clone, Copy)]
pub struct LmState {
    pub energy: WideEnergy,
    pub f: Complex64,
    pub lambda: f64,
    pub jacobian: Option<[[f64; 2]; 2]>,
}

impl Shooter {
    pub fn new(spec: &PotentialSpec, contour: &Contour, cfg: &SolverConfig) -> Result<Self> {
        if !(cfg.residue_tol > 0.0 && cfg.fd_step > 0.0 && cfg.lambda0 >= 0.0) {
            return Err(Error::InvalidParameter("solver tolerances must be positive".into()));
        }
        Ok(Shooter { disc: Discretization::new(spec, contour, &cfg.integrator)?, cfg: *cfg })
    }

    pub fn discretization(&self) -> &Discretization {
        &self.disc
    }

    pub fn residual(&self, e: WideEnergy) -> Result<Complex64> {
        Ok(self.disc.shoot(e)?.to_c64())
    }

    /// Central-difference Jacobian of `(Re f, Im f)` with respect to `(Re E, Im E)`.
    pub fn jacobian(&self, e: WideEnergy) -> Result<[[f64; 2]; 2]> {
        let h = self.cfg.fd_step * e.value().norm().max(1.0);
        let diff = |dz: Complex64| -> Result<Complex64> {
            let a: Cx<TwoFloat> = self.disc.shoot(e.shifted(dz))?;
            let b: Cx<TwoFloat> = self.disc.shoot(e.shifted(-dz))?;
            Ok((a - b).to_c64() / (2.0 * h))
        };
        let da = diff(Complex64::new(h, 0.0))?;
        let db = diff(Complex64::new(0.0, h))?;
        Ok([[da.re, db.re], [da.im, db.im]])
    }

    pub fn start(&self, guess: Complex64) -> Result<LmState> {
        let energy = WideEnergy::new(guess);
        Ok(LmState { energy, f: self.residual(energy)?, lambda: self.cfg.lambda0, jacobian: None })
    }

    /// One trial step. Returns whether it was accepted.
    pub fn lm_step(&self, st: &mut LmState) -> Result<bool> {
        let jac = match st.jacobian {
            Some(j) => j,
            None => {
                let j = self.jacobian(st.energy)?;
                st.jacobian = Some(j);
                j
            }
        };
        let delta = lm_delta(jac, st.f, st.lambda)?;
        let trial = st.energy.shifted(delta);
        let accepted = match self.residual(trial) {
            Ok(f) if f.norm() <= st.f.norm() => {
                st.energy = trial;
                st.f = f;
                st.jacobian = None;
                true
            }
            Ok(_) | Err(Error::Overflow(_)) => false,
            Err(e) => return Err(e),
        };
        st.lambda = if accepted { st.lambda / std::f64::consts::SQRT_2 } else { st.lambda * 10.0 };
        Ok(accepted)
    }
}

/// Levenberg–Marquardt increment for the 2×2 real system.
pub fn lm_delta(jac: [[f64; 2]; 2], f: Complex64, lambda: f64) -> Result<Complex64> {
    if f.re == 0.0 && f.im == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let scale = jac.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::SingularNormalEquations);
    }
    let j = jac.map(|row| row.map(|v| v / scale));
    let r = [f.re / scale, f.im / scale];
    let a11 = j[0][0] * j[0][0] + j[1][0] * j[1][0];
    let a22 = j[0][1] * j[0][1] + j[1][1] * j[1][1];
    let a12 = j[0][0] * j[0][1] + j[1][0] * j[1][1];
    let g1 = j[0][0] * r[0] + j[1][0] * r[1];
    let g2 = j[0][1] * r[0] + j[1][1] * r[1];
    let (m11, m22) = (a11 * (1.0 + lambda), a22 * (1.0 + lambda));
    let det = m11 * m22 - a12 * a12;
    if !(det.abs() > 1e-300) || !det.is_finite() {
        return Err(Error::SingularNormalEquations);
    }
    let d1 = -(m22 * g1 - a12 * g2) / det;
    let d2 = -(m11 * g2 - a12 * g1) / det;
    Ok(Complex64::new(d1, d2))
}

/// Solve `psi(B; E) = 0` starting from `guess`.
pub fn solve_eigenvalue(spec: &PotentialSpec, contour: &Contour, guess: Complex64, cfg: &SolverConfig) -> Result<EigenSolution> {
    if !(guess.re.is_finite() && guess.im.is_finite()) {
        return Err(Error::NonFinite(format!("initial guess {guess}")));
    }
    let shooter = Shooter::new(spec, contour, cfg)?;
    iterate(&shooter, spec, contour, guess)
}

fn iterate(shooter: &Shooter, spec: &PotentialSpec, contour: &Contour, guess: Complex64) -> Result<EigenSolution> {
    let cfg = &shooter.cfg;
    let mut st = shooter.start(guess)?;
    let mut iterations = 0;
    let mut history = vec![st.f.norm()];
    while st.f.norm() > cfg.residue_tol {
        let stalled = iterations >= STALL_WINDOW && st.f.norm() > 0.5 * history[iterations - STALL_WINDOW];
        if iterations >= cfg.max_iters || st.lambda > LAMBDA_MAX || stalled {
            return Err(Error::NotConverged(Unconverged {
                energy: st.energy.value(),
                residue: st.f.norm(),
                iterations,
            }));
        }
        shooter.lm_step(&mut st)?;
        iterations += 1;
        history.push(st.f.norm());
    }
    let e = st.energy.value();
    Ok(EigenSolution {
        n: spec.n,
        family: None,
        level: None,
        e_re: e.re,
        e_im: e.im,
        residue: st.f.norm(),
        iterations,
        contour: contour.label.clone(),
        wide: st.energy,
    })
}

/// Solve for `level` of a family, seeded by its WKB estimate.
pub fn solve_level(
    spec: &PotentialSpec,
    fam: &WedgeFamily,
    contour: &Contour,
    cfg: &SolverConfig,
    level: usize,
) -> Result<EigenSolution> {
    let seed = family_energy(spec.n, fam, level)?;
    solve_from(spec, fam, contour, cfg, level, Complex64::new(seed, 0.0))
}

/// Like [`solve_level`] but starting from an explicit guess.
pub fn solve_from(
    spec: &PotentialSpec,
    fam: &WedgeFamily,
    contour: &Contour,
    cfg: &SolverConfig,
    level: usize,
    guess: Complex64,
) -> Result<EigenSolution> {
    let shooter = Shooter::new(spec, contour, cfg)?;
    let mut last = None;
    for attempt in 0..=cfg.retries {
        let g = match attempt {
            0 => guess,
            a => guess * (1.0 + 0.1 * if a % 2 == 1 { 1.0 } else { -1.0 } * a.div_ceil(2) as f64),
        };
        match iterate(&shooter, spec, contour, g) {
            Ok(mut s) => {
                s.family = Some(fam.k);
                s.level = Some(level);
                return Ok(s);
            }
            Err(Error::NotConverged(u)) => {
                let better = match &last {
                    Some(Error::NotConverged(b)) => u.residue < b.residue,
                    _ => true,
                };
                if better {
                    last = Some(Error::NotConverged(u));
                }
            }
            Err(Error::SingularNormalEquations) | Err(Error::Overflow(_)) if attempt < cfg.retries => {}
            Err(e) => return Err(e),
        }
    }
    Err(last.unwrap_or(Error::SingularNormalEquations))
}

/// Trapezoid weights on the trajectory's parameter grid.
pub fn weights(p: &[f64]) -> Vec<f64> {
    let n = p.len();
    let mut w = vec![0.0; n];
    for j in 0..n.saturating_sub(1) {
        let h = p[j + 1] - p[j];
        w[j] += 0.5 * h;
        w[j + 1] += 0.5 * h;
    }
    w
}

/// `psi / sqrt(Σ |psi|² dp)`.
pub fn normalize_numeric(tr: &Trajectory) -> Result<Vec<Complex64>> {
    let w = weights(&tr.p);
    let norm2: f64 = tr.psi.iter().zip(&w).map(|(z, w)| z.norm_sqr() * w).sum();
    if !(norm2 >= 1e-200 && norm2.is_finite()) {
        return Err(Error::ZeroNorm);
    }
    let s = norm2.sqrt();
    Ok(tr.psi.iter().map(|z| z / s).collect())
}

/// `Σ conj(φ_a) φ_b dp` of the normalised trajectories.
pub fn overlap(a: &Trajectory, b: &Trajectory) -> Result<Complex64> {
    if a.p.len() != b.p.len() || a.p.iter().zip(&b.p).any(|(u, v)| (u - v).abs() > 1e-12) {
        return Err(Error::GridMismatch);
    }
    let fa = normalize_numeric(a)?;
    let fb = normalize_numeric(b)?;
    let w = weights(&a.p);
    Ok(fa.iter().zip(&fb).zip(&w).map(|((u, v), w)| u.conj() * v * w).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossingEvent {
    pub x: Complex64,
    pub p1: f64,
    pub p2: f64,
    pub psi1: Complex64,
    pub psi2: Complex64,
    /// `|psi1 - psi2|`.
    pub gap: f64,
    /// Largest `|psi|` on either path, for relative comparisons.
    pub amplitude: f64,
}

/// Cubic Hermite interpolation of `psi` at parameter `p`.
pub fn interpolate(tr: &Trajectory, contour: &Contour, p: f64) -> Complex64 {
    let n = tr.p.len();
    let j = match tr.p.binary_search_by(|v| v.total_cmp(&p)) {
        Ok(j) => return tr.psi[j],
        Err(j) => j.clamp(1, n - 1) - 1,
    };
    let (p0, p1) = (tr.p[j], tr.p[j + 1]);
    let h = p1 - p0;
    let eps = 1e-9 * h;
    let d0 = tr.dpsi[j] * contour.tangent(p0 + eps);
    let d1 = tr.dpsi[j + 1] * contour.tangent(p1 - eps);
    let t = (p - p0) / h;
    let (t2, t3) = (t * t, t * t * t);
    tr.psi[j] * (2.0 * t3 - 3.0 * t2 + 1.0)
        + d0 * (h * (t3 - 2.0 * t2 + t))
        + tr.psi[j + 1] * (-2.0 * t3 + 3.0 * t2)
        + d1 * (h * (t3 - t2))
}

/// Compare the two solutions at energy `e` wherever the contours cross.
pub fn crossing_events(
    spec: &PotentialSpec,
    c1: &Contour,
    c2: &Contour,
    e: WideEnergy,
    cfg: &IntegratorConfig,
) -> Result<Vec<CrossingEvent>> {
    if !same_endpoints(c1, c2) {
        return Err(Error::EndpointMismatch);
    }
    let hits = intersections(c1, c2)?;
    let t1 = Discretization::new(spec, c1, cfg)?.trajectory(e)?;
    let t2 = Discretization::new(spec, c2, cfg)?.trajectory(e)?;
    let amplitude = t1.max_amplitude().max(t2.max_amplitude());
    Ok(hits
        .into_iter()
        .map(|h| {
            let psi1 = interpolate(&t1, c1, h.p1);
            let psi2 = interpolate(&t2, c2, h.p2);
            CrossingEvent { x: h.x, p1: h.p1, p2: h.p2, psi1, psi2, gap: (psi1 - psi2).norm(), amplitude }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_residual_gives_zero_step() {
        let d = lm_delta([[1.0, 0.0], [0.0, 1.0]], Complex64::new(0.0, 0.0), 1e-3).unwrap();
        assert_eq!(d, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn large_damping_gives_tiny_step() {
        let d = lm_delta([[2.0, -1.0], [1.0, 2.0]], Complex64::new(0.3, -0.2), 1e12).unwrap();
        assert!(d.norm() < 1e-10);
    }

    #[test]
    fn undamped_step_is_newton() {
        // f(E) = a (E - E0) is holomorphic; one step lands on E0.
        let a = Complex64::new(2.0, -1.0);
        let f = a * Complex64::new(-0.3, 0.25);
        let d = lm_delta([[a.re, -a.im], [a.im, a.re]], f, 0.0).unwrap();
        assert!((d - Complex64::new(0.3, -0.25)).norm() < 1e-14);
    }

    #[test]
    fn singular_jacobian() {
        assert!(matches!(
            lm_delta([[0.0, 0.0], [0.0, 0.0]], Complex64::new(1.0, 0.0), 1e-3),
            Err(Error::SingularNormalEquations)
        ));
        assert!(matches!(
            lm_delta([[1.0, 1.0], [1.0, 1.0]], Complex64::new(1.0, 0.0), 0.0),
            Err(Error::SingularNormalEquations)
        ));
    }

    #[test]
    fn trapezoid_weights() {
        let w = weights(&[0.0, 1.0, 3.0]);
        assert_eq!(w, vec![0.5, 1.5, 1.0]);
    }
}

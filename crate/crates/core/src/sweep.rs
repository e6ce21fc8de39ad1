//! Parameter sweeps in `N` with continuation, and location of level mergers.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::mpsc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::contours::default_contour;
use crate::eigensolver::{solve_from, EigenSolution, SolverConfig};
use crate::error::{Error, Result};
use crate::potential::PotentialSpec;
use crate::wedges::family;
use crate::wkb::family_energy;

/// Levels closer than this are treated as merged.
pub const MERGE_GAP: f64 = 1e-2;

/// Default WKB action between the turning radius and the path endpoints.
/// The truncation error scales like `exp(-2·action)`, while the rounding
/// floor of the end value grows like `exp(2·action)`.
pub const DEFAULT_ACTION: f64 = 12.0;

/// How far the path endpoints sit from the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RadiusPolicy {
    Fixed(f64),
    /// Put the endpoints where the decaying WKB exponent, measured from the
    /// turning radius `|E|^(1/N)`, reaches this value (see [`wkb_action`]).
    Action(f64),
}

impl Default for RadiusPolicy {
    fn default() -> Self {
        RadiusPolicy::Action(DEFAULT_ACTION)
    }
}

impl RadiusPolicy {
    pub fn radius(&self, n: f64, e: Complex64) -> f64 {
        match *self {
            RadiusPolicy::Fixed(r) => r,
            RadiusPolicy::Action(s) => action_radius(n, e.norm(), s),
        }
    }
}

/// `∫ sqrt(x^N - |E|) dx` from the turning radius `|E|^(1/N)` out to `r`.
pub fn wkb_action(n: f64, e_abs: f64, r: f64) -> f64 {
    let rt = e_abs.powf(1.0 / n);
    if r <= rt {
        return 0.0;
    }
    // x = r_t + u² removes the square-root behaviour at the turning radius.
    let g = |u: f64| 2.0 * u * ((rt + u * u).powf(n) - e_abs).max(0.0).sqrt();
    let (b, m) = ((r - rt).sqrt(), 400);
    let h = b / m as f64;
    let inner: f64 = (1..m).map(|j| g(j as f64 * h) * if j % 2 == 1 { 4.0 } else { 2.0 }).sum();
    (g(0.0) + inner + g(b)) * h / 3.0
}

/// Radius at which [`wkb_action`] reaches `action`.
pub fn action_radius(n: f64, e_abs: f64, action: f64) -> f64 {
    // Dropping |E| under the root overestimates the action, so this start
    // lies inside the root and Newton converges from above after one step.
    let m = 0.5 * n + 1.0;
    let rt = e_abs.powf(1.0 / n);
    let mut r = (m * action + rt.powf(m)).powf(1.0 / m);
    for _ in 0..50 {
        let slope = (r.powf(n) - e_abs).max(1e-300).sqrt();
        let step = (wkb_action(n, e_abs, r) - action) / slope;
        r -= step;
        if step.abs() < 1e-12 * r {
            break;
        }
    }
    r
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub n_start: f64,
    pub n_stop: f64,
    pub n_step: f64,
    /// March from `n_stop` down to `n_start` instead of upwards.
    pub march_down: bool,
    pub family: u32,
    pub levels: Vec<usize>,
    /// Seed each point from the previous one rather than from WKB.
    pub continuation: bool,
    pub radius: RadiusPolicy,
    pub solver: SolverConfig,
    /// Append-only record file; points already in it are not recomputed.
    pub output_path: Option<PathBuf>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            n_start: 2.0,
            n_stop: 4.0,
            n_step: 0.01,
            march_down: false,
            family: 1,
            levels: vec![0, 1, 2, 3],
            continuation: true,
            radius: RadiusPolicy::default(),
            solver: SolverConfig::default(),
            output_path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    #[serde(rename = "N")]
    pub n: f64,
    pub level: usize,
    pub family: u32,
    #[serde(rename = "E_re")]
    pub e_re: f64,
    #[serde(rename = "E_im")]
    pub e_im: f64,
    /// Missing when the solver broke down before producing a residue.
    pub residue: Option<f64>,
    pub converged: bool,
    pub contour: String,
}

impl SweepRecord {
    pub fn energy(&self) -> Complex64 {
        Complex64::new(self.e_re, self.e_im)
    }
}

/// A merger seen between two neighbouring grid points of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegeneracyMark {
    pub levels: (usize, usize),
    pub n_star: f64,
    pub e_star: f64,
    pub bracket_width: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub records: Vec<SweepRecord>,
    pub degeneracies: Vec<DegeneracyMark>,
}

impl SweepResult {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.records {
            out.serialize(r)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }

    pub fn level(&self, level: usize) -> impl Iterator<Item = &SweepRecord> {
        self.records.iter().filter(move |r| r.level == level)
    }
}

/// Ascending grid `start, start + step, ...` up to and including `stop`.
pub fn n_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(start.is_finite() && stop.is_finite() && step.is_finite()) {
        return Err(Error::NonFinite("sweep range".into()));
    }
    if !(start < stop && step > 0.0) {
        return Err(Error::InvalidParameter("sweep needs start < stop and step > 0".into()));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|j| start + step * j as f64).collect())
}

fn read_journal(path: &Path) -> Result<Vec<SweepRecord>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        // A torn final line from an interrupted run is ignored.
        if let Ok(r) = serde_json::from_str::<SweepRecord>(&line) {
            out.push(r);
        }
    }
    Ok(out)
}

/// Solve one level at `n`, seeded by `guess` or the WKB estimate.
pub fn solve_at(
    n: f64,
    k: u32,
    level: usize,
    guess: Option<Complex64>,
    radius: RadiusPolicy,
    solver: &SolverConfig,
) -> Result<EigenSolution> {
    let spec = PotentialSpec::new(n)?;
    let seed = match guess {
        Some(g) => g,
        None => Complex64::new(family_energy(n, &family(n, k, Complex64::new(1.0, 0.0))?, level)?, 0.0),
    };
    let fam = family(n, k, seed)?;
    let contour = default_contour(&spec, &fam, radius.radius(n, seed))?;
    solve_from(&spec, &fam, &contour, solver, level, seed)
}

/// Like [`solve_at`], but solver failures become unconverged records.
fn sweep_point(n: f64, k: u32, level: usize, guess: Option<Complex64>, cfg: &SweepConfig) -> Result<SweepRecord> {
    let spec = PotentialSpec::new(n)?;
    let seed = match guess {
        Some(g) => g,
        None => Complex64::new(family_energy(n, &family(n, k, Complex64::new(1.0, 0.0))?, level)?, 0.0),
    };
    let fam = family(n, k, seed)?;
    let contour = default_contour(&spec, &fam, cfg.radius.radius(n, seed))?;
    let rec = |e: Complex64, residue, converged| SweepRecord {
        n,
        level,
        family: k,
        e_re: e.re,
        e_im: e.im,
        residue,
        converged,
        contour: contour.label.clone(),
    };
    match solve_from(&spec, &fam, &contour, &cfg.solver, level, seed) {
        Ok(s) => Ok(rec(s.energy(), Some(s.residue), true)),
        Err(Error::NotConverged(u)) => Ok(rec(u.energy, Some(u.residue), false)),
        Err(Error::SingularNormalEquations) | Err(Error::Overflow(_)) => Ok(rec(seed, None, false)),
        Err(e) => Err(e),
    }
}

/// Ratio of WKB estimates at `to` and `from`, used to carry a converged
/// energy across a grid step. Falls back to 1 where WKB is undefined.
fn wkb_scale(from: f64, to: f64, k: u32, level: usize) -> f64 {
    let est = |n: f64| family(n, k, Complex64::new(1.0, 0.0)).and_then(|f| family_energy(n, &f, level));
    match (est(from), est(to)) {
        (Ok(a), Ok(b)) if a > 0.0 && b.is_finite() => b / a,
        _ => 1.0,
    }
}

fn pair_is_real(a: &SweepRecord, b: &SweepRecord) -> bool {
    let scale = a.energy().norm().max(b.energy().norm());
    a.converged
        && b.converged
        && a.e_im.abs() <= 1e-7 * scale
        && b.e_im.abs() <= 1e-7 * scale
        && (b.e_re - a.e_re).abs() >= MERGE_GAP
}

/// First place along the marching order where a pair of neighbouring levels
/// stops being real and distinct.
fn merge_marks(records: &[SweepRecord], levels: &[usize], grid: &[f64], step: f64) -> Vec<DegeneracyMark> {
    let at = |n: f64, l: usize| records.iter().find(|r| r.level == l && (r.n - n).abs() < 1e-12);
    let mut out = Vec::new();
    for &l in levels {
        if !levels.contains(&(l + 1)) {
            continue;
        }
        let mut prev: Option<(f64, &SweepRecord, &SweepRecord)> = None;
        for &n in grid {
            let (Some(a), Some(b)) = (at(n, l), at(n, l + 1)) else { continue };
            let ok = pair_is_real(a, b);
            if let (Some((pn, pa, pb)), false) = (prev, ok) {
                out.push(DegeneracyMark {
                    levels: (l, l + 1),
                    n_star: 0.5 * (pn + n),
                    e_star: 0.5 * (pa.e_re + pb.e_re),
                    bracket_width: step,
                });
                break;
            }
            prev = ok.then_some((n, a, b));
        }
    }
    out
}

/// Sweep `N` over the configured grid. Each level marches on its own worker,
/// seeding every point from the previous converged one; a single writer
/// appends finished records to the output file.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    let mut grid = n_grid(cfg.n_start, cfg.n_stop, cfg.n_step)?;
    if cfg.march_down {
        grid.reverse();
    }
    family(grid[0], cfg.family, Complex64::new(1.0, 0.0))?;
    let done = match &cfg.output_path {
        Some(p) => read_journal(p)?,
        None => Vec::new(),
    };
    let mut journal = match &cfg.output_path {
        Some(p) => Some(OpenOptions::new().create(true).append(true).open(p)?),
        None => None,
    };
    let (tx, rx) = mpsc::channel::<Result<SweepRecord>>();
    let mut records = Vec::new();
    let mut first_err = None;
    std::thread::scope(|scope| {
        for &level in &cfg.levels {
            let tx = tx.clone();
            let (grid, done) = (&grid, &done);
            scope.spawn(move || {
                let mut last: Option<(f64, Complex64)> = None;
                for &n in grid {
                    let prior = done
                        .iter()
                        .find(|r| (r.n - n).abs() < 1e-12 && r.level == level && r.family == cfg.family);
                    let rec = match prior {
                        Some(r) => Ok(r.clone()),
                        None => {
                            let seed = match (cfg.continuation, last) {
                                (true, Some((pn, e))) => Some(e * wkb_scale(pn, n, cfg.family, level)),
                                _ => None,
                            };
                            sweep_point(n, cfg.family, level, seed, cfg)
                        }
                    };
                    if let Ok(r) = &rec {
                        if r.converged {
                            last = Some((n, r.energy()));
                        }
                    }
                    let stop = rec.is_err();
                    if tx.send(rec).is_err() || stop {
                        return;
                    }
                }
            });
        }
        drop(tx);
        for rec in rx {
            match rec {
                Ok(r) => {
                    let fresh = !done.iter().any(|d| d == &r);
                    if let (Some(f), true) = (journal.as_mut(), fresh) {
                        let line = serde_json::to_string(&r).map_err(Error::from);
                        let written = line.and_then(|l| {
                            writeln!(f, "{l}")?;
                            f.flush()?;
                            Ok(())
                        });
                        if let Err(e) = written {
                            first_err.get_or_insert(e);
                        }
                    }
                    records.push(r);
                }
                Err(e) => {
                    first_err.get_or_insert(e);
                }
            }
        }
    });
    if let Some(e) = first_err {
        return Err(e);
    }
    records.sort_by(|a, b| a.level.cmp(&b.level).then(a.n.total_cmp(&b.n)));
    let degeneracies = merge_marks(&records, &cfg.levels, &grid, cfg.n_step);
    Ok(SweepResult { records, degeneracies })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DegeneracyConfig {
    pub family: u32,
    /// The pair `(level, level + 1)` is followed.
    pub level: usize,
    pub n_start: f64,
    pub n_stop: f64,
    pub n_step: f64,
    /// Bisection stops once the bracket in `N` is this narrow.
    pub tol: f64,
    pub radius: RadiusPolicy,
    pub solver: SolverConfig,
}

impl Default for DegeneracyConfig {
    fn default() -> Self {
        DegeneracyConfig {
            family: 1,
            level: 1,
            n_start: 2.0,
            n_stop: 1.0,
            n_step: 0.02,
            tol: 1e-4,
            radius: RadiusPolicy::default(),
            // Perturbed restarts could land on a neighbouring level.
            solver: SolverConfig { retries: 0, ..SolverConfig::default() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Degeneracy {
    pub levels: (usize, usize),
    /// Midpoint of the final bracket.
    pub n_star: f64,
    /// Mean of the two real levels at the upper end of the bracket.
    pub e_star: f64,
    pub bracket: (f64, f64),
    /// The two levels at the upper end of the bracket.
    pub pair: (f64, f64),
}

/// Both levels of the pair at `n`, if they are real and distinct.
fn real_pair(cfg: &DegeneracyConfig, n: f64, seeds: (Complex64, Complex64)) -> Result<Option<(Complex64, Complex64)>> {
    let solve = |level, seed| solve_at(n, cfg.family, level, Some(seed), cfg.radius, &cfg.solver);
    let a = match solve(cfg.level, seeds.0) {
        Ok(s) => s.energy(),
        Err(Error::NotConverged(_)) | Err(Error::SingularNormalEquations) | Err(Error::Overflow(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    let b = match solve(cfg.level + 1, seeds.1) {
        Ok(s) => s.energy(),
        Err(Error::NotConverged(_)) | Err(Error::SingularNormalEquations) | Err(Error::Overflow(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    let scale = a.norm().max(b.norm());
    let real = a.im.abs() <= 1e-7 * scale && b.im.abs() <= 1e-7 * scale;
    let gap_prev = (seeds.1 - seeds.0).norm();
    let near = |z: Complex64, s: Complex64| (z - s).norm() <= gap_prev + 0.5;
    let ok = real && b.re - a.re >= MERGE_GAP && near(a, seeds.0) && near(b, seeds.1);
    Ok(ok.then_some((a, b)))
}

/// Seeds at `n` from the last two real pairs. The pair mean is extrapolated
/// linearly, and so is the squared gap, which vanishes linearly at a
/// square-root merger.
fn predict(history: &[(f64, Complex64, Complex64)], n: f64) -> (Complex64, Complex64) {
    let (n2, a2, b2) = history[history.len() - 1];
    if history.len() < 2 {
        return (a2, b2);
    }
    let (n1, a1, b1) = history[history.len() - 2];
    let t = (n - n2) / (n2 - n1);
    let (m1, m2) = (0.5 * (a1 + b1), 0.5 * (a2 + b2));
    let (g1, g2) = ((b1 - a1).norm_sqr(), (b2 - a2).norm_sqr());
    let m = m2 + (m2 - m1) * t;
    let g = g2 + (g2 - g1) * t;
    let half = if g > 0.0 { 0.5 * g.sqrt() } else { 0.25 * g2.sqrt() };
    (Complex64::new(m.re - half, 0.0), Complex64::new(m.re + half, 0.0))
}

/// Follow levels `(m, m + 1)` from `n_start` towards `n_stop` and locate
/// the value of `N` at which they stop being real and distinct.
///
/// The walk halves its step after every failure and keeps the step after a
/// success, so a failure caused by a poor seed is retried from closer in.
pub fn locate_degeneracy(cfg: &DegeneracyConfig) -> Result<Degeneracy> {
    if !(cfg.n_step > 0.0 && cfg.tol > 0.0 && cfg.n_start > cfg.n_stop) {
        return Err(Error::InvalidParameter("need n_start > n_stop and positive step and tolerance".into()));
    }
    let fam = family(cfg.n_start, cfg.family, Complex64::new(1.0, 0.0))?;
    let seed = |l| -> Result<Complex64> { Ok(Complex64::new(family_energy(cfg.n_start, &fam, l)?, 0.0)) };
    let (a, b) = real_pair(cfg, cfg.n_start, (seed(cfg.level)?, seed(cfg.level + 1)?))?
        .ok_or_else(|| Error::InvalidParameter(format!("levels are not real at N = {}", cfg.n_start)))?;
    let mut history = vec![(cfg.n_start, a, b)];
    let mut step = cfg.n_step;
    loop {
        let (good_n, _, _) = history[history.len() - 1];
        let n = good_n - step;
        if n < cfg.n_stop - 1e-12 {
            return Err(Error::NoMerger(cfg.level, cfg.level + 1));
        }
        match real_pair(cfg, n, predict(&history, n))? {
            Some((a, b)) => history.push((n, a, b)),
            None if step <= cfg.tol => {
                let (_, a, b) = history[history.len() - 1];
                return Ok(Degeneracy {
                    levels: (cfg.level, cfg.level + 1),
                    n_star: 0.5 * (good_n + n),
                    e_star: 0.5 * (a.re + b.re),
                    bracket: (n, good_n),
                    pair: (a.re, b.re),
                });
            }
            None => step *= 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeEntry {
    #[serde(rename = "N")]
    pub n: f64,
    pub level: usize,
    pub energy: Option<Complex64>,
    pub residue: f64,
    pub converged: bool,
    pub real: bool,
}

/// Solve `levels` of a family at `n0 - delta`, `n0` and `n0 + delta`.
pub fn near_integer_probe(
    k: u32,
    n0: f64,
    delta: f64,
    levels: &[usize],
    radius: RadiusPolicy,
    solver: &SolverConfig,
) -> Result<Vec<ProbeEntry>> {
    let mut out = Vec::new();
    for n in [n0 - delta, n0, n0 + delta] {
        for &level in levels {
            let entry = match solve_at(n, k, level, None, radius, solver) {
                Ok(s) => ProbeEntry {
                    n,
                    level,
                    energy: Some(s.energy()),
                    residue: s.residue,
                    converged: true,
                    real: s.e_im.abs() <= 1e-8 * s.e_re.abs().max(1.0),
                },
                Err(Error::NotConverged(u)) => ProbeEntry {
                    n,
                    level,
                    energy: Some(u.energy),
                    residue: u.residue,
                    converged: false,
                    real: false,
                },
                Err(Error::SingularNormalEquations) | Err(Error::Overflow(_)) => ProbeEntry {
                    n,
                    level,
                    energy: None,
                    residue: f64::NAN,
                    converged: false,
                    real: false,
                },
                Err(e) => return Err(e),
            };
            out.push(entry);
        }
    }
    Ok(out)
}

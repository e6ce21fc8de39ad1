use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use ptwedge::contours::{named_contour, same_endpoints, Contour};
use ptwedge::eigensolver::{crossing_events, solve_from, EigenSolution, SolverConfig};
use ptwedge::integrator::{Discretization, IntegratorConfig};
use ptwedge::potential::PotentialSpec;
use ptwedge::precision::Precision;
use ptwedge::sweep::{locate_degeneracy, run_sweep, DegeneracyConfig, RadiusPolicy, SweepConfig};
use ptwedge::wedges::{family, family_catalog, turning_points, WedgeFamily};
use ptwedge::wkb::{family_energy, trace_stokes_diagram};
use ptwedge::Error;

#[derive(Parser, Debug)]
#[command(name = "ptwedge", version, about = "Eigenvalues of -psi'' - (ix)^N psi = E psi along complex contours")]
struct Cli {
    /// JSON run file `{"command": ..., "parameters": {...}, "format": ...}`; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Stokes wedges, wedge families and turning points.
    Wedges(WedgesArgs),
    /// One eigenvalue of one family.
    Solve(SolveArgs),
    /// Levels of a family over a range of N, or the merger of a level pair.
    Sweep(SweepArgs),
    /// WKB estimates.
    Wkb(WkbArgs),
    /// Stokes and anti-Stokes lines.
    Diagram(DiagramArgs),
    /// The same level on several contours, with crossing events.
    ComparePaths(CompareArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Wedges(_) => "wedges",
            Command::Solve(_) => "solve",
            Command::Sweep(_) => "sweep",
            Command::Wkb(_) => "wkb",
            Command::Diagram(_) => "diagram",
            Command::ComparePaths(_) => "compare-paths",
        }
    }

    fn flags(&self) -> Value {
        let v = match self {
            Command::Wedges(a) => serde_json::to_value(a),
            Command::Solve(a) => serde_json::to_value(a),
            Command::Sweep(a) => serde_json::to_value(a),
            Command::Wkb(a) => serde_json::to_value(a),
            Command::Diagram(a) => serde_json::to_value(a),
            Command::ComparePaths(a) => serde_json::to_value(a),
        };
        v.unwrap_or(Value::Null)
    }
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WedgesArgs {
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<f64>,
    /// Energy used to place the turning points.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    energy: Option<f64>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolveArgs {
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    family: Option<u32>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    level: Option<usize>,
    /// Contour name, e.g. default, real, hyperbolic, sinusoidal, cross-cut.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    contour: Option<String>,
    /// Full contour description; only settable from the run file.
    #[arg(skip)]
    #[serde(skip_serializing_if = "Option::is_none")]
    custom_contour: Option<Contour>,
    /// Endpoint radius; chosen from the decay rate when omitted.
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    r0: Option<f64>,
    /// Starting energy `re[,im]`; WKB when omitted.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    guess: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    steps: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    stages: Option<usize>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    precision: Option<PrecisionArg>,
    /// Also write the converged wavefunction as CSV here.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    trajectory: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepArgs {
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n_start: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n_stop: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n_step: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    family: Option<u32>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    levels: Option<Vec<usize>>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    r0: Option<f64>,
    /// March from n-stop down to n-start.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    march_down: Option<bool>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    continuation: Option<bool>,
    /// Append-only record file; an interrupted sweep resumes from it.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    journal: Option<PathBuf>,
    /// Locate where levels (L, L+1) merge instead of sweeping.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    locate: Option<usize>,
    /// Bracket width in N for --locate.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    tol: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    steps: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    stages: Option<usize>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    precision: Option<PrecisionArg>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WkbArgs {
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<f64>,
    /// Family; all physical families when omitted.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    family: Option<u32>,
    /// Number of levels per family.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    levels: Option<usize>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DiagramArgs {
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    energy: Option<f64>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CompareArgs {
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    family: Option<u32>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    level: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    contours: Option<Vec<String>>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    r0: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    steps: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    stages: Option<usize>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    precision: Option<PrecisionArg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum PrecisionArg {
    Double,
    DoubleDouble,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunFile {
    command: Option<String>,
    #[serde(default)]
    parameters: Map<String, Value>,
    format: Option<Format>,
}

enum Fail {
    Invalid(String),
    Core(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

impl From<io::Error> for Fail {
    fn from(e: io::Error) -> Self {
        Fail::Core(Error::Io(e))
    }
}

impl Fail {
    fn code(&self) -> u8 {
        match self {
            Fail::Invalid(_) => 3,
            Fail::Core(Error::NotConverged(_)) => 2,
            Fail::Core(
                Error::InvalidParameter(_)
                | Error::NonFinite(_)
                | Error::UnknownContour(_)
                | Error::CutViolation(_)
                | Error::NoTurningPointInWedge(_)
                | Error::Domain(_)
                | Error::EndpointMismatch,
            ) => 3,
            Fail::Core(_) => 1,
        }
    }

    fn body(&self) -> Value {
        match self {
            Fail::Invalid(m) => json!({"error": "invalid-config", "message": m}),
            Fail::Core(Error::NotConverged(u)) => json!({
                "error": "not-converged",
                "message": Error::NotConverged(u.clone()).to_string(),
                "E_re": u.energy.re,
                "E_im": u.energy.im,
                "residue": u.residue,
                "iterations": u.iterations,
            }),
            Fail::Core(e) => {
                let kind = if self.code() == 3 { "invalid-config" } else { "failed" };
                json!({"error": kind, "message": e.to_string()})
            }
        }
    }
}

type Out = Result<Output, Fail>;

/// A command's result, ready for either output format.
struct Output {
    json: Value,
    csv: String,
}

fn csv_of<T: Serialize>(rows: &[T]) -> Result<String, Fail> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(Error::from)?;
    }
    let bytes = w.into_inner().map_err(|e| Fail::Core(Error::Io(e.into_error())))?;
    Ok(String::from_utf8_lossy(&bytes).into_owned())
}

fn need<T>(v: Option<T>, name: &str) -> Result<T, Fail> {
    v.ok_or_else(|| Fail::Invalid(format!("missing parameter `{name}`")))
}

fn solver_config(steps: Option<usize>, stages: Option<usize>, precision: Option<PrecisionArg>) -> Result<SolverConfig, Fail> {
    let mut integrator = IntegratorConfig::default();
    if let Some(s) = steps {
        if s == 0 {
            return Err(Fail::Invalid("steps must be positive".into()));
        }
        integrator.steps = s;
    }
    if let Some(s) = stages {
        if !(1..=3).contains(&s) {
            return Err(Fail::Invalid("stages must be 1, 2 or 3".into()));
        }
        integrator.stages = s;
    }
    if let Some(p) = precision {
        integrator.precision = match p {
            PrecisionArg::Double => Precision::Double,
            PrecisionArg::DoubleDouble => Precision::DoubleDouble,
        };
    }
    Ok(SolverConfig { integrator, ..SolverConfig::default() })
}

fn radius(r0: Option<f64>) -> Result<RadiusPolicy, Fail> {
    match r0 {
        Some(r) if !(r.is_finite() && r > 0.0) => Err(Fail::Invalid(format!("r0 must be positive, got {r}"))),
        Some(r) => Ok(RadiusPolicy::Fixed(r)),
        None => Ok(RadiusPolicy::default()),
    }
}

fn cmd_wedges(a: WedgesArgs) -> Out {
    let n = need(a.n, "n")?;
    let e = Complex64::new(a.energy.unwrap_or(1.0), 0.0);
    let spec = PotentialSpec::new(n)?;
    let tps = turning_points(&spec, e)?;
    let fams = family_catalog(n, e)?;
    #[derive(Serialize)]
    struct Row {
        k: u32,
        color: String,
        theta_right: f64,
        theta_left: f64,
        width: f64,
        gamma: Option<f64>,
        hypothetical: bool,
    }
    let rows: Vec<Row> = fams
        .iter()
        .map(|f| Row {
            k: f.k,
            color: f.color.to_string(),
            theta_right: f.theta_right,
            theta_left: f.theta_left,
            width: f.width,
            gamma: f.gamma,
            hypothetical: f.hypothetical,
        })
        .collect();
    let json = json!({
        "N": n,
        "E": e.re,
        "turning_points": tps.iter().map(|t| json!({"re": t.x.re, "im": t.x.im, "angle": t.angle})).collect::<Vec<_>>(),
        "families": serde_json::to_value(&fams).map_err(Error::from)?,
    });
    Ok(Output { json, csv: csv_of(&rows)? })
}

fn contour_for(name: &str, spec: &PotentialSpec, fam: &WedgeFamily, r0: f64) -> Result<Contour, Fail> {
    let c = named_contour(name, spec, fam, r0)?;
    if !c.crosses_cut {
        c.validate(spec)?;
    }
    Ok(c)
}

fn seed_for(n: f64, fam: &WedgeFamily, level: usize, guess: Option<&[f64]>) -> Result<Complex64, Fail> {
    match guess {
        Some([re]) => Ok(Complex64::new(*re, 0.0)),
        Some([re, im]) => Ok(Complex64::new(*re, *im)),
        Some(_) => Err(Fail::Invalid("guess takes one or two numbers".into())),
        None => Ok(Complex64::new(family_energy(n, fam, level)?, 0.0)),
    }
}

fn cmd_solve(a: SolveArgs) -> Out {
    let n = need(a.n, "n")?;
    let k = a.family.unwrap_or(1);
    let level = a.level.unwrap_or(0);
    let spec = PotentialSpec::new(n)?;
    let seed = seed_for(n, &family(n, k, Complex64::new(1.0, 0.0))?, level, a.guess.as_deref())?;
    let fam = family(n, k, seed)?;
    let r0 = radius(a.r0)?.radius(n, seed);
    let contour = match (a.custom_contour, a.contour.as_deref()) {
        (Some(c), _) => c,
        (None, name) => contour_for(name.unwrap_or("default"), &spec, &fam, r0)?,
    };
    let cfg = solver_config(a.steps, a.stages, a.precision)?;
    let sol = solve_from(&spec, &fam, &contour, &cfg, level, seed)?;
    if let Some(path) = a.trajectory {
        let tr = Discretization::new(&spec, &contour, &cfg.integrator)?.trajectory(sol.wide)?;
        tr.write_csv(File::create(path)?)?;
    }
    let json = serde_json::to_value(&sol).map_err(Error::from)?;
    Ok(Output { json, csv: csv_of(&[sol])? })
}

fn cmd_sweep(a: SweepArgs) -> Out {
    let solver = solver_config(a.steps, a.stages, a.precision)?;
    let radius = radius(a.r0)?;
    let family = a.family.unwrap_or(1);
    if let Some(level) = a.locate {
        let d = DegeneracyConfig::default();
        let cfg = DegeneracyConfig {
            family,
            level,
            n_start: a.n_start.unwrap_or(d.n_start),
            n_stop: a.n_stop.unwrap_or(d.n_stop),
            n_step: a.n_step.unwrap_or(d.n_step),
            tol: a.tol.unwrap_or(d.tol),
            radius,
            solver: SolverConfig { retries: 0, ..solver },
        };
        let found = locate_degeneracy(&cfg)?;
        let json = serde_json::to_value(&found).map_err(Error::from)?;
        #[derive(Serialize)]
        struct Row {
            level_low: usize,
            level_high: usize,
            n_star: f64,
            e_star: f64,
            bracket_width: f64,
        }
        let row = Row {
            level_low: found.levels.0,
            level_high: found.levels.1,
            n_star: found.n_star,
            e_star: found.e_star,
            bracket_width: found.bracket.1 - found.bracket.0,
        };
        return Ok(Output { json, csv: csv_of(&[row])? });
    }
    let d = SweepConfig::default();
    let cfg = SweepConfig {
        n_start: a.n_start.unwrap_or(d.n_start),
        n_stop: a.n_stop.unwrap_or(d.n_stop),
        n_step: a.n_step.unwrap_or(d.n_step),
        march_down: a.march_down.unwrap_or(d.march_down),
        family,
        levels: a.levels.unwrap_or(d.levels),
        continuation: a.continuation.unwrap_or(d.continuation),
        radius,
        solver,
        output_path: a.journal,
    };
    let res = run_sweep(&cfg)?;
    let mut csv = Vec::new();
    res.write_csv(&mut csv)?;
    let json = serde_json::to_value(&res).map_err(Error::from)?;
    Ok(Output { json, csv: String::from_utf8_lossy(&csv).into_owned() })
}

fn cmd_wkb(a: WkbArgs) -> Out {
    let n = need(a.n, "n")?;
    let count = a.levels.unwrap_or(5);
    let e1 = Complex64::new(1.0, 0.0);
    let fams = match a.family {
        Some(k) => vec![family(n, k, e1)?],
        None => family_catalog(n, e1)?.into_iter().filter(|f| !f.hypothetical && f.gamma.is_some()).collect(),
    };
    #[derive(Serialize)]
    struct Row {
        family: u32,
        level: usize,
        gamma: f64,
        energy: f64,
    }
    let mut rows = Vec::new();
    for f in &fams {
        for level in 0..count {
            rows.push(Row { family: f.k, level, gamma: f.gamma()?, energy: family_energy(n, f, level)? });
        }
    }
    let json = json!({"N": n, "levels": serde_json::to_value(&rows).map_err(Error::from)?});
    Ok(Output { json, csv: csv_of(&rows)? })
}

fn cmd_diagram(a: DiagramArgs) -> Out {
    let n = need(a.n, "n")?;
    let spec = PotentialSpec::new(n)?;
    let d = trace_stokes_diagram(&spec, Complex64::new(a.energy.unwrap_or(1.0), 0.0))?;
    #[derive(Serialize)]
    struct Row {
        line: usize,
        kind: &'static str,
        from: usize,
        to: Option<usize>,
        re: f64,
        im: f64,
    }
    let mut rows = Vec::new();
    for (j, l) in d.lines.iter().enumerate() {
        let kind = match l.kind {
            ptwedge::wkb::LineKind::Stokes => "stokes",
            ptwedge::wkb::LineKind::AntiStokes => "anti-stokes",
        };
        for p in &l.points {
            rows.push(Row { line: j, kind, from: l.from, to: l.to, re: p[0], im: p[1] });
        }
    }
    let json = serde_json::to_value(&d).map_err(Error::from)?;
    Ok(Output { json, csv: csv_of(&rows)? })
}

#[derive(Serialize)]
struct PathRow {
    contour: String,
    crosses_cut: bool,
    status: String,
    #[serde(rename = "E_re")]
    e_re: f64,
    #[serde(rename = "E_im")]
    e_im: f64,
    residue: f64,
}

fn cmd_compare(a: CompareArgs) -> Out {
    let n = need(a.n, "n")?;
    let k = a.family.unwrap_or(1);
    let level = a.level.unwrap_or(0);
    let spec = PotentialSpec::new(n)?;
    let seed = seed_for(n, &family(n, k, Complex64::new(1.0, 0.0))?, level, None)?;
    let fam = family(n, k, seed)?;
    let r0 = radius(a.r0)?.radius(n, seed);
    let cfg = solver_config(a.steps, a.stages, a.precision)?;
    let names = a
        .contours
        .unwrap_or_else(|| ["real", "sinusoidal", "polynomial", "hyperbolic"].map(String::from).to_vec());
    let mut rows = Vec::new();
    let mut solved: Vec<(Contour, EigenSolution)> = Vec::new();
    for name in &names {
        let c = contour_for(name, &spec, &fam, r0)?;
        let (status, e, residue) = match solve_from(&spec, &fam, &c, &cfg, level, seed) {
            Ok(s) => {
                let out = ("converged".to_string(), s.energy(), s.residue);
                solved.push((c.clone(), s));
                out
            }
            Err(Error::NotConverged(u)) => ("not-converged".to_string(), u.energy, u.residue),
            Err(e @ (Error::SingularNormalEquations | Error::Overflow(_))) => {
                (format!("failed: {e}"), Complex64::new(f64::NAN, f64::NAN), f64::NAN)
            }
            Err(e) => return Err(e.into()),
        };
        rows.push(PathRow {
            contour: c.label.clone(),
            crosses_cut: c.crosses_cut,
            status,
            e_re: e.re,
            e_im: e.im,
            residue,
        });
    }
    let clean: Vec<&(Contour, EigenSolution)> = solved.iter().filter(|(c, _)| !c.crosses_cut).collect();
    let spread = clean
        .iter()
        .flat_map(|(_, a)| clean.iter().map(move |(_, b)| (a.energy() - b.energy()).norm()))
        .fold(0.0, f64::max);
    let mut crossings = Vec::new();
    for (i, (c1, s1)) in clean.iter().enumerate() {
        for (c2, _) in clean.iter().skip(i + 1) {
            let entry = if !same_endpoints(c1, c2) {
                json!({"a": c1.label, "b": c2.label, "note": "contours do not share endpoints"})
            } else {
                match crossing_events(&spec, c1, c2, s1.wide, &cfg.integrator) {
                    Ok(ev) => {
                        let worst = ev.iter().map(|e| e.gap / e.amplitude).fold(0.0, f64::max);
                        json!({"a": c1.label, "b": c2.label, "count": ev.len(), "max_relative_gap": worst, "events": ev})
                    }
                    Err(e) => json!({"a": c1.label, "b": c2.label, "note": e.to_string()}),
                }
            };
            crossings.push(entry);
        }
    }
    let json = json!({
        "N": n,
        "family": k,
        "level": level,
        "r0": r0,
        "paths": serde_json::to_value(&rows).map_err(Error::from)?,
        "spread": spread,
        "path_independent": clean.len() >= 2 && spread <= 1e-10,
        "crossings": crossings,
    });
    Ok(Output { json, csv: csv_of(&rows)? })
}

fn parse_into<T: DeserializeOwned>(v: Value) -> Result<T, Fail> {
    serde_json::from_value(v).map_err(|e| Fail::Invalid(e.to_string()))
}

fn run(cli: Cli) -> Result<(Output, Format), Fail> {
    let file = match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Fail::Invalid(format!("{}: {e}", p.display())))?;
            serde_json::from_str::<RunFile>(&text).map_err(|e| Fail::Invalid(format!("{}: {e}", p.display())))?
        }
        None => RunFile::default(),
    };
    let name = match (&cli.command, &file.command) {
        (Some(c), Some(f)) if c.name() != f => {
            return Err(Fail::Invalid(format!("run file is for `{f}` but `{}` was requested", c.name())))
        }
        (Some(c), _) => c.name().to_string(),
        (None, Some(f)) => f.clone(),
        (None, None) => return Err(Fail::Invalid("no command given".into())),
    };
    let mut params = file.parameters;
    if let Some(Value::Object(flags)) = cli.command.as_ref().map(Command::flags) {
        params.extend(flags);
    }
    let params = Value::Object(params);
    let format = cli.format.or(file.format).unwrap_or_default();
    let out = match name.as_str() {
        "wedges" => cmd_wedges(parse_into(params)?),
        "solve" => cmd_solve(parse_into(params)?),
        "sweep" => cmd_sweep(parse_into(params)?),
        "wkb" => cmd_wkb(parse_into(params)?),
        "diagram" => cmd_diagram(parse_into(params)?),
        "compare-paths" => cmd_compare(parse_into(params)?),
        other => Err(Fail::Invalid(format!("unknown command `{other}`"))),
    }?;
    Ok((out, format))
}

fn emit(out: &Output, format: Format, path: Option<&PathBuf>) -> io::Result<()> {
    let text = match format {
        Format::Json => format!("{}\n", serde_json::to_string_pretty(&out.json)?),
        Format::Csv => out.csv.clone(),
    };
    match path {
        Some(p) => File::create(p)?.write_all(text.as_bytes()),
        None => io::stdout().lock().write_all(text.as_bytes()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // Help and version requests are not errors; anything else is a bad invocation.
            return if e.use_stderr() { ExitCode::from(3) } else { ExitCode::SUCCESS };
        }
    };
    let out_path = cli.out.clone();
    match run(cli) {
        Ok((out, format)) => match emit(&out, format, out_path.as_ref()) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) if e.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("ptwedge: {e}");
                ExitCode::from(1)
            }
        },
        Err(f) => {
            println!("{}", f.body());
            ExitCode::from(f.code())
        }
    }
}

//! Integration paths in the complex `x` plane.
//!
//! Every contour is a map `p ↦ x(p)` on a real interval with an analytic
//! tangent. Piecewise paths expose their kinks through [`Contour::breakpoints`]
//! so the integrator can put step boundaries there.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::{on_cut, PotentialSpec};
use crate::wedges::WedgeFamily;

/// Default vertex depth of the hyperbolic path.
pub const HYPERBOLA_DEPTH: f64 = 0.2;
/// Default `(c, t)` of the rational-sqrt path.
pub const RATIONAL_C: f64 = 0.1;
pub const RATIONAL_T: f64 = 8.0;
/// Default sinusoid: amplitude and number of half periods between the endpoints.
pub const SINE_AMPLITUDE: f64 = 0.35;
pub const SINE_HALF_PERIODS: u32 = 10;
/// Height at which the default cross-cut path meets the positive imaginary axis.
pub const CROSS_CUT_HEIGHT: f64 = 1.766026245535;
/// Default knot shape.
pub const KNOT_SCALE: f64 = 0.1;
pub const KNOT_EXTENT: f64 = PI;
pub const KNOT_ROTATION: f64 = 0.3;
/// Default cubic for the asymmetric polynomial path (before the endpoint fit).
pub const POLY_COEFFS: [f64; 4] = [0.0, 0.25, 0.06, -0.02];

const CUT_SAMPLES: usize = 4000;
const INTERSECT_SAMPLES: usize = 2048;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "kebab-case")]
pub enum ContourKind {
    /// `x = p`, `p ∈ [-half_width, half_width]`.
    RealAxis { half_width: f64 },
    /// Straight segment, parametrised by arc length.
    Line { start: Complex64, end: Complex64 },
    /// Broken line through the vertices, parametrised by arc length.
    Polyline { vertices: Vec<Complex64> },
    /// `x = X ∓ i sqrt(depth² + X² slope²)`, `X ∈ [-re_extent, re_extent]`,
    /// with the upper sign unless `upward`.
    Hyperbolic {
        depth: f64,
        slope: f64,
        re_extent: f64,
        #[serde(default)]
        upward: bool,
    },
    /// `x = X + i (X² - c)/sqrt(X²/tan²θ + t)`.
    RationalSqrt { c: f64, t: f64, theta: f64, re_extent: f64 },
    /// Hyperbola through the endpoints plus `amplitude · sin`, vanishing at both ends.
    Sinusoidal {
        start: Complex64,
        end: Complex64,
        amplitude: f64,
        half_periods: u32,
        depth: f64,
    },
    /// `Im x = P(Re x) + α + β Re x` with `α, β` fitted to the endpoints.
    Polynomial { start: Complex64, end: Complex64, coeffs: Vec<f64> },
    /// The curve `(p - 2 sin p, scale·p²)`, rotated and mapped onto the endpoints.
    Knot {
        start: Complex64,
        end: Complex64,
        rotation: f64,
        scale: f64,
        p_extent: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contour {
    #[serde(flatten)]
    pub kind: ContourKind,
    pub label: String,
    /// Set for paths that are meant to cross the branch cut.
    #[serde(default)]
    pub crosses_cut: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intersection {
    pub x: Complex64,
    pub p1: f64,
    pub p2: f64,
}

impl Contour {
    pub fn new(kind: ContourKind, label: impl Into<String>) -> Result<Self> {
        let c = Contour { kind, label: label.into(), crosses_cut: false };
        c.check_params()?;
        Ok(c)
    }

    pub fn interval(&self) -> (f64, f64) {
        match &self.kind {
            ContourKind::RealAxis { half_width } => (-half_width, *half_width),
            ContourKind::Line { start, end } => (0.0, (end - start).norm()),
            ContourKind::Polyline { vertices } => {
                (0.0, vertices.windows(2).map(|w| (w[1] - w[0]).norm()).sum())
            }
            ContourKind::Hyperbolic { re_extent, .. } | ContourKind::RationalSqrt { re_extent, .. } => {
                (-re_extent, *re_extent)
            }
            ContourKind::Sinusoidal { start, end, .. } | ContourKind::Polynomial { start, end, .. } => {
                (start.re, end.re)
            }
            ContourKind::Knot { p_extent, .. } => (-p_extent, *p_extent),
        }
    }

    /// Interior parameters where the tangent is discontinuous.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.kind {
            ContourKind::Polyline { vertices } => {
                let mut acc = 0.0;
                let mut out = Vec::new();
                for w in vertices.windows(2).take(vertices.len().saturating_sub(2)) {
                    acc += (w[1] - w[0]).norm();
                    out.push(acc);
                }
                out
            }
            _ => Vec::new(),
        }
    }

    pub fn point(&self, p: f64) -> Complex64 {
        self.eval(p).0
    }

    pub fn tangent(&self, p: f64) -> Complex64 {
        self.eval(p).1
    }

    pub fn start(&self) -> Complex64 {
        self.point(self.interval().0)
    }

    pub fn end(&self) -> Complex64 {
        self.point(self.interval().1)
    }

    /// `(x(p), dx/dp)`.
    pub fn eval(&self, p: f64) -> (Complex64, Complex64) {
        let i = Complex64::i();
        match &self.kind {
            ContourKind::RealAxis { .. } => (Complex64::new(p, 0.0), Complex64::new(1.0, 0.0)),
            ContourKind::Line { start, end } => {
                let u = (end - start) / (end - start).norm();
                (start + u * p, u)
            }
            ContourKind::Polyline { vertices } => {
                let mut acc = 0.0;
                let last = vertices.len() - 2;
                for (j, w) in vertices.windows(2).enumerate() {
                    let len = (w[1] - w[0]).norm();
                    if p <= acc + len || j == last {
                        let u = (w[1] - w[0]) / len;
                        return (w[0] + u * (p - acc), u);
                    }
                    acc += len;
                }
                unreachable!("polyline has at least two vertices")
            }
            ContourKind::Hyperbolic { depth, slope, upward, .. } => {
                let r = (depth * depth + p * p * slope * slope).sqrt();
                let sg = if *upward { 1.0 } else { -1.0 };
                (Complex64::new(p, sg * r), Complex64::new(1.0, sg * p * slope * slope / r))
            }
            ContourKind::RationalSqrt { c, t, theta, .. } => {
                let k = 1.0 / theta.tan().powi(2);
                let s = (k * p * p + t).sqrt();
                let y = (p * p - c) / s;
                let dy = 2.0 * p / s - (p * p - c) * k * p / (s * s * s);
                (Complex64::new(p, y), Complex64::new(1.0, dy))
            }
            ContourKind::Sinusoidal { start, end, amplitude, half_periods, depth } => {
                let b = SineBase::new(*start, *end, *depth);
                let w = PI * *half_periods as f64 / (end.re - start.re);
                let ph = w * (p - start.re);
                let (y, dy) = b.eval(p);
                (
                    Complex64::new(p, y + amplitude * ph.sin()),
                    Complex64::new(1.0, dy + amplitude * w * ph.cos()),
                )
            }
            ContourKind::Polynomial { start, end, coeffs } => {
                let (alpha, beta) = poly_fit(*start, *end, coeffs);
                let (y, dy) = poly_eval(coeffs, p);
                (Complex64::new(p, y + alpha + beta * p), Complex64::new(1.0, dy + beta))
            }
            ContourKind::Knot { start, end, rotation, scale, p_extent } => {
                let rot = Complex64::from_polar(1.0, *rotation);
                let base = |s: f64| rot * Complex64::new(s - 2.0 * s.sin(), scale * s * s);
                let q0 = base(-p_extent);
                let q1 = base(*p_extent);
                let m = (end - start) / (q1 - q0);
                let x = start + m * (base(p) - q0);
                let dx = m * rot * (Complex64::new(1.0 - 2.0 * p.cos(), 0.0) + i * (2.0 * scale * p));
                (x, dx)
            }
        }
    }

    /// `n + 1` evenly spaced samples `(p, x)` including both endpoints.
    pub fn samples(&self, n: usize) -> Vec<(f64, Complex64)> {
        let (a, b) = self.interval();
        let n = n.max(1);
        (0..=n)
            .map(|j| {
                let p = a + (b - a) * j as f64 / n as f64;
                (p, self.point(p))
            })
            .collect()
    }

    /// Rejects paths that cross the positive imaginary axis when the potential has a cut.
    pub fn validate(&self, spec: &PotentialSpec) -> Result<()> {
        self.check_params()?;
        if !spec.has_cut() || self.crosses_cut {
            return Ok(());
        }
        match self.find_cut_crossing() {
            Some(x) => Err(Error::CutViolation(x)),
            None => Ok(()),
        }
    }

    /// First point where the path meets the positive imaginary axis, if any.
    pub fn find_cut_crossing(&self) -> Option<Complex64> {
        let mut pts: Vec<(f64, Complex64)> = self.samples(CUT_SAMPLES);
        for b in self.breakpoints() {
            pts.push((b, self.point(b)));
        }
        pts.sort_by(|u, v| u.0.total_cmp(&v.0));
        for (_, x) in &pts {
            if on_cut(*x) {
                return Some(*x);
            }
        }
        for w in pts.windows(2) {
            let (x0, x1) = (w[0].1, w[1].1);
            if x0.re.signum() != x1.re.signum() && x0.re != 0.0 && x1.re != 0.0 {
                let s = x0.re / (x0.re - x1.re);
                let y = x0.im + s * (x1.im - x0.im);
                if y > 0.0 {
                    return Some(Complex64::new(0.0, y));
                }
            }
        }
        None
    }

    fn check_params(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(format!("{}: {m}", self.label)));
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match &self.kind {
            ContourKind::RealAxis { half_width } => {
                if !(finite(&[*half_width]) && *half_width > 0.0) {
                    return bad("half width must be positive");
                }
            }
            ContourKind::Line { start, end } => {
                if !finite(&[start.re, start.im, end.re, end.im]) || start == end {
                    return bad("line needs two distinct finite endpoints");
                }
            }
            ContourKind::Polyline { vertices } => {
                if vertices.len() < 2
                    || vertices.iter().any(|v| !finite(&[v.re, v.im]))
                    || vertices.windows(2).any(|w| w[0] == w[1])
                {
                    return bad("polyline needs distinct finite vertices");
                }
            }
            ContourKind::Hyperbolic { depth, slope, re_extent, .. } => {
                if !finite(&[*depth, *slope, *re_extent]) || *re_extent <= 0.0 || *depth < 0.0 {
                    return bad("hyperbola needs depth >= 0 and positive extent");
                }
            }
            ContourKind::RationalSqrt { c, t, theta, re_extent } => {
                if !finite(&[*c, *t, *theta, *re_extent])
                    || *t <= 0.0
                    || *re_extent <= 0.0
                    || theta.tan() == 0.0
                {
                    return bad("rational-sqrt needs t > 0, theta != 0 and positive extent");
                }
            }
            ContourKind::Sinusoidal { start, end, amplitude, depth, .. } => {
                if !finite(&[start.re, start.im, end.re, end.im, *amplitude, *depth]) || end.re <= start.re {
                    return bad("sinusoid needs Re(end) > Re(start)");
                }
            }
            ContourKind::Polynomial { start, end, coeffs } => {
                if !finite(&[start.re, start.im, end.re, end.im]) || !finite(coeffs) || end.re <= start.re {
                    return bad("polynomial needs Re(end) > Re(start)");
                }
            }
            ContourKind::Knot { start, end, rotation, scale, p_extent } => {
                if !finite(&[start.re, start.im, end.re, end.im, *rotation, *scale, *p_extent])
                    || *p_extent <= 0.0
                    || start == end
                {
                    return bad("knot needs distinct endpoints and positive extent");
                }
            }
        }
        Ok(())
    }
}

struct SineBase {
    slope2: f64,
    depth: f64,
    alpha: f64,
    beta: f64,
}

impl SineBase {
    fn new(start: Complex64, end: Complex64, depth: f64) -> Self {
        let ratio = |z: Complex64| if z.re == 0.0 { 0.0 } else { (z.im / z.re).abs() };
        let slope = 0.5 * (ratio(start) + ratio(end));
        let mut b = SineBase { slope2: slope * slope, depth, alpha: 0.0, beta: 0.0 };
        let ra = start.im - b.hyper(start.re).0;
        let rb = end.im - b.hyper(end.re).0;
        b.beta = (rb - ra) / (end.re - start.re);
        b.alpha = ra - b.beta * start.re;
        b
    }

    fn hyper(&self, x: f64) -> (f64, f64) {
        let r = (self.depth * self.depth + x * x * self.slope2).sqrt();
        if r == 0.0 {
            (0.0, 0.0)
        } else {
            (-r, -x * self.slope2 / r)
        }
    }

    fn eval(&self, x: f64) -> (f64, f64) {
        let (y, dy) = self.hyper(x);
        (y + self.alpha + self.beta * x, dy + self.beta)
    }
}

fn poly_eval(coeffs: &[f64], x: f64) -> (f64, f64) {
    let mut y = 0.0;
    let mut dy = 0.0;
    for &c in coeffs.iter().rev() {
        dy = dy * x + y;
        y = y * x + c;
    }
    (y, dy)
}

fn poly_fit(start: Complex64, end: Complex64, coeffs: &[f64]) -> (f64, f64) {
    let ra = start.im - poly_eval(coeffs, start.re).0;
    let rb = end.im - poly_eval(coeffs, end.re).0;
    let beta = (rb - ra) / (end.re - start.re);
    (ra - beta * start.re, beta)
}

pub fn real_axis(half_width: f64) -> Result<Contour> {
    Contour::new(ContourKind::RealAxis { half_width }, "real")
}

pub fn line(start: Complex64, end: Complex64) -> Result<Contour> {
    Contour::new(ContourKind::Line { start, end }, "line")
}

pub fn polyline(vertices: Vec<Complex64>) -> Result<Contour> {
    Contour::new(ContourKind::Polyline { vertices }, "polyline")
}

/// Two straight legs along the Stokes lines of `fam`, joined at `apex`.
pub fn polyline_v(fam: &WedgeFamily, r: f64, apex: Complex64) -> Result<Contour> {
    let c = Contour::new(
        ContourKind::Polyline { vertices: vec![fam.left_point(r), apex, fam.right_point(r)] },
        "polyline-v",
    )?;
    Ok(c)
}

/// Path from the left to the right Stokes point that passes over the cut at `i·height`.
pub fn cross_cut(fam: &WedgeFamily, r: f64, height: f64) -> Result<Contour> {
    if !(height.is_finite() && height > 0.0) {
        return Err(Error::InvalidParameter(format!("cross-cut height must be positive, got {height}")));
    }
    let mut c = Contour::new(
        ContourKind::Polyline {
            vertices: vec![fam.left_point(r), Complex64::new(0.0, height), fam.right_point(r)],
        },
        "cross-cut",
    )?;
    c.crosses_cut = true;
    Ok(c)
}

/// Hyperbola asymptotic to the rays at angle `theta` and `π - theta`.
/// It opens downwards for `theta < 0` and upwards otherwise.
pub fn hyperbolic(depth: f64, theta: f64, re_extent: f64) -> Result<Contour> {
    Contour::new(
        ContourKind::Hyperbolic { depth, slope: theta.tan().abs(), re_extent, upward: theta > 0.0 },
        "hyperbolic",
    )
}

/// Hyperbola with vertex `-i·depth` passing through `end` and its mirror `-conj(end)`.
pub fn hyperbolic_through(depth: f64, end: Complex64) -> Result<Contour> {
    if end.im > -depth || end.re <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "endpoint {end} must lie right of and below the vertex -{depth}i"
        )));
    }
    let slope = (end.im * end.im - depth * depth).sqrt() / end.re;
    Contour::new(ContourKind::Hyperbolic { depth, slope, re_extent: end.re, upward: false }, "hyperbolic")
}

pub fn rational_sqrt(c: f64, t: f64, theta: f64, re_extent: f64) -> Result<Contour> {
    Contour::new(ContourKind::RationalSqrt { c, t, theta, re_extent }, "rational-sqrt")
}

/// Rational-sqrt curve through `end` (upper half plane, `Re end > 0`).
///
/// Keeps the offset `c` and uses `t_max` unless the endpoint is too close to
/// the origin for it, then tilts the asymptote so the curve meets `end`.
pub fn rational_sqrt_through(c: f64, t_max: f64, end: Complex64) -> Result<Contour> {
    let (xb, yb) = (end.re, end.im);
    if !(xb > 0.0 && yb > 0.0 && xb * xb > c) {
        return Err(Error::InvalidParameter(format!("rational-sqrt path cannot reach {end}")));
    }
    let q = (xb * xb - c) / yb;
    let t = t_max.min(0.25 * q * q);
    let k = (q * q - t) / (xb * xb);
    rational_sqrt(c, t, (1.0 / k.sqrt()).atan(), xb)
}

/// Vertex distance that puts the hyperbola with asymptote angle `theta` through
/// the family's right turning point, never shallower than [`HYPERBOLA_DEPTH`].
pub fn turning_point_depth(fam: &WedgeFamily, theta: f64) -> f64 {
    let slope = theta.tan().abs();
    fam.turning_right
        .filter(|t| t.im * theta > 0.0)
        .map(|t| t.im * t.im - slope * slope * t.re * t.re)
        .filter(|&d2| d2 > HYPERBOLA_DEPTH * HYPERBOLA_DEPTH)
        .map_or(HYPERBOLA_DEPTH, f64::sqrt)
}

pub fn sinusoidal(start: Complex64, end: Complex64, amplitude: f64, half_periods: u32, depth: f64) -> Result<Contour> {
    Contour::new(
        ContourKind::Sinusoidal { start, end, amplitude, half_periods, depth },
        "sinusoidal",
    )
}

pub fn polynomial(start: Complex64, end: Complex64, coeffs: Vec<f64>) -> Result<Contour> {
    Contour::new(ContourKind::Polynomial { start, end, coeffs }, "polynomial")
}

pub fn knot(start: Complex64, end: Complex64, rotation: f64, scale: f64, p_extent: f64) -> Result<Contour> {
    Contour::new(ContourKind::Knot { start, end, rotation, scale, p_extent }, "knot")
}

/// Default path for a family at radius `r0`.
///
/// Family 1 uses the rational-sqrt curve for `N <= 1.6`, the real axis for
/// `1.6 < N < 3` and the hyperbola for `N >= 3`. Higher families use the
/// real axis when their Stokes line lies within a third of the wedge width of
/// the real axis and the hyperbola when it points down. When it points up
/// they use the upward hyperbola for integer `N`, where there is no cut, and
/// the rational-sqrt curve otherwise. Hyperbolas pass through the turning
/// points of `fam`, so `fam` should be built at the target energy.
pub fn default_contour(spec: &PotentialSpec, fam: &WedgeFamily, r0: f64) -> Result<Contour> {
    let n = spec.n;
    let th = fam.theta_right;
    let hyper = || hyperbolic(turning_point_depth(fam, th), th, r0 * th.cos());
    let rational = || rational_sqrt_through(RATIONAL_C, RATIONAL_T, fam.right_point(r0));
    let c = if fam.k == 1 {
        if n <= 1.6 {
            rational()?
        } else if n < 3.0 {
            real_axis(r0)?
        } else {
            hyper()?
        }
    } else if th.abs() < fam.width / 3.0 {
        real_axis(r0)?
    } else if th < 0.0 || !spec.has_cut() {
        hyper()?
    } else {
        rational()?
    };
    c.validate(spec)?;
    Ok(c)
}

/// Parse a contour name as used on the command line.
pub fn named_contour(name: &str, spec: &PotentialSpec, fam: &WedgeFamily, r0: f64) -> Result<Contour> {
    let th = fam.theta_right;
    let (a, b) = (fam.left_point(r0), fam.right_point(r0));
    let c = match name {
        "default" => default_contour(spec, fam, r0)?,
        "real" => real_axis(r0)?,
        "hyperbolic" => hyperbolic(HYPERBOLA_DEPTH, th, r0 * th.cos())?,
        "rational-sqrt" => rational_sqrt_through(RATIONAL_C, RATIONAL_T, b)?,
        "sinusoidal" => {
            let depth = if b.im.abs() > HYPERBOLA_DEPTH { HYPERBOLA_DEPTH } else { 0.0 };
            sinusoidal(a, b, SINE_AMPLITUDE, SINE_HALF_PERIODS, depth)?
        }
        "polynomial" => polynomial(a, b, POLY_COEFFS.to_vec())?,
        "knot" => knot(a, b, 0.0, KNOT_SCALE, KNOT_EXTENT)?,
        "knot-rotated" => knot(a, b, KNOT_ROTATION, KNOT_SCALE, KNOT_EXTENT)?,
        "line" => line(a, Complex64::new(r0, 0.0))?,
        "polyline-v" => polyline_v(fam, r0, Complex64::new(0.0, 0.0))?,
        "cross-cut" => cross_cut(fam, r0, CROSS_CUT_HEIGHT)?,
        other => return Err(Error::UnknownContour(other.to_string())),
    };
    Ok(if name == "default" { c } else { Contour { label: name.to_string(), ..c } })
}

pub const CONTOUR_NAMES: [&str; 11] = [
    "default",
    "real",
    "hyperbolic",
    "rational-sqrt",
    "sinusoidal",
    "polynomial",
    "knot",
    "knot-rotated",
    "line",
    "polyline-v",
    "cross-cut",
];

fn sample_with_breaks(c: &Contour, n: usize) -> Vec<f64> {
    let mut ps: Vec<f64> = c.samples(n).into_iter().map(|s| s.0).collect();
    ps.extend(c.breakpoints());
    ps.sort_by(|a, b| a.total_cmp(b));
    ps.dedup();
    ps
}

struct Chunk {
    lo: Complex64,
    hi: Complex64,
    first: usize,
    last: usize,
}

fn chunks(pts: &[Complex64], size: usize) -> Vec<Chunk> {
    let mut out = Vec::new();
    let mut i = 0;
    while i + 1 < pts.len() {
        let last = (i + size).min(pts.len() - 1);
        let mut lo = pts[i];
        let mut hi = pts[i];
        for z in &pts[i..=last] {
            lo = Complex64::new(lo.re.min(z.re), lo.im.min(z.im));
            hi = Complex64::new(hi.re.max(z.re), hi.im.max(z.im));
        }
        out.push(Chunk { lo, hi, first: i, last });
        i = last;
    }
    out
}

fn boxes_meet(a: &Chunk, b: &Chunk, pad: f64) -> bool {
    a.lo.re <= b.hi.re + pad && b.lo.re <= a.hi.re + pad && a.lo.im <= b.hi.im + pad && b.lo.im <= a.hi.im + pad
}

fn cross(a: Complex64, b: Complex64) -> f64 {
    a.re * b.im - a.im * b.re
}

enum SegHit {
    None,
    At(f64, f64),
    Overlap,
}

fn segment_hit(a0: Complex64, a1: Complex64, b0: Complex64, b1: Complex64) -> SegHit {
    let da = a1 - a0;
    let db = b1 - b0;
    let den = cross(da, db);
    let scale = da.norm() * db.norm();
    if den.abs() <= 1e-12 * scale {
        let off = cross(b0 - a0, da).abs() / da.norm();
        if off > 1e-10 * (1.0 + a0.norm()) {
            return SegHit::None;
        }
        let la = da.norm_sqr();
        let t0 = ((b0 - a0) * da.conj()).re / la;
        let t1 = ((b1 - a0) * da.conj()).re / la;
        let (lo, hi) = (t0.min(t1).max(0.0), t0.max(t1).min(1.0));
        return if (hi - lo) * da.norm() > 1e-9 { SegHit::Overlap } else { SegHit::None };
    }
    let s = cross(b0 - a0, db) / den;
    let t = cross(b0 - a0, da) / den;
    if (-1e-12..=1.0 + 1e-12).contains(&s) && (-1e-12..=1.0 + 1e-12).contains(&t) {
        SegHit::At(s, t)
    } else {
        SegHit::None
    }
}

fn refine(c1: &Contour, c2: &Contour, mut p1: f64, mut p2: f64) -> Option<(f64, f64)> {
    let (a1, b1) = c1.interval();
    let (a2, b2) = c2.interval();
    for _ in 0..40 {
        let (x1, d1) = c1.eval(p1);
        let (x2, d2) = c2.eval(p2);
        let f = x1 - x2;
        if f.norm() < 1e-13 * (1.0 + x1.norm()) {
            return Some((p1, p2));
        }
        let det = d1.re * (-d2.im) - (-d2.re) * d1.im;
        if det.abs() < 1e-300 {
            return None;
        }
        let dp1 = (-f.re * (-d2.im) + d2.re * -f.im) / det;
        let dp2 = (d1.re * -f.im + d1.im * f.re) / det;
        p1 = (p1 + dp1).clamp(a1, b1);
        p2 = (p2 + dp2).clamp(a2, b2);
    }
    let f = c1.point(p1) - c2.point(p2);
    (f.norm() < 1e-10).then_some((p1, p2))
}

fn near_endpoint(x: Complex64, ends: &[Complex64]) -> bool {
    ends.iter().any(|e| (x - e).norm() < 1e-8 * (1.0 + x.norm()))
}

fn collect_hits(c1: &Contour, c2: &Contour, same: bool) -> Result<Vec<Intersection>> {
    let ps1 = sample_with_breaks(c1, INTERSECT_SAMPLES);
    let ps2 = sample_with_breaks(c2, INTERSECT_SAMPLES);
    let x1: Vec<Complex64> = ps1.iter().map(|&p| c1.point(p)).collect();
    let x2: Vec<Complex64> = ps2.iter().map(|&p| c2.point(p)).collect();
    let ends = [c1.start(), c1.end(), c2.start(), c2.end()];
    let ch1 = chunks(&x1, 32);
    let ch2 = chunks(&x2, 32);
    let mut raw = Vec::new();
    for a in &ch1 {
        for b in &ch2 {
            if !boxes_meet(a, b, 1e-12) {
                continue;
            }
            for i in a.first..a.last {
                for j in b.first..b.last {
                    if same && j <= i + 1 {
                        continue;
                    }
                    match segment_hit(x1[i], x1[i + 1], x2[j], x2[j + 1]) {
                        SegHit::None => {}
                        SegHit::Overlap => {
                            if !same {
                                return Err(Error::DegenerateOverlap);
                            }
                        }
                        SegHit::At(s, t) => {
                            let p1 = ps1[i] + s * (ps1[i + 1] - ps1[i]);
                            let p2 = ps2[j] + t * (ps2[j + 1] - ps2[j]);
                            if let Some((q1, q2)) = refine(c1, c2, p1, p2) {
                                let x = c1.point(q1);
                                if !near_endpoint(x, &ends) && (!same || (q1 - q2).abs() > 1e-6) {
                                    raw.push(Intersection { x, p1: q1, p2: q2 });
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    raw.sort_by(|a, b| a.p1.total_cmp(&b.p1));
    let mut out: Vec<Intersection> = Vec::new();
    for h in raw {
        if out.iter().all(|o| (o.x - h.x).norm() > 1e-8) {
            out.push(h);
        }
    }
    Ok(out)
}

/// Transversal crossings of two contours, excluding shared endpoints.
pub fn intersections(c1: &Contour, c2: &Contour) -> Result<Vec<Intersection>> {
    collect_hits(c1, c2, false)
}

/// Points where a contour crosses itself, reported once each with `p1 < p2`.
pub fn self_intersections(c: &Contour) -> Result<Vec<Intersection>> {
    let hits = collect_hits(c, c, true)?;
    let mut out: Vec<Intersection> = Vec::new();
    for h in hits {
        let (p1, p2) = if h.p1 < h.p2 { (h.p1, h.p2) } else { (h.p2, h.p1) };
        if out.iter().all(|o| (o.x - h.x).norm() > 1e-8) {
            out.push(Intersection { x: h.x, p1, p2 });
        }
    }
    Ok(out)
}

/// Whether two contours start and end at the same points.
pub fn same_endpoints(c1: &Contour, c2: &Contour) -> bool {
    let tol = 1e-9 * (1.0 + c1.start().norm().max(c1.end().norm()));
    (c1.start() - c2.start()).norm() <= tol && (c1.end() - c2.end()).norm() <= tol
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wedges::family;

    fn fam(n: f64, k: u32) -> WedgeFamily {
        family(n, k, Complex64::new(1.0, 0.0)).unwrap()
    }

    #[test]
    fn tangents_match_finite_differences() {
        let f3 = fam(3.0, 1);
        let (a, b) = (f3.left_point(5.0), f3.right_point(5.0));
        let cs = vec![
            real_axis(4.0).unwrap(),
            line(a, Complex64::new(5.0, 0.0)).unwrap(),
            hyperbolic(0.2, f3.theta_right, 4.0).unwrap(),
            rational_sqrt(0.1, 8.0, 0.4, 3.0).unwrap(),
            sinusoidal(a, b, 0.35, 10, 0.2).unwrap(),
            polynomial(a, b, POLY_COEFFS.to_vec()).unwrap(),
            knot(a, b, 0.3, 0.1, PI).unwrap(),
        ];
        for c in &cs {
            let (lo, hi) = c.interval();
            for j in 1..10 {
                let p = lo + (hi - lo) * (j as f64 + 0.37) / 10.0;
                let h = 1e-6;
                let fd = (c.point(p + h) - c.point(p - h)) / (2.0 * h);
                assert!((fd - c.tangent(p)).norm() < 1e-6 * (1.0 + fd.norm()), "{}", c.label);
            }
        }
    }

    #[test]
    fn endpoint_fits() {
        let f = fam(3.0, 1);
        let (a, b) = (f.left_point(5.0), f.right_point(5.0));
        for c in [
            sinusoidal(a, b, 0.35, 10, 0.2).unwrap(),
            polynomial(a, b, POLY_COEFFS.to_vec()).unwrap(),
            knot(a, b, 0.3, 0.1, PI).unwrap(),
            hyperbolic_through(0.2, b).unwrap(),
        ] {
            assert!((c.start() - a).norm() < 1e-12, "{}", c.label);
            assert!((c.end() - b).norm() < 1e-12, "{}", c.label);
        }
    }

    #[test]
    fn hyperbola_endpoint_near_stokes_ray() {
        let f = fam(5.0, 1);
        let c = hyperbolic(0.2, f.theta_right, 4.0 * f.theta_right.cos()).unwrap();
        let e = c.end();
        assert!((e.arg() - f.theta_right).abs() < 0.02);
    }

    #[test]
    fn cut_detection() {
        let spec = PotentialSpec::new(2.9).unwrap();
        let f = fam(2.9, 1);
        let l = polyline(vec![f.left_point(5.0), Complex64::new(0.0, 1.0), f.right_point(5.0)]).unwrap();
        assert!(matches!(l.validate(&spec), Err(Error::CutViolation(_))));
        let cc = cross_cut(&f, 5.0, 1.0).unwrap();
        assert!(cc.validate(&spec).is_ok());
        let spec3 = PotentialSpec::new(3.0).unwrap();
        assert!(l.validate(&spec3).is_ok());
    }

    #[test]
    fn knot_crosses_itself_once() {
        let k = knot(Complex64::new(-4.0, 0.0), Complex64::new(4.0, 0.0), 0.0, 0.1, PI).unwrap();
        let s = self_intersections(&k).unwrap();
        assert_eq!(s.len(), 1);
        assert!((s[0].p1 + s[0].p2).abs() < 1e-9);
        assert!((s[0].p2 - 1.895494267033981).abs() < 1e-9);
    }

    #[test]
    fn identical_contours_overlap() {
        let c = real_axis(4.0).unwrap();
        assert!(matches!(intersections(&c, &c), Err(Error::DegenerateOverlap)));
    }

    #[test]
    fn sine_crosses_real_axis_nine_times() {
        let r = real_axis(4.0).unwrap();
        let s = sinusoidal(Complex64::new(-4.0, 0.0), Complex64::new(4.0, 0.0), 0.35, 10, 0.0).unwrap();
        let hits = intersections(&r, &s).unwrap();
        assert_eq!(hits.len(), 9);
        for (j, h) in hits.iter().enumerate() {
            assert!((h.x.re - (-3.2 + 0.8 * j as f64)).abs() < 1e-10);
        }
    }

    #[test]
    fn defaults_follow_policy() {
        let kind = |n: f64, k: u32| {
            let s = PotentialSpec::new(n).unwrap();
            default_contour(&s, &fam(n, k), 4.0).unwrap().label
        };
        assert_eq!(kind(1.5, 1), "rational-sqrt");
        assert_eq!(kind(2.0, 1), "real");
        assert_eq!(kind(3.0, 1), "hyperbolic");
        assert_eq!(kind(5.0, 1), "hyperbolic");
        assert_eq!(kind(5.0, 2), "real");
        assert_eq!(kind(4.0, 2), "hyperbolic");
        assert_eq!(kind(4.5, 2), "rational-sqrt");
        assert_eq!(kind(8.0, 2), "hyperbolic");
        assert_eq!(kind(8.0, 3), "hyperbolic");
    }

    #[test]
    fn upward_hyperbola_mirrors_downward() {
        let down = hyperbolic(0.7, -0.9, 2.0).unwrap();
        let up = hyperbolic(0.7, 0.9, 2.0).unwrap();
        for p in [-2.0, -0.3, 0.0, 1.1, 2.0] {
            assert!((up.point(p) - down.point(p).conj()).norm() < 1e-15);
        }
    }

    #[test]
    fn rational_sqrt_reaches_its_endpoint() {
        let end = Complex64::from_polar(2.4, 0.3 * PI);
        let c = rational_sqrt_through(RATIONAL_C, RATIONAL_T, end).unwrap();
        let (_, hi) = c.interval();
        assert!((c.point(hi) - end).norm() < 1e-12);
        assert!(c.point(0.0).im < 0.0);
    }

    #[test]
    fn unknown_name() {
        let s = PotentialSpec::new(2.0).unwrap();
        assert!(matches!(named_contour("spiral", &s, &fam(2.0, 1), 4.0), Err(Error::UnknownContour(_))));
    }

    #[test]
    fn json_roundtrip() {
        let c = sinusoidal(Complex64::new(-4.0, 0.0), Complex64::new(4.0, 0.0), 0.35, 10, 0.0).unwrap();
        let s = serde_json::to_string(&c).unwrap();
        assert!(s.contains("\"kind\":\"sinusoidal\""));
        let back: Contour = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
    }
}

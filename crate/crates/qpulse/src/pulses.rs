//! Temporal mode functions and virtual-cavity coupling schedules.
//!
//! A wave packet u(t) is released from a one-sided virtual cavity with
//! mirror coupling
//!
//!   g_u(t) = u*(t) / √(1 − ∫₀ᵗ |u|² dt′),
//!
//! and captured into one with
//!
//!   g_v(t) = −v*(t) / √(∫₀ᵗ |v|² dt′).
//!
//! Both formulas develop singular denominators as the mode empties or
//! before it starts; schedules regularize them with a denominator floor
//! and an amplitude ceiling (see [`CouplingPolicy`]). All integrals here,
//! in overlaps and in flux bookkeeping use one shared trapezoidal rule so
//! normalization identities hold to the same tolerance everywhere.

use std::io::{BufRead, Write};
use std::path::Path;

use num_complex::Complex64 as C64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Maximum analytic tail mass a built-in shape may leave outside its grid.
pub const TAIL_MASS_LIMIT: f64 = 1e-6;

/// Uniform time grid with n samples on [t0, t1].
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    t0: f64,
    t1: f64,
    n: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, t1: f64, n: usize) -> Result<Self> {
        if !(t1 > t0) {
            return Err(Error::InvalidArgument(format!(
                "time grid needs t1 > t0, got [{t0}, {t1}]"
            )));
        }
        if n < 2 {
            return Err(Error::InvalidArgument(format!(
                "time grid needs at least 2 samples, got {n}"
            )));
        }
        Ok(Self { t0, t1, n })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn span(&self) -> f64 {
        self.t1 - self.t0
    }

    pub fn dt(&self) -> f64 {
        (self.t1 - self.t0) / (self.n - 1) as f64
    }

    pub fn time(&self, j: usize) -> f64 {
        self.t0 + self.dt() * j as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.time(j)).collect()
    }

    pub fn contains(&self, t: f64) -> bool {
        // small slack for accumulated rounding at the endpoints
        let slack = 1e-9 * self.span();
        t >= self.t0 - slack && t <= self.t1 + slack
    }

    /// Trapezoidal quadrature weights (dt/2 at the endpoints).
    pub fn weights(&self) -> Vec<f64> {
        let dt = self.dt();
        let mut w = vec![dt; self.n];
        w[0] = 0.5 * dt;
        w[self.n - 1] = 0.5 * dt;
        w
    }

    /// Left sample index for interpolation at t, clamped to [0, n−2].
    fn index_left(&self, t: f64) -> usize {
        let raw = ((t - self.t0) / self.dt()).floor();
        (raw.max(0.0) as usize).min(self.n - 2)
    }
}

/// Linear interpolation of complex samples on a grid; zero outside.
fn interp(grid: &TimeGrid, samples: &[C64], t: f64) -> C64 {
    if t < grid.t0 || t > grid.t1 {
        return C64::new(0.0, 0.0);
    }
    let j = grid.index_left(t);
    let tj = grid.time(j);
    let frac = ((t - tj) / grid.dt()).clamp(0.0, 1.0);
    samples[j] * (1.0 - frac) + samples[j + 1] * frac
}

/// Unit-normalized complex temporal envelope with its cumulative norm
/// F(t) = ∫_{t0}^t |u|² dt′ on the shared trapezoidal rule.
#[derive(Debug, Clone)]
pub struct ModeFunction {
    grid: TimeGrid,
    samples: Vec<C64>,
    cum: Vec<f64>,
}

impl ModeFunction {
    /// Normalize raw samples on the grid; no containment check.
    pub fn from_raw_samples(grid: TimeGrid, samples: Vec<C64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} samples on a {}-point grid",
                samples.len(),
                grid.len()
            )));
        }
        let mut mode = Self { grid, samples, cum: Vec::new() };
        mode.recompute_cum();
        let norm = mode.cum.last().copied().unwrap_or(0.0);
        if norm <= 0.0 {
            return Err(Error::InvalidArgument("mode has zero norm on the grid".into()));
        }
        let scale = 1.0 / norm.sqrt();
        for z in &mut mode.samples {
            *z *= scale;
        }
        mode.recompute_cum();
        Ok(mode)
    }

    fn recompute_cum(&mut self) {
        let dt = self.grid.dt();
        let n = self.grid.len();
        let mut cum = Vec::with_capacity(n);
        cum.push(0.0);
        for j in 1..n {
            let seg = 0.5 * dt * (self.samples[j - 1].norm_sqr() + self.samples[j].norm_sqr());
            cum.push(cum[j - 1] + seg);
        }
        self.cum = cum;
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn samples(&self) -> &[C64] {
        &self.samples
    }

    /// Cumulative norm F(t_j).
    pub fn cumulative(&self) -> &[f64] {
        &self.cum
    }

    /// Value at arbitrary t by linear interpolation (zero outside the grid).
    pub fn at(&self, t: f64) -> C64 {
        interp(&self.grid, &self.samples, t)
    }

    /// Write as delimited text: t, Re u, Im u (one row per sample).
    pub fn write_delimited<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "time\tre\tim")?;
        for (j, z) in self.samples.iter().enumerate() {
            writeln!(w, "{:.12e}\t{:.12e}\t{:.12e}", self.grid.time(j), z.re, z.im)?;
        }
        Ok(())
    }
}

/// Built-in pulse shapes.
#[derive(Debug, Clone)]
pub enum Shape {
    /// |u(t)|² is a normal density with the given center and std width.
    Gaussian { center: f64, width: f64 },
    /// u(t) = √Γ e^{−Γt/2} Θ(t).
    ExponentialDecay { rate: f64 },
    /// u(t) = 1/√T on [0, T].
    Flat { duration: f64 },
    /// Samples (t, u(t)) interpolated onto the grid and renormalized.
    Custom { samples: Vec<(f64, C64)> },
}

impl Shape {
    fn name(&self) -> &'static str {
        match self {
            Shape::Gaussian { .. } => "gaussian",
            Shape::ExponentialDecay { .. } => "exponential_decay",
            Shape::Flat { .. } => "flat",
            Shape::Custom { .. } => "custom",
        }
    }
}

/// Construct a unit-normalized mode on the grid, rejecting shapes whose
/// analytic tail mass outside [t0, t1] exceeds [`TAIL_MASS_LIMIT`].
pub fn make_mode(shape: &Shape, grid: &TimeGrid) -> Result<ModeFunction> {
    let tail = match shape {
        Shape::Gaussian { center, width } => {
            if *width <= 0.0 {
                return Err(Error::InvalidArgument("gaussian width must be positive".into()));
            }
            let s2 = std::f64::consts::SQRT_2;
            0.5 * erfc((center - grid.t0()) / (width * s2))
                + 0.5 * erfc((grid.t1() - center) / (width * s2))
        }
        Shape::ExponentialDecay { rate } => {
            if *rate <= 0.0 {
                return Err(Error::InvalidArgument("decay rate must be positive".into()));
            }
            let head = 1.0 - (-rate * grid.t0().max(0.0)).exp();
            let tail = (-rate * grid.t1().max(0.0)).exp();
            head + tail
        }
        Shape::Flat { duration } => {
            if *duration <= 0.0 {
                return Err(Error::InvalidArgument("flat duration must be positive".into()));
            }
            let lo = grid.t0().max(0.0);
            let hi = grid.t1().min(*duration);
            1.0 - ((hi - lo).max(0.0) / duration)
        }
        Shape::Custom { samples } => {
            if samples.len() < 2 {
                return Err(Error::InvalidArgument(
                    "custom mode needs at least 2 samples".into(),
                ));
            }
            custom_tail_fraction(samples, grid)
        }
    };
    if tail >= TAIL_MASS_LIMIT {
        return Err(Error::TruncatedMode {
            shape: shape.name().into(),
            tail,
            limit: TAIL_MASS_LIMIT,
        });
    }

    let samples: Vec<C64> = match shape {
        Shape::Gaussian { center, width } => grid
            .times()
            .iter()
            .map(|&t| {
                let amp = (2.0 * std::f64::consts::PI * width * width).powf(-0.25)
                    * (-(t - center) * (t - center) / (4.0 * width * width)).exp();
                C64::new(amp, 0.0)
            })
            .collect(),
        Shape::ExponentialDecay { rate } => grid
            .times()
            .iter()
            .map(|&t| {
                if t < 0.0 {
                    C64::new(0.0, 0.0)
                } else {
                    C64::new(rate.sqrt() * (-rate * t / 2.0).exp(), 0.0)
                }
            })
            .collect(),
        Shape::Flat { duration } => grid
            .times()
            .iter()
            .map(|&t| {
                if (0.0..=*duration).contains(&t) {
                    C64::new(1.0 / duration.sqrt(), 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            })
            .collect(),
        Shape::Custom { samples } => {
            let mut pts = samples.clone();
            pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            grid.times().iter().map(|&t| interp_points(&pts, t)).collect()
        }
    };
    ModeFunction::from_raw_samples(grid.clone(), samples)
}

fn interp_points(pts: &[(f64, C64)], t: f64) -> C64 {
    if t < pts[0].0 || t > pts[pts.len() - 1].0 {
        return C64::new(0.0, 0.0);
    }
    let k = pts.partition_point(|p| p.0 <= t).min(pts.len() - 1).max(1);
    let (ta, va) = pts[k - 1];
    let (tb, vb) = pts[k];
    if tb == ta {
        return va;
    }
    let f = ((t - ta) / (tb - ta)).clamp(0.0, 1.0);
    va * (1.0 - f) + vb * f
}

/// Fraction of a custom mode's mass (trapezoid on its own sampling) that
/// falls outside the target grid.
fn custom_tail_fraction(samples: &[(f64, C64)], grid: &TimeGrid) -> f64 {
    let mut pts = samples.to_vec();
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut total = 0.0;
    let mut outside = 0.0;
    for w in pts.windows(2) {
        let (ta, va) = w[0];
        let (tb, vb) = w[1];
        let seg = 0.5 * (tb - ta) * (va.norm_sqr() + vb.norm_sqr());
        total += seg;
        let mid = 0.5 * (ta + tb);
        if mid < grid.t0() || mid > grid.t1() {
            outside += seg;
        }
    }
    if total > 0.0 {
        outside / total
    } else {
        0.0
    }
}

/// Load (t, Re u[, Im u]) rows from a whitespace- or comma-delimited text
/// file; lines starting with '#' are skipped.
pub fn load_mode_samples(path: &Path) -> Result<Vec<(f64, C64)>> {
    let file = std::fs::File::open(path)?;
    let mut out = Vec::new();
    for (lineno, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        let body = line.trim();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = body.split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .collect();
        if fields.len() != 2 && fields.len() != 3 {
            return Err(Error::InvalidArgument(format!(
                "{}:{}: expected 2 or 3 columns, found {}",
                path.display(),
                lineno + 1,
                fields.len()
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|_| {
                Error::InvalidArgument(format!(
                    "{}:{}: cannot parse '{}' as a number",
                    path.display(),
                    lineno + 1,
                    s
                ))
            })
        };
        let t = parse(fields[0])?;
        let re = parse(fields[1])?;
        let im = if fields.len() == 3 { parse(fields[2])? } else { 0.0 };
        out.push((t, C64::new(re, im)));
    }
    if out.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "{}: fewer than 2 sample rows",
            path.display()
        )));
    }
    Ok(out)
}

/// Regularization of the coupling formulas: denominator floor and
/// amplitude ceiling.
#[derive(Debug, Clone)]
pub struct CouplingPolicy {
    /// Floor on 1−F (release) and on F (capture); below it the mode is
    /// declared exhausted / not yet started and the coupling is zero.
    pub eps_den: f64,
    /// Amplitude ceiling; `None` selects 10³ × the grid-average |g|.
    pub g_max: Option<f64>,
}

impl Default for CouplingPolicy {
    fn default() -> Self {
        Self { eps_den: 1e-12, g_max: None }
    }
}

/// Sampled coupling g(t) with its clamp ceiling and per-sample exhaustion
/// flags (set where the formula's denominator underflowed).
#[derive(Debug, Clone)]
pub struct CouplingSchedule {
    grid: TimeGrid,
    samples: Vec<C64>,
    g_max: f64,
    exhausted: Vec<bool>,
}

impl CouplingSchedule {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn samples(&self) -> &[C64] {
        &self.samples
    }

    pub fn g_max(&self) -> f64 {
        self.g_max
    }

    pub fn exhausted(&self) -> &[bool] {
        &self.exhausted
    }

    /// Linear interpolation between samples; zero outside the grid.
    pub fn at(&self, t: f64) -> C64 {
        interp(&self.grid, &self.samples, t)
    }

    /// All-zero schedule on a grid (scatterer with no driven cavity).
    pub fn zero(grid: TimeGrid) -> Self {
        let n = grid.len();
        Self {
            grid,
            samples: vec![C64::new(0.0, 0.0); n],
            g_max: 0.0,
            exhausted: vec![false; n],
        }
    }
}

fn build_schedule(
    grid: &TimeGrid,
    raw: Vec<Option<C64>>, // None where the denominator underflowed
    policy: &CouplingPolicy,
) -> CouplingSchedule {
    let g_max = policy.g_max.unwrap_or_else(|| {
        let vals: Vec<f64> = raw.iter().flatten().map(|z| z.norm()).collect();
        if vals.is_empty() {
            0.0
        } else {
            1e3 * vals.iter().sum::<f64>() / vals.len() as f64
        }
    });
    let mut samples = Vec::with_capacity(raw.len());
    let mut exhausted = Vec::with_capacity(raw.len());
    for r in raw {
        match r {
            None => {
                samples.push(C64::new(0.0, 0.0));
                exhausted.push(true);
            }
            Some(z) => {
                let m = z.norm();
                if m > g_max && m > 0.0 {
                    samples.push(z * (g_max / m));
                } else {
                    samples.push(z);
                }
                exhausted.push(false);
            }
        }
    }
    CouplingSchedule { grid: grid.clone(), samples, g_max, exhausted }
}

/// Release coupling g_u(t) = u*(t)/√(1 − F(t)).
pub fn gu_from_mode(u: &ModeFunction, policy: &CouplingPolicy) -> CouplingSchedule {
    let raw: Vec<Option<C64>> = u
        .samples()
        .iter()
        .zip(u.cumulative())
        .map(|(&uj, &f)| {
            let rem = (1.0 - f).max(0.0);
            if rem < policy.eps_den {
                None
            } else {
                Some(uj.conj() / rem.sqrt())
            }
        })
        .collect();
    build_schedule(u.grid(), raw, policy)
}

/// Capture coupling g_v(t) = −v*(t)/√(F(t)).
pub fn gv_from_mode(v: &ModeFunction, policy: &CouplingPolicy) -> CouplingSchedule {
    let raw: Vec<Option<C64>> = v
        .samples()
        .iter()
        .zip(v.cumulative())
        .map(|(&vj, &f)| {
            if f < policy.eps_den {
                None
            } else {
                Some(-vj.conj() / f.sqrt())
            }
        })
        .collect();
    build_schedule(v.grid(), raw, policy)
}

/// Reflect a mode off a one-sided cavity (linewidth γ, detuning Δ from
/// the carrier): v(ω) = r(ω)·u(ω) with
///
///   r(ω) = [i(ω−Δ) + γ/2] / [i(ω−Δ) − γ/2],
///
/// evaluated by FFT with 4× zero padding. |r| = 1, so any norm loss on
/// the original grid signals mass pushed outside it.
pub fn reflect_mode(u: &ModeFunction, gamma: f64, detuning: f64) -> Result<ModeFunction> {
    let grid = u.grid();
    let n = grid.len();
    let dt = grid.dt();
    if gamma <= 0.0 {
        return Err(Error::InvalidArgument("reflect_mode: gamma must be positive".into()));
    }
    if dt > 0.1 / gamma {
        return Err(Error::InvalidArgument(format!(
            "reflect_mode: grid too coarse to resolve the cavity linewidth \
             (dt = {dt:.3e} > 0.1/gamma = {:.3e})",
            0.1 / gamma
        )));
    }
    let n_pad = (4 * n).next_power_of_two();
    let mut buf: Vec<C64> = Vec::with_capacity(n_pad);
    buf.extend_from_slice(u.samples());
    buf.resize(n_pad, C64::new(0.0, 0.0));

    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n_pad).process(&mut buf);
    // with the e^{−iωt} transform convention of the FFT, the time-domain
    // kernel v = u − γ e^{−(γ/2+iΔ)t}⋆u maps to this multiplier
    let dw = 2.0 * std::f64::consts::PI / (n_pad as f64 * dt);
    for (k, z) in buf.iter_mut().enumerate() {
        let w = if k <= n_pad / 2 {
            k as f64 * dw
        } else {
            (k as f64 - n_pad as f64) * dw
        };
        let ix = C64::new(0.0, w + detuning);
        let r = (ix - gamma / 2.0) / (ix + gamma / 2.0);
        *z *= r;
    }
    planner.plan_fft_inverse(n_pad).process(&mut buf);
    let scale = 1.0 / n_pad as f64;
    for z in &mut buf {
        *z *= scale;
    }

    let total: f64 = buf.iter().map(|z| z.norm_sqr()).sum::<f64>() * dt;
    let spill: f64 = buf[n..].iter().map(|z| z.norm_sqr()).sum::<f64>() * dt;
    if spill / total >= TAIL_MASS_LIMIT {
        return Err(Error::TruncatedMode {
            shape: "reflected mode".into(),
            tail: spill / total,
            limit: TAIL_MASS_LIMIT,
        });
    }
    buf.truncate(n);
    ModeFunction::from_raw_samples(grid.clone(), buf)
}

/// ∫ a*(t) b(t) dt on the shared quadrature rule.
pub fn overlap(a: &ModeFunction, b: &ModeFunction) -> Result<C64> {
    if a.grid() != b.grid() {
        return Err(Error::GridMismatch(
            "overlap requires both modes on the same grid".into(),
        ));
    }
    let w = a.grid().weights();
    let mut acc = C64::new(0.0, 0.0);
    for ((x, y), wj) in a.samples().iter().zip(b.samples()).zip(w) {
        acc += x.conj() * y * wj;
    }
    Ok(acc)
}

/// Complementary error function (Numerical Recipes rational approximation,
/// relative error below 1.2e-7 — ample for tail-mass threshold checks).
fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let poly = -z * z - 1.26551223
        + t * (1.00002368
            + t * (0.37409196
                + t * (0.09678418
                    + t * (-0.18628806
                        + t * (0.27886807
                            + t * (-1.13520398
                                + t * (1.48851587
                                    + t * (-0.82215223 + t * 0.17087277))))))));
    let ans = t * poly.exp();
    if x >= 0.0 {
        ans
    } else {
        2.0 - ans
    }
}

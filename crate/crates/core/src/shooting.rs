//! Shooting generating curves of constant generalized mean curvature from an
//! axis point, with event detection and closure classification.
//!
//! Approaching the far pole the ODE is unstable in dimension three and up:
//! perturbations of a perpendicular landing grow like a negative power of the
//! distance to the axis. A curve landing perpendicularly at `(-R1, 0)` is
//! however the mirror image of a curve departing from `(R1, 0)`, and that
//! departure integrates stably. So when the forward curve descends through a
//! fitting height we solve for the landing point whose mirrored departure
//! passes through the same point, and measure the kink between the two
//! pieces. A kink below tolerance means the curve closes smoothly.

use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::density::Density;
use crate::geometry::{self, CurvatureBundle, CurveState};
use crate::ode::{dopri_step, error_norm, step_factor, OdeSystem};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShootingError {
    #[error("invalid shooting configuration: {0}")]
    Config(String),
    #[error("arclength {0} outside the trajectory")]
    OutOfRange(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShootingConfig {
    pub n: usize,
    pub density: Density,
    pub r0: f64,
    pub c: f64,
    pub h_init: f64,
    pub h_min: f64,
    pub h_max: f64,
    /// Per-step local error tolerance.
    pub tol: f64,
    pub s_max: f64,
    pub max_steps: usize,
    /// Length of the series departure from the axis.
    pub h0: f64,
    /// Trajectories with `|γ| > escape_factor * r0` are abandoned.
    pub escape_factor: f64,
    pub kappa_cap: f64,
    /// Fitting height for the landing solve, as a fraction of the peak height.
    pub fit_fraction: f64,
    pub closure_y_tol: f64,
    pub closure_angle_tol: f64,
}

impl ShootingConfig {
    pub fn new(n: usize, density: Density, r0: f64, c: f64) -> Self {
        ShootingConfig {
            n,
            density,
            r0,
            c,
            h_init: 1e-3 * r0,
            h_min: 1e-12 * r0,
            h_max: 0.05 * r0,
            tol: 1e-12,
            s_max: 20.0 * r0,
            max_steps: 200_000,
            h0: 1e-4 * r0,
            escape_factor: 100.0,
            kappa_cap: 1e6,
            fit_fraction: 0.25,
            closure_y_tol: 1e-8,
            closure_angle_tol: 1e-6,
        }
    }

    /// Configuration for the centered ball of radius `r0`.
    pub fn ball(n: usize, density: Density, r0: f64) -> Self {
        let c = ball_curvature(&density, n, r0);
        Self::new(n, density, r0, c)
    }

    pub fn validate(&self) -> Result<(), ShootingError> {
        let bad = |m: String| Err(ShootingError::Config(m));
        if self.n < 2 {
            return bad(format!("n must be >= 2, got {}", self.n));
        }
        if !(self.r0 > 0.0) || !self.r0.is_finite() {
            return bad(format!("r0 must be positive, got {}", self.r0));
        }
        if !self.c.is_finite() {
            return bad(format!("c must be finite, got {}", self.c));
        }
        let positive = [
            ("h_init", self.h_init),
            ("h_min", self.h_min),
            ("h_max", self.h_max),
            ("tol", self.tol),
            ("s_max", self.s_max),
            ("h0", self.h0),
            ("escape_factor", self.escape_factor),
            ("kappa_cap", self.kappa_cap),
            ("fit_fraction", self.fit_fraction),
            ("closure_y_tol", self.closure_y_tol),
            ("closure_angle_tol", self.closure_angle_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if self.fit_fraction >= 1.0 {
            return bad("fit_fraction must be below 1".into());
        }
        if self.max_steps == 0 {
            return bad("max_steps must be positive".into());
        }
        if self.h_min > self.h_max {
            return bad("h_min exceeds h_max".into());
        }
        if self.h0 >= self.s_max {
            return bad("departure length exceeds the budget".into());
        }
        Ok(())
    }

    fn m(&self) -> f64 {
        self.n as f64 - 2.0
    }
}

/// `c` for which the centered sphere of radius `r` is a solution.
pub fn ball_curvature(d: &Density, n: usize, r: f64) -> f64 {
    d.dg(r) + (n as f64 - 1.0) / r
}

/// Curvature at an axis point `(x0, 0)` left upward, from `λ = κ` there.
fn axis_kappa(cfg: &ShootingConfig, x0: f64) -> f64 {
    (cfg.c - cfg.density.dg(x0.abs()) * x0.signum()) / (cfg.n as f64 - 1.0)
}

/// Curvature at the departure point.
pub fn departure_kappa(cfg: &ShootingConfig) -> f64 {
    axis_kappa(cfg, cfg.r0)
}

fn series_state(x0: f64, k0: f64, h: f64) -> CurveState {
    CurveState::new(h, x0 - k0 * h * h / 2.0, h - k0 * k0 * h * h * h / 6.0, FRAC_PI_2 + k0 * h)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Departure {
    pub kappa0: f64,
    /// False when the pole would not be mean convex; exploration continues.
    pub mean_convex: bool,
    pub state: CurveState,
}

/// State at arclength `h0` from the series expansion about the axis point.
pub fn depart_axis(cfg: &ShootingConfig) -> Result<Departure, ShootingError> {
    cfg.validate()?;
    Ok(departure_from(cfg, cfg.r0))
}

fn departure_from(cfg: &ShootingConfig, x0: f64) -> Departure {
    let k0 = axis_kappa(cfg, x0);
    Departure { kappa0: k0, mean_convex: k0 > 0.0, state: series_state(x0, k0, cfg.h0) }
}

struct Rhs<'a> {
    cfg: &'a ShootingConfig,
}

impl Rhs<'_> {
    fn kappa(&self, x: f64, y: f64, theta: f64) -> Option<f64> {
        let (sin, cos) = theta.sin_cos();
        let rho = x.hypot(y);
        if rho == 0.0 {
            return None;
        }
        let h1 = self.cfg.density.dg(rho) * (x * sin - y * cos) / rho;
        let m = self.cfg.m();
        if m == 0.0 {
            return Some(self.cfg.c - h1);
        }
        if y == 0.0 {
            return None;
        }
        let k = self.cfg.c - m * (-cos / y) - h1;
        k.is_finite().then_some(k)
    }
}

impl OdeSystem<3> for Rhs<'_> {
    fn rhs(&self, _s: f64, u: &[f64; 3]) -> Option<[f64; 3]> {
        let k = self.kappa(u[0], u[1], u[2])?;
        let (sin, cos) = u[2].sin_cos();
        Some([cos, sin, k])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// `y` reached zero.
    AxisCrossing,
    /// Tangent `(0, -1)`.
    TangentDown,
    /// Tangent `(0, 1)`.
    TangentUp,
    /// Tangent `(±1, 0)`.
    Horizontal,
    /// `|γ|` crossed the plateau radius.
    PlateauBoundary,
    /// Descending crossing of the fitting height.
    Fit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub kind: EventKind,
    pub state: CurveState,
    pub kappa: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub state: CurveState,
    pub bundle: CurvatureBundle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Joined to a perpendicular landing piece.
    Landed,
    AxisCrossing,
    Budget,
    Escaped,
    CurvatureBlowup,
    /// Internal: a landing piece reached its fitting height.
    Risen,
}

/// The mirrored landing piece that completes a closing curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Landing {
    /// Abscissa of the landing point on the axis.
    pub x_end: f64,
    /// Arclength of the fitting point on the forward curve.
    pub fit_s: f64,
    /// Tangent angle jump at the fitting point.
    pub kink: f64,
    /// Distance between the two pieces at the fitting point.
    pub gap: f64,
    /// Departure from `(-x_end, 0)` integrated up to the fitting height.
    pub back: Box<Trajectory>,
    /// Multiple of `2π` aligning mirrored angles with the forward curve.
    pub turn: f64,
}

impl Landing {
    fn mirror(&self, st: &CurveState, total: f64) -> CurveState {
        CurveState::new(total - st.s, -st.x, st.y, self.turn - st.theta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub config: ShootingConfig,
    pub departure: Departure,
    /// Samples of the half curve in arclength order, starting with the axis
    /// point at `s = 0` and including any landing piece.
    pub samples: Vec<Sample>,
    pub events: Vec<Event>,
    pub termination: Termination,
    pub landing: Option<Landing>,
}

const EVENT_S_TOL: f64 = 1e-12;

impl Trajectory {
    pub fn n(&self) -> usize {
        self.config.n
    }

    pub fn density(&self) -> &Density {
        &self.config.density
    }

    pub fn length(&self) -> f64 {
        self.samples.last().map(|s| s.state.s).unwrap_or(0.0)
    }

    pub fn end_state(&self) -> CurveState {
        self.samples.last().expect("nonempty").state
    }

    /// Arclength values of all samples.
    pub fn knots(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.state.s).collect()
    }

    /// State at arclength `s`, recomputed by a single step from the nearest
    /// sample on the left (on the landing piece, from its own samples).
    pub fn state_at(&self, s: f64) -> Result<CurveState, ShootingError> {
        let total = self.length();
        if !(s >= 0.0) || s > total * (1.0 + 1e-15) {
            return Err(ShootingError::OutOfRange(s));
        }
        if let Some(l) = &self.landing {
            if s > l.fit_s {
                let st = l.back.state_at((total - s).clamp(0.0, l.back.length()))?;
                return Ok(l.mirror(&st, total));
            }
        }
        if s <= self.config.h0 {
            return Ok(series_state(self.config.r0, self.departure.kappa0, s));
        }
        let i = self.samples.partition_point(|p| p.state.s <= s).saturating_sub(1);
        let base = self.samples[i].state;
        let dt = s - base.s;
        if dt == 0.0 {
            return Ok(base);
        }
        let sys = Rhs { cfg: &self.config };
        let u = [base.x, base.y, base.theta];
        let k1 = sys.rhs(base.s, &u).ok_or(ShootingError::OutOfRange(s))?;
        let st = dopri_step(&sys, base.s, &u, &k1, dt).ok_or(ShootingError::OutOfRange(s))?;
        Ok(CurveState::new(s, st.y[0], st.y[1], st.y[2]))
    }

    /// Curvature at a state of this trajectory.
    pub fn kappa_at(&self, st: &CurveState) -> f64 {
        if st.y == 0.0 && st.vertical() {
            return axis_kappa(&self.config, if st.s == 0.0 { self.config.r0 } else { -st.x });
        }
        Rhs { cfg: &self.config }.kappa(st.x, st.y, st.theta).unwrap_or(f64::NAN)
    }

    /// `max |H_f - c|` over all samples.
    pub fn isocline_residual(&self) -> f64 {
        self.samples.iter().map(|p| (p.bundle.hf - self.config.c).abs()).fold(0.0, f64::max)
    }

    pub fn events_of(&self, kind: EventKind) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(move |e| e.kind == kind)
    }
}

fn make_sample(cfg: &ShootingConfig, st: CurveState, kappa: f64) -> Sample {
    let bundle = geometry::curvature_bundle(&st, kappa, cfg.n, &cfg.density).unwrap_or(CurvatureBundle {
        kappa,
        lambda: f64::NAN,
        h0: f64::NAN,
        h1: f64::NAN,
        hf: f64::NAN,
        radial: [f64::NAN; 2],
    });
    Sample { state: st, bundle }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Rule {
    /// Full shot with landing fits.
    Shoot,
    /// Landing piece: stop on the ascending crossing of this height.
    RiseTo(f64),
}

/// Scalar event functions; a sign change between samples marks an event.
fn event_values(cfg: &ShootingConfig, u: &[f64; 3], target: f64) -> [f64; 5] {
    let rp = cfg.density.plateau_radius().value();
    let plateau = if rp.is_finite() && rp > 0.0 { u[0].hypot(u[1]) - rp } else { 1.0 };
    [u[1], u[2].cos(), u[2].sin(), plateau, u[1] - target]
}

fn classify_crossing(idx: usize, u: &[f64; 3], rule: Rule) -> Option<EventKind> {
    let sin = u[2].sin();
    match idx {
        0 => (sin < 0.0).then_some(EventKind::AxisCrossing),
        1 => Some(if sin < 0.0 { EventKind::TangentDown } else { EventKind::TangentUp }),
        2 => Some(EventKind::Horizontal),
        3 => Some(EventKind::PlateauBoundary),
        4 => match rule {
            Rule::Shoot => (sin < 0.0).then_some(EventKind::Fit),
            Rule::RiseTo(_) => (sin > 0.0).then_some(EventKind::Fit),
        },
        _ => None,
    }
}

/// Integrates from the axis point `(x0, 0)`.
fn run(cfg: &ShootingConfig, x0: f64, rule: Rule) -> Trajectory {
    let departure = departure_from(cfg, x0);
    let sys = Rhs { cfg };
    let axis = CurveState::new(0.0, x0, 0.0, FRAC_PI_2);
    let mut samples = vec![make_sample(cfg, axis, departure.kappa0)];
    let mut events = Vec::new();
    let mut local = cfg.clone();
    local.r0 = x0;

    let d0 = departure.state;
    let mut s = d0.s;
    let mut u = [d0.x, d0.y, d0.theta];
    let finish =
        |samples, events, termination, landing| Trajectory { config: local.clone(), departure, samples, events, termination, landing };
    let Some(mut k) = sys.rhs(s, &u) else {
        samples.push(make_sample(cfg, d0, f64::NAN));
        return finish(samples, events, Termination::CurvatureBlowup, None);
    };
    samples.push(make_sample(cfg, d0, k[2]));
    let mut h = cfg.h_init;
    let mut y_peak = u[1];
    let scale = x0.abs();
    let escape = cfg.escape_factor * scale;
    let mut steps = 0usize;

    let termination = loop {
        if s >= cfg.s_max || steps >= cfg.max_steps {
            break Termination::Budget;
        }
        steps += 1;
        let curv_limit = 0.3 / k[2].abs().max(1e-300);
        h = h.min(cfg.h_max).min(curv_limit).min(cfg.s_max - s);
        if h < cfg.h_min {
            break Termination::CurvatureBlowup;
        }
        let Some(step) = dopri_step(&sys, s, &u, &k, h) else {
            h *= 0.25;
            continue;
        };
        let norm = error_norm(&step.err, &u, &step.y, cfg.tol);
        if !(norm <= 1.0) {
            h *= if norm.is_finite() { step_factor(norm) } else { 0.25 };
            continue;
        }

        // Accepted step: look for events inside it.
        let target = match rule {
            Rule::Shoot => cfg.fit_fraction * y_peak,
            Rule::RiseTo(t) => t,
        };
        let before = event_values(cfg, &u, target);
        let after = event_values(cfg, &step.y, target);
        let mut found: Vec<(f64, usize, [f64; 3], f64)> = Vec::new();
        for idx in 0..before.len() {
            let (a, b) = (before[idx], after[idx]);
            if !(a != 0.0 && (a.signum() != b.signum() || b == 0.0)) {
                continue;
            }
            // Bisection on the step length, re-stepping from the left sample.
            let (mut lo, mut hi) = (0.0, h);
            let mut hit = step.y;
            let mut hit_k = step.dy[2];
            while hi - lo > EVENT_S_TOL * (1.0 + s.abs()) {
                let mid = 0.5 * (lo + hi);
                let Some(ms) = dopri_step(&sys, s, &u, &k, mid) else {
                    hi = mid;
                    continue;
                };
                let v = event_values(cfg, &ms.y, target)[idx];
                if v.signum() == a.signum() && v != 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                    hit = ms.y;
                    hit_k = ms.dy[2];
                }
            }
            if idx == 0 {
                hit[1] = 0.0;
                hit_k = sys.kappa(hit[0], 0.0, hit[2]).unwrap_or(hit_k);
            }
            found.push((s + hi, idx, hit, hit_k));
        }
        found.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut stop = None;
        for (se, idx, ue, ke) in &found {
            let Some(kind) = classify_crossing(*idx, ue, rule) else {
                continue;
            };
            let st = CurveState::new(*se, ue[0], ue[1], ue[2]);
            events.push(Event { kind, state: st, kappa: *ke });
            samples.push(make_sample(cfg, st, *ke));
            match (kind, rule) {
                (EventKind::AxisCrossing, _) => {
                    stop = Some((Termination::AxisCrossing, None));
                    break;
                }
                (EventKind::Horizontal, Rule::RiseTo(_)) => {
                    stop = Some((Termination::Budget, None));
                    break;
                }
                (EventKind::Fit, Rule::RiseTo(_)) => {
                    stop = Some((Termination::Risen, None));
                    break;
                }
                (EventKind::Fit, Rule::Shoot) => {
                    if let Some(l) = fit_landing(cfg, &st, *ke) {
                        if l.gap < cfg.closure_y_tol && l.kink < cfg.closure_angle_tol {
                            stop = Some((Termination::Landed, Some(l)));
                            break;
                        }
                    }
                }
                _ => {}
            }
        }
        if let Some((term, landing)) = stop {
            return match landing {
                Some(l) => attach_landing(finish(samples, events, term, None), l),
                None => finish(samples, events, term, None),
            };
        }

        s += h;
        u = step.y;
        k = step.dy;
        y_peak = y_peak.max(u[1]);
        samples.push(make_sample(cfg, CurveState::new(s, u[0], u[1], u[2]), k[2]));
        h *= step_factor(norm);

        if u[0].hypot(u[1]) > escape {
            break Termination::Escaped;
        }
        if k[2].abs() > cfg.kappa_cap {
            break Termination::CurvatureBlowup;
        }
    };
    finish(samples, events, termination, None)
}

/// Landing piece: departure from `(x1, 0)` integrated up to height `y`.
fn rise(cfg: &ShootingConfig, x1: f64, y: f64) -> Option<Trajectory> {
    if x1 == 0.0 || !x1.is_finite() {
        return None;
    }
    let mut c = cfg.clone();
    let f = x1.abs() / cfg.r0.abs();
    c.h_init *= f;
    c.h_min *= f;
    c.h_max *= f;
    c.h0 *= f;
    c.s_max *= f;
    if y <= c.h0 {
        return None;
    }
    let t = run(&c, x1, Rule::RiseTo(y));
    (t.termination == Termination::Risen).then_some(t)
}

/// Solves for the landing point whose mirrored departure passes through the
/// forward fitting point `st`.
fn fit_landing(cfg: &ShootingConfig, st: &CurveState, kappa: f64) -> Option<Landing> {
    // Seed from the osculating circle; skip clearly non-landing geometry.
    if !(kappa > 0.0) {
        return None;
    }
    let (sin, cos) = st.theta.sin_cos();
    let center = [st.x - sin / kappa, st.y + cos / kappa];
    let q = kappa * center[1];
    if q.abs() > 0.2 {
        return None;
    }
    let r = 1.0 / kappa;
    // A descending counterclockwise arc meets the axis left of its center.
    let x_land = center[0] - (r * r - center[1] * center[1]).sqrt();
    let mismatch = |x1: f64| -> Option<(f64, Trajectory)> {
        let t = rise(cfg, x1, st.y)?;
        Some((-t.end_state().x - st.x, t))
    };
    let mut a = -x_land;
    let (mut fa, _) = mismatch(a)?;
    let mut b = a * (1.0 + 1e-4);
    let (mut fb, mut tb) = mismatch(b)?;
    let xtol = 1e-14 * (1.0 + st.x.abs());
    for _ in 0..40 {
        if fb.abs() <= xtol || fb == fa {
            break;
        }
        let next = b - fb * (b - a) / (fb - fa);
        if !next.is_finite() || next.signum() != a.signum() {
            return None;
        }
        a = b;
        fa = fb;
        b = next;
        (fb, tb) = mismatch(b)?;
    }
    let end = tb.end_state();
    // Mirror of the landing piece's tangent angle, aligned with the forward one.
    let mirrored = -end.theta;
    let turn = 2.0 * PI * ((st.theta - mirrored) / (2.0 * PI)).round();
    let kink = (st.theta - (turn + mirrored)).abs();
    let gap = (-end.x - st.x).hypot(end.y - st.y);
    Some(Landing { x_end: -b, fit_s: st.s, kink, gap, back: Box::new(tb), turn })
}

fn mirrored_kind(k: EventKind) -> EventKind {
    match k {
        EventKind::TangentUp => EventKind::TangentDown,
        EventKind::TangentDown => EventKind::TangentUp,
        other => other,
    }
}

fn attach_landing(mut t: Trajectory, l: Landing) -> Trajectory {
    let back = &l.back;
    let total = l.fit_s + back.length();
    // Drop the fitting-point sample of the back piece; the forward one stays.
    for p in back.samples.iter().rev().skip(1) {
        // Mirroring preserves κ, λ and H1; copy them rather than recompute,
        // which would amplify angle rounding near the axis.
        let mut bundle = p.bundle;
        bundle.radial[0] = -bundle.radial[0];
        t.samples.push(Sample { state: l.mirror(&p.state, total), bundle });
    }
    for e in back.events.iter().rev() {
        if e.kind == EventKind::Fit {
            continue;
        }
        t.events.push(Event { kind: mirrored_kind(e.kind), state: l.mirror(&e.state, total), kappa: e.kappa });
    }
    t.landing = Some(l);
    t
}

/// Integrates the half generating curve from `(r0, 0)`.
pub fn shoot(cfg: &ShootingConfig) -> Result<Trajectory, ShootingError> {
    cfg.validate()?;
    Ok(run(cfg, cfg.r0, Rule::Shoot))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    ClosedSmooth,
    AxisNonperpendicular,
    BudgetExhausted,
    Escaped,
    CurvatureBlowup,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosureReport {
    pub outcome: Outcome,
    pub end_state: CurveState,
    pub y_residual: f64,
    pub angle_defect: f64,
    /// Limiting unit tangent at a non-perpendicular landing.
    pub limit_tangent: Option<[f64; 2]>,
    /// A landing tangent pointing right would make the landing point a
    /// regular half-space point, which cannot happen for minimizers.
    pub landing_sign_consistent: Option<bool>,
}

/// Angle reduced to `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let t = a.rem_euclid(2.0 * PI);
    if t > PI {
        t - 2.0 * PI
    } else {
        t
    }
}

pub fn classify_closure(t: &Trajectory) -> ClosureReport {
    let cfg = &t.config;
    let end = t.end_state();
    let base = |outcome| ClosureReport {
        outcome,
        end_state: end,
        y_residual: end.y.abs(),
        angle_defect: wrap_angle(end.theta + FRAC_PI_2).abs(),
        limit_tangent: None,
        landing_sign_consistent: None,
    };
    match t.termination {
        Termination::Landed => {
            let l = t.landing.as_ref().expect("landing present");
            let mut r = base(Outcome::ClosedSmooth);
            r.y_residual = r.y_residual.max(l.gap);
            r.angle_defect = r.angle_defect.max(l.kink);
            r
        }
        Termination::AxisCrossing => {
            let r = base(Outcome::ClosedSmooth);
            if r.y_residual < cfg.closure_y_tol && r.angle_defect < cfg.closure_angle_tol {
                return r;
            }
            let nu = [end.theta.cos(), end.theta.sin()];
            ClosureReport {
                outcome: Outcome::AxisNonperpendicular,
                limit_tangent: Some(nu),
                landing_sign_consistent: Some(nu[0] <= 0.0),
                ..r
            }
        }
        Termination::Budget | Termination::Risen => base(Outcome::BudgetExhausted),
        Termination::Escaped => base(Outcome::Escaped),
        Termination::CurvatureBlowup => base(Outcome::CurvatureBlowup),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanCell {
    pub r0: f64,
    pub c: f64,
    pub report: ClosureReport,
    pub first_tangent_down: Option<Event>,
}

/// Shoots every `(r0, c)` pair of the grids in parallel; results are in
/// row-major order with `r0` as the slow index.
pub fn scan_closures(template: &ShootingConfig, r0_grid: &[f64], c_grid: &[f64]) -> Result<Vec<ScanCell>, ShootingError> {
    if r0_grid.is_empty() || c_grid.is_empty() {
        return Err(ShootingError::Config("scan grids must be non-empty".into()));
    }
    let pairs: Vec<(f64, f64)> = r0_grid.iter().flat_map(|&r| c_grid.iter().map(move |&c| (r, c))).collect();
    scan_pairs(template, &pairs, |_, _| ()).map(|v| v.into_iter().map(|(cell, _)| cell).collect())
}

/// Grid whose `c` values are relative offsets from each row's ball value:
/// `c_ij = ball(r0_i) * (1 + offsets_j)`.
pub fn relative_grid(d: &Density, n: usize, r0_grid: &[f64], offsets: &[f64]) -> Vec<(f64, f64)> {
    r0_grid.iter().flat_map(|&r| offsets.iter().map(move |&o| (r, ball_curvature(d, n, r) * (1.0 + o)))).collect()
}

/// Shoots each `(r0, c)` pair in parallel, keeping `keep(cell, trajectory)`;
/// output order matches `pairs`.
pub fn scan_pairs<T: Send>(
    template: &ShootingConfig,
    pairs: &[(f64, f64)],
    keep: impl Fn(&ScanCell, Trajectory) -> T + Sync,
) -> Result<Vec<(ScanCell, T)>, ShootingError> {
    if pairs.is_empty() {
        return Err(ShootingError::Config("scan grid must be non-empty".into()));
    }
    pairs
        .par_iter()
        .map(|&(r0, c)| {
            let cfg = rescaled(template, r0, c);
            let t = shoot(&cfg)?;
            let report = classify_closure(&t);
            let first_tangent_down = t.events_of(EventKind::TangentDown).next().copied();
            let cell = ScanCell { r0, c, report, first_tangent_down };
            let kept = keep(&cell, t);
            Ok((cell, kept))
        })
        .collect()
}

/// Copy of `template` for another start radius, with length scales moved along.
pub fn rescaled(template: &ShootingConfig, r0: f64, c: f64) -> ShootingConfig {
    let f = r0 / template.r0;
    ShootingConfig {
        r0,
        c,
        h_init: template.h_init * f,
        h_min: template.h_min * f,
        h_max: template.h_max * f,
        s_max: template.s_max * f,
        h0: template.h0 * f,
        ..template.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn departure_examples() {
        let d = depart_axis(&ShootingConfig::new(2, Density::constant(0.0), 1.0, 1.0)).unwrap();
        assert_eq!(d.kappa0, 1.0);
        let h = 1e-4;
        assert!((d.state.x - (1.0 - h * h / 2.0)).abs() < 1e-16);
        assert!((d.state.y - (h - h * h * h / 6.0)).abs() < 1e-18);
        assert!((d.state.theta - (FRAC_PI_2 + h)).abs() < 1e-15);
        let q = Density::quadratic(1.0);
        assert_eq!(depart_axis(&ShootingConfig::new(3, q.clone(), 1.0, 4.0)).unwrap().kappa0, 1.0);
        assert_eq!(depart_axis(&ShootingConfig::new(2, q.clone(), 1.0, 3.0)).unwrap().kappa0, 1.0);
        let flagged = depart_axis(&ShootingConfig::new(3, q, 1.0, 1.0)).unwrap();
        assert!(!flagged.mean_convex);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(shoot(&ShootingConfig::new(1, Density::constant(0.0), 1.0, 1.0)).is_err());
        assert!(shoot(&ShootingConfig::new(2, Density::constant(0.0), -1.0, 1.0)).is_err());
        let mut cfg = ShootingConfig::new(2, Density::constant(0.0), 1.0, 1.0);
        cfg.tol = 0.0;
        assert!(shoot(&cfg).is_err());
    }

    #[test]
    fn unit_circle_closes() {
        let t = shoot(&ShootingConfig::new(2, Density::constant(0.0), 1.0, 1.0)).unwrap();
        let r = classify_closure(&t);
        assert_eq!(r.outcome, Outcome::ClosedSmooth);
        let end = t.end_state();
        assert!((end.x + 1.0).abs() < 1e-8);
        assert!((t.length() - PI).abs() < 1e-8);
        assert!((end.theta - 1.5 * PI).abs() < 1e-6);
    }

    #[test]
    fn quadratic_sphere_closes() {
        let t = shoot(&ShootingConfig::new(3, Density::quadratic(1.0), 1.0, 4.0)).unwrap();
        let r = classify_closure(&t);
        assert_eq!(r.outcome, Outcome::ClosedSmooth, "{r:?}");
        assert!((t.end_state().x + 1.0).abs() < 1e-8);
        assert!(r.y_residual < 1e-8 && r.angle_defect < 1e-6);
    }

    #[test]
    fn plateau_interior_circle_closes() {
        let t = shoot(&ShootingConfig::new(3, Density::plateau(2.0, 1.0), 1.5, 2.0)).unwrap();
        let r = classify_closure(&t);
        assert_eq!(r.outcome, Outcome::ClosedSmooth, "{r:?}");
        assert!((t.end_state().x + 0.5).abs() < 1e-8);
    }

    #[test]
    fn off_ball_value_does_not_close() {
        let t = shoot(&ShootingConfig::new(2, Density::quadratic(1.0), 1.0, 3.5)).unwrap();
        assert_ne!(classify_closure(&t).outcome, Outcome::ClosedSmooth);
    }

    #[test]
    fn state_at_follows_the_curve() {
        let d = Density::cosh(1.0);
        let t = shoot(&ShootingConfig::ball(3, d, 1.0)).unwrap();
        assert_eq!(t.termination, Termination::Landed);
        for w in t.samples.windows(2).skip(3).step_by(5) {
            let mid = 0.5 * (w[0].state.s + w[1].state.s);
            let st = t.state_at(mid).unwrap();
            // On the centered circle the angle is 90° ahead of the polar angle.
            let phi = st.y.atan2(st.x);
            assert!(wrap_angle(st.theta - phi - FRAC_PI_2).abs() < 1e-8, "{st:?}");
            assert!((st.rho() - 1.0).abs() < 1e-8);
        }
        assert!(t.state_at(-1.0).is_err());
    }

    #[test]
    fn samples_are_ordered_and_unit_speed() {
        let t = shoot(&ShootingConfig::ball(4, Density::quadratic(1.0), 1.0)).unwrap();
        for w in t.samples.windows(2) {
            let (a, b) = (w[0].state, w[1].state);
            assert!(b.s >= a.s);
            let chord = (b.x - a.x).hypot(b.y - a.y);
            assert!(chord <= (b.s - a.s) * (1.0 + 1e-9) + 1e-15);
        }
    }
}

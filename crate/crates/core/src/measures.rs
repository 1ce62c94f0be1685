//! Weighted perimeter and volume of regions of revolution, closed forms for
//! centered balls, and the isoperimetric profile they generate.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::density::Density;
use crate::quadrature::{self, QuadError};
use crate::shooting::{EventKind, Termination, Trajectory};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("curve does not return to the axis")]
    NotClosed,
    #[error("curve intersects itself between samples {0} and {1}")]
    SelfIntersecting(usize, usize),
    #[error("odd number of boundary crossings at height {0}")]
    OddCrossings(f64),
    #[error("volume refinement did not settle: last relative change {0:e}")]
    NoConvergence(f64),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
}

/// `Γ(m/2)` for positive integers `m`.
fn gamma_half(m: usize) -> f64 {
    let mut g = if m.is_multiple_of(2) { 1.0 } else { PI.sqrt() };
    let mut x = if m.is_multiple_of(2) { 1.0 } else { 0.5 };
    while 2.0 * x < m as f64 {
        g *= x;
        x += 1.0;
    }
    g
}

/// Area of the unit `k`-sphere in `R^(k+1)`; `sphere_area(0) = 2`.
pub fn sphere_area(k: usize) -> f64 {
    2.0 * PI.powf((k + 1) as f64 / 2.0) / gamma_half(k + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RevolutionMeasures {
    pub perimeter: f64,
    pub volume: f64,
    pub n: usize,
    /// Area of the unit `(n-2)`-sphere swept by each point of the half-plane.
    pub sigma: f64,
}

const BALL_TOL: f64 = 1e-13;

fn ball_volume(r: f64, n: usize, d: &Density) -> Result<f64, QuadError> {
    let s = sphere_area(n - 1);
    let v = quadrature::adaptive(0.0, r, BALL_TOL, |t| t.powi(n as i32 - 1) * d.weight(t))?;
    Ok(s * v)
}

/// Weighted measures of the centered ball of radius `r` in `R^n`.
pub fn ball_measures(r: f64, n: usize, d: &Density) -> Result<RevolutionMeasures, MeasureError> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(MeasureError::Input(format!("radius must be positive, got {r}")));
    }
    if n < 1 {
        return Err(MeasureError::Input("n must be >= 1".into()));
    }
    let s = sphere_area(n - 1);
    Ok(RevolutionMeasures {
        perimeter: s * r.powi(n as i32 - 1) * d.weight(r),
        volume: ball_volume(r, n, d)?,
        n,
        sigma: if n >= 2 { sphere_area(n - 2) } else { 1.0 },
    })
}

fn check_dim(n: usize) -> Result<(), MeasureError> {
    if n < 2 {
        Err(MeasureError::Input(format!("n must be >= 2, got {n}")))
    } else {
        Ok(())
    }
}

/// Weighted area of the hypersurface swept by the half curve and its mirror.
pub fn trajectory_perimeter(t: &Trajectory) -> Result<f64, MeasureError> {
    let n = t.n();
    check_dim(n)?;
    let d = t.density();
    let knots = t.knots();
    let mut total = 0.0;
    let mut err = None;
    for w in knots.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        total += quadrature::fixed(w[0], w[1], 16, |s| match t.state_at(s) {
            Ok(st) => st.y.max(0.0).powi(n as i32 - 2) * d.weight(st.rho()),
            Err(e) => {
                err = Some(e);
                0.0
            }
        });
    }
    if let Some(e) = err {
        return Err(MeasureError::Input(e.to_string()));
    }
    Ok(sphere_area(n - 2) * total)
}

fn segments_cross(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> bool {
    let orient = |a: [f64; 2], b: [f64; 2], c: [f64; 2]| (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

/// First proper crossing between non-adjacent edges of a polyline.
pub fn first_self_intersection(pts: &[[f64; 2]]) -> Option<(usize, usize)> {
    let m = pts.len();
    if m < 4 {
        return None;
    }
    let bbox = |i: usize| {
        let (a, b) = (pts[i], pts[i + 1]);
        [a[0].min(b[0]), a[0].max(b[0]), a[1].min(b[1]), a[1].max(b[1])]
    };
    let boxes: Vec<[f64; 4]> = (0..m - 1).map(bbox).collect();
    for i in 0..m - 1 {
        for j in i + 2..m - 1 {
            let (a, b) = (boxes[i], boxes[j]);
            if a[1] < b[0] || b[1] < a[0] || a[3] < b[2] || b[3] < a[2] {
                continue;
            }
            if segments_cross(pts[i], pts[i + 1], pts[j], pts[j + 1]) {
                return Some((i, j));
            }
        }
    }
    None
}

/// Abscissae where the curve crosses height `y`, sorted.
fn crossings(t: &Trajectory, ys: &[f64], y: f64) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 0..ys.len() - 1 {
        if (ys[i] > y) == (ys[i + 1] > y) {
            continue;
        }
        let (mut lo, mut hi) = (t.samples[i].state.s, t.samples[i + 1].state.s);
        let rising = ys[i + 1] > ys[i];
        let mut s = lo + (hi - lo) * (y - ys[i]) / (ys[i + 1] - ys[i]);
        let mut x = f64::NAN;
        for _ in 0..60 {
            let Ok(st) = t.state_at(s) else { break };
            let f = st.y - y;
            x = st.x;
            if f.abs() <= 1e-15 * (1.0 + y.abs()) || hi - lo <= 1e-15 * (1.0 + s.abs()) {
                break;
            }
            if (f > 0.0) == rising {
                hi = s;
            } else {
                lo = s;
            }
            let newton = s - f / st.theta.sin();
            s = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        }
        out.push(x);
    }
    out.sort_by(|a, b| a.total_cmp(b));
    out
}

/// Weighted volume of the region enclosed by the half curve and the axis,
/// revolved about the axis.
///
/// Heights are split into strips at the curve's horizontal tangents; within a
/// strip the horizontal sections are integrated exactly in `x` and by a
/// cosine-substituted composite rule in height, refined until the relative
/// change drops below `1e-8`.
pub fn trajectory_volume(t: &Trajectory) -> Result<f64, MeasureError> {
    let n = t.n();
    check_dim(n)?;
    if !matches!(t.termination, Termination::Landed | Termination::AxisCrossing) {
        return Err(MeasureError::NotClosed);
    }
    let pts: Vec<[f64; 2]> = t.samples.iter().map(|p| [p.state.x, p.state.y]).collect();
    if let Some((i, j)) = first_self_intersection(&pts) {
        return Err(MeasureError::SelfIntersecting(i, j));
    }
    let d = t.density();
    let ys: Vec<f64> = t.samples.iter().map(|p| p.state.y).collect();
    let mut cuts: Vec<f64> = t.events.iter().filter(|e| e.kind == EventKind::Horizontal).map(|e| e.state.y).collect();
    cuts.push(0.0);
    cuts.push(ys.iter().copied().fold(0.0, f64::max));
    cuts.sort_by(|a, b| a.total_cmp(b));
    cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * (1.0 + b.abs()));

    let section = |y: f64| -> Result<f64, MeasureError> {
        let xs = crossings(t, &ys, y);
        if xs.len() % 2 == 1 {
            return Err(MeasureError::OddCrossings(y));
        }
        let mut acc = 0.0;
        for pair in xs.chunks(2) {
            acc += quadrature::adaptive(pair[0], pair[1], 1e-13, |x| d.weight(x.hypot(y)))?;
        }
        Ok(acc * y.powi(n as i32 - 2))
    };
    let strip = |a: f64, b: f64, panels: usize| -> Result<f64, MeasureError> {
        let mut err = None;
        let v = quadrature::composite(0.0, 1.0, panels, 8, |u| {
            let y = a + (b - a) * 0.5 * (1.0 - (PI * u).cos());
            let dy = (b - a) * 0.5 * PI * (PI * u).sin();
            match section(y) {
                Ok(v) => v * dy,
                Err(e) => {
                    err = Some(e);
                    0.0
                }
            }
        });
        match err {
            Some(e) => Err(e),
            None => Ok(v),
        }
    };

    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mut prev = strip(a, b, 1)?;
        let mut panels = 2;
        loop {
            let cur = strip(a, b, panels)?;
            let change = (cur - prev).abs() / cur.abs().max(1e-300);
            prev = cur;
            if change < 1e-8 {
                break;
            }
            if panels >= 512 {
                return Err(MeasureError::NoConvergence(change));
            }
            panels *= 2;
        }
        total += prev;
    }
    Ok(sphere_area(n - 2) * total)
}

pub fn trajectory_measures(t: &Trajectory) -> Result<RevolutionMeasures, MeasureError> {
    Ok(RevolutionMeasures { perimeter: trajectory_perimeter(t)?, volume: trajectory_volume(t)?, n: t.n(), sigma: sphere_area(t.n() - 2) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub volume: f64,
    pub radius: f64,
    pub perimeter: f64,
}

/// Radius of the centered ball of weighted volume `v`, by bisection.
pub fn ball_radius_for_volume(v: f64, n: usize, d: &Density) -> Result<f64, MeasureError> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(MeasureError::Input(format!("volume must be positive, got {v}")));
    }
    let mut hi = 1.0;
    while ball_volume(hi, n, d)? < v {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(MeasureError::Input(format!("volume {v} out of range")));
        }
    }
    let mut lo = 0.0;
    while hi - lo > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if ball_volume(mid, n, d)? < v {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Perimeter of centered balls tabulated against weighted volume.
pub fn profile(d: &Density, n: usize, volumes: &[f64]) -> Result<Vec<ProfilePoint>, MeasureError> {
    if n < 1 {
        return Err(MeasureError::Input("n must be >= 1".into()));
    }
    if volumes.is_empty() {
        return Err(MeasureError::Input("empty volume grid".into()));
    }
    if volumes.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(MeasureError::Input("volume grid must increase strictly".into()));
    }
    volumes
        .par_iter()
        .map(|&v| {
            let r = ball_radius_for_volume(v, n, d)?;
            Ok(ProfilePoint { volume: v, radius: r, perimeter: ball_measures(r, n, d)?.perimeter })
        })
        .collect()
}

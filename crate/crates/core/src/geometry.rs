//! Pointwise quantities of generating curves in the upper half-plane.
//!
//! A curve is parametrized by arclength and positively oriented, with the
//! tangent `(cos θ, sin θ)` and outward normal `(sin θ, -cos θ)`. Angles are
//! kept unwrapped so quadrant tests are plain range tests.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::density::Density;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("state lies at the origin")]
    Origin,
    #[error("canonical circle undefined: y = {y} with non-vertical tangent")]
    OffAxisUndefined { y: f64 },
    #[error("axis point requires an explicit curvature")]
    AxisNeedsKappa,
    #[error("dimension must be >= 2, got {0}")]
    Dimension(usize),
    #[error("graph oracle: {0}")]
    Graph(String),
}

/// Below this `|cos θ|` a tangent counts as vertical.
pub const VERTICAL_EPS: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveState {
    pub s: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl CurveState {
    pub fn new(s: f64, x: f64, y: f64, theta: f64) -> Self {
        CurveState { s, x, y, theta }
    }

    pub fn rho(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn tangent(&self) -> [f64; 2] {
        [self.theta.cos(), self.theta.sin()]
    }

    pub fn outward_normal(&self) -> [f64; 2] {
        [self.theta.sin(), -self.theta.cos()]
    }

    pub fn on_axis(&self) -> bool {
        self.y == 0.0
    }

    pub fn vertical(&self) -> bool {
        self.theta.cos().abs() < VERTICAL_EPS
    }
}

/// The oriented circle through a point, tangent to the curve there, centered
/// on the horizontal axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CanonicalCircle {
    pub center_x: f64,
    /// `+inf` for the vertical-line case.
    pub radius: f64,
    /// Signed curvature: positive when the circle runs counterclockwise.
    pub lambda: f64,
}

/// Canonical circle at `state`. On the axis with a vertical tangent the
/// circle degenerates to the osculating one, so its curvature must be given
/// as `axis_kappa`.
pub fn canonical_circle(state: &CurveState, axis_kappa: Option<f64>) -> Result<CanonicalCircle, GeometryError> {
    let (sin, cos) = state.theta.sin_cos();
    if state.y <= 0.0 {
        if !state.vertical() || state.y < 0.0 {
            return Err(GeometryError::OffAxisUndefined { y: state.y });
        }
        let k = axis_kappa.ok_or(GeometryError::AxisNeedsKappa)?;
        if k == 0.0 {
            return Ok(CanonicalCircle { center_x: state.x, radius: f64::INFINITY, lambda: 0.0 });
        }
        return Ok(CanonicalCircle { center_x: state.x - sin / k, radius: 1.0 / k.abs(), lambda: k });
    }
    if cos.abs() < VERTICAL_EPS {
        return Ok(CanonicalCircle { center_x: state.x, radius: f64::INFINITY, lambda: 0.0 });
    }
    let lambda = -cos / state.y;
    Ok(CanonicalCircle { center_x: state.x + state.y * sin / cos, radius: 1.0 / lambda.abs(), lambda })
}

/// `λ` without the circle bookkeeping; on the axis it is `axis_kappa`.
pub fn lambda(state: &CurveState, axis_kappa: f64) -> f64 {
    if state.y == 0.0 {
        axis_kappa
    } else {
        -state.theta.cos() / state.y
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureBundle {
    pub kappa: f64,
    pub lambda: f64,
    pub h0: f64,
    pub h1: f64,
    pub hf: f64,
    /// Unit radial vector `γ/|γ|`.
    pub radial: [f64; 2],
}

/// `N·n` with `N` the unit radial vector.
fn radial_dot_normal(state: &CurveState, rho: f64) -> f64 {
    let (sin, cos) = state.theta.sin_cos();
    (state.x * sin - state.y * cos) / rho
}

pub fn h1(state: &CurveState, d: &Density) -> Result<f64, GeometryError> {
    let rho = state.rho();
    if rho == 0.0 {
        return Err(GeometryError::Origin);
    }
    Ok(d.dg(rho) * radial_dot_normal(state, rho))
}

fn check_dim(n: usize) -> Result<(), GeometryError> {
    if n < 2 {
        Err(GeometryError::Dimension(n))
    } else {
        Ok(())
    }
}

pub fn curvature_bundle(state: &CurveState, kappa: f64, n: usize, d: &Density) -> Result<CurvatureBundle, GeometryError> {
    check_dim(n)?;
    let rho = state.rho();
    if rho == 0.0 {
        return Err(GeometryError::Origin);
    }
    let lambda = canonical_circle(state, Some(kappa))?.lambda;
    let h1 = d.dg(rho) * radial_dot_normal(state, rho);
    let h0 = kappa + (n as f64 - 2.0) * lambda;
    Ok(CurvatureBundle { kappa, lambda, h0, h1, hf: h0 + h1, radial: [state.x / rho, state.y / rho] })
}

/// Curvature that makes `H_f = c` at `state`; this is `θ'` for the shooting ODE.
pub fn kappa_from_hf(state: &CurveState, c: f64, n: usize, d: &Density) -> Result<f64, GeometryError> {
    check_dim(n)?;
    let h1 = h1(state, d)?;
    let m = n as f64 - 2.0;
    if state.y == 0.0 {
        if !state.vertical() {
            return Err(GeometryError::OffAxisUndefined { y: 0.0 });
        }
        // λ = κ on the axis.
        return Ok((c - h1) / (m + 1.0));
    }
    if state.y < 0.0 {
        return Err(GeometryError::OffAxisUndefined { y: state.y });
    }
    Ok(c - m * (-state.theta.cos() / state.y) - h1)
}

/// `γ'·N`; nonpositive along curves whose distance to the origin never grows.
pub fn tangent_restriction(state: &CurveState) -> Result<f64, GeometryError> {
    let rho = state.rho();
    if rho == 0.0 {
        return Err(GeometryError::Origin);
    }
    let (sin, cos) = state.theta.sin_cos();
    Ok((state.x * cos + state.y * sin) / rho)
}

/// Which side of the region a graph `y = p(x)` bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GraphSide {
    /// Region lies below the graph (the graph is traversed right to left).
    Upper,
    /// Region lies above the graph.
    Lower,
}

/// Derivatives at `at` of the degree-4 interpolant through five samples.
fn lagrange_derivs(xs: &[f64], ps: &[f64], at: f64) -> (f64, f64, f64) {
    let m = xs.len();
    let mut v = 0.0;
    let mut d1 = 0.0;
    let mut d2 = 0.0;
    for i in 0..m {
        let mut denom = 1.0;
        for j in 0..m {
            if j != i {
                denom *= xs[i] - xs[j];
            }
        }
        let others: Vec<f64> = (0..m).filter(|&j| j != i).map(|j| at - xs[j]).collect();
        let l0: f64 = others.iter().product();
        let mut l1 = 0.0;
        let mut l2 = 0.0;
        for a in 0..others.len() {
            let mut p = 1.0;
            for (b, o) in others.iter().enumerate() {
                if b != a {
                    p *= o;
                }
            }
            l1 += p;
            for b in 0..others.len() {
                if b == a {
                    continue;
                }
                let mut q = 1.0;
                for (c, o) in others.iter().enumerate() {
                    if c != a && c != b {
                        q *= o;
                    }
                }
                l2 += q;
            }
        }
        v += ps[i] * l0 / denom;
        d1 += ps[i] * l1 / denom;
        d2 += ps[i] * l2 / denom;
    }
    (v, d1, d2)
}

/// Mean curvature `H_0` of the hypersurface obtained by revolving the graph
/// `y = p(x)` about the horizontal axis, computed from sampled values only.
///
/// Used as an independent check of [`curvature_bundle`].
pub fn mean_curvature_via_graph(xs: &[f64], ps: &[f64], at: f64, n: usize, side: GraphSide) -> Result<f64, GeometryError> {
    check_dim(n)?;
    if xs.len() != ps.len() {
        return Err(GeometryError::Graph("length mismatch".into()));
    }
    if xs.len() < 5 {
        return Err(GeometryError::Graph(format!("need at least 5 samples, got {}", xs.len())));
    }
    if xs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(GeometryError::Graph("abscissae must increase strictly".into()));
    }
    if !(at >= xs[0] && at <= xs[xs.len() - 1]) {
        return Err(GeometryError::Graph(format!("{at} outside the sampled range")));
    }
    let idx = xs.partition_point(|&x| x < at);
    let start = idx.saturating_sub(2).min(xs.len() - 5);
    let (p, p1, p2) = lagrange_derivs(&xs[start..start + 5], &ps[start..start + 5], at);
    if !(p > 0.0) {
        return Err(GeometryError::Graph(format!("graph must be positive, p = {p}")));
    }
    let w = (1.0 + p1 * p1).sqrt();
    let raw = p2 / (w * w * w) - (n as f64 - 2.0) / (p * w);
    Ok(match side {
        GraphSide::Upper => -raw,
        GraphSide::Lower => raw,
    })
}

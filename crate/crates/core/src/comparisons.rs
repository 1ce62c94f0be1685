//! Comparison checks on sampled curves.
//!
//! * A curvature comparison for nondecreasing graphs: pointwise curvature
//!   ordering plus ordered end data propagates to ordered values and angles.
//! * A comparison of the normal derivative of a radial function at two points
//!   of equal height whose canonical circles are "admissible".
//! * Analyzers that split a shot trajectory into its upper curve (second
//!   quadrant tangents, `κ ≥ λ > 0`, `F' ≥ 0`) and lower curve (third quadrant
//!   tangents dominating the upper curve's curvature at equal height), and the
//!   reflected graphs `Q`, `W` that tie the two together.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{self, CanonicalCircle, CurveState, GeometryError};
use crate::shooting::{wrap_angle, EventKind, ShootingError, Trajectory};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ComparisonError {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("pair is not admissible: {0:?}")]
    NotAdmissible(Vec<AdmissibilityFailure>),
    #[error("trajectory too short to analyze")]
    TooShort,
    #[error("empty height interval")]
    EmptyInterval,
    #[error("no upper-curve point at height {0}")]
    HeightLookup(f64),
    #[error(transparent)]
    Shooting(#[from] ShootingError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

// ---------------------------------------------------------------------------
// Graph curvature comparison

/// Samples of a `C²` graph on the open interval `(a, b)` together with its
/// one-sided limits at `b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphFunction {
    pub a: f64,
    pub b: f64,
    pub xs: Vec<f64>,
    pub values: Vec<f64>,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    pub end_value: f64,
    /// Limit of the tangent angle at `b`, in `[0, π/2]`.
    pub end_angle: f64,
}

impl GraphFunction {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        a: f64,
        b: f64,
        xs: Vec<f64>,
        values: Vec<f64>,
        d1: Vec<f64>,
        d2: Vec<f64>,
        end_value: f64,
        end_angle: f64,
    ) -> Result<Self, ComparisonError> {
        let m = xs.len();
        if m < 3 || values.len() != m || d1.len() != m || d2.len() != m {
            return Err(ComparisonError::Input("need at least 3 samples with matching lengths".into()));
        }
        if !(a < b) || xs[0] <= a || xs[m - 1] >= b || xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(ComparisonError::Input("samples must increase strictly inside (a, b)".into()));
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !finite(&values) || !finite(&d1) || !finite(&d2) || !end_value.is_finite() || !end_angle.is_finite() {
            return Err(ComparisonError::Input("non-finite sample".into()));
        }
        Ok(GraphFunction { a, b, xs, values, d1, d2, end_value, end_angle })
    }

    /// Tabulates `f(x) -> (value, d1, d2)` at `m - 1` equally spaced interior
    /// points; limits at `b` are taken from `f(b)` (an infinite slope is fine).
    pub fn from_fn(a: f64, b: f64, m: usize, f: impl Fn(f64) -> (f64, f64, f64)) -> Result<Self, ComparisonError> {
        if m < 4 {
            return Err(ComparisonError::Input("need m >= 4".into()));
        }
        let (mut xs, mut v, mut p, mut q) = (vec![], vec![], vec![], vec![]);
        for j in 1..m {
            let x = a + (b - a) * j as f64 / m as f64;
            let (f0, f1, f2) = f(x);
            xs.push(x);
            v.push(f0);
            p.push(f1);
            q.push(f2);
        }
        let (fb, f1b, _) = f(b);
        GraphFunction::new(a, b, xs, v, p, q, fb, f1b.atan())
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    /// Tangent angle `atan f'` in `(-π/2, π/2)`.
    pub fn angle(&self, i: usize) -> f64 {
        self.d1[i].atan()
    }

    /// Upward curvature `f'' / (1 + f'^2)^(3/2)`.
    pub fn curvature(&self, i: usize) -> f64 {
        let c = 1.0 / 1f64.hypot(self.d1[i]);
        self.d2[i] * c * c * c
    }

    /// Largest gap between a central difference of `sin θ` and the curvature,
    /// over interior samples.
    pub fn sin_angle_identity_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 1..self.len() - 1 {
            let (x0, x1, x2) = (self.xs[i - 1], self.xs[i], self.xs[i + 1]);
            let (s0, s1, s2) = (self.angle(i - 1).sin(), self.angle(i).sin(), self.angle(i + 1).sin());
            let (h0, h1) = (x1 - x0, x2 - x1);
            let fd = (s2 - s1) * h0 / (h1 * (h0 + h1)) + (s1 - s0) * h1 / (h0 * (h0 + h1));
            worst = worst.max((fd - self.curvature(i)).abs());
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HypothesisKind {
    /// `f' < 0` somewhere.
    FDecreasing,
    /// `g' < 0` somewhere.
    GDecreasing,
    /// `f(b) > g(b)`.
    EndValues,
    /// `θ_f(b) < θ_g(b)`.
    EndAngles,
    /// `κ_f > κ_g` somewhere.
    CurvatureOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HypothesisViolation {
    pub kind: HypothesisKind,
    /// Worst location (the endpoint `b` for end conditions).
    pub x: f64,
    pub amount: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// Hypotheses do not hold on the samples, so nothing is claimed.
    Inapplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureComparisonReport {
    pub samples: usize,
    pub violations: Vec<HypothesisViolation>,
    /// `max (f - g)` over samples.
    pub max_value_excess: f64,
    /// `max (θ_g - θ_f)` over samples.
    pub max_angle_deficit: f64,
    /// Sample with `κ_f < κ_g` beyond tolerance nearest the domain midpoint.
    pub strict_at: Option<f64>,
    /// `min (θ_f - θ_g)` over samples up to `strict_at`.
    pub phi: Option<f64>,
    pub verdict: Verdict,
}

/// Checks the curvature comparison conclusions `f ≤ g` and `θ_f ≥ θ_g` on
/// common samples, after gating on the hypotheses. `tol` is absolute.
pub fn curvature_comparison_verify(f: &GraphFunction, g: &GraphFunction, tol: f64) -> Result<CurvatureComparisonReport, ComparisonError> {
    if f.xs != g.xs || f.a != g.a || f.b != g.b {
        return Err(ComparisonError::Input("graphs must share domain and samples".into()));
    }
    let m = f.len();
    let mut violations: Vec<HypothesisViolation> = Vec::new();
    let mut note = |kind, x: f64, amount: f64| match violations.iter_mut().find(|v| v.kind == kind) {
        Some(v) => {
            v.count += 1;
            if amount > v.amount {
                v.amount = amount;
                v.x = x;
            }
        }
        None => violations.push(HypothesisViolation { kind, x, amount, count: 1 }),
    };
    for i in 0..m {
        let x = f.xs[i];
        if f.d1[i] < -tol {
            note(HypothesisKind::FDecreasing, x, -f.d1[i]);
        }
        if g.d1[i] < -tol {
            note(HypothesisKind::GDecreasing, x, -g.d1[i]);
        }
        let dk = f.curvature(i) - g.curvature(i);
        if dk > tol {
            note(HypothesisKind::CurvatureOrder, x, dk);
        }
    }
    if f.end_value - g.end_value > tol {
        note(HypothesisKind::EndValues, f.b, f.end_value - g.end_value);
    }
    if g.end_angle - f.end_angle > tol {
        note(HypothesisKind::EndAngles, f.b, g.end_angle - f.end_angle);
    }

    let mut max_value_excess = f64::NEG_INFINITY;
    let mut max_angle_deficit = f64::NEG_INFINITY;
    for i in 0..m {
        max_value_excess = max_value_excess.max(f.values[i] - g.values[i]);
        max_angle_deficit = max_angle_deficit.max(g.angle(i) - f.angle(i));
    }
    // Reference point for the angle gap: the strict sample nearest the middle
    // of the domain, so that nested refinements share it.
    let mid = 0.5 * (f.a + f.b);
    let strict_at =
        (0..m).filter(|&i| g.curvature(i) - f.curvature(i) > tol).min_by(|&i, &j| (f.xs[i] - mid).abs().total_cmp(&(f.xs[j] - mid).abs()));
    let phi = strict_at.map(|k| (0..=k).map(|i| f.angle(i) - g.angle(i)).fold(f64::INFINITY, f64::min));
    let verdict = if !violations.is_empty() {
        Verdict::Inapplicable
    } else if max_value_excess <= tol && max_angle_deficit <= tol && phi.is_none_or(|p| p > 0.0) {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(CurvatureComparisonReport {
        samples: m,
        violations,
        max_value_excess,
        max_angle_deficit,
        strict_at: strict_at.map(|k| f.xs[k]),
        phi,
        verdict,
    })
}

// ---------------------------------------------------------------------------
// Admissible pairs

/// Clockwise quarter turn.
pub fn perp(v: [f64; 2]) -> [f64; 2] {
    [v[1], -v[0]]
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn unit(p: [f64; 2]) -> [f64; 2] {
    let r = p[0].hypot(p[1]);
    [p[0] / r, p[1] / r]
}

/// Points `(x1, y)`, `(x2, y)` with unit vectors `v1` strictly in the second
/// quadrant and `v2` strictly in the third.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmissiblePair {
    pub y: f64,
    pub x1: f64,
    pub x2: f64,
    pub v1: [f64; 2],
    pub v2: [f64; 2],
}

impl AdmissiblePair {
    pub fn new(y: f64, x1: f64, x2: f64, v1: [f64; 2], v2: [f64; 2]) -> Result<Self, ComparisonError> {
        if !(y > 0.0) || !y.is_finite() {
            return Err(ComparisonError::Input(format!("height must be positive, got {y}")));
        }
        if !(x1 >= x2) {
            return Err(ComparisonError::Input(format!("need x1 >= x2, got {x1} < {x2}")));
        }
        for v in [v1, v2] {
            if (v[0].hypot(v[1]) - 1.0).abs() > 1e-12 {
                return Err(ComparisonError::Input(format!("{v:?} is not a unit vector")));
            }
        }
        if !(v1[0] < 0.0 && v1[1] > 0.0) {
            return Err(ComparisonError::Input(format!("v1 = {v1:?} not strictly in the second quadrant")));
        }
        if !(v2[0] < 0.0 && v2[1] < 0.0) {
            return Err(ComparisonError::Input(format!("v2 = {v2:?} not strictly in the third quadrant")));
        }
        Ok(AdmissiblePair { y, x1, x2, v1, v2 })
    }

    fn state(&self, x: f64, v: [f64; 2]) -> CurveState {
        CurveState::new(0.0, x, self.y, v[1].atan2(v[0]))
    }

    pub fn circles(&self) -> Result<(CanonicalCircle, CanonicalCircle), ComparisonError> {
        Ok((
            geometry::canonical_circle(&self.state(self.x1, self.v1), None)?,
            geometry::canonical_circle(&self.state(self.x2, self.v2), None)?,
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdmissibilityFailure {
    NegativeCenter,
    RadiusOrder,
    CenterBalance,
}

impl fmt::Display for AdmissibilityFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AdmissibilityFailure::NegativeCenter => "a1 < 0",
            AdmissibilityFailure::RadiusOrder => "r2 < r1",
            AdmissibilityFailure::CenterBalance => "x1 - a1 < a1 - x2",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Admissibility {
    pub admissible: bool,
    pub a1: f64,
    pub r1: f64,
    pub a2: f64,
    pub r2: f64,
    pub failures: Vec<AdmissibilityFailure>,
}

/// Evaluates the three admissibility inequalities, each allowed to fail by
/// at most `tol` to absorb rounding in the circle data.
pub fn is_admissible(pair: &AdmissiblePair, tol: f64) -> Result<Admissibility, ComparisonError> {
    let (c1, c2) = pair.circles()?;
    let (a1, r1, a2, r2) = (c1.center_x, c1.radius, c2.center_x, c2.radius);
    let mut failures = Vec::new();
    if !(a1 >= -tol) {
        failures.push(AdmissibilityFailure::NegativeCenter);
    }
    if !(r2 >= r1 - tol) {
        failures.push(AdmissibilityFailure::RadiusOrder);
    }
    if !(pair.x1 - a1 >= a1 - pair.x2 - tol) {
        failures.push(AdmissibilityFailure::CenterBalance);
    }
    Ok(Admissibility { admissible: failures.is_empty(), a1, r1, a2, r2, failures })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct H1ComparisonReport {
    pub norm1: f64,
    pub norm2: f64,
    /// `v1⊥ · N(x1, y)`.
    pub lhs: f64,
    /// `v2⊥ · N(x2, y)`.
    pub rhs: f64,
    pub norms_ordered: bool,
    pub inequality_holds: bool,
    /// `lhs == rhs` within tolerance.
    pub equal: bool,
    /// Both circles coincide and are centered at the origin.
    pub equality_case: bool,
    pub passed: bool,
}

/// Checks `|(x1,y)| ≥ |(x2,y)|` and `v1⊥·N(x1,y) ≥ v2⊥·N(x2,y)`, with equality
/// exactly in the centered coincident case.
pub fn h1_comparison_verify(pair: &AdmissiblePair, tol: f64) -> Result<H1ComparisonReport, ComparisonError> {
    let adm = is_admissible(pair, tol)?;
    if !adm.admissible {
        return Err(ComparisonError::NotAdmissible(adm.failures));
    }
    let p1 = [pair.x1, pair.y];
    let p2 = [pair.x2, pair.y];
    let norm1 = p1[0].hypot(p1[1]);
    let norm2 = p2[0].hypot(p2[1]);
    let lhs = dot(perp(pair.v1), unit(p1));
    let rhs = dot(perp(pair.v2), unit(p2));
    let equal = (lhs - rhs).abs() <= tol;
    let equality_case = adm.a1.abs() <= tol && adm.a2.abs() <= tol && (adm.r1 - adm.r2).abs() <= tol;
    let norms_ordered = norm1 >= norm2 - tol;
    let inequality_holds = lhs >= rhs - tol;
    Ok(H1ComparisonReport {
        norm1,
        norm2,
        lhs,
        rhs,
        norms_ordered,
        inequality_holds,
        equal,
        equality_case,
        passed: norms_ordered && inequality_holds && (equal == equality_case),
    })
}

/// Counterclockwise angle in `[0, 2π)`.
fn angle_2pi(v: [f64; 2]) -> f64 {
    v[1].atan2(v[0]).rem_euclid(2.0 * PI)
}

fn rotate(v: [f64; 2], phi: f64) -> [f64; 2] {
    let (s, c) = phi.sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1]]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationCell {
    pub c: f64,
    pub d: f64,
    pub phi: f64,
    /// `θ(v1⊥) - θ(N(x1, y))` from vector angles.
    pub theta1: f64,
    pub theta2: f64,
    /// The same angles as integrals of `y / (t² + y²)`.
    pub theta1_integral: f64,
    pub theta2_integral: f64,
    pub admissible: bool,
}

impl PerturbationCell {
    pub fn is_origin(&self) -> bool {
        self.c == 0.0 && self.d == 0.0 && self.phi == 0.0
    }

    pub fn strict(&self) -> bool {
        self.theta1 < self.theta2 && self.theta1.cos() > self.theta2.cos()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSweep {
    pub cells: usize,
    pub strict_cells: usize,
    pub admissible_cells: usize,
    /// Non-origin cells without strict inequality.
    pub failures: Vec<PerturbationCell>,
    pub origin_equal: bool,
    /// Largest disagreement between the angle and integral routes.
    pub route_mismatch: f64,
    pub passed: bool,
}

/// Perturbs the symmetric base pair at height 1 (points `±1`, tangents
/// `(-1, ±1)/√2`) by shifts `c`, `d` and a rotation `φ` of `v2`, each over
/// `steps` equally spaced values in `[0, max]`.
pub fn perturbation_cell(c: f64, d: f64, phi: f64) -> PerturbationCell {
    let y = 1.0;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let v1 = [-s, s];
    let v2 = rotate([-s, -s], phi);
    let (x1s, x2s) = (1.0, -1.0);
    let (x1, x2) = (x1s + c, x2s + c + d);
    let theta1 = angle_2pi(perp(v1)) - angle_2pi([x1, y]);
    let theta2 = angle_2pi(perp(v2)) - angle_2pi([x2, y]);
    let prim = |t: f64| (t / y).atan();
    let theta1_integral = prim(x1s + c) - prim(x1s);
    let theta2_integral = phi + prim(x2s + c + d) - prim(x2s);
    let admissible = AdmissiblePair::new(y, x1, x2, v1, v2).and_then(|p| is_admissible(&p, 1e-12)).map(|a| a.admissible).unwrap_or(false);
    PerturbationCell { c, d, phi, theta1, theta2, theta1_integral, theta2_integral, admissible }
}

pub fn perturbation_sweep(steps: usize, max: f64) -> PerturbationSweep {
    let vals: Vec<f64> = (0..steps).map(|i| max * i as f64 / (steps - 1).max(1) as f64).collect();
    let mut out = PerturbationSweep {
        cells: 0,
        strict_cells: 0,
        admissible_cells: 0,
        failures: vec![],
        origin_equal: false,
        route_mismatch: 0.0,
        passed: false,
    };
    for &c in &vals {
        for &d in &vals {
            for &phi in &vals {
                let cell = perturbation_cell(c, d, phi);
                out.cells += 1;
                out.admissible_cells += cell.admissible as usize;
                out.route_mismatch =
                    out.route_mismatch.max((cell.theta1 - cell.theta1_integral).abs()).max((cell.theta2 - cell.theta2_integral).abs());
                if cell.is_origin() {
                    out.origin_equal = cell.theta1.abs() < 1e-15 && cell.theta2.abs() < 1e-15;
                } else if cell.strict() {
                    out.strict_cells += 1;
                } else {
                    out.failures.push(cell);
                }
            }
        }
    }
    out.passed = out.failures.is_empty() && out.origin_equal && out.route_mismatch < 1e-12;
    out
}

// ---------------------------------------------------------------------------
// Upper and lower curves

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpperBreak {
    /// Tangent reached `(-1, 0)`.
    HorizontalTangent,
    /// Tangent turned below the vertical.
    LeftSecondQuadrant,
    NonPositiveLambda,
    CurvatureBelowCircle,
    /// `F` undefined at a vertical tangent off the axis.
    VerticalTangent,
    FDecreasing,
    EndOfTrajectory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpperCurveReport {
    pub delta: f64,
    pub break_reason: UpperBreak,
    pub end_state: CurveState,
    pub samples_checked: usize,
    /// `min (κ - λ)` over the upper curve.
    pub min_kappa_gap: f64,
    /// `min F'` over off-axis samples of the upper curve.
    pub min_f_prime: f64,
    /// Smallest and largest `F` seen.
    pub f_range: (f64, f64),
    /// `γ₁(δ) ≥ F` along the whole upper curve.
    pub endpoint_dominates_f: bool,
}

fn within_upper(theta: f64, tol: f64) -> bool {
    theta >= FRAC_PI_2 - tol && theta <= PI + tol
}

/// `F' = y (κ - λ) / cos² θ`.
fn f_prime(st: &CurveState, kappa: f64) -> f64 {
    let cos = st.theta.cos();
    (cos + st.y * kappa) / (cos * cos)
}

fn f_value(st: &CurveState) -> f64 {
    st.x + st.y * st.theta.tan()
}

#[derive(Clone, Copy)]
struct Probe {
    st: CurveState,
    kappa: f64,
    lambda: f64,
}

fn probe(t: &Trajectory, s: f64) -> Result<Probe, ComparisonError> {
    let st = t.state_at(s)?;
    let kappa = t.kappa_at(&st);
    let lambda = if st.y > 0.0 { -st.theta.cos() / st.y } else { kappa };
    Ok(Probe { st, kappa, lambda })
}

fn upper_break(p: &Probe, tol: f64) -> Option<UpperBreak> {
    let Probe { st, kappa, lambda } = *p;
    if st.theta > PI + tol {
        return Some(UpperBreak::HorizontalTangent);
    }
    if !within_upper(st.theta, tol) {
        return Some(UpperBreak::LeftSecondQuadrant);
    }
    if !(lambda > 0.0) {
        return Some(UpperBreak::NonPositiveLambda);
    }
    if kappa < lambda - tol * kappa.abs().max(1.0) {
        return Some(UpperBreak::CurvatureBelowCircle);
    }
    if st.y > 0.0 {
        let cos = st.theta.cos();
        if cos.abs() < geometry::VERTICAL_EPS {
            return Some(UpperBreak::VerticalTangent);
        }
        if f_prime(&st, kappa) < -tol * kappa.abs().max(1.0) * st.y / (cos * cos) {
            return Some(UpperBreak::FDecreasing);
        }
    }
    None
}

/// Last arclength in `[lo, hi]` where `ok` holds, by bisection.
fn refine(t: &Trajectory, mut lo: f64, mut hi: f64, ok: impl Fn(&Probe) -> bool) -> Result<f64, ComparisonError> {
    for _ in 0..60 {
        if hi - lo <= 1e-13 * (1.0 + hi.abs()) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if ok(&probe(t, mid)?) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Walks the trajectory from the axis and returns the end `δ` of the longest
/// prefix with second-quadrant tangents, `κ ≥ λ > 0` and `F' ≥ 0`.
pub fn analyze_upper_curve(t: &Trajectory, tol: f64) -> Result<UpperCurveReport, ComparisonError> {
    if t.samples.len() < 3 {
        return Err(ComparisonError::TooShort);
    }
    let mut min_kappa_gap = f64::INFINITY;
    let mut min_f_prime = f64::INFINITY;
    let mut f_range = (f64::INFINITY, f64::NEG_INFINITY);
    let mut last_good = 0usize;
    let mut found = None;
    for (i, smp) in t.samples.iter().enumerate() {
        let st = smp.state;
        let p = Probe { st, kappa: smp.bundle.kappa, lambda: if st.y > 0.0 { -st.theta.cos() / st.y } else { smp.bundle.kappa } };
        if let Some(reason) = upper_break(&p, tol) {
            found = Some((i, reason));
            break;
        }
        last_good = i;
        min_kappa_gap = min_kappa_gap.min(p.kappa - p.lambda);
        if st.y > 0.0 {
            min_f_prime = min_f_prime.min(f_prime(&st, p.kappa));
            let fv = f_value(&st);
            f_range = (f_range.0.min(fv), f_range.1.max(fv));
        }
    }
    let (delta, reason) = match found {
        None => (t.length(), UpperBreak::EndOfTrajectory),
        Some((i, reason)) => {
            let (lo, hi) = (t.samples[last_good].state.s, t.samples[i].state.s);
            let horizontal =
                t.events_of(EventKind::Horizontal).find(|e| e.state.s >= lo && e.state.s <= hi && (e.state.theta - PI).abs() < 1e-6);
            match (reason, horizontal) {
                (UpperBreak::HorizontalTangent, Some(e)) => (e.state.s, reason),
                _ => (refine(t, lo, hi, |p| upper_break(p, tol).is_none())?, reason),
            }
        }
    };
    let end_state = t.state_at(delta)?;
    Ok(UpperCurveReport {
        delta,
        break_reason: reason,
        end_state,
        samples_checked: last_good + 1,
        min_kappa_gap,
        min_f_prime,
        f_range,
        endpoint_dominates_f: f_range.1 <= end_state.x + tol * (1.0 + end_state.x.abs()),
    })
}

/// Arclength in `[lo, hi]` where `y = h`, for a segment on which `y` is monotone.
fn solve_height(t: &Trajectory, mut lo: f64, mut hi: f64, h: f64) -> Result<CurveState, ComparisonError> {
    let y_lo = t.state_at(lo)?.y;
    let rising = t.state_at(hi)?.y > y_lo;
    let mut st = t.state_at(0.5 * (lo + hi))?;
    for _ in 0..80 {
        let f = st.y - h;
        if f.abs() <= 1e-15 * (1.0 + h.abs()) || hi - lo <= 1e-15 * (1.0 + hi.abs()) {
            break;
        }
        if (f > 0.0) == rising {
            hi = st.s;
        } else {
            lo = st.s;
        }
        let sin = st.theta.sin();
        let newton = st.s - f / sin;
        let s = if sin != 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        st = t.state_at(s)?;
    }
    Ok(st)
}

/// Upper-curve point at height `h`: samples `[0, k]` of the upper curve have
/// nondecreasing heights.
fn upper_at(t: &Trajectory, delta: f64, h: f64) -> Result<CurveState, ComparisonError> {
    let k = t.samples.partition_point(|p| p.state.s <= delta);
    let ys: Vec<f64> = t.samples[..k].iter().map(|p| p.state.y).collect();
    let top = t.state_at(delta)?.y;
    if h > top * (1.0 + 1e-12) + 1e-15 || h < 0.0 {
        return Err(ComparisonError::HeightLookup(h));
    }
    if h >= top {
        return Ok(t.state_at(delta)?);
    }
    let j = ys.partition_point(|&y| y < h);
    if j == 0 {
        return Ok(t.samples[0].state);
    }
    let hi = if j < k { t.samples[j].state.s } else { delta };
    solve_height(t, t.samples[j - 1].state.s, hi, h)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LowerBreak {
    /// Tangent turned past `(0, -1)`.
    LeftThirdQuadrant,
    /// `κ(z) < κ(z̄)`.
    CurvatureComparison,
    ReachedAxis,
    EndOfTrajectory,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedPoint {
    pub height: f64,
    pub s: f64,
    pub s_bar: f64,
    pub x: f64,
    pub x_bar: f64,
    /// Tangent angles in `(-π, π]`.
    pub theta: f64,
    pub theta_bar: f64,
    pub kappa: f64,
    pub kappa_bar: f64,
    /// `x̄ - x_δ ≥ x_δ - x`.
    pub reflection_ok: bool,
    /// `θ̄ ≥ -θ`.
    pub angle_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerCurveReport {
    pub delta: f64,
    pub eta: f64,
    pub break_reason: LowerBreak,
    pub pairs: Vec<PairedPoint>,
    /// Both reflection conclusions hold at every pair.
    pub conclusions_hold: bool,
    /// Pairs with `κ(z) > κ(z̄)` beyond tolerance.
    pub strict_pairs: usize,
    /// Height range covered by strict pairs.
    pub strict_heights: Option<(f64, f64)>,
}

fn lower_break(p: &Probe, bar: &Probe, tol: f64) -> Option<LowerBreak> {
    if p.st.theta > 1.5 * PI + tol || p.st.theta < PI - tol {
        return Some(LowerBreak::LeftThirdQuadrant);
    }
    if p.kappa < bar.kappa - tol * bar.kappa.abs().max(1.0) {
        return Some(LowerBreak::CurvatureComparison);
    }
    None
}

/// Follows the trajectory past `δ` while tangents stay in the third quadrant
/// and curvature dominates the upper curve at equal height; every sample is
/// paired with its upper-curve partner.
pub fn analyze_lower_curve(t: &Trajectory, delta: f64, tol: f64) -> Result<LowerCurveReport, ComparisonError> {
    let top = t.state_at(delta)?;
    if delta >= t.length() {
        return Err(ComparisonError::TooShort);
    }
    if (top.theta - PI).abs() > 1e-6 {
        return Err(ComparisonError::Input(format!("tangent at delta is not (-1, 0): theta = {}", top.theta)));
    }
    let x_delta = top.x;
    let pair_at = |p: &Probe| -> Result<Probe, ComparisonError> {
        let st = upper_at(t, delta, p.st.y.max(0.0))?;
        let kappa = t.kappa_at(&st);
        Ok(Probe { st, kappa, lambda: f64::NAN })
    };
    let mut pairs = Vec::new();
    let mut prev_s = delta;
    let mut outcome = None;
    for smp in t.samples.iter().filter(|p| p.state.s > delta) {
        let st = smp.state;
        let p = Probe { st, kappa: smp.bundle.kappa, lambda: smp.bundle.lambda };
        if st.y <= 0.0 {
            outcome = Some((st.s, LowerBreak::ReachedAxis));
            break;
        }
        let bar = pair_at(&p)?;
        if let Some(reason) = lower_break(&p, &bar, tol) {
            let down = t.events_of(EventKind::TangentDown).find(|e| e.state.s >= prev_s && e.state.s <= st.s);
            let eta = match (reason, down) {
                (LowerBreak::LeftThirdQuadrant, Some(e)) => e.state.s,
                _ => refine(t, prev_s, st.s, |q| pair_at(q).map(|b| lower_break(q, &b, tol).is_none()).unwrap_or(false))?,
            };
            outcome = Some((eta, reason));
            break;
        }
        let theta = wrap_angle(st.theta);
        let theta_bar = wrap_angle(bar.st.theta);
        pairs.push(PairedPoint {
            height: st.y,
            s: st.s,
            s_bar: bar.st.s,
            x: st.x,
            x_bar: bar.st.x,
            theta,
            theta_bar,
            kappa: p.kappa,
            kappa_bar: bar.kappa,
            reflection_ok: bar.st.x - x_delta >= x_delta - st.x - tol,
            angle_ok: theta_bar >= -theta - tol,
        });
        prev_s = st.s;
    }
    let (eta, break_reason) = outcome.unwrap_or((t.length(), LowerBreak::EndOfTrajectory));
    let strict: Vec<&PairedPoint> = pairs.iter().filter(|p| p.kappa - p.kappa_bar > tol * p.kappa_bar.abs().max(1.0)).collect();
    let strict_heights = (!strict.is_empty())
        .then(|| strict.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.height), hi.max(p.height))));
    Ok(LowerCurveReport {
        delta,
        eta,
        break_reason,
        conclusions_hold: pairs.iter().all(|p| p.reflection_ok && p.angle_ok),
        strict_pairs: strict.len(),
        strict_heights,
        pairs,
    })
}

/// Reflected upper curve `Q = 2γ₁(δ) - γ₁(h)` and lower curve `W = γ₁(k)` as
/// graphs over height.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QWPair {
    pub q: GraphFunction,
    pub w: GraphFunction,
}

/// Tabulates `Q` and `W` at `m - 1` interior heights of `(γ₂(η), γ₂(δ))`.
pub fn build_qw(t: &Trajectory, delta: f64, eta: f64, m: usize) -> Result<QWPair, ComparisonError> {
    if !(eta > delta) {
        return Err(ComparisonError::EmptyInterval);
    }
    let top = t.state_at(delta)?;
    let bottom = t.state_at(eta.min(t.length()))?;
    let (a, b) = (bottom.y.max(0.0), top.y);
    if !(b > a) || m < 4 {
        return Err(ComparisonError::EmptyInterval);
    }
    let lower_at = |h: f64| -> Result<CurveState, ComparisonError> {
        let k0 = t.samples.partition_point(|p| p.state.s <= delta);
        let k1 = t.samples.partition_point(|p| p.state.s < eta);
        let mut lo = delta;
        for p in &t.samples[k0..k1] {
            if p.state.y < h {
                return solve_height(t, lo, p.state.s, h);
            }
            lo = p.state.s;
        }
        solve_height(t, lo, eta, h)
    };
    let (mut xs, mut qv, mut q1, mut q2, mut wv, mut w1, mut w2) = (vec![], vec![], vec![], vec![], vec![], vec![], vec![]);
    for j in 1..m {
        let h = a + (b - a) * j as f64 / m as f64;
        let up = upper_at(t, delta, h)?;
        let dn = lower_at(h)?;
        let (ku, kd) = (t.kappa_at(&up), t.kappa_at(&dn));
        let (su, cu) = up.theta.sin_cos();
        let (sd, cd) = dn.theta.sin_cos();
        xs.push(h);
        qv.push(2.0 * top.x - up.x);
        q1.push(-cu / su);
        q2.push(ku / (su * su * su));
        wv.push(dn.x);
        w1.push(cd / sd);
        w2.push(-kd / (sd * sd * sd));
    }
    // At δ both graphs meet with a vertical tangent.
    let q_end = (top.theta - FRAC_PI_2).clamp(0.0, FRAC_PI_2);
    let w_end = (1.5 * PI - top.theta).clamp(0.0, FRAC_PI_2);
    Ok(QWPair {
        q: GraphFunction::new(a, b, xs.clone(), qv, q1, q2, top.x, q_end)?,
        w: GraphFunction::new(a, b, xs, wv, w1, w2, top.x, w_end)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const S: f64 = std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn perp_is_clockwise() {
        assert_eq!(perp([1.0, 0.0]), [0.0, -1.0]);
        assert_eq!(perp([0.0, 1.0]), [1.0, 0.0]);
    }

    #[test]
    fn symmetric_pair_is_equality_case() {
        let p = AdmissiblePair::new(1.0, 1.0, -1.0, [-S, S], [-S, -S]).unwrap();
        let a = is_admissible(&p, 1e-12).unwrap();
        assert!(a.admissible, "{a:?}");
        assert!(a.a1.abs() < 1e-15 && (a.r1 - 2f64.sqrt()).abs() < 1e-15);
        let r = h1_comparison_verify(&p, 1e-12).unwrap();
        assert!(r.passed && r.equal && r.equality_case, "{r:?}");
        assert!((r.lhs - 1.0).abs() < 1e-15);
    }

    #[test]
    fn shifted_pair_is_strict() {
        let p = AdmissiblePair::new(1.0, 1.1, -0.9, [-S, S], [-S, -S]).unwrap();
        let r = h1_comparison_verify(&p, 1e-12).unwrap();
        assert!(r.passed && !r.equal && r.lhs > r.rhs, "{r:?}");
    }

    #[test]
    fn admissibility_diagnostics() {
        // A flatter v2 gives a smaller second circle.
        let v2 = [-(1.0f64 - 0.04).sqrt(), -0.2];
        let p = AdmissiblePair::new(1.0, 1.0, -1.0, [-S, S], v2).unwrap();
        let a = is_admissible(&p, 1e-12).unwrap();
        assert!(a.failures.contains(&AdmissibilityFailure::RadiusOrder), "{a:?}");
        assert_eq!(AdmissibilityFailure::RadiusOrder.to_string(), "r2 < r1");
        let p = AdmissiblePair::new(1.0, -0.5, -1.0, [-S, S], [-S, -S]).unwrap();
        assert!(is_admissible(&p, 1e-12).unwrap().failures.contains(&AdmissibilityFailure::NegativeCenter));
        assert!(h1_comparison_verify(&p, 1e-12).is_err());
    }

    #[test]
    fn rejects_boundary_vectors() {
        assert!(AdmissiblePair::new(1.0, 1.0, -1.0, [-1.0, 0.0], [-S, -S]).is_err());
        assert!(AdmissiblePair::new(1.0, 1.0, -1.0, [-S, S], [0.0, -1.0]).is_err());
        assert!(AdmissiblePair::new(0.0, 1.0, -1.0, [-S, S], [-S, -S]).is_err());
        assert!(AdmissiblePair::new(1.0, -2.0, -1.0, [-S, S], [-S, -S]).is_err());
    }

    #[test]
    fn equal_graphs_compare_with_equality() {
        let f = GraphFunction::from_fn(0.0, 0.5, 50, |x| {
            let r = (1.0 - x * x).sqrt();
            (1.0 - r, x / r, 1.0 / (r * r * r))
        })
        .unwrap();
        let r = curvature_comparison_verify(&f, &f, 1e-12).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        assert_eq!(r.max_value_excess, 0.0);
        assert!(r.strict_at.is_none());
    }
}

//! Closed forms along arclength-parametrized circles
//! `α(x) = (a + r cos(x/r), b + r sin(x/r))`, each paired with a
//! finite-difference oracle built from the generic geometry routines.
//!
//! The derivative of `H₁` along a circle is assembled three ways: from the
//! explicit vectors `N'`, `n'`, from the printed simplified factor
//! `a r cos + 3 b r sin + a² + b²`, and from the factor that the vector form
//! actually reduces to, `a r cos + b r sin + a² + b²`. The printed factor
//! disagrees with the other two whenever `b sin(x/r) ≠ 0`; it carries the
//! same sign, so the sign conclusions are unaffected.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::density::Density;
use crate::geometry::{self, CurveState, GeometryError};
use crate::shooting::Trajectory;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AppendixError {
    #[error("invalid circle: {0}")]
    Param(String),
    #[error("arclength {x} outside {domain}")]
    Domain { x: f64, domain: &'static str },
    #[error("circle passes through the origin at x = {0}")]
    Origin(f64),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Circle of radius `r` about `(a, b)`, run counterclockwise at unit speed
/// from its rightmost point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleParam {
    pub a: f64,
    pub b: f64,
    pub r: f64,
}

impl CircleParam {
    pub fn new(a: f64, b: f64, r: f64) -> Result<Self, AppendixError> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(AppendixError::Param(format!("radius must be positive, got {r}")));
        }
        if !(b >= 0.0) || !b.is_finite() || !a.is_finite() {
            return Err(AppendixError::Param(format!("need finite a and b >= 0, got ({a}, {b})")));
        }
        Ok(CircleParam { a, b, r })
    }

    pub fn point(&self, x: f64) -> [f64; 2] {
        let (s, c) = (x / self.r).sin_cos();
        [self.a + self.r * c, self.b + self.r * s]
    }

    pub fn tangent(&self, x: f64) -> [f64; 2] {
        let (s, c) = (x / self.r).sin_cos();
        [-s, c]
    }

    /// Outward normal `(cos(x/r), sin(x/r))`.
    pub fn normal(&self, x: f64) -> [f64; 2] {
        let (s, c) = (x / self.r).sin_cos();
        [c, s]
    }

    pub fn state(&self, x: f64) -> CurveState {
        let p = self.point(x);
        CurveState::new(x, p[0], p[1], x / self.r + FRAC_PI_2)
    }
}

fn dot(u: [f64; 2], v: [f64; 2]) -> f64 {
    u[0] * v[0] + u[1] * v[1]
}

/// `H₁ = g'(|α|) (N·n)` through the generic geometry routine.
pub fn h1_on_circle(cp: &CircleParam, x: f64, d: &Density) -> Result<f64, AppendixError> {
    let st = cp.state(x);
    geometry::h1(&st, d).map_err(|e| match e {
        GeometryError::Origin => AppendixError::Origin(x),
        e => e.into(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum H1PrimeForm {
    /// `N'·n + N·n'` from the explicit vectors.
    Vector,
    /// Simplified factor with `3 b r sin(x/r)`.
    Printed,
    /// Simplified factor with `b r sin(x/r)`.
    Corrected,
}

/// `N'·n + N·n'` along the circle.
pub fn normal_rotation(cp: &CircleParam, x: f64, form: H1PrimeForm) -> Result<f64, AppendixError> {
    let CircleParam { a, b, r } = *cp;
    let (s, c) = (x / r).sin_cos();
    let p = cp.point(x);
    let dd = dot(p, p);
    if dd == 0.0 {
        return Err(AppendixError::Origin(x));
    }
    let norm = dd.sqrt();
    let signed = -a * s + b * c;
    Ok(match form {
        H1PrimeForm::Vector => {
            let nv = [p[0] / norm, p[1] / norm];
            let t = cp.tangent(x);
            let w = (a * s - b * c) / (dd * norm);
            let n_prime = [t[0] / norm + p[0] * w, t[1] / norm + p[1] * w];
            let nn_prime = [-s / r, c / r];
            dot(n_prime, cp.normal(x)) + dot(nv, nn_prime)
        }
        H1PrimeForm::Printed => (a * r * c + 3.0 * b * r * s + a * a + b * b) * signed / (r * dd * norm),
        H1PrimeForm::Corrected => (a * r * c + b * r * s + a * a + b * b) * signed / (r * dd * norm),
    })
}

/// `H₁'(x) = g''(|α|)(α'·α/|α|)(N·n) + g'(|α|)(N'·n + N·n')`.
pub fn h1_prime_analytic(cp: &CircleParam, x: f64, d: &Density, form: H1PrimeForm) -> Result<f64, AppendixError> {
    let p = cp.point(x);
    let rho = p[0].hypot(p[1]);
    if rho == 0.0 {
        return Err(AppendixError::Origin(x));
    }
    let radial = [p[0] / rho, p[1] / rho];
    let transport = d.d2g(rho) * dot(cp.tangent(x), radial) * dot(radial, cp.normal(x));
    Ok(transport + d.dg(rho) * normal_rotation(cp, x, form)?)
}

/// Central difference of `H₁` with step `h`.
pub fn h1_prime_fd(cp: &CircleParam, x: f64, d: &Density, h: f64) -> Result<f64, AppendixError> {
    Ok((h1_on_circle(cp, x + h, d)? - h1_on_circle(cp, x - h, d)?) / (2.0 * h))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondAtZero {
    /// `g''(|α(0)|)(N·n)(α''·α + α'·α')/|α(0)|` from the vectors.
    pub g2_term_vectors: f64,
    /// The same term after cancellation: `g''(a+r)(-a/r)/(a+r)`.
    pub g2_term: f64,
    /// `g'(a+r)·(-(a² + a³/r)/(r (a+r)³))`.
    pub g1_term: f64,
    pub uncancelled: f64,
    pub value: f64,
    /// `(a + r, 0)` lies outside the plateau ball.
    pub hypothesis_met: bool,
}

/// `H₁''(0)` for a circle centered on the axis at `a > 0`.
pub fn h1_second_at_zero(cp: &CircleParam, d: &Density) -> Result<SecondAtZero, AppendixError> {
    let CircleParam { a, b, r } = *cp;
    if b != 0.0 || !(a > 0.0) {
        return Err(AppendixError::Param(format!("need b = 0 and a > 0, got a = {a}, b = {b}")));
    }
    let p0 = cp.point(0.0);
    let rho = p0[0].hypot(p0[1]);
    let t0 = cp.tangent(0.0);
    let acc0 = [-1.0 / r, 0.0];
    let n_dot = dot([p0[0] / rho, p0[1] / rho], cp.normal(0.0));
    let g2_term_vectors = d.d2g(rho) * n_dot * (dot(acc0, p0) + dot(t0, t0)) / rho;
    let g2_term = d.d2g(a + r) * (-a / r) / (a + r);
    let g1_term = d.dg(a + r) * (-(a * a + a * a * a / r) / (r * (a + r).powi(3)));
    Ok(SecondAtZero {
        g2_term_vectors,
        g2_term,
        g1_term,
        uncancelled: g2_term_vectors + g1_term,
        value: g2_term + g1_term,
        hypothesis_met: a + r > d.plateau_radius().value(),
    })
}

/// Five-point central second difference of `H₁` at `0`, accurate to `O(h⁴)`.
pub fn h1_second_fd(cp: &CircleParam, d: &Density, h: f64) -> Result<f64, AppendixError> {
    let f = |x| h1_on_circle(cp, x, d);
    let outer = f(2.0 * h)? + f(-2.0 * h)?;
    let inner = f(h)? + f(-h)?;
    Ok((16.0 * inner - outer - 30.0 * f(0.0)?) / (12.0 * h * h))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CanonicalData {
    pub lambda: f64,
    pub f: f64,
    pub lambda_prime: f64,
    pub f_prime: f64,
}

fn check_open_half(cp: &CircleParam, x: f64) -> Result<(), AppendixError> {
    if x > 0.0 && x < PI * cp.r {
        Ok(())
    } else {
        Err(AppendixError::Domain { x, domain: "(0, πr)" })
    }
}

/// Closed forms for the canonical circle along the upper half of the circle.
pub fn lambda_f_on_circle(cp: &CircleParam, x: f64) -> Result<CanonicalData, AppendixError> {
    check_open_half(cp, x)?;
    let CircleParam { a, b, r } = *cp;
    let (s, c) = (x / r).sin_cos();
    let den = r * s + b;
    Ok(CanonicalData { lambda: s / den, f: a - b * c / s, lambda_prime: b * c / (r * den * den), f_prime: (b / r) * (1.0 / (s * s)) })
}

/// `(λ, F)` from the generic canonical circle routine.
pub fn canonical_on_circle(cp: &CircleParam, x: f64) -> Result<(f64, f64), AppendixError> {
    let c = geometry::canonical_circle(&cp.state(x), None)?;
    Ok((c.lambda, c.center_x))
}

/// Central differences of `λ` and `F` with step `h`.
pub fn lambda_f_fd(cp: &CircleParam, x: f64, h: f64) -> Result<(f64, f64), AppendixError> {
    let (l1, f1) = canonical_on_circle(cp, x + h)?;
    let (l0, f0) = canonical_on_circle(cp, x - h)?;
    Ok(((l1 - l0) / (2.0 * h), (f1 - f0) / (2.0 * h)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemarkReport {
    pub checked: usize,
    /// Samples with `κ ≤ 0`.
    pub skipped: usize,
    /// `max (b cos(x/r) - a sin(x/r))` over checked samples.
    pub max_value: f64,
    /// Samples satisfying `γ'·N ≤ tol` whose value exceeds `tol`.
    pub contradictions: usize,
    /// Samples with `γ'·N > tol`.
    pub restriction_violations: usize,
    /// Largest gap between the value and `|γ| (γ'·N)`.
    pub identity_residual: f64,
    pub passed: bool,
}

/// Osculating circle data at a point with tangent angle `theta` and
/// curvature `kappa > 0`: returns `b cos(x/r) - a sin(x/r)` at the tangency.
pub fn osculating_remark_value(st: &CurveState, kappa: f64) -> f64 {
    let (sin, cos) = st.theta.sin_cos();
    let (a, b) = (st.x - sin / kappa, st.y + cos / kappa);
    // Tangency parameter: (cos, sin)(x/r) is the outward normal (sin θ, -cos θ).
    let (cu, su) = (sin, -cos);
    b * cu - a * su
}

/// Checks `b cos(x/r) ≤ a sin(x/r)` for the osculating circle at every sample
/// with `κ > 0` where the tangent restriction holds.
pub fn admissibility_remark_check(t: &Trajectory, tol: f64) -> RemarkReport {
    let mut r = RemarkReport {
        checked: 0,
        skipped: 0,
        max_value: f64::NEG_INFINITY,
        contradictions: 0,
        restriction_violations: 0,
        identity_residual: 0.0,
        passed: false,
    };
    for smp in &t.samples {
        let st = smp.state;
        let kappa = smp.bundle.kappa;
        let Ok(tr) = geometry::tangent_restriction(&st) else {
            r.skipped += 1;
            continue;
        };
        if !(kappa > 0.0) {
            r.skipped += 1;
            continue;
        }
        r.checked += 1;
        let v = osculating_remark_value(&st, kappa);
        r.max_value = r.max_value.max(v);
        let scale = st.rho().max(1.0) * (1.0 + 1.0 / kappa);
        r.identity_residual = r.identity_residual.max((v - st.rho() * tr).abs() / scale);
        if tr > tol {
            r.restriction_violations += 1;
        } else if v > tol * scale {
            r.contradictions += 1;
        }
    }
    r.passed = r.contradictions == 0 && r.identity_residual < 1e-12;
    r
}

// ---------------------------------------------------------------------------
// Sweeps

/// `|analytic - fd| / max(|fd|, 1)`.
pub fn rel_err(analytic: f64, fd: f64) -> f64 {
    (analytic - fd).abs() / fd.abs().max(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdCheck {
    pub points: usize,
    pub worst: f64,
    pub worst_at: Option<CircleParam>,
    pub worst_x: f64,
    pub passed: bool,
}

impl FdCheck {
    fn new() -> Self {
        FdCheck { points: 0, worst: 0.0, worst_at: None, worst_x: 0.0, passed: false }
    }

    fn add(&mut self, err: f64, cp: CircleParam, x: f64) {
        self.points += 1;
        if err > self.worst || err.is_nan() {
            self.worst = err;
            self.worst_at = Some(cp);
            self.worst_x = x;
        }
    }

    fn finish(mut self, tol: f64) -> Self {
        self.passed = self.points > 0 && self.worst <= tol;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignCheck {
    pub samples: usize,
    pub violations: usize,
    /// Extreme value in the direction the claim forbids.
    pub worst: f64,
    pub passed: bool,
}

impl SignCheck {
    fn from_values(vals: &[f64], bad: impl Fn(f64) -> bool, worse: impl Fn(f64, f64) -> f64) -> Self {
        let violations = vals.iter().filter(|&&v| bad(v)).count();
        let worst = vals.iter().copied().reduce(&worse).unwrap_or(f64::NAN);
        SignCheck { samples: vals.len(), violations, worst, passed: !vals.is_empty() && violations == 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct H1PrimeSection {
    pub fd_vector: FdCheck,
    pub fd_corrected: FdCheck,
    pub fd_printed: FdCheck,
    /// `H₁' ≤ 1e-12` under `a sin ≥ b cos`.
    pub sign_weak: SignCheck,
    /// `H₁' < -1e-12` under strict hypotheses.
    pub sign_strict: SignCheck,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondSection {
    pub fd: FdCheck,
    /// Largest gap between the uncancelled and final forms.
    pub form_agreement: f64,
    pub negativity: SignCheck,
    pub inapplicable: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalSection {
    pub fd_lambda: FdCheck,
    pub fd_f: FdCheck,
    pub value_lambda: FdCheck,
    pub value_f: FdCheck,
    /// `λ' ≤ 0` on `[πr/2, πr)`.
    pub lambda_sign: SignCheck,
    /// `F' ≥ 0` on `(0, πr/2]`.
    pub f_sign: SignCheck,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppendixReport {
    pub density: Density,
    pub seed: u64,
    pub h1_prime: H1PrimeSection,
    pub h1_second: SecondSection,
    pub canonical: CanonicalSection,
    pub passed: bool,
}

pub const FD_TOL: f64 = 1e-6;
pub const FD_STEP: f64 = 1e-5;
pub const FD_STEP_SECOND: f64 = 1e-3;

/// Random circle with `a, b ≥ 0` and a parameter on the first quarter turn
/// satisfying `a sin(x/r) ≥ b cos(x/r)`.
pub fn sample_quarter_config(rng: &mut ChaCha8Rng) -> (CircleParam, f64) {
    loop {
        let a = rng.gen_range(0.0..3.0);
        let b = if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(0.0..2.0) };
        let r = rng.gen_range(0.1..3.0);
        let x = rng.gen_range(0.0..=FRAC_PI_2 * r);
        let (s, c) = (x / r).sin_cos();
        if a * s >= b * c {
            return (CircleParam { a, b, r }, x);
        }
    }
}

fn h1_prime_section(d: &Density, rng: &mut ChaCha8Rng, samples: usize) -> Result<H1PrimeSection, AppendixError> {
    let mut fd_vector = FdCheck::new();
    let mut fd_corrected = FdCheck::new();
    let mut fd_printed = FdCheck::new();
    for &a in &[0.0, 0.5, 1.0, 2.0] {
        for &b in &[0.0, 0.5, 1.0] {
            for &r in &[0.5, 1.0, 2.0] {
                let cp = CircleParam::new(a, b, r)?;
                for k in 0..5 {
                    let x = FRAC_PI_2 * r * k as f64 / 4.0;
                    if cp.point(x) == [0.0, 0.0] {
                        continue;
                    }
                    let fd = h1_prime_fd(&cp, x, d, FD_STEP)?;
                    fd_vector.add(rel_err(h1_prime_analytic(&cp, x, d, H1PrimeForm::Vector)?, fd), cp, x);
                    fd_corrected.add(rel_err(h1_prime_analytic(&cp, x, d, H1PrimeForm::Corrected)?, fd), cp, x);
                    fd_printed.add(rel_err(h1_prime_analytic(&cp, x, d, H1PrimeForm::Printed)?, fd), cp, x);
                }
            }
        }
    }
    let (mut weak, mut strict) = (vec![], vec![]);
    let rf = d.plateau_radius().value();
    for _ in 0..samples {
        let (cp, x) = sample_quarter_config(rng);
        let v = h1_prime_analytic(&cp, x, d, H1PrimeForm::Corrected)?;
        weak.push(v);
        let (s, c) = (x / cp.r).sin_cos();
        let p = cp.point(x);
        if cp.a * s > cp.b * c && p[0].hypot(p[1]) > rf {
            strict.push(v);
        }
    }
    let sign_weak = SignCheck::from_values(&weak, |v| v > 1e-12, f64::max);
    let mut sign_strict = SignCheck::from_values(&strict, |v| !(v < -1e-12), f64::max);
    if strict.is_empty() {
        // Nothing to claim when `g'` vanishes everywhere.
        sign_strict.passed = true;
    }
    let fd_vector = fd_vector.finish(FD_TOL);
    let fd_corrected = fd_corrected.finish(FD_TOL);
    let fd_printed = fd_printed.finish(FD_TOL);
    let passed = fd_vector.passed && fd_corrected.passed && sign_weak.passed && sign_strict.passed;
    Ok(H1PrimeSection { fd_vector, fd_corrected, fd_printed, sign_weak, sign_strict, passed })
}

fn second_section(d: &Density, rng: &mut ChaCha8Rng, samples: usize) -> Result<SecondSection, AppendixError> {
    let mut fd = FdCheck::new();
    let mut form_agreement: f64 = 0.0;
    let mut values = vec![];
    let mut inapplicable = 0;
    for _ in 0..samples {
        let cp = CircleParam::new(rng.gen_range(0.1..5.0), 0.0, rng.gen_range(0.1..5.0))?;
        let s = h1_second_at_zero(&cp, d)?;
        form_agreement = form_agreement.max((s.uncancelled - s.value).abs() / s.value.abs().max(1.0));
        fd.add(rel_err(s.value, h1_second_fd(&cp, d, FD_STEP_SECOND * cp.r.min(1.0))?), cp, 0.0);
        if s.hypothesis_met {
            values.push(s.value);
        } else {
            inapplicable += 1;
        }
    }
    let fd = fd.finish(FD_TOL);
    let mut negativity = SignCheck::from_values(&values, |v| !(v < 0.0), f64::max);
    if values.is_empty() {
        negativity.passed = true;
    }
    let passed = fd.passed && form_agreement < 1e-12 && negativity.passed;
    Ok(SecondSection { fd, form_agreement, negativity, inapplicable, passed })
}

fn canonical_section(rng: &mut ChaCha8Rng, samples: usize) -> Result<CanonicalSection, AppendixError> {
    let mut fd_lambda = FdCheck::new();
    let mut fd_f = FdCheck::new();
    let mut value_lambda = FdCheck::new();
    let mut value_f = FdCheck::new();
    for _ in 0..50 {
        let cp = CircleParam::new(rng.gen_range(-2.0..2.0), rng.gen_range(0.0..2.0), rng.gen_range(0.3..3.0))?;
        let x = rng.gen_range(0.1..PI * cp.r - 0.1);
        let cf = lambda_f_on_circle(&cp, x)?;
        let (l, f) = canonical_on_circle(&cp, x)?;
        let (dl, df) = lambda_f_fd(&cp, x, FD_STEP)?;
        value_lambda.add(rel_err(cf.lambda, l), cp, x);
        value_f.add(rel_err(cf.f, f), cp, x);
        fd_lambda.add(rel_err(cf.lambda_prime, dl), cp, x);
        fd_f.add(rel_err(cf.f_prime, df), cp, x);
    }
    let (mut lam, mut fp) = (vec![], vec![]);
    for _ in 0..samples {
        let cp = CircleParam::new(rng.gen_range(-2.0..2.0), rng.gen_range(0.0..2.0), rng.gen_range(0.1..3.0))?;
        let hi = rng.gen_range(FRAC_PI_2 * cp.r..PI * cp.r);
        if hi > 0.0 && hi < PI * cp.r {
            lam.push(lambda_f_on_circle(&cp, hi)?.lambda_prime);
        }
        let lo = FRAC_PI_2 * cp.r * (1.0 - rng.gen_range(0.0..1.0));
        if lo > 0.0 {
            fp.push(lambda_f_on_circle(&cp, lo)?.f_prime);
        }
    }
    let lambda_sign = SignCheck::from_values(&lam, |v| v > 0.0, f64::max);
    let f_sign = SignCheck::from_values(&fp, |v| v < 0.0, f64::min);
    let fd_lambda = fd_lambda.finish(FD_TOL);
    let fd_f = fd_f.finish(FD_TOL);
    let value_lambda = value_lambda.finish(1e-12);
    let value_f = value_f.finish(1e-12);
    let passed = fd_lambda.passed && fd_f.passed && value_lambda.passed && value_f.passed && lambda_sign.passed && f_sign.passed;
    Ok(CanonicalSection { fd_lambda, fd_f, value_lambda, value_f, lambda_sign, f_sign, passed })
}

/// Runs every closed-form check for `d`: fixed FD grids plus `samples`
/// randomized sign checks per claim, all from `seed`.
pub fn verify_appendix(d: &Density, seed: u64, samples: usize) -> Result<AppendixReport, AppendixError> {
    let rng = |stream: u64| {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        r.set_stream(stream);
        r
    };
    let (first, (second, third)) = rayon::join(
        || h1_prime_section(d, &mut rng(0), samples),
        || rayon::join(|| second_section(d, &mut rng(1), samples), || canonical_section(&mut rng(2), samples)),
    );
    let (h1_prime, h1_second, canonical) = (first?, second?, third?);
    let passed = h1_prime.passed && h1_second.passed && canonical.passed;
    Ok(AppendixReport { density: d.clone(), seed, h1_prime, h1_second, canonical, passed })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quarter_circle_example() {
        let cp = CircleParam::new(1.0, 1.0, 1.0).unwrap();
        let c = lambda_f_on_circle(&cp, FRAC_PI_2).unwrap();
        assert!((c.lambda - 0.5).abs() < 1e-15);
        assert!((c.f - 1.0).abs() < 1e-15);
        assert!(c.lambda_prime.abs() < 1e-15);
        assert!((c.f_prime - 1.0).abs() < 1e-15);
    }

    #[test]
    fn axis_centered_circle_is_its_own_canonical_circle() {
        let cp = CircleParam::new(0.7, 0.0, 1.3).unwrap();
        for x in [0.2, 1.0, 3.0] {
            let c = lambda_f_on_circle(&cp, x).unwrap();
            assert!((c.lambda - 1.0 / 1.3).abs() < 1e-15 && c.f == 0.7 && c.lambda_prime == 0.0 && c.f_prime == 0.0);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(CircleParam::new(0.0, -1.0, 1.0).is_err());
        assert!(CircleParam::new(0.0, 0.0, 0.0).is_err());
        let cp = CircleParam::new(1.0, 0.0, 1.0).unwrap();
        assert!(lambda_f_on_circle(&cp, 0.0).is_err());
        assert!(lambda_f_on_circle(&cp, PI).is_err());
        assert!(h1_second_at_zero(&CircleParam::new(1.0, 0.5, 1.0).unwrap(), &Density::quadratic(1.0)).is_err());
        let through_origin = CircleParam::new(-1.0, 0.0, 1.0).unwrap();
        assert!(matches!(h1_on_circle(&through_origin, 0.0, &Density::quadratic(1.0)), Err(AppendixError::Origin(_))));
    }

    #[test]
    fn second_derivative_example() {
        let s = h1_second_at_zero(&CircleParam::new(1.0, 0.0, 1.0).unwrap(), &Density::quadratic(1.0)).unwrap();
        assert!((s.g1_term + 1.0).abs() < 1e-15);
        assert!((s.g2_term + 1.0).abs() < 1e-15);
        assert!((s.value + 2.0).abs() < 1e-15);
        assert!(s.hypothesis_met);
        let flat = h1_second_at_zero(&CircleParam::new(2.0, 0.0, 1.0).unwrap(), &Density::constant(0.0)).unwrap();
        assert_eq!(flat.value, 0.0);
        assert!(!flat.hypothesis_met);
    }
}

//! Radial densities `f(x) = exp(g(|x|))` with `g` smooth, convex and even.
//!
//! Every kind carries analytic derivatives up to third order. Finite
//! differences are never used here; they belong to the tests.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DensityError {
    #[error("radius must be non-negative and finite, got {0}")]
    NegativeRadius(f64),
    #[error("derivative order {0} is not supported (max 3)")]
    Order(u8),
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("cannot parse density `{0}`: {1}")]
    Parse(String, String),
}

/// Shape of the log-density `g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum DensityKind {
    /// `g(r) = c0`.
    Constant { c0: f64 },
    /// `g(r) = a r^2`.
    Quadratic { a: f64 },
    /// `g(r) = a (cosh r - 1)`.
    Cosh { a: f64 },
    /// `g(r) = a max(0, r - radius)^3`.
    Plateau { radius: f64, a: f64 },
    /// `g(r) = sum_k coeffs[k] r^k`; only even powers may be nonzero.
    Custom { coeffs: Vec<f64> },
}

/// A validated radial density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DensityKind", into = "DensityKind")]
pub struct Density {
    kind: DensityKind,
}

impl TryFrom<DensityKind> for Density {
    type Error = DensityError;

    fn try_from(kind: DensityKind) -> Result<Self, Self::Error> {
        Density::new(kind)
    }
}

impl From<Density> for DensityKind {
    fn from(d: Density) -> Self {
        d.kind
    }
}

fn finite(name: &str, v: f64) -> Result<(), DensityError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(DensityError::Param(format!("{name} must be finite, got {v}")))
    }
}

fn nonneg(name: &str, v: f64) -> Result<(), DensityError> {
    finite(name, v)?;
    if v < 0.0 {
        return Err(DensityError::Param(format!("{name} must be >= 0, got {v}")));
    }
    Ok(())
}

impl Density {
    pub fn new(kind: DensityKind) -> Result<Self, DensityError> {
        match &kind {
            DensityKind::Constant { c0 } => finite("c0", *c0)?,
            DensityKind::Quadratic { a } | DensityKind::Cosh { a } => nonneg("a", *a)?,
            DensityKind::Plateau { radius, a } => {
                nonneg("radius", *radius)?;
                nonneg("a", *a)?;
            }
            DensityKind::Custom { coeffs } => {
                if coeffs.is_empty() {
                    return Err(DensityError::Param("custom polynomial needs coefficients".into()));
                }
                for (k, c) in coeffs.iter().enumerate() {
                    finite("coefficient", *c)?;
                    if k % 2 == 1 && *c != 0.0 {
                        return Err(DensityError::Param(format!("custom polynomial must be even; coefficient of r^{k} is {c}")));
                    }
                }
            }
        }
        Ok(Density { kind })
    }

    pub fn constant(c0: f64) -> Self {
        Self::new(DensityKind::Constant { c0 }).expect("finite constant")
    }

    pub fn quadratic(a: f64) -> Self {
        Self::new(DensityKind::Quadratic { a }).expect("a >= 0")
    }

    pub fn cosh(a: f64) -> Self {
        Self::new(DensityKind::Cosh { a }).expect("a >= 0")
    }

    pub fn plateau(radius: f64, a: f64) -> Self {
        Self::new(DensityKind::Plateau { radius, a }).expect("radius, a >= 0")
    }

    pub fn custom(coeffs: Vec<f64>) -> Result<Self, DensityError> {
        Self::new(DensityKind::Custom { coeffs })
    }

    pub fn kind(&self) -> &DensityKind {
        &self.kind
    }

    /// The builtin families used throughout the test suites.
    pub fn builtins() -> Vec<Density> {
        vec![Density::constant(0.0), Density::quadratic(1.0), Density::cosh(1.0), Density::plateau(2.0, 1.0)]
    }

    /// `g^(order)(r)`, checked.
    pub fn eval(&self, r: f64, order: u8) -> Result<f64, DensityError> {
        if !(r >= 0.0) || !r.is_finite() {
            return Err(DensityError::NegativeRadius(r));
        }
        if order > 3 {
            return Err(DensityError::Order(order));
        }
        Ok(self.deriv(r, order))
    }

    /// Unchecked evaluation for hot paths; `r` is clamped at zero.
    pub fn deriv(&self, r: f64, order: u8) -> f64 {
        let r = r.max(0.0);
        match &self.kind {
            DensityKind::Constant { c0 } => {
                if order == 0 {
                    *c0
                } else {
                    0.0
                }
            }
            DensityKind::Quadratic { a } => match order {
                0 => a * r * r,
                1 => 2.0 * a * r,
                2 => 2.0 * a,
                _ => 0.0,
            },
            DensityKind::Cosh { a } => match order {
                0 => a * (r.cosh() - 1.0),
                1 | 3 => a * r.sinh(),
                _ => a * r.cosh(),
            },
            DensityKind::Plateau { radius, a } => {
                let t = r - radius;
                if t <= 0.0 {
                    return 0.0;
                }
                match order {
                    0 => a * t * t * t,
                    1 => 3.0 * a * t * t,
                    2 => 6.0 * a * t,
                    _ => 6.0 * a,
                }
            }
            DensityKind::Custom { coeffs } => {
                // Horner on the differentiated coefficients.
                let k0 = order as usize;
                let mut acc = 0.0;
                for k in (k0..coeffs.len()).rev() {
                    let mut fall = 1.0;
                    for j in 0..k0 {
                        fall *= (k - j) as f64;
                    }
                    acc = acc * r + coeffs[k] * fall;
                }
                acc
            }
        }
    }

    pub fn g(&self, r: f64) -> f64 {
        self.deriv(r, 0)
    }

    pub fn dg(&self, r: f64) -> f64 {
        self.deriv(r, 1)
    }

    pub fn d2g(&self, r: f64) -> f64 {
        self.deriv(r, 2)
    }

    /// The weight `f = e^g` at radius `r`.
    pub fn weight(&self, r: f64) -> f64 {
        self.g(r).exp()
    }

    /// Largest radius on which `f` equals its central value.
    pub fn plateau_radius(&self) -> PlateauRadius {
        let v = match &self.kind {
            DensityKind::Constant { .. } => f64::INFINITY,
            DensityKind::Quadratic { a } | DensityKind::Cosh { a } => {
                if *a == 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            DensityKind::Plateau { radius, a } => {
                if *a == 0.0 {
                    f64::INFINITY
                } else {
                    *radius
                }
            }
            // A polynomial whose derivative vanishes on an interval is constant.
            DensityKind::Custom { coeffs } => {
                if coeffs.iter().skip(1).all(|c| *c == 0.0) {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
        };
        PlateauRadius(v)
    }

    /// Checks `g'' >= -tol` on `samples` uniform points of `[0, r_max]`.
    pub fn validate_convexity(&self, r_max: f64, samples: usize) -> Result<ConvexityReport, DensityError> {
        if samples < 2 {
            return Err(DensityError::Param(format!("need at least 2 samples, got {samples}")));
        }
        nonneg("r_max", r_max)?;
        let tol = 1e-12;
        let mut violations = Vec::new();
        for i in 0..samples {
            let r = r_max * i as f64 / (samples - 1) as f64;
            let g2 = self.d2g(r);
            if g2 < -tol {
                violations.push(ConvexityViolation { r, g2 });
            }
        }
        Ok(ConvexityReport { samples, r_max, passed: violations.is_empty(), violations })
    }
}

/// `R(f)`; `+inf` when the density is constant.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct PlateauRadius(pub f64);

impl PlateauRadius {
    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvexityViolation {
    pub r: f64,
    pub g2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvexityReport {
    pub samples: usize,
    pub r_max: f64,
    pub passed: bool,
    pub violations: Vec<ConvexityViolation>,
}

fn join(vals: &[f64]) -> String {
    vals.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(",")
}

impl fmt::Display for Density {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            DensityKind::Constant { c0 } => write!(f, "constant:{c0}"),
            DensityKind::Quadratic { a } => write!(f, "quadratic:{a}"),
            DensityKind::Cosh { a } => write!(f, "cosh:{a}"),
            DensityKind::Plateau { radius, a } => write!(f, "plateau:{radius},{a}"),
            DensityKind::Custom { coeffs } => write!(f, "custom:{}", join(coeffs)),
        }
    }
}

/// Parses `kind:params` shorthand such as `quadratic:1` or `plateau:2,1`,
/// or the JSON form `{"kind": ..., "params": {...}}`.
impl FromStr for Density {
    type Err = DensityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let err = |m: &str| DensityError::Parse(s.to_string(), m.to_string());
        if s.starts_with('{') {
            return serde_json::from_str(s).map_err(|e| err(&e.to_string()));
        }
        let (kind, rest) = match s.split_once(':') {
            Some((k, r)) => (k.trim(), r.trim()),
            None => (s, ""),
        };
        let nums: Vec<f64> = if rest.is_empty() {
            Vec::new()
        } else {
            rest.split(',').map(|t| t.trim().parse::<f64>().map_err(|e| err(&e.to_string()))).collect::<Result<_, _>>()?
        };
        let want = |k: usize| -> Result<(), DensityError> {
            if nums.len() == k {
                Ok(())
            } else {
                Err(err(&format!("expected {k} parameter(s), got {}", nums.len())))
            }
        };
        let kind = match kind {
            "constant" => {
                if nums.is_empty() {
                    DensityKind::Constant { c0: 0.0 }
                } else {
                    want(1)?;
                    DensityKind::Constant { c0: nums[0] }
                }
            }
            "quadratic" => {
                want(1)?;
                DensityKind::Quadratic { a: nums[0] }
            }
            "cosh" => {
                want(1)?;
                DensityKind::Cosh { a: nums[0] }
            }
            "plateau" => {
                want(2)?;
                DensityKind::Plateau { radius: nums[0], a: nums[1] }
            }
            "custom" => DensityKind::Custom { coeffs: nums },
            other => return Err(err(&format!("unknown kind `{other}`"))),
        };
        Density::new(kind)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_first_derivative() {
        assert_eq!(Density::quadratic(1.0).eval(1.0, 1).unwrap(), 2.0);
    }

    #[test]
    fn constant_is_flat() {
        assert_eq!(Density::constant(0.0).eval(3.7, 1).unwrap(), 0.0);
    }

    #[test]
    fn plateau_inactive_inside() {
        let d = Density::plateau(2.0, 1.0);
        for k in 0..=3 {
            assert_eq!(d.eval(1.5, k).unwrap(), 0.0);
        }
        assert_eq!(d.eval(3.0, 1).unwrap(), 3.0);
        assert_eq!(d.eval(3.0, 3).unwrap(), 6.0);
    }

    #[test]
    fn rejects_bad_input() {
        let d = Density::quadratic(1.0);
        assert_eq!(d.eval(-0.1, 0), Err(DensityError::NegativeRadius(-0.1)));
        assert_eq!(d.eval(1.0, 4), Err(DensityError::Order(4)));
        assert!(Density::custom(vec![0.0, 1.0]).is_err());
        assert!(Density::new(DensityKind::Quadratic { a: -1.0 }).is_err());
    }

    #[test]
    fn plateau_radii() {
        assert_eq!(Density::quadratic(1.0).plateau_radius().value(), 0.0);
        assert_eq!(Density::cosh(1.0).plateau_radius().value(), 0.0);
        assert_eq!(Density::plateau(2.0, 1.0).plateau_radius().value(), 2.0);
        assert!(Density::constant(0.3).plateau_radius().is_infinite());
        assert_eq!(Density::custom(vec![1.0, 0.0, 0.0, 0.0, 2.0]).unwrap().plateau_radius().value(), 0.0);
    }

    #[test]
    fn convexity_reports() {
        assert!(Density::quadratic(1.0).validate_convexity(10.0, 1000).unwrap().passed);
        assert!(Density::cosh(1.0).validate_convexity(5.0, 100).unwrap().passed);
        let concave = Density::custom(vec![0.0, 0.0, -1.0]).unwrap();
        let rep = concave.validate_convexity(1.0, 10).unwrap();
        assert!(!rep.passed);
        assert_eq!(rep.violations.len(), 10);
        assert!(concave.validate_convexity(1.0, 1).is_err());
    }

    #[test]
    fn custom_polynomial_derivatives() {
        // g = 1 + 2 r^2 + 3 r^4
        let d = Density::custom(vec![1.0, 0.0, 2.0, 0.0, 3.0]).unwrap();
        let r = 0.7f64;
        assert!((d.g(r) - (1.0 + 2.0 * r * r + 3.0 * r.powi(4))).abs() < 1e-14);
        assert!((d.dg(r) - (4.0 * r + 12.0 * r.powi(3))).abs() < 1e-14);
        assert!((d.d2g(r) - (4.0 + 36.0 * r * r)).abs() < 1e-14);
        assert!((d.deriv(r, 3) - 72.0 * r).abs() < 1e-13);
    }

    #[test]
    fn shorthand_round_trip() {
        for s in ["constant:0", "quadratic:1", "cosh:1", "plateau:2,1", "custom:0,0,1"] {
            let d: Density = s.parse().unwrap();
            assert_eq!(d.to_string(), s);
        }
        assert!("plateau:2".parse::<Density>().is_err());
        assert!("sinh:1".parse::<Density>().is_err());
    }

    #[test]
    fn json_form() {
        let d: Density = r#"{"kind": "plateau", "params": {"radius": 2, "a": 1}}"#.parse().unwrap();
        assert_eq!(d, Density::plateau(2.0, 1.0));
        let back = serde_json::to_string(&d).unwrap();
        assert_eq!(back, r#"{"kind":"plateau","params":{"radius":2.0,"a":1.0}}"#);
        let bad = r#"{"kind": "custom", "params": {"coeffs": [0, 1]}}"#.parse::<Density>();
        assert!(bad.is_err());
    }
}

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Subcommand, ValueEnum};
use logconvex::symmetrization::Shape;
use logconvex::Density;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const DEFAULT_SEED: u64 = 42;

/// `lo:hi:k`: `k` values from `lo` to `hi` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
    pub k: usize,
}

impl Range {
    pub fn linear(&self) -> Vec<f64> {
        if self.k == 1 {
            return vec![self.lo];
        }
        let last = (self.k - 1) as f64;
        (0..self.k)
            .map(|i| {
                let i = i as f64;
                (self.lo * (last - i) + self.hi * i) / last
            })
            .collect()
    }

    pub fn geometric(&self) -> Vec<f64> {
        if self.k == 1 {
            return vec![self.lo];
        }
        let (a, b) = (self.lo.ln(), self.hi.ln());
        let last = (self.k - 1) as f64;
        (0..self.k)
            .map(|i| match i {
                0 => self.lo,
                _ if i + 1 == self.k => self.hi,
                _ => (a + (b - a) * i as f64 / last).exp(),
            })
            .collect()
    }
}

impl FromStr for Range {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [lo, hi, k] = parts[..] else {
            return Err(format!("expected lo:hi:k, got {s:?}"));
        };
        let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
        let (lo, hi) = (num(lo)?, num(hi)?);
        let k: usize = k.trim().parse().map_err(|e| format!("{k:?}: {e}"))?;
        if !lo.is_finite() || !hi.is_finite() {
            return Err(format!("range ends must be finite in {s:?}"));
        }
        if k == 0 || (k == 1 && lo != hi) {
            return Err(format!("need k >= 2, or k = 1 with lo = hi, in {s:?}"));
        }
        Ok(Range { lo, hi, k })
    }
}

impl TryFrom<String> for Range {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<Range> for String {
    fn from(r: Range) -> String {
        r.to_string()
    }
}

impl fmt::Display for Range {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.lo, self.hi, self.k)
    }
}

/// Inline JSON or a path to a JSON file.
fn parse_shape(s: &str) -> Result<Shape, String> {
    let text = if s.trim_start().starts_with('{') { s.to_string() } else { std::fs::read_to_string(s).map_err(|e| format!("{s}: {e}"))? };
    serde_json::from_str(&text).map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CurveArgs {
    /// Density as `kind:params` or JSON.
    #[arg(long, default_value = "quadratic:1")]
    pub density: Density,
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    /// Start point `(R0, 0)` on the axis.
    #[arg(long = "R0", visible_alias = "r0")]
    pub r0: f64,
    /// Generalized mean curvature; defaults to the centered ball value.
    #[arg(long)]
    #[serde(default)]
    pub c: Option<f64>,
    /// Local error tolerance of the integrator.
    #[arg(long)]
    #[serde(default)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ScanArgs {
    #[arg(long, default_value = "quadratic:1")]
    pub density: Density,
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    /// Start radii, `lo:hi:k`.
    #[arg(long = "R0", visible_alias = "r0", default_value = "0.8:1.2:21")]
    pub r0: Range,
    /// Relative offsets of `c` from each row's ball value.
    #[arg(long, default_value = "-0.2:0.2:21", allow_hyphen_values = true, conflicts_with = "c")]
    pub offsets: Range,
    /// Absolute `c` grid, used instead of offsets.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(default)]
    pub c: Option<Range>,
    #[arg(long)]
    #[serde(default)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Linear,
    Geometric,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ProfileArgs {
    #[arg(long, default_value = "quadratic:1")]
    pub density: Density,
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    /// Weighted volumes, `lo:hi:k`.
    #[arg(long)]
    pub volumes: Range,
    #[arg(long, value_enum, default_value_t = Spacing::Linear)]
    pub spacing: Spacing,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct MeasuresArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub curve: CurveArgs,
    /// Measure the centered ball of radius R0 without shooting.
    #[arg(long)]
    #[serde(default)]
    pub ball: bool,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct AppendixArgs {
    #[arg(long, default_value = "quadratic:1")]
    pub density: Density,
    /// Randomized configurations per sign check.
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ComparisonArgs {
    #[arg(long, default_value = "quadratic:1")]
    pub density: Density,
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long = "R0", visible_alias = "r0", default_value_t = 1.0)]
    pub r0: f64,
    /// Positive relative offsets of `c` for the shots feeding Q/W pairs.
    #[arg(long, default_value = "0.05:0.2:4")]
    pub offsets: Range,
    /// Grid points per axis of the perturbation sweep.
    #[arg(long, default_value_t = 20)]
    pub steps: usize,
    /// Upper end of each perturbation axis.
    #[arg(long, default_value_t = 0.5)]
    pub max: f64,
    /// Samples of each Q/W graph.
    #[arg(long, default_value_t = 400)]
    pub graph_samples: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SymmetrizeArgs {
    /// Shape as inline JSON or a JSON file.
    #[arg(long, value_parser = parse_shape, required_unless_present = "corpus", conflicts_with = "corpus")]
    #[serde(default)]
    pub shape: Option<Shape>,
    /// Use the built-in 10-shape corpus.
    #[arg(long)]
    #[serde(default)]
    pub corpus: bool,
    #[arg(long, default_value = "quadratic:1")]
    pub density: Density,
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long, default_value_t = 3.0)]
    pub r_max: f64,
    /// Radial and angular cells.
    #[arg(long, default_value_t = 256)]
    pub resolution: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct AcceptArgs {
    #[arg(long)]
    pub criterion: u8,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Command {
    /// Integrate one generating curve and classify its closure.
    Shoot(CurveArgs),
    /// Closure outcomes over an (R0, c) grid.
    Scan(ScanArgs),
    /// Ball perimeter as a function of weighted volume.
    Profile(ProfileArgs),
    /// Weighted perimeter and volume of a closed shot or a centered ball.
    Measures(MeasuresArgs),
    /// Closed forms and sign conditions on circle arcs.
    VerifyAppendix(AppendixArgs),
    /// Perturbation sweep, arc constructions and Q/W pairs.
    VerifyComparisons(ComparisonArgs),
    /// Spherical symmetrization of a shape or the corpus.
    Symmetrize(SymmetrizeArgs),
    /// Upper and lower curve analysis of one shot.
    AnalyzeCurve(CurveArgs),
    /// Run one acceptance criterion.
    Accept(AcceptArgs),
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub command: Command,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Where artifacts go; not part of the hash.
    #[serde(default, skip_serializing)]
    pub out: Option<PathBuf>,
}

fn positive(name: &str, v: f64) -> Result<(), String> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(format!("{name} must be positive and finite, got {v}"))
    }
}

fn dimension(n: usize) -> Result<(), String> {
    if n >= 2 {
        Ok(())
    } else {
        Err(format!("n must be >= 2, got {n}"))
    }
}

impl CurveArgs {
    fn validate(&self) -> Result<(), String> {
        dimension(self.n)?;
        positive("R0", self.r0)?;
        if let Some(c) = self.c {
            if !c.is_finite() {
                return Err(format!("c must be finite, got {c}"));
            }
        }
        if let Some(t) = self.tol {
            positive("tol", t)?;
        }
        Ok(())
    }
}

impl RunSpec {
    pub fn validate(&self) -> Result<(), String> {
        match &self.command {
            Command::Shoot(a) | Command::AnalyzeCurve(a) => a.validate(),
            Command::Measures(a) => a.curve.validate(),
            Command::Scan(a) => {
                dimension(a.n)?;
                if a.r0.linear().iter().any(|&r| !(r > 0.0)) {
                    return Err(format!("start radii must be positive, got {}", a.r0));
                }
                if a.offsets.linear().iter().any(|&o| !(o > -1.0)) {
                    return Err(format!("offsets must exceed -1, got {}", a.offsets));
                }
                if let Some(t) = a.tol {
                    positive("tol", t)?;
                }
                Ok(())
            }
            Command::Profile(a) => {
                dimension(a.n)?;
                positive("smallest volume", a.volumes.lo.min(a.volumes.hi))
            }
            Command::VerifyAppendix(a) => {
                if a.samples == 0 {
                    return Err("samples must be positive".into());
                }
                Ok(())
            }
            Command::VerifyComparisons(a) => {
                dimension(a.n)?;
                positive("R0", a.r0)?;
                positive("max", a.max)?;
                if a.steps < 2 || a.graph_samples < 3 {
                    return Err("need steps >= 2 and graph-samples >= 3".into());
                }
                if a.offsets.lo.min(a.offsets.hi) <= 0.0 {
                    return Err(format!("offsets must be positive, got {}", a.offsets));
                }
                Ok(())
            }
            Command::Symmetrize(a) => {
                if !(2..=3).contains(&a.n) {
                    return Err(format!("symmetrization supports n = 2 or 3, got {}", a.n));
                }
                positive("r_max", a.r_max)?;
                if a.resolution < 4 {
                    return Err(format!("resolution must be >= 4, got {}", a.resolution));
                }
                if a.shape.is_some() == a.corpus {
                    return Err("give exactly one of --shape and --corpus".into());
                }
                Ok(())
            }
            Command::Accept(a) => {
                if !(1..=9).contains(&a.criterion) {
                    return Err(format!("criterion must be in 1..=9, got {}", a.criterion));
                }
                Ok(())
            }
        }
    }

    /// Sorted-key JSON of everything that determines the outputs.
    pub fn canonical(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("spec serializes")
    }

    pub fn provenance(&self) -> Provenance {
        let spec = self.canonical();
        let hash = Sha256::digest(spec.to_string().as_bytes());
        Provenance {
            tool: "lcd".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            spec_hash: hash.iter().map(|b| format!("{b:02x}")).collect(),
            spec,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub spec_hash: String,
    pub spec: serde_json::Value,
}

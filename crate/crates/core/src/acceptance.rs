//! Desk-scale acceptance checks. Each criterion returns a serializable report
//! with the measured quantities; `passed` applies the stated tolerances.

use std::f64::consts::PI;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::appendix::{verify_appendix, AppendixError, AppendixReport};
use crate::comparisons::{
    analyze_lower_curve, analyze_upper_curve, build_qw, curvature_comparison_verify, perturbation_sweep, ComparisonError,
    CurvatureComparisonReport, GraphFunction, PerturbationSweep, UpperBreak, Verdict,
};
use crate::density::Density;
use crate::geometry::tangent_restriction;
use crate::measures::{ball_measures, profile, trajectory_measures, MeasureError};
use crate::shooting::{
    ball_curvature, classify_closure, relative_grid, scan_pairs, shoot, EventKind, Outcome, ShootingConfig, ShootingError, Trajectory,
};
use crate::symmetrization::{check_shape, corpus, ShapeCheck, SymmetrizationError};

#[derive(Debug, Error)]
pub enum AcceptanceError {
    #[error("unknown criterion {0}")]
    Unknown(u8),
    #[error(transparent)]
    Shooting(#[from] ShootingError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Comparison(#[from] ComparisonError),
    #[error(transparent)]
    Appendix(#[from] AppendixError),
    #[error(transparent)]
    Symmetrization(#[from] SymmetrizationError),
}

pub const CLOSURE_Y_TOL: f64 = 1e-8;
pub const CLOSURE_ANGLE_TOL: f64 = 1e-6;
pub const MEASURE_REL_TOL: f64 = 1e-6;
pub const ISOCLINE_FACTOR: f64 = 10.0;
pub const RESTRICTION_TOL: f64 = 1e-9;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn isocline(t: &Trajectory) -> f64 {
    t.isocline_residual()
}

/// A shot that should close, with its closure data.
#[derive(Debug, Clone, Serialize)]
pub struct ClosureCase {
    pub density: Density,
    pub n: usize,
    pub r0: f64,
    pub c: f64,
    pub outcome: Outcome,
    pub y_residual: f64,
    pub angle_defect: f64,
    pub x_end: f64,
    pub perimeter_rel_error: Option<f64>,
    pub volume_rel_error: Option<f64>,
    pub isocline: f64,
    pub tol: f64,
}

impl ClosureCase {
    fn run(cfg: &ShootingConfig, exact: Option<(f64, f64)>) -> Result<Self, AcceptanceError> {
        let t = shoot(cfg)?;
        let r = classify_closure(&t);
        let errs = match (exact, r.outcome) {
            (Some((p, v)), Outcome::ClosedSmooth) => {
                let m = trajectory_measures(&t)?;
                (Some(rel(m.perimeter, p)), Some(rel(m.volume, v)))
            }
            _ => (None, None),
        };
        Ok(ClosureCase {
            density: cfg.density.clone(),
            n: cfg.n,
            r0: cfg.r0,
            c: cfg.c,
            outcome: r.outcome,
            y_residual: r.y_residual,
            angle_defect: r.angle_defect,
            x_end: r.end_state.x,
            perimeter_rel_error: errs.0,
            volume_rel_error: errs.1,
            isocline: isocline(&t),
            tol: cfg.tol,
        })
    }

    /// Closed within the closure tolerances, with measures matching.
    pub fn closes(&self) -> bool {
        let measures_ok = |e: Option<f64>| e.is_none_or(|e| e < MEASURE_REL_TOL);
        self.outcome == Outcome::ClosedSmooth
            && self.y_residual < CLOSURE_Y_TOL
            && self.angle_defect < CLOSURE_ANGLE_TOL
            && measures_ok(self.perimeter_rel_error)
            && measures_ok(self.volume_rel_error)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BallClosureReport {
    pub cases: Vec<ClosureCase>,
    pub seconds: f64,
    pub passed: bool,
}

pub fn ball_closure() -> Result<BallClosureReport, AcceptanceError> {
    let start = Instant::now();
    let mut configs = Vec::new();
    for d in [Density::constant(0.0), Density::quadratic(1.0), Density::cosh(1.0)] {
        for n in [2, 3, 4] {
            for r0 in [0.5, 1.0, 2.0] {
                configs.push(ShootingConfig::ball(n, d.clone(), r0));
            }
        }
    }
    let cases = configs
        .par_iter()
        .map(|cfg| {
            let exact = ball_measures(cfg.r0, cfg.n, &cfg.density)?;
            ClosureCase::run(cfg, Some((exact.perimeter, exact.volume)))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let passed = cases.iter().all(|c| c.closes() && c.perimeter_rel_error.is_some());
    Ok(BallClosureReport { cases, seconds: start.elapsed().as_secs_f64(), passed })
}

/// One cell of the uniqueness scan.
#[derive(Debug, Clone, Serialize)]
pub struct ScanRecord {
    pub r0: f64,
    pub c: f64,
    /// `c / ball(r0) - 1`.
    pub offset: f64,
    pub outcome: Outcome,
    pub y_residual: f64,
    pub angle_defect: f64,
    pub isocline: f64,
    /// Arclength of the first downward vertical tangent with `κ > 0`.
    pub first_tangent_down: Option<f64>,
    /// Arclength of the first sample with `γ'·N > RESTRICTION_TOL`.
    pub first_restriction_violation: Option<f64>,
    pub max_restriction: f64,
}

impl ScanRecord {
    pub fn closed(&self) -> bool {
        self.outcome == Outcome::ClosedSmooth && self.y_residual < CLOSURE_Y_TOL && self.angle_defect < CLOSURE_ANGLE_TOL
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanSummary {
    pub n: usize,
    pub density: Density,
    pub tol: f64,
    pub records: Vec<ScanRecord>,
    pub closed: usize,
    /// Closed cells whose `c` is not the ball value of their row.
    pub unexpected: usize,
    /// Ball cells that did not close.
    pub missed: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct UniquenessReport {
    pub scans: Vec<ScanSummary>,
    /// Relative distance from the ball value that counts as the ball cell.
    pub ball_tol: f64,
    pub seconds: f64,
    pub passed: bool,
}

pub const SCAN_SIZE: usize = 21;
pub const SCAN_SPREAD: f64 = 0.2;

/// Start radii `0.8 ..= 1.2` and relative offsets `-0.2 ..= 0.2`.
pub fn scan_axes() -> (Vec<f64>, Vec<f64>) {
    let step = 2.0 * SCAN_SPREAD / (SCAN_SIZE - 1) as f64;
    let r0: Vec<f64> = (0..SCAN_SIZE).map(|i| 1.0 - SCAN_SPREAD + step * i as f64).collect();
    let off: Vec<f64> = (0..SCAN_SIZE).map(|j| -SCAN_SPREAD + step * j as f64).collect();
    (r0, off)
}

fn scan_record(d: &Density, n: usize, t: &Trajectory) -> ScanRecord {
    let cfg = &t.config;
    let report = classify_closure(t);
    let restriction: Vec<(f64, f64)> =
        t.samples.iter().filter_map(|s| tangent_restriction(&s.state).ok().map(|v| (s.state.s, v))).collect();
    ScanRecord {
        r0: cfg.r0,
        c: cfg.c,
        offset: cfg.c / ball_curvature(d, n, cfg.r0) - 1.0,
        outcome: report.outcome,
        y_residual: report.y_residual,
        angle_defect: report.angle_defect,
        isocline: isocline(t),
        first_tangent_down: t.events_of(EventKind::TangentDown).find(|e| e.kappa > 0.0).map(|e| e.state.s),
        first_restriction_violation: restriction.iter().find(|(_, v)| *v > RESTRICTION_TOL).map(|(s, _)| *s),
        max_restriction: restriction.iter().map(|(_, v)| *v).fold(f64::NEG_INFINITY, f64::max),
    }
}

pub fn uniqueness_scan() -> Result<UniquenessReport, AcceptanceError> {
    let start = Instant::now();
    let d = Density::quadratic(1.0);
    let (r0s, offsets) = scan_axes();
    let ball_tol = 1e-12;
    let mut scans = Vec::new();
    for n in [2, 3] {
        let template = ShootingConfig::ball(n, d.clone(), 1.0);
        let pairs = relative_grid(&d, n, &r0s, &offsets);
        let records: Vec<ScanRecord> = scan_pairs(&template, &pairs, |_, t| scan_record(&d, n, &t))?.into_iter().map(|(_, r)| r).collect();
        let on_ball = |r: &ScanRecord| r.offset.abs() <= ball_tol;
        let closed = records.iter().filter(|r| r.closed()).count();
        let unexpected = records.iter().filter(|r| r.closed() && !on_ball(r)).count();
        let missed = records.iter().filter(|r| !r.closed() && on_ball(r)).count();
        scans.push(ScanSummary { n, density: d.clone(), tol: template.tol, records, closed, unexpected, missed });
    }
    let passed = scans.iter().all(|s| s.unexpected == 0 && s.missed == 0 && s.closed == SCAN_SIZE);
    Ok(UniquenessReport { scans, ball_tol, seconds: start.elapsed().as_secs_f64(), passed })
}

#[derive(Debug, Clone, Serialize)]
pub struct PlateauReport {
    /// Off-center circle inside the flat core.
    pub inside: ClosureCase,
    /// The same circle scaled until it leaves the core.
    pub protruding: ClosureCase,
    pub scale: f64,
    pub seconds: f64,
    pub passed: bool,
}

pub fn plateau_balls() -> Result<PlateauReport, AcceptanceError> {
    let start = Instant::now();
    let d = Density::plateau(2.0, 1.0);
    let n = 3;
    // Center 0.5, radius 1: weight 1 throughout, so the measures are Euclidean.
    let inside = ClosureCase::run(&ShootingConfig::new(n, d.clone(), 1.5, 2.0), Some((4.0 * PI, 4.0 * PI / 3.0)))?;
    let scale = 1.5;
    let protruding = ClosureCase::run(&ShootingConfig::new(n, d, 1.5 * scale, 2.0 / scale), None)?;
    let passed = inside.closes() && (inside.x_end + 0.5).abs() < CLOSURE_Y_TOL && protruding.outcome != Outcome::ClosedSmooth;
    Ok(PlateauReport { inside, protruding, scale, seconds: start.elapsed().as_secs_f64(), passed })
}

#[derive(Debug, Clone, Serialize)]
pub struct IsoclineReport {
    pub trajectories: usize,
    /// Largest `max |H_f - c| / tol` over all trajectories.
    pub worst_ratio: f64,
    pub factor: f64,
    pub passed: bool,
}

pub fn isocline_invariant(balls: &BallClosureReport, scan: &UniquenessReport, plateau: &PlateauReport) -> IsoclineReport {
    let mut ratios: Vec<f64> = balls.cases.iter().map(|c| c.isocline / c.tol).collect();
    for s in &scan.scans {
        ratios.extend(s.records.iter().map(|r| r.isocline / s.tol));
    }
    ratios.push(plateau.inside.isocline / plateau.inside.tol);
    ratios.push(plateau.protruding.isocline / plateau.protruding.tol);
    let worst_ratio = ratios.iter().copied().fold(0.0, f64::max);
    IsoclineReport {
        trajectories: ratios.len(),
        worst_ratio,
        factor: ISOCLINE_FACTOR,
        passed: ratios.iter().all(|r| r.is_finite()) && worst_ratio < ISOCLINE_FACTOR,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TangentLemmaReport {
    pub non_closing: usize,
    pub with_tangent_event: usize,
    pub without_tangent_event: usize,
    /// Cells without the event that break `γ'·N ≤ 0` before any downward
    /// vertical tangent, so the lemma's hypotheses fail on them.
    pub without_event_restriction_broken: usize,
    pub closed: usize,
    pub closed_max_restriction: f64,
    /// The criterion as stated: every non-closing cell has the event.
    pub literal_passed: bool,
    /// Restricted to cells on which the tangent restriction holds.
    pub restricted_passed: bool,
}

/// Tangent lemma checks over the uniqueness scan; `R(f) = 0` for the scan
/// density, so every start radius qualifies.
pub fn tangent_lemmas(scan: &UniquenessReport) -> TangentLemmaReport {
    let records: Vec<&ScanRecord> = scan.scans.iter().flat_map(|s| s.records.iter()).collect();
    let open: Vec<&&ScanRecord> = records.iter().filter(|r| !r.closed()).collect();
    let with = open.iter().filter(|r| r.first_tangent_down.is_some()).count();
    let broken = open.iter().filter(|r| r.first_tangent_down.is_none() && r.first_restriction_violation.is_some()).count();
    let closed: Vec<&&ScanRecord> = records.iter().filter(|r| r.closed()).collect();
    let closed_max = closed.iter().map(|r| r.max_restriction).fold(f64::NEG_INFINITY, f64::max);
    let closed_ok = closed_max <= RESTRICTION_TOL;
    TangentLemmaReport {
        non_closing: open.len(),
        with_tangent_event: with,
        without_tangent_event: open.len() - with,
        without_event_restriction_broken: broken,
        closed: closed.len(),
        closed_max_restriction: closed_max,
        literal_passed: with == open.len() && closed_ok,
        restricted_passed: with + broken == open.len() && closed_ok,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct QwCase {
    pub n: usize,
    pub r0: f64,
    pub c: f64,
    pub delta: f64,
    pub eta: f64,
    pub report: CurvatureComparisonReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct ArcCase {
    pub name: String,
    pub report: CurvatureComparisonReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub sweep: PerturbationSweep,
    pub qw: Vec<QwCase>,
    pub arcs: Vec<ArcCase>,
    pub seconds: f64,
    pub passed: bool,
}

pub const QW_CASES: usize = 10;
const QW_SAMPLES: usize = 400;

/// Lower arc of the circle of radius `r` centered at `(p, top)`.
fn arc(r: f64, p: f64, top: f64) -> impl Fn(f64) -> (f64, f64, f64) {
    move |x| {
        let u = x - p;
        let w = (r * r - u * u).sqrt();
        (top - w, u / w, r * r / (w * w * w))
    }
}

/// Three explicit pairs meeting the hypotheses of the curvature comparison.
pub fn arc_constructions() -> Result<Vec<(String, GraphFunction, GraphFunction)>, ComparisonError> {
    let m = 400;
    let g = GraphFunction::from_fn(0.0, 0.5, m, arc(1.0, 0.0, 1.2))?;
    // Radius 2 arc with the same height and angle π/6 at the right end.
    let top = 3f64.sqrt() + g.end_value;
    let f = GraphFunction::from_fn(0.0, 0.5, m, arc(2.0, -0.5, top))?;
    let (gb, slope) = (g.end_value, (PI / 6.0).tan());
    let line = GraphFunction::from_fn(0.0, 0.5, m, move |x| (gb + slope * (x - 0.5), slope, 0.0))?;
    Ok(vec![
        ("identical_arcs".into(), g.clone(), g.clone()),
        ("tangent_matched_arcs".into(), f, g.clone()),
        ("tangent_line_below_arc".into(), line, g),
    ])
}

/// Non-closing cells with a positive offset, spread evenly over the scan.
fn qw_candidates(scan: &UniquenessReport) -> Vec<(usize, f64, f64)> {
    let per = QW_CASES / scan.scans.len();
    let mut out = Vec::new();
    for s in &scan.scans {
        let pool: Vec<&ScanRecord> = s.records.iter().filter(|r| !r.closed() && r.offset > 0.0).collect();
        for k in 0..per.min(pool.len()) {
            let r = pool[k * pool.len() / per];
            out.push((s.n, r.r0, r.c));
        }
    }
    out
}

/// Shoots `(r0, c)`, extracts the upper and lower curves and checks the
/// curvature comparison on the resulting Q/W graphs.
pub fn qw_case(d: &Density, n: usize, r0: f64, c: f64, samples: usize) -> Result<QwCase, AcceptanceError> {
    let t = shoot(&ShootingConfig::new(n, d.clone(), r0, c))?;
    let up = analyze_upper_curve(&t, 1e-9)?;
    if up.break_reason != UpperBreak::HorizontalTangent {
        return Err(ComparisonError::Input(format!("upper curve of ({r0}, {c}) ends with {:?}", up.break_reason)).into());
    }
    let low = analyze_lower_curve(&t, up.delta, 1e-9)?;
    let pair = build_qw(&t, up.delta, low.eta, samples)?;
    let report = curvature_comparison_verify(&pair.q, &pair.w, 1e-9)?;
    Ok(QwCase { n, r0, c, delta: up.delta, eta: low.eta, report })
}

pub fn comparisons(scan: &UniquenessReport) -> Result<ComparisonReport, AcceptanceError> {
    let start = Instant::now();
    let sweep = perturbation_sweep(20, 0.5);
    let d = Density::quadratic(1.0);
    let qw = qw_candidates(scan).par_iter().map(|&(n, r0, c)| qw_case(&d, n, r0, c, QW_SAMPLES)).collect::<Result<Vec<_>, _>>()?;
    let arcs = arc_constructions()?
        .into_iter()
        .map(|(name, f, g)| Ok(ArcCase { name, report: curvature_comparison_verify(&f, &g, 1e-12)? }))
        .collect::<Result<Vec<_>, ComparisonError>>()?;
    let passed = sweep.passed
        && sweep.strict_cells + 1 == sweep.cells
        && qw.len() == QW_CASES
        && qw.iter().all(|q| q.report.verdict == Verdict::Pass)
        && arcs.iter().all(|a| a.report.verdict == Verdict::Pass);
    Ok(ComparisonReport { sweep, qw, arcs, seconds: start.elapsed().as_secs_f64(), passed })
}

#[derive(Debug, Clone, Serialize)]
pub struct AppendixAcceptance {
    pub reports: Vec<AppendixReport>,
    pub samples: usize,
    pub passed: bool,
}

pub const APPENDIX_SAMPLES: usize = 1000;

pub fn appendix_formulas(seed: u64) -> Result<AppendixAcceptance, AcceptanceError> {
    let reports = [Density::quadratic(1.0), Density::cosh(1.0)]
        .iter()
        .map(|d| verify_appendix(d, seed, APPENDIX_SAMPLES))
        .collect::<Result<Vec<_>, _>>()?;
    let passed = reports.iter().all(|r| r.passed);
    Ok(AppendixAcceptance { reports, samples: APPENDIX_SAMPLES, passed })
}

#[derive(Debug, Clone, Serialize)]
pub struct SymmetrizationReport {
    pub density: Density,
    pub n: usize,
    pub r_max: f64,
    pub checks: Vec<ShapeCheck>,
    pub max_volume_rel_error: f64,
    pub all_idempotent: bool,
    /// `max (Per(A*)/Per(A) - 1, 0)` over the corpus, per resolution.
    pub max_excess: Vec<(usize, f64)>,
    pub passed: bool,
}

pub const SYM_RESOLUTIONS: [usize; 2] = [256, 512];
pub const SYM_PERIMETER_TOL: f64 = 0.02;
pub const SYM_VOLUME_TOL: f64 = 1e-10;

pub fn symmetrization_corpus() -> Result<SymmetrizationReport, AcceptanceError> {
    let d = Density::quadratic(1.0);
    let (n, r_max) = (2, 3.0);
    let jobs: Vec<(usize, &'static str, _)> =
        SYM_RESOLUTIONS.iter().flat_map(|&res| corpus().into_iter().map(move |(name, shape)| (res, name, shape))).collect();
    let checks = jobs.par_iter().map(|(res, name, shape)| check_shape(name, shape, n, r_max, *res, &d)).collect::<Result<Vec<_>, _>>()?;
    let max_volume_rel_error = checks.iter().map(|c| c.volume_rel_error).fold(0.0, f64::max);
    let all_idempotent = checks.iter().all(|c| c.idempotent);
    let max_excess: Vec<(usize, f64)> = SYM_RESOLUTIONS
        .iter()
        .map(|&res| (res, checks.iter().filter(|c| c.resolution == res).map(ShapeCheck::excess).fold(0.0, f64::max)))
        .collect();
    let (coarse, fine) = (max_excess[0].1, max_excess[1].1);
    let passed = max_volume_rel_error <= SYM_VOLUME_TOL && all_idempotent && fine <= SYM_PERIMETER_TOL && fine <= coarse;
    Ok(SymmetrizationReport { density: d, n, r_max, checks, max_volume_rel_error, all_idempotent, max_excess, passed })
}

#[derive(Debug, Clone, Serialize)]
pub struct ProfileCase {
    pub density: Density,
    pub n: usize,
    pub min_forward_difference: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProfileReport {
    pub volumes: Vec<f64>,
    pub cases: Vec<ProfileCase>,
    pub passed: bool,
}

pub const PROFILE_POINTS: usize = 50;

/// `PROFILE_POINTS` volumes spaced geometrically over `[0.01, 100]`.
pub fn profile_volumes() -> Vec<f64> {
    (0..PROFILE_POINTS).map(|i| 10f64.powf(-2.0 + 4.0 * i as f64 / (PROFILE_POINTS - 1) as f64)).collect()
}

pub fn profile_monotonicity() -> Result<ProfileReport, AcceptanceError> {
    let volumes = profile_volumes();
    let mut cases = Vec::new();
    for d in Density::builtins() {
        for n in [2, 3, 4] {
            let p = profile(&d, n, &volumes)?;
            let min = p.windows(2).map(|w| w[1].perimeter - w[0].perimeter).fold(f64::INFINITY, f64::min);
            cases.push(ProfileCase { density: d.clone(), n, min_forward_difference: min });
        }
    }
    let passed = cases.iter().all(|c| c.min_forward_difference >= -1e-10);
    Ok(ProfileReport { volumes, cases, passed })
}

pub const CRITERIA: [(u8, &str); 9] = [
    (1, "ball closure"),
    (2, "uniqueness scan"),
    (3, "plateau balls"),
    (4, "isocline invariant"),
    (5, "tangent lemma suite"),
    (6, "comparison propositions"),
    (7, "appendix formulas"),
    (8, "symmetrization"),
    (9, "profile monotonicity"),
];

/// Runs one criterion (and whatever it depends on) and returns its report.
pub fn run_criterion(k: u8, seed: u64) -> Result<(bool, serde_json::Value), AcceptanceError> {
    Ok(match k {
        1 => {
            let r = ball_closure()?;
            (r.passed, json(&r))
        }
        2 => {
            let r = uniqueness_scan()?;
            (r.passed, json(&r))
        }
        3 => {
            let r = plateau_balls()?;
            (r.passed, json(&r))
        }
        4 => {
            let (b, s, p) = (ball_closure()?, uniqueness_scan()?, plateau_balls()?);
            let r = isocline_invariant(&b, &s, &p);
            (r.passed, json(&r))
        }
        5 => {
            let r = tangent_lemmas(&uniqueness_scan()?);
            (r.literal_passed, json(&r))
        }
        6 => {
            let r = comparisons(&uniqueness_scan()?)?;
            (r.passed, json(&r))
        }
        7 => {
            let r = appendix_formulas(seed)?;
            (r.passed, json(&r))
        }
        8 => {
            let r = symmetrization_corpus()?;
            (r.passed, json(&r))
        }
        9 => {
            let r = profile_monotonicity()?;
            (r.passed, json(&r))
        }
        _ => return Err(AcceptanceError::Unknown(k)),
    })
}

fn json<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).unwrap_or(serde_json::Value::Null)
}

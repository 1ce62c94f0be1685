use std::collections::BTreeMap;
use std::fmt::Display;

use logconvex::acceptance::{arc_constructions, qw_case, run_criterion, ArcCase, QwCase};
use logconvex::appendix::{admissibility_remark_check, verify_appendix, RemarkReport};
use logconvex::comparisons::{
    analyze_lower_curve, analyze_upper_curve, build_qw, curvature_comparison_verify, perturbation_sweep, CurvatureComparisonReport,
    LowerCurveReport, UpperBreak, UpperCurveReport, Verdict,
};
use logconvex::geometry::{canonical_circle, tangent_restriction};
use logconvex::measures::{ball_measures, profile, trajectory_measures, RevolutionMeasures};
use logconvex::shooting::{
    ball_curvature, classify_closure, relative_grid, scan_pairs, shoot, ClosureReport, Departure, Event, Outcome, ShootingConfig,
    ShootingError, Termination, Trajectory,
};
use logconvex::symmetrization::{check_shape, corpus, rasterize, symmetrize, write_grid_tagged, Shape, ShapeCheck};
use logconvex::Density;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::output::{num, opt, Sink};
use crate::spec::*;

/// Why a run stopped.
#[derive(Debug)]
pub enum Failure {
    /// Exit status 2.
    Spec(String),
    /// Exit status 3; `details` goes into the diagnostic.
    Numeric { message: String, details: Value },
}

fn numeric(e: impl Display) -> Failure {
    Failure::Numeric { message: e.to_string(), details: Value::Null }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Numeric { message: format!("{e:#}"), details: Value::Null }
    }
}

type Run = Result<String, Failure>;

fn label<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(Value::String(s)) => s,
        Ok(other) => other.to_string(),
        Err(_) => String::new(),
    }
}

fn config(a: &CurveArgs) -> ShootingConfig {
    let mut cfg = match a.c {
        Some(c) => ShootingConfig::new(a.n, a.density.clone(), a.r0, c),
        None => ShootingConfig::ball(a.n, a.density.clone(), a.r0),
    };
    if let Some(t) = a.tol {
        cfg.tol = t;
    }
    cfg
}

fn fire(cfg: &ShootingConfig) -> Result<Trajectory, Failure> {
    cfg.validate().map_err(|e| Failure::Spec(e.to_string()))?;
    shoot(cfg).map_err(|e| match e {
        ShootingError::Config(m) => Failure::Spec(m),
        other => numeric(other),
    })
}

pub fn execute(spec: &RunSpec, sink: &mut Sink) -> Run {
    match &spec.command {
        Command::Shoot(a) => shoot_cmd(a, sink),
        Command::Scan(a) => scan_cmd(a, sink),
        Command::Profile(a) => profile_cmd(a, sink),
        Command::Measures(a) => measures_cmd(a, sink),
        Command::VerifyAppendix(a) => appendix_cmd(a, spec.seed, sink),
        Command::VerifyComparisons(a) => comparisons_cmd(a, sink),
        Command::Symmetrize(a) => symmetrize_cmd(a, sink),
        Command::AnalyzeCurve(a) => analyze_cmd(a, sink),
        Command::Accept(a) => accept_cmd(a.criterion, spec.seed, sink),
    }
}

#[derive(Serialize)]
struct LandingSummary {
    x_end: f64,
    fit_s: f64,
    kink: f64,
    gap: f64,
}

#[derive(Serialize)]
struct ShotSummary<'a> {
    config: &'a ShootingConfig,
    ball_c: f64,
    departure: &'a Departure,
    termination: Termination,
    closure: &'a ClosureReport,
    landing: Option<LandingSummary>,
    events: &'a [Event],
    samples: usize,
    length: f64,
    isocline_residual: f64,
    /// `max γ'·N` over off-origin samples.
    max_tangent_restriction: f64,
    measures: Option<RevolutionMeasures>,
    measures_error: Option<String>,
}

fn shoot_cmd(a: &CurveArgs, sink: &mut Sink) -> Run {
    let cfg = config(a);
    let t = fire(&cfg)?;
    let closure = classify_closure(&t);
    let rows = t.samples.iter().map(|s| {
        let (st, b) = (s.state, s.bundle);
        let f = canonical_circle(&st, Some(b.kappa)).map(|c| c.center_x).unwrap_or(f64::NAN);
        [st.s, st.x, st.y, st.theta, b.kappa, b.lambda, f, b.h1, b.hf].into_iter().map(num).collect()
    });
    sink.csv("trajectory.csv", &["s", "x", "y", "theta", "kappa", "lambda", "F", "H1", "Hf"], rows)?;
    let (measures, measures_error) = if closure.outcome == Outcome::ClosedSmooth {
        match trajectory_measures(&t) {
            Ok(m) => (Some(m), None),
            Err(e) => (None, Some(e.to_string())),
        }
    } else {
        (None, None)
    };
    let max_tr = t.samples.iter().filter_map(|s| tangent_restriction(&s.state).ok()).fold(f64::NEG_INFINITY, f64::max);
    let summary = ShotSummary {
        config: &cfg,
        ball_c: ball_curvature(&cfg.density, cfg.n, cfg.r0),
        departure: &t.departure,
        termination: t.termination,
        closure: &closure,
        landing: t.landing.as_ref().map(|l| LandingSummary { x_end: l.x_end, fit_s: l.fit_s, kink: l.kink, gap: l.gap }),
        events: &t.events,
        samples: t.samples.len(),
        length: t.length(),
        isocline_residual: t.isocline_residual(),
        max_tangent_restriction: max_tr,
        measures,
        measures_error,
    };
    sink.json("closure.json", &summary)?;
    Ok(format!(
        "{} y_residual {:.3e} angle_defect {:.3e} end x {}",
        label(&closure.outcome),
        closure.y_residual,
        closure.angle_defect,
        closure.end_state.x
    ))
}

#[derive(Serialize)]
struct ScanSummary {
    density: Density,
    n: usize,
    cells: usize,
    outcomes: BTreeMap<String, usize>,
    /// `(R0, c)` of every smoothly closing cell.
    closed: Vec<(f64, f64)>,
    max_isocline_residual: f64,
}

fn scan_cmd(a: &ScanArgs, sink: &mut Sink) -> Run {
    let radii = a.r0.linear();
    let pairs: Vec<(f64, f64)> = match &a.c {
        Some(c) => radii.iter().flat_map(|&r| c.linear().into_iter().map(move |c| (r, c))).collect(),
        None => relative_grid(&a.density, a.n, &radii, &a.offsets.linear()),
    };
    let mut template = ShootingConfig::ball(a.n, a.density.clone(), radii[0]);
    if let Some(t) = a.tol {
        template.tol = t;
    }
    template.validate().map_err(|e| Failure::Spec(e.to_string()))?;
    let cells = scan_pairs(&template, &pairs, |_, t| t.isocline_residual()).map_err(|e| match e {
        ShootingError::Config(m) => Failure::Spec(m),
        other => numeric(other),
    })?;
    let rows = cells.iter().map(|(cell, iso)| {
        let ball = ball_curvature(&a.density, a.n, cell.r0);
        let r = &cell.report;
        let down = cell.first_tangent_down;
        vec![
            num(cell.r0),
            num(cell.c),
            num(cell.c / ball - 1.0),
            label(&r.outcome),
            num(r.y_residual),
            num(r.angle_defect),
            num(r.end_state.x),
            num(*iso),
            opt(down.map(|e| e.state.s)),
            opt(down.map(|e| e.kappa)),
        ]
    });
    let header =
        ["R0", "c", "offset", "outcome", "y_residual", "angle_defect", "end_x", "isocline", "tangent_down_s", "tangent_down_kappa"];
    sink.csv("scan.csv", &header, rows)?;
    let mut outcomes = BTreeMap::new();
    for (cell, _) in &cells {
        *outcomes.entry(label(&cell.report.outcome)).or_insert(0) += 1;
    }
    let closed: Vec<(f64, f64)> =
        cells.iter().filter(|(c, _)| c.report.outcome == Outcome::ClosedSmooth).map(|(c, _)| (c.r0, c.c)).collect();
    let summary = ScanSummary {
        density: a.density.clone(),
        n: a.n,
        cells: cells.len(),
        outcomes,
        max_isocline_residual: cells.iter().map(|(_, iso)| *iso).fold(0.0, f64::max),
        closed,
    };
    sink.json("scan.json", &summary)?;
    Ok(format!("{} cells, {} closed smoothly", summary.cells, summary.closed.len()))
}

fn profile_cmd(a: &ProfileArgs, sink: &mut Sink) -> Run {
    let volumes = match a.spacing {
        Spacing::Linear => a.volumes.linear(),
        Spacing::Geometric => a.volumes.geometric(),
    };
    let table = profile(&a.density, a.n, &volumes).map_err(numeric)?;
    let rows = table.iter().map(|p| vec![num(p.volume), num(p.radius), num(p.perimeter)]);
    sink.csv("profile.csv", &["V", "R", "J"], rows)?;
    let min_diff = table.windows(2).map(|w| w[1].perimeter - w[0].perimeter).fold(f64::INFINITY, f64::min);
    if min_diff < -1e-10 {
        return Err(Failure::Numeric { message: "profile decreases".into(), details: json!({ "min_forward_difference": min_diff }) });
    }
    Ok(format!("{} volumes, min forward difference {min_diff:.3e}", table.len()))
}

#[derive(Serialize)]
struct MeasuresOut {
    source: &'static str,
    measures: RevolutionMeasures,
    /// The centered ball of radius R0, for comparison.
    ball: RevolutionMeasures,
    closure: Option<ClosureReport>,
}

fn measures_cmd(a: &MeasuresArgs, sink: &mut Sink) -> Run {
    let c = &a.curve;
    let ball = ball_measures(c.r0, c.n, &c.density).map_err(numeric)?;
    let out = if a.ball {
        MeasuresOut { source: "ball", measures: ball, ball, closure: None }
    } else {
        let t = fire(&config(c))?;
        let closure = classify_closure(&t);
        if closure.outcome != Outcome::ClosedSmooth {
            return Err(Failure::Numeric {
                message: format!("the shot does not close ({})", label(&closure.outcome)),
                details: json!({ "closure": closure }),
            });
        }
        let m = trajectory_measures(&t).map_err(numeric)?;
        MeasuresOut { source: "trajectory", measures: m, ball, closure: Some(closure) }
    };
    sink.json("measures.json", &out)?;
    Ok(format!("perimeter {} volume {}", out.measures.perimeter, out.measures.volume))
}

fn appendix_cmd(a: &AppendixArgs, seed: u64, sink: &mut Sink) -> Run {
    let report = verify_appendix(&a.density, seed, a.samples).map_err(numeric)?;
    sink.json("appendix.json", &report)?;
    if !report.passed {
        return Err(Failure::Numeric { message: "appendix checks failed".into(), details: json!({ "report": "appendix.json" }) });
    }
    Ok("all appendix checks pass".into())
}

#[derive(Serialize)]
struct QwOutcome {
    r0: f64,
    c: f64,
    case: Option<QwCase>,
    error: Option<String>,
}

#[derive(Serialize)]
struct ComparisonsOut {
    sweep: logconvex::comparisons::PerturbationSweep,
    arcs: Vec<ArcCase>,
    qw: Vec<QwOutcome>,
    passed: bool,
}

fn comparisons_cmd(a: &ComparisonArgs, sink: &mut Sink) -> Run {
    let sweep = perturbation_sweep(a.steps, a.max);
    let arcs = arc_constructions()
        .map_err(numeric)?
        .into_iter()
        .map(|(name, f, g)| Ok(ArcCase { name, report: curvature_comparison_verify(&f, &g, 1e-12)? }))
        .collect::<Result<Vec<_>, logconvex::comparisons::ComparisonError>>()
        .map_err(numeric)?;
    let pairs = relative_grid(&a.density, a.n, &[a.r0], &a.offsets.linear());
    let qw: Vec<QwOutcome> = pairs
        .par_iter()
        .map(|&(r0, c)| match qw_case(&a.density, a.n, r0, c, a.graph_samples) {
            Ok(case) => QwOutcome { r0, c, case: Some(case), error: None },
            Err(e) => QwOutcome { r0, c, case: None, error: Some(e.to_string()) },
        })
        .collect();
    let qw_pass = qw.iter().filter(|q| q.case.as_ref().is_some_and(|c| c.report.verdict == Verdict::Pass)).count();
    let arcs_pass = arcs.iter().filter(|c| c.report.verdict == Verdict::Pass).count();
    let passed = sweep.passed && sweep.strict_cells + 1 == sweep.cells && qw_pass == qw.len() && arcs_pass == arcs.len();
    let line = format!(
        "{}/{} strict sweep cells, {qw_pass}/{} Q/W pairs, {arcs_pass}/{} arc pairs",
        sweep.strict_cells,
        sweep.cells,
        qw.len(),
        arcs.len()
    );
    sink.json("comparisons.json", &ComparisonsOut { sweep, arcs, qw, passed })?;
    if !passed {
        return Err(Failure::Numeric {
            message: format!("comparison checks failed: {line}"),
            details: json!({ "report": "comparisons.json" }),
        });
    }
    Ok(line)
}

#[derive(Serialize)]
struct SymmetrizeOut {
    density: Density,
    n: usize,
    r_max: f64,
    resolution: usize,
    checks: Vec<ShapeCheck>,
    max_volume_rel_error: f64,
    all_idempotent: bool,
    max_perimeter_excess: f64,
}

fn symmetrize_cmd(a: &SymmetrizeArgs, sink: &mut Sink) -> Run {
    let shapes: Vec<(String, Shape)> = match &a.shape {
        Some(s) => vec![("shape".into(), s.clone())],
        None => corpus().into_iter().map(|(n, s)| (n.to_string(), s)).collect(),
    };
    let res = a.resolution;
    let results = shapes
        .par_iter()
        .map(|(name, s)| {
            let gs = rasterize(s, a.n, a.r_max, res, res)?;
            let sym = symmetrize(&gs);
            Ok((check_shape(name, s, a.n, a.r_max, res, &a.density)?, gs, sym))
        })
        .collect::<Result<Vec<_>, logconvex::symmetrization::SymmetrizationError>>()
        .map_err(numeric)?;
    let prov = serde_json::to_value(sink.provenance()).map_err(numeric)?;
    let mut checks = Vec::new();
    for ((name, _), (check, gs, sym)) in shapes.iter().zip(results) {
        for (file, grid) in [(format!("{name}.bin"), &gs), (format!("{name}.sym.bin"), &sym)] {
            sink.raw(&file, |w| Ok(write_grid_tagged(grid, Some(&prov), w)?))?;
        }
        checks.push(check);
    }
    let out = SymmetrizeOut {
        density: a.density.clone(),
        n: a.n,
        r_max: a.r_max,
        resolution: res,
        max_volume_rel_error: checks.iter().map(|c| c.volume_rel_error).fold(0.0, f64::max),
        all_idempotent: checks.iter().all(|c| c.idempotent),
        max_perimeter_excess: checks.iter().map(|c| c.excess()).fold(0.0, f64::max),
        checks,
    };
    sink.json("symmetrize.json", &out)?;
    let line = format!(
        "{} shapes, volume error {:.1e}, idempotent {}, max perimeter excess {:.2e}",
        out.checks.len(),
        out.max_volume_rel_error,
        out.all_idempotent,
        out.max_perimeter_excess
    );
    if out.max_volume_rel_error > 1e-10 || !out.all_idempotent {
        return Err(Failure::Numeric { message: line, details: json!({ "report": "symmetrize.json" }) });
    }
    Ok(line)
}

#[derive(Serialize)]
struct AnalysisOut {
    closure: ClosureReport,
    upper: UpperCurveReport,
    lower: Option<LowerCurveReport>,
    qw_comparison: Option<CurvatureComparisonReport>,
    qw_error: Option<String>,
    remark: RemarkReport,
}

fn analyze_cmd(a: &CurveArgs, sink: &mut Sink) -> Run {
    const TOL: f64 = 1e-9;
    let t = fire(&config(a))?;
    let upper = analyze_upper_curve(&t, TOL).map_err(numeric)?;
    let lower = if upper.break_reason == UpperBreak::HorizontalTangent {
        Some(analyze_lower_curve(&t, upper.delta, TOL).map_err(numeric)?)
    } else {
        None
    };
    let (qw_comparison, qw_error) = match &lower {
        Some(l) => match build_qw(&t, upper.delta, l.eta, 400).and_then(|p| curvature_comparison_verify(&p.q, &p.w, TOL)) {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        },
        None => (None, None),
    };
    let out =
        AnalysisOut { closure: classify_closure(&t), remark: admissibility_remark_check(&t, TOL), upper, lower, qw_comparison, qw_error };
    sink.json("analysis.json", &out)?;
    Ok(format!(
        "upper curve ends at s = {} ({}), lower curve {}",
        out.upper.delta,
        label(&out.upper.break_reason),
        out.lower.as_ref().map_or("not reached".into(), |l| format!("ends at s = {} ({})", l.eta, label(&l.break_reason)))
    ))
}

/// Drops wall-clock fields so reruns produce identical files.
fn strip_timings(v: &mut Value) {
    match v {
        Value::Object(m) => {
            m.remove("seconds");
            m.values_mut().for_each(strip_timings);
        }
        Value::Array(a) => a.iter_mut().for_each(strip_timings),
        _ => {}
    }
}

fn accept_cmd(k: u8, seed: u64, sink: &mut Sink) -> Run {
    let (passed, mut report) = run_criterion(k, seed).map_err(numeric)?;
    strip_timings(&mut report);
    let file = format!("criterion_{k}.json");
    sink.json(&file, &json!({ "criterion": k, "passed": passed, "report": report }))?;
    if !passed {
        return Err(Failure::Numeric { message: format!("criterion {k} fails"), details: json!({ "report": file }) });
    }
    Ok(format!("criterion {k}: PASS"))
}

//! Spherical symmetrization on polar grids.
//!
//! A [`GridSet`] stores cell occupancies on a polar grid. In the plane the
//! angle is the signed polar angle in `[-π, π]`; for `n = 3` the grid lives in
//! the meridian half-plane and the angle is measured from the positive `e₁`
//! axis in `[0, π]`, so the stored set is a set of revolution about `e₁`.
//! Symmetrization replaces each shell by the cap about the positive `e₁` axis
//! holding the same angular measure.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::density::Density;

#[derive(Debug, Error)]
pub enum SymmetrizationError {
    #[error("dimension must be 2 or 3, got {0}")]
    Dimension(usize),
    #[error("invalid grid edges: {0}")]
    Edges(String),
    #[error("occupancy {value} at cell {index} outside [0, 1]")]
    Occupancy { index: usize, value: f64 },
    #[error("occupancy length {got}, expected {expected}")]
    Shape { got: usize, expected: usize },
    #[error("radial index {0} out of range")]
    Index(usize),
    #[error("grid file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSet {
    pub n: usize,
    pub radial_edges: Vec<f64>,
    pub angular_edges: Vec<f64>,
    /// Row-major, one row per radial cell.
    pub occupancy: Vec<f64>,
}

fn uniform_edges(lo: f64, hi: f64, cells: usize) -> Vec<f64> {
    (0..=cells).map(|k| if k == cells { hi } else { lo + (hi - lo) * k as f64 / cells as f64 }).collect()
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite()) && v.windows(2).all(|w| w[0] < w[1])
}

impl GridSet {
    /// Empty set on uniform edges over the ball of radius `r_max`.
    pub fn uniform(n: usize, r_max: f64, radial: usize, angular: usize) -> Result<Self, SymmetrizationError> {
        if !(r_max > 0.0) || radial == 0 || angular == 0 {
            return Err(SymmetrizationError::Edges(format!("need r_max > 0 and nonzero cell counts, got {r_max}, {radial}, {angular}")));
        }
        let (lo, hi) = match n {
            2 => (-PI, PI),
            3 => (0.0, PI),
            _ => return Err(SymmetrizationError::Dimension(n)),
        };
        Self::from_parts(n, uniform_edges(0.0, r_max, radial), uniform_edges(lo, hi, angular), vec![0.0; radial * angular])
    }

    pub fn from_parts(n: usize, radial_edges: Vec<f64>, angular_edges: Vec<f64>, occupancy: Vec<f64>) -> Result<Self, SymmetrizationError> {
        if n != 2 && n != 3 {
            return Err(SymmetrizationError::Dimension(n));
        }
        if radial_edges.len() < 2 || !strictly_increasing(&radial_edges) || radial_edges[0] < 0.0 {
            return Err(SymmetrizationError::Edges("radial edges must be nonnegative and strictly increasing".into()));
        }
        if angular_edges.len() < 2 || !strictly_increasing(&angular_edges) {
            return Err(SymmetrizationError::Edges("angular edges must be strictly increasing".into()));
        }
        let (first, last) = (angular_edges[0], *angular_edges.last().expect("nonempty"));
        let span_ok = match n {
            2 => first == -PI && last == PI,
            _ => first == 0.0 && last == PI,
        };
        if !span_ok {
            return Err(SymmetrizationError::Edges(format!("angular edges span [{first}, {last}]")));
        }
        if n == 2 {
            let m = angular_edges.len() - 1;
            if (0..=m).any(|k| (angular_edges[k] + angular_edges[m - k]).abs() > 1e-12) {
                return Err(SymmetrizationError::Edges("planar angular edges must be symmetric about 0".into()));
            }
        }
        let expected = (radial_edges.len() - 1) * (angular_edges.len() - 1);
        if occupancy.len() != expected {
            return Err(SymmetrizationError::Shape { got: occupancy.len(), expected });
        }
        if let Some((index, &value)) = occupancy.iter().enumerate().find(|(_, v)| !(**v >= 0.0 && **v <= 1.0)) {
            return Err(SymmetrizationError::Occupancy { index, value });
        }
        Ok(GridSet { n, radial_edges, angular_edges, occupancy })
    }

    pub fn radial_cells(&self) -> usize {
        self.radial_edges.len() - 1
    }

    pub fn angular_cells(&self) -> usize {
        self.angular_edges.len() - 1
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let m = self.angular_cells();
        &self.occupancy[i * m..(i + 1) * m]
    }

    pub fn r_mid(&self, i: usize) -> f64 {
        0.5 * (self.radial_edges[i] + self.radial_edges[i + 1])
    }

    pub fn angle_mid(&self, j: usize) -> f64 {
        0.5 * (self.angular_edges[j] + self.angular_edges[j + 1])
    }

    /// Measure of angular cell `j` on the unit sphere.
    pub fn angular_measure(&self, j: usize) -> f64 {
        let (a, b) = (self.angular_edges[j], self.angular_edges[j + 1]);
        match self.n {
            2 => b - a,
            _ => TAU * (a.cos() - b.cos()),
        }
    }

    /// `∫ r^{n-1} dr` over radial cell `i`.
    pub fn radial_factor(&self, i: usize) -> f64 {
        let (a, b) = (self.radial_edges[i], self.radial_edges[i + 1]);
        let k = self.n as i32;
        (b.powi(k) - a.powi(k)) / k as f64
    }

    /// Cells sharing a cap level, ordered outward from the positive axis.
    pub fn fill_groups(&self) -> Vec<Vec<usize>> {
        let m = self.angular_cells();
        match self.n {
            2 => {
                let mut g = Vec::new();
                if m % 2 == 1 {
                    g.push(vec![m / 2]);
                }
                for k in 0..m / 2 {
                    let hi = m.div_ceil(2) + k;
                    g.push(vec![m - 1 - hi, hi]);
                }
                g
            }
            _ => (0..m).map(|j| vec![j]).collect(),
        }
    }

    fn row_mass(&self, row: &[f64]) -> f64 {
        row.iter().enumerate().map(|(j, o)| o * self.angular_measure(j)).sum()
    }

    /// Unweighted angular mass of each shell.
    pub fn shell_masses(&self) -> Vec<f64> {
        (0..self.radial_cells()).map(|i| self.row_mass(self.row(i))).collect()
    }

    pub fn is_cap_row(&self, row: &[f64]) -> bool {
        // 0 = full groups, 1 = after the partial group
        let mut stage = 0;
        for group in self.fill_groups() {
            let v = row[group[0]];
            if group.iter().any(|&j| row[j] != v) {
                return false;
            }
            match stage {
                0 if v == 1.0 => {}
                0 => stage = if v == 0.0 { 2 } else { 1 },
                _ if v == 0.0 => stage = 2,
                _ => return false,
            }
        }
        true
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.radial_cells()).all(|i| self.is_cap_row(self.row(i)))
    }
}

/// Weighted `(n-1)`-measure of the set on the sphere through the midpoint of
/// shell `i`, with the density sampled at that radius.
pub fn shell_measure(gs: &GridSet, i: usize, d: &Density) -> Result<f64, SymmetrizationError> {
    if i >= gs.radial_cells() {
        return Err(SymmetrizationError::Index(i));
    }
    let r = gs.r_mid(i);
    Ok(gs.row_mass(gs.row(i)) * r.powi(gs.n as i32 - 1) * d.weight(r))
}

/// Weighted volume with the density sampled at shell midpoints.
pub fn weighted_volume(gs: &GridSet, d: &Density) -> f64 {
    (0..gs.radial_cells()).map(|i| gs.row_mass(gs.row(i)) * gs.radial_factor(i) * d.weight(gs.r_mid(i))).sum()
}

fn cap_row(gs: &GridSet, groups: &[Vec<usize>], row: &[f64]) -> Vec<f64> {
    if gs.is_cap_row(row) {
        return row.to_vec();
    }
    let mut rem = gs.row_mass(row);
    let mut out = vec![0.0; row.len()];
    for group in groups {
        if rem <= 0.0 {
            break;
        }
        let w: f64 = group.iter().map(|&j| gs.angular_measure(j)).sum();
        let v = if rem >= w { 1.0 } else { rem / w };
        for &j in group {
            out[j] = v;
        }
        rem -= w;
    }
    out
}

/// Cap-stack with the same shell masses. Shells that are already caps are
/// copied unchanged, so the map is idempotent.
pub fn symmetrize(gs: &GridSet) -> GridSet {
    let groups = gs.fill_groups();
    let occupancy = (0..gs.radial_cells()).into_par_iter().flat_map_iter(|i| cap_row(gs, &groups, gs.row(i))).collect();
    GridSet { occupancy, ..gs.clone() }
}

// ---------------------------------------------------------------------------
// Shapes

/// Planar shapes; for `n = 3` the coordinates are `(x, |y|)` in the meridian
/// half-plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Disc {
        cx: f64,
        cy: f64,
        r: f64,
    },
    /// Annular sector about `(cx, cy)` between radii `r_in`, `r_out` and
    /// polar angles `a0..a1` measured about that center.
    AnnulusSector {
        cx: f64,
        cy: f64,
        r_in: f64,
        r_out: f64,
        a0: f64,
        a1: f64,
    },
    Union {
        parts: Vec<Shape>,
    },
}

impl Shape {
    pub fn disc(cx: f64, cy: f64, r: f64) -> Self {
        Shape::Disc { cx, cy, r }
    }

    pub fn annulus(cx: f64, cy: f64, r_in: f64, r_out: f64) -> Self {
        Shape::AnnulusSector { cx, cy, r_in, r_out, a0: -PI, a1: PI }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        match self {
            Shape::Disc { cx, cy, r } => (x - cx).hypot(y - cy) <= *r,
            Shape::AnnulusSector { cx, cy, r_in, r_out, a0, a1 } => {
                let rho = (x - cx).hypot(y - cy);
                if rho < *r_in || rho > *r_out {
                    return false;
                }
                let a = (y - cy).atan2(x - cx);
                (0..3).any(|k| {
                    let t = a + TAU * (k as f64 - 1.0);
                    t >= *a0 && t <= *a1
                })
            }
            Shape::Union { parts } => parts.iter().any(|p| p.contains(x, y)),
        }
    }
}

/// Volume-weighted fraction of a polar cell inside `shape`, from a `k × k`
/// midpoint subsample.
fn coverage(shape: &Shape, n: usize, (r0, r1): (f64, f64), (t0, t1): (f64, f64), k: usize) -> f64 {
    let (mut inside, mut total) = (0.0, 0.0);
    for a in 0..k {
        let r = r0 + (r1 - r0) * (a as f64 + 0.5) / k as f64;
        for b in 0..k {
            let t = t0 + (t1 - t0) * (b as f64 + 0.5) / k as f64;
            let w = if n == 2 { r } else { r * r * t.sin() };
            total += w;
            if shape.contains(r * t.cos(), r * t.sin()) {
                inside += w;
            }
        }
    }
    if inside == total {
        1.0
    } else {
        inside / total
    }
}

/// Screening subsample per cell.
pub const COARSE_SAMPLES: usize = 4;
/// Subsample for cells the screen finds cut by the boundary.
pub const FINE_SAMPLES: usize = 32;

/// Occupancies by subsampling each cell, refining the cells cut by the
/// boundary. Coarse quantization of boundary fractions leaves a sawtooth in
/// the recovered boundary whose relative length excess does not shrink under
/// refinement.
pub fn rasterize(shape: &Shape, n: usize, r_max: f64, radial: usize, angular: usize) -> Result<GridSet, SymmetrizationError> {
    let mut gs = GridSet::uniform(n, r_max, radial, angular)?;
    let rows: Vec<Vec<f64>> = (0..radial)
        .into_par_iter()
        .map(|i| {
            let rs = (gs.radial_edges[i], gs.radial_edges[i + 1]);
            (0..angular)
                .map(|j| {
                    let ts = (gs.angular_edges[j], gs.angular_edges[j + 1]);
                    match coverage(shape, n, rs, ts, COARSE_SAMPLES) {
                        v if v == 0.0 || v == 1.0 => v,
                        _ => coverage(shape, n, rs, ts, FINE_SAMPLES),
                    }
                })
                .collect()
        })
        .collect();
    gs.occupancy = rows.concat();
    Ok(gs)
}

/// Ten planar test shapes inside the ball of radius 3.
pub fn corpus() -> Vec<(&'static str, Shape)> {
    vec![
        ("off_axis_disc", Shape::disc(1.0, 0.5, 0.8)),
        ("negative_axis_disc", Shape::disc(-1.0, 0.0, 0.7)),
        ("lower_disc", Shape::disc(0.3, -1.2, 0.6)),
        ("off_center_annulus", Shape::annulus(0.5, 0.0, 0.4, 1.0)),
        ("sector", Shape::AnnulusSector { cx: 0.0, cy: 0.0, r_in: 0.5, r_out: 1.5, a0: 0.5, a1: 2.5 }),
        ("two_discs", Shape::Union { parts: vec![Shape::disc(-1.0, 0.5, 0.5), Shape::disc(1.0, -0.5, 0.6)] }),
        (
            "three_discs",
            Shape::Union { parts: vec![Shape::disc(0.0, 1.2, 0.5), Shape::disc(-1.1, -0.6, 0.5), Shape::disc(1.1, -0.6, 0.5)] },
        ),
        ("centered_disc", Shape::disc(0.0, 0.0, 1.0)),
        ("disc_through_origin", Shape::disc(0.8, 0.0, 0.8)),
        ("disc_around_origin", Shape::disc(0.4, 0.3, 1.0)),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeCheck {
    pub name: String,
    pub resolution: usize,
    pub volume: f64,
    pub volume_rel_error: f64,
    pub idempotent: bool,
    pub perimeter: PerimeterEstimate,
    pub perimeter_symmetrized: PerimeterEstimate,
    /// `Per(A*) / Per(A)`.
    pub ratio: f64,
}

impl ShapeCheck {
    /// `max(ratio - 1, 0)`.
    pub fn excess(&self) -> f64 {
        (self.ratio - 1.0).max(0.0)
    }
}

/// Rasterizes on a `resolution × resolution` grid, symmetrizes and compares.
pub fn check_shape(
    name: &str,
    shape: &Shape,
    n: usize,
    r_max: f64,
    resolution: usize,
    d: &Density,
) -> Result<ShapeCheck, SymmetrizationError> {
    let gs = rasterize(shape, n, r_max, resolution, resolution)?;
    let sym = symmetrize(&gs);
    let (v0, v1) = (weighted_volume(&gs, d), weighted_volume(&sym, d));
    let perimeter = grid_perimeter(&gs, d);
    let perimeter_symmetrized = grid_perimeter(&sym, d);
    Ok(ShapeCheck {
        name: name.into(),
        resolution,
        volume: v0,
        volume_rel_error: (v1 - v0).abs() / v0.abs(),
        idempotent: symmetrize(&sym) == sym,
        ratio: perimeter_symmetrized.value / perimeter.value,
        perimeter,
        perimeter_symmetrized,
    })
}

// ---------------------------------------------------------------------------
// Perimeter

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerimeterEstimate {
    pub method: PerimeterMethod,
    pub value: f64,
    pub segments: usize,
    pub components: usize,
    /// Components spanning fewer than [`MIN_FEATURE_CELLS`] shell widths.
    pub unresolved_components: usize,
    /// Occupied cells with no neighbor at or above `1/2`; mass the contour
    /// cannot see.
    pub sub_threshold_cells: usize,
}

impl PerimeterEstimate {
    pub fn resolved(&self) -> bool {
        self.unresolved_components == 0 && self.sub_threshold_cells == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerimeterMethod {
    Contour,
    CapProfile,
}

pub const MIN_FEATURE_CELLS: f64 = 4.0;

#[derive(Debug, Clone, Copy)]
struct Extent {
    lo: [f64; 2],
    hi: [f64; 2],
}

impl Extent {
    fn new() -> Self {
        Extent { lo: [f64::INFINITY; 2], hi: [f64::NEG_INFINITY; 2] }
    }

    fn add(&mut self, p: [f64; 2]) {
        for (k, v) in p.into_iter().enumerate() {
            self.lo[k] = self.lo[k].min(v);
            self.hi[k] = self.hi[k].max(v);
        }
    }

    fn diameter(&self) -> f64 {
        (self.hi[0] - self.lo[0]).hypot(self.hi[1] - self.lo[1])
    }
}

fn unresolved(gs: &GridSet, extents: &[Extent]) -> usize {
    let cell = gs.radial_edges.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    extents.iter().filter(|e| e.diameter() < MIN_FEATURE_CELLS * cell).count()
}

fn sub_threshold_cells(gs: &GridSet) -> usize {
    let (ri, m) = (gs.radial_cells() as isize, gs.angular_cells() as isize);
    let periodic = gs.n == 2;
    let at = |i: isize, j: isize| -> f64 {
        if i < 0 || i >= ri {
            return 0.0;
        }
        let j = if periodic { j.rem_euclid(m) } else { j.clamp(0, m - 1) };
        gs.occupancy[(i * m + j) as usize]
    };
    (0..ri)
        .into_par_iter()
        .map(|i| (0..m).filter(|&j| at(i, j) > 0.0 && (-1..=1).all(|di| (-1..=1).all(|dj| at(i + di, j + dj) < 0.5))).count())
        .sum()
}

fn polar(r: f64, q: f64) -> [f64; 2] {
    let a = (1.0 - q).clamp(-1.0, 1.0).acos();
    [r * a.cos(), r * a.sin()]
}

/// Node values for marching squares: row 0 sits at the origin, rows
/// `1..=I` at shell midpoints and row `I + 1` on the outer edge (empty).
struct Nodes {
    r: Vec<f64>,
    angle: Vec<f64>,
    v: Vec<f64>,
    cols: usize,
}

impl Nodes {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.v[i * self.cols + j]
    }
}

/// Monotone relabeling of occupancy with zero at `1/2`, chosen so that linear
/// interpolation between cell centers places an interface crossing a single
/// cell at its volume-fraction position.
fn level(f: f64) -> f64 {
    if f >= 0.5 {
        (f - 0.5) / (1.5 - f)
    } else {
        (f - 0.5) / (f + 0.5)
    }
}

fn nodes(gs: &GridSet) -> Nodes {
    let (ri, m) = (gs.radial_cells(), gs.angular_cells());
    let mut r = vec![0.0];
    r.extend((0..ri).map(|i| gs.r_mid(i)));
    r.push(*gs.radial_edges.last().expect("nonempty"));
    let center = gs.row_mass(gs.row(0)) / gs.row_mass(&vec![1.0; m]);
    let mut rows: Vec<Vec<f64>> = vec![vec![center; m]];
    rows.extend((0..ri).map(|i| gs.row(i).to_vec()));
    rows.push(vec![0.0; m]);
    let mids: Vec<f64> = (0..m).map(|j| gs.angle_mid(j)).collect();
    let (angle, rows) = if gs.n == 2 {
        // Periodic: repeat the first column one turn later.
        let mut a = mids.clone();
        a.push(mids[0] + TAU);
        let rows = rows.into_iter().map(|mut row| {
            row.push(row[0]);
            row
        });
        (a, rows.collect::<Vec<_>>())
    } else {
        // Mirror across both ends of the axis.
        let mut a = vec![-mids[0]];
        a.extend(&mids);
        a.push(TAU - mids[m - 1]);
        let rows = rows.into_iter().map(|row| {
            let mut out = vec![row[0]];
            out.extend(&row);
            out.push(row[m - 1]);
            out
        });
        (a, rows.collect::<Vec<_>>())
    };
    let cols = angle.len();
    let v = rows.concat().into_iter().map(level).collect();
    Nodes { r, angle, v, cols }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum EdgeId {
    /// Between nodes `(i, j)` and `(i + 1, j)`.
    Radial(usize, usize),
    /// Between nodes `(i, j)` and `(i, j + 1)`.
    Angular(usize, usize),
}

fn find(parent: &mut [usize], mut k: usize) -> usize {
    while parent[k] != k {
        parent[k] = parent[parent[k]];
        k = parent[k];
    }
    k
}

/// Weighted perimeter: cap stacks through their generating curve, anything
/// else through the occupancy contour.
pub fn grid_perimeter(gs: &GridSet, d: &Density) -> PerimeterEstimate {
    cap_profile_perimeter(gs, d).unwrap_or_else(|| contour_perimeter(gs, d))
}

/// `1 - cos α` for the cap half-angle `α` of a cap row. Near either axis
/// crossing of a smooth boundary this is linear in `r`.
fn cap_level(gs: &GridSet, row: &[f64]) -> f64 {
    let m = gs.row_mass(row);
    match gs.n {
        2 => 1.0 - (0.5 * m).clamp(0.0, PI).cos(),
        _ => (m / TAU).clamp(0.0, 2.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Fill {
    Empty,
    Partial,
    Full,
}

#[derive(Debug, Clone, Copy)]
struct ProfileNode {
    r: f64,
    q: f64,
    fill: Fill,
}

/// Radius where the profile reaches the axis between `edge` and the partial
/// node `a`, extrapolating linearly in `q` through `a` and `b`.
fn tip_radius(edge: f64, a: ProfileNode, b: Option<ProfileNode>, target: f64) -> f64 {
    let r = match b {
        Some(b) if b.fill == Fill::Partial && b.q != a.q => a.r + (target - a.q) * (a.r - b.r) / (a.q - b.q),
        _ => edge,
    };
    r.clamp(edge.min(a.r), edge.max(a.r))
}

/// Perimeter of a cap stack from its generating curve `r ↦ (r, α(r))`.
/// Shell midpoints carry `q = 1 - cos α`, interpolated linearly in `r`; axis
/// crossings are located by extrapolation and full/empty transitions are arcs
/// on the shared shell edge. Returns `None` unless every shell is a cap.
pub fn cap_profile_perimeter(gs: &GridSet, d: &Density) -> Option<PerimeterEstimate> {
    if !gs.is_symmetric() {
        return None;
    }
    let fill = |row: &[f64]| {
        if row.iter().all(|&v| v == 0.0) {
            Fill::Empty
        } else if row.iter().all(|&v| v == 1.0) {
            Fill::Full
        } else {
            Fill::Partial
        }
    };
    let ri = gs.radial_cells();
    // Empty sentinels sit on the inner and outer edges.
    let mut nodes = vec![ProfileNode { r: gs.radial_edges[0], q: 0.0, fill: Fill::Empty }];
    nodes.extend((0..ri).map(|i| {
        let row = gs.row(i);
        ProfileNode { r: gs.r_mid(i), q: cap_level(gs, row), fill: fill(row) }
    }));
    nodes.push(ProfileNode { r: gs.radial_edges[ri], q: 0.0, fill: Fill::Empty });
    // Edge between nodes k and k + 1.
    let edge = |k: usize| gs.radial_edges[k.min(ri)];

    let mut pieces: Vec<[(f64, f64); 2]> = Vec::new();
    let mut runs: Vec<Extent> = Vec::new();
    let mut run: Option<Extent> = None;
    for k in 0..nodes.len() - 1 {
        let (a, b) = (nodes[k], nodes[k + 1]);
        let piece = match (a.fill, b.fill) {
            (Fill::Empty, Fill::Empty) | (Fill::Full, Fill::Full) => None,
            (Fill::Partial, Fill::Partial) => Some([(a.r, a.q), (b.r, b.q)]),
            (Fill::Partial, end) => {
                let target = if end == Fill::Full { 2.0 } else { 0.0 };
                let prev = k.checked_sub(1).map(|p| nodes[p]);
                Some([(a.r, a.q), (tip_radius(edge(k), a, prev, target), target)])
            }
            (start, Fill::Partial) => {
                let target = if start == Fill::Full { 2.0 } else { 0.0 };
                Some([(tip_radius(edge(k), b, nodes.get(k + 2).copied(), target), target), (b.r, b.q)])
            }
            (start, _) => {
                let target = if start == Fill::Full { 2.0 } else { 0.0 };
                (edge(k) > 0.0).then_some([(edge(k), target), (edge(k), 2.0 - target)])
            }
        };
        match piece {
            Some(p) => {
                let e = run.get_or_insert_with(Extent::new);
                e.add(polar(p[0].0, p[0].1));
                e.add(polar(p[1].0, p[1].1));
                pieces.push(p);
            }
            None => runs.extend(run.take()),
        }
    }
    runs.extend(run);

    let sigma = if gs.n == 2 { 2.0 } else { TAU };
    let value: f64 = pieces
        .iter()
        .map(|&[(r0, q0), (r1, q1)]| {
            let at = |t: f64| polar(r0 + t * (r1 - r0), q0 + t * (q1 - q0));
            let (p0, p1) = (at(0.0), at(1.0));
            let sweep = (p0[1].atan2(p0[0]) - p1[1].atan2(p1[0])).abs();
            let steps = (sweep / 0.002).ceil().max(8.0) as usize;
            let mut p = p0;
            let mut sum = 0.0;
            for k in 1..=steps {
                let q = at(k as f64 / steps as f64);
                let mid = [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])];
                let lever = if gs.n == 2 { 1.0 } else { mid[1] };
                sum += lever * d.weight(mid[0].hypot(mid[1])) * (q[0] - p[0]).hypot(q[1] - p[1]);
                p = q;
            }
            sigma * sum
        })
        .sum();
    Some(PerimeterEstimate {
        method: PerimeterMethod::CapProfile,
        value,
        segments: pieces.len(),
        components: runs.len(),
        unresolved_components: unresolved(gs, &runs),
        sub_threshold_cells: 0,
    })
}

/// Weighted perimeter of the `1/2` level set of the occupancy, by marching
/// squares in polar index space with straight segments in the plane. For
/// `n = 3` the meridian contour is revolved about the axis.
pub fn contour_perimeter(gs: &GridSet, d: &Density) -> PerimeterEstimate {
    let nd = nodes(gs);
    let cols = if gs.n == 2 { gs.angular_cells() } else { nd.cols - 1 };
    let wrap = |j: usize| if gs.n == 2 && j == gs.angular_cells() { 0 } else { j };
    let point = |e: EdgeId| -> [f64; 2] {
        let (i0, j0, i1, j1) = match e {
            EdgeId::Radial(i, j) => (i, j, i + 1, j),
            EdgeId::Angular(i, j) => (i, j, i, j + 1),
        };
        let (a, b) = (nd.at(i0, j0), nd.at(i1, j1));
        let t = (a / (a - b)).clamp(0.0, 1.0);
        let r = nd.r[i0] + t * (nd.r[i1] - nd.r[i0]);
        let th = nd.angle[j0] + t * (nd.angle[j1] - nd.angle[j0]);
        [r * th.cos(), r * th.sin()]
    };
    let key = |e: EdgeId| match e {
        EdgeId::Radial(i, j) => EdgeId::Radial(i, wrap(j)),
        EdgeId::Angular(i, j) => EdgeId::Angular(i, j),
    };
    let rows = nd.r.len() - 1;
    let segs: Vec<(EdgeId, EdgeId)> = (0..rows)
        .into_par_iter()
        .flat_map_iter(|i| {
            let nd = &nd;
            (0..cols).flat_map(move |j| {
                let c = [nd.at(i, j), nd.at(i + 1, j), nd.at(i + 1, j + 1), nd.at(i, j + 1)];
                let inside = c.map(|v| v >= 0.0);
                // Edges in cyclic order: bottom, right, top, left.
                let edges = [EdgeId::Radial(i, j), EdgeId::Angular(i + 1, j), EdgeId::Radial(i, j + 1), EdgeId::Angular(i, j)];
                let crossing: Vec<usize> = (0..4).filter(|&k| inside[k] != inside[(k + 1) % 4]).collect();
                let mut out = Vec::new();
                match crossing.len() {
                    2 => out.push((edges[crossing[0]], edges[crossing[1]])),
                    4 => {
                        let center_in = c.iter().sum::<f64>() >= 0.0;
                        // Separate the corners whose state differs from the center.
                        if inside[0] == center_in {
                            out.push((edges[1], edges[2]));
                            out.push((edges[3], edges[0]));
                        } else {
                            out.push((edges[0], edges[1]));
                            out.push((edges[2], edges[3]));
                        }
                    }
                    _ => {}
                }
                out
            })
        })
        .collect();

    let sigma = if gs.n == 2 { 1.0 } else { TAU };
    let mut value = 0.0;
    let mut ids: HashMap<EdgeId, usize> = HashMap::new();
    let mut parent: Vec<usize> = Vec::new();
    let mut seg_ends = Vec::with_capacity(segs.len());
    for &(e0, e1) in &segs {
        let (mut p, mut q) = (point(e0), point(e1));
        if gs.n == 3 {
            // Keep the part in the upper half-plane.
            if p[1] < 0.0 && q[1] < 0.0 {
                continue;
            }
            if p[1] < 0.0 || q[1] < 0.0 {
                let t = p[1] / (p[1] - q[1]);
                let z = [p[0] + t * (q[0] - p[0]), 0.0];
                if p[1] < 0.0 {
                    p = z;
                } else {
                    q = z;
                }
            }
        }
        let mid = [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])];
        let len = (q[0] - p[0]).hypot(q[1] - p[1]);
        let lever = if gs.n == 2 { 1.0 } else { mid[1] };
        value += sigma * lever * d.weight(mid[0].hypot(mid[1])) * len;
        let mut id = |e: EdgeId| {
            let k = key(e);
            *ids.entry(k).or_insert_with(|| {
                parent.push(parent.len());
                parent.len() - 1
            })
        };
        let (a, b) = (id(e0), id(e1));
        seg_ends.push((a, b, p, q));
    }
    for &(a, b, _, _) in &seg_ends {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra] = rb;
        }
    }
    let mut extents: HashMap<usize, Extent> = HashMap::new();
    for &(a, _, p, q) in &seg_ends {
        let e = extents.entry(find(&mut parent, a)).or_insert_with(Extent::new);
        e.add(p);
        e.add(q);
    }
    let extents: Vec<Extent> = extents.into_values().collect();
    PerimeterEstimate {
        method: PerimeterMethod::Contour,
        value,
        segments: seg_ends.len(),
        components: extents.len(),
        unresolved_components: unresolved(gs, &extents),
        sub_threshold_cells: sub_threshold_cells(gs),
    }
}

// ---------------------------------------------------------------------------
// Serialization

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    format: String,
    n: usize,
    radial_edges: Vec<f64>,
    angular_edges: Vec<f64>,
    rows: usize,
    cols: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<serde_json::Value>,
}

const FORMAT: &str = "gridset-f64le-v1";

/// One JSON header line followed by the row-major occupancies as
/// little-endian `f64`.
pub fn write_grid(gs: &GridSet, w: impl Write) -> Result<(), SymmetrizationError> {
    write_grid_tagged(gs, None, w)
}

/// [`write_grid`] with an extra `provenance` object in the header.
pub fn write_grid_tagged(gs: &GridSet, provenance: Option<&serde_json::Value>, mut w: impl Write) -> Result<(), SymmetrizationError> {
    let header = Header {
        format: FORMAT.into(),
        n: gs.n,
        radial_edges: gs.radial_edges.clone(),
        angular_edges: gs.angular_edges.clone(),
        rows: gs.radial_cells(),
        cols: gs.angular_cells(),
        provenance: provenance.cloned(),
    };
    serde_json::to_writer(&mut w, &header).map_err(|e| SymmetrizationError::Format(e.to_string()))?;
    w.write_all(b"\n")?;
    for v in &gs.occupancy {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_grid(mut r: impl BufRead) -> Result<GridSet, SymmetrizationError> {
    let mut line = String::new();
    r.read_line(&mut line)?;
    let h: Header = serde_json::from_str(line.trim_end()).map_err(|e| SymmetrizationError::Format(e.to_string()))?;
    if h.format != FORMAT {
        return Err(SymmetrizationError::Format(format!("unknown format {:?}", h.format)));
    }
    if h.rows + 1 != h.radial_edges.len() || h.cols + 1 != h.angular_edges.len() {
        return Err(SymmetrizationError::Format("header cell counts disagree with edges".into()));
    }
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    if buf.len() != 8 * h.rows * h.cols {
        return Err(SymmetrizationError::Format(format!("payload has {} bytes, expected {}", buf.len(), 8 * h.rows * h.cols)));
    }
    let occupancy = buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    GridSet::from_parts(h.n, h.radial_edges, h.angular_edges, occupancy)
}

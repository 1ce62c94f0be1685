use std::f64::consts::{PI, TAU};

use logconvex::measures::ball_measures;
use logconvex::quadrature::adaptive;
use logconvex::symmetrization::*;
use logconvex::Density;
use proptest::prelude::*;

/// Weighted length of the circle of radius `r` about `(cx, cy)`.
fn circle_perimeter(cx: f64, cy: f64, r: f64, d: &Density) -> f64 {
    adaptive(0.0, TAU, 1e-13, |t| r * d.weight((cx + r * t.cos()).hypot(cy + r * t.sin()))).unwrap()
}

#[test]
fn shell_measure_examples() {
    let d = Density::constant(0.0);
    // Two shells with the first midpoint at r = 1.
    let mut gs = GridSet::from_parts(2, vec![0.5, 1.5, 2.5], (0..=8).map(|k| -PI + TAU * k as f64 / 8.0).collect(), vec![0.0; 16]).unwrap();
    gs.occupancy[..8].fill(1.0);
    assert!((shell_measure(&gs, 0, &d).unwrap() - TAU).abs() < 1e-14);
    assert_eq!(shell_measure(&gs, 1, &d).unwrap(), 0.0);
    let full = shell_measure(&gs, 0, &d).unwrap();
    gs.occupancy[..8].fill(0.5);
    assert!((shell_measure(&gs, 0, &d).unwrap() - 0.5 * full).abs() < 1e-14);
    gs.occupancy[..8].copy_from_slice(&[0.0, 0.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0]);
    assert!((shell_measure(&gs, 0, &d).unwrap() - 0.5 * full).abs() < 1e-14);
    assert!(shell_measure(&gs, 2, &d).is_err());

    let q = Density::quadratic(1.0);
    let ball = GridSet::from_parts(3, vec![0.5, 1.5], (0..=4).map(|k| PI * k as f64 / 4.0).collect(), vec![1.0; 4]).unwrap();
    assert!((shell_measure(&ball, 0, &q).unwrap() - 4.0 * PI * 1f64.exp()).abs() < 1e-12);
}

#[test]
fn centered_disc_is_a_fixed_point() {
    // Radius 1 falls on a shell edge, so every shell is full or empty.
    for n in [2, 3] {
        let gs = rasterize(&Shape::disc(0.0, 0.0, 1.0), n, 2.0, 512, 512).unwrap();
        assert!(gs.occupancy.iter().all(|&v| v == 0.0 || v == 1.0));
        assert!(gs.is_symmetric());
        let s = symmetrize(&gs);
        assert_eq!(s, gs);
        for d in [Density::constant(0.0), Density::quadratic(1.0)] {
            assert_eq!(grid_perimeter(&s, &d), grid_perimeter(&gs, &d));
        }
    }
    let gs = rasterize(&Shape::disc(0.0, 0.0, 1.0), 2, 2.0, 512, 512).unwrap();
    let p = grid_perimeter(&gs, &Density::constant(0.0));
    assert!((p.value / TAU - 1.0).abs() < 0.01, "{p:?}");
    assert!(p.resolved() && p.components == 1);
    let p = grid_perimeter(&gs, &Density::quadratic(1.0)).value;
    assert!((p / (TAU * 1f64.exp()) - 1.0).abs() < 0.01);
    let b = rasterize(&Shape::disc(0.0, 0.0, 1.0), 3, 2.0, 512, 512).unwrap();
    let p = grid_perimeter(&b, &Density::constant(0.0)).value;
    assert!((p / (4.0 * PI) - 1.0).abs() < 0.01);
}

#[test]
fn both_estimators_match_exact_circle_perimeters() {
    let d = Density::quadratic(1.0);
    for (cx, cy, r) in [(1.0, 0.5, 0.8), (-1.0, 0.0, 0.7), (0.4, 0.3, 1.0), (1.2, 0.0, 0.5)] {
        let exact = circle_perimeter(cx, cy, r, &d);
        let gs = rasterize(&Shape::disc(cx, cy, r), 2, 3.0, 512, 512).unwrap();
        let contour = contour_perimeter(&gs, &d).value;
        assert!((contour / exact - 1.0).abs() < 0.003, "contour {cx},{cy}: {contour} vs {exact}");
        // The symmetrized disc is the same disc rotated onto the axis.
        let s = symmetrize(&gs);
        let cap = cap_profile_perimeter(&s, &d).unwrap().value;
        assert!((cap / exact - 1.0).abs() < 0.003, "cap {cx},{cy}: {cap} vs {exact}");
    }
    assert!(cap_profile_perimeter(&rasterize(&Shape::disc(1.0, 0.5, 0.8), 2, 3.0, 64, 64).unwrap(), &d).is_none());
}

#[test]
fn volume_and_shell_masses_are_preserved() {
    let d = Density::quadratic(1.0);
    for n in [2, 3] {
        for (name, shape) in corpus() {
            let gs = rasterize(&shape, n, 3.0, 128, 128).unwrap();
            let s = symmetrize(&gs);
            let (v0, v1) = (weighted_volume(&gs, &d), weighted_volume(&s, &d));
            assert!((v1 - v0).abs() <= 1e-10 * v0.abs(), "{name} n={n}: {v0} vs {v1}");
            for i in 0..gs.radial_cells() {
                let (a, b) = (shell_measure(&gs, i, &d).unwrap(), shell_measure(&s, i, &d).unwrap());
                assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300), "{name} shell {i}");
            }
            assert!(s.is_symmetric());
            assert_eq!(symmetrize(&s), s, "{name} n={n} not idempotent");
        }
    }
}

#[test]
fn rasterized_volumes_match_closed_forms() {
    let c = Density::constant(0.0);
    let gs = rasterize(&Shape::disc(0.7, -0.4, 0.9), 2, 3.0, 512, 512).unwrap();
    assert!((weighted_volume(&gs, &c) / (PI * 0.81) - 1.0).abs() < 1e-3);
    let q = Density::quadratic(1.0);
    let ball = rasterize(&Shape::disc(0.0, 0.0, 1.3), 3, 2.0, 512, 256).unwrap();
    let exact = ball_measures(1.3, 3, &q).unwrap();
    assert!((weighted_volume(&ball, &q) / exact.volume - 1.0).abs() < 1e-3);
    assert!((grid_perimeter(&ball, &q).value / exact.perimeter - 1.0).abs() < 5e-3);
}

#[test]
fn symmetrization_lowers_perimeter_of_split_sets() {
    let d = Density::quadratic(1.0);
    let shape = Shape::Union { parts: vec![Shape::disc(-1.0, 0.5, 0.5), Shape::disc(1.0, -0.5, 0.6)] };
    let gs = rasterize(&shape, 2, 3.0, 256, 256).unwrap();
    let (p, ps) = (grid_perimeter(&gs, &d), grid_perimeter(&symmetrize(&gs), &d));
    assert_eq!(p.method, PerimeterMethod::Contour);
    assert_eq!(ps.method, PerimeterMethod::CapProfile);
    assert_eq!(p.components, 2);
    assert_eq!(ps.components, 1);
    assert!(ps.value < 0.9 * p.value);
}

#[test]
fn cap_rows_fill_outward_from_the_axis() {
    let gs = rasterize(&Shape::annulus(0.5, 0.2, 0.4, 1.0), 2, 3.0, 64, 64).unwrap();
    let s = symmetrize(&gs);
    for i in 0..s.radial_cells() {
        let row = s.row(i);
        let levels: Vec<f64> = s.fill_groups().iter().map(|g| row[g[0]]).collect();
        assert!(levels.windows(2).all(|w| w[0] >= w[1]), "row {i}");
        assert!(levels.iter().filter(|&&v| v > 0.0 && v < 1.0).count() <= 1);
    }
}

#[test]
fn grid_files_round_trip() {
    let gs = rasterize(&Shape::disc(0.5, 0.5, 0.7), 3, 2.0, 16, 12).unwrap();
    let mut buf = Vec::new();
    write_grid(&gs, &mut buf).unwrap();
    let back = read_grid(&buf[..]).unwrap();
    assert_eq!(back, gs);
    let mut again = Vec::new();
    write_grid(&back, &mut again).unwrap();
    assert_eq!(again, buf);

    assert!(matches!(read_grid(&buf[..buf.len() - 3]), Err(SymmetrizationError::Format(_))));
    assert!(read_grid(&b"{\"format\":\"other\"}\n"[..]).is_err());
    let mut bad = buf.clone();
    let last = bad.len() - 8;
    bad[last..].copy_from_slice(&2.0f64.to_le_bytes());
    assert!(matches!(read_grid(&bad[..]), Err(SymmetrizationError::Occupancy { .. })));
}

#[test]
fn shapes_contain_expected_points() {
    let sector = Shape::AnnulusSector { cx: 0.0, cy: 0.0, r_in: 0.5, r_out: 1.5, a0: 0.5, a1: 2.5 };
    assert!(sector.contains(0.0, 1.0));
    assert!(!sector.contains(1.0, 0.0));
    assert!(!sector.contains(0.0, 0.2));
    let wrap = Shape::AnnulusSector { cx: 0.0, cy: 0.0, r_in: 0.0, r_out: 1.0, a0: 3.0, a1: 3.5 };
    assert!(wrap.contains(-0.5, -0.05));
    assert!(Shape::annulus(0.0, 0.0, 0.5, 1.0).contains(0.0, -0.7));
    assert!(!Shape::annulus(0.0, 0.0, 0.5, 1.0).contains(0.1, 0.1));
}

#[test]
fn features_below_grid_scale_are_reported() {
    let d = Density::constant(0.0);
    let gs = rasterize(&Shape::disc(1.0, 0.3, 0.6), 2, 3.0, 256, 256).unwrap();
    let p = grid_perimeter(&gs, &d);
    assert!(p.resolved() && p.components == 1, "{p:?}");
    // Smaller than a cell: invisible to the contour but still occupied.
    let speck = Shape::Union { parts: vec![Shape::disc(1.0, 0.3, 0.6), Shape::disc(-1.5, -1.0, 0.01)] };
    let p = grid_perimeter(&rasterize(&speck, 2, 3.0, 256, 256).unwrap(), &d);
    assert_eq!(p.method, PerimeterMethod::Contour);
    assert_eq!(p.components, 1);
    assert!(p.sub_threshold_cells > 0 && !p.resolved(), "{p:?}");
    // A few cells across: traced, but flagged.
    let small = Shape::Union { parts: vec![Shape::disc(1.0, 0.3, 0.6), Shape::disc(-0.3, 0.0, 0.015)] };
    let p = grid_perimeter(&rasterize(&small, 2, 3.0, 256, 256).unwrap(), &d);
    assert_eq!((p.components, p.unresolved_components), (2, 1), "{p:?}");
}

fn small_shape() -> impl Strategy<Value = Shape> {
    let disc = (-1.5..1.5f64, -1.5..1.5f64, 0.2..1.2f64).prop_map(|(x, y, r)| Shape::disc(x, y, r));
    let ring = (-1.0..1.0f64, -1.0..1.0f64, 0.1..0.5f64, 0.6..1.2f64).prop_map(|(x, y, a, b)| Shape::annulus(x, y, a, b));
    prop_oneof![disc.clone(), ring, (disc.clone(), disc).prop_map(|(a, b)| Shape::Union { parts: vec![a, b] })]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn symmetrization_conserves_and_is_idempotent(shape in small_shape(), n in 2usize..4) {
        let d = Density::quadratic(1.0);
        let gs = rasterize(&shape, n, 3.0, 24, 24).unwrap();
        let s = symmetrize(&gs);
        let (v0, v1) = (weighted_volume(&gs, &d), weighted_volume(&s, &d));
        prop_assert!((v1 - v0).abs() <= 1e-10 * v0.abs());
        prop_assert!(s.occupancy.iter().all(|&v| (0.0..=1.0).contains(&v)));
        prop_assert_eq!(symmetrize(&s), s);
    }
}

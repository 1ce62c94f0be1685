//! Gauss–Legendre quadrature: fixed composite rules and a globally adaptive
//! integrator. Nodes and weights come from `gauss-quad` and are cached.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::legendre::GaussLegendre;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadError {
    #[error("integration limits must be finite, got [{0}, {1}]")]
    Limits(f64, f64),
    #[error("integrand is not finite at {0}")]
    NonFinite(f64),
    #[error("adaptive quadrature did not converge: estimate {estimate}, error {error}")]
    NoConvergence { estimate: f64, error: f64 },
}

const ORDERS: [usize; 3] = [8, 16, 32];

fn build(order: usize) -> Vec<(f64, f64)> {
    let rule = GaussLegendre::new(NonZeroUsize::new(order).expect("order > 0"));
    let mut pairs = rule.as_node_weight_pairs().to_vec();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs
}

/// Nodes and weights on `[-1, 1]` for one of the cached orders (8, 16, 32);
/// other orders are rounded up.
pub fn rule(order: usize) -> &'static [(f64, f64)] {
    static CACHE: [OnceLock<Vec<(f64, f64)>>; 3] = [OnceLock::new(), OnceLock::new(), OnceLock::new()];
    let idx = ORDERS.iter().position(|&o| o >= order).unwrap_or(ORDERS.len() - 1);
    CACHE[idx].get_or_init(|| build(ORDERS[idx]))
}

/// Fixed `order`-point rule on `[a, b]`.
pub fn fixed(a: f64, b: f64, order: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    rule(order).iter().map(|&(x, w)| w * f(mid + half * x)).sum::<f64>() * half
}

/// Composite rule with `pieces` equal panels.
pub fn composite(a: f64, b: f64, pieces: usize, order: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
    let pieces = pieces.max(1);
    let h = (b - a) / pieces as f64;
    (0..pieces).map(|i| fixed(a + i as f64 * h, a + (i + 1) as f64 * h, order, &mut f)).sum()
}

/// Globally adaptive integration to relative tolerance `rel_tol`.
///
/// Each panel is estimated with 8 and 16 points; the panel with the largest
/// difference is bisected until the total difference meets the tolerance.
pub fn adaptive(a: f64, b: f64, rel_tol: f64, mut f: impl FnMut(f64) -> f64) -> Result<f64, QuadError> {
    if !a.is_finite() || !b.is_finite() {
        return Err(QuadError::Limits(a, b));
    }
    if a == b {
        return Ok(0.0);
    }
    let mut eval = |lo: f64, hi: f64| -> (f64, f64) {
        let fine = fixed(lo, hi, 16, &mut f);
        let coarse = fixed(lo, hi, 8, &mut f);
        (fine, (fine - coarse).abs())
    };
    // (lo, hi, estimate, error)
    let (v, e) = eval(a, b);
    let mut panels = vec![(a, b, v, e)];
    for _ in 0..2000 {
        let total: f64 = panels.iter().map(|p| p.2).sum();
        let err: f64 = panels.iter().map(|p| p.3).sum();
        if !total.is_finite() {
            return Err(QuadError::NonFinite(a));
        }
        if err <= rel_tol * total.abs() || err <= 1e-300 {
            return Ok(total);
        }
        let (worst, _) = panels.iter().enumerate().max_by(|x, y| x.1 .3.total_cmp(&y.1 .3)).expect("nonempty");
        let (lo, hi, _, _) = panels.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Err(QuadError::NoConvergence { estimate: total, error: err });
        }
        let (v1, e1) = eval(lo, mid);
        let (v2, e2) = eval(mid, hi);
        panels.push((lo, mid, v1, e1));
        panels.push((mid, hi, v2, e2));
    }
    let total: f64 = panels.iter().map(|p| p.2).sum();
    let err: f64 = panels.iter().map(|p| p.3).sum();
    Err(QuadError::NoConvergence { estimate: total, error: err })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rules_are_exact_for_polynomials() {
        for order in ORDERS {
            let v = fixed(-1.0, 2.0, order, |x| x.powi(2 * order as i32 - 1) + 1.0);
            let exact = (2f64.powi(2 * order as i32) - 1.0) / (2 * order) as f64 + 3.0;
            assert!((v - exact).abs() < 1e-9 * exact.abs(), "{order}: {v} vs {exact}");
        }
    }

    #[test]
    fn adaptive_handles_peaks() {
        let v = adaptive(0.0, 1.0, 1e-12, |x| 1.0 / (1e-4 + (x - 0.3).powi(2))).unwrap();
        let exact = (0.7f64 / 1e-2).atan() / 1e-2 + (0.3f64 / 1e-2).atan() / 1e-2;
        assert!((v - exact).abs() < 1e-10 * exact);
        let e = adaptive(0.0, 1.0, 1e-14, |x| x.exp()).unwrap();
        assert!((e - (1f64.exp() - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn composite_matches_fixed_sum() {
        let a = composite(0.0, 2.0, 4, 8, |x| x.sin());
        assert!((a - (1.0 - 2f64.cos())).abs() < 1e-14);
    }
}

//! Dormand–Prince 5(4) embedded Runge–Kutta stepping.

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;

const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;

// Fifth-order weights minus the embedded fourth-order ones.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Right-hand side `y' = f(t, y)`. Returning `None` signals that the state
/// left the domain where `f` is defined.
pub trait OdeSystem<const N: usize> {
    fn rhs(&self, t: f64, y: &[f64; N]) -> Option<[f64; N]>;
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for i in 0..N {
        let mut acc = 0.0;
        for (w, k) in terms {
            acc += w * k[i];
        }
        out[i] += h * acc;
    }
    out
}

#[derive(Debug, Clone, Copy)]
pub struct Step<const N: usize> {
    pub y: [f64; N],
    /// Derivative at the new point (first-same-as-last stage).
    pub dy: [f64; N],
    /// Componentwise local error estimate.
    pub err: [f64; N],
}

/// One Dormand–Prince step of size `h` from `(t, y)` with derivative `k1`.
pub fn dopri_step<const N: usize, S: OdeSystem<N>>(sys: &S, t: f64, y: &[f64; N], k1: &[f64; N], h: f64) -> Option<Step<N>> {
    let k2 = sys.rhs(t + C2 * h, &axpy(y, h, &[(A21, k1)]))?;
    let k3 = sys.rhs(t + C3 * h, &axpy(y, h, &[(A31, k1), (A32, &k2)]))?;
    let k4 = sys.rhs(t + C4 * h, &axpy(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]))?;
    let k5 = sys.rhs(t + C5 * h, &axpy(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]))?;
    let k6 = sys.rhs(t + h, &axpy(y, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]))?;
    let y_new = axpy(y, h, &[(B1, k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
    let k7 = sys.rhs(t + h, &y_new)?;
    let mut err = [0.0; N];
    for i in 0..N {
        err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
    }
    Some(Step { y: y_new, dy: k7, err })
}

/// Scaled error norm (max over components, mixed absolute/relative).
pub fn error_norm<const N: usize>(err: &[f64; N], y0: &[f64; N], y1: &[f64; N], tol: f64) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..N {
        let sc = tol * (1.0 + y0[i].abs().max(y1[i].abs()));
        m = m.max(err[i].abs() / sc);
    }
    m
}

/// Step-size controller factor for an accepted or rejected step.
pub fn step_factor(norm: f64) -> f64 {
    if norm == 0.0 {
        return 5.0;
    }
    (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Decay;
    impl OdeSystem<1> for Decay {
        fn rhs(&self, _t: f64, y: &[f64; 1]) -> Option<[f64; 1]> {
            Some([-y[0]])
        }
    }

    struct Rotation;
    impl OdeSystem<2> for Rotation {
        fn rhs(&self, _t: f64, y: &[f64; 2]) -> Option<[f64; 2]> {
            Some([-y[1], y[0]])
        }
    }

    #[test]
    fn fifth_order_convergence() {
        let y0 = [1.0];
        let errs: Vec<f64> = [0.2, 0.1]
            .iter()
            .map(|&h| {
                let s = dopri_step(&Decay, 0.0, &y0, &[-1.0], h).unwrap();
                (s.y[0] - (-h).exp()).abs()
            })
            .collect();
        // Local error is O(h^6).
        assert!(errs[0] / errs[1] > 40.0, "{errs:?}");
    }

    #[test]
    fn adaptive_loop_tracks_rotation() {
        let tol = 1e-10;
        let mut t = 0.0;
        let mut y = [1.0, 0.0];
        let mut k = Rotation.rhs(t, &y).unwrap();
        let mut h: f64 = 0.1;
        let end = 2.0 * std::f64::consts::PI;
        while t < end {
            h = h.min(end - t);
            let s = dopri_step(&Rotation, t, &y, &k, h).unwrap();
            let norm = error_norm(&s.err, &y, &s.y, tol);
            if norm <= 1.0 {
                t += h;
                y = s.y;
                k = s.dy;
            }
            h *= step_factor(norm);
        }
        assert!((y[0] - 1.0).abs() < 1e-8 && y[1].abs() < 1e-8, "{y:?}");
    }
}

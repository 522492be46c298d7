//! Embedded Dormand-Prince 5(4) integrator for two-component complex systems.
//!
//! Adaptive step control on the classical DP5 tableau with FSAL, dense output
//! by cubic Hermite interpolation on accepted steps. Backward integration is
//! handled by the caller through time reversal of the right-hand side, so the
//! core loop only ever steps forward.

use num_complex::Complex64;

pub type State = [Complex64; 2];

#[derive(Debug, Clone, thiserror::Error)]
pub enum OdeError {
    #[error("step size underflow at t = {t} (h = {h:.3e})")]
    StepSizeUnderflow { t: f64, h: f64 },
    #[error("step budget exhausted after {steps} accepted steps")]
    MaxStepsExceeded { steps: usize },
}

#[derive(Debug, Clone, Copy, Default, serde::Serialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

/// Raw forward solution: nodes, states and derivatives at accepted steps.
#[derive(Debug, Clone)]
pub struct RawSolution {
    pub ts: Vec<f64>,
    pub ys: Vec<State>,
    pub dys: Vec<State>,
    pub stats: StepStats,
}

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
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
// 5th-order weights (also the a-row producing the FSAL stage)
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// embedded 4th-order weights
const E1: f64 = 5179.0 / 57600.0;
const E3: f64 = 7571.0 / 16695.0;
const E4: f64 = 393.0 / 640.0;
const E5: f64 = -92097.0 / 339200.0;
const E6: f64 = 187.0 / 2100.0;
const E7: f64 = 1.0 / 40.0;

const MAX_ACCEPTED_STEPS: usize = 80_000_000;

fn axpy(y: &State, pairs: &[(f64, &State)], h: f64) -> State {
    let mut out = *y;
    for &(w, k) in pairs {
        out[0] += h * w * k[0];
        out[1] += h * w * k[1];
    }
    out
}

/// Integrates `dy/dt = f(t, y)` from `t0` to `t1 > t0`.
pub fn integrate_dp54<F>(
    f: F,
    t0: f64,
    t1: f64,
    y0: State,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<RawSolution, OdeError>
where
    F: Fn(f64, &State) -> State,
{
    debug_assert!(t1 > t0);
    let span = t1 - t0;
    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    let mut stats = StepStats { rhs_evals: 1, ..Default::default() };

    let mut ts = vec![t0];
    let mut ys = vec![y0];
    let mut dys = vec![k1];

    // initial step from the scale of the first derivative
    let sc0 = abs_tol + rel_tol * state_norm(&y);
    let d1 = state_norm(&k1);
    let mut h = if d1 > 1e-30 { (0.01 * sc0 / d1).min(span / 10.0) } else { span / 100.0 };
    h = h.max(1e-10 * span);

    let h_floor = 32.0 * f64::EPSILON * (t0.abs().max(t1.abs()) + 1.0);

    loop {
        if t >= t1 {
            break;
        }
        if h < h_floor {
            return Err(OdeError::StepSizeUnderflow { t, h });
        }
        if t + h > t1 {
            h = t1 - t;
        }

        let k2 = f(t + C2 * h, &axpy(&y, &[(A21, &k1)], h));
        let k3 = f(t + C3 * h, &axpy(&y, &[(A31, &k1), (A32, &k2)], h));
        let k4 = f(t + C4 * h, &axpy(&y, &[(A41, &k1), (A42, &k2), (A43, &k3)], h));
        let k5 = f(t + C5 * h, &axpy(&y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], h));
        let k6 = f(t + h, &axpy(&y, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)], h));
        let y5 = axpy(&y, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)], h);
        let k7 = f(t + h, &y5);
        stats.rhs_evals += 6;

        let y4 = axpy(
            &y,
            &[(E1, &k1), (E3, &k3), (E4, &k4), (E5, &k5), (E6, &k6), (E7, &k7)],
            h,
        );

        // weighted RMS error over the four real components
        let mut err_sq = 0.0;
        for i in 0..2 {
            let e = y5[i] - y4[i];
            let sc_re = abs_tol + rel_tol * y[i].re.abs().max(y5[i].re.abs());
            let sc_im = abs_tol + rel_tol * y[i].im.abs().max(y5[i].im.abs());
            err_sq += (e.re / sc_re).powi(2) + (e.im / sc_im).powi(2);
        }
        let err = (err_sq / 4.0).sqrt();

        if err <= 1.0 {
            t += h;
            y = y5;
            k1 = k7; // FSAL
            ts.push(t);
            ys.push(y);
            dys.push(k1);
            stats.accepted += 1;
            if stats.accepted > MAX_ACCEPTED_STEPS {
                return Err(OdeError::MaxStepsExceeded { steps: stats.accepted });
            }
            let factor = (0.9 * err.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);
            h *= factor;
        } else {
            stats.rejected += 1;
            let factor = (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
            h *= factor;
        }
    }

    Ok(RawSolution { ts, ys, dys, stats })
}

pub fn state_norm(y: &State) -> f64 {
    (y[0].norm_sqr() + y[1].norm_sqr()).sqrt()
}

/// Cubic Hermite interpolation between two accepted nodes.
pub fn hermite(t: f64, t0: f64, t1: f64, y0: &State, y1: &State, d0: &State, d1: &State) -> State {
    let h = t1 - t0;
    let s = (t - t0) / h;
    let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
    let h10 = s * (1.0 - s) * (1.0 - s);
    let h01 = s * s * (3.0 - 2.0 * s);
    let h11 = s * s * (s - 1.0);
    let mut out = [Complex64::default(); 2];
    for i in 0..2 {
        out[i] = h00 * y0[i] + h * h10 * d0[i] + h01 * y1[i] + h * h11 * d1[i];
    }
    out
}

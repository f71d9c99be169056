//! Dormand–Prince 5(4) integrator with step-size control and an observer
//! that can stop the integration early.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { rtol: 1e-11, atol: 1e-14, max_steps: 2_000_000 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stop {
    Continue,
    Halt,
}

#[derive(Clone, Copy, Debug)]
pub struct Outcome<const N: usize> {
    pub t: f64,
    pub y: [f64; N],
    /// True when the observer halted the run before `t1`.
    pub halted: bool,
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] =
    [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];

/// Integrate y' = f(t, y) from t0 to t1 (either direction). The observer sees
/// every accepted step and may halt the run.
pub fn integrate<const N: usize>(
    f: impl Fn(f64, &[f64; N]) -> [f64; N],
    t0: f64,
    y0: [f64; N],
    t1: f64,
    h0: f64,
    tol: Tolerances,
    mut observer: impl FnMut(f64, &[f64; N]) -> Stop,
) -> Result<Outcome<N>> {
    let dir = (t1 - t0).signum();
    let mut t = t0;
    let mut y = y0;
    let mut h = h0.abs().max(1e-300) * dir;
    let mut k = [[0.0; N]; 7];
    k[0] = f(t, &y);
    for _ in 0..tol.max_steps {
        if (t1 - t) * dir <= 4.0 * f64::EPSILON * t.abs() {
            return Ok(Outcome { t, y, halted: false });
        }
        if (t + h - t1) * dir > 0.0 {
            h = t1 - t;
        }
        for s in 1..7 {
            let mut ys = y;
            for (i, v) in ys.iter_mut().enumerate() {
                for j in 0..s {
                    *v += h * A[s][j] * k[j][i];
                }
            }
            k[s] = f(t + C[s] * h, &ys);
        }
        let mut y5 = y;
        let mut err = 0.0f64;
        for i in 0..N {
            let mut d5 = 0.0;
            let mut d4 = 0.0;
            for s in 0..7 {
                d5 += B5[s] * k[s][i];
                d4 += B4[s] * k[s][i];
            }
            y5[i] = y[i] + h * d5;
            let sc = tol.atol + tol.rtol * y[i].abs().max(y5[i].abs());
            err = err.max((h * (d5 - d4)).abs() / sc);
        }
        if !err.is_finite() {
            h *= 0.1;
            if h.abs() < 1e-300 {
                return Err(Error::Numerical("step size underflow".into()));
            }
            continue;
        }
        if err <= 1.0 {
            t += h;
            y = y5;
            k[0] = k[6];
            if observer(t, &y) == Stop::Halt {
                return Ok(Outcome { t, y, halted: true });
            }
        }
        let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= fac;
        if err > 1.0 && h.abs() <= 4.0 * f64::EPSILON * t.abs() {
            return Err(Error::Numerical(format!("step size collapsed at t = {t}")));
        }
    }
    Err(Error::Numerical("too many integration steps".into()))
}

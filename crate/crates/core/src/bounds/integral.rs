use crate::error::{domain, Error, Result};
use crate::mechanism::{BranchingMechanism, Levy};
use crate::quad;

/// ∫_0^x (e^{-t} − 1 + t) dt.
fn em1x_antiderivative(x: f64) -> f64 {
    if x < 1e-2 {
        let x2 = x * x;
        x2 * x * (1.0 / 6.0 - x / 24.0 + x2 / 120.0 - x2 * x / 720.0)
    } else {
        0.5 * x * x - x - (-x).exp_m1()
    }
}

/// ∫_v^{v+b} ψ(a) da.
pub fn psi_increment(mech: &BranchingMechanism, v: f64, b: f64) -> f64 {
    if v > 0.0 && b < 1e-3 * v {
        return b * (mech.psi(v) + b * (0.5 * mech.psi_prime(v) + b * mech.psi_second(v) / 6.0));
    }
    let mut s = mech.alpha * b * (2.0 * v + b) / 2.0 + mech.beta * b * (3.0 * v * v + 3.0 * v * b + b * b) / 3.0;
    match &mech.levy {
        Levy::None {} => {}
        Levy::Stable { coefficient, index } => {
            let p = index + 1.0;
            s += if v > 0.0 {
                coefficient * v.powf(p) * (p * (b / v).ln_1p()).exp_m1() / p
            } else {
                coefficient * b.powf(p) / p
            };
        }
        Levy::Tabulated { atoms } => {
            for a in atoms {
                s += a.mass * (em1x_antiderivative(a.jump * (v + b)) - em1x_antiderivative(a.jump * v)) / a.jump;
            }
        }
    }
    s
}

/// Exponent p and coefficient K with ∫_v^{v+b} ψ ~ K b^p as b → ∞.
fn leading_power(mech: &BranchingMechanism) -> Option<(f64, f64)> {
    if mech.beta > 0.0 {
        return Some((3.0, mech.beta / 3.0));
    }
    match &mech.levy {
        Levy::Stable { coefficient, index } => Some((index + 1.0, coefficient / (index + 1.0))),
        _ => None,
    }
}

/// I(v) = ∫_v^∞ db / √(∫_v^b ψ).
pub fn integral_i(mech: &BranchingMechanism, v: f64) -> Result<f64> {
    if !(v > 0.0 && v.is_finite()) {
        return domain("I(v) needs v > 0");
    }
    let Some((p, k)) = leading_power(mech) else {
        return Err(Error::Unsupported("I(v) diverges: psi grows at most linearly at infinity".into()));
    };
    let rtol = 1e-11;
    let u_max = 1000.0;
    let at_zero = 2.0 * (v / mech.psi(v)).sqrt();
    let near = |u: f64| {
        if u == 0.0 {
            at_zero
        } else {
            2.0 * v * u / psi_increment(mech, v, v * u * u).sqrt()
        }
    };
    let head = quad::integrate(near, 0.0, 1.0, rtol, 0.0)? + quad::integrate(near, 1.0, u_max, rtol, 0.0)?;
    // b = B s^{-m} maps [B, ∞) to (0, 1] and removes the power-law tail.
    let big = v * u_max * u_max;
    let m = 2.0 / (p - 2.0);
    let limit = m * big.powf(1.0 - p / 2.0) / k.sqrt();
    let far = |s: f64| {
        let b = big * s.powf(-m);
        if s == 0.0 || !b.is_finite() || b > 1e250 {
            limit
        } else {
            m * big * s.powf(-m - 1.0) / psi_increment(mech, v, b).sqrt()
        }
    };
    let tail = quad::integrate(far, 0.0, 1.0, rtol, 0.0)?;
    Ok(head + tail)
}

/// Largest C with ψ(va) ≥ C ψ(v) a^c for a, v ≥ 1, estimated on a log grid of [1, 10⁶]².
pub fn comparison_constant(mech: &BranchingMechanism, c: f64) -> f64 {
    let grid: Vec<f64> = (0..=60).map(|i| 10f64.powf(i as f64 / 10.0)).collect();
    let mut best = f64::INFINITY;
    for &v in &grid {
        let pv = mech.psi(v);
        for &a in &grid {
            best = best.min(mech.psi(v * a) / (pv * a.powf(c)));
        }
    }
    best
}

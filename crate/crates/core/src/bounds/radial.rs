use serde::{Deserialize, Serialize};

use super::integral::{integral_i, psi_increment};
use crate::error::{domain, Error, Result};
use crate::mechanism::BranchingMechanism;
use crate::ode::{self, Stop, Tolerances};
use crate::quad;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileKind {
    /// v_r on [0, r): hitting of the complement of B(0, r) from inside.
    Interior,
    /// u_r on (r, s_max]: hitting of the closed ball from outside.
    Exterior,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RadialProfile {
    pub kind: ProfileKind,
    pub r: f64,
    pub d: usize,
    pub s: Vec<f64>,
    pub values: Vec<f64>,
    /// v(0) for interior profiles, the tail constant C of u ≈ C s^{2−d} otherwise.
    pub shooting: f64,
    /// Location of the blow-up produced by the final shooting parameter.
    pub blowup: f64,
    /// Outer end of the exterior domain (equal to r for interior profiles).
    pub s_max: f64,
}

const TOL: Tolerances = Tolerances { rtol: 1e-12, atol: 1e-300, max_steps: 2_000_000 };

fn rhs<'a>(mech: &'a BranchingMechanism, d: usize) -> impl Fn(f64, &[f64; 2]) -> [f64; 2] + 'a {
    let k = (d - 1) as f64;
    move |s, y| [y[1], 2.0 * mech.psi(y[0].max(0.0)) - k * y[1] / s]
}

/// Distance still travelled before blow-up once u = big with |u′| = slope,
/// neglecting the first-order term over that short stretch.
fn remaining_distance(mech: &BranchingMechanism, big: f64, slope: f64) -> Result<f64> {
    // t = big·x²
    quad::integrate_to_inf(
        |x| {
            let t = big * x * x;
            2.0 * big * x / (slope * slope + 4.0 * psi_increment(mech, big, t)).sqrt()
        },
        0.0,
        1e-8,
        0.0,
    )
}

/// Integrate from (s0, y0) towards s_end; return the blow-up location, or None
/// when the solution stays finite up to s_end.
fn blowup_location(
    mech: &BranchingMechanism,
    d: usize,
    s0: f64,
    y0: [f64; 2],
    s_end: f64,
    scale: f64,
) -> Result<Option<f64>> {
    let mut big = 1e8 * scale.max(y0[0].abs());
    let mut delta = f64::NAN;
    let mut last = s0;
    let mut failure = None;
    let out = ode::integrate(rhs(mech, d), s0, y0, s_end, (s_end - s0) * 1e-4, TOL, |t, y| {
        last = t;
        if y[0] > big {
            match remaining_distance(mech, y[0], y[1].abs()) {
                Ok(dl) if dl <= 1e-8 * t.abs() => {
                    delta = dl;
                    return Stop::Halt;
                }
                Ok(_) => big *= 100.0,
                Err(e) => {
                    failure = Some(e);
                    return Stop::Halt;
                }
            }
        }
        Stop::Continue
    });
    if let Some(e) = failure {
        return Err(e);
    }
    let out = match out {
        Ok(o) => o,
        // The step size collapsed against the singularity.
        Err(Error::Numerical(_)) => return Ok(Some(last)),
        Err(e) => return Err(e),
    };
    if !out.halted {
        return Ok(None);
    }
    Ok(Some(if s_end > s0 { out.t + delta } else { out.t - delta }))
}

fn interior_start(mech: &BranchingMechanism, d: usize, c: f64, s0: f64) -> [f64; 2] {
    let p = mech.psi(c);
    [c + p * s0 * s0 / d as f64, 2.0 * p * s0 / d as f64]
}

fn interior_blowup(mech: &BranchingMechanism, d: usize, r: f64, c: f64) -> Result<f64> {
    let s0 = 1e-6 * r;
    let y0 = interior_start(mech, d, c, s0);
    Ok(blowup_location(mech, d, s0, y0, 2.0 * r, r.powi(-2))?.unwrap_or(f64::INFINITY))
}

fn exterior_start(d: usize, c: f64, s_max: f64) -> [f64; 2] {
    let k = 2.0 - d as f64;
    [c * s_max.powf(k), k * c * s_max.powf(k - 1.0)]
}

fn exterior_blowup(mech: &BranchingMechanism, d: usize, r: f64, c: f64, s_max: f64) -> Result<f64> {
    let y0 = exterior_start(d, c, s_max);
    Ok(blowup_location(mech, d, s_max, y0, r, r.powi(-2))?.unwrap_or(f64::NEG_INFINITY))
}

/// Geometric bisection on a positive parameter whose blow-up location is monotone.
/// `increasing` tells whether the location grows with the parameter.
fn bisect_parameter(
    mut loc: impl FnMut(f64) -> Result<f64>,
    target: f64,
    start: f64,
    increasing: bool,
) -> Result<(f64, f64)> {
    // `too_far(p)`: the blow-up sits beyond the target in the direction that needs a larger p.
    let needs_larger = |l: f64| if increasing { l < target } else { l > target };
    let mut p = start;
    let mut l = loc(p)?;
    let (mut lo, mut hi);
    if needs_larger(l) {
        lo = p;
        loop {
            p *= 4.0;
            if p > 1e250 {
                return Err(Error::Numerical("shooting bracket not found (upper)".into()));
            }
            l = loc(p)?;
            if !needs_larger(l) {
                hi = p;
                break;
            }
            lo = p;
        }
    } else {
        hi = p;
        loop {
            p /= 4.0;
            if p < 1e-250 {
                return Err(Error::Numerical("shooting bracket not found (lower)".into()));
            }
            l = loc(p)?;
            if needs_larger(l) {
                lo = p;
                break;
            }
            hi = p;
        }
    }
    let mut best = (hi, loc(hi)?);
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if !(mid > lo && mid < hi) {
            break;
        }
        let l = loc(mid)?;
        if (l - target).abs() < (best.1 - target).abs() {
            best = (mid, l);
        }
        if (l - target).abs() <= 1e-12 * target {
            break;
        }
        if needs_larger(l) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if (best.1 - target).abs() > 1e-4 * target {
        return Err(Error::Numerical(format!("shooting converged to blow-up at {} instead of {target}", best.1)));
    }
    Ok(best)
}

/// Sample the solution started at (s0, y0) on the given grid (monotone, starting at s0).
fn sample(mech: &BranchingMechanism, d: usize, s0: f64, y0: [f64; 2], grid: &[f64]) -> Result<Vec<[f64; 2]>> {
    let f = rhs(mech, d);
    let mut out = Vec::with_capacity(grid.len());
    let (mut s, mut y) = (s0, y0);
    for &g in grid {
        if g != s {
            let o = ode::integrate(&f, s, y, g, (g - s) * 0.1, TOL, |_, _| Stop::Continue)?;
            y = o.y;
            s = g;
        }
        out.push(y);
    }
    Ok(out)
}

/// v_r by shooting from the center: returns the profile and v_r(0).
pub fn solve_radial_interior(mech: &BranchingMechanism, d: usize, r: f64) -> Result<(RadialProfile, f64)> {
    if d < 1 || !(r > 0.0) {
        return domain("interior problem needs d >= 1 and r > 0");
    }
    let (c, blow) = bisect_parameter(|c| interior_blowup(mech, d, r, c), r, r.powi(-2), false)?;
    let s0 = 1e-6 * r;
    let n = 400;
    let grid: Vec<f64> = (0..=n).map(|i| s0 + (r * (1.0 - 1e-3) - s0) * i as f64 / n as f64).collect();
    let ys = sample(mech, d, s0, interior_start(mech, d, c, s0), &grid)?;
    let mut s = vec![0.0];
    let mut values = vec![c];
    s.extend_from_slice(&grid[1..]);
    values.extend(ys[1..].iter().map(|y| y[0]));
    Ok((RadialProfile { kind: ProfileKind::Interior, r, d, s, values, shooting: c, blowup: blow, s_max: r }, c))
}

/// u_r by shooting inward from s_max with u ≈ C s^{2−d}.
pub fn solve_radial_exterior(mech: &BranchingMechanism, d: usize, r: f64, s_max: f64) -> Result<RadialProfile> {
    if d < 3 {
        return domain("exterior problem needs d >= 3");
    }
    if !(r > 0.0 && s_max >= 10.0 * r) {
        return domain("exterior problem needs s_max >= 10 r");
    }
    let start = r.powf(d as f64 - 4.0);
    let (c, blow) = bisect_parameter(|c| exterior_blowup(mech, d, r, c, s_max), r, start, true)?;
    let n = 400;
    let (a, b) = (s_max.ln(), (r * (1.0 + 1e-3)).ln());
    let grid: Vec<f64> = (0..=n).map(|i| (a + (b - a) * i as f64 / n as f64).exp()).collect();
    let ys = sample(mech, d, s_max, exterior_start(d, c, s_max), &grid)?;
    let mut s: Vec<f64> = grid.into_iter().rev().collect();
    let mut values: Vec<f64> = ys.iter().rev().map(|y| y[0]).collect();
    s.shrink_to_fit();
    values.shrink_to_fit();
    Ok(RadialProfile { kind: ProfileKind::Exterior, r, d, s, values, shooting: c, blowup: blow, s_max })
}

impl RadialProfile {
    /// Value at radius s by re-integrating from the shooting data.
    pub fn value_at(&self, mech: &BranchingMechanism, s: f64) -> Result<f64> {
        match self.kind {
            ProfileKind::Interior => {
                let s0 = 1e-6 * self.r;
                if s <= s0 {
                    return Ok(self.shooting);
                }
                let y0 = interior_start(mech, self.d, self.shooting, s0);
                Ok(sample(mech, self.d, s0, y0, &[s])?[0][0])
            }
            ProfileKind::Exterior => {
                let y0 = exterior_start(self.d, self.shooting, self.s_max);
                if s >= self.s_max {
                    return Ok(self.shooting * s.powf(2.0 - self.d as f64));
                }
                Ok(sample(mech, self.d, self.s_max, y0, &[s])?[0][0])
            }
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,value\n");
        for (s, v) in self.s.iter().zip(&self.values) {
            out.push_str(&format!("{s:e},{v:e}\n"));
        }
        out
    }
}

/// Largest residual |½(u″ + (d−1)u′/s) − ψ(u)| on a fine grid away from the blow-up,
/// relative to max(ψ(u), |u″|/2). Derivatives by five-point differences.
pub fn ode_residual(mech: &BranchingMechanism, p: &RadialProfile) -> Result<f64> {
    let dd = (p.d - 1) as f64;
    let n = 2000;
    let (xs, to_s): (Vec<f64>, fn(f64) -> f64) = match p.kind {
        ProfileKind::Interior => ((0..=n).map(|i| 0.05 * p.r + 0.85 * p.r * i as f64 / n as f64).collect(), |x| x),
        ProfileKind::Exterior => {
            let (a, b) = ((1.1 * p.r).ln(), (10.0 * p.r).min(p.s_max).ln());
            ((0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect(), f64::exp)
        }
    };
    let grid: Vec<f64> = xs.iter().map(|&x| to_s(x)).collect();
    let ys = match p.kind {
        ProfileKind::Interior => {
            let s0 = 1e-6 * p.r;
            sample(mech, p.d, s0, interior_start(mech, p.d, p.shooting, s0), &grid)?
        }
        ProfileKind::Exterior => {
            let rev: Vec<f64> = grid.iter().rev().copied().collect();
            let mut v = sample(mech, p.d, p.s_max, exterior_start(p.d, p.shooting, p.s_max), &rev)?;
            v.reverse();
            v
        }
    };
    let h = xs[1] - xs[0];
    let mut worst = 0.0f64;
    for i in 2..xs.len() - 2 {
        let u = |j: usize| ys[j][0];
        let d1 = (u(i - 2) - 8.0 * u(i - 1) + 8.0 * u(i + 1) - u(i + 2)) / (12.0 * h);
        let d2 = (-u(i - 2) + 16.0 * u(i - 1) - 30.0 * u(i) + 16.0 * u(i + 1) - u(i + 2)) / (12.0 * h * h);
        let s = grid[i];
        let (us, uss) = match p.kind {
            ProfileKind::Interior => (d1, d2),
            // x = ln s
            ProfileKind::Exterior => (d1 / s, (d2 - d1) / (s * s)),
        };
        let lhs = 0.5 * (uss + dd * us / s);
        let psi = mech.psi(u(i));
        worst = worst.max((lhs - psi).abs() / psi.max(0.5 * uss.abs()));
    }
    Ok(worst)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KellerVerdict {
    pub d: usize,
    pub r: f64,
    pub v0: f64,
    pub i_value: f64,
    pub lower: f64,
    pub upper: f64,
    pub holds: bool,
}

/// 2r/√d ≤ I(v_r(0)) ≤ 2r.
pub fn keller_check(mech: &BranchingMechanism, d: usize, r: f64) -> Result<KellerVerdict> {
    let (_, v0) = solve_radial_interior(mech, d, r)?;
    let i_value = integral_i(mech, v0)?;
    let lower = 2.0 * r / (d as f64).sqrt();
    let upper = 2.0 * r;
    Ok(KellerVerdict { d, r, v0, i_value, lower, upper, holds: lower <= i_value && i_value <= upper })
}

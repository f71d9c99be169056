use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::mechanism::BranchingMechanism;

/// Lower bound on P(S_ρ ≤ a) and Markov upper bound on P(S_ρ ≥ a) for a
/// subordinator S with Laplace exponent Φ, both evaluated at λ.
pub fn subordinator_tail_bounds(phi: impl Fn(f64) -> f64, rho: f64, a: f64, lam: f64) -> (f64, f64) {
    let x = rho * phi(lam);
    let den = -(-lam * a).exp_m1();
    let lower = ((-x).exp() - (-lam * a).exp()) / den;
    let upper = -(-x).exp_m1() / den;
    (lower.clamp(0.0, 1.0), upper.clamp(0.0, 1.0))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeriesRow {
    pub n: u64,
    pub ln_rho: f64,
    /// loglog(1/(4ρ_n)).
    pub loglog: f64,
    /// Lower bound on P(S_{ρ_n} ≤ g(4ρ_n)).
    pub lower: f64,
    /// Markov bound on P(S_{ρ_{n+1}} ≥ g(4ρ_n)); absent on the last row.
    pub upper: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeriesReport {
    pub rows: Vec<SeriesRow>,
    pub lower_partial_sum: f64,
    pub threshold: f64,
    /// First n at which the lower-term partial sum exceeds `threshold`.
    pub divergence_index: Option<u64>,
    /// Σ of upper terms over n > `tail_from`.
    pub upper_tail: f64,
    pub tail_from: u64,
    /// Fitted slope of ln(lower) against loglog(1/(4ρ_n)) on the second half of the rows,
    /// i.e. the exponent b in lower ≈ log(1/(4ρ_n))^b.
    pub lower_decay_exponent: f64,
    /// Largest relative gap between ρ_nΦ(λ_n) and loglog(1/(4ρ_n))/4 among rows where λ_n is representable.
    pub identity_residual: f64,
}

/// Series of subordinator tail bounds along a radius ladder ρ_n, with Φ = √φ*,
/// λ_n = Φ⁻¹(loglog(1/(4ρ_n))/(4ρ_n)) and a_n = g(4ρ_n).
///
/// With this λ_n one has ρ_nΦ(λ_n) = L_n/4 and λ_n·g(4ρ_n) = L_n, so every
/// term is evaluated in log space from ln ρ_n; the identities are checked
/// directly wherever λ_n fits in f64.
pub fn subordinator_series(
    mech: &BranchingMechanism,
    ladder: &[(u64, f64)],
    threshold: f64,
    budget: usize,
    tail_from: u64,
) -> Result<SeriesReport> {
    let ladder = &ladder[..ladder.len().min(budget)];
    let phi = |l: f64| mech.phi_star(l).max(0.0).sqrt();
    let mut rows = Vec::with_capacity(ladder.len());
    let mut identity_residual = 0.0f64;
    for (i, &(n, ln_rho)) in ladder.iter().enumerate() {
        let ln_inv = -(4f64.ln() + ln_rho);
        if !(ln_inv > std::f64::consts::E) {
            // g(4ρ) is only defined for 4ρ < e^{−e}
            continue;
        }
        let l = ln_inv.ln();
        let lower = ((-l / 4.0).exp() - (-l).exp()) / -(-l).exp_m1();
        let upper = ladder.get(i + 1).map(|&(_, next)| {
            let ratio = (next - ln_rho - 4f64.ln()).exp();
            (-(-ratio * l).exp_m1() / -(-l).exp_m1()).clamp(0.0, 1.0)
        });
        let rho = ln_rho.exp();
        if rho > 1e-150 {
            // Φ² = φ*, so Φ⁻¹(y) = φ*⁻¹(y²) = φ⁻¹(y² + α).
            let y = l / (4.0 * rho);
            if let Ok(lam) = mech.phi_inv(y * y + mech.alpha) {
                if lam.is_finite() {
                    identity_residual = identity_residual.max((rho * phi(lam) / (l / 4.0) - 1.0).abs());
                }
            }
        }
        rows.push(SeriesRow { n, ln_rho, loglog: l, lower: lower.clamp(0.0, 1.0), upper });
    }
    if rows.is_empty() {
        return domain("no radius of the ladder lies below e^-e/4");
    }
    let mut sum = 0.0;
    let mut divergence_index = None;
    for r in &rows {
        sum += r.lower;
        if divergence_index.is_none() && sum > threshold {
            divergence_index = Some(r.n);
        }
    }
    let upper_tail = rows.iter().filter(|r| r.n > tail_from).filter_map(|r| r.upper).sum();
    let half = &rows[rows.len() / 2..];
    let lower_decay_exponent = if half.len() >= 2 {
        let xs: Vec<f64> = half.iter().map(|r| r.loglog).collect();
        let ys: Vec<f64> = half.iter().map(|r| r.lower.ln()).collect();
        slope(&xs, &ys)
    } else {
        f64::NAN
    };
    Ok(SeriesReport {
        rows,
        lower_partial_sum: sum,
        threshold,
        divergence_index,
        upper_tail,
        tail_from,
        lower_decay_exponent,
        identity_residual,
    })
}

pub(crate) fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub replicas: usize,
    pub dt: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExitTimeReport {
    pub d: usize,
    pub r: f64,
    pub lam: f64,
    /// E[e^{−λχ}] for the exit time of (−r, r) by a linear Brownian motion.
    pub exact_1d: f64,
    /// 2d·exp(−r√(2λ/d)).
    pub upper_dd: f64,
    pub monte_carlo: Option<MonteCarloEstimate>,
}

pub fn exit_time_laplace(d: usize, r: f64, lam: f64) -> Result<ExitTimeReport> {
    if d == 0 || !(r > 0.0) || !(lam >= 0.0) {
        return domain("exit-time transform needs d >= 1, r > 0, lambda >= 0");
    }
    Ok(ExitTimeReport {
        d,
        r,
        lam,
        exact_1d: 1.0 / (r * (2.0 * lam).sqrt()).cosh(),
        upper_dd: 2.0 * d as f64 * (-r * (2.0 * lam / d as f64).sqrt()).exp(),
        monte_carlo: None,
    })
}

/// Monte Carlo estimate of E[e^{−λχ_{d,r}}], χ_{d,r} the exit time of B(0, r).
///
/// Euler steps of size dt; between steps the path is treated as a Brownian
/// bridge and a crossing is detected with probability exp(−2 b₁b₂/dt), b the
/// distances to the sphere. The remaining bias is O(dt) in the boundary
/// curvature.
pub fn exit_time_monte_carlo<R: Rng + ?Sized>(
    d: usize,
    r: f64,
    lam: f64,
    dt: f64,
    replicas: usize,
    rng: &mut R,
) -> Result<MonteCarloEstimate> {
    if d == 0 || !(r > 0.0) || !(dt > 0.0) || replicas < 2 {
        return domain("Monte Carlo exit time needs d >= 1, r > 0, dt > 0 and at least two replicas");
    }
    let sd = dt.sqrt();
    let mut x = vec![0.0; d];
    let mut s1 = 0.0;
    let mut s2 = 0.0;
    for _ in 0..replicas {
        x.iter_mut().for_each(|v| *v = 0.0);
        let mut t = 0.0;
        let mut b1 = r;
        let t_exit = loop {
            for v in x.iter_mut() {
                *v += sd * rng.sample::<f64, _>(StandardNormal);
            }
            t += dt;
            let b2 = r - x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if b2 <= 0.0 {
                break t;
            }
            if rng.gen::<f64>() < (-2.0 * b1 * b2 / dt).exp() {
                break t - 0.5 * dt;
            }
            b1 = b2;
        };
        let v = (-lam * t_exit).exp();
        s1 += v;
        s2 += v * v;
    }
    let n = replicas as f64;
    let mean = s1 / n;
    let var = (s2 / n - mean * mean).max(0.0) * n / (n - 1.0);
    Ok(MonteCarloEstimate { mean, std_error: (var / n).sqrt(), replicas, dt })
}

use serde::{Deserialize, Serialize};

use super::integral::{comparison_constant, integral_i};
use super::Constant;
use crate::error::{domain, invalid, Error, Result};
use crate::mechanism::{exponents, BranchingMechanism, ExponentGrid};
use crate::quad;

fn analytic_exponents(mech: &BranchingMechanism) -> Result<(f64, f64)> {
    let rep = exponents(mech, &ExponentGrid { lam_min: 1.0, lam_max: 1e8 })?;
    match rep.delta {
        Some(delta) => Ok((rep.gamma_lower, delta)),
        None => Err(Error::Unsupported("exponent δ is only available for analytic families".into())),
    }
}

/// Constants of the hitting-probability estimates for one (ψ, d, ϱ).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LemmaConstants {
    pub d: usize,
    pub varrho: f64,
    pub c_exponent: f64,
    pub c_delta: Constant,
    pub kd_integral: Constant,
    pub c1: Constant,
    pub c2: Constant,
}

/// c1 = (∫₁^∞ db/√(∫₁^b a^c da))² / C_δ and C2 = c1·d·ϱ⁻², with c the
/// midpoint of (1, δ) unless given.
pub fn lemma_constants(mech: &BranchingMechanism, d: usize, varrho: f64, c: Option<f64>) -> Result<LemmaConstants> {
    if d < 3 || !(varrho > 0.0) {
        return domain("lemma constants need d >= 3 and varrho > 0");
    }
    let c = match c {
        Some(c) => c,
        None => {
            let (_, delta) = analytic_exponents(mech)?;
            if delta <= 1.0 {
                return domain("delta must exceed 1");
            }
            0.5 * (1.0 + delta)
        }
    };
    if !(c > 1.0 && c <= 2.0) {
        return invalid("comparison exponent c must lie in (1, 2]");
    }
    let c_delta = comparison_constant(mech, c);
    let kd = integral_i(&BranchingMechanism::stable(1.0, c), 1.0)?;
    let c1 = kd * kd / c_delta;
    let c2 = c1 * d as f64 / (varrho * varrho);
    Ok(LemmaConstants {
        d,
        varrho,
        c_exponent: c,
        c_delta: Constant::new(
            "C_delta",
            c_delta,
            format!("min of psi(va)/(psi(v) a^c) over a log grid of [1,1e6]^2, c = {c}"),
        ),
        kd_integral: Constant::new("kd_integral", kd, format!("int_1^inf db / sqrt(int_1^b a^c da), c = {c}")),
        c1: Constant::new("c1", c1, "kd_integral^2 / C_delta"),
        c2: Constant::new("C2", c2, format!("c1 * d / varrho^2 with d = {d}, varrho = {varrho}")),
    })
}

/// q_r = ψ′⁻¹(C2 r⁻²) and J(r) = r² q_r^{2/(d−2)} ∫₁^{q_r} ψ′(v) v^{−d/(d−2)} dv.
pub fn q_and_j(mech: &BranchingMechanism, d: usize, r: f64, c2: f64) -> Result<(f64, f64)> {
    if d < 3 {
        return domain("J(r) needs d >= 3");
    }
    if !(r > 0.0 && r < (c2 / mech.psi_prime(1.0)).sqrt()) {
        return domain("q_r >= 1 needs r < (C2/psi'(1))^(1/2)");
    }
    let q = mech.psi_prime_inv(c2 / (r * r))?;
    let dd = d as f64;
    let e = 1.0 - dd / (dd - 2.0);
    // v = e^x
    let integral = quad::integrate(|x| mech.psi_prime(x.exp()) * (e * x).exp(), 0.0, q.ln(), 1e-11, 0.0)?;
    Ok((q, r * r * q.powf(2.0 / (dd - 2.0)) * integral))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ThetaRow {
    pub ln_theta: f64,
    pub ln_lambda: f64,
    /// ln r_θ, kept in log form because r_θ leaves the f64 range quickly.
    pub ln_r: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RadiiSequences {
    pub c: f64,
    pub c2: f64,
    pub admissible: (f64, f64),
    pub rows: Vec<ThetaRow>,
    /// (n, ln ρ_n) with ρ_n = r_{e^{n²}}.
    pub rho: Vec<(u64, f64)>,
    /// ρ_{n+1} ≤ e^{−n} ρ_n for every listed n.
    pub rho_gap_holds: bool,
    /// max_n n⁻² log(1/ρ_n).
    pub rho_growth_sup: f64,
    /// r_{θ′}/r_θ ≤ (θ/θ′)^{1/2} for every pair of listed θ ≤ θ′.
    pub ratio_bound_holds: bool,
}

/// ln λ_θ with λ_θ = inf{λ ≥ 1 : λ^{−c} ψ′(λ) = θ}.
fn ln_lambda_theta(mech: &BranchingMechanism, c: f64, ln_theta: f64) -> Result<f64> {
    if let Some((k, g)) = mech.power_law() {
        let root = (ln_theta - (k * g).ln()) / (g - 1.0 - c);
        if root < 0.0 {
            return domain("theta must exceed psi'(1)");
        }
        return Ok(root);
    }
    if ln_theta > 700.0 {
        return Err(Error::Unsupported("log-scale radii need a power-law mechanism".into()));
    }
    let theta = ln_theta.exp();
    let h = |l: f64| l.powf(-c) * mech.psi_prime(l);
    if h(1.0) >= theta {
        return domain("theta must exceed psi'(1)");
    }
    let mut hi = 1.0;
    while h(hi) < theta {
        hi *= 2.0;
        if hi > 1e300 {
            return domain("no root of lambda^-c psi'(lambda) = theta below 1e300");
        }
    }
    let mut lo = hi / 2.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if !(mid > lo && mid < hi) {
            break;
        }
        if h(mid) < theta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi.ln())
}

/// Radii r_θ = (C2/ψ′(λ_θ))^{1/2} on the given θ list and the ladder ρ_n = r_{e^{n²}}, n ≤ n_max.
pub fn radii_theta(
    mech: &BranchingMechanism,
    d: usize,
    c: f64,
    c2: f64,
    ln_thetas: &[f64],
    n_max: u64,
) -> Result<RadiiSequences> {
    let (gamma, _) = analytic_exponents(mech).or_else(|_| {
        let rep = exponents(mech, &ExponentGrid { lam_min: 1.0, lam_max: 1e8 })?;
        Ok::<_, Error>((rep.gamma_lower, f64::NAN))
    })?;
    if d < 3 {
        return domain("radii need d >= 3");
    }
    let window = (2.0 / (d as f64 - 2.0), gamma - 1.0);
    if window.0 >= window.1 {
        return domain(format!("empty admissible window ({}, {}) for c: d too small", window.0, window.1));
    }
    if !(c > window.0 && c < window.1) {
        return domain(format!("c = {c} outside the admissible window ({}, {})", window.0, window.1));
    }
    let row = |lt: f64| -> Result<ThetaRow> {
        let ll = ln_lambda_theta(mech, c, lt)?;
        // ψ′(λ_θ) = θ λ_θ^c
        Ok(ThetaRow { ln_theta: lt, ln_lambda: ll, ln_r: 0.5 * (c2.ln() - lt - c * ll) })
    };
    let rows = ln_thetas.iter().map(|&lt| row(lt)).collect::<Result<Vec<_>>>()?;
    let mut ratio_bound_holds = true;
    for a in &rows {
        for b in &rows {
            if b.ln_theta >= a.ln_theta {
                ratio_bound_holds &= b.ln_r - a.ln_r <= 0.5 * (a.ln_theta - b.ln_theta) + 1e-9;
            }
        }
    }
    let ln_p1 = mech.psi_prime(1.0).ln();
    let mut rho = Vec::new();
    for n in 1..=n_max {
        let lt = (n * n) as f64;
        if lt > ln_p1 {
            rho.push((n, row(lt)?.ln_r));
        }
    }
    let rho_gap_holds = rho.windows(2).all(|w| w[1].1 - w[0].1 <= -(w[0].0 as f64) + 1e-9);
    let rho_growth_sup = rho.iter().map(|&(n, l)| -l / (n * n) as f64).fold(f64::NEG_INFINITY, f64::max);
    Ok(RadiiSequences { c, c2, admissible: window, rows, rho, rho_gap_holds, rho_growth_sup, ratio_bound_holds })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SnRow {
    pub n: u64,
    pub lambda: f64,
    pub phi_star: f64,
    pub s: f64,
    /// Markov bound on P(T_{γ(2s_n)} > s_n^u), clamped to [0, 1].
    pub markov: f64,
    /// 1 − markov: lower bound on P(T_{γ(2s_n)} ≤ s_n^u).
    pub complement: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SnSequence {
    pub u: f64,
    pub u_prime: f64,
    pub a: f64,
    pub eps: f64,
    pub rows: Vec<SnRow>,
    /// max_n markov_n · 2^{naε/2}.
    pub fitted_c: f64,
    /// First n at which the complement partial sum exceeds `threshold`.
    pub divergence_index: Option<u64>,
    pub threshold: f64,
}

/// s_n = φ*(λ_n)^{−(1+ε)/2} with 2ⁿ ≤ λ_n and λ_n^a ≤ φ*(λ_n) ≤ λ_n^{2/u′}.
pub fn sn_sequence(mech: &BranchingMechanism, u: f64, n_max: u64, threshold: f64) -> Result<SnSequence> {
    let rep = exponents(mech, &ExponentGrid { lam_min: 1.0, lam_max: 1e8 })?;
    let g = rep.gamma_lower;
    let top = 2.0 * g / (g - 1.0);
    if !(u > 0.0 && u < top) {
        return domain(format!("u must lie in (0, {top})"));
    }
    let u_prime = 0.5 * (u + top);
    let a = 0.5 * (g - 1.0) / g;
    let eps = 0.5 * (u_prime / u - 1.0);
    let mut rows = Vec::new();
    let mut prev = 0.0f64;
    let mut fitted_c = 0.0f64;
    let mut sum = 0.0;
    let mut divergence_index = None;
    for n in 1..=n_max {
        let mut lam = 2f64.powi(n as i32).max(2.0 * prev);
        let phi = loop {
            let p = mech.phi_star(lam);
            if lam.powf(a) <= p && p <= lam.powf(2.0 / u_prime) {
                break p;
            }
            lam *= 2.0;
            if lam > 1e300 {
                return Err(Error::Numerical(format!("no admissible lambda_{n} below 1e300")));
            }
        };
        prev = lam;
        let s = phi.powf(-(1.0 + eps) / 2.0);
        let num = -(-2.0 * 2f64.sqrt() * s * phi.sqrt()).exp_m1();
        let den = -(-lam * s.powf(u)).exp_m1();
        let markov = (num / den).clamp(0.0, 1.0);
        fitted_c = fitted_c.max(markov * 2f64.powf(n as f64 * a * eps / 2.0));
        sum += 1.0 - markov;
        if divergence_index.is_none() && sum > threshold {
            divergence_index = Some(n);
        }
        rows.push(SnRow { n, lambda: lam, phi_star: phi, s, markov, complement: 1.0 - markov });
    }
    Ok(SnSequence { u, u_prime, a, eps, rows, fitted_c, divergence_index, threshold })
}

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_lr;

use super::Constant;
use crate::error::{domain, Error, Result};
use crate::mechanism::{exponents, loglog_inv, BranchingMechanism, ExponentGrid};
use crate::quad;

/// ∫₀^∞ P(‖ξ_c‖ ≤ 1) e^{−c} dc for a standard Brownian motion ξ in ℝ^d.
pub fn cbp1(d: usize) -> Result<f64> {
    if d == 0 {
        return domain("d must be positive");
    }
    let k = d as f64 / 2.0;
    quad::integrate_to_inf(|c| if c <= 0.0 { 1.0 } else { gamma_lr(k, 0.5 / c) * (-c).exp() }, 0.0, 1e-10, 0.0)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FExplorerReport {
    pub r: f64,
    pub kappa: f64,
    pub q: f64,
    pub constant: Constant,
    /// μ_{r,q} ≤ coupling·q^a·μ_{r,1}.
    pub a: f64,
    pub coupling: f64,
    pub mu: f64,
    pub f_value: f64,
    pub kappa0: f64,
    /// q_κ, defined for κ < κ₀.
    pub q_kappa: Option<f64>,
    pub f_at_q_kappa: Option<f64>,
    /// −(C/2)(κ₀/κ)^{1/(2a−1)}·loglog(1/r).
    pub f_bound: Option<f64>,
    pub f_at_q_kappa_negative: Option<bool>,
    /// r < exp(−e⁸); not representable in f64, so always false.
    pub below_radius_threshold: bool,
}

/// F(μ_{r,q}, r, κ) = (κ μ_{r,q}/μ_{r,1} − C√q)·loglog(1/r) with
/// C = (cBP1/(32d))^{1/2}, together with κ₀ = C/(2·coupling) and q_κ.
pub fn f_explorer(mech: &BranchingMechanism, d: usize, r: f64, kappa: f64, q: f64) -> Result<FExplorerReport> {
    if !(kappa > 0.0) {
        return domain("kappa must be positive");
    }
    let delta = exponents(mech, &ExponentGrid { lam_min: 1.0, lam_max: 1e8 })?
        .delta
        .ok_or_else(|| Error::Unsupported("the F algebra needs an analytic delta".into()))?;
    if !(delta > 1.0) {
        return domain("delta must exceed 1");
    }
    // φ is homogeneous of degree (δ−1)/δ, so μ_{r,q} = q^{δ/(δ−1)} μ_{r,1}.
    let a = delta / (delta - 1.0);
    let coupling = 1.0;
    let c = (cbp1(d)? / (32.0 * d as f64)).sqrt();
    let l = loglog_inv(r);
    let mu1 = mech.mu_rq(r, 1.0)?;
    let f = |q: f64| -> Result<(f64, f64)> {
        let mu = mech.mu_rq(r, q)?;
        if !(mu.is_finite() && mu1.is_finite()) {
            return Err(Error::Numerical(format!("mu_(r,q) overflows at r = {r}, q = {q}")));
        }
        Ok((mu, (kappa * mu / mu1 - c * q.sqrt()) * l))
    };
    let (mu, f_value) = f(q)?;
    let kappa0 = c / (2.0 * coupling);
    let (q_kappa, f_at_q_kappa, f_bound) = if kappa < kappa0 {
        let qk = (kappa0 / kappa).powf(1.0 / (a - 0.5));
        let (_, fk) = f(qk)?;
        (Some(qk), Some(fk), Some(-0.5 * c * (kappa0 / kappa).powf(1.0 / (2.0 * a - 1.0)) * l))
    } else {
        (None, None, None)
    };
    Ok(FExplorerReport {
        r,
        kappa,
        q,
        constant: Constant::new("C", c, format!("sqrt(cBP1/(32 d)), d = {d}")),
        a,
        coupling,
        mu,
        f_value,
        kappa0,
        q_kappa,
        f_at_q_kappa,
        f_bound,
        f_at_q_kappa_negative: f_at_q_kappa.map(|v| v < 0.0),
        below_radius_threshold: r < (-(8f64.exp())).exp(),
    })
}

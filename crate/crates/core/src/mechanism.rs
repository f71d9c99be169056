//! Branching mechanisms ψ(λ) = αλ + βλ² + ∫(e^{-λr} − 1 + λr) π(dr) and the
//! functions derived from them: ψ′, ψ⁻¹, φ = ψ′∘ψ⁻¹, the power exponents and
//! the gauge functions g and k.

use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, Error, Result};

/// Relative tolerance used by every bracketing inversion.
pub const INVERT_RTOL: f64 = 1e-12;

/// e^{-e}: upper end of the range where loglog(1/r) > 1.
pub fn e_to_minus_e() -> f64 {
    (-std::f64::consts::E).exp()
}

/// log log (1/r).
#[inline]
pub fn loglog_inv(r: f64) -> f64 {
    (-r.ln()).ln()
}

/// e^{-x} − 1 + x without cancellation for small x.
#[inline]
pub(crate) fn em1x(x: f64) -> f64 {
    if x < 1e-2 {
        let x2 = x * x;
        x2 * (0.5 - x / 6.0 + x2 / 24.0 - x2 * x / 120.0 + x2 * x2 / 720.0)
    } else {
        x + (-x).exp_m1()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Atom {
    pub jump: f64,
    pub mass: f64,
}

/// Lévy part of the mechanism.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Levy {
    None {},
    /// c·λ^γ, given directly by its closed form.
    Stable {
        coefficient: f64,
        index: f64,
    },
    /// Finitely many atoms (jump size, mass).
    Tabulated {
        atoms: Vec<Atom>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchingMechanism {
    pub alpha: f64,
    pub beta: f64,
    #[serde(default)]
    pub levy: Levy,
}

impl Default for Levy {
    fn default() -> Self {
        Levy::None {}
    }
}

/// Which function `invert` inverts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Which {
    Psi,
    PsiPrime,
    Phi,
}

impl BranchingMechanism {
    pub fn new(alpha: f64, beta: f64, levy: Levy) -> Result<Self> {
        let m = BranchingMechanism { alpha, beta, levy };
        m.validate()?;
        Ok(m)
    }

    /// ψ(λ) = βλ².
    pub fn quadratic(beta: f64) -> Self {
        Self::new(0.0, beta, Levy::None {}).expect("beta must be positive")
    }

    /// ψ(λ) = c·λ^γ.
    pub fn stable(coefficient: f64, index: f64) -> Self {
        Self::new(0.0, 0.0, Levy::Stable { coefficient, index }).expect("invalid stable parameters")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: BranchingMechanism = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return invalid("alpha must be a finite nonnegative number");
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return invalid("beta must be a finite nonnegative number");
        }
        match &self.levy {
            Levy::None {} => {}
            Levy::Stable { coefficient, index } => {
                if !(coefficient.is_finite() && *coefficient > 0.0) {
                    return invalid("stable coefficient must be positive");
                }
                // γ = 2 is admitted: it is the quadratic mechanism written in stable form.
                if !(*index > 1.0 && *index <= 2.0) {
                    return invalid("stable index must lie in (1, 2]");
                }
            }
            Levy::Tabulated { atoms } => {
                for a in atoms {
                    if !(a.jump.is_finite() && a.jump > 0.0 && a.mass.is_finite() && a.mass >= 0.0) {
                        return invalid("tabulated atoms need jump > 0 and mass >= 0");
                    }
                }
            }
        }
        if self.alpha == 0.0 && self.beta == 0.0 && self.levy_is_empty() {
            return invalid("mechanism is identically zero");
        }
        Ok(())
    }

    fn levy_is_empty(&self) -> bool {
        match &self.levy {
            Levy::None {} => true,
            Levy::Stable { .. } => false,
            Levy::Tabulated { atoms } => atoms.iter().all(|a| a.mass == 0.0),
        }
    }

    /// (c, γ) when ψ(λ) = c·λ^γ exactly.
    pub fn power_law(&self) -> Option<(f64, f64)> {
        if self.alpha != 0.0 {
            return None;
        }
        match &self.levy {
            Levy::None {} if self.beta > 0.0 => Some((self.beta, 2.0)),
            Levy::Stable { coefficient, index } if self.beta == 0.0 => Some((*coefficient, *index)),
            _ => None,
        }
    }

    pub fn psi(&self, lam: f64) -> f64 {
        let mut v = self.alpha * lam + self.beta * lam * lam;
        match &self.levy {
            Levy::None {} => {}
            Levy::Stable { coefficient, index } => v += coefficient * lam.powf(*index),
            Levy::Tabulated { atoms } => {
                for a in atoms {
                    v += a.mass * em1x(lam * a.jump);
                }
            }
        }
        v
    }

    pub fn psi_prime(&self, lam: f64) -> f64 {
        let mut v = self.alpha + 2.0 * self.beta * lam;
        match &self.levy {
            Levy::None {} => {}
            Levy::Stable { coefficient, index } => v += coefficient * index * lam.powf(index - 1.0),
            Levy::Tabulated { atoms } => {
                for a in atoms {
                    v += a.mass * a.jump * -(-lam * a.jump).exp_m1();
                }
            }
        }
        v
    }

    pub fn psi_second(&self, lam: f64) -> f64 {
        let mut v = 2.0 * self.beta;
        match &self.levy {
            Levy::None {} => {}
            Levy::Stable { coefficient, index } => v += coefficient * index * (index - 1.0) * lam.powf(index - 2.0),
            Levy::Tabulated { atoms } => {
                for a in atoms {
                    v += a.mass * a.jump * a.jump * (-lam * a.jump).exp();
                }
            }
        }
        v
    }

    /// ψ̃(λ) = ψ(λ)/λ, with ψ̃(0) = α.
    pub fn psi_tilde(&self, lam: f64) -> f64 {
        if lam == 0.0 {
            self.alpha
        } else {
            self.psi(lam) / lam
        }
    }

    /// ψ* = ψ − αλ.
    pub fn psi_star(&self, lam: f64) -> f64 {
        self.psi(lam) - self.alpha * lam
    }

    /// ψ*′ = ψ′ − α, the Laplace exponent of the spine subordinator.
    pub fn psi_star_prime(&self, lam: f64) -> f64 {
        self.psi_prime(lam) - self.alpha
    }

    /// Supremum of ψ′ on [0, ∞).
    pub fn psi_prime_sup(&self) -> f64 {
        if self.beta > 0.0 {
            return f64::INFINITY;
        }
        match &self.levy {
            Levy::None {} => self.alpha,
            Levy::Stable { .. } => f64::INFINITY,
            Levy::Tabulated { atoms } => self.alpha + atoms.iter().map(|a| a.mass * a.jump).sum::<f64>(),
        }
    }

    pub fn psi_inv(&self, y: f64) -> Result<f64> {
        if let Some((c, g)) = self.power_law() {
            if y < 0.0 {
                return domain("psi inverse needs y >= 0");
            }
            return Ok((y / c).powf(1.0 / g));
        }
        self.invert(Which::Psi, y)
    }

    pub fn psi_prime_inv(&self, y: f64) -> Result<f64> {
        self.invert(Which::PsiPrime, y)
    }

    /// φ(λ) = ψ′(ψ⁻¹(λ)).
    pub fn phi(&self, lam: f64) -> f64 {
        match self.psi_inv(lam) {
            Ok(x) => self.psi_prime(x),
            Err(_) => f64::NAN,
        }
    }

    /// φ*(λ) = ψ*′(ψ⁻¹(λ)).
    pub fn phi_star(&self, lam: f64) -> f64 {
        self.phi(lam) - self.alpha
    }

    /// φ⁻¹(y) = ψ(ψ′⁻¹(y)), defined for y ≥ α.
    pub fn phi_inv(&self, y: f64) -> Result<f64> {
        if y < self.alpha {
            return domain(format!("phi inverse needs y >= alpha = {}", self.alpha));
        }
        if let Some((c, g)) = self.power_law() {
            // φ(λ) = γ c^{1/γ} λ^{(γ−1)/γ}
            return Ok((y / (g * c.powf(1.0 / g))).powf(g / (g - 1.0)));
        }
        Ok(self.psi(self.psi_prime_inv(y)?))
    }

    /// Inverse of ψ, ψ′ or φ by bracketing bisection.
    pub fn invert(&self, which: Which, y: f64) -> Result<f64> {
        if !y.is_finite() {
            return domain("cannot invert a non-finite value");
        }
        match which {
            Which::Psi => {
                if y < 0.0 {
                    return domain("psi inverse needs y >= 0");
                }
                bisect_increasing(|x| self.psi(x), y, 0.0)
            }
            Which::PsiPrime => {
                if y < self.alpha {
                    return domain(format!("psi' inverse needs y >= alpha = {}", self.alpha));
                }
                if y >= self.psi_prime_sup() {
                    return domain("value above the range of psi'");
                }
                bisect_increasing(|x| self.psi_prime(x), y, self.alpha)
            }
            Which::Phi => {
                if y < self.alpha {
                    return domain(format!("phi inverse needs y >= alpha = {}", self.alpha));
                }
                if y >= self.psi_prime_sup() {
                    return domain("value above the range of phi");
                }
                bisect_increasing(|x| self.phi(x), y, self.alpha)
            }
        }
    }

    pub fn psi_eval(&self, lam: f64) -> Result<f64> {
        check_lam(lam)?;
        Ok(self.psi(lam))
    }

    pub fn psi_prime_eval(&self, lam: f64) -> Result<f64> {
        check_lam(lam)?;
        Ok(self.psi_prime(lam))
    }

    pub fn phi_eval(&self, lam: f64) -> Result<f64> {
        check_lam(lam)?;
        Ok(self.psi_prime(self.psi_inv(lam)?))
    }

    /// (ψ(λ1) − ψ(λ2))/(λ1 − λ2), or ψ′(λ1) on the diagonal.
    pub fn divided_difference(&self, lam1: f64, lam2: f64) -> Result<f64> {
        check_lam(lam1)?;
        check_lam(lam2)?;
        if (lam1 - lam2).abs() <= 1e-12 * lam1.max(1.0) {
            return Ok(self.psi_prime(lam1));
        }
        Ok((self.psi(lam1) - self.psi(lam2)) / (lam1 - lam2))
    }

    /// μ_{r,q} = φ⁻¹(q·(loglog(1/r)/r)²).
    pub fn mu_rq(&self, r: f64, q: f64) -> Result<f64> {
        if !(r > 0.0 && r < e_to_minus_e()) {
            return domain("mu_rq needs 0 < r < e^-e");
        }
        if !(q >= 1.0) {
            return domain("mu_rq needs q >= 1");
        }
        let s = loglog_inv(r) / r;
        self.phi_inv(q * s * s)
    }
}

fn check_lam(lam: f64) -> Result<()> {
    if lam >= 0.0 && lam.is_finite() {
        Ok(())
    } else {
        domain(format!("lambda must be finite and nonnegative, got {lam}"))
    }
}

/// Solve f(x) = y for increasing f with f(0) = f0 ≤ y.
fn bisect_increasing(f: impl Fn(f64) -> f64, y: f64, f0: f64) -> Result<f64> {
    if y <= f0 {
        return Ok(0.0);
    }
    let (mut lo, mut hi);
    let mut x = 1.0_f64;
    if f(x) < y {
        loop {
            x *= 2.0;
            if x > 1e300 {
                return domain("value above the numerical range of the function");
            }
            if f(x) >= y {
                break;
            }
        }
        lo = x / 2.0;
        hi = x;
    } else {
        loop {
            x /= 2.0;
            if x < 1e-300 {
                return Ok(x);
            }
            if f(x) <= y {
                break;
            }
        }
        lo = x;
        hi = 2.0 * x;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (elo, ehi) = ((f(lo) - y).abs(), (f(hi) - y).abs());
    let best = if elo <= ehi { lo } else { hi };
    let err = elo.min(ehi);
    if err > INVERT_RTOL * y && err > 8.0 * f64::EPSILON * y.max(1.0) {
        return Err(Error::Numerical(format!("inversion residual {err:e} at y = {y:e}")));
    }
    Ok(best)
}

/// A gauge function r ↦ h(r) defined near 0.
pub trait Gauge: Sync {
    fn eval(&self, r: f64) -> Result<f64>;
    /// Supremum of the admissible radii.
    fn domain_bound(&self) -> f64;
}

/// h(r) = constant·r^exponent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerGauge {
    pub constant: f64,
    pub exponent: f64,
}

impl Gauge for PowerGauge {
    fn eval(&self, r: f64) -> Result<f64> {
        if r <= 0.0 {
            return domain("power gauge needs r > 0");
        }
        Ok(self.constant * r.powf(self.exponent))
    }
    fn domain_bound(&self) -> f64 {
        f64::INFINITY
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GaugeKind {
    G,
    K,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaugeFunction {
    pub mechanism: BranchingMechanism,
    pub kind: GaugeKind,
    pub r0: f64,
}

impl GaugeFunction {
    pub fn new(mechanism: BranchingMechanism, kind: GaugeKind) -> Self {
        let ee = e_to_minus_e();
        let a = mechanism.alpha;
        let r0 = match kind {
            GaugeKind::G if a > 0.0 => ee.min(a.powf(-0.5)),
            GaugeKind::K if a > 0.0 => ee.min(1.0 / a),
            _ => ee,
        };
        GaugeFunction { mechanism, kind, r0 }
    }

    pub fn g(mechanism: BranchingMechanism) -> Self {
        Self::new(mechanism, GaugeKind::G)
    }

    pub fn k(mechanism: BranchingMechanism) -> Self {
        Self::new(mechanism, GaugeKind::K)
    }

    /// g(2r)/g(r).
    pub fn doubling_ratio(&self, r: f64) -> Result<f64> {
        Ok(self.eval(2.0 * r)? / self.eval(r)?)
    }
}

impl Gauge for GaugeFunction {
    fn eval(&self, r: f64) -> Result<f64> {
        if !(r > 0.0 && r < self.r0) {
            return domain(format!("gauge needs 0 < r < {}, got {r}", self.r0));
        }
        let l = loglog_inv(r);
        let arg = match self.kind {
            GaugeKind::G => (l / r) * (l / r),
            GaugeKind::K => l / r,
        };
        Ok(l / self.mechanism.phi_inv(arg)?)
    }
    fn domain_bound(&self) -> f64 {
        self.r0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExponentMethod {
    Analytic,
    Fitted,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentGrid {
    pub lam_min: f64,
    pub lam_max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentReport {
    pub gamma_lower: f64,
    pub eta_upper: f64,
    /// Absent when only a fit is available.
    pub delta: Option<f64>,
    pub method: ExponentMethod,
    pub grid: (f64, f64, usize),
}

impl ExponentGrid {
    fn points(&self) -> Result<Vec<f64>> {
        if !(self.lam_min > 0.0 && self.lam_max / self.lam_min >= 1e6 * (1.0 - 1e-12)) {
            return invalid("exponent grid must span at least six decades");
        }
        let mut v = vec![self.lam_min];
        while *v.last().unwrap() * 2.0 <= self.lam_max * (1.0 + 1e-12) {
            v.push(v.last().unwrap() * 2.0);
        }
        Ok(v)
    }
}

/// Power exponents γ, η, δ; analytic for power-type families, fitted otherwise.
pub fn exponents(mech: &BranchingMechanism, grid: &ExponentGrid) -> Result<ExponentReport> {
    let pts = grid.points()?;
    let g = match (&mech.levy, mech.beta > 0.0) {
        (_, true) => Some(2.0),
        (Levy::Stable { index, .. }, false) => Some(*index),
        (Levy::None {}, false) => Some(1.0),
        (Levy::Tabulated { .. }, false) => None,
    };
    match g {
        Some(g) if !matches!(mech.levy, Levy::Tabulated { .. }) => Ok(ExponentReport {
            gamma_lower: g,
            eta_upper: g,
            delta: Some(g),
            method: ExponentMethod::Analytic,
            grid: (grid.lam_min, grid.lam_max, pts.len()),
        }),
        _ => fit_exponents(mech, grid),
    }
}

/// Extremes of the two-point log-slopes of ψ over the upper half (in log scale)
/// of a dyadic grid. δ is not fitted.
pub fn fit_exponents(mech: &BranchingMechanism, grid: &ExponentGrid) -> Result<ExponentReport> {
    let pts = grid.points()?;
    let start = pts.len() / 2;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for w in pts[start..].windows(2) {
        let s = (mech.psi(w[1]) / mech.psi(w[0])).ln() / (w[1] / w[0]).ln();
        lo = lo.min(s);
        hi = hi.max(s);
    }
    Ok(ExponentReport {
        gamma_lower: lo,
        eta_upper: hi,
        delta: None,
        method: ExponentMethod::Fitted,
        grid: (grid.lam_min, grid.lam_max, pts.len()),
    })
}

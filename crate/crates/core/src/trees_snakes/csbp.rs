use rand::Rng;
use serde::{Deserialize, Serialize};

use super::OffspringLaw;
use crate::error::{domain, Error, Result};
use crate::mechanism::BranchingMechanism;
use crate::ode::{self, Stop, Tolerances};

pub const POPULATION_CAP: u64 = 100_000_000;

/// Scaled generation sizes Z_{kΔ} = X_k/n_scale of a GW forest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsbpPath {
    pub x0: f64,
    /// Time carried by one generation.
    pub delta: f64,
    pub times: Vec<f64>,
    pub z: Vec<f64>,
    pub law: String,
}

impl CsbpPath {
    /// Z at time t, constant between generations.
    pub fn at(&self, t: f64) -> f64 {
        let k = ((t / self.delta) + 1e-9).floor().max(0.0) as usize;
        self.z[k.min(self.z.len() - 1)]
    }
}

/// ⌈x0·n_scale⌉ independent lineages of the offspring law matched to ψ. With
/// c_L the walk constant of the law, n^{γ−1}·c_ψ/c_L generations make one unit of
/// time, so that Z converges to the ψ-CSBP started at x0.
pub fn csbp_from_gw<R: Rng + ?Sized>(
    mech: &BranchingMechanism,
    x0: f64,
    horizon: f64,
    n_scale: u64,
    rng: &mut R,
) -> Result<CsbpPath> {
    if !(x0 >= 0.0 && horizon > 0.0) || n_scale == 0 {
        return domain("csbp_from_gw needs x0 ≥ 0, horizon > 0 and n_scale ≥ 1");
    }
    let (law, c_psi, g) = OffspringLaw::for_mechanism(mech)?;
    let n = n_scale as f64;
    let delta = n.powf(1.0 - g) * law.walk_constant() / c_psi;
    let steps = (horizon / delta).ceil() as usize;
    let mut count = (x0 * n).ceil() as u64;
    if count > POPULATION_CAP {
        return Err(Error::Budget(format!("initial population {count} above the cap")));
    }
    let mut times = Vec::with_capacity(steps + 1);
    let mut z = Vec::with_capacity(steps + 1);
    times.push(0.0);
    z.push(count as f64 / n);
    for k in 1..=steps {
        count = law.sample_sum(count, rng);
        if count > POPULATION_CAP {
            return Err(Error::Budget(format!("population {count} above the cap at generation {k}")));
        }
        times.push(k as f64 * delta);
        z.push(count as f64 / n);
    }
    Ok(CsbpPath { x0, delta, times, z, law: law.id() })
}

/// u_t solving du/dt = −ψ(u), u_0 = λ, so that E[e^{−λZ_t}] = e^{−x0·u_t}.
pub fn csbp_laplace_ode(mech: &BranchingMechanism, lam: f64, t: f64) -> Result<f64> {
    if !(lam >= 0.0 && t >= 0.0) {
        return domain("csbp_laplace_ode needs λ ≥ 0 and t ≥ 0");
    }
    if t == 0.0 || lam == 0.0 {
        return Ok(lam);
    }
    let out = ode::integrate(
        |_, u: &[f64; 1]| [-mech.psi(u[0].max(0.0))],
        0.0,
        [lam],
        t,
        t * 1e-3,
        Tolerances::default(),
        |_, _| Stop::Continue,
    )?;
    Ok(out.y[0])
}

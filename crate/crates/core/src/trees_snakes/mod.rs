//! Discretized Lévy trees and Brownian snakes: conditioned Galton–Watson
//! contours as height excursions, tree distances and ball masses, the snake
//! driven by a height function, its occupation measure, and CSBP paths.

mod csbp;
mod offspring;
mod snake;

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{domain, Error, Result};
use crate::mechanism::BranchingMechanism;
pub use csbp::{csbp_from_gw, csbp_laplace_ode, CsbpPath, POPULATION_CAP};
pub use offspring::{zeta, OffspringLaw};
pub use snake::{first_hitting, occupation_and_range, sample_snake, OccupationCloud, SnakeSample};

pub const REJECTION_BUDGET: u64 = 100_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExcursionProvenance {
    pub law: String,
    /// Number of tree vertices N.
    pub vertices: u64,
    /// Time carried by one vertex; σ = N·tau.
    pub tau: f64,
    /// Continuum height of one tree generation.
    pub height_unit: f64,
    /// c_ψ/c_L, the ratio of the mechanism's constant to the walk constant.
    pub kappa: f64,
    pub tries: u64,
}

/// Height function on the uniform grid t_i = i·dt of [0, σ].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeightExcursion {
    pub dt: f64,
    pub heights: Vec<f64>,
    pub sigma: f64,
    pub provenance: Option<ExcursionProvenance>,
}

impl HeightExcursion {
    /// An excursion from explicit heights on a grid of step dt.
    pub fn from_heights(heights: Vec<f64>, dt: f64) -> Result<Self> {
        if heights.len() < 2 || !(dt > 0.0) {
            return domain("an excursion needs at least two grid points and dt > 0");
        }
        if heights.iter().any(|h| !(h.is_finite() && *h >= 0.0)) {
            return domain("heights must be finite and nonnegative");
        }
        let sigma = dt * (heights.len() - 1) as f64;
        Ok(HeightExcursion { dt, heights, sigma, provenance: None })
    }

    pub fn len(&self) -> usize {
        self.heights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heights.is_empty()
    }

    /// Mass carried by each grid point; the weights sum to σ.
    pub fn point_weight(&self) -> f64 {
        self.sigma / self.heights.len() as f64
    }

    pub fn max_height(&self) -> f64 {
        self.heights.iter().copied().fold(0.0, f64::max)
    }

    /// CSV `t,H`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t", "H"])?;
        for (i, h) in self.heights.iter().enumerate() {
            wr.write_record([format!("{:e}", i as f64 * self.dt), format!("{h:e}")])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Preorder offspring counts of a GW tree with between n and 2n vertices,
/// by rejection on the Lukasiewicz walk.
fn conditioned_offspring<R: Rng + ?Sized>(law: &OffspringLaw, n: u64, rng: &mut R) -> Result<(Vec<u64>, u64)> {
    let cap = 2 * n;
    let mut nu = Vec::with_capacity(cap as usize);
    for tries in 1..=REJECTION_BUDGET {
        nu.clear();
        let mut walk: i64 = 0;
        loop {
            let v = law.sample(rng);
            if v > cap {
                break;
            }
            nu.push(v);
            walk += v as i64 - 1;
            if walk < 0 || nu.len() as u64 > cap {
                break;
            }
        }
        if walk < 0 && nu.len() as u64 >= n {
            return Ok((nu, tries));
        }
    }
    Err(Error::Budget(format!("no tree with {n} to {} vertices in {REJECTION_BUDGET} tries", 2 * n)))
}

/// Contour of the planted tree: 2N unit steps, 0 at both ends and positive inside.
fn contour(nu: &[u64]) -> Vec<u32> {
    let mut out = Vec::with_capacity(2 * nu.len() + 1);
    out.push(0);
    let mut h = 0u32;
    let mut stack: Vec<u64> = Vec::new();
    for &k in nu {
        h += 1;
        out.push(h);
        stack.push(k);
        while let Some(top) = stack.last_mut() {
            if *top == 0 {
                stack.pop();
                h -= 1;
                out.push(h);
            } else {
                *top -= 1;
                break;
            }
        }
    }
    out
}

/// Height excursion from the contour of a GW tree conditioned on N ∈ [n, 2n],
/// with vertex time τ = 1/n_target and height unit τ^{1−1/γ}/(c_ψ/c_L)^{1/γ}.
/// With `sigma_floor`, trees are resampled until σ exceeds it.
pub fn sample_height_excursion<R: Rng + ?Sized>(
    mech: &BranchingMechanism,
    n_target: u64,
    rng: &mut R,
    sigma_floor: Option<f64>,
) -> Result<HeightExcursion> {
    if n_target < 100 {
        return domain("n_target must be at least 100");
    }
    let (law, c_psi, g) = OffspringLaw::for_mechanism(mech)?;
    let tau = 1.0 / n_target as f64;
    let kappa = c_psi / law.walk_constant();
    if let Some(f) = sigma_floor {
        if f >= 2.0 * n_target as f64 * tau {
            return domain("sigma_floor is above the largest reachable duration");
        }
    }
    let mut tries = 0;
    loop {
        let (nu, t) = conditioned_offspring(&law, n_target, rng)?;
        tries += t;
        let sigma = nu.len() as f64 * tau;
        if sigma_floor.is_some_and(|f| sigma <= f) {
            if tries > REJECTION_BUDGET {
                return Err(Error::Budget("sigma floor not reached within the rejection budget".into()));
            }
            continue;
        }
        return Ok(scaled_contour(&law, &nu, tau, kappa, g, tries));
    }
}

/// Excursion of prescribed duration σ: a tree conditioned on N ∈ [n, 2n] with
/// vertex time σ/N, which is the scaling H ↦ σ^{1−1/γ}H(·/σ) of a tree of unit
/// vertex count.
pub fn sample_excursion_with_duration<R: Rng + ?Sized>(
    mech: &BranchingMechanism,
    sigma: f64,
    n: u64,
    rng: &mut R,
) -> Result<HeightExcursion> {
    if !(sigma > 0.0 && sigma.is_finite()) || n < 1 {
        return domain("need a finite duration σ > 0 and n ≥ 1");
    }
    let (law, c_psi, g) = OffspringLaw::for_mechanism(mech)?;
    let kappa = c_psi / law.walk_constant();
    let (nu, tries) = conditioned_offspring(&law, n, rng)?;
    let tau = sigma / nu.len() as f64;
    let mut e = scaled_contour(&law, &nu, tau, kappa, g, tries);
    e.sigma = sigma;
    Ok(e)
}

fn scaled_contour(law: &OffspringLaw, nu: &[u64], tau: f64, kappa: f64, g: f64, tries: u64) -> HeightExcursion {
    let unit = tau.powf(1.0 - 1.0 / g) / kappa.powf(1.0 / g);
    let heights = contour(nu).into_iter().map(|k| k as f64 * unit).collect();
    HeightExcursion {
        dt: tau / 2.0,
        heights,
        sigma: nu.len() as f64 * tau,
        provenance: Some(ExcursionProvenance {
            law: law.id(),
            vertices: nu.len() as u64,
            tau,
            height_unit: unit,
            kappa,
            tries,
        }),
    }
}

/// d(s, t) = H_s + H_t − 2 min_{[s∧t, s∨t]} H.
pub fn tree_distance(h: &[f64], s: usize, t: usize) -> f64 {
    let (a, b) = if s <= t { (s, t) } else { (t, s) };
    let m = h[a..=b].iter().copied().fold(f64::INFINITY, f64::min);
    h[s] + h[t] - 2.0 * m
}

/// Mass of the tree ball of radius r around the point of grid index t.
pub fn ball_mass(exc: &HeightExcursion, t: usize, r: f64) -> f64 {
    let h = &exc.heights;
    let ht = h[t];
    let slack = 1e-12 * (ht + r);
    let mut count = 0usize;
    let mut m = ht;
    for s in t..h.len() {
        m = m.min(h[s]);
        // once the running minimum drops below H_t − r every later point is farther;
        // the slack keeps ties at r decided by the distance itself
        if ht - m > r + slack {
            break;
        }
        if h[s] + ht - 2.0 * m <= r {
            count += 1;
        }
    }
    m = ht;
    for s in (0..t).rev() {
        m = m.min(h[s]);
        if ht - m > r + slack {
            break;
        }
        if h[s] + ht - 2.0 * m <= r {
            count += 1;
        }
    }
    count as f64 * exc.point_weight()
}

/// N(σ > t) for quadratic and stable mechanisms: with ψ⁻¹(λ) = c^{−1/γ}λ^{1/γ},
/// the duration tail is c^{−1/γ} t^{−1/γ}/Γ(1 − 1/γ).
pub fn sigma_tail(mech: &BranchingMechanism, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return domain("t must be positive");
    }
    let (c, g) = mech
        .power_law()
        .ok_or_else(|| Error::Unsupported("sigma_tail needs a quadratic or stable mechanism".into()))?;
    let a = 1.0 / g;
    Ok(c.powf(-a) * t.powf(-a) / gamma(1.0 - a))
}

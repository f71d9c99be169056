use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_lr;

use super::{sample_last_exits, GraftingSubordinator, SpineSample};
use crate::error::{domain, Error, Result};
use crate::mechanism::{BranchingMechanism, Gauge, GaugeFunction};
use crate::rng::seed_stream;
use crate::trees_snakes::{sample_excursion_with_duration, sample_snake, sigma_tail, SnakeSample};

pub const MAX_EXPECTED_GRAFTS: f64 = 1e6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Graft {
    pub t: f64,
    /// Spine grid index of the graft point.
    pub index: usize,
    pub sigma: f64,
    pub snake: SnakeSample,
}

/// Grafts with σ > ε_trunc along a spine, sorted by time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraftedForest {
    pub grafts: Vec<Graft>,
    pub eps_trunc: f64,
    pub expected_count: f64,
    pub v_a: f64,
    pub a: f64,
    pub mechanism: BranchingMechanism,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestSummary {
    pub count: usize,
    pub sigma_total: f64,
    pub eps_trunc: f64,
}

impl GraftedForest {
    pub fn summary(&self) -> ForestSummary {
        ForestSummary {
            count: self.grafts.len(),
            sigma_total: self.grafts.iter().map(|g| g.sigma).sum(),
            eps_trunc: self.eps_trunc,
        }
    }

    /// The grafts with t_j ≤ a.
    pub fn until(&self, a: f64) -> GraftedForest {
        GraftedForest {
            grafts: self.grafts.iter().filter(|g| g.t <= a).cloned().collect(),
            a: a.min(self.a),
            ..self.clone()
        }
    }
}

/// Poisson forest with intensity dV_t N_{ξ_t}(dW ; σ > ε): the count has mean
/// V_a·N(σ > ε), graft times are drawn from dV/V_a at spine grid resolution,
/// durations from the normalised tail (σ/ε)^{−1/γ}, and each tree is a
/// conditioned GW tree of n to 2n vertices rescaled to that duration.
pub fn graft<R: Rng + ?Sized>(
    spine: &SpineSample,
    eps_trunc: f64,
    n_vertices: u64,
    rng: &mut R,
) -> Result<GraftedForest> {
    if !(eps_trunc > 0.0) {
        return domain("eps_trunc must be positive");
    }
    let mech = &spine.mechanism;
    let (_, g) =
        mech.power_law().ok_or_else(|| Error::Unsupported("grafting needs a quadratic or stable mechanism".into()))?;
    let v_a = spine.v_total();
    let expected = v_a * sigma_tail(mech, eps_trunc)?;
    if expected > MAX_EXPECTED_GRAFTS {
        return Err(Error::Budget(format!("eps_trunc = {eps_trunc} gives {expected:.3e} expected grafts")));
    }
    let count = if expected > 0.0 { Poisson::new(expected).unwrap().sample(rng) as usize } else { 0 };
    let plan: Vec<(usize, f64, u64)> = (0..count)
        .map(|_| {
            let u = v_a * (1.0 - rng.gen::<f64>());
            let k = spine.v.partition_point(|&v| v < u).clamp(1, spine.len() - 1);
            let sigma = eps_trunc * (1.0 - rng.gen::<f64>()).powf(-g);
            (k, sigma, rng.gen::<u64>())
        })
        .collect();
    let mut grafts = plan
        .into_par_iter()
        .map(|(k, sigma, seed)| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            let exc = sample_excursion_with_duration(mech, sigma, n_vertices, &mut r)?;
            let snake = sample_snake(&exc, spine.point(k), &mut r)?;
            Ok(Graft { t: spine.time(k), index: k, sigma, snake })
        })
        .collect::<Result<Vec<_>>>()?;
    grafts.sort_by(|a, b| a.t.total_cmp(&b.t));
    Ok(GraftedForest { grafts, eps_trunc, expected_count: expected, v_a, a: spine.a, mechanism: mech.clone() })
}

/// ℳ*_a(B(0, r)) on a grid, with the ratio to g(r) where g is defined.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PalmProfile {
    pub r: Vec<f64>,
    pub mass: Vec<f64>,
    pub ratio: Vec<Option<f64>>,
}

impl PalmProfile {
    /// CSV `r,mass,ratio`; the ratio is empty outside the gauge's domain.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["r", "mass", "ratio"])?;
        for i in 0..self.r.len() {
            let ratio = self.ratio[i].map(|v| format!("{v:e}")).unwrap_or_default();
            wr.write_record([format!("{:e}", self.r[i]), format!("{:e}", self.mass[i]), ratio])?;
        }
        wr.flush()?;
        Ok(())
    }
}

pub fn palm_mass_profile(forest: &GraftedForest, r_grid: &[f64]) -> Result<PalmProfile> {
    if r_grid.is_empty() || r_grid.iter().any(|r| !(*r >= 0.0)) {
        return domain("palm_mass_profile needs a nonempty grid of radii r ≥ 0");
    }
    let mut atoms: Vec<(f64, f64)> = Vec::new();
    for gr in &forest.grafts {
        let w = gr.snake.excursion.point_weight();
        atoms.extend((0..gr.snake.len()).map(|i| (gr.snake.endpoint(i).iter().map(|x| x * x).sum::<f64>(), w)));
    }
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut cum = Vec::with_capacity(atoms.len());
    let mut acc = 0.0;
    for &(_, w) in &atoms {
        acc += w;
        cum.push(acc);
    }
    let gauge = GaugeFunction::g(forest.mechanism.clone());
    let mut mass = Vec::with_capacity(r_grid.len());
    let mut ratio = Vec::with_capacity(r_grid.len());
    for &r in r_grid {
        let k = atoms.partition_point(|a| a.0 <= r * r);
        let m = if k == 0 { 0.0 } else { cum[k - 1] };
        mass.push(m);
        ratio.push(gauge.eval(r).ok().map(|g| m / g));
    }
    Ok(PalmProfile { r: r_grid.to_vec(), mass, ratio })
}

/// Grafts with t_j ∈ (s, t) whose range meets B̄(0, r).
pub fn count_hitting(forest: &GraftedForest, r: f64, s: f64, t: f64) -> Result<usize> {
    if !(r >= 0.0) || s > t {
        return domain("count_hitting needs r ≥ 0 and s ≤ t");
    }
    let r2 = r * r;
    Ok(forest
        .grafts
        .iter()
        .filter(|g| g.t > s && g.t < t)
        .filter(|g| (0..g.snake.len()).any(|i| g.snake.endpoint(i).iter().map(|x| x * x).sum::<f64>() <= r2))
        .count())
}

/// ∫_{(0,ε]} (1 − e^{−λs}) n(ds): the part of ψ⁻¹(λ) carried by the truncated
/// grafts. With N(σ > s) = K s^{−1/γ}, it equals
/// (λ/c)^{1/γ}·P(1 − 1/γ, λε) − (1 − e^{−λε})·N(σ > ε).
pub fn truncation_exponent(mech: &BranchingMechanism, lam: f64, eps: f64) -> Result<f64> {
    let (c, g) = mech
        .power_law()
        .ok_or_else(|| Error::Unsupported("truncation_exponent needs a quadratic or stable mechanism".into()))?;
    if !(lam >= 0.0 && eps > 0.0) {
        return domain("truncation_exponent needs λ ≥ 0 and ε > 0");
    }
    if lam == 0.0 {
        return Ok(0.0);
    }
    let a = 1.0 / g;
    Ok((lam / c).powf(a) * gamma_lr(1.0 - a, lam * eps) + (-lam * eps).exp_m1() * sigma_tail(mech, eps)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TGammaRow {
    pub r: f64,
    /// Mean and standard error of e^{−λT} over the truncated forest.
    pub raw_mean: f64,
    pub raw_se: f64,
    /// Mean and standard error of e^{−λT − V_{γ(r)}·m_ε(λ)}, which restores the
    /// grafts below the truncation in expectation.
    pub corrected_mean: f64,
    pub corrected_se: f64,
    /// e^{−r·√(2ψ*′(ψ⁻¹(λ)))}.
    pub target: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TGammaReport {
    pub lam: f64,
    pub eps_trunc: f64,
    pub replicas: usize,
    /// m_ε(λ), the truncation exponent.
    pub correction_exponent: f64,
    /// Replicas whose expected graft count exceeded the cap; their T is taken as +∞.
    pub saturated: usize,
    pub rows: Vec<TGammaRow>,
}

/// T_{γ(r)}, the total duration of the grafts before the last exit γ(r), for
/// each radius of an increasing grid. Replica k draws from stream (seed, k).
pub fn t_gamma_samples(
    mech: &BranchingMechanism,
    d: usize,
    r_grid: &[f64],
    replicas: usize,
    lam: f64,
    eps_trunc: f64,
    seed: u64,
) -> Result<TGammaReport> {
    if d < 4 || replicas < 2 || !(lam > 0.0) {
        return domain("t_gamma_samples needs d ≥ 4, at least two replicas and λ > 0");
    }
    let sub = GraftingSubordinator::for_mechanism(mech)?;
    let (_, g) = mech.power_law().unwrap();
    let tail = sigma_tail(mech, eps_trunc)?;
    let m_eps = truncation_exponent(mech, lam, eps_trunc)?;
    let samples = (0..replicas)
        .into_par_iter()
        .map(|k| {
            let mut rng = seed_stream(seed, k as u64);
            let exits = sample_last_exits(r_grid, &mut rng)?;
            let mut out = Vec::with_capacity(r_grid.len());
            let (mut v, mut t_sum, mut prev, mut saturated) = (0.0, 0.0, 0.0, false);
            for &gam in &exits {
                if !saturated && gam > prev {
                    let dv = sub.increment(gam - prev, &mut rng);
                    v += dv;
                    let mean = dv * tail;
                    if v * tail > MAX_EXPECTED_GRAFTS {
                        saturated = true;
                    } else if mean > 0.0 && lam * t_sum < 745.0 {
                        let n = Poisson::new(mean).unwrap().sample(&mut rng) as u64;
                        for _ in 0..n {
                            t_sum += eps_trunc * (1.0 - rng.gen::<f64>()).powf(-g);
                        }
                    }
                }
                prev = gam;
                let raw = if saturated { 0.0 } else { (-lam * t_sum).exp() };
                out.push((raw, if saturated { 0.0 } else { raw * (-v * m_eps).exp() }));
            }
            Ok((out, saturated))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = replicas as f64;
    let stats = |vals: &mut dyn Iterator<Item = f64>| {
        let (s1, s2) = vals.fold((0.0, 0.0), |(a, b), x| (a + x, b + x * x));
        let m = s1 / n;
        (m, ((s2 / n - m * m).max(0.0) / (n - 1.0)).sqrt())
    };
    let exponent = (2.0 * sub.exponent(mech.psi_inv(lam)?)).sqrt();
    let rows = r_grid
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let (raw_mean, raw_se) = stats(&mut samples.iter().map(|s| s.0[i].0));
            let (corrected_mean, corrected_se) = stats(&mut samples.iter().map(|s| s.0[i].1));
            TGammaRow { r, raw_mean, raw_se, corrected_mean, corrected_se, target: (-r * exponent).exp() }
        })
        .collect();
    Ok(TGammaReport {
        lam,
        eps_trunc,
        replicas,
        correction_exponent: m_eps,
        saturated: samples.iter().filter(|s| s.1).count(),
        rows,
    })
}

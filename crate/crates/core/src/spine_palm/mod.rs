//! The Palm picture seen from a typical point: a Brownian spine with a
//! grafting subordinator, Poisson forests of snakes along it, last-exit times
//! of the spine and the subordinator T_{γ(r)}.

mod forest;
mod ks;

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::mechanism::BranchingMechanism;
pub use forest::{
    count_hitting, graft, palm_mass_profile, t_gamma_samples, truncation_exponent, ForestSummary, Graft, GraftedForest,
    PalmProfile, TGammaReport, TGammaRow, MAX_EXPECTED_GRAFTS,
};
pub use ks::{ks_two_sample, KsResult};

/// Grafting subordinator: exponent ψ*′, a drift 2β for quadratic ψ and a
/// stable subordinator of index γ−1 with exponent cγλ^{γ−1} for stable ψ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GraftingSubordinator {
    Drift { rate: f64 },
    Stable { scale: f64, index: f64 },
}

impl GraftingSubordinator {
    pub fn for_mechanism(mech: &BranchingMechanism) -> Result<Self> {
        match mech.power_law() {
            Some((b, g)) if g == 2.0 => Ok(GraftingSubordinator::Drift { rate: 2.0 * b }),
            Some((c, g)) => Ok(GraftingSubordinator::Stable { scale: c * g, index: g - 1.0 }),
            None => Err(Error::Unsupported("the spine needs a quadratic or stable mechanism".into())),
        }
    }

    /// Laplace exponent ψ*′(λ).
    pub fn exponent(&self, lam: f64) -> f64 {
        match *self {
            GraftingSubordinator::Drift { rate } => rate * lam,
            GraftingSubordinator::Stable { scale, index } => scale * lam.powf(index),
        }
    }

    /// V_{t+dt} − V_t.
    pub fn increment<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R) -> f64 {
        match *self {
            GraftingSubordinator::Drift { rate } => rate * dt,
            GraftingSubordinator::Stable { scale, index } => {
                (scale * dt).powf(1.0 / index) * positive_stable(index, rng)
            }
        }
    }
}

/// X ≥ 0 with E[e^{−λX}] = e^{−λ^α}, 0 < α < 1, by the Chambers–Mallows–Stuck
/// formula in its totally skewed (Kanter) form.
pub fn positive_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let u = std::f64::consts::PI * (1.0 - rng.gen::<f64>());
    let w: f64 = rng.sample(Exp1);
    let a = (alpha * u).sin() / u.sin().powf(1.0 / alpha);
    let b = ((1.0 - alpha) * u).sin() / w;
    a * b.powf((1.0 - alpha) / alpha)
}

/// Spine ξ and grafting subordinator V on the grid kΔt of [0, a].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpineSample {
    pub d: usize,
    pub a: f64,
    pub dt: f64,
    /// Row-major ξ_k ∈ ℝ^d.
    pub xi: Vec<f64>,
    pub v: Vec<f64>,
    pub mechanism: BranchingMechanism,
    pub subordinator: GraftingSubordinator,
}

impl SpineSample {
    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.xi[k * self.d..(k + 1) * self.d]
    }

    pub fn time(&self, k: usize) -> f64 {
        (k as f64 * self.dt).min(self.a)
    }

    pub fn v_total(&self) -> f64 {
        *self.v.last().unwrap()
    }
}

pub fn sample_spine<R: Rng + ?Sized>(
    mech: &BranchingMechanism,
    d: usize,
    a: f64,
    grid_step: f64,
    rng: &mut R,
) -> Result<SpineSample> {
    if d == 0 || !(a > 0.0) || !(grid_step > 0.0 && grid_step <= a) {
        return domain("sample_spine needs d ≥ 1, a > 0 and 0 < grid_step ≤ a");
    }
    let sub = GraftingSubordinator::for_mechanism(mech)?;
    let steps = (a / grid_step).round().max(1.0) as usize;
    let dt = a / steps as f64;
    let sd = dt.sqrt();
    let mut xi = vec![0.0; d];
    let mut v = vec![0.0];
    for k in 0..steps {
        for j in 0..d {
            let x = xi[k * d + j] + sd * rng.sample::<f64, _>(StandardNormal);
            xi.push(x);
        }
        v.push(v[k] + sub.increment(dt, rng));
    }
    Ok(SpineSample { d, a, dt, xi, v, mechanism: mech.clone(), subordinator: sub })
}

/// Last-exit times at grid resolution: ϑ(r) for the full norm and γ(r) for the
/// norm of the first three coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExitRecord {
    pub r: Vec<f64>,
    pub theta: Vec<f64>,
    pub gamma: Vec<f64>,
    /// The spine ends within 4·max r of the origin, so later returns are possible.
    pub censored: bool,
}

pub fn last_exit(spine: &SpineSample, r_list: &[f64]) -> Result<ExitRecord> {
    if spine.d < 3 || r_list.iter().any(|r| !(*r >= 0.0)) {
        return domain("last_exit needs d ≥ 3 and radii r ≥ 0");
    }
    let mut theta = vec![0.0; r_list.len()];
    let mut gamma = vec![0.0; r_list.len()];
    let mut end3 = 0.0;
    for k in 0..spine.len() {
        let p = spine.point(k);
        let n3: f64 = p[..3].iter().map(|x| x * x).sum::<f64>().sqrt();
        let nd: f64 = (n3 * n3 + p[3..].iter().map(|x| x * x).sum::<f64>()).sqrt();
        let t = spine.time(k);
        for (i, &r) in r_list.iter().enumerate() {
            if nd <= r {
                theta[i] = t;
            }
            if n3 <= r {
                gamma[i] = t;
            }
        }
        end3 = n3;
    }
    let rmax = r_list.iter().copied().fold(0.0, f64::max);
    Ok(ExitRecord { r: r_list.to_vec(), theta, gamma, censored: end3 < 4.0 * rmax })
}

/// Relative step of the exit sampler: Δt = (h·ρ)² away from the origin.
const EXIT_STEP: f64 = 0.1;

/// γ(r) for each radius of an increasing list, from a 3-dimensional Brownian
/// motion started at 0 and run without horizon. Steps scale with the distance to
/// the origin, and crossings between grid points are caught by the bridge
/// probability exp(−2(ρ−r)(ρ′−r)/Δt). Once the radius reaches R = 10·r_max the
/// path returns to the sphere of radius r_max with probability r_max/R; the time
/// to get there is that of |B| from R to r_max, (R − r_max)²/Z².
pub fn sample_last_exits<R: Rng + ?Sized>(r_list: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    if r_list.windows(2).any(|w| w[0] > w[1]) || r_list.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
        return domain("radii must be finite, nonnegative and nondecreasing");
    }
    let mut last = vec![0.0; r_list.len()];
    let Some(&rmax) = r_list.last().filter(|r| **r > 0.0) else {
        return Ok(last);
    };
    let rmin = r_list.iter().copied().find(|r| *r > 0.0).unwrap();
    let big = 10.0 * rmax;
    let dt_min = (0.01 * EXIT_STEP * rmin).powi(2);
    let mut p = [0.0f64; 3];
    let mut rho = 0.0;
    let mut t = 0.0;
    loop {
        let dt = (EXIT_STEP * rho).powi(2).max(dt_min);
        let sd = dt.sqrt();
        for x in p.iter_mut() {
            *x += sd * rng.sample::<f64, _>(StandardNormal);
        }
        let rho2 = p.iter().map(|x| x * x).sum::<f64>().sqrt();
        let t2 = t + dt;
        // a 3-dimensional path never returns to the origin, so γ(0) = 0
        for (i, &r) in r_list.iter().enumerate().filter(|(_, r)| **r > 0.0) {
            if rho2 <= r {
                last[i] = t2;
            } else if rho <= r || rng.gen::<f64>() < (-2.0 * (rho - r) * (rho2 - r) / dt).exp() {
                last[i] = t + 0.5 * dt;
            }
        }
        rho = rho2;
        t = t2;
        if rho >= big {
            if rng.gen::<f64>() >= rmax / rho {
                return Ok(last);
            }
            let z: f64 = rng.sample(StandardNormal);
            t += ((rho - rmax) / z).powi(2);
            for x in p.iter_mut() {
                *x *= rmax / rho;
            }
            rho = rmax;
            for (i, &r) in r_list.iter().enumerate() {
                if r >= rmax {
                    last[i] = t;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seed_stream;

    #[test]
    fn quadratic_spine_has_deterministic_drift() {
        let mut rng = seed_stream(30, 0);
        let s = sample_spine(&BranchingMechanism::quadratic(1.0), 4, 1.0, 1e-3, &mut rng).unwrap();
        assert!((s.v_total() - 2.0).abs() < 1e-12);
        assert!(s.point(0).iter().all(|&x| x == 0.0));
        assert_eq!(s.len(), 1001);
        assert!(s.v.windows(2).all(|w| w[1] >= w[0]));
        assert!(sample_spine(&BranchingMechanism::new(1.0, 1.0, Default::default()).unwrap(), 4, 1.0, 0.1, &mut rng)
            .is_err());
    }

    #[test]
    fn positive_stable_laplace() {
        let mut rng = seed_stream(31, 0);
        let n = 100_000;
        for alpha in [0.3, 0.5, 0.8] {
            let v: Vec<f64> = (0..n).map(|_| (-positive_stable(alpha, &mut rng)).exp()).collect();
            let m = v.iter().sum::<f64>() / n as f64;
            let se = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n as f64 * (n as f64 - 1.0))).sqrt();
            assert!((m - (-1f64).exp()).abs() < 3.0 * se, "{alpha}: {m} ± {se}");
        }
    }

    #[test]
    fn stable_spine_laplace() {
        let mech = BranchingMechanism::stable(1.0, 1.5);
        let mut rng = seed_stream(32, 0);
        let n = 20_000;
        let v: Vec<f64> =
            (0..n).map(|_| (-sample_spine(&mech, 3, 1.0, 0.05, &mut rng).unwrap().v_total()).exp()).collect();
        let m = v.iter().sum::<f64>() / n as f64;
        let se = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n as f64 * (n as f64 - 1.0))).sqrt();
        assert!((m - (-1.5f64).exp()).abs() < 3.0 * se, "{m} ± {se}");
    }

    #[test]
    fn last_exit_examples() {
        let mut rng = seed_stream(33, 0);
        let s = sample_spine(&BranchingMechanism::quadratic(1.0), 5, 4.0, 1e-3, &mut rng).unwrap();
        let r = [0.0, 0.1, 0.2, 0.4, 0.8];
        let e = last_exit(&s, &r).unwrap();
        assert_eq!(e.theta[0], 0.0);
        assert_eq!(e.gamma[0], 0.0);
        for i in 0..r.len() {
            assert!(e.theta[i] <= e.gamma[i]);
            if i > 0 {
                assert!(e.theta[i] >= e.theta[i - 1] && e.gamma[i] >= e.gamma[i - 1]);
            }
        }
        let far = last_exit(&s, &[1e3]).unwrap();
        assert!(far.censored);
    }

    #[test]
    fn pitman_last_exit_laplace() {
        let reps = 10_000;
        let r = [0.5, 1.0];
        let mut sums = [(0.0, 0.0); 2];
        for k in 0..reps {
            let mut rng = seed_stream(34, k);
            let g = sample_last_exits(&r, &mut rng).unwrap();
            assert!(g[0] <= g[1]);
            for i in 0..2 {
                let v = (-g[i]).exp();
                sums[i].0 += v;
                sums[i].1 += v * v;
            }
        }
        for i in 0..2 {
            let n = reps as f64;
            let m = sums[i].0 / n;
            let se = ((sums[i].1 / n - m * m) / (n - 1.0)).sqrt();
            let target = (-r[i] * 2f64.sqrt()).exp();
            assert!((m - target).abs() < 3.0 * se, "r = {}: {m} ± {se} vs {target}", r[i]);
        }
    }

    #[test]
    fn exit_sampler_zero_radius() {
        let mut rng = seed_stream(35, 0);
        assert_eq!(sample_last_exits(&[0.0], &mut rng).unwrap(), vec![0.0]);
        assert_eq!(sample_last_exits(&[0.0, 0.5], &mut rng).unwrap()[0], 0.0);
        assert!(sample_last_exits(&[0.5, 0.2], &mut rng).is_err());
    }
}

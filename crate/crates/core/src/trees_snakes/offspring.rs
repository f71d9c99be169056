use rand::Rng;
use rand_distr::{Binomial, Distribution, Gamma, Poisson, Zeta};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::mechanism::BranchingMechanism;

/// Riemann ζ(s), s > 1, by Euler–Maclaurin summation.
pub fn zeta(s: f64) -> f64 {
    const N: usize = 64;
    let n = N as f64;
    let head: f64 = (1..N).map(|k| (k as f64).powf(-s)).sum();
    let t = n.powf(-s);
    head + n.powf(1.0 - s) / (s - 1.0) + 0.5 * t + s * t / (12.0 * n)
        - s * (s + 1.0) * (s + 2.0) * t / (720.0 * n.powi(3))
        + s * (s + 1.0) * (s + 2.0) * (s + 3.0) * (s + 4.0) * t / (30240.0 * n.powi(5))
}

/// Critical offspring laws matched to quadratic and stable mechanisms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "lowercase")]
pub enum OffspringLaw {
    /// P(ν = k) = 2^{−k−1}.
    Geometric,
    /// P(ν = k) = k^{−1−γ}/ζ(γ) for k ≥ 1 and P(ν = 0) = 1 − ζ(1+γ)/ζ(γ).
    Stable { gamma: f64 },
}

const HEAD: u64 = 64;

impl OffspringLaw {
    pub fn for_mechanism(mech: &BranchingMechanism) -> Result<(Self, f64, f64)> {
        match mech.power_law() {
            Some((c, g)) if g == 2.0 => Ok((OffspringLaw::Geometric, c, g)),
            Some((c, g)) => Ok((OffspringLaw::Stable { gamma: g }, c, g)),
            None => Err(Error::Unsupported("tree samplers need a quadratic or stable mechanism".into())),
        }
    }

    pub fn id(&self) -> String {
        match self {
            OffspringLaw::Geometric => "geometric(1/2)".into(),
            OffspringLaw::Stable { gamma } => format!("zeta-tail(gamma={gamma})"),
        }
    }

    /// c_L with −log E[e^{−θ(ν−1)}] ~ −c_L θ^γ as θ → 0, i.e. the Lukasiewicz
    /// walk lies in the domain of attraction of the exponent c_L λ^γ.
    pub fn walk_constant(&self) -> f64 {
        match self {
            // variance 2: ψ_L(λ) = σ²λ²/2 = λ²
            OffspringLaw::Geometric => 1.0,
            OffspringLaw::Stable { gamma: g } => gamma(-g) / zeta(*g),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match self {
            OffspringLaw::Geometric => {
                let mut k = 0;
                while rng.gen::<bool>() {
                    k += 1;
                }
                k
            }
            OffspringLaw::Stable { gamma: g } => {
                if rng.gen::<f64>() < zeta(1.0 + g) / zeta(*g) {
                    let z: f64 = Zeta::new(1.0 + g).expect("valid zeta parameter").sample(rng);
                    if z >= u64::MAX as f64 {
                        u64::MAX
                    } else {
                        z as u64
                    }
                } else {
                    0
                }
            }
        }
    }

    /// Total offspring of m individuals.
    pub fn sample_sum<R: Rng + ?Sized>(&self, m: u64, rng: &mut R) -> u64 {
        if m == 0 {
            return 0;
        }
        match self {
            // a sum of m geometric(1/2) variables is negative binomial: Poisson with Gamma(m, 1) rate
            OffspringLaw::Geometric => {
                let rate: f64 = Gamma::new(m as f64, 1.0).unwrap().sample(rng);
                if rate <= 0.0 {
                    return 0;
                }
                Poisson::new(rate).unwrap().sample(rng) as u64
            }
            OffspringLaw::Stable { gamma: g } => {
                let s = 1.0 + g;
                let zs = zeta(s);
                let mut left = Binomial::new(m, zs / zeta(*g)).unwrap().sample(rng);
                let mut mass = 1.0;
                let mut total = 0u64;
                for k in 1..=HEAD {
                    if left == 0 {
                        return total;
                    }
                    let p = (k as f64).powf(-s) / zs;
                    let c = Binomial::new(left, (p / mass).min(1.0)).unwrap().sample(rng);
                    total += c * k;
                    left -= c;
                    mass -= p;
                }
                for _ in 0..left {
                    total = total.saturating_add(sample_zeta_tail(s, HEAD + 1, rng));
                }
                total
            }
        }
    }
}

/// P(X = x) ∝ x^{−s} on x ≥ k0, by rejection from a discretized Pareto.
fn sample_zeta_tail<R: Rng + ?Sized>(s: f64, k0: u64, rng: &mut R) -> u64 {
    let g = s - 1.0;
    let k = k0 as f64;
    // p(x)/q(x) = x^{−s}/(x^{−g} − (x+1)^{−g}) up to constants, largest at x = k0
    let ratio = |x: f64| x.powf(-s) / (x.powf(-g) - (x + 1.0).powf(-g));
    let m = ratio(k);
    loop {
        let u: f64 = 1.0 - rng.gen::<f64>();
        let y = k * u.powf(-1.0 / g);
        if y >= u64::MAX as f64 {
            return u64::MAX;
        }
        let x = y.floor();
        if rng.gen::<f64>() * m <= ratio(x) {
            return x as u64;
        }
    }
}

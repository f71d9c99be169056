//! Deterministic checks of the analytic estimates: the integral I(v), radial
//! solutions of ½Δu = ψ(u), the radii sequences, subordinator tail bounds,
//! exit-time transforms and the F(μ, r, κ) algebra.

use serde::{Deserialize, Serialize};

mod explorer;
mod integral;
mod laplace;
mod radial;
mod radii;

pub use explorer::{cbp1, f_explorer, FExplorerReport};
pub use integral::{comparison_constant, integral_i, psi_increment};
pub use laplace::{
    exit_time_laplace, exit_time_monte_carlo, subordinator_series, subordinator_tail_bounds, ExitTimeReport,
    MonteCarloEstimate, SeriesReport, SeriesRow,
};
pub use radial::{
    keller_check, ode_residual, solve_radial_exterior, solve_radial_interior, KellerVerdict, ProfileKind, RadialProfile,
};
pub use radii::{
    lemma_constants, q_and_j, radii_theta, sn_sequence, LemmaConstants, RadiiSequences, SnRow, SnSequence, ThetaRow,
};

/// A computed constant together with how it was obtained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constant {
    pub name: String,
    pub value: f64,
    pub recipe: String,
}

impl Constant {
    pub fn new(name: &str, value: f64, recipe: impl Into<String>) -> Self {
        Constant { name: name.to_string(), value, recipe: recipe.into() }
    }
}

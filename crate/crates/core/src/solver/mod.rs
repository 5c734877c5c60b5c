//! Monotone Lax–Friedrichs schemes on periodic grids.
//!
//! The discounted problem `λv + H(p0 + Dv, x) = 0` is solved for `u = λv`, so the
//! discrete equation reads
//!
//! `F_i(u) = u_i + H(p0 + D_c u_i / λ, x_i) − Σ_a θ_a/(2hλ)·(u_{i+e_a} − 2u_i + u_{i−e_a}) = 0`
//!
//! with `D_c` the central difference. `F` is monotone when `θ_a ≥ |∂H/∂p_a|`; its
//! generalized Jacobian is then a strictly diagonally dominant M-matrix and the
//! solution obeys `min(−H(p0,·)) ≤ u ≤ max(−H(p0,·))`.

mod discounted;
mod evolution;
mod linear;

pub use discounted::{solve_discounted, DiscountedScheme, DiscountedSolution, Relaxation, SchemeParams, SolveReport};
pub use evolution::{solve_homogenized, solve_time_dependent, Evolution, EvolutionScheme, TimeParams};

use crate::error::{Error, Result};
use crate::hamiltonian::Hamiltonian;

/// LF dissipation: the requested value, or the certified Lipschitz bound; rejects values below the bound.
pub(crate) fn dissipation(h: &dyn Hamiltonian, requested: Option<f64>) -> Result<f64> {
    let lip = h.lipschitz();
    if !(lip.is_finite() && lip >= 0.0) {
        return Err(Error::MonotonicityViolation(format!("Lipschitz bound {lip} is not usable")));
    }
    match requested {
        None => Ok(lip.max(f64::MIN_POSITIVE)),
        Some(t) if t >= lip && t.is_finite() => Ok(t),
        Some(t) => Err(Error::MonotonicityViolation(format!(
            "dissipation θ = {t} is below the Lipschitz bound {lip} of the Hamiltonian"
        ))),
    }
}

//! One-point bandit gradient estimators.

use crate::error::{Error, Result};
use crate::game::{Matrix, Vector};
use crate::geometry::Preconditioner;

/// How an estimate was produced.
#[derive(Debug, Clone, PartialEq)]
pub enum Perturbation {
    /// Played `x + delta * A z`.
    Ellipsoidal { z: Vector, delta: f64, a: Matrix },
    /// Sampled one action of a mixed strategy.
    Simplex { played: usize, beta: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientEstimate {
    pub g: Vector,
    pub perturbation: Perturbation,
    /// The bandit observation the estimate was built from.
    pub cost: f64,
    /// Whether an entropy term `tau ln x` was added.
    pub includes_tau_term: bool,
}

/// `(d / delta) * cost * A^{-1} z`.
pub fn ellipsoidal_estimate(cost: f64, a: &Matrix, z: &Vector, d: usize, delta: f64) -> Result<GradientEstimate> {
    check_delta(delta)?;
    let chol = a
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numeric("perturbation matrix is not positive definite".into()))?;
    let a_inv_z = chol.solve(z);
    if a_inv_z.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("singular perturbation matrix".into()));
    }
    Ok(GradientEstimate {
        g: a_inv_z * (d as f64 / delta * cost),
        perturbation: Perturbation::Ellipsoidal {
            z: z.clone(),
            delta,
            a: a.clone(),
        },
        cost,
        includes_tau_term: false,
    })
}

/// Same estimate using the inverse already held by a [`Preconditioner`].
pub fn ellipsoidal_estimate_with(cost: f64, pc: &Preconditioner, z: &Vector, delta: f64) -> Result<GradientEstimate> {
    check_delta(delta)?;
    let d = z.len();
    Ok(GradientEstimate {
        g: &pc.a_inv * z * (d as f64 / delta * cost),
        perturbation: Perturbation::Ellipsoidal {
            z: z.clone(),
            delta,
            a: pc.a.clone(),
        },
        cost,
        includes_tau_term: false,
    })
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::usage(format!("perturbation radius {delta} outside (0, 1]")));
    }
    Ok(())
}

/// Importance-weighted estimate for a player on the simplex:
/// `g[a] = 1{a = played} * payoff / (x[a] + beta) + sign * tau * ln x[a]`.
///
/// With `beta = 0` the expectation over `played ~ x` is the payoff vector plus
/// the entropy term. A positive `beta` is the denominator offset variant.
pub fn simplex_importance_estimate(
    played: usize,
    payoff: f64,
    x: &Vector,
    beta: f64,
    tau: f64,
    sign: f64,
) -> Result<GradientEstimate> {
    if played >= x.len() {
        return Err(Error::usage(format!("action {played} out of range for {} actions", x.len())));
    }
    if beta < 0.0 || tau < 0.0 {
        return Err(Error::usage("beta and tau must be nonnegative"));
    }
    let denom = x[played] + beta;
    if !(denom > 0.0) {
        return Err(Error::domain("importance weight denominator is zero"));
    }
    let mut g = Vector::zeros(x.len());
    if tau > 0.0 {
        if x.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::domain("entropy term needs a strictly positive strategy"));
        }
        g = x.map(|v| sign * tau * v.ln());
    }
    g[played] += payoff / denom;
    Ok(GradientEstimate {
        g,
        perturbation: Perturbation::Simplex { played, beta },
        cost: payoff,
        includes_tau_term: tau > 0.0,
    })
}

/// Exponential smoothing `(1 - rho) prev + rho fresh`.
pub fn momentum_update(prev: &Vector, fresh: &Vector, rho: f64) -> Result<Vector> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::usage(format!("momentum weight {rho} outside (0, 1]")));
    }
    if prev.len() != fresh.len() {
        return Err(Error::usage("momentum vectors differ in length"));
    }
    if rho == 1.0 {
        return Ok(fresh.clone());
    }
    Ok(prev * (1.0 - rho) + fresh * rho)
}

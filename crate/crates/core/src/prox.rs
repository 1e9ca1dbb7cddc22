//! Inner minimizations used by the learning loops.
//!
//! * [`barrier_prox_step`]: the barrier-regularized proximal step, solved by
//!   damped Newton on a self-concordant objective.
//! * [`kl_prox_clipped_simplex`]: entropic prox onto `{x in simplex, x_a >= beta}`.
//! * [`optimistic_exponentiated_pair`]: the two entropy-regularized
//!   multiplicative steps of the optimistic simplex dynamics.
//! * [`regularized_ne_softmax_fixed_point`]: the entropy-regularized
//!   equilibrium of a matrix game as a damped softmax fixed point.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{Matrix, Vector};
use crate::geometry::{Barrier, ConvexFunction, Regularizer};

pub const DEFAULT_PROX_TOL: f64 = 1e-10;
pub const DEFAULT_PROX_MAX_ITERS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProxStatus {
    Converged,
    MaxIters,
    BoundaryEscape,
}

#[derive(Debug, Clone)]
pub struct ProxResult {
    pub x_next: Vector,
    pub newton_iterations: usize,
    pub stationarity_residual: f64,
    pub status: ProxStatus,
}

/// The proximal objective
/// `eta <x, g> + w D_p(x, x_t) + D_h(x, x_t)` with `w = eta * kappa * scale`.
struct ProxObjective<'a> {
    h: &'a Barrier,
    p: &'a Regularizer,
    x_t: &'a Vector,
    eta_g: Vector,
    w: f64,
    h_t: f64,
    grad_h_t: Vector,
    p_t: f64,
    grad_p_t: Vector,
}

impl<'a> ProxObjective<'a> {
    fn new(h: &'a Barrier, p: &'a Regularizer, x_t: &'a Vector, g: &Vector, eta: f64, w: f64) -> Result<Self> {
        Ok(Self {
            h,
            p,
            x_t,
            eta_g: g * eta,
            w,
            h_t: h.value(x_t)?,
            grad_h_t: h.gradient(x_t)?,
            p_t: p.value(x_t)?,
            grad_p_t: p.gradient(x_t)?,
        })
    }

    fn value(&self, x: &Vector) -> Result<f64> {
        let dx = x - self.x_t;
        let d_h = self.h.value(x)? - self.h_t - self.grad_h_t.dot(&dx);
        let mut v = self.eta_g.dot(x) + d_h;
        if self.w > 0.0 {
            v += self.w * (self.p.value(x)? - self.p_t - self.grad_p_t.dot(&dx));
        }
        Ok(v)
    }

    fn gradient(&self, x: &Vector) -> Result<Vector> {
        let mut g = &self.eta_g + self.h.gradient(x)? - &self.grad_h_t;
        if self.w > 0.0 {
            g += (self.p.gradient(x)? - &self.grad_p_t) * self.w;
        }
        Ok(g)
    }

    fn hessian(&self, x: &Vector) -> Result<Matrix> {
        let mut m = self.h.hessian(x)?;
        if self.w > 0.0 {
            m += self.p.hessian(x)? * self.w;
        }
        Ok(m)
    }

    /// Magnitude of the terms balanced at stationarity, for the rounding floor.
    fn magnitude(&self, x: &Vector) -> f64 {
        let gh = self.h.gradient(x).map(|g| g.norm()).unwrap_or(0.0);
        self.eta_g.norm() + self.grad_h_t.norm() + gh + self.w * self.grad_p_t.norm()
    }
}

/// Solve
/// `argmin_x { eta <x, g> + eta kappa scale D_p(x, x_t) + D_h(x, x_t) }`
/// over the barrier's interior.
///
/// Damped Newton: while the Newton decrement `lambda` exceeds 1/4 the step is
/// scaled by `1 / (1 + lambda)`, which keeps iterates interior for a
/// self-concordant objective; afterwards full steps. A halving line search
/// guards both phases. Converged means the stationarity residual
/// `|grad|` is at most `tol`, or at most the floating-point floor
/// `64 eps` times the magnitude of the balanced terms when that is larger,
/// or that the Newton correction is below the float spacing of the iterate.
/// On boxes a coordinatewise bisection takes over when Newton stalls.
#[allow(clippy::too_many_arguments)]
pub fn barrier_prox_step(
    h: &Barrier,
    p: &Regularizer,
    x_t: &Vector,
    g: &Vector,
    eta: f64,
    kappa: f64,
    scale: f64,
    tol: f64,
) -> Result<ProxResult> {
    barrier_prox_step_with(h, p, x_t, g, eta, kappa, scale, tol, DEFAULT_PROX_MAX_ITERS)
}

#[allow(clippy::too_many_arguments)]
pub fn barrier_prox_step_with(
    h: &Barrier,
    p: &Regularizer,
    x_t: &Vector,
    g: &Vector,
    eta: f64,
    kappa: f64,
    scale: f64,
    tol: f64,
    max_iters: usize,
) -> Result<ProxResult> {
    if !(tol > 0.0) {
        return Err(Error::usage("prox tolerance must be positive"));
    }
    if scale < 0.0 || eta < 0.0 || kappa < 0.0 {
        return Err(Error::usage("eta, kappa and scale must be nonnegative"));
    }
    if g.len() != x_t.len() {
        return Err(Error::usage("gradient and point differ in length"));
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite gradient estimate".into()));
    }
    let obj = ProxObjective::new(h, p, x_t, g, eta, eta * kappa * scale)?;

    let mut x = x_t.clone();
    let mut f = obj.value(&x)?;
    let mut grad = obj.gradient(&x)?;
    let mut residual = grad.norm();
    let floor = |x: &Vector| tol.max(64.0 * f64::EPSILON * obj.magnitude(x));

    for iter in 0..max_iters {
        if residual <= floor(&x) {
            return Ok(ProxResult {
                x_next: x,
                newton_iterations: iter,
                stationarity_residual: residual,
                status: ProxStatus::Converged,
            });
        }
        let hess = obj.hessian(&x)?;
        let chol = hess
            .cholesky()
            .ok_or_else(|| Error::Numeric("prox Hessian is not positive definite".into()))?;
        let step = -chol.solve(&grad);
        let lambda = (-grad.dot(&step)).max(0.0).sqrt();
        if !lambda.is_finite() {
            return Err(Error::Numeric("non-finite Newton decrement".into()));
        }
        // the remaining correction is below the spacing of floats at x: the
        // residual cannot shrink further (steep barrier near the boundary)
        if step.iter().zip(x.iter()).all(|(s, xi)| s.abs() <= 4.0 * f64::EPSILON * xi.abs()) {
            return Ok(ProxResult {
                x_next: x,
                newton_iterations: iter,
                stationarity_residual: residual,
                status: ProxStatus::Converged,
            });
        }
        let mut t = if lambda > 0.25 { 1.0 / (1.0 + lambda) } else { 1.0 };
        let mut accepted = None;
        for _ in 0..60 {
            let cand = &x + &step * t;
            if h.is_interior(&cand) {
                let fc = obj.value(&cand)?;
                if fc.is_nan() {
                    return Err(Error::Numeric("NaN in prox objective".into()));
                }
                if fc <= f + 1e-12 * f.abs().max(1.0) {
                    accepted = Some((cand, fc));
                    break;
                }
            }
            t *= 0.5;
        }
        match accepted {
            Some((cand, fc)) => {
                x = cand;
                f = fc;
                grad = obj.gradient(&x)?;
                residual = grad.norm();
            }
            None => {
                let status = if h.is_interior(&(&x + &step)) {
                    ProxStatus::MaxIters
                } else {
                    ProxStatus::BoundaryEscape
                };
                if residual <= floor(&x) {
                    return Ok(ProxResult {
                        x_next: x,
                        newton_iterations: iter + 1,
                        stationarity_residual: residual,
                        status: ProxStatus::Converged,
                    });
                }
                return separable_fallback(&obj, x, iter + 1, residual, status);
            }
        }
    }
    if residual <= floor(&x) {
        return Ok(ProxResult {
            x_next: x,
            newton_iterations: max_iters,
            stationarity_residual: residual,
            status: ProxStatus::Converged,
        });
    }
    separable_fallback(&obj, x, max_iters, residual, ProxStatus::MaxIters)
}

/// On a box every term of the objective is separable, so each coordinate's
/// derivative is increasing in that coordinate alone and bisection over the
/// open interval brackets the minimizer to adjacent floats. This rescues
/// iterates pinned within a few ulps of a face, where damped Newton steps
/// round back onto the same point.
fn separable_fallback(
    obj: &ProxObjective<'_>,
    x: Vector,
    iterations: usize,
    residual: f64,
    status: ProxStatus,
) -> Result<ProxResult> {
    let Barrier::BoxLog { lower, upper } = obj.h else {
        return Ok(ProxResult {
            x_next: x,
            newton_iterations: iterations,
            stationarity_residual: residual,
            status,
        });
    };
    let mut probe = x.clone();
    let derivative = |k: usize, v: f64, probe: &mut Vector| -> Result<f64> {
        probe[k] = v;
        Ok(obj.gradient(probe)?[k])
    };
    for k in 0..x.len() {
        let (mut lo, mut hi) = (lower[k], upper[k]);
        loop {
            let mid = lo + 0.5 * (hi - lo);
            if mid <= lo || mid >= hi {
                break;
            }
            if derivative(k, mid, &mut probe)? < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        // the minimizer lies in [lo, hi]; keep the interior end with the smaller slope
        let best = [lo, hi]
            .into_iter()
            .filter(|v| *v > lower[k] && *v < upper[k])
            .map(|v| Ok((v, derivative(k, v, &mut probe)?.abs())))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(v, _)| v)
            .ok_or_else(|| Error::Numeric("box prox has no interior float".into()))?;
        probe[k] = best;
    }
    let residual = obj.gradient(&probe)?.norm();
    Ok(ProxResult {
        x_next: probe,
        newton_iterations: iterations,
        stationarity_residual: residual,
        status: ProxStatus::Converged,
    })
}

fn normalized_exp(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// `argmin_{x in simplex, x_a >= beta} { <x, g> + (1/eta) KL(x, x_t) }`.
///
/// The unconstrained minimizer is `x ∝ x_t exp(-eta g)`. Coordinates falling
/// below `beta` are pinned there and the remaining mass `1 - beta |pinned|` is
/// spread proportionally over the free ones; every pass pins all current
/// violators, so at most `d` passes are needed.
pub fn kl_prox_clipped_simplex(x_t: &Vector, g: &Vector, eta: f64, beta: f64) -> Result<Vector> {
    let d = x_t.len();
    if d == 0 || g.len() != d {
        return Err(Error::usage("kl prox needs matching nonempty vectors"));
    }
    if !(eta > 0.0) {
        return Err(Error::usage("kl prox step size must be positive"));
    }
    if beta < 0.0 || beta * d as f64 > 1.0 + 1e-15 {
        return Err(Error::usage(format!("floor {beta} infeasible for {d} actions")));
    }
    if beta * d as f64 >= 1.0 - 1e-15 {
        return Ok(Vector::from_element(d, 1.0 / d as f64));
    }
    let logits: Vec<f64> = x_t
        .iter()
        .zip(g.iter())
        .map(|(x, gv)| if *x > 0.0 { x.ln() - eta * gv } else { f64::NEG_INFINITY })
        .collect();
    let w = normalized_exp(&logits);
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite exponentiated weights".into()));
    }
    let mut pinned = vec![false; d];
    loop {
        let n_pinned = pinned.iter().filter(|p| **p).count();
        let free_mass = 1.0 - beta * n_pinned as f64;
        let free_w: f64 = w.iter().zip(&pinned).filter(|(_, p)| !**p).map(|(v, _)| v).sum();
        let x: Vec<f64> = (0..d)
            .map(|a| if pinned[a] { beta } else { free_mass * w[a] / free_w })
            .collect();
        let mut changed = false;
        for a in 0..d {
            if !pinned[a] && x[a] < beta {
                pinned[a] = true;
                changed = true;
            }
        }
        if !changed {
            return Ok(Vector::from_vec(x));
        }
    }
}

/// One entropy-regularized multiplicative step for costs:
/// `x ∝ x_t^{1 - eta tau} exp(-eta g)`.
pub fn regularized_exponentiated_step(x_t: &Vector, g: &Vector, eta: f64, tau: f64) -> Result<Vector> {
    if g.len() != x_t.len() {
        return Err(Error::usage("gradient length differs from the strategy"));
    }
    if eta < 0.0 || tau < 0.0 || eta * tau > 1.0 {
        return Err(Error::usage(format!("need eta, tau >= 0 and eta * tau <= 1 (got {})", eta * tau)));
    }
    if x_t.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::domain("multiplicative step needs a strictly positive strategy"));
    }
    let keep = 1.0 - eta * tau;
    let logits: Vec<f64> = x_t.iter().zip(g.iter()).map(|(x, gv)| keep * x.ln() - eta * gv).collect();
    let out = Vector::from_vec(normalized_exp(&logits));
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite multiplicative step".into()));
    }
    Ok(out)
}

/// The two half-steps of the optimistic entropy-regularized update, written
/// for costs (descent):
/// `x_half ∝ x_t^{1 - eta tau} exp(-eta g_prev)` and
/// `x_next ∝ x_t^{1 - eta tau} exp(-eta g_half)`, both from the same base `x_t`.
pub fn optimistic_exponentiated_pair(
    x_t: &Vector,
    g_prev: &Vector,
    g_half: &Vector,
    eta: f64,
    tau: f64,
) -> Result<(Vector, Vector)> {
    Ok((
        regularized_exponentiated_step(x_t, g_prev, eta, tau)?,
        regularized_exponentiated_step(x_t, g_half, eta, tau)?,
    ))
}

fn softmax(v: &Vector, temperature: f64) -> Vector {
    let logits: Vec<f64> = v.iter().map(|a| a / temperature).collect();
    Vector::from_vec(normalized_exp(&logits))
}

/// Entropy-regularized equilibrium of the bilinear game where the row player
/// maximizes `x^T M y` and the column player minimizes it.
#[derive(Debug, Clone)]
pub struct SoftmaxEquilibrium {
    pub x: Vector,
    pub y: Vector,
    pub residual: f64,
    pub iterations: usize,
    pub damping: f64,
}

/// `max(|x - softmax(M y / tau)|_inf, |y - softmax(-M^T x / tau)|_inf)`.
pub fn softmax_residual(m: &Matrix, tau: f64, x: &Vector, y: &Vector) -> f64 {
    let rx = (x - softmax(&(m * y), tau)).amax();
    let ry = (y - softmax(&(-(m.transpose() * x)), tau)).amax();
    rx.max(ry)
}

/// Damped simultaneous softmax iteration from uniform strategies:
/// `x <- (1 - damping) x + damping softmax(M y / tau)` and
/// `y <- (1 - damping) y + damping softmax(-M^T x / tau)`.
///
/// Orientation: the row player maximizes `x^T M y`. For a game whose row
/// player minimizes `x^T A y`, pass `M = -A`.
pub fn regularized_ne_softmax_fixed_point(
    m: &Matrix,
    tau: f64,
    tol: f64,
    max_iters: usize,
    damping: f64,
) -> Result<SoftmaxEquilibrium> {
    let x0 = Vector::from_element(m.nrows(), 1.0 / m.nrows() as f64);
    let y0 = Vector::from_element(m.ncols(), 1.0 / m.ncols() as f64);
    softmax_fixed_point_from(m, tau, tol, max_iters, damping, x0, y0)
}

pub fn softmax_fixed_point_from(
    m: &Matrix,
    tau: f64,
    tol: f64,
    max_iters: usize,
    damping: f64,
    mut x: Vector,
    mut y: Vector,
) -> Result<SoftmaxEquilibrium> {
    if !(tau > 0.0) {
        return Err(Error::usage("regularization temperature must be positive"));
    }
    if !(damping > 0.0 && damping <= 1.0) {
        return Err(Error::usage("damping must lie in (0, 1]"));
    }
    let mut residual = softmax_residual(m, tau, &x, &y);
    for iter in 0..max_iters {
        if residual <= tol {
            return Ok(SoftmaxEquilibrium {
                x,
                y,
                residual,
                iterations: iter,
                damping,
            });
        }
        let bx = softmax(&(m * &y), tau);
        let by = softmax(&(-(m.transpose() * &x)), tau);
        x = &x * (1.0 - damping) + bx * damping;
        y = &y * (1.0 - damping) + by * damping;
        residual = softmax_residual(m, tau, &x, &y);
        if !residual.is_finite() {
            break;
        }
    }
    if residual <= tol {
        return Ok(SoftmaxEquilibrium {
            x,
            y,
            residual,
            iterations: max_iters,
            damping,
        });
    }
    Err(Error::NotConverged {
        what: "softmax fixed point",
        iterations: max_iters,
        residual,
    })
}

/// Tries a ladder of decreasing dampings until the fixed point converges.
pub fn solve_regularized_equilibrium(m: &Matrix, tau: f64, tol: f64) -> Result<SoftmaxEquilibrium> {
    let mut last = None;
    for &damping in &[1.0, 0.5, 0.2, 0.05, 0.01] {
        match regularized_ne_softmax_fixed_point(m, tau, tol, 200_000, damping) {
            Ok(eq) => return Ok(eq),
            Err(e) => last = Some(e),
        }
    }
    Err(last.expect("ladder is nonempty"))
}

//! Self-concordant barriers, convex regularizers, Bregman divergences, the
//! ellipsoidal preconditioner and unit-sphere sampling.
//!
//! Simplex action sets are handled by the barrier-based algorithm in the
//! drop-last-coordinate embedding: a point `(x_1, .., x_d)` of the simplex is
//! represented by its first `d - 1` coordinates, with the last one implied.

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{ActionSet, Matrix, Vector};
use crate::rng::SimRng;

/// Eigenvalues of the combined Hessian below this are treated as an exterior point.
pub const EIGEN_FLOOR: f64 = 1e-12;

/// Value, gradient and Hessian of a convex function.
pub trait ConvexFunction {
    fn value(&self, x: &Vector) -> Result<f64>;
    fn gradient(&self, x: &Vector) -> Result<Vector>;
    fn hessian(&self, x: &Vector) -> Result<Matrix>;
}

/// `D_f(x, y) = f(x) - f(y) - <grad f(y), x - y>`.
pub fn bregman<F: ConvexFunction + ?Sized>(f: &F, x: &Vector, y: &Vector) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::usage("bregman arguments differ in length"));
    }
    let d = f.value(x)? - f.value(y)? - f.gradient(y)?.dot(&(x - y));
    // Rounding can push an exact zero slightly negative.
    Ok(d.max(0.0))
}

/// A self-concordant barrier for one of the supported action sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Barrier {
    /// `-sum ln(x - l) - sum ln(u - x)`, parameter `2d`.
    BoxLog { lower: Vec<f64>, upper: Vec<f64> },
    /// `-ln(r^2 - |x - c|^2)`, parameter 1.
    Ball { center: Vec<f64>, radius: f64 },
    /// Log barrier of `{x_a >= floor}` on the embedded simplex, parameter `dim`.
    SimplexEmbedded { dim: usize, floor: f64 },
}

impl Barrier {
    pub fn for_set(set: &ActionSet) -> Result<Self> {
        Ok(match set {
            ActionSet::Box { lower, upper } => Barrier::BoxLog {
                lower: lower.clone(),
                upper: upper.clone(),
            },
            ActionSet::Ball { center, radius } => Barrier::Ball {
                center: center.clone(),
                radius: *radius,
            },
            ActionSet::Simplex { dim, floor } => {
                if *dim < 2 {
                    return Err(Error::usage("embedded simplex barrier needs at least 2 actions"));
                }
                if floor * *dim as f64 >= 1.0 {
                    return Err(Error::usage("simplex with floor * dim = 1 has empty interior"));
                }
                Barrier::SimplexEmbedded {
                    dim: *dim,
                    floor: *floor,
                }
            }
        })
    }

    /// Dimension of the coordinates the barrier lives in.
    pub fn dim(&self) -> usize {
        match self {
            Barrier::BoxLog { lower, .. } => lower.len(),
            Barrier::Ball { center, .. } => center.len(),
            Barrier::SimplexEmbedded { dim, .. } => dim - 1,
        }
    }

    /// Self-concordance parameter.
    pub fn nu(&self) -> f64 {
        match self {
            Barrier::BoxLog { lower, .. } => 2.0 * lower.len() as f64,
            Barrier::Ball { .. } => 1.0,
            Barrier::SimplexEmbedded { dim, .. } => *dim as f64,
        }
    }

    /// Minimizer of the barrier.
    pub fn analytic_center(&self) -> Vector {
        match self {
            Barrier::BoxLog { lower, upper } => Vector::from_iterator(
                lower.len(),
                lower.iter().zip(upper).map(|(l, u)| 0.5 * (l + u)),
            ),
            Barrier::Ball { center, .. } => Vector::from_column_slice(center),
            Barrier::SimplexEmbedded { dim, .. } => Vector::from_element(dim - 1, 1.0 / *dim as f64),
        }
    }

    /// Slacks of the defining inequalities; all positive exactly on the interior.
    fn slacks(&self, x: &Vector) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::usage(format!(
                "barrier expects {} coordinates, got {}",
                self.dim(),
                x.len()
            )));
        }
        let s: Vec<f64> = match self {
            Barrier::BoxLog { lower, upper } => x
                .iter()
                .zip(lower)
                .map(|(v, l)| v - l)
                .chain(x.iter().zip(upper).map(|(v, u)| u - v))
                .collect(),
            Barrier::Ball { center, radius } => {
                let d2: f64 = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
                vec![radius * radius - d2]
            }
            Barrier::SimplexEmbedded { floor, .. } => x
                .iter()
                .map(|v| v - floor)
                .chain(std::iter::once(1.0 - x.sum() - floor))
                .collect(),
        };
        if s.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::domain("point is not in the barrier's interior"));
        }
        Ok(s)
    }

    pub fn is_interior(&self, x: &Vector) -> bool {
        self.slacks(x).is_ok()
    }

    /// Minkowski gauge of `x` with pole at the analytic center: the smallest
    /// `t >= 0` with `center + (x - center) / t` in the set.
    pub fn minkowski(&self, x: &Vector) -> f64 {
        let c = self.analytic_center();
        let dx = x - &c;
        match self {
            Barrier::BoxLog { lower, upper } => dx
                .iter()
                .enumerate()
                .map(|(k, v)| {
                    if *v >= 0.0 {
                        v / (upper[k] - c[k])
                    } else {
                        -v / (c[k] - lower[k])
                    }
                })
                .fold(0.0, f64::max),
            Barrier::Ball { radius, .. } => dx.norm() / radius,
            Barrier::SimplexEmbedded { floor, .. } => {
                let mut t: f64 = 0.0;
                for k in 0..dx.len() {
                    t = t.max(-dx[k] / (c[k] - floor));
                }
                t.max(dx.sum() / (1.0 - floor - c.sum()))
            }
        }
    }
}

impl ConvexFunction for Barrier {
    fn value(&self, x: &Vector) -> Result<f64> {
        Ok(-self.slacks(x)?.iter().map(|s| s.ln()).sum::<f64>())
    }

    fn gradient(&self, x: &Vector) -> Result<Vector> {
        let s = self.slacks(x)?;
        let d = self.dim();
        Ok(match self {
            Barrier::BoxLog { .. } => Vector::from_iterator(d, (0..d).map(|k| -1.0 / s[k] + 1.0 / s[d + k])),
            Barrier::Ball { center, .. } => {
                Vector::from_iterator(d, (0..d).map(|k| 2.0 * (x[k] - center[k]) / s[0]))
            }
            Barrier::SimplexEmbedded { .. } => {
                let last = 1.0 / s[d];
                Vector::from_iterator(d, (0..d).map(|k| -1.0 / s[k] + last))
            }
        })
    }

    fn hessian(&self, x: &Vector) -> Result<Matrix> {
        let s = self.slacks(x)?;
        let d = self.dim();
        Ok(match self {
            Barrier::BoxLog { .. } => Matrix::from_diagonal(&Vector::from_iterator(
                d,
                (0..d).map(|k| 1.0 / (s[k] * s[k]) + 1.0 / (s[d + k] * s[d + k])),
            )),
            Barrier::Ball { center, .. } => {
                let c = Vector::from_column_slice(center);
                let dx = x - c;
                Matrix::identity(d, d) * (2.0 / s[0]) + &dx * dx.transpose() * (4.0 / (s[0] * s[0]))
            }
            Barrier::SimplexEmbedded { .. } => {
                let last = 1.0 / (s[d] * s[d]);
                Matrix::from_fn(d, d, |r, c| if r == c { 1.0 / (s[r] * s[r]) + last } else { last })
            }
        })
    }
}

/// A convex regularizer `p` with `mu I <= hess p <= zeta I`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regularizer {
    /// `1/2 sum w_k x_k^2`.
    Quadratic { weights: Vec<f64> },
    /// `<1, x>`: no curvature.
    Linear { dim: usize },
    /// `sum x_k ln x_k` on positive vectors (its Bregman divergence is KL).
    NegEntropy { dim: usize },
}

impl Regularizer {
    pub fn squared_euclidean(dim: usize) -> Self {
        Regularizer::Quadratic {
            weights: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Regularizer::Quadratic { weights } => weights.len(),
            Regularizer::Linear { dim } | Regularizer::NegEntropy { dim } => *dim,
        }
    }

    /// Strong-convexity modulus (over the unit simplex for negative entropy).
    pub fn mu(&self) -> f64 {
        match self {
            Regularizer::Quadratic { weights } => weights.iter().copied().fold(f64::INFINITY, f64::min),
            Regularizer::Linear { .. } => 0.0,
            Regularizer::NegEntropy { .. } => 1.0,
        }
    }

    /// Curvature upper bound; infinite for negative entropy near the boundary.
    pub fn zeta(&self) -> f64 {
        match self {
            Regularizer::Quadratic { weights } => weights.iter().copied().fold(0.0, f64::max),
            Regularizer::Linear { .. } => 0.0,
            Regularizer::NegEntropy { .. } => f64::INFINITY,
        }
    }

    /// Upper bound on `D_p(x, y)` over the given set (in the barrier's coordinates).
    pub fn bregman_diameter(&self, set: &ActionSet) -> f64 {
        match self {
            Regularizer::Quadratic { weights } => match set {
                ActionSet::Box { lower, upper } => 0.5
                    * weights
                        .iter()
                        .zip(lower.iter().zip(upper))
                        .map(|(w, (l, u))| w * (u - l) * (u - l))
                        .sum::<f64>(),
                _ => 0.5 * self.zeta() * set.diameter().powi(2),
            },
            Regularizer::Linear { .. } => 0.0,
            Regularizer::NegEntropy { .. } => match set {
                ActionSet::Simplex { floor, .. } if *floor > 0.0 => (1.0 / floor).ln(),
                _ => f64::INFINITY,
            },
        }
    }
}

impl ConvexFunction for Regularizer {
    fn value(&self, x: &Vector) -> Result<f64> {
        Ok(match self {
            Regularizer::Quadratic { weights } => {
                0.5 * x.iter().zip(weights).map(|(v, w)| w * v * v).sum::<f64>()
            }
            Regularizer::Linear { .. } => x.sum(),
            Regularizer::NegEntropy { .. } => {
                if x.iter().any(|v| *v < 0.0) {
                    return Err(Error::domain("negative entropy needs nonnegative entries"));
                }
                x.iter().map(|v| if *v > 0.0 { v * v.ln() } else { 0.0 }).sum()
            }
        })
    }

    fn gradient(&self, x: &Vector) -> Result<Vector> {
        Ok(match self {
            Regularizer::Quadratic { weights } => {
                Vector::from_iterator(x.len(), x.iter().zip(weights).map(|(v, w)| w * v))
            }
            Regularizer::Linear { .. } => Vector::from_element(x.len(), 1.0),
            Regularizer::NegEntropy { .. } => {
                if x.iter().any(|v| !(*v > 0.0)) {
                    return Err(Error::domain("negative entropy gradient needs positive entries"));
                }
                x.map(|v| v.ln() + 1.0)
            }
        })
    }

    fn hessian(&self, x: &Vector) -> Result<Matrix> {
        Ok(match self {
            Regularizer::Quadratic { weights } => {
                Matrix::from_diagonal(&Vector::from_column_slice(weights))
            }
            Regularizer::Linear { .. } => Matrix::zeros(x.len(), x.len()),
            Regularizer::NegEntropy { .. } => {
                if x.iter().any(|v| !(*v > 0.0)) {
                    return Err(Error::domain("negative entropy Hessian needs positive entries"));
                }
                Matrix::from_diagonal(&x.map(|v| 1.0 / v))
            }
        })
    }
}

/// The barrier and regularizer a player uses under the barrier-based algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerGeometry {
    pub barrier: Barrier,
    pub regularizer: Regularizer,
}

impl PlayerGeometry {
    /// Barrier of the set with `p = 1/2 |x|^2` in the barrier's coordinates.
    pub fn euclidean_for(set: &ActionSet) -> Result<Self> {
        let barrier = Barrier::for_set(set)?;
        let regularizer = Regularizer::squared_euclidean(barrier.dim());
        Ok(Self { barrier, regularizer })
    }

    pub fn is_embedded_simplex(&self) -> bool {
        matches!(self.barrier, Barrier::SimplexEmbedded { .. })
    }

    /// Full-coordinate action from barrier coordinates.
    pub fn to_action(&self, coords: &Vector) -> Vector {
        if self.is_embedded_simplex() {
            unembed_simplex(coords)
        } else {
            coords.clone()
        }
    }

    /// Barrier coordinates of a full-coordinate action.
    pub fn to_coords(&self, action: &Vector) -> Vector {
        if self.is_embedded_simplex() {
            embed_simplex(action)
        } else {
            action.clone()
        }
    }

    /// Gradient with respect to barrier coordinates from a full-coordinate gradient.
    pub fn pull_back_gradient(&self, g: &Vector) -> Vector {
        if self.is_embedded_simplex() {
            let last = g[g.len() - 1];
            Vector::from_iterator(g.len() - 1, g.iter().take(g.len() - 1).map(|v| v - last))
        } else {
            g.clone()
        }
    }
}

/// Drop the last simplex coordinate.
pub fn embed_simplex(x: &Vector) -> Vector {
    x.rows(0, x.len() - 1).into_owned()
}

/// Append the implied last simplex coordinate.
pub fn unembed_simplex(e: &Vector) -> Vector {
    let last = 1.0 - e.sum();
    Vector::from_iterator(e.len() + 1, e.iter().copied().chain(std::iter::once(last)))
}

/// `A = (hess h + c hess p)^{-1/2}` together with its inverse.
#[derive(Debug, Clone)]
pub struct Preconditioner {
    pub a: Matrix,
    pub a_inv: Matrix,
    /// Eigenvalues of the combined Hessian `hess h + c hess p`.
    pub eigenvalues: Vector,
}

/// Build `A = (hess h(x) + eta * scale * hess p(x))^{-1/2}` by symmetric
/// eigendecomposition.
pub fn precondition_matrix(
    h: &Barrier,
    p: &Regularizer,
    x: &Vector,
    eta: f64,
    scale: f64,
) -> Result<Preconditioner> {
    let weight = eta * scale;
    if !(weight >= 0.0) {
        return Err(Error::usage("eta * scale must be nonnegative"));
    }
    let mut m = h.hessian(x)?;
    if weight > 0.0 {
        m += p.hessian(x)? * weight;
    }
    combined_inverse_sqrt(m)
}

/// Inverse square root of a symmetric positive definite matrix.
pub fn combined_inverse_sqrt(m: Matrix) -> Result<Preconditioner> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite Hessian entry".into()));
    }
    let d = m.nrows();
    if d == 1 {
        let l = m[(0, 0)];
        if l < EIGEN_FLOOR {
            return Err(Error::domain(format!("combined Hessian eigenvalue {l:e} below floor")));
        }
        let s = l.sqrt();
        return Ok(Preconditioner {
            a: Matrix::from_element(1, 1, 1.0 / s),
            a_inv: Matrix::from_element(1, 1, s),
            eigenvalues: Vector::from_element(1, l),
        });
    }
    let sym = (&m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let min = eig.eigenvalues.min();
    if min < EIGEN_FLOOR {
        return Err(Error::domain(format!("combined Hessian eigenvalue {min:e} below floor")));
    }
    let v = &eig.eigenvectors;
    let inv_sqrt = Matrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    let sqrt = Matrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
    Ok(Preconditioner {
        a: v * inv_sqrt * v.transpose(),
        a_inv: v * sqrt * v.transpose(),
        eigenvalues: eig.eigenvalues,
    })
}

/// Uniform direction on the unit sphere of `R^d` (normalized Gaussian).
pub fn sample_unit_sphere(rng: &mut SimRng, d: usize) -> Vector {
    assert!(d >= 1, "sphere dimension must be positive");
    loop {
        let g = Vector::from_iterator(d, (0..d).map(|_| rng.normal()));
        let n = g.norm();
        if n > 1e-300 {
            return g / n;
        }
    }
}

/// `x + delta * A z`, a point of the Dikin ellipsoid around `x`.
pub fn dikin_point(x: &Vector, a: &Matrix, z: &Vector, delta: f64) -> Result<Vector> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::usage(format!("perturbation radius {delta} outside (0, 1]")));
    }
    Ok(x + a * z * delta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_gradient<F: ConvexFunction>(f: &F, x: &Vector, h: f64) -> Vector {
        Vector::from_iterator(
            x.len(),
            (0..x.len()).map(|k| {
                let mut p = x.clone();
                let mut m = x.clone();
                p[k] += h;
                m[k] -= h;
                (f.value(&p).unwrap() - f.value(&m).unwrap()) / (2.0 * h)
            }),
        )
    }

    fn fd_hessian<F: ConvexFunction>(f: &F, x: &Vector, h: f64) -> Matrix {
        let d = x.len();
        let mut out = Matrix::zeros(d, d);
        for k in 0..d {
            let mut p = x.clone();
            let mut m = x.clone();
            p[k] += h;
            m[k] -= h;
            let col = (f.gradient(&p).unwrap() - f.gradient(&m).unwrap()) / (2.0 * h);
            out.set_column(k, &col);
        }
        out
    }

    fn shipped() -> Vec<(ActionSet, Barrier)> {
        [
            ActionSet::boxed(vec![0.0, -1.0, 2.0], vec![1.0, 1.0, 5.0]).unwrap(),
            ActionSet::unit_ball(3).unwrap(),
            ActionSet::ball(vec![1.0, -2.0], 0.5).unwrap(),
            ActionSet::simplex(4, 0.0).unwrap(),
            ActionSet::simplex(3, 0.1).unwrap(),
        ]
        .into_iter()
        .map(|s| {
            let b = Barrier::for_set(&s).unwrap();
            (s, b)
        })
        .collect()
    }

    fn interior_coords(set: &ActionSet, rng: &mut SimRng) -> Vector {
        let x = set.sample_interior(rng, 0.05);
        match set {
            ActionSet::Simplex { .. } => embed_simplex(&x),
            _ => x,
        }
    }

    #[test]
    fn barrier_derivatives_match_finite_differences() {
        let mut rng = SimRng::seed_from_u64(3);
        for (set, b) in shipped() {
            for _ in 0..100 {
                let x = interior_coords(&set, &mut rng);
                let g = b.gradient(&x).unwrap();
                let fd = fd_gradient(&b, &x, 1e-6);
                assert!((&g - &fd).norm() <= 1e-5 * g.norm().max(1.0), "{b:?}");
                let hs = b.hessian(&x).unwrap();
                let fdh = fd_hessian(&b, &x, 1e-6);
                assert!((&hs - &fdh).norm() <= 1e-5 * hs.norm().max(1.0), "{b:?}");
                assert!(SymmetricEigen::new(hs).eigenvalues.min() > 0.0);
            }
        }
    }

    #[test]
    fn analytic_centers_are_stationary() {
        for (_, b) in shipped() {
            let g = b.gradient(&b.analytic_center()).unwrap();
            assert!(g.norm() <= 1e-8, "{b:?}: {g}");
        }
    }

    #[test]
    fn barrier_blows_up_at_boundary() {
        for (_, b) in shipped() {
            let c = b.analytic_center();
            let h0 = b.value(&c).unwrap();
            let mut rng = SimRng::seed_from_u64(8);
            for _ in 0..20 {
                let dir = sample_unit_sphere(&mut rng, b.dim());
                // Step along the ray to the boundary, stopping 1e-8 short.
                let pi = b.minkowski(&(&c + &dir));
                let t_boundary = 1.0 / pi;
                let x = &c + &dir * (t_boundary - 1e-8);
                assert!(b.is_interior(&x));
                assert!(b.value(&x).unwrap() - h0 >= 10.0, "{b:?}");
            }
        }
    }

    #[test]
    fn level_bound_in_minkowski_gauge() {
        let mut rng = SimRng::seed_from_u64(12);
        for (set, b) in shipped() {
            let h0 = b.value(&b.analytic_center()).unwrap();
            for _ in 0..500 {
                let x = interior_coords(&set, &mut rng);
                let pi = b.minkowski(&x);
                assert!(pi < 1.0);
                let bound = b.nu() * (1.0 / (1.0 - pi)).ln();
                assert!(b.value(&x).unwrap() - h0 <= bound + 1e-9, "{b:?}");
            }
        }
    }

    #[test]
    fn exterior_points_are_rejected() {
        let b = Barrier::for_set(&ActionSet::interval(0.0, 1.0).unwrap()).unwrap();
        assert!(matches!(b.value(&Vector::from_element(1, 1.0)), Err(Error::Domain(_))));
        let p = Regularizer::squared_euclidean(1);
        assert!(matches!(
            precondition_matrix(&b, &p, &Vector::from_element(1, -0.1), 0.1, 1.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn bregman_known_values() {
        let p = Regularizer::squared_euclidean(2);
        let x = Vector::from_vec(vec![1.0, 0.0]);
        let y = Vector::zeros(2);
        assert_eq!(bregman(&p, &x, &y).unwrap(), 0.5);
        assert_eq!(bregman(&p, &x, &x).unwrap(), 0.0);

        let ent = Regularizer::NegEntropy { dim: 2 };
        let a = Vector::from_vec(vec![0.5, 0.5]);
        let b = Vector::from_vec(vec![0.25, 0.75]);
        let direct: f64 = 0.5 * (0.5f64 / 0.25).ln() + 0.5 * (0.5f64 / 0.75).ln();
        assert!((bregman(&ent, &a, &b).unwrap() - direct).abs() < 1e-15);
        assert!((direct - 0.143_841_036_225_890_1).abs() < 1e-12);
    }

    #[test]
    fn bregman_three_point_identity() {
        let mut rng = SimRng::seed_from_u64(21);
        let functions: Vec<(ActionSet, Box<dyn ConvexFunction>)> = vec![
            (ActionSet::unit_ball(3).unwrap(), Box::new(Barrier::for_set(&ActionSet::unit_ball(3).unwrap()).unwrap())),
            (
                ActionSet::boxed(vec![0.0; 2], vec![1.0; 2]).unwrap(),
                Box::new(Regularizer::Quadratic { weights: vec![2.0, 0.5] }),
            ),
            (ActionSet::simplex(3, 0.0).unwrap(), Box::new(Regularizer::NegEntropy { dim: 3 })),
        ];
        for (set, f) in &functions {
            for _ in 0..200 {
                let a = set.sample_interior(&mut rng, 0.05);
                let b = set.sample_interior(&mut rng, 0.05);
                let c = set.sample_interior(&mut rng, 0.05);
                let lhs = bregman(f.as_ref(), &a, &c).unwrap();
                let rhs = bregman(f.as_ref(), &a, &b).unwrap()
                    + bregman(f.as_ref(), &b, &c).unwrap()
                    + (f.gradient(&b).unwrap() - f.gradient(&c).unwrap()).dot(&(&a - &b));
                assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
            }
        }
    }

    #[test]
    fn regularizer_curvature_bounds() {
        let p = Regularizer::Quadratic {
            weights: vec![0.5, 3.0],
        };
        let mut rng = SimRng::seed_from_u64(2);
        for _ in 0..100 {
            let x = Vector::from_vec(vec![rng.normal(), rng.normal()]);
            let eig = SymmetricEigen::new(p.hessian(&x).unwrap()).eigenvalues;
            assert!(eig.min() >= p.mu() - 1e-15 && eig.max() <= p.zeta() + 1e-15);
        }
        let set = ActionSet::boxed(vec![0.0, 0.0], vec![1.0, 2.0]).unwrap();
        let cp = p.bregman_diameter(&set);
        for _ in 0..1000 {
            let a = set.sample(&mut rng);
            let b = set.sample(&mut rng);
            assert!(bregman(&p, &a, &b).unwrap() <= cp + 1e-12);
        }
    }

    #[test]
    fn precondition_examples() {
        let p = Regularizer::squared_euclidean(2);
        // Ball barrier at the center has Hessian 2I; adding 2I gives (4I)^{-1/2}.
        let ball = Barrier::for_set(&ActionSet::unit_ball(2).unwrap()).unwrap();
        let pc = precondition_matrix(&ball, &p, &Vector::zeros(2), 1.0, 2.0).unwrap();
        assert!((&pc.a - Matrix::identity(2, 2) * 0.5).amax() < 1e-14);
        assert!((&pc.a * &pc.a_inv - Matrix::identity(2, 2)).amax() < 1e-10);

        let m = Matrix::from_diagonal(&Vector::from_vec(vec![4.0, 9.0]));
        let pc = combined_inverse_sqrt(m).unwrap();
        assert!((pc.a[(0, 0)] - 0.5).abs() < 1e-14 && (pc.a[(1, 1)] - 1.0 / 3.0).abs() < 1e-14);
        assert!(pc.a[(0, 1)].abs() < 1e-14);

        let pc = combined_inverse_sqrt(Matrix::identity(3, 3) * 4.0).unwrap();
        assert!((&pc.a - Matrix::identity(3, 3) * 0.5).amax() < 1e-14);
    }

    #[test]
    fn preconditioner_shrinks_with_scale() {
        let mut rng = SimRng::seed_from_u64(4);
        for (set, b) in shipped() {
            let p = Regularizer::squared_euclidean(b.dim());
            for _ in 0..50 {
                let x = interior_coords(&set, &mut rng);
                let s1 = rng.uniform_in(0.0, 10.0);
                let s2 = s1 + rng.uniform_in(0.1, 10.0);
                let a1 = precondition_matrix(&b, &p, &x, 0.3, s1).unwrap().a;
                let a2 = precondition_matrix(&b, &p, &x, 0.3, s2).unwrap().a;
                let diff = SymmetricEigen::new(a1 - a2).eigenvalues;
                assert!(diff.min() >= -1e-12);
            }
        }
    }

    #[test]
    fn sphere_draws_are_unit() {
        let mut rng = SimRng::seed_from_u64(6);
        for d in 1..6 {
            for _ in 0..1000 {
                assert!((sample_unit_sphere(&mut rng, d).norm() - 1.0).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn zero_sphere_is_fair() {
        let mut rng = SimRng::seed_from_u64(7);
        let n = 10_000;
        let plus = (0..n).filter(|_| sample_unit_sphere(&mut rng, 1)[0] > 0.0).count() as f64;
        // chi-square with one degree of freedom, 99.9% critical value 10.83
        let e = n as f64 / 2.0;
        let chi2 = (plus - e).powi(2) / e + ((n as f64 - plus) - e).powi(2) / e;
        assert!(chi2 < 10.83, "chi2 = {chi2}");
    }

    #[test]
    fn sphere_coordinates_centered() {
        let mut rng = SimRng::seed_from_u64(10);
        let n = 100_000;
        let mut mean = Vector::zeros(3);
        let mut second = Matrix::zeros(3, 3);
        for _ in 0..n {
            let z = sample_unit_sphere(&mut rng, 3);
            second += &z * z.transpose();
            mean += z;
        }
        mean /= n as f64;
        second /= n as f64;
        let tol = 4.0 / (n as f64 / 3.0).sqrt();
        assert!(mean.amax() < tol, "{mean}");
        assert!((second - Matrix::identity(3, 3) / 3.0).amax() < 0.01);
    }

    #[test]
    fn dikin_examples() {
        let b = Barrier::for_set(&ActionSet::interval(0.0, 1.0).unwrap()).unwrap();
        let x = Vector::from_element(1, 0.5);
        let pc = precondition_matrix(&b, &Regularizer::squared_euclidean(1), &x, 0.0, 0.0).unwrap();
        let xh = dikin_point(&x, &pc.a, &Vector::from_element(1, 1.0), 1.0).unwrap();
        assert!((xh[0] - (0.5 + 1.0 / 8f64.sqrt())).abs() < 1e-15);
        let tiny = dikin_point(&x, &pc.a, &Vector::from_element(1, 1.0), 1e-300).unwrap();
        assert_eq!(tiny[0], 0.5);
        assert!(dikin_point(&x, &pc.a, &Vector::from_element(1, 1.0), 0.0).is_err());
        assert!(dikin_point(&x, &pc.a, &Vector::from_element(1, 1.0), 1.5).is_err());
    }

    #[test]
    fn embedding_round_trip_and_gradient_chain() {
        let x = Vector::from_vec(vec![0.2, 0.3, 0.5]);
        assert_eq!(unembed_simplex(&embed_simplex(&x)), x);
        let geo = PlayerGeometry::euclidean_for(&ActionSet::simplex(3, 0.0).unwrap()).unwrap();
        let g = Vector::from_vec(vec![1.0, 4.0, 2.0]);
        let ge = geo.pull_back_gradient(&g);
        assert_eq!(ge, Vector::from_vec(vec![-1.0, 2.0]));
        // directional derivative agrees along any feasible direction
        let dir = Vector::from_vec(vec![0.1, -0.3]);
        let full_dir = Vector::from_vec(vec![0.1, -0.3, 0.2]);
        assert!((ge.dot(&dir) - g.dot(&full_dir)).abs() < 1e-15);
    }
}

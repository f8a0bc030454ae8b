//! Saddle-point solves with the zero-mean constraint and inf-sup estimation.
//!
//! Every solve goes through the augmented matrix
//! [[V, Bᵀ, 0], [B, 0, m], [0, mᵀ, 0]] with V = A + S (or a norm matrix).
//! The factor is taken of the quasi-definite shift with −δI in the zero block,
//! and iterative refinement against the unshifted matrix removes the shift.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::assembly::{FormA, StokesSystem};
use crate::error::{Error, Result};
use crate::factor::SymmetricFactor;
use crate::sparse::CsrMatrix;

/// Relative tolerance on the Rayleigh quotient in eigen-iterations.
pub const EIGEN_TOL: f64 = 1e-8;
/// Iteration cap for eigen-iterations.
pub const EIGEN_MAX_ITER: usize = 500;

const REFINE_STEPS: usize = 12;
/// Shift of the zero block relative to max |V|.
const REGULARIZATION: f64 = 1e-8;
/// Largest accepted lower bound on the condition number of an augmented solve.
const COND_LIMIT: f64 = 1e13;
/// Relative error accepted when solving for a known vector.
const ROUND_TRIP_TOL: f64 = 1e-5;

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Factorized augmented saddle matrix.
pub struct AugmentedSystem {
    matrix: CsrMatrix,
    factor: SymmetricFactor,
    nv: usize,
    np: usize,
}

impl std::fmt::Debug for AugmentedSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AugmentedSystem").field("nv", &self.nv).field("np", &self.np).finish()
    }
}

/// Solution of one augmented solve.
#[derive(Debug, Clone)]
pub struct AugmentedSolution {
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    pub lambda: f64,
    /// Normwise relative residual of each block row.
    pub residuals: [f64; 3],
}

impl AugmentedSystem {
    pub fn new(velocity: &CsrMatrix, b: &CsrMatrix, mean: &[f64]) -> Result<Self> {
        let nv = velocity.nrows;
        let np = b.nrows;
        if velocity.ncols != nv || b.ncols != nv || mean.len() != np {
            return Err(Error::Mismatch(format!(
                "blocks {}x{}, {}x{} and mean of length {} do not fit",
                velocity.nrows,
                velocity.ncols,
                b.nrows,
                b.ncols,
                mean.len()
            )));
        }
        let n = nv + np + 1;
        let mut t = Vec::with_capacity(velocity.nnz() + 2 * b.nnz() + 2 * np);
        t.extend(velocity.triplets());
        for (r, c, v) in b.triplets() {
            t.push((nv + r, c, v));
            t.push((c, nv + r, v));
        }
        for (i, &m) in mean.iter().enumerate() {
            t.push((nv + i, n - 1, m));
            t.push((n - 1, nv + i, m));
        }
        let matrix = CsrMatrix::from_triplets(n, n, &t);
        let delta = REGULARIZATION * velocity.max_abs().max(f64::MIN_POSITIVE);
        t.extend((nv..n).map(|i| (i, i, -delta)));
        let factor = SymmetricFactor::new(&CsrMatrix::from_triplets(n, n, &t))?;
        let system = AugmentedSystem { matrix, factor, nv, np };
        system.check_round_trip()?;
        Ok(system)
    }

    pub fn velocity_dim(&self) -> usize {
        self.nv
    }

    pub fn pressure_dim(&self) -> usize {
        self.np
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    /// Solve with right-hand side (f, g, 0), refining iteratively.
    pub fn solve(&self, f: &[f64], g: &[f64]) -> Result<AugmentedSolution> {
        if f.len() != self.nv || g.len() != self.np {
            return Err(Error::Mismatch("right-hand side does not fit the augmented system".into()));
        }
        let n = self.nv + self.np + 1;
        let mut rhs = Vec::with_capacity(n);
        rhs.extend_from_slice(f);
        rhs.extend_from_slice(g);
        rhs.push(0.0);
        let (mut x, r) = self.refine(&rhs);
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::Singular("augmented solve produced non-finite values".into()));
        }
        // ‖K‖‖x‖/‖rhs‖ bounds the condition number from below.
        let growth = self.matrix.max_abs() * norm(&x);
        if growth > COND_LIMIT * norm(&rhs) {
            return Err(Error::Singular(format!(
                "augmented solve grew by {:.1e}, the system is numerically singular",
                growth / norm(&rhs)
            )));
        }
        let scale = growth + norm(&rhs);
        let rel = |s: &[f64]| if scale > 0.0 { norm(s) / scale } else { 0.0 };
        let residuals = [rel(&r[..self.nv]), rel(&r[self.nv..n - 1]), rel(&r[n - 1..])];
        if residuals.iter().any(|&v| v > 1e-6) {
            return Err(Error::Singular(format!("augmented solve residuals {residuals:?} indicate a singular system")));
        }
        let lambda = x[n - 1];
        let p = x[self.nv..n - 1].to_vec();
        x.truncate(self.nv);
        Ok(AugmentedSolution { u: x, p, lambda, residuals })
    }

    fn refine(&self, rhs: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut x = self.factor.solve(rhs);
        let mut r = self.residual(&x, rhs);
        for _ in 0..REFINE_STEPS {
            if !x.iter().all(|v| v.is_finite()) {
                break;
            }
            let before = norm(&r);
            if before <= 1e-15 * norm(rhs) {
                break;
            }
            let dx = self.factor.solve(&r);
            let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + b).collect();
            let rt = self.residual(&trial, rhs);
            if norm(&rt) >= before {
                break;
            }
            x = trial;
            r = rt;
        }
        (x, r)
    }

    /// A vector with a component along a kernel direction cannot be recovered.
    fn check_round_trip(&self) -> Result<()> {
        let x0: Vec<f64> = (0..self.matrix.nrows).map(|i| 1.0 + (0.37 * i as f64).sin()).collect();
        let (x, _) = self.refine(&self.matrix.mul_vec(&x0));
        let err = norm(&x.iter().zip(&x0).map(|(a, b)| a - b).collect::<Vec<_>>());
        if !(err <= ROUND_TRIP_TOL * norm(&x0)) {
            return Err(Error::Singular(format!(
                "augmented round trip lost {:.1e} of the probe, the system is numerically singular",
                err / norm(&x0)
            )));
        }
        Ok(())
    }

    fn residual(&self, x: &[f64], rhs: &[f64]) -> Vec<f64> {
        self.matrix.mul_vec(x).iter().zip(rhs).map(|(a, b)| b - a).collect()
    }
}

/// Discrete velocity, zero-mean pressure and mean multiplier.
#[derive(Debug, Clone)]
pub struct SaddleSolution {
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    pub lambda: f64,
    /// Relative residuals of the momentum, divergence and mean rows.
    pub residuals: [f64; 3],
}

/// Solve (A+S)u + Bᵀp = f, Bu + mλ = 0, mᵀp = 0.
pub fn solve_stokes(system: &StokesSystem) -> Result<SaddleSolution> {
    let aug = AugmentedSystem::new(&system.velocity_block(), &system.b, &system.mean)?;
    let s = aug.solve(&system.rhs, &vec![0.0; system.pressure_dim()])?;
    Ok(SaddleSolution { u: s.u, p: s.p, lambda: s.lambda, residuals: s.residuals })
}

/// Outcome of a Lanczos run for the largest eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanczosResult {
    pub theta_max: f64,
    pub iterations: usize,
    /// Residual bound |β_k s_k| of the top Ritz pair.
    pub residual: f64,
}

/// Largest eigenvalue of an operator self-adjoint in the inner product of `gram`,
/// with full reorthogonalization. `start` must already lie in the target subspace.
pub fn lanczos_max<F>(mut apply: F, gram: &CsrMatrix, start: &[f64], dim: usize) -> Result<LanczosResult>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    if dim == 0 {
        return Err(Error::Config("eigenproblem on an empty subspace".into()));
    }
    let ip = |x: &[f64], y: &[f64]| dot(x, &gram.mul_vec(y));
    let n0 = ip(start, start).sqrt();
    if !(n0 > 0.0) {
        return Err(Error::Config("Lanczos start vector vanishes in the subspace".into()));
    }
    let mut basis: Vec<Vec<f64>> = vec![start.iter().map(|v| v / n0).collect()];
    let mut gram_basis: Vec<Vec<f64>> = vec![gram.mul_vec(&basis[0])];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut prev = f64::NAN;
    let cap = EIGEN_MAX_ITER.min(dim);
    for k in 0..cap {
        let mut w = apply(&basis[k])?;
        let a = dot(&gram_basis[k], &w);
        alpha.push(a);
        for _ in 0..2 {
            for (v, mv) in basis.iter().zip(&gram_basis) {
                let c = dot(mv, &w);
                w.iter_mut().zip(v).for_each(|(wi, vi)| *wi -= c * vi);
            }
        }
        let b = ip(&w, &w).max(0.0).sqrt();
        let m = alpha.len();
        let mut t = DMatrix::zeros(m, m);
        for i in 0..m {
            t[(i, i)] = alpha[i];
            if i + 1 < m {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let (top, theta) =
            eig.eigenvalues.iter().enumerate().fold(
                (0, f64::NEG_INFINITY),
                |acc, (i, &v)| {
                    if v > acc.1 {
                        (i, v)
                    } else {
                        acc
                    }
                },
            );
        let residual = (b * eig.eigenvectors[(m - 1, top)]).abs();
        let settled = (theta - prev).abs() <= EIGEN_TOL * theta.abs() && residual <= EIGEN_TOL.sqrt() * theta.abs();
        let exhausted = b <= 1e-14 * theta.abs().max(f64::MIN_POSITIVE) || m == dim;
        if settled || exhausted {
            return Ok(LanczosResult { theta_max: theta, iterations: m, residual });
        }
        prev = theta;
        beta.push(b);
        let v: Vec<f64> = w.iter().map(|x| x / b).collect();
        gram_basis.push(gram.mul_vec(&v));
        basis.push(v);
    }
    Err(Error::NoConvergence(format!("Lanczos did not settle in {cap} iterations (last Ritz value {prev:.6e})")))
}

/// Deterministic start vector with content in every component.
fn start_vector(n: usize) -> Vec<f64> {
    (0..n).map(|i| 1.0 + 0.5 * ((i as f64) * 0.754_877_666_246_692_8 + 0.3).sin()).collect()
}

/// Discrete inf-sup estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfSupEstimate {
    pub beta: f64,
    /// Constant pressures were removed from the eigenproblem.
    pub deflated: bool,
    pub iterations: usize,
    pub residual: f64,
}

/// β_h² = smallest eigenvalue of B N1⁻¹ Bᵀ q = λ Mp q on {q : mᵀq = 0}.
pub fn estimate_inf_sup(b: &CsrMatrix, n1: &CsrMatrix, mp: &CsrMatrix, mean: &[f64]) -> Result<InfSupEstimate> {
    let np = b.nrows;
    if np <= 1 {
        return Err(Error::Config(format!(
            "inf-sup estimate needs at least two pressure DOFs; the zero-mean subspace of {np} is empty"
        )));
    }
    let aug = AugmentedSystem::new(n1, b, mean)?;
    let zero = vec![0.0; aug.velocity_dim()];
    // With N1 w + Bᵀp = 0, Bw + mλ = Mq and mᵀp = 0, −p = T q where T inverts the
    // Schur complement on the zero-mean subspace.
    let apply = |q: &[f64]| -> Result<Vec<f64>> {
        let s = aug.solve(&zero, &mp.mul_vec(q))?;
        Ok(s.p.iter().map(|v| -v).collect())
    };
    let mut q = start_vector(np);
    let total: f64 = mean.iter().sum();
    let c = dot(mean, &q) / total;
    q.iter_mut().for_each(|v| *v -= c);
    let r = lanczos_max(apply, mp, &q, np - 1)?;
    if !(r.theta_max > 0.0) {
        return Err(Error::Singular(format!("inf-sup eigen-iteration returned {:.3e}", r.theta_max)));
    }
    Ok(InfSupEstimate {
        beta: (1.0 / r.theta_max).sqrt(),
        deflated: true,
        iterations: r.iterations,
        residual: r.residual,
    })
}

/// Smallest Rayleigh quotient of A + S against the |||·|||_{A_h} norm matrix.
pub fn coercivity(system: &StokesSystem) -> Result<f64> {
    let v = system.velocity_block();
    let factor = SymmetricFactor::new(&v)?;
    let apply = |x: &[f64]| -> Result<Vec<f64>> {
        let out = factor.solve(&system.na.mul_vec(x));
        if out.iter().all(|v| v.is_finite()) {
            Ok(out)
        } else {
            Err(Error::Singular("A + S solve produced non-finite values".into()))
        }
    };
    let start = start_vector(v.nrows);
    let r = lanczos_max(apply, &system.na, &start, v.nrows)?;
    if !(r.theta_max > 0.0) {
        return Err(Error::Singular("A + S is not positive against the energy norm".into()));
    }
    Ok(1.0 / r.theta_max)
}

/// Brezzi composition of coercivity `alpha`, continuity `c` and inf-sup `beta`,
/// all in the energy norm.
pub fn brezzi_constant(alpha: f64, c: f64, beta: Option<f64>) -> f64 {
    match beta {
        None => alpha,
        Some(b) => alpha.min(2.0 * b * b / (c + (c * c + 4.0 * b * b).sqrt())),
    }
}

/// Lower bound on the combined inf-sup constant β₃.
pub fn brezzi_check(system: &StokesSystem, estimate: Option<&InfSupEstimate>) -> Result<f64> {
    let alpha = coercivity(system)?;
    let c = match system.form_a {
        FormA::A1 => 1.0,
        FormA::A2 => 1.0 + 0.5 * (-system.min_curvature.unwrap_or(0.0)).max(0.0),
    };
    // N_A ≤ max(1, ηh)·N1, so β_h in |||·|||₁ transfers with that factor.
    let beta = estimate.map(|e| e.beta / (system.eta * system.h).max(1.0).sqrt());
    Ok(brezzi_constant(alpha, c, beta))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_1d(n: usize, shift: f64) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0 + shift));
            if i > 0 {
                t.push((i, i - 1, -1.0));
                t.push((i - 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, n, &t)
    }

    #[test]
    fn augmented_round_trip() {
        let v = laplace_1d(6, 1.0);
        let b = CsrMatrix::from_triplets(3, 6, &[(0, 0, 1.0), (0, 1, -1.0), (1, 2, 1.0), (1, 3, 1.0), (2, 5, 2.0)]);
        let mean = [1.0, 2.0, 1.0];
        let aug = AugmentedSystem::new(&v, &b, &mean).unwrap();
        let u0 = [0.1, -0.3, 0.2, 0.5, 0.0, 1.0];
        let p0 = [1.0, -1.0, 1.0];
        let f: Vec<f64> = v.mul_vec(&u0).iter().zip(b.transpose().mul_vec(&p0)).map(|(a, b)| a + b).collect();
        let g = b.mul_vec(&u0);
        let s = aug.solve(&f, &g).unwrap();
        for (a, b) in s.u.iter().zip(&u0) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in s.p.iter().zip(&p0) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(s.lambda.abs() < 1e-12);
    }

    #[test]
    fn singular_detected() {
        let v = laplace_1d(3, 0.0);
        let b = CsrMatrix::from_triplets(2, 3, &[(0, 0, 1.0), (1, 0, 1.0)]);
        let r = AugmentedSystem::new(&v, &b, &[1.0, 1.0]).and_then(|a| a.solve(&[1.0; 3], &[0.0; 2]));
        assert!(matches!(r, Err(Error::Singular(_))), "{r:?}");
    }

    #[test]
    fn lanczos_finds_top_eigenvalue() {
        let n = 40;
        let a = laplace_1d(n, 0.0);
        let id = CsrMatrix::from_triplets(n, n, &(0..n).map(|i| (i, i, 1.0)).collect::<Vec<_>>());
        let r = lanczos_max(|x| Ok(a.mul_vec(x)), &id, &start_vector(n), n).unwrap();
        let exact = 2.0 - 2.0 * (std::f64::consts::PI * n as f64 / (n as f64 + 1.0)).cos();
        assert!((r.theta_max - exact).abs() < 1e-8 * exact);
    }

    #[test]
    fn lanczos_generalized() {
        // A x = θ M x with diagonal A and M.
        let n = 10;
        let a = CsrMatrix::from_triplets(n, n, &(0..n).map(|i| (i, i, (i + 1) as f64)).collect::<Vec<_>>());
        let m = CsrMatrix::from_triplets(n, n, &(0..n).map(|i| (i, i, 2.0)).collect::<Vec<_>>());
        let apply = |x: &[f64]| Ok(a.mul_vec(x).iter().map(|v| v / 2.0).collect());
        let r = lanczos_max(apply, &m, &start_vector(n), n).unwrap();
        assert!((r.theta_max - 5.0).abs() < 1e-10);
    }

    #[test]
    fn empty_subspace() {
        let id = CsrMatrix::from_triplets(1, 1, &[(0, 0, 1.0)]);
        assert!(matches!(lanczos_max(|x| Ok(x.to_vec()), &id, &[1.0], 0), Err(Error::Config(_))));
        let b = CsrMatrix::from_triplets(1, 3, &[(0, 0, 1.0)]);
        let n1 = laplace_1d(3, 1.0);
        assert!(matches!(estimate_inf_sup(&b, &n1, &id, &[1.0]), Err(Error::Config(_))));
    }

    #[test]
    fn brezzi_composition() {
        assert_eq!(brezzi_constant(0.7, 1.0, None), 0.7);
        let b = 0.3;
        let x = brezzi_constant(10.0, 1.0, Some(b));
        // x solves x² + C x = β².
        assert!((x * x + x - b * b).abs() < 1e-15);
        assert!(x > 0.0 && x <= b);
        assert_eq!(brezzi_constant(0.01, 1.0, Some(b)), 0.01);
    }
}

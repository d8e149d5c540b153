//! Deterministic references for `f_* = (L_theta + Q)^{-1} Q g`: a dense
//! Cholesky solve and (preconditioned) conjugate gradient.

use std::time::{Duration, Instant};

use nalgebra::{Cholesky, DMatrix, Dyn};
use num_complex::Complex64;

use crate::dense::{check_dense_cap, to_dvector};
use crate::error::{Error, Result};
use crate::graph::SmoothingProblem;
use crate::laplacian::SparseHermitianOperator;
use crate::signal::ComplexSignal;

/// Right-hand side `Q g`.
pub fn regularized_rhs(problem: &SmoothingProblem<'_>, g: &ComplexSignal) -> ComplexSignal {
    g.iter().zip(problem.q()).map(|(z, q)| z * q).collect()
}

/// Cholesky factorization of `L_theta + Q`, reusable across right-hand sides.
pub struct ExactSolver {
    factor: Cholesky<Complex64, Dyn>,
    q: Vec<f64>,
}

impl ExactSolver {
    pub fn new(problem: &SmoothingProblem<'_>) -> Result<Self> {
        check_dense_cap(problem.n_nodes())?;
        let a = SparseHermitianOperator::regularized(problem).to_dense();
        let factor = Cholesky::new(a).ok_or(Error::NotPositiveDefinite)?;
        Ok(Self {
            factor,
            q: problem.q().to_vec(),
        })
    }

    /// Solves `(L_theta + Q) x = b`.
    pub fn solve_raw(&self, b: &ComplexSignal) -> Result<ComplexSignal> {
        b.check_len(self.q.len())?;
        let x = self.factor.solve(&to_dvector(b.as_slice()));
        Ok(ComplexSignal::new(x.iter().copied().collect()))
    }

    /// `f_* = (L_theta + Q)^{-1} Q g`.
    pub fn smooth(&self, g: &ComplexSignal) -> Result<ComplexSignal> {
        g.check_len(self.q.len())?;
        let qg: ComplexSignal = g.iter().zip(&self.q).map(|(z, q)| z * q).collect();
        self.solve_raw(&qg)
    }

    pub fn inverse(&self) -> DMatrix<Complex64> {
        self.factor.inverse()
    }
}

/// Exact Tikhonov solution by dense factorization.
pub fn solve_exact(problem: &SmoothingProblem<'_>, g: &ComplexSignal) -> Result<ComplexSignal> {
    ExactSolver::new(problem)?.smooth(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preconditioner {
    None,
    /// `(D + Q)^{-1}`, the diagonal of the system matrix.
    Diagonal,
}

#[derive(Debug, Clone)]
pub struct CgOptions {
    pub max_iters: usize,
    pub preconditioner: Preconditioner,
    /// Stop once `|r| <= tol * |Q g|`.
    pub tol: f64,
}

impl CgOptions {
    pub fn new(max_iters: usize, preconditioner: Preconditioner) -> Self {
        Self {
            max_iters,
            preconditioner,
            tol: 1e-14,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CgResult {
    pub solution: ComplexSignal,
    pub iterations: usize,
    /// Residual norm before the first iteration and after each one.
    pub residuals: Vec<f64>,
    /// Wall time elapsed at each entry of `residuals`.
    pub times: Vec<Duration>,
    pub converged: bool,
    /// Set when a search direction had zero curvature.
    pub breakdown: bool,
}

/// Conjugate gradient on `(L_theta + Q) f = Q g`, started from `f_0 = g`.
pub fn solve_cg(problem: &SmoothingProblem<'_>, g: &ComplexSignal, options: &CgOptions) -> Result<CgResult> {
    let op = SparseHermitianOperator::regularized(problem);
    solve_cg_with(&op, problem, g, g.clone(), options)
}

/// Conjugate gradient with a prebuilt `L_theta + Q` and an explicit start.
pub fn solve_cg_with(
    op: &SparseHermitianOperator,
    problem: &SmoothingProblem<'_>,
    g: &ComplexSignal,
    start: ComplexSignal,
    options: &CgOptions,
) -> Result<CgResult> {
    let n = problem.n_nodes();
    g.check_len(n)?;
    start.check_len(n)?;
    if options.max_iters == 0 {
        return Err(Error::InvalidParameter("CG needs at least one iteration".into()));
    }
    let clock = Instant::now();
    let b = regularized_rhs(problem, g);
    let b_norm = b.norm();
    let inv_diag: Vec<f64> = match options.preconditioner {
        Preconditioner::None => vec![1.0; n],
        Preconditioner::Diagonal => op.diagonal().iter().map(|d| d.recip()).collect(),
    };
    let apply_precond = |r: &[Complex64], z: &mut [Complex64]| {
        for ((zi, ri), p) in z.iter_mut().zip(r).zip(&inv_diag) {
            *zi = ri * p;
        }
    };

    let mut x = start.into_vec();
    let mut ap = vec![Complex64::new(0.0, 0.0); n];
    op.matvec_into(&x, &mut ap)?;
    let mut r: Vec<Complex64> = b.iter().zip(&ap).map(|(bi, ai)| bi - ai).collect();
    let mut z = vec![Complex64::new(0.0, 0.0); n];
    apply_precond(&r, &mut z);
    let mut p = z.clone();
    let mut rz: f64 = dot(&r, &z).re;

    let mut residuals = vec![norm(&r)];
    let mut times = vec![clock.elapsed()];
    let threshold = options.tol * b_norm;
    let mut converged = residuals[0] <= threshold;
    let mut breakdown = false;
    let mut iterations = 0;

    while !converged && iterations < options.max_iters {
        op.matvec_into(&p, &mut ap)?;
        let curvature = dot(&p, &ap).re;
        if !(curvature > 0.0) {
            breakdown = true;
            break;
        }
        let alpha = rz / curvature;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        iterations += 1;
        let rn = norm(&r);
        residuals.push(rn);
        times.push(clock.elapsed());
        if rn <= threshold {
            converged = true;
            break;
        }
        apply_precond(&r, &mut z);
        let rz_next = dot(&r, &z).re;
        let beta = rz_next / rz;
        rz = rz_next;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }

    Ok(CgResult {
        solution: ComplexSignal::new(x),
        iterations,
        residuals,
        times,
        converged,
        breakdown,
    })
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

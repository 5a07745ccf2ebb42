//! Deflated, Jacobi-preconditioned conjugate gradient for singular
//! positive-semidefinite systems.
//!
//! The kernel is handled by projection: the right-hand side and the
//! residual are kept orthogonal to a supplied orthonormal kernel basis, so
//! CG runs on the restriction of the operator to the kernel's complement,
//! where it is positive definite.

use serde::{Deserialize, Serialize};

use crate::dec::HodgeOperator;
use crate::error::{GvfError, Result};
use crate::scalar::Real;

/// Coefficients of b along the kernel basis below this relative size are
/// treated as already absent and not subtracted.
const PROJECTION_CUT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Relative residual target.
    pub tol: f64,
    /// Iteration cap; `None` means ten times the problem size.
    pub max_iter: Option<usize>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-10,
            max_iter: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(GvfError::InvalidConfig(format!(
                "solver tol must be positive, got {}",
                self.tol
            )));
        }
        if let Some(0) = self.max_iter {
            return Err(GvfError::InvalidConfig("max_iter must be at least 1".into()));
        }
        Ok(())
    }

    pub fn iteration_cap(&self, n: usize) -> usize {
        self.max_iter.unwrap_or_else(|| 10 * n.max(1))
    }
}

/// Iteration count and achieved relative residual of one solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    pub iterations: usize,
    pub residual: f64,
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).fold(T::zero(), |s, v| s + v)
}

fn norm<T: Real>(a: &[T]) -> f64 {
    dot(a, a).to_f64_lossy().sqrt()
}

fn project_out<T: Real>(v: &mut [T], basis: &[Vec<T>]) {
    for k in basis {
        let c = dot(v, k);
        if c != T::zero() {
            for (vi, ki) in v.iter_mut().zip(k) {
                *vi -= c * *ki;
            }
        }
    }
}

/// Solves `A x = b` restricted to the complement of `deflation_basis`.
///
/// Returns the solution (orthogonal to the basis) and solve diagnostics.
/// `b` is projected onto the complement first; a zero projected right-hand
/// side returns immediately with the zero vector.
pub fn cg_solve<T: Real>(
    a: &HodgeOperator<T>,
    b: &[T],
    deflation_basis: &[Vec<T>],
    cfg: &SolverConfig,
) -> Result<(Vec<T>, SolveDiagnostics)> {
    cfg.validate()?;
    let n = a.matrix.nrows();
    if b.len() != n {
        return Err(GvfError::DimensionMismatch {
            context: "cg right-hand side",
            expected: n,
            got: b.len(),
        });
    }

    let mut rhs = b.to_vec();
    let b_norm = norm(&rhs);
    for k in deflation_basis {
        let c = dot(&rhs, k);
        if c.to_f64_lossy().abs() > PROJECTION_CUT * b_norm {
            for (vi, ki) in rhs.iter_mut().zip(k) {
                *vi -= c * *ki;
            }
        }
    }
    let rhs_norm = norm(&rhs);
    if rhs_norm == 0.0 {
        return Ok((
            vec![T::zero(); n],
            SolveDiagnostics {
                iterations: 0,
                residual: 0.0,
            },
        ));
    }

    // Jacobi scaling; zero diagonal entries (isolated simplices) pass through.
    let minv: Vec<T> = a
        .matrix
        .diagonal()
        .into_iter()
        .map(|d| {
            if d > T::zero() {
                T::one() / d
            } else {
                T::one()
            }
        })
        .collect();

    let mut x = vec![T::zero(); n];
    let mut r = rhs;
    let mut z: Vec<T> = r.iter().zip(&minv).map(|(&ri, &mi)| ri * mi).collect();
    project_out(&mut z, deflation_basis);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![T::zero(); n];
    let cap = cfg.iteration_cap(n);

    for iter in 1..=cap {
        a.matrix.matvec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= T::zero() {
            return Err(GvfError::NonConvergence {
                iterations: iter,
                residual: norm(&r) / rhs_norm,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        project_out(&mut r, deflation_basis);
        let rel = norm(&r) / rhs_norm;
        if rel <= cfg.tol {
            project_out(&mut x, deflation_basis);
            return Ok((
                x,
                SolveDiagnostics {
                    iterations: iter,
                    residual: rel,
                },
            ));
        }
        for i in 0..n {
            z[i] = r[i] * minv[i];
        }
        project_out(&mut z, deflation_basis);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        rz = rz_new;
    }

    Err(GvfError::NonConvergence {
        iterations: cap,
        residual: norm(&r) / rhs_norm,
    })
}

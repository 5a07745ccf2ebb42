//! Helmholtz-Hodge decomposition of an edge flow.
//!
//! A 1-cochain F splits uniquely into mutually orthogonal pieces
//! `F = grad(phi) + B2 psi + h`: the potential part solves
//! `D0 phi = div F`, the stream part solves `D2 psi = curl F`, and the
//! harmonic remainder lies in ker(D1), whose dimension is beta1. Both
//! systems are solved per channel by deflated conjugate gradient.

mod cg;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::complex::SimplicialComplex;
use crate::dec::{self, Cochain};
use crate::error::Result;
use crate::scalar::Real;
pub use cg::{cg_solve, SolveDiagnostics, SolverConfig};

/// Above this many triangles the kernel of D2 is assumed trivial instead of
/// being extracted by a dense eigen solve.
const KER2_EIGEN_LIMIT: usize = 256;

/// Eigenvalues below this fraction of the largest count as zero.
pub const KERNEL_EIGEN_CUT: f64 = 1e-9;

/// Per-solve diagnostics of one decomposition, one entry per channel.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct DecompositionDiagnostics {
    pub potential_solves: Vec<SolveDiagnostics>,
    pub stream_solves: Vec<SolveDiagnostics>,
}

impl DecompositionDiagnostics {
    pub fn max_iterations(&self) -> usize {
        self.potential_solves
            .iter()
            .chain(&self.stream_solves)
            .map(|d| d.iterations)
            .max()
            .unwrap_or(0)
    }
}

/// The orthogonal triple of a 1-cochain plus the potentials that generate
/// the first two parts.
#[derive(Debug, Clone)]
pub struct HodgeDecomposition<T> {
    pub potential: Cochain<T>,
    pub stream: Cochain<T>,
    pub grad_part: Cochain<T>,
    pub curl_part: Cochain<T>,
    pub harmonic_part: Cochain<T>,
    pub diagnostics: DecompositionDiagnostics,
    flow_norm_sq: T,
}

/// Component energy as a fraction of the input flow energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyFractions<T> {
    pub gradient: T,
    pub curl: T,
    pub harmonic: T,
}

/// Machine-readable decomposition report.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DecompositionReport<T: Real> {
    pub energy_fractions: EnergyFractions<T>,
    /// `|F - (g + c + h)| / |F|`.
    pub reconstruction_residual: T,
    /// Pairwise inner products relative to `|F|^2`: (g,c), (g,h), (c,h).
    pub orthogonality_residuals: [T; 3],
    pub harmonic_div_norm: T,
    pub harmonic_curl_norm: T,
    pub diagnostics: DecompositionDiagnostics,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub components: Option<DecompositionComponents<T>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DecompositionComponents<T: Real> {
    pub potential: Cochain<T>,
    pub stream: Cochain<T>,
    pub grad_part: Cochain<T>,
    pub curl_part: Cochain<T>,
    pub harmonic_part: Cochain<T>,
}

impl<T: Real> HodgeDecomposition<T> {
    pub fn energy_fractions(&self) -> EnergyFractions<T> {
        let total = self.flow_norm_sq;
        let frac = |c: &Cochain<T>| {
            if total > T::zero() {
                let n = c.norm();
                n * n / total
            } else {
                T::zero()
            }
        };
        EnergyFractions {
            gradient: frac(&self.grad_part),
            curl: frac(&self.curl_part),
            harmonic: frac(&self.harmonic_part),
        }
    }

    pub fn flow_norm(&self) -> T {
        self.flow_norm_sq.sqrt()
    }

    /// Builds the report; set `include_components` to embed the raw cochains.
    pub fn report(
        &self,
        complex: &SimplicialComplex,
        flow: &Cochain<T>,
        include_components: bool,
    ) -> Result<DecompositionReport<T>> {
        let reconstructed = self
            .grad_part
            .add(&self.curl_part)
            .add(&self.harmonic_part);
        let fnorm = self.flow_norm();
        let denom_v = if fnorm > T::zero() { fnorm } else { T::one() };
        let denom_e = if self.flow_norm_sq > T::zero() {
            self.flow_norm_sq
        } else {
            T::one()
        };
        let ortho = [
            dec::inner(&self.grad_part, &self.curl_part)?.abs() / denom_e,
            dec::inner(&self.grad_part, &self.harmonic_part)?.abs() / denom_e,
            dec::inner(&self.curl_part, &self.harmonic_part)?.abs() / denom_e,
        ];
        Ok(DecompositionReport {
            energy_fractions: self.energy_fractions(),
            reconstruction_residual: flow.sub(&reconstructed).norm() / denom_v,
            orthogonality_residuals: ortho,
            harmonic_div_norm: dec::div(complex, &self.harmonic_part)?.norm() / denom_v,
            harmonic_curl_norm: dec::curl(complex, &self.harmonic_part)?.norm() / denom_v,
            diagnostics: self.diagnostics.clone(),
            components: include_components.then(|| DecompositionComponents {
                potential: self.potential.clone(),
                stream: self.stream.clone(),
                grad_part: self.grad_part.clone(),
                curl_part: self.curl_part.clone(),
                harmonic_part: self.harmonic_part.clone(),
            }),
        })
    }
}

/// Orthonormal indicator basis of ker(D0): one normalised indicator vector
/// per connected component.
pub fn component_kernel_basis<T: Real>(complex: &SimplicialComplex) -> Vec<Vec<T>> {
    let n = complex.vertex_count();
    if n == 0 {
        return Vec::new();
    }
    let (count, labels) = complex.connected_components();
    let mut sizes = vec![0usize; count];
    for &l in &labels {
        sizes[l] += 1;
    }
    let mut basis = vec![vec![T::zero(); n]; count];
    for (v, &l) in labels.iter().enumerate() {
        basis[l][v] = T::one() / T::from_f64_lossy(sizes[l] as f64).sqrt();
    }
    basis
}

/// Numerically extracted kernel basis of D2 for small triangle counts;
/// trivial otherwise. Generic constructions have empty ker(D2), so the
/// eigen solve is a small-complex safeguard.
fn stream_kernel_basis<T: Real>(complex: &SimplicialComplex) -> Result<Vec<Vec<T>>> {
    let nt = complex.triangle_count();
    if nt == 0 || nt > KER2_EIGEN_LIMIT {
        return Ok(Vec::new());
    }
    let d2 = dec::hodge_laplacian::<T>(complex, 2)?;
    let (vals, vecs) = crate::linalg::symmetric_eigen(&d2.matrix)?;
    let lambda_max = vals.last().copied().unwrap_or(0.0).max(0.0);
    let cut = KERNEL_EIGEN_CUT * lambda_max;
    let mut basis = Vec::new();
    for (v, vec) in vals.iter().zip(vecs) {
        if *v <= cut {
            basis.push(vec.into_iter().map(T::from_f64_lossy).collect());
        }
    }
    Ok(basis)
}

/// Decomposes a 1-cochain channel by channel.
///
/// With no triangles the stream solve is skipped: psi is empty, the curl
/// part is zero, and the remainder splits between gradient and harmonic.
pub fn decompose<T: Real>(
    complex: &SimplicialComplex,
    flow: &Cochain<T>,
    cfg: &SolverConfig,
) -> Result<HodgeDecomposition<T>> {
    cfg.validate()?;
    flow.check_against(complex, "decompose flow")?;
    let m = flow.channels();
    let nv = complex.vertex_count();
    let nt = complex.triangle_count();

    let d0 = dec::hodge_laplacian::<T>(complex, 0)?;
    let ker0 = component_kernel_basis::<T>(complex);
    let (d2, ker2) = if nt > 0 {
        (
            Some(dec::hodge_laplacian::<T>(complex, 2)?),
            stream_kernel_basis::<T>(complex)?,
        )
    } else {
        (None, Vec::new())
    };

    let div_f = dec::div(complex, flow)?;
    let curl_f = dec::curl(complex, flow)?;

    let mut potential = Array2::zeros((nv, m));
    let mut stream = Array2::zeros((nt, m));
    let mut diagnostics = DecompositionDiagnostics::default();

    for c in 0..m {
        let b0: Vec<T> = div_f.values().column(c).to_vec();
        let (phi, diag) = cg_solve(&d0, &b0, &ker0, cfg)?;
        for (i, v) in phi.into_iter().enumerate() {
            potential[(i, c)] = v;
        }
        diagnostics.potential_solves.push(diag);

        if let Some(d2) = &d2 {
            let b2: Vec<T> = curl_f.values().column(c).to_vec();
            let (psi, diag) = cg_solve(d2, &b2, &ker2, cfg)?;
            for (i, v) in psi.into_iter().enumerate() {
                stream[(i, c)] = v;
            }
            diagnostics.stream_solves.push(diag);
        }
    }

    let potential = Cochain::new(0, potential)?;
    let stream = Cochain::new(2, stream)?;
    let grad_part = dec::grad(complex, &potential)?;
    let curl_part = dec::curl_adjoint(complex, &stream)?;
    let harmonic_part = flow.sub(&grad_part).sub(&curl_part);
    let fnorm = flow.norm();

    Ok(HodgeDecomposition {
        potential,
        stream,
        grad_part,
        curl_part,
        harmonic_part,
        diagnostics,
        flow_norm_sq: fnorm * fnorm,
    })
}

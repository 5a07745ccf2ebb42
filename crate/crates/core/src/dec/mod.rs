//! Discrete exterior calculus on a fixed complex.
//!
//! Cochains are vector-valued (m channels); every operator acts channelwise,
//! so the Kronecker structure with the identity on channels is never
//! materialised. The Hodge star is the identity, which makes gradient and
//! divergence mutually adjoint under the plain combinatorial inner product.

mod sparse;

use ndarray::Array2;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::complex::SimplicialComplex;
use crate::error::{GvfError, Result};
use crate::scalar::Real;
pub use sparse::CsrMatrix;

/// Vector-valued function on the k-simplices, rows in canonical simplex
/// order, one column per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Cochain<T> {
    degree: usize,
    values: Array2<T>,
}

impl<T: Real> Cochain<T> {
    pub fn new(degree: usize, values: Array2<T>) -> Result<Self> {
        if degree > 2 {
            return Err(GvfError::InvalidInput(format!(
                "cochain degree {degree} out of range"
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(GvfError::InvalidInput(
                "cochain contains non-finite entries".into(),
            ));
        }
        Ok(Cochain { degree, values })
    }

    pub fn zeros(degree: usize, simplices: usize, channels: usize) -> Self {
        Cochain {
            degree,
            values: Array2::zeros((simplices, channels)),
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn simplex_count(&self) -> usize {
        self.values.nrows()
    }

    pub fn channels(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<T> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut Array2<T> {
        &mut self.values
    }

    pub fn into_values(self) -> Array2<T> {
        self.values
    }

    /// Frobenius norm over all simplices and channels.
    pub fn norm(&self) -> T {
        self.values
            .iter()
            .map(|&v| v * v)
            .fold(T::zero(), |a, b| a + b)
            .sqrt()
    }

    pub fn scaled(&self, factor: T) -> Self {
        Cochain {
            degree: self.degree,
            values: self.values.mapv(|v| v * factor),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.degree, other.degree);
        Cochain {
            degree: self.degree,
            values: &self.values + &other.values,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.degree, other.degree);
        Cochain {
            degree: self.degree,
            values: &self.values - &other.values,
        }
    }

    /// Single-channel view as a new cochain.
    pub fn channel(&self, c: usize) -> Self {
        Cochain {
            degree: self.degree,
            values: self
                .values
                .column(c)
                .to_owned()
                .into_shape_with_order((self.values.nrows(), 1))
                .expect("column reshape"),
        }
    }

    /// Number of k-simplices the complex carries for this degree.
    pub fn expected_len(complex: &SimplicialComplex, degree: usize) -> usize {
        match degree {
            0 => complex.vertex_count(),
            1 => complex.edge_count(),
            _ => complex.triangle_count(),
        }
    }

    pub fn check_against(&self, complex: &SimplicialComplex, context: &'static str) -> Result<()> {
        let expected = Self::expected_len(complex, self.degree);
        if self.simplex_count() != expected {
            return Err(GvfError::DimensionMismatch {
                context,
                expected,
                got: self.simplex_count(),
            });
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct CochainFile<T> {
    degree: usize,
    channels: usize,
    values: Vec<Vec<T>>,
}

impl<T: Real> Serialize for Cochain<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        CochainFile {
            degree: self.degree,
            channels: self.channels(),
            values: self
                .values
                .rows()
                .into_iter()
                .map(|r| r.to_vec())
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de, T: Real> Deserialize<'de> for Cochain<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let file = CochainFile::<T>::deserialize(deserializer)?;
        let rows = file.values.len();
        let mut flat = Vec::with_capacity(rows * file.channels);
        for row in &file.values {
            if row.len() != file.channels {
                return Err(serde::de::Error::custom(format!(
                    "cochain row has {} entries, expected {} channels",
                    row.len(),
                    file.channels
                )));
            }
            flat.extend_from_slice(row);
        }
        let values = Array2::from_shape_vec((rows, file.channels), flat)
            .map_err(serde::de::Error::custom)?;
        Cochain::new(file.degree, values).map_err(serde::de::Error::custom)
    }
}

/// Sparse symmetric positive-semidefinite Hodge Laplacian of one degree.
#[derive(Debug, Clone)]
pub struct HodgeOperator<T> {
    pub degree: usize,
    pub matrix: CsrMatrix<T>,
}

/// Gradient: value on oriented edge (i,j) is `r_j - r_i` per channel.
pub fn grad<T: Real>(complex: &SimplicialComplex, r: &Cochain<T>) -> Result<Cochain<T>> {
    if r.degree() != 0 {
        return Err(GvfError::InvalidInput("grad expects a 0-cochain".into()));
    }
    r.check_against(complex, "grad input")?;
    let m = r.channels();
    let mut out = Array2::zeros((complex.edge_count(), m));
    for (e, &(i, j)) in complex.edges().iter().enumerate() {
        for c in 0..m {
            out[(e, c)] = r.values()[(j, c)] - r.values()[(i, c)];
        }
    }
    Cochain::new(1, out)
}

/// Divergence `B1 F`: the signed node balance of an edge flow. With the
/// boundary orientation used here, the tail of every edge receives the
/// negative sign (a single unit flow on edge (a,b) gives -1 at a, +1 at b).
pub fn div<T: Real>(complex: &SimplicialComplex, flow: &Cochain<T>) -> Result<Cochain<T>> {
    if flow.degree() != 1 {
        return Err(GvfError::InvalidInput("div expects a 1-cochain".into()));
    }
    flow.check_against(complex, "div input")?;
    let m = flow.channels();
    let mut out = Array2::zeros((complex.vertex_count(), m));
    for (e, &(i, j)) in complex.edges().iter().enumerate() {
        for c in 0..m {
            let f = flow.values()[(e, c)];
            out[(i, c)] = out[(i, c)] - f;
            out[(j, c)] = out[(j, c)] + f;
        }
    }
    Cochain::new(0, out)
}

/// Curl `B2^T F`: oriented circulation per triangle; the empty 2-cochain
/// when the complex has no triangles.
pub fn curl<T: Real>(complex: &SimplicialComplex, flow: &Cochain<T>) -> Result<Cochain<T>> {
    if flow.degree() != 1 {
        return Err(GvfError::InvalidInput("curl expects a 1-cochain".into()));
    }
    flow.check_against(complex, "curl input")?;
    let m = flow.channels();
    let mut out = Array2::zeros((complex.triangle_count(), m));
    for t in 0..complex.triangle_count() {
        for &(e, s) in complex.b2().column(t) {
            let s = T::from_f64_lossy(s as f64);
            for c in 0..m {
                out[(t, c)] = out[(t, c)] + s * flow.values()[(e, c)];
            }
        }
    }
    Cochain::new(2, out)
}

/// Adjoint of the curl under the identity Hodge star: `B2 psi`, mapping a
/// 2-cochain down to edges.
pub fn curl_adjoint<T: Real>(complex: &SimplicialComplex, psi: &Cochain<T>) -> Result<Cochain<T>> {
    if psi.degree() != 2 {
        return Err(GvfError::InvalidInput(
            "curl_adjoint expects a 2-cochain".into(),
        ));
    }
    psi.check_against(complex, "curl_adjoint input")?;
    let m = psi.channels();
    let mut out = Array2::zeros((complex.edge_count(), m));
    for t in 0..complex.triangle_count() {
        for &(e, s) in complex.b2().column(t) {
            let s = T::from_f64_lossy(s as f64);
            for c in 0..m {
                out[(e, c)] = out[(e, c)] + s * psi.values()[(t, c)];
            }
        }
    }
    Cochain::new(1, out)
}

/// Combinatorial inner product: plain sum of elementwise products over
/// simplices and channels (identity Hodge star).
pub fn inner<T: Real>(a: &Cochain<T>, b: &Cochain<T>) -> Result<T> {
    if a.degree() != b.degree()
        || a.simplex_count() != b.simplex_count()
        || a.channels() != b.channels()
    {
        return Err(GvfError::DimensionMismatch {
            context: "inner product",
            expected: a.simplex_count() * a.channels(),
            got: b.simplex_count() * b.channels(),
        });
    }
    Ok(a.values()
        .iter()
        .zip(b.values().iter())
        .map(|(&x, &y)| x * y)
        .fold(T::zero(), |acc, v| acc + v))
}

/// Hodge Laplacian of degree k as an exact integer product cast to T:
/// `D0 = B1 B1^T`, `D1 = B1^T B1 + B2 B2^T`, `D2 = B2^T B2`.
pub fn hodge_laplacian<T: Real>(complex: &SimplicialComplex, k: usize) -> Result<HodgeOperator<T>> {
    let mut acc: std::collections::BTreeMap<(usize, usize), i64> = std::collections::BTreeMap::new();
    let bump = |i: usize, j: usize, v: i64, acc: &mut std::collections::BTreeMap<(usize, usize), i64>| {
        *acc.entry((i, j)).or_insert(0) += v;
    };
    let size = match k {
        0 => {
            for &(i, j) in complex.edges() {
                bump(i, i, 1, &mut acc);
                bump(j, j, 1, &mut acc);
                bump(i, j, -1, &mut acc);
                bump(j, i, -1, &mut acc);
            }
            complex.vertex_count()
        }
        1 => {
            // B1^T B1: edges sharing a vertex.
            let mut vertex_edges: Vec<Vec<(usize, i64)>> = vec![Vec::new(); complex.vertex_count()];
            for (e, &(i, j)) in complex.edges().iter().enumerate() {
                vertex_edges[i].push((e, -1));
                vertex_edges[j].push((e, 1));
            }
            for incident in &vertex_edges {
                for &(e1, s1) in incident {
                    for &(e2, s2) in incident {
                        bump(e1, e2, s1 * s2, &mut acc);
                    }
                }
            }
            // B2 B2^T: edges sharing a triangle.
            for t in 0..complex.triangle_count() {
                let col = complex.b2().column(t);
                for &(e1, s1) in col {
                    for &(e2, s2) in col {
                        bump(e1, e2, (s1 as i64) * (s2 as i64), &mut acc);
                    }
                }
            }
            complex.edge_count()
        }
        2 => {
            // B2^T B2: triangles sharing an edge.
            let mut edge_tris: Vec<Vec<(usize, i64)>> = vec![Vec::new(); complex.edge_count()];
            for t in 0..complex.triangle_count() {
                for &(e, s) in complex.b2().column(t) {
                    edge_tris[e].push((t, s as i64));
                }
            }
            for incident in &edge_tris {
                for &(t1, s1) in incident {
                    for &(t2, s2) in incident {
                        bump(t1, t2, s1 * s2, &mut acc);
                    }
                }
            }
            complex.triangle_count()
        }
        _ => {
            return Err(GvfError::InvalidInput(format!(
                "Hodge Laplacian degree {k} out of range"
            )))
        }
    };
    let triplets: Vec<(usize, usize, T)> = acc
        .into_iter()
        .filter(|&(_, v)| v != 0)
        .map(|((i, j), v)| (i, j, T::from_f64_lossy(v as f64)))
        .collect();
    Ok(HodgeOperator {
        degree: k,
        matrix: CsrMatrix::from_triplets(size, size, &triplets),
    })
}

/// Measured operator norm of the curl (largest singular value of B2) via
/// power iteration on `B2^T B2`.
pub fn curl_operator_norm(complex: &SimplicialComplex) -> Result<f64> {
    if complex.triangle_count() == 0 {
        return Ok(0.0);
    }
    let d2 = hodge_laplacian::<f64>(complex, 2)?;
    Ok(crate::linalg::power_iteration_sym(&d2.matrix, 200).sqrt())
}

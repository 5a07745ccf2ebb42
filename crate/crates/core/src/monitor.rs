//! Derived monitoring signals: progression score, cyclic risk index,
//! component annotation, and the spectral shift proxy.
//!
//! The progression score projects each agent's net outflow onto the learned
//! unit risk axes, so positive means net source. The cyclic risk index is
//! the mean curl magnitude over incident triangles. The shift proxy compares
//! sorted Laplacian spectra of consecutive window complexes.

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::complex::{NodeKind, SimplicialComplex};
use crate::dec::{self, Cochain};
use crate::error::{GvfError, Result};
use crate::hhd::{EnergyFractions, HodgeDecomposition};
use crate::model::BundleConfig;
use crate::scalar::Real;

pub const INTERVENTION_GRADIENT: &str = "Reduce source (exposure, shift pattern)";
pub const INTERVENTION_CURL: &str = "Break cycle (sleep hygiene, pharmacological)";
pub const INTERVENTION_HARMONIC: &str = "Restructure network (scheduling, zoning)";
pub const INTERVENTION_NONE: &str = "none";

/// Eigenvalues serialised per spectrum before truncation kicks in.
pub const SPECTRUM_TRUNCATE: usize = 128;

/// Risk axes and modality weights for scoring.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ScoreConfig<T: Real> {
    /// Unit risk axis per modality, dimension fiber_dim(n).
    pub risk_axes: Vec<Array1<T>>,
    /// Positive weights summing to one.
    pub weights: Vec<T>,
}

impl<T: Real> ScoreConfig<T> {
    /// Uniform weights and the initial axes `1/sqrt(m_n)`.
    pub fn uniform(bundle: &BundleConfig) -> Self {
        let n = bundle.modality_count();
        ScoreConfig {
            risk_axes: (0..n)
                .map(|i| {
                    let m_n = bundle.fiber_range(i).len();
                    Array1::from_elem(m_n, T::one() / T::from_f64_lossy(m_n as f64).sqrt())
                })
                .collect(),
            weights: vec![T::one() / T::from_f64_lossy(n as f64); n],
        }
    }

    pub fn validate(&self, bundle: &BundleConfig) -> Result<()> {
        if self.risk_axes.len() != bundle.modality_count()
            || self.weights.len() != bundle.modality_count()
        {
            return Err(GvfError::DimensionMismatch {
                context: "score config modality count",
                expected: bundle.modality_count(),
                got: self.risk_axes.len(),
            });
        }
        for (n, u) in self.risk_axes.iter().enumerate() {
            if u.len() != bundle.fiber_range(n).len() {
                return Err(GvfError::DimensionMismatch {
                    context: "risk axis dimension",
                    expected: bundle.fiber_range(n).len(),
                    got: u.len(),
                });
            }
            let norm = u
                .iter()
                .map(|&v| v * v)
                .fold(T::zero(), |a, b| a + b)
                .sqrt()
                .to_f64_lossy();
            if (norm - 1.0).abs() > 1e-10 {
                return Err(GvfError::InvalidConfig(format!(
                    "risk axis {n} has norm {norm}, expected 1"
                )));
            }
        }
        let wsum: f64 = self.weights.iter().map(|w| w.to_f64_lossy()).sum();
        if self.weights.iter().any(|w| !(w.to_f64_lossy() > 0.0)) || (wsum - 1.0).abs() > 1e-10 {
            return Err(GvfError::InvalidConfig(
                "modality weights must be positive and sum to one".into(),
            ));
        }
        Ok(())
    }
}

/// Net outflow per vertex and channel: positive entries mark sources.
fn outflow<T: Real>(complex: &SimplicialComplex, flow: &Cochain<T>) -> Result<ndarray::Array2<T>> {
    let div = dec::div(complex, flow)?;
    Ok(div.into_values().mapv(|v| -v))
}

/// Disease progression score per vertex: the weighted projection of the net
/// outflow onto each modality's risk axis. Positive = net source.
pub fn dps<T: Real>(
    complex: &SimplicialComplex,
    flow: &Cochain<T>,
    bundle: &BundleConfig,
    cfg: &ScoreConfig<T>,
) -> Result<Vec<T>> {
    cfg.validate(bundle)?;
    if flow.channels() != bundle.total_fiber_dim() {
        return Err(GvfError::DimensionMismatch {
            context: "dps flow channels",
            expected: bundle.total_fiber_dim(),
            got: flow.channels(),
        });
    }
    let out = outflow(complex, flow)?;
    let mut scores = vec![T::zero(); complex.vertex_count()];
    for (i, score) in scores.iter_mut().enumerate() {
        for n in 0..bundle.modality_count() {
            let mut proj = T::zero();
            for (k, c) in bundle.fiber_range(n).enumerate() {
                proj += out[(i, c)] * cfg.risk_axes[n][k];
            }
            *score += cfg.weights[n] * proj;
        }
    }
    Ok(scores)
}

/// Cyclic risk index per vertex: mean curl magnitude over incident
/// triangles, zero for vertices with none.
pub fn cri<T: Real>(complex: &SimplicialComplex, flow: &Cochain<T>) -> Result<Vec<T>> {
    let curl = dec::curl(complex, flow)?;
    let tris = complex.triangles_per_vertex();
    let mut scores = vec![T::zero(); complex.vertex_count()];
    for (i, incident) in tris.iter().enumerate() {
        let mut acc = T::zero();
        for &t in incident {
            let mag = (0..curl.channels())
                .map(|c| curl.values()[(t, c)])
                .map(|v| v * v)
                .fold(T::zero(), |a, b| a + b)
                .sqrt();
            acc += mag;
        }
        scores[i] = acc / T::from_f64_lossy(incident.len().max(1) as f64);
    }
    Ok(scores)
}

/// HHD component labels for annotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    Gradient,
    Curl,
    Harmonic,
}

impl Component {
    pub fn intervention(self) -> &'static str {
        match self {
            Component::Gradient => INTERVENTION_GRADIENT,
            Component::Curl => INTERVENTION_CURL,
            Component::Harmonic => INTERVENTION_HARMONIC,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct AgentScore<T: Real> {
    pub vertex: usize,
    pub id: String,
    pub dps: T,
    pub cri: T,
    pub dominant_component: Option<Component>,
    pub intervention: String,
}

/// Per-agent scores plus the global component energy fractions.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ScoreReport<T: Real> {
    pub agents: Vec<AgentScore<T>>,
    pub energy_fractions: EnergyFractions<T>,
}

/// Builds the per-agent report: scores, the locally dominant component
/// (largest energy share over incident edges), and its intervention string.
pub fn annotate<T: Real>(
    complex: &SimplicialComplex,
    decomposition: &HodgeDecomposition<T>,
    dps_values: &[T],
    cri_values: &[T],
) -> Result<ScoreReport<T>> {
    if dps_values.len() != complex.vertex_count() || cri_values.len() != complex.vertex_count() {
        return Err(GvfError::DimensionMismatch {
            context: "annotate score vectors",
            expected: complex.vertex_count(),
            got: dps_values.len(),
        });
    }
    let parts = [
        (&decomposition.grad_part, Component::Gradient),
        (&decomposition.curl_part, Component::Curl),
        (&decomposition.harmonic_part, Component::Harmonic),
    ];
    let mut agents = Vec::new();
    for (i, vertex) in complex.vertices().iter().enumerate() {
        if vertex.kind != NodeKind::Agent {
            continue;
        }
        let mut local = [T::zero(); 3];
        for (slot, (part, _)) in local.iter_mut().zip(&parts) {
            for (e, &(a, b)) in complex.edges().iter().enumerate() {
                if a == i || b == i {
                    for c in 0..part.channels() {
                        let v = part.values()[(e, c)];
                        *slot += v * v;
                    }
                }
            }
        }
        let total = local[0] + local[1] + local[2];
        let dominant = if total > T::zero() {
            let mut best = 0;
            for k in 1..3 {
                if local[k] > local[best] {
                    best = k;
                }
            }
            Some(parts[best].1)
        } else {
            None
        };
        agents.push(AgentScore {
            vertex: i,
            id: vertex.id.clone(),
            dps: dps_values[i],
            cri: cri_values[i],
            dominant_component: dominant,
            intervention: dominant
                .map(|c| c.intervention().to_string())
                .unwrap_or_else(|| INTERVENTION_NONE.to_string()),
        });
    }
    Ok(ScoreReport {
        agents,
        energy_fractions: decomposition.energy_fractions(),
    })
}

/// Shift decision from the spectral proxy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftDecision {
    FineTune,
    Retrain,
}

/// Sorted Laplacian spectra of one complex with the shift distance to the
/// previous window. Serialised spectra are truncated; the distance is
/// computed on the full spectra.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumSummary {
    pub eigenvalues_0: Vec<f64>,
    pub eigenvalues_1: Vec<f64>,
    pub truncated: bool,
    pub d_spec: f64,
    pub threshold: f64,
    pub decision: ShiftDecision,
}

/// Ascending eigenvalues of the degree-0 and degree-1 Hodge Laplacians.
pub fn laplacian_spectra(complex: &SimplicialComplex) -> Result<(Vec<f64>, Vec<f64>)> {
    let d0 = dec::hodge_laplacian::<f64>(complex, 0)?;
    let d1 = dec::hodge_laplacian::<f64>(complex, 1)?;
    Ok((
        crate::linalg::symmetric_eigenvalues(&d0.matrix)?,
        crate::linalg::symmetric_eigenvalues(&d1.matrix)?,
    ))
}

/// Euclidean norm of a concatenated spectrum pair.
pub fn spectrum_norm(spectra: &(Vec<f64>, Vec<f64>)) -> f64 {
    spectra
        .0
        .iter()
        .chain(spectra.1.iter())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt()
}

/// Zero-pads the shorter ascending spectrum at the low end; zero eigenvalues
/// are the smallest of a PSD operator, so padding aligns the upper spectrum.
fn padded_distance_sq(a: &[f64], b: &[f64]) -> f64 {
    let len = a.len().max(b.len());
    let offset_a = len - a.len();
    let offset_b = len - b.len();
    let mut acc = 0.0;
    for k in 0..len {
        let va = if k < offset_a { 0.0 } else { a[k - offset_a] };
        let vb = if k < offset_b { 0.0 } else { b[k - offset_b] };
        acc += (va - vb) * (va - vb);
    }
    acc
}

/// Distance between sorted spectra pairs after zero padding.
pub fn spectral_distance(a: &(Vec<f64>, Vec<f64>), b: &(Vec<f64>, Vec<f64>)) -> f64 {
    (padded_distance_sq(&a.0, &b.0) + padded_distance_sq(&a.1, &b.1)).sqrt()
}

/// Compares the current complex against the previous window's and decides
/// between local fine-tuning (small shift) and retraining (large shift).
pub fn spectral_shift(
    complex: &SimplicialComplex,
    previous: &SimplicialComplex,
    threshold: f64,
) -> Result<SpectrumSummary> {
    if complex.is_empty() || previous.is_empty() {
        return Err(GvfError::InvalidInput(
            "spectral shift needs nonempty complexes".into(),
        ));
    }
    if !(threshold > 0.0) {
        return Err(GvfError::InvalidConfig(
            "shift threshold must be positive".into(),
        ));
    }
    let current = laplacian_spectra(complex)?;
    let prev = laplacian_spectra(previous)?;
    let d_spec = spectral_distance(&current, &prev);
    let decision = if d_spec <= threshold {
        ShiftDecision::FineTune
    } else {
        ShiftDecision::Retrain
    };
    let truncated =
        current.0.len() > SPECTRUM_TRUNCATE || current.1.len() > SPECTRUM_TRUNCATE;
    if truncated {
        log::info!(
            "spectrum summary truncated to first {SPECTRUM_TRUNCATE} eigenvalues per operator"
        );
    }
    let (mut e0, mut e1) = current;
    e0.truncate(SPECTRUM_TRUNCATE);
    e1.truncate(SPECTRUM_TRUNCATE);
    Ok(SpectrumSummary {
        eigenvalues_0: e0,
        eigenvalues_1: e1,
        truncated,
        d_spec,
        threshold,
        decision,
    })
}

/// Default shift threshold: a tenth of the previous spectrum's norm.
pub fn default_shift_threshold(previous: &SimplicialComplex) -> Result<f64> {
    let spectra = laplacian_spectra(previous)?;
    Ok((0.1 * spectrum_norm(&spectra)).max(f64::MIN_POSITIVE))
}

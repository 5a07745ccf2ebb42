//! The learned objects: block-whitening input layer, modality-blocked
//! experts combined by softmax gating into the node risk section, and the
//! antisymmetric flow constructor on edges.
//!
//! Every expert reads only its own input block and writes only into its own
//! output fiber, so modality confinement is structural rather than a trained
//! tendency. The flow constructor antisymmetrises an MLP explicitly, which
//! makes the edge field a valid 1-cochain by construction.

pub mod bundle;
pub mod whitening;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::complex::SimplicialComplex;
use crate::dec::Cochain;
use crate::error::{GvfError, Result};
use crate::linalg::spectral_norm_estimate;
use crate::scalar::Real;
pub use bundle::{BundleConfig, ModalitySpec};
pub use whitening::{whiten_fit, WhiteningTransform};

/// Power-iteration steps used when estimating a top singular value.
pub const SPECTRAL_NORM_ITERS: usize = 100;

/// Checkpoint format version.
pub const FORMAT_VERSION: u32 = 1;

fn glorot<T: Real>(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<T> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| {
        T::from_f64_lossy(rng.random_range(-bound..bound))
    })
}


/// Divides weights by `max(1, sigma_max)` with the top singular value
/// estimated by power iteration; returns the normalised weights and the
/// estimate. A zero matrix passes through unchanged.
pub fn spectral_normalize<T: Real>(weights: &Array2<T>) -> (Array2<T>, T) {
    let sigma = spectral_norm_estimate(weights, SPECTRAL_NORM_ITERS);
    let divisor = if sigma > T::one() { sigma } else { T::one() };
    (weights.mapv(|v| v / divisor), sigma)
}

/// Symmetric-normalised closed-neighbourhood mixing over the 1-skeleton:
/// `M = D^{-1/2} (I + A) D^{-1/2}` with `D = I + diag(deg)`. Its spectral
/// norm is at most one, so mixing never inflates the Lipschitz product.
pub struct MixingOperator<T> {
    inv_sqrt: Vec<T>,
}

impl<T: Real> MixingOperator<T> {
    pub fn new(complex: &SimplicialComplex) -> Self {
        let inv_sqrt = (0..complex.vertex_count())
            .map(|v| {
                T::one() / T::from_f64_lossy((1 + complex.neighbors(v).len()) as f64).sqrt()
            })
            .collect();
        MixingOperator { inv_sqrt }
    }

    /// `M h` applied to rows of `h`; M is symmetric, so this also serves as
    /// the backward operator.
    pub fn apply(&self, complex: &SimplicialComplex, h: &Array2<T>) -> Array2<T> {
        let (n, w) = h.dim();
        let mut out = Array2::zeros((n, w));
        for i in 0..n {
            let dii = self.inv_sqrt[i] * self.inv_sqrt[i];
            for c in 0..w {
                out[(i, c)] = dii * h[(i, c)];
            }
        }
        for &(i, j) in complex.edges() {
            let wij = self.inv_sqrt[i] * self.inv_sqrt[j];
            for c in 0..w {
                let hi = h[(i, c)];
                let hj = h[(j, c)];
                out[(i, c)] += wij * hj;
                out[(j, c)] += wij * hi;
            }
        }
        out
    }
}

/// Two-layer block-masked expert for one modality: an affine layer with tanh
/// on the modality's input block, one neighbourhood mixing step, and an
/// affine read-out into the modality's fiber.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ExpertParams<T: Real> {
    pub modality: usize,
    /// hidden x input_dim(modality)
    pub w1: Array2<T>,
    pub b1: Array1<T>,
    /// fiber_dim(modality) x hidden
    pub w2: Array2<T>,
    pub b2: Array1<T>,
    pub spectral_normalized: bool,
}

impl<T: Real> ExpertParams<T> {
    pub fn init(
        bundle: &BundleConfig,
        modality: usize,
        hidden: usize,
        spectral_normalized: bool,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let d_n = bundle.input_range(modality).len();
        let m_n = bundle.fiber_range(modality).len();
        let mut expert = ExpertParams {
            modality,
            w1: glorot(rng, hidden, d_n),
            b1: Array1::zeros(hidden),
            w2: glorot(rng, m_n, hidden),
            b2: Array1::zeros(m_n),
            spectral_normalized,
        };
        if spectral_normalized {
            expert.enforce_spectral_norm();
        }
        expert
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.nrows()
    }

    /// Rescales both layers to top singular value at most one.
    pub fn enforce_spectral_norm(&mut self) {
        let (w1, _) = spectral_normalize(&self.w1);
        let (w2, _) = spectral_normalize(&self.w2);
        self.w1 = w1;
        self.w2 = w2;
    }
}

/// Per-expert forward activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ExpertCache<T> {
    /// |V| x hidden, pre-activation of layer one.
    pub h_pre: Array2<T>,
    /// tanh(h_pre)
    pub h_act: Array2<T>,
    /// mixed hidden state M h_act
    pub h_mix: Array2<T>,
    /// |V| x fiber_dim, the expert's fiber content.
    pub out: Array2<T>,
}

/// Runs one expert over all vertices of the whitened feature matrix.
pub fn expert_forward<T: Real>(
    complex: &SimplicialComplex,
    bundle: &BundleConfig,
    expert: &ExpertParams<T>,
    features: &Array2<T>,
    mixing: &MixingOperator<T>,
) -> ExpertCache<T> {
    let block = bundle.input_range(expert.modality);
    let x = features.slice(ndarray::s![.., block]);
    let mut h_pre = x.dot(&expert.w1.t());
    for mut row in h_pre.rows_mut() {
        row += &expert.b1;
    }
    let h_act = h_pre.mapv(|v| v.tanh());
    let h_mix = mixing.apply(complex, &h_act);
    let mut out = h_mix.dot(&expert.w2.t());
    for mut row in out.rows_mut() {
        row += &expert.b2;
    }
    ExpertCache {
        h_pre,
        h_act,
        h_mix,
        out,
    }
}

/// Small two-layer gate from the whitened node input to modality weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct GatingParams<T: Real> {
    pub w1: Array2<T>,
    pub b1: Array1<T>,
    pub w2: Array2<T>,
    pub b2: Array1<T>,
}

impl<T: Real> GatingParams<T> {
    pub fn init(bundle: &BundleConfig, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        GatingParams {
            w1: glorot(rng, hidden, bundle.total_input_dim()),
            b1: Array1::zeros(hidden),
            w2: glorot(rng, bundle.modality_count(), hidden),
            b2: Array1::zeros(bundle.modality_count()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GatingCache<T> {
    pub g_pre: Array2<T>,
    pub g_act: Array2<T>,
    pub logits: Array2<T>,
    /// |V| x N_mod softmax rows.
    pub probs: Array2<T>,
}

pub fn gating_forward<T: Real>(gating: &GatingParams<T>, features: &Array2<T>) -> GatingCache<T> {
    let mut g_pre = features.dot(&gating.w1.t());
    for mut row in g_pre.rows_mut() {
        row += &gating.b1;
    }
    let g_act = g_pre.mapv(|v| v.tanh());
    let mut logits = g_act.dot(&gating.w2.t());
    for mut row in logits.rows_mut() {
        row += &gating.b2;
    }
    let mut probs = logits.clone();
    for mut row in probs.rows_mut() {
        let max = row.iter().cloned().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    GatingCache {
        g_pre,
        g_act,
        logits,
        probs,
    }
}

/// Mixture output plus everything the backward pass needs.
pub struct MoeCache<T> {
    pub experts: Vec<ExpertCache<T>>,
    pub gating: GatingCache<T>,
    /// |V| x m risk section values.
    pub risk: Array2<T>,
}

/// Mixture-of-experts forward: fiber n of the output is exactly the gate
/// weight times expert n's fiber content; coordinates outside fiber n stay
/// untouched (structurally zero).
pub fn moe_forward_cached<T: Real>(
    complex: &SimplicialComplex,
    bundle: &BundleConfig,
    features: &Array2<T>,
    experts: &[ExpertParams<T>],
    gating: &GatingParams<T>,
) -> Result<MoeCache<T>> {
    if features.nrows() != complex.vertex_count() {
        return Err(GvfError::DimensionMismatch {
            context: "moe features rows",
            expected: complex.vertex_count(),
            got: features.nrows(),
        });
    }
    if features.ncols() != bundle.total_input_dim() {
        return Err(GvfError::DimensionMismatch {
            context: "moe features columns",
            expected: bundle.total_input_dim(),
            got: features.ncols(),
        });
    }
    if experts.len() != bundle.modality_count() {
        return Err(GvfError::DimensionMismatch {
            context: "expert count",
            expected: bundle.modality_count(),
            got: experts.len(),
        });
    }
    let mixing = MixingOperator::new(complex);
    let gating_cache = gating_forward(gating, features);
    let mut expert_caches = Vec::with_capacity(experts.len());
    let mut risk = Array2::zeros((complex.vertex_count(), bundle.total_fiber_dim()));
    for (n, expert) in experts.iter().enumerate() {
        let cache = expert_forward(complex, bundle, expert, features, &mixing);
        let fiber = bundle.fiber_range(n);
        for v in 0..complex.vertex_count() {
            let g = gating_cache.probs[(v, n)];
            for (k, c) in fiber.clone().enumerate() {
                risk[(v, c)] = g * cache.out[(v, k)];
            }
        }
        expert_caches.push(cache);
    }
    Ok(MoeCache {
        experts: expert_caches,
        gating: gating_cache,
        risk,
    })
}

/// MoE forward returning the node risk section as a 0-cochain.
pub fn moe_forward<T: Real>(
    complex: &SimplicialComplex,
    bundle: &BundleConfig,
    features: &Array2<T>,
    experts: &[ExpertParams<T>],
    gating: &GatingParams<T>,
) -> Result<Cochain<T>> {
    let cache = moe_forward_cached(complex, bundle, features, experts, gating)?;
    Cochain::new(0, cache.risk)
}

/// Parameters of the edge-flow constructor: a tanh MLP with a linear skip
/// path, evaluated on `(r_i, r_j, e_ij)` and antisymmetrised explicitly.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct FlowParams<T: Real> {
    /// hidden x (2m + p)
    pub w1: Array2<T>,
    pub b1: Array1<T>,
    /// m x hidden
    pub w2: Array2<T>,
    /// m x (2m + p) linear skip path
    pub skip: Array2<T>,
    pub b2: Array1<T>,
    pub edge_feature_dim: usize,
}

impl<T: Real> FlowParams<T> {
    pub fn init(
        channels: usize,
        edge_feature_dim: usize,
        hidden: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let zdim = 2 * channels + edge_feature_dim;
        FlowParams {
            w1: glorot(rng, hidden, zdim),
            b1: Array1::zeros(hidden),
            w2: glorot(rng, channels, hidden),
            skip: glorot(rng, channels, zdim),
            b2: Array1::zeros(channels),
            edge_feature_dim,
        }
    }

    /// Weights that realise the exact discrete gradient: the edge features
    /// are discarded and the output is `r_j - r_i`.
    pub fn gradient_special_case(channels: usize, edge_feature_dim: usize) -> Self {
        let zdim = 2 * channels + edge_feature_dim;
        let hidden = 1;
        let mut skip = Array2::zeros((channels, zdim));
        for c in 0..channels {
            skip[(c, c)] = -T::one();
            skip[(c, channels + c)] = T::one();
        }
        FlowParams {
            w1: Array2::zeros((hidden, zdim)),
            b1: Array1::zeros(hidden),
            w2: Array2::zeros((channels, hidden)),
            skip,
            b2: Array1::zeros(channels),
            edge_feature_dim,
        }
    }

    pub fn channels(&self) -> usize {
        self.w2.nrows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.w1.ncols()
    }

    /// Raw MLP evaluation; returns (output, hidden tanh activations).
    pub fn mlp(&self, z: &[T]) -> (Vec<T>, Vec<T>) {
        let h = self.hidden_dim();
        let m = self.channels();
        let mut t = vec![T::zero(); h];
        for k in 0..h {
            let mut acc = self.b1[k];
            for (j, &zj) in z.iter().enumerate() {
                acc += self.w1[(k, j)] * zj;
            }
            t[k] = acc.tanh();
        }
        let mut out = vec![T::zero(); m];
        for c in 0..m {
            let mut acc = self.b2[c];
            for k in 0..h {
                acc += self.w2[(c, k)] * t[k];
            }
            for (j, &zj) in z.iter().enumerate() {
                acc += self.skip[(c, j)] * zj;
            }
            out[c] = acc;
        }
        (out, t)
    }
}

/// Per-edge activations of both antisymmetrised MLP evaluations.
pub struct FlowCache<T> {
    /// Forward input (r_i, r_j, e) per edge.
    pub z_fwd: Vec<Vec<T>>,
    /// Reversed input (r_j, r_i, -e) per edge.
    pub z_rev: Vec<Vec<T>>,
    pub t_fwd: Vec<Vec<T>>,
    pub t_rev: Vec<Vec<T>>,
    /// |E| x m flow values.
    pub flow: Array2<T>,
}

/// Evaluates the antisymmetric flow on every edge of the complex.
///
/// `edge_features` rows follow the canonical edge order and are negated
/// algebraically for the reversed evaluation, matching the oriented-feature
/// convention.
pub fn flow_field_cached<T: Real>(
    complex: &SimplicialComplex,
    risk: &Cochain<T>,
    edge_features: &Array2<T>,
    params: &FlowParams<T>,
) -> Result<FlowCache<T>> {
    risk.check_against(complex, "flow risk section")?;
    if risk.degree() != 0 {
        return Err(GvfError::InvalidInput("flow expects a 0-cochain".into()));
    }
    let m = risk.channels();
    if params.channels() != m {
        return Err(GvfError::DimensionMismatch {
            context: "flow channels",
            expected: m,
            got: params.channels(),
        });
    }
    if edge_features.nrows() != complex.edge_count()
        || edge_features.ncols() != params.edge_feature_dim
    {
        return Err(GvfError::DimensionMismatch {
            context: "edge feature matrix",
            expected: complex.edge_count() * params.edge_feature_dim,
            got: edge_features.nrows() * edge_features.ncols(),
        });
    }

    let p = params.edge_feature_dim;
    let ne = complex.edge_count();
    let mut cache = FlowCache {
        z_fwd: Vec::with_capacity(ne),
        z_rev: Vec::with_capacity(ne),
        t_fwd: Vec::with_capacity(ne),
        t_rev: Vec::with_capacity(ne),
        flow: Array2::zeros((ne, m)),
    };
    let half = T::from_f64_lossy(0.5);
    for (e, &(i, j)) in complex.edges().iter().enumerate() {
        let mut z_fwd = Vec::with_capacity(2 * m + p);
        let mut z_rev = Vec::with_capacity(2 * m + p);
        for c in 0..m {
            z_fwd.push(risk.values()[(i, c)]);
            z_rev.push(risk.values()[(j, c)]);
        }
        for c in 0..m {
            z_fwd.push(risk.values()[(j, c)]);
            z_rev.push(risk.values()[(i, c)]);
        }
        for k in 0..p {
            let v = edge_features[(e, k)];
            z_fwd.push(v);
            z_rev.push(-v);
        }
        let (out_fwd, t_fwd) = params.mlp(&z_fwd);
        let (out_rev, t_rev) = params.mlp(&z_rev);
        for c in 0..m {
            cache.flow[(e, c)] = half * (out_fwd[c] - out_rev[c]);
        }
        cache.z_fwd.push(z_fwd);
        cache.z_rev.push(z_rev);
        cache.t_fwd.push(t_fwd);
        cache.t_rev.push(t_rev);
    }
    Ok(cache)
}

/// Antisymmetric edge flow as a 1-cochain.
pub fn flow_field<T: Real>(
    complex: &SimplicialComplex,
    risk: &Cochain<T>,
    edge_features: &Array2<T>,
    params: &FlowParams<T>,
) -> Result<Cochain<T>> {
    let cache = flow_field_cached(complex, risk, edge_features, params)?;
    Cochain::new(1, cache.flow)
}

/// Value of the antisymmetrised constructor for arbitrary endpoint states,
/// independent of any complex. Used for swap-symmetry probes.
pub fn flow_value<T: Real>(
    params: &FlowParams<T>,
    r_i: &[T],
    r_j: &[T],
    edge_feature: &[T],
) -> Vec<T> {
    let m = params.channels();
    let half = T::from_f64_lossy(0.5);
    let mut z_fwd: Vec<T> = Vec::with_capacity(params.input_dim());
    let mut z_rev: Vec<T> = Vec::with_capacity(params.input_dim());
    z_fwd.extend_from_slice(r_i);
    z_fwd.extend_from_slice(r_j);
    z_rev.extend_from_slice(r_j);
    z_rev.extend_from_slice(r_i);
    for &v in edge_feature {
        z_fwd.push(v);
        z_rev.push(-v);
    }
    let (out_fwd, _) = params.mlp(&z_fwd);
    let (out_rev, _) = params.mlp(&z_rev);
    (0..m).map(|c| half * (out_fwd[c] - out_rev[c])).collect()
}

/// Linear classification head on the risk vector.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ReadoutHead<T: Real> {
    /// num_classes x m
    pub weight: Array2<T>,
    pub bias: Array1<T>,
}

impl<T: Real> ReadoutHead<T> {
    pub fn init(num_classes: usize, channels: usize, rng: &mut ChaCha8Rng) -> Self {
        ReadoutHead {
            weight: glorot(rng, num_classes, channels),
            bias: Array1::zeros(num_classes),
        }
    }

    pub fn num_classes(&self) -> usize {
        self.weight.nrows()
    }
}

/// Widths and flags fixed at model construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub expert_hidden: usize,
    pub gating_hidden: usize,
    pub flow_hidden: usize,
    pub edge_feature_dim: usize,
    pub num_classes: usize,
    pub spectral_normalized: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            expert_hidden: 32,
            gating_hidden: 16,
            flow_hidden: 32,
            edge_feature_dim: 3,
            num_classes: 2,
            spectral_normalized: true,
        }
    }
}

/// The complete learned state: whitening, experts, gating, flow constructor,
/// read-out head, and the per-modality unit risk axes.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct GvfModel<T: Real> {
    pub format_version: u32,
    pub bundle: BundleConfig,
    pub whitening: WhiteningTransform<T>,
    pub experts: Vec<ExpertParams<T>>,
    pub gating: GatingParams<T>,
    pub flow: FlowParams<T>,
    pub readout: ReadoutHead<T>,
    /// Unit risk axis per modality, dimension fiber_dim(n).
    pub risk_axes: Vec<Array1<T>>,
}

impl<T: Real> GvfModel<T> {
    pub fn init(
        bundle: BundleConfig,
        whitening: WhiteningTransform<T>,
        cfg: &ModelConfig,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        if whitening.dim() != bundle.total_input_dim() {
            return Err(GvfError::DimensionMismatch {
                context: "whitening dim vs bundle",
                expected: bundle.total_input_dim(),
                got: whitening.dim(),
            });
        }
        let experts = (0..bundle.modality_count())
            .map(|n| {
                ExpertParams::init(&bundle, n, cfg.expert_hidden, cfg.spectral_normalized, rng)
            })
            .collect();
        let gating = GatingParams::init(&bundle, cfg.gating_hidden, rng);
        let m = bundle.total_fiber_dim();
        let flow = FlowParams::init(m, cfg.edge_feature_dim, cfg.flow_hidden, rng);
        let readout = ReadoutHead::init(cfg.num_classes, m, rng);
        let risk_axes = (0..bundle.modality_count())
            .map(|n| {
                let m_n = bundle.fiber_range(n).len();
                Array1::from_elem(m_n, T::one() / T::from_f64_lossy(m_n as f64).sqrt())
            })
            .collect();
        Ok(GvfModel {
            format_version: FORMAT_VERSION,
            bundle,
            whitening,
            experts,
            gating,
            flow,
            readout,
            risk_axes,
        })
    }

    pub fn channels(&self) -> usize {
        self.bundle.total_fiber_dim()
    }

    pub fn whiten(&self, raw_features: &Array2<T>) -> Array2<T> {
        self.whitening.apply(raw_features)
    }

    /// Risk section from whitened features.
    pub fn risk_section(
        &self,
        complex: &SimplicialComplex,
        whitened: &Array2<T>,
    ) -> Result<Cochain<T>> {
        moe_forward(complex, &self.bundle, whitened, &self.experts, &self.gating)
    }

    /// Edge flow from a risk section and edge features.
    pub fn edge_flow(
        &self,
        complex: &SimplicialComplex,
        risk: &Cochain<T>,
        edge_features: &Array2<T>,
    ) -> Result<Cochain<T>> {
        flow_field(complex, risk, edge_features, &self.flow)
    }

    pub fn save_json(&self, path: &std::path::Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load_json(path: &std::path::Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let model: GvfModel<T> = serde_json::from_reader(std::io::BufReader::new(file))?;
        if model.format_version != FORMAT_VERSION {
            return Err(GvfError::InvalidInput(format!(
                "checkpoint format version {} unsupported (expected {})",
                model.format_version, FORMAT_VERSION
            )));
        }
        Ok(model)
    }
}

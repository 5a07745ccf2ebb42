//! Multi-task objective and its hand-written reverse-mode gradients.
//!
//! The loss is `cls + lambda1 * geo + lambda2 * orth`, averaged over the
//! windows of a batch. `geo = -log(1 + rho)` with
//! `rho = |curl F|^2 / (|F|^2 + eps)` clipped to [0, 1], so it always lies in
//! `[-log 2, 0]`; the clip acts as a stop-gradient. The orthogonality term is
//! identically zero under structural masking and is kept as a guard rail.
//! Gradients flow through the read-out, the gating softmax, the experts, the
//! antisymmetrised flow constructor, and the curl contraction; they are
//! verified against central finite differences in the tests.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dec::Cochain;
use crate::error::{GvfError, Result};
pub use crate::model::ReadoutHead;
use crate::model::{
    flow_field_cached, moe_forward_cached, BundleConfig, FlowCache, GvfModel, MixingOperator,
    MoeCache,
};
use crate::scalar::Real;

/// Allowed values of the geometric-regulariser weight; zero switches the
/// term off for ablation runs.
pub const LAMBDA1_GRID: [f64; 4] = [0.0, 0.01, 0.1, 0.5];

/// Loss weights and dropout rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    /// Denominator guard in rho.
    pub eps: f64,
    pub num_classes: usize,
    pub p_drop: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            lambda1: 0.1,
            lambda2: 0.1,
            eps: 1e-8,
            num_classes: 2,
            p_drop: 0.2,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !LAMBDA1_GRID.iter().any(|&l| l == self.lambda1) {
            return Err(GvfError::InvalidConfig(format!(
                "lambda1 must be one of {LAMBDA1_GRID:?}, got {}",
                self.lambda1
            )));
        }
        if self.lambda2 < 0.0 {
            return Err(GvfError::InvalidConfig(
                "lambda2 must be nonnegative".into(),
            ));
        }
        if !(self.eps > 0.0) {
            return Err(GvfError::InvalidConfig("eps must be positive".into()));
        }
        if self.num_classes < 2 {
            return Err(GvfError::InvalidConfig("need at least two classes".into()));
        }
        if !(0.0..1.0).contains(&self.p_drop) {
            return Err(GvfError::InvalidConfig(format!(
                "p_drop must lie in [0, 1), got {}",
                self.p_drop
            )));
        }
        Ok(())
    }
}

/// One observation window: complex, raw node features, oriented edge
/// features in canonical edge order, and labelled vertices.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct WindowBatch<T: Real> {
    pub complex: crate::complex::SimplicialComplex,
    pub features: Array2<T>,
    pub edge_features: Array2<T>,
    /// (vertex index, class) pairs.
    pub labels: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Dataset<T: Real> {
    pub bundle: BundleConfig,
    pub windows: Vec<WindowBatch<T>>,
}

/// Loss value with its parts, averaged over windows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossParts<T> {
    pub total: T,
    pub cls: T,
    pub geo: T,
    pub orth: T,
    /// Unclipped `|curl F| / sqrt(|F|^2 + eps)` averaged over windows.
    pub rho: T,
    pub gate_entropy: T,
}

/// Gradients for every trainable tensor, in the same layout as the model.
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    pub experts: Vec<ExpertGradients<T>>,
    pub gating: GatingGradients<T>,
    pub flow: FlowGradients<T>,
    pub readout_weight: Array2<T>,
    pub readout_bias: Array1<T>,
    /// Zero under the current objective; the risk axes enter scoring, not
    /// the loss.
    pub risk_axes: Vec<Array1<T>>,
}

#[derive(Debug, Clone)]
pub struct ExpertGradients<T> {
    pub w1: Array2<T>,
    pub b1: Array1<T>,
    pub w2: Array2<T>,
    pub b2: Array1<T>,
}

#[derive(Debug, Clone)]
pub struct GatingGradients<T> {
    pub w1: Array2<T>,
    pub b1: Array1<T>,
    pub w2: Array2<T>,
    pub b2: Array1<T>,
}

#[derive(Debug, Clone)]
pub struct FlowGradients<T> {
    pub w1: Array2<T>,
    pub b1: Array1<T>,
    pub w2: Array2<T>,
    pub skip: Array2<T>,
    pub b2: Array1<T>,
}

impl<T: Real> Gradients<T> {
    fn zeros_like(model: &GvfModel<T>) -> Self {
        Gradients {
            experts: model
                .experts
                .iter()
                .map(|e| ExpertGradients {
                    w1: Array2::zeros(e.w1.dim()),
                    b1: Array1::zeros(e.b1.len()),
                    w2: Array2::zeros(e.w2.dim()),
                    b2: Array1::zeros(e.b2.len()),
                })
                .collect(),
            gating: GatingGradients {
                w1: Array2::zeros(model.gating.w1.dim()),
                b1: Array1::zeros(model.gating.b1.len()),
                w2: Array2::zeros(model.gating.w2.dim()),
                b2: Array1::zeros(model.gating.b2.len()),
            },
            flow: FlowGradients {
                w1: Array2::zeros(model.flow.w1.dim()),
                b1: Array1::zeros(model.flow.b1.len()),
                w2: Array2::zeros(model.flow.w2.dim()),
                skip: Array2::zeros(model.flow.skip.dim()),
                b2: Array1::zeros(model.flow.b2.len()),
            },
            readout_weight: Array2::zeros(model.readout.weight.dim()),
            readout_bias: Array1::zeros(model.readout.bias.len()),
            risk_axes: model
                .risk_axes
                .iter()
                .map(|u| Array1::zeros(u.len()))
                .collect(),
        }
    }
}

struct WindowForward<T> {
    moe: MoeCache<T>,
    flow: FlowCache<T>,
    /// |T| x m curl values.
    curl: Array2<T>,
    s_flow: T,
    rho_raw: T,
    cls: T,
    geo: T,
    /// Softmax probabilities per labelled node.
    label_probs: Vec<(usize, usize, Vec<T>)>,
    gate_entropy: T,
}

fn forward_window<T: Real>(
    model: &GvfModel<T>,
    window: &WindowBatch<T>,
    whitened: &Array2<T>,
    cfg: &LossConfig,
) -> Result<WindowForward<T>> {
    let complex = &window.complex;
    let moe = moe_forward_cached(
        complex,
        &model.bundle,
        whitened,
        &model.experts,
        &model.gating,
    )?;
    let risk = Cochain::new(0, moe.risk.clone())?;
    let flow = flow_field_cached(complex, &risk, &window.edge_features, &model.flow)?;

    let m = model.channels();
    let nt = complex.triangle_count();
    let mut curl = Array2::zeros((nt, m));
    for t in 0..nt {
        for &(e, s) in complex.b2().column(t) {
            let s = T::from_f64_lossy(s as f64);
            for c in 0..m {
                curl[(t, c)] += s * flow.flow[(e, c)];
            }
        }
    }
    let s_curl = curl.iter().map(|&v| v * v).fold(T::zero(), |a, b| a + b);
    let s_flow = flow
        .flow
        .iter()
        .map(|&v| v * v)
        .fold(T::zero(), |a, b| a + b)
        + T::from_f64_lossy(cfg.eps);
    let rho_raw = s_curl / s_flow;
    let rho_clipped = rho_raw.min(T::one()).max(T::zero());
    let geo = -(T::one() + rho_clipped).ln();

    let mut cls = T::zero();
    let mut label_probs = Vec::with_capacity(window.labels.len());
    for &(node, label) in &window.labels {
        if node >= complex.vertex_count() {
            return Err(GvfError::InvalidInput(format!(
                "label refers to missing vertex {node}"
            )));
        }
        if label >= cfg.num_classes {
            return Err(GvfError::InvalidInput(format!(
                "label {label} outside [0, {})",
                cfg.num_classes
            )));
        }
        let mut logits = vec![T::zero(); cfg.num_classes];
        for (c, logit) in logits.iter_mut().enumerate() {
            let mut acc = model.readout.bias[c];
            for k in 0..m {
                acc += model.readout.weight[(c, k)] * moe.risk[(node, k)];
            }
            *logit = acc;
        }
        let max = logits.iter().cloned().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for v in logits.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in logits.iter_mut() {
            *v /= sum;
        }
        cls -= logits[label].ln();
        label_probs.push((node, label, logits));
    }
    if !window.labels.is_empty() {
        cls /= T::from_f64_lossy(window.labels.len() as f64);
    }

    let mut gate_entropy = T::zero();
    for row in moe.gating.probs.rows() {
        for &g in row {
            if g > T::zero() {
                gate_entropy -= g * g.ln();
            }
        }
    }
    gate_entropy /= T::from_f64_lossy(complex.vertex_count().max(1) as f64);

    Ok(WindowForward {
        moe,
        flow,
        curl,
        s_flow,
        rho_raw,
        cls,
        geo,
        label_probs,
        gate_entropy,
    })
}

fn parts_from_forwards<T: Real>(forwards: &[WindowForward<T>], cfg: &LossConfig) -> LossParts<T> {
    let w = T::from_f64_lossy(forwards.len() as f64);
    let mut parts = LossParts {
        total: T::zero(),
        cls: T::zero(),
        geo: T::zero(),
        orth: T::zero(),
        rho: T::zero(),
        gate_entropy: T::zero(),
    };
    for f in forwards {
        parts.cls += f.cls / w;
        parts.geo += f.geo / w;
        parts.rho += f.rho_raw.sqrt() / w;
        parts.gate_entropy += f.gate_entropy / w;
    }
    // Structural masking keeps every expert inside its fiber, so the
    // orthogonality penalty is exactly zero.
    parts.orth = T::zero();
    parts.total = parts.cls
        + T::from_f64_lossy(cfg.lambda1) * parts.geo
        + T::from_f64_lossy(cfg.lambda2) * parts.orth;
    parts
}

/// Loss on a batch of windows (no dropout). The batch must contain at least
/// one labelled vertex overall.
pub fn loss_total<T: Real>(
    model: &GvfModel<T>,
    windows: &[WindowBatch<T>],
    cfg: &LossConfig,
) -> Result<LossParts<T>> {
    cfg.validate()?;
    if windows.is_empty() || windows.iter().all(|w| w.labels.is_empty()) {
        return Err(GvfError::InvalidInput("empty batch".into()));
    }
    let mut forwards = Vec::with_capacity(windows.len());
    for window in windows {
        let whitened = model.whiten(&window.features);
        forwards.push(forward_window(model, window, &whitened, cfg)?);
    }
    Ok(parts_from_forwards(&forwards, cfg))
}

fn backward_window<T: Real>(
    model: &GvfModel<T>,
    window: &WindowBatch<T>,
    whitened: &Array2<T>,
    fwd: &WindowForward<T>,
    cfg: &LossConfig,
    window_weight: T,
    grads: &mut Gradients<T>,
) {
    let complex = &window.complex;
    let m = model.channels();
    let nv = complex.vertex_count();
    let mut d_risk = Array2::<T>::zeros((nv, m));

    // Read-out / cross-entropy.
    if !fwd.label_probs.is_empty() {
        let scale = window_weight / T::from_f64_lossy(fwd.label_probs.len() as f64);
        for (node, label, probs) in &fwd.label_probs {
            for c in 0..cfg.num_classes {
                let indicator = if c == *label { T::one() } else { T::zero() };
                let dq = (probs[c] - indicator) * scale;
                grads.readout_bias[c] += dq;
                for k in 0..m {
                    grads.readout_weight[(c, k)] += dq * fwd.moe.risk[(*node, k)];
                    d_risk[(*node, k)] += dq * model.readout.weight[(c, k)];
                }
            }
        }
    }

    // Geometric term -> flow gradient. Stop-gradient when rho is clipped.
    let lambda1 = T::from_f64_lossy(cfg.lambda1);
    let ne = complex.edge_count();
    let mut d_flow = Array2::<T>::zeros((ne, m));
    if cfg.lambda1 != 0.0 && fwd.rho_raw > T::zero() && fwd.rho_raw < T::one() {
        let rho = fwd.rho_raw;
        let coeff = -window_weight * lambda1 / (T::one() + rho);
        let two_over_sf = T::from_f64_lossy(2.0) / fwd.s_flow;
        // d rho / dF = (2/S_f) (B2 curl - rho F)
        let mut b2_curl = Array2::<T>::zeros((ne, m));
        for t in 0..complex.triangle_count() {
            for &(e, s) in complex.b2().column(t) {
                let s = T::from_f64_lossy(s as f64);
                for c in 0..m {
                    b2_curl[(e, c)] += s * fwd.curl[(t, c)];
                }
            }
        }
        for e in 0..ne {
            for c in 0..m {
                d_flow[(e, c)] =
                    coeff * two_over_sf * (b2_curl[(e, c)] - rho * fwd.flow.flow[(e, c)]);
            }
        }
    }

    // Flow constructor backward: both antisymmetrised evaluations share the
    // weights; the reversed one enters with a negative half.
    let half = T::from_f64_lossy(0.5);
    let hidden = model.flow.hidden_dim();
    let zdim = model.flow.input_dim();
    for (e, &(i, j)) in complex.edges().iter().enumerate() {
        let df_e: Vec<T> = (0..m).map(|c| d_flow[(e, c)]).collect();
        if df_e.iter().all(|&v| v == T::zero()) {
            continue;
        }
        let evals: [(T, &Vec<T>, &Vec<T>, usize, usize); 2] = [
            (half, &fwd.flow.z_fwd[e], &fwd.flow.t_fwd[e], i, j),
            (-half, &fwd.flow.z_rev[e], &fwd.flow.t_rev[e], j, i),
        ];
        for (sign, z, t, first, second) in evals {
            let dout: Vec<T> = df_e.iter().map(|&v| v * sign).collect();
            let mut du = vec![T::zero(); hidden];
            for k in 0..hidden {
                let mut dt = T::zero();
                for c in 0..m {
                    dt += model.flow.w2[(c, k)] * dout[c];
                }
                du[k] = dt * (T::one() - t[k] * t[k]);
            }
            for c in 0..m {
                grads.flow.b2[c] += dout[c];
                for k in 0..hidden {
                    grads.flow.w2[(c, k)] += dout[c] * t[k];
                }
                for zj in 0..zdim {
                    grads.flow.skip[(c, zj)] += dout[c] * z[zj];
                }
            }
            for k in 0..hidden {
                grads.flow.b1[k] += du[k];
                for zj in 0..zdim {
                    grads.flow.w1[(k, zj)] += du[k] * z[zj];
                }
            }
            // dz routed back into the two endpoint risk vectors.
            for zj in 0..(2 * m) {
                let mut dz = T::zero();
                for k in 0..hidden {
                    dz += model.flow.w1[(k, zj)] * du[k];
                }
                for c in 0..m {
                    dz += model.flow.skip[(c, zj)] * dout[c];
                }
                if zj < m {
                    d_risk[(first, zj)] += dz;
                } else {
                    d_risk[(second, zj - m)] += dz;
                }
            }
        }
    }

    // Mixture backward.
    let n_mod = model.bundle.modality_count();
    let mut d_gate = Array2::<T>::zeros((nv, n_mod));
    let mixing = MixingOperator::new(complex);
    for n in 0..n_mod {
        let fiber = model.bundle.fiber_range(n);
        let m_n = fiber.len();
        let expert = &model.experts[n];
        let cache = &fwd.moe.experts[n];
        let mut d_out = Array2::<T>::zeros((nv, m_n));
        for v in 0..nv {
            let g = fwd.moe.gating.probs[(v, n)];
            let mut dg = T::zero();
            for (k, c) in fiber.clone().enumerate() {
                let dr = d_risk[(v, c)];
                d_out[(v, k)] = g * dr;
                dg += dr * cache.out[(v, k)];
            }
            d_gate[(v, n)] = dg;
        }
        // Expert layers.
        let eg = &mut grads.experts[n];
        for v in 0..nv {
            for k in 0..m_n {
                eg.b2[k] += d_out[(v, k)];
            }
        }
        let d_mix = d_out.dot(&expert.w2); // |V| x hidden
        eg.w2 = &eg.w2 + &d_out.t().dot(&cache.h_mix);
        let d_act = mixing.apply(complex, &d_mix);
        let d_pre = &d_act * &cache.h_act.mapv(|h| T::one() - h * h);
        let block = model.bundle.input_range(n);
        let x_block = whitened.slice(ndarray::s![.., block]);
        eg.w1 = &eg.w1 + &d_pre.t().dot(&x_block);
        for v in 0..nv {
            for k in 0..expert.hidden_dim() {
                eg.b1[k] += d_pre[(v, k)];
            }
        }
    }

    // Gating softmax backward.
    let probs = &fwd.moe.gating.probs;
    let mut d_logits = Array2::<T>::zeros((nv, n_mod));
    for v in 0..nv {
        let mut dot = T::zero();
        for k in 0..n_mod {
            dot += d_gate[(v, k)] * probs[(v, k)];
        }
        for k in 0..n_mod {
            d_logits[(v, k)] = probs[(v, k)] * (d_gate[(v, k)] - dot);
        }
    }
    grads.gating.w2 = &grads.gating.w2 + &d_logits.t().dot(&fwd.moe.gating.g_act);
    for v in 0..nv {
        for k in 0..n_mod {
            grads.gating.b2[k] += d_logits[(v, k)];
        }
    }
    let d_gact = d_logits.dot(&model.gating.w2);
    let d_gpre = &d_gact * &fwd.moe.gating.g_act.mapv(|h| T::one() - h * h);
    grads.gating.w1 = &grads.gating.w1 + &d_gpre.t().dot(whitened);
    for v in 0..nv {
        for k in 0..model.gating.b1.len() {
            grads.gating.b1[k] += d_gpre[(v, k)];
        }
    }
}

/// Loss and gradients on a batch of windows, with pre-whitened (possibly
/// dropout-masked) features supplied per window.
fn backward_on<T: Real>(
    model: &GvfModel<T>,
    windows: &[WindowBatch<T>],
    whitened: &[Array2<T>],
    cfg: &LossConfig,
) -> Result<(LossParts<T>, Gradients<T>)> {
    if windows.is_empty() || windows.iter().all(|w| w.labels.is_empty()) {
        return Err(GvfError::InvalidInput("empty batch".into()));
    }
    let mut grads = Gradients::zeros_like(model);
    let mut forwards = Vec::with_capacity(windows.len());
    let window_weight = T::one() / T::from_f64_lossy(windows.len() as f64);
    for (window, xw) in windows.iter().zip(whitened) {
        let fwd = forward_window(model, window, xw, cfg)?;
        backward_window(model, window, xw, &fwd, cfg, window_weight, &mut grads);
        forwards.push(fwd);
    }
    Ok((parts_from_forwards(&forwards, cfg), grads))
}

/// Gradients of the full objective for every trainable tensor.
pub fn backward<T: Real>(
    model: &GvfModel<T>,
    windows: &[WindowBatch<T>],
    cfg: &LossConfig,
) -> Result<(LossParts<T>, Gradients<T>)> {
    cfg.validate()?;
    let whitened: Vec<Array2<T>> = windows.iter().map(|w| model.whiten(&w.features)).collect();
    backward_on(model, windows, &whitened, cfg)
}

/// Independently zeroes each (row, modality) block of a raw feature matrix
/// with probability `p_drop`; rows that would lose every modality are
/// resampled. Zeroing happens before whitening, mirroring a device that
/// stops reporting. Returns the masked features and the mask.
pub fn modality_dropout<T: Real>(
    raw: &Array2<T>,
    bundle: &BundleConfig,
    p_drop: f64,
    rng: &mut ChaCha8Rng,
) -> (Array2<T>, Vec<Vec<bool>>) {
    let n_mod = bundle.modality_count();
    let mut out = raw.clone();
    let mut mask = vec![vec![false; n_mod]; raw.nrows()];
    if p_drop == 0.0 {
        return (out, mask);
    }
    for (row, flags) in mask.iter_mut().enumerate() {
        loop {
            for f in flags.iter_mut() {
                *f = rng.random_range(0.0..1.0) < p_drop;
            }
            if !flags.iter().all(|&f| f) {
                break;
            }
        }
        for (n, &dropped) in flags.iter().enumerate() {
            if dropped {
                for c in bundle.input_range(n) {
                    out[(row, c)] = T::zero();
                }
            }
        }
    }
    (out, mask)
}

/// Fixed-step SGD settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub loss: LossConfig,
    pub step: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            loss: LossConfig::default(),
            step: 1e-2,
            epochs: 100,
            seed: 0,
        }
    }
}

/// Loss threshold beyond which training aborts as diverged.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub cls: f64,
    pub geo: f64,
    pub orth: f64,
    pub rho: f64,
    pub gate_entropy: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
    /// Set when training aborted with loss above the divergence limit.
    pub diverged: Option<EpochStats>,
}

impl TrainHistory {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,loss,cls,geo,orth,rho,gate_entropy\n");
        for e in self.epochs.iter().chain(self.diverged.iter()) {
            out.push_str(&format!(
                "{},{:e},{:e},{:e},{:e},{:e},{:e}\n",
                e.epoch, e.loss, e.cls, e.geo, e.orth, e.rho, e.gate_entropy
            ));
        }
        out
    }
}

fn sgd_step<T: Real>(model: &mut GvfModel<T>, grads: &Gradients<T>, step: T) {
    for (e, g) in model.experts.iter_mut().zip(&grads.experts) {
        e.w1 = &e.w1 - &g.w1.mapv(|v| v * step);
        e.b1 = &e.b1 - &g.b1.mapv(|v| v * step);
        e.w2 = &e.w2 - &g.w2.mapv(|v| v * step);
        e.b2 = &e.b2 - &g.b2.mapv(|v| v * step);
    }
    model.gating.w1 = &model.gating.w1 - &grads.gating.w1.mapv(|v| v * step);
    model.gating.b1 = &model.gating.b1 - &grads.gating.b1.mapv(|v| v * step);
    model.gating.w2 = &model.gating.w2 - &grads.gating.w2.mapv(|v| v * step);
    model.gating.b2 = &model.gating.b2 - &grads.gating.b2.mapv(|v| v * step);
    model.flow.w1 = &model.flow.w1 - &grads.flow.w1.mapv(|v| v * step);
    model.flow.b1 = &model.flow.b1 - &grads.flow.b1.mapv(|v| v * step);
    model.flow.w2 = &model.flow.w2 - &grads.flow.w2.mapv(|v| v * step);
    model.flow.skip = &model.flow.skip - &grads.flow.skip.mapv(|v| v * step);
    model.flow.b2 = &model.flow.b2 - &grads.flow.b2.mapv(|v| v * step);
    model.readout.weight = &model.readout.weight - &grads.readout_weight.mapv(|v| v * step);
    model.readout.bias = &model.readout.bias - &grads.readout_bias.mapv(|v| v * step);
    for (u, g) in model.risk_axes.iter_mut().zip(&grads.risk_axes) {
        *u = &*u - &g.mapv(|v| v * step);
        let norm = u
            .iter()
            .map(|&v| v * v)
            .fold(T::zero(), |a, b| a + b)
            .sqrt();
        if norm > T::zero() {
            *u = u.mapv(|v| v / norm);
        }
    }
}

/// Plain SGD with modality dropout each step; the risk axes are renormalised
/// to unit length after every update, and spectrally normalised experts are
/// re-projected. Aborts (keeping the history) when the loss exceeds the
/// divergence limit.
pub fn train<T: Real>(
    model: &mut GvfModel<T>,
    data: &Dataset<T>,
    cfg: &TrainConfig,
) -> Result<TrainHistory> {
    cfg.loss.validate()?;
    if data.windows.is_empty() || data.windows.iter().all(|w| w.labels.is_empty()) {
        return Err(GvfError::InvalidInput("dataset has no labels".into()));
    }
    if !(cfg.step > 0.0) {
        return Err(GvfError::InvalidConfig("step must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut history = TrainHistory::default();
    let step = T::from_f64_lossy(cfg.step);
    for epoch in 0..cfg.epochs {
        let whitened: Vec<Array2<T>> = data
            .windows
            .iter()
            .map(|w| {
                let dropped = modality_dropout(&w.features, &data.bundle, cfg.loss.p_drop, &mut rng).0;
                model.whiten(&dropped)
            })
            .collect();
        let (parts, grads) = backward_on(model, &data.windows, &whitened, &cfg.loss)?;
        let stats = EpochStats {
            epoch,
            loss: parts.total.to_f64_lossy(),
            cls: parts.cls.to_f64_lossy(),
            geo: parts.geo.to_f64_lossy(),
            orth: parts.orth.to_f64_lossy(),
            rho: parts.rho.to_f64_lossy(),
            gate_entropy: parts.gate_entropy.to_f64_lossy(),
        };
        if !stats.loss.is_finite() || stats.loss > DIVERGENCE_LIMIT {
            history.diverged = Some(stats);
            return Ok(history);
        }
        history.epochs.push(stats);
        sgd_step(model, &grads, step);
        for e in &mut model.experts {
            if e.spectral_normalized {
                e.enforce_spectral_norm();
            }
        }
    }
    Ok(history)
}

/// Argmax class per labelled vertex.
pub fn predict<T: Real>(
    model: &GvfModel<T>,
    window: &WindowBatch<T>,
) -> Result<Vec<(usize, usize)>> {
    let whitened = model.whiten(&window.features);
    let risk = model.risk_section(&window.complex, &whitened)?;
    let m = model.channels();
    let mut out = Vec::with_capacity(window.labels.len());
    for &(node, _) in &window.labels {
        let mut best = (0usize, T::neg_infinity());
        for c in 0..model.readout.num_classes() {
            let mut acc = model.readout.bias[c];
            for k in 0..m {
                acc += model.readout.weight[(c, k)] * risk.values()[(node, k)];
            }
            if acc > best.1 {
                best = (c, acc);
            }
        }
        out.push((node, best.0));
    }
    Ok(out)
}

/// Fraction of labelled vertices classified correctly.
pub fn accuracy<T: Real>(model: &GvfModel<T>, windows: &[WindowBatch<T>]) -> Result<f64> {
    let mut correct = 0usize;
    let mut total = 0usize;
    for window in windows {
        let preds = predict(model, window)?;
        for ((_, pred), &(_, label)) in preds.iter().zip(&window.labels) {
            total += 1;
            if *pred == label {
                correct += 1;
            }
        }
    }
    if total == 0 {
        return Err(GvfError::InvalidInput("no labels to score".into()));
    }
    Ok(correct as f64 / total as f64)
}

/// Flattens all trainable tensors in a fixed order (used by the
/// finite-difference harness and permutation probes).
pub fn param_vector<T: Real>(model: &GvfModel<T>) -> Vec<T> {
    let mut out = Vec::new();
    for e in &model.experts {
        out.extend(e.w1.iter().copied());
        out.extend(e.b1.iter().copied());
        out.extend(e.w2.iter().copied());
        out.extend(e.b2.iter().copied());
    }
    out.extend(model.gating.w1.iter().copied());
    out.extend(model.gating.b1.iter().copied());
    out.extend(model.gating.w2.iter().copied());
    out.extend(model.gating.b2.iter().copied());
    out.extend(model.flow.w1.iter().copied());
    out.extend(model.flow.b1.iter().copied());
    out.extend(model.flow.w2.iter().copied());
    out.extend(model.flow.skip.iter().copied());
    out.extend(model.flow.b2.iter().copied());
    out.extend(model.readout.weight.iter().copied());
    out.extend(model.readout.bias.iter().copied());
    for u in &model.risk_axes {
        out.extend(u.iter().copied());
    }
    out
}

/// Gradient counterpart of [`param_vector`], same order.
pub fn grad_vector<T: Real>(grads: &Gradients<T>) -> Vec<T> {
    let mut out = Vec::new();
    for e in &grads.experts {
        out.extend(e.w1.iter().copied());
        out.extend(e.b1.iter().copied());
        out.extend(e.w2.iter().copied());
        out.extend(e.b2.iter().copied());
    }
    out.extend(grads.gating.w1.iter().copied());
    out.extend(grads.gating.b1.iter().copied());
    out.extend(grads.gating.w2.iter().copied());
    out.extend(grads.gating.b2.iter().copied());
    out.extend(grads.flow.w1.iter().copied());
    out.extend(grads.flow.b1.iter().copied());
    out.extend(grads.flow.w2.iter().copied());
    out.extend(grads.flow.skip.iter().copied());
    out.extend(grads.flow.b2.iter().copied());
    out.extend(grads.readout_weight.iter().copied());
    out.extend(grads.readout_bias.iter().copied());
    for u in &grads.risk_axes {
        out.extend(u.iter().copied());
    }
    out
}

/// Writes a flattened parameter vector back into the model, inverse of
/// [`param_vector`].
pub fn set_params<T: Real>(model: &mut GvfModel<T>, params: &[T]) {
    fn fill2<T: Real>(a: &mut Array2<T>, it: &mut dyn Iterator<Item = T>) {
        for v in a.iter_mut() {
            *v = it.next().expect("param vector too short");
        }
    }
    fn fill1<T: Real>(a: &mut Array1<T>, it: &mut dyn Iterator<Item = T>) {
        for v in a.iter_mut() {
            *v = it.next().expect("param vector too short");
        }
    }
    let mut it = params.iter().copied();
    for e in &mut model.experts {
        fill2(&mut e.w1, &mut it);
        fill1(&mut e.b1, &mut it);
        fill2(&mut e.w2, &mut it);
        fill1(&mut e.b2, &mut it);
    }
    fill2(&mut model.gating.w1, &mut it);
    fill1(&mut model.gating.b1, &mut it);
    fill2(&mut model.gating.w2, &mut it);
    fill1(&mut model.gating.b2, &mut it);
    fill2(&mut model.flow.w1, &mut it);
    fill1(&mut model.flow.b1, &mut it);
    fill2(&mut model.flow.w2, &mut it);
    fill2(&mut model.flow.skip, &mut it);
    fill1(&mut model.flow.b2, &mut it);
    fill2(&mut model.readout.weight, &mut it);
    fill1(&mut model.readout.bias, &mut it);
    for u in &mut model.risk_axes {
        fill1(u, &mut it);
    }
    assert!(it.next().is_none(), "param vector too long");
}

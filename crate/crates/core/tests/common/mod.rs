//! Shared fixtures for integration tests: small complexes, models, and
//! window batches with seeded randomness.

#![allow(dead_code)]

use gvf_core::complex::{NodeKind, SimplicialComplex, Vertex};
use gvf_core::model::{
    BundleConfig, GvfModel, ModalitySpec, ModelConfig, WhiteningTransform,
};
use gvf_core::training::WindowBatch;
use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn agent(id: &str) -> Vertex {
    Vertex {
        id: id.into(),
        kind: NodeKind::Agent,
    }
}

pub fn sensor(id: &str) -> Vertex {
    Vertex {
        id: id.into(),
        kind: NodeKind::EnvSensor,
    }
}

/// Chain of `k` filled agent-agent-sensor triads bridged into one component:
/// 3k vertices, 3k + (k-1) edges, k triangles.
pub fn triad_chain(k: usize) -> SimplicialComplex {
    let mut vertices = Vec::new();
    for i in 0..2 * k {
        vertices.push(agent(&format!("a{i:02}")));
    }
    for s in 0..k {
        vertices.push(sensor(&format!("e{s:02}")));
    }
    let sensor_base = 2 * k;
    let mut edges = Vec::new();
    let mut triangles = Vec::new();
    for t in 0..k {
        let (a, b, s) = (2 * t, 2 * t + 1, sensor_base + t);
        edges.push((a, b));
        edges.push((a, s));
        edges.push((b, s));
        triangles.push((a, b, s));
        if t + 1 < k {
            edges.push((b, 2 * t + 2));
        }
    }
    SimplicialComplex::from_parts(vertices, edges, triangles).unwrap()
}

/// Ring of `n >= 4` agents (one 1-cycle, no triangles).
pub fn agent_ring(n: usize) -> SimplicialComplex {
    let vertices: Vec<Vertex> = (0..n).map(|i| agent(&format!("a{i:02}"))).collect();
    let edges: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
    SimplicialComplex::from_parts(vertices, edges, vec![]).unwrap()
}

pub fn small_bundle() -> BundleConfig {
    BundleConfig::new(vec![
        ModalitySpec {
            name: "phys".into(),
            fiber_dim: 2,
            input_dim: 3,
        },
        ModalitySpec {
            name: "env".into(),
            fiber_dim: 2,
            input_dim: 2,
        },
    ])
    .unwrap()
}

pub fn small_model_config(spectral: bool) -> ModelConfig {
    ModelConfig {
        expert_hidden: 6,
        gating_hidden: 4,
        flow_hidden: 5,
        edge_feature_dim: 2,
        num_classes: 2,
        spectral_normalized: spectral,
    }
}

pub fn small_model(seed: u64, spectral: bool) -> GvfModel<f64> {
    let bundle = small_bundle();
    let d = bundle.total_input_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    GvfModel::init(
        bundle,
        WhiteningTransform::identity(d),
        &small_model_config(spectral),
        &mut rng,
    )
    .unwrap()
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-scale..scale))
}

/// Window over the given complex with random features, random edge features,
/// and random binary labels on all agent vertices.
pub fn random_window(
    complex: &SimplicialComplex,
    bundle: &BundleConfig,
    edge_feature_dim: usize,
    seed: u64,
) -> WindowBatch<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let features = random_matrix(&mut rng, complex.vertex_count(), bundle.total_input_dim(), 1.0);
    let edge_features = random_matrix(&mut rng, complex.edge_count(), edge_feature_dim, 1.0);
    let labels = complex
        .vertices()
        .iter()
        .enumerate()
        .filter(|(_, v)| v.kind == NodeKind::Agent)
        .map(|(i, _)| (i, rng.random_range(0..2usize)))
        .collect();
    WindowBatch {
        complex: complex.clone(),
        features,
        edge_features,
        labels,
    }
}

/// Random multimodal event stream: agents with random pairwise proximity,
/// sensors with random dwell exposure. Drives `build_complex` end to end.
pub fn random_event_stream(
    seed: u64,
    n_agents: usize,
    n_sensors: usize,
    edge_prob: f64,
    dwell_prob: f64,
) -> gvf_core::complex::EventStream {
    use gvf_core::complex::{DwellRecord, EventStream, ProxRecord};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ev = EventStream::default();
    for i in 0..n_agents {
        for j in (i + 1)..n_agents {
            if rng.random_range(0.0..1.0) < edge_prob {
                ev.proximity.push(ProxRecord {
                    t: 0.0,
                    agent_i: format!("a{i:03}"),
                    agent_j: format!("a{j:03}"),
                    rssi: 60.0,
                });
            }
        }
    }
    for s in 0..n_sensors {
        for i in 0..n_agents {
            if rng.random_range(0.0..1.0) < dwell_prob {
                ev.dwell.push(DwellRecord {
                    t: 1.0,
                    agent: format!("a{i:03}"),
                    sensor: format!("e{s:03}"),
                    duration: 9.0,
                });
            }
        }
    }
    ev
}

/// Random complex through the real construction pipeline.
pub fn random_complex(
    seed: u64,
    n_agents: usize,
    n_sensors: usize,
    edge_prob: f64,
    dwell_prob: f64,
) -> SimplicialComplex {
    let ev = random_event_stream(seed, n_agents, n_sensors, edge_prob, dwell_prob);
    gvf_core::complex::build_complex(&ev, 0.0, &gvf_core::complex::ThresholdConfig::default())
        .unwrap()
}

/// Dense signed incidence matrices of a complex, for oracle computations.
pub fn dense_b1(complex: &SimplicialComplex) -> nalgebra::DMatrix<f64> {
    let mut b1 = nalgebra::DMatrix::zeros(complex.vertex_count(), complex.edge_count());
    for (r, c, v) in complex.b1().triplets() {
        b1[(r, c)] = v as f64;
    }
    b1
}

pub fn dense_b2(complex: &SimplicialComplex) -> nalgebra::DMatrix<f64> {
    let mut b2 = nalgebra::DMatrix::zeros(complex.edge_count(), complex.triangle_count());
    for (r, c, v) in complex.b2().triplets() {
        b2[(r, c)] = v as f64;
    }
    b2
}

/// Random cochain of the given degree over a complex.
pub fn random_cochain(
    complex: &SimplicialComplex,
    degree: usize,
    channels: usize,
    seed: u64,
) -> gvf_core::Cochain64 {
    let rows = match degree {
        0 => complex.vertex_count(),
        1 => complex.edge_count(),
        _ => complex.triangle_count(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    gvf_core::dec::Cochain::new(degree, random_matrix(&mut rng, rows, channels, 2.0)).unwrap()
}

/// Plain logistic regression fit by gradient descent; the independent
/// separability oracle for planted labels.
pub fn logistic_regression_accuracy(xs: &Array2<f64>, ys: &[usize]) -> f64 {
    let (n, d) = xs.dim();
    assert_eq!(n, ys.len());
    let mut w = vec![0.0f64; d + 1];
    let lr = 0.5;
    for _ in 0..400 {
        let mut grad = vec![0.0f64; d + 1];
        for (row, &y) in xs.rows().into_iter().zip(ys) {
            let mut z = w[d];
            for k in 0..d {
                z += w[k] * row[k];
            }
            let p = 1.0 / (1.0 + (-z).exp());
            let err = p - y as f64;
            for k in 0..d {
                grad[k] += err * row[k];
            }
            grad[d] += err;
        }
        for k in 0..=d {
            w[k] -= lr * grad[k] / n as f64;
        }
    }
    let mut correct = 0;
    for (row, &y) in xs.rows().into_iter().zip(ys) {
        let mut z = w[d];
        for k in 0..d {
            z += w[k] * row[k];
        }
        let pred = usize::from(z > 0.0);
        if pred == y {
            correct += 1;
        }
    }
    correct as f64 / n as f64
}

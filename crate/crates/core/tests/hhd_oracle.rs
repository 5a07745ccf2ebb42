//! Decomposition correctness against an explicit dense-pseudoinverse oracle
//! and the solver's iteration behaviour at scale.

mod common;

use gvf_core::complex::{betti_numbers, NodeKind, SimplicialComplex, Vertex};
use gvf_core::dec::Cochain;
use gvf_core::hhd::{cg_solve, component_kernel_basis, decompose, SolverConfig};
use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn pinv(m: &nalgebra::DMatrix<f64>) -> nalgebra::DMatrix<f64> {
    if m.nrows() == 0 {
        return m.clone();
    }
    let svd = m.clone().svd(true, true);
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    svd.pseudo_inverse(1e-10 * sigma_max.max(1.0))
        .expect("pseudo inverse")
}

/// Dense-oracle decomposition: grad part through pinv(D0), curl part through
/// pinv(D2), harmonic as the remainder.
fn dense_hhd(
    complex: &SimplicialComplex,
    flow: &Cochain<f64>,
) -> (
    nalgebra::DMatrix<f64>,
    nalgebra::DMatrix<f64>,
    nalgebra::DMatrix<f64>,
) {
    let b1 = common::dense_b1(complex);
    let b2 = common::dense_b2(complex);
    let f = nalgebra::DMatrix::from_fn(flow.simplex_count(), flow.channels(), |r, c| {
        flow.values()[(r, c)]
    });
    let grad = b1.transpose() * pinv(&(&b1 * b1.transpose())) * &b1 * &f;
    let curl = if complex.triangle_count() > 0 {
        &b2 * pinv(&(b2.transpose() * &b2)) * b2.transpose() * &f
    } else {
        nalgebra::DMatrix::zeros(f.nrows(), f.ncols())
    };
    let harmonic = &f - &grad - &curl;
    (grad, curl, harmonic)
}

fn component_max_diff(dense: &nalgebra::DMatrix<f64>, cg: &Cochain<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for r in 0..dense.nrows() {
        for c in 0..dense.ncols() {
            worst = worst.max((dense[(r, c)] - cg.values()[(r, c)]).abs());
        }
    }
    worst
}

#[test]
fn cg_decomposition_matches_dense_pseudoinverse_oracle() {
    let solver = SolverConfig::default();
    let mut tested = 0usize;
    let start = std::time::Instant::now();
    let mut seed = 0u64;
    while tested < 20 {
        seed += 1;
        let k = common::random_complex(seed, 9, 3, 0.4, 0.45);
        if k.edge_count() == 0 || k.edge_count() > 30 {
            continue;
        }
        tested += 1;
        let f = common::random_cochain(&k, 1, 2, seed + 500);
        let fnorm: f64 = f.norm();
        let tol = 1e-8 * fnorm;
        let d = decompose(&k, &f, &solver).unwrap();
        let (og, oc, oh) = dense_hhd(&k, &f);
        assert!(component_max_diff(&og, &d.grad_part) <= tol, "seed {seed} grad");
        assert!(component_max_diff(&oc, &d.curl_part) <= tol, "seed {seed} curl");
        assert!(component_max_diff(&oh, &d.harmonic_part) <= tol, "seed {seed} harm");

        // Reconstruction and pairwise orthogonality at 1e-8 * |F|^2.
        let report = d.report(&k, &f, false).unwrap();
        assert!(report.reconstruction_residual <= 1e-8);
        for o in report.orthogonality_residuals {
            assert!(o <= 1e-8);
        }
        assert!(report.harmonic_div_norm <= 1e-8);
        assert!(report.harmonic_curl_norm <= 1e-8);
    }
    println!(
        "dense-oracle agreement on {tested} complexes in {:.2}s",
        start.elapsed().as_secs_f64()
    );
    assert!(start.elapsed().as_secs_f64() < 10.0);
}

#[test]
fn harmonic_dimension_matches_planted_beta1() {
    use gvf_core::synth::{generate, planted_complex, CohortConfig, Scenario};
    for beta1 in 1..=3usize {
        for seed in 0..3u64 {
            let cfg = CohortConfig {
                n_agents: 4 * beta1 + 4,
                n_sensors: 2,
                n_external: 0,
                scenario: Scenario::HarmonicDominant,
                noise: 0.0,
                seed,
                beta1,
                ..CohortConfig::default()
            };
            let (_, gt) = generate(&cfg).unwrap();
            let k = planted_complex(&gt).unwrap();
            let summary = betti_numbers(&k).unwrap();
            assert_eq!(summary.beta1, beta1);
            let d1 = gvf_core::dec::hodge_laplacian::<f64>(&k, 1).unwrap();
            let eigs = gvf_core::linalg::symmetric_eigenvalues(&d1.matrix).unwrap();
            let lambda_max = eigs.last().copied().unwrap();
            let kernel = eigs
                .iter()
                .filter(|&&l| l <= gvf_core::hhd::KERNEL_EIGEN_CUT * lambda_max)
                .count();
            assert_eq!(kernel, beta1);
        }
    }
}

/// Well-connected random complex with about `degree` neighbours per agent.
fn large_complex(n_agents: usize, n_sensors: usize, degree: usize, seed: u64) -> SimplicialComplex {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vertices: Vec<Vertex> = (0..n_agents)
        .map(|i| Vertex {
            id: format!("a{i:04}"),
            kind: NodeKind::Agent,
        })
        .collect();
    for s in 0..n_sensors {
        vertices.push(Vertex {
            id: format!("e{s:04}"),
            kind: NodeKind::EnvSensor,
        });
    }
    let n = vertices.len();
    let mut edges = std::collections::BTreeSet::new();
    for i in 0..n_agents {
        // Ring backbone keeps it connected.
        edges.insert((i, (i + 1) % n_agents));
        for _ in 0..degree.saturating_sub(2) {
            let j = rng.random_range(0..n_agents);
            if j != i {
                edges.insert((i.min(j), i.max(j)));
            }
        }
    }
    for s in 0..n_sensors {
        for _ in 0..degree {
            let i = rng.random_range(0..n_agents);
            edges.insert((i, n_agents + s));
        }
    }
    let edges: Vec<(usize, usize)> = edges
        .into_iter()
        .map(|(a, b)| (a.min(b), a.max(b)))
        .collect();
    // Close every eligible triad (the sensor endpoints make them mixed-kind).
    let mut nbrs: Vec<std::collections::BTreeSet<usize>> = vec![Default::default(); n];
    for &(a, b) in &edges {
        nbrs[a].insert(b);
        nbrs[b].insert(a);
    }
    let mut triangles = Vec::new();
    for &(i, j) in &edges {
        for &k in nbrs[i].intersection(&nbrs[j]) {
            if k > j {
                let kinds: std::collections::BTreeSet<NodeKind> =
                    [i, j, k].iter().map(|&v| vertices[v].kind).collect();
                if kinds.len() >= 2 {
                    triangles.push((i, j, k));
                }
            }
        }
    }
    SimplicialComplex::from_parts(vertices, edges, triangles).unwrap()
}

#[test]
fn thousand_vertex_solves_converge_quickly() {
    let k = large_complex(900, 100, 8, 2024);
    assert_eq!(k.vertex_count(), 1000);
    assert!(k.triangle_count() > 0, "need triangles for the stream solve");
    let f = common::random_cochain(&k, 1, 1, 77);
    let cfg = SolverConfig {
        tol: 1e-10,
        max_iter: None,
    };
    let start = std::time::Instant::now();
    let d = decompose(&k, &f, &cfg).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let worst = d.diagnostics.max_iterations();
    println!(
        "|V|=1000: {} edges, {} triangles, max CG iterations {worst}, {elapsed:.2}s",
        k.edge_count(),
        k.triangle_count()
    );
    assert!(worst < 50, "CG took {worst} iterations");
    assert!(elapsed < 5.0, "decompose took {elapsed:.2}s");
}

#[test]
fn cg_solution_orthogonal_to_kernel() {
    let k = common::random_complex(5, 12, 2, 0.4, 0.4);
    let f = common::random_cochain(&k, 1, 1, 9);
    let d0 = gvf_core::dec::hodge_laplacian::<f64>(&k, 0).unwrap();
    let basis = component_kernel_basis::<f64>(&k);
    let b: Vec<f64> = gvf_core::dec::div(&k, &f)
        .unwrap()
        .values()
        .column(0)
        .to_vec();
    let (x, diag) = cg_solve(&d0, &b, &basis, &SolverConfig::default()).unwrap();
    assert!(diag.residual <= 1e-10);
    for v in &basis {
        let dot: f64 = x.iter().zip(v).map(|(a, b)| a * b).sum();
        assert!(dot.abs() < 1e-9, "kernel component {dot}");
    }
    // Agreement with the dense pseudoinverse.
    let b1 = common::dense_b1(&k);
    let dense = pinv(&(&b1 * b1.transpose()))
        * nalgebra::DMatrix::from_column_slice(b.len(), 1, &b);
    for (i, &xi) in x.iter().enumerate() {
        assert!((dense[(i, 0)] - xi).abs() <= 1e-8);
    }
}

#[test]
fn decompose_with_channel_stacking_matches_loop() {
    // Random multi-channel flow equals stacking the single-channel results.
    let k = common::random_complex(6, 10, 3, 0.45, 0.4);
    let f = common::random_cochain(&k, 1, 4, 11);
    let solver = SolverConfig::default();
    let d = decompose(&k, &f, &solver).unwrap();
    for c in 0..4 {
        let dc = decompose(&k, &f.channel(c), &solver).unwrap();
        let diff = d.harmonic_part.channel(c).sub(&dc.harmonic_part).norm();
        assert!(diff < 1e-9, "channel {c}: {diff}");
    }
}

#[test]
fn empty_and_degenerate_flows() {
    // A complex with no triangles leaves the curl part empty and zero.
    let k = common::random_complex(8, 6, 0, 0.3, 0.0);
    assert_eq!(k.triangle_count(), 0);
    if k.edge_count() == 0 {
        return;
    }
    let f = common::random_cochain(&k, 1, 2, 13);
    let d = decompose(&k, &f, &SolverConfig::default()).unwrap();
    assert_eq!(d.stream.simplex_count(), 0);
    assert_eq!(d.curl_part.norm(), 0.0);
    let recon = d.grad_part.add(&d.harmonic_part);
    let fn64: f64 = f.norm();
    assert!(f.sub(&recon).norm() <= 1e-8 * fn64);

    // Zero right-hand side terminates immediately.
    let zero = Cochain::<f64>::new(1, Array2::zeros((k.edge_count(), 2))).unwrap();
    let d = decompose(&k, &zero, &SolverConfig::default()).unwrap();
    assert_eq!(d.diagnostics.max_iterations(), 0);
}

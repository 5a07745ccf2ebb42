//! Operator correctness against independent dense-matrix oracles, the
//! exactness chain, spectral bounds, and the kernel/Betti cross-check.

mod common;

use gvf_core::complex::betti_numbers;
use gvf_core::dec::{self, Cochain};
use gvf_core::hhd::KERNEL_EIGEN_CUT;
use gvf_core::linalg;

fn mul_dense(
    m: &nalgebra::DMatrix<f64>,
    cochain: &Cochain<f64>,
) -> nalgebra::DMatrix<f64> {
    let x = nalgebra::DMatrix::from_fn(cochain.simplex_count(), cochain.channels(), |r, c| {
        cochain.values()[(r, c)]
    });
    m * x
}

fn max_abs_diff(a: &nalgebra::DMatrix<f64>, b: &Cochain<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for r in 0..a.nrows() {
        for c in 0..a.ncols() {
            worst = worst.max((a[(r, c)] - b.values()[(r, c)]).abs());
        }
    }
    worst
}

#[test]
fn grad_div_curl_match_dense_incidence_products() {
    for seed in 0..6u64 {
        let k = common::random_complex(seed, 10, 3, 0.35, 0.4);
        if k.is_empty() {
            continue;
        }
        let b1 = common::dense_b1(&k);
        let b2 = common::dense_b2(&k);
        let r = common::random_cochain(&k, 0, 3, seed + 50);
        let f = common::random_cochain(&k, 1, 3, seed + 150);

        let grad = dec::grad(&k, &r).unwrap();
        assert!(max_abs_diff(&mul_dense(&b1.transpose(), &r), &grad) < 1e-12);

        let div = dec::div(&k, &f).unwrap();
        assert!(max_abs_diff(&mul_dense(&b1, &f), &div) < 1e-12);

        if k.triangle_count() > 0 {
            let curl = dec::curl(&k, &f).unwrap();
            assert!(max_abs_diff(&mul_dense(&b2.transpose(), &f), &curl) < 1e-12);
        }
    }
}

#[test]
fn exactness_chain_integer_and_float() {
    for seed in 0..8u64 {
        let k = common::random_complex(seed + 10, 9, 3, 0.4, 0.45);
        // Integer identity B1 B2 = 0, exactly.
        assert!(k.b1().multiply(k.b2()).is_empty());
        // Floating identity curl(grad r) = 0 within 1e-12.
        if k.vertex_count() > 0 {
            let r = common::random_cochain(&k, 0, 2, seed + 60);
            let cg = dec::curl(&k, &dec::grad(&k, &r).unwrap()).unwrap();
            let worst = cg.values().iter().fold(0.0_f64, |w, v| w.max(v.abs()));
            assert!(worst <= 1e-12, "seed {seed}: curl grad {worst:e}");
        }
    }
}

#[test]
fn adjointness_of_grad_and_div() {
    for seed in 0..8u64 {
        let k = common::random_complex(seed + 30, 8, 2, 0.45, 0.4);
        if k.edge_count() == 0 {
            continue;
        }
        let r = common::random_cochain(&k, 0, 2, seed);
        let f = common::random_cochain(&k, 1, 2, seed + 1);
        let lhs: f64 = dec::inner(&dec::grad(&k, &r).unwrap(), &f).unwrap();
        let rhs: f64 = dec::inner(&r, &dec::div(&k, &f).unwrap()).unwrap();
        let scale = lhs.abs().max(rhs.abs()).max(1.0);
        assert!((lhs - rhs).abs() <= 1e-12 * scale);
    }
}

#[test]
fn curl_operator_norm_bounds() {
    let mut paper_bound_held = 0usize;
    let mut checked = 0usize;
    for seed in 0..8u64 {
        let k = common::random_complex(seed + 70, 10, 3, 0.45, 0.5);
        if k.triangle_count() == 0 {
            continue;
        }
        checked += 1;
        let d_max = betti_numbers(&k).unwrap().d_max as f64;
        let norm = dec::curl_operator_norm(&k).unwrap();
        // Provable Gershgorin-style bound: |B2^T| <= sqrt(3 d_max).
        assert!(
            norm <= (3.0 * d_max).sqrt() + 1e-9,
            "seed {seed}: norm {norm} vs sqrt(3 d_max) {}",
            (3.0 * d_max).sqrt()
        );
        if norm <= d_max.sqrt() + 1e-9 {
            paper_bound_held += 1;
        }
    }
    assert!(checked >= 3, "fixture produced too few triangle complexes");
    println!(
        "curl norm: tighter sqrt(d_max) bound held on {paper_bound_held}/{checked} complexes"
    );
}

#[test]
fn laplacian_kernel_dimension_equals_beta1() {
    let mut checked = 0usize;
    for seed in 0..10u64 {
        let k = common::random_complex(seed + 90, 9, 3, 0.4, 0.45);
        if k.edge_count() == 0 {
            continue;
        }
        checked += 1;
        let summary = betti_numbers(&k).unwrap();
        let d1 = dec::hodge_laplacian::<f64>(&k, 1).unwrap();
        let eigs = linalg::symmetric_eigenvalues(&d1.matrix).unwrap();
        let lambda_max = eigs.last().copied().unwrap_or(0.0);
        let cut = KERNEL_EIGEN_CUT * lambda_max;
        let kernel_dim = eigs.iter().filter(|&&l| l <= cut).count();
        assert_eq!(kernel_dim, summary.beta1, "seed {seed}");
    }
    assert!(checked >= 5);
}

#[test]
fn laplacians_are_positive_semidefinite() {
    for seed in 0..5u64 {
        let k = common::random_complex(seed + 120, 8, 3, 0.45, 0.5);
        if k.is_empty() {
            continue;
        }
        for degree in 0..=2usize {
            let l = dec::hodge_laplacian::<f64>(&k, degree).unwrap();
            if l.matrix.nrows() == 0 {
                continue;
            }
            assert!(l.matrix.is_symmetric());
            let eigs = linalg::symmetric_eigenvalues(&l.matrix).unwrap();
            let lambda_max = eigs.last().copied().unwrap_or(0.0).max(0.0);
            assert!(
                eigs[0] >= -1e-10 * lambda_max.max(1.0),
                "degree {degree}: lambda_min {}",
                eigs[0]
            );
        }
    }
}

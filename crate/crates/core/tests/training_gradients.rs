//! Gradient correctness against central finite differences, loss bounds,
//! and the permutation symmetry of the objective.

mod common;

use gvf_core::dec;
use gvf_core::model::FlowParams;
use gvf_core::training::{
    backward, grad_vector, loss_total, param_vector, set_params, LossConfig, WindowBatch,
};

const FD_STEP: f64 = 1e-5;
const FD_TOL: f64 = 1e-4;

fn fd_instance() -> (gvf_core::GvfModel64, Vec<WindowBatch<f64>>, LossConfig) {
    // 9-vertex triad chain plus a second smaller window so multi-window
    // averaging is exercised too.
    let k1 = common::triad_chain(3);
    let k2 = common::triad_chain(2);
    let bundle = common::small_bundle();
    let model = common::small_model(41, false);
    let w1 = common::random_window(&k1, &bundle, 2, 100);
    let w2 = common::random_window(&k2, &bundle, 2, 101);
    let cfg = LossConfig {
        lambda1: 0.1,
        lambda2: 0.1,
        eps: 1e-8,
        num_classes: 2,
        p_drop: 0.2,
    };
    (model, vec![w1, w2], cfg)
}

#[test]
fn gradients_match_central_finite_differences() {
    let (model, windows, cfg) = fd_instance();
    let parts = loss_total(&model, &windows, &cfg).unwrap();
    // Keep the geometric path differentiable: rho strictly inside (0, 1).
    let rho_sq = parts.rho * parts.rho;
    assert!(
        rho_sq > 0.01 && rho_sq < 0.95,
        "fixture rho^2 {rho_sq} too close to the clip boundary"
    );

    let (_, grads) = backward(&model, &windows, &cfg).unwrap();
    let analytic = grad_vector(&grads);
    let base = param_vector(&model);
    assert_eq!(analytic.len(), base.len());

    let mut probe = model.clone();
    let mut worst = 0.0f64;
    for idx in 0..base.len() {
        let mut plus = base.clone();
        plus[idx] += FD_STEP;
        set_params(&mut probe, &plus);
        let lp: f64 = loss_total(&probe, &windows, &cfg).unwrap().total;
        let mut minus = base.clone();
        minus[idx] -= FD_STEP;
        set_params(&mut probe, &minus);
        let lm: f64 = loss_total(&probe, &windows, &cfg).unwrap().total;
        let fd = (lp - lm) / (2.0 * FD_STEP);
        let rel = (analytic[idx] - fd).abs() / analytic[idx].abs().max(fd.abs()).max(1e-6);
        worst = worst.max(rel);
        assert!(
            rel <= FD_TOL,
            "param {idx}: analytic {} vs fd {} (rel {rel:e})",
            analytic[idx],
            fd
        );
    }
    println!("finite-difference check: {} params, worst rel err {worst:.3e}", base.len());
}

#[test]
fn zero_weights_reduce_to_classification_gradients() {
    let (model, windows, _) = fd_instance();
    let cfg = LossConfig {
        lambda1: 0.0,
        lambda2: 0.0,
        ..LossConfig::default()
    };
    let (parts, grads) = backward(&model, &windows, &cfg).unwrap();
    let total: f64 = parts.total;
    assert_eq!(total, parts.cls);

    // Finite differences of the classification part alone agree with the
    // full gradients at zero regulariser weights.
    let analytic = grad_vector(&grads);
    let base = param_vector(&model);
    let mut probe = model.clone();
    for idx in (0..base.len()).step_by(17) {
        let mut plus = base.clone();
        plus[idx] += FD_STEP;
        set_params(&mut probe, &plus);
        let lp: f64 = loss_total(&probe, &windows, &cfg).unwrap().cls;
        let mut minus = base.clone();
        minus[idx] -= FD_STEP;
        set_params(&mut probe, &minus);
        let lm: f64 = loss_total(&probe, &windows, &cfg).unwrap().cls;
        let fd = (lp - lm) / (2.0 * FD_STEP);
        let rel = (analytic[idx] - fd).abs() / analytic[idx].abs().max(fd.abs()).max(1e-6);
        assert!(rel <= FD_TOL, "param {idx}: rel {rel:e}");
    }
}

#[test]
fn risk_axis_gradients_are_zero() {
    let (model, windows, cfg) = fd_instance();
    let (_, grads) = backward(&model, &windows, &cfg).unwrap();
    for g in &grads.risk_axes {
        assert!(g.iter().all(|&v| v == 0.0));
    }
}

#[test]
fn geo_stays_in_bounds_and_clips_exactly() {
    let (mut model, mut windows, cfg) = fd_instance();
    windows.truncate(1);

    // Adversarial sweep over parameter scalings; geo must stay within
    // [-log 2, 0] throughout.
    for scale in [0.0, 0.3, 1.0, 5.0, 40.0] {
        let mut m = model.clone();
        m.flow.w1 = m.flow.w1.mapv(|v| v * scale);
        m.flow.skip = m.flow.skip.mapv(|v| v * scale);
        let parts = loss_total(&m, &windows, &cfg).unwrap();
        let geo: f64 = parts.geo;
        assert!(geo <= 0.0 && geo >= -std::f64::consts::LN_2 - 1e-15);
    }

    // Pure boundary circulation on one filled triangle: rho_raw = 3 > 1, so
    // the clip engages and geo is exactly -log 2. The flow constructor is
    // driven to reproduce the circulation via its skip path on edge features.
    let k = common::triad_chain(1);
    let mut window = common::random_window(&k, &common::small_bundle(), 2, 102);
    // Edge features chosen so that skip * e_ij reproduces the oriented cycle
    // (+1, -1, +1) on the canonical edges of the triangle (0,1,2).
    window.edge_features = ndarray::array![[1.0, 0.0], [-1.0, 0.0], [1.0, 0.0]];
    model.flow.w1 = ndarray::Array2::zeros(model.flow.w1.dim());
    model.flow.w2 = ndarray::Array2::zeros(model.flow.w2.dim());
    model.flow.b1 = ndarray::Array1::zeros(model.flow.b1.len());
    model.flow.b2 = ndarray::Array1::zeros(model.flow.b2.len());
    model.flow.skip = ndarray::Array2::zeros(model.flow.skip.dim());
    let m = model.channels();
    model.flow.skip[(0, 2 * m)] = 1.0; // channel 0 reads the first edge feature
    let parts = loss_total(&model, &[window], &cfg).unwrap();
    let rho_sq: f64 = parts.rho * parts.rho;
    assert!(rho_sq > 1.0, "expected clipping, rho^2 = {rho_sq}");
    let geo: f64 = parts.geo;
    assert_eq!(geo, -std::f64::consts::LN_2);
}

#[test]
fn gradient_special_case_flow_gives_zero_geo() {
    let (mut model, windows, cfg) = fd_instance();
    model.flow = FlowParams::gradient_special_case(model.channels(), 2);
    let parts = loss_total(&model, &windows, &cfg).unwrap();
    let rho_sq: f64 = parts.rho * parts.rho;
    let geo: f64 = parts.geo;
    assert!(rho_sq < 1e-20, "rho^2 = {rho_sq}");
    assert!(geo.abs() < 1e-20, "geo = {geo}");

    // The constructed flow is bitwise the discrete gradient of the risk
    // section on every window.
    for w in &windows {
        let xw = model.whiten(&w.features);
        let r = model.risk_section(&w.complex, &xw).unwrap();
        let f = model.edge_flow(&w.complex, &r, &w.edge_features).unwrap();
        let g = dec::grad(&w.complex, &r).unwrap();
        assert_eq!(f.values(), g.values());
    }
}

#[test]
fn objective_is_invariant_under_within_fiber_permutation() {
    let (model, windows, cfg) = fd_instance();
    let before: f64 = loss_total(&model, &windows, &cfg).unwrap().total;

    // Swap the two coordinates of fiber 1 everywhere they appear: expert
    // output layer, read-out columns, risk axis, and the flow constructor's
    // input columns for both endpoint copies of the risk vector.
    let mut permuted = model.clone();
    let fiber = permuted.bundle.fiber_range(1);
    let (c0, c1) = (fiber.start, fiber.start + 1);
    let m = permuted.bundle.total_fiber_dim();

    let e = &mut permuted.experts[1];
    for col in 0..e.w2.ncols() {
        let tmp = e.w2[(0, col)];
        e.w2[(0, col)] = e.w2[(1, col)];
        e.w2[(1, col)] = tmp;
    }
    e.b2.swap(0, 1);

    for row in 0..permuted.readout.weight.nrows() {
        let tmp = permuted.readout.weight[(row, c0)];
        permuted.readout.weight[(row, c0)] = permuted.readout.weight[(row, c1)];
        permuted.readout.weight[(row, c1)] = tmp;
    }

    permuted.risk_axes[1].swap(0, 1);

    for w in [&mut permuted.flow.w1, &mut permuted.flow.skip] {
        for row in 0..w.nrows() {
            let tmp = w[(row, c0)];
            w[(row, c0)] = w[(row, c1)];
            w[(row, c1)] = tmp;
            let tmp = w[(row, m + c0)];
            w[(row, m + c0)] = w[(row, m + c1)];
            w[(row, m + c1)] = tmp;
        }
    }

    let after: f64 = loss_total(&permuted, &windows, &cfg).unwrap().total;
    assert!(
        (before - after).abs() <= 1e-10,
        "loss moved under permutation: {before} vs {after}"
    );
}

#[test]
fn empty_batch_is_an_error() {
    let (model, mut windows, cfg) = fd_instance();
    for w in &mut windows {
        w.labels.clear();
    }
    assert!(loss_total(&model, &windows, &cfg).is_err());
    assert!(loss_total(&model, &[], &cfg).is_err());
}

#[test]
fn invalid_lambda1_rejected() {
    let (model, windows, _) = fd_instance();
    let cfg = LossConfig {
        lambda1: 0.2,
        ..LossConfig::default()
    };
    assert!(loss_total(&model, &windows, &cfg).is_err());
}

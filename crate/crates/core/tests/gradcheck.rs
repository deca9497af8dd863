use glitchguard_core::verify::{check_conv2d, check_convlstm, check_deconv2d, check_micro_model, check_mse};

const LAYER_TOL: f64 = 1e-4;

#[test]
fn conv2d_gradients() {
    let s = check_conv2d(20, 11);
    assert!(s.max_relative_error < LAYER_TOL, "{s:?}");
}

#[test]
fn deconv2d_gradients() {
    let s = check_deconv2d(20, 12);
    assert!(s.components > 0);
    assert!(s.max_relative_error < LAYER_TOL, "{s:?}");
}

#[test]
fn convlstm_gradients() {
    let s = check_convlstm(20, 13);
    assert!(s.max_relative_error < LAYER_TOL, "{s:?}");
}

#[test]
fn mse_gradients() {
    let s = check_mse(20, 14);
    assert!(s.max_relative_error < LAYER_TOL, "{s:?}");
}

#[test]
fn micro_model_gradients() {
    let s = check_micro_model(20, 15);
    assert!(s.max_relative_error < 1e-3, "{s:?}");
}

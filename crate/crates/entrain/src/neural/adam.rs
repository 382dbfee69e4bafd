//! Adam optimizer with bias-corrected first and second moments.

use super::{Gradients, Matrix, NetworkParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First/second moment estimates, one pair per learnable tensor, all
/// initialized to zero.
#[derive(Debug, Clone)]
pub struct AdamState {
    m_dense_w: Vec<Matrix>,
    v_dense_w: Vec<Matrix>,
    m_dense_b: Vec<Vec<f64>>,
    v_dense_b: Vec<Vec<f64>>,
    m_bn_gamma: Vec<Vec<f64>>,
    v_bn_gamma: Vec<Vec<f64>>,
    m_bn_beta: Vec<Vec<f64>>,
    v_bn_beta: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(params: &NetworkParams) -> Self {
        let zero_w: Vec<Matrix> = params
            .dense
            .iter()
            .map(|d| Matrix::zeros(d.weights.rows(), d.weights.cols()))
            .collect();
        let zero_b: Vec<Vec<f64>> = params.dense.iter().map(|d| vec![0.0; d.bias.len()]).collect();
        let zero_bn: Vec<Vec<f64>> = params.bn.iter().map(|b| vec![0.0; b.gamma.len()]).collect();
        Self {
            m_dense_w: zero_w.clone(),
            v_dense_w: zero_w,
            m_dense_b: zero_b.clone(),
            v_dense_b: zero_b,
            m_bn_gamma: zero_bn.clone(),
            v_bn_gamma: zero_bn.clone(),
            m_bn_beta: zero_bn.clone(),
            v_bn_beta: zero_bn,
        }
    }
}

/// One Adam update over every learnable tensor. `t` is the 1-based step
/// index used for bias correction.
pub fn adam_step(
    params: &mut NetworkParams,
    grads: &Gradients,
    state: &mut AdamState,
    t: usize,
    config: &AdamConfig,
) {
    assert!(t >= 1, "adam step index is 1-based");
    for i in 0..params.dense.len() {
        update_tensor(
            params.dense[i].weights.data_mut(),
            grads.dense_w[i].data(),
            state.m_dense_w[i].data_mut(),
            state.v_dense_w[i].data_mut(),
            t,
            config,
        );
        update_tensor(
            &mut params.dense[i].bias,
            &grads.dense_b[i],
            &mut state.m_dense_b[i],
            &mut state.v_dense_b[i],
            t,
            config,
        );
    }
    for i in 0..params.bn.len() {
        update_tensor(
            &mut params.bn[i].gamma,
            &grads.bn_gamma[i],
            &mut state.m_bn_gamma[i],
            &mut state.v_bn_gamma[i],
            t,
            config,
        );
        update_tensor(
            &mut params.bn[i].beta,
            &grads.bn_beta[i],
            &mut state.m_bn_beta[i],
            &mut state.v_bn_beta[i],
            t,
            config,
        );
    }
}

/// Adam update rule for one flat tensor.
pub fn update_tensor(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    t: usize,
    config: &AdamConfig,
) {
    assert_eq!(params.len(), grads.len(), "adam tensor shapes");
    let bc1 = 1.0 - config.beta1.powi(t as i32);
    let bc2 = 1.0 - config.beta2.powi(t as i32);
    for i in 0..params.len() {
        m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * grads[i];
        v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * grads[i] * grads[i];
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        params[i] -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let config = AdamConfig::default();
        for &g in &[3.0, -0.25, 1e-3, -42.0] {
            let mut p = [1.0];
            let mut m = [0.0];
            let mut v = [0.0];
            update_tensor(&mut p, &[g], &mut m, &mut v, 1, &config);
            let expected = 1.0 - config.learning_rate * g.signum();
            assert!(
                (p[0] - expected).abs() < 1e-6,
                "g = {g}: p = {}, expected ~{expected}",
                p[0]
            );
        }
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let config = AdamConfig::default();
        let mut p = [0.7, -0.3];
        let mut m = [0.0, 0.0];
        let mut v = [0.0, 0.0];
        for t in 1..=50 {
            update_tensor(&mut p, &[0.0, 0.0], &mut m, &mut v, t, &config);
        }
        assert_eq!(p, [0.7, -0.3]);
    }

    #[test]
    fn updates_are_deterministic() {
        let config = AdamConfig::default();
        let grads = [0.5, -1.5, 0.01];
        let run = || {
            let mut p = [1.0, 2.0, 3.0];
            let mut m = [0.0; 3];
            let mut v = [0.0; 3];
            for t in 1..=20 {
                update_tensor(&mut p, &grads, &mut m, &mut v, t, &config);
            }
            p
        };
        assert_eq!(run(), run());
    }
}

use crate::error::{Error, Result};
use crate::numerics::mat::Mat;
use crate::numerics::tape::ParamStore;

/// Bias-corrected Adam moments for every parameter of one store.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<Mat>,
    v: Vec<Mat>,
}

impl AdamState {
    pub fn new(store: &ParamStore) -> Self {
        let zeros = || {
            store
                .iter()
                .map(|(_, p)| Mat::zeros(p.value.rows(), p.value.cols()))
                .collect::<Vec<_>>()
        };
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn first_moment(&self, index: usize) -> &Mat {
        &self.m[index]
    }

    pub fn second_moment(&self, index: usize) -> &Mat {
        &self.v[index]
    }
}

/// Applies one Adam update from the accumulated gradients, then zeroes them.
///
/// All gradients are validated before any parameter moves, so a non-finite
/// gradient leaves the store and the moments untouched.
pub fn adam_step(store: &mut ParamStore, state: &mut AdamState, lr: f64) -> Result<()> {
    if let Some((_, p)) = store.iter().find(|(_, p)| !p.grad.is_finite()) {
        return Err(Error::NonFinite(format!("gradient of parameter `{}`", p.name)));
    }
    debug_assert_eq!(state.m.len(), store.len());
    state.t += 1;
    let bc1 = 1.0 - state.beta1.powi(state.t as i32);
    let bc2 = 1.0 - state.beta2.powi(state.t as i32);
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    for ((p, m), v) in store.params_mut().iter_mut().zip(&mut state.m).zip(&mut state.v) {
        let grads = p.grad.as_slice();
        let values = p.value.as_mut_slice();
        let ms = m.as_mut_slice();
        let vs = v.as_mut_slice();
        for i in 0..grads.len() {
            let g = grads[i];
            ms[i] = b1 * ms[i] + (1.0 - b1) * g;
            vs[i] = b2 * vs[i] + (1.0 - b2) * g * g;
            let m_hat = ms[i] / bc1;
            let v_hat = vs[i] / bc2;
            values[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        p.grad.fill(0.0);
    }
    Ok(())
}

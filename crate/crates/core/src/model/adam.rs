use crate::error::{Error, Result};

use super::params::ToyParams;

/// Bias-corrected Adam moments for every parameter group.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(params: &ToyParams, lr: f64) -> Self {
        let zeros: Vec<Vec<f64>> = params.groups().iter().map(|g| vec![0.0; g.len()]).collect();
        AdamState { m: zeros.clone(), v: zeros, step: 0, lr, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

pub fn adam_step(state: &mut AdamState, params: &mut ToyParams, grads: &ToyParams) -> Result<()> {
    params.ensure_compatible(grads)?;
    let fits = |moments: &[Vec<f64>]| {
        moments.len() == params.groups().len()
            && moments.iter().zip(params.groups()).all(|(m, p)| m.len() == p.len())
    };
    if !fits(&state.m) || !fits(&state.v) {
        return Err(Error::Invalid("optimizer state does not match the parameters".into()));
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - state.beta1.powi(t);
    let c2 = 1.0 - state.beta2.powi(t);
    for (k, (p, g)) in params.groups_mut().iter_mut().zip(grads.groups()).enumerate() {
        let (m, v) = (&mut state.m[k], &mut state.v[k]);
        for i in 0..p.len() {
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
            p[i] -= state.lr * (m[i] / c1) / ((v[i] / c2).sqrt() + state.eps);
        }
    }
    Ok(())
}

use crate::error::{Error, Result};

use super::TrainConfig;

/// Per-parameter moving averages of squared gradients.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RmspropState {
    pub cache: Vec<Vec<f64>>,
}

impl RmspropState {
    /// Zeroed caches matching the given parameter group lengths.
    pub fn new(lengths: impl IntoIterator<Item = usize>) -> Self {
        RmspropState {
            cache: lengths.into_iter().map(|n| vec![0.0; n]).collect(),
        }
    }
}

/// `cache ← ρ·cache + (1−ρ)·g²;  p ← p − lr·g / (√cache + ε)`, elementwise.
pub fn rmsprop_step(
    params: &mut [&mut [f64]],
    grads: &[&[f64]],
    state: &mut RmspropState,
    cfg: &TrainConfig,
) -> Result<()> {
    if state.cache.is_empty() && !params.is_empty() {
        *state = RmspropState::new(params.iter().map(|p| p.len()));
    }
    if params.len() != grads.len() || params.len() != state.cache.len() {
        return Err(Error::Dimension(format!(
            "{} parameter groups, {} gradient groups, {} cache groups",
            params.len(),
            grads.len(),
            state.cache.len()
        )));
    }
    for ((p, g), c) in params.iter().zip(grads).zip(&state.cache) {
        if p.len() != g.len() || p.len() != c.len() {
            return Err(Error::Dimension("parameter/gradient/cache lengths differ".into()));
        }
    }
    let (rho, lr, eps) = (cfg.rmsprop_rho, cfg.learning_rate, cfg.rmsprop_eps);
    for ((p, g), c) in params.iter_mut().zip(grads).zip(state.cache.iter_mut()) {
        for ((pv, &gv), cv) in p.iter_mut().zip(g.iter()).zip(c.iter_mut()) {
            *cv = rho * *cv + (1.0 - rho) * gv * gv;
            *pv -= lr * gv / (cv.sqrt() + eps);
        }
    }
    Ok(())
}

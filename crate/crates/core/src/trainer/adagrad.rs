//! AdaGrad with exponentially decayed squared-gradient sums, L1/L2
//! regularisation folded into the gradient, and projection of link weights
//! onto the non-negative orthant.

use crate::error::{Error, Result};
use crate::model::{Model, Params};

use super::Hyperparams;

/// Decayed sums of squared gradients, one per parameter.
pub type AdaGradState = Params;

/// Ascent step from one batch's summed gradient `acc`.
pub fn apply_update(model: &mut Model, acc: &Params, state: &mut AdaGradState, hp: &Hyperparams) -> Result<()> {
    if !acc.same_shape(&model.params) || !state.same_shape(&model.params) {
        return Err(Error::Format("gradient or optimiser state shape mismatch".into()));
    }
    if let Some(pos) = acc.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite(format!("gradient (parameter #{pos})")));
    }
    let rho = hp.adagrad_decay;
    let theta_arrays = model.params.arrays_mut();
    let g_arrays = acc.arrays();
    let s_arrays = state.arrays_mut();
    for ((theta, grad), sq) in theta_arrays.into_iter().zip(g_arrays).zip(s_arrays) {
        for ((t, &g0), s) in theta.iter_mut().zip(grad).zip(sq.iter_mut()) {
            let sign = if *t > 0.0 {
                1.0
            } else if *t < 0.0 {
                -1.0
            } else {
                0.0
            };
            let g = g0 - hp.l2 * *t - hp.l1 * sign;
            *s = rho * *s + g * g;
            let denom = s.sqrt() + hp.adagrad_epsilon;
            if denom > 0.0 {
                *t += hp.learning_rate * g / denom;
            }
        }
    }
    model.project_link_weights();
    if model.params.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("parameters after update".into()));
    }
    Ok(())
}

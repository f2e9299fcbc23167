//! Single-sample estimates of the likelihood gradient.
//!
//! The positive phase uses the persistent latent state of each token: the
//! background statistics of its latent situation, the semantic-function
//! term for the observed predicate, and the negative term for the latent
//! predicate. The negative phase subtracts the background statistics of the
//! fantasy particles.

use crate::corpus::GraphToken;
use crate::mcmc::LatentState;
use crate::model::{Model, Params, Situation};

/// Gradient accumulator; same layout as the model parameters.
pub type GradientAccumulator = Params;

pub fn positive_gradients(token: &GraphToken, latent: &LatentState, model: &Model, acc: &mut GradientAccumulator) {
    acc.add_background_grad(&latent.entities, &token.links, 1.0);
    for (slot, x) in latent.entities.iter().enumerate() {
        let c = token.nodes[slot];
        acc.add_semantic_grad(x, c, 1.0 - model.truth_probability(x, c));
        let neg = latent.neg_predicates[slot];
        acc.add_semantic_grad(x, neg, -(1.0 - model.truth_probability(x, neg)));
    }
}

/// Subtract the particle-averaged background statistics, scaled so that
/// the result is on the same per-token scale as a batch of `weight *
/// particles.len()` positive terms.
pub fn negative_gradients(particles: &[Situation], acc: &mut GradientAccumulator, weight: f64) {
    for p in particles {
        acc.add_background_grad(&p.entities, &p.links, -weight);
    }
}

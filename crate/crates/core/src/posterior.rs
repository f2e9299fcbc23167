//! Posterior predictive queries: which predicate would be used for an
//! unobserved node, given the predicates observed on the rest of the graph.

use crate::cardinality::{resample_slot, uniform_entity};
use crate::corpus::{Link, PredicateId};
use crate::error::{Error, Result};
use crate::exact::{check_enumerable, exact_slot_posterior};
use crate::mcmc::{mh_entity_step_partial, ZRatio};
use crate::model::Model;
use crate::rng::{stream_rng, Stream};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PosteriorMethod {
    /// Enumerate; fails when the space is too large.
    Exact,
    /// MCMC estimate.
    Sampling(SamplingBudget),
    /// Enumerate when feasible, otherwise sample with the given budget.
    Auto(SamplingBudget),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SamplingBudget {
    pub samples: usize,
    pub burnin: usize,
    /// MH steps per observed node per sweep.
    pub steps_per_node: usize,
    pub seed: u64,
}

impl SamplingBudget {
    pub fn new(samples: usize, seed: u64) -> Self {
        SamplingBudget {
            samples,
            burnin: (samples / 10).max(100),
            steps_per_node: 5,
            seed,
        }
    }
}

/// Distribution over the vocabulary for the predicate at `slot`.
pub fn slot_posterior(
    model: &Model,
    nodes: &[Option<PredicateId>],
    links: &[Link],
    slot: usize,
    method: PosteriorMethod,
) -> Result<Vec<f64>> {
    if slot >= nodes.len() {
        return Err(Error::Data(format!("slot {slot} out of range")));
    }
    if nodes[slot].is_some() {
        return Err(Error::Data(format!("slot {slot} is observed")));
    }
    crate::corpus::validate_links(nodes.len(), links, model.labels.len())?;
    match method {
        PosteriorMethod::Exact => exact_slot_posterior(model, nodes, links, slot),
        PosteriorMethod::Sampling(b) => Ok(sampled_slot_posterior(model, nodes, links, slot, b)),
        PosteriorMethod::Auto(b) => match check_enumerable(model, nodes.len()) {
            Ok(()) => exact_slot_posterior(model, nodes, links, slot),
            Err(_) => Ok(sampled_slot_posterior(model, nodes, links, slot, b)),
        },
    }
}

/// Probability that `target` would be generated at the unobserved `slot`.
pub fn posterior_over_slot(
    model: &Model,
    nodes: &[Option<PredicateId>],
    links: &[Link],
    slot: usize,
    target: PredicateId,
    method: PosteriorMethod,
) -> Result<f64> {
    Ok(slot_posterior(model, nodes, links, slot, method)?[target.index()])
}

/// Observed nodes move by MH with the exact choice normaliser; unobserved
/// nodes are drawn exactly from their background conditional. The
/// estimate averages `P(c | x_slot)` over the kept sweeps.
fn sampled_slot_posterior(
    model: &Model,
    nodes: &[Option<PredicateId>],
    links: &[Link],
    slot: usize,
    budget: SamplingBudget,
) -> Vec<f64> {
    let mut rng = stream_rng(budget.seed, Stream::Query, [0, 0, 0]);
    let (n, c) = (model.n_dims(), model.cardinality());
    let mut entities: Vec<_> = nodes.iter().map(|_| uniform_entity(n, c, &mut rng)).collect();
    let mut acc = vec![0.0; model.n_preds()];
    for sweep in 0..budget.burnin + budget.samples {
        for (k, obs) in nodes.iter().enumerate() {
            match obs {
                Some(_) => {
                    for _ in 0..budget.steps_per_node.max(1) {
                        mh_entity_step_partial(k, *obs, links, &mut entities, model, ZRatio::Exact, &mut rng);
                    }
                }
                None => resample_slot(k, &mut entities, links, model, &mut rng),
            }
        }
        if sweep >= budget.burnin {
            for (a, p) in acc.iter_mut().zip(model.predicate_choice(&entities[slot])) {
                *a += p;
            }
        }
    }
    let kept = budget.samples.max(1) as f64;
    acc.iter_mut().for_each(|a| *a /= kept);
    acc
}

//! Metropolis-Hastings kernels for the data-conditioned latent variables.
//!
//! Each observed node carries a latent entity, resampled by swap proposals
//! (switch one active unit off and one inactive unit on), and a latent
//! "negative" predicate, resampled by independence proposals from the
//! unigram distribution.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{GraphToken, Link, PredicateId};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::space::{EntityVector, SpaceConfig};

/// Latent variables of one token.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatentState {
    pub entities: Vec<EntityVector>,
    pub neg_predicates: Vec<PredicateId>,
}

/// Frequency-weighted mean of the predicate weight vectors, with the scale
/// used to approximate ratios of the predicate-choice normaliser.
#[derive(Clone, Debug, PartialEq)]
pub struct AveragePredicate {
    pub w_avg: Vec<f64>,
    pub k: f64,
}

pub fn average_predicate(model: &Model, k: f64) -> AveragePredicate {
    let n = model.n_dims();
    let mut w_avg = vec![0.0; n];
    for (c, f) in model.vocab.ids().zip(model.frequencies()) {
        for (a, w) in w_avg.iter_mut().zip(model.params.pred(c)) {
            *a += f * w;
        }
    }
    AveragePredicate { w_avg, k }
}

/// How the entity step accounts for the predicate-choice normaliser `Z_x`.
#[derive(Clone, Copy, Debug)]
pub enum ZRatio<'a> {
    /// `Z_x / Z_x' ≈ exp(k (W^avg_off - W^avg_on))`
    Approx(&'a AveragePredicate),
    /// Sum over the whole vocabulary. Exact, `O(|V| C)` per step.
    Exact,
}

/// A swap proposal: one active unit off, one inactive unit on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Swap {
    pub off: usize,
    pub on: usize,
}

/// Draw a swap uniformly from the `C (N - C)` possibilities.
pub fn propose_swap<R: Rng + ?Sized>(x: &EntityVector, config: &SpaceConfig, rng: &mut R) -> Swap {
    let c = x.cardinality();
    let off = x.active()[rng.random_range(0..c)] as usize;
    let on = x.nth_inactive(rng.random_range(0..config.n_dims - c));
    Swap { off, on }
}

/// Apply the swap and return the proposed vector.
pub fn apply_swap(x: &EntityVector, s: Swap) -> EntityVector {
    let mut y = x.clone();
    y.swap(s.off, s.on);
    y
}

/// Log acceptance ratio of moving the entity at `slot` (observed predicate
/// `c`) from `entities[slot]` to `proposal`.
pub fn entity_log_ratio(
    model: &Model,
    slot: usize,
    entities: &[EntityVector],
    links: &[Link],
    c: Option<PredicateId>,
    swap: Swap,
    proposal: &EntityVector,
    z_ratio: ZRatio<'_>,
) -> f64 {
    let current = &entities[slot];
    // -ΔE^b = theta_on - theta_off, neighbours fixed
    let mut log_r = model.slot_potential(slot, entities, links, swap.on)
        - model.slot_potential(slot, entities, links, swap.off);
    if let Some(c) = c {
        log_r += model.log_truth(proposal, c) - model.log_truth(current, c);
        log_r += match z_ratio {
            ZRatio::Approx(avg) => avg.k * (avg.w_avg[swap.off] - avg.w_avg[swap.on]),
            ZRatio::Exact => model.log_choice_normaliser(current) - model.log_choice_normaliser(proposal),
        };
    }
    log_r
}

#[inline]
fn accept<R: Rng + ?Sized>(log_r: f64, rng: &mut R) -> bool {
    if log_r.is_nan() {
        return false;
    }
    let log_r = log_r.min(0.0);
    if log_r == 0.0 {
        return true;
    }
    rng.random::<f64>().ln() < log_r
}

/// One MH step on the entity at `slot`. Returns whether the move was accepted.
pub fn mh_entity_step<R: Rng + ?Sized>(
    slot: usize,
    token: &GraphToken,
    state: &mut LatentState,
    model: &Model,
    z_ratio: ZRatio<'_>,
    rng: &mut R,
) -> bool {
    mh_entity_step_partial(
        slot,
        Some(token.nodes[slot]),
        &token.links,
        &mut state.entities,
        model,
        z_ratio,
        rng,
    )
}

/// Entity step where the slot's predicate may be unobserved (`None`), in
/// which case only the background energy matters.
pub fn mh_entity_step_partial<R: Rng + ?Sized>(
    slot: usize,
    c: Option<PredicateId>,
    links: &[Link],
    entities: &mut [EntityVector],
    model: &Model,
    z_ratio: ZRatio<'_>,
    rng: &mut R,
) -> bool {
    let swap = propose_swap(&entities[slot], &model.config, rng);
    let proposal = apply_swap(&entities[slot], swap);
    let log_r = entity_log_ratio(model, slot, entities, links, c, swap, &proposal, z_ratio);
    if accept(log_r, rng) {
        entities[slot] = proposal;
        true
    } else {
        false
    }
}

/// Sampler for predicates proportional to frequency.
#[derive(Clone, Debug)]
pub struct UnigramSampler {
    dist: WeightedIndex<f64>,
}

impl UnigramSampler {
    pub fn new(model: &Model) -> Self {
        UnigramSampler {
            dist: WeightedIndex::new(model.frequencies()).expect("frequencies are positive and finite"),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> PredicateId {
        PredicateId(self.dist.sample(rng) as u32)
    }
}

/// Log acceptance ratio for replacing latent predicate `c` by `c_new` at
/// entity `x` when `c_new` was proposed from the unigram distribution: the
/// frequency factors cancel, leaving the truth ratio.
pub fn predicate_log_ratio(model: &Model, x: &EntityVector, c: PredicateId, c_new: PredicateId) -> f64 {
    model.log_truth(x, c_new) - model.log_truth(x, c)
}

/// One MH step on the latent predicate at `slot`.
pub fn mh_predicate_step<R: Rng + ?Sized>(
    slot: usize,
    state: &mut LatentState,
    model: &Model,
    unigram: &UnigramSampler,
    rng: &mut R,
) -> bool {
    let proposal = unigram.sample(rng);
    let x = &state.entities[slot];
    let current = state.neg_predicates[slot];
    if proposal == current {
        return true;
    }
    if accept(predicate_log_ratio(model, x, current, proposal), rng) {
        state.neg_predicates[slot] = proposal;
        true
    } else {
        false
    }
}

/// Acceptance counts from a sweep.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SweepStats {
    pub entity_proposals: u64,
    pub entity_accepts: u64,
    pub pred_proposals: u64,
    pub pred_accepts: u64,
}

impl SweepStats {
    pub fn merge(&mut self, o: &SweepStats) {
        self.entity_proposals += o.entity_proposals;
        self.entity_accepts += o.entity_accepts;
        self.pred_proposals += o.pred_proposals;
        self.pred_accepts += o.pred_accepts;
    }

    pub fn entity_rate(&self) -> f64 {
        ratio(self.entity_accepts, self.entity_proposals)
    }

    pub fn pred_rate(&self) -> f64 {
        ratio(self.pred_accepts, self.pred_proposals)
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// For each node in order: `steps_per_variable` entity steps, then as many
/// predicate steps.
pub fn sweep_token<R: Rng + ?Sized>(
    token: &GraphToken,
    state: &mut LatentState,
    model: &Model,
    z_ratio: ZRatio<'_>,
    unigram: &UnigramSampler,
    steps_per_variable: usize,
    rng: &mut R,
) -> Result<SweepStats> {
    if steps_per_variable == 0 {
        return Err(Error::Config("steps_per_variable must be at least 1".into()));
    }
    if state.entities.len() != token.nodes.len() || state.neg_predicates.len() != token.nodes.len() {
        return Err(Error::Data("latent state does not match token".into()));
    }
    let mut stats = SweepStats::default();
    for slot in 0..token.nodes.len() {
        for _ in 0..steps_per_variable {
            stats.entity_proposals += 1;
            stats.entity_accepts += mh_entity_step(slot, token, state, model, z_ratio, rng) as u64;
        }
        for _ in 0..steps_per_variable {
            stats.pred_proposals += 1;
            stats.pred_accepts += mh_predicate_step(slot, state, model, unigram, rng) as u64;
        }
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{LabelTable, Vocabulary};
    use crate::rng::seeded;

    fn model(n: usize, c: usize, v: usize) -> Model {
        let vocab = Vocabulary::from_counts((0..v).map(|i| (format!("p{i}"), 1 + i as u64))).unwrap();
        Model::zeros(SpaceConfig::new(n, c).unwrap(), LabelTable::default(), vocab).unwrap()
    }

    #[test]
    fn average_of_two_predicates() {
        let vocab = Vocabulary::from_counts(vec![("a".into(), 1), ("b".into(), 1)]).unwrap();
        let mut m = Model::zeros(SpaceConfig::new(4, 2).unwrap(), LabelTable::default(), vocab).unwrap();
        m.params.pred_mut(PredicateId(0))[0] = 1.0;
        m.params.pred_mut(PredicateId(1))[1] = 1.0;
        let avg = average_predicate(&m, 1.0);
        assert_eq!(avg.w_avg, vec![0.5, 0.5, 0.0, 0.0]);
    }

    #[test]
    fn swap_from_single_active_unit() {
        let cfg = SpaceConfig::new(3, 1).unwrap();
        let x = EntityVector::from_active(vec![0], &cfg).unwrap();
        let mut rng = seeded(1);
        let mut hits = [0usize; 3];
        for _ in 0..20_000 {
            let s = propose_swap(&x, &cfg, &mut rng);
            assert_eq!(s.off, 0);
            hits[s.on] += 1;
        }
        assert_eq!(hits[0], 0);
        assert!((hits[1] as f64 / 20_000.0 - 0.5).abs() < 0.015);
    }

    #[test]
    fn uniform_model_always_accepts() {
        let m = model(6, 2, 3);
        let avg = average_predicate(&m, 1.0);
        let tok = GraphToken {
            nodes: vec![PredicateId(0)],
            links: vec![],
        };
        let mut st = LatentState {
            entities: vec![EntityVector::from_active(vec![0, 1], &m.config).unwrap()],
            neg_predicates: vec![PredicateId(0)],
        };
        let mut rng = seeded(9);
        for _ in 0..200 {
            assert!(mh_entity_step(0, &tok, &mut st, &m, ZRatio::Approx(&avg), &mut rng));
            assert!(mh_entity_step(0, &tok, &mut st, &m, ZRatio::Exact, &mut rng));
            assert_eq!(st.entities[0].cardinality(), 2);
        }
    }

    #[test]
    fn higher_truth_proposal_always_accepted() {
        let mut m = model(4, 2, 2);
        m.params.pred_bias[1] = -5.0;
        let x = EntityVector::from_active(vec![0, 1], &m.config).unwrap();
        assert!(predicate_log_ratio(&m, &x, PredicateId(0), PredicateId(1)) > 0.0);
        let mut rng = seeded(0);
        assert!((0..100).all(|_| accept(0.3, &mut rng)));
        assert!(!accept(f64::NAN, &mut rng));
    }

    #[test]
    fn zero_steps_rejected() {
        let m = model(4, 2, 2);
        let tok = GraphToken {
            nodes: vec![PredicateId(0)],
            links: vec![],
        };
        let mut st = LatentState {
            entities: vec![EntityVector::from_active(vec![0, 1], &m.config).unwrap()],
            neg_predicates: vec![PredicateId(0)],
        };
        let u = UnigramSampler::new(&m);
        let r = sweep_token(&tok, &mut st, &m, ZRatio::Exact, &u, 0, &mut seeded(0));
        assert!(r.is_err());
    }
}

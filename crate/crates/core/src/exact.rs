//! Exact quantities by enumeration over every joint entity assignment.
//!
//! Only feasible for tiny spaces; the total number of configurations
//! `(N choose C)^K` is capped at [`ENUMERATION_LIMIT`]. These routines are
//! the reference against which the sampling machinery is checked, and they
//! also answer posterior queries on small models.

use std::collections::hash_map::Entry;
use std::collections::HashMap;

use crate::corpus::{GraphShape, GraphToken, Link, PredicateId};
use crate::error::{Error, Result};
use crate::model::{log_sum_exp, Model, Params};
use crate::space::{enumerate_entities, EntityVector};

pub const ENUMERATION_LIMIT: f64 = 1e7;

pub fn check_enumerable(model: &Model, n_nodes: usize) -> Result<()> {
    let configs = model.config.n_entities().powi(n_nodes as i32);
    if configs > ENUMERATION_LIMIT {
        return Err(Error::EnumerationTooLarge {
            configs,
            limit: ENUMERATION_LIMIT,
        });
    }
    Ok(())
}

/// Visit every joint assignment (indices into `n_entities`) of `k` slots.
fn for_each_assignment(n_entities: usize, k: usize, mut f: impl FnMut(&[usize])) {
    let mut idx = vec![0usize; k];
    loop {
        f(&idx);
        let mut pos = k;
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < n_entities {
                break;
            }
            idx[pos] = 0;
        }
    }
}

/// The joint background distribution of one graph shape, fully tabulated.
pub struct JointTable {
    pub entities: Vec<EntityVector>,
    pub n_nodes: usize,
    /// Log unnormalised weight `-E^b(s)` per assignment, odometer order
    /// (last slot varies fastest).
    pub log_weights: Vec<f64>,
    pub log_z: f64,
}

impl JointTable {
    pub fn build(model: &Model, shape: &GraphShape) -> Result<Self> {
        check_enumerable(model, shape.n_nodes)?;
        model.check_links(&shape.links)?;
        let entities = enumerate_entities(&model.config);
        let mut log_weights = Vec::new();
        let mut buf = Vec::with_capacity(shape.n_nodes);
        for_each_assignment(entities.len(), shape.n_nodes, |a| {
            buf.clear();
            buf.extend(a.iter().map(|&i| entities[i].clone()));
            log_weights.push(-model.background_energy_unchecked(&buf, &shape.links));
        });
        let log_z = log_sum_exp(log_weights.iter().copied());
        Ok(JointTable {
            entities,
            n_nodes: shape.n_nodes,
            log_weights,
            log_z,
        })
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.log_weights
            .iter()
            .map(|w| (w - self.log_z).exp())
            .collect()
    }

    /// Decode a flat index into per-slot entity indices.
    pub fn assignment(&self, mut flat: usize) -> Vec<usize> {
        let m = self.entities.len();
        let mut out = vec![0; self.n_nodes];
        for slot in (0..self.n_nodes).rev() {
            out[slot] = flat % m;
            flat /= m;
        }
        out
    }

    pub fn flat_index(&self, assignment: &[usize]) -> usize {
        assignment
            .iter()
            .fold(0, |acc, &i| acc * self.entities.len() + i)
    }

    pub fn index_of(&self, x: &EntityVector) -> usize {
        self.entities
            .binary_search(x)
            .expect("entity must have model cardinality")
    }
}

/// Background partition function `Z` for one graph shape.
pub fn exact_log_partition(model: &Model, shape: &GraphShape) -> Result<f64> {
    Ok(JointTable::build(model, shape)?.log_z)
}

pub fn exact_partition(model: &Model, shape: &GraphShape) -> Result<f64> {
    exact_log_partition(model, shape).map(f64::exp)
}

/// Table of `log P(c | x)` for every enumerated entity and predicate.
fn log_choice_table(model: &Model, entities: &[EntityVector]) -> Vec<Vec<f64>> {
    entities
        .iter()
        .map(|x| {
            model
                .predicate_choice(x)
                .into_iter()
                .map(f64::ln)
                .collect()
        })
        .collect()
}

/// `log P(observed predicates)` for a token: background over situations of
/// its shape, times the choice probability of each observed predicate.
pub fn exact_token_log_likelihood(model: &Model, token: &GraphToken) -> Result<f64> {
    let table = JointTable::build(model, &token.shape())?;
    let choice = log_choice_table(model, &table.entities);
    Ok(token_log_likelihood_with(&table, &choice, token))
}

/// Summed `log P(token)` over `tokens`, building each shape's joint table
/// only once.
pub fn exact_corpus_log_likelihood<'a>(model: &Model, tokens: impl IntoIterator<Item = &'a GraphToken>) -> Result<f64> {
    let mut tables: HashMap<GraphShape, JointTable> = HashMap::new();
    let mut choice = None;
    let mut total = 0.0;
    for t in tokens {
        let shape = t.shape();
        let table = match tables.entry(shape) {
            Entry::Occupied(e) => e.into_mut(),
            Entry::Vacant(e) => {
                let table = JointTable::build(model, e.key())?;
                e.insert(table)
            }
        };
        let choice = choice.get_or_insert_with(|| log_choice_table(model, &table.entities));
        total += token_log_likelihood_with(table, choice, t);
    }
    Ok(total)
}

fn token_log_likelihood_with(table: &JointTable, choice: &[Vec<f64>], token: &GraphToken) -> f64 {
    let mut terms = Vec::with_capacity(table.log_weights.len());
    let m = table.entities.len();
    let mut flat = 0;
    for_each_assignment(m, token.nodes.len(), |a| {
        let mut w = table.log_weights[flat];
        for (slot, &e) in a.iter().enumerate() {
            w += choice[e][token.nodes[slot].index()];
        }
        terms.push(w);
        flat += 1;
    });
    log_sum_exp(terms) - table.log_z
}

pub fn exact_token_likelihood(model: &Model, token: &GraphToken) -> Result<f64> {
    exact_token_log_likelihood(model, token).map(f64::exp)
}

/// Posterior predictive over the vocabulary at `slot`, given the predicates
/// observed at the other slots (`None` = unobserved).
pub fn exact_slot_posterior(
    model: &Model,
    nodes: &[Option<PredicateId>],
    links: &[Link],
    slot: usize,
) -> Result<Vec<f64>> {
    let shape = GraphShape {
        n_nodes: nodes.len(),
        links: links.to_vec(),
    };
    let table = JointTable::build(model, &shape)?;
    let choice = log_choice_table(model, &table.entities);
    // posterior mass of each entity at `slot`
    let m = table.entities.len();
    let mut slot_log_mass = vec![Vec::new(); m];
    let mut flat = 0;
    for_each_assignment(m, nodes.len(), |a| {
        let mut w = table.log_weights[flat];
        for (k, &e) in a.iter().enumerate() {
            if k != slot {
                if let Some(c) = nodes[k] {
                    w += choice[e][c.index()];
                }
            }
        }
        slot_log_mass[a[slot]].push(w);
        flat += 1;
    });
    let slot_log_mass: Vec<f64> = slot_log_mass.into_iter().map(log_sum_exp).collect();
    let lz = log_sum_exp(slot_log_mass.iter().copied());
    let mut out = vec![0.0; model.n_preds()];
    for (e, lw) in slot_log_mass.iter().enumerate() {
        let w = (lw - lz).exp();
        for (o, lc) in out.iter_mut().zip(&choice[e]) {
            *o += w * lc.exp();
        }
    }
    Ok(out)
}

/// Posterior over entities for a single node carrying predicate `c`:
/// `P(x | c) ∝ exp(-E^b(x)) P(c | x)`.
pub fn exact_entity_posterior(model: &Model, c: PredicateId) -> Result<(Vec<EntityVector>, Vec<f64>)> {
    let table = JointTable::build(model, &GraphShape::single())?;
    let logs: Vec<f64> = table
        .entities
        .iter()
        .zip(&table.log_weights)
        .map(|(x, w)| w + model.log_predicate_choice(x, c))
        .collect();
    let lz = log_sum_exp(logs.iter().copied());
    let probs = logs.iter().map(|l| (l - lz).exp()).collect();
    Ok((table.entities, probs))
}

/// Gradient of `log P(token)` in its expectation form: the data-conditioned
/// background term, minus the model background term, plus the observed
/// semantic-function term, minus its expectation under `P(c' | x)`. Every
/// expectation is an exact sum over the enumerated joint assignments.
pub fn exact_gradient(model: &Model, token: &GraphToken) -> Result<Params> {
    let shape = token.shape();
    let table = JointTable::build(model, &shape)?;
    let entities = &table.entities;
    let choice = log_choice_table(model, entities);
    let m = entities.len();
    let k = token.nodes.len();

    // posterior log weights over assignments
    let mut post = Vec::with_capacity(table.log_weights.len());
    let mut flat = 0;
    for_each_assignment(m, k, |a| {
        let mut w = table.log_weights[flat];
        for (slot, &e) in a.iter().enumerate() {
            w += choice[e][token.nodes[slot].index()];
        }
        post.push(w);
        flat += 1;
    });
    let post_lz = log_sum_exp(post.iter().copied());

    let mut grad = Params::zeros_like(&model.params);
    // E_{x|c}[(1 - t_c) dE^p] - E_{x|c} E_{c'|x}[(1 - t_c') dE^p], per slot,
    // accumulated through the per-entity posterior marginals.
    let mut slot_marginals = vec![vec![0.0; m]; k];
    let mut flat = 0;
    let mut buf: Vec<EntityVector> = Vec::with_capacity(k);
    for_each_assignment(m, k, |a| {
        let p_post = (post[flat] - post_lz).exp();
        let p_prior = (table.log_weights[flat] - table.log_z).exp();
        buf.clear();
        buf.extend(a.iter().map(|&i| entities[i].clone()));
        grad.add_background_grad(&buf, &shape.links, p_post - p_prior);
        for (slot, &e) in a.iter().enumerate() {
            slot_marginals[slot][e] += p_post;
        }
        flat += 1;
    });
    for (slot, marg) in slot_marginals.iter().enumerate() {
        let c = token.nodes[slot];
        for (e, &p) in marg.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let x = &entities[e];
            grad.add_semantic_grad(x, c, p * (1.0 - model.truth_probability(x, c)));
            for cp in model.vocab.ids() {
                let pc = choice[e][cp.index()].exp();
                grad.add_semantic_grad(x, cp, -p * pc * (1.0 - model.truth_probability(x, cp)));
            }
        }
    }
    Ok(grad)
}

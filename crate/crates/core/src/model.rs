//! Model parameters and the closed-form quantities built on them: background
//! energy of a situation, semantic functions (truth probabilities) and the
//! predicate-choice distribution.

use crate::corpus::{LabelTable, Link, LinkLabel, PredicateId, Vocabulary};
use crate::error::{Error, Result};
use crate::space::{EntityVector, SpaceConfig};

/// Dense parameter arrays. Also used, with the same layout, for gradient
/// accumulators and optimiser state.
#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    pub n_dims: usize,
    pub n_labels: usize,
    pub n_preds: usize,
    /// Per label an `N x N` row-major matrix; `[l][i][j]` couples dimension
    /// `i` of the link source with dimension `j` of the target.
    pub link_weights: Vec<f64>,
    pub dim_bias: Vec<f64>,
    /// Per predicate a length-`N` row.
    pub pred_weights: Vec<f64>,
    pub pred_bias: Vec<f64>,
}

impl Params {
    pub fn zeros(n_dims: usize, n_labels: usize, n_preds: usize) -> Self {
        Params {
            n_dims,
            n_labels,
            n_preds,
            link_weights: vec![0.0; n_labels * n_dims * n_dims],
            dim_bias: vec![0.0; n_dims],
            pred_weights: vec![0.0; n_preds * n_dims],
            pred_bias: vec![0.0; n_preds],
        }
    }

    pub fn zeros_like(other: &Params) -> Self {
        Self::zeros(other.n_dims, other.n_labels, other.n_preds)
    }

    pub fn len(&self) -> usize {
        self.link_weights.len() + self.dim_bias.len() + self.pred_weights.len() + self.pred_bias.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn link(&self, label: LinkLabel) -> &[f64] {
        let nn = self.n_dims * self.n_dims;
        &self.link_weights[label.index() * nn..(label.index() + 1) * nn]
    }

    #[inline]
    pub fn link_mut(&mut self, label: LinkLabel) -> &mut [f64] {
        let nn = self.n_dims * self.n_dims;
        &mut self.link_weights[label.index() * nn..(label.index() + 1) * nn]
    }

    #[inline]
    pub fn pred(&self, c: PredicateId) -> &[f64] {
        &self.pred_weights[c.index() * self.n_dims..(c.index() + 1) * self.n_dims]
    }

    #[inline]
    pub fn pred_mut(&mut self, c: PredicateId) -> &mut [f64] {
        let n = self.n_dims;
        &mut self.pred_weights[c.index() * n..(c.index() + 1) * n]
    }

    /// The four arrays in serialisation order.
    pub fn arrays(&self) -> [&[f64]; 4] {
        [
            &self.dim_bias,
            &self.link_weights,
            &self.pred_weights,
            &self.pred_bias,
        ]
    }

    pub fn arrays_mut(&mut self) -> [&mut Vec<f64>; 4] {
        [
            &mut self.dim_bias,
            &mut self.link_weights,
            &mut self.pred_weights,
            &mut self.pred_bias,
        ]
    }

    /// All values, flattened in serialisation order.
    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.arrays().into_iter().flat_map(|a| a.iter().copied())
    }

    pub fn get_flat(&self, mut i: usize) -> f64 {
        for a in self.arrays() {
            if i < a.len() {
                return a[i];
            }
            i -= a.len();
        }
        panic!("flat parameter index out of range")
    }

    pub fn set_flat(&mut self, mut i: usize, v: f64) {
        for a in self.arrays_mut() {
            if i < a.len() {
                a[i] = v;
                return;
            }
            i -= a.len();
        }
        panic!("flat parameter index out of range")
    }

    pub fn fill(&mut self, v: f64) {
        for a in self.arrays_mut() {
            a.iter_mut().for_each(|x| *x = v);
        }
    }

    /// `self += scale * other`
    pub fn add_scaled(&mut self, other: &Params, scale: f64) {
        for (a, b) in self.arrays_mut().into_iter().zip(other.arrays()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += scale * y;
            }
        }
    }

    pub fn same_shape(&self, other: &Params) -> bool {
        self.n_dims == other.n_dims && self.n_labels == other.n_labels && self.n_preds == other.n_preds
    }

    /// Add `scale * d(-E^b)/d(theta)` for a situation: `x_i y_j` into each
    /// link's matrix and `-x_i` into the dimension bias for each entity.
    pub fn add_background_grad(&mut self, entities: &[EntityVector], links: &[Link], scale: f64) {
        let n = self.n_dims;
        for l in links {
            let w = self.link_mut(l.label);
            for &i in entities[l.src].active() {
                let row = &mut w[i as usize * n..(i as usize + 1) * n];
                for &j in entities[l.tgt].active() {
                    row[j as usize] += scale;
                }
            }
        }
        for x in entities {
            for &i in x.active() {
                self.dim_bias[i as usize] -= scale;
            }
        }
    }

    /// Add `scale * d(-E^p(x, c))/d(theta)`: `x_i` into `W'(c)`, `-1` into `b'(c)`.
    pub fn add_semantic_grad(&mut self, x: &EntityVector, c: PredicateId, scale: f64) {
        let row = self.pred_mut(c);
        for &i in x.active() {
            row[i as usize] += scale;
        }
        self.pred_bias[c.index()] -= scale;
    }

    fn check_lengths(&self) -> Result<()> {
        let n = self.n_dims;
        if self.link_weights.len() != self.n_labels * n * n
            || self.dim_bias.len() != n
            || self.pred_weights.len() != self.n_preds * n
            || self.pred_bias.len() != self.n_preds
        {
            return Err(Error::Format("parameter array lengths do not match shape".into()));
        }
        Ok(())
    }
}

/// A situation: one entity per node plus the links between them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Situation {
    pub entities: Vec<EntityVector>,
    pub links: Vec<Link>,
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log sigmoid(z)` without overflow.
#[inline]
pub fn log_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

pub fn log_sum_exp(values: impl IntoIterator<Item = f64>) -> f64 {
    let values: Vec<f64> = values.into_iter().collect();
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub config: SpaceConfig,
    pub labels: LabelTable,
    pub vocab: Vocabulary,
    pub params: Params,
    freqs: Vec<f64>,
}

impl Model {
    pub fn new(
        config: SpaceConfig,
        labels: LabelTable,
        vocab: Vocabulary,
        params: Params,
    ) -> Result<Self> {
        config.validate()?;
        if vocab.is_empty() {
            return Err(Error::Data("empty vocabulary".into()));
        }
        if params.n_dims != config.n_dims
            || params.n_labels != labels.len()
            || params.n_preds != vocab.len()
        {
            return Err(Error::Format(format!(
                "parameter shape ({} dims, {} labels, {} predicates) does not match model",
                params.n_dims, params.n_labels, params.n_preds
            )));
        }
        params.check_lengths()?;
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("model parameters".into()));
        }
        if params.link_weights.iter().any(|&w| w < 0.0) {
            return Err(Error::Data("link weights must be non-negative".into()));
        }
        let freqs = vocab.frequencies();
        Ok(Model {
            config,
            labels,
            vocab,
            params,
            freqs,
        })
    }

    /// All-zero parameters.
    pub fn zeros(config: SpaceConfig, labels: LabelTable, vocab: Vocabulary) -> Result<Self> {
        let params = Params::zeros(config.n_dims, labels.len(), vocab.len());
        Model::new(config, labels, vocab, params)
    }

    pub fn n_dims(&self) -> usize {
        self.config.n_dims
    }

    pub fn cardinality(&self) -> usize {
        self.config.cardinality
    }

    pub fn n_preds(&self) -> usize {
        self.vocab.len()
    }

    /// Relative predicate frequencies `f_c`.
    pub fn frequencies(&self) -> &[f64] {
        &self.freqs
    }

    pub fn check_links(&self, links: &[Link]) -> Result<()> {
        for l in links {
            if l.label.index() >= self.labels.len() {
                return Err(Error::UnknownLabel(format!("#{}", l.label.0)));
            }
        }
        Ok(())
    }

    /// `sum_{i in x, j in y} W^(l)_ij`
    #[inline]
    pub fn link_term(&self, label: LinkLabel, x: &EntityVector, y: &EntityVector) -> f64 {
        let n = self.config.n_dims;
        let w = self.params.link(label);
        let mut s = 0.0;
        for &i in x.active() {
            let row = &w[i as usize * n..(i as usize + 1) * n];
            s += y.dot(row);
        }
        s
    }

    /// Background energy `E^b(s)`: minus the link terms, plus the bias terms.
    pub fn background_energy(&self, s: &Situation) -> Result<f64> {
        self.check_links(&s.links)?;
        Ok(self.background_energy_unchecked(&s.entities, &s.links))
    }

    pub(crate) fn background_energy_unchecked(&self, entities: &[EntityVector], links: &[Link]) -> f64 {
        let mut neg = 0.0;
        for l in links {
            neg += self.link_term(l.label, &entities[l.src], &entities[l.tgt]);
        }
        for x in entities {
            neg -= x.dot(&self.params.dim_bias);
        }
        -neg
    }

    /// Log-linear preference `theta_d` for dimension `d` of the entity at
    /// `slot`, all other entities held fixed.
    #[inline]
    pub fn slot_potential(&self, slot: usize, entities: &[EntityVector], links: &[Link], dim: usize) -> f64 {
        let n = self.config.n_dims;
        let mut theta = -self.params.dim_bias[dim];
        for l in links {
            let w = self.params.link(l.label);
            if l.src == slot {
                theta += entities[l.tgt].dot(&w[dim * n..(dim + 1) * n]);
            }
            if l.tgt == slot {
                theta += entities[l.src].active().iter().map(|&i| w[i as usize * n + dim]).sum::<f64>();
            }
        }
        theta
    }

    /// Full potential vector for `slot`.
    pub fn slot_potentials(&self, slot: usize, entities: &[EntityVector], links: &[Link]) -> Vec<f64> {
        let n = self.config.n_dims;
        let mut theta: Vec<f64> = self.params.dim_bias.iter().map(|b| -b).collect();
        for l in links {
            let w = self.params.link(l.label);
            if l.src == slot {
                for &j in entities[l.tgt].active() {
                    for (i, t) in theta.iter_mut().enumerate() {
                        *t += w[i * n + j as usize];
                    }
                }
            }
            if l.tgt == slot {
                for &i in entities[l.src].active() {
                    let row = &w[i as usize * n..(i as usize + 1) * n];
                    for (t, r) in theta.iter_mut().zip(row) {
                        *t += r;
                    }
                }
            }
        }
        theta
    }

    /// The part of `E^b` that involves the entity at `slot`: every incident
    /// link term plus the entity's own bias term.
    pub fn entity_conditional_energy(&self, slot: usize, s: &Situation) -> f64 {
        let mut neg = -s.entities[slot].dot(&self.params.dim_bias);
        for l in &s.links {
            if l.src == slot || l.tgt == slot {
                neg += self.link_term(l.label, &s.entities[l.src], &s.entities[l.tgt]);
            }
        }
        -neg
    }

    /// `-E^p(x, c) = W'(c) . x - b'(c)`
    #[inline]
    pub fn pred_activation(&self, x: &EntityVector, c: PredicateId) -> f64 {
        x.dot(self.params.pred(c)) - self.params.pred_bias[c.index()]
    }

    /// Semantic function `t_c(x)`.
    #[inline]
    pub fn truth_probability(&self, x: &EntityVector, c: PredicateId) -> f64 {
        sigmoid(self.pred_activation(x, c))
    }

    #[inline]
    pub fn log_truth(&self, x: &EntityVector, c: PredicateId) -> f64 {
        log_sigmoid(self.pred_activation(x, c))
    }

    /// `log Z_x = log sum_c f_c t_c(x)`
    pub fn log_choice_normaliser(&self, x: &EntityVector) -> f64 {
        log_sum_exp(
            self.vocab
                .ids()
                .map(|c| self.freqs[c.index()].ln() + self.log_truth(x, c)),
        )
    }

    /// `P(c | x)` for every predicate.
    pub fn predicate_choice(&self, x: &EntityVector) -> Vec<f64> {
        let logits: Vec<f64> = self
            .vocab
            .ids()
            .map(|c| self.freqs[c.index()].ln() + self.log_truth(x, c))
            .collect();
        let lz = log_sum_exp(logits.iter().copied());
        logits.into_iter().map(|l| (l - lz).exp()).collect()
    }

    pub fn log_predicate_choice(&self, x: &EntityVector, c: PredicateId) -> f64 {
        self.freqs[c.index()].ln() + self.log_truth(x, c) - self.log_choice_normaliser(x)
    }

    /// Clamp every link weight to be non-negative.
    pub fn project_link_weights(&mut self) {
        for w in &mut self.params.link_weights {
            if *w < 0.0 {
                *w = 0.0;
            }
        }
    }

    /// Replace parameters (shape must match).
    pub fn set_params(&mut self, params: Params) -> Result<()> {
        if !params.same_shape(&self.params) {
            return Err(Error::Format("parameter shape mismatch".into()));
        }
        params.check_lengths()?;
        self.params = params;
        Ok(())
    }
}

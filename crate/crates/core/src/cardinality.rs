//! Exact inference for one entity under the fixed-cardinality constraint.
//!
//! For potentials `theta` the distribution is `P(x) ∝ exp(theta . x)` over
//! vectors with exactly `C` active dimensions. The chain-structured message
//! passing of the Cardinality RBM reduces to a dynamic program over
//! (dimension prefix, number of active units), which gives the partition
//! function, exact samples and exact marginals in `O(N C)`.

use rand::Rng;

use crate::corpus::Link;
use crate::model::{log_add_exp, Model, Situation};
use crate::space::EntityVector;

/// Per-dimension log-linear preferences for a single entity.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitPotentials {
    pub theta: Vec<f64>,
}

impl UnitPotentials {
    pub fn new(theta: Vec<f64>) -> Self {
        debug_assert!(theta.iter().all(|t| t.is_finite()));
        UnitPotentials { theta }
    }

    pub fn zeros(n: usize) -> Self {
        UnitPotentials { theta: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }
}

/// Potentials of the entity at `slot` with its neighbours fixed:
/// outgoing links contribute `W_ij y_j`, incoming links `W_ji y_j`, minus
/// the dimension bias.
pub fn potentials_for_slot(slot: usize, situation: &Situation, model: &Model) -> UnitPotentials {
    UnitPotentials::new(model.slot_potentials(slot, &situation.entities, &situation.links))
}

/// Suffix table: `log_z[i][k]` is the log-sum over dimensions `i..N` choosing
/// exactly `k` active.
struct SuffixTable {
    c: usize,
    log_z: Vec<f64>,
}

impl SuffixTable {
    fn build(theta: &[f64], c: usize) -> Self {
        let n = theta.len();
        let w = c + 1;
        let mut log_z = vec![f64::NEG_INFINITY; (n + 1) * w];
        log_z[n * w] = 0.0;
        for i in (0..n).rev() {
            // at most n - i units can be active in the suffix
            let kmax = c.min(n - i);
            for k in 0..=kmax {
                let skip = log_z[(i + 1) * w + k];
                let take = if k > 0 {
                    theta[i] + log_z[(i + 1) * w + k - 1]
                } else {
                    f64::NEG_INFINITY
                };
                log_z[i * w + k] = log_add_exp(skip, take);
            }
        }
        SuffixTable { c, log_z }
    }

    #[inline]
    fn at(&self, i: usize, k: usize) -> f64 {
        self.log_z[i * (self.c + 1) + k]
    }
}

/// `log sum_{|x| = C} exp(theta . x)`
pub fn log_partition_cardinality(theta: &UnitPotentials, c: usize) -> f64 {
    assert!(c > 0 && c < theta.len(), "cardinality must satisfy 0 < C < N");
    SuffixTable::build(&theta.theta, c).at(0, c)
}

/// Exact draw from `P(x) ∝ exp(theta . x)`, `|x| = C`.
pub fn sample_cardinality<R: Rng + ?Sized>(theta: &UnitPotentials, c: usize, rng: &mut R) -> EntityVector {
    let n = theta.len();
    assert!(c > 0 && c < n, "cardinality must satisfy 0 < C < N");
    let table = SuffixTable::build(&theta.theta, c);
    let mut active = Vec::with_capacity(c);
    let mut k = c;
    for i in 0..n {
        if k == 0 {
            break;
        }
        if n - i == k {
            // every remaining dimension is forced on
            active.extend((i..n).map(|d| d as u32));
            break;
        }
        let p_on = (theta.theta[i] + table.at(i + 1, k - 1) - table.at(i, k)).exp();
        if rng.random::<f64>() < p_on {
            active.push(i as u32);
            k -= 1;
        }
    }
    EntityVector::from_sorted_unchecked(active)
}

/// Exact per-dimension activation marginals of `P(x) ∝ exp(theta . x)`.
pub fn marginals(theta: &UnitPotentials, c: usize) -> Vec<f64> {
    let n = theta.len();
    assert!(c > 0 && c < n, "cardinality must satisfy 0 < C < N");
    let suffix = SuffixTable::build(&theta.theta, c);
    let w = c + 1;
    // prefix[i][k]: log-sum over dimensions 0..i choosing k
    let mut prefix = vec![f64::NEG_INFINITY; (n + 1) * w];
    prefix[0] = 0.0;
    for i in 0..n {
        for k in 0..=c.min(i + 1) {
            let skip = prefix[i * w + k];
            let take = if k > 0 {
                theta.theta[i] + prefix[i * w + k - 1]
            } else {
                f64::NEG_INFINITY
            };
            prefix[(i + 1) * w + k] = log_add_exp(skip, take);
        }
    }
    let log_z = suffix.at(0, c);
    (0..n)
        .map(|i| {
            let mut acc = f64::NEG_INFINITY;
            for k in 0..c {
                acc = log_add_exp(acc, prefix[i * w + k] + suffix.at(i + 1, c - 1 - k));
            }
            (theta.theta[i] + acc - log_z).exp()
        })
        .collect()
}

/// Mean-field entity of a predicate: exact marginals of
/// `P(x) ∝ exp(W'(c) . x)` under the cardinality constraint.
pub fn mean_field_vector(pred_weights: &[f64], c: usize) -> Vec<f64> {
    marginals(&UnitPotentials::new(pred_weights.to_vec()), c)
}

/// Draw the entity at `slot` exactly from its conditional given the others.
pub fn resample_slot<R: Rng + ?Sized>(
    slot: usize,
    entities: &mut [EntityVector],
    links: &[Link],
    model: &Model,
    rng: &mut R,
) {
    let theta = UnitPotentials::new(model.slot_potentials(slot, entities, links));
    entities[slot] = sample_cardinality(&theta, model.cardinality(), rng);
}

/// `sweeps` passes of exact conditional resampling, visiting slots in index
/// order. This is the transition kernel of the fantasy particles.
pub fn resample_situation<R: Rng + ?Sized>(
    situation: &Situation,
    model: &Model,
    sweeps: usize,
    rng: &mut R,
) -> Situation {
    let mut s = situation.clone();
    resample_situation_in_place(&mut s, model, sweeps, rng);
    s
}

pub fn resample_situation_in_place<R: Rng + ?Sized>(
    s: &mut Situation,
    model: &Model,
    sweeps: usize,
    rng: &mut R,
) {
    assert!(sweeps >= 1, "at least one sweep");
    for _ in 0..sweeps {
        for slot in 0..s.entities.len() {
            resample_slot(slot, &mut s.entities, &s.links, model, rng);
        }
    }
}

/// Uniform random entity.
pub fn uniform_entity<R: Rng + ?Sized>(n: usize, c: usize, rng: &mut R) -> EntityVector {
    let mut idx = rand::seq::index::sample(rng, n, c).into_vec();
    idx.sort_unstable();
    EntityVector::from_sorted_unchecked(idx.into_iter().map(|i| i as u32).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn ln_binom(n: usize, k: usize) -> f64 {
        crate::space::binomial(n, k).ln()
    }

    #[test]
    fn zero_theta_gives_binomial() {
        for (n, c) in [(4, 2), (10, 3), (40, 5), (400, 40)] {
            let lz = log_partition_cardinality(&UnitPotentials::zeros(n), c);
            assert!((lz - ln_binom(n, c)).abs() < 1e-9 * lz.abs().max(1.0), "{n} {c}");
        }
    }

    #[test]
    fn single_bumped_dimension() {
        let theta = UnitPotentials::new(vec![1.0, 0.0, 0.0, 0.0]);
        let lz = log_partition_cardinality(&theta, 2);
        let expect = (3.0 * 1f64.exp() + 3.0).ln();
        assert!((lz - expect).abs() < 1e-14);
        // marginals: dim 0 in 3 of 6 subsets with weight e
        let q = marginals(&theta, 2);
        let e = 1f64.exp();
        let q0 = 3.0 * e / (3.0 * e + 3.0);
        let qi = (e + 2.0) / (3.0 * e + 3.0);
        assert!((q[0] - q0).abs() < 1e-14);
        for &v in &q[1..] {
            assert!((v - qi).abs() < 1e-14);
        }
    }

    #[test]
    fn mean_field_of_zero_weights_is_uniform() {
        let q = mean_field_vector(&[0.0; 8], 3);
        for v in q {
            assert!((v - 3.0 / 8.0).abs() < 1e-14);
        }
    }

    #[test]
    fn saturated_dimension_always_sampled() {
        let mut theta = vec![0.0; 10];
        theta[4] = 50.0;
        let theta = UnitPotentials::new(theta);
        let mut rng = seeded(3);
        let hits = (0..10_000)
            .filter(|_| sample_cardinality(&theta, 3, &mut rng).contains(4))
            .count();
        assert!(hits as f64 / 10_000.0 > 0.999);
    }

    #[test]
    fn uniform_theta_samples_each_subset_equally() {
        let theta = UnitPotentials::zeros(4);
        let mut rng = seeded(11);
        let mut counts = std::collections::HashMap::new();
        let draws = 60_000;
        for _ in 0..draws {
            *counts.entry(sample_cardinality(&theta, 2, &mut rng)).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 6);
        let p = 1.0 / 6.0;
        let sd = (draws as f64 * p * (1.0 - p)).sqrt();
        for &c in counts.values() {
            assert!((c as f64 - draws as f64 * p).abs() < 3.0 * sd, "{c}");
        }
    }

    #[test]
    fn samples_always_have_cardinality() {
        let mut rng = seeded(5);
        let theta = UnitPotentials::new((0..12).map(|i| (i as f64 * 0.7).sin() * 4.0).collect());
        for c in 1..12 {
            for _ in 0..50 {
                let x = sample_cardinality(&theta, c, &mut rng);
                assert_eq!(x.cardinality(), c);
            }
        }
    }
}

//! Parameter initialisation: random, or from pre-trained predicate vectors
//! with PPMI link weights.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::cardinality::mean_field_vector;
use crate::corpus::{GraphToken, LabelTable, Vocabulary};
use crate::error::{Error, Result};
use crate::model::{Model, Params};
use crate::space::SpaceConfig;

const LINK_INIT_STD: f64 = 0.1;
const PRED_INIT_STD: f64 = 1.0;

/// Bias that puts `t_c(x)` near 0.5 for a typical entity: `C * mean(W'(c))`.
fn centred_bias(weights: &[f64], c: usize) -> f64 {
    c as f64 * weights.iter().sum::<f64>() / weights.len() as f64
}

pub fn init_random<R: Rng + ?Sized>(
    config: SpaceConfig,
    labels: LabelTable,
    vocab: Vocabulary,
    rng: &mut R,
) -> Result<Model> {
    config.validate()?;
    let mut p = Params::zeros(config.n_dims, labels.len(), vocab.len());
    let link = Normal::new(0.0, LINK_INIT_STD).expect("valid std");
    let pred = Normal::new(0.0, PRED_INIT_STD).expect("valid std");
    for w in &mut p.link_weights {
        *w = link.sample(rng).abs();
    }
    for w in &mut p.pred_weights {
        *w = pred.sample(rng);
    }
    for c in 0..vocab.len() {
        let row = &p.pred_weights[c * config.n_dims..(c + 1) * config.n_dims];
        p.pred_bias[c] = centred_bias(row, config.cardinality);
    }
    Model::new(config, labels, vocab, p)
}

/// Predicate weights from `vectors` (one per vocabulary entry, id order);
/// link weights from the PPMI of mean-field entity dimensions across each
/// link label in `tokens`.
pub fn init_from_pretrained(
    vectors: &[Vec<f64>],
    tokens: &[GraphToken],
    config: SpaceConfig,
    labels: LabelTable,
    vocab: Vocabulary,
) -> Result<Model> {
    config.validate()?;
    let n = config.n_dims;
    if vectors.len() != vocab.len() {
        return Err(Error::Data(format!(
            "{} pre-trained vectors for {} predicates",
            vectors.len(),
            vocab.len()
        )));
    }
    let mut p = Params::zeros(n, labels.len(), vocab.len());
    for (c, v) in vectors.iter().enumerate() {
        if v.len() != n {
            return Err(Error::Data(format!(
                "pre-trained vector for `{}` has length {}, expected {n}",
                vocab.entries()[c].0,
                v.len()
            )));
        }
        if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::Data(format!(
                "pre-trained vector for `{}` has negative or non-finite entries",
                vocab.entries()[c].0
            )));
        }
        p.pred_weights[c * n..(c + 1) * n].copy_from_slice(v);
        p.pred_bias[c] = centred_bias(v, config.cardinality);
    }

    let mean_field: Vec<Vec<f64>> = vectors
        .iter()
        .map(|v| mean_field_vector(v, config.cardinality))
        .collect();
    let mut counts = vec![0.0; labels.len() * n * n];
    for t in tokens {
        for l in &t.links {
            let qs = &mean_field[t.nodes[l.src].index()];
            let qt = &mean_field[t.nodes[l.tgt].index()];
            let block = &mut counts[l.label.index() * n * n..(l.label.index() + 1) * n * n];
            for (i, a) in qs.iter().enumerate() {
                for (j, b) in qt.iter().enumerate() {
                    block[i * n + j] += a * b;
                }
            }
        }
    }
    for (label, block) in counts.chunks(n * n).enumerate() {
        let w = &mut p.link_weights[label * n * n..(label + 1) * n * n];
        w.copy_from_slice(&ppmi(block, n));
    }
    Model::new(config, labels, vocab, p)
}

/// Positive PMI of an `n x n` co-occurrence matrix; zero where undefined.
/// Both ends of a link live in the same entity space, so the dimension
/// marginal pools the row and column sums.
pub fn ppmi(counts: &[f64], n: usize) -> Vec<f64> {
    let total: f64 = counts.iter().sum();
    let mut out = vec![0.0; n * n];
    if total <= 0.0 {
        return out;
    }
    let marginal: Vec<f64> = (0..n)
        .map(|i| {
            let row: f64 = counts[i * n..(i + 1) * n].iter().sum();
            let col: f64 = (0..n).map(|k| counts[k * n + i]).sum();
            0.5 * (row + col) / total
        })
        .collect();
    for i in 0..n {
        for j in 0..n {
            let pij = counts[i * n + j] / total;
            if pij > 0.0 && marginal[i] > 0.0 && marginal[j] > 0.0 {
                out[i * n + j] = (pij / (marginal[i] * marginal[j])).ln().max(0.0);
            }
        }
    }
    out
}

/// Read `predicate<TAB>v1 v2 ... vN` lines and order them by vocabulary id.
/// Every vocabulary entry must be covered; extra predicates are ignored.
pub fn load_pretrained(path: &Path, vocab: &Vocabulary, n_dims: usize) -> Result<Vec<Vec<f64>>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out: Vec<Option<Vec<f64>>> = vec![None; vocab.len()];
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (name, rest) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(i + 1, "expected `predicate<TAB>values`"))?;
        let values = rest
            .split_whitespace()
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::parse(i + 1, e.to_string()))?;
        if values.len() != n_dims {
            return Err(Error::parse(
                i + 1,
                format!("expected {n_dims} values, found {}", values.len()),
            ));
        }
        if let Some(id) = vocab.id(name) {
            out[id.index()] = Some(values);
        }
    }
    out.into_iter()
        .enumerate()
        .map(|(c, v)| {
            v.ok_or_else(|| {
                Error::Data(format!("no pre-trained vector for `{}`", vocab.entries()[c].0))
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Link, LinkLabel, PredicateId};
    use crate::rng::seeded;

    fn vocab(v: usize) -> Vocabulary {
        Vocabulary::from_counts((0..v).map(|i| (format!("p{i}"), 1))).unwrap()
    }

    #[test]
    fn random_init_is_seeded_and_valid() {
        let cfg = SpaceConfig::new(10, 3).unwrap();
        let a = init_random(cfg, LabelTable::default(), vocab(5), &mut seeded(1)).unwrap();
        let b = init_random(cfg, LabelTable::default(), vocab(5), &mut seeded(1)).unwrap();
        let c = init_random(cfg, LabelTable::default(), vocab(5), &mut seeded(2)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.params, c.params);
        assert!(a.params.link_weights.iter().all(|&w| w >= 0.0));
        assert!(a.params.dim_bias.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn ppmi_of_independent_joint_is_zero() {
        let r = [0.1, 0.2, 0.3, 0.4];
        let counts: Vec<f64> = (0..16).map(|k| r[k / 4] * r[k % 4] * 50.0).collect();
        assert!(ppmi(&counts, 4).iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn single_link_gives_one_positive_block() {
        let cfg = SpaceConfig::new(4, 2).unwrap();
        let vectors = vec![vec![50.0, 50.0, 0.0, 0.0], vec![0.0, 0.0, 50.0, 50.0]];
        let token = GraphToken {
            nodes: vec![PredicateId(0), PredicateId(1)],
            links: vec![Link::new(0, LinkLabel::ARG1, 1)],
        };
        let m = init_from_pretrained(&vectors, &[token], cfg, LabelTable::default(), vocab(2)).unwrap();
        let w = m.params.link(LinkLabel::ARG1);
        for i in 0..4 {
            for j in 0..4 {
                if i < 2 && j >= 2 {
                    assert!((w[i * 4 + j] - 4f64.ln()).abs() < 1e-9, "{i},{j}: {}", w[i * 4 + j]);
                } else {
                    assert_eq!(w[i * 4 + j], 0.0, "{i},{j}");
                }
            }
        }
        assert!(m.params.link(LinkLabel::ARG2).iter().all(|&v| v == 0.0));
        assert_eq!(m.params.pred(PredicateId(1)), &vectors[1][..]);
    }

    #[test]
    fn pretrained_rejects_bad_vectors() {
        let cfg = SpaceConfig::new(4, 2).unwrap();
        let short = vec![vec![0.0; 3]];
        assert!(init_from_pretrained(&short, &[], cfg, LabelTable::default(), vocab(1)).is_err());
        let neg = vec![vec![0.0, -1.0, 0.0, 0.0]];
        assert!(init_from_pretrained(&neg, &[], cfg, LabelTable::default(), vocab(1)).is_err());
    }
}

//! Word-similarity evaluation: cosine over semantic-function parameters and
//! Spearman correlation against human judgements.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::Serialize;

use crate::corpus::PredicateId;
use crate::error::{Error, Result};
use crate::model::Model;

/// Which parameters make up the compared vector.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CosineMode {
    /// `W'(c)` followed by `b'(c)`.
    #[default]
    WithBias,
    WeightsOnly,
}

pub fn parameter_vector(model: &Model, c: PredicateId, mode: CosineMode) -> Vec<f64> {
    let mut v = model.params.pred(c).to_vec();
    if mode == CosineMode::WithBias {
        v.push(model.params.pred_bias[c.index()]);
    }
    v
}

pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Data("cosine of a zero vector is undefined".into()));
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

pub fn predicate_cosine(model: &Model, c1: PredicateId, c2: PredicateId, mode: CosineMode) -> Result<f64> {
    cosine(&parameter_vector(model, c1, mode), &parameter_vector(model, c2, mode))
}

/// The `k` predicates most similar to `c` (excluding `c`), best first.
pub fn nearest_neighbours(model: &Model, c: PredicateId, k: usize, mode: CosineMode) -> Result<Vec<(PredicateId, f64)>> {
    if k == 0 {
        return Ok(Vec::new());
    }
    let target = parameter_vector(model, c, mode);
    let mut scored = Vec::with_capacity(model.n_preds());
    for other in model.vocab.ids().filter(|&o| o != c) {
        if let Ok(s) = cosine(&target, &parameter_vector(model, other, mode)) {
            scored.push((other, s));
        }
    }
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(k);
    Ok(scored)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairDataset {
    pub name: String,
    pub pairs: Vec<(String, String, f64)>,
}

impl PairDataset {
    pub fn new(name: impl Into<String>, pairs: Vec<(String, String, f64)>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (i, (a, b, g)) in pairs.iter().enumerate() {
            if !g.is_finite() {
                return Err(Error::parse(i + 1, "gold score is not finite"));
            }
            let key = if a <= b { (a.clone(), b.clone()) } else { (b.clone(), a.clone()) };
            if !seen.insert(key) {
                return Err(Error::parse(i + 1, format!("duplicate pair `{a}` / `{b}`")));
            }
        }
        Ok(PairDataset {
            name: name.into(),
            pairs,
        })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// `word1<TAB>word2<TAB>gold` lines; `#` comments allowed.
    pub fn read<R: BufRead>(name: &str, reader: R) -> Result<Self> {
        let mut pairs = Vec::new();
        let mut seen = HashSet::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let line_no = i + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::parse(line_no, format!("expected 3 fields, found {}", fields.len())));
            }
            let (a, b) = (fields[0].trim(), fields[1].trim());
            if a.is_empty() || b.is_empty() {
                return Err(Error::parse(line_no, "empty word"));
            }
            let gold: f64 = fields[2]
                .trim()
                .parse()
                .map_err(|_| Error::parse(line_no, format!("non-numeric gold score `{}`", fields[2])))?;
            if !gold.is_finite() {
                return Err(Error::parse(line_no, "gold score is not finite"));
            }
            let key = if a <= b { (a, b) } else { (b, a) };
            if !seen.insert((key.0.to_string(), key.1.to_string())) {
                return Err(Error::parse(line_no, format!("duplicate pair `{a}` / `{b}`")));
            }
            pairs.push((a.to_string(), b.to_string(), gold));
        }
        Ok(PairDataset {
            name: name.to_string(),
            pairs,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("pairs");
        Self::read(name, BufReader::new(f))
    }
}

/// Convert the SimLex-999 distribution layout (header, then `word1 word2
/// POS SimLex999 ...` columns) to canonical TSV. Returns the pair count.
pub fn convert_simlex<R: BufRead, W: Write>(reader: R, mut out: W) -> Result<usize> {
    let mut lines = reader.lines().enumerate();
    let header = match lines.next() {
        Some((_, l)) => l?,
        None => return Ok(0),
    };
    let cols: Vec<&str> = header.split('\t').map(str::trim).collect();
    let find = |name: &str| cols.iter().position(|c| c.eq_ignore_ascii_case(name));
    let w1 = find("word1").ok_or_else(|| Error::parse(1, "missing `word1` column"))?;
    let w2 = find("word2").ok_or_else(|| Error::parse(1, "missing `word2` column"))?;
    let score = find("SimLex999")
        .or_else(|| find("score"))
        .ok_or_else(|| Error::parse(1, "missing `SimLex999` column"))?;
    let mut n = 0;
    for (i, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        let get = |k: usize| f.get(k).map(|s| s.trim()).ok_or_else(|| Error::parse(i + 1, "missing column"));
        let gold: f64 = get(score)?
            .parse()
            .map_err(|_| Error::parse(i + 1, "non-numeric score"))?;
        writeln!(out, "{}\t{}\t{}", get(w1)?, get(w2)?, gold)?;
        n += 1;
    }
    Ok(n)
}

/// Fractional (average) ranks, 1-based.
pub fn fractional_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Data("zero rank variance".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's rho: Pearson correlation of fractional ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Data(format!("length mismatch: {} vs {}", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::Data("need at least two observations".into()));
    }
    pearson(&fractional_ranks(x), &fractional_ranks(y))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairScore {
    pub word1: String,
    pub word2: String,
    pub gold: f64,
    /// `None` when either word is out of vocabulary.
    pub score: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub dataset: String,
    pub spearman_rho: f64,
    pub covered_pairs: usize,
    pub skipped_pairs: usize,
    pub pairs: Vec<PairScore>,
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "dataset: {}", self.dataset)?;
        writeln!(f, "spearman: {:.4}", self.spearman_rho)?;
        write!(
            f,
            "coverage: {}/{} pairs ({} skipped)",
            self.covered_pairs,
            self.covered_pairs + self.skipped_pairs,
            self.skipped_pairs
        )
    }
}

/// Score every in-vocabulary pair by predicate cosine and correlate with gold.
pub fn evaluate(model: &Model, dataset: &PairDataset, mode: CosineMode) -> Result<EvalReport> {
    let mut pairs = Vec::with_capacity(dataset.len());
    let (mut gold, mut pred) = (Vec::new(), Vec::new());
    for (a, b, g) in &dataset.pairs {
        let score = match (model.vocab.id(a), model.vocab.id(b)) {
            (Some(ca), Some(cb)) => Some(predicate_cosine(model, ca, cb, mode)?),
            _ => None,
        };
        if let Some(s) = score {
            gold.push(*g);
            pred.push(s);
        }
        pairs.push(PairScore {
            word1: a.clone(),
            word2: b.clone(),
            gold: *g,
            score,
        });
    }
    if gold.len() < 2 {
        return Err(Error::Data(format!(
            "only {} of {} pairs are in vocabulary; need at least 2",
            gold.len(),
            dataset.len()
        )));
    }
    let rho = spearman(&pred, &gold)?;
    Ok(EvalReport {
        dataset: dataset.name.clone(),
        spearman_rho: rho,
        covered_pairs: gold.len(),
        skipped_pairs: dataset.len() - gold.len(),
        pairs,
    })
}

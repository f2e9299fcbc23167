//! Corpus ingestion: triple and graph readers, rare-predicate filtering,
//! vocabulary construction and situation-shape statistics.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ARG1: &str = "ARG1";
pub const ARG2: &str = "ARG2";
pub const DEFAULT_MIN_COUNT: u64 = 5;

/// Dense index into a [`Vocabulary`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PredicateId(pub u32);

impl PredicateId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Index into a [`LabelTable`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LinkLabel(pub u16);

impl LinkLabel {
    pub const ARG1: LinkLabel = LinkLabel(0);
    pub const ARG2: LinkLabel = LinkLabel(1);

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Names of the link labels. `ARG1` and `ARG2` always occupy slots 0 and 1.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelTable {
    names: Vec<String>,
}

impl Default for LabelTable {
    fn default() -> Self {
        LabelTable {
            names: vec![ARG1.to_string(), ARG2.to_string()],
        }
    }
}

impl LabelTable {
    pub fn from_names(names: Vec<String>) -> Result<Self> {
        if names.len() < 2 || names[0] != ARG1 || names[1] != ARG2 {
            return Err(Error::Format("label table must start with ARG1, ARG2".into()));
        }
        let mut seen = std::collections::HashSet::new();
        if !names.iter().all(|n| seen.insert(n.as_str())) {
            return Err(Error::Format("duplicate link label".into()));
        }
        if names.len() > u16::MAX as usize {
            return Err(Error::Format("too many link labels".into()));
        }
        Ok(LabelTable { names })
    }

    /// Canonical labels plus any others used by `graphs`, the extras sorted.
    pub fn collect<'a>(graphs: impl IntoIterator<Item = &'a RawGraph>) -> Self {
        let mut extra = std::collections::BTreeSet::new();
        for g in graphs {
            for (_, l, _) in &g.links {
                if l != ARG1 && l != ARG2 {
                    extra.insert(l.clone());
                }
            }
        }
        let mut table = LabelTable::default();
        table.names.extend(extra);
        table
    }

    pub fn get(&self, name: &str) -> Option<LinkLabel> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| LinkLabel(i as u16))
    }

    pub fn name(&self, label: LinkLabel) -> &str {
        &self.names[label.index()]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// A directed, labelled link between two nodes of a graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Link {
    pub src: usize,
    pub label: LinkLabel,
    pub tgt: usize,
}

impl Link {
    pub fn new(src: usize, label: LinkLabel, tgt: usize) -> Self {
        Link { src, label, tgt }
    }
}

pub fn validate_links(n_nodes: usize, links: &[Link], n_labels: usize) -> Result<()> {
    for l in links {
        if l.src >= n_nodes || l.tgt >= n_nodes {
            return Err(Error::Data(format!(
                "link ({}, {}, {}) out of range for {n_nodes} nodes",
                l.src, l.label.0, l.tgt
            )));
        }
        if l.src == l.tgt {
            return Err(Error::Data(format!("self-link on node {}", l.src)));
        }
        if l.label.index() >= n_labels {
            return Err(Error::Data(format!("unknown link label index {}", l.label.0)));
        }
    }
    Ok(())
}

/// One training situation: observed predicates on nodes plus labelled links.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphToken {
    pub nodes: Vec<PredicateId>,
    pub links: Vec<Link>,
}

impl GraphToken {
    pub fn shape(&self) -> GraphShape {
        GraphShape {
            n_nodes: self.nodes.len(),
            links: self.links.clone(),
        }
    }
}

/// An abstract graph: links are given, nodes are unlabelled.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GraphShape {
    pub n_nodes: usize,
    pub links: Vec<Link>,
}

impl GraphShape {
    /// verb -ARG1-> subject, verb -ARG2-> object
    pub fn svo() -> Self {
        GraphShape {
            n_nodes: 3,
            links: vec![
                Link::new(0, LinkLabel::ARG1, 1),
                Link::new(0, LinkLabel::ARG2, 2),
            ],
        }
    }

    pub fn sv() -> Self {
        GraphShape {
            n_nodes: 2,
            links: vec![Link::new(0, LinkLabel::ARG1, 1)],
        }
    }

    pub fn vo() -> Self {
        GraphShape {
            n_nodes: 2,
            links: vec![Link::new(0, LinkLabel::ARG2, 1)],
        }
    }

    pub fn single() -> Self {
        GraphShape {
            n_nodes: 1,
            links: Vec::new(),
        }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "svo" => Some(Self::svo()),
            "sv" => Some(Self::sv()),
            "vo" => Some(Self::vo()),
            "single" => Some(Self::single()),
            _ => None,
        }
    }

    pub fn kind(&self) -> ShapeKind {
        classify(self.n_nodes, &self.links)
    }
}

/// Situation types reported in corpus statistics.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShapeKind {
    Both,
    Arg1Only,
    Arg2Only,
    Other,
}

fn classify(n_nodes: usize, links: &[Link]) -> ShapeKind {
    // A verb at node 0 whose arguments are exactly the remaining nodes.
    if n_nodes < 2 || links.len() != n_nodes - 1 {
        return ShapeKind::Other;
    }
    let mut targets: Vec<usize> = links.iter().map(|l| l.tgt).collect();
    targets.sort_unstable();
    if links.iter().any(|l| l.src != 0) || targets != (1..n_nodes).collect::<Vec<_>>() {
        return ShapeKind::Other;
    }
    let mut labels: Vec<LinkLabel> = links.iter().map(|l| l.label).collect();
    labels.sort_unstable();
    match labels.as_slice() {
        [LinkLabel::ARG1, LinkLabel::ARG2] => ShapeKind::Both,
        [LinkLabel::ARG1] => ShapeKind::Arg1Only,
        [LinkLabel::ARG2] => ShapeKind::Arg2Only,
        _ => ShapeKind::Other,
    }
}

/// A graph record with string predicates and labels, before vocabulary lookup.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawGraph {
    pub nodes: Vec<String>,
    pub links: Vec<(usize, String, usize)>,
}

impl RawGraph {
    fn validate(&self) -> std::result::Result<(), String> {
        if self.nodes.is_empty() {
            return Err("graph has no nodes".into());
        }
        if self.nodes.iter().any(|n| n.is_empty()) {
            return Err("empty predicate".into());
        }
        for (s, l, t) in &self.links {
            if *s >= self.nodes.len() || *t >= self.nodes.len() {
                return Err(format!("link ({s}, {l}, {t}) out of range"));
            }
            if s == t {
                return Err(format!("self-link on node {s}"));
            }
            if l.is_empty() {
                return Err("empty link label".into());
            }
        }
        Ok(())
    }
}

/// `(verb, ARG1, ARG2)` with at least one argument present.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TripleRecord {
    pub verb: String,
    pub arg1: Option<String>,
    pub arg2: Option<String>,
}

impl TripleRecord {
    pub fn to_graph(&self) -> RawGraph {
        let mut nodes = vec![self.verb.clone()];
        let mut links = Vec::new();
        if let Some(a) = &self.arg1 {
            nodes.push(a.clone());
            links.push((0, ARG1.to_string(), nodes.len() - 1));
        }
        if let Some(a) = &self.arg2 {
            nodes.push(a.clone());
            links.push((0, ARG2.to_string(), nodes.len() - 1));
        }
        RawGraph { nodes, links }
    }
}

/// Parse one line of the triples format. Comments and blank lines give `None`.
pub fn parse_triple_line(line: &str, line_no: usize) -> Result<Option<TripleRecord>> {
    let line = line.strip_suffix('\r').unwrap_or(line);
    if line.starts_with('#') || line.trim().is_empty() {
        return Ok(None);
    }
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 3 {
        return Err(Error::parse(
            line_no,
            format!("expected 3 tab-separated fields, found {}", fields.len()),
        ));
    }
    let field = |s: &str| -> Option<String> {
        let s = s.trim();
        (s != "_" && !s.is_empty()).then(|| s.to_string())
    };
    let verb = fields[0].trim();
    if verb.is_empty() || verb == "_" {
        return Err(Error::parse(line_no, "empty verb"));
    }
    let (arg1, arg2) = (field(fields[1]), field(fields[2]));
    if arg1.is_none() && arg2.is_none() {
        return Err(Error::parse(line_no, "both arguments missing"));
    }
    Ok(Some(TripleRecord {
        verb: verb.to_string(),
        arg1,
        arg2,
    }))
}

/// Stream triple records from a reader, in order.
pub fn read_triples<R: BufRead>(reader: R) -> impl Iterator<Item = Result<TripleRecord>> {
    reader
        .lines()
        .enumerate()
        .filter_map(|(i, line)| match line {
            Ok(l) => parse_triple_line(&l, i + 1).transpose(),
            Err(e) => Some(Err(Error::RawIo(e))),
        })
}

pub fn load_triples(path: &Path) -> Result<impl Iterator<Item = Result<TripleRecord>>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(read_triples(BufReader::new(f)))
}

#[derive(Deserialize)]
struct GraphLine {
    nodes: Vec<String>,
    #[serde(default)]
    links: Vec<(usize, String, usize)>,
}

/// Stream graph records from JSON lines.
pub fn read_graphs<R: BufRead>(reader: R) -> impl Iterator<Item = Result<RawGraph>> {
    reader.lines().enumerate().filter_map(|(i, line)| {
        let line_no = i + 1;
        let line = match line {
            Ok(l) => l,
            Err(e) => return Some(Err(Error::RawIo(e))),
        };
        if line.trim().is_empty() || line.starts_with('#') {
            return None;
        }
        let parsed: GraphLine = match serde_json::from_str(&line) {
            Ok(g) => g,
            Err(e) => return Some(Err(Error::parse(line_no, e.to_string()))),
        };
        let g = RawGraph {
            nodes: parsed.nodes,
            links: parsed.links,
        };
        Some(g.validate().map(|_| g).map_err(|m| Error::parse(line_no, m)))
    })
}

pub fn load_graphs(path: &Path) -> Result<impl Iterator<Item = Result<RawGraph>>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(read_graphs(BufReader::new(f)))
}

/// Predicates with their counts, ordered by descending count then name.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Vocabulary {
    entries: Vec<(String, u64)>,
    index: HashMap<String, PredicateId>,
    total: u64,
}

impl Vocabulary {
    /// Build from arbitrary `(predicate, count)` pairs; applies the canonical order.
    pub fn from_counts(counts: impl IntoIterator<Item = (String, u64)>) -> Result<Self> {
        let mut entries: Vec<(String, u64)> = counts.into_iter().collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        Self::from_ordered(entries)
    }

    /// Build keeping the given id order (as stored in files).
    pub fn from_ordered(entries: Vec<(String, u64)>) -> Result<Self> {
        let mut index = HashMap::with_capacity(entries.len());
        let mut total = 0u64;
        for (i, (name, count)) in entries.iter().enumerate() {
            if name.is_empty() || name.contains('\t') || name.contains('\n') {
                return Err(Error::Data(format!("invalid predicate name {name:?}")));
            }
            if index.insert(name.clone(), PredicateId(i as u32)).is_some() {
                return Err(Error::Data(format!("duplicate predicate `{name}`")));
            }
            total += count;
        }
        if entries.len() > u32::MAX as usize {
            return Err(Error::Data("vocabulary too large".into()));
        }
        Ok(Vocabulary {
            entries,
            index,
            total,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<PredicateId> {
        self.index.get(name).copied()
    }

    pub fn require(&self, name: &str) -> Result<PredicateId> {
        self.id(name)
            .ok_or_else(|| Error::UnknownPredicate(name.to_string()))
    }

    pub fn name(&self, id: PredicateId) -> &str {
        &self.entries[id.index()].0
    }

    pub fn count(&self, id: PredicateId) -> u64 {
        self.entries[id.index()].1
    }

    pub fn total_count(&self) -> u64 {
        self.total
    }

    pub fn entries(&self) -> &[(String, u64)] {
        &self.entries
    }

    pub fn ids(&self) -> impl Iterator<Item = PredicateId> {
        (0..self.entries.len() as u32).map(PredicateId)
    }

    /// Relative frequencies `f_c`. Uniform if every count is zero.
    pub fn frequencies(&self) -> Vec<f64> {
        if self.total == 0 {
            let n = self.entries.len() as f64;
            return vec![1.0 / n; self.entries.len()];
        }
        let total = self.total as f64;
        self.entries.iter().map(|(_, c)| *c as f64 / total).collect()
    }

    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        for (name, count) in &self.entries {
            writeln!(w, "{name}\t{count}")?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        self.write_tsv(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_tsv<R: BufRead>(reader: R) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let (name, count) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(i + 1, "expected `predicate<TAB>count`"))?;
            let count: u64 = count
                .trim()
                .parse()
                .map_err(|_| Error::parse(i + 1, format!("bad count `{count}`")))?;
            entries.push((name.to_string(), count));
        }
        Self::from_ordered(entries)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_tsv(BufReader::new(f))
    }
}

/// Result of rare-predicate filtering.
#[derive(Clone, Debug)]
pub struct FilteredCorpus {
    pub vocabulary: Vocabulary,
    /// `kept[i]` is true when record `i` survived.
    pub kept: Vec<bool>,
    pub kept_count: usize,
}

/// Drop every record mentioning a predicate seen fewer than `min_count` times,
/// recounting on the surviving records until nothing more is dropped.
pub fn build_vocabulary(records: &[RawGraph], min_count: u64) -> Result<FilteredCorpus> {
    if min_count == 0 {
        return Err(Error::Config("min_count must be at least 1".into()));
    }
    let mut ids: HashMap<&str, usize> = HashMap::new();
    let mut names: Vec<&str> = Vec::new();
    let mut counts: Vec<u64> = Vec::new();
    let mut mentions: Vec<Vec<usize>> = Vec::new();
    for (r, g) in records.iter().enumerate() {
        for n in &g.nodes {
            let id = *ids.entry(n.as_str()).or_insert_with(|| {
                names.push(n.as_str());
                counts.push(0);
                mentions.push(Vec::new());
                names.len() - 1
            });
            counts[id] += 1;
            if mentions[id].last() != Some(&r) {
                mentions[id].push(r);
            }
        }
    }

    let mut kept = vec![true; records.len()];
    let mut pending: Vec<usize> = (0..names.len())
        .filter(|&p| counts[p] < min_count)
        .collect();
    let mut removed_pred = vec![false; names.len()];
    while let Some(p) = pending.pop() {
        if removed_pred[p] {
            continue;
        }
        removed_pred[p] = true;
        for &r in &mentions[p] {
            if !kept[r] {
                continue;
            }
            kept[r] = false;
            for n in &records[r].nodes {
                let q = ids[n.as_str()];
                counts[q] -= 1;
                if counts[q] < min_count && !removed_pred[q] {
                    pending.push(q);
                }
            }
        }
    }

    let kept_count = kept.iter().filter(|&&k| k).count();
    if kept_count == 0 {
        return Err(Error::Data(format!(
            "no situations survive filtering at min_count={min_count}"
        )));
    }
    let vocabulary = Vocabulary::from_counts(
        (0..names.len())
            .filter(|&p| counts[p] > 0)
            .map(|p| (names[p].to_string(), counts[p])),
    )?;
    Ok(FilteredCorpus {
        vocabulary,
        kept,
        kept_count,
    })
}

/// Map a raw graph onto vocabulary ids. `None` when any predicate or label
/// is unknown.
pub fn tokenize_graph(g: &RawGraph, vocab: &Vocabulary, labels: &LabelTable) -> Option<GraphToken> {
    let nodes = g
        .nodes
        .iter()
        .map(|n| vocab.id(n))
        .collect::<Option<Vec<_>>>()?;
    let links = g
        .links
        .iter()
        .map(|(s, l, t)| labels.get(l).map(|l| Link::new(*s, l, *t)))
        .collect::<Option<Vec<_>>>()?;
    Some(GraphToken { nodes, links })
}

/// Verb becomes node 0, present arguments follow in ARG1, ARG2 order.
pub fn tokenize(t: &TripleRecord, vocab: &Vocabulary) -> Option<GraphToken> {
    tokenize_graph(&t.to_graph(), vocab, &LabelTable::default())
}

/// Tokenize a batch, counting skipped records.
pub fn tokenize_all<'a>(
    graphs: impl IntoIterator<Item = &'a RawGraph>,
    vocab: &Vocabulary,
    labels: &LabelTable,
) -> (Vec<GraphToken>, usize) {
    let mut skipped = 0;
    let mut out = Vec::new();
    for g in graphs {
        match tokenize_graph(g, vocab, labels) {
            Some(t) => out.push(t),
            None => skipped += 1,
        }
    }
    (out, skipped)
}

pub fn token_to_raw(t: &GraphToken, vocab: &Vocabulary, labels: &LabelTable) -> RawGraph {
    RawGraph {
        nodes: t.nodes.iter().map(|&c| vocab.name(c).to_string()).collect(),
        links: t
            .links
            .iter()
            .map(|l| (l.src, labels.name(l.label).to_string(), l.tgt))
            .collect(),
    }
}

#[derive(Serialize)]
struct GraphLineOut<'a> {
    nodes: &'a [String],
    links: &'a [(usize, String, usize)],
}

/// Write tokens in the JSON-lines graph format.
pub fn write_tokens<W: Write>(
    mut w: W,
    tokens: &[GraphToken],
    vocab: &Vocabulary,
    labels: &LabelTable,
) -> Result<()> {
    for t in tokens {
        let raw = token_to_raw(t, vocab, labels);
        serde_json::to_writer(
            &mut w,
            &GraphLineOut {
                nodes: &raw.nodes,
                links: &raw.links,
            },
        )?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Read a token file written by [`write_tokens`]. Unknown predicates are an
/// error here: the file is expected to match the vocabulary.
pub fn load_tokens(path: &Path, vocab: &Vocabulary) -> Result<(Vec<GraphToken>, LabelTable)> {
    let graphs: Vec<RawGraph> = load_graphs(path)?.collect::<Result<_>>()?;
    let labels = LabelTable::collect(&graphs);
    let mut tokens = Vec::with_capacity(graphs.len());
    for (i, g) in graphs.iter().enumerate() {
        for n in &g.nodes {
            vocab.require(n)?;
        }
        let t = tokenize_graph(g, vocab, &labels)
            .ok_or_else(|| Error::parse(i + 1, "token does not match vocabulary"))?;
        tokens.push(t);
    }
    Ok((tokens, labels))
}

/// Token counts per situation type.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CorpusStats {
    pub both: u64,
    pub arg1_only: u64,
    pub arg2_only: u64,
    pub other: u64,
    pub tokens: u64,
    pub types: u64,
}

pub fn corpus_stats<'a>(tokens: impl IntoIterator<Item = &'a GraphToken>) -> CorpusStats {
    let mut stats = CorpusStats::default();
    let mut types = std::collections::HashSet::new();
    for t in tokens {
        match classify(t.nodes.len(), &t.links) {
            ShapeKind::Both => stats.both += 1,
            ShapeKind::Arg1Only => stats.arg1_only += 1,
            ShapeKind::Arg2Only => stats.arg2_only += 1,
            ShapeKind::Other => stats.other += 1,
        }
        stats.tokens += 1;
        types.extend(t.nodes.iter().copied());
    }
    stats.types = types.len() as u64;
    stats
}

impl fmt::Display for CorpusStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<16}{:>14}", "Situation type", "No. instances")?;
        writeln!(f, "{:<16}{:>14}", "Both arguments", group(self.both))?;
        writeln!(f, "{:<16}{:>14}", "ARG1 only", group(self.arg1_only))?;
        writeln!(f, "{:<16}{:>14}", "ARG2 only", group(self.arg2_only))?;
        if self.other > 0 {
            writeln!(f, "{:<16}{:>14}", "Other", group(self.other))?;
        }
        writeln!(f, "{:<16}{:>14}", "Total", group(self.tokens))?;
        write!(f, "{:<16}{:>14}", "Predicates", group(self.types))
    }
}

fn group(n: u64) -> String {
    let s = n.to_string();
    let mut out = String::with_capacity(s.len() + s.len() / 3);
    for (i, ch) in s.chars().enumerate() {
        if i > 0 && (s.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

/// Empirical distribution over abstract graph shapes, in first-seen order.
pub fn shape_distribution<'a>(
    tokens: impl IntoIterator<Item = &'a GraphToken>,
) -> Vec<(GraphShape, u64)> {
    let mut order: Vec<GraphShape> = Vec::new();
    let mut counts: BTreeMap<usize, u64> = BTreeMap::new();
    let mut lookup: HashMap<GraphShape, usize> = HashMap::new();
    for t in tokens {
        let s = t.shape();
        let i = *lookup.entry(s.clone()).or_insert_with(|| {
            order.push(s);
            order.len() - 1
        });
        *counts.entry(i).or_default() += 1;
    }
    order
        .into_iter()
        .enumerate()
        .map(|(i, s)| (s, counts[&i]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(nodes: &[&str]) -> RawGraph {
        TripleRecord {
            verb: nodes[0].into(),
            arg1: nodes.get(1).filter(|s| **s != "_").map(|s| s.to_string()),
            arg2: nodes.get(2).filter(|s| **s != "_").map(|s| s.to_string()),
        }
        .to_graph()
    }

    #[test]
    fn parses_triples() {
        let r = parse_triple_line("bark\tdog\t_", 1).unwrap().unwrap();
        assert_eq!(r.verb, "bark");
        assert_eq!(r.arg1.as_deref(), Some("dog"));
        assert_eq!(r.arg2, None);
        let r = parse_triple_line("chase\tdog\tcat", 1).unwrap().unwrap();
        assert_eq!(r.arg2.as_deref(), Some("cat"));
        assert!(parse_triple_line("# comment", 1).unwrap().is_none());
    }

    #[test]
    fn triple_errors_name_the_line() {
        let err = parse_triple_line("chase\t_\t_", 7).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 7, .. }), "{err}");
        assert!(err.to_string().contains("both arguments missing"));
        assert!(parse_triple_line("chase\tdog", 3).is_err());
        assert!(parse_triple_line("\tdog\tcat", 3).is_err());
        assert!(parse_triple_line("a\tb\tc\td", 3).is_err());
    }

    #[test]
    fn read_triples_keeps_file_order() {
        let text = "# header\nchase\tdog\tcat\nbark\tdog\t_\n";
        let recs: Vec<_> = read_triples(text.as_bytes()).collect::<Result<_>>().unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[1].verb, "bark");
    }

    #[test]
    fn graph_lines_validate() {
        let ok = r#"{"nodes": ["chase", "dog"], "links": [[0, "ARG1", 1]]}"#;
        let bad = r#"{"nodes": ["chase"], "links": [[0, "ARG1", 0]]}"#;
        let text = format!("{ok}\n{bad}\n");
        let out: Vec<_> = read_graphs(text.as_bytes()).collect();
        assert!(out[0].is_ok());
        assert!(matches!(out[1], Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn min_count_filter_drops_rare() {
        let mut recs = vec![g(&["a", "b"]); 5];
        recs.push(g(&["a", "c"]));
        let f = build_vocabulary(&recs, 2).unwrap();
        assert_eq!(
            f.vocabulary.entries(),
            &[("a".to_string(), 5), ("b".to_string(), 5)]
        );
        assert_eq!(f.kept_count, 5);
        assert!(!f.kept[5]);
    }

    #[test]
    fn min_count_one_keeps_everything() {
        let recs = vec![g(&["a", "b"]), g(&["c", "d", "e"])];
        let f = build_vocabulary(&recs, 1).unwrap();
        assert_eq!(f.kept_count, 2);
        assert_eq!(f.vocabulary.len(), 5);
    }

    #[test]
    fn filter_reaches_fixed_point() {
        // b appears once; dropping (a,b) leaves a with 2 < 3, which then
        // drops (a,c) x2, leaving c with 3.
        let mut recs = vec![g(&["a", "b"])];
        recs.extend(vec![g(&["a", "c"]); 2]);
        recs.push(g(&["c", "_", "c"]));
        let f = build_vocabulary(&recs, 3).unwrap_err();
        assert!(matches!(f, Error::Data(_)));

        let mut recs = vec![g(&["a", "b"])];
        recs.extend(vec![g(&["a", "c"]); 2]);
        recs.extend(vec![g(&["c", "d"]); 3]);
        let f = build_vocabulary(&recs, 3).unwrap();
        let names: Vec<&str> = f.vocabulary.entries().iter().map(|e| e.0.as_str()).collect();
        assert_eq!(names, vec!["c", "d"]);
        assert_eq!(f.kept_count, 3);
    }

    #[test]
    fn vocabulary_order_is_count_then_name() {
        let v = Vocabulary::from_counts(vec![
            ("b".to_string(), 3),
            ("a".to_string(), 3),
            ("z".to_string(), 9),
        ])
        .unwrap();
        let names: Vec<&str> = v.entries().iter().map(|e| e.0.as_str()).collect();
        assert_eq!(names, vec!["z", "a", "b"]);
        let f = v.frequencies();
        assert!((f.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn vocabulary_round_trips() {
        let v = Vocabulary::from_counts(vec![("x".to_string(), 2), ("y".to_string(), 7)]).unwrap();
        let mut buf = Vec::new();
        v.write_tsv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "y\t7\nx\t2\n");
        assert_eq!(Vocabulary::read_tsv(buf.as_slice()).unwrap(), v);
    }

    #[test]
    fn tokenize_svo_and_skips() {
        let v = Vocabulary::from_counts(
            ["chase", "dog", "cat", "bark"].map(|s| (s.to_string(), 1)),
        )
        .unwrap();
        let t = |a: &str, b: Option<&str>, c: Option<&str>| TripleRecord {
            verb: a.into(),
            arg1: b.map(Into::into),
            arg2: c.map(Into::into),
        };
        let tok = tokenize(&t("chase", Some("dog"), Some("cat")), &v).unwrap();
        assert_eq!(
            tok.nodes,
            vec![v.id("chase").unwrap(), v.id("dog").unwrap(), v.id("cat").unwrap()]
        );
        assert_eq!(
            tok.links,
            vec![Link::new(0, LinkLabel::ARG1, 1), Link::new(0, LinkLabel::ARG2, 2)]
        );
        let tok = tokenize(&t("bark", Some("dog"), None), &v).unwrap();
        assert_eq!(tok.links, vec![Link::new(0, LinkLabel::ARG1, 1)]);
        assert!(tokenize(&t("chase", Some("dog"), Some("emu")), &v).is_none());
    }

    #[test]
    fn stats_count_shapes() {
        let v = Vocabulary::from_counts(["v", "a", "b"].map(|s| (s.to_string(), 1))).unwrap();
        let recs = [g(&["v", "a", "b"]), g(&["v", "a"]), g(&["v", "b"])];
        let (toks, skipped) = tokenize_all(&recs, &v, &LabelTable::default());
        assert_eq!(skipped, 0);
        let s = corpus_stats(&toks);
        assert_eq!((s.both, s.arg1_only, s.arg2_only, s.other, s.tokens), (1, 2, 0, 0, 3));
        assert_eq!(corpus_stats(&[]), CorpusStats::default());
    }

    #[test]
    fn stats_table_groups_thousands() {
        let s = CorpusStats {
            both: 10_091_234,
            arg1_only: 6_301_280,
            arg2_only: 14_868_213,
            other: 0,
            tokens: 31_260_727,
            types: 88_526,
        };
        let text = s.to_string();
        assert!(text.contains("10,091,234"));
        assert!(text.contains("31,260,727"));
    }
}

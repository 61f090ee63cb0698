//! Learned term translations.
//!
//! `Tr(t, t')` is the probability that `t'` is (part of) a translation of
//! `t`: an abbreviation, a variant spelling, a synonym. It is estimated from
//! positive labeled pairs with a pseudo-count regularized proportion, then
//! thresholded so the table stays sparse. Bigram entries are added
//! separately and are exact: `Tr(concat(a, b), a) = Tr(concat(a, b), b) = 1`.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::IndexSnapshot;
use crate::text::{Corpus, LabeledPair, Term};

/// Per ordered (query term, document term) pair event counts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TrCounts {
    counts: HashMap<(Term, Term), PairCount>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PairCount {
    pub matched: u64,
    pub seen: u64,
}

impl TrCounts {
    pub fn new() -> TrCounts {
        TrCounts::default()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn get(&self, query_term: &Term, doc_term: &Term) -> PairCount {
        self.counts
            .get(&(query_term.clone(), doc_term.clone()))
            .copied()
            .unwrap_or_default()
    }

    pub fn matched(&self, query_term: &Term, doc_term: &Term) -> u64 {
        self.get(query_term, doc_term).matched
    }

    pub fn seen(&self, query_term: &Term, doc_term: &Term) -> u64 {
        self.get(query_term, doc_term).seen
    }

    /// Adds raw counts for one ordered pair. `matched` must not exceed `seen`
    /// once all additions are in.
    pub fn add(&mut self, query_term: Term, doc_term: Term, matched: u64, seen: u64) {
        let c = self.counts.entry((query_term, doc_term)).or_default();
        c.matched += matched;
        c.seen += seen;
    }

    pub fn merge(mut self, other: TrCounts) -> TrCounts {
        let (mut big, small) = if self.counts.len() >= other.counts.len() {
            (std::mem::take(&mut self), other)
        } else {
            (other, self)
        };
        for (k, v) in small.counts {
            let c = big.counts.entry(k).or_default();
            c.matched += v.matched;
            c.seen += v.seen;
        }
        big
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Term, &Term, PairCount)> {
        self.counts.iter().map(|((a, b), c)| (a, b, *c))
    }

    fn record(&mut self, pair: &LabeledPair, corpus: &Corpus) {
        let doc = corpus.get(pair.doc_id.as_str()).expect("pair resolved before counting");
        let q = pair.query.term_set();
        for t in q {
            let t_in_doc = doc.contains(t.as_str());
            for t2 in doc.term_set() {
                let matched = !t_in_doc && !q.contains(t2);
                self.add(t.clone(), t2.clone(), u64::from(matched), 1);
            }
        }
    }
}

/// Counts Match and Seen events over the positive pairs. Negative pairs are
/// ignored.
pub fn accumulate_counts(pls: &[LabeledPair], corpus: &Corpus) -> Result<TrCounts> {
    for (index, p) in pls.iter().enumerate() {
        if corpus.index_of(p.doc_id.as_str()).is_none() {
            return Err(Error::UnresolvedPair {
                index,
                query: p.query.raw().to_string(),
                doc_id: p.doc_id.to_string(),
            });
        }
    }
    Ok(pls
        .par_iter()
        .filter(|p| p.is_positive())
        .fold(TrCounts::new, |mut acc, p| {
            acc.record(p, corpus);
            acc
        })
        .reduce(TrCounts::new, TrCounts::merge))
}

/// Number of positive queries containing each term.
pub fn query_frequencies(pls: &[LabeledPair]) -> HashMap<Term, u64> {
    let mut qf = HashMap::new();
    for p in pls.iter().filter(|p| p.is_positive()) {
        for t in p.query.term_set() {
            *qf.entry(t.clone()).or_insert(0) += 1;
        }
    }
    qf
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Learned,
    Bigram,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Origin::Learned => "learned",
            Origin::Bigram => "bigram",
        })
    }
}

impl FromStr for Origin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "learned" => Ok(Origin::Learned),
            "bigram" => Ok(Origin::Bigram),
            other => Err(Error::param(format!("unknown translation origin `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrEntry {
    pub target: Term,
    pub prob: f64,
    pub origin: Origin,
}

/// Sparse translation table keyed by source term. Targets under each key are
/// unique and kept sorted.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrMap {
    entries: HashMap<Term, Vec<TrEntry>>,
}

impl TrMap {
    pub fn new() -> TrMap {
        TrMap::default()
    }

    /// Builds a table from explicit `(source, target, probability, origin)`
    /// rows. Probabilities must lie in `(0, 1]`; self-translations and
    /// duplicate rows are rejected.
    pub fn from_entries<I>(rows: I) -> Result<TrMap>
    where
        I: IntoIterator<Item = (Term, Term, f64, Origin)>,
    {
        let mut map = TrMap::new();
        for (src, target, prob, origin) in rows {
            if !(prob > 0.0 && prob <= 1.0) {
                return Err(Error::param(format!("Tr({src}, {target}) = {prob} is outside (0, 1]")));
            }
            if src == target {
                return Err(Error::param(format!("self-translation for `{src}`")));
            }
            if !map.insert_new(src.clone(), target.clone(), prob, origin) {
                return Err(Error::param(format!("duplicate entry Tr({src}, {target})")));
            }
        }
        Ok(map)
    }

    /// Inserts unless the pair already has an entry. Returns whether it was
    /// inserted.
    fn insert_new(&mut self, src: Term, target: Term, prob: f64, origin: Origin) -> bool {
        let list = self.entries.entry(src).or_default();
        match list.binary_search_by(|e| e.target.cmp(&target)) {
            Ok(_) => false,
            Err(pos) => {
                list.insert(pos, TrEntry { target, prob, origin });
                true
            }
        }
    }

    /// Translation entries of `term`, sorted by target.
    pub fn get(&self, term: &str) -> &[TrEntry] {
        self.entries.get(term).map_or(&[], Vec::as_slice)
    }

    pub fn prob(&self, src: &str, target: &str) -> Option<f64> {
        let list = self.get(src);
        list.binary_search_by(|e| e.target.as_str().cmp(target))
            .ok()
            .map(|i| list[i].prob)
    }

    pub fn keys(&self) -> impl Iterator<Item = &Term> {
        self.entries.keys()
    }

    pub fn num_keys(&self) -> usize {
        self.entries.len()
    }

    /// Total number of `(source, target)` entries.
    pub fn len(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// All rows in `(source, target)` order.
    pub fn rows(&self) -> Vec<(&Term, &TrEntry)> {
        let sorted: BTreeMap<&Term, &Vec<TrEntry>> = self.entries.iter().collect();
        sorted
            .into_iter()
            .flat_map(|(k, v)| v.iter().map(move |e| (k, e)))
            .collect()
    }

    pub fn filter_origin(&self, origin: Origin) -> TrMap {
        let mut out = TrMap::new();
        for (k, e) in self.rows() {
            if e.origin == origin {
                out.insert_new(k.clone(), e.target.clone(), e.prob, e.origin);
            }
        }
        out
    }

    /// `term<TAB>term<TAB>probability<TAB>origin` lines. Probabilities use the
    /// shortest decimal that round-trips exactly.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> Result<()> {
        for (k, e) in self.rows() {
            writeln!(out, "{k}\t{}\t{}\t{}", e.target, e.prob, e.origin)?;
        }
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(reader: R, origin: &str) -> Result<TrMap> {
        let mut rows = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let bad = |msg: String| Error::parse(origin, i + 1, msg);
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 4 {
                return Err(bad("expected `term<TAB>term<TAB>probability<TAB>origin`".into()));
            }
            let src = Term::new(cols[0]).ok_or_else(|| bad(format!("`{}` is not a term", cols[0])))?;
            let dst = Term::new(cols[1]).ok_or_else(|| bad(format!("`{}` is not a term", cols[1])))?;
            let prob: f64 = cols[2]
                .parse()
                .map_err(|_| bad(format!("bad probability `{}`", cols[2])))?;
            let o: Origin = cols[3].parse().map_err(|e: Error| bad(e.to_string()))?;
            rows.push((src, dst, prob, o));
        }
        TrMap::from_entries(rows).map_err(|e| Error::parse(origin, 0, e.to_string()))
    }
}

/// Pseudo-count estimator settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrParams {
    pub c1: f64,
    pub c: f64,
    pub tau: f64,
}

impl Default for TrParams {
    fn default() -> Self {
        TrParams {
            c1: 1.0,
            c: 5.0,
            tau: 0.7,
        }
    }
}

impl TrParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c1 > 0.0 && self.c1 <= self.c && self.c.is_finite()) {
            return Err(Error::param(format!(
                "pseudo-counts need 0 < c1 <= c, got c1={} c={}",
                self.c1, self.c
            )));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::param(format!("threshold tau={} outside (0, 1]", self.tau)));
        }
        Ok(())
    }
}

/// Unordered pair with both orders' counts summed.
fn symmetric_counts(counts: &TrCounts) -> BTreeMap<(&Term, &Term), PairCount> {
    let mut sym: BTreeMap<(&Term, &Term), PairCount> = BTreeMap::new();
    for (a, b, c) in counts.iter() {
        if a == b {
            continue;
        }
        let key = if a < b { (a, b) } else { (b, a) };
        let e = sym.entry(key).or_default();
        e.matched += c.matched;
        e.seen += c.seen;
    }
    sym
}

/// `Tr = (Match + c1) / (Seen + c)` over counts summed across both orders of
/// each pair, keeping pairs at or above `tau`. Both directions are stored.
/// Only pairs seen at least once are considered.
pub fn estimate_tr(counts: &TrCounts, params: TrParams) -> Result<TrMap> {
    params.validate()?;
    let mut map = TrMap::new();
    for ((a, b), c) in symmetric_counts(counts) {
        if c.matched > c.seen {
            return Err(Error::InconsistentCounts(format!(
                "Match({a}, {b}) = {} exceeds Seen = {}",
                c.matched, c.seen
            )));
        }
        let p = (c.matched as f64 + params.c1) / (c.seen as f64 + params.c);
        if p >= params.tau {
            map.insert_new(a.clone(), b.clone(), p, Origin::Learned);
            map.insert_new(b.clone(), a.clone(), p, Origin::Learned);
        }
    }
    Ok(map)
}

/// Clickthrough-style alternative `Tr(T, T') = Seen(T, T') / QF(T')`, kept
/// for comparison runs. The table is symmetrized by taking the larger of the
/// two directional estimates.
pub fn estimate_tr_gao(counts: &TrCounts, qf: &HashMap<Term, u64>, tau: f64) -> Result<TrMap> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::param(format!("threshold tau={tau} outside (0, 1]")));
    }
    let mut best: BTreeMap<(&Term, &Term), f64> = BTreeMap::new();
    for (a, b, c) in counts.iter() {
        if a == b || c.seen == 0 {
            continue;
        }
        let q = qf.get(b.as_str()).copied().unwrap_or(0);
        if q == 0 || c.seen > q {
            return Err(Error::InconsistentCounts(format!(
                "Seen({a}, {b}) = {} but QF({b}) = {q}",
                c.seen
            )));
        }
        let p = c.seen as f64 / q as f64;
        let key = if a < b { (a, b) } else { (b, a) };
        let slot = best.entry(key).or_insert(0.0);
        *slot = slot.max(p);
    }
    let mut map = TrMap::new();
    for ((a, b), p) in best {
        if p >= tau {
            map.insert_new(a.clone(), b.clone(), p, Origin::Learned);
            map.insert_new(b.clone(), a.clone(), p, Origin::Learned);
        }
    }
    Ok(map)
}

/// Adds `Tr(concat(a, b), a) = Tr(concat(a, b), b) = 1` for every pair of
/// consecutive document terms whose concatenation is itself a term of some
/// document. Existing entries are left untouched; the reverse direction is
/// never added.
pub fn inject_bigrams(trmap: &TrMap, corpus: &Corpus) -> TrMap {
    let vocab: HashSet<&str> = corpus
        .documents()
        .iter()
        .flat_map(|d| d.term_set().iter().map(Term::as_str))
        .collect();
    let mut out = trmap.clone();
    for doc in corpus.documents() {
        for w in doc.terms().windows(2) {
            let joined = w[0].concat(&w[1]);
            if !vocab.contains(joined.as_str()) {
                continue;
            }
            for part in [&w[0], &w[1]] {
                out.insert_new(joined.clone(), part.clone(), 1.0, Origin::Bigram);
            }
        }
    }
    out
}

/// Per-key normalizer: the largest number of a key's translation targets
/// found together in one document, floored at 1.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MaxTrTable {
    max_tr: HashMap<Term, u32>,
}

impl MaxTrTable {
    pub fn new() -> MaxTrTable {
        MaxTrTable::default()
    }

    pub fn get(&self, term: &str) -> Option<u32> {
        self.max_tr.get(term).copied()
    }

    /// `1 / MaxTr(term)`; terms without an entry count as 1.
    pub fn inv(&self, term: &str) -> f64 {
        1.0 / f64::from(self.get(term).unwrap_or(1))
    }

    pub fn len(&self) -> usize {
        self.max_tr.len()
    }

    pub fn is_empty(&self) -> bool {
        self.max_tr.is_empty()
    }

    pub fn insert(&mut self, term: Term, value: u32) -> Result<()> {
        if value == 0 {
            return Err(Error::param(format!("MaxTr({term}) must be at least 1")));
        }
        self.max_tr.insert(term, value);
        Ok(())
    }

    pub fn write_tsv<W: Write>(&self, mut out: W) -> Result<()> {
        let sorted: BTreeMap<&Term, &u32> = self.max_tr.iter().collect();
        for (k, v) in sorted {
            writeln!(out, "{k}\t{v}")?;
        }
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(reader: R, origin: &str) -> Result<MaxTrTable> {
        let mut table = MaxTrTable::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let bad = |msg: String| Error::parse(origin, i + 1, msg);
            let (t, v) = line
                .split_once('\t')
                .ok_or_else(|| bad("expected `term<TAB>integer`".into()))?;
            let term = Term::new(t).ok_or_else(|| bad(format!("`{t}` is not a term")))?;
            let v: u32 = v.parse().map_err(|_| bad(format!("bad integer `{v}`")))?;
            table.insert(term, v).map_err(|e| bad(e.to_string()))?;
        }
        Ok(table)
    }
}

/// Computes MaxTr for every key of `trmap` over the indexed corpus.
pub fn compute_max_tr(trmap: &TrMap, index: &IndexSnapshot) -> MaxTrTable {
    let keys: Vec<&Term> = trmap.keys().collect();
    let max_tr = keys
        .par_iter()
        .map(|&key| {
            let mut per_doc: HashMap<u32, u32> = HashMap::new();
            for e in trmap.get(key.as_str()) {
                for &d in index.postings(e.target.as_str()) {
                    *per_doc.entry(d).or_insert(0) += 1;
                }
            }
            let m = per_doc.values().copied().max().unwrap_or(0).max(1);
            (key.clone(), m)
        })
        .collect();
    MaxTrTable { max_tr }
}

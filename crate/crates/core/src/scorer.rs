//! Score fractions, probabilities and ranking.
//!
//! A document's score fraction for a query is the IDF it earns, through
//! exact matches and translation credit, divided by the IDF a document
//! containing every query term would earn. The probability is
//! `sigmoid(w0 + w1 * fraction)`.
//!
//! Credits are always accumulated over the query's unique terms in sorted
//! order. [`rank`] depends on this: its pruning bounds are sums of the same
//! IDF values in the same order, so with monotone float rounding a bound can
//! never sit below a fraction it is meant to cap.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::{tie_key, IndexSnapshot};
use crate::text::{Corpus, DocId, DocIdx, Document, Query, Term};
use crate::translation::{MaxTrTable, TrMap};

/// Which weighted formulas contribute to the fraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "tfidf")]
    Tfidf,
    #[serde(rename = "tfidf+tr")]
    TfidfTr,
    #[serde(rename = "tfidf+tr+bg")]
    TfidfTrBg,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Tfidf, Variant::TfidfTr, Variant::TfidfTrBg];

    pub fn uses_translations(self) -> bool {
        !matches!(self, Variant::Tfidf)
    }

    pub fn uses_bigrams(self) -> bool {
        matches!(self, Variant::TfidfTrBg)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Tfidf => "tfidf",
            Variant::TfidfTr => "tfidf+tr",
            Variant::TfidfTrBg => "tfidf+tr+bg",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "+").as_str() {
            "tfidf" => Ok(Variant::Tfidf),
            "tfidf+tr" => Ok(Variant::TfidfTr),
            "tfidf+tr+bg" => Ok(Variant::TfidfTrBg),
            other => Err(Error::param(format!(
                "unknown variant `{other}` (expected tfidf, tfidf+tr or tfidf+tr+bg)"
            ))),
        }
    }
}

/// Logistic weights mapping a fraction to a probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelWeights {
    pub w0: f64,
    pub w1: f64,
}

impl ModelWeights {
    pub fn new(w0: f64, w1: f64) -> Result<ModelWeights> {
        if !(w0.is_finite() && w1.is_finite()) {
            return Err(Error::param(format!("weights must be finite, got ({w0}, {w1})")));
        }
        Ok(ModelWeights { w0, w1 })
    }

    pub fn probability(&self, fraction: f64) -> f64 {
        probability(*self, fraction)
    }
}

/// Numerically stable logistic function.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn probability(weights: ModelWeights, fraction: f64) -> f64 {
    sigmoid(weights.w0 + weights.w1 * fraction)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    /// IDF earned by query terms present in the (bigram-expanded) document.
    pub exact_idf: f64,
    /// IDF earned through translations, after the per-term cap.
    pub translation_idf: f64,
    /// Query terms the document was credited with because it contains their
    /// concatenation.
    pub bigram_expanded_terms: BTreeSet<Term>,
    pub denominator: f64,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedResult {
    pub doc_id: DocId,
    #[serde(skip)]
    pub doc_idx: DocIdx,
    pub fraction: f64,
    /// Present only when model weights are available.
    pub probability: Option<f64>,
    pub breakdown: ScoreBreakdown,
}

/// Read-only tables a score needs. Translation tables are required only by
/// the variants that use them.
#[derive(Debug, Clone, Copy)]
pub struct Tables<'a> {
    pub corpus: &'a Corpus,
    pub index: &'a IndexSnapshot,
    pub trmap: Option<&'a TrMap>,
    pub maxtr: Option<&'a MaxTrTable>,
}

impl<'a> Tables<'a> {
    pub fn plain(corpus: &'a Corpus, index: &'a IndexSnapshot) -> Tables<'a> {
        Tables {
            corpus,
            index,
            trmap: None,
            maxtr: None,
        }
    }

    fn check(&self, variant: Variant) -> Result<()> {
        if variant.uses_translations() {
            if self.trmap.is_none() {
                return Err(Error::MissingTable {
                    what: "translation variants",
                    table: "a TrMap",
                });
            }
            if self.maxtr.is_none() {
                return Err(Error::MissingTable {
                    what: "translation variants",
                    table: "a MaxTr table",
                });
            }
        }
        Ok(())
    }
}

/// Per-query state shared by every document scored for that query.
#[derive(Debug)]
struct PreparedQuery<'q> {
    query: &'q Query,
    /// Unique terms in sorted order with their IDF.
    terms: Vec<(&'q Term, f64)>,
    /// Consecutive query term pairs with their concatenation.
    bigrams: Vec<(&'q Term, &'q Term, Term)>,
    denominator: f64,
}

impl<'q> PreparedQuery<'q> {
    fn new(query: &'q Query, index: &IndexSnapshot) -> PreparedQuery<'q> {
        let terms: Vec<_> = query.term_set().iter().map(|t| (t, index.idf(t.as_str()))).collect();
        let denominator = terms.iter().map(|&(_, idf)| idf).sum();
        let bigrams = query
            .terms()
            .windows(2)
            .map(|w| (&w[0], &w[1], w[0].concat(&w[1])))
            .collect();
        PreparedQuery {
            query,
            terms,
            bigrams,
            denominator,
        }
    }

    fn score(&self, doc: &Document, tables: &Tables<'_>, variant: Variant) -> ScoreBreakdown {
        let mut expanded = BTreeSet::new();
        if variant.uses_bigrams() {
            for (a, b, joined) in &self.bigrams {
                if !doc.contains(a.as_str()) && !doc.contains(b.as_str()) && doc.contains(joined.as_str()) {
                    expanded.insert((*a).clone());
                    expanded.insert((*b).clone());
                }
            }
        }

        let mut total = 0.0;
        let mut exact_idf = 0.0;
        let mut translation_idf = 0.0;
        for &(t, idf) in &self.terms {
            let credit = if doc.contains(t.as_str()) || expanded.contains(t) {
                exact_idf += idf;
                idf
            } else if variant.uses_translations() {
                let credit = self.translation_credit(t, idf, doc, tables).min(idf);
                translation_idf += credit;
                credit
            } else {
                0.0
            };
            total += credit;
        }

        let fraction = if self.denominator > 0.0 {
            total / self.denominator
        } else {
            0.0
        };
        ScoreBreakdown {
            exact_idf,
            translation_idf,
            bigram_expanded_terms: expanded,
            denominator: self.denominator,
            fraction,
        }
    }

    fn translation_credit(&self, t: &Term, idf: f64, doc: &Document, tables: &Tables<'_>) -> f64 {
        let (Some(trmap), Some(maxtr)) = (tables.trmap, tables.maxtr) else {
            return 0.0;
        };
        let inv = maxtr.inv(t.as_str());
        let mut credit = 0.0;
        for e in trmap.get(t.as_str()) {
            if doc.contains(e.target.as_str()) && !self.query.term_set().contains(&e.target) {
                credit += e.prob * inv * idf;
            }
        }
        credit
    }
}

/// Score breakdown of one document for one query.
pub fn fraction(tables: &Tables<'_>, query: &Query, doc: DocIdx, variant: Variant) -> Result<ScoreBreakdown> {
    tables.check(variant)?;
    let prepared = PreparedQuery::new(query, tables.index);
    Ok(prepared.score(tables.corpus.doc(doc), tables, variant))
}

/// A scored document ordered by rank: higher fraction first, then fewer
/// terms, then smaller id. `Ordering::Less` means "ranks ahead".
#[derive(Debug)]
struct Scored<'c> {
    fraction: f64,
    len: usize,
    id: &'c str,
    idx: DocIdx,
    breakdown: ScoreBreakdown,
}

impl Scored<'_> {
    fn key_cmp(&self, fraction: f64, len: usize, id: &str) -> Ordering {
        fraction
            .total_cmp(&self.fraction)
            .then(self.len.cmp(&len))
            .then(self.id.cmp(id))
    }
}

impl PartialEq for Scored<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Scored<'_> {}

impl PartialOrd for Scored<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scored<'_> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key_cmp(other.fraction, other.len, other.id)
    }
}

/// Bounded collection of the best `k` scored documents. The heap top is the
/// current k-th best.
struct TopK<'c> {
    k: usize,
    heap: BinaryHeap<Scored<'c>>,
}

impl<'c> TopK<'c> {
    fn new(k: usize) -> TopK<'c> {
        TopK {
            k,
            heap: BinaryHeap::with_capacity(k + 1),
        }
    }

    fn worst(&self) -> Option<&Scored<'c>> {
        if self.heap.len() < self.k {
            None
        } else {
            self.heap.peek()
        }
    }

    fn offer(&mut self, s: Scored<'c>) {
        if s.fraction <= 0.0 {
            return;
        }
        match self.worst() {
            None => self.heap.push(s),
            Some(w) if s < *w => {
                self.heap.pop();
                self.heap.push(s);
            }
            Some(_) => {}
        }
    }

    /// True when no document with fraction at most `bound` can enter.
    fn excludes_bound(&self, bound: f64) -> bool {
        self.worst().is_some_and(|w| w.fraction > bound)
    }

    /// True when no document with fraction at most `bound` and tie key at
    /// least `(len, id)` can enter.
    fn excludes_from(&self, bound: f64, len: usize, id: &str) -> bool {
        self.worst()
            .is_some_and(|w| w.key_cmp(bound, len, id) == Ordering::Less)
    }

    fn into_results(self, weights: Option<ModelWeights>) -> Vec<RankedResult> {
        self.heap
            .into_sorted_vec()
            .into_iter()
            .map(|s| to_result(s.idx, s.breakdown, s.id, weights))
            .collect()
    }
}

fn to_result(idx: DocIdx, breakdown: ScoreBreakdown, id: &str, weights: Option<ModelWeights>) -> RankedResult {
    RankedResult {
        doc_id: DocId::new(id).expect("corpus ids are valid"),
        doc_idx: idx,
        fraction: breakdown.fraction,
        probability: weights.map(|w| w.probability(breakdown.fraction)),
        breakdown,
    }
}

/// Top-`k` documents for `query`, scoring only what the inverted index and
/// translation table can reach.
///
/// Query terms are visited from highest to lowest IDF. A document first
/// reached while visiting term `j` can only earn credit for terms not yet
/// visited, which bounds its fraction. Once the current k-th best beats that
/// bound the remaining terms are skipped, and since postings are sorted by
/// the tie-break key a single list can also be cut short. Documents with a
/// zero fraction are never returned. Output is identical to [`rank_naive`].
pub fn rank(
    tables: &Tables<'_>,
    query: &Query,
    k: usize,
    variant: Variant,
    weights: Option<ModelWeights>,
) -> Result<Vec<RankedResult>> {
    if k == 0 {
        return Err(Error::param("k must be positive"));
    }
    tables.check(variant)?;
    let prepared = PreparedQuery::new(query, tables.index);
    if prepared.denominator <= 0.0 {
        return Ok(Vec::new());
    }

    // Visit order: IDF descending, then term.
    let mut order: Vec<usize> = (0..prepared.terms.len()).collect();
    order.sort_by(|&a, &b| {
        let (ta, ia) = prepared.terms[a];
        let (tb, ib) = prepared.terms[b];
        ib.total_cmp(&ia).then(ta.cmp(tb))
    });
    let mut position = vec![0; prepared.terms.len()];
    for (pos, &term_i) in order.iter().enumerate() {
        position[term_i] = pos;
    }

    // bound[j]: best fraction for a document touching only terms visited at
    // position j or later, summed in the same order `score` uses.
    let bounds: Vec<f64> = (0..order.len())
        .map(|j| {
            let mut total = 0.0;
            for (i, &(_, idf)) in prepared.terms.iter().enumerate() {
                if position[i] >= j {
                    total += idf;
                }
            }
            total / prepared.denominator
        })
        .collect();

    let term_pos = |t: &Term| {
        prepared
            .terms
            .binary_search_by(|(x, _)| (*x).cmp(t))
            .map(|i| position[i])
            .expect("bigram parts are query terms")
    };

    let corpus = tables.corpus;
    let mut top = TopK::new(k);
    let mut seen: HashSet<DocIdx> = HashSet::new();

    for (j, &term_i) in order.iter().enumerate() {
        let bound = bounds[j];
        if top.excludes_bound(bound) {
            break;
        }
        let (term, _) = prepared.terms[term_i];

        let mut lists: Vec<&[DocIdx]> = vec![tables.index.postings(term.as_str())];
        if variant.uses_translations() {
            if let Some(trmap) = tables.trmap {
                for e in trmap.get(term.as_str()) {
                    if !query.term_set().contains(&e.target) {
                        lists.push(tables.index.postings(e.target.as_str()));
                    }
                }
            }
        }
        if variant.uses_bigrams() {
            for (a, b, joined) in &prepared.bigrams {
                if term_pos(a).min(term_pos(b)) == j {
                    lists.push(tables.index.postings(joined.as_str()));
                }
            }
        }

        for list in lists {
            for &d in list {
                if seen.contains(&d) {
                    continue;
                }
                let (len, id) = tie_key(corpus, d);
                if top.excludes_from(bound, len, id) {
                    break;
                }
                seen.insert(d);
                let breakdown = prepared.score(corpus.doc(d), tables, variant);
                top.offer(Scored {
                    fraction: breakdown.fraction,
                    len,
                    id,
                    idx: d,
                    breakdown,
                });
            }
        }
    }
    Ok(top.into_results(weights))
}

/// Full-scan reference ranking: scores every document in the corpus. Same
/// contract as [`rank`].
pub fn rank_naive(
    tables: &Tables<'_>,
    query: &Query,
    k: usize,
    variant: Variant,
    weights: Option<ModelWeights>,
) -> Result<Vec<RankedResult>> {
    if k == 0 {
        return Err(Error::param("k must be positive"));
    }
    tables.check(variant)?;
    let prepared = PreparedQuery::new(query, tables.index);
    let corpus = tables.corpus;
    let mut all: Vec<Scored<'_>> = (0..corpus.len() as DocIdx)
        .map(|d| {
            let (len, id) = tie_key(corpus, d);
            let breakdown = prepared.score(corpus.doc(d), tables, variant);
            Scored {
                fraction: breakdown.fraction,
                len,
                id,
                idx: d,
                breakdown,
            }
        })
        .filter(|s| s.fraction > 0.0)
        .collect();
    all.sort();
    all.truncate(k);
    Ok(all
        .into_iter()
        .map(|s| to_result(s.idx, s.breakdown, s.id, weights))
        .collect())
}

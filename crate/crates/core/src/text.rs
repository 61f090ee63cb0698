//! Tokenization and the document / query / corpus data model.
//!
//! A term is a maximal run of letters and digits after NFKC compatibility
//! normalization, lowercased. Everything else separates terms. Term *sets*
//! are what scoring works on; the ordered term list is kept only because
//! bigrams depend on adjacency.

use std::borrow::Borrow;
use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

/// A lowercase, non-empty run of letters and digits.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Term(String);

impl Term {
    /// Builds a term from text that is already a single normalized token.
    ///
    /// Returns `None` if `s` would not survive [`tokenize`] unchanged.
    pub fn new(s: &str) -> Option<Term> {
        let mut toks = tokenize(s);
        if toks.len() == 1 && toks[0].as_str() == s {
            toks.pop()
        } else {
            None
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Concatenation with no separator, as used for bigrams.
    pub fn concat(&self, next: &Term) -> Term {
        let mut s = String::with_capacity(self.0.len() + next.0.len());
        s.push_str(&self.0);
        s.push_str(&next.0);
        Term(s)
    }
}

impl Borrow<str> for Term {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl AsRef<str> for Term {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Splits `raw` into terms. Duplicates and order are preserved.
pub fn tokenize(raw: &str) -> Vec<Term> {
    let mut terms = Vec::new();
    let mut cur = String::new();
    for ch in raw.nfkc() {
        if ch.is_alphanumeric() {
            cur.extend(ch.to_lowercase().filter(|c| c.is_alphanumeric()));
        } else if !cur.is_empty() {
            push_term(&mut terms, &mut cur);
        }
    }
    if !cur.is_empty() {
        push_term(&mut terms, &mut cur);
    }
    terms
}

fn push_term(terms: &mut Vec<Term>, cur: &mut String) {
    // Lowercasing can leave a sequence that is not NFKC-stable; renormalize so
    // tokenizing a joined token list is a fixed point.
    let normalized: String = cur.nfkc().filter(|c| c.is_alphanumeric()).collect();
    cur.clear();
    if !normalized.is_empty() {
        terms.push(Term(normalized));
    }
}

/// Concatenations of every pair of consecutive terms, in order.
pub fn bigrams(terms: &[Term]) -> Vec<Term> {
    terms.windows(2).map(|w| w[0].concat(&w[1])).collect()
}

/// Space-joined term sequence; the canonical normalized form of a name.
pub fn join_terms(terms: &[Term]) -> String {
    let mut out = String::new();
    for (i, t) in terms.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(t.as_str());
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DocId(String);

impl DocId {
    pub fn new(id: impl Into<String>) -> Result<DocId> {
        let id = id.into();
        if id.is_empty() || id.contains(['\t', ',', '\n', '\r']) {
            return Err(Error::InvalidId(id));
        }
        Ok(DocId(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl Borrow<str> for DocId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for DocId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A tokenized name. Shared by [`Document`] (with an id) and queries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    raw: String,
    terms: Vec<Term>,
    term_set: BTreeSet<Term>,
}

impl Query {
    pub fn new(raw: impl Into<String>) -> Query {
        let raw = raw.into();
        let terms = tokenize(&raw);
        Query::from_parts(raw, terms)
    }

    pub fn from_terms(terms: Vec<Term>) -> Query {
        Query::from_parts(join_terms(&terms), terms)
    }

    fn from_parts(raw: String, terms: Vec<Term>) -> Query {
        let term_set = terms.iter().cloned().collect();
        Query { raw, terms, term_set }
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn term_set(&self) -> &BTreeSet<Term> {
        &self.term_set
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    id: DocId,
    name: Query,
}

impl Document {
    pub fn new(id: DocId, raw: impl Into<String>) -> Document {
        Document {
            id,
            name: Query::new(raw),
        }
    }

    pub fn id(&self) -> &DocId {
        &self.id
    }

    pub fn raw(&self) -> &str {
        self.name.raw()
    }

    pub fn terms(&self) -> &[Term] {
        self.name.terms()
    }

    pub fn term_set(&self) -> &BTreeSet<Term> {
        self.name.term_set()
    }

    pub fn contains(&self, term: &str) -> bool {
        self.name.term_set.contains(term)
    }

    /// The document's name viewed as a query.
    pub fn as_query(&self) -> &Query {
        &self.name
    }
}

/// Position of a document inside its [`Corpus`].
pub type DocIdx = u32;

/// An id-keyed collection of documents. Insertion order is kept and defines
/// [`DocIdx`] ordinals.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    docs: Vec<Document>,
    by_id: HashMap<DocId, DocIdx>,
}

impl Corpus {
    pub fn new() -> Corpus {
        Corpus::default()
    }

    pub fn from_records<I, S1, S2>(records: I) -> Result<Corpus>
    where
        I: IntoIterator<Item = (S1, S2)>,
        S1: Into<String>,
        S2: Into<String>,
    {
        let mut corpus = Corpus::new();
        for (id, raw) in records {
            corpus.insert(DocId::new(id)?, raw)?;
        }
        Ok(corpus)
    }

    pub fn insert(&mut self, id: DocId, raw: impl Into<String>) -> Result<DocIdx> {
        if self.by_id.contains_key(&id) {
            return Err(Error::DuplicateId(id.0));
        }
        let idx = DocIdx::try_from(self.docs.len()).map_err(|_| Error::param("corpus exceeds u32::MAX documents"))?;
        self.by_id.insert(id.clone(), idx);
        self.docs.push(Document::new(id, raw));
        Ok(idx)
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn documents(&self) -> &[Document] {
        &self.docs
    }

    pub fn doc(&self, idx: DocIdx) -> &Document {
        &self.docs[idx as usize]
    }

    pub fn index_of(&self, id: &str) -> Option<DocIdx> {
        self.by_id.get(id).copied()
    }

    pub fn get(&self, id: &str) -> Option<&Document> {
        self.index_of(id).map(|i| self.doc(i))
    }

    /// Reads `id<TAB>raw_name` lines. Blank lines are ignored.
    pub fn read_tsv<R: BufRead>(reader: R, origin: &str) -> Result<Corpus> {
        let mut corpus = Corpus::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let (id, raw) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(origin, lineno + 1, "expected `id<TAB>name`"))?;
            let id = DocId::new(id).map_err(|e| Error::parse(origin, lineno + 1, e.to_string()))?;
            corpus
                .insert(id, raw)
                .map_err(|e| Error::parse(origin, lineno + 1, e.to_string()))?;
        }
        Ok(corpus)
    }

    pub fn write_tsv<W: Write>(&self, mut out: W) -> Result<()> {
        for d in &self.docs {
            writeln!(out, "{}\t{}", d.id(), d.raw())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarity::Positive => "positive",
            Polarity::Negative => "negative",
        })
    }
}

impl FromStr for Polarity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "positive" | "pos" | "1" => Ok(Polarity::Positive),
            "negative" | "neg" | "0" => Ok(Polarity::Negative),
            other => Err(Error::param(format!("unknown polarity `{other}`"))),
        }
    }
}

/// A ⟨query, document⟩ pair with its label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledPair {
    pub query: Query,
    pub doc_id: DocId,
    pub polarity: Polarity,
}

impl LabeledPair {
    pub fn positive(query: Query, doc_id: DocId) -> LabeledPair {
        LabeledPair {
            query,
            doc_id,
            polarity: Polarity::Positive,
        }
    }

    pub fn negative(query: Query, doc_id: DocId) -> LabeledPair {
        LabeledPair {
            query,
            doc_id,
            polarity: Polarity::Negative,
        }
    }

    pub fn is_positive(&self) -> bool {
        self.polarity == Polarity::Positive
    }
}

/// Reads `query<TAB>doc_id<TAB>polarity` lines. A missing polarity column
/// means positive; any further columns are ignored.
pub fn read_labeled_pairs<R: BufRead>(reader: R, origin: &str) -> Result<Vec<LabeledPair>> {
    let mut pairs = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut cols = line.split('\t');
        let query = cols.next().unwrap_or_default();
        let doc_id = cols
            .next()
            .ok_or_else(|| Error::parse(origin, lineno + 1, "expected `query<TAB>doc_id`"))?;
        let polarity = match cols.next() {
            Some(p) => p
                .parse()
                .map_err(|e: Error| Error::parse(origin, lineno + 1, e.to_string()))?,
            None => Polarity::Positive,
        };
        let doc_id = DocId::new(doc_id).map_err(|e| Error::parse(origin, lineno + 1, e.to_string()))?;
        pairs.push(LabeledPair {
            query: Query::new(query),
            doc_id,
            polarity,
        });
    }
    Ok(pairs)
}

pub fn write_labeled_pairs<W: Write>(mut out: W, pairs: &[LabeledPair]) -> Result<()> {
    for p in pairs {
        writeln!(out, "{}\t{}\t{}", sanitize(p.query.raw()), p.doc_id, p.polarity)?;
    }
    Ok(())
}

/// Replaces tabs and line breaks so free text fits in one TSV cell.
pub fn sanitize(s: &str) -> String {
    s.replace(['\t', '\n', '\r'], " ")
}

//! Inverted index over a corpus: postings, document frequencies, IDF and
//! candidate generation.
//!
//! Postings are sorted by the ranking tie-break key (term count ascending,
//! then id ascending) rather than by ordinal. The ranker relies on this to stop
//! walking a list early once nothing further down can enter the top k.

use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::text::{Corpus, DocIdx, Query, Term};
use crate::translation::TrMap;

const HEADER_MAGIC: &str = "#namelink-index";
const FORMAT_VERSION: u32 = 1;

/// Immutable inverted index for one corpus version.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexSnapshot {
    postings: HashMap<Term, Vec<DocIdx>>,
    n: usize,
    version: u64,
}

impl IndexSnapshot {
    pub fn build(corpus: &Corpus) -> Result<IndexSnapshot> {
        IndexSnapshot::build_versioned(corpus, 1)
    }

    pub fn build_versioned(corpus: &Corpus, version: u64) -> Result<IndexSnapshot> {
        if corpus.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut postings: HashMap<Term, Vec<DocIdx>> = HashMap::new();
        for (i, doc) in corpus.documents().iter().enumerate() {
            for t in doc.term_set() {
                postings.entry(t.clone()).or_default().push(i as DocIdx);
            }
        }
        for list in postings.values_mut() {
            sort_postings(list, corpus);
        }
        Ok(IndexSnapshot {
            postings,
            n: corpus.len(),
            version,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn num_terms(&self) -> usize {
        self.postings.len()
    }

    pub fn df(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    /// Documents containing `term`, in tie-break order.
    pub fn postings(&self, term: &str) -> &[DocIdx] {
        self.postings.get(term).map_or(&[], Vec::as_slice)
    }

    pub fn contains_term(&self, term: &str) -> bool {
        self.postings.contains_key(term)
    }

    /// `ln(n / df)`, with unseen terms treated as `df = 1`.
    pub fn idf(&self, term: &str) -> f64 {
        let df = self.df(term).max(1);
        (self.n as f64 / df as f64).ln()
    }

    /// Sum of IDF over the query's unique terms, in term order.
    pub fn sum_idf(&self, query: &Query) -> f64 {
        query.term_set().iter().map(|t| self.idf(t.as_str())).sum()
    }

    /// Every document that could receive a nonzero score fraction under any
    /// variant: shared terms, translation targets, and query bigrams.
    pub fn candidates(&self, trmap: Option<&TrMap>, query: &Query) -> BTreeSet<DocIdx> {
        let mut out = BTreeSet::new();
        for t in query.term_set() {
            out.extend(self.postings(t.as_str()));
            if let Some(tr) = trmap {
                for e in tr.get(t.as_str()) {
                    if !query.term_set().contains(&e.target) {
                        out.extend(self.postings(e.target.as_str()));
                    }
                }
            }
        }
        for w in query.terms().windows(2) {
            out.extend(self.postings(w[0].concat(&w[1]).as_str()));
        }
        out
    }

    /// Writes the versioned header followed by `term<TAB>id,id,...` lines in
    /// term order.
    pub fn write_to<W: Write>(&self, corpus: &Corpus, mut out: W) -> Result<()> {
        writeln!(
            out,
            "{HEADER_MAGIC}\tv{FORMAT_VERSION}\tn={}\tversion={}",
            self.n, self.version
        )?;
        let mut terms: Vec<&Term> = self.postings.keys().collect();
        terms.sort();
        for t in terms {
            write!(out, "{t}\t")?;
            for (i, &d) in self.postings[t].iter().enumerate() {
                if i > 0 {
                    out.write_all(b",")?;
                }
                write!(out, "{}", corpus.doc(d).id())?;
            }
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Loads a snapshot written by [`IndexSnapshot::write_to`]. Ids are
    /// resolved against `corpus`, which must be the corpus the index was
    /// built from.
    pub fn read_from<R: BufRead>(reader: R, corpus: &Corpus, origin: &str) -> Result<IndexSnapshot> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .transpose()?
            .ok_or_else(|| Error::parse(origin, 1, "missing header"))?;
        let (n, version) = parse_header(&header).ok_or_else(|| {
            Error::parse(
                origin,
                1,
                format!("bad header, expected `{HEADER_MAGIC}\\tv{FORMAT_VERSION}\\tn=N\\tversion=V`"),
            )
        })?;
        if n != corpus.len() {
            return Err(Error::parse(
                origin,
                1,
                format!("index has n={n} but corpus has {} documents", corpus.len()),
            ));
        }
        let mut postings = HashMap::new();
        for (i, line) in lines.enumerate() {
            let lineno = i + 2;
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let (term, ids) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(origin, lineno, "expected `term<TAB>ids`"))?;
            let term = Term::new(term)
                .ok_or_else(|| Error::parse(origin, lineno, format!("`{term}` is not a normalized term")))?;
            let mut list = Vec::new();
            for id in ids.split(',') {
                let idx = corpus
                    .index_of(id)
                    .ok_or_else(|| Error::parse(origin, lineno, format!("unknown document id `{id}`")))?;
                list.push(idx);
            }
            sort_postings(&mut list, corpus);
            let before = list.len();
            list.dedup();
            if list.len() != before {
                return Err(Error::parse(origin, lineno, "duplicate id in postings"));
            }
            if postings.insert(term, list).is_some() {
                return Err(Error::parse(origin, lineno, "duplicate term"));
            }
        }
        Ok(IndexSnapshot { postings, n, version })
    }
}

fn parse_header(line: &str) -> Option<(usize, u64)> {
    let mut cols = line.split('\t');
    if cols.next()? != HEADER_MAGIC || cols.next()? != format!("v{FORMAT_VERSION}") {
        return None;
    }
    let n = cols.next()?.strip_prefix("n=")?.parse().ok()?;
    let version = cols.next()?.strip_prefix("version=")?.parse().ok()?;
    Some((n, version))
}

pub(crate) fn tie_key(corpus: &Corpus, idx: DocIdx) -> (usize, &str) {
    let d = corpus.doc(idx);
    (d.terms().len(), d.id().as_str())
}

fn sort_postings(list: &mut [DocIdx], corpus: &Corpus) {
    list.sort_by(|&a, &b| tie_key(corpus, a).cmp(&tie_key(corpus, b)));
}

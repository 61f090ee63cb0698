//! String-similarity rankers used as comparison points.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::{tie_key, IndexSnapshot};
use crate::text::{join_terms, Corpus, DocId, DocIdx, Query};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Exact,
    SharedTerms,
    Levenshtein,
    JaroWinkler,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 4] = [
        BaselineKind::Exact,
        BaselineKind::SharedTerms,
        BaselineKind::Levenshtein,
        BaselineKind::JaroWinkler,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BaselineKind::Exact => "exact",
            BaselineKind::SharedTerms => "shared_terms",
            BaselineKind::Levenshtein => "levenshtein",
            BaselineKind::JaroWinkler => "jaro_winkler",
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('-', "_");
        BaselineKind::ALL
            .into_iter()
            .find(|k| k.as_str() == norm)
            .ok_or_else(|| Error::param(format!("unknown baseline `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineResult {
    pub doc_id: DocId,
    #[serde(skip)]
    pub doc_idx: DocIdx,
    pub score: f64,
}

pub fn levenshtein(a: &str, b: &str) -> usize {
    strsim::levenshtein(a, b)
}

/// Jaro similarity plus the standard prefix bonus (prefix ≤ 4, scale 0.1).
pub fn jaro_winkler(a: &str, b: &str) -> f64 {
    strsim::jaro_winkler(a, b)
}

/// Documents sharing at least one term with the query.
fn shared_term_candidates(index: &IndexSnapshot, query: &Query) -> Vec<DocIdx> {
    let mut out: Vec<DocIdx> = query
        .term_set()
        .iter()
        .flat_map(|t| index.postings(t.as_str()).iter().copied())
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

pub fn rank_baseline(
    kind: BaselineKind,
    query: &Query,
    k: usize,
    corpus: &Corpus,
    index: &IndexSnapshot,
) -> Result<Vec<BaselineResult>> {
    if k == 0 {
        return Err(Error::param("k must be positive"));
    }
    let joined = join_terms(query.terms());
    let candidates = shared_term_candidates(index, query);
    let scored: Vec<(DocIdx, f64)> = match kind {
        BaselineKind::Exact => candidates
            .into_iter()
            .filter(|&d| corpus.doc(d).terms() == query.terms())
            .map(|d| (d, 1.0))
            .collect(),
        BaselineKind::SharedTerms => candidates
            .into_iter()
            .map(|d| {
                let common = corpus.doc(d).term_set().intersection(query.term_set()).count();
                (d, common as f64)
            })
            .collect(),
        BaselineKind::Levenshtein => candidates
            .into_iter()
            .map(|d| (d, -(levenshtein(&joined, &join_terms(corpus.doc(d).terms())) as f64)))
            .collect(),
        BaselineKind::JaroWinkler => candidates
            .into_iter()
            .map(|d| (d, jaro_winkler(&joined, &join_terms(corpus.doc(d).terms()))))
            .collect(),
    };
    let mut scored = scored;
    scored.sort_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then_with(|| tie_key(corpus, a.0).cmp(&tie_key(corpus, b.0)))
    });
    scored.truncate(k);
    Ok(scored
        .into_iter()
        .map(|(d, score)| BaselineResult {
            doc_id: corpus.doc(d).id().clone(),
            doc_idx: d,
            score,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(records: &[(&str, &str)]) -> (Corpus, IndexSnapshot) {
        let c = Corpus::from_records(records.iter().copied()).unwrap();
        let i = IndexSnapshot::build(&c).unwrap();
        (c, i)
    }

    fn ids(r: &[BaselineResult]) -> Vec<&str> {
        r.iter().map(|x| x.doc_id.as_str()).collect()
    }

    #[test]
    fn exact_returns_only_identical_names() {
        let (c, i) = setup(&[("d1", "Acme Pizza"), ("d2", "acme pizza house"), ("d3", "pizza acme")]);
        let r = rank_baseline(BaselineKind::Exact, &Query::new("acme pizza"), 10, &c, &i).unwrap();
        assert_eq!(ids(&r), ["d1"]);
        let none = rank_baseline(BaselineKind::Exact, &Query::new("acme"), 10, &c, &i).unwrap();
        assert!(none.is_empty());
    }

    #[test]
    fn shared_terms_counts_and_tie_break() {
        let (c, i) = setup(&[
            ("d1", "acme pizza house"),
            ("d2", "acme pizza"),
            ("d3", "best plumbing"),
        ]);
        let r = rank_baseline(BaselineKind::SharedTerms, &Query::new("pizza acme"), 10, &c, &i).unwrap();
        assert_eq!(ids(&r), ["d2", "d1"]);
        assert_eq!(r[0].score, 2.0);
    }

    #[test]
    fn levenshtein_prefers_the_wrong_document() {
        assert_eq!(levenshtein("kitten", "sitting"), 3);
        assert_eq!(levenshtein("icdm association", "nips association"), 4);
        assert_eq!(levenshtein("icdm association", "icdm"), 12);
        let (c, i) = setup(&[("a", "icdm"), ("b", "nips association")]);
        let r = rank_baseline(BaselineKind::Levenshtein, &Query::new("icdm association"), 2, &c, &i).unwrap();
        assert_eq!(ids(&r), ["b", "a"]);
        assert_eq!(r[0].score, -4.0);
    }

    #[test]
    fn jaro_winkler_bounds() {
        assert_eq!(jaro_winkler("martha", "martha"), 1.0);
        assert!((jaro_winkler("martha", "marhta") - 0.9611).abs() < 1e-4);
        assert!((jaro_winkler("dwayne", "duane") - 0.84).abs() < 1e-4);
    }

    #[test]
    fn k_zero_rejected() {
        let (c, i) = setup(&[("a", "x")]);
        assert!(rank_baseline(BaselineKind::Exact, &Query::new("x"), 0, &c, &i).is_err());
    }

    #[test]
    fn kind_parsing() {
        for k in BaselineKind::ALL {
            assert_eq!(k.as_str().parse::<BaselineKind>().unwrap(), k);
        }
        assert_eq!(
            "jaro-winkler".parse::<BaselineKind>().unwrap(),
            BaselineKind::JaroWinkler
        );
        assert!("bm25".parse::<BaselineKind>().is_err());
    }
}

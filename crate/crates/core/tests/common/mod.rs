#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use namelink_core::{
    compute_max_tr, inject_bigrams, Corpus, IndexSnapshot, MaxTrTable, Origin, Query, Tables, Term, TrMap, Variant,
};
use proptest::prelude::*;

/// Small vocabulary with plenty of overlap, concatenations and translation
/// candidates.
pub const VOCAB: [&str; 16] = [
    "drop",
    "out",
    "dropout",
    "acme",
    "pizza",
    "best",
    "house",
    "intl",
    "international",
    "center",
    "centre",
    "co",
    "company",
    "a",
    "b",
    "ab",
];

pub fn name(ixs: &[usize]) -> String {
    ixs.iter().map(|&i| VOCAB[i]).collect::<Vec<_>>().join(" ")
}

pub fn t(s: &str) -> Term {
    Term::new(s).unwrap()
}

#[derive(Debug, Clone)]
pub struct World {
    pub corpus: Corpus,
    pub index: IndexSnapshot,
    pub trmap: TrMap,
    pub maxtr: MaxTrTable,
}

impl World {
    pub fn new(names: &[Vec<usize>], learned: &[(usize, usize, f64)]) -> World {
        let corpus =
            Corpus::from_records(names.iter().enumerate().map(|(i, n)| (format!("d{i:03}"), name(n)))).unwrap();
        World::from_corpus(corpus, learned)
    }

    pub fn from_corpus(corpus: Corpus, learned: &[(usize, usize, f64)]) -> World {
        let index = IndexSnapshot::build(&corpus).unwrap();
        let mut seen = BTreeSet::new();
        let mut rows = Vec::new();
        for &(a, b, p) in learned {
            if a == b || !seen.insert((a.min(b), a.max(b))) {
                continue;
            }
            rows.push((t(VOCAB[a]), t(VOCAB[b]), p, Origin::Learned));
            rows.push((t(VOCAB[b]), t(VOCAB[a]), p, Origin::Learned));
        }
        let trmap = inject_bigrams(&TrMap::from_entries(rows).unwrap(), &corpus);
        let maxtr = compute_max_tr(&trmap, &index);
        World {
            corpus,
            index,
            trmap,
            maxtr,
        }
    }

    pub fn tables(&self) -> Tables<'_> {
        Tables {
            corpus: &self.corpus,
            index: &self.index,
            trmap: Some(&self.trmap),
            maxtr: Some(&self.maxtr),
        }
    }
}

pub fn names_strategy(max_docs: usize) -> impl Strategy<Value = Vec<Vec<usize>>> {
    prop::collection::vec(prop::collection::vec(0..VOCAB.len(), 1..5), 1..max_docs)
}

pub fn learned_strategy() -> impl Strategy<Value = Vec<(usize, usize, f64)>> {
    prop::collection::vec((0..VOCAB.len(), 0..VOCAB.len(), 0.7f64..=1.0), 0..8)
}

pub fn query_strategy() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0..VOCAB.len(), 0..5)
}

pub fn variant_strategy() -> impl Strategy<Value = Variant> {
    prop::sample::select(Variant::ALL.to_vec())
}

/// Straight transcription of the scoring rule, sharing nothing with the
/// library beyond the tokenizer and the input tables: df by scanning the
/// corpus, MaxTr by scanning every document.
pub fn oracle_fraction(w: &World, query: &Query, doc: &BTreeSet<Term>, variant: Variant) -> f64 {
    let n = w.corpus.len() as f64;
    let df = |term: &Term| {
        w.corpus
            .documents()
            .iter()
            .filter(|d| d.term_set().contains(term))
            .count()
            .max(1) as f64
    };
    let idf = |term: &Term| (n / df(term)).ln();
    let qset = query.term_set();
    let denominator: f64 = qset.iter().map(idf).sum();
    if denominator == 0.0 {
        return 0.0;
    }

    let mut has: BTreeSet<Term> = doc.clone();
    if variant == Variant::TfidfTrBg {
        for pair in query.terms().windows(2) {
            let joined = Term::new(&format!("{}{}", pair[0], pair[1])).unwrap();
            if !doc.contains(&pair[0]) && !doc.contains(&pair[1]) && doc.contains(&joined) {
                has.insert(pair[0].clone());
                has.insert(pair[1].clone());
            }
        }
    }

    let tr: BTreeMap<(String, String), f64> = w
        .trmap
        .rows()
        .into_iter()
        .map(|(s, e)| ((s.to_string(), e.target.to_string()), e.prob))
        .collect();
    let max_tr = |src: &Term| {
        w.corpus
            .documents()
            .iter()
            .map(|d| {
                d.term_set()
                    .iter()
                    .filter(|x| tr.contains_key(&(src.to_string(), x.to_string())))
                    .count()
            })
            .max()
            .unwrap_or(0)
            .max(1) as f64
    };

    let mut total = 0.0;
    for q in qset {
        let i = idf(q);
        if has.contains(q) {
            total += i;
        } else if variant != Variant::Tfidf {
            let mut credit = 0.0;
            for d in has.difference(qset) {
                if let Some(p) = tr.get(&(q.to_string(), d.to_string())) {
                    credit += p / max_tr(q) * i;
                }
            }
            total += credit.min(i);
        }
    }
    total / denominator
}

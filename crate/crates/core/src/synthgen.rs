//! Synthetic duplicate generation: perturbed copies of corpus names used as
//! positive labeled pairs.

use std::collections::HashMap;
use std::io::BufRead;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, Zipf};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::IndexSnapshot;
use crate::seed::derive_seed;
use crate::text::{tokenize, Corpus, DocId, Document, LabeledPair, Query, Term};

/// Characters a typo may introduce.
pub const TYPO_ALPHABET: &[u8] = b"abcdefghijklmnopqrstuvwxyz0123456789";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenParams {
    pub p_change: f64,
    pub p_abbreviation: f64,
    pub p_some: f64,
    pub p_equivalence: f64,
    pub p_space: f64,
    pub p_order: f64,
    pub p_typo: f64,
    pub mu: f64,
    pub sigma: f64,
    pub k_max: u32,
    pub seed: u64,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            p_change: 0.5,
            p_abbreviation: 0.1,
            p_some: 0.3,
            p_equivalence: 0.2,
            p_space: 0.1,
            p_order: 0.1,
            p_typo: 0.05,
            mu: 2.0,
            sigma: 1.0,
            k_max: 20,
            seed: 0,
        }
    }
}

impl GenParams {
    pub const PROBABILITY_NAMES: [&'static str; 7] = [
        "p_change",
        "p_abbreviation",
        "p_some",
        "p_equivalence",
        "p_space",
        "p_order",
        "p_typo",
    ];

    pub fn validate(&self) -> Result<()> {
        for name in Self::PROBABILITY_NAMES {
            let p = self.get(name).expect("known name");
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::param(format!("{name}={p} is not in [0, 1]")));
            }
        }
        if !self.mu.is_finite() || !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::param("mu must be finite and sigma >= 0"));
        }
        if self.k_max == 0 {
            return Err(Error::param("k_max must be positive"));
        }
        Ok(())
    }

    /// Reads a numeric parameter by name.
    pub fn get(&self, name: &str) -> Option<f64> {
        Some(match name {
            "p_change" => self.p_change,
            "p_abbreviation" => self.p_abbreviation,
            "p_some" => self.p_some,
            "p_equivalence" => self.p_equivalence,
            "p_space" => self.p_space,
            "p_order" => self.p_order,
            "p_typo" => self.p_typo,
            "mu" => self.mu,
            "sigma" => self.sigma,
            _ => return None,
        })
    }

    /// Returns a copy with the named numeric parameter replaced.
    pub fn with(&self, name: &str, value: f64) -> Result<GenParams> {
        let mut p = *self;
        let slot = match name {
            "p_change" => &mut p.p_change,
            "p_abbreviation" => &mut p.p_abbreviation,
            "p_some" => &mut p.p_some,
            "p_equivalence" => &mut p.p_equivalence,
            "p_space" => &mut p.p_space,
            "p_order" => &mut p.p_order,
            "p_typo" => &mut p.p_typo,
            "mu" => &mut p.mu,
            "sigma" => &mut p.sigma,
            _ => return Err(Error::param(format!("unknown generator parameter `{name}`"))),
        };
        *slot = value;
        p.validate()?;
        Ok(p)
    }
}

/// Groups of interchangeable spellings, e.g. `center / centre / ctr`.
#[derive(Debug, Clone, Default)]
pub struct EquivalenceTable {
    groups: Vec<Vec<Term>>,
    group_of: HashMap<Term, usize>,
}

impl EquivalenceTable {
    pub fn new() -> EquivalenceTable {
        EquivalenceTable::default()
    }

    pub fn from_groups<I, G, S>(groups: I) -> Result<EquivalenceTable>
    where
        I: IntoIterator<Item = G>,
        G: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut table = EquivalenceTable::new();
        for g in groups {
            let mut members = Vec::new();
            for s in g {
                let s = s.as_ref();
                let mut toks = tokenize(s);
                if toks.len() != 1 {
                    return Err(Error::param(format!(
                        "equivalence member `{s}` must be exactly one term"
                    )));
                }
                let t = toks.pop().expect("one term");
                if !members.contains(&t) {
                    members.push(t);
                }
            }
            table.push_group(members)?;
        }
        Ok(table)
    }

    fn push_group(&mut self, members: Vec<Term>) -> Result<()> {
        if members.len() < 2 {
            return Err(Error::param(format!(
                "equivalence group {:?} needs at least two distinct terms",
                members.iter().map(Term::as_str).collect::<Vec<_>>()
            )));
        }
        let gi = self.groups.len();
        for t in &members {
            if self.group_of.insert(t.clone(), gi).is_some() {
                return Err(Error::param(format!("term `{t}` appears in two equivalence groups")));
            }
        }
        self.groups.push(members);
        Ok(())
    }

    /// One group per line, members separated by tabs. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn read_tsv<R: BufRead>(reader: R, origin: &str) -> Result<EquivalenceTable> {
        let mut table = EquivalenceTable::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let one = EquivalenceTable::from_groups([line.split('\t').filter(|s| !s.trim().is_empty())])
                .map_err(|e| Error::parse(origin, i + 1, e.to_string()))?;
            let members = one.groups.into_iter().next().expect("one group");
            table
                .push_group(members)
                .map_err(|e| Error::parse(origin, i + 1, e.to_string()))?;
        }
        Ok(table)
    }

    pub fn groups(&self) -> &[Vec<Term>] {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// The other members of `term`'s group.
    pub fn alternatives<'a>(&'a self, term: &'a str) -> impl Iterator<Item = &'a Term> + 'a {
        let group = self
            .group_of
            .get(term)
            .map(|&g| self.groups[g].as_slice())
            .unwrap_or(&[]);
        group.iter().filter(move |t| t.as_str() != term)
    }

    pub fn contains(&self, term: &str) -> bool {
        self.group_of.contains_key(term)
    }
}

/// First letter of every term, concatenated.
pub fn abbreviate(terms: &[Term]) -> Vec<Term> {
    let s: String = terms.iter().filter_map(|t| t.as_str().chars().next()).collect();
    tokenize(&s)
}

/// Joins terms `i` and `i + 1`.
pub fn remove_space(terms: &mut Vec<Term>, i: usize) {
    let joined = terms[i].concat(&terms[i + 1]);
    terms.splice(i..i + 2, [joined]);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TypoKind {
    Insert,
    Delete,
    Substitute,
    Transpose,
}

/// Applies one character edit at `pos` (a char position). `ch` is used by
/// insert and substitute.
pub fn apply_typo(term: &Term, kind: TypoKind, pos: usize, ch: char) -> Term {
    let mut cs: Vec<char> = term.as_str().chars().collect();
    match kind {
        TypoKind::Insert => cs.insert(pos, ch),
        TypoKind::Delete => {
            cs.remove(pos);
        }
        TypoKind::Substitute => cs[pos] = ch,
        TypoKind::Transpose => cs.swap(pos, pos + 1),
    }
    let s: String = cs.into_iter().collect();
    Term::new(&s).unwrap_or_else(|| term.clone())
}

fn random_typo<R: Rng>(term: &Term, rng: &mut R) -> Term {
    let len = term.as_str().chars().count();
    let mut kinds = vec![TypoKind::Insert, TypoKind::Substitute];
    if len > 1 {
        kinds.push(TypoKind::Delete);
        kinds.push(TypoKind::Transpose);
    }
    let kind = kinds[rng.random_range(0..kinds.len())];
    let pick = |rng: &mut R| TYPO_ALPHABET[rng.random_range(0..TYPO_ALPHABET.len())] as char;
    match kind {
        TypoKind::Insert => {
            let pos = rng.random_range(0..=len);
            apply_typo(term, kind, pos, pick(rng))
        }
        TypoKind::Delete => apply_typo(term, kind, rng.random_range(0..len), ' '),
        TypoKind::Substitute => {
            let pos = rng.random_range(0..len);
            let old = term.as_str().chars().nth(pos).expect("in range");
            let ch = loop {
                let c = pick(rng);
                if c != old {
                    break c;
                }
            };
            apply_typo(term, kind, pos, ch)
        }
        TypoKind::Transpose => apply_typo(term, kind, rng.random_range(0..len - 1), ' '),
    }
}

/// One duplicate of `name`.
///
/// Probabilities are drawn in a fixed order whether or not the step applies,
/// so enabling one change never shifts the random stream of the others.
pub fn perturb<R: Rng>(
    name: &Document,
    params: &GenParams,
    equiv: &EquivalenceTable,
    index: &IndexSnapshot,
    rng: &mut R,
) -> Query {
    if !rng.random_bool(params.p_change) {
        return name.as_query().clone();
    }
    let mut terms = name.terms().to_vec();

    if rng.random_bool(params.p_abbreviation) {
        terms = abbreviate(&terms);
    } else if rng.random_bool(params.p_some) && terms.len() >= 2 {
        let weights: Vec<f64> = terms.iter().map(|t| index.df(t.as_str()).max(1) as f64).collect();
        let dist = WeightedIndex::new(&weights).expect("positive weights");
        terms.remove(dist.sample(rng));
    }

    if rng.random_bool(params.p_equivalence) {
        let eligible: Vec<usize> = (0..terms.len())
            .filter(|&i| equiv.contains(terms[i].as_str()))
            .collect();
        if !eligible.is_empty() {
            let i = eligible[rng.random_range(0..eligible.len())];
            let alts: Vec<&Term> = equiv.alternatives(terms[i].as_str()).collect();
            terms[i] = alts[rng.random_range(0..alts.len())].clone();
        }
    }

    if rng.random_bool(params.p_space) && terms.len() >= 2 {
        let i = rng.random_range(0..terms.len() - 1);
        remove_space(&mut terms, i);
    }

    if rng.random_bool(params.p_order) && terms.len() >= 2 {
        let i = rng.random_range(0..terms.len());
        let mut j = rng.random_range(0..terms.len() - 1);
        if j >= i {
            j += 1;
        }
        terms.swap(i, j);
    }

    if rng.random_bool(params.p_typo) && !terms.is_empty() {
        let i = rng.random_range(0..terms.len());
        terms[i] = random_typo(&terms[i], rng);
    }

    Query::from_terms(terms)
}

/// Number of duplicates drawn for one name.
fn draw_k<R: Rng>(params: &GenParams, rng: &mut R) -> u32 {
    let normal = Normal::new(params.mu, params.sigma).expect("validated");
    let k = normal.sample(rng).round();
    k.clamp(0.0, params.k_max as f64) as u32
}

/// Positive pairs for every corpus name, in corpus order. Name `i` draws its
/// duplicate count from seed path `(seed, i)` and duplicate `j` from
/// `(seed, i, j)`.
pub fn generate_pairs(
    corpus: &Corpus,
    index: &IndexSnapshot,
    params: &GenParams,
    equiv: &EquivalenceTable,
) -> Result<Vec<LabeledPair>> {
    params.validate()?;
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let per_name: Vec<Vec<LabeledPair>> = corpus
        .documents()
        .par_iter()
        .enumerate()
        .map(|(i, doc)| {
            let mut krng = ChaCha8Rng::seed_from_u64(derive_seed(params.seed, &[i as u64]));
            let k = draw_k(params, &mut krng);
            (0..k)
                .map(|j| {
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(params.seed, &[i as u64, j as u64 + 1]));
                    LabeledPair::positive(perturb(doc, params, equiv, index, &mut rng), doc.id().clone())
                })
                .collect()
        })
        .collect();
    Ok(per_name.into_iter().flatten().collect())
}

const SYLLABLES: [&str; 40] = [
    "ba", "be", "bi", "bo", "ca", "ce", "co", "da", "de", "di", "do", "fa", "fe", "ga", "go", "ha", "ka", "ke", "ki",
    "la", "le", "li", "lo", "ma", "me", "mi", "mo", "na", "ne", "no", "pa", "pe", "ra", "re", "ri", "ro", "sa", "se",
    "ta", "to",
];

/// A distinct pronounceable word for every rank.
fn pseudo_word(rank: u64) -> String {
    let mut n = rank;
    let mut s = String::new();
    loop {
        s.push_str(SYLLABLES[(n % 40) as usize]);
        n /= 40;
        if n == 0 {
            break;
        }
        n -= 1;
    }
    if s.len() < 4 {
        s.push('n');
    }
    s
}

/// A corpus of `n` names of one to five terms, each term drawn from a
/// Zipf(1.0) distribution over `vocab` pseudo-words. For a fixed seed and
/// vocabulary, a smaller corpus is a prefix of a larger one.
pub fn synthetic_corpus(n: usize, vocab: usize, seed: u64) -> Result<Corpus> {
    if vocab == 0 {
        return Err(Error::param("vocabulary must be non-empty"));
    }
    let zipf = Zipf::new(vocab as f64, 1.0).map_err(|e| Error::param(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut corpus = Corpus::new();
    for i in 0..n {
        let len = rng.random_range(1..=5);
        let words: Vec<String> = (0..len)
            .map(|_| pseudo_word(zipf.sample(&mut rng) as u64 - 1))
            .collect();
        corpus.insert(DocId::new(format!("s{i:07}"))?, words.join(" "))?;
    }
    Ok(corpus)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strs(q: &Query) -> Vec<&str> {
        q.terms().iter().map(Term::as_str).collect()
    }

    fn terms(s: &str) -> Vec<Term> {
        tokenize(s)
    }

    fn none() -> GenParams {
        GenParams {
            p_change: 1.0,
            p_abbreviation: 0.0,
            p_some: 0.0,
            p_equivalence: 0.0,
            p_space: 0.0,
            p_order: 0.0,
            p_typo: 0.0,
            ..GenParams::default()
        }
    }

    fn single(name: &str) -> (Corpus, IndexSnapshot) {
        let c = Corpus::from_records([("d", name)]).unwrap();
        let i = IndexSnapshot::build(&c).unwrap();
        (c, i)
    }

    #[test]
    fn forced_abbreviation() {
        assert_eq!(
            Query::from_terms(abbreviate(&terms("university of british columbia"))).raw(),
            "uobc"
        );
        let (c, i) = single("University of British Columbia");
        let p = GenParams {
            p_abbreviation: 1.0,
            ..none()
        };
        let q = perturb(
            c.doc(0),
            &p,
            &EquivalenceTable::new(),
            &i,
            &mut ChaCha8Rng::seed_from_u64(1),
        );
        assert_eq!(strs(&q), ["uobc"]);
    }

    #[test]
    fn forced_space_and_order() {
        let mut t = terms("drop out");
        remove_space(&mut t, 0);
        assert_eq!(Query::from_terms(t).raw(), "dropout");
        let (c, i) = single("drop out");
        let p = GenParams { p_space: 1.0, ..none() };
        let q = perturb(
            c.doc(0),
            &p,
            &EquivalenceTable::new(),
            &i,
            &mut ChaCha8Rng::seed_from_u64(1),
        );
        assert_eq!(strs(&q), ["dropout"]);

        let mut t = terms("probabilistic relational models");
        t.swap(0, 1);
        assert_eq!(Query::from_terms(t).raw(), "relational probabilistic models");
        let (c, i) = single("alpha beta");
        let p = GenParams { p_order: 1.0, ..none() };
        let q = perturb(
            c.doc(0),
            &p,
            &EquivalenceTable::new(),
            &i,
            &mut ChaCha8Rng::seed_from_u64(5),
        );
        assert_eq!(strs(&q), ["beta", "alpha"]);
    }

    #[test]
    fn equivalence_swaps_one_term() {
        let eq = EquivalenceTable::from_groups([["center", "centre"]]).unwrap();
        let (c, i) = single("city center mall");
        let p = GenParams {
            p_equivalence: 1.0,
            ..none()
        };
        let q = perturb(c.doc(0), &p, &eq, &i, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(strs(&q), ["city", "centre", "mall"]);
        let (c2, i2) = single("nothing here");
        let q = perturb(c2.doc(0), &p, &eq, &i2, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(strs(&q), ["nothing", "here"]);
    }

    #[test]
    fn typo_edits() {
        let t = Term::new("acme").unwrap();
        assert_eq!(apply_typo(&t, TypoKind::Insert, 4, 'x').as_str(), "acmex");
        assert_eq!(apply_typo(&t, TypoKind::Delete, 0, ' ').as_str(), "cme");
        assert_eq!(apply_typo(&t, TypoKind::Substitute, 1, 'k').as_str(), "akme");
        assert_eq!(apply_typo(&t, TypoKind::Transpose, 2, ' ').as_str(), "acem");
        let one = Term::new("a").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..500 {
            let out = random_typo(&one, &mut rng);
            let n = out.as_str().chars().count();
            assert!(n == 1 && out != one || n == 2);
        }
    }

    #[test]
    fn identity_without_changes() {
        let c = Corpus::from_records([("a", "acme pizza house"), ("b", "drop out")]).unwrap();
        let i = IndexSnapshot::build(&c).unwrap();
        let eq = EquivalenceTable::from_groups([["pizza", "pizzeria"]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for d in c.documents() {
            for _ in 0..50 {
                assert_eq!(&perturb(d, &none(), &eq, &i, &mut rng), d.as_query());
            }
        }
        let unchanged = GenParams {
            p_change: 0.0,
            ..GenParams::default()
        };
        let pairs = generate_pairs(&c, &i, &unchanged, &eq).unwrap();
        for p in &pairs {
            assert_eq!(&p.query, c.get(p.doc_id.as_str()).unwrap().as_query());
        }
    }

    #[test]
    fn k_distribution_edges() {
        let c = Corpus::from_records([("a", "x y"), ("b", "z")]).unwrap();
        let i = IndexSnapshot::build(&c).unwrap();
        let eq = EquivalenceTable::new();
        let zero = GenParams {
            mu: 0.0,
            sigma: 0.0,
            ..GenParams::default()
        };
        assert!(generate_pairs(&c, &i, &zero, &eq).unwrap().is_empty());
        let capped = GenParams {
            mu: 100.0,
            sigma: 0.0,
            k_max: 7,
            ..GenParams::default()
        };
        assert_eq!(generate_pairs(&c, &i, &capped, &eq).unwrap().len(), 14);
        let exact = GenParams {
            mu: 3.0,
            sigma: 0.0,
            ..GenParams::default()
        };
        let a = generate_pairs(&c, &i, &exact, &eq).unwrap();
        assert_eq!(a.len(), 6);
        assert_eq!(a, generate_pairs(&c, &i, &exact, &eq).unwrap());
    }

    #[test]
    fn equivalence_table_validation() {
        assert!(EquivalenceTable::from_groups([["solo"]]).is_err());
        assert!(EquivalenceTable::from_groups([vec!["a", "b"], vec!["b", "c"]]).is_err());
        assert!(EquivalenceTable::from_groups([["new york", "ny"]]).is_err());
        let t = EquivalenceTable::read_tsv("center\tcentre\tctr\n\n# note\nco\tcompany\n".as_bytes(), "eq").unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(
            t.alternatives("centre").map(Term::as_str).collect::<Vec<_>>(),
            ["center", "ctr"]
        );
        assert!(EquivalenceTable::read_tsv("x\n".as_bytes(), "eq").is_err());
    }

    #[test]
    fn params_by_name() {
        let p = GenParams::default().with("p_space", 0.4).unwrap();
        assert_eq!(p.p_space, 0.4);
        assert_eq!(p.get("p_space"), Some(0.4));
        assert!(GenParams::default().with("p_space", 1.5).is_err());
        assert!(GenParams::default().with("nope", 0.1).is_err());
    }

    #[test]
    fn synthetic_corpus_shape() {
        let c = synthetic_corpus(2000, 500, 1).unwrap();
        assert_eq!(c.len(), 2000);
        assert!(c.documents().iter().all(|d| (1..=5).contains(&d.terms().len())));
        let bigger = synthetic_corpus(3000, 500, 1).unwrap();
        assert_eq!(c.doc(1999), bigger.doc(1999));
        assert_ne!(pseudo_word(0), pseudo_word(40));
    }
}

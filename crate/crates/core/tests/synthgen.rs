use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use namelink_core::synthgen::perturb;
use namelink_core::{generate_pairs, Corpus, EquivalenceTable, GenParams, IndexSnapshot};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn data(name: &str) -> BufReader<File> {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name);
    BufReader::new(File::open(p).unwrap())
}

#[test]
fn fixtures_load() {
    let c = Corpus::read_tsv(data("names_1000.tsv"), "names_1000.tsv").unwrap();
    assert_eq!(c.len(), 1000);
    let eq = EquivalenceTable::read_tsv(data("equivalences.tsv"), "equivalences.tsv").unwrap();
    assert!(eq.len() >= 20);
    let covered = c
        .documents()
        .iter()
        .filter(|d| d.terms().iter().any(|t| eq.contains(t.as_str())))
        .count();
    assert!(covered > 100, "only {covered} names have an equivalent term");
}

#[test]
fn removal_is_proportional_to_document_frequency() {
    // df: common=6, mid=3, rare=1
    let mut recs = vec![("target".to_string(), "common mid rare".to_string())];
    for i in 0..5 {
        recs.push((format!("c{i}"), "common".into()));
    }
    for i in 0..2 {
        recs.push((format!("m{i}"), "mid".into()));
    }
    let corpus = Corpus::from_records(recs).unwrap();
    let index = IndexSnapshot::build(&corpus).unwrap();
    let params = GenParams {
        p_change: 1.0,
        p_abbreviation: 0.0,
        p_some: 1.0,
        p_equivalence: 0.0,
        p_space: 0.0,
        p_order: 0.0,
        p_typo: 0.0,
        ..GenParams::default()
    };
    let eq = EquivalenceTable::new();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let n = 10_000;
    let mut removed = [0usize; 3];
    for _ in 0..n {
        let q = perturb(corpus.doc(0), &params, &eq, &index, &mut rng);
        let kept: Vec<&str> = q.terms().iter().map(|t| t.as_str()).collect();
        let gone = ["common", "mid", "rare"]
            .iter()
            .position(|t| !kept.contains(t))
            .unwrap();
        removed[gone] += 1;
    }
    for (count, df) in removed.iter().zip([6.0, 3.0, 1.0]) {
        let p: f64 = df / 10.0;
        let sd = (n as f64 * p * (1.0 - p)).sqrt();
        assert!((*count as f64 - n as f64 * p).abs() <= 3.0 * sd, "{removed:?}");
    }
}

#[test]
fn generation_is_reproducible_per_seed() {
    let c = Corpus::read_tsv(data("names_1000.tsv"), "names").unwrap();
    let i = IndexSnapshot::build(&c).unwrap();
    let eq = EquivalenceTable::read_tsv(data("equivalences.tsv"), "eq").unwrap();
    let p = GenParams {
        seed: 5,
        ..GenParams::default()
    };
    let a = generate_pairs(&c, &i, &p, &eq).unwrap();
    assert_eq!(a, generate_pairs(&c, &i, &p, &eq).unwrap());
    let b = generate_pairs(&c, &i, &GenParams { seed: 6, ..p }, &eq).unwrap();
    assert_ne!(a, b);
    // mean K is 2 per name
    assert!((1700..2300).contains(&a.len()), "{}", a.len());
    let changed = a
        .iter()
        .filter(|x| &x.query != c.get(x.doc_id.as_str()).unwrap().as_query())
        .count();
    assert!(changed > a.len() / 4 && changed < a.len() * 3 / 4);
}

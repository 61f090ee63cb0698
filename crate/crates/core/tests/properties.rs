mod common;

use common::*;
use namelink_core::{fraction, rank, Corpus, ModelWeights, Query, Variant};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn fraction_bounds_and_dominance(
        names in names_strategy(20),
        learned in learned_strategy(),
        q in query_strategy(),
    ) {
        let w = World::new(&names, &learned);
        let query = Query::new(name(&q));
        for d in 0..w.corpus.len() as u32 {
            let f = |v| fraction(&w.tables(), &query, d, v).unwrap().fraction;
            let (plain, tr, bg) = (f(Variant::Tfidf), f(Variant::TfidfTr), f(Variant::TfidfTrBg));
            for x in [plain, tr, bg] {
                prop_assert!((0.0..=1.0).contains(&x));
            }
            prop_assert!(tr >= plain);
        }
    }

    #[test]
    fn full_match_scores_one(names in names_strategy(20), learned in learned_strategy(), pick in any::<prop::sample::Index>()) {
        let w = World::new(&names, &learned);
        let d = pick.index(w.corpus.len());
        let doc = w.corpus.doc(d as u32);
        let query = doc.as_query().clone();
        for v in Variant::ALL {
            let b = fraction(&w.tables(), &query, d as u32, v).unwrap();
            if b.denominator > 0.0 {
                prop_assert_eq!(b.fraction, 1.0);
            }
        }
    }

    #[test]
    fn adding_a_query_term_to_a_document_never_hurts(
        names in names_strategy(12),
        q in prop::collection::vec(0..VOCAB.len(), 1..5),
        pick in any::<prop::sample::Index>(),
        extra in any::<prop::sample::Index>(),
    ) {
        let mut names = names;
        let d = pick.index(names.len());
        let added = q[extra.index(q.len())];
        let before = World::new(&names, &[]);
        names[d].push(added);
        let query = Query::new(name(&q));
        // df changes with the edit, so compare with IDFs held fixed: score the
        // edited document against the original index.
        let edited = Corpus::from_records([("x", name(&names[d]))]).unwrap();
        let mut tables = before.tables();
        tables.corpus = &edited;
        let old = fraction(&before.tables(), &query, d as u32, Variant::Tfidf).unwrap().fraction;
        let new = fraction(&tables, &query, 0, Variant::Tfidf).unwrap().fraction;
        prop_assert!(new >= old);
    }

    #[test]
    fn term_order_only_matters_through_bigrams(
        names in names_strategy(20),
        learned in learned_strategy(),
        q in query_strategy(),
        shuffle_seed in any::<u64>(),
    ) {
        let w = World::new(&names, &learned);
        let mut perm = q.clone();
        let n = perm.len();
        for i in (1..n).rev() {
            perm.swap(i, (shuffle_seed as usize).wrapping_add(i * 31) % (i + 1));
        }
        let (a, b) = (Query::new(name(&q)), Query::new(name(&perm)));
        for v in [Variant::Tfidf, Variant::TfidfTr] {
            let ra = rank(&w.tables(), &a, 50, v, None).unwrap();
            let rb = rank(&w.tables(), &b, 50, v, None).unwrap();
            prop_assert_eq!(ra, rb);
        }
    }

    #[test]
    fn ranking_ignores_positive_rescaling(
        names in names_strategy(30),
        learned in learned_strategy(),
        q in query_strategy(),
        w0 in -20.0f64..20.0,
        w1 in 0.001f64..50.0,
        variant in variant_strategy(),
    ) {
        let w = World::new(&names, &learned);
        let query = Query::new(name(&q));
        let base = rank(&w.tables(), &query, 100, variant, None).unwrap();
        let weighted = rank(&w.tables(), &query, 100, variant, Some(ModelWeights { w0, w1 })).unwrap();
        let ids = |r: &[namelink_core::RankedResult]| r.iter().map(|x| x.doc_id.clone()).collect::<Vec<_>>();
        prop_assert_eq!(ids(&base), ids(&weighted));
        for pair in weighted.windows(2) {
            prop_assert!(pair[0].probability.unwrap() >= pair[1].probability.unwrap());
        }
    }
}

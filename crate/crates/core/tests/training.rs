use namelink_core::training::{fit_samples, gradient, loss, Sample};
use namelink_core::{
    fit_weights, sample_negatives, Corpus, Engine, EngineConfig, ModelWeights, Query, TrainConfig, Variant,
};
use namelink_core::{DocId, LabeledPair};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn mixed_samples(rng: &mut ChaCha8Rng, n: usize) -> Vec<Sample> {
    (0..n)
        .map(|_| {
            let positive = rng.random_bool(0.3);
            let fraction = if positive {
                rng.random_range(0.3..=1.0)
            } else {
                rng.random_range(0.0..0.7)
            };
            Sample { fraction, positive }
        })
        .collect()
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let data = mixed_samples(&mut rng, 300);
    for _ in 0..20 {
        let w = ModelWeights {
            w0: rng.random_range(-4.0..4.0),
            w1: rng.random_range(-4.0..8.0),
        };
        let (g0, g1) = gradient(w, &data);
        let h = 1e-5;
        let f = |w0: f64, w1: f64| loss(ModelWeights { w0, w1 }, &data).unwrap();
        let d0 = (f(w.w0 + h, w.w1) - f(w.w0 - h, w.w1)) / (2.0 * h);
        let d1 = (f(w.w0, w.w1 + h) - f(w.w0, w.w1 - h)) / (2.0 * h);
        for (a, n) in [(g0, d0), (g1, d1)] {
            assert!(
                (a - n).abs() <= 1e-6 * a.abs().max(n.abs()),
                "analytic {a} numeric {n} at {w:?}"
            );
        }
    }
}

#[test]
fn default_rate_gives_non_increasing_loss() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let data = mixed_samples(&mut rng, 500);
    let r = fit_samples(&data, &TrainConfig::default()).unwrap();
    assert!(r.epochs > 10);
    assert!(r.loss_trace.windows(2).all(|p| p[1] <= p[0]));
}

fn separable() -> (Corpus, Vec<LabeledPair>) {
    let names = [
        "acme pizza",
        "best plumbing",
        "central bakery",
        "delta roofing",
        "echo dental",
        "fox tailoring",
        "gamma florist",
        "harbor marine",
        "iris salon",
        "juniper books",
        "kilo hardware",
        "lima travel",
    ];
    let corpus = Corpus::from_records(names.iter().enumerate().map(|(i, n)| (format!("d{i}"), *n))).unwrap();
    let pls = names
        .iter()
        .enumerate()
        .map(|(i, n)| LabeledPair::positive(Query::new(*n), DocId::new(format!("d{i}")).unwrap()))
        .collect();
    (corpus, pls)
}

#[test]
fn negatives_per_query_changes_calibration_not_ranking() {
    let (corpus, pls) = separable();
    let engine = Engine::build(corpus.clone(), 0).unwrap();
    let cfg = TrainConfig::default();
    let fit = |m| {
        let nls = sample_negatives(&pls, &corpus, m, 5).unwrap();
        fit_weights(&pls, &nls, &engine.tables(), Variant::Tfidf, &cfg)
            .unwrap()
            .weights
    };
    let (w3, w5) = (fit(3), fit(5));
    assert!(w3.w1 > 0.0 && w5.w1 > 0.0);
    assert_ne!(w3, w5);
    let held_out = Query::new("acme plumbing bakery");
    let order = |w: ModelWeights| {
        let mut e = engine.clone();
        e.set_weights(Variant::Tfidf, w);
        e.rank(&held_out, 12, Variant::Tfidf)
            .unwrap()
            .into_iter()
            .map(|r| r.doc_id)
            .collect::<Vec<_>>()
    };
    assert_eq!(order(w3), order(w5));
}

#[test]
fn engine_training_is_deterministic() {
    let (corpus, pls) = separable();
    let a = Engine::train(corpus.clone(), &pls, &EngineConfig::default(), 1)
        .unwrap()
        .0;
    let b = Engine::train(corpus, &pls, &EngineConfig::default(), 1).unwrap().0;
    assert_eq!(a.all_weights(), b.all_weights());
    assert_eq!(a.trmap(), b.trmap());
}

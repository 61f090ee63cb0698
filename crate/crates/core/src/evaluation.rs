//! Retrieval metrics and the experiment drivers built on them.

use std::collections::BTreeSet;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::engine::{Engine, EngineConfig};
use crate::error::{Error, Result};
use crate::scorer::{RankedResult, Variant};
use crate::seed::derive_seed;
use crate::synthgen::{generate_pairs, EquivalenceTable, GenParams};
use crate::text::{Corpus, DocId, LabeledPair};
use crate::translation::TrParams;

/// Cutoffs reported by sweeps.
pub const SWEEP_KS: [usize; 4] = [1, 5, 10, 100];

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::param(format!("{a} result lists for {b} gold ids")));
    }
    if a == 0 {
        return Err(Error::param("no queries"));
    }
    Ok(())
}

/// Percentage of queries whose gold id is among their first `k` results.
pub fn hit_at_k(results: &[Vec<DocId>], gold: &[DocId], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::param("k must be positive"));
    }
    check_lengths(results.len(), gold.len())?;
    let hits = results
        .iter()
        .zip(gold)
        .filter(|(r, g)| r.iter().take(k).any(|d| d == *g))
        .count();
    Ok(100.0 * hits as f64 / results.len() as f64)
}

pub fn result_ids(results: &[RankedResult]) -> Vec<DocId> {
    results.iter().map(|r| r.doc_id.clone()).collect()
}

/// The best result of a query and its probability.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopPrediction {
    pub doc_id: DocId,
    pub probability: f64,
}

/// Top predictions of ranked lists; fails if a list lacks probabilities.
pub fn top_predictions(results: &[Vec<RankedResult>]) -> Result<Vec<Option<TopPrediction>>> {
    results
        .iter()
        .map(|r| {
            r.first()
                .map(|top| {
                    top.probability
                        .map(|probability| TopPrediction {
                            doc_id: top.doc_id.clone(),
                            probability,
                        })
                        .ok_or_else(|| Error::param("automation metrics need trained weights"))
                })
                .transpose()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AutomationMetrics {
    pub tt: f64,
    pub queries: usize,
    pub trusted: usize,
    pub trusted_correct: usize,
    pub automation_pct: f64,
    /// Absent when no query clears the threshold.
    pub trusted_hit1: Option<f64>,
}

/// A query is trusted when its top probability is strictly above `tt`.
pub fn automation_metrics(top: &[Option<TopPrediction>], gold: &[DocId], tt: f64) -> Result<AutomationMetrics> {
    check_lengths(top.len(), gold.len())?;
    let mut trusted = 0;
    let mut correct = 0;
    for (t, g) in top.iter().zip(gold) {
        if let Some(t) = t {
            if t.probability > tt {
                trusted += 1;
                if &t.doc_id == g {
                    correct += 1;
                }
            }
        }
    }
    Ok(AutomationMetrics {
        tt,
        queries: top.len(),
        trusted,
        trusted_correct: correct,
        automation_pct: 100.0 * trusted as f64 / top.len() as f64,
        trusted_hit1: (trusted > 0).then(|| 100.0 * correct as f64 / trusted as f64),
    })
}

/// `0.50, 0.55, ..., 0.95, 0.99`.
pub fn default_tt_grid() -> Vec<f64> {
    let mut g: Vec<f64> = (10..20).map(|i| i as f64 * 0.05).collect();
    g.push(0.99);
    g
}

pub fn automation_curve(top: &[Option<TopPrediction>], gold: &[DocId], tts: &[f64]) -> Result<Vec<AutomationMetrics>> {
    tts.iter().map(|&tt| automation_metrics(top, gold, tt)).collect()
}

pub fn write_automation_csv<W: Write>(out: W, rows: &[AutomationMetrics]) -> Result<()> {
    #[derive(Serialize)]
    struct Row {
        tt: f64,
        automation_pct: f64,
        trusted_hit1: Option<f64>,
    }
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(Row {
            tt: r.tt,
            automation_pct: r.automation_pct,
            trusted_hit1: r.trusted_hit1,
        })
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// `(|C_A - C_B|, |C_B - C_A|)` where `C_X` holds the queries model X answers
/// within `k`.
pub fn model_set_diff(a: &[Vec<DocId>], b: &[Vec<DocId>], gold: &[DocId], k: usize) -> Result<(usize, usize)> {
    if k == 0 {
        return Err(Error::param("k must be positive"));
    }
    if a.len() != b.len() {
        return Err(Error::param(format!(
            "models answered different query sets ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    check_lengths(a.len(), gold.len())?;
    let hits = |r: &[Vec<DocId>]| -> BTreeSet<usize> {
        (0..gold.len())
            .filter(|&i| r[i].iter().take(k).any(|d| *d == gold[i]))
            .collect()
    };
    let (ca, cb) = (hits(a), hits(b));
    Ok((ca.difference(&cb).count(), cb.difference(&ca).count()))
}

/// Ranks every query of `pairs` and returns the result lists.
pub fn rank_all(engine: &Engine, pairs: &[LabeledPair], k: usize, variant: Variant) -> Result<Vec<Vec<RankedResult>>> {
    pairs.par_iter().map(|p| engine.rank(&p.query, k, variant)).collect()
}

/// Splits pairs into train and test sets; `train_fraction` of them, rounded
/// down, go to training.
pub fn split_pairs(pairs: &[LabeledPair], train_fraction: f64, seed: u64) -> (Vec<LabeledPair>, Vec<LabeledPair>) {
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = ((pairs.len() as f64) * train_fraction).floor() as usize;
    let pick = |ix: &[usize]| ix.iter().map(|&i| pairs[i].clone()).collect();
    (pick(&order[..cut]), pick(&order[cut..]))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub param: String,
    pub value: f64,
    pub trial: usize,
    pub variant: Variant,
    pub hit1: f64,
    pub hit5: f64,
    pub hit10: f64,
    pub hit100: f64,
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub param: String,
    pub grid: Vec<f64>,
    /// Fixed values of every other generator parameter. Its seed is the
    /// base of every trial seed.
    pub base: GenParams,
    pub trials: usize,
    pub variants: Vec<Variant>,
    pub train_fraction: f64,
    pub engine: EngineConfig,
    /// Pseudo-count settings to choose from by cross-validation on each
    /// training split. Empty means `engine.tr` is used as is.
    pub tr_candidates: Vec<TrParams>,
    pub cv_folds: usize,
}

impl SweepConfig {
    pub fn new(param: &str, grid: Vec<f64>) -> SweepConfig {
        let variants = vec![Variant::Tfidf, Variant::TfidfTrBg];
        SweepConfig {
            param: param.to_string(),
            grid,
            base: GenParams::default(),
            trials: 3,
            train_fraction: 0.8,
            engine: EngineConfig {
                fit_variants: variants.clone(),
                ..EngineConfig::default()
            },
            variants,
            tr_candidates: default_tr_candidates(),
            cv_folds: 3,
        }
    }
}

/// `(c1, c)` pairs tried by cross-validation, all at `tau = 0.7`. The first
/// entry is the usual default and wins ties.
pub fn default_tr_candidates() -> Vec<TrParams> {
    [(1.0, 5.0), (1.0, 3.0), (1.0, 2.0), (2.0, 3.0), (1.0, 1.5), (4.0, 5.0)]
        .into_iter()
        .map(|(c1, c)| TrParams { c1, c, tau: 0.7 })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvResult {
    pub chosen: TrParams,
    /// Mean validation hit@1 per candidate, in candidate order.
    pub scores: Vec<(TrParams, f64)>,
}

/// Picks the pseudo-counts with the best mean hit@1 of `variant` over
/// `folds`-fold cross-validation on `train`. Only translations are learned
/// inside the folds; weights do not affect hit@k.
pub fn cross_validate_tr(
    corpus: &Corpus,
    train: &[LabeledPair],
    candidates: &[TrParams],
    variant: Variant,
    folds: usize,
    seed: u64,
) -> Result<CvResult> {
    if candidates.is_empty() {
        return Err(Error::param("no pseudo-count candidates"));
    }
    if folds < 2 || train.len() < folds {
        return Err(Error::param(format!(
            "{folds}-fold cross-validation over {} pairs",
            train.len()
        )));
    }
    let mut order: Vec<usize> = (0..train.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let fold_of = |pos: usize| pos * folds / train.len();
    let splits: Vec<(Vec<LabeledPair>, Vec<LabeledPair>)> = (0..folds)
        .map(|f| {
            let (mut fit, mut held) = (Vec::new(), Vec::new());
            for (pos, &i) in order.iter().enumerate() {
                if fold_of(pos) == f {
                    held.push(train[i].clone());
                } else {
                    fit.push(train[i].clone());
                }
            }
            (fit, held)
        })
        .collect();
    let mut scores = Vec::with_capacity(candidates.len());
    for &tr in candidates {
        let cfg = EngineConfig {
            tr,
            fit_variants: Vec::new(),
            ..EngineConfig::default()
        };
        let mut total = 0.0;
        for (fit, held) in &splits {
            let (engine, _) = Engine::train(corpus.clone(), fit, &cfg, 0)?;
            total += evaluate(&engine, held, &[variant])?[0][0];
        }
        scores.push((tr, total / folds as f64));
    }
    let chosen = scores
        .iter()
        .fold(None::<(TrParams, f64)>, |best, &(tr, s)| match best {
            Some((_, b)) if b >= s => best,
            _ => Some((tr, s)),
        })
        .expect("non-empty")
        .0;
    Ok(CvResult { chosen, scores })
}

/// Hit@{1,5,10,100} of `engine` on `test`, one row per variant.
pub fn evaluate(engine: &Engine, test: &[LabeledPair], variants: &[Variant]) -> Result<Vec<[f64; 4]>> {
    let gold: Vec<DocId> = test.iter().map(|p| p.doc_id.clone()).collect();
    variants
        .iter()
        .map(|&v| {
            let ranked = rank_all(engine, test, SWEEP_KS[3], v)?;
            let ids: Vec<Vec<DocId>> = ranked.iter().map(|r| result_ids(r)).collect();
            let mut out = [0.0; 4];
            for (slot, k) in out.iter_mut().zip(SWEEP_KS) {
                *slot = hit_at_k(&ids, &gold, k)?;
            }
            Ok(out)
        })
        .collect()
}

/// For each grid value and trial: generate pairs, split them, choose
/// pseudo-counts by cross-validation on the training part, train on it and
/// report hit@k on the rest. Trial `t` uses seed
/// `derive(base.seed, t)` at every grid value, so grid points differ only
/// by the swept parameter. Rows come out ordered by (value, trial, variant).
pub fn sensitivity_sweep(corpus: &Corpus, equiv: &EquivalenceTable, cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    if cfg.grid.is_empty() {
        return Err(Error::param("sweep grid is empty"));
    }
    if cfg.trials == 0 {
        return Err(Error::param("trials must be at least 1"));
    }
    if cfg.variants.is_empty() {
        return Err(Error::param("no variants to evaluate"));
    }
    if !(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0) {
        return Err(Error::param("train fraction must be in (0, 1)"));
    }
    for &v in &cfg.grid {
        cfg.base.with(&cfg.param, v)?;
    }
    let plain = Engine::build(corpus.clone(), 0)?;
    let jobs: Vec<(f64, usize)> = cfg
        .grid
        .iter()
        .flat_map(|&v| (0..cfg.trials).map(move |t| (v, t)))
        .collect();
    let per_job: Vec<Vec<SweepRow>> = jobs
        .par_iter()
        .map(|&(value, trial)| {
            let seed = derive_seed(cfg.base.seed, &[trial as u64]);
            let params = GenParams {
                seed,
                ..cfg.base.with(&cfg.param, value)?
            };
            let pairs = generate_pairs(corpus, plain.index(), &params, equiv)?;
            let (train, test) = split_pairs(&pairs, cfg.train_fraction, derive_seed(seed, &[u64::MAX]));
            if test.is_empty() {
                return Err(Error::param("sweep produced no test queries"));
            }
            let mut ecfg = cfg.engine.clone();
            ecfg.train.seed = derive_seed(seed, &[u64::MAX - 1]);
            if !cfg.tr_candidates.is_empty() {
                let cv_variant = *cfg.variants.iter().max().expect("non-empty");
                let cv_seed = derive_seed(seed, &[u64::MAX - 2]);
                ecfg.tr =
                    cross_validate_tr(corpus, &train, &cfg.tr_candidates, cv_variant, cfg.cv_folds, cv_seed)?.chosen;
            }
            let (engine, _) = Engine::train(corpus.clone(), &train, &ecfg, 0)?;
            let hits = evaluate(&engine, &test, &cfg.variants)?;
            Ok(cfg
                .variants
                .iter()
                .zip(hits)
                .map(|(&variant, h)| SweepRow {
                    param: cfg.param.clone(),
                    value,
                    trial,
                    variant,
                    hit1: h[0],
                    hit5: h[1],
                    hit10: h[2],
                    hit100: h[3],
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(per_job.into_iter().flatten().collect())
}

/// Mean over trials, one row per (value, variant), `trial` set to the
/// number of trials averaged.
pub fn mean_over_trials(rows: &[SweepRow]) -> Vec<SweepRow> {
    let mut out: Vec<SweepRow> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    for r in rows {
        match out
            .iter()
            .position(|m| m.param == r.param && m.value == r.value && m.variant == r.variant)
        {
            Some(i) => {
                let m = &mut out[i];
                m.hit1 += r.hit1;
                m.hit5 += r.hit5;
                m.hit10 += r.hit10;
                m.hit100 += r.hit100;
                counts[i] += 1;
            }
            None => {
                out.push(r.clone());
                counts.push(1);
            }
        }
    }
    for (m, &n) in out.iter_mut().zip(&counts) {
        let n64 = n as f64;
        m.hit1 /= n64;
        m.hit5 /= n64;
        m.hit10 /= n64;
        m.hit100 /= n64;
        m.trial = n;
    }
    out
}

pub fn write_sweep_csv<W: Write>(out: W, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::param(format!("csv: {other:?}")),
    }
}

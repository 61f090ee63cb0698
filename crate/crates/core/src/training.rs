//! Negative sampling and logistic weight fitting.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scorer::{fraction, probability, sigmoid, ModelWeights, Tables, Variant};
use crate::seed::derive_seed;
use crate::text::{Corpus, LabeledPair, Polarity};

/// Probabilities are clipped to `[EPS, 1 - EPS]` inside the loss.
pub const LOSS_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub negatives_per_query: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub convergence_tol: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            negatives_per_query: 5,
            learning_rate: 0.5,
            max_epochs: 10_000,
            convergence_tol: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::param(format!(
                "learning rate {} must be >= 0",
                self.learning_rate
            )));
        }
        if self.max_epochs == 0 {
            return Err(Error::param("max_epochs must be positive"));
        }
        if self.convergence_tol.is_nan() || self.convergence_tol <= 0.0 {
            return Err(Error::param("convergence_tol must be positive"));
        }
        Ok(())
    }
}

/// For every positive pair, `m` distinct documents other than the gold one,
/// drawn uniformly without replacement. Pair `i` uses its own stream derived
/// from `(seed, i)`.
pub fn sample_negatives(pls: &[LabeledPair], corpus: &Corpus, m: usize, seed: u64) -> Result<Vec<LabeledPair>> {
    if m == 0 {
        return Ok(Vec::new());
    }
    if corpus.len() <= m {
        return Err(Error::CorpusTooSmall {
            corpus: corpus.len(),
            needed: m,
        });
    }
    let mut out = Vec::with_capacity(pls.len() * m);
    for (i, p) in pls.iter().enumerate().filter(|(_, p)| p.is_positive()) {
        let gold = corpus
            .index_of(p.doc_id.as_str())
            .ok_or_else(|| Error::UnresolvedPair {
                index: i,
                query: p.query.raw().to_string(),
                doc_id: p.doc_id.to_string(),
            })? as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[i as u64]));
        for pick in sample(&mut rng, corpus.len() - 1, m) {
            let d = if pick >= gold { pick + 1 } else { pick };
            out.push(LabeledPair::negative(
                p.query.clone(),
                corpus.doc(d as u32).id().clone(),
            ));
        }
    }
    Ok(out)
}

/// A pair reduced to what the loss needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub fraction: f64,
    pub positive: bool,
}

/// Scores every pair with `variant`.
pub fn samples(tables: &Tables<'_>, pairs: &[LabeledPair], variant: Variant) -> Result<Vec<Sample>> {
    pairs
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let d = tables
                .corpus
                .index_of(p.doc_id.as_str())
                .ok_or_else(|| Error::UnresolvedPair {
                    index: i,
                    query: p.query.raw().to_string(),
                    doc_id: p.doc_id.to_string(),
                })?;
            Ok(Sample {
                fraction: fraction(tables, &p.query, d, variant)?.fraction,
                positive: p.polarity == Polarity::Positive,
            })
        })
        .collect()
}

/// Mean binary log-loss.
pub fn loss(weights: ModelWeights, data: &[Sample]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::param("log-loss over an empty set"));
    }
    let total: f64 = data
        .iter()
        .map(|s| {
            let z = weights.w0 + weights.w1 * s.fraction;
            // 1 - sigmoid(z) == sigmoid(-z), computed without cancellation
            let p = if s.positive { sigmoid(z) } else { sigmoid(-z) };
            -p.max(LOSS_EPS).ln()
        })
        .sum();
    Ok(total / data.len() as f64)
}

/// Gradient of the (unclipped) mean log-loss with respect to `(w0, w1)`.
pub fn gradient(weights: ModelWeights, data: &[Sample]) -> (f64, f64) {
    let (g0, g1) = data.iter().fold((0.0, 0.0), |(g0, g1), s| {
        let y = if s.positive { 1.0 } else { 0.0 };
        let r = probability(weights, s.fraction) - y;
        (g0 + r, g1 + r * s.fraction)
    });
    let n = data.len().max(1) as f64;
    (g0 / n, g1 / n)
}

pub fn log_loss(weights: ModelWeights, tables: &Tables<'_>, pairs: &[LabeledPair], variant: Variant) -> Result<f64> {
    loss(weights, &samples(tables, pairs, variant)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub weights: ModelWeights,
    /// Loss before the first update followed by the loss after each epoch.
    pub loss_trace: Vec<f64>,
    pub epochs: usize,
    pub positives: usize,
    pub negatives: usize,
}

impl FitReport {
    pub fn final_loss(&self) -> f64 {
        *self.loss_trace.last().expect("trace starts with the initial loss")
    }
}

/// Samples with identical fraction and label merged into one weighted row.
/// Training fractions repeat heavily (many are exactly 0 or 1), so an epoch
/// touches far fewer rows.
struct Grouped {
    rows: Vec<(f64, bool, f64)>,
    n: f64,
}

impl Grouped {
    fn new(data: &[Sample]) -> Grouped {
        let mut counts: BTreeMap<(u64, bool), usize> = BTreeMap::new();
        for s in data {
            *counts.entry((s.fraction.to_bits(), s.positive)).or_insert(0) += 1;
        }
        Grouped {
            rows: counts
                .into_iter()
                .map(|((bits, pos), c)| (f64::from_bits(bits), pos, c as f64))
                .collect(),
            n: data.len() as f64,
        }
    }

    /// Mean clipped loss and mean unclipped gradient at `w`.
    fn loss_and_gradient(&self, w: ModelWeights) -> (f64, (f64, f64)) {
        let (mut l, mut g0, mut g1) = (0.0, 0.0, 0.0);
        for &(f, positive, c) in &self.rows {
            let z = w.w0 + w.w1 * f;
            let p = sigmoid(z);
            let p_label = if positive { p } else { sigmoid(-z) };
            l += c * -p_label.max(LOSS_EPS).ln();
            let r = p - if positive { 1.0 } else { 0.0 };
            g0 += c * r;
            g1 += c * r * f;
        }
        (l / self.n, (g0 / self.n, g1 / self.n))
    }
}

/// Full-batch gradient descent from `(0, 0)`.
pub fn fit_samples(data: &[Sample], config: &TrainConfig) -> Result<FitReport> {
    config.validate()?;
    let positives = data.iter().filter(|s| s.positive).count();
    let negatives = data.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::param(
            "fitting needs at least one positive and one negative pair",
        ));
    }
    let grouped = Grouped::new(data);
    let mut w = ModelWeights { w0: 0.0, w1: 0.0 };
    let (mut prev, mut g) = grouped.loss_and_gradient(w);
    let mut trace = vec![prev];
    let mut epochs = 0;
    while epochs < config.max_epochs {
        w = ModelWeights {
            w0: w.w0 - config.learning_rate * g.0,
            w1: w.w1 - config.learning_rate * g.1,
        };
        epochs += 1;
        let (cur, next) = grouped.loss_and_gradient(w);
        trace.push(cur);
        if prev - cur < config.convergence_tol {
            break;
        }
        prev = cur;
        g = next;
    }
    Ok(FitReport {
        weights: w,
        loss_trace: trace,
        epochs,
        positives,
        negatives,
    })
}

pub fn fit_weights(
    pls: &[LabeledPair],
    nls: &[LabeledPair],
    tables: &Tables<'_>,
    variant: Variant,
    config: &TrainConfig,
) -> Result<FitReport> {
    if pls.is_empty() || nls.is_empty() {
        return Err(Error::param(
            "fitting needs at least one positive and one negative pair",
        ));
    }
    let mut data = samples(tables, pls, variant)?;
    for s in &mut data {
        s.positive = true;
    }
    let mut neg = samples(tables, nls, variant)?;
    for s in &mut neg {
        s.positive = false;
    }
    data.extend(neg);
    fit_samples(&data, config)
}

/// First line `w0<TAB>w1`, then `key<TAB>value` metadata lines.
pub fn write_weights<W: Write>(
    mut out: W,
    weights: ModelWeights,
    variant: Variant,
    report: Option<&FitReport>,
) -> Result<()> {
    writeln!(out, "{}\t{}", weights.w0, weights.w1)?;
    writeln!(out, "variant\t{variant}")?;
    if let Some(r) = report {
        writeln!(out, "epochs\t{}", r.epochs)?;
        writeln!(out, "final_loss\t{}", r.final_loss())?;
        writeln!(out, "positives\t{}", r.positives)?;
        writeln!(out, "negatives\t{}", r.negatives)?;
    }
    Ok(())
}

/// Reads a weights file; the variant is `None` if the file has no tag.
pub fn read_weights<R: BufRead>(reader: R, origin: &str) -> Result<(ModelWeights, Option<Variant>)> {
    let mut lines = reader.lines();
    let first = lines
        .next()
        .transpose()?
        .ok_or_else(|| Error::parse(origin, 1, "empty weights file"))?;
    let (a, b) = first
        .split_once('\t')
        .ok_or_else(|| Error::parse(origin, 1, "expected `w0<TAB>w1`"))?;
    let parse = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Error::parse(origin, 1, format!("bad weight `{s}`")))
    };
    let weights = ModelWeights::new(parse(a)?, parse(b)?).map_err(|e| Error::parse(origin, 1, e.to_string()))?;
    let mut variant = None;
    for (i, line) in lines.enumerate() {
        let line = line?;
        if let Some(("variant", v)) = line.split_once('\t') {
            variant = Some(
                v.parse()
                    .map_err(|e: Error| Error::parse(origin, i + 2, e.to_string()))?,
            );
        }
    }
    Ok((weights, variant))
}

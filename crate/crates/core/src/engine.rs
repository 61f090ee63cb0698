//! A consistent set of tables built from one corpus version, and the
//! pipeline that learns them from positive pairs.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::IndexSnapshot;
use crate::scorer::{self, ModelWeights, RankedResult, ScoreBreakdown, Tables, Variant};
use crate::text::{Corpus, DocId, LabeledPair, Query};
use crate::training::{self, FitReport, TrainConfig};
use crate::translation::{
    accumulate_counts, compute_max_tr, estimate_tr, estimate_tr_gao, inject_bigrams, query_frequencies, MaxTrTable,
    Origin, TrMap, TrParams,
};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    #[default]
    PseudoCount,
    Gao,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub tr: TrParams,
    pub estimator: Estimator,
    pub train: TrainConfig,
    /// Variants whose weights are fitted.
    pub fit_variants: Vec<Variant>,
    pub default_variant: Variant,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            tr: TrParams::default(),
            estimator: Estimator::default(),
            train: TrainConfig::default(),
            fit_variants: Variant::ALL.to_vec(),
            default_variant: Variant::TfidfTrBg,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainSummary {
    pub positives: usize,
    pub learned_entries: usize,
    pub bigram_entries: usize,
    pub fits: BTreeMap<Variant, FitReport>,
}

/// Learned translations from the positive pairs of `pls`, using the
/// estimator and parameters of `config`.
pub fn learn_translations(pls: &[LabeledPair], corpus: &Corpus, config: &EngineConfig) -> Result<TrMap> {
    let pls: Vec<LabeledPair> = pls.iter().filter(|p| p.is_positive()).cloned().collect();
    let counts = accumulate_counts(&pls, corpus)?;
    match config.estimator {
        Estimator::PseudoCount => estimate_tr(&counts, config.tr),
        Estimator::Gao => estimate_tr_gao(&counts, &query_frequencies(&pls), config.tr.tau),
    }
}

#[derive(Debug, Clone)]
pub struct Engine {
    version: u64,
    corpus: Corpus,
    index: IndexSnapshot,
    trmap: TrMap,
    maxtr: MaxTrTable,
    weights: BTreeMap<Variant, ModelWeights>,
    default_variant: Variant,
}

impl Engine {
    /// An engine with no learned translations and no weights. Bigram entries
    /// are still injected, so every variant can rank.
    pub fn build(corpus: Corpus, version: u64) -> Result<Engine> {
        Engine::from_learned(corpus, &TrMap::new(), version, Variant::TfidfTrBg)
    }

    /// An engine over `corpus` with `learned` as the learned translations.
    /// Bigram entries and MaxTr are derived here; no weights are fitted.
    pub fn from_learned(corpus: Corpus, learned: &TrMap, version: u64, default_variant: Variant) -> Result<Engine> {
        let index = IndexSnapshot::build_versioned(&corpus, version)?;
        let trmap = inject_bigrams(&learned.filter_origin(Origin::Learned), &corpus);
        let maxtr = compute_max_tr(&trmap, &index);
        Ok(Engine {
            version,
            corpus,
            index,
            trmap,
            maxtr,
            weights: BTreeMap::new(),
            default_variant,
        })
    }

    /// Samples negatives for the positive pairs of `pls` and fits weights for
    /// each of `variants`, replacing any weights they had.
    pub fn fit(
        &mut self,
        pls: &[LabeledPair],
        variants: &[Variant],
        config: &TrainConfig,
    ) -> Result<BTreeMap<Variant, FitReport>> {
        let pls: Vec<LabeledPair> = pls.iter().filter(|p| p.is_positive()).cloned().collect();
        let nls = training::sample_negatives(&pls, &self.corpus, config.negatives_per_query, config.seed)?;
        let mut fits = BTreeMap::new();
        for &v in variants {
            let report = training::fit_weights(&pls, &nls, &self.tables(), v, config)?;
            self.weights.insert(v, report.weights);
            fits.insert(v, report);
        }
        Ok(fits)
    }

    /// Counts, estimate, inject bigrams, MaxTr, sample negatives, fit. Only
    /// the positive pairs of `pls` are used. With no positives the result is
    /// the same as [`Engine::build`].
    pub fn train(
        corpus: Corpus,
        pls: &[LabeledPair],
        config: &EngineConfig,
        version: u64,
    ) -> Result<(Engine, TrainSummary)> {
        let pls: Vec<LabeledPair> = pls.iter().filter(|p| p.is_positive()).cloned().collect();
        let learned = learn_translations(&pls, &corpus, config)?;
        let mut engine = Engine::from_learned(corpus, &learned, version, config.default_variant)?;
        let fits = if pls.is_empty() {
            BTreeMap::new()
        } else {
            engine.fit(&pls, &config.fit_variants, &config.train)?
        };
        let summary = TrainSummary {
            positives: pls.len(),
            learned_entries: learned.len(),
            bigram_entries: engine.trmap.len() - learned.len(),
            fits,
        };
        Ok((engine, summary))
    }

    /// A new snapshot with one more document. Learned translations and
    /// weights carry over; index, bigram entries and MaxTr are rebuilt.
    pub fn with_document(&self, id: DocId, raw: &str, version: u64) -> Result<Engine> {
        let mut corpus = self.corpus.clone();
        corpus.insert(id, raw)?;
        let mut next = Engine::from_learned(corpus, &self.learned_trmap(), version, self.default_variant)?;
        next.weights = self.weights.clone();
        Ok(next)
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    pub fn index(&self) -> &IndexSnapshot {
        &self.index
    }

    pub fn trmap(&self) -> &TrMap {
        &self.trmap
    }

    pub fn maxtr(&self) -> &MaxTrTable {
        &self.maxtr
    }

    pub fn default_variant(&self) -> Variant {
        self.default_variant
    }

    pub fn weights(&self, variant: Variant) -> Option<ModelWeights> {
        self.weights.get(&variant).copied()
    }

    pub fn all_weights(&self) -> &BTreeMap<Variant, ModelWeights> {
        &self.weights
    }

    pub fn set_weights(&mut self, variant: Variant, weights: ModelWeights) {
        self.weights.insert(variant, weights);
    }

    pub fn tables(&self) -> Tables<'_> {
        Tables {
            corpus: &self.corpus,
            index: &self.index,
            trmap: Some(&self.trmap),
            maxtr: Some(&self.maxtr),
        }
    }

    /// Top `k` results; probabilities are attached when `variant` has weights.
    pub fn rank(&self, query: &Query, k: usize, variant: Variant) -> Result<Vec<RankedResult>> {
        scorer::rank(&self.tables(), query, k, variant, self.weights(variant))
    }

    pub fn rank_naive(&self, query: &Query, k: usize, variant: Variant) -> Result<Vec<RankedResult>> {
        scorer::rank_naive(&self.tables(), query, k, variant, self.weights(variant))
    }

    pub fn fraction(&self, query: &Query, doc_id: &str, variant: Variant) -> Result<ScoreBreakdown> {
        let d = self
            .corpus
            .index_of(doc_id)
            .ok_or_else(|| Error::UnknownDocument(doc_id.to_string()))?;
        scorer::fraction(&self.tables(), query, d, variant)
    }

    /// Learned entries only, without injected bigrams.
    pub fn learned_trmap(&self) -> TrMap {
        self.trmap.filter_origin(Origin::Learned)
    }

    /// Writes `corpus.tsv`, `index.txt`, `tr.tsv`, `maxtr.tsv`,
    /// `manifest.tsv` and one `weights-<variant>.tsv` per fitted variant.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let create = |name: &str| -> Result<BufWriter<File>> { Ok(BufWriter::new(File::create(dir.join(name))?)) };
        let mut w = create("corpus.tsv")?;
        self.corpus.write_tsv(&mut w)?;
        w.flush()?;
        let mut w = create("index.txt")?;
        self.index.write_to(&self.corpus, &mut w)?;
        w.flush()?;
        let mut w = create("tr.tsv")?;
        self.trmap.write_tsv(&mut w)?;
        w.flush()?;
        let mut w = create("maxtr.tsv")?;
        self.maxtr.write_tsv(&mut w)?;
        w.flush()?;
        for (v, wt) in &self.weights {
            let mut w = create(&weights_file(*v))?;
            training::write_weights(&mut w, *wt, *v, None)?;
            w.flush()?;
        }
        let mut w = create("manifest.tsv")?;
        writeln!(w, "version\t{}", self.version)?;
        writeln!(w, "default_variant\t{}", self.default_variant)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Engine> {
        let open = |name: &str| -> Result<BufReader<File>> { Ok(BufReader::new(File::open(dir.join(name))?)) };
        let origin = |name: &str| dir.join(name).display().to_string();
        let corpus = Corpus::read_tsv(open("corpus.tsv")?, &origin("corpus.tsv"))?;
        let index = IndexSnapshot::read_from(open("index.txt")?, &corpus, &origin("index.txt"))?;
        let trmap = TrMap::read_tsv(open("tr.tsv")?, &origin("tr.tsv"))?;
        let maxtr = MaxTrTable::read_tsv(open("maxtr.tsv")?, &origin("maxtr.tsv"))?;
        let mut default_variant = Variant::TfidfTrBg;
        let mut version = index.version();
        for (i, line) in open("manifest.tsv")?.lines().enumerate() {
            let line = line?;
            let bad = |m: String| Error::parse(&origin("manifest.tsv"), i + 1, m);
            match line.split_once('\t') {
                Some(("version", v)) => version = v.parse().map_err(|_| bad(format!("bad version `{v}`")))?,
                Some(("default_variant", v)) => default_variant = v.parse().map_err(|e: Error| bad(e.to_string()))?,
                _ => {}
            }
        }
        let mut weights = BTreeMap::new();
        for v in Variant::ALL {
            let name = weights_file(v);
            if dir.join(&name).exists() {
                let (w, _) = training::read_weights(open(&name)?, &origin(&name))?;
                weights.insert(v, w);
            }
        }
        Ok(Engine {
            version,
            corpus,
            index,
            trmap,
            maxtr,
            weights,
            default_variant,
        })
    }
}

fn weights_file(v: Variant) -> String {
    format!("weights-{}.tsv", v.as_str().replace('+', "-"))
}

//! Service state: the active engine snapshot, the review queue, the label
//! log and the trust threshold.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use namelink_core::evaluation::{automation_metrics, top_predictions, AutomationMetrics};
use namelink_core::{DocId, Engine, EngineConfig, Polarity, Query, RankedResult, TrainSummary, Variant};
use serde::{Deserialize, Serialize};

use crate::error::ServiceError;
use crate::labels::{LabelLog, LabelRecord, LabelSource};
use crate::queue::{ReviewItem, ReviewQueue, ReviewState, Suggestion};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    /// Trust threshold applied when no setting has been persisted yet.
    pub tt: f64,
    pub default_k: usize,
    /// Auto-accepted labels are logged either way; this decides whether
    /// retraining learns from them.
    pub train_on_auto_labels: bool,
    pub engine: EngineConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            tt: 0.9,
            default_k: 10,
            train_on_auto_labels: false,
            engine: EngineConfig::default(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Settings {
    tt: f64,
}

#[derive(Debug, Default)]
struct Counters {
    queries: AtomicU64,
    auto_matched: AtomicU64,
    queued: AtomicU64,
    endorsed: AtomicU64,
    rejected: AtomicU64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CounterSnapshot {
    pub queries: u64,
    pub auto_matched: u64,
    pub queued: u64,
    pub endorsed: u64,
    pub rejected: u64,
    /// Share of submitted queries accepted automatically, in percent.
    pub automation_pct: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum SubmitOutcome {
    AutoMatched {
        doc_id: String,
        name: String,
        probability: f64,
    },
    Queued {
        item_id: u64,
        suggestions: Vec<Suggestion>,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct LabelCounts {
    pub expert: usize,
    pub auto: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Metrics {
    pub queue_depth: usize,
    pub labels: LabelCounts,
    pub live: CounterSnapshot,
    /// Automation over the logged positive labels, re-ranked with the active
    /// snapshot. Absent when the active variant has no weights.
    pub replay: Option<AutomationMetrics>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RetrainReport {
    pub previous_version: u64,
    pub version: u64,
    pub labels_used: usize,
    pub summary: TrainSummary,
}

pub struct Service {
    engine: RwLock<Arc<Engine>>,
    queue: Mutex<ReviewQueue>,
    labels: Mutex<LabelLog>,
    tt: RwLock<f64>,
    counters: Counters,
    /// Serializes snapshot replacement so ingest and retrain never race.
    mutation: Mutex<()>,
    data_dir: Option<PathBuf>,
    config: ServiceConfig,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|p| p.into_inner())
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn check_tt(tt: f64) -> Result<f64, ServiceError> {
    if (0.0..=1.0).contains(&tt) {
        Ok(tt)
    } else {
        Err(ServiceError::BadRequest(format!(
            "threshold must be in [0, 1], got {tt}"
        )))
    }
}

impl Service {
    /// A service that keeps everything in memory.
    pub fn new(engine: Engine, config: ServiceConfig) -> Result<Service, ServiceError> {
        let tt = check_tt(config.tt)?;
        Ok(Service {
            engine: RwLock::new(Arc::new(engine)),
            queue: Mutex::new(ReviewQueue::in_memory()),
            labels: Mutex::new(LabelLog::in_memory()),
            tt: RwLock::new(tt),
            counters: Counters::default(),
            mutation: Mutex::new(()),
            data_dir: None,
            config,
        })
    }

    /// A service persisted under `dir`. An existing snapshot there wins over
    /// `initial`; `initial` is required only for a fresh directory.
    pub fn open(dir: &Path, initial: Option<Engine>, config: ServiceConfig) -> Result<Service, ServiceError> {
        fs::create_dir_all(dir)?;
        let snapshot = dir.join("snapshot");
        let engine = if snapshot.join("manifest.tsv").exists() {
            Engine::load(&snapshot)?
        } else {
            let engine = initial.ok_or_else(|| {
                ServiceError::BadRequest(format!("{} holds no snapshot and no engine was given", dir.display()))
            })?;
            save_snapshot(dir, &engine)?;
            engine
        };
        let settings = dir.join("settings.json");
        let tt = if settings.exists() {
            serde_json::from_slice::<Settings>(&fs::read(&settings)?)?.tt
        } else {
            config.tt
        };
        Ok(Service {
            engine: RwLock::new(Arc::new(engine)),
            queue: Mutex::new(ReviewQueue::open(&dir.join("queue.json"))?),
            labels: Mutex::new(LabelLog::open(&dir.join("labels.tsv"))?),
            tt: RwLock::new(check_tt(tt)?),
            counters: Counters::default(),
            mutation: Mutex::new(()),
            data_dir: Some(dir.to_path_buf()),
            config,
        })
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn engine(&self) -> Arc<Engine> {
        self.engine.read().unwrap_or_else(|p| p.into_inner()).clone()
    }

    pub fn version(&self) -> u64 {
        self.engine().version()
    }

    fn swap(&self, next: Engine) -> Result<(), ServiceError> {
        if let Some(dir) = &self.data_dir {
            save_snapshot(dir, &next)?;
        }
        *self.engine.write().unwrap_or_else(|p| p.into_inner()) = Arc::new(next);
        Ok(())
    }

    pub fn threshold(&self) -> f64 {
        *self.tt.read().unwrap_or_else(|p| p.into_inner())
    }

    pub fn set_threshold(&self, tt: f64) -> Result<f64, ServiceError> {
        let tt = check_tt(tt)?;
        let mut guard = self.tt.write().unwrap_or_else(|p| p.into_inner());
        if let Some(dir) = &self.data_dir {
            fs::write(dir.join("settings.json"), serde_json::to_vec(&Settings { tt })?)?;
        }
        *guard = tt;
        Ok(tt)
    }

    fn resolve_k(&self, k: Option<usize>) -> Result<usize, ServiceError> {
        match k.unwrap_or(self.config.default_k) {
            0 => Err(ServiceError::BadRequest("k must be positive".into())),
            k => Ok(k),
        }
    }

    /// Ranked results from the active snapshot, with probabilities when the
    /// variant has weights.
    pub fn search(
        &self,
        query: &str,
        k: Option<usize>,
        variant: Option<Variant>,
    ) -> Result<(Arc<Engine>, Vec<RankedResult>), ServiceError> {
        let k = self.resolve_k(k)?;
        let engine = self.engine();
        let variant = variant.unwrap_or(engine.default_variant());
        let results = engine.rank(&Query::new(query), k, variant)?;
        Ok((engine, results))
    }

    /// Auto-accepts the top result when its probability is strictly above the
    /// trust threshold, otherwise queues the query for review.
    pub fn submit_query(&self, query: &str, k: Option<usize>) -> Result<(u64, SubmitOutcome), ServiceError> {
        let k = self.resolve_k(k)?;
        let engine = self.engine();
        let variant = engine.default_variant();
        if engine.weights(variant).is_none() {
            return Err(ServiceError::Untrained(format!(
                "variant {variant} has no fitted weights; retrain first"
            )));
        }
        let results = engine.rank(&Query::new(query), k, variant)?;
        let tt = self.threshold();
        self.counters.queries.fetch_add(1, Ordering::Relaxed);
        if let Some(top) = results.first() {
            let p = top.probability.unwrap_or(0.0);
            if p > tt {
                lock(&self.labels).append(LabelRecord {
                    query: query.to_string(),
                    doc_id: top.doc_id.clone(),
                    polarity: Polarity::Positive,
                    source: LabelSource::Auto,
                })?;
                self.counters.auto_matched.fetch_add(1, Ordering::Relaxed);
                let name = engine.corpus().doc(top.doc_idx).raw().to_string();
                return Ok((
                    engine.version(),
                    SubmitOutcome::AutoMatched {
                        doc_id: top.doc_id.to_string(),
                        name,
                        probability: p,
                    },
                ));
            }
        }
        let suggestions = suggestions(&engine, &results);
        let item_id = lock(&self.queue).push(query.to_string(), suggestions.clone(), engine.version(), now())?;
        self.counters.queued.fetch_add(1, Ordering::Relaxed);
        Ok((engine.version(), SubmitOutcome::Queued { item_id, suggestions }))
    }

    pub fn pending(&self) -> Vec<ReviewItem> {
        lock(&self.queue).pending()
    }

    /// Records the reviewer's choice as an expert label. Repeating the same
    /// endorsement is a no-op; endorsing a different record is a conflict.
    pub fn endorse(&self, id: u64, doc_id: &str) -> Result<ReviewItem, ServiceError> {
        let engine = self.engine();
        let doc = engine
            .corpus()
            .get(doc_id)
            .ok_or_else(|| ServiceError::BadRequest(format!("unknown document `{doc_id}`")))?
            .id()
            .clone();
        let mut queue = lock(&self.queue);
        let item = queue
            .get(id)
            .ok_or_else(|| ServiceError::NotFound(format!("no review item {id}")))?
            .clone();
        match item.state {
            ReviewState::Endorsed if item.endorsement.as_deref() == Some(doc_id) => return Ok(item),
            ReviewState::Endorsed => {
                return Err(ServiceError::Conflict(format!(
                    "item {id} is already endorsed with `{}`",
                    item.endorsement.unwrap_or_default()
                )))
            }
            ReviewState::Rejected => return Err(ServiceError::Conflict(format!("item {id} was rejected"))),
            ReviewState::Pending => {}
        }
        lock(&self.labels).append(LabelRecord {
            query: item.query.clone(),
            doc_id: doc.clone(),
            polarity: Polarity::Positive,
            source: LabelSource::Expert,
        })?;
        self.counters.endorsed.fetch_add(1, Ordering::Relaxed);
        queue.resolve(id, ReviewState::Endorsed, Some(doc.to_string()), now())
    }

    /// The reviewer found no correct record. No label is written.
    pub fn reject(&self, id: u64) -> Result<ReviewItem, ServiceError> {
        let mut queue = lock(&self.queue);
        let item = queue
            .get(id)
            .ok_or_else(|| ServiceError::NotFound(format!("no review item {id}")))?
            .clone();
        match item.state {
            ReviewState::Rejected => Ok(item),
            ReviewState::Endorsed => Err(ServiceError::Conflict(format!("item {id} is already endorsed"))),
            ReviewState::Pending => {
                self.counters.rejected.fetch_add(1, Ordering::Relaxed);
                queue.resolve(id, ReviewState::Rejected, None, now())
            }
        }
    }

    /// Adds a document and publishes a new snapshot. Learned translations and
    /// weights carry over.
    pub fn ingest(&self, doc_id: &str, name: &str) -> Result<u64, ServiceError> {
        let _guard = lock(&self.mutation);
        let current = self.engine();
        let id = DocId::new(doc_id)?;
        let next = current.with_document(id, name, current.version() + 1)?;
        let version = next.version();
        self.swap(next)?;
        Ok(version)
    }

    /// Relearns translations and weights from the label log over the current
    /// corpus. The old snapshot stays active until the new one is complete,
    /// and stays active if training fails.
    pub fn retrain(&self) -> Result<RetrainReport, ServiceError> {
        let _guard = lock(&self.mutation);
        let pairs = lock(&self.labels).training_pairs(self.config.train_on_auto_labels);
        if pairs.is_empty() {
            return Err(ServiceError::BadRequest("the label log has no training labels".into()));
        }
        let current = self.engine();
        let (next, summary) = Engine::train(
            current.corpus().clone(),
            &pairs,
            &self.config.engine,
            current.version() + 1,
        )?;
        let version = next.version();
        self.swap(next)?;
        Ok(RetrainReport {
            previous_version: current.version(),
            version,
            labels_used: pairs.len(),
            summary,
        })
    }

    pub fn label_records(&self) -> Vec<LabelRecord> {
        lock(&self.labels).records().to_vec()
    }

    pub fn counters(&self) -> CounterSnapshot {
        let c = &self.counters;
        let queries = c.queries.load(Ordering::Relaxed);
        let auto_matched = c.auto_matched.load(Ordering::Relaxed);
        CounterSnapshot {
            queries,
            auto_matched,
            automation_pct: (queries > 0).then(|| 100.0 * auto_matched as f64 / queries as f64),
            queued: c.queued.load(Ordering::Relaxed),
            endorsed: c.endorsed.load(Ordering::Relaxed),
            rejected: c.rejected.load(Ordering::Relaxed),
        }
    }

    pub fn metrics(&self, tt: Option<f64>) -> Result<Metrics, ServiceError> {
        let tt = match tt {
            Some(t) => check_tt(t)?,
            None => self.threshold(),
        };
        let (expert, auto, records) = {
            let log = lock(&self.labels);
            (
                log.count(LabelSource::Expert),
                log.count(LabelSource::Auto),
                log.records().to_vec(),
            )
        };
        let engine = self.engine();
        let variant = engine.default_variant();
        let replay = if engine.weights(variant).is_some() && !records.is_empty() {
            let positives: Vec<&LabelRecord> = records.iter().filter(|r| r.polarity == Polarity::Positive).collect();
            let ranked = positives
                .iter()
                .map(|r| engine.rank(&Query::new(r.query.as_str()), 1, variant))
                .collect::<Result<Vec<_>, _>>()?;
            let gold: Vec<DocId> = positives.iter().map(|r| r.doc_id.clone()).collect();
            if gold.is_empty() {
                None
            } else {
                Some(automation_metrics(&top_predictions(&ranked)?, &gold, tt)?)
            }
        } else {
            None
        };
        Ok(Metrics {
            queue_depth: lock(&self.queue).depth(),
            labels: LabelCounts { expert, auto },
            live: self.counters(),
            replay,
        })
    }
}

fn suggestions(engine: &Engine, results: &[RankedResult]) -> Vec<Suggestion> {
    results
        .iter()
        .map(|r| Suggestion {
            doc_id: r.doc_id.to_string(),
            name: engine.corpus().doc(r.doc_idx).raw().to_string(),
            fraction: r.fraction,
            probability: r.probability,
            breakdown: r.breakdown.clone(),
        })
        .collect()
}

/// Writes the snapshot next to the live one and swaps directories, so a crash
/// leaves either the old or the new snapshot intact.
fn save_snapshot(dir: &Path, engine: &Engine) -> Result<(), ServiceError> {
    let live = dir.join("snapshot");
    let staged = dir.join("snapshot.new");
    let old = dir.join("snapshot.old");
    for p in [&staged, &old] {
        if p.exists() {
            fs::remove_dir_all(p)?;
        }
    }
    engine.save(&staged)?;
    if live.exists() {
        fs::rename(&live, &old)?;
    }
    fs::rename(&staged, &live)?;
    if old.exists() {
        fs::remove_dir_all(&old)?;
    }
    Ok(())
}

//! Queries waiting for an expert.

use std::fs;
use std::path::{Path, PathBuf};

use namelink_core::ScoreBreakdown;
use serde::{Deserialize, Serialize};

use crate::error::ServiceError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReviewState {
    Pending,
    Endorsed,
    /// The reviewer found no matching record; no label is produced.
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub doc_id: String,
    pub name: String,
    pub fraction: f64,
    pub probability: Option<f64>,
    pub breakdown: ScoreBreakdown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewItem {
    pub id: u64,
    pub query: String,
    pub suggestions: Vec<Suggestion>,
    pub state: ReviewState,
    pub endorsement: Option<String>,
    /// Snapshot that produced the suggestions.
    pub snapshot_version: u64,
    pub created_at: u64,
    pub resolved_at: Option<u64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct Stored {
    next_id: u64,
    items: Vec<ReviewItem>,
}

/// Review items in creation order, optionally mirrored to a JSON file that is
/// rewritten atomically after every change.
#[derive(Debug, Default)]
pub struct ReviewQueue {
    stored: Stored,
    path: Option<PathBuf>,
}

impl ReviewQueue {
    pub fn in_memory() -> ReviewQueue {
        ReviewQueue::default()
    }

    pub fn open(path: &Path) -> Result<ReviewQueue, ServiceError> {
        let stored = if path.exists() {
            serde_json::from_slice(&fs::read(path)?)?
        } else {
            Stored::default()
        };
        Ok(ReviewQueue {
            stored,
            path: Some(path.to_path_buf()),
        })
    }

    fn persist(&self) -> Result<(), ServiceError> {
        if let Some(path) = &self.path {
            let tmp = path.with_extension("json.tmp");
            fs::write(&tmp, serde_json::to_vec_pretty(&self.stored)?)?;
            fs::rename(tmp, path)?;
        }
        Ok(())
    }

    pub fn push(
        &mut self,
        query: String,
        suggestions: Vec<Suggestion>,
        snapshot_version: u64,
        now: u64,
    ) -> Result<u64, ServiceError> {
        let id = self.stored.next_id;
        self.stored.next_id += 1;
        self.stored.items.push(ReviewItem {
            id,
            query,
            suggestions,
            state: ReviewState::Pending,
            endorsement: None,
            snapshot_version,
            created_at: now,
            resolved_at: None,
        });
        self.persist()?;
        Ok(id)
    }

    pub fn get(&self, id: u64) -> Option<&ReviewItem> {
        self.stored.items.iter().find(|i| i.id == id)
    }

    pub fn pending(&self) -> Vec<ReviewItem> {
        self.stored
            .items
            .iter()
            .filter(|i| i.state == ReviewState::Pending)
            .cloned()
            .collect()
    }

    pub fn depth(&self) -> usize {
        self.stored
            .items
            .iter()
            .filter(|i| i.state == ReviewState::Pending)
            .count()
    }

    pub fn resolve(
        &mut self,
        id: u64,
        state: ReviewState,
        endorsement: Option<String>,
        now: u64,
    ) -> Result<ReviewItem, ServiceError> {
        let item = self
            .stored
            .items
            .iter_mut()
            .find(|i| i.id == id)
            .ok_or_else(|| ServiceError::NotFound(format!("no review item {id}")))?;
        item.state = state;
        item.endorsement = endorsement;
        item.resolved_at = Some(now);
        let out = item.clone();
        self.persist()?;
        Ok(out)
    }
}

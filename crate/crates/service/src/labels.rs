//! Append-only label log.

use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use namelink_core::{text::sanitize, DocId, LabeledPair, Polarity, Query};
use serde::{Deserialize, Serialize};

use crate::error::ServiceError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSource {
    /// Endorsed by a reviewer.
    Expert,
    /// Accepted automatically because the top probability cleared the
    /// trust threshold.
    Auto,
}

impl fmt::Display for LabelSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LabelSource::Expert => "expert",
            LabelSource::Auto => "auto",
        })
    }
}

impl FromStr for LabelSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "expert" => Ok(LabelSource::Expert),
            "auto" => Ok(LabelSource::Auto),
            other => Err(format!("unknown label source `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LabelRecord {
    pub query: String,
    pub doc_id: DocId,
    pub polarity: Polarity,
    pub source: LabelSource,
}

impl LabelRecord {
    pub fn to_pair(&self) -> LabeledPair {
        LabeledPair {
            query: Query::new(self.query.as_str()),
            doc_id: self.doc_id.clone(),
            polarity: self.polarity,
        }
    }
}

/// Lines of `query<TAB>doc_id<TAB>polarity<TAB>source`. Every append is
/// flushed and synced before it is acknowledged.
#[derive(Debug)]
pub struct LabelLog {
    path: Option<PathBuf>,
    file: Option<File>,
    records: Vec<LabelRecord>,
}

impl LabelLog {
    pub fn in_memory() -> LabelLog {
        LabelLog {
            path: None,
            file: None,
            records: Vec::new(),
        }
    }

    pub fn open(path: &Path) -> Result<LabelLog, ServiceError> {
        let records = if path.exists() { read_log(path)? } else { Vec::new() };
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(LabelLog {
            path: Some(path.to_path_buf()),
            file: Some(file),
            records,
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn append(&mut self, record: LabelRecord) -> Result<(), ServiceError> {
        if let Some(f) = &mut self.file {
            writeln!(
                f,
                "{}\t{}\t{}\t{}",
                sanitize(&record.query),
                record.doc_id,
                record.polarity,
                record.source
            )?;
            f.flush()?;
            f.sync_data()?;
        }
        self.records.push(record);
        Ok(())
    }

    pub fn records(&self) -> &[LabelRecord] {
        &self.records
    }

    pub fn count(&self, source: LabelSource) -> usize {
        self.records.iter().filter(|r| r.source == source).count()
    }

    /// Pairs used for retraining: expert labels, plus auto labels if asked.
    pub fn training_pairs(&self, include_auto: bool) -> Vec<LabeledPair> {
        self.records
            .iter()
            .filter(|r| include_auto || r.source == LabelSource::Expert)
            .map(LabelRecord::to_pair)
            .collect()
    }
}

pub fn read_log(path: &Path) -> Result<Vec<LabelRecord>, ServiceError> {
    let origin = path.display().to_string();
    let mut out = Vec::new();
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |msg: String| {
            ServiceError::Core(namelink_core::Error::Parse {
                path: origin.clone(),
                line: i + 1,
                msg,
            })
        };
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(bad(format!("expected 4 columns, found {}", cols.len())));
        }
        out.push(LabelRecord {
            query: cols[0].to_string(),
            doc_id: DocId::new(cols[1]).map_err(|e| bad(e.to_string()))?,
            polarity: cols[2].parse().map_err(|e: namelink_core::Error| bad(e.to_string()))?,
            source: cols[3].parse().map_err(bad)?,
        });
    }
    Ok(out)
}

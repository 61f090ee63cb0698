//! Matching service: queries whose top probability clears the trust
//! threshold are accepted automatically, the rest wait in a review queue.
//! Every decision is appended to a label log that retraining learns from.

pub mod error;
pub mod http;
pub mod labels;
pub mod queue;
pub mod service;

pub use error::ServiceError;
pub use http::{router, serve};
pub use labels::{LabelLog, LabelRecord, LabelSource};
pub use queue::{ReviewItem, ReviewQueue, ReviewState, Suggestion};
pub use service::{Metrics, RetrainReport, Service, ServiceConfig, SubmitOutcome};

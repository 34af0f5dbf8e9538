//! JSON API, HTTP transport and command line for the agritwin platform.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod api;
pub mod cli;
pub mod config;
pub mod http;

use agritwin_core::analytics::AnalyticsError;
use agritwin_core::ingestion::IngestError;
use agritwin_core::recommender::RecommendError;
use agritwin_core::simulation::SimError;
use agritwin_core::twin::TwinError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Usage(String),
    #[error("no model path is configured")]
    NoModelPath,
    #[error("cannot bind {0}")]
    Bind(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error(transparent)]
    Twin(#[from] TwinError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Recommend(#[from] RecommendError),
    #[error(transparent)]
    Simulation(#[from] SimError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
}

impl From<std::io::Error> for ServiceError {
    fn from(e: std::io::Error) -> Self {
        ServiceError::Io(e.to_string())
    }
}

//! Ledger access: recorded fixture stores, a paced JSON-RPC client, and a
//! caching wrapper that prefers the fixture and meters what it fetches.

mod fixture;
mod ledger_source;
mod pacing;
mod rpc;
mod usage;

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ledger::{Block, ConfirmedTransaction, Slot};

pub use fixture::{write_fixture, FixtureStore};
pub use ledger_source::LedgerSource;
pub use pacing::Pacer;
pub use rpc::{HttpTransport, RetryPolicy, RpcClient, Transport, TransportError};
pub use usage::{request_units_for_block, UsageCounters, UsageReport};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SourceError {
    #[error("source unavailable: {0}")]
    Unavailable(String),
    #[error("slot {0} is outside the source's range")]
    SlotOutOfRange(Slot),
    #[error("transaction {0} not found")]
    TransactionNotFound(String),
    #[error("malformed ledger data: {0}")]
    Malformed(String),
}

/// A fetched slot: a produced block or a skipped slot.
#[derive(Debug, Clone, PartialEq)]
pub enum BlockResult {
    Produced(Arc<Block>),
    Skipped(Slot),
}

impl BlockResult {
    pub fn block(&self) -> Option<&Block> {
        match self {
            BlockResult::Produced(b) => Some(b),
            BlockResult::Skipped(_) => None,
        }
    }

    pub fn block_time(&self) -> Option<i64> {
        self.block().and_then(|b| b.block_time)
    }
}

/// Uniform read access to finalized ledger data.
pub trait ChainSource: Send + Sync {
    /// Highest finalized slot known to the source.
    fn get_slot(&self) -> Result<Slot, SourceError>;
    /// Block time of `slot`, `None` when the slot was skipped.
    fn get_block_time(&self, slot: Slot) -> Result<Option<i64>, SourceError>;
    fn get_block(&self, slot: Slot) -> Result<BlockResult, SourceError>;
    fn find_transaction(&self, signature: &str) -> Result<ConfirmedTransaction, SourceError>;
}

impl<S: ChainSource + ?Sized> ChainSource for Arc<S> {
    fn get_slot(&self) -> Result<Slot, SourceError> {
        (**self).get_slot()
    }
    fn get_block_time(&self, slot: Slot) -> Result<Option<i64>, SourceError> {
        (**self).get_block_time(slot)
    }
    fn get_block(&self, slot: Slot) -> Result<BlockResult, SourceError> {
        (**self).get_block(slot)
    }
    fn find_transaction(&self, signature: &str) -> Result<ConfirmedTransaction, SourceError> {
        (**self).find_transaction(signature)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Commitment {
    #[default]
    Finalized,
}

impl Commitment {
    pub fn as_str(self) -> &'static str {
        "finalized"
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SourceConfig {
    pub endpoint_url: Option<String>,
    pub fixture_path: Option<PathBuf>,
    pub max_requests_per_second: f64,
    pub cache_capacity_blocks: usize,
    pub commitment: Commitment,
    pub retention_boundary_hours: f64,
    pub retry_attempts: u32,
    pub retry_base_ms: u64,
    pub request_timeout_ms: u64,
}

impl Default for SourceConfig {
    fn default() -> Self {
        Self {
            endpoint_url: None,
            fixture_path: None,
            max_requests_per_second: 200.0,
            cache_capacity_blocks: 256,
            commitment: Commitment::Finalized,
            retention_boundary_hours: 36.0,
            retry_attempts: 3,
            retry_base_ms: 200,
            request_timeout_ms: 30_000,
        }
    }
}

impl SourceConfig {
    pub fn validate(&self) -> Result<(), SourceError> {
        let bad = |m: &str| Err(SourceError::Unavailable(format!("invalid source config: {m}")));
        if self.endpoint_url.is_none() && self.fixture_path.is_none() {
            return bad("set an endpoint url, a fixture path, or both");
        }
        if !(self.max_requests_per_second > 0.0) {
            return bad("max_requests_per_second must be positive");
        }
        if self.cache_capacity_blocks == 0 {
            return bad("cache_capacity_blocks must be positive");
        }
        if self.retry_attempts == 0 {
            return bad("retry_attempts must be at least 1");
        }
        if !(self.retention_boundary_hours >= 0.0) {
            return bad("retention_boundary_hours must be non-negative");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_requires_a_backend() {
        assert!(SourceConfig::default().validate().is_err());
        let cfg = SourceConfig {
            fixture_path: Some("x.ndjson".into()),
            ..Default::default()
        };
        assert!(cfg.validate().is_ok());
        let zero = SourceConfig {
            max_requests_per_second: 0.0,
            ..cfg
        };
        assert!(zero.validate().is_err());
    }

    #[test]
    fn config_reads_from_toml() {
        let cfg: SourceConfig = toml::from_str("endpoint_url = \"http://x\"\nretention_boundary_hours = 12").unwrap();
        assert_eq!(cfg.endpoint_url.as_deref(), Some("http://x"));
        assert_eq!(cfg.retention_boundary_hours, 12.0);
        assert_eq!(cfg.retry_attempts, 3);
    }
}

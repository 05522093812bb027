use std::num::NonZeroUsize;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use lru::LruCache;
use parking_lot::Mutex;

use crate::ledger::{ConfirmedTransaction, Slot};

use super::{
    request_units_for_block, BlockResult, ChainSource, FixtureStore, RpcClient, SourceConfig, SourceError,
    UsageCounters, UsageReport,
};

const TIME_CACHE: usize = 1 << 16;

/// Fixture first, live endpoint as fallback, with an LRU block cache and
/// usage metering on every call that reaches a backend.
pub struct LedgerSource {
    fixture: Option<FixtureStore>,
    live: Option<Arc<dyn ChainSource>>,
    blocks: Mutex<LruCache<Slot, BlockResult>>,
    times: Mutex<LruCache<Slot, Option<i64>>>,
    usage: UsageCounters,
    retention_hours: f64,
    reference_time: Option<i64>,
}

impl LedgerSource {
    fn build(fixture: Option<FixtureStore>, live: Option<Arc<dyn ChainSource>>) -> Self {
        Self {
            fixture,
            live,
            blocks: Mutex::new(LruCache::new(NonZeroUsize::new(256).expect("nonzero"))),
            times: Mutex::new(LruCache::new(NonZeroUsize::new(TIME_CACHE).expect("nonzero"))),
            usage: UsageCounters::default(),
            retention_hours: 36.0,
            reference_time: None,
        }
    }

    pub fn from_fixture(store: FixtureStore) -> Self {
        Self::build(Some(store), None)
    }

    pub fn from_live(live: Arc<dyn ChainSource>) -> Self {
        Self::build(None, Some(live))
    }

    pub fn layered(store: FixtureStore, live: Arc<dyn ChainSource>) -> Self {
        Self::build(Some(store), Some(live))
    }

    pub fn from_config(cfg: &SourceConfig) -> Result<Self, SourceError> {
        cfg.validate()?;
        let fixture = cfg.fixture_path.as_deref().map(FixtureStore::open).transpose()?;
        let live: Option<Arc<dyn ChainSource>> = match &cfg.endpoint_url {
            Some(_) => Some(Arc::new(RpcClient::from_config(cfg)?)),
            None => None,
        };
        Ok(Self::build(fixture, live)
            .with_cache_capacity(cfg.cache_capacity_blocks)
            .with_retention_hours(cfg.retention_boundary_hours))
    }

    pub fn with_cache_capacity(self, blocks: usize) -> Self {
        *self.blocks.lock() = LruCache::new(NonZeroUsize::new(blocks.max(1)).expect("nonzero"));
        self
    }

    pub fn with_retention_hours(mut self, hours: f64) -> Self {
        self.retention_hours = hours;
        self
    }

    /// Fixes the "now" used to age blocks for request-unit accounting.
    pub fn with_reference_time(mut self, unix: i64) -> Self {
        self.reference_time = Some(unix);
        self
    }

    pub fn fixture(&self) -> Option<&FixtureStore> {
        self.fixture.as_ref()
    }

    pub fn record_usage(&self) -> UsageReport {
        self.usage.snapshot()
    }

    /// Fixture tip time when replaying only, wall clock once live.
    fn reference_now(&self) -> i64 {
        if let Some(t) = self.reference_time {
            return t;
        }
        if self.live.is_none() {
            if let Some(t) = self.fixture.as_ref().and_then(FixtureStore::tip_time) {
                return t;
            }
        }
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs() as i64)
            .unwrap_or(0)
    }

    /// Backend responsible for `slot`.
    fn backend_for(&self, slot: Slot) -> Result<&dyn ChainSource, SourceError> {
        if let Some(f) = &self.fixture {
            if f.contains(slot) || self.live.is_none() {
                return Ok(f);
            }
        }
        self.live
            .as_deref()
            .ok_or_else(|| SourceError::Unavailable("no backend configured".into()))
    }
}

impl ChainSource for LedgerSource {
    fn get_slot(&self) -> Result<Slot, SourceError> {
        self.usage.record("getSlot", 1);
        match (&self.fixture, &self.live) {
            (Some(f), Some(live)) => f.get_slot().or_else(|_| live.get_slot()),
            (Some(f), None) => f.get_slot(),
            (None, Some(live)) => live.get_slot(),
            (None, None) => Err(SourceError::Unavailable("no backend configured".into())),
        }
    }

    fn get_block_time(&self, slot: Slot) -> Result<Option<i64>, SourceError> {
        if let Some(b) = self.blocks.lock().get(&slot) {
            return Ok(b.block_time());
        }
        if let Some(t) = self.times.lock().get(&slot) {
            return Ok(*t);
        }
        self.usage.record("getBlockTime", 1);
        let t = self.backend_for(slot)?.get_block_time(slot)?;
        self.times.lock().put(slot, t);
        Ok(t)
    }

    fn get_block(&self, slot: Slot) -> Result<BlockResult, SourceError> {
        if let Some(b) = self.blocks.lock().get(&slot) {
            return Ok(b.clone());
        }
        let result = self.backend_for(slot)?.get_block(slot)?;
        let units = request_units_for_block(result.block_time(), self.reference_now(), self.retention_hours);
        self.usage.record("getBlock", units);
        self.times.lock().put(slot, result.block_time());
        self.blocks.lock().put(slot, result.clone());
        Ok(result)
    }

    fn find_transaction(&self, signature: &str) -> Result<ConfirmedTransaction, SourceError> {
        self.usage.record("getTransaction", 1);
        let from_fixture = self.fixture.as_ref().map(|f| f.find_transaction(signature));
        match (from_fixture, &self.live) {
            (Some(Ok(tx)), _) => Ok(tx),
            (Some(Err(_)) | None, Some(live)) => live.find_transaction(signature),
            (Some(Err(e)), None) => Err(e),
            (None, None) => Err(SourceError::Unavailable("no backend configured".into())),
        }
    }
}

//! Chain adapters. Every chain answers the same queries; only the chain
//! segment of the path changes.

use std::collections::BTreeMap;
use std::sync::Arc;

use anyhow::Context;
use ledgerquote_core::decoder::{decode_swap, DecodeError};
use ledgerquote_core::ledger::rpc_json::confirmed_transaction_from_json;
use ledgerquote_core::ledger::{looks_like_pubkey, ConfirmedTransaction, Mint, SwapInfo};
use ledgerquote_core::ohlcv::{
    build_candles, normalize_trade, swaps_between, Candle, CandleConfig, OhlcvError, SolUsdCache, INTERVALS,
};
use ledgerquote_core::price::{price_at, BaseCurrency, PriceConfig, PriceContext, PriceError, PriceInfo, RateFallback};
use ledgerquote_core::registry::ProgramRegistry;
use ledgerquote_core::source::{ChainSource, LedgerSource, SourceError};
use serde_json::Value;
use thiserror::Error;

use crate::config::ServiceConfig;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GatewayError {
    #[error("unknown chain {0:?}")]
    UnknownChain(String),
    #[error("{0}")]
    BadRequest(String),
    #[error("timestamp {t} is after the latest finalized block time {tip_time}")]
    FutureTimestamp { t: i64, tip_time: i64 },
    #[error("no price available")]
    NotAvailable,
    #[error("{0}")]
    RateUnavailable(String),
    #[error("no SOL/USD close for minute {0}")]
    SolUsdUnavailable(i64),
    #[error("transaction {0} not found")]
    TransactionNotFound(String),
    #[error(transparent)]
    Undecodable(DecodeError),
    #[error("source unavailable: {0}")]
    Unavailable(String),
    #[error("{0}")]
    Internal(String),
}

impl GatewayError {
    pub fn status(&self) -> u16 {
        match self {
            GatewayError::BadRequest(_) | GatewayError::FutureTimestamp { .. } => 400,
            GatewayError::UnknownChain(_)
            | GatewayError::NotAvailable
            | GatewayError::RateUnavailable(_)
            | GatewayError::SolUsdUnavailable(_)
            | GatewayError::TransactionNotFound(_) => 404,
            GatewayError::Undecodable(_) => 422,
            GatewayError::Unavailable(_) => 503,
            GatewayError::Internal(_) => 500,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            GatewayError::UnknownChain(_) => "unknown_chain",
            GatewayError::BadRequest(_) => "bad_request",
            GatewayError::FutureTimestamp { .. } => "future_timestamp",
            GatewayError::NotAvailable => "not_available",
            GatewayError::RateUnavailable(_) => "rate_unavailable",
            GatewayError::SolUsdUnavailable(_) => "sol_usd_unavailable",
            GatewayError::TransactionNotFound(_) => "transaction_not_found",
            GatewayError::Undecodable(DecodeError::NoSwapFound) => "no_swap_found",
            GatewayError::Undecodable(DecodeError::FailedTransaction) => "failed_transaction",
            GatewayError::Undecodable(DecodeError::AmbiguousSwap(_)) => "ambiguous_swap",
            GatewayError::Undecodable(_) => "undecodable",
            GatewayError::Unavailable(_) => "source_unavailable",
            GatewayError::Internal(_) => "internal",
        }
    }
}

impl From<SourceError> for GatewayError {
    fn from(e: SourceError) -> Self {
        match e {
            SourceError::TransactionNotFound(sig) => GatewayError::TransactionNotFound(sig),
            SourceError::SlotOutOfRange(_) => GatewayError::NotAvailable,
            SourceError::Unavailable(m) | SourceError::Malformed(m) => GatewayError::Unavailable(m),
        }
    }
}

impl From<PriceError> for GatewayError {
    fn from(e: PriceError) -> Self {
        match e {
            PriceError::FutureTimestamp { t, tip_time } => GatewayError::FutureTimestamp { t, tip_time },
            PriceError::NotAvailable => GatewayError::NotAvailable,
            e @ PriceError::RateUnavailable { .. } => GatewayError::RateUnavailable(e.to_string()),
            PriceError::InvalidConfig(m) => GatewayError::Internal(m),
            PriceError::Source(s) => s.into(),
        }
    }
}

impl From<OhlcvError> for GatewayError {
    fn from(e: OhlcvError) -> Self {
        match e {
            OhlcvError::MissingSolUsd(m) => GatewayError::SolUsdUnavailable(m),
            OhlcvError::InvalidInterval | OhlcvError::EmptyRange(..) => GatewayError::BadRequest(e.to_string()),
            OhlcvError::Source(s) => s.into(),
            e => GatewayError::Internal(e.to_string()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PriceQuery {
    pub mint: String,
    pub t: i64,
    /// Empty means every base in preference order.
    pub bases: Vec<BaseCurrency>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OhlcvQuery {
    pub mint: String,
    pub from: i64,
    pub to: i64,
    pub interval: i64,
}

/// What `/parse` was given.
#[derive(Clone, Debug, PartialEq)]
pub enum ParseInput {
    Signature(String),
    Document(Value),
}

pub trait ChainAdapter: Send + Sync {
    fn chain_id(&self) -> &str;
    fn price(&self, q: &PriceQuery) -> Result<PriceInfo, GatewayError>;
    fn ohlcv(&self, q: &OhlcvQuery) -> Result<Vec<Candle>, GatewayError>;
    fn parse(&self, input: &ParseInput) -> Result<SwapInfo, GatewayError>;
    /// Cheap reachability check for health reporting. May block.
    fn probe(&self) -> Result<(), GatewayError>;
}

#[derive(Default, Clone)]
pub struct AdapterRegistry {
    adapters: BTreeMap<String, Arc<dyn ChainAdapter>>,
    default_chain: Option<String>,
}

impl AdapterRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// The first adapter registered becomes the default for `/parse`.
    pub fn register(&mut self, adapter: Arc<dyn ChainAdapter>) -> anyhow::Result<()> {
        let id = adapter.chain_id().to_string();
        if self.adapters.contains_key(&id) {
            anyhow::bail!("chain {id:?} is already registered");
        }
        self.default_chain.get_or_insert_with(|| id.clone());
        self.adapters.insert(id, adapter);
        Ok(())
    }

    pub fn get(&self, chain: &str) -> Result<&Arc<dyn ChainAdapter>, GatewayError> {
        self.adapters
            .get(chain)
            .ok_or_else(|| GatewayError::UnknownChain(chain.to_string()))
    }

    pub fn default_adapter(&self) -> Option<&Arc<dyn ChainAdapter>> {
        self.default_chain.as_deref().and_then(|c| self.adapters.get(c))
    }

    pub fn chains(&self) -> impl Iterator<Item = &str> {
        self.adapters.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Arc<dyn ChainAdapter>> {
        self.adapters.values()
    }
}

pub struct SolanaAdapter {
    source: Arc<dyn ChainSource>,
    registry: ProgramRegistry,
    price: PriceConfig,
    candles: CandleConfig,
    sol_usd: SolUsdCache,
    fallback: Option<RateFallback>,
}

impl SolanaAdapter {
    pub const CHAIN_ID: &'static str = "solana";

    pub fn new(source: Arc<dyn ChainSource>, registry: ProgramRegistry, price: PriceConfig) -> Self {
        Self {
            source,
            registry,
            price,
            candles: CandleConfig::default(),
            sol_usd: SolUsdCache::default(),
            fallback: None,
        }
    }

    pub fn with_candles(mut self, cfg: CandleConfig) -> Self {
        self.candles = cfg;
        self
    }

    pub fn with_sol_usd(mut self, cache: SolUsdCache) -> Self {
        self.sol_usd = cache;
        self
    }

    pub fn with_fallback(mut self, fallback: RateFallback) -> Self {
        self.fallback = Some(fallback);
        self
    }

    pub fn from_config(cfg: &ServiceConfig) -> anyhow::Result<Self> {
        cfg.price.validate()?;
        let registry = match &cfg.registry_path {
            Some(p) => ProgramRegistry::load(p)?,
            None => ProgramRegistry::mainnet(),
        };
        let source = LedgerSource::from_config(&cfg.source).context("opening ledger source")?;
        let mut a = Self::new(Arc::new(source), registry, cfg.price.clone()).with_candles(cfg.candles.clone());
        if let Some(p) = &cfg.sol_usd_csv {
            a = a.with_sol_usd(SolUsdCache::load(p)?);
        }
        if let Some(p) = &cfg.rate_fallback_csv {
            a = a.with_fallback(RateFallback::load(p, cfg.rate_fallback_kind)?);
        }
        Ok(a)
    }

    fn context(&self) -> PriceContext<'_> {
        PriceContext {
            source: self.source.as_ref(),
            registry: &self.registry,
            config: &self.price,
            fallback: self.fallback.as_ref(),
        }
    }

    fn mint(&self, s: &str) -> Result<Mint, GatewayError> {
        let s = s.trim();
        if !looks_like_pubkey(s) {
            return Err(GatewayError::BadRequest(format!("mint {s:?} is not a base58 public key")));
        }
        Mint::new(s).map_err(|e| GatewayError::BadRequest(e.to_string()))
    }

    /// Configured closes plus on-demand closes for minutes a SOL-quoted
    /// trade in `swaps` needs.
    fn sol_usd_for(&self, swaps: &[SwapInfo], target: &Mint) -> Result<SolUsdCache, GatewayError> {
        let mut cache = self.sol_usd.clone();
        let probe = SolUsdCache::default();
        for s in swaps {
            match normalize_trade(s, target, &probe, &self.registry) {
                Err(OhlcvError::MissingSolUsd(m)) if cache.get(m).is_none() => {
                    let found = SolUsdCache::synthesize(&self.context(), m, m + 60)?;
                    if let Some(close) = found.get(m) {
                        cache.insert(m, close);
                    }
                }
                _ => {}
            }
        }
        Ok(cache)
    }
}

impl ChainAdapter for SolanaAdapter {
    fn chain_id(&self) -> &str {
        Self::CHAIN_ID
    }

    fn price(&self, q: &PriceQuery) -> Result<PriceInfo, GatewayError> {
        let mint = self.mint(&q.mint)?;
        Ok(price_at(&self.context(), &mint, q.t, &q.bases)?)
    }

    fn ohlcv(&self, q: &OhlcvQuery) -> Result<Vec<Candle>, GatewayError> {
        if !INTERVALS.contains(&q.interval) {
            return Err(GatewayError::BadRequest(format!(
                "interval must be one of {INTERVALS:?} seconds"
            )));
        }
        if q.from >= q.to {
            return Err(GatewayError::BadRequest("from must be before to".into()));
        }
        let mint = self.mint(&q.mint)?;
        let tau0 = q.from.div_euclid(q.interval) * q.interval;
        let cal = self.price.calibration()?;
        let swaps = swaps_between(self.source.as_ref(), &self.registry, &mint, tau0, q.to, cal)?;
        let sol_usd = self.sol_usd_for(&swaps, &mint)?;
        Ok(build_candles(
            &swaps,
            &mint,
            q.interval,
            (q.from, q.to),
            &self.candles,
            &sol_usd,
            &self.registry,
        )?)
    }

    fn parse(&self, input: &ParseInput) -> Result<SwapInfo, GatewayError> {
        let tx: ConfirmedTransaction = match input {
            ParseInput::Signature(sig) => self.source.find_transaction(sig)?,
            ParseInput::Document(doc) => confirmed_transaction_from_json(doc.clone())
                .map_err(|e| GatewayError::BadRequest(format!("transaction document: {e}")))?,
        };
        decode_swap(&tx.transaction, &tx.meta, &self.registry).map_err(GatewayError::Undecodable)
    }

    fn probe(&self) -> Result<(), GatewayError> {
        self.source.get_slot().map(|_| ()).map_err(Into::into)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Named(&'static str);

    impl ChainAdapter for Named {
        fn chain_id(&self) -> &str {
            self.0
        }
        fn price(&self, _: &PriceQuery) -> Result<PriceInfo, GatewayError> {
            Err(GatewayError::NotAvailable)
        }
        fn ohlcv(&self, _: &OhlcvQuery) -> Result<Vec<Candle>, GatewayError> {
            Ok(vec![])
        }
        fn parse(&self, _: &ParseInput) -> Result<SwapInfo, GatewayError> {
            Err(GatewayError::Undecodable(DecodeError::NoSwapFound))
        }
        fn probe(&self) -> Result<(), GatewayError> {
            Ok(())
        }
    }

    #[test]
    fn ids_are_unique() {
        let mut r = AdapterRegistry::new();
        r.register(Arc::new(Named("a"))).unwrap();
        r.register(Arc::new(Named("b"))).unwrap();
        assert!(r.register(Arc::new(Named("a"))).is_err());
        assert_eq!(r.default_adapter().unwrap().chain_id(), "a");
        assert_eq!(r.chains().collect::<Vec<_>>(), ["a", "b"]);
        assert_eq!(r.get("c").err(), Some(GatewayError::UnknownChain("c".into())));
    }

    #[test]
    fn status_codes() {
        assert_eq!(GatewayError::UnknownChain("x".into()).status(), 404);
        assert_eq!(GatewayError::FutureTimestamp { t: 2, tip_time: 1 }.status(), 400);
        assert_eq!(GatewayError::from(PriceError::NotAvailable).status(), 404);
        assert_eq!(GatewayError::from(SourceError::Unavailable("x".into())).status(), 503);
        let e = GatewayError::Undecodable(DecodeError::NoSwapFound);
        assert_eq!((e.status(), e.code()), (422, "no_swap_found"));
        assert_eq!(GatewayError::from(OhlcvError::InvalidInterval).status(), 400);
    }
}

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use ledgerquote_core::cost::CostModel;
use ledgerquote_core::ohlcv::CandleConfig;
use ledgerquote_core::price::{PriceConfig, RateSource};
use ledgerquote_core::source::SourceConfig;
use serde::{Deserialize, Serialize};

pub const ENV_RPC_URL: &str = "CHAIN_RPC_URL";
pub const ENV_LISTEN_ADDR: &str = "LISTEN_ADDR";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HealthConfig {
    pub probe_interval_ms: u64,
    /// A probe running longer than this marks the source degraded.
    pub probe_timeout_ms: u64,
}

impl Default for HealthConfig {
    fn default() -> Self {
        Self {
            probe_interval_ms: 2_000,
            probe_timeout_ms: 1_500,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub listen_address: String,
    /// Program registry TOML; the bundled mainnet registry when unset.
    pub registry_path: Option<PathBuf>,
    /// `timestamp,close` minute closes; missing minutes are priced on demand.
    pub sol_usd_csv: Option<PathBuf>,
    pub rate_fallback_csv: Option<PathBuf>,
    pub rate_fallback_kind: RateSource,
    pub source: SourceConfig,
    pub price: PriceConfig,
    pub candles: CandleConfig,
    pub cost: CostModel,
    pub health: HealthConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            listen_address: "127.0.0.1:8080".into(),
            registry_path: None,
            sol_usd_csv: None,
            rate_fallback_csv: None,
            rate_fallback_kind: RateSource::Oracle,
            source: SourceConfig::default(),
            price: PriceConfig::default(),
            candles: CandleConfig::default(),
            cost: CostModel::default(),
            health: HealthConfig::default(),
        }
    }
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        toml::from_str(text).context("parsing config")
    }

    /// Reads `path`; relative paths inside are taken relative to the file.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(dir) = path.parent() {
            cfg.rebase(dir);
        }
        Ok(cfg)
    }

    fn rebase(&mut self, dir: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(q) = p.as_mut() {
                if q.is_relative() {
                    *q = dir.join(&*q);
                }
            }
        };
        fix(&mut self.registry_path);
        fix(&mut self.sol_usd_csv);
        fix(&mut self.rate_fallback_csv);
        fix(&mut self.source.fixture_path);
    }

    /// Applies `CHAIN_RPC_URL` and `LISTEN_ADDR` through `get`.
    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) {
        if let Some(url) = get(ENV_RPC_URL).filter(|s| !s.trim().is_empty()) {
            self.source.endpoint_url = Some(url);
        }
        if let Some(addr) = get(ENV_LISTEN_ADDR).filter(|s| !s.trim().is_empty()) {
            self.listen_address = addr;
        }
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        validate_listen_address(&self.listen_address)?;
        self.source.validate()?;
        self.price.validate()?;
        if let Some(r) = self.candles.fence_ratio {
            if !(r > 1.0 && r.is_finite()) {
                bail!("candles.fence_ratio must exceed 1");
            }
        }
        if self.health.probe_timeout_ms == 0 || self.health.probe_interval_ms == 0 {
            bail!("health probe interval and timeout must be positive");
        }
        Ok(())
    }
}

/// `host:port` with a non-empty host and a numeric port.
pub fn validate_listen_address(addr: &str) -> anyhow::Result<()> {
    let Some((host, port)) = addr.rsplit_once(':') else {
        bail!("listen address {addr:?} is not host:port");
    };
    let host = host.trim_start_matches('[').trim_end_matches(']');
    if host.is_empty() || host.contains(char::is_whitespace) {
        bail!("listen address {addr:?} has no host");
    }
    port.parse::<u16>().with_context(|| format!("listen address {addr:?} has a bad port"))?;
    Ok(())
}

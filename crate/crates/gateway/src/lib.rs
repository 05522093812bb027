//! HTTP service and CLI plumbing over the ledgerquote engine.

pub mod adapter;
pub mod api;
pub mod config;
pub mod docs;
pub mod health;

use std::sync::Arc;

pub use adapter::{AdapterRegistry, ChainAdapter, GatewayError, SolanaAdapter};
pub use api::{router, AppState, ServerHandle};
pub use config::ServiceConfig;

/// Registry with the single Solana adapter built from `cfg`.
pub fn adapters_from_config(cfg: &ServiceConfig) -> anyhow::Result<AdapterRegistry> {
    let mut r = AdapterRegistry::new();
    r.register(Arc::new(SolanaAdapter::from_config(cfg)?))?;
    Ok(r)
}

/// Shared state with health probing already running.
pub fn app_state(adapters: AdapterRegistry, health: &config::HealthConfig) -> AppState {
    let adapters = Arc::new(adapters);
    AppState {
        health: Arc::new(health::HealthMonitor::spawn(Arc::clone(&adapters), health)),
        adapters,
    }
}

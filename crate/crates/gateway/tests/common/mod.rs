#![allow(dead_code)]

use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use ledgerquote_core::ledger::{ConfirmedTransaction, Mint, Slot};
use ledgerquote_core::price::PriceConfig;
use ledgerquote_core::source::{write_fixture, BlockResult, ChainSource, FixtureStore, LedgerSource, SourceError};
use ledgerquote_core::testkit::{self, decoder_cases, mint, raydium_fixture, simple_swap, staged_chain, Side};
use ledgerquote_gateway::adapter::{ChainAdapter, GatewayError, OhlcvQuery, ParseInput, PriceQuery};
use ledgerquote_gateway::config::HealthConfig;
use ledgerquote_gateway::{app_state, AdapterRegistry, ServerHandle, SolanaAdapter};

pub const T0: i64 = 1_700_000_000;
pub const START: Slot = 1000;

pub fn x() -> Mint {
    mint("X")
}

pub fn y() -> Mint {
    mint("Y")
}

pub fn non_swap() -> ConfirmedTransaction {
    decoder_cases().into_iter().find(|c| c.name == "non_swap").unwrap().tx
}

/// Fifty one-second blocks:
/// 1010 Y→USDC at 1.5, 1019 SOL→USDC at 150, 1020 X→SOL at 0.5,
/// 1030 the Raydium decoder fixture, 1031 a plain transfer.
pub fn store() -> FixtureStore {
    staged_chain(
        START,
        T0,
        50,
        [
            (1010, simple_swap("y", &Side::new(&y(), 2_000_000, 6), &Side::new(&testkit::usdc(), 3_000_000, 6))),
            (
                1019,
                simple_swap(
                    "s",
                    &Side::new(&testkit::wsol(), 1_000_000_000, 9),
                    &Side::new(&testkit::usdc(), 150_000_000, 6),
                ),
            ),
            (1020, simple_swap("p", &Side::new(&x(), 2_000_000, 6), &Side::new(&testkit::wsol(), 1_000_000_000, 9))),
            (1030, raydium_fixture()),
            (1031, non_swap()),
        ],
    )
}

/// The store written to disk and read back, as the service would see it.
pub fn replayed_source(dir: &Path) -> LedgerSource {
    let s = store();
    let blocks: Vec<_> = s
        .slots()
        .map(|slot| match s.get_block(slot).unwrap() {
            BlockResult::Produced(b) => (*b).clone(),
            BlockResult::Skipped(_) => unreachable!(),
        })
        .collect();
    let path = dir.join("blocks.jsonl");
    write_fixture(&path, &blocks).unwrap();
    LedgerSource::from_fixture(FixtureStore::open(&path).unwrap())
}

pub fn solana(source: Arc<dyn ChainSource>) -> SolanaAdapter {
    SolanaAdapter::new(source, testkit::registry(), PriceConfig::default())
}

/// Same handlers under another chain id.
pub struct Renamed(pub &'static str, pub SolanaAdapter);

impl ChainAdapter for Renamed {
    fn chain_id(&self) -> &str {
        self.0
    }
    fn price(&self, q: &PriceQuery) -> Result<ledgerquote_core::price::PriceInfo, GatewayError> {
        self.1.price(q)
    }
    fn ohlcv(&self, q: &OhlcvQuery) -> Result<Vec<ledgerquote_core::ohlcv::Candle>, GatewayError> {
        self.1.ohlcv(q)
    }
    fn parse(&self, i: &ParseInput) -> Result<ledgerquote_core::ledger::SwapInfo, GatewayError> {
        self.1.parse(i)
    }
    fn probe(&self) -> Result<(), GatewayError> {
        self.1.probe()
    }
}

pub fn fast_health() -> HealthConfig {
    HealthConfig {
        probe_interval_ms: 20,
        probe_timeout_ms: 50,
    }
}

pub fn spawn(adapters: AdapterRegistry) -> ServerHandle {
    ServerHandle::spawn("127.0.0.1:0", app_state(adapters, &fast_health())).unwrap()
}

/// A fixture-backed service on an ephemeral port with "solana" and a
/// renamed "solana-replay" adapter over the same data.
pub fn fixture_server(dir: &Path) -> ServerHandle {
    let source: Arc<dyn ChainSource> = Arc::new(replayed_source(dir));
    let mut r = AdapterRegistry::new();
    r.register(Arc::new(solana(Arc::clone(&source)))).unwrap();
    r.register(Arc::new(Renamed("solana-replay", solana(source)))).unwrap();
    spawn(r)
}

/// Answers nothing: every call blocks for a minute.
pub struct StalledSource;

impl ChainSource for StalledSource {
    fn get_slot(&self) -> Result<Slot, SourceError> {
        std::thread::sleep(Duration::from_secs(60));
        Err(SourceError::Unavailable("stalled".into()))
    }
    fn get_block_time(&self, _: Slot) -> Result<Option<i64>, SourceError> {
        self.get_slot().map(|_| None)
    }
    fn get_block(&self, _: Slot) -> Result<BlockResult, SourceError> {
        self.get_slot().map(BlockResult::Skipped)
    }
    fn find_transaction(&self, _: &str) -> Result<ConfirmedTransaction, SourceError> {
        self.get_slot().and(Err(SourceError::TransactionNotFound(String::new())))
    }
}

pub struct Client {
    base: String,
    http: reqwest::blocking::Client,
}

impl Client {
    pub fn new(server: &ServerHandle) -> Self {
        Self {
            base: format!("http://{}", server.addr),
            http: reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(10))
                .build()
                .unwrap(),
        }
    }

    pub fn get(&self, path: &str) -> (u16, Vec<u8>) {
        let r = self.http.get(format!("{}{path}", self.base)).send().unwrap();
        (r.status().as_u16(), r.bytes().unwrap().to_vec())
    }

    pub fn post(&self, path: &str, body: impl Into<Vec<u8>>) -> (u16, Vec<u8>) {
        let r = self.http.post(format!("{}{path}", self.base)).body(body.into()).send().unwrap();
        (r.status().as_u16(), r.bytes().unwrap().to_vec())
    }

    pub fn get_json(&self, path: &str) -> (u16, serde_json::Value) {
        let (s, b) = self.get(path);
        (s, serde_json::from_slice(&b).unwrap())
    }

    pub fn post_json(&self, path: &str, body: impl Into<Vec<u8>>) -> (u16, serde_json::Value) {
        let (s, b) = self.post(path, body);
        (s, serde_json::from_slice(&b).unwrap())
    }

    /// Polls `/healthz` until the source reports `want`.
    pub fn wait_for_source(&self, want: &str) -> bool {
        let until = Instant::now() + Duration::from_secs(5);
        while Instant::now() < until {
            if self.get_json("/healthz").1["source"] == want {
                return true;
            }
            std::thread::sleep(Duration::from_millis(10));
        }
        false
    }
}

/// `{transaction, meta}` RPC document for `tx`.
pub fn rpc_document(tx: &ConfirmedTransaction) -> serde_json::Value {
    let block = testkit::block(1, T0, vec![tx.clone()]);
    let mut line: serde_json::Value =
        serde_json::from_str(&ledgerquote_core::ledger::rpc_json::block_to_fixture_line(&block)).unwrap();
    let mut doc = line["transactions"][0].take();
    // the document carries the transaction's own time, not the wrapper block's
    doc["blockTime"] = tx.transaction.block_time.into();
    doc
}

const MAINNET_REGISTRY: &str = include_str!("../../../core/registry/mainnet.toml");

/// Writes `blocks.jsonl`, a registry that also knows the synthetic program
/// ids, and `service.toml` (with `extra` appended) into `dir`.
pub fn write_service_config(dir: &Path, extra: &str) -> std::path::PathBuf {
    replayed_source(dir);
    let programs: String = [
        (testkit::Programs::raydium(), "RAYDIUM"),
        (testkit::Programs::token(), "TOKEN"),
        (testkit::Programs::token_2022(), "TOKEN_2022"),
    ]
    .iter()
    .map(|(id, v)| format!("\"{id}\" = \"{v}\"\n"))
    .collect();
    let registry = MAINNET_REGISTRY.replacen("[programs]\n", &format!("[programs]\n{programs}"), 1);
    std::fs::write(dir.join("registry.toml"), registry).unwrap();
    let cfg = dir.join("service.toml");
    std::fs::write(
        &cfg,
        format!("registry_path = \"registry.toml\"\n{extra}\n[source]\nfixture_path = \"blocks.jsonl\"\n"),
    )
    .unwrap();
    cfg
}

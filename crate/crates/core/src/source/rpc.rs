use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use serde_json::{json, Value};
use thiserror::Error;

use crate::ledger::rpc_json::{block_from_json, confirmed_transaction_from_json};
use crate::ledger::{Block, ConfirmedTransaction, Slot};

use super::{BlockResult, ChainSource, Commitment, Pacer, SourceConfig, SourceError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransportError {
    /// Worth retrying: connection failures, timeouts, 429 and 5xx.
    #[error("transient: {0}")]
    Transient(String),
    #[error("{0}")]
    Fatal(String),
}

/// Sends one JSON-RPC request body and returns the response document.
pub trait Transport: Send + Sync {
    fn call(&self, body: &Value) -> Result<Value, TransportError>;
}

pub struct HttpTransport {
    client: reqwest::blocking::Client,
    url: String,
}

impl HttpTransport {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Result<Self, SourceError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| SourceError::Unavailable(e.to_string()))?;
        Ok(Self { client, url: url.into() })
    }
}

impl Transport for HttpTransport {
    fn call(&self, body: &Value) -> Result<Value, TransportError> {
        let resp = self
            .client
            .post(&self.url)
            .json(body)
            .send()
            .map_err(|e| TransportError::Transient(e.to_string()))?;
        let status = resp.status();
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(TransportError::Transient(format!("HTTP {status}")));
        }
        if !status.is_success() {
            return Err(TransportError::Fatal(format!("HTTP {status}")));
        }
        resp.json().map_err(|e| TransportError::Transient(e.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            attempts: 3,
            base: Duration::from_millis(200),
        }
    }
}

impl RetryPolicy {
    /// Delay before attempt `n + 1` (n counts from 1).
    pub fn delay_after(&self, n: u32) -> Duration {
        self.base * 2u32.saturating_pow(n.saturating_sub(1))
    }
}

// Server answers meaning "no block for this slot".
const SKIPPED_CODES: [i64; 3] = [-32004, -32007, -32009];

enum RpcReply {
    Result(Value),
    Skipped,
}

/// Paced, retrying JSON-RPC client for the handful of methods we need.
pub struct RpcClient {
    transport: Arc<dyn Transport>,
    pacer: Pacer,
    retry: RetryPolicy,
    commitment: Commitment,
    next_id: AtomicU64,
}

impl RpcClient {
    pub fn new(transport: Arc<dyn Transport>, max_requests_per_second: f64, retry: RetryPolicy) -> Self {
        Self {
            transport,
            pacer: Pacer::new(max_requests_per_second),
            retry,
            commitment: Commitment::Finalized,
            next_id: AtomicU64::new(1),
        }
    }

    pub fn from_config(cfg: &SourceConfig) -> Result<Self, SourceError> {
        let url = cfg
            .endpoint_url
            .as_deref()
            .ok_or_else(|| SourceError::Unavailable("no endpoint configured".into()))?;
        let transport = HttpTransport::new(url, Duration::from_millis(cfg.request_timeout_ms))?;
        let mut c = Self::new(
            Arc::new(transport),
            cfg.max_requests_per_second,
            RetryPolicy {
                attempts: cfg.retry_attempts,
                base: Duration::from_millis(cfg.retry_base_ms),
            },
        );
        c.commitment = cfg.commitment;
        Ok(c)
    }

    fn request(&self, method: &str, params: Value) -> Result<RpcReply, SourceError> {
        let body = json!({
            "jsonrpc": "2.0",
            "id": self.next_id.fetch_add(1, Ordering::Relaxed),
            "method": method,
            "params": params,
        });
        let mut last = String::new();
        for attempt in 1..=self.retry.attempts {
            self.pacer.acquire();
            match self.transport.call(&body) {
                Ok(doc) => return parse_reply(method, doc),
                Err(TransportError::Fatal(e)) => return Err(SourceError::Unavailable(format!("{method}: {e}"))),
                Err(TransportError::Transient(e)) => {
                    tracing::warn!(method, attempt, "rpc attempt failed: {e}");
                    last = e;
                    if attempt < self.retry.attempts {
                        std::thread::sleep(self.retry.delay_after(attempt));
                    }
                }
            }
        }
        Err(SourceError::Unavailable(format!(
            "{method} failed after {} attempts: {last}",
            self.retry.attempts
        )))
    }

    fn commitment(&self) -> Value {
        json!({ "commitment": self.commitment.as_str() })
    }

    pub fn get_transaction(&self, signature: &str) -> Result<ConfirmedTransaction, SourceError> {
        let params = json!([signature, {
            "encoding": "json",
            "commitment": self.commitment.as_str(),
            "maxSupportedTransactionVersion": 0,
        }]);
        match self.request("getTransaction", params)? {
            RpcReply::Result(Value::Null) | RpcReply::Skipped => Err(SourceError::TransactionNotFound(signature.to_string())),
            RpcReply::Result(v) => confirmed_transaction_from_json(v).map_err(|e| SourceError::Malformed(e.to_string())),
        }
    }

    pub fn fetch_block(&self, slot: Slot) -> Result<Option<Block>, SourceError> {
        let params = json!([slot, {
            "encoding": "json",
            "transactionDetails": "full",
            "rewards": false,
            "commitment": self.commitment.as_str(),
            "maxSupportedTransactionVersion": 0,
        }]);
        match self.request("getBlock", params)? {
            RpcReply::Result(Value::Null) | RpcReply::Skipped => Ok(None),
            RpcReply::Result(v) => block_from_json(v, slot)
                .map(Some)
                .map_err(|e| SourceError::Malformed(e.to_string())),
        }
    }
}

fn parse_reply(method: &str, doc: Value) -> Result<RpcReply, SourceError> {
    if let Some(err) = doc.get("error") {
        let code = err.get("code").and_then(Value::as_i64).unwrap_or(0);
        if SKIPPED_CODES.contains(&code) {
            return Ok(RpcReply::Skipped);
        }
        let msg = err.get("message").and_then(Value::as_str).unwrap_or("unknown error");
        return Err(SourceError::Unavailable(format!("{method}: rpc error {code}: {msg}")));
    }
    match doc.get("result") {
        Some(v) => Ok(RpcReply::Result(v.clone())),
        None => Err(SourceError::Malformed(format!("{method}: response has neither result nor error"))),
    }
}

impl ChainSource for RpcClient {
    fn get_slot(&self) -> Result<Slot, SourceError> {
        match self.request("getSlot", json!([self.commitment()]))? {
            RpcReply::Result(v) => v
                .as_u64()
                .ok_or_else(|| SourceError::Malformed(format!("getSlot returned {v}"))),
            RpcReply::Skipped => Err(SourceError::Unavailable("getSlot: no slot".into())),
        }
    }

    fn get_block_time(&self, slot: Slot) -> Result<Option<i64>, SourceError> {
        match self.request("getBlockTime", json!([slot]))? {
            RpcReply::Result(Value::Null) | RpcReply::Skipped => Ok(None),
            RpcReply::Result(v) => v
                .as_i64()
                .map(Some)
                .ok_or_else(|| SourceError::Malformed(format!("getBlockTime returned {v}"))),
        }
    }

    fn get_block(&self, slot: Slot) -> Result<BlockResult, SourceError> {
        Ok(match self.fetch_block(slot)? {
            Some(b) if !b.is_skipped() => BlockResult::Produced(Arc::new(b)),
            _ => BlockResult::Skipped(slot),
        })
    }

    fn find_transaction(&self, signature: &str) -> Result<ConfirmedTransaction, SourceError> {
        self.get_transaction(signature)
    }
}

#[cfg(test)]
mod tests {
    use std::collections::VecDeque;

    use parking_lot::Mutex;

    use super::*;
    use crate::ledger::rpc_json::RpcBlock;
    use crate::testkit;

    /// Replays canned replies and records request bodies.
    #[derive(Default)]
    struct Scripted {
        replies: Mutex<VecDeque<Result<Value, TransportError>>>,
        seen: Mutex<Vec<Value>>,
    }

    impl Scripted {
        fn new(replies: Vec<Result<Value, TransportError>>) -> Arc<Self> {
            Arc::new(Self {
                replies: Mutex::new(replies.into()),
                seen: Mutex::default(),
            })
        }
    }

    impl Transport for Scripted {
        fn call(&self, body: &Value) -> Result<Value, TransportError> {
            self.seen.lock().push(body.clone());
            self.replies
                .lock()
                .pop_front()
                .unwrap_or_else(|| Err(TransportError::Transient("timeout".into())))
        }
    }

    fn client(t: Arc<Scripted>) -> RpcClient {
        RpcClient::new(
            t,
            1000.0,
            RetryPolicy {
                attempts: 3,
                base: Duration::from_millis(1),
            },
        )
    }

    fn ok(result: Value) -> Result<Value, TransportError> {
        Ok(json!({"jsonrpc": "2.0", "id": 1, "result": result}))
    }

    #[test]
    fn get_slot_sends_finalized_commitment() {
        let t = Scripted::new(vec![ok(json!(12345))]);
        assert_eq!(client(t.clone()).get_slot(), Ok(12345));
        let body = &t.seen.lock()[0];
        assert_eq!(body["method"], "getSlot");
        assert_eq!(body["params"][0]["commitment"], "finalized");
    }

    #[test]
    fn retries_transient_failures_then_gives_up() {
        let t = Scripted::new(vec![]);
        let err = client(t.clone()).get_slot().unwrap_err();
        assert!(matches!(err, SourceError::Unavailable(_)));
        assert_eq!(t.seen.lock().len(), 3);

        let t = Scripted::new(vec![Err(TransportError::Transient("reset".into())), ok(json!(7))]);
        assert_eq!(client(t.clone()).get_slot(), Ok(7));
        assert_eq!(t.seen.lock().len(), 2);
    }

    #[test]
    fn fatal_errors_are_not_retried() {
        let t = Scripted::new(vec![Err(TransportError::Fatal("HTTP 401".into()))]);
        assert!(client(t.clone()).get_slot().is_err());
        assert_eq!(t.seen.lock().len(), 1);
    }

    #[test]
    fn backoff_doubles_from_base() {
        let p = RetryPolicy::default();
        assert_eq!(p.delay_after(1), Duration::from_millis(200));
        assert_eq!(p.delay_after(2), Duration::from_millis(400));
    }

    #[test]
    fn skipped_slot_errors_map_to_skipped() {
        let skipped = Ok(json!({"jsonrpc": "2.0", "id": 1, "error": {"code": -32007, "message": "Slot 5 was skipped"}}));
        let t = Scripted::new(vec![skipped.clone(), skipped, ok(Value::Null)]);
        let c = client(t);
        assert_eq!(c.get_block(5), Ok(BlockResult::Skipped(5)));
        assert_eq!(c.get_block_time(5), Ok(None));
        assert_eq!(c.get_block_time(5), Ok(None));
    }

    #[test]
    fn other_rpc_errors_surface() {
        let t = Scripted::new(vec![Ok(json!({"error": {"code": -32602, "message": "bad params"}}))]);
        assert!(matches!(client(t).get_block_time(1), Err(SourceError::Unavailable(m)) if m.contains("bad params")));
    }

    #[test]
    fn decodes_get_block_results() {
        let block = testkit::block(77, 1_700_000_000, vec![testkit::raydium_fixture()]);
        let mut wire = serde_json::to_value(RpcBlock::from(&block)).unwrap();
        wire.as_object_mut().unwrap().remove("slot");
        let t = Scripted::new(vec![ok(wire)]);
        let got = client(t.clone()).get_block(77).unwrap();
        assert_eq!(got.block().unwrap(), &block);
        let body = &t.seen.lock()[0];
        assert_eq!(body["params"][1]["transactionDetails"], "full");
        assert_eq!(body["params"][1]["maxSupportedTransactionVersion"], 0);
    }

    #[test]
    fn missing_transaction_is_not_found() {
        let t = Scripted::new(vec![ok(Value::Null)]);
        assert!(matches!(client(t).find_transaction("sig"), Err(SourceError::TransactionNotFound(_))));
    }
}

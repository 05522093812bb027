use std::collections::HashMap;
use std::future::Future;
use std::net::SocketAddr;
use std::sync::Arc;
use std::thread::JoinHandle;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use ledgerquote_core::price::BaseCurrency;
use serde::Serialize;
use serde_json::Value;
use tokio::net::TcpListener;
use tokio::sync::Notify;
use tracing::info;

use crate::adapter::{AdapterRegistry, ChainAdapter, GatewayError, OhlcvQuery, ParseInput, PriceQuery};
use crate::docs::{CandleDoc, ErrorDoc, ParseDoc, PriceDoc, SwapDoc};
use crate::health::HealthMonitor;

#[derive(Clone)]
pub struct AppState {
    pub adapters: Arc<AdapterRegistry>,
    pub health: Arc<HealthMonitor>,
}

fn json<T: Serialize>(status: StatusCode, body: &T) -> Response {
    match serde_json::to_vec(body) {
        Ok(bytes) => (status, [(header::CONTENT_TYPE, "application/json")], bytes).into_response(),
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response(),
    }
}

impl IntoResponse for GatewayError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        json(
            status,
            &ErrorDoc {
                error: self.code().to_string(),
                message: self.to_string(),
            },
        )
    }
}

/// Unix seconds or RFC 3339.
pub fn parse_time(s: &str) -> Result<i64, GatewayError> {
    let s = s.trim();
    if let Ok(t) = s.parse::<i64>() {
        return Ok(t);
    }
    chrono::DateTime::parse_from_rfc3339(s)
        .map(|d| d.timestamp())
        .map_err(|_| GatewayError::BadRequest(format!("time {s:?} is neither unix seconds nor RFC 3339")))
}

/// Comma-separated base symbols; empty means all.
pub fn parse_bases(s: Option<&str>) -> Result<Vec<BaseCurrency>, GatewayError> {
    let Some(s) = s else { return Ok(vec![]) };
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let b: BaseCurrency = part
            .parse()
            .map_err(|_| GatewayError::BadRequest(format!("unknown base {part:?}")))?;
        if !out.contains(&b) {
            out.push(b);
        }
    }
    Ok(out)
}

fn required<'a>(q: &'a HashMap<String, String>, key: &str) -> Result<&'a str, GatewayError> {
    q.get(key)
        .map(String::as_str)
        .filter(|v| !v.trim().is_empty())
        .ok_or_else(|| GatewayError::BadRequest(format!("missing query parameter {key:?}")))
}

pub fn price_query(q: &HashMap<String, String>) -> Result<PriceQuery, GatewayError> {
    Ok(PriceQuery {
        mint: required(q, "mint")?.to_string(),
        t: parse_time(required(q, "t")?)?,
        bases: parse_bases(q.get("base").map(String::as_str))?,
    })
}

pub fn ohlcv_query(q: &HashMap<String, String>) -> Result<OhlcvQuery, GatewayError> {
    let interval = required(q, "interval")?;
    Ok(OhlcvQuery {
        mint: required(q, "mint")?.to_string(),
        from: parse_time(required(q, "from")?)?,
        to: parse_time(required(q, "to")?)?,
        interval: interval
            .trim()
            .parse()
            .map_err(|_| GatewayError::BadRequest(format!("interval {interval:?} is not a number of seconds")))?,
    })
}

fn is_base58(s: &str) -> bool {
    !s.is_empty()
        && s.bytes()
            .all(|b| b.is_ascii_alphanumeric() && !matches!(b, b'0' | b'O' | b'I' | b'l'))
}

/// A `/parse` body: a signature as plain text, a JSON string, or
/// `{"signature": ..}`; or a `{transaction, meta}` document.
pub fn parse_input(body: &[u8]) -> Result<ParseInput, GatewayError> {
    let text = std::str::from_utf8(body)
        .map_err(|_| GatewayError::BadRequest("body is not UTF-8".into()))?
        .trim();
    if text.is_empty() {
        return Err(GatewayError::BadRequest("empty body".into()));
    }
    let signature = |s: &str| {
        let s = s.trim();
        if is_base58(s) {
            Ok(ParseInput::Signature(s.to_string()))
        } else {
            Err(GatewayError::BadRequest(format!("{s:?} is not a base58 signature")))
        }
    };
    if !text.starts_with(['{', '"']) {
        return signature(text);
    }
    let v: Value = serde_json::from_str(text).map_err(|e| GatewayError::BadRequest(format!("body: {e}")))?;
    match v {
        Value::String(s) => signature(&s),
        Value::Object(ref o) if o.contains_key("transaction") => Ok(ParseInput::Document(v)),
        Value::Object(ref o) => match o.get("signature") {
            Some(Value::String(s)) => signature(s),
            _ => Err(GatewayError::BadRequest(
                "expected a signature or a {transaction, meta} document".into(),
            )),
        },
        _ => Err(GatewayError::BadRequest("unsupported body".into())),
    }
}

async fn blocking<T, F>(f: F) -> Result<T, GatewayError>
where
    F: FnOnce() -> Result<T, GatewayError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| GatewayError::Internal(format!("worker: {e}")))?
}

fn adapter(state: &AppState, chain: &str) -> Result<Arc<dyn ChainAdapter>, GatewayError> {
    state.adapters.get(chain).cloned()
}

async fn price(
    State(state): State<AppState>,
    Path(chain): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> Result<Response, GatewayError> {
    let a = adapter(&state, &chain)?;
    let q = price_query(&q)?;
    let info = blocking(move || a.price(&q)).await?;
    Ok(json(StatusCode::OK, &PriceDoc::from(&info)))
}

async fn ohlcv(
    State(state): State<AppState>,
    Path(chain): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> Result<Response, GatewayError> {
    let a = adapter(&state, &chain)?;
    let q = ohlcv_query(&q)?;
    let candles = blocking(move || a.ohlcv(&q)).await?;
    let docs: Vec<CandleDoc> = candles.iter().map(CandleDoc::from).collect();
    Ok(json(StatusCode::OK, &docs))
}

async fn run_parse(a: Arc<dyn ChainAdapter>, body: Bytes) -> Result<Response, GatewayError> {
    let input = parse_input(&body)?;
    let info = blocking(move || a.parse(&input)).await?;
    Ok(json(
        StatusCode::OK,
        &ParseDoc {
            swap_info: SwapDoc::from(&info),
        },
    ))
}

async fn parse_chain(
    State(state): State<AppState>,
    Path(chain): Path<String>,
    body: Bytes,
) -> Result<Response, GatewayError> {
    run_parse(adapter(&state, &chain)?, body).await
}

async fn parse_default(State(state): State<AppState>, body: Bytes) -> Result<Response, GatewayError> {
    let a = state
        .adapters
        .default_adapter()
        .cloned()
        .ok_or_else(|| GatewayError::UnknownChain(String::new()))?;
    run_parse(a, body).await
}

async fn healthz(State(state): State<AppState>) -> Response {
    json(StatusCode::OK, &state.health.report())
}

async fn holders(Query(q): Query<HashMap<String, String>>) -> Result<Response, GatewayError> {
    required(&q, "mint")?;
    Ok(json(
        StatusCode::NOT_IMPLEMENTED,
        &ErrorDoc {
            error: "unimplemented".into(),
            message: "holder lists are not implemented".into(),
        },
    ))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/linkxplore/price/{chain}", get(price))
        .route("/linkxplore/ohlcv/{chain}", get(ohlcv))
        .route("/linkxplore/parse/{chain}", post(parse_chain))
        .route("/parse", post(parse_default))
        .route("/healthz", get(healthz))
        .route("/holders", get(holders))
        .with_state(state)
}

pub async fn serve(
    listener: TcpListener,
    state: AppState,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await
}

/// A server on its own runtime thread; stops when dropped.
pub struct ServerHandle {
    pub addr: SocketAddr,
    stop: Arc<Notify>,
    thread: Option<JoinHandle<std::io::Result<()>>>,
}

impl ServerHandle {
    pub fn spawn(addr: &str, state: AppState) -> std::io::Result<Self> {
        let std_listener = std::net::TcpListener::bind(addr)?;
        std_listener.set_nonblocking(true)?;
        let addr = std_listener.local_addr()?;
        let stop = Arc::new(Notify::new());
        let signal = Arc::clone(&stop);
        let thread = std::thread::Builder::new().name("gateway".into()).spawn(move || {
            let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
            rt.block_on(async move {
                let listener = TcpListener::from_std(std_listener)?;
                serve(listener, state, async move { signal.notified().await }).await
            })
        })?;
        Ok(Self {
            addr,
            stop,
            thread: Some(thread),
        })
    }

    pub fn shutdown(mut self) -> std::io::Result<()> {
        self.stop.notify_one();
        match self.thread.take().map(JoinHandle::join) {
            Some(Ok(r)) => r,
            Some(Err(_)) => Err(std::io::Error::other("server thread panicked")),
            None => Ok(()),
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.stop.notify_one();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn times() {
        assert_eq!(parse_time("1700000000").unwrap(), 1_700_000_000);
        assert_eq!(parse_time("2023-11-14T22:13:20Z").unwrap(), 1_700_000_000);
        assert_eq!(parse_time("2023-11-14T23:13:20+01:00").unwrap(), 1_700_000_000);
        assert!(parse_time("yesterday").is_err());
    }

    #[test]
    fn bases() {
        assert_eq!(parse_bases(None).unwrap(), vec![]);
        assert_eq!(
            parse_bases(Some("usdc, SOL,USDC")).unwrap(),
            vec![BaseCurrency::Usdc, BaseCurrency::Sol]
        );
        assert!(parse_bases(Some("EUR")).is_err());
    }

    #[test]
    fn parse_bodies() {
        assert_eq!(parse_input(b"  abc123 \n").unwrap(), ParseInput::Signature("abc123".into()));
        assert_eq!(parse_input(br#""abc""#).unwrap(), ParseInput::Signature("abc".into()));
        assert_eq!(
            parse_input(br#"{"signature":"abc"}"#).unwrap(),
            ParseInput::Signature("abc".into())
        );
        assert!(matches!(
            parse_input(br#"{"transaction":{},"meta":{}}"#).unwrap(),
            ParseInput::Document(_)
        ));
        for bad in [&b""[..], b"   ", b"{not json", b"[1]", b"two words", br#"{"sig":"x"}"#, b"0OIl"] {
            assert!(parse_input(bad).is_err(), "{:?}", String::from_utf8_lossy(bad));
        }
    }

    #[test]
    fn query_params() {
        let q: HashMap<String, String> = [("mint", "m"), ("t", "5")]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        assert_eq!(price_query(&q).unwrap().t, 5);
        let mut q2 = q.clone();
        q2.remove("t");
        assert!(matches!(price_query(&q2), Err(GatewayError::BadRequest(_))));
        let mut q3 = q.clone();
        q3.insert("from".into(), "0".into());
        q3.insert("to".into(), "60".into());
        q3.insert("interval".into(), "1m".into());
        assert!(ohlcv_query(&q3).is_err());
        q3.insert("interval".into(), "60".into());
        assert_eq!(ohlcv_query(&q3).unwrap().interval, 60);
    }
}

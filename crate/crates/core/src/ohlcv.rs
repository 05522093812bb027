//! USD OHLCV candles for one token from decoded swaps: normalize, dedup by
//! signature, bucket, fence each bucket, aggregate.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decoder::decode_swap;
use crate::fence::fence_mask;
use crate::ledger::{Mint, SwapInfo};
use crate::price::{prefilter_block, price_at, BaseCurrency, PriceContext, PriceError};
use crate::registry::ProgramRegistry;
use crate::slot::{nearest_slot, ClockCalibration, SlotError};
use crate::source::{BlockResult, ChainSource, SourceError};

pub const INTERVALS: [i64; 5] = [60, 300, 900, 3600, 86400];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OhlcvError {
    #[error("no SOL/USD close cached for minute {0}")]
    MissingSolUsd(i64),
    #[error("swap {0} has no timestamp")]
    MissingTimestamp(String),
    #[error("timestamp {t} precedes the anchor {tau0}")]
    NegativeOffset { t: i64, tau0: i64 },
    #[error("interval must be positive")]
    InvalidInterval,
    #[error("empty range [{0}, {1})")]
    EmptyRange(i64, i64),
    #[error("token decimals disagree ({0} vs {1})")]
    InconsistentDecimals(u8, u8),
    #[error("csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Source(#[from] SourceError),
}

/// SOL/USD minute closes keyed by minute start.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolUsdCache {
    closes: BTreeMap<i64, f64>,
}

#[derive(Deserialize)]
struct CloseRow {
    timestamp: i64,
    close: f64,
}

impl SolUsdCache {
    pub fn minute(t: i64) -> i64 {
        t.div_euclid(60) * 60
    }

    pub fn insert(&mut self, t: i64, close: f64) {
        self.closes.insert(Self::minute(t), close);
    }

    pub fn get(&self, t: i64) -> Option<f64> {
        self.closes.get(&Self::minute(t)).copied()
    }

    pub fn len(&self) -> usize {
        self.closes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.closes.is_empty()
    }

    /// CSV `timestamp,close`.
    pub fn from_reader(reader: impl Read) -> Result<Self, OhlcvError> {
        let mut cache = Self::default();
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        for (i, row) in rdr.deserialize::<CloseRow>().enumerate() {
            let row = row.map_err(|e| OhlcvError::Csv(format!("row {}: {e}", i + 1)))?;
            if !(row.close > 0.0 && row.close.is_finite()) {
                return Err(OhlcvError::Csv(format!("row {}: close must be positive", i + 1)));
            }
            cache.insert(row.timestamp, row.close);
        }
        Ok(cache)
    }

    pub fn load(path: &Path) -> Result<Self, OhlcvError> {
        let f = std::fs::File::open(path).map_err(|e| OhlcvError::Csv(format!("{}: {e}", path.display())))?;
        Self::from_reader(f)
    }

    /// Minute closes from the price engine's SOL/USDC price at the last
    /// second of each minute in `[from, to)`, or at the tip for a minute
    /// still in progress. Minutes without a price are left out.
    pub fn synthesize(ctx: &PriceContext<'_>, from: i64, to: i64) -> Result<Self, PriceError> {
        let mut cache = Self::default();
        let mut m = Self::minute(from);
        while m < to {
            let at = |t| price_at(ctx, &Mint::sol(), t, &[BaseCurrency::Usdc]);
            let got = match at(m + 59) {
                Err(PriceError::FutureTimestamp { tip_time, .. }) if tip_time >= m => at(tip_time),
                r => r,
            };
            match got {
                Ok(p) => cache.insert(m, p.vwap),
                Err(PriceError::NotAvailable | PriceError::RateUnavailable { .. } | PriceError::FutureTimestamp { .. }) => {}
                Err(e) => return Err(e),
            }
            m += 60;
        }
        Ok(cache)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormalizedTrade {
    pub t: i64,
    /// USD per token.
    pub p: f64,
    /// Token UI amount.
    pub q: f64,
    /// USD notional.
    pub u: f64,
    pub q_raw: u64,
    pub decimals: u8,
    pub signature: String,
}

/// USD trade for `target`, or `None` when the counter side is not a base
/// currency (or the swap does not involve `target`).
pub fn normalize_trade(
    info: &SwapInfo,
    target: &Mint,
    sol_usd: &SolUsdCache,
    registry: &ProgramRegistry,
) -> Result<Option<NormalizedTrade>, OhlcvError> {
    let x = target.coalesce_sol();
    let (t_side, c_side) = if info.token_in_mint.coalesce_sol() == x {
        (
            (info.token_in_amount, info.token_in_decimals),
            (&info.token_out_mint, info.token_out_amount, info.token_out_decimals),
        )
    } else if info.token_out_mint.coalesce_sol() == x {
        (
            (info.token_out_amount, info.token_out_decimals),
            (&info.token_in_mint, info.token_in_amount, info.token_in_decimals),
        )
    } else {
        return Ok(None);
    };
    let Some(counter) = BaseCurrency::of_mint(&c_side.0.coalesce_sol(), registry) else {
        return Ok(None);
    };
    if c_side.0.coalesce_sol() == x {
        return Ok(None);
    }
    let a_t = t_side.0.to_ui_f64(t_side.1);
    let a_c = c_side.1.to_ui_f64(c_side.2);
    if !(a_t > 0.0 && a_c > 0.0) {
        return Ok(None);
    }
    let t = info
        .timestamp
        .ok_or_else(|| OhlcvError::MissingTimestamp(info.primary_signature().to_string()))?;
    let p_c = a_c / a_t;
    let p = match counter {
        BaseCurrency::Usdc | BaseCurrency::Usdt => p_c,
        BaseCurrency::Sol => p_c * sol_usd.get(t).ok_or(OhlcvError::MissingSolUsd(SolUsdCache::minute(t)))?,
    };
    Ok(Some(NormalizedTrade {
        t,
        p,
        q: a_t,
        u: p * a_t,
        q_raw: t_side.0.value(),
        decimals: t_side.1.value(),
        signature: info.primary_signature().to_string(),
    }))
}

/// One trade per signature, the one with the largest notional (first on a
/// tie), in input order.
pub fn dedup_trades(trades: Vec<NormalizedTrade>) -> Vec<NormalizedTrade> {
    let mut best: HashMap<&str, usize> = HashMap::new();
    for (i, tr) in trades.iter().enumerate() {
        best.entry(&tr.signature)
            .and_modify(|j| {
                if tr.u > trades[*j].u {
                    *j = i;
                }
            })
            .or_insert(i);
    }
    let keep: Vec<bool> = {
        let mut k = vec![false; trades.len()];
        for i in best.values() {
            k[*i] = true;
        }
        k
    };
    trades.into_iter().zip(keep).filter_map(|(t, k)| k.then_some(t)).collect()
}

pub fn bucket_index(t: i64, tau0: i64, delta: i64) -> Result<u64, OhlcvError> {
    if delta <= 0 {
        return Err(OhlcvError::InvalidInterval);
    }
    if t < tau0 {
        return Err(OhlcvError::NegativeOffset { t, tau0 });
    }
    Ok(((t - tau0) / delta) as u64)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Candle {
    pub bucket_start: i64,
    pub open: Option<f64>,
    pub high: Option<f64>,
    pub low: Option<f64>,
    pub close: Option<f64>,
    pub close_vwap: Option<f64>,
    /// Exact token volume in base units.
    pub vol_token_raw: u128,
    pub token_decimals: u8,
    pub vol_usd: f64,
    pub trade_count: usize,
}

impl Candle {
    pub fn empty(bucket_start: i64, token_decimals: u8) -> Self {
        Self {
            bucket_start,
            open: None,
            high: None,
            low: None,
            close: None,
            close_vwap: None,
            vol_token_raw: 0,
            token_decimals,
            vol_usd: 0.0,
            trade_count: 0,
        }
    }

    pub fn vol_token(&self) -> f64 {
        self.vol_token_raw as f64 / 10f64.powi(self.token_decimals as i32)
    }

    /// Token volume as an exact decimal string.
    pub fn vol_token_decimal(&self) -> String {
        match i128::try_from(self.vol_token_raw) {
            Ok(raw) => Decimal::try_from_i128_with_scale(raw, self.token_decimals as u32)
                .map(|d| d.normalize().to_string())
                .unwrap_or_else(|_| self.vol_token().to_string()),
            Err(_) => self.vol_token().to_string(),
        }
    }
}

/// Candle over already-fenced trades in time order.
pub fn aggregate_bucket(trades: &[NormalizedTrade], bucket_start: i64, vwap_close: bool) -> Candle {
    let decimals = trades.first().map(|t| t.decimals).unwrap_or(0);
    let mut c = Candle::empty(bucket_start, decimals);
    let (Some(first), Some(last)) = (trades.first(), trades.last()) else {
        return c;
    };
    let mut hi = f64::NEG_INFINITY;
    let mut lo = f64::INFINITY;
    let mut sq = 0.0;
    for tr in trades {
        hi = hi.max(tr.p);
        lo = lo.min(tr.p);
        c.vol_token_raw += tr.q_raw as u128;
        c.vol_usd += tr.u;
        sq += tr.q;
    }
    c.open = Some(first.p);
    c.close = Some(last.p);
    c.high = Some(hi);
    c.low = Some(lo);
    c.trade_count = trades.len();
    if vwap_close && sq > 0.0 {
        c.close_vwap = Some((c.vol_usd / sq).clamp(lo, hi));
    }
    c
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CandleConfig {
    /// Per-bucket log fence; `None` disables it.
    pub fence_ratio: Option<f64>,
    pub vwap_close: bool,
    /// Empty buckets repeat the previous close as a flat, zero-volume candle.
    pub carry_close: bool,
}

impl Default for CandleConfig {
    fn default() -> Self {
        Self {
            fence_ratio: Some(1.5),
            vwap_close: true,
            carry_close: false,
        }
    }
}

/// Anchor `τ0 = ⌊t_start/Δ⌋·Δ`; one candle per bucket up to `t_end`
/// (exclusive), empty ones included.
pub fn build_candles(
    swaps: &[SwapInfo],
    target: &Mint,
    delta: i64,
    range: (i64, i64),
    cfg: &CandleConfig,
    sol_usd: &SolUsdCache,
    registry: &ProgramRegistry,
) -> Result<Vec<Candle>, OhlcvError> {
    let (t_start, t_end) = range;
    if delta <= 0 {
        return Err(OhlcvError::InvalidInterval);
    }
    if t_end <= t_start {
        return Err(OhlcvError::EmptyRange(t_start, t_end));
    }
    let tau0 = t_start.div_euclid(delta) * delta;
    let n = (t_end - tau0 + delta - 1) / delta;

    let mut trades = Vec::new();
    for info in swaps {
        let Some(t) = info.timestamp else { continue };
        if t < tau0 || t >= t_end {
            continue;
        }
        if let Some(tr) = normalize_trade(info, target, sol_usd, registry)? {
            trades.push(tr);
        }
    }
    let mut trades = dedup_trades(trades);
    trades.sort_by(|a, b| (a.t, &a.signature).cmp(&(b.t, &b.signature)));
    let decimals = match trades.first() {
        Some(f) => {
            if let Some(bad) = trades.iter().find(|t| t.decimals != f.decimals) {
                return Err(OhlcvError::InconsistentDecimals(f.decimals, bad.decimals));
            }
            f.decimals
        }
        None => 0,
    };

    let mut buckets: Vec<Vec<NormalizedTrade>> = vec![Vec::new(); n as usize];
    for tr in trades {
        let k = bucket_index(tr.t, tau0, delta)? as usize;
        buckets[k].push(tr);
    }
    let mut out = Vec::with_capacity(buckets.len());
    let mut prev_close = None;
    for (k, bucket) in buckets.into_iter().enumerate() {
        let start = tau0 + k as i64 * delta;
        let kept: Vec<NormalizedTrade> = match cfg.fence_ratio {
            Some(r) if !bucket.is_empty() => {
                let prices: Vec<f64> = bucket.iter().map(|t| t.p).collect();
                bucket.into_iter().zip(fence_mask(&prices, r)).filter_map(|(t, k)| k.then_some(t)).collect()
            }
            _ => bucket,
        };
        let mut candle = aggregate_bucket(&kept, start, cfg.vwap_close);
        candle.token_decimals = decimals;
        if candle.trade_count == 0 && cfg.carry_close {
            candle.open = prev_close;
            candle.high = prev_close;
            candle.low = prev_close;
            candle.close = prev_close;
        }
        prev_close = candle.close.or(prev_close);
        out.push(candle);
    }
    Ok(out)
}

/// Decoded swaps involving `mint` with block time in `[from, to)`.
pub fn swaps_between(
    source: &dyn ChainSource,
    registry: &ProgramRegistry,
    mint: &Mint,
    from: i64,
    to: i64,
    cal: ClockCalibration,
) -> Result<Vec<SwapInfo>, OhlcvError> {
    if to <= from {
        return Err(OhlcvError::EmptyRange(from, to));
    }
    let mut slot = match nearest_slot(to as f64, source, cal) {
        Ok(c) => c.ceil_slot,
        Err(SlotError::FutureTimestamp { .. }) => source.get_slot()?,
        Err(SlotError::TimestampBeforeHistory(_)) => return Ok(Vec::new()),
        Err(SlotError::Source(e)) => return Err(e.into()),
        Err(SlotError::InvalidCalibration) => return Err(OhlcvError::InvalidInterval),
    };
    let mut per_block = Vec::new();
    loop {
        match source.get_block(slot) {
            Ok(BlockResult::Produced(block)) => {
                let bt = block.block_time.unwrap_or(i64::MIN);
                if bt < from {
                    break;
                }
                if bt < to {
                    let found: Vec<SwapInfo> = prefilter_block(&block, mint, registry)
                        .into_iter()
                        .filter_map(|tx| decode_swap(&tx.transaction, &tx.meta, registry).ok())
                        .filter(|info| info.involves(mint))
                        .collect();
                    per_block.push(found);
                }
            }
            Ok(BlockResult::Skipped(_)) => {}
            Err(SourceError::SlotOutOfRange(_)) => break,
            Err(e) => return Err(e.into()),
        }
        if slot == 0 {
            break;
        }
        slot -= 1;
    }
    Ok(per_block.into_iter().rev().flatten().collect())
}

pub const CSV_HEADER: [&str; 9] = [
    "bucket_start",
    "open",
    "high",
    "low",
    "close",
    "close_vwap",
    "vol_token",
    "vol_usd",
    "trade_count",
];

pub fn write_candles_csv(writer: impl Write, candles: &[Candle]) -> Result<(), OhlcvError> {
    let mut w = csv::Writer::from_writer(writer);
    let err = |e: csv::Error| OhlcvError::Csv(e.to_string());
    w.write_record(CSV_HEADER).map_err(err)?;
    let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for c in candles {
        w.write_record([
            c.bucket_start.to_string(),
            cell(c.open),
            cell(c.high),
            cell(c.low),
            cell(c.close),
            cell(c.close_vwap),
            c.vol_token_decimal(),
            c.vol_usd.to_string(),
            c.trade_count.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| OhlcvError::Csv(e.to_string()))
}

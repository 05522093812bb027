use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::decoder::decode_swap;
use crate::ledger::Slot;
use crate::registry::ProgramRegistry;
use crate::source::{BlockResult, ChainSource, SourceError};

use super::{filter_and_vwap, mint_hit, per_trade_price, BaseCurrency, PriceConfig, PriceError, TradePoint};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateSource {
    DexPool,
    Oracle,
    CexMidquote,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Rate {
    pub rate: f64,
    pub source: RateSource,
    pub as_of_slot: Slot,
}

/// `R[C→B]`: units of `B` per unit of `C`. Stored pairs always carry their
/// reciprocal; the diagonal is implicit.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RateMatrix {
    entries: BTreeMap<(BaseCurrency, BaseCurrency), Rate>,
}

impl RateMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sets `R[c→b]` and its reciprocal. Ignores the diagonal and
    /// non-positive rates.
    pub fn set(&mut self, c: BaseCurrency, b: BaseCurrency, rate: f64, source: RateSource, as_of_slot: Slot) {
        if c == b || !(rate > 0.0 && rate.is_finite()) {
            return;
        }
        self.entries.insert((c, b), Rate { rate, source, as_of_slot });
        self.entries.insert(
            (b, c),
            Rate {
                rate: 1.0 / rate,
                source,
                as_of_slot,
            },
        );
    }

    pub fn get(&self, c: BaseCurrency, b: BaseCurrency) -> Option<Rate> {
        self.entries.get(&(c, b)).copied()
    }

    pub fn rate(&self, c: BaseCurrency, b: BaseCurrency) -> Option<f64> {
        if c == b {
            return Some(1.0);
        }
        self.get(c, b).map(|r| r.rate)
    }

    pub fn require(&self, c: BaseCurrency, b: BaseCurrency) -> Result<f64, PriceError> {
        self.rate(c, b).ok_or(PriceError::RateUnavailable { from: c, to: b })
    }

    /// Fills `R[C→B]` through SOL where the direct edge is missing.
    pub fn triangulate(&mut self) {
        use BaseCurrency::*;
        for (c, b) in [(Usdc, Usdt)] {
            if self.get(c, b).is_some() {
                continue;
            }
            if let (Some(x), Some(y)) = (self.get(c, Sol), self.get(Sol, b)) {
                self.set(c, b, x.rate * y.rate, x.source.max(y.source), x.as_of_slot.min(y.as_of_slot));
            }
        }
    }
}

/// Operator-supplied rates, CSV `timestamp,pair,rate` with pairs written
/// `SOL/USDC` (units of USDC per SOL).
#[derive(Clone, Debug, PartialEq)]
pub struct RateFallback {
    kind: RateSource,
    rows: BTreeMap<(BaseCurrency, BaseCurrency), Vec<(i64, f64)>>,
}

#[derive(Deserialize)]
struct FallbackRow {
    timestamp: i64,
    pair: String,
    rate: f64,
}

impl RateFallback {
    pub fn load(path: &Path, kind: RateSource) -> Result<Self, SourceError> {
        let f = std::fs::File::open(path).map_err(|e| SourceError::Unavailable(format!("{}: {e}", path.display())))?;
        Self::from_reader(f, kind)
    }

    pub fn from_reader(reader: impl Read, kind: RateSource) -> Result<Self, SourceError> {
        let mut rows: BTreeMap<_, Vec<(i64, f64)>> = BTreeMap::new();
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        for (i, rec) in rdr.deserialize::<FallbackRow>().enumerate() {
            let row = rec.map_err(|e| SourceError::Malformed(format!("rate row {}: {e}", i + 1)))?;
            let (c, b) = row
                .pair
                .split_once(['/', '-'])
                .ok_or_else(|| SourceError::Malformed(format!("rate row {}: pair {:?}", i + 1, row.pair)))?;
            let c: BaseCurrency = c.parse().map_err(|e: PriceError| SourceError::Malformed(e.to_string()))?;
            let b: BaseCurrency = b.parse().map_err(|e: PriceError| SourceError::Malformed(e.to_string()))?;
            if !(row.rate > 0.0 && row.rate.is_finite()) || c == b {
                return Err(SourceError::Malformed(format!("rate row {}: bad rate", i + 1)));
            }
            rows.entry((c, b)).or_default().push((row.timestamp, row.rate));
        }
        for v in rows.values_mut() {
            v.sort_by_key(|(ts, _)| *ts);
        }
        Ok(Self { kind, rows })
    }

    pub fn kind(&self) -> RateSource {
        self.kind
    }

    /// Row nearest to `t` (earlier wins a tie), inverted if only `b/c` is listed.
    pub fn lookup(&self, c: BaseCurrency, b: BaseCurrency, t: i64) -> Option<f64> {
        let nearest = |v: &Vec<(i64, f64)>| {
            v.iter()
                .min_by_key(|(ts, _)| (ts.abs_diff(t), *ts))
                .map(|(_, r)| *r)
        };
        if let Some(r) = self.rows.get(&(c, b)).and_then(nearest) {
            return Some(r);
        }
        self.rows.get(&(b, c)).and_then(nearest).map(|r| 1.0 / r)
    }
}

const PAIRS: [(BaseCurrency, BaseCurrency); 3] = [
    (BaseCurrency::Sol, BaseCurrency::Usdc),
    (BaseCurrency::Sol, BaseCurrency::Usdt),
    (BaseCurrency::Usdc, BaseCurrency::Usdt),
];

/// Rates near `anchor`: VWAP of base↔base swaps over the `rate_lookback_slots`
/// slots ending at the highest anchor slot, then the fallback file, then
/// triangulation through SOL.
pub fn build_rate_matrix(
    anchor: &[Slot],
    t: i64,
    source: &dyn ChainSource,
    registry: &ProgramRegistry,
    cfg: &PriceConfig,
    fallback: Option<&RateFallback>,
) -> Result<RateMatrix, PriceError> {
    let mut m = RateMatrix::new();
    let Some(&hi) = anchor.iter().max() else {
        return Ok(m);
    };
    let lo = anchor.iter().min().copied().unwrap_or(hi).saturating_sub(cfg.rate_lookback_slots);
    let stables = [registry.usdc.clone(), registry.usdt.clone()];
    let mut points: BTreeMap<(BaseCurrency, BaseCurrency), Vec<TradePoint>> = BTreeMap::new();
    for slot in lo..=hi {
        let block = match source.get_block(slot) {
            Ok(BlockResult::Produced(b)) => b,
            Ok(BlockResult::Skipped(_)) | Err(SourceError::SlotOutOfRange(_)) => continue,
            Err(e) => return Err(e.into()),
        };
        // every base pair has a stable side, and stable transfers always
        // show up in token balances
        for tx in block.transactions.iter().filter(|tx| stables.iter().any(|m| mint_hit(tx, m))) {
            let Ok(info) = decode_swap(&tx.transaction, &tx.meta, registry) else {
                continue;
            };
            for (c, b) in PAIRS {
                let cm = c.mint(registry);
                if let Ok((p, w)) = per_trade_price(&info, &cm, b, registry) {
                    points.entry((c, b)).or_default().push(TradePoint {
                        price: p,
                        weight: w,
                        signature: info.primary_signature().to_string(),
                        slot,
                    });
                }
            }
        }
    }
    for (c, b) in PAIRS {
        if let Some(v) = points.get(&(c, b)).and_then(|pts| filter_and_vwap(pts, cfg, b)) {
            m.set(c, b, v.vwap, RateSource::DexPool, hi);
        } else if let Some(r) = fallback.and_then(|f| f.lookup(c, b, t)) {
            m.set(c, b, r, fallback.map(RateFallback::kind).unwrap_or(RateSource::Oracle), hi);
        }
    }
    m.triangulate();
    Ok(m)
}

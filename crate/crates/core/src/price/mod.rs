//! Price of a mint at a timestamp: nearest slot, mint prefilter, decode,
//! base conversion, dust and log-fence filtering, then VWAP. Backs off to
//! earlier slots and finally widens to a trailing window.

mod engine;
mod rates;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decoder::touches_swap_venue;
use crate::fence::fence_mask;
use crate::ledger::{Block, ConfirmedTransaction, Mint, Slot, SwapInfo};
use crate::registry::ProgramRegistry;
use crate::slot::ClockCalibration;
use crate::source::SourceError;

pub use engine::{price_at, PriceContext};
pub use rates::{build_rate_matrix, Rate, RateFallback, RateMatrix, RateSource};

/// Quote currencies, declared in preference order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum BaseCurrency {
    Sol,
    Usdc,
    Usdt,
}

impl BaseCurrency {
    pub const ALL: [BaseCurrency; 3] = [BaseCurrency::Sol, BaseCurrency::Usdc, BaseCurrency::Usdt];

    pub fn symbol(self) -> &'static str {
        match self {
            BaseCurrency::Sol => "SOL",
            BaseCurrency::Usdc => "USDC",
            BaseCurrency::Usdt => "USDT",
        }
    }

    pub fn mint(self, registry: &ProgramRegistry) -> Mint {
        match self {
            BaseCurrency::Sol => Mint::sol(),
            BaseCurrency::Usdc => registry.usdc.clone(),
            BaseCurrency::Usdt => registry.usdt.clone(),
        }
    }

    pub fn of_mint(mint: &Mint, registry: &ProgramRegistry) -> Option<Self> {
        if mint.is_sol() {
            Some(BaseCurrency::Sol)
        } else if *mint == registry.usdc {
            Some(BaseCurrency::Usdc)
        } else if *mint == registry.usdt {
            Some(BaseCurrency::Usdt)
        } else {
            None
        }
    }
}

impl fmt::Display for BaseCurrency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for BaseCurrency {
    type Err = PriceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "SOL" | "WSOL" => Ok(BaseCurrency::Sol),
            "USDC" => Ok(BaseCurrency::Usdc),
            "USDT" => Ok(BaseCurrency::Usdt),
            other => Err(PriceError::InvalidConfig(format!("unknown base currency {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DustThresholds {
    pub sol: f64,
    pub usdc: f64,
    pub usdt: f64,
}

impl Default for DustThresholds {
    fn default() -> Self {
        Self {
            sol: 1e-4,
            usdc: 1e-2,
            usdt: 1e-2,
        }
    }
}

impl DustThresholds {
    pub fn get(&self, base: BaseCurrency) -> f64 {
        match base {
            BaseCurrency::Sol => self.sol,
            BaseCurrency::Usdc => self.usdc,
            BaseCurrency::Usdt => self.usdt,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PriceConfig {
    pub dust: DustThresholds,
    pub fence_ratio: f64,
    pub max_backoff_slots: u64,
    pub widen_window_seconds: i64,
    pub rate_lookback_slots: u64,
    pub avg_block_time: f64,
}

impl Default for PriceConfig {
    fn default() -> Self {
        Self {
            dust: DustThresholds::default(),
            fence_ratio: 1.5,
            max_backoff_slots: 64,
            widen_window_seconds: 3600,
            rate_lookback_slots: 32,
            avg_block_time: 0.4,
        }
    }
}

impl PriceConfig {
    pub fn validate(&self) -> Result<(), PriceError> {
        if !(self.fence_ratio > 1.0 && self.fence_ratio.is_finite()) {
            return Err(PriceError::InvalidConfig("fence_ratio must exceed 1".into()));
        }
        for b in BaseCurrency::ALL {
            if !(self.dust.get(b) > 0.0) {
                return Err(PriceError::InvalidConfig(format!("dust threshold for {b} must be positive")));
            }
        }
        if self.widen_window_seconds < 0 {
            return Err(PriceError::InvalidConfig("widen_window_seconds must be ≥ 0".into()));
        }
        self.calibration().map(|_| ())
    }

    pub fn calibration(&self) -> Result<ClockCalibration, PriceError> {
        ClockCalibration::new(self.avg_block_time)
            .map_err(|_| PriceError::InvalidConfig("avg_block_time must be positive".into()))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PriceError {
    #[error("timestamp {t} is after the finalized tip time {tip_time}")]
    FutureTimestamp { t: i64, tip_time: i64 },
    #[error("no conversion rate from {from} to {to}")]
    RateUnavailable { from: BaseCurrency, to: BaseCurrency },
    #[error("no price available")]
    NotAvailable,
    #[error("invalid price config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Source(#[from] SourceError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NotQuotedAgainst(pub BaseCurrency);

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TradePoint {
    /// Base units per token.
    pub price: f64,
    /// Base units.
    pub weight: f64,
    pub signature: String,
    pub slot: Slot,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Vwap {
    pub vwap: f64,
    pub kept: usize,
    pub total_weight: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriceMethod {
    SlotVwap,
    WindowVwap,
}

impl PriceMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            PriceMethod::SlotVwap => "slot_vwap",
            PriceMethod::WindowVwap => "window_vwap",
        }
    }
}

/// Where a conversion used in a price came from.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateNote {
    pub from: BaseCurrency,
    pub to: BaseCurrency,
    pub rate: f64,
    pub source: RateSource,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PriceInfo {
    pub vwap: f64,
    pub base: BaseCurrency,
    pub slot: Slot,
    pub method: PriceMethod,
    pub trade_count: usize,
    pub total_weight: f64,
    pub rate_notes: Vec<RateNote>,
}

fn mint_hit(tx: &ConfirmedTransaction, mint: &Mint) -> bool {
    let target = mint.coalesce_sol();
    tx.meta
        .pre_token_balances
        .iter()
        .chain(&tx.meta.post_token_balances)
        .any(|b| b.mint.coalesce_sol() == target)
}

/// Transactions that carry `mint` in their token balances or call a swap
/// venue at the top level. Never drops a transaction that decodes to a
/// swap involving `mint`.
pub fn prefilter_block<'a>(block: &'a Block, mint: &Mint, registry: &ProgramRegistry) -> Vec<&'a ConfirmedTransaction> {
    block
        .transactions
        .iter()
        .filter(|tx| mint_hit(tx, mint) || touches_swap_venue(&tx.transaction, registry))
        .collect()
}

/// The base currency `info` quotes `mint` against, if any.
pub fn quote_currency(info: &SwapInfo, mint: &Mint, registry: &ProgramRegistry) -> Option<BaseCurrency> {
    let x = mint.coalesce_sol();
    let (a, b) = (info.token_in_mint.coalesce_sol(), info.token_out_mint.coalesce_sol());
    let other = if a == x {
        b
    } else if b == x {
        a
    } else {
        return None;
    };
    if other == x {
        return None;
    }
    BaseCurrency::of_mint(&other, registry)
}

/// `(p, w)` of one swap of `mint` quoted in `c`: `q_out/q_in` when selling
/// `mint` for `c`, `q_in/q_out` when buying; the weight is the `c` side.
pub fn per_trade_price(
    info: &SwapInfo,
    mint: &Mint,
    c: BaseCurrency,
    registry: &ProgramRegistry,
) -> Result<(f64, f64), NotQuotedAgainst> {
    let x = mint.coalesce_sol();
    let cm = c.mint(registry);
    let m_in = info.token_in_mint.coalesce_sol();
    let m_out = info.token_out_mint.coalesce_sol();
    let q_in = info.token_in_amount.to_ui_f64(info.token_in_decimals);
    let q_out = info.token_out_amount.to_ui_f64(info.token_out_decimals);
    if x == cm || !(q_in > 0.0 && q_out > 0.0) {
        return Err(NotQuotedAgainst(c));
    }
    if m_in == x && m_out == cm {
        Ok((q_out / q_in, q_out))
    } else if m_in == cm && m_out == x {
        Ok((q_in / q_out, q_in))
    } else {
        Err(NotQuotedAgainst(c))
    }
}

/// Dust filter at `τ_B`, log fence around the median, then `Σwp / Σw`.
/// `None` when nothing survives.
pub fn filter_and_vwap(points: &[TradePoint], cfg: &PriceConfig, base: BaseCurrency) -> Option<Vwap> {
    let tau = cfg.dust.get(base);
    let kept: Vec<&TradePoint> = points
        .iter()
        .filter(|p| p.weight >= tau && p.price > 0.0 && p.price.is_finite() && p.weight.is_finite())
        .collect();
    if kept.is_empty() {
        return None;
    }
    let prices: Vec<f64> = kept.iter().map(|p| p.price).collect();
    let mask = fence_mask(&prices, cfg.fence_ratio);
    let (mut sw, mut swp, mut n) = (0.0, 0.0, 0usize);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (p, keep) in kept.iter().zip(mask) {
        if keep {
            sw += p.weight;
            swp += p.weight * p.price;
            n += 1;
            lo = lo.min(p.price);
            hi = hi.max(p.price);
        }
    }
    if n == 0 || !(sw > 0.0) {
        return None;
    }
    // rounding can leave the ratio an ulp outside the kept range
    let vwap = (swp / sw).clamp(lo, hi);
    Some(Vwap {
        vwap,
        kept: n,
        total_weight: sw,
    })
}

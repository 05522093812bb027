//! JSON response documents. Prices and other real numbers are rendered as
//! decimal strings; raw token amounts as integer strings.

use ledgerquote_core::ledger::SwapInfo;
use ledgerquote_core::ohlcv::Candle;
use ledgerquote_core::price::{PriceInfo, RateNote};
use serde::Serialize;

/// Shortest round-trip decimal form of `x`, never in exponent notation.
pub fn decimal_string(x: f64) -> String {
    format!("{x}")
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SourceNoteDoc {
    pub from: String,
    pub to: String,
    pub rate: String,
    pub source: String,
}

impl From<&RateNote> for SourceNoteDoc {
    fn from(n: &RateNote) -> Self {
        Self {
            from: n.from.symbol().to_string(),
            to: n.to.symbol().to_string(),
            rate: decimal_string(n.rate),
            source: serde_json::to_value(n.source)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PriceDoc {
    pub price: String,
    pub base: String,
    pub slot: u64,
    pub method: String,
    pub trade_count: usize,
    pub total_weight: String,
    pub source_notes: Vec<SourceNoteDoc>,
}

impl From<&PriceInfo> for PriceDoc {
    fn from(p: &PriceInfo) -> Self {
        Self {
            price: decimal_string(p.vwap),
            base: p.base.symbol().to_string(),
            slot: p.slot,
            method: p.method.as_str().to_string(),
            trade_count: p.trade_count,
            total_weight: decimal_string(p.total_weight),
            source_notes: p.rate_notes.iter().map(SourceNoteDoc::from).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CandleDoc {
    pub bucket_start: i64,
    pub open: Option<String>,
    pub high: Option<String>,
    pub low: Option<String>,
    pub close: Option<String>,
    pub close_vwap: Option<String>,
    pub vol_token: String,
    pub vol_usd: String,
    pub trade_count: usize,
}

impl From<&Candle> for CandleDoc {
    fn from(c: &Candle) -> Self {
        let s = |v: Option<f64>| v.map(decimal_string);
        Self {
            bucket_start: c.bucket_start,
            open: s(c.open),
            high: s(c.high),
            low: s(c.low),
            close: s(c.close),
            close_vwap: s(c.close_vwap),
            vol_token: c.vol_token_decimal(),
            vol_usd: decimal_string(c.vol_usd),
            trade_count: c.trade_count,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SwapDoc {
    pub token_in_mint: String,
    pub token_in_amount: String,
    pub token_in_decimals: u8,
    pub token_out_mint: String,
    pub token_out_amount: String,
    pub token_out_decimals: u8,
    pub amm_tags: Vec<String>,
    pub signer: String,
    pub signatures: Vec<String>,
    pub timestamp: Option<i64>,
}

impl From<&SwapInfo> for SwapDoc {
    fn from(s: &SwapInfo) -> Self {
        Self {
            token_in_mint: s.token_in_mint.address().to_string(),
            token_in_amount: s.token_in_amount.value().to_string(),
            token_in_decimals: s.token_in_decimals.value(),
            token_out_mint: s.token_out_mint.address().to_string(),
            token_out_amount: s.token_out_amount.value().to_string(),
            token_out_decimals: s.token_out_decimals.value(),
            amm_tags: s.amm_tags.clone(),
            signer: s.signer.clone(),
            signatures: s.signatures.clone(),
            timestamp: s.timestamp,
        }
    }
}

/// `/parse` body. The key is camelCase because deployment smoke checks
/// look for it by that name.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParseDoc {
    #[serde(rename = "swapInfo")]
    pub swap_info: SwapDoc,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HealthDoc {
    pub status: &'static str,
    pub source: &'static str,
    pub uptime_s: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorDoc {
    pub error: String,
    pub message: String,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimals_never_use_exponents() {
        assert_eq!(decimal_string(0.5), "0.5");
        assert_eq!(decimal_string(1e-9), "0.000000001");
        assert_eq!(decimal_string(2e21), "2000000000000000000000");
        assert_eq!(decimal_string(192.0), "192");
    }

    #[test]
    fn parse_doc_key() {
        let info = ledgerquote_core::ledger::SwapInfo {
            token_in_mint: ledgerquote_core::ledger::Mint::sol(),
            token_in_amount: ledgerquote_core::ledger::RawAmount(u64::MAX),
            token_in_decimals: ledgerquote_core::ledger::Decimals::SOL,
            token_out_mint: ledgerquote_core::ledger::Mint::sol(),
            token_out_amount: ledgerquote_core::ledger::RawAmount(1),
            token_out_decimals: ledgerquote_core::ledger::Decimals::SOL,
            amm_tags: vec![],
            signer: "s".into(),
            signatures: vec!["x".into()],
            timestamp: None,
        };
        let v = serde_json::to_value(ParseDoc {
            swap_info: SwapDoc::from(&info),
        })
        .unwrap();
        assert_eq!(v["swapInfo"]["token_in_amount"], "18446744073709551615");
        assert_eq!(v["swapInfo"]["token_in_decimals"], 9);
    }
}

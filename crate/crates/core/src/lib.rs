//! Market data from raw Solana ledger blocks: swap decoding, slot search,
//! VWAP pricing, OHLCV candles, plus cost and accuracy helpers.

pub mod bench;
pub mod cost;
pub mod decoder;
pub mod fence;
pub mod ledger;
pub mod ohlcv;
pub mod price;
pub mod registry;
pub mod slot;
pub mod source;

#[cfg(any(test, feature = "testkit"))]
pub mod testkit;

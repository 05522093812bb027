//! Canonical types for raw ledger data and decoded swap results.
//!
//! Everything here is an immutable value after construction. The RPC wire
//! shape (`getBlock` / `getTransaction` with `encoding=json`) lives in
//! [`rpc_json`] and converts into these types.

pub mod rpc_json;

use std::fmt;
use std::str::FromStr;

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Wrapped-SOL mint; also the canonical spelling of native SOL.
pub const WSOL_MINT: &str = "So11111111111111111111111111111111111111112";

/// Decimals of native SOL (lamports).
pub const SOL_DECIMALS: u8 = 9;

/// Largest decimals value accepted for any mint.
pub const MAX_DECIMALS: u8 = 18;

pub type Slot = u64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LedgerError {
    #[error("mint address is empty")]
    EmptyMint,
    #[error("decimals {0} exceed {MAX_DECIMALS}")]
    InvalidDecimals(u8),
    #[error("malformed record: {0}")]
    Malformed(String),
}

/// A token mint. Native SOL uses the wrapped-SOL address with `is_native`
/// set; compare through [`Mint::coalesce_sol`] when wSOL and SOL must match.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Mint {
    address: String,
    is_native: bool,
}

impl Mint {
    pub fn new(address: impl Into<String>) -> Result<Self, LedgerError> {
        let address = address.into();
        if address.trim().is_empty() {
            return Err(LedgerError::EmptyMint);
        }
        Ok(Self {
            address,
            is_native: false,
        })
    }

    pub fn sol() -> Self {
        Self {
            address: WSOL_MINT.to_string(),
            is_native: true,
        }
    }

    pub fn address(&self) -> &str {
        &self.address
    }

    pub fn is_native(&self) -> bool {
        self.is_native
    }

    /// True for native SOL and for wrapped SOL.
    pub fn is_sol(&self) -> bool {
        self.is_native || self.address == WSOL_MINT
    }

    /// Maps wrapped SOL onto native SOL; every other mint is returned as-is.
    pub fn coalesce_sol(&self) -> Mint {
        if self.is_sol() {
            Mint::sol()
        } else {
            self.clone()
        }
    }
}

/// Base58 text that decodes to exactly 32 bytes.
pub fn looks_like_pubkey(s: &str) -> bool {
    matches!(bs58::decode(s).into_vec(), Ok(v) if v.len() == 32)
}

impl fmt::Display for Mint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.address)
    }
}

impl FromStr for Mint {
    type Err = LedgerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mint::new(s)
    }
}

impl From<Mint> for String {
    fn from(m: Mint) -> String {
        m.address
    }
}

impl TryFrom<String> for Mint {
    type Error = LedgerError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        Mint::new(s)
    }
}

/// Integer amount in base units. Never stored as floating point.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RawAmount(pub u64);

impl RawAmount {
    pub fn value(self) -> u64 {
        self.0
    }

    /// Exact UI amount `value / 10^decimals`.
    pub fn to_ui(self, decimals: Decimals) -> Decimal {
        Decimal::from_i128_with_scale(i128::from(self.0), u32::from(decimals.0))
    }

    /// Inverse of [`RawAmount::to_ui`]; `None` if `ui` is not an exact
    /// multiple of `10^-decimals` or does not fit in a `u64`.
    pub fn from_ui(ui: Decimal, decimals: Decimals) -> Option<RawAmount> {
        let scaled = ui.checked_mul(Decimal::from_i128_with_scale(10i128.pow(u32::from(decimals.0)), 0))?;
        if !scaled.fract().is_zero() {
            return None;
        }
        let mut int = scaled.trunc();
        int.rescale(0);
        u64::try_from(int.mantissa()).ok().map(RawAmount)
    }

    /// UI amount as `f64`, for price arithmetic.
    pub fn to_ui_f64(self, decimals: Decimals) -> f64 {
        self.0 as f64 / 10f64.powi(i32::from(decimals.0))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Decimals(u8);

impl Decimals {
    pub const SOL: Decimals = Decimals(SOL_DECIMALS);
    pub const ZERO: Decimals = Decimals(0);

    pub fn new(value: u8) -> Result<Self, LedgerError> {
        if value > MAX_DECIMALS {
            return Err(LedgerError::InvalidDecimals(value));
        }
        Ok(Self(value))
    }

    pub fn value(self) -> u8 {
        self.0
    }
}

impl TryFrom<u8> for Decimals {
    type Error = LedgerError;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        Decimals::new(v)
    }
}

impl From<Decimals> for u8 {
    fn from(d: Decimals) -> u8 {
        d.0
    }
}

/// A compiled instruction: indexes into the transaction's account-key table.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instruction {
    pub program_id_index: usize,
    pub accounts: Vec<usize>,
    pub data: Vec<u8>,
    /// Invocation depth reported by the runtime (1 = outer), when known.
    pub stack_height: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenBalanceEntry {
    pub account_index: usize,
    pub mint: Mint,
    pub decimals: Decimals,
    pub amount: RawAmount,
    pub owner: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InnerInstructionSet {
    /// Index of the outer instruction these were invoked under.
    pub index: usize,
    pub instructions: Vec<Instruction>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransactionRecord {
    pub signatures: Vec<String>,
    pub message_account_keys: Vec<String>,
    pub loaded_addresses: Vec<String>,
    pub outer_instructions: Vec<Instruction>,
    pub slot: Option<Slot>,
    pub block_time: Option<i64>,
}

impl TransactionRecord {
    pub fn primary_signature(&self) -> &str {
        self.signatures.first().map(String::as_str).unwrap_or_default()
    }

    pub fn validate(&self) -> Result<(), LedgerError> {
        if self.signatures.is_empty() {
            return Err(LedgerError::Malformed("transaction has no signatures".into()));
        }
        if self.message_account_keys.is_empty() {
            return Err(LedgerError::Malformed("transaction has no account keys".into()));
        }
        Ok(())
    }
}

/// Message account keys followed by loaded (lookup-table) addresses.
/// Index `i` of any instruction resolves iff `i < table.len()`.
pub fn account_key_table(tx: &TransactionRecord) -> Vec<String> {
    tx.message_account_keys
        .iter()
        .chain(tx.loaded_addresses.iter())
        .cloned()
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TransactionMeta {
    pub err: Option<serde_json::Value>,
    pub pre_balances: Vec<u64>,
    pub post_balances: Vec<u64>,
    pub pre_token_balances: Vec<TokenBalanceEntry>,
    pub post_token_balances: Vec<TokenBalanceEntry>,
    pub inner_instructions: Vec<InnerInstructionSet>,
    pub log_messages: Vec<String>,
}

impl TransactionMeta {
    pub fn failed(&self) -> bool {
        self.err.as_ref().is_some_and(|e| !e.is_null())
    }

    /// Inner instructions recorded under outer index `outer`, with their
    /// position inside the recorded set.
    pub fn inner_for(&self, outer: usize) -> impl Iterator<Item = (usize, &Instruction)> {
        self.inner_instructions
            .iter()
            .filter(move |set| set.index == outer)
            .flat_map(|set| set.instructions.iter().enumerate())
    }

    pub fn validate(&self, tx: &TransactionRecord) -> Result<(), LedgerError> {
        let keys = tx.message_account_keys.len() + tx.loaded_addresses.len();
        if self.pre_balances.len() != self.post_balances.len() {
            return Err(LedgerError::Malformed(format!(
                "preBalances has {} entries, postBalances {}",
                self.pre_balances.len(),
                self.post_balances.len()
            )));
        }
        if !self.pre_balances.is_empty() && self.pre_balances.len() != keys {
            return Err(LedgerError::Malformed(format!(
                "balances cover {} accounts, key table has {keys}",
                self.pre_balances.len()
            )));
        }
        if let Some(set) = self
            .inner_instructions
            .iter()
            .find(|set| set.index >= tx.outer_instructions.len())
        {
            return Err(LedgerError::Malformed(format!(
                "inner instructions reference outer index {}",
                set.index
            )));
        }
        for entry in self.pre_token_balances.iter().chain(&self.post_token_balances) {
            if entry.account_index >= keys {
                return Err(LedgerError::Malformed(format!(
                    "token balance references account {}",
                    entry.account_index
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfirmedTransaction {
    pub transaction: TransactionRecord,
    pub meta: TransactionMeta,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub slot: Slot,
    pub block_time: Option<i64>,
    pub transactions: Vec<ConfirmedTransaction>,
}

impl Block {
    pub fn skipped(slot: Slot) -> Self {
        Self {
            slot,
            block_time: None,
            transactions: Vec::new(),
        }
    }

    pub fn is_skipped(&self) -> bool {
        self.block_time.is_none()
    }
}

/// A decoded swap at route level.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwapInfo {
    pub token_in_mint: Mint,
    pub token_in_amount: RawAmount,
    pub token_in_decimals: Decimals,
    pub token_out_mint: Mint,
    pub token_out_amount: RawAmount,
    pub token_out_decimals: Decimals,
    pub amm_tags: Vec<String>,
    pub signer: String,
    pub signatures: Vec<String>,
    pub timestamp: Option<i64>,
}

impl SwapInfo {
    pub fn involves(&self, mint: &Mint) -> bool {
        let target = mint.coalesce_sol();
        self.token_in_mint.coalesce_sol() == target || self.token_out_mint.coalesce_sol() == target
    }

    pub fn primary_signature(&self) -> &str {
        self.signatures.first().map(String::as_str).unwrap_or_default()
    }
}

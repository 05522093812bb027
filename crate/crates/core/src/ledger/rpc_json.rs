//! Solana JSON-RPC wire shapes (`encoding=json`, full transaction details)
//! and their conversion to and from the ledger model.
//!
//! The fixture store writes one [`RpcBlock`] per line with an extra `slot`
//! field, so a captured `getBlock` response replays unchanged.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{
    Block, ConfirmedTransaction, Decimals, InnerInstructionSet, Instruction, LedgerError, Mint,
    RawAmount, Slot, TokenBalanceEntry, TransactionMeta, TransactionRecord,
};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RpcBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slot: Option<Slot>,
    pub block_time: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blockhash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_slot: Option<Slot>,
    #[serde(default)]
    pub transactions: Vec<RpcTransactionWithMeta>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RpcTransactionWithMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slot: Option<Slot>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_time: Option<i64>,
    pub transaction: RpcTransaction,
    pub meta: Option<RpcMeta>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version: Option<Value>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RpcTransaction {
    pub signatures: Vec<String>,
    pub message: RpcMessage,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RpcMessage {
    pub account_keys: Vec<String>,
    pub instructions: Vec<RpcInstruction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recent_blockhash: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RpcInstruction {
    pub program_id_index: usize,
    pub accounts: Vec<usize>,
    /// base58
    pub data: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stack_height: Option<u32>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RpcMeta {
    pub err: Option<Value>,
    #[serde(default)]
    pub fee: u64,
    pub pre_balances: Vec<u64>,
    pub post_balances: Vec<u64>,
    #[serde(default)]
    pub pre_token_balances: Option<Vec<RpcTokenBalance>>,
    #[serde(default)]
    pub post_token_balances: Option<Vec<RpcTokenBalance>>,
    #[serde(default)]
    pub inner_instructions: Option<Vec<RpcInnerInstructions>>,
    #[serde(default)]
    pub log_messages: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loaded_addresses: Option<RpcLoadedAddresses>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RpcTokenBalance {
    pub account_index: usize,
    pub mint: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub owner: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub program_id: Option<String>,
    pub ui_token_amount: RpcUiTokenAmount,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RpcUiTokenAmount {
    pub amount: String,
    pub decimals: u8,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RpcInnerInstructions {
    pub index: usize,
    pub instructions: Vec<RpcInstruction>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct RpcLoadedAddresses {
    #[serde(default)]
    pub writable: Vec<String>,
    #[serde(default)]
    pub readonly: Vec<String>,
}

fn instruction_from_rpc(ix: &RpcInstruction) -> Result<Instruction, LedgerError> {
    let data = bs58::decode(&ix.data)
        .into_vec()
        .map_err(|e| LedgerError::Malformed(format!("instruction data is not base58: {e}")))?;
    Ok(Instruction {
        program_id_index: ix.program_id_index,
        accounts: ix.accounts.clone(),
        data,
        stack_height: ix.stack_height,
    })
}

fn instruction_to_rpc(ix: &Instruction) -> RpcInstruction {
    RpcInstruction {
        program_id_index: ix.program_id_index,
        accounts: ix.accounts.clone(),
        data: bs58::encode(&ix.data).into_string(),
        stack_height: ix.stack_height,
    }
}

fn token_balance_from_rpc(b: &RpcTokenBalance) -> Result<TokenBalanceEntry, LedgerError> {
    let amount = b
        .ui_token_amount
        .amount
        .parse::<u64>()
        .map_err(|e| LedgerError::Malformed(format!("token amount {:?}: {e}", b.ui_token_amount.amount)))?;
    Ok(TokenBalanceEntry {
        account_index: b.account_index,
        mint: Mint::new(b.mint.clone())?,
        decimals: Decimals::new(b.ui_token_amount.decimals)?,
        amount: RawAmount(amount),
        owner: b.owner.clone(),
    })
}

fn token_balance_to_rpc(b: &TokenBalanceEntry) -> RpcTokenBalance {
    RpcTokenBalance {
        account_index: b.account_index,
        mint: b.mint.address().to_string(),
        owner: b.owner.clone(),
        program_id: None,
        ui_token_amount: RpcUiTokenAmount {
            amount: b.amount.0.to_string(),
            decimals: b.decimals.value(),
        },
    }
}

impl RpcTransactionWithMeta {
    pub fn into_confirmed(
        self,
        slot: Option<Slot>,
        block_time: Option<i64>,
    ) -> Result<ConfirmedTransaction, LedgerError> {
        let meta = self
            .meta
            .ok_or_else(|| LedgerError::Malformed("transaction without meta".into()))?;
        let loaded = meta.loaded_addresses.clone().unwrap_or_default();
        let record = TransactionRecord {
            signatures: self.transaction.signatures,
            message_account_keys: self.transaction.message.account_keys,
            loaded_addresses: loaded.writable.into_iter().chain(loaded.readonly).collect(),
            outer_instructions: self
                .transaction
                .message
                .instructions
                .iter()
                .map(instruction_from_rpc)
                .collect::<Result<_, _>>()?,
            slot: self.slot.or(slot),
            block_time: self.block_time.or(block_time),
        };
        record.validate()?;
        let balances = |v: &Option<Vec<RpcTokenBalance>>| -> Result<Vec<TokenBalanceEntry>, LedgerError> {
            v.iter().flatten().map(token_balance_from_rpc).collect()
        };
        let meta = TransactionMeta {
            err: meta.err.filter(|e| !e.is_null()),
            pre_balances: meta.pre_balances,
            post_balances: meta.post_balances,
            pre_token_balances: balances(&meta.pre_token_balances)?,
            post_token_balances: balances(&meta.post_token_balances)?,
            inner_instructions: meta
                .inner_instructions
                .iter()
                .flatten()
                .map(|set| {
                    Ok(InnerInstructionSet {
                        index: set.index,
                        instructions: set
                            .instructions
                            .iter()
                            .map(instruction_from_rpc)
                            .collect::<Result<_, LedgerError>>()?,
                    })
                })
                .collect::<Result<_, LedgerError>>()?,
            log_messages: meta.log_messages.unwrap_or_default(),
        };
        meta.validate(&record)?;
        Ok(ConfirmedTransaction {
            transaction: record,
            meta,
        })
    }
}

impl From<&ConfirmedTransaction> for RpcTransactionWithMeta {
    fn from(ct: &ConfirmedTransaction) -> Self {
        let tx = &ct.transaction;
        let meta = &ct.meta;
        RpcTransactionWithMeta {
            slot: None,
            block_time: None,
            transaction: RpcTransaction {
                signatures: tx.signatures.clone(),
                message: RpcMessage {
                    account_keys: tx.message_account_keys.clone(),
                    instructions: tx.outer_instructions.iter().map(instruction_to_rpc).collect(),
                    recent_blockhash: None,
                },
            },
            meta: Some(RpcMeta {
                err: meta.err.clone(),
                fee: 5000,
                pre_balances: meta.pre_balances.clone(),
                post_balances: meta.post_balances.clone(),
                pre_token_balances: Some(meta.pre_token_balances.iter().map(token_balance_to_rpc).collect()),
                post_token_balances: Some(meta.post_token_balances.iter().map(token_balance_to_rpc).collect()),
                inner_instructions: Some(
                    meta.inner_instructions
                        .iter()
                        .map(|set| RpcInnerInstructions {
                            index: set.index,
                            instructions: set.instructions.iter().map(instruction_to_rpc).collect(),
                        })
                        .collect(),
                ),
                log_messages: Some(meta.log_messages.clone()),
                // Loaded addresses are replayed as writable; order is preserved.
                loaded_addresses: Some(RpcLoadedAddresses {
                    writable: tx.loaded_addresses.clone(),
                    readonly: Vec::new(),
                }),
            }),
            version: Some(Value::from(0)),
        }
    }
}

impl RpcBlock {
    pub fn into_block(self, slot: Slot) -> Result<Block, LedgerError> {
        let slot = self.slot.unwrap_or(slot);
        let block_time = self.block_time;
        if block_time.is_none() && !self.transactions.is_empty() {
            return Err(LedgerError::Malformed(format!(
                "slot {slot} has transactions but no blockTime"
            )));
        }
        let transactions = self
            .transactions
            .into_iter()
            .map(|t| t.into_confirmed(Some(slot), block_time))
            .collect::<Result<_, _>>()?;
        Ok(Block {
            slot,
            block_time,
            transactions,
        })
    }
}

impl From<&Block> for RpcBlock {
    fn from(b: &Block) -> Self {
        RpcBlock {
            slot: Some(b.slot),
            block_time: b.block_time,
            blockhash: None,
            parent_slot: None,
            transactions: b.transactions.iter().map(RpcTransactionWithMeta::from).collect(),
        }
    }
}

/// Parses a `getTransaction` result (or a bare `{transaction, meta}` document).
pub fn confirmed_transaction_from_json(value: Value) -> Result<ConfirmedTransaction, LedgerError> {
    let parsed: RpcTransactionWithMeta =
        serde_json::from_value(value).map_err(|e| LedgerError::Malformed(e.to_string()))?;
    parsed.into_confirmed(None, None)
}

/// Parses one fixture line / `getBlock` result into a [`Block`].
pub fn block_from_json(value: Value, slot: Slot) -> Result<Block, LedgerError> {
    let parsed: RpcBlock = serde_json::from_value(value).map_err(|e| LedgerError::Malformed(e.to_string()))?;
    parsed.into_block(slot)
}

/// One fixture line for `block`.
pub fn block_to_fixture_line(block: &Block) -> String {
    serde_json::to_string(&RpcBlock::from(block)).expect("block serializes")
}

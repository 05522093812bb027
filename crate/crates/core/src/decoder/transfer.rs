//! SPL Token / Token-2022 `Transfer` and `TransferChecked` decoding.

use crate::ledger::{Decimals, Instruction, Mint, RawAmount};

use super::tables::TokenAccountInfo;
use super::DecodeError;

pub const OPCODE_TRANSFER: u8 = 3;
pub const OPCODE_TRANSFER_CHECKED: u8 = 12;

/// A token transfer with accounts resolved to addresses.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenTransfer {
    pub source: String,
    pub destination: String,
    pub authority: String,
    pub mint: Mint,
    pub amount: RawAmount,
    /// Decimals carried by `TransferChecked`.
    pub checked_decimals: Option<Decimals>,
    pub checked: bool,
}

fn read_u64(data: &[u8]) -> Option<u64> {
    data.get(1..9).map(|b| u64::from_le_bytes(b.try_into().expect("8 bytes")))
}

/// Decodes `inst`, assumed to target a token program. `Ok(None)` means the
/// instruction is some other token opcode.
pub fn parse_token_transfer(
    inst: &Instruction,
    keys: &[String],
    tinfo: &TokenAccountInfo,
) -> Result<Option<TokenTransfer>, DecodeError> {
    let Some(&opcode) = inst.data.first() else {
        return Ok(None);
    };
    if opcode != OPCODE_TRANSFER && opcode != OPCODE_TRANSFER_CHECKED {
        return Ok(None);
    }
    let malformed = |why: &str| DecodeError::MalformedInstruction(format!("opcode {opcode}: {why}"));
    let amount = read_u64(&inst.data).ok_or_else(|| malformed("truncated amount"))?;
    let account = |pos: usize| -> Result<String, DecodeError> {
        let idx = *inst
            .accounts
            .get(pos)
            .ok_or_else(|| malformed(&format!("missing account #{pos}")))?;
        keys.get(idx)
            .cloned()
            .ok_or_else(|| malformed(&format!("account index {idx} out of range")))
    };

    if opcode == OPCODE_TRANSFER {
        let source = account(0)?;
        let destination = account(1)?;
        let authority = account(2)?;
        let mint = tinfo
            .get(&source)
            .or_else(|| tinfo.get(&destination))
            .map(|(m, _)| m.clone())
            .ok_or_else(|| DecodeError::UnresolvedMint(source.clone()))?;
        return Ok(Some(TokenTransfer {
            source,
            destination,
            authority,
            mint,
            amount: RawAmount(amount),
            checked_decimals: None,
            checked: false,
        }));
    }

    let dec = *inst.data.get(9).ok_or_else(|| malformed("truncated decimals"))?;
    let decimals = Decimals::new(dec).map_err(|e| malformed(&e.to_string()))?;
    let source = account(0)?;
    let mint = Mint::new(account(1)?).map_err(|e| malformed(&e.to_string()))?;
    let destination = account(2)?;
    let authority = account(3)?;
    Ok(Some(TokenTransfer {
        source,
        destination,
        authority,
        mint,
        amount: RawAmount(amount),
        checked_decimals: Some(decimals),
        checked: true,
    }))
}

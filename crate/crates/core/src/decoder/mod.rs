//! Turns one confirmed transaction into a single route-level [`SwapInfo`].
//!
//! Evidence is harvested per outer instruction, then the strongest class wins:
//! router events, router log aggregates, Pump.fun trades, and finally plain
//! token-transfer legs.

mod evidence;
mod logs;
mod tables;
mod transfer;

use std::collections::HashSet;

use thiserror::Error;

use crate::ledger::{account_key_table, Decimals, Mint, RawAmount, SwapInfo, TransactionMeta, TransactionRecord};
use crate::registry::{ProgramRegistry, Venue};

pub use evidence::{
    effective_signer_index, harvest_evidence, Evidence, EvidenceKind, EvidencePayload, Harvest, LegDirection, LegKey,
    OkxAggregate, PumpTrade, RouteHop, SwapLeg, PUMP_EVENT_LEN, ROUTE_EVENT_LEN,
};
pub use logs::{segment_for, split_by_outer, LogSegment};
pub use tables::{build_token_tables, DecimalsTable, TokenAccountInfo};
pub use transfer::{parse_token_transfer, TokenTransfer, OPCODE_TRANSFER, OPCODE_TRANSFER_CHECKED};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("transaction failed on chain")]
    FailedTransaction,
    #[error("no swap evidence found")]
    NoSwapFound,
    #[error("ambiguous swap: {0}")]
    AmbiguousSwap(String),
    #[error("malformed metadata: {0}")]
    MalformedMeta(String),
    #[error("malformed instruction: {0}")]
    MalformedInstruction(String),
    #[error("cannot resolve mint of token account {0}")]
    UnresolvedMint(String),
}

/// Route-level pair before decimals and direction sanity are applied.
#[derive(Clone, Debug, PartialEq, Eq)]
struct Pair {
    in_mint: Mint,
    in_amount: RawAmount,
    out_mint: Mint,
    out_amount: RawAmount,
}

impl Pair {
    fn new(in_mint: &Mint, in_amount: u128, out_mint: &Mint, out_amount: u128) -> Result<Self, DecodeError> {
        let conv = |a: u128| {
            u64::try_from(a).map_err(|_| DecodeError::AmbiguousSwap(format!("amount {a} overflows u64")))
        };
        let pair = Pair {
            in_mint: in_mint.coalesce_sol(),
            in_amount: RawAmount(conv(in_amount)?),
            out_mint: out_mint.coalesce_sol(),
            out_amount: RawAmount(conv(out_amount)?),
        };
        if pair.in_mint == pair.out_mint {
            return Err(DecodeError::AmbiguousSwap(format!("input and output are both {}", pair.in_mint)));
        }
        if pair.in_amount.0 == 0 || pair.out_amount.0 == 0 {
            return Err(DecodeError::AmbiguousSwap("zero amount on one side".into()));
        }
        Ok(pair)
    }
}

/// Signed net flow per mint, in first-appearance order.
fn route_pair(hops: &[&RouteHop]) -> Result<Pair, DecodeError> {
    let mut net: Vec<(Mint, i128)> = Vec::new();
    let mut add = |m: &Mint, d: i128| {
        let m = m.coalesce_sol();
        match net.iter_mut().find(|(k, _)| *k == m) {
            Some((_, v)) => *v += d,
            None => net.push((m, d)),
        }
    };
    for h in hops {
        add(&h.input_mint, -i128::from(h.input_amount.0));
        add(&h.output_mint, i128::from(h.output_amount.0));
    }
    // strict comparisons keep the first mint on ties
    let mut input: Option<&(Mint, i128)> = None;
    let mut output: Option<&(Mint, i128)> = None;
    for e in &net {
        if e.1 < 0 && input.is_none_or(|i| e.1 < i.1) {
            input = Some(e);
        }
        if e.1 > 0 && output.is_none_or(|o| e.1 > o.1) {
            output = Some(e);
        }
    }
    match (input, output) {
        (Some((im, ia)), Some((om, oa))) => Pair::new(im, ia.unsigned_abs(), om, oa.unsigned_abs()),
        _ => Err(DecodeError::AmbiguousSwap("route events net to no input/output".into())),
    }
}

fn okx_pair(agg: &OkxAggregate) -> Result<Pair, DecodeError> {
    Pair::new(
        &agg.source_mint,
        agg.source_delta.0.into(),
        &agg.destination_mint,
        agg.destination_delta.0.into(),
    )
}

fn pump_pair(trade: &PumpTrade) -> Result<Pair, DecodeError> {
    match trade {
        PumpTrade::Event {
            mint,
            sol_amount,
            token_amount,
            is_buy: true,
            ..
        } => Pair::new(&Mint::sol(), sol_amount.0.into(), mint, token_amount.0.into()),
        PumpTrade::Event {
            mint,
            sol_amount,
            token_amount,
            is_buy: false,
            ..
        } => Pair::new(mint, token_amount.0.into(), &Mint::sol(), sol_amount.0.into()),
        PumpTrade::Transfers {
            in_mint,
            in_amount,
            out_mint,
            out_amount,
        } => Pair::new(in_mint, in_amount.0.into(), out_mint, out_amount.0.into()),
    }
}

/// Unique legs summed per mint. Input: first mint the signer sent, else
/// the first mint. Output: the last other mint.
fn leg_pair(legs: &[&SwapLeg]) -> Result<Pair, DecodeError> {
    let mut seen: HashSet<&LegKey> = HashSet::new();
    let unique: Vec<&SwapLeg> = legs.iter().copied().filter(|l| seen.insert(&l.key)).collect();

    let mut mints: Vec<Mint> = Vec::new();
    for l in &unique {
        let m = l.mint.coalesce_sol();
        if !mints.contains(&m) {
            mints.push(m);
        }
    }
    if mints.len() < 2 {
        return Err(DecodeError::AmbiguousSwap(format!("legs name {} distinct mint(s)", mints.len())));
    }
    let input = unique
        .iter()
        .find(|l| l.direction == LegDirection::Out)
        .map(|l| l.mint.coalesce_sol())
        .unwrap_or_else(|| mints[0].clone());
    let output = mints.iter().rev().find(|m| **m != input).expect("two distinct mints").clone();

    let sum = |mint: &Mint, dir: LegDirection| -> u128 {
        let of_mint = || unique.iter().filter(|l| l.mint.coalesce_sol() == *mint);
        let directed: u128 = of_mint().filter(|l| l.direction == dir).map(|l| u128::from(l.amount.0)).sum();
        if directed > 0 {
            directed
        } else {
            of_mint().map(|l| u128::from(l.amount.0)).sum()
        }
    };
    Pair::new(&input, sum(&input, LegDirection::Out), &output, sum(&output, LegDirection::In))
}

/// Swaps input and output when the signer gained lamports yet the input is SOL.
/// A second application is a no-op since the input is then not SOL.
pub fn apply_direction_sanity(info: &mut SwapInfo, signer_lamport_delta: i128) {
    if signer_lamport_delta > 0 && info.token_in_mint.is_sol() {
        std::mem::swap(&mut info.token_in_mint, &mut info.token_out_mint);
        std::mem::swap(&mut info.token_in_amount, &mut info.token_out_amount);
        std::mem::swap(&mut info.token_in_decimals, &mut info.token_out_decimals);
    }
}

fn lamport_delta(meta: &TransactionMeta, idx: usize) -> i128 {
    match (meta.pre_balances.get(idx), meta.post_balances.get(idx)) {
        (Some(&pre), Some(&post)) => i128::from(post) - i128::from(pre),
        _ => 0,
    }
}

fn tags_of(evidence: &[&Evidence]) -> Vec<String> {
    let mut tags: Vec<String> = Vec::new();
    for v in evidence.iter().flat_map(|e| e.venues.iter()) {
        let tag = v.tag().to_string();
        if !tags.contains(&tag) {
            tags.push(tag);
        }
    }
    tags
}

fn decimals_for(mint: &Mint, decs: &DecimalsTable) -> Decimals {
    if mint.is_sol() {
        Decimals::SOL
    } else {
        decs.get(mint)
    }
}

/// Decodes `(tx, meta)` into one route-level swap.
pub fn decode_swap(tx: &TransactionRecord, meta: &TransactionMeta, registry: &ProgramRegistry) -> Result<SwapInfo, DecodeError> {
    if meta.failed() {
        return Err(DecodeError::FailedTransaction);
    }
    tx.validate().map_err(|e| DecodeError::MalformedMeta(e.to_string()))?;
    meta.validate(tx).map_err(|e| DecodeError::MalformedMeta(e.to_string()))?;

    let (tinfo, decs) = build_token_tables(tx, meta, registry)?;
    let harvest = harvest_evidence(tx, meta, registry, &tinfo);
    for d in &harvest.diagnostics {
        tracing::debug!(signature = tx.primary_signature(), "skipped candidate: {d}");
    }

    let class = |k: EvidenceKind| harvest.evidence.iter().filter(|e| e.kind() == k).collect::<Vec<_>>();
    let jup = class(EvidenceKind::JupiterRouteEvent);
    let okx = class(EvidenceKind::OkxLogAggregate);
    let pump = class(EvidenceKind::PumpFunTradeEvent);
    let legs = class(EvidenceKind::Leg);

    let (pair, chosen) = if !jup.is_empty() {
        let hops: Vec<&RouteHop> = jup
            .iter()
            .filter_map(|e| match &e.payload {
                EvidencePayload::JupiterRoute(h) => Some(h),
                _ => None,
            })
            .collect();
        (route_pair(&hops)?, jup)
    } else if let Some(first) = okx.first() {
        let EvidencePayload::OkxLog(agg) = &first.payload else { unreachable!() };
        (okx_pair(agg)?, vec![*first])
    } else if let Some(first) = pump.first() {
        let EvidencePayload::PumpFun(trade) = &first.payload else { unreachable!() };
        (pump_pair(trade)?, vec![*first])
    } else if !legs.is_empty() {
        let swap_legs: Vec<&SwapLeg> = legs
            .iter()
            .filter_map(|e| match &e.payload {
                EvidencePayload::Leg(l) => Some(l),
                _ => None,
            })
            .collect();
        (leg_pair(&swap_legs)?, legs)
    } else {
        return Err(DecodeError::NoSwapFound);
    };

    let signer_idx = effective_signer_index(tx, registry);
    let keys = account_key_table(tx);
    let mut info = SwapInfo {
        token_in_decimals: decimals_for(&pair.in_mint, &decs),
        token_out_decimals: decimals_for(&pair.out_mint, &decs),
        token_in_mint: pair.in_mint,
        token_in_amount: pair.in_amount,
        token_out_mint: pair.out_mint,
        token_out_amount: pair.out_amount,
        amm_tags: tags_of(&chosen),
        signer: keys.get(signer_idx).cloned().unwrap_or_default(),
        signatures: tx.signatures.clone(),
        timestamp: tx.block_time,
    };
    apply_direction_sanity(&mut info, lamport_delta(meta, signer_idx));
    Ok(info)
}

/// Whether any outer instruction invokes a swap venue.
pub fn touches_swap_venue(tx: &TransactionRecord, registry: &ProgramRegistry) -> bool {
    let keys = account_key_table(tx);
    tx.outer_instructions.iter().any(|ix| {
        keys.get(ix.program_id_index)
            .and_then(|pid| registry.venue(pid))
            .is_some_and(Venue::is_swap_venue)
    })
}

#[cfg(test)]
mod tests;

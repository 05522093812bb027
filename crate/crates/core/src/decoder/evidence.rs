//! Evidence harvesting: one pass over the outer instructions, dispatching on
//! the program's venue and collecting router events, router log aggregates,
//! Pump.fun trades and token-transfer legs found under each outer index.

use std::collections::BTreeMap;

use crate::ledger::{account_key_table, Instruction, Mint, RawAmount, TransactionMeta, TransactionRecord};
use crate::registry::{ProgramRegistry, Venue};

use super::logs::{segment_for, split_by_outer};
use super::tables::TokenAccountInfo;
use super::transfer::{parse_token_transfer, TokenTransfer};

/// Priority order, strongest first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EvidenceKind {
    JupiterRouteEvent,
    OkxLogAggregate,
    PumpFunTradeEvent,
    Leg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LegDirection {
    /// Leaves the signer (the signer authorized it).
    Out,
    /// Everything else, typically pool → signer.
    In,
}

/// Identifies one transfer occurrence.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LegKey {
    pub source: String,
    pub destination: String,
    pub mint: String,
    pub amount: u64,
    pub outer_index: usize,
    pub inner_position: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SwapLeg {
    pub mint: Mint,
    pub amount: RawAmount,
    pub direction: LegDirection,
    pub key: LegKey,
}

/// One hop of a router event.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RouteHop {
    pub amm: String,
    pub input_mint: Mint,
    pub input_amount: RawAmount,
    pub output_mint: Mint,
    pub output_amount: RawAmount,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OkxAggregate {
    pub source_mint: Mint,
    pub source_delta: RawAmount,
    pub destination_mint: Mint,
    pub destination_delta: RawAmount,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PumpTrade {
    /// Decoded trade event; SOL side is native lamports.
    Event {
        mint: Mint,
        sol_amount: RawAmount,
        token_amount: RawAmount,
        is_buy: bool,
        user: String,
    },
    /// Buy/sell instruction with consistent `TransferChecked` legs.
    Transfers {
        in_mint: Mint,
        in_amount: RawAmount,
        out_mint: Mint,
        out_amount: RawAmount,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EvidencePayload {
    JupiterRoute(RouteHop),
    OkxLog(OkxAggregate),
    PumpFun(PumpTrade),
    Leg(SwapLeg),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Evidence {
    pub outer_index: usize,
    pub venues: Vec<Venue>,
    pub payload: EvidencePayload,
}

impl Evidence {
    pub fn kind(&self) -> EvidenceKind {
        match self.payload {
            EvidencePayload::JupiterRoute(_) => EvidenceKind::JupiterRouteEvent,
            EvidencePayload::OkxLog(_) => EvidenceKind::OkxLogAggregate,
            EvidencePayload::PumpFun(_) => EvidenceKind::PumpFunTradeEvent,
            EvidencePayload::Leg(_) => EvidenceKind::Leg,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Harvest {
    pub evidence: Vec<Evidence>,
    /// Candidates skipped because they could not be decoded.
    pub diagnostics: Vec<String>,
    /// Whether the main loop found router or event evidence (no fallback sweep).
    pub found: bool,
}

struct Ctx<'a> {
    tx: &'a TransactionRecord,
    meta: &'a TransactionMeta,
    registry: &'a ProgramRegistry,
    tinfo: &'a TokenAccountInfo,
    keys: Vec<String>,
    signer: &'a str,
}

impl Ctx<'_> {
    fn venue_of(&self, ix: &Instruction) -> Option<Venue> {
        self.keys.get(ix.program_id_index).and_then(|pid| self.registry.venue(pid))
    }

    /// Token transfers under outer `i` with the venue of their invoking program.
    fn transfers_under(&self, i: usize, diagnostics: &mut Vec<String>) -> Vec<(usize, TokenTransfer, Option<Venue>)> {
        let outer = &self.tx.outer_instructions[i];
        let inner: Vec<(usize, &Instruction)> = self.meta.inner_for(i).collect();
        let mut out = Vec::new();
        for (n, &(pos, ix)) in inner.iter().enumerate() {
            if !self.venue_of(ix).is_some_and(Venue::is_token_program) {
                continue;
            }
            match parse_token_transfer(ix, &self.keys, self.tinfo) {
                Ok(Some(t)) => {
                    let parent = parent_of(&inner[..n], ix, outer).and_then(|p| self.venue_of(p));
                    out.push((pos, t, parent));
                }
                Ok(None) => {}
                Err(e) => diagnostics.push(format!("outer {i} inner {pos}: {e}")),
            }
        }
        out
    }

    fn leg(&self, i: usize, pos: usize, t: &TokenTransfer, venues: Vec<Venue>) -> Evidence {
        Evidence {
            outer_index: i,
            venues,
            payload: EvidencePayload::Leg(SwapLeg {
                mint: t.mint.clone(),
                amount: t.amount,
                direction: if t.authority == self.signer {
                    LegDirection::Out
                } else {
                    LegDirection::In
                },
                key: LegKey {
                    source: t.source.clone(),
                    destination: t.destination.clone(),
                    mint: t.mint.address().to_string(),
                    amount: t.amount.0,
                    outer_index: i,
                    inner_position: pos,
                },
            }),
        }
    }

    /// Transfers invoked directly by a known AMM program under outer `i`.
    fn amm_legs(&self, i: usize, outer_venue: Venue, diagnostics: &mut Vec<String>) -> Vec<Evidence> {
        self.transfers_under(i, diagnostics)
            .into_iter()
            .filter_map(|(pos, t, parent)| {
                let amm = parent.filter(|v| v.is_amm())?;
                Some(self.leg(i, pos, &t, tags(outer_venue, amm)))
            })
            .collect()
    }

    fn all_legs(&self, i: usize, outer_venue: Venue, diagnostics: &mut Vec<String>) -> Vec<Evidence> {
        self.transfers_under(i, diagnostics)
            .into_iter()
            .map(|(pos, t, parent)| {
                let venues = match parent.filter(|v| v.is_amm()) {
                    Some(amm) => tags(outer_venue, amm),
                    None => vec![outer_venue],
                };
                self.leg(i, pos, &t, venues)
            })
            .collect()
    }

    fn okx_aggregate(&self, i: usize, diagnostics: &mut Vec<String>) -> Option<OkxAggregate> {
        let outer = &self.tx.outer_instructions[i];
        let pid = self.keys.get(outer.program_id_index)?;
        let segments = split_by_outer(&self.meta.log_messages);
        let programs: Vec<&str> = self
            .tx
            .outer_instructions
            .iter()
            .map(|ix| self.keys.get(ix.program_id_index).map(String::as_str).unwrap_or(""))
            .collect();
        let seg = segment_for(&segments, i, pid, &programs)?;
        let grammar = &self.registry.okx;
        let capture = |re: &regex::Regex| {
            seg.lines
                .iter()
                .find_map(|l| re.captures(l).and_then(|c| c[1].parse::<u64>().ok()))
        };
        let (src, dst) = (capture(&grammar.source_delta)?, capture(&grammar.destination_delta)?);
        if src == 0 || dst == 0 {
            diagnostics.push(format!("outer {i}: router log reports a zero delta"));
            return None;
        }
        let mint_at = |pos: usize| {
            outer
                .accounts
                .get(pos)
                .and_then(|&k| self.keys.get(k))
                .and_then(|a| Mint::new(a.clone()).ok())
        };
        let (Some(source_mint), Some(destination_mint)) =
            (mint_at(grammar.source_mint_account), mint_at(grammar.destination_mint_account))
        else {
            diagnostics.push(format!("outer {i}: router accounts do not name both mints"));
            return None;
        };
        Some(OkxAggregate {
            source_mint,
            source_delta: RawAmount(src),
            destination_mint,
            destination_delta: RawAmount(dst),
        })
    }

    /// Signer-authorized `TransferChecked` under `i` are inputs, the rest
    /// outputs; consistent when each side names exactly one mint, the two
    /// differ and both sums are nonzero.
    fn pump_transfers(&self, i: usize, diagnostics: &mut Vec<String>) -> Option<PumpTrade> {
        let mut ins: BTreeMap<Mint, u128> = BTreeMap::new();
        let mut outs: BTreeMap<Mint, u128> = BTreeMap::new();
        for (_, t, _) in self.transfers_under(i, diagnostics) {
            if !t.checked {
                continue;
            }
            let side = if t.authority == self.signer { &mut ins } else { &mut outs };
            *side.entry(t.mint.clone()).or_default() += u128::from(t.amount.0);
        }
        if ins.len() != 1 || outs.len() != 1 {
            return None;
        }
        let (in_mint, in_sum) = ins.into_iter().next()?;
        let (out_mint, out_sum) = outs.into_iter().next()?;
        if in_mint.coalesce_sol() == out_mint.coalesce_sol() || in_sum == 0 || out_sum == 0 {
            return None;
        }
        Some(PumpTrade::Transfers {
            in_mint,
            in_amount: RawAmount(u64::try_from(in_sum).ok()?),
            out_mint,
            out_amount: RawAmount(u64::try_from(out_sum).ok()?),
        })
    }
}

fn tags(outer: Venue, amm: Venue) -> Vec<Venue> {
    if outer == amm {
        vec![outer]
    } else {
        vec![outer, amm]
    }
}

/// Invoking instruction of `ix`: the closest earlier inner one step shallower,
/// or the outer instruction for depth 2. `None` without stack heights.
fn parent_of<'a>(earlier: &[(usize, &'a Instruction)], ix: &Instruction, outer: &'a Instruction) -> Option<&'a Instruction> {
    let height = ix.stack_height?;
    if height <= 2 {
        return Some(outer);
    }
    earlier
        .iter()
        .rev()
        .find(|(_, p)| p.stack_height == Some(height - 1))
        .map(|(_, p)| *p)
}

fn pubkey(bytes: &[u8]) -> String {
    bs58::encode(bytes).into_string()
}

fn le_u64(bytes: &[u8]) -> u64 {
    u64::from_le_bytes(bytes[..8].try_into().expect("8 bytes"))
}

/// amm(32) input_mint(32) input_amount(8) output_mint(32) output_amount(8)
pub const ROUTE_EVENT_LEN: usize = 112;
/// mint(32) sol_amount(8) token_amount(8) is_buy(1) user(32)
pub const PUMP_EVENT_LEN: usize = 81;

fn decode_route_hop(payload: &[u8]) -> Option<RouteHop> {
    if payload.len() < ROUTE_EVENT_LEN {
        return None;
    }
    Some(RouteHop {
        amm: pubkey(&payload[0..32]),
        input_mint: Mint::new(pubkey(&payload[32..64])).ok()?,
        input_amount: RawAmount(le_u64(&payload[64..72])),
        output_mint: Mint::new(pubkey(&payload[72..104])).ok()?,
        output_amount: RawAmount(le_u64(&payload[104..112])),
    })
}

fn decode_pump_event(payload: &[u8]) -> Option<PumpTrade> {
    if payload.len() < PUMP_EVENT_LEN {
        return None;
    }
    Some(PumpTrade::Event {
        mint: Mint::new(pubkey(&payload[0..32])).ok()?,
        sol_amount: RawAmount(le_u64(&payload[32..40])),
        token_amount: RawAmount(le_u64(&payload[40..48])),
        is_buy: payload[48] != 0,
        user: pubkey(&payload[49..81]),
    })
}

/// Effective signer: `AK[0]`, or `AK[2]` when a DCA program is invoked.
pub fn effective_signer_index(tx: &TransactionRecord, registry: &ProgramRegistry) -> usize {
    let keys = account_key_table(tx);
    let dca = tx.outer_instructions.iter().any(|ix| {
        keys.get(ix.program_id_index)
            .is_some_and(|pid| registry.is_dca_program(pid))
    });
    if dca && keys.len() > 2 {
        2
    } else {
        0
    }
}

pub fn harvest_evidence(
    tx: &TransactionRecord,
    meta: &TransactionMeta,
    registry: &ProgramRegistry,
    tinfo: &TokenAccountInfo,
) -> Harvest {
    let keys = account_key_table(tx);
    let signer_idx = effective_signer_index(tx, registry);
    let signer = keys.get(signer_idx).cloned().unwrap_or_default();
    let ctx = Ctx {
        tx,
        meta,
        registry,
        tinfo,
        keys,
        signer: &signer,
    };
    let mut h = Harvest::default();

    for (i, outer) in tx.outer_instructions.iter().enumerate() {
        let Some(pid) = ctx.keys.get(outer.program_id_index) else {
            h.diagnostics.push(format!("outer {i}: program index {} out of range", outer.program_id_index));
            continue;
        };
        let Some(venue) = registry.venue(pid) else { continue };
        match venue {
            Venue::Jupiter => {
                let mut events = 0;
                for (pos, ix) in meta.inner_for(i) {
                    let Some(payload) = registry.route_event.strip(&ix.data) else { continue };
                    match decode_route_hop(payload) {
                        Some(hop) => {
                            let mut venues = vec![Venue::Jupiter];
                            if let Some(amm) = registry.venue(&hop.amm).filter(|v| *v != Venue::Jupiter) {
                                venues.push(amm);
                            }
                            h.evidence.push(Evidence {
                                outer_index: i,
                                venues,
                                payload: EvidencePayload::JupiterRoute(hop),
                            });
                            events += 1;
                        }
                        None => h.diagnostics.push(format!("outer {i} inner {pos}: short route event")),
                    }
                }
                if events > 0 {
                    h.found = true;
                } else {
                    let mut legs = ctx.amm_legs(i, venue, &mut h.diagnostics);
                    if legs.is_empty() {
                        legs = ctx.all_legs(i, venue, &mut h.diagnostics);
                    }
                    h.found |= !legs.is_empty();
                    h.evidence.extend(legs);
                }
            }
            Venue::Okx => {
                if let Some(agg) = ctx.okx_aggregate(i, &mut h.diagnostics) {
                    h.evidence.push(Evidence {
                        outer_index: i,
                        venues: vec![Venue::Okx],
                        payload: EvidencePayload::OkxLog(agg),
                    });
                    h.found = true;
                }
                let legs = ctx.amm_legs(i, venue, &mut h.diagnostics);
                h.found |= !legs.is_empty();
                h.evidence.extend(legs);
            }
            Venue::PumpFun | Venue::PumpFunAmm => {
                let mut events = 0;
                for (pos, ix) in meta.inner_for(i) {
                    let Some(payload) = registry.pump_trade_events.iter().find_map(|m| m.strip(&ix.data)) else {
                        continue;
                    };
                    match decode_pump_event(payload) {
                        Some(trade) => {
                            h.evidence.push(Evidence {
                                outer_index: i,
                                venues: vec![Venue::PumpFun],
                                payload: EvidencePayload::PumpFun(trade),
                            });
                            events += 1;
                        }
                        None => h.diagnostics.push(format!("outer {i} inner {pos}: short trade event")),
                    }
                }
                if events > 0 {
                    h.found = true;
                } else if registry.is_pump_buy_or_sell(&outer.data) {
                    if let Some(trade) = ctx.pump_transfers(i, &mut h.diagnostics) {
                        h.evidence.push(Evidence {
                            outer_index: i,
                            venues: vec![Venue::PumpFun],
                            payload: EvidencePayload::PumpFun(trade),
                        });
                        h.found = true;
                    }
                }
            }
            Venue::BotRouter => {
                let legs = ctx.amm_legs(i, venue, &mut h.diagnostics);
                h.evidence.extend(legs);
            }
            _ => {}
        }
    }

    if !h.found {
        for (i, outer) in tx.outer_instructions.iter().enumerate() {
            let venue = ctx.venue_of(outer);
            if let Some(v) = venue.filter(|v| v.is_amm()) {
                let legs = ctx.all_legs(i, v, &mut h.diagnostics);
                h.evidence.extend(legs);
            }
        }
    }
    h
}

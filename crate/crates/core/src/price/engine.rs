use std::collections::BTreeSet;

use tracing::debug;

use crate::decoder::decode_swap;
use crate::ledger::{Mint, Slot, SwapInfo};
use crate::registry::ProgramRegistry;
use crate::slot::{nearest_slot, SlotError};
use crate::source::{BlockResult, ChainSource, SourceError};

use super::{
    build_rate_matrix, filter_and_vwap, per_trade_price, prefilter_block, quote_currency, BaseCurrency, PriceConfig,
    PriceError, PriceInfo, PriceMethod, RateFallback, RateMatrix, RateNote, TradePoint,
};

pub struct PriceContext<'a> {
    pub source: &'a dyn ChainSource,
    pub registry: &'a ProgramRegistry,
    pub config: &'a PriceConfig,
    pub fallback: Option<&'a RateFallback>,
}

struct Trade {
    info: SwapInfo,
    slot: Slot,
}

/// Why a trade set produced no price.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Miss {
    NoTrades,
    RatesOnly,
}

impl PriceContext<'_> {
    /// Swaps involving `mint` in `slots`, in slot then transaction order.
    fn swaps_in(&self, slots: &[Slot], mint: &Mint) -> Result<Vec<Trade>, PriceError> {
        let mut out = Vec::new();
        for &slot in slots {
            match self.source.get_block(slot) {
                Ok(BlockResult::Produced(block)) => self.collect(&block, mint, &mut out),
                Ok(BlockResult::Skipped(_)) | Err(SourceError::SlotOutOfRange(_)) => {}
                Err(e) => return Err(e.into()),
            }
        }
        Ok(out)
    }

    fn collect(&self, block: &crate::ledger::Block, mint: &Mint, out: &mut Vec<Trade>) {
        for tx in prefilter_block(block, mint, self.registry) {
            match decode_swap(&tx.transaction, &tx.meta, self.registry) {
                Ok(info) if info.involves(mint) => out.push(Trade { info, slot: block.slot }),
                Ok(_) => {}
                Err(e) => debug!(slot = block.slot, sig = tx.transaction.primary_signature(), "skip: {e}"),
            }
        }
    }

    /// First requested base that yields a VWAP over `trades`.
    fn price_trades(
        &self,
        trades: &[Trade],
        mint: &Mint,
        bases: &[BaseCurrency],
        anchor: &[Slot],
        t: i64,
    ) -> Result<Result<(BaseCurrency, super::Vwap, Vec<RateNote>), Miss>, PriceError> {
        let quoted: Vec<(BaseCurrency, TradePoint)> = trades
            .iter()
            .filter_map(|tr| {
                let c = quote_currency(&tr.info, mint, self.registry)?;
                let (price, weight) = per_trade_price(&tr.info, mint, c, self.registry).ok()?;
                Some((
                    c,
                    TradePoint {
                        price,
                        weight,
                        signature: tr.info.primary_signature().to_string(),
                        slot: tr.slot,
                    },
                ))
            })
            .collect();
        if quoted.is_empty() {
            return Ok(Err(Miss::NoTrades));
        }
        let mut matrix: Option<RateMatrix> = None;
        let mut all_rate_misses = true;
        for &b in bases {
            let mut points = Vec::with_capacity(quoted.len());
            let mut notes: Vec<RateNote> = Vec::new();
            let mut missing = false;
            for (c, p) in &quoted {
                let r = if *c == b {
                    1.0
                } else {
                    if matrix.is_none() {
                        matrix = Some(build_rate_matrix(
                            anchor,
                            t,
                            self.source,
                            self.registry,
                            self.config,
                            self.fallback,
                        )?);
                    }
                    let m = matrix.as_ref().expect("built above");
                    let Some(rate) = m.get(*c, b) else {
                        missing = true;
                        continue;
                    };
                    if !notes.iter().any(|n| n.from == *c) {
                        notes.push(RateNote {
                            from: *c,
                            to: b,
                            rate: rate.rate,
                            source: rate.source,
                        });
                    }
                    rate.rate
                };
                points.push(TradePoint {
                    price: p.price * r,
                    weight: p.weight * r,
                    ..p.clone()
                });
            }
            if let Some(v) = filter_and_vwap(&points, self.config, b) {
                return Ok(Ok((b, v, notes)));
            }
            if !(points.is_empty() && missing) {
                all_rate_misses = false;
            }
        }
        Ok(Err(if all_rate_misses { Miss::RatesOnly } else { Miss::NoTrades }))
    }
}

/// Price of `mint` at unix time `t`, trying `bases` in order (all three
/// in preference order when empty).
pub fn price_at(ctx: &PriceContext<'_>, mint: &Mint, t: i64, bases: &[BaseCurrency]) -> Result<PriceInfo, PriceError> {
    ctx.config.validate()?;
    let bases: Vec<BaseCurrency> = if bases.is_empty() {
        BaseCurrency::ALL.to_vec()
    } else {
        bases.to_vec()
    };
    let choice = match nearest_slot(t as f64, ctx.source, ctx.config.calibration()?) {
        Ok(c) => c,
        Err(SlotError::FutureTimestamp { tip_time, .. }) => return Err(PriceError::FutureTimestamp { t, tip_time }),
        Err(SlotError::TimestampBeforeHistory(_)) => return Err(PriceError::NotAvailable),
        Err(SlotError::Source(e)) => return Err(e.into()),
        Err(SlotError::InvalidCalibration) => return Err(PriceError::InvalidConfig("avg_block_time".into())),
    };

    // tracks whether every miss so far was for want of a conversion rate
    let mut rates_only: Option<bool> = None;
    for k in 0..=ctx.config.max_backoff_slots {
        let slots: BTreeSet<Slot> = choice.slots.iter().filter_map(|s| s.checked_sub(k)).collect();
        if slots.is_empty() {
            break;
        }
        let slots: Vec<Slot> = slots.into_iter().collect();
        let trades = ctx.swaps_in(&slots, mint)?;
        if trades.is_empty() {
            continue;
        }
        match ctx.price_trades(&trades, mint, &bases, &slots, t)? {
            Ok((base, v, rate_notes)) => {
                return Ok(PriceInfo {
                    vwap: v.vwap,
                    base,
                    slot: slots[0],
                    method: PriceMethod::SlotVwap,
                    trade_count: v.kept,
                    total_weight: v.total_weight,
                    rate_notes,
                })
            }
            Err(miss) => rates_only = Some(rates_only.unwrap_or(true) && miss == Miss::RatesOnly),
        }
    }

    // trailing window [t − W, t], walking down from the floor slot
    let from = t - ctx.config.widen_window_seconds;
    let mut per_block: Vec<Vec<Trade>> = Vec::new();
    let mut slot = choice.floor_slot;
    loop {
        match ctx.source.get_block(slot) {
            Ok(BlockResult::Produced(block)) => {
                let bt = block.block_time.unwrap_or(i64::MIN);
                if bt < from {
                    break;
                }
                if bt <= t {
                    let mut found = Vec::new();
                    ctx.collect(&block, mint, &mut found);
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
    // oldest first, matching the slot path's ordering
    let trades: Vec<Trade> = per_block.into_iter().rev().flatten().collect();
    if !trades.is_empty() {
        let anchor = [choice.floor_slot];
        match ctx.price_trades(&trades, mint, &bases, &anchor, t)? {
            Ok((base, v, rate_notes)) => {
                return Ok(PriceInfo {
                    vwap: v.vwap,
                    base,
                    slot: trades.iter().map(|tr| tr.slot).min().unwrap_or(choice.floor_slot),
                    method: PriceMethod::WindowVwap,
                    trade_count: v.kept,
                    total_weight: v.total_weight,
                    rate_notes,
                })
            }
            Err(miss) => rates_only = Some(rates_only.unwrap_or(true) && miss == Miss::RatesOnly),
        }
    }
    if rates_only == Some(true) {
        let from = trades
            .iter()
            .find_map(|tr| quote_currency(&tr.info, mint, ctx.registry))
            .unwrap_or(BaseCurrency::Sol);
        return Err(PriceError::RateUnavailable { from, to: bases[0] });
    }
    Err(PriceError::NotAvailable)
}

//! Timestamp → nearest finalized slot: estimate from the tip, gallop out to
//! a bracket, then binary search with skipped slots treated as transparent.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ledger::Slot;
use crate::source::{ChainSource, SourceError};

/// How far around a probe point we look for a produced slot before
/// falling back to a scan of the remaining interval.
pub const PROBE_RADIUS: u64 = 32;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SlotError {
    #[error("timestamp {t} is after the finalized tip time {tip_time}")]
    FutureTimestamp { t: f64, tip_time: i64 },
    #[error("timestamp {0} predates the source's history")]
    TimestampBeforeHistory(f64),
    #[error("average block time must be positive")]
    InvalidCalibration,
    #[error(transparent)]
    Source(#[from] SourceError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClockCalibration {
    /// Average seconds per slot.
    pub avg_block_time: f64,
}

impl Default for ClockCalibration {
    fn default() -> Self {
        Self { avg_block_time: 0.4 }
    }
}

impl ClockCalibration {
    pub fn new(avg_block_time: f64) -> Result<Self, SlotError> {
        if avg_block_time > 0.0 && avg_block_time.is_finite() {
            Ok(Self { avg_block_time })
        } else {
            Err(SlotError::InvalidCalibration)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlotChoice {
    /// One slot, or both neighbours when they are equally close (ascending).
    pub slots: Vec<Slot>,
    pub floor_slot: Slot,
    pub ceil_slot: Slot,
    pub floor_time: i64,
    pub ceil_time: i64,
}

impl SlotChoice {
    pub fn min_slot(&self) -> Slot {
        self.slots[0]
    }

    pub fn max_slot(&self) -> Slot {
        *self.slots.last().expect("one or two slots")
    }
}

/// Bookkeeping from one search, for budget checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SearchTrace {
    pub guess: Slot,
    pub bracket: (Slot, Slot),
    pub block_time_calls: usize,
}

/// `s_now − round((t_now − t) / Δ̄)`, rounding half away from zero, clamped at 0.
pub fn estimate_slot(t: f64, s_now: Slot, t_now: f64, cal: ClockCalibration) -> Result<Slot, SlotError> {
    if !(cal.avg_block_time > 0.0) {
        return Err(SlotError::InvalidCalibration);
    }
    if t > t_now {
        return Err(SlotError::FutureTimestamp {
            t,
            tip_time: t_now.ceil() as i64,
        });
    }
    let offset = ((t_now - t) / cal.avg_block_time).round();
    if offset >= s_now as f64 {
        return Ok(0);
    }
    Ok(s_now - offset as u64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Probe {
    Time(i64),
    Skipped,
    OutOfRange,
}

/// Memoizing block-time reader.
struct Clock<'a, S: ?Sized> {
    source: &'a S,
    memo: HashMap<Slot, Probe>,
    calls: usize,
}

impl<'a, S: ChainSource + ?Sized> Clock<'a, S> {
    fn new(source: &'a S) -> Self {
        Self {
            source,
            memo: HashMap::new(),
            calls: 0,
        }
    }

    fn probe(&mut self, slot: Slot) -> Result<Probe, SlotError> {
        if let Some(p) = self.memo.get(&slot) {
            return Ok(*p);
        }
        self.calls += 1;
        let p = match self.source.get_block_time(slot) {
            Ok(Some(t)) => Probe::Time(t),
            Ok(None) => Probe::Skipped,
            Err(SourceError::SlotOutOfRange(_)) => Probe::OutOfRange,
            Err(e) => return Err(e.into()),
        };
        self.memo.insert(slot, p);
        Ok(p)
    }

    /// Nearest produced slot at or below `slot`, or `None` once history ends.
    fn produced_at_or_below(&mut self, slot: Slot) -> Result<Option<(Slot, i64)>, SlotError> {
        let mut s = slot;
        loop {
            match self.probe(s)? {
                Probe::Time(t) => return Ok(Some((s, t))),
                Probe::OutOfRange => return Ok(None),
                Probe::Skipped if s == 0 => return Ok(None),
                Probe::Skipped => s -= 1,
            }
        }
    }

    /// Nearest produced slot in `[slot, limit]`.
    fn produced_at_or_above(&mut self, slot: Slot, limit: Slot) -> Result<Option<(Slot, i64)>, SlotError> {
        for s in slot..=limit {
            match self.probe(s)? {
                Probe::Time(t) => return Ok(Some((s, t))),
                Probe::Skipped | Probe::OutOfRange => {}
            }
        }
        Ok(None)
    }

    /// Some produced slot strictly inside `(lo, hi)`, nearest to the midpoint:
    /// `PROBE_RADIUS` neighbours first, then the rest of the interval.
    fn produced_between(&mut self, lo: Slot, hi: Slot) -> Result<Option<(Slot, i64)>, SlotError> {
        if hi <= lo + 1 {
            return Ok(None);
        }
        let mid = lo + (hi - lo) / 2;
        let mut d = 0;
        loop {
            let below = mid.checked_sub(d).filter(|s| *s > lo);
            let above = (d > 0).then(|| mid + d).filter(|s| *s < hi);
            if below.is_none() && above.is_none() && (d == 0 || mid.saturating_sub(d) <= lo) && mid + d >= hi {
                return Ok(None);
            }
            for s in [below, above].into_iter().flatten() {
                if let Probe::Time(t) = self.probe(s)? {
                    return Ok(Some((s, t)));
                }
            }
            d += 1;
        }
    }
}

fn bracket_with<S: ChainSource + ?Sized>(
    clock: &mut Clock<'_, S>,
    t: f64,
    guess: Slot,
    tip: Slot,
) -> Result<((Slot, i64), (Slot, i64)), SlotError> {
    let Some(start) = clock.produced_at_or_below(guess)? else {
        // guess precedes history: bisect between it and the tip
        let top = clock
            .produced_at_or_below(tip)?
            .ok_or(SlotError::TimestampBeforeHistory(t))?;
        return descend(clock, t, top, Some(guess), 1);
    };
    if start.1 as f64 == t {
        return Ok((start, start));
    }
    // the bracket keeps `start` as one end so that L ≤ guess ≤ H
    let mut step: u64 = 1;
    if (start.1 as f64) < t {
        let mut lo = start;
        loop {
            let probe = lo.0.saturating_add(step).min(tip);
            let Some(next) = clock.produced_at_or_above(probe, tip)? else {
                // nothing produced above: t lies beyond the tip
                return Err(SlotError::FutureTimestamp { t, tip_time: lo.1 });
            };
            if next.1 as f64 >= t {
                return Ok((start, next));
            }
            if next.0 == tip {
                return Err(SlotError::FutureTimestamp { t, tip_time: next.1 });
            }
            lo = next;
            step = step.saturating_mul(2);
        }
    }
    descend(clock, t, start, None, 1)
}

/// Walks down from `top` (with `bt(top) > t`) until a produced slot at or
/// before `t` appears. Doubles the step until a probe lands on empty
/// history, then bisects.
fn descend<S: ChainSource + ?Sized>(
    clock: &mut Clock<'_, S>,
    t: f64,
    top: (Slot, i64),
    mut empty: Option<Slot>,
    mut step: u64,
) -> Result<((Slot, i64), (Slot, i64)), SlotError> {
    let mut hi = top;
    loop {
        let probe = match empty {
            None if hi.0 == 0 => return Err(SlotError::TimestampBeforeHistory(t)),
            None => hi.0.saturating_sub(step),
            Some(e) if hi.0 <= e + 1 => return Err(SlotError::TimestampBeforeHistory(t)),
            Some(e) => e + (hi.0 - e) / 2,
        };
        match clock.produced_at_or_below(probe)? {
            None => empty = Some(probe),
            Some(prev) if prev.1 as f64 <= t => return Ok((prev, top)),
            Some(prev) => {
                hi = prev;
                step = step.saturating_mul(2);
            }
        }
    }
}

/// A bracket `(L, H)` of produced slots with `bt(L) ≤ t ≤ bt(H)`, found by
/// doubling steps outward from `guess`.
pub fn bracket<S: ChainSource + ?Sized>(t: f64, guess: Slot, source: &S) -> Result<(Slot, Slot), SlotError> {
    let tip = source.get_slot()?;
    let mut clock = Clock::new(source);
    let (l, h) = bracket_with(&mut clock, t, guess.min(tip), tip)?;
    Ok((l.0, h.0))
}

pub fn nearest_slot<S: ChainSource + ?Sized>(t: f64, source: &S, cal: ClockCalibration) -> Result<SlotChoice, SlotError> {
    nearest_slot_traced(t, source, cal).map(|(c, _)| c)
}

/// [`nearest_slot`] plus the search trace.
pub fn nearest_slot_traced<S: ChainSource + ?Sized>(
    t: f64,
    source: &S,
    cal: ClockCalibration,
) -> Result<(SlotChoice, SearchTrace), SlotError> {
    if !t.is_finite() {
        return Err(SlotError::TimestampBeforeHistory(t));
    }
    let mut clock = Clock::new(source);
    let reported_tip = source.get_slot()?;
    let (tip, tip_time) = clock
        .produced_at_or_below(reported_tip)?
        .ok_or_else(|| SourceError::Unavailable("no produced block at or below the tip".into()))?;
    let guess = estimate_slot(t, tip, tip_time as f64, cal)?;
    let (l, h) = bracket_with(&mut clock, t, guess, tip)?;

    // floor: max{s : bt(s) ≤ t}; push the upper bound past any run equal to t
    let mut lo = l;
    let mut hi = h;
    let mut step: u64 = 1;
    while hi.1 as f64 <= t && hi.0 < tip {
        lo = hi;
        match clock.produced_at_or_above(hi.0.saturating_add(step).min(tip), tip)? {
            Some(next) => hi = next,
            None => break,
        }
        step = step.saturating_mul(2);
    }
    if hi.1 as f64 <= t {
        // t is at or after the tip time
        lo = hi;
    }
    while let Some(p) = clock.produced_between(lo.0, hi.0)? {
        if p.1 as f64 <= t {
            lo = p;
        } else {
            hi = p;
        }
    }
    let floor = lo;

    let ceil = if (floor.1 as f64) < t {
        hi
    } else {
        // bt(floor) = t: the ceiling is the first slot of the equal run
        let mut hi2 = floor;
        let mut lo2 = l;
        let mut step: u64 = 1;
        let mut history_start = false;
        while lo2.1 as f64 >= t {
            hi2 = lo2;
            match clock.produced_at_or_below(lo2.0.saturating_sub(step))? {
                Some(prev) if prev.0 < lo2.0 => lo2 = prev,
                _ => {
                    history_start = true;
                    break;
                }
            }
            step = step.saturating_mul(2);
        }
        if history_start {
            // scan down from the last known run member; runs are short
            let mut first = hi2;
            while first.0 > 0 {
                match clock.produced_at_or_below(first.0 - 1)? {
                    Some(prev) if prev.1 as f64 >= t => first = prev,
                    _ => break,
                }
            }
            first
        } else {
            while let Some(p) = clock.produced_between(lo2.0, hi2.0)? {
                if (p.1 as f64) < t {
                    lo2 = p;
                } else {
                    hi2 = p;
                }
            }
            hi2
        }
    };

    let d_floor = t - floor.1 as f64;
    let d_ceil = ceil.1 as f64 - t;
    let mut slots = if floor.0 == ceil.0 {
        vec![floor.0]
    } else if d_floor < d_ceil {
        vec![floor.0]
    } else if d_ceil < d_floor {
        vec![ceil.0]
    } else {
        vec![floor.0, ceil.0]
    };
    slots.sort_unstable();
    let choice = SlotChoice {
        slots,
        floor_slot: floor.0,
        ceil_slot: ceil.0,
        floor_time: floor.1,
        ceil_time: ceil.1,
    };
    let trace = SearchTrace {
        guess,
        bracket: (l.0, h.0),
        block_time_calls: clock.calls,
    };
    Ok((choice, trace))
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::source::FixtureStore;
    use crate::testkit::synthetic_chain;

    fn chain(f: impl Fn(u64) -> Option<i64>, n: u64) -> FixtureStore {
        synthetic_chain(0, &(0..n).map(f).collect::<Vec<_>>())
    }

    #[test]
    fn estimate_examples() {
        let cal = ClockCalibration::default();
        assert_eq!(estimate_slot(1000.0, 1_000_000, 1400.0, cal), Ok(999_000));
        assert_eq!(estimate_slot(5.0, 77, 5.0, cal), Ok(77));
        assert!(matches!(estimate_slot(6.0, 77, 5.0, cal), Err(SlotError::FutureTimestamp { .. })));
        // half away from zero: 0.2 / 0.4 = 0.5 → 1
        assert_eq!(estimate_slot(9.5, 10, 10.0, ClockCalibration::new(1.0).unwrap()), Ok(9));
        assert_eq!(estimate_slot(10.5, 10, 11.0, ClockCalibration::new(1.0).unwrap()), Ok(9));
        assert_eq!(estimate_slot(0.0, 10, 1e6, cal), Ok(0));
        assert!(ClockCalibration::new(0.0).is_err());
    }

    #[test]
    fn bracket_examples() {
        let c = chain(|s| Some(s as i64), 2000);
        let (l, h) = bracket(500.0, 490, &c).unwrap();
        assert!(l <= 500 && 500 <= h && l <= 490);
        assert_eq!(bracket(500.0, 500, &c), Ok((500, 500)));
        let late = chain(|s| Some(s as i64 + 100), 50);
        assert_eq!(bracket(10.0, 5, &late), Err(SlotError::TimestampBeforeHistory(10.0)));
    }

    #[test]
    fn nearest_examples() {
        let c = chain(|s| Some(2 * s as i64), 100);
        let cal = ClockCalibration::default();
        assert_eq!(nearest_slot(11.0, &c, cal).unwrap().slots, vec![5, 6]);
        assert_eq!(nearest_slot(11.5, &c, cal).unwrap().slots, vec![6]);
        assert_eq!(nearest_slot(12.0, &c, cal).unwrap().slots, vec![6]);
        assert!(matches!(nearest_slot(1e9, &c, cal), Err(SlotError::FutureTimestamp { .. })));
        assert!(matches!(nearest_slot(-5.0, &c, cal), Err(SlotError::TimestampBeforeHistory(_))));
    }

    #[test]
    fn skipped_slots_are_transparent() {
        // slots 3..=7 skipped
        let c = chain(|s| (!(3..=7).contains(&s)).then_some(s as i64 * 10), 40);
        let choice = nearest_slot(56.0, &c, ClockCalibration::new(10.0).unwrap()).unwrap();
        assert_eq!((choice.floor_slot, choice.ceil_slot), (2, 8));
        assert_eq!(choice.slots, vec![8]);
    }

    #[test]
    fn equal_times_pair_the_run_ends() {
        let times = [Some(0), Some(1), Some(1), None, Some(1), Some(2)];
        let c = synthetic_chain(100, &times);
        let choice = nearest_slot(1.0, &c, ClockCalibration::default()).unwrap();
        assert_eq!((choice.ceil_slot, choice.floor_slot), (101, 104));
        assert_eq!(choice.slots, vec![101, 104]);
    }

    #[test]
    fn tip_that_was_skipped_resolves_downward() {
        let c = synthetic_chain(0, &[Some(0), Some(1), Some(2), None, None]);
        let choice = nearest_slot(2.0, &c, ClockCalibration::new(1.0).unwrap()).unwrap();
        assert_eq!(choice.slots, vec![2]);
    }

    /// floor/ceil by exhaustive scan.
    fn oracle(times: &[Option<i64>], start: u64, t: f64) -> (Slot, Slot) {
        let produced = || times.iter().enumerate().filter_map(|(i, x)| x.map(|x| (start + i as u64, x as f64)));
        let floor = produced().filter(|(_, x)| *x <= t).map(|(s, _)| s).max().unwrap();
        let ceil = produced().filter(|(_, x)| *x >= t).map(|(s, _)| s).min().unwrap();
        (floor, ceil)
    }

    fn random_chain() -> impl Strategy<Value = (Vec<Option<i64>>, f64)> {
        (prop::collection::vec((0u64..3, any::<bool>()), 2..300), 0.0f64..1.0).prop_map(|(steps, frac)| {
            let mut t = 1_000i64;
            let mut times = Vec::new();
            for (d, skip) in steps {
                t += d as i64;
                times.push(if skip && !times.is_empty() { None } else { Some(t) });
            }
            // keep the last slot produced so the tip has a time
            times.push(Some(t + 1));
            let lo = times[0].unwrap() as f64;
            let t_pick = lo + frac * (t + 1 - times[0].unwrap()) as f64;
            (times, t_pick)
        })
    }

    proptest! {
        #[test]
        fn matches_linear_scan((times, t) in random_chain(), start in 0u64..1_000_000) {
            let c = synthetic_chain(start, &times);
            let (choice, trace) = nearest_slot_traced(t, &c, ClockCalibration::default()).unwrap();
            let (floor, ceil) = oracle(&times, start, t);
            prop_assert_eq!((choice.floor_slot, choice.ceil_slot), (floor, ceil));
            let best = times.iter().flatten().map(|x| (*x as f64 - t).abs()).fold(f64::INFINITY, f64::min);
            for s in &choice.slots {
                let x = times[(s - start) as usize].unwrap() as f64;
                prop_assert_eq!((x - t).abs(), best);
            }
            let budget = 2.0 * ((trace.bracket.1 - trace.bracket.0 + 2) as f64).log2() + 64.0;
            prop_assert!((trace.block_time_calls as f64) <= budget, "{} calls over budget {}", trace.block_time_calls, budget);
        }

        #[test]
        fn monotone_in_t((times, t) in random_chain(), dt in 0.0f64..5.0) {
            let c = synthetic_chain(0, &times);
            let cal = ClockCalibration::default();
            let a = nearest_slot(t, &c, cal).unwrap();
            let tip = times.last().unwrap().unwrap() as f64;
            let b = nearest_slot((t + dt).min(tip), &c, cal).unwrap();
            prop_assert!(a.min_slot() <= b.max_slot());
        }
    }
}

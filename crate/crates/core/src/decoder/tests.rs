use proptest::prelude::*;

use super::*;
use crate::ledger::{ConfirmedTransaction, InnerInstructionSet};
use crate::testkit::{self, amm_swap, mint, pubkey, wsol, Programs, Side, TxBuilder};

fn decode(tx: &ConfirmedTransaction) -> Result<SwapInfo, DecodeError> {
    decode_swap(&tx.transaction, &tx.meta, &testkit::registry())
}

fn harvest(tx: &ConfirmedTransaction) -> Harvest {
    let reg = testkit::registry();
    let (tinfo, _) = build_token_tables(&tx.transaction, &tx.meta, &reg).unwrap();
    harvest_evidence(&tx.transaction, &tx.meta, &reg, &tinfo)
}

#[test]
fn canonical_cases_decode_as_constructed() {
    for case in testkit::decoder_cases() {
        assert_eq!(decode(&case.tx), case.expected, "case {}", case.name);
    }
}

#[test]
fn raydium_fixture_yields_two_legs() {
    let h = harvest(&testkit::raydium_fixture());
    assert!(!h.found);
    assert_eq!(h.evidence.len(), 2);
    assert!(h.evidence.iter().all(|e| e.kind() == EvidenceKind::Leg));
    let dirs: Vec<LegDirection> = h
        .evidence
        .iter()
        .map(|e| match &e.payload {
            EvidencePayload::Leg(l) => l.direction,
            _ => unreachable!(),
        })
        .collect();
    assert_eq!(dirs, vec![LegDirection::Out, LegDirection::In]);
}

#[test]
fn jupiter_event_outranks_collected_legs() {
    let h = harvest(&testkit::jupiter_fixture());
    assert!(h.found);
    let kinds: Vec<EvidenceKind> = h.evidence.iter().map(Evidence::kind).collect();
    assert_eq!(kinds, vec![EvidenceKind::JupiterRouteEvent, EvidenceKind::JupiterRouteEvent]);
    let info = decode(&testkit::jupiter_fixture()).unwrap();
    // the legs carry off-by-one amounts; the result follows the events
    assert_eq!(info.token_in_amount, RawAmount(7_000_000));
    assert_eq!(info.token_out_amount, RawAmount(60_000_000));
}

#[test]
fn jupiter_without_event_collects_amm_legs() {
    let signer = pubkey("trader:jup-legs");
    let m = mint("J");
    let mut b = TxBuilder::new(&signer);
    let (ua, ub, va, vb) = (pubkey("ua"), pubkey("ub"), pubkey("va"), pubkey("vb"));
    b.token_account(&ua, &m, 6, 10, 0)
        .token_account(&va, &m, 6, 0, 10)
        .token_account(&vb, &wsol(), 9, 20, 0)
        .token_account(&ub, &wsol(), 9, 0, 20);
    let o = b.outer(&Programs::jupiter(), &[&signer], vec![1]);
    b.inner(o, &Programs::orca(), &[&va, &vb], vec![9], 2);
    b.transfer(o, &Programs::token(), &ua, &va, &signer, 10, 3);
    b.transfer(o, &Programs::token(), &vb, &ub, &pubkey("orca:auth"), 20, 3);
    let tx = b.build();
    let h = harvest(&tx);
    assert!(h.found);
    assert_eq!(h.evidence.len(), 2);
    let info = decode(&tx).unwrap();
    assert_eq!(info.amm_tags, vec!["JUPITER".to_string(), "ORCA".to_string()]);
    assert_eq!(info.token_in_mint, m);
    assert!(info.token_out_mint.is_sol());
}

#[test]
fn unregistered_programs_give_no_evidence() {
    let mut b = TxBuilder::new(&pubkey("nobody"));
    b.outer(&pubkey("program:unknown"), &[], vec![1, 2, 3]);
    let h = harvest(&b.build());
    assert!(h.evidence.is_empty());
    assert!(!h.found);
}

#[test]
fn bot_router_sweeps_amm_legs_only() {
    let signer = pubkey("trader:bot");
    let m = mint("B");
    let mut b = TxBuilder::new(&signer);
    let (ua, ub, va, vb) = (pubkey("b:ua"), pubkey("b:ub"), pubkey("b:va"), pubkey("b:vb"));
    b.token_account(&ua, &m, 6, 10, 0)
        .token_account(&va, &m, 6, 0, 10)
        .token_account(&vb, &wsol(), 9, 20, 0)
        .token_account(&ub, &wsol(), 9, 0, 20);
    let o = b.outer(&Programs::bot(), &[&signer], vec![1]);
    // fee transfer directly under the router is not an AMM leg
    b.transfer(o, &Programs::token(), &ua, &pubkey("b:fee"), &signer, 1, 2);
    b.inner(o, &Programs::meteora(), &[&va, &vb], vec![9], 2);
    b.transfer(o, &Programs::token(), &ua, &va, &signer, 10, 3);
    b.transfer(o, &Programs::token(), &vb, &ub, &pubkey("m:auth"), 20, 3);
    let info = decode(&b.build()).unwrap();
    assert_eq!(info.token_in_amount, RawAmount(10));
    assert_eq!(info.amm_tags, vec!["BOT_ROUTER".to_string(), "METEORA".to_string()]);
}

#[test]
fn malformed_inner_transfer_is_a_diagnostic() {
    let (signer, m) = (pubkey("trader:diag"), mint("D"));
    let mut b = amm_swap(&Programs::raydium(), &signer, &Side::new(&m, 10, 6), &Side::new(&wsol(), 20, 9));
    b.inner(0, &Programs::token(), &[&signer], vec![3, 1], 2);
    let h = harvest(&b.build());
    assert_eq!(h.diagnostics.len(), 1);
    assert_eq!(h.evidence.len(), 2);
}

#[test]
fn loaded_addresses_resolve_programs() {
    let signer = pubkey("trader:alt");
    let m = mint("ALT");
    let mut b = TxBuilder::new(&signer);
    let (ua, ub, va, vb) = (pubkey("alt:ua"), pubkey("alt:ub"), pubkey("alt:va"), pubkey("alt:vb"));
    let auth = pubkey("alt:auth");
    for k in [&ua, &ub, &va, &vb, &auth] {
        b.key(k);
    }
    b.key(&Programs::token());
    b.loaded_address(&Programs::orca());
    b.token_account(&ua, &m, 6, 10, 0)
        .token_account(&vb, &wsol(), 9, 20, 0);
    let o = b.outer(&Programs::orca(), &[&va, &vb], vec![9]);
    b.transfer(o, &Programs::token(), &ua, &va, &signer, 10, 2);
    b.transfer(o, &Programs::token(), &vb, &ub, &auth, 20, 2);
    let info = decode(&b.build()).unwrap();
    assert_eq!(info.token_in_mint, m);
    assert_eq!(info.amm_tags, vec!["ORCA".to_string()]);
}

#[test]
fn okx_without_logs_falls_back_to_legs() {
    let case = testkit::decoder_cases().into_iter().find(|c| c.name == "okx_log_aggregate").unwrap();
    let mut tx = case.tx;
    tx.meta.log_messages.clear();
    let info = decode(&tx).unwrap();
    assert_eq!(info.amm_tags, vec!["OKX".to_string(), "RAYDIUM".to_string()]);
    assert_eq!(info.token_in_amount, RawAmount(1));
}

#[test]
fn pump_sell_event_maps_token_in() {
    let reg = testkit::registry();
    let signer = pubkey("trader:pump-sell-event");
    let m = mint("PS");
    let mut b = TxBuilder::new(&signer);
    b.token_account(&pubkey("ps:ata"), &m, 6, 100, 0);
    let o = b.outer(&Programs::pump(), &[&signer], reg.pump_sell_instructions[0].to_vec());
    b.inner(o, &Programs::pump(), &[&signer], testkit::pump_event_data(&reg, &m, 5, 100, false, &signer), 2);
    let info = decode(&b.build()).unwrap();
    assert_eq!((info.token_in_mint.clone(), info.token_in_amount), (m, RawAmount(100)));
    assert!(info.token_out_mint.is_sol());
    assert_eq!(info.token_out_decimals, Decimals::SOL);
}

#[test]
fn pump_fallback_requires_consistency() {
    let reg = testkit::registry();
    let signer = pubkey("trader:pump-inconsistent");
    let (m, n) = (mint("P1"), mint("P2"));
    let mut b = TxBuilder::new(&signer);
    let o = b.outer(&Programs::pump(), &[&signer], reg.pump_buy_instructions[0].to_vec());
    // two signer-side mints: not consistent
    b.transfer_checked(o, &Programs::token(), &pubkey("a"), &m, &pubkey("b"), &signer, 5, 6, 2);
    b.transfer_checked(o, &Programs::token(), &pubkey("c"), &n, &pubkey("d"), &signer, 5, 6, 2);
    b.transfer_checked(o, &Programs::token(), &pubkey("e"), &wsol(), &pubkey("f"), &pubkey("curve"), 9, 9, 2);
    let h = harvest(&b.build());
    assert!(h.evidence.iter().all(|e| e.kind() != EvidenceKind::PumpFunTradeEvent));
}

#[test]
fn route_hops_net_out_intermediates() {
    let hop = |a: &Mint, x: u64, b: &Mint, y: u64| RouteHop {
        amm: "amm".into(),
        input_mint: a.clone(),
        input_amount: RawAmount(x),
        output_mint: b.clone(),
        output_amount: RawAmount(y),
    };
    let (a, b, c) = (mint("a"), mint("b"), mint("c"));
    // two parallel splits then a merge
    let hops = [hop(&a, 60, &b, 30), hop(&a, 40, &b, 20), hop(&b, 50, &c, 7)];
    let refs: Vec<&RouteHop> = hops.iter().collect();
    let p = route_pair(&refs).unwrap();
    assert_eq!((p.in_mint, p.in_amount, p.out_mint, p.out_amount), (a, RawAmount(100), c, RawAmount(7)));
    let circular = [hop(&mint("a"), 5, &mint("a"), 5)];
    assert!(route_pair(&circular.iter().collect::<Vec<_>>()).is_err());
}

#[test]
fn malformed_meta_is_rejected() {
    let mut tx = testkit::raydium_fixture();
    tx.meta.inner_instructions.push(InnerInstructionSet {
        index: 9,
        instructions: vec![],
    });
    assert!(matches!(decode(&tx), Err(DecodeError::MalformedMeta(_))));
}

#[test]
fn prefilter_venue_predicate() {
    let reg = testkit::registry();
    assert!(touches_swap_venue(&testkit::raydium_fixture().transaction, &reg));
    let mut b = TxBuilder::new(&pubkey("x"));
    b.outer(&Programs::token(), &[], testkit::transfer_data(1));
    assert!(!touches_swap_venue(&b.build().transaction, &reg));
}

fn swap_info_strategy() -> impl Strategy<Value = (SwapInfo, i128)> {
    (any::<bool>(), 1u64..u64::MAX, 1u64..u64::MAX, -10i128..10).prop_map(|(sol_in, a, b, delta)| {
        let (m, s) = (mint("X"), Mint::sol());
        let (im, om) = if sol_in { (s, m) } else { (m, s) };
        (
            SwapInfo {
                token_in_mint: im,
                token_in_amount: RawAmount(a),
                token_in_decimals: Decimals::new(6).unwrap(),
                token_out_mint: om,
                token_out_amount: RawAmount(b),
                token_out_decimals: Decimals::SOL,
                amm_tags: vec![],
                signer: String::new(),
                signatures: vec![],
                timestamp: None,
            },
            delta,
        )
    })
}

/// Random two-mint AMM swaps: signer pays `a` of one mint, receives `b` of the other.
fn amm_case() -> impl Strategy<Value = (ConfirmedTransaction, usize, bool)> {
    (
        0usize..4,
        1u64..1_000_000_000_000,
        1u64..1_000_000_000_000,
        any::<bool>(),
        0u64..3,
        any::<bool>(),
    )
        .prop_map(|(venue, a, b, sol_side, gain, dup)| {
            let program = [Programs::raydium(), Programs::orca(), Programs::meteora(), Programs::pump_amm()][venue].clone();
            let signer = pubkey("prop:signer");
            let x = mint("PROP");
            let (input, output) = if sol_side {
                (Side::new(&wsol(), a, 9), Side::new(&x, b, 6))
            } else {
                (Side::new(&x, a, 6), Side::new(&wsol(), b, 9))
            };
            let mut builder = amm_swap(&program, &signer, &input, &output);
            builder.lamports(&signer, 10_000_000_000, 10_000_000_000 + gain);
            (builder.build(), 0, dup)
        })
}

proptest! {
    #[test]
    fn decoding_is_deterministic((tx, _, _) in amm_case()) {
        prop_assert_eq!(decode(&tx), decode(&tx.clone()));
    }

    #[test]
    fn duplicated_inner_sets_do_not_change_result((tx, outer, _) in amm_case()) {
        let mut dup = tx.clone();
        let set = dup.meta.inner_instructions.iter().find(|s| s.index == outer).unwrap().clone();
        dup.meta.inner_instructions.push(set);
        prop_assert_eq!(decode(&tx), decode(&dup));
    }

    #[test]
    fn direction_sanity_is_idempotent((info, delta) in swap_info_strategy()) {
        let mut once = info.clone();
        apply_direction_sanity(&mut once, delta);
        let mut twice = once.clone();
        apply_direction_sanity(&mut twice, delta);
        prop_assert_eq!(&once, &twice);
        prop_assert!(!(delta > 0 && once.token_in_mint.is_sol()));
    }

    #[test]
    fn decimals_follow_the_table((tx, _, _) in amm_case()) {
        let info = decode(&tx).unwrap();
        let reg = testkit::registry();
        let (_, decs) = build_token_tables(&tx.transaction, &tx.meta, &reg).unwrap();
        for (m, d) in [(&info.token_in_mint, info.token_in_decimals), (&info.token_out_mint, info.token_out_decimals)] {
            if m.is_sol() {
                prop_assert_eq!(d, Decimals::SOL);
            } else {
                prop_assert_eq!(d, decs.get(m));
            }
        }
        prop_assert_ne!(&info.token_in_mint, &info.token_out_mint);
    }

    #[test]
    fn route_events_dominate_legs(extra in 1u64..1_000_000, legs_first in any::<bool>()) {
        // shifting every AMM leg amount never changes an event-backed result
        let mut tx = testkit::jupiter_fixture();
        let base = decode(&tx).unwrap();
        for set in &mut tx.meta.inner_instructions {
            for ix in &mut set.instructions {
                if ix.data.first() == Some(&OPCODE_TRANSFER) && ix.data.len() == 9 {
                    let amt = u64::from_le_bytes(ix.data[1..9].try_into().unwrap()).saturating_add(extra);
                    ix.data[1..9].copy_from_slice(&amt.to_le_bytes());
                }
            }
            if legs_first {
                set.instructions.rotate_left(1);
            }
        }
        prop_assert_eq!(decode(&tx).unwrap(), base);
    }
}

//! Hand-built ledger fixtures for tests: a transaction builder, synthetic
//! program ids, and canonical decoder cases with their expected results.

use std::collections::BTreeMap;

use crate::decoder::DecodeError;
use crate::ledger::{
    Block, ConfirmedTransaction, Decimals, InnerInstructionSet, Instruction, Mint, RawAmount, Slot, SwapInfo,
    TokenBalanceEntry, TransactionMeta, TransactionRecord,
};
use crate::registry::{ProgramRegistry, Venue};

/// Deterministic 32-byte key for a label, base58 encoded.
pub fn pubkey(label: &str) -> String {
    let mut bytes = [0u8; 32];
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h = (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3);
    }
    for (i, slot) in bytes.iter_mut().enumerate() {
        h = (h ^ i as u64).wrapping_mul(0x0100_0000_01b3);
        *slot = (h >> 24) as u8;
    }
    bytes[0] |= 1;
    bs58::encode(bytes).into_string()
}

pub fn key_bytes(key: &str) -> [u8; 32] {
    let v = bs58::decode(key).into_vec().expect("base58 key");
    v.try_into().expect("32-byte key")
}

/// Synthetic program ids for every venue.
pub struct Programs;

impl Programs {
    pub fn raydium() -> String {
        pubkey("program:raydium")
    }
    pub fn orca() -> String {
        pubkey("program:orca")
    }
    pub fn meteora() -> String {
        pubkey("program:meteora")
    }
    pub fn jupiter() -> String {
        pubkey("program:jupiter")
    }
    pub fn okx() -> String {
        pubkey("program:okx")
    }
    pub fn pump() -> String {
        pubkey("program:pump")
    }
    pub fn pump_amm() -> String {
        pubkey("program:pump-amm")
    }
    pub fn token() -> String {
        pubkey("program:token")
    }
    pub fn token_2022() -> String {
        pubkey("program:token-2022")
    }
    pub fn dca() -> String {
        pubkey("program:dca")
    }
    pub fn bot() -> String {
        pubkey("program:bot")
    }
    pub fn system() -> String {
        "11111111111111111111111111111111".to_string()
    }
}

/// Bundled discriminators and base mints with synthetic program ids.
pub fn registry() -> ProgramRegistry {
    let mut r = ProgramRegistry::mainnet().with_programs([
        (Programs::raydium(), Venue::Raydium),
        (Programs::orca(), Venue::Orca),
        (Programs::meteora(), Venue::Meteora),
        (Programs::jupiter(), Venue::Jupiter),
        (Programs::okx(), Venue::Okx),
        (Programs::pump(), Venue::PumpFun),
        (Programs::pump_amm(), Venue::PumpFunAmm),
        (Programs::token(), Venue::Token),
        (Programs::token_2022(), Venue::Token2022),
        (Programs::bot(), Venue::BotRouter),
    ]);
    r.dca_programs = vec![Programs::dca()];
    r
}

pub fn mint(label: &str) -> Mint {
    Mint::new(pubkey(&format!("mint:{label}"))).expect("non-empty")
}

pub fn usdc() -> Mint {
    registry().usdc
}

pub fn usdt() -> Mint {
    registry().usdt
}

pub fn wsol() -> Mint {
    Mint::new(crate::ledger::WSOL_MINT).expect("non-empty")
}

pub fn transfer_data(amount: u64) -> Vec<u8> {
    let mut d = vec![crate::decoder::OPCODE_TRANSFER];
    d.extend_from_slice(&amount.to_le_bytes());
    d
}

pub fn transfer_checked_data(amount: u64, decimals: u8) -> Vec<u8> {
    let mut d = vec![crate::decoder::OPCODE_TRANSFER_CHECKED];
    d.extend_from_slice(&amount.to_le_bytes());
    d.push(decimals);
    d
}

pub fn route_event_data(
    registry: &ProgramRegistry,
    amm: &str,
    input: &Mint,
    input_amount: u64,
    output: &Mint,
    output_amount: u64,
) -> Vec<u8> {
    let mut d = registry.route_event.header();
    d.extend_from_slice(&key_bytes(amm));
    d.extend_from_slice(&key_bytes(input.address()));
    d.extend_from_slice(&input_amount.to_le_bytes());
    d.extend_from_slice(&key_bytes(output.address()));
    d.extend_from_slice(&output_amount.to_le_bytes());
    d
}

pub fn pump_event_data(
    registry: &ProgramRegistry,
    mint: &Mint,
    sol_amount: u64,
    token_amount: u64,
    is_buy: bool,
    user: &str,
) -> Vec<u8> {
    let mut d = registry.pump_trade_events[0].header();
    d.extend_from_slice(&key_bytes(mint.address()));
    d.extend_from_slice(&sol_amount.to_le_bytes());
    d.extend_from_slice(&token_amount.to_le_bytes());
    d.push(u8::from(is_buy));
    d.extend_from_slice(&key_bytes(user));
    d
}

/// Builds one confirmed transaction. Account 0 is the fee payer.
#[derive(Clone, Debug)]
pub struct TxBuilder {
    keys: Vec<String>,
    loaded: Vec<String>,
    outers: Vec<Instruction>,
    inner: Vec<InnerInstructionSet>,
    lamports: BTreeMap<usize, (u64, u64)>,
    pre_tokens: Vec<TokenBalanceEntry>,
    post_tokens: Vec<TokenBalanceEntry>,
    logs: Vec<String>,
    err: bool,
    signature: String,
    block_time: Option<i64>,
    slot: Option<Slot>,
}

impl TxBuilder {
    pub fn new(fee_payer: &str) -> Self {
        Self {
            keys: vec![fee_payer.to_string()],
            loaded: Vec::new(),
            outers: Vec::new(),
            inner: Vec::new(),
            lamports: BTreeMap::new(),
            pre_tokens: Vec::new(),
            post_tokens: Vec::new(),
            logs: Vec::new(),
            err: false,
            signature: pubkey(&format!("sig:{fee_payer}")),
            block_time: None,
            slot: None,
        }
    }

    /// Index of `addr` in the key table, appending it to the message keys if new.
    pub fn key(&mut self, addr: &str) -> usize {
        if let Some(i) = self.keys.iter().position(|k| k == addr) {
            return i;
        }
        if let Some(i) = self.loaded.iter().position(|k| k == addr) {
            return self.keys.len() + i;
        }
        assert!(self.loaded.is_empty(), "add message keys before loaded addresses");
        self.keys.push(addr.to_string());
        self.keys.len() - 1
    }

    pub fn loaded_address(&mut self, addr: &str) -> usize {
        self.loaded.push(addr.to_string());
        self.keys.len() + self.loaded.len() - 1
    }

    fn instruction(&mut self, program: &str, accounts: &[&str], data: Vec<u8>, stack_height: Option<u32>) -> Instruction {
        let program_id_index = self.key(program);
        let accounts = accounts.iter().map(|a| self.key(a)).collect();
        Instruction {
            program_id_index,
            accounts,
            data,
            stack_height,
        }
    }

    pub fn outer(&mut self, program: &str, accounts: &[&str], data: Vec<u8>) -> usize {
        let ix = self.instruction(program, accounts, data, None);
        self.outers.push(ix);
        self.outers.len() - 1
    }

    /// Appends an inner instruction to the last set recorded for `outer`.
    pub fn inner(&mut self, outer: usize, program: &str, accounts: &[&str], data: Vec<u8>, stack_height: u32) -> &mut Self {
        let ix = self.instruction(program, accounts, data, Some(stack_height));
        match self.inner.iter_mut().rev().find(|s| s.index == outer) {
            Some(set) => set.instructions.push(ix),
            None => self.inner.push(InnerInstructionSet {
                index: outer,
                instructions: vec![ix],
            }),
        }
        self
    }

    /// Records the inner set of `outer` a second time, as some nodes do.
    pub fn duplicate_inner_set(&mut self, outer: usize) -> &mut Self {
        let set = self.inner.iter().find(|s| s.index == outer).cloned().expect("inner set");
        self.inner.push(set);
        self
    }

    pub fn transfer(
        &mut self,
        outer: usize,
        token_program: &str,
        src: &str,
        dst: &str,
        authority: &str,
        amount: u64,
        stack_height: u32,
    ) -> &mut Self {
        self.inner(outer, token_program, &[src, dst, authority], transfer_data(amount), stack_height)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn transfer_checked(
        &mut self,
        outer: usize,
        token_program: &str,
        src: &str,
        mint: &Mint,
        dst: &str,
        authority: &str,
        amount: u64,
        decimals: u8,
        stack_height: u32,
    ) -> &mut Self {
        self.inner(
            outer,
            token_program,
            &[src, mint.address(), dst, authority],
            transfer_checked_data(amount, decimals),
            stack_height,
        )
    }

    pub fn token_account(&mut self, account: &str, mint: &Mint, decimals: u8, pre: u64, post: u64) -> &mut Self {
        let idx = self.key(account);
        let entry = |amount| TokenBalanceEntry {
            account_index: idx,
            mint: mint.clone(),
            decimals: Decimals::new(decimals).expect("decimals"),
            amount: RawAmount(amount),
            owner: None,
        };
        self.pre_tokens.push(entry(pre));
        self.post_tokens.push(entry(post));
        self
    }

    pub fn lamports(&mut self, account: &str, pre: u64, post: u64) -> &mut Self {
        let idx = self.key(account);
        self.lamports.insert(idx, (pre, post));
        self
    }

    pub fn log(&mut self, line: impl Into<String>) -> &mut Self {
        self.logs.push(line.into());
        self
    }

    pub fn failed(&mut self) -> &mut Self {
        self.err = true;
        self
    }

    pub fn signature(&mut self, sig: impl Into<String>) -> &mut Self {
        self.signature = sig.into();
        self
    }

    pub fn block_time(&mut self, t: i64) -> &mut Self {
        self.block_time = Some(t);
        self
    }

    pub fn slot(&mut self, slot: Slot) -> &mut Self {
        self.slot = Some(slot);
        self
    }

    pub fn key_table(&self) -> Vec<String> {
        self.keys.iter().chain(&self.loaded).cloned().collect()
    }

    pub fn build(&self) -> ConfirmedTransaction {
        let n = self.keys.len() + self.loaded.len();
        let bal = |f: fn(&(u64, u64)) -> u64| -> Vec<u64> {
            (0..n).map(|i| self.lamports.get(&i).map(f).unwrap_or(0)).collect()
        };
        ConfirmedTransaction {
            transaction: TransactionRecord {
                signatures: vec![self.signature.clone()],
                message_account_keys: self.keys.clone(),
                loaded_addresses: self.loaded.clone(),
                outer_instructions: self.outers.clone(),
                slot: self.slot,
                block_time: self.block_time,
            },
            meta: TransactionMeta {
                err: self.err.then(|| serde_json::json!({"InstructionError": [0, "Custom"]})),
                pre_balances: bal(|p| p.0),
                post_balances: bal(|p| p.1),
                pre_token_balances: self.pre_tokens.clone(),
                post_token_balances: self.post_tokens.clone(),
                inner_instructions: self.inner.clone(),
                log_messages: self.logs.clone(),
            },
        }
    }
}

/// One side of a simple AMM swap.
#[derive(Clone, Debug)]
pub struct Side {
    pub mint: Mint,
    pub amount: u64,
    pub decimals: u8,
}

impl Side {
    pub fn new(mint: &Mint, amount: u64, decimals: u8) -> Self {
        Self {
            mint: mint.clone(),
            amount,
            decimals,
        }
    }
}

/// A signer swapping `input` for `output` through one AMM program: the
/// signer pays into the pool vault and the pool pays back.
pub fn amm_swap(program: &str, signer: &str, input: &Side, output: &Side) -> TxBuilder {
    let mut b = TxBuilder::new(signer);
    let pool = pubkey(&format!("{program}:pool-authority"));
    let user_in = pubkey(&format!("{signer}:ata:{}", input.mint));
    let user_out = pubkey(&format!("{signer}:ata:{}", output.mint));
    let vault_in = pubkey(&format!("{program}:vault:{}", input.mint));
    let vault_out = pubkey(&format!("{program}:vault:{}", output.mint));
    let token = Programs::token();
    b.token_account(&user_in, &input.mint, input.decimals, input.amount, 0);
    b.token_account(&vault_in, &input.mint, input.decimals, 0, input.amount);
    b.token_account(&vault_out, &output.mint, output.decimals, output.amount, 0);
    b.token_account(&user_out, &output.mint, output.decimals, 0, output.amount);
    let o = b.outer(program, &[&pool, &user_in, &user_out, &vault_in, &vault_out, signer], vec![9]);
    b.transfer(o, &token, &user_in, &vault_in, signer, input.amount, 2);
    b.transfer(o, &token, &vault_out, &user_out, &pool, output.amount, 2);
    b
}

/// A decoder fixture and its by-construction outcome.
pub struct DecoderCase {
    pub name: &'static str,
    pub tx: ConfirmedTransaction,
    pub expected: Result<SwapInfo, DecodeError>,
}

pub const CASE_TIME: i64 = 1_700_000_000;

#[allow(clippy::too_many_arguments)]
fn expect(
    signer: &str,
    sig: &ConfirmedTransaction,
    in_mint: &Mint,
    in_amount: u64,
    in_dec: u8,
    out_mint: &Mint,
    out_amount: u64,
    out_dec: u8,
    tags: &[&str],
) -> Result<SwapInfo, DecodeError> {
    Ok(SwapInfo {
        token_in_mint: in_mint.coalesce_sol(),
        token_in_amount: RawAmount(in_amount),
        token_in_decimals: Decimals::new(in_dec).unwrap(),
        token_out_mint: out_mint.coalesce_sol(),
        token_out_amount: RawAmount(out_amount),
        token_out_decimals: Decimals::new(out_dec).unwrap(),
        amm_tags: tags.iter().map(|s| s.to_string()).collect(),
        signer: signer.to_string(),
        signatures: sig.transaction.signatures.clone(),
        timestamp: Some(CASE_TIME),
    })
}

fn raydium_builder() -> (String, TxBuilder) {
    let signer = pubkey("trader:raydium");
    let m = mint("M");
    let mut b = amm_swap(
        &Programs::raydium(),
        &signer,
        &Side::new(&m, 1_000_000, 6),
        &Side::new(&wsol(), 500_000_000, 9),
    );
    b.lamports(&signer, 10_000_000_000, 9_999_995_000).block_time(CASE_TIME);
    (signer, b)
}

fn raydium_case() -> DecoderCase {
    let (signer, b) = raydium_builder();
    let tx = b.build();
    let expected = expect(&signer, &tx, &mint("M"), 1_000_000, 6, &Mint::sol(), 500_000_000, 9, &["RAYDIUM"]);
    DecoderCase {
        name: "raydium_leg",
        tx,
        expected,
    }
}

fn orca_case() -> DecoderCase {
    let signer = pubkey("trader:orca");
    let m = mint("ORCA-TOKEN");
    let mut b = amm_swap(
        &Programs::orca(),
        &signer,
        &Side::new(&m, 2_500_000_000, 9),
        &Side::new(&usdc(), 375_000_000, 6),
    );
    b.block_time(CASE_TIME);
    let tx = b.build();
    let expected = expect(&signer, &tx, &m, 2_500_000_000, 9, &usdc(), 375_000_000, 6, &["ORCA"]);
    DecoderCase {
        name: "orca_leg",
        tx,
        expected,
    }
}

fn meteora_case() -> DecoderCase {
    let signer = pubkey("trader:meteora");
    let m = mint("METEORA-TOKEN");
    let mut b = amm_swap(
        &Programs::meteora(),
        &signer,
        &Side::new(&wsol(), 2_000_000_000, 9),
        &Side::new(&m, 8_000_000, 3),
    );
    // signer spends lamports: no direction flip
    b.lamports(&signer, 5_000_000_000, 2_999_995_000).block_time(CASE_TIME);
    let tx = b.build();
    let expected = expect(&signer, &tx, &Mint::sol(), 2_000_000_000, 9, &m, 8_000_000, 3, &["METEORA"]);
    DecoderCase {
        name: "meteora_leg",
        tx,
        expected,
    }
}

/// Jupiter outer routing M → SOL on Raydium then SOL → USDC on Orca, with
/// AMM legs whose amounts disagree with the events.
fn jupiter_builder(signer: &str) -> TxBuilder {
    let reg = registry();
    let m = mint("ROUTED");
    let mut b = TxBuilder::new(signer);
    let user = signer.to_string();
    let token = Programs::token();
    let user_m = pubkey(&format!("{user}:ata:M"));
    let user_usdc = pubkey(&format!("{user}:ata:USDC"));
    let ray_vault_m = pubkey("raydium:vault:M");
    let ray_vault_sol = pubkey("raydium:vault:SOL");
    let orca_vault_sol = pubkey("orca:vault:SOL");
    let orca_vault_usdc = pubkey("orca:vault:USDC");
    let mid = pubkey("jupiter:mid-wsol");
    b.token_account(&user_m, &m, 6, 7_000_000, 0)
        .token_account(&ray_vault_m, &m, 6, 0, 7_000_000)
        .token_account(&ray_vault_sol, &wsol(), 9, 400_000_000, 0)
        .token_account(&mid, &wsol(), 9, 0, 0)
        .token_account(&orca_vault_sol, &wsol(), 9, 0, 400_000_000)
        .token_account(&orca_vault_usdc, &usdc(), 6, 60_000_000, 0)
        .token_account(&user_usdc, &usdc(), 6, 0, 60_000_000);
    let o = b.outer(&Programs::jupiter(), &[&user, &user_m, &user_usdc], vec![0xe5, 0x17, 0xcb, 0x97, 0x7a, 0xe3, 0xad, 0x2a]);
    b.inner(o, &Programs::raydium(), &[&ray_vault_m, &ray_vault_sol], vec![9], 2);
    b.transfer(o, &token, &user_m, &ray_vault_m, &user, 6_999_999, 3);
    b.transfer(o, &token, &ray_vault_sol, &mid, &pubkey("raydium:auth"), 399_999_999, 3);
    b.inner(
        o,
        &Programs::jupiter(),
        &[&pubkey("jupiter:event-authority")],
        route_event_data(&reg, &Programs::raydium(), &m, 7_000_000, &wsol(), 400_000_000),
        2,
    );
    b.inner(o, &Programs::orca(), &[&orca_vault_sol, &orca_vault_usdc], vec![9], 2);
    b.transfer(o, &token, &mid, &orca_vault_sol, &user, 400_000_000, 3);
    b.transfer(o, &token, &orca_vault_usdc, &user_usdc, &pubkey("orca:auth"), 59_999_999, 3);
    b.inner(
        o,
        &Programs::jupiter(),
        &[&pubkey("jupiter:event-authority")],
        route_event_data(&reg, &Programs::orca(), &wsol(), 400_000_000, &usdc(), 60_000_000),
        2,
    );
    b.block_time(CASE_TIME);
    b
}

fn jupiter_case() -> DecoderCase {
    let signer = pubkey("trader:jupiter");
    let tx = jupiter_builder(&signer).build();
    let expected = expect(
        &signer,
        &tx,
        &mint("ROUTED"),
        7_000_000,
        6,
        &usdc(),
        60_000_000,
        6,
        &["JUPITER", "RAYDIUM", "ORCA"],
    );
    DecoderCase {
        name: "jupiter_route_event",
        tx,
        expected,
    }
}

/// SOL → M through Jupiter under a DCA program. The keeper at AK[0] gains
/// lamports; the user at AK[2] is the signer and pays SOL, so no flip.
fn jupiter_dca_case() -> DecoderCase {
    let reg = registry();
    let keeper = pubkey("dca:keeper");
    let escrow = pubkey("dca:escrow");
    let user = pubkey("dca:user");
    let m = mint("DCA-TARGET");
    let mut b = TxBuilder::new(&keeper);
    b.key(&escrow);
    b.key(&user);
    b.lamports(&keeper, 1_000_000_000, 1_000_100_000)
        .lamports(&user, 3_000_000_000, 2_000_000_000)
        .token_account(&pubkey("dca:user:ata:M"), &m, 5, 0, 123_456);
    b.outer(&Programs::dca(), &[&user, &escrow], vec![1]);
    let o = b.outer(&Programs::jupiter(), &[&user], vec![2]);
    b.inner(
        o,
        &Programs::jupiter(),
        &[&pubkey("jupiter:event-authority")],
        route_event_data(&reg, &Programs::meteora(), &wsol(), 1_000_000_000, &m, 123_456),
        2,
    );
    b.block_time(CASE_TIME);
    let tx = b.build();
    let expected = expect(&user, &tx, &Mint::sol(), 1_000_000_000, 9, &m, 123_456, 5, &["JUPITER", "METEORA"]);
    DecoderCase {
        name: "jupiter_dca_signer",
        tx,
        expected,
    }
}

fn okx_case() -> DecoderCase {
    let signer = pubkey("trader:okx");
    let m = mint("OKX-SOURCE");
    let okx = Programs::okx();
    let mut b = TxBuilder::new(&signer);
    let user_m = pubkey("okx:user:ata:M");
    let user_usdt = pubkey("okx:user:ata:USDT");
    let vault_m = pubkey("okx:pool:vault:M");
    let vault_usdt = pubkey("okx:pool:vault:USDT");
    b.token_account(&user_m, &m, 8, 900_000_000, 0)
        .token_account(&vault_m, &m, 8, 0, 900_000_000)
        .token_account(&vault_usdt, &usdt(), 6, 33_000_000, 0)
        .token_account(&user_usdt, &usdt(), 6, 0, 33_000_000);
    let budget = pubkey("program:compute-budget");
    b.outer(&budget, &[], vec![2, 0, 0, 0]);
    let o = b.outer(
        &okx,
        &[&signer, &user_m, &user_usdt, m.address(), usdt().address()],
        vec![7],
    );
    b.inner(o, &Programs::raydium(), &[&vault_m, &vault_usdt], vec![9], 2);
    b.transfer(o, &Programs::token(), &user_m, &vault_m, &signer, 1, 3);
    b.transfer(o, &Programs::token(), &vault_usdt, &user_usdt, &pubkey("okx:pool:auth"), 2, 3);
    b.log(format!("Program {budget} invoke [1]"))
        .log(format!("Program {budget} success"))
        .log(format!("Program {okx} invoke [1]"))
        .log("Program log: Instruction: Swap")
        .log(format!("Program {} invoke [2]", Programs::raydium()))
        .log(format!("Program {} success", Programs::raydium()))
        .log("Program log: before_source_balance: 900000000, after_source_balance: 0, source_token_change: 900000000")
        .log("Program log: before_destination_balance: 0, after_destination_balance: 33000000, destination_token_change: 33000000")
        .log(format!("Program {okx} success"));
    b.block_time(CASE_TIME);
    let tx = b.build();
    let expected = expect(&signer, &tx, &m, 900_000_000, 8, &usdt(), 33_000_000, 6, &["OKX"]);
    DecoderCase {
        name: "okx_log_aggregate",
        tx,
        expected,
    }
}

fn pump_event_case() -> DecoderCase {
    let reg = registry();
    let signer = pubkey("trader:pump");
    let m = mint("PUMP-TOKEN");
    let mut b = TxBuilder::new(&signer);
    let curve = pubkey("pump:curve");
    let curve_ata = pubkey("pump:curve:ata");
    let user_ata = pubkey("pump:user:ata");
    b.lamports(&signer, 4_000_000_000, 2_989_000_000)
        .token_account(&curve_ata, &m, 6, 10_000_000_000_000, 6_500_000_000_000)
        .token_account(&user_ata, &m, 6, 0, 3_500_000_000_000);
    let mut buy = reg.pump_buy_instructions[0].to_vec();
    buy.extend_from_slice(&3_500_000_000_000u64.to_le_bytes());
    let o = b.outer(&Programs::pump(), &[&curve, &curve_ata, &user_ata, &signer], buy);
    b.transfer(o, &Programs::token(), &curve_ata, &user_ata, &curve, 3_500_000_000_000, 2);
    b.inner(o, &Programs::system(), &[&signer, &curve], vec![2, 0, 0, 0], 2);
    b.inner(
        o,
        &Programs::pump(),
        &[&pubkey("pump:event-authority")],
        pump_event_data(&reg, &m, 1_000_000_000, 3_500_000_000_000, true, &signer),
        2,
    );
    b.block_time(CASE_TIME);
    let tx = b.build();
    let expected = expect(&signer, &tx, &Mint::sol(), 1_000_000_000, 9, &m, 3_500_000_000_000, 6, &["PUMP_FUN"]);
    DecoderCase {
        name: "pump_fun_event",
        tx,
        expected,
    }
}

/// Sell on the Pump.fun AMM without a trade event: signer-authorized
/// `TransferChecked` of the token in, pool `TransferChecked` of wSOL out.
fn pump_fallback_case() -> DecoderCase {
    let reg = registry();
    let signer = pubkey("trader:pump-sell");
    let m = mint("PUMP-SELL");
    let mut b = TxBuilder::new(&signer);
    let pool = pubkey("pump-amm:pool");
    let user_ata = pubkey("pump-amm:user:ata:M");
    let user_wsol = pubkey("pump-amm:user:ata:SOL");
    let pool_m = pubkey("pump-amm:pool:M");
    let pool_sol = pubkey("pump-amm:pool:SOL");
    let mut sell = reg.pump_sell_instructions[0].to_vec();
    sell.extend_from_slice(&250_000u64.to_le_bytes());
    b.lamports(&signer, 1_000_000_000, 999_995_000);
    let o = b.outer(&Programs::pump_amm(), &[&pool, &user_ata, &user_wsol, &pool_m, &pool_sol, &signer], sell);
    b.transfer_checked(o, &Programs::token_2022(), &user_ata, &m, &pool_m, &signer, 250_000, 2, 2);
    b.transfer_checked(o, &Programs::token(), &pool_sol, &wsol(), &user_wsol, &pool, 75_000_000, 9, 2);
    b.block_time(CASE_TIME);
    let tx = b.build();
    let expected = expect(&signer, &tx, &m, 250_000, 2, &Mint::sol(), 75_000_000, 9, &["PUMP_FUN"]);
    DecoderCase {
        name: "pump_fun_buy_sell_fallback",
        tx,
        expected,
    }
}

fn dedup_case() -> DecoderCase {
    let (signer, mut b) = raydium_builder();
    b.duplicate_inner_set(0);
    let tx = b.build();
    let expected = expect(&signer, &tx, &mint("M"), 1_000_000, 6, &Mint::sol(), 500_000_000, 9, &["RAYDIUM"]);
    DecoderCase {
        name: "duplicate_leg_dedup",
        tx,
        expected,
    }
}

/// Legs read as SOL in, but the signer gained 0.5 SOL: the pair is flipped.
fn direction_flip_case() -> DecoderCase {
    let signer = pubkey("trader:flip");
    let m = mint("M");
    let mut b = amm_swap(
        &Programs::raydium(),
        &signer,
        &Side::new(&wsol(), 500_000_000, 9),
        &Side::new(&m, 1_000_000, 6),
    );
    b.lamports(&signer, 10_000_000_000, 10_500_000_000).block_time(CASE_TIME);
    let tx = b.build();
    let expected = expect(&signer, &tx, &m, 1_000_000, 6, &Mint::sol(), 500_000_000, 9, &["RAYDIUM"]);
    DecoderCase {
        name: "direction_sanity_flip",
        tx,
        expected,
    }
}

fn failed_case() -> DecoderCase {
    let (_, mut b) = raydium_builder();
    b.failed();
    DecoderCase {
        name: "failed_transaction",
        tx: b.build(),
        expected: Err(DecodeError::FailedTransaction),
    }
}

fn non_swap_case() -> DecoderCase {
    let signer = pubkey("payer:plain");
    let mut b = TxBuilder::new(&signer);
    let dest = pubkey("payee:plain");
    b.lamports(&signer, 2_000_000_000, 1_000_000_000).lamports(&dest, 0, 999_995_000);
    b.outer(&Programs::system(), &[&signer, &dest], vec![2, 0, 0, 0, 0, 202, 154, 59, 0, 0, 0, 0]);
    b.block_time(CASE_TIME);
    DecoderCase {
        name: "non_swap",
        tx: b.build(),
        expected: Err(DecodeError::NoSwapFound),
    }
}

fn single_mint_case() -> DecoderCase {
    let signer = pubkey("trader:single");
    let m = mint("LONELY");
    let mut b = TxBuilder::new(&signer);
    let a = pubkey("single:a");
    let v = pubkey("single:vault");
    b.token_account(&a, &m, 6, 5, 0).token_account(&v, &m, 6, 0, 5);
    let o = b.outer(&Programs::orca(), &[&a, &v], vec![9]);
    b.transfer(o, &Programs::token(), &a, &v, &signer, 5, 2);
    b.block_time(CASE_TIME);
    DecoderCase {
        name: "single_mint_ambiguous",
        tx: b.build(),
        expected: Err(DecodeError::AmbiguousSwap("legs name 1 distinct mint(s)".into())),
    }
}

/// Canonical decoder fixtures, one per evidence path and error path.
pub fn decoder_cases() -> Vec<DecoderCase> {
    vec![
        raydium_case(),
        orca_case(),
        meteora_case(),
        jupiter_case(),
        jupiter_dca_case(),
        okx_case(),
        pump_event_case(),
        pump_fallback_case(),
        dedup_case(),
        direction_flip_case(),
        failed_case(),
        non_swap_case(),
        single_mint_case(),
    ]
}

/// Raydium M → SOL fixture (1 M at 6 decimals for 0.5 SOL).
pub fn raydium_fixture() -> ConfirmedTransaction {
    raydium_builder().1.build()
}

/// Jupiter route fixture without the DCA wrapper.
pub fn jupiter_fixture() -> ConfirmedTransaction {
    jupiter_builder(&pubkey("trader:jupiter")).build()
}

pub fn block(slot: Slot, block_time: i64, transactions: Vec<ConfirmedTransaction>) -> Block {
    Block {
        slot,
        block_time: Some(block_time),
        transactions: transactions
            .into_iter()
            .map(|mut t| {
                t.transaction.slot = Some(slot);
                t.transaction.block_time = Some(block_time);
                t
            })
            .collect(),
    }
}

/// Contiguous empty blocks from `start`; `None` marks a skipped slot.
pub fn synthetic_chain(start: Slot, times: &[Option<i64>]) -> crate::source::FixtureStore {
    crate::source::FixtureStore::from_blocks(times.iter().enumerate().map(|(i, t)| {
        let slot = start + i as Slot;
        match t {
            Some(t) => block(slot, *t, vec![]),
            None => Block::skipped(slot),
        }
    }))
}

/// A one-hop Raydium swap with its own signer and signature.
pub fn simple_swap(label: &str, input: &Side, output: &Side) -> ConfirmedTransaction {
    let signer = pubkey(&format!("signer:{label}"));
    let mut b = amm_swap(&Programs::raydium(), &signer, input, output);
    b.signature(pubkey(&format!("sig:{label}")));
    b.build()
}

/// Produced blocks `start..start + n`, one second apart from `t0`, with
/// each transaction placed at its slot.
pub fn staged_chain(
    start: Slot,
    t0: i64,
    n: u64,
    txs: impl IntoIterator<Item = (Slot, ConfirmedTransaction)>,
) -> crate::source::FixtureStore {
    let mut by_slot: BTreeMap<Slot, Vec<ConfirmedTransaction>> = BTreeMap::new();
    for (s, tx) in txs {
        by_slot.entry(s).or_default().push(tx);
    }
    crate::source::FixtureStore::from_blocks(
        (start..start + n).map(|s| block(s, t0 + (s - start) as i64, by_slot.remove(&s).unwrap_or_default())),
    )
}

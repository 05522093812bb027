use std::collections::HashMap;

use crate::ledger::{account_key_table, Decimals, Instruction, Mint, TransactionMeta, TransactionRecord};
use crate::registry::ProgramRegistry;

use super::transfer::{OPCODE_TRANSFER, OPCODE_TRANSFER_CHECKED};
use super::DecodeError;

/// Token account → (mint, decimals).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TokenAccountInfo(HashMap<String, (Mint, Decimals)>);

impl TokenAccountInfo {
    pub fn get(&self, account: &str) -> Option<&(Mint, Decimals)> {
        self.0.get(account)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn seed(&mut self, account: &str, mint: &Mint, decimals: Decimals) -> bool {
        if self.0.contains_key(account) {
            return false;
        }
        self.0.insert(account.to_string(), (mint.clone(), decimals));
        true
    }
}

/// Mint → decimals. Keys are SOL-coalesced; SOL is always 9 and unseen
/// mints read as 0.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecimalsTable(HashMap<Mint, Decimals>);

impl Default for DecimalsTable {
    fn default() -> Self {
        let mut m = HashMap::new();
        m.insert(Mint::sol(), Decimals::SOL);
        Self(m)
    }
}

impl DecimalsTable {
    pub fn get(&self, mint: &Mint) -> Decimals {
        self.0.get(&mint.coalesce_sol()).copied().unwrap_or(Decimals::ZERO)
    }

    pub fn contains(&self, mint: &Mint) -> bool {
        self.0.contains_key(&mint.coalesce_sol())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn seed(&mut self, mint: &Mint, decimals: Decimals) {
        let key = mint.coalesce_sol();
        if key.is_sol() {
            return;
        }
        self.0.entry(key).or_insert(decimals);
    }
}

/// Every instruction of the transaction, outer first then inner in recorded order.
fn all_instructions<'a>(
    tx: &'a TransactionRecord,
    meta: &'a TransactionMeta,
) -> impl Iterator<Item = &'a Instruction> {
    tx.outer_instructions
        .iter()
        .chain(meta.inner_instructions.iter().flat_map(|set| set.instructions.iter()))
}

/// Builds the account and decimals lookups from token balances, then seeds
/// accounts missing from the balances using Transfer / TransferChecked operands.
pub fn build_token_tables(
    tx: &TransactionRecord,
    meta: &TransactionMeta,
    registry: &ProgramRegistry,
) -> Result<(TokenAccountInfo, DecimalsTable), DecodeError> {
    let keys = account_key_table(tx);
    let mut tinfo = TokenAccountInfo::default();
    let mut decs = DecimalsTable::default();

    // post balances win over pre balances for accounts present in both
    for entry in meta.post_token_balances.iter().chain(&meta.pre_token_balances) {
        let account = keys.get(entry.account_index).ok_or_else(|| {
            DecodeError::MalformedMeta(format!(
                "token balance account index {} out of range",
                entry.account_index
            ))
        })?;
        tinfo.seed(account, &entry.mint, entry.decimals);
        decs.seed(&entry.mint, entry.decimals);
    }

    let is_token_ix = |ix: &Instruction| {
        keys.get(ix.program_id_index)
            .and_then(|pid| registry.venue(pid))
            .is_some_and(|v| v.is_token_program())
    };
    let account = |ix: &Instruction, pos: usize| ix.accounts.get(pos).and_then(|&i| keys.get(i));

    for ix in all_instructions(tx, meta).filter(|ix| is_token_ix(ix)) {
        if ix.data.first() != Some(&OPCODE_TRANSFER_CHECKED) || ix.data.len() < 10 {
            continue;
        }
        let (Some(src), Some(mint), Some(dst)) = (account(ix, 0), account(ix, 1), account(ix, 2)) else {
            continue;
        };
        let Ok(mint) = Mint::new(mint.clone()) else { continue };
        let Ok(dec) = Decimals::new(ix.data[9]) else { continue };
        tinfo.seed(src, &mint, dec);
        tinfo.seed(dst, &mint, dec);
        decs.seed(&mint, dec);
    }

    // Plain transfers carry no mint; propagate across the pair until stable.
    let plain: Vec<(&String, &String)> = all_instructions(tx, meta)
        .filter(|ix| is_token_ix(ix) && ix.data.first() == Some(&OPCODE_TRANSFER))
        .filter_map(|ix| Some((account(ix, 0)?, account(ix, 1)?)))
        .collect();
    loop {
        let mut changed = false;
        for (src, dst) in &plain {
            match (tinfo.get(src).cloned(), tinfo.get(dst).cloned()) {
                (Some((m, d)), None) => changed |= tinfo.seed(dst, &m, d),
                (None, Some((m, d))) => changed |= tinfo.seed(src, &m, d),
                _ => {}
            }
        }
        if !changed {
            break;
        }
    }

    Ok((tinfo, decs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::{InnerInstructionSet, RawAmount, TokenBalanceEntry};
    use crate::registry::Venue;

    const TOKEN: &str = "TokenProgram";

    fn registry() -> ProgramRegistry {
        ProgramRegistry::mainnet().with_programs([(TOKEN.to_string(), Venue::Token)])
    }

    fn tx(keys: &[&str]) -> TransactionRecord {
        TransactionRecord {
            signatures: vec!["sig".into()],
            message_account_keys: keys.iter().map(|s| s.to_string()).collect(),
            loaded_addresses: vec![],
            outer_instructions: vec![],
            slot: None,
            block_time: None,
        }
    }

    fn balance(idx: usize, mint: &str, dec: u8) -> TokenBalanceEntry {
        TokenBalanceEntry {
            account_index: idx,
            mint: Mint::new(mint).unwrap(),
            decimals: Decimals::new(dec).unwrap(),
            amount: RawAmount(1),
            owner: None,
        }
    }

    #[test]
    fn projects_post_token_balances() {
        let t = tx(&["K0", "K1", "K2"]);
        let meta = TransactionMeta {
            post_token_balances: vec![balance(2, "M", 6)],
            ..Default::default()
        };
        let (tinfo, decs) = build_token_tables(&t, &meta, &registry()).unwrap();
        assert_eq!(tinfo.get("K2"), Some(&(Mint::new("M").unwrap(), Decimals::new(6).unwrap())));
        assert_eq!(tinfo.len(), 1);
        assert_eq!(decs.get(&Mint::new("M").unwrap()).value(), 6);
        assert_eq!(decs.get(&Mint::sol()).value(), 9);
        assert_eq!(decs.len(), 2);
    }

    #[test]
    fn empty_meta_has_only_sol() {
        let (tinfo, decs) = build_token_tables(&tx(&["K0"]), &TransactionMeta::default(), &registry()).unwrap();
        assert!(tinfo.is_empty());
        assert_eq!(decs.len(), 1);
        assert_eq!(decs.get(&Mint::sol()), Decimals::SOL);
        assert_eq!(decs.get(&Mint::new("Unseen").unwrap()), Decimals::ZERO);
    }

    #[test]
    fn transfer_checked_seeds_missing_accounts() {
        // keys: 0 signer, 1 token program, 2 src, 3 mint M', 4 dst
        let mut t = tx(&["Signer", TOKEN, "Src", "MintPrime", "Dst"]);
        let mut data = vec![12];
        data.extend_from_slice(&500u64.to_le_bytes());
        data.push(4);
        t.outer_instructions.push(Instruction {
            program_id_index: 0,
            accounts: vec![],
            data: vec![],
            stack_height: None,
        });
        let meta = TransactionMeta {
            inner_instructions: vec![InnerInstructionSet {
                index: 0,
                instructions: vec![Instruction {
                    program_id_index: 1,
                    accounts: vec![2, 3, 4, 0],
                    data,
                    stack_height: Some(2),
                }],
            }],
            ..Default::default()
        };
        let (tinfo, decs) = build_token_tables(&t, &meta, &registry()).unwrap();
        let want = (Mint::new("MintPrime").unwrap(), Decimals::new(4).unwrap());
        assert_eq!(tinfo.get("Src"), Some(&want));
        assert_eq!(tinfo.get("Dst"), Some(&want));
        assert_eq!(decs.get(&want.0).value(), 4);
    }

    #[test]
    fn plain_transfer_propagates_mint() {
        let mut t = tx(&["Signer", TOKEN, "A", "B", "C"]);
        let transfer = |src: usize, dst: usize| {
            let mut data = vec![3];
            data.extend_from_slice(&1u64.to_le_bytes());
            Instruction {
                program_id_index: 1,
                accounts: vec![src, dst, 0],
                data,
                stack_height: None,
            }
        };
        // B -> C listed before A -> B: needs a second pass
        t.outer_instructions = vec![transfer(3, 4), transfer(2, 3)];
        let meta = TransactionMeta {
            pre_balances: vec![0; 5],
            post_balances: vec![0; 5],
            post_token_balances: vec![balance(2, "M", 3)],
            ..Default::default()
        };
        let (tinfo, _) = build_token_tables(&t, &meta, &registry()).unwrap();
        assert_eq!(tinfo.get("C").unwrap().0.address(), "M");
    }

    #[test]
    fn balance_index_out_of_range() {
        let meta = TransactionMeta {
            post_token_balances: vec![balance(5, "M", 6)],
            ..Default::default()
        };
        assert!(matches!(
            build_token_tables(&tx(&["K0"]), &meta, &registry()),
            Err(DecodeError::MalformedMeta(_))
        ));
    }
}

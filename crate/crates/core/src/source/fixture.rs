use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::ledger::rpc_json::{block_from_json, block_to_fixture_line};
use crate::ledger::{Block, ConfirmedTransaction, Slot};

use super::{BlockResult, ChainSource, SourceError};

/// Recorded blocks, one JSON object per line. A record with
/// `"blockTime": null` is a skipped slot; a slot with no record is outside
/// the fixture.
#[derive(Debug, Clone, Default)]
pub struct FixtureStore {
    blocks: BTreeMap<Slot, Arc<Block>>,
    by_signature: HashMap<String, (Slot, usize)>,
}

impl FixtureStore {
    pub fn open(path: &Path) -> Result<Self, SourceError> {
        let file = std::fs::File::open(path)
            .map_err(|e| SourceError::Unavailable(format!("{}: {e}", path.display())))?;
        Self::from_reader(file)
    }

    pub fn from_reader(reader: impl Read) -> Result<Self, SourceError> {
        let mut blocks = Vec::new();
        for (n, line) in BufReader::new(reader).lines().enumerate() {
            let line = line.map_err(|e| SourceError::Unavailable(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let value: serde_json::Value = serde_json::from_str(&line)
                .map_err(|e| SourceError::Malformed(format!("line {}: {e}", n + 1)))?;
            let slot = value
                .get("slot")
                .and_then(|s| s.as_u64())
                .ok_or_else(|| SourceError::Malformed(format!("line {}: missing slot", n + 1)))?;
            let block = block_from_json(value, slot).map_err(|e| SourceError::Malformed(format!("line {}: {e}", n + 1)))?;
            blocks.push(block);
        }
        Ok(Self::from_blocks(blocks))
    }

    pub fn from_blocks(blocks: impl IntoIterator<Item = Block>) -> Self {
        let mut store = Self::default();
        for b in blocks {
            store.insert(b);
        }
        store
    }

    pub fn insert(&mut self, block: Block) {
        for (i, tx) in block.transactions.iter().enumerate() {
            for sig in &tx.transaction.signatures {
                self.by_signature.insert(sig.clone(), (block.slot, i));
            }
        }
        self.blocks.insert(block.slot, Arc::new(block));
    }

    pub fn contains(&self, slot: Slot) -> bool {
        self.blocks.contains_key(&slot)
    }

    pub fn slots(&self) -> impl Iterator<Item = Slot> + '_ {
        self.blocks.keys().copied()
    }

    pub fn first_slot(&self) -> Option<Slot> {
        self.blocks.keys().next().copied()
    }

    pub fn tip(&self) -> Option<Slot> {
        self.blocks.keys().next_back().copied()
    }

    /// Block time of the highest produced slot.
    pub fn tip_time(&self) -> Option<i64> {
        self.blocks.values().rev().find_map(|b| b.block_time)
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    fn lookup(&self, slot: Slot) -> Result<&Arc<Block>, SourceError> {
        self.blocks.get(&slot).ok_or(SourceError::SlotOutOfRange(slot))
    }
}

impl ChainSource for FixtureStore {
    fn get_slot(&self) -> Result<Slot, SourceError> {
        self.tip().ok_or_else(|| SourceError::Unavailable("fixture store is empty".into()))
    }

    fn get_block_time(&self, slot: Slot) -> Result<Option<i64>, SourceError> {
        Ok(self.lookup(slot)?.block_time)
    }

    fn get_block(&self, slot: Slot) -> Result<BlockResult, SourceError> {
        let b = self.lookup(slot)?;
        Ok(if b.is_skipped() {
            BlockResult::Skipped(slot)
        } else {
            BlockResult::Produced(Arc::clone(b))
        })
    }

    fn find_transaction(&self, signature: &str) -> Result<ConfirmedTransaction, SourceError> {
        let (slot, i) = self
            .by_signature
            .get(signature)
            .ok_or_else(|| SourceError::TransactionNotFound(signature.to_string()))?;
        Ok(self.blocks[slot].transactions[*i].clone())
    }
}

/// Writes `blocks` as a fixture file, one line per block in slot order.
pub fn write_fixture<'a>(path: &Path, blocks: impl IntoIterator<Item = &'a Block>) -> std::io::Result<()> {
    let mut sorted: Vec<&Block> = blocks.into_iter().collect();
    sorted.sort_by_key(|b| b.slot);
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for b in sorted {
        writeln!(out, "{}", block_to_fixture_line(b))?;
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testkit;

    fn store() -> FixtureStore {
        FixtureStore::from_blocks([
            testkit::block(10, 1_699_999_999, vec![]),
            testkit::block(11, 1_700_000_000, vec![testkit::raydium_fixture()]),
            Block::skipped(12),
        ])
    }

    #[test]
    fn tip_is_max_slot() {
        assert_eq!(store().get_slot(), Ok(12));
        assert!(matches!(FixtureStore::default().get_slot(), Err(SourceError::Unavailable(_))));
    }

    #[test]
    fn block_time_lookup() {
        let s = store();
        assert_eq!(s.get_block_time(11), Ok(Some(1_700_000_000)));
        assert_eq!(s.get_block_time(12), Ok(None));
        assert_eq!(s.get_block_time(13), Err(SourceError::SlotOutOfRange(13)));
    }

    #[test]
    fn replays_blocks_and_skips() {
        let s = store();
        let b = s.get_block(11).unwrap();
        assert_eq!(b.block().unwrap().transactions.len(), 1);
        assert_eq!(s.get_block(12), Ok(BlockResult::Skipped(12)));
    }

    #[test]
    fn finds_transactions_by_signature() {
        let s = store();
        let tx = testkit::raydium_fixture();
        let found = s.find_transaction(tx.transaction.primary_signature()).unwrap();
        assert_eq!(found.meta, tx.meta);
        assert_eq!(found.transaction.slot, Some(11));
        assert!(matches!(s.find_transaction("nope"), Err(SourceError::TransactionNotFound(_))));
    }

    #[test]
    fn file_round_trip_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fx.ndjson");
        let s = store();
        let blocks: Vec<Block> = s.slots().map(|k| (*s.blocks[&k]).clone()).collect();
        write_fixture(&path, &blocks).unwrap();
        let first = std::fs::read(&path).unwrap();
        let reread = FixtureStore::open(&path).unwrap();
        let again: Vec<Block> = reread.slots().map(|k| (*reread.blocks[&k]).clone()).collect();
        assert_eq!(again, blocks);
        write_fixture(&path, &again).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), first);
    }

    #[test]
    fn bad_line_is_reported() {
        let err = FixtureStore::from_reader("{\"slot\": 1, \"blockTime\": 5}\nnot json\n".as_bytes()).unwrap_err();
        assert!(matches!(err, SourceError::Malformed(m) if m.starts_with("line 2")));
    }
}

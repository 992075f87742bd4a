//! Transaction CSV import/export. The column set mirrors common Ethereum
//! dataset exports: from_address, to_address, value, input,
//! receipt_contract_address, block_number. Addresses and input are hex
//! (0x-prefixed or bare); value and block_number are decimal.

use std::collections::BTreeMap;
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::abi;
use crate::types::{Address, Transaction, WorldState};

pub const CSV_COLUMNS: [&str; 6] = [
    "from_address",
    "to_address",
    "value",
    "input",
    "receipt_contract_address",
    "block_number",
];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing column {0:?} in header")]
    MissingColumn(&'static str),
}

/// Per-run ingest accounting. Row-level problems never abort the run; they
/// are collected here so callers can decide how lossy the import was.
#[derive(Debug, Default, PartialEq, Eq)]
pub struct IngestReport {
    pub rows: u64,
    pub imported: u64,
    pub monetary: u64,
    pub contract: u64,
    /// Unknown selector, coercion off.
    pub skipped_unknown: u64,
    /// Unknown selector downgraded to monetary (input dropped).
    pub coerced_unknown: u64,
    /// (1-based data row, description) for rows that failed to parse.
    pub row_errors: Vec<(u64, String)>,
    /// Imported contract calls per function name.
    pub per_selector: BTreeMap<&'static str, u64>,
}

#[derive(Debug)]
pub struct IngestOutcome {
    /// In file order; tx_id dense per block, block_number as given.
    pub txns: Vec<Transaction>,
    pub report: IngestReport,
}

impl IngestOutcome {
    /// Group into block bodies ordered by ascending block number, row order
    /// preserved within a block.
    pub fn into_blocks(self) -> Vec<Vec<Transaction>> {
        let mut by_block: BTreeMap<u64, Vec<Transaction>> = BTreeMap::new();
        for tx in self.txns {
            by_block.entry(tx.block_number).or_default().push(tx);
        }
        by_block.into_values().collect()
    }
}

fn parse_hex_bytes(s: &str) -> Result<Vec<u8>, String> {
    let bare = s.strip_prefix("0x").unwrap_or(s);
    if bare.is_empty() {
        return Ok(Vec::new());
    }
    hex::decode(bare).map_err(|e| format!("bad hex {s:?}: {e}"))
}

fn parse_address(s: &str) -> Result<Address, String> {
    let bytes = parse_hex_bytes(s)?;
    let arr: [u8; 20] = bytes
        .as_slice()
        .try_into()
        .map_err(|_| format!("address {s:?} is {} bytes, want 20", bytes.len()))?;
    Ok(Address::from_bytes(arr))
}

/// Read a transaction CSV. Rows whose input bears an unregistered selector
/// are skipped, or downgraded to plain transfers when `coerce_unknown`.
pub fn ingest_csv(path: &Path, coerce_unknown: bool) -> Result<IngestOutcome, IngestError> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let col = |name: &'static str| -> Result<usize, IngestError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or(IngestError::MissingColumn(name))
    };
    let c_from = col("from_address")?;
    let c_to = col("to_address")?;
    let c_value = col("value")?;
    let c_input = col("input")?;
    let c_creates = col("receipt_contract_address")?;
    let c_block = col("block_number")?;

    let mut report = IngestReport::default();
    let mut txns = Vec::new();
    let mut next_id: BTreeMap<u64, u64> = BTreeMap::new();

    for (i, row) in reader.records().enumerate() {
        let row_no = i as u64 + 1;
        report.rows += 1;
        let row = row?;
        let field = |idx: usize| row.get(idx).unwrap_or("").trim();

        let parsed = (|| -> Result<Transaction, String> {
            let from = parse_address(field(c_from))?;
            let to = parse_address(field(c_to))?;
            let value: u128 = field(c_value)
                .parse()
                .map_err(|e| format!("bad value: {e}"))?;
            let input = parse_hex_bytes(field(c_input))?;
            let creates = match field(c_creates) {
                "" | "0x" => None,
                s => Some(parse_address(s)?),
            };
            let block_number: u64 = field(c_block)
                .parse()
                .map_err(|e| format!("bad block_number: {e}"))?;
            Ok(Transaction {
                tx_id: 0,
                from,
                to,
                value,
                input,
                creates,
                block_number,
            })
        })();

        let mut tx = match parsed {
            Ok(tx) => tx,
            Err(e) => {
                report.row_errors.push((row_no, e));
                continue;
            }
        };

        if tx.is_contract_call() {
            match tx.selector().and_then(|s| abi::lookup(s)) {
                Some(spec) => {
                    report.contract += 1;
                    *report.per_selector.entry(spec.name).or_insert(0) += 1;
                }
                None if coerce_unknown => {
                    tx.input.clear();
                    report.coerced_unknown += 1;
                    report.monetary += 1;
                }
                None => {
                    report.skipped_unknown += 1;
                    continue;
                }
            }
        } else {
            report.monetary += 1;
        }

        let id = next_id.entry(tx.block_number).or_insert(0);
        tx.tx_id = *id;
        *id += 1;
        report.imported += 1;
        txns.push(tx);
    }

    Ok(IngestOutcome { txns, report })
}

/// Write transactions in the ingestable column format.
pub fn write_transactions_csv<'a, W: io::Write, I>(writer: W, txns: I) -> Result<(), csv::Error>
where
    I: IntoIterator<Item = &'a Transaction>,
{
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_COLUMNS)?;
    for tx in txns {
        w.write_record([
            tx.from.to_string(),
            tx.to.to_string(),
            tx.value.to_string(),
            format!("0x{}", hex::encode(&tx.input)),
            tx.creates.map(|a| a.to_string()).unwrap_or_default(),
            tx.block_number.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Replay genesis for imported workloads: endow every participating address
/// with coin and hand each transfer/multisend sender a token balance on the
/// called contract, so most imported calls execute rather than bounce.
pub fn replay_genesis(txns: &[Transaction]) -> WorldState {
    const COIN: u128 = 1_000_000_000_000_000_000;
    const TOKEN: u128 = 1_000_000_000;
    let mut state = WorldState::new();
    for tx in txns {
        state.set_balance(tx.from, COIN);
        if state.balance(&tx.to) == 0 {
            state.set_balance(tx.to, COIN);
        }
        if let Some(spec) = tx.selector().and_then(abi::lookup) {
            if matches!(spec.name, "transfer" | "multisend") {
                let key = crate::engine::storage_key("token", tx.from.as_bytes());
                let mut value = [0u8; 32];
                value[16..].copy_from_slice(&TOKEN.to_be_bytes());
                state.account_mut(tx.to).storage.insert(key, value);
            }
        }
    }
    state
}

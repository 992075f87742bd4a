//! Static dependency analysis: builds the account-dependency graph over a
//! block's transactions, extracts weakly connected components as shards, and
//! load-balances whole shards onto followers.
//!
//! Everything here is a pure function of its inputs; identical inputs give
//! identical outputs across runs and thread counts. That determinism is what
//! lets a validator recompute the miner's partition bit-for-bit.

use std::collections::{BTreeMap, BTreeSet};

use crate::abi::{self, Value};
use crate::types::{Address, Transaction};

/// Which addresses count as dependencies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum DepsMode {
    /// from/to plus every address decoded out of contract-call parameters.
    #[default]
    Full,
    /// Literal from/to only (the strictly weaker classic rule).
    FromToOnly,
}

impl DepsMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "full" => Some(DepsMode::Full),
            "from-to-only" => Some(DepsMode::FromToOnly),
            _ => None,
        }
    }
}

impl std::fmt::Display for DepsMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DepsMode::Full => "full",
            DepsMode::FromToOnly => "from-to-only",
        })
    }
}

/// Addresses a transaction may read or write: {from, to} plus, for contract
/// calls, every address appearing in the decoded parameters. Deduplicated,
/// first-appearance order.
pub fn touched_addresses(tx: &Transaction) -> Result<Vec<Address>, abi::DecodeError> {
    let mut out = Vec::with_capacity(4);
    let push = |a: Address, out: &mut Vec<Address>| {
        if !out.contains(&a) {
            out.push(a);
        }
    };
    push(tx.from, &mut out);
    push(tx.to, &mut out);
    if tx.is_contract_call() {
        let (_, args) = abi::decode_call(&tx.input)?;
        for arg in &args {
            match arg {
                Value::Addr(a) => push(*a, &mut out),
                Value::AddrArray(items) => {
                    for a in items {
                        push(*a, &mut out);
                    }
                }
                _ => {}
            }
        }
    }
    Ok(out)
}

/// As [`touched_addresses`], but a contract call whose parameters fail to
/// decode degrades to {from, to}: such a transaction can only fail at
/// execution time, and a failing execution touches at most those two.
pub fn touched_addresses_lenient(tx: &Transaction, mode: DepsMode) -> Vec<Address> {
    match mode {
        DepsMode::FromToOnly => {
            let mut out = vec![tx.from];
            if tx.to != tx.from {
                out.push(tx.to);
            }
            out
        }
        DepsMode::Full => touched_addresses(tx).unwrap_or_else(|_| {
            let mut out = vec![tx.from];
            if tx.to != tx.from {
                out.push(tx.to);
            }
            out
        }),
    }
}

/// One shard: a maximal set of transactions connected through shared
/// addresses. Executes serially within itself, independently of other shards.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Shard {
    /// Dense 0-based id; 0 is the largest shard.
    pub shard_id: u32,
    /// Strictly ascending tx_ids (arrival order preserved).
    pub tx_ids: Vec<u64>,
}

impl Shard {
    pub fn len(&self) -> usize {
        self.tx_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tx_ids.is_empty()
    }
}

/// Union-find with path compression and union by size.
struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let grand = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grand;
            x = grand;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.size[ra as usize] < self.size[rb as usize] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb as usize] = ra;
        self.size[ra as usize] += self.size[rb as usize];
    }
}

/// Partition transactions into shards: the weakly connected components of
/// the graph in which every transaction forms a clique among its touched
/// addresses. Shard ids are assigned by descending shard size, ties broken
/// by smallest contained tx_id.
pub fn analyze(txns: &[Transaction], mode: DepsMode) -> (Vec<Shard>, BTreeMap<u64, u32>) {
    // Intern addresses to dense indices.
    let mut index: BTreeMap<Address, u32> = BTreeMap::new();
    let mut tx_touched: Vec<Vec<u32>> = Vec::with_capacity(txns.len());
    for tx in txns {
        let touched = touched_addresses_lenient(tx, mode);
        let ids = touched
            .iter()
            .map(|a| {
                let next = index.len() as u32;
                *index.entry(*a).or_insert(next)
            })
            .collect();
        tx_touched.push(ids);
    }

    let mut uf = UnionFind::new(index.len());
    for ids in &tx_touched {
        // Unioning consecutive members is equivalent to the full clique.
        for pair in ids.windows(2) {
            uf.union(pair[0], pair[1]);
        }
    }

    // Group tx_ids by component root; iteration in tx order keeps each
    // group's tx_ids ascending.
    let mut groups: BTreeMap<u32, Vec<u64>> = BTreeMap::new();
    for (tx, ids) in txns.iter().zip(&tx_touched) {
        let root = uf.find(ids[0]);
        groups.entry(root).or_default().push(tx.tx_id);
    }

    let mut shards: Vec<Vec<u64>> = groups.into_values().collect();
    shards.sort_by_key(|tx_ids| (std::cmp::Reverse(tx_ids.len()), tx_ids[0]));

    let mut shard_of = BTreeMap::new();
    let shards: Vec<Shard> = shards
        .into_iter()
        .enumerate()
        .map(|(i, tx_ids)| {
            for id in &tx_ids {
                shard_of.insert(*id, i as u32);
            }
            Shard {
                shard_id: i as u32,
                tx_ids,
            }
        })
        .collect();
    (shards, shard_of)
}

/// Shards balanced onto followers plus the tx → shard map.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShardAssignment {
    /// follower_id → its transactions, in (shard assignment order, tx_id)
    /// order. Every follower id passed to [`load_balance`] has an entry,
    /// possibly empty.
    pub per_follower: BTreeMap<u32, Vec<Transaction>>,
    pub shard_of: BTreeMap<u64, u32>,
    /// follower_id → shard ids it received, in assignment order.
    pub shards_of_follower: BTreeMap<u32, Vec<u32>>,
}

impl ShardAssignment {
    pub fn total_txns(&self) -> usize {
        self.per_follower.values().map(|v| v.len()).sum()
    }
}

/// Greedy longest-first balancing: walk shards by descending size (ties by
/// smallest tx_id), placing each whole shard on the follower with the
/// current minimum transaction count (ties by lowest follower id).
pub fn load_balance(
    shards: &[Shard],
    followers: &[u32],
    txns: &[Transaction],
) -> ShardAssignment {
    assert!(!followers.is_empty(), "load_balance needs >= 1 follower");
    let by_id: BTreeMap<u64, &Transaction> = txns.iter().map(|t| (t.tx_id, t)).collect();

    // Shards from analyze() are already (size desc, min tx_id asc); re-sort
    // so the function is total on any shard list.
    let mut order: Vec<&Shard> = shards.iter().collect();
    order.sort_by_key(|s| (std::cmp::Reverse(s.len()), s.tx_ids[0]));

    use std::cmp::Reverse;
    use std::collections::BinaryHeap;
    let mut heap: BinaryHeap<Reverse<(usize, u32)>> =
        followers.iter().map(|&f| Reverse((0, f))).collect();

    let mut per_follower: BTreeMap<u32, Vec<Transaction>> =
        followers.iter().map(|&f| (f, Vec::new())).collect();
    let mut shards_of_follower: BTreeMap<u32, Vec<u32>> =
        followers.iter().map(|&f| (f, Vec::new())).collect();
    let mut shard_of = BTreeMap::new();

    for shard in order {
        let Reverse((load, fid)) = heap.pop().expect("heap holds every follower");
        let dest = per_follower.get_mut(&fid).unwrap();
        for id in &shard.tx_ids {
            dest.push((*by_id.get(id).expect("shard tx_id present in txns")).clone());
            shard_of.insert(*id, shard.shard_id);
        }
        shards_of_follower.get_mut(&fid).unwrap().push(shard.shard_id);
        heap.push(Reverse((load + shard.len(), fid)));
    }

    ShardAssignment {
        per_follower,
        shard_of,
        shards_of_follower,
    }
}

/// Summary statistics of one block's analysis, for reporting.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShardStats {
    pub shard_count: usize,
    pub max_shard_size: usize,
    /// Transaction counts per follower, ascending follower id.
    pub per_follower_txns: Vec<usize>,
}

pub fn shard_stats(shards: &[Shard], assignment: &ShardAssignment) -> ShardStats {
    ShardStats {
        shard_count: shards.len(),
        max_shard_size: shards.iter().map(Shard::len).max().unwrap_or(0),
        per_follower_txns: assignment.per_follower.values().map(Vec::len).collect(),
    }
}

/// Check that `hints` (tx_id → shard_id) induces exactly the same grouping
/// of transactions as `shard_of`. Shard ids themselves need not match;
/// only the partition structure is compared.
pub fn hints_match_partition(
    hints: &BTreeMap<u64, u32>,
    shard_of: &BTreeMap<u64, u32>,
) -> bool {
    if hints.len() != shard_of.len() || !hints.keys().eq(shard_of.keys()) {
        return false;
    }
    let group = |m: &BTreeMap<u64, u32>| -> BTreeSet<Vec<u64>> {
        let mut g: BTreeMap<u32, Vec<u64>> = BTreeMap::new();
        for (tx, s) in m {
            g.entry(*s).or_default().push(*tx);
        }
        g.into_values().collect()
    };
    group(hints) == group(shard_of)
}

//! Community mining: distributed execution and validation of blockchain
//! transaction blocks.
//!
//! A leader statically analyzes each block into *shards*: weakly connected
//! components of the account-dependency graph, where two transactions are
//! linked when they may touch a common address. Shards are balanced onto
//! follower machines and executed in parallel; the same followers then race
//! disjoint slices of the nonce space to seal the block. Validators
//! re-execute deterministically, either serially, after their own analysis,
//! or reusing (and first checking) the miner's shard hints carried in the
//! block.
//!
//! Module map:
//! - [`types`]: transactions, accounts, blocks, structural validation.
//! - [`abi`]: the registered contract functions and calldata codec.
//! - [`codec`]: canonical byte encoding, block hashing, state digests.
//! - [`analyzer`]: dependency analysis, sharding, load balancing.
//! - [`engine`]: deterministic execution of the contract set.
//! - [`pow`]: difficulty targets and the partitioned nonce search.
//! - [`protocol`]: framed wire protocol, leader and follower endpoints.
//! - [`roles`]: chain, rewards, miner and validator pipelines.
//! - [`bench`]: workload synthesis, CSV ingest, benchmark runner, reports.
//!
//! The `examples/` directory is the guided tour; each example exercises one
//! capability end to end.

pub mod abi;
pub mod analyzer;
pub mod bench;
pub mod codec;
pub mod engine;
pub mod pow;
pub mod protocol;
pub mod roles;
pub mod types;

pub use analyzer::{analyze, load_balance, DepsMode, Shard, ShardAssignment};
pub use codec::{block_hash, canonical_encode, state_digest};
pub use engine::{execute_shard, execute_transaction, ExecOutcome, SyntheticCost};
pub use pow::{check_pow, search_nonce, CancelFlag, Difficulty, SearchPartition};
pub use types::{Account, Address, Block, Transaction, WorldState};

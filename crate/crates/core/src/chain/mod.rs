//! Blocks, the trade and reputation ledger, and winner election.

mod block;
mod election;
mod ledger;
mod task;

pub use block::{
    build_block, check_chain, dump_chain, load_chain, merkle_root, sha256, validate_chain, verify_dump,
    Accuracy, Block, BlockDraft, BlockHeader, Hash, Vm, VmCommitments, ZERO_HASH,
};
pub use election::{elect_winner, election_order, Election, Verdict};
pub use ledger::{Ledger, LedgerEntry, TradeLedgerEntry, LEAK_PENALTY};
pub use task::{select_task, Task};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ChainError {
    #[error("no pending task")]
    NoTask,
    #[error("unknown pool {0}")]
    UnknownPool(String),
    #[error("invalid chain data: {0}")]
    Invalid(String),
    #[error("malformed chain bytes: {0}")]
    Malformed(String),
    #[error(transparent)]
    Circuit(#[from] crate::gc::GcError),
}

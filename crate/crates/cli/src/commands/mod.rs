//! Subcommand implementations.

mod eval;
mod inspect;
mod oracle_check;
mod train;

pub use eval::cmd_eval;
pub use inspect::cmd_inspect;
pub use oracle_check::cmd_oracle_check;
pub use train::cmd_train;

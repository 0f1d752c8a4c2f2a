//! Command-line pipeline over the core library: dataset generation,
//! auth-log ingestion, adversarial training, translation, evaluation
//! reports, and gradient checking. All artifacts are JSON/JSONL/CSV and
//! every command is reproducible from its seed.

pub mod args;
pub mod io;
pub mod run;

pub use args::{parse_args, Cli, Command};
pub use run::run;

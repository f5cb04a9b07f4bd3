//! Completing and repairing turtle block programs from a drawn trajectory.
//!
//! A program is edited through six kinds of editor commands; each command is
//! a unit-cost edge between workspaces. Given the user's current workspace
//! and a drawing of what they intend, the search routines look for a
//! workspace within a fixed number of edits whose drawing is closest to the
//! intent in Hausdorff distance.

pub mod corpus;
pub mod editing;
pub mod engine;
pub mod eval;
pub mod hausdorff;
pub mod models;
pub mod search;
pub mod turtle;

pub use corpus::{generate_synthetic_corpus, load_corpus, CorpusItem, SyntheticSpec};
pub use editing::{
    apply_command, coarsen, enumerate_commands, parse_commands, replay, CommandTag, EditCommand, InfeasibleCommand,
    ReplayError,
};
pub use hausdorff::{hausdorff, hausdorff_below, HausdorffError};
pub use models::{fit_bigram, fit_lambdas, sample_command, ArgumentMode, BigramTable, CommandModel};
pub use search::{idps, sampling_search, Algorithm, Candidate, SearchReport, SynthesisProblem, Target};
pub use turtle::{
    interpret, semantically_equal, Angle, BlockId, BlockType, Point, RenderConfig, RepeatCount, Statement, Trajectory,
    Workspace,
};

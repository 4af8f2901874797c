//! Stateful partial-order-reduction model checking for bounded shared-memory
//! concurrent programs.
//!
//! The crate provides:
//!
//! - a small concurrent programming language over shared integer objects with
//!   sequentially consistent semantics ([`program`]);
//! - canonical state fingerprinting and reduced-graph storage ([`lts`]);
//! - three stateful explorers: static safe sets, eager dynamic source sets,
//!   and lazy dynamic source sets ([`mod@explore`]);
//! - a brute-force trace-equivalence oracle for soundness checking and
//!   persistent/source-set validation ([`oracle`]);
//! - a benchmark-client generator and experiment runner ([`harness`]).

pub mod corpus;
pub mod explore;
pub mod expr;
pub mod harness;
pub mod lts;
pub mod oracle;
pub mod program;
pub mod strategy;

pub use explore::{Algorithm, ExploreMode, ExploreOutcome, Metrics, Verdict, explore, safe_set};
pub use lts::{Fingerprint, NodeBook, ReducedLts};
pub use program::{
    Action, ActionKind, Program, State, dependent, enabled, initial_state, is_final, next,
    parse_program, replay, serialize_program,
};
pub use strategy::StrategyConfig;

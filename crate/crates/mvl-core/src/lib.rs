//! Core engine of the `mvl` toolkit: a finite separation algebra with a
//! store, the abstract verification language and its demonic verifier
//! semantics, bounded inlining with partial annotations, the three
//! preservation-condition checkers, and the oracle/harness machinery that
//! exercises the preservation and completeness theorems at desk scale.
//!
//! The crate is `no_std` (with `alloc`); everything here is pure
//! computation over immutable values. File formats, reports, and the CLI
//! live in the companion `mvl` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod config;
pub mod lang;
pub mod oracle;
pub mod pc;
pub mod semantics;
pub mod sepalg;
pub mod transform;

pub use config::Config;
pub use sepalg::{Frac, State, StateSet, Value};

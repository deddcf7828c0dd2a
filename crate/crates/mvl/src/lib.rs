//! Command-line front end and file formats for the mvl toolkit: the `.mvl`
//! corpus format with pinned expectations, JSON reports with a bundled
//! schema, and the `mvl` binary's subcommands.

pub mod cli;
pub mod corpus;
pub mod report;
pub mod runcfg;
pub mod schema;

//! Failure indexing for multi-fault programs.
//!
//! Failed test cases are fingerprinted by the program memory observed at the
//! most suspicious statements, rendered as small RGB images, compared with a
//! Siamese CNN and clustered into per-fault groups. Coverage- and
//! ranking-based baselines and external clustering metrics are included, all
//! running on a small interpreted language with mutation-based fault
//! injection.

pub mod bench;
pub mod evaluate;
pub mod indexer;
pub mod memcollect;
pub mod pipeline;
pub mod pms;
pub mod simnet;
pub mod spectrum;
pub mod workbench;

//! Deterministic simulator of a validator's execution-side data path: a
//! fork-aware JIT program cache with 2-random LFU eviction, fed by a
//! lock-based transaction batch pipeline, instrumented per execution batch.

pub mod config;
pub mod exec;
pub mod ledger;
pub mod metrics;
pub mod pipeline;
pub mod program_cache;
pub mod rng;
pub mod sim;
pub mod workload;

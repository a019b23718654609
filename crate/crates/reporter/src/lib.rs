//! IO, networking and CLI around `ietf-reporter-core`.
//!
//! This crate turns the pure engine into a batch tool: [`ingest`] loads raw
//! records from the datatracker API or a mirrored directory tree, [`store`]
//! persists the corpus, index and raw snapshot as versioned JSON, [`backends`]
//! provides HTTP completion backends plus the shared clock and rate-limit
//! gate, and [`cli`] wires the `sync` / `build` / `report` workflow together.

pub mod backends;
pub mod cli;
pub mod http;
pub mod ingest;
pub mod store;
pub mod util;

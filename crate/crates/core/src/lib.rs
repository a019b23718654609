//! Core engine for generating per-working-group reports from IETF meeting
//! records.
//!
//! Everything in this crate is pure computation over in-memory data: record
//! types and the draft-name grammar ([`records`]), name/affiliation
//! normalization and fuzzy entity resolution ([`resolve`]), the consolidated
//! meeting corpus ([`corpus`]), document chunking and lexical retrieval
//! ([`index`]), completion backends with retry/rate-limit policy and the
//! map-reduce summarizer ([`llm`]), and Markdown/LaTeX rendering ([`report`]).
//!
//! The crate is `no_std`-compatible (requires `alloc`); all IO, networking
//! and the CLI live in the companion `ietf-reporter` crate.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod corpus;
pub mod index;
pub mod llm;
pub mod records;
pub mod report;
pub mod resolve;

//! Sentence-level action item detection for meeting transcripts.
//!
//! The crate covers the whole pipeline: transcript ingestion and corpus
//! statistics ([`corpus`]), local/global context selection with
//! keep/drop sampling ([`context`]), a pluggable classifier with an
//! encoder/pooler transplant ([`model`]), consistency-regularised training
//! strategies ([`training`]) and positive-class evaluation ([`evaluation`]).

pub mod context;
pub mod corpus;
pub mod evaluation;
pub mod model;
pub mod text;
pub mod training;

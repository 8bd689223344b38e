//! petrel-core: event extraction and event-property classification for
//! commodity news.
//!
//! The crate covers the full path from brat standoff annotation to evaluated
//! models: corpus ingest with pluggable linguistic annotation, multi-channel
//! token features over a pluggable contextual encoder, BIO token
//! classification for entity mentions and event triggers, a GCN over pruned
//! dependency trees for argument roles, event-property classifiers with
//! three span strategies, multi-task/sequential transfer setups,
//! imbalance-aware evaluation (macro-F1, MCC, stratified folds), and
//! vocabulary-overlap domain similarity.

pub mod corpus;
pub mod domainsim;
pub mod eval;
pub mod features;
pub mod graph;
pub mod model;
pub mod model_io;
pub mod nn;
pub mod synth;
pub mod tasks;
pub mod transfer;

//! Temporally evolving, probabilistically merged ontologies.
//!
//! - [`kb`]: closed-world knowledge base with a restricted forward chainer
//! - [`temporal`]: temporal entities and obligation/prohibition propositions
//! - [`mfrag`]: MEBN fragment and theory validation
//! - [`merge`]: probabilistic inter-ontology mappings and queries
//! - [`des`]: exogenous vs. endogenous updating-time simulation
//! - [`monitor`]: the tick-driven monitoring loop
//! - [`io`]: text formats, result records

pub mod des;
pub mod io;
pub mod kb;
pub mod merge;
pub mod mfrag;
pub mod monitor;
pub mod temporal;

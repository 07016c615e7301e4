//! Temporal knowledge-graph question answering by recursive question
//! decomposition, retrieval-grounded solving and answer aggregation.

mod fsutil;

pub mod aggregate;
pub mod decompose;
pub mod eval;
pub mod llm;
pub mod pipeline;
pub mod registry;
pub mod retrieve;
pub mod solve;
pub mod store;
pub mod synthetic;
pub mod time;
pub mod verbalize;

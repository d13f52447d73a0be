pub mod analytics;
pub mod baseline;
pub mod bench;
pub mod cfhash;
pub mod config;
pub mod error;
pub mod mempool;
pub mod graph;
pub mod store;
mod trace;

//! Persistence, HTTP API and command line around [`idiom_graph_core`].

pub mod cli;
pub mod config;
pub mod error;
pub mod http;
pub mod ops;
pub mod store;

//! Exercise store, attempt log, HTTP API and command-line tooling for the
//! thread-trace tutor.

pub mod api;
pub mod cli;
pub mod http;
pub mod log;
pub mod store;

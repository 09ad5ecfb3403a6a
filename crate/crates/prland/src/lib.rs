pub mod cli;
pub mod config;
pub mod error;
pub mod harness;
pub mod io;
pub mod manifest;
pub mod plot;

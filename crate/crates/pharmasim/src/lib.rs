//! Service and command-line front end for the simulation core.

pub mod cli;
pub mod provider;
pub mod server;

//! Configuration loading, CSV export and table rendering.

pub mod config;
pub mod csv;
pub mod table;

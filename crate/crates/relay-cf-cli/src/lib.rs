//! Library surface of the command-line front end, exposed so integration
//! tests can drive commands directly against in-memory scenarios.

pub mod commands;
pub mod scenario;
pub mod table;

//! Test support for the easg crates: random generators, brute-force
//! oracles and fixtures with known answers.

pub mod fixtures;
pub mod gen;
pub mod oracle;

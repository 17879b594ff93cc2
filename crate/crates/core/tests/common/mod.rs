//! Oracles and criterion checks shared by the core integration tests and the
//! CLI acceptance suite.
#![allow(dead_code)]

pub mod criteria;
pub mod oracles;

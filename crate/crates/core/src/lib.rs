//! Metamorphic security testing for web systems.
//!
//! Relations written in a small DSL describe properties that hold between
//! executions of a web system; the crawler collects source inputs, the
//! engine derives follow-up inputs per relation and executes both, and
//! violations are reported as vulnerabilities.

pub mod catalog;
pub mod collected;
pub mod config;
pub mod crawler;
pub mod engine;
pub mod executor;
pub mod model;
pub mod provider;
pub mod smrl;
pub mod textdist;
pub mod webutils;

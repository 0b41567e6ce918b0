//! Harness, pipeline and command line for the form-interaction benchmark.
//!
//! `formbench-core` holds the pure model; this crate adds the IO: corpus
//! files, the embedded form server and WebDriver proxy, the WebDriver
//! client, the reference browser, script runners, LLM providers and the
//! dataset pipeline.

pub mod cli;
pub mod config;
pub mod corpus_io;
pub mod harness;
pub mod pipeline;
pub mod provider;
pub mod refbrowser;
pub mod report;
pub mod runner;
pub mod server;
pub mod webdriver;

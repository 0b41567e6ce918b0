//! Core of the form-interaction benchmark.
//!
//! Everything in this crate is a pure function over immutable values: the
//! field pool and its seeded sampler, the HTML form renderer, the structured
//! test scenario, action scripts and their mutants, the DOM snapshot model
//! used for locator resolution, and the metric/taxonomy engine. IO (HTTP,
//! WebDriver, files, subprocesses) lives in the `formbench` crate.
//!
//! The crate is `no_std` and only needs `alloc`.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod corpus;
pub mod coverage;
pub mod dataset;
pub mod dummy;
pub mod field;
pub mod html;
pub mod locate;
pub mod metrics;
pub mod mutation;
pub mod num;
pub mod pool;
pub mod prompt;
pub mod recorder;
pub mod rng;
pub mod scenario;
pub mod script;
pub mod stats;

pub use field::{Constraint, FieldKind, FieldSpec, SelectOption};
pub use html::render::{FormSpec, HtmlDocument};
pub use locate::{Locator, Strategy};
pub use pool::{CountRange, FieldPool};
pub use scenario::TestScenario;
pub use script::{Action, ActionScript, RawScript, TestScript, Verb};

//! Two-period lifecycle consumption experiments run against LLM and persona
//! agent panels.
//!
//! The crate solves and calibrates CRRA consumption problems analytically,
//! renders the experiment prompts, invokes pluggable agent backends (live
//! chat-completion providers or deterministic offline personas), scores the
//! parsed answers with deviation metrics, and sweeps interest-income tax
//! policy across an education-stratified population.
//!
//! Module map:
//! - [`lifecycle`]: the deterministic mathematical core plus a brute-force
//!   oracle that cross-checks the closed form.
//! - [`calibration`]: age-group income tables to two-period parameters.
//! - [`agent`]: prompt rendering, response parsing, persona generation and
//!   live provider adapters.
//! - [`metrics`]: accuracy / MAPD / VarAPD / budget deviation and the
//!   keyword motive tagger.
//! - [`experiment`]: scenario runners, tax sweeps and population
//!   aggregation.
//! - [`store`]: append-only line-delimited run records.
//! - [`report`]: CSV and SVG figure data plus the metric table.
//! - [`cli`]: the `lifecycle-sim` command-line entry points.

pub mod agent;
pub mod calibration;
pub mod cli;
pub mod config;
pub mod experiment;
pub mod lifecycle;
pub mod metrics;
pub mod report;
pub mod store;

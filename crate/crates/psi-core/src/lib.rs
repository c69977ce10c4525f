//! Price sentiment indices built from survey comments.
//!
//! The crate follows the pipeline stages in order:
//!
//! 1. [`corpus`] loads, validates and segments survey comments.
//! 2. [`baseline`] is a keyword-restricted Naive Bayes classifier; [`gateway`]
//!    builds prompts, talks to chat models and parses their judgments.
//! 3. [`ensemble`] integrates several judgments per comment into one label.
//! 4. [`index`] aggregates decisions into monthly price sentiment indices.
//! 5. [`analytics`] scores classifiers and relates indices to reference series.

pub mod analytics;
pub mod baseline;
pub mod corpus;
pub mod ensemble;
pub mod fsutil;
pub mod gateway;
pub mod index;
pub mod labels;
pub mod month;
pub mod text;

pub use labels::{Direction, Relevance};
pub use month::YearMonth;

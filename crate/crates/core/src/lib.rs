//! Description-driven minimum permission identification for Android app corpora.
//!
//! The pipeline runs on a pre-extracted corpus (descriptions, declared
//! permissions, API call lists):
//!
//! 1. [`topics`] trains an LDA model over descriptions and yields one topic
//!    distribution ([`topics::FuncVector`]) per app.
//! 2. [`recommender`] recommends permissions for a target app from its
//!    functionally similar neighbours (threshold neighbourhood, similarity
//!    weighted votes, adaptive cutoff).
//! 3. [`minset`] removes over-declared permissions (recommended by malicious
//!    neighbours but not by benign ones) fold by fold until a fixed point.
//! 4. [`funcperm`] mines topic/permission support tables and drops
//!    low-support permissions from the initial minimum set.
//! 5. [`risk`] flags unexpected risk permissions and scores apps, and
//!    [`eval`] aggregates corpus-level detection metrics.

pub mod corpus;
pub mod error;
pub mod eval;
pub mod funcperm;
pub mod minset;
pub mod pipeline;
pub mod recommender;
pub mod risk;
pub mod seed;
pub mod synth;
pub mod text;
pub mod topics;

pub use corpus::{AppRecord, Corpus, Label, PermSet, PermissionId, PermissionRegistry};
pub use error::{Error, Result};
pub use topics::{FuncVector, TopicModel};

//! Endpoint discovery from captured HTTP traffic.
//!
//! The pipeline runs in four stages:
//!
//! 1. [`denoise`] drops static assets, pages and outliers using cheap rules
//!    followed by a logistic sanity gate.
//! 2. [`normalize`] canonicalizes each surviving request into a
//!    `(method, path segments)` pair.
//! 3. [`template`] mines structural path templates with a fixed-depth
//!    prefix tree, abstracting identifier segments into wildcards.
//! 4. [`refine`] splits every template group into behavioral clusters using
//!    lightweight request features, a similarity graph and an embedding
//!    trained against it (with a k-means fallback for small or sparse groups).
//!
//! [`eval`] scores discovered clusters against labeled traffic, and
//! [`noise`] produces perturbed and synthetic corpora for robustness runs.
//! [`pipeline`] and [`bench`] tie the stages together.

pub mod bench;
pub mod denoise;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod noise;
pub mod normalize;
pub mod pipeline;
pub mod record;
pub mod refine;
pub mod seed;
pub mod template;

pub use error::{Error, Result};
pub use record::{Dataset, HttpRecord};

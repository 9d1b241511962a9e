//! Non-API traffic removal.
//!
//! A cascade of cheap rules runs first (static extension, static path marker,
//! missing `Content-Type`, non-API `Content-Type`); whatever survives is
//! scored by a logistic gate over a handful of structural features and
//! dropped if the score falls below `tau`.
//!
//! The default weights are `[-5.0, 1.0, 1.5, 1.0, 1.0, 3.0]` over
//! `(bias, read method, path depth, identifier segment, query present,
//! structured payload)`. With them a JSON `POST /api/v1/items` scores about
//! 0.92, while a bodiless request to `/` with an unknown verb scores about
//! 0.0067 and is dropped at the default `tau = 0.01`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ingest::is_structured_content_type;
use crate::normalize::{path_segments, UrlParts};
use crate::record::{Dataset, HttpRecord};
use crate::template::is_variable_segment;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DropReason {
    StaticExtension,
    StaticPathPattern,
    MissingContentType,
    NonApiContentType,
    LogisticGate,
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            DropReason::StaticExtension => "StaticExtension",
            DropReason::StaticPathPattern => "StaticPathPattern",
            DropReason::MissingContentType => "MissingContentType",
            DropReason::NonApiContentType => "NonApiContentType",
            DropReason::LogisticGate => "LogisticGate",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub static_extensions: Vec<String>,
    pub static_path_markers: Vec<String>,
    pub non_api_content_types: Vec<String>,
    /// Extra markers such as `/health` that are off by default.
    pub opt_in_path_markers: Vec<String>,
    pub logistic_weights: [f64; 6],
    pub tau: f64,
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            static_extensions: strings(&[
                "js", "css", "png", "jpg", "jpeg", "gif", "svg", "ico", "html", "htm", "woff",
                "woff2", "ttf", "mp4", "map",
            ]),
            static_path_markers: strings(&[
                "/static/", "/assets/", "/images/", "/img/", "/fonts/", "/media/", "/cdn-cgi/",
            ]),
            non_api_content_types: strings(&[
                "text/html",
                "image/",
                "font/",
                "audio/",
                "video/",
                "application/zip",
                "application/gzip",
            ]),
            opt_in_path_markers: Vec::new(),
            logistic_weights: [-5.0, 1.0, 1.5, 1.0, 1.0, 3.0],
            tau: 0.01,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> crate::Result<()> {
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(crate::Error::Config(format!(
                "tau must be in (0, 1), got {}",
                self.tau
            )));
        }
        if self.logistic_weights.iter().any(|w| !w.is_finite()) {
            return Err(crate::Error::Config("logistic weights must be finite".into()));
        }
        Ok(())
    }
}

/// Kept ids in input order, and dropped ids with the rule that fired.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FilterOutcome {
    pub kept: Vec<u64>,
    pub dropped: Vec<(u64, DropReason)>,
}

/// First matching rule in cascade order, if any.
pub fn rule_signal(record: &HttpRecord, config: &FilterConfig) -> Option<DropReason> {
    let parts = UrlParts::parse(&record.url);
    let path = parts.path.to_ascii_lowercase();

    let last = path.rsplit('/').next().unwrap_or("");
    if let Some((stem, ext)) = last.rsplit_once('.') {
        if !stem.is_empty() && config.static_extensions.iter().any(|e| e == ext) {
            return Some(DropReason::StaticExtension);
        }
    }

    // Markers such as "/static/" also match a path ending in "/static".
    let padded = format!("{path}/");
    let marker_hit = |m: &String| padded.contains(m.as_str()) || path.contains(m.as_str());
    if config.static_path_markers.iter().any(marker_hit)
        || config.opt_in_path_markers.iter().any(marker_hit)
    {
        return Some(DropReason::StaticPathPattern);
    }

    let Some(ct) = record.content_type.as_deref().or_else(|| record.header("content-type"))
    else {
        return Some(DropReason::MissingContentType);
    };
    let ct = ct.trim().to_ascii_lowercase();
    if ct.is_empty() {
        return Some(DropReason::MissingContentType);
    }
    if config
        .non_api_content_types
        .iter()
        .any(|p| ct.starts_with(p.as_str()))
    {
        return Some(DropReason::NonApiContentType);
    }
    None
}

/// The six gate features: constant, read method, path depth, identifier
/// segment present, query present, structured payload.
pub fn gate_features(record: &HttpRecord) -> [f64; 6] {
    let parts = UrlParts::parse(&record.url);
    let segments = path_segments(&parts.path);
    let flag = |b: bool| if b { 1.0 } else { 0.0 };
    [
        1.0,
        flag(matches!(record.method.as_str(), "GET" | "HEAD" | "OPTIONS")),
        segments.len() as f64,
        flag(segments.iter().any(|s| is_variable_segment(s))),
        flag(parts.query.as_deref().is_some_and(|q| !q.is_empty())),
        flag(is_structured_content_type(record.content_type.as_deref())),
    ]
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Logistic sanity score in `[0, 1]`.
pub fn sanity_score(record: &HttpRecord, config: &FilterConfig) -> f64 {
    let x = gate_features(record);
    let z: f64 = x.iter().zip(&config.logistic_weights).map(|(x, w)| x * w).sum();
    sigmoid(z)
}

/// Apply the rule cascade, then the logistic gate.
pub fn filter_traffic(dataset: &Dataset, config: &FilterConfig) -> FilterOutcome {
    let mut outcome = FilterOutcome::default();
    for record in &dataset.records {
        let reason = rule_signal(record, config).or_else(|| {
            (sanity_score(record, config) < config.tau).then_some(DropReason::LogisticGate)
        });
        match reason {
            Some(r) => outcome.dropped.push((record.id, r)),
            None => outcome.kept.push(record.id),
        }
    }
    outcome
}

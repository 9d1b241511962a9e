use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// HTTP verbs the pipeline understands. Other verbs are kept verbatim.
pub const KNOWN_METHODS: [&str; 7] = ["GET", "POST", "PUT", "PATCH", "DELETE", "HEAD", "OPTIONS"];

/// One captured request.
///
/// Only the request side of an exchange is retained; body contents are
/// reduced to size and shape metrics at ingest time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HttpRecord {
    pub id: u64,
    pub method: String,
    pub url: String,
    pub headers: Vec<(String, String)>,
    pub content_type: Option<String>,
    pub body_size: u64,
    pub body_field_count: Option<u64>,
    pub body_nesting_depth: Option<u64>,
    pub label: Option<String>,
}

impl HttpRecord {
    /// A bodiless record with no headers.
    pub fn new(id: u64, method: &str, url: &str) -> Self {
        Self {
            id,
            method: method.to_ascii_uppercase(),
            url: url.to_string(),
            headers: Vec::new(),
            content_type: None,
            body_size: 0,
            body_field_count: None,
            body_nesting_depth: None,
            label: None,
        }
    }

    pub fn with_content_type(mut self, content_type: &str) -> Self {
        self.headers
            .push(("Content-Type".to_string(), content_type.to_string()));
        self.content_type = Some(content_type.to_string());
        self
    }

    pub fn with_body(mut self, size: u64, fields: u64, depth: u64) -> Self {
        self.body_size = size;
        if size > 0 {
            self.body_field_count = Some(fields);
            self.body_nesting_depth = Some(depth);
        }
        self
    }

    pub fn with_label(mut self, label: &str) -> Self {
        self.label = Some(label.to_string());
        self
    }

    /// False for verbs outside [`KNOWN_METHODS`].
    pub fn has_known_method(&self) -> bool {
        KNOWN_METHODS.contains(&self.method.as_str())
    }

    /// First header with the given name, compared case-insensitively.
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(n, _)| n.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }
}

/// A list of records from one capture, plus where it came from.
///
/// Ground truth is carried on the records themselves (`label`), so the
/// record-id mapping can never disagree with the record list.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dataset {
    pub records: Vec<HttpRecord>,
    pub source: String,
}

impl Dataset {
    pub fn new(source: impl Into<String>, records: Vec<HttpRecord>) -> Self {
        Self {
            records,
            source: source.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Record id to endpoint label, or `None` when nothing is labeled.
    pub fn ground_truth(&self) -> Option<BTreeMap<u64, String>> {
        let truth: BTreeMap<u64, String> = self
            .records
            .iter()
            .filter_map(|r| r.label.as_ref().map(|l| (r.id, l.clone())))
            .collect();
        (!truth.is_empty()).then_some(truth)
    }

    pub fn get(&self, id: u64) -> Option<&HttpRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    /// Map from id to position, for repeated lookups.
    pub fn index(&self) -> BTreeMap<u64, usize> {
        self.records
            .iter()
            .enumerate()
            .map(|(i, r)| (r.id, i))
            .collect()
    }

    /// Smallest id not used by any record.
    pub fn next_id(&self) -> u64 {
        self.records.iter().map(|r| r.id + 1).max().unwrap_or(0)
    }
}

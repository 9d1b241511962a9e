//! Reading and writing captured traffic.
//!
//! Two input formats are accepted: HAR 1.2 archives as exported by browsers
//! and intercepting proxies, and a line-oriented JSONL form which is also the
//! canonical output format of every tool in this crate.

use std::collections::HashSet;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::record::{Dataset, HttpRecord};

/// A parsed capture plus any entries that had to be skipped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ingested {
    pub dataset: Dataset,
    pub warnings: Vec<String>,
}

impl Ingested {
    pub fn warning_count(&self) -> usize {
        self.warnings.len()
    }
}

/// Parse a HAR 1.2 document. One record per entry with a request URL, ids
/// assigned densely in file order.
pub fn parse_har(bytes: &[u8]) -> Result<Ingested> {
    let doc: Value = serde_json::from_slice(bytes).map_err(|e| Error::HarSyntax {
        offset: byte_offset(bytes, e.line(), e.column()),
        message: e.to_string(),
    })?;
    let entries = doc
        .get("log")
        .and_then(|log| log.get("entries"))
        .and_then(Value::as_array)
        .ok_or_else(|| Error::HarSyntax {
            offset: 0,
            message: "missing log.entries array".to_string(),
        })?;

    let mut records = Vec::with_capacity(entries.len());
    let mut warnings = Vec::new();
    for (index, entry) in entries.iter().enumerate() {
        let request = entry
            .get("request")
            .and_then(Value::as_object)
            .ok_or_else(|| Error::HarEntry {
                index,
                message: "missing request object".to_string(),
            })?;
        let Some(url) = request.get("url").and_then(Value::as_str) else {
            warnings.push(format!("entry {index}: request has no url, skipped"));
            continue;
        };
        let method = request
            .get("method")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::HarEntry {
                index,
                message: "request has no method".to_string(),
            })?;

        let headers = match request.get("headers") {
            None | Some(Value::Null) => Vec::new(),
            Some(Value::Array(items)) => items
                .iter()
                .map(|h| {
                    let name = h.get("name").and_then(Value::as_str);
                    let value = h.get("value").and_then(Value::as_str);
                    match (name, value) {
                        (Some(n), Some(v)) => Ok((n.to_string(), v.to_string())),
                        _ => Err(Error::HarEntry {
                            index,
                            message: "header without name/value".to_string(),
                        }),
                    }
                })
                .collect::<Result<Vec<_>>>()?,
            Some(_) => {
                return Err(Error::HarEntry {
                    index,
                    message: "headers is not an array".to_string(),
                })
            }
        };

        let body_size = request
            .get("bodySize")
            .and_then(Value::as_i64)
            .unwrap_or(0)
            .max(0) as u64;

        let mut record = HttpRecord {
            id: records.len() as u64,
            method: method.to_ascii_uppercase(),
            url: url.to_string(),
            content_type: first_content_type(&headers),
            headers,
            body_size,
            body_field_count: None,
            body_nesting_depth: None,
            label: entry
                .get("_label")
                .and_then(Value::as_str)
                .map(str::to_string),
        };
        if record.content_type.is_none() {
            record.content_type = request
                .get("postData")
                .and_then(|p| p.get("mimeType"))
                .and_then(Value::as_str)
                .filter(|m| !m.is_empty())
                .map(str::to_string);
        }
        if body_size > 0 && is_structured_content_type(record.content_type.as_deref()) {
            if let Some(text) = request
                .get("postData")
                .and_then(|p| p.get("text"))
                .and_then(Value::as_str)
            {
                if let Some((fields, depth)) = body_shape(text) {
                    record.body_field_count = Some(fields);
                    record.body_nesting_depth = Some(depth);
                }
            }
        }
        records.push(record);
    }

    Ok(Ingested {
        dataset: Dataset::new("har", records),
        warnings,
    })
}

/// Parse JSONL traffic, one request object per non-blank line.
///
/// Records without an explicit `id` are numbered by their ordinal among the
/// non-blank lines.
pub fn parse_jsonl(text: &str) -> Result<Dataset> {
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| Error::JsonlLine {
            line: line_no,
            message,
        };
        let value: Value = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        let Value::Object(obj) = value else {
            return Err(err("expected a JSON object".to_string()));
        };
        let record = record_from_object(&obj, records.len() as u64).map_err(err)?;
        if !seen.insert(record.id) {
            return Err(err(format!("duplicate record id {}", record.id)));
        }
        records.push(record);
    }
    Ok(Dataset::new("jsonl", records))
}

fn record_from_object(obj: &Map<String, Value>, default_id: u64) -> std::result::Result<HttpRecord, String> {
    let required_str = |key: &str| {
        obj.get(key)
            .and_then(Value::as_str)
            .ok_or_else(|| format!("missing string field `{key}`"))
    };
    let optional_u64 = |key: &str| -> std::result::Result<Option<u64>, String> {
        match obj.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => v
                .as_u64()
                .map(Some)
                .ok_or_else(|| format!("`{key}` must be a non-negative integer")),
        }
    };

    let method = required_str("method")?.to_ascii_uppercase();
    let url = required_str("url")?.to_string();
    let id = optional_u64("id")?.unwrap_or(default_id);
    let headers = match obj.get("headers") {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Array(items)) => items
            .iter()
            .map(header_pair)
            .collect::<std::result::Result<Vec<_>, _>>()?,
        Some(Value::Object(map)) => map
            .iter()
            .map(|(k, v)| {
                v.as_str()
                    .map(|v| (k.clone(), v.to_string()))
                    .ok_or_else(|| format!("header `{k}` must be a string"))
            })
            .collect::<std::result::Result<Vec<_>, _>>()?,
        Some(_) => return Err("`headers` must be an array or object".to_string()),
    };
    // An explicit null means "no content type"; an absent key falls back to
    // the headers.
    let content_type = match obj.get("content_type") {
        Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => return Err("`content_type` must be a string".to_string()),
        None => first_content_type(&headers),
    };
    let body_size = optional_u64("body_size")?.unwrap_or(0);
    let body_field_count = optional_u64("body_field_count")?;
    let body_nesting_depth = optional_u64("body_nesting_depth")?;
    if body_size == 0
        && (body_field_count.unwrap_or(0) > 0 || body_nesting_depth.unwrap_or(0) > 0)
    {
        return Err("body shape given for an empty body".to_string());
    }
    let label = match obj.get("label") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => return Err("`label` must be a string".to_string()),
    };

    Ok(HttpRecord {
        id,
        method,
        url,
        headers,
        content_type,
        body_size,
        body_field_count,
        body_nesting_depth,
        label,
    })
}

fn header_pair(v: &Value) -> std::result::Result<(String, String), String> {
    match v {
        Value::Array(pair) if pair.len() == 2 => match (&pair[0], &pair[1]) {
            (Value::String(n), Value::String(v)) => Ok((n.clone(), v.clone())),
            _ => Err("header pair must hold two strings".to_string()),
        },
        Value::Object(h) => match (h.get("name"), h.get("value")) {
            (Some(Value::String(n)), Some(Value::String(v))) => Ok((n.clone(), v.clone())),
            _ => Err("header object needs string name and value".to_string()),
        },
        _ => Err("header must be a [name, value] pair".to_string()),
    }
}

#[derive(Serialize)]
struct CanonicalRecord<'a> {
    id: u64,
    method: &'a str,
    url: &'a str,
    headers: &'a [(String, String)],
    content_type: &'a Option<String>,
    body_size: u64,
    body_field_count: Option<u64>,
    body_nesting_depth: Option<u64>,
    label: &'a Option<String>,
}

/// Serialize to canonical JSONL: one object per record, fields in a fixed
/// order, absent values written as `null`.
pub fn write_dataset(dataset: &Dataset) -> String {
    let mut out = String::new();
    for r in &dataset.records {
        let line = CanonicalRecord {
            id: r.id,
            method: &r.method,
            url: &r.url,
            headers: &r.headers,
            content_type: &r.content_type,
            body_size: r.body_size,
            body_field_count: r.body_field_count,
            body_nesting_depth: r.body_nesting_depth,
            label: &r.label,
        };
        out.push_str(&serde_json::to_string(&line).expect("record serializes"));
        out.push('\n');
    }
    out
}

fn first_content_type(headers: &[(String, String)]) -> Option<String> {
    headers
        .iter()
        .find(|(n, _)| n.eq_ignore_ascii_case("content-type"))
        .map(|(_, v)| v.clone())
}

/// True for JSON-family and GraphQL payload types.
pub fn is_structured_content_type(content_type: Option<&str>) -> bool {
    let Some(ct) = content_type else {
        return false;
    };
    let essence = ct.split(';').next().unwrap_or("").trim().to_ascii_lowercase();
    essence == "application/json"
        || essence == "application/graphql"
        || essence.ends_with("+json")
}

/// Top-level field count and nesting depth of a JSON body, if it parses.
pub fn body_shape(text: &str) -> Option<(u64, u64)> {
    let value: Value = serde_json::from_str(text).ok()?;
    let fields = match &value {
        Value::Object(m) => m.len() as u64,
        Value::Array(a) => a.len() as u64,
        _ => 0,
    };
    Some((fields, nesting_depth(&value)))
}

fn nesting_depth(value: &Value) -> u64 {
    match value {
        Value::Object(m) => 1 + m.values().map(nesting_depth).max().unwrap_or(0),
        Value::Array(a) => 1 + a.iter().map(nesting_depth).max().unwrap_or(0),
        _ => 0,
    }
}

fn byte_offset(bytes: &[u8], line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let line_start: usize = bytes
        .split(|&b| b == b'\n')
        .take(line - 1)
        .map(|l| l.len() + 1)
        .sum();
    (line_start + column.saturating_sub(1)).min(bytes.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn har(entries: &str) -> Vec<u8> {
        format!(r#"{{"log":{{"version":"1.2","entries":[{entries}]}}}}"#).into_bytes()
    }

    #[test]
    fn single_entry() {
        let doc = har(r#"{"request":{"method":"get","url":"http://h/api/v1/user/me","headers":[]}}"#);
        let out = parse_har(&doc).unwrap();
        assert_eq!(out.dataset.len(), 1);
        assert_eq!(out.dataset.records[0].method, "GET");
        assert_eq!(out.dataset.records[0].url, "http://h/api/v1/user/me");
    }

    #[test]
    fn zero_entries() {
        let out = parse_har(&har("")).unwrap();
        assert!(out.dataset.is_empty());
        assert_eq!(out.warning_count(), 0);
    }

    #[test]
    fn entry_without_url_is_counted() {
        let doc = har(concat!(
            r#"{"request":{"method":"GET","url":"/a"}},"#,
            r#"{"request":{"method":"GET"}},"#,
            r#"{"request":{"method":"POST","url":"/b"}}"#
        ));
        let out = parse_har(&doc).unwrap();
        assert_eq!(out.dataset.len(), 2);
        assert_eq!(out.warning_count(), 1);
        assert_eq!(out.dataset.records[1].id, 1);
        assert_eq!(out.dataset.records[1].url, "/b");
    }

    #[test]
    fn har_syntax_error_reports_offset() {
        let err = parse_har(b"{\"log\": {\"entries\": [}").unwrap_err();
        match err {
            Error::HarSyntax { offset, .. } => assert_eq!(offset, 21),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn har_body_metrics_and_content_type() {
        let doc = har(concat!(
            r#"{"request":{"method":"POST","url":"/api/x","bodySize":29,"#,
            r#""headers":[{"name":"content-type","value":"application/json"},"#,
            r#"{"name":"Content-Type","value":"text/plain"}],"#,
            r#""postData":{"mimeType":"application/json","text":"{\"a\":1,\"b\":{\"c\":[1,2]}}"}}}"#
        ));
        let rec = &parse_har(&doc).unwrap().dataset.records[0];
        assert_eq!(rec.content_type.as_deref(), Some("application/json"));
        assert_eq!(rec.body_field_count, Some(2));
        assert_eq!(rec.body_nesting_depth, Some(3));
    }

    #[test]
    fn negative_body_size_clamps() {
        let doc = har(r#"{"request":{"method":"GET","url":"/a","bodySize":-1}}"#);
        assert_eq!(parse_har(&doc).unwrap().dataset.records[0].body_size, 0);
    }

    #[test]
    fn jsonl_uppercases_method() {
        let d = parse_jsonl(r#"{"method":"post","url":"/api/x"}"#).unwrap();
        assert_eq!(d.records[0].method, "POST");
        assert_eq!(d.records[0].body_size, 0);
        assert_eq!(d.records[0].body_field_count, None);
    }

    #[test]
    fn jsonl_skips_blank_lines() {
        let text = "{\"method\":\"GET\",\"url\":\"/a\"}\n   \n{\"method\":\"GET\",\"url\":\"/b\"}\n";
        let d = parse_jsonl(text).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.records[1].id, 1);
    }

    #[test]
    fn jsonl_label_feeds_ground_truth() {
        let d = parse_jsonl(r#"{"method":"POST","url":"/login","label":"EP_login","extra":true}"#)
            .unwrap();
        assert_eq!(d.records[0].label.as_deref(), Some("EP_login"));
        let truth = d.ground_truth().unwrap();
        assert_eq!(truth.get(&0).map(String::as_str), Some("EP_login"));
    }

    #[test]
    fn jsonl_errors_carry_line_numbers() {
        let text = "{\"method\":\"GET\",\"url\":\"/a\"}\n\n[1,2]\n";
        match parse_jsonl(text).unwrap_err() {
            Error::JsonlLine { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        match parse_jsonl("{\"method\":\"GET\"}").unwrap_err() {
            Error::JsonlLine { line, .. } => assert_eq!(line, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn jsonl_rejects_shape_without_body() {
        let text = r#"{"method":"GET","url":"/a","body_size":0,"body_field_count":3}"#;
        assert!(parse_jsonl(text).is_err());
    }

    #[test]
    fn jsonl_content_type_from_headers() {
        let text = r#"{"method":"GET","url":"/a","headers":[["CONTENT-TYPE","application/json"]]}"#;
        let d = parse_jsonl(text).unwrap();
        assert_eq!(d.records[0].content_type.as_deref(), Some("application/json"));
    }

    #[test]
    fn write_empty_dataset() {
        assert_eq!(write_dataset(&Dataset::default()), "");
    }

    #[test]
    fn write_single_record_round_trips() {
        let rec = HttpRecord::new(0, "GET", "http://h/api/v1/items/1")
            .with_content_type("application/json")
            .with_label("items");
        let d = Dataset::new("jsonl", vec![rec]);
        let text = write_dataset(&d);
        assert_eq!(text.lines().count(), 1);
        assert!(text.starts_with(r#"{"id":0,"method":"GET","url":"#));
        assert_eq!(parse_jsonl(&text).unwrap(), d);
    }
}

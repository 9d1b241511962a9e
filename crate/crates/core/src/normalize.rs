//! Canonical request paths.
//!
//! Two URLs that hit the same interface should compare equal after
//! normalization: scheme, host, query and fragment are removed, slashes are
//! collapsed, trailing slashes trimmed, unreserved percent-escapes decoded and
//! ASCII folded to lowercase.

use crate::record::HttpRecord;
use crate::refine::features::FeatureVector;

/// The `(method, path)` representation of a record used by the clustering
/// stages.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedRequest {
    pub record_id: u64,
    pub method: String,
    pub segments: Vec<String>,
    /// Query parameter names in the order captured, duplicates kept.
    pub raw_query_keys: Vec<String>,
    pub feature_cache: Option<FeatureVector>,
}

impl NormalizedRequest {
    pub fn depth(&self) -> usize {
        self.segments.len()
    }

    pub fn canonical_path(&self) -> String {
        canonical_path(&self.segments)
    }
}

/// A URL split into its textual parts. `prefix` holds scheme and authority
/// (empty for origin-form URLs); `query` and `fragment` exclude their
/// delimiters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UrlParts {
    pub prefix: String,
    pub path: String,
    pub query: Option<String>,
    pub fragment: Option<String>,
}

impl UrlParts {
    pub fn parse(url: &str) -> Self {
        let (rest, fragment) = match url.split_once('#') {
            Some((a, f)) => (a, Some(f.to_string())),
            None => (url, None),
        };
        let (before_query, query) = match rest.split_once('?') {
            Some((a, q)) => (a, Some(q.to_string())),
            None => (rest, None),
        };
        let authority_start = if let Some(pos) = before_query.find("://") {
            // Only a scheme if nothing path-like precedes it.
            if before_query[..pos].contains('/') {
                None
            } else {
                Some(pos + 3)
            }
        } else if before_query.starts_with("//") {
            Some(2)
        } else {
            None
        };
        let (prefix, path) = match authority_start {
            Some(start) => match before_query[start..].find('/') {
                Some(slash) => before_query.split_at(start + slash),
                None => (before_query, ""),
            },
            None => ("", before_query),
        };
        Self {
            prefix: prefix.to_string(),
            path: path.to_string(),
            query,
            fragment,
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::with_capacity(self.prefix.len() + self.path.len() + 16);
        out.push_str(&self.prefix);
        out.push_str(&self.path);
        if let Some(q) = &self.query {
            out.push('?');
            out.push_str(q);
        }
        if let Some(f) = &self.fragment {
            out.push('#');
            out.push_str(f);
        }
        out
    }

    /// Query split into `(key, value)` pairs; pieces without `=` get an
    /// empty value, empty pieces are skipped.
    pub fn query_pairs(&self) -> Vec<(String, String)> {
        let Some(q) = &self.query else {
            return Vec::new();
        };
        q.split('&')
            .filter(|p| !p.is_empty())
            .map(|p| match p.split_once('=') {
                Some((k, v)) => (k.to_string(), v.to_string()),
                None => (p.to_string(), String::new()),
            })
            .collect()
    }
}

/// Normalize a record's URL. A URL without a path yields zero segments.
pub fn normalize(record: &HttpRecord) -> NormalizedRequest {
    let parts = UrlParts::parse(&record.url);
    let raw_query_keys = parts
        .query_pairs()
        .into_iter()
        .map(|(k, _)| decode_form_component(&k))
        .collect();
    NormalizedRequest {
        record_id: record.id,
        method: record.method.to_ascii_uppercase(),
        segments: path_segments(&parts.path),
        raw_query_keys,
        feature_cache: None,
    }
}

/// Split and canonicalize a raw path.
pub fn path_segments(path: &str) -> Vec<String> {
    decode_unreserved(path)
        .split('/')
        .filter(|s| !s.is_empty())
        .map(str::to_ascii_lowercase)
        .collect()
}

/// `"/"` followed by the segments joined with `"/"`.
pub fn canonical_path(segments: &[String]) -> String {
    if segments.is_empty() {
        return "/".to_string();
    }
    let mut out = String::new();
    for s in segments {
        out.push('/');
        out.push_str(s);
    }
    out
}

fn is_unreserved(b: u8) -> bool {
    b.is_ascii_alphanumeric() || matches!(b, b'-' | b'.' | b'_' | b'~')
}

fn hex_val(b: u8) -> Option<u8> {
    match b {
        b'0'..=b'9' => Some(b - b'0'),
        b'a'..=b'f' => Some(b - b'a' + 10),
        b'A'..=b'F' => Some(b - b'A' + 10),
        _ => None,
    }
}

/// Decode `%XX` escapes of unreserved characters only, so that an encoded
/// `/` can never introduce a new segment.
fn decode_unreserved(path: &str) -> String {
    let bytes = path.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' && i + 2 < bytes.len() {
            if let (Some(h), Some(l)) = (hex_val(bytes[i + 1]), hex_val(bytes[i + 2])) {
                let decoded = h * 16 + l;
                if is_unreserved(decoded) {
                    out.push(decoded);
                    i += 3;
                    continue;
                }
            }
        }
        out.push(bytes[i]);
        i += 1;
    }
    String::from_utf8(out).unwrap_or_else(|e| String::from_utf8_lossy(e.as_bytes()).into_owned())
}

/// `application/x-www-form-urlencoded` decoding of a single component.
pub fn decode_form_component(s: &str) -> String {
    let bytes = s.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'+' => {
                out.push(b' ');
                i += 1;
            }
            b'%' if i + 2 < bytes.len() => {
                match (hex_val(bytes[i + 1]), hex_val(bytes[i + 2])) {
                    (Some(h), Some(l)) => {
                        out.push(h * 16 + l);
                        i += 3;
                    }
                    _ => {
                        out.push(b'%');
                        i += 1;
                    }
                }
            }
            b => {
                out.push(b);
                i += 1;
            }
        }
    }
    String::from_utf8_lossy(&out).into_owned()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn segs(url: &str) -> Vec<String> {
        normalize(&HttpRecord::new(0, "GET", url)).segments
    }

    #[test]
    fn strips_host_and_collapses_slashes() {
        assert_eq!(segs("http://h/api//user/profile/"), ["api", "user", "profile"]);
    }

    #[test]
    fn query_order_only_changes_recorded_keys() {
        let a = normalize(&HttpRecord::new(0, "GET", "/api/user?role=admin&id=1"));
        let b = normalize(&HttpRecord::new(0, "GET", "/api/user?id=1&role=admin"));
        assert_eq!(a.segments, b.segments);
        assert_eq!(a.raw_query_keys, ["role", "id"]);
        assert_eq!(b.raw_query_keys, ["id", "role"]);
    }

    #[test]
    fn case_is_folded() {
        assert_eq!(segs("/API/user"), ["api", "user"]);
    }

    #[test]
    fn canonical_path_forms() {
        let s: Vec<String> = ["api", "v1", "items"].iter().map(|s| s.to_string()).collect();
        assert_eq!(canonical_path(&s), "/api/v1/items");
        assert_eq!(canonical_path(&[]), "/");
        let nr = normalize(&HttpRecord::new(0, "GET", "/api/user"));
        assert_eq!(nr.canonical_path(), "/api/user");
    }

    #[test]
    fn no_path_is_root() {
        assert!(segs("https://example.com").is_empty());
        assert!(segs("https://example.com?x=1").is_empty());
        assert!(segs("/").is_empty());
    }

    #[test]
    fn fragment_and_query_removed() {
        assert_eq!(segs("https://h:8080/a/b?x=1#frag"), ["a", "b"]);
        assert_eq!(segs("/a#x?y"), ["a"]);
    }

    #[test]
    fn protocol_relative_host_removed() {
        assert_eq!(segs("//cdn.example.com/lib/x"), ["lib", "x"]);
    }

    #[test]
    fn unreserved_escapes_decoded_reserved_kept() {
        assert_eq!(segs("/api/%75ser"), ["api", "user"]);
        assert_eq!(segs("/api/a%2Fb"), ["api", "a%2fb"]);
        assert_eq!(segs("/api/a+b"), ["api", "a+b"]);
        assert_eq!(segs("/api/100%"), ["api", "100%"]);
        assert_eq!(segs("/api/%7e%zz"), ["api", "~%zz"]);
    }

    #[test]
    fn query_keys_keep_duplicates_and_decode() {
        let nr = normalize(&HttpRecord::new(0, "GET", "/x?id=1&id=1&%69d=2&&flag"));
        assert_eq!(nr.raw_query_keys, ["id", "id", "id", "flag"]);
    }

    #[test]
    fn url_parts_round_trip() {
        for url in [
            "http://h/a?b=1#c",
            "/a/b",
            "https://h",
            "//h/x?",
            "/p?q=hello world",
        ] {
            assert_eq!(UrlParts::parse(url).render(), url);
        }
    }
}

//! Endpoint-preserving lexical rewrites of a single request.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::normalize::{decode_form_component, UrlParts};
use crate::record::HttpRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LexifyRule {
    QueryOrderShuffle,
    NeutralQueryParameter,
    DuplicateQueryKey,
    UnderscoreInjection,
    HyphenDuplication,
    DotInjection,
    RepeatedSlash,
    TrailingSlashAddition,
    TrailingSlashRemoval,
    UppercaseToken,
    LowercaseToken,
    SpaceEncoding,
    PlusEncoding,
    HexEncoding,
}

/// Result of [`lexify`]. An inapplicable rule leaves the record unchanged
/// and clears `applied`.
#[derive(Debug, Clone, PartialEq)]
pub struct LexifyOutcome {
    pub record: HttpRecord,
    pub applied: bool,
}

impl LexifyRule {
    pub const ALL: [LexifyRule; 14] = [
        LexifyRule::QueryOrderShuffle,
        LexifyRule::NeutralQueryParameter,
        LexifyRule::DuplicateQueryKey,
        LexifyRule::UnderscoreInjection,
        LexifyRule::HyphenDuplication,
        LexifyRule::DotInjection,
        LexifyRule::RepeatedSlash,
        LexifyRule::TrailingSlashAddition,
        LexifyRule::TrailingSlashRemoval,
        LexifyRule::UppercaseToken,
        LexifyRule::LowercaseToken,
        LexifyRule::SpaceEncoding,
        LexifyRule::PlusEncoding,
        LexifyRule::HexEncoding,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LexifyRule::QueryOrderShuffle => "Query Order Shuffle",
            LexifyRule::NeutralQueryParameter => "Neutral Query Parameter",
            LexifyRule::DuplicateQueryKey => "Duplicate Query Key",
            LexifyRule::UnderscoreInjection => "Underscore Injection",
            LexifyRule::HyphenDuplication => "Hyphen Duplication",
            LexifyRule::DotInjection => "Dot Injection",
            LexifyRule::RepeatedSlash => "Repeated Slash",
            LexifyRule::TrailingSlashAddition => "Trailing Slash Addition",
            LexifyRule::TrailingSlashRemoval => "Trailing Slash Removal",
            LexifyRule::UppercaseToken => "Uppercase Token",
            LexifyRule::LowercaseToken => "Lowercase Token",
            LexifyRule::SpaceEncoding => "Space Encoding (%20)",
            LexifyRule::PlusEncoding => "Plus Encoding (+)",
            LexifyRule::HexEncoding => "Hex Encoding",
        }
    }

    /// Rules that rewrite the characters of a path segment. The normalizer
    /// keeps their output distinct; template mining folds it back.
    pub fn mutates_tokens(self) -> bool {
        matches!(
            self,
            LexifyRule::UnderscoreInjection | LexifyRule::HyphenDuplication | LexifyRule::DotInjection
        )
    }

    pub fn applies_to(self, record: &HttpRecord) -> bool {
        let parts = UrlParts::parse(&record.url);
        let q = parts.query.as_deref().unwrap_or("");
        let pieces = query_pieces(q);
        match self {
            LexifyRule::QueryOrderShuffle => pieces.iter().any(|p| *p != pieces[0]),
            LexifyRule::NeutralQueryParameter => {
                !pieces.is_empty() && !pieces.iter().any(|p| piece_key(p) == "tmp")
            }
            LexifyRule::DuplicateQueryKey => pieces.iter().any(|p| !piece_key(p).is_empty()),
            LexifyRule::UnderscoreInjection => !segment_spans(&parts.path).is_empty(),
            LexifyRule::HyphenDuplication => parts.path.contains('-'),
            LexifyRule::DotInjection => !dot_positions(&parts.path).is_empty(),
            LexifyRule::RepeatedSlash => parts.path.contains('/'),
            LexifyRule::TrailingSlashAddition => {
                !parts.path.is_empty() && !parts.path.ends_with('/')
            }
            LexifyRule::TrailingSlashRemoval => parts.path.len() > 1 && parts.path.ends_with('/'),
            LexifyRule::UppercaseToken => parts.path.bytes().any(|b| b.is_ascii_lowercase()),
            LexifyRule::LowercaseToken => parts.path.bytes().any(|b| b.is_ascii_uppercase()),
            LexifyRule::SpaceEncoding => q.contains([' ', '+']),
            LexifyRule::PlusEncoding => q.contains(' ') || q.contains("%20"),
            LexifyRule::HexEncoding => pieces.iter().any(|p| hex_value(p).is_some()),
        }
    }
}

fn query_pieces(q: &str) -> Vec<&str> {
    q.split('&').filter(|p| !p.is_empty()).collect()
}

fn piece_key(piece: &str) -> &str {
    piece.split_once('=').map_or(piece, |(k, _)| k)
}

/// The piece with its value fully percent-encoded, if that changes it.
fn hex_value(piece: &str) -> Option<String> {
    let (k, v) = piece.split_once('=')?;
    if v.is_empty() {
        return None;
    }
    let encoded: String = decode_form_component(v)
        .bytes()
        .map(|b| format!("%{b:02x}"))
        .collect();
    (encoded != v).then(|| format!("{k}={encoded}"))
}

/// Byte ranges of the non-empty segments of a raw path.
fn segment_spans(path: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut start = 0;
    for (i, c) in path.char_indices().chain(std::iter::once((path.len(), '/'))) {
        if c == '/' {
            if i > start {
                spans.push((start, i));
            }
            start = i + 1;
        }
    }
    spans
}

/// Positions between two ASCII alphanumerics inside a segment.
fn dot_positions(path: &str) -> Vec<usize> {
    let b = path.as_bytes();
    (1..b.len())
        .filter(|&i| b[i - 1].is_ascii_alphanumeric() && b[i].is_ascii_alphanumeric())
        .filter(|&i| i < 2 || b[i - 2] != b'%')
        .collect()
}

fn pick<T: Copy>(items: &[T], rng: &mut ChaCha8Rng) -> T {
    items[rng.random_range(0..items.len())]
}

/// Rewrite a record with one rule. The label, id, method and body are never
/// touched.
pub fn lexify(record: &HttpRecord, rule: LexifyRule, rng: &mut ChaCha8Rng) -> LexifyOutcome {
    if !rule.applies_to(record) {
        return LexifyOutcome {
            record: record.clone(),
            applied: false,
        };
    }
    let mut parts = UrlParts::parse(&record.url);
    let q = parts.query.clone().unwrap_or_default();
    let pieces = query_pieces(&q);
    let path = parts.path.clone();
    match rule {
        LexifyRule::QueryOrderShuffle => {
            let mut shuffled = pieces.clone();
            shuffled.shuffle(rng);
            if shuffled == pieces {
                shuffled.rotate_left(1);
            }
            parts.query = Some(shuffled.join("&"));
        }
        LexifyRule::NeutralQueryParameter => {
            parts.query = Some(format!("{}&tmp=0", pieces.join("&")));
        }
        LexifyRule::DuplicateQueryKey => {
            let keyed: Vec<&str> = pieces.iter().copied().filter(|p| !piece_key(p).is_empty()).collect();
            let dup = pick(&keyed, rng);
            parts.query = Some(format!("{}&{dup}", pieces.join("&")));
        }
        LexifyRule::UnderscoreInjection => {
            let (_, end) = pick(&segment_spans(&path), rng);
            parts.path = format!("{}_{}", &path[..end], &path[end..]);
        }
        LexifyRule::HyphenDuplication => {
            let hyphens: Vec<usize> = path.match_indices('-').map(|(i, _)| i).collect();
            let at = pick(&hyphens, rng);
            parts.path = format!("{}-{}", &path[..at], &path[at..]);
        }
        LexifyRule::DotInjection => {
            let at = pick(&dot_positions(&path), rng);
            parts.path = format!("{}.{}", &path[..at], &path[at..]);
        }
        LexifyRule::RepeatedSlash => {
            let slashes: Vec<usize> = path.match_indices('/').map(|(i, _)| i).collect();
            let at = pick(&slashes, rng);
            parts.path = format!("{}/{}", &path[..at], &path[at..]);
        }
        LexifyRule::TrailingSlashAddition => parts.path.push('/'),
        LexifyRule::TrailingSlashRemoval => {
            parts.path.pop();
        }
        LexifyRule::UppercaseToken => {
            let spans: Vec<(usize, usize)> = segment_spans(&path)
                .into_iter()
                .filter(|&(s, e)| path[s..e].bytes().any(|b| b.is_ascii_lowercase()))
                .collect();
            let (s, e) = pick(&spans, rng);
            parts.path = format!("{}{}{}", &path[..s], path[s..e].to_ascii_uppercase(), &path[e..]);
        }
        LexifyRule::LowercaseToken => parts.path = path.to_ascii_lowercase(),
        LexifyRule::SpaceEncoding => {
            parts.query = Some(q.replace([' ', '+'], "%20"));
        }
        LexifyRule::PlusEncoding => {
            parts.query = Some(q.replace("%20", "+").replace(' ', "+"));
        }
        LexifyRule::HexEncoding => {
            let candidates: Vec<usize> = (0..pieces.len()).filter(|&i| hex_value(pieces[i]).is_some()).collect();
            let i = pick(&candidates, rng);
            let mut out: Vec<String> = pieces.iter().map(|p| p.to_string()).collect();
            out[i] = hex_value(pieces[i]).unwrap_or_default();
            parts.query = Some(out.join("&"));
        }
    }
    let mut rewritten = record.clone();
    rewritten.url = parts.render();
    LexifyOutcome {
        record: rewritten,
        applied: true,
    }
}

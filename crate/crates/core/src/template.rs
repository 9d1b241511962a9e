//! Structural template mining.
//!
//! Requests are partitioned by `(method, depth)` and routed through a
//! fixed-depth prefix tree, one level per leading path segment. Segments that
//! look like identifiers share a single wildcard branch, and a level whose
//! fixed children exceed `max_children` sends further newcomers down the
//! wildcard branch too. Within a leaf, a request joins the most similar
//! existing template (judged on the segments the tree did not route on) or
//! starts a new one; on join, disagreeing fixed positions become wildcards.
//!
//! Fixed segments are compared after folding delimiter noise (`_` and `.`
//! removed, runs of `-` collapsed), so `users`, `users_` and `us.ers` route
//! and match together. The rendered template shows the most frequent
//! spelling observed at each fixed position.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::normalize::{canonical_path, NormalizedRequest};

/// One position of a path template.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Token {
    Fixed(String),
    Wildcard,
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Fixed(s) => f.write_str(s),
            Token::Wildcard => f.write_str("{*}"),
        }
    }
}

/// A method plus a sequence of fixed and wildcard segments.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PathTemplate {
    pub method: String,
    pub pattern: Vec<Token>,
}

impl PathTemplate {
    pub fn new(method: &str, pattern: Vec<Token>) -> Self {
        Self {
            method: method.to_string(),
            pattern,
        }
    }

    /// Parse a rendered template such as `/api/v1/items/{*}`.
    pub fn parse(method: &str, rendered: &str) -> Self {
        let pattern = rendered
            .split('/')
            .filter(|s| !s.is_empty())
            .map(|s| {
                if s == "{*}" {
                    Token::Wildcard
                } else {
                    Token::Fixed(s.to_string())
                }
            })
            .collect();
        Self::new(method, pattern)
    }

    pub fn depth(&self) -> usize {
        self.pattern.len()
    }

    /// Path form with wildcards shown as `{*}`.
    pub fn render(&self) -> String {
        let segments: Vec<String> = self.pattern.iter().map(Token::to_string).collect();
        canonical_path(&segments)
    }

    /// True when method and depth agree and every fixed token equals the
    /// corresponding segment (modulo delimiter folding).
    pub fn matches(&self, nr: &NormalizedRequest) -> bool {
        self.method == nr.method
            && self.depth() == nr.depth()
            && self.pattern.iter().zip(&nr.segments).all(|(t, s)| match t {
                Token::Wildcard => true,
                Token::Fixed(f) => f == s || fold(f) == fold(s),
            })
    }

    /// Like [`matches`](Self::matches) but with exact string comparison.
    pub fn matches_exact(&self, nr: &NormalizedRequest) -> bool {
        self.method == nr.method
            && self.depth() == nr.depth()
            && self.pattern.iter().zip(&nr.segments).all(|(t, s)| match t {
                Token::Wildcard => true,
                Token::Fixed(f) => f == s,
            })
    }
}

impl fmt::Display for PathTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.method, self.render())
    }
}

/// A mined template and the requests assigned to it.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateGroup {
    pub template: PathTemplate,
    pub member_ids: Vec<u64>,
    pub distinct_paths: usize,
}

/// Identifier detectors, tried in order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariableDetector {
    /// `123`
    Digits,
    /// `550e8400-e29b-41d4-a716-446655440000`
    Uuid,
    /// Hex strings of at least eight characters.
    Hex,
    /// Long tokens (16+ chars) with at least 30% digits.
    DigitHeavy,
    /// Three or more separate runs of digits, e.g. `a1b2c3`.
    DigitRuns,
}

impl VariableDetector {
    pub const ALL: [VariableDetector; 5] = [
        VariableDetector::Digits,
        VariableDetector::Uuid,
        VariableDetector::Hex,
        VariableDetector::DigitHeavy,
        VariableDetector::DigitRuns,
    ];

    pub fn detect(self, s: &str) -> bool {
        let b = s.as_bytes();
        match self {
            VariableDetector::Digits => !b.is_empty() && b.iter().all(u8::is_ascii_digit),
            VariableDetector::Uuid => {
                b.len() == 36
                    && b.iter().enumerate().all(|(i, c)| match i {
                        8 | 13 | 18 | 23 => *c == b'-',
                        _ => c.is_ascii_hexdigit(),
                    })
            }
            VariableDetector::Hex => b.len() >= 8 && b.iter().all(u8::is_ascii_hexdigit),
            VariableDetector::DigitHeavy => {
                let digits = b.iter().filter(|c| c.is_ascii_digit()).count();
                b.len() >= 16 && digits as f64 >= 0.3 * b.len() as f64
            }
            VariableDetector::DigitRuns => {
                let mut runs = 0;
                let mut in_run = false;
                for c in b {
                    if c.is_ascii_digit() {
                        if !in_run {
                            runs += 1;
                        }
                        in_run = true;
                    } else {
                        in_run = false;
                    }
                }
                runs >= 3
            }
        }
    }
}

/// True if the segment looks like an identifier under the default detectors.
pub fn is_variable_segment(segment: &str) -> bool {
    VariableDetector::ALL.iter().any(|d| d.detect(segment))
}

/// Remove `_` and `.`, collapse `-` runs to a single `-`.
pub fn fold(segment: &str) -> String {
    let mut out = String::with_capacity(segment.len());
    let mut prev_dash = false;
    for c in segment.chars() {
        match c {
            '_' | '.' => {}
            '-' if prev_dash => {}
            '-' => {
                prev_dash = true;
                out.push(c);
            }
            c => {
                prev_dash = false;
                out.push(c);
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinerConfig {
    /// Number of leading segments routed through the tree.
    pub tree_depth: usize,
    /// Fraction of unrouted positions that must agree to join a template.
    pub sim_threshold: f64,
    /// Fixed children per tree node before newcomers route to the wildcard.
    pub max_children: usize,
    pub variable_patterns: Vec<VariableDetector>,
    /// Compare fixed segments modulo `_`, `.` and repeated `-`.
    pub fold_delimiters: bool,
}

impl Default for MinerConfig {
    fn default() -> Self {
        Self {
            tree_depth: 4,
            sim_threshold: 0.5,
            max_children: 64,
            variable_patterns: VariableDetector::ALL.to_vec(),
            fold_delimiters: true,
        }
    }
}

impl MinerConfig {
    fn is_variable(&self, segment: &str) -> bool {
        let detect = |s: &str| self.variable_patterns.iter().any(|d| d.detect(s));
        detect(segment) || (self.fold_delimiters && detect(&fold(segment)))
    }

    fn key(&self, segment: &str) -> String {
        if self.fold_delimiters {
            fold(segment)
        } else {
            segment.to_string()
        }
    }

    pub fn validate(&self) -> crate::Result<()> {
        if !(self.sim_threshold > 0.0 && self.sim_threshold <= 1.0) {
            return Err(crate::Error::Config(format!(
                "sim_threshold must be in (0, 1], got {}",
                self.sim_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum RouteKey {
    Fixed(String),
    Wildcard,
}

#[derive(Debug, Default)]
struct Node {
    children: HashMap<RouteKey, usize>,
    fixed_children: usize,
    drafts: Vec<usize>,
}

#[derive(Debug, Clone)]
enum DraftToken {
    Fixed {
        key: String,
        spellings: BTreeMap<String, usize>,
    },
    Wildcard,
}

#[derive(Debug)]
struct Draft {
    method: String,
    tokens: Vec<DraftToken>,
    members: Vec<usize>,
}

impl Draft {
    fn start(method: &str, nr: &NormalizedRequest, config: &MinerConfig) -> Self {
        let tokens = nr
            .segments
            .iter()
            .enumerate()
            .map(|(i, seg)| {
                // The leading segment always stays fixed so that no template
                // is all wildcards.
                if i > 0 && config.is_variable(seg) {
                    DraftToken::Wildcard
                } else {
                    DraftToken::Fixed {
                        key: config.key(seg),
                        spellings: BTreeMap::new(),
                    }
                }
            })
            .collect();
        Self {
            method: method.to_string(),
            tokens,
            members: Vec::new(),
        }
    }

    fn similarity(&self, nr: &NormalizedRequest, from: usize, config: &MinerConfig) -> f64 {
        let span = nr.depth().saturating_sub(from);
        if span == 0 {
            return 1.0;
        }
        let hits = self.tokens[from..]
            .iter()
            .zip(&nr.segments[from..])
            .filter(|(t, seg)| match t {
                DraftToken::Wildcard => config.is_variable(seg),
                DraftToken::Fixed { key, .. } => {
                    !config.is_variable(seg) && *key == config.key(seg)
                }
            })
            .count();
        hits as f64 / span as f64
    }

    fn absorb(&mut self, nr: &NormalizedRequest, config: &MinerConfig) {
        for (i, (token, seg)) in self.tokens.iter_mut().zip(&nr.segments).enumerate() {
            if let DraftToken::Fixed { key, spellings } = token {
                if *key == config.key(seg) && (i == 0 || !config.is_variable(seg)) {
                    *spellings.entry(seg.clone()).or_insert(0) += 1;
                } else if i > 0 {
                    *token = DraftToken::Wildcard;
                }
            }
        }
    }

    fn template(&self) -> PathTemplate {
        let pattern = self
            .tokens
            .iter()
            .map(|t| match t {
                DraftToken::Wildcard => Token::Wildcard,
                DraftToken::Fixed { spellings, .. } => {
                    // Most frequent spelling; BTreeMap order breaks ties.
                    let best = spellings
                        .iter()
                        .fold(None::<(&String, usize)>, |best, (s, &n)| match best {
                            Some((_, m)) if m >= n => best,
                            _ => Some((s, n)),
                        })
                        .map(|(s, _)| s.clone())
                        .unwrap_or_default();
                    Token::Fixed(best)
                }
            })
            .collect();
        PathTemplate::new(&self.method, pattern)
    }
}

/// Group requests into structural templates. Groups partition the input and
/// are sorted by method, rendered template and smallest member id.
pub fn mine(requests: &[NormalizedRequest], config: &MinerConfig) -> Vec<TemplateGroup> {
    let mut partitions: BTreeMap<(String, usize), Vec<usize>> = BTreeMap::new();
    for (i, nr) in requests.iter().enumerate() {
        partitions
            .entry((nr.method.clone(), nr.depth()))
            .or_default()
            .push(i);
    }

    let mut groups = Vec::new();
    for ((method, depth), members) in partitions {
        let routed = depth.min(config.tree_depth);
        let mut nodes = vec![Node::default()];
        let mut drafts: Vec<Draft> = Vec::new();

        for idx in members {
            let nr = &requests[idx];
            let mut node = 0;
            for (level, seg) in nr.segments[..routed].iter().enumerate() {
                let key = if level > 0 && config.is_variable(seg) {
                    RouteKey::Wildcard
                } else {
                    let fixed = RouteKey::Fixed(config.key(seg));
                    let overflow = level > 0
                        && !nodes[node].children.contains_key(&fixed)
                        && nodes[node].fixed_children >= config.max_children;
                    if overflow {
                        RouteKey::Wildcard
                    } else {
                        fixed
                    }
                };
                node = match nodes[node].children.get(&key) {
                    Some(&child) => child,
                    None => {
                        let child = nodes.len();
                        nodes.push(Node::default());
                        if matches!(key, RouteKey::Fixed(_)) {
                            nodes[node].fixed_children += 1;
                        }
                        nodes[node].children.insert(key, child);
                        child
                    }
                };
            }

            let mut best: Option<(usize, f64)> = None;
            for &d in &nodes[node].drafts {
                let sim = drafts[d].similarity(nr, routed, config);
                // Strictly greater keeps the earliest template on ties.
                if sim >= config.sim_threshold && best.is_none_or(|(_, b)| sim > b) {
                    best = Some((d, sim));
                }
            }
            let target = match best {
                Some((d, _)) => {
                    drafts[d].absorb(nr, config);
                    d
                }
                None => {
                    let mut draft = Draft::start(&method, nr, config);
                    draft.absorb(nr, config);
                    drafts.push(draft);
                    nodes[node].drafts.push(drafts.len() - 1);
                    drafts.len() - 1
                }
            };
            drafts[target].members.push(idx);
        }

        for draft in drafts {
            let member_ids: Vec<u64> = draft.members.iter().map(|&i| requests[i].record_id).collect();
            let distinct_paths = draft
                .members
                .iter()
                .map(|&i| requests[i].segments.as_slice())
                .collect::<HashSet<_>>()
                .len();
            groups.push(TemplateGroup {
                template: draft.template(),
                member_ids,
                distinct_paths,
            });
        }
    }

    groups.sort_by(|a, b| {
        (&a.template.method, a.template.render(), a.member_ids.iter().min())
            .cmp(&(&b.template.method, b.template.render(), b.member_ids.iter().min()))
    });
    groups
}

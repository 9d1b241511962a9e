//! Seeded synthetic API traffic with endpoint labels.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::record::{Dataset, HttpRecord, KNOWN_METHODS};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdStyle {
    Numeric,
    Uuid,
    Hex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSpec {
    pub endpoint_count: usize,
    pub requests_per_endpoint: usize,
    pub id_styles: Vec<IdStyle>,
    /// `(method, weight)` pairs.
    pub method_mix: Vec<(String, u32)>,
    /// Inclusive bounds on template length in segments.
    pub min_depth: usize,
    pub max_depth: usize,
    /// Chance that an endpoint gets a sibling on the same method and
    /// template that differs in request shape only.
    pub behavior_variants: f64,
    pub host: String,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            endpoint_count: 20,
            requests_per_endpoint: 50,
            id_styles: vec![IdStyle::Numeric, IdStyle::Uuid, IdStyle::Hex],
            method_mix: [("GET", 5), ("POST", 2), ("PUT", 1), ("PATCH", 1), ("DELETE", 1)]
                .iter()
                .map(|&(m, w)| (m.to_string(), w))
                .collect(),
            min_depth: 3,
            max_depth: 5,
            behavior_variants: 0.5,
            host: "https://app.example.test".to_string(),
            seed: 42,
        }
    }
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.endpoint_count == 0 || self.requests_per_endpoint == 0 {
            return bad("endpoint_count and requests_per_endpoint must be at least 1".into());
        }
        if self.id_styles.is_empty() {
            return bad("id_styles must not be empty".into());
        }
        if self.method_mix.iter().map(|(_, w)| *w as u64).sum::<u64>() == 0 {
            return bad("method_mix needs a positive weight".into());
        }
        if let Some((m, _)) = self
            .method_mix
            .iter()
            .find(|(m, _)| !KNOWN_METHODS.contains(&m.to_ascii_uppercase().as_str()))
        {
            return bad(format!("unknown method {m:?} in method_mix"));
        }
        if self.min_depth == 0 || self.min_depth > self.max_depth {
            return bad("depth range must satisfy 1 <= min_depth <= max_depth".into());
        }
        if !(0.0..=1.0).contains(&self.behavior_variants) {
            return bad("behavior_variants must lie in [0, 1]".into());
        }
        Ok(())
    }
}

// No word may contain a static path marker or end in a static file
// extension once a dot is inserted into it.
const RESOURCES: [&str; 24] = [
    "users", "orders", "products", "invoices", "carts", "payments", "tickets", "projects",
    "teams", "comments", "notes", "reports", "sessions", "accounts", "tags", "shipments",
    "reviews", "workflows", "documents", "messages", "notifications", "subscriptions",
    "webhooks", "members",
];
const SUBRESOURCES: [&str; 16] = [
    "items", "history", "line-items", "audit-log", "access-tokens", "export", "summary",
    "preferences", "attachments", "activity", "permissions", "billing-info", "recent",
    "archive", "settings", "owners",
];
const ACTIONS: [&str; 4] = ["archive", "cancel", "resend", "approve"];
/// Share of GET requests carrying an occasional extra parameter.
const RARE_PARAM_RATE: f64 = 0.04;
const SEARCH_WORDS: [&str; 10] = [
    "red", "shoes", "winter", "sale", "blue", "laptop", "bag", "open", "urgent", "draft",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Profile {
    Plain,
    List,
    Search,
    Create,
    Action,
    Update,
}

impl Profile {
    /// Profiles distinct enough in body shape to share a template.
    fn sibling(self) -> Option<Profile> {
        match self {
            Profile::Create => Some(Profile::Action),
            Profile::Action => Some(Profile::Create),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Slot {
    Word(String),
    Id(IdStyle),
}

#[derive(Debug, Clone)]
struct Endpoint {
    method: String,
    slots: Vec<Slot>,
    profile: Profile,
}

fn choose_method(spec: &CorpusSpec, rng: &mut ChaCha8Rng) -> String {
    let total: u32 = spec.method_mix.iter().map(|(_, w)| w).sum();
    let mut x = rng.random_range(0..total);
    for (m, w) in &spec.method_mix {
        if x < *w {
            return m.to_ascii_uppercase();
        }
        x -= w;
    }
    unreachable!("weights sum to total")
}

fn choose_template(spec: &CorpusSpec, rng: &mut ChaCha8Rng) -> Vec<Slot> {
    let depth = rng.random_range(spec.min_depth..=spec.max_depth);
    let version = format!("v{}", rng.random_range(1..=2));
    let mut slots: Vec<Slot> = ["api", version.as_str()]
        .iter()
        .take(depth.saturating_sub(1).min(2))
        .map(|w| Slot::Word(w.to_string()))
        .collect();
    slots.push(Slot::Word(RESOURCES[rng.random_range(0..RESOURCES.len())].to_string()));
    let tail = depth - slots.len();
    let vars = rng.random_range(0..=tail.min(2));
    let mut is_var = vec![false; tail];
    for v in rand::seq::index::sample(rng, tail, vars) {
        is_var[v] = true;
    }
    for var in is_var {
        slots.push(if var {
            Slot::Id(spec.id_styles[rng.random_range(0..spec.id_styles.len())])
        } else {
            Slot::Word(SUBRESOURCES[rng.random_range(0..SUBRESOURCES.len())].to_string())
        });
    }
    slots
}

fn choose_profile(method: &str, slots: &[Slot], rng: &mut ChaCha8Rng) -> Profile {
    let collection = matches!(slots.last(), Some(Slot::Word(_)));
    match method {
        "GET" if collection => match rng.random_range(0..10) {
            0..=4 => Profile::List,
            5..=6 => Profile::Search,
            _ => Profile::Plain,
        },
        "POST" => {
            if rng.random_bool(0.6) {
                Profile::Create
            } else {
                Profile::Action
            }
        }
        "PUT" | "PATCH" => Profile::Update,
        _ => Profile::Plain,
    }
}

/// Template with ids abstracted, used to keep endpoints distinct.
fn signature(method: &str, slots: &[Slot]) -> (String, Vec<Option<String>>) {
    let shape = slots
        .iter()
        .map(|s| match s {
            Slot::Word(w) => Some(w.clone()),
            Slot::Id(_) => None,
        })
        .collect();
    (method.to_string(), shape)
}

fn draw_endpoints(spec: &CorpusSpec, rng: &mut ChaCha8Rng) -> Vec<Endpoint> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut attempts = 0;
    while out.len() < spec.endpoint_count {
        attempts += 1;
        let method = choose_method(spec, rng);
        let slots = choose_template(spec, rng);
        // Small vocabularies can run out of distinct shapes; allow repeats
        // rather than loop forever.
        if !seen.insert(signature(&method, &slots)) && attempts < 10_000 {
            continue;
        }
        let profile = choose_profile(&method, &slots, rng);
        let sibling = profile.sibling().filter(|_| rng.random_bool(spec.behavior_variants));
        out.push(Endpoint {
            method: method.clone(),
            slots: slots.clone(),
            profile,
        });
        if let Some(p) = sibling {
            if out.len() < spec.endpoint_count {
                out.push(Endpoint {
                    method,
                    slots,
                    profile: p,
                });
            }
        }
    }
    out
}

fn render_id(style: IdStyle, rng: &mut ChaCha8Rng) -> String {
    match style {
        IdStyle::Numeric => rng.random_range(1..100_000u32).to_string(),
        IdStyle::Uuid => {
            let x: u128 = rng.random();
            let h = format!("{x:032x}");
            format!("{}-{}-{}-{}-{}", &h[..8], &h[8..12], &h[12..16], &h[16..20], &h[20..])
        }
        IdStyle::Hex => {
            let (a, b): (u64, u32) = (rng.random(), rng.random());
            format!("{a:016x}{b:08x}")
        }
    }
}

fn body_size(rng: &mut ChaCha8Rng, median: f64, sigma: f64) -> u64 {
    let dist = LogNormal::new(median.ln(), sigma).expect("finite parameters");
    dist.sample(rng).round().max(2.0) as u64
}

fn request(ep: &Endpoint, spec: &CorpusSpec, rng: &mut ChaCha8Rng) -> HttpRecord {
    let mut path = String::new();
    for s in &ep.slots {
        path.push('/');
        match s {
            Slot::Word(w) => path.push_str(w),
            Slot::Id(style) => path.push_str(&render_id(*style, rng)),
        }
    }
    let mut query: Vec<String> = Vec::new();
    match ep.profile {
        Profile::List => {
            query.push(format!("page={}", rng.random_range(1..=20)));
            if rng.random_bool(0.7) {
                query.push(format!("limit={}", [10, 20, 50][rng.random_range(0..3)]));
            }
            if rng.random_bool(0.5) {
                query.push(format!("sort={}", ["name", "-created_at", "price"][rng.random_range(0..3)]));
            }
        }
        Profile::Search => {
            let words: Vec<&str> = (0..rng.random_range(1..=3))
                .map(|_| SEARCH_WORDS[rng.random_range(0..SEARCH_WORDS.len())])
                .collect();
            query.push(format!("q={}", words.join(" ")));
        }
        Profile::Action => {
            query.push(format!("action={}", ACTIONS[rng.random_range(0..ACTIONS.len())]));
        }
        _ => {}
    }
    if ep.method == "GET" && rng.random_bool(RARE_PARAM_RATE) {
        query.push(format!("expand={}", ["owner", "details"][rng.random_range(0..2)]));
    }
    let mut url = format!("{}{}", spec.host, path);
    if !query.is_empty() {
        url.push('?');
        url.push_str(&query.join("&"));
    }
    let record = HttpRecord::new(0, &ep.method, &url).with_content_type("application/json");
    match ep.profile {
        Profile::Create => {
            let fields = rng.random_range(6..=12);
            let depth = rng.random_range(2..=3);
            record.with_body(body_size(rng, 60.0 * fields as f64, 0.3), fields, depth)
        }
        Profile::Update => {
            let fields = rng.random_range(2..=5);
            let depth = rng.random_range(1..=2);
            record.with_body(body_size(rng, 40.0 * fields as f64, 0.3), fields, depth)
        }
        _ => record,
    }
}

/// Generate a labeled corpus. Records of all endpoints are interleaved in
/// seeded order and numbered from 0; labels are `E00`, `E01`, ... in
/// endpoint creation order.
pub fn synth_corpus(spec: &CorpusSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = seed::rng(spec.seed, "corpus");
    let endpoints = draw_endpoints(spec, &mut rng);
    let mut records = Vec::with_capacity(endpoints.len() * spec.requests_per_endpoint);
    for (e, ep) in endpoints.iter().enumerate() {
        let label = format!("E{e:02}");
        for _ in 0..spec.requests_per_endpoint {
            records.push(request(ep, spec, &mut rng).with_label(&label));
        }
    }
    records.shuffle(&mut rng);
    for (i, r) in records.iter_mut().enumerate() {
        r.id = i as u64;
    }
    Ok(Dataset::new("synthetic", records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::write_dataset;
    use crate::normalize::normalize;

    #[test]
    fn minimal_spec() {
        let spec = CorpusSpec {
            endpoint_count: 1,
            requests_per_endpoint: 3,
            id_styles: vec![IdStyle::Numeric],
            seed: 1,
            ..CorpusSpec::default()
        };
        let d = synth_corpus(&spec).unwrap();
        assert_eq!(d.len(), 3);
        let labels: HashSet<_> = d.records.iter().map(|r| r.label.clone()).collect();
        assert_eq!(labels.len(), 1);
        let segs: Vec<Vec<String>> = d.records.iter().map(|r| normalize(r).segments).collect();
        for s in &segs[1..] {
            assert_eq!(s.len(), segs[0].len());
            for (a, b) in s.iter().zip(&segs[0]) {
                assert!(a == b || a.bytes().all(|c| c.is_ascii_digit()));
            }
        }
    }

    #[test]
    fn default_counts() {
        let d = synth_corpus(&CorpusSpec::default()).unwrap();
        assert_eq!(d.len(), 1000);
        let labels: HashSet<_> = d.records.iter().filter_map(|r| r.label.clone()).collect();
        assert_eq!(labels.len(), 20);
        assert!(d.records.iter().enumerate().all(|(i, r)| r.id == i as u64));
    }

    #[test]
    fn deterministic() {
        let a = write_dataset(&synth_corpus(&CorpusSpec::default()).unwrap());
        let b = write_dataset(&synth_corpus(&CorpusSpec::default()).unwrap());
        assert_eq!(a, b);
        let other = CorpusSpec {
            seed: 7,
            ..CorpusSpec::default()
        };
        assert_ne!(a, write_dataset(&synth_corpus(&other).unwrap()));
    }

    #[test]
    fn validation() {
        let mut s = CorpusSpec::default();
        s.endpoint_count = 0;
        assert!(s.validate().is_err());
        let mut s = CorpusSpec::default();
        s.method_mix = vec![("FETCH".into(), 1)];
        assert!(s.validate().is_err());
        let mut s = CorpusSpec::default();
        s.min_depth = 6;
        assert!(s.validate().is_err());
    }
}

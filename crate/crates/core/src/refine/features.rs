//! Request features used to separate behaviors within one template group.

use crate::ingest::is_structured_content_type;
use crate::normalize::NormalizedRequest;
use crate::record::HttpRecord;
use crate::template::fold;

pub const FEATURE_COUNT: usize = 10;

const API_KEYWORDS: [&str; 6] = ["api", "v1", "v2", "v3", "rest", "graphql"];
const COMMON_KEYS: [&str; 7] = ["page", "limit", "offset", "sort", "filter", "q", "id"];

/// Ten non-negative components, in order: path depth, API keyword count,
/// query parameter count, common key count, has-query flag, `ln(1 + body
/// size)`, body field count, body nesting depth, write-method flag,
/// structured-payload flag.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FeatureVector(pub [f64; FEATURE_COUNT]);

impl FeatureVector {
    pub fn path_depth(&self) -> f64 {
        self.0[0]
    }
    pub fn api_keyword_count(&self) -> f64 {
        self.0[1]
    }
    pub fn query_param_count(&self) -> f64 {
        self.0[2]
    }
    pub fn common_key_count(&self) -> f64 {
        self.0[3]
    }
    pub fn has_query(&self) -> f64 {
        self.0[4]
    }
    pub fn body_size_log(&self) -> f64 {
        self.0[5]
    }
    pub fn body_field_count(&self) -> f64 {
        self.0[6]
    }
    pub fn body_nesting_depth(&self) -> f64 {
        self.0[7]
    }
    pub fn method_write(&self) -> f64 {
        self.0[8]
    }
    pub fn has_structured_payload(&self) -> f64 {
        self.0[9]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Features of a normalized request and the record it came from.
///
/// Keywords are matched on delimiter-folded segments. Query parameters are
/// counted once per distinct name, so a repeated key does not change the
/// vector.
pub fn extract_features(nr: &NormalizedRequest, record: &HttpRecord) -> FeatureVector {
    let mut v = path_features(nr);
    v.0[5] = (record.body_size as f64).ln_1p();
    v.0[6] = record.body_field_count.unwrap_or(0) as f64;
    v.0[7] = record.body_nesting_depth.unwrap_or(0) as f64;
    v.0[9] = if is_structured_content_type(record.content_type.as_deref()) {
        1.0
    } else {
        0.0
    };
    v
}

/// The components that can be read off the normalized request alone; body
/// components are zero.
pub fn path_features(nr: &NormalizedRequest) -> FeatureVector {
    let mut keys: Vec<&str> = nr.raw_query_keys.iter().map(String::as_str).collect();
    keys.sort_unstable();
    keys.dedup();
    let flag = |b: bool| if b { 1.0 } else { 0.0 };
    let mut v = [0.0; FEATURE_COUNT];
    v[0] = nr.depth() as f64;
    v[1] = nr
        .segments
        .iter()
        .filter(|s| API_KEYWORDS.contains(&fold(s).as_str()))
        .count() as f64;
    v[2] = keys.len() as f64;
    v[3] = keys.iter().filter(|k| COMMON_KEYS.contains(k)).count() as f64;
    v[4] = flag(!keys.is_empty());
    v[8] = flag(matches!(nr.method.as_str(), "POST" | "PUT" | "PATCH" | "DELETE"));
    FeatureVector(v)
}

/// Min-max scale each column into `[0, 1]`; constant columns become 0.
pub fn min_max_scale(features: &[FeatureVector]) -> Vec<FeatureVector> {
    let mut lo = [f64::INFINITY; FEATURE_COUNT];
    let mut hi = [f64::NEG_INFINITY; FEATURE_COUNT];
    for f in features {
        for (j, &x) in f.0.iter().enumerate() {
            lo[j] = lo[j].min(x);
            hi[j] = hi[j].max(x);
        }
    }
    features
        .iter()
        .map(|f| {
            let mut out = [0.0; FEATURE_COUNT];
            for j in 0..FEATURE_COUNT {
                let range = hi[j] - lo[j];
                if range > 0.0 {
                    out[j] = (f.0[j] - lo[j]) / range;
                }
            }
            FeatureVector(out)
        })
        .collect()
}

//! Background requests unrelated to the application's API.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::record::HttpRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum InterfereCategory {
    StaticAsset,
    ImageResource,
    FontAndMedia,
    HealthCheck,
    Metrics,
    FrameworkHandshake,
    HotReload,
    ThirdPartyAnalytics,
    CdnProxyTrace,
}

const STEMS: [&str; 8] = ["app", "main", "vendor", "runtime", "logo", "banner", "theme", "intro"];

impl InterfereCategory {
    pub const ALL: [InterfereCategory; 9] = [
        InterfereCategory::StaticAsset,
        InterfereCategory::ImageResource,
        InterfereCategory::FontAndMedia,
        InterfereCategory::HealthCheck,
        InterfereCategory::Metrics,
        InterfereCategory::FrameworkHandshake,
        InterfereCategory::HotReload,
        InterfereCategory::ThirdPartyAnalytics,
        InterfereCategory::CdnProxyTrace,
    ];

    pub fn name(self) -> &'static str {
        match self {
            InterfereCategory::StaticAsset => "Static Asset Request",
            InterfereCategory::ImageResource => "Image Resource Request",
            InterfereCategory::FontAndMedia => "Font and Media Request",
            InterfereCategory::HealthCheck => "Health Check Endpoint",
            InterfereCategory::Metrics => "Metrics Endpoint",
            InterfereCategory::FrameworkHandshake => "Framework Handshake Request",
            InterfereCategory::HotReload => "Hot Reload / Dev Channel",
            InterfereCategory::ThirdPartyAnalytics => "Third-party Analytics Call",
            InterfereCategory::CdnProxyTrace => "CDN / Proxy Trace",
        }
    }

    /// The two path families of the category. Asset families are
    /// `(directory, extension, content type)`; the others are fixed paths.
    fn families(self) -> [Family; 2] {
        use Family::{Asset, Fixed};
        match self {
            InterfereCategory::StaticAsset => [
                Asset("/static/", "js", "application/javascript"),
                Asset("/assets/", "css", "text/css"),
            ],
            InterfereCategory::ImageResource => [
                Asset("/images/", "png", "image/png"),
                Asset("/img/", "jpg", "image/jpeg"),
            ],
            InterfereCategory::FontAndMedia => [
                Asset("/fonts/", "woff2", "font/woff2"),
                Asset("/media/", "mp4", "video/mp4"),
            ],
            InterfereCategory::HealthCheck => [Fixed("/health"), Fixed("/status")],
            InterfereCategory::Metrics => [Fixed("/metrics"), Fixed("/actuator/metrics")],
            InterfereCategory::FrameworkHandshake => [Fixed("/sockjs/info"), Fixed("/ws/connect")],
            InterfereCategory::HotReload => [Fixed("/webpack-hmr"), Fixed("/vite/client")],
            InterfereCategory::ThirdPartyAnalytics => [Fixed("/analytics/collect"), Fixed("/track/event")],
            InterfereCategory::CdnProxyTrace => [Fixed("/cdn-cgi/trace"), Fixed("/proxy/ping")],
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Family {
    Asset(&'static str, &'static str, &'static str),
    Fixed(&'static str),
}

/// A fresh unlabeled `GET` from the category. Assets carry the content type
/// of the file they name; the other categories are plain browser or probe
/// requests without one. The id is 0; callers assign their own.
pub fn interfere_sample(category: InterfereCategory, rng: &mut ChaCha8Rng) -> HttpRecord {
    let family = category.families()[rng.random_range(0..2)];
    match family {
        Family::Asset(dir, ext, ct) => {
            let stem = STEMS[rng.random_range(0..STEMS.len())];
            let hash: u32 = rng.random();
            HttpRecord::new(0, "GET", &format!("{dir}{stem}.{hash:08x}.{ext}")).with_content_type(ct)
        }
        Family::Fixed(path) => HttpRecord::new(0, "GET", path),
    }
}

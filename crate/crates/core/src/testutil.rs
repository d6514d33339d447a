use chrono::{Duration, TimeZone, Utc};

use crate::corpus::Article;

/// Article published `hours` after 2020-01-01 00:00 UTC.
pub(crate) fn article(id: &str, source: &str, body: &str, hours: i64) -> Article {
    Article {
        id: id.into(),
        source: source.into(),
        title: String::new(),
        body: body.into(),
        published_at: Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap() + Duration::hours(hours),
        url: None,
        raw_html: None,
        out_links: vec![],
    }
}

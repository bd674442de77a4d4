//! Per-kind payload grammar shared by grounding, parsing and equivalence checks.

use super::{ActionError, ActionKind, Platform};

/// Terminal status carried by a `stop` action.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StopStatus {
    Completed,
    Infeasible,
    Answer(String),
}

impl StopStatus {
    pub fn from_value(raw: &str) -> Self {
        let t = raw.trim();
        match t.to_ascii_lowercase().as_str() {
            "completed" | "complete" | "success" | "successful" => StopStatus::Completed,
            "infeasible" => StopStatus::Infeasible,
            _ => StopStatus::Answer(t.to_string()),
        }
    }

    pub fn canonical(&self) -> &str {
        match self {
            StopStatus::Completed => "completed",
            StopStatus::Infeasible => "infeasible",
            StopStatus::Answer(a) => a,
        }
    }
}

/// A payload after per-kind normalization.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NormalizedValue {
    pub value: Option<String>,
    pub tab_index: Option<u32>,
    pub url: Option<String>,
}

pub const MOBILE_SCROLL_DIRECTIONS: [&str; 4] = ["up", "down", "left", "right"];
pub const WEB_SCROLL_DIRECTIONS: [&str; 2] = ["up", "down"];

fn malformed(kind: ActionKind, value: &str, expected: &str) -> ActionError {
    ActionError::MalformedValue {
        kind,
        value: value.to_string(),
        expected: expected.to_string(),
    }
}

/// Strips `key=` and surrounding quotes, e.g. `app_name="Chrome"` -> `Chrome`.
fn strip_assignment<'a>(raw: &'a str, key: &str) -> &'a str {
    let t = raw.trim();
    let rest = match t.get(..key.len()) {
        Some(head) if head.eq_ignore_ascii_case(key) => t[key.len()..].trim_start(),
        _ => return unquote(t),
    };
    match rest.strip_prefix('=') {
        Some(v) => unquote(v.trim()),
        None => unquote(t),
    }
}

fn unquote(s: &str) -> &str {
    for q in ['"', '\''] {
        if s.len() >= 2 && s.starts_with(q) && s.ends_with(q) {
            return &s[1..s.len() - 1];
        }
    }
    s
}

/// Parses a wait payload (`seconds="5s"`, `5s`, `5`) into seconds.
pub fn parse_wait_seconds(raw: &str) -> Option<f64> {
    let inner = strip_assignment(raw, "seconds").trim();
    let num = inner.strip_suffix(['s', 'S']).unwrap_or(inner).trim();
    let secs: f64 = num.parse().ok()?;
    (secs.is_finite() && secs >= 0.0).then_some(secs)
}

pub fn format_seconds(secs: f64) -> String {
    format!("{secs}")
}

/// Normalizes a raw payload for `kind`. Kinds that take no payload return an
/// empty value regardless of input.
pub fn normalize_value(
    kind: ActionKind,
    platform: Platform,
    raw: Option<&str>,
) -> Result<NormalizedValue, ActionError> {
    if !kind.requires_value() {
        return Ok(NormalizedValue::default());
    }
    let raw = raw.unwrap_or("");
    if raw.contains(['\n', '\r']) {
        return Err(malformed(kind, raw, "a single-line value"));
    }
    let mut out = NormalizedValue::default();
    match kind {
        ActionKind::Type => {
            if raw.is_empty() {
                return Err(malformed(kind, raw, "text to type"));
            }
            out.value = Some(raw.to_string());
        }
        ActionKind::Scroll => {
            let dir = raw.trim().trim_matches(['"', '\'']).to_ascii_lowercase();
            let allowed: &[&str] = match platform {
                Platform::Mobile => &MOBILE_SCROLL_DIRECTIONS,
                Platform::Web => &WEB_SCROLL_DIRECTIONS,
            };
            if !allowed.contains(&dir.as_str()) {
                return Err(malformed(
                    kind,
                    raw,
                    &format!("scroll direction ({})", allowed.join("/")),
                ));
            }
            out.value = Some(dir);
        }
        ActionKind::OpenApp => {
            let name = strip_assignment(raw, "app_name").trim();
            if name.is_empty() {
                return Err(malformed(kind, raw, "an app name"));
            }
            out.value = Some(name.to_string());
        }
        ActionKind::Wait => {
            let secs = parse_wait_seconds(raw).ok_or_else(|| malformed(kind, raw, "seconds=\"Ns\""))?;
            out.value = Some(format_seconds(secs));
        }
        ActionKind::Stop => {
            if raw.trim().is_empty() {
                return Err(malformed(kind, raw, "completed, infeasible or an answer"));
            }
            out.value = Some(StopStatus::from_value(raw).canonical().to_string());
        }
        ActionKind::Press => {
            let keys = raw.trim();
            if keys.is_empty() {
                return Err(malformed(kind, raw, "a key combination"));
            }
            out.value = Some(keys.to_string());
        }
        ActionKind::Goto => {
            let url = unquote(raw.trim()).trim();
            if url.is_empty() {
                return Err(malformed(kind, raw, "a url"));
            }
            out.url = Some(url.to_string());
        }
        ActionKind::PageFocus => {
            let idx = strip_assignment(raw, "tab_index")
                .trim()
                .parse::<u32>()
                .map_err(|_| malformed(kind, raw, "a non-negative tab index"))?;
            out.tab_index = Some(idx);
        }
        _ => unreachable!("kind {kind} takes no value"),
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wait_forms() {
        assert_eq!(parse_wait_seconds("seconds=\"5s\""), Some(5.0));
        assert_eq!(parse_wait_seconds("5s"), Some(5.0));
        assert_eq!(parse_wait_seconds("2.5"), Some(2.5));
        assert_eq!(parse_wait_seconds("soon"), None);
        assert_eq!(parse_wait_seconds("-1"), None);
    }

    #[test]
    fn stop_synonyms_fold() {
        for w in ["success", "successful", "Completed", " completed "] {
            assert_eq!(StopStatus::from_value(w), StopStatus::Completed);
        }
        assert_eq!(StopStatus::from_value("infeasible"), StopStatus::Infeasible);
        assert_eq!(StopStatus::from_value(" 42 "), StopStatus::Answer("42".into()));
    }

    #[test]
    fn open_app_assignment_form() {
        let v = normalize_value(ActionKind::OpenApp, Platform::Mobile, Some("app_name=\"Chrome\"")).unwrap();
        assert_eq!(v.value.as_deref(), Some("Chrome"));
        let v = normalize_value(ActionKind::OpenApp, Platform::Mobile, Some("Settings")).unwrap();
        assert_eq!(v.value.as_deref(), Some("Settings"));
    }

    #[test]
    fn web_scroll_rejects_sideways() {
        assert!(normalize_value(ActionKind::Scroll, Platform::Web, Some("left")).is_err());
        assert!(normalize_value(ActionKind::Scroll, Platform::Mobile, Some("Left")).is_ok());
    }

    #[test]
    fn page_focus_index() {
        let v = normalize_value(ActionKind::PageFocus, Platform::Web, Some(" 2 ")).unwrap();
        assert_eq!(v.tab_index, Some(2));
        assert!(normalize_value(ActionKind::PageFocus, Platform::Web, Some("two")).is_err());
    }
}

use std::fmt;

use serde::{Deserialize, Serialize};

use super::value::{format_seconds, normalize_value, parse_wait_seconds};
use super::{ActionError, ActionKind, Platform, TargetRule};

/// Largest per-axis error introduced by the 3-digit text form.
pub const COORD_TEXT_TOLERANCE: f64 = 5e-4;

/// A screen position normalized to the unit square.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCoordinate")]
pub struct Coordinate {
    x: f64,
    y: f64,
}

#[derive(Deserialize)]
struct RawCoordinate {
    x: f64,
    y: f64,
}

impl TryFrom<RawCoordinate> for Coordinate {
    type Error = ActionError;

    fn try_from(raw: RawCoordinate) -> Result<Self, Self::Error> {
        Coordinate::new(raw.x, raw.y)
    }
}

fn in_unit(v: f64) -> bool {
    (0.0..=1.0).contains(&v)
}

impl Coordinate {
    pub fn new(x: f64, y: f64) -> Result<Self, ActionError> {
        if in_unit(x) && in_unit(y) {
            Ok(Self { x, y })
        } else {
            Err(ActionError::InvalidAction(format!(
                "coordinate ({x}, {y}) outside [0, 1]"
            )))
        }
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    /// Pixel position -> normalized coordinate, clamped to the image.
    pub fn from_pixels(px: f64, py: f64, width: f64, height: f64) -> Result<Self, ActionError> {
        if width <= 0.0 || height <= 0.0 {
            return Err(ActionError::InvalidAction("empty image size".into()));
        }
        Coordinate::new(px / width, py / height)
    }

    pub fn to_pixels(&self, width: u32, height: u32) -> (u32, u32) {
        let px = (self.x * width as f64).floor().min(width.saturating_sub(1) as f64);
        let py = (self.y * height as f64).floor().min(height.saturating_sub(1) as f64);
        (px as u32, py as u32)
    }

    pub fn distance(&self, other: &Coordinate) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn approx_eq(&self, other: &Coordinate, tol: f64) -> bool {
        (self.x - other.x).abs() <= tol && (self.y - other.y).abs() <= tol
    }
}

/// At most three decimals, trailing zeros dropped, at least one digit after
/// the point.
pub fn format_coord_component(v: f64) -> String {
    let mut s = format!("{v:.3}");
    while s.ends_with('0') && !s.ends_with(".0") {
        s.pop();
    }
    s
}

/// An executable, coordinate-level action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GroundedActionRecord")]
pub struct GroundedAction {
    pub platform: Platform,
    pub kind: ActionKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coord: Option<Coordinate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tab_index: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
}

/// Unvalidated JSON shape of a grounded action.
#[derive(Deserialize)]
struct GroundedActionRecord {
    platform: Platform,
    kind: ActionKind,
    #[serde(default)]
    coord: Option<Coordinate>,
    #[serde(default)]
    value: Option<String>,
    #[serde(default)]
    tab_index: Option<u32>,
    #[serde(default)]
    url: Option<String>,
}

impl TryFrom<GroundedActionRecord> for GroundedAction {
    type Error = ActionError;

    fn try_from(r: GroundedActionRecord) -> Result<Self, Self::Error> {
        let raw_value = match r.kind {
            ActionKind::PageFocus => r.tab_index.map(|i| i.to_string()).or(r.value),
            ActionKind::Goto => r.url.or(r.value),
            _ => r.value,
        };
        GroundedAction::new(r.platform, r.kind, r.coord, raw_value.as_deref())
    }
}

impl GroundedAction {
    /// Builds and validates an action, normalizing the raw payload for its kind.
    pub fn new(
        platform: Platform,
        kind: ActionKind,
        coord: Option<Coordinate>,
        raw_value: Option<&str>,
    ) -> Result<Self, ActionError> {
        if !kind.is_legal(platform) {
            return Err(ActionError::IllegalKindForPlatform { kind, platform });
        }
        let norm = normalize_value(kind, platform, raw_value)?;
        let a = GroundedAction {
            platform,
            kind,
            coord,
            value: norm.value,
            tab_index: norm.tab_index,
            url: norm.url,
        };
        a.validate()?;
        Ok(a)
    }

    pub fn click(platform: Platform, coord: Coordinate) -> Self {
        GroundedAction {
            platform,
            kind: ActionKind::Click,
            coord: Some(coord),
            value: None,
            tab_index: None,
            url: None,
        }
    }

    pub fn stop(platform: Platform, value: &str) -> Result<Self, ActionError> {
        GroundedAction::new(platform, ActionKind::Stop, None, Some(value))
    }

    /// Checks every structural invariant of the action.
    pub fn validate(&self) -> Result<(), ActionError> {
        let kind = self.kind;
        if !kind.is_legal(self.platform) {
            return Err(ActionError::IllegalKindForPlatform {
                kind,
                platform: self.platform,
            });
        }
        match (kind.target_rule(self.platform), self.coord) {
            (TargetRule::Required, None) => return Err(ActionError::MissingCoordinate(kind)),
            (TargetRule::None, Some(_)) => {
                return Err(ActionError::InvalidAction(format!(
                    "{kind} on {} takes no coordinate",
                    self.platform
                )))
            }
            _ => {}
        }
        if let Some(c) = self.coord {
            if !(in_unit(c.x) && in_unit(c.y)) {
                return Err(ActionError::InvalidAction("coordinate outside [0, 1]".into()));
            }
        }
        let wants_value = kind.requires_value() && !matches!(kind, ActionKind::PageFocus | ActionKind::Goto);
        if wants_value != self.value.is_some() {
            return Err(ActionError::InvalidAction(if wants_value {
                format!("{kind} requires a value")
            } else {
                format!("{kind} takes no value")
            }));
        }
        if (kind == ActionKind::PageFocus) != self.tab_index.is_some() {
            return Err(ActionError::InvalidAction(
                "tab_index is required by page_focus only".into(),
            ));
        }
        if (kind == ActionKind::Goto) != self.url.is_some() {
            return Err(ActionError::InvalidAction("url is required by goto only".into()));
        }
        for text in [&self.value, &self.url].into_iter().flatten() {
            if text.contains(['\n', '\r']) {
                return Err(ActionError::InvalidAction("values must be single-line".into()));
            }
        }
        if kind == ActionKind::Wait {
            let v = self.value.as_deref().unwrap_or_default();
            if parse_wait_seconds(v).is_none() {
                return Err(ActionError::MalformedValue {
                    kind,
                    value: v.to_string(),
                    expected: "seconds".into(),
                });
            }
        }
        Ok(())
    }

    /// Structural equality with coordinates compared per axis within `tol`.
    pub fn approx_eq(&self, other: &GroundedAction, tol: f64) -> bool {
        let coords = match (self.coord, other.coord) {
            (Some(a), Some(b)) => a.approx_eq(&b, tol),
            (None, None) => true,
            _ => false,
        };
        coords
            && self.platform == other.platform
            && self.kind == other.kind
            && self.value == other.value
            && self.tab_index == other.tab_index
            && self.url == other.url
    }

    /// Canonical single-line text form.
    pub fn serialize(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for GroundedAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.kind.as_str())?;
        if let Some(c) = self.coord {
            write!(
                f,
                " [[{}] [{}]]",
                format_coord_component(c.x),
                format_coord_component(c.y)
            )?;
        }
        match self.kind {
            ActionKind::Wait => {
                let secs = self.value.as_deref().and_then(parse_wait_seconds).unwrap_or(0.0);
                write!(f, " [seconds=\"{}s\"]", format_seconds(secs))?;
            }
            ActionKind::PageFocus => {
                if let Some(i) = self.tab_index {
                    write!(f, " [{i}]")?;
                }
            }
            ActionKind::Goto => {
                if let Some(u) = &self.url {
                    write!(f, " [{u}]")?;
                }
            }
            _ => {
                if let Some(v) = &self.value {
                    write!(f, " [{v}]")?;
                }
            }
        }
        Ok(())
    }
}

/// Canonical text form of a grounded action.
pub fn serialize_grounded(a: &GroundedAction) -> Result<String, ActionError> {
    a.validate()?;
    Ok(a.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64, y: f64) -> Coordinate {
        Coordinate::new(x, y).unwrap()
    }

    #[test]
    fn coordinate_formatting() {
        assert_eq!(format_coord_component(0.12), "0.12");
        assert_eq!(format_coord_component(0.5), "0.5");
        assert_eq!(format_coord_component(0.0), "0.0");
        assert_eq!(format_coord_component(1.0), "1.0");
        assert_eq!(format_coord_component(0.12345), "0.123");
        assert_eq!(format_coord_component(0.9996), "1.0");
    }

    #[test]
    fn canonical_forms() {
        let click = GroundedAction::click(Platform::Web, c(0.12, 0.07));
        assert_eq!(serialize_grounded(&click).unwrap(), "click [[0.12] [0.07]]");

        let ty = GroundedAction::new(Platform::Web, ActionKind::Type, Some(c(0.5, 0.33)), Some("hello")).unwrap();
        assert_eq!(ty.serialize(), "type [[0.5] [0.33]] [hello]");

        let web_scroll = GroundedAction::new(Platform::Web, ActionKind::Scroll, None, Some("down")).unwrap();
        assert_eq!(web_scroll.serialize(), "scroll [down]");

        let mob_scroll =
            GroundedAction::new(Platform::Mobile, ActionKind::Scroll, Some(c(0.5, 0.5)), Some("up")).unwrap();
        assert_eq!(mob_scroll.serialize(), "scroll [[0.5] [0.5]] [up]");

        let stop = GroundedAction::stop(Platform::Web, "completed").unwrap();
        assert_eq!(stop.serialize(), "stop [completed]");

        let app = GroundedAction::new(Platform::Mobile, ActionKind::OpenApp, None, Some("Chrome")).unwrap();
        assert_eq!(app.serialize(), "open_app [Chrome]");

        let wait = GroundedAction::new(Platform::Mobile, ActionKind::Wait, None, Some("seconds=\"5s\"")).unwrap();
        assert_eq!(wait.serialize(), "wait [seconds=\"5s\"]");

        let focus = GroundedAction::new(Platform::Web, ActionKind::PageFocus, None, Some("2")).unwrap();
        assert_eq!(focus.serialize(), "page_focus [2]");
    }

    #[test]
    fn missing_coordinate_is_rejected() {
        let err = GroundedAction::new(Platform::Web, ActionKind::Click, None, None).unwrap_err();
        assert!(matches!(err, ActionError::MissingCoordinate(ActionKind::Click)));
        let err = GroundedAction::new(Platform::Web, ActionKind::Type, Some(c(0.1, 0.1)), None).unwrap_err();
        assert!(matches!(err, ActionError::MalformedValue { .. }));
    }

    #[test]
    fn web_scroll_takes_no_coordinate() {
        let err = GroundedAction::new(Platform::Web, ActionKind::Scroll, Some(c(0.5, 0.5)), Some("down"));
        assert!(err.is_err());
    }

    #[test]
    fn json_form() {
        let a = GroundedAction::new(Platform::Web, ActionKind::Goto, None, Some("http://host/a")).unwrap();
        let j = serde_json::to_string(&a).unwrap();
        assert_eq!(j, r#"{"platform":"web","kind":"goto","url":"http://host/a"}"#);
        let back: GroundedAction = serde_json::from_str(&j).unwrap();
        assert_eq!(back, a);

        let bad = r#"{"platform":"web","kind":"click"}"#;
        assert!(serde_json::from_str::<GroundedAction>(bad).is_err());
        let alias = r#"{"platform":"web","kind":"tab_focus","tab_index":1}"#;
        let f: GroundedAction = serde_json::from_str(alias).unwrap();
        assert_eq!(f.kind, ActionKind::PageFocus);
    }

    #[test]
    fn coordinate_bounds() {
        assert!(Coordinate::new(1.2, 0.5).is_err());
        assert!(Coordinate::new(0.0, 1.0).is_ok());
        assert!(Coordinate::new(f64::NAN, 0.5).is_err());
        let p = Coordinate::from_pixels(120.0, 70.0, 1000.0, 1000.0).unwrap();
        assert_eq!((p.x(), p.y()), (0.12, 0.07));
    }
}

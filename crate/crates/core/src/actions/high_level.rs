use serde::{Deserialize, Serialize};

use super::value::normalize_value;
use super::{ActionError, ActionKind, Coordinate, GroundedAction, Platform, TargetRule};

pub const MAX_ELEMENT_DESCRIPTION_CHARS: usize = 200;

/// The planner's decision: which element, which verb, which payload.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HighLevelAction {
    pub element_description: String,
    pub kind: ActionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
}

impl HighLevelAction {
    /// Trims the description, drops payloads the kind does not take and
    /// validates against the union of both action spaces.
    pub fn new(
        element_description: impl Into<String>,
        kind: ActionKind,
        value: Option<String>,
    ) -> Result<Self, ActionError> {
        let element_description = element_description.into().trim().to_string();
        let value = if kind.requires_value() {
            value.filter(|v| !v.trim().is_empty())
        } else {
            None
        };
        let a = HighLevelAction {
            element_description,
            kind,
            value,
        };
        a.validate(None)?;
        Ok(a)
    }

    /// Whether this action must be grounded to a coordinate on `platform`.
    pub fn needs_target(&self, platform: Platform) -> bool {
        match self.kind.target_rule(platform) {
            TargetRule::Required => true,
            TargetRule::Optional => !self.element_description.is_empty(),
            TargetRule::None => false,
        }
    }

    /// Validates the action; with a platform also checks kind legality there.
    pub fn validate(&self, platform: Option<Platform>) -> Result<(), ActionError> {
        if let Some(p) = platform {
            if !self.kind.is_legal(p) {
                return Err(ActionError::IllegalKindForPlatform {
                    kind: self.kind,
                    platform: p,
                });
            }
        }
        let desc = self.element_description.trim();
        if desc.chars().count() > MAX_ELEMENT_DESCRIPTION_CHARS {
            return Err(ActionError::InvalidAction(format!(
                "element description longer than {MAX_ELEMENT_DESCRIPTION_CHARS} characters"
            )));
        }
        let has_value = self.value.as_deref().is_some_and(|v| !v.trim().is_empty());
        if self.kind.requires_value() != has_value {
            return Err(ActionError::InvalidAction(if has_value {
                format!("{} takes no value", self.kind)
            } else {
                format!("{} requires a value", self.kind)
            }));
        }
        let target = match platform {
            Some(p) => self.kind.target_rule(p) == TargetRule::Required,
            None => Platform::ALL
                .iter()
                .all(|p| self.kind.target_rule(*p) == TargetRule::Required),
        };
        if target && desc.is_empty() {
            return Err(ActionError::InvalidAction(format!(
                "{} needs an element description",
                self.kind
            )));
        }
        Ok(())
    }

    /// One memory entry, e.g. `click 'the search results titled with wikipedia'`.
    pub fn summary(&self) -> String {
        let desc = self.element_description.trim();
        let value = self.value.as_deref().map(str::trim).unwrap_or_default();
        match self.kind {
            ActionKind::Type if desc.is_empty() => format!("type '{value}'"),
            ActionKind::Type => format!("type '{value}' into {}", lower_first(desc)),
            ActionKind::Scroll if desc.is_empty() => format!("scroll {value}"),
            ActionKind::Scroll => format!("scroll {value} on '{desc}'"),
            k if k.requires_value() => format!("{k} '{value}'"),
            k if desc.is_empty() => k.to_string(),
            k => format!("{k} '{desc}'"),
        }
    }
}

fn lower_first(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_lowercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Maps a planner action plus an optional grounded location to an executable action.
pub fn ground(
    hla: &HighLevelAction,
    coord: Option<Coordinate>,
    platform: Platform,
) -> Result<GroundedAction, ActionError> {
    hla.validate(Some(platform))?;
    let needs = hla.needs_target(platform);
    match (needs, coord) {
        (true, None) => return Err(ActionError::MissingCoordinate(hla.kind)),
        (false, Some(_)) => {
            return Err(ActionError::InvalidAction(format!(
                "{} on {platform} takes no coordinate here",
                hla.kind
            )))
        }
        _ => {}
    }
    // surfaces MalformedValue before the structural checks in GroundedAction::new
    normalize_value(hla.kind, platform, hla.value.as_deref())?;
    GroundedAction::new(platform, hla.kind, coord, hla.value.as_deref())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ground_click() {
        let hla = HighLevelAction::new("Issues tab", ActionKind::Click, None).unwrap();
        let c = Coordinate::new(0.12, 0.07).unwrap();
        let g = ground(&hla, Some(c), Platform::Web).unwrap();
        assert_eq!(g.serialize(), "click [[0.12] [0.07]]");
        assert!(matches!(
            ground(&hla, None, Platform::Web),
            Err(ActionError::MissingCoordinate(ActionKind::Click))
        ));
    }

    #[test]
    fn ground_wait() {
        let hla = HighLevelAction::new("", ActionKind::Wait, Some("seconds=\"5s\"".into())).unwrap();
        let g = ground(&hla, None, Platform::Mobile).unwrap();
        assert_eq!(g.value.as_deref(), Some("5"));
        let bad = HighLevelAction::new("", ActionKind::Wait, Some("a while".into())).unwrap();
        assert!(matches!(
            ground(&bad, None, Platform::Mobile),
            Err(ActionError::MalformedValue { .. })
        ));
    }

    #[test]
    fn ground_open_app_and_focus() {
        let hla = HighLevelAction::new("", ActionKind::OpenApp, Some("app_name=\"Chrome\"".into())).unwrap();
        assert_eq!(
            ground(&hla, None, Platform::Mobile).unwrap().serialize(),
            "open_app [Chrome]"
        );
        let hla = HighLevelAction::new("second tab", ActionKind::PageFocus, Some("1".into())).unwrap();
        assert_eq!(ground(&hla, None, Platform::Web).unwrap().tab_index, Some(1));
    }

    #[test]
    fn value_rules() {
        assert!(HighLevelAction::new("box", ActionKind::Type, None).is_err());
        assert!(HighLevelAction::new("", ActionKind::Click, None).is_err());
        let a = HighLevelAction::new("button", ActionKind::Click, Some("ignored".into())).unwrap();
        assert_eq!(a.value, None);
        assert!(HighLevelAction::new("", ActionKind::GoBack, None).is_ok());
        let long = "x".repeat(201);
        assert!(HighLevelAction::new(long, ActionKind::Click, None).is_err());
    }

    #[test]
    fn mobile_scroll_target_optional() {
        let whole = HighLevelAction::new("", ActionKind::Scroll, Some("down".into())).unwrap();
        assert!(!whole.needs_target(Platform::Mobile));
        let list = HighLevelAction::new("the settings list", ActionKind::Scroll, Some("down".into())).unwrap();
        assert!(list.needs_target(Platform::Mobile));
        assert!(!list.needs_target(Platform::Web));
    }

    #[test]
    fn summaries() {
        let a = HighLevelAction::new("the search results titled with wikipedia", ActionKind::Click, None).unwrap();
        assert_eq!(a.summary(), "click 'the search results titled with wikipedia'");
        let t = HighLevelAction::new(
            "the search bar at the top of the page",
            ActionKind::Type,
            Some("GUI Agent".into()),
        )
        .unwrap();
        assert_eq!(
            t.summary(),
            "type 'GUI Agent' into the search bar at the top of the page"
        );
        let s = HighLevelAction::new("", ActionKind::Stop, Some("completed".into())).unwrap();
        assert_eq!(s.summary(), "stop 'completed'");
    }
}

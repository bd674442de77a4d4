use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Device family an action space belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Platform {
    Mobile,
    Web,
}

impl Platform {
    pub const ALL: [Platform; 2] = [Platform::Mobile, Platform::Web];

    pub fn as_str(self) -> &'static str {
        match self {
            Platform::Mobile => "mobile",
            Platform::Web => "web",
        }
    }
}

impl fmt::Display for Platform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Platform {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mobile" | "android" => Ok(Platform::Mobile),
            "web" => Ok(Platform::Web),
            other => Err(format!("unknown platform `{other}`")),
        }
    }
}

/// Every action verb known to either action space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Click,
    Type,
    Scroll,
    GoBack,
    GoHome,
    LongPress,
    Enter,
    OpenApp,
    Wait,
    Stop,
    Clear,
    Hover,
    Press,
    NewTab,
    #[serde(alias = "tab_focus")]
    PageFocus,
    CloseTab,
    Goto,
    GoForward,
}

const MOBILE_KINDS: [ActionKind; 10] = [
    ActionKind::Click,
    ActionKind::Type,
    ActionKind::Scroll,
    ActionKind::GoBack,
    ActionKind::GoHome,
    ActionKind::LongPress,
    ActionKind::Enter,
    ActionKind::OpenApp,
    ActionKind::Wait,
    ActionKind::Stop,
];

const WEB_KINDS: [ActionKind; 13] = [
    ActionKind::Click,
    ActionKind::Type,
    ActionKind::Clear,
    ActionKind::Hover,
    ActionKind::Press,
    ActionKind::Scroll,
    ActionKind::NewTab,
    ActionKind::PageFocus,
    ActionKind::CloseTab,
    ActionKind::Goto,
    ActionKind::GoBack,
    ActionKind::GoForward,
    ActionKind::Stop,
];

/// Whether an action acts on a screen location.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetRule {
    Required,
    Optional,
    None,
}

impl ActionKind {
    pub const ALL: [ActionKind; 18] = [
        ActionKind::Click,
        ActionKind::Type,
        ActionKind::Scroll,
        ActionKind::GoBack,
        ActionKind::GoHome,
        ActionKind::LongPress,
        ActionKind::Enter,
        ActionKind::OpenApp,
        ActionKind::Wait,
        ActionKind::Stop,
        ActionKind::Clear,
        ActionKind::Hover,
        ActionKind::Press,
        ActionKind::NewTab,
        ActionKind::PageFocus,
        ActionKind::CloseTab,
        ActionKind::Goto,
        ActionKind::GoForward,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ActionKind::Click => "click",
            ActionKind::Type => "type",
            ActionKind::Scroll => "scroll",
            ActionKind::GoBack => "go_back",
            ActionKind::GoHome => "go_home",
            ActionKind::LongPress => "long_press",
            ActionKind::Enter => "enter",
            ActionKind::OpenApp => "open_app",
            ActionKind::Wait => "wait",
            ActionKind::Stop => "stop",
            ActionKind::Clear => "clear",
            ActionKind::Hover => "hover",
            ActionKind::Press => "press",
            ActionKind::NewTab => "new_tab",
            ActionKind::PageFocus => "page_focus",
            ActionKind::CloseTab => "close_tab",
            ActionKind::Goto => "goto",
            ActionKind::GoForward => "go_forward",
        }
    }

    pub fn is_legal(self, platform: Platform) -> bool {
        legal_kinds(platform).contains(&self)
    }

    /// Kinds whose action carries a payload (text, direction, app, url, ...).
    pub fn requires_value(self) -> bool {
        matches!(
            self,
            ActionKind::Type
                | ActionKind::Scroll
                | ActionKind::OpenApp
                | ActionKind::Wait
                | ActionKind::Stop
                | ActionKind::Goto
                | ActionKind::Press
                | ActionKind::PageFocus
        )
    }

    pub fn target_rule(self, platform: Platform) -> TargetRule {
        match self {
            ActionKind::Click | ActionKind::Type | ActionKind::LongPress | ActionKind::Hover | ActionKind::Clear => {
                TargetRule::Required
            }
            ActionKind::Scroll if platform == Platform::Mobile => TargetRule::Optional,
            _ => TargetRule::None,
        }
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ActionKind {
    type Err = String;

    /// Case-insensitive; spaces and hyphens count as underscores and
    /// `tab_focus` is folded into `page_focus`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .trim()
            .chars()
            .map(|c| match c {
                ' ' | '-' => '_',
                c => c.to_ascii_lowercase(),
            })
            .collect();
        if norm == "tab_focus" {
            return Ok(ActionKind::PageFocus);
        }
        ActionKind::ALL
            .iter()
            .copied()
            .find(|k| k.as_str() == norm)
            .ok_or_else(|| format!("unknown action kind `{}`", s.trim()))
    }
}

/// The legal action set of a platform, in table order.
pub fn legal_kinds(platform: Platform) -> &'static [ActionKind] {
    match platform {
        Platform::Mobile => &MOBILE_KINDS,
        Platform::Web => &WEB_KINDS,
    }
}

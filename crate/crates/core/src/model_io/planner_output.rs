//! Extraction of the thought and action block from free-form planner text.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::PlannerParseError;
use crate::actions::{ActionKind, HighLevelAction, MAX_ELEMENT_DESCRIPTION_CHARS};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannerOutput {
    pub thought: String,
    pub action: HighLevelAction,
    pub raw: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ParseOptions {
    /// Disables JSON repair and description truncation.
    pub strict: bool,
}

/// Parses planner text with lenient JSON repair.
pub fn parse_planner_output(text: &str) -> Result<PlannerOutput, PlannerParseError> {
    parse_planner_output_with(text, ParseOptions::default())
}

pub fn parse_planner_output_with(text: &str, opts: ParseOptions) -> Result<PlannerOutput, PlannerParseError> {
    if text.trim().is_empty() {
        return Err(PlannerParseError::NoActionBlock);
    }
    let spans = brace_spans(text);
    for &(start, end) in spans.iter().rev() {
        let Some(obj) = parse_object(&text[start..end], opts.strict) else {
            continue;
        };
        let Some(fields) = ActionFields::from_object(&obj) else {
            continue;
        };
        let action = fields.into_action(opts.strict)?;
        return Ok(PlannerOutput {
            thought: clean_thought(&text[..start]),
            action,
            raw: text.to_string(),
        });
    }
    Err(PlannerParseError::NoActionBlock)
}

struct ActionFields {
    description: String,
    action: String,
    value: Option<String>,
}

fn normalize_key(k: &str) -> String {
    k.chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}

fn scalar_text(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        Value::Null => None,
        other => Some(other.to_string()),
    }
}

impl ActionFields {
    fn from_object(obj: &Map<String, Value>) -> Option<Self> {
        let mut description = None;
        let mut action = None;
        let mut value = None;
        for (k, v) in obj {
            match normalize_key(k).as_str() {
                "elementdescription" | "element" => description = scalar_text(v),
                "action" => action = scalar_text(v),
                "value" => value = scalar_text(v),
                _ => {}
            }
        }
        Some(ActionFields {
            description: description.unwrap_or_default(),
            action: action?,
            value,
        })
    }

    fn into_action(self, strict: bool) -> Result<HighLevelAction, PlannerParseError> {
        let kind: ActionKind = self
            .action
            .parse()
            .map_err(|_| PlannerParseError::BadActionKind(self.action.trim().to_string()))?;
        let mut description = self.description.trim().to_string();
        if !strict && description.chars().count() > MAX_ELEMENT_DESCRIPTION_CHARS {
            description = description
                .chars()
                .take(MAX_ELEMENT_DESCRIPTION_CHARS)
                .collect::<String>()
                .trim_end()
                .to_string();
        }
        let value = self.value.map(|v| v.trim().to_string());
        HighLevelAction::new(description, kind, value).map_err(PlannerParseError::InvalidAction)
    }
}

/// Top-level balanced `{...}` spans, scanning quotes inside each candidate.
fn brace_spans(text: &str) -> Vec<(usize, usize)> {
    let bytes = text.as_bytes();
    let mut spans = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'{' {
            if let Some(end) = matching_brace(bytes, i) {
                spans.push((i, end + 1));
                i = end + 1;
                continue;
            }
        }
        i += 1;
    }
    spans
}

fn matching_brace(bytes: &[u8], open: usize) -> Option<usize> {
    let mut depth = 0usize;
    let mut quote: Option<u8> = None;
    let mut i = open;
    while i < bytes.len() {
        let b = bytes[i];
        match quote {
            Some(q) => {
                if b == b'\\' {
                    i += 1;
                } else if b == q {
                    quote = None;
                }
            }
            None => match b {
                b'"' => quote = Some(b'"'),
                // an apostrophe only opens a string where a JSON token may start
                b'\'' if prev_significant(bytes, i).is_some_and(|p| matches!(p, b'{' | b',' | b':' | b'[')) => {
                    quote = Some(b'\'')
                }
                b'{' => depth += 1,
                b'}' => {
                    depth -= 1;
                    if depth == 0 {
                        return Some(i);
                    }
                }
                _ => {}
            },
        }
        i += 1;
    }
    None
}

fn prev_significant(bytes: &[u8], i: usize) -> Option<u8> {
    bytes[..i].iter().rev().copied().find(|b| !b.is_ascii_whitespace())
}

fn parse_object(candidate: &str, strict: bool) -> Option<Map<String, Value>> {
    if let Ok(Value::Object(m)) = serde_json::from_str(candidate) {
        return Some(m);
    }
    if strict {
        return None;
    }
    match serde_json::from_str(&repair_json(candidate)) {
        Ok(Value::Object(m)) => Some(m),
        _ => None,
    }
}

/// Rewrites single-quoted strings as double-quoted, escapes raw control
/// characters inside strings and drops trailing commas.
pub fn repair_json(s: &str) -> String {
    let bytes = s.as_bytes();
    let mut out = String::with_capacity(s.len() + 8);
    let mut quote: Option<char> = None;
    let mut chars = s.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        match quote {
            Some(q) => {
                if c == '\\' {
                    if let Some((_, next)) = chars.next() {
                        if q == '\'' && next == '\'' {
                            out.push('\'');
                        } else {
                            out.push('\\');
                            out.push(next);
                        }
                    }
                } else if c == q {
                    out.push('"');
                    quote = None;
                } else if c == '"' {
                    out.push_str("\\\"");
                } else if c == '\n' {
                    out.push_str("\\n");
                } else if c == '\r' {
                    out.push_str("\\r");
                } else if c == '\t' {
                    out.push_str("\\t");
                } else {
                    out.push(c);
                }
            }
            None => match c {
                '"' => {
                    quote = Some('"');
                    out.push('"');
                }
                '\'' if prev_significant(bytes, i).is_some_and(|p| matches!(p, b'{' | b',' | b':' | b'[')) => {
                    quote = Some('\'');
                    out.push('"');
                }
                ',' => {
                    let rest = &s[i + 1..];
                    let next = rest.trim_start().chars().next();
                    if !matches!(next, Some('}') | Some(']')) {
                        out.push(',');
                    }
                }
                c => out.push(c),
            },
        }
    }
    out
}

fn clean_thought(prefix: &str) -> String {
    let mut t = prefix.trim_end();
    loop {
        let before = t;
        for fence in ["```json", "```JSON", "```"] {
            if let Some(s) = t.strip_suffix(fence) {
                t = s.trim_end();
            }
        }
        if let Some(s) = t.strip_suffix("<high-level action>:") {
            t = s.trim_end();
        }
        if t == before {
            break;
        }
    }
    let t = t.trim_start();
    let t = t.strip_prefix("<thought>:").unwrap_or(t);
    t.trim().to_string()
}

/// The three-field action block of a planner reply.
pub fn action_block(action: &HighLevelAction) -> String {
    let block = serde_json::json!({
        "Element Description": action.element_description,
        "Action": action.kind.as_str(),
        "Value": action.value.clone().unwrap_or_default(),
    });
    serde_json::to_string_pretty(&block).expect("action block serializes")
}

/// Formats a thought and action as planner text; [`parse_planner_output`]
/// reads it back.
pub fn render_planner_reply(thought: &str, action: &HighLevelAction) -> String {
    let block = format!("```json\n{}\n```", action_block(action));
    match thought.trim() {
        "" => block,
        t => format!("{t}\n{block}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOLDEN: &str = r#"<thought>: To find unlabeled issues in the metaseq GitLab repository, click the
"Issues" tab in the main navigation menu, then filter for issues without labels.

<high-level action>:
{
    "Element Description": "Click the Issues tab in the main navigation menu",
    "Action": "click",
}

<grounded action>: Click [coordinate_x 0.12]  [coordinate_y 0.07]"#;

    #[test]
    fn golden_block() {
        let out = parse_planner_output(GOLDEN).unwrap();
        assert_eq!(out.action.kind, ActionKind::Click);
        assert_eq!(
            out.action.element_description,
            "Click the Issues tab in the main navigation menu"
        );
        assert_eq!(out.action.value, None);
        assert!(out.thought.starts_with("To find unlabeled issues"));
        assert!(out.thought.ends_with("without labels."));
        assert_eq!(out.raw, GOLDEN);
    }

    #[test]
    fn strict_mode_rejects_trailing_comma() {
        let err = parse_planner_output_with(GOLDEN, ParseOptions { strict: true }).unwrap_err();
        assert_eq!(err, PlannerParseError::NoActionBlock);
    }

    #[test]
    fn block_only_has_empty_thought() {
        let out = parse_planner_output(r#"{"Element Description": "", "Action": "go_back", "Value": ""}"#).unwrap();
        assert_eq!(out.thought, "");
        assert_eq!(out.action.kind, ActionKind::GoBack);
    }

    #[test]
    fn last_block_wins() {
        let text = r#"The schema is {"Element Description": "x", "Action": "click", "Value": ""}.
I will scroll instead.
```json
{"Element Description": "", "Action": "scroll", "Value": "down"}
```"#;
        let out = parse_planner_output(text).unwrap();
        assert_eq!(out.action.kind, ActionKind::Scroll);
        assert_eq!(out.action.value.as_deref(), Some("down"));
        assert!(out.thought.ends_with("I will scroll instead."));
    }

    #[test]
    fn single_quotes_and_casing() {
        let text = "thinking {'element description': 'the Post button', 'ACTION': 'Click', 'value': ''}";
        let out = parse_planner_output(text).unwrap();
        assert_eq!(out.action.kind, ActionKind::Click);
        assert_eq!(out.action.element_description, "the Post button");
    }

    #[test]
    fn apostrophes_in_prose_do_not_break_scanning() {
        let text =
            "I'll click it. {\"Element Description\": \"the user's avatar\", \"Action\": \"click\", \"Value\": \"\"}";
        let out = parse_planner_output(text).unwrap();
        assert_eq!(out.action.element_description, "the user's avatar");
    }

    #[test]
    fn errors() {
        assert_eq!(
            parse_planner_output("no block here").unwrap_err(),
            PlannerParseError::NoActionBlock
        );
        assert_eq!(
            parse_planner_output("{\"a\": 1}").unwrap_err(),
            PlannerParseError::NoActionBlock
        );
        assert!(matches!(
            parse_planner_output(r#"{"Element Description": "x", "Action": "select", "Value": ""}"#),
            Err(PlannerParseError::BadActionKind(k)) if k == "select"
        ));
        assert!(matches!(
            parse_planner_output(r#"{"Element Description": "", "Action": "stop", "Value": ""}"#),
            Err(PlannerParseError::InvalidAction(_))
        ));
    }

    #[test]
    fn numeric_value_and_alias() {
        let out = parse_planner_output(r#"{"Element Description": "tab", "Action": "tab_focus", "Value": 2}"#).unwrap();
        assert_eq!(out.action.kind, ActionKind::PageFocus);
        assert_eq!(out.action.value.as_deref(), Some("2"));
    }

    #[test]
    fn multiline_value_is_repaired() {
        let text = "{\"Element Description\": \"box\", \"Action\": \"type\", \"Value\": \"line one\nline two\"}";
        let out = parse_planner_output(text).unwrap();
        assert_eq!(out.action.value.as_deref(), Some("line one\nline two"));
    }

    #[test]
    fn rendered_reply_parses_back() {
        let a = HighLevelAction::new("Search box", ActionKind::Type, Some("rust \"json\"".into())).unwrap();
        let text = render_planner_reply("I need to search first.", &a);
        let out = parse_planner_output_with(&text, ParseOptions { strict: true }).unwrap();
        assert_eq!(out.thought, "I need to search first.");
        assert_eq!(out.action, a);
        let bare = render_planner_reply("", &a);
        assert_eq!(parse_planner_output(&bare).unwrap().thought, "");
    }
}

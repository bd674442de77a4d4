//! Parser for the action text grammar (see `docs/action-grammar.ebnf`).

use super::{ActionError, ActionKind, Coordinate, GroundedAction, Platform, TargetRule};

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start_matches([' ', '\t']);
        self.pos = self.src.len() - trimmed.len();
    }

    fn at_end(&self) -> bool {
        self.pos >= self.src.len()
    }

    fn error(&self, expected: &str) -> ActionError {
        ActionError::Parse {
            offset: self.pos,
            expected: expected.to_string(),
        }
    }

    fn eat(&mut self, c: char) -> bool {
        if self.rest().starts_with(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ActionError> {
        self.skip_ws();
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.error(&format!("`{c}`")))
        }
    }

    fn eat_keyword_ci(&mut self, kw: &str) -> bool {
        match self.rest().get(..kw.len()) {
            Some(head) if head.eq_ignore_ascii_case(kw) => {
                self.pos += kw.len();
                true
            }
            _ => false,
        }
    }

    fn verb(&mut self) -> &'a str {
        let start = self.pos;
        let len = self
            .rest()
            .find(|c: char| !(c.is_ascii_alphabetic() || c == '_'))
            .unwrap_or(self.rest().len());
        self.pos += len;
        &self.src[start..start + len]
    }

    fn coordinate_component(&mut self) -> Result<f64, ActionError> {
        self.skip_ws();
        let start = self.pos;
        let len = self
            .rest()
            .find(|c: char| !(c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E')))
            .unwrap_or(self.rest().len());
        let text = &self.src[start..start + len];
        let v: f64 = text.parse().map_err(|_| self.error("a number"))?;
        if !(0.0..=1.0).contains(&v) {
            return Err(self.error("a coordinate in [0, 1]"));
        }
        self.pos += len;
        Ok(v)
    }

    fn looks_like_coordinates(&self) -> bool {
        let r = self.rest();
        r.starts_with("[[") || r.get(..13).is_some_and(|h| h.eq_ignore_ascii_case("[coordinate_x"))
    }

    /// `[[x] [y]]` or the display variant `[coordinate_x X] [coordinate_y Y]`.
    fn coordinates(&mut self) -> Result<Coordinate, ActionError> {
        self.skip_ws();
        if self.rest().starts_with("[[") {
            self.pos += 2;
            let x = self.coordinate_component()?;
            self.expect(']')?;
            self.expect('[')?;
            let y = self.coordinate_component()?;
            self.expect(']')?;
            self.expect(']')?;
            return Coordinate::new(x, y).map_err(|_| self.error("a coordinate in [0, 1]"));
        }
        if self.eat_keyword_ci("[coordinate_x") {
            let x = self.coordinate_component()?;
            self.expect(']')?;
            self.skip_ws();
            if !self.eat_keyword_ci("[coordinate_y") {
                return Err(self.error("`[coordinate_y`"));
            }
            let y = self.coordinate_component()?;
            self.expect(']')?;
            return Coordinate::new(x, y).map_err(|_| self.error("a coordinate in [0, 1]"));
        }
        Err(self.error("a coordinate group `[[x] [y]]`"))
    }

    /// A trailing `[...]` group; the payload runs to the last `]` of the line.
    fn trailing_value(&mut self, what: &str) -> Result<(usize, &'a str), ActionError> {
        self.skip_ws();
        if !self.rest().starts_with('[') {
            return Err(self.error(&format!("`[` opening {what}")));
        }
        let rest = self.rest().trim_end();
        if !rest.ends_with(']') || rest.len() < 2 {
            return Err(ActionError::Parse {
                offset: self.pos + rest.len(),
                expected: format!("`]` closing {what}"),
            });
        }
        let start = self.pos + 1;
        let inner = &rest[1..rest.len() - 1];
        self.pos = self.src.len();
        Ok((start, inner))
    }
}

fn value_label(kind: ActionKind) -> &'static str {
    match kind {
        ActionKind::Type => "text",
        ActionKind::Scroll => "scroll direction",
        ActionKind::OpenApp => "app name",
        ActionKind::Wait => "wait duration",
        ActionKind::Stop => "answer or status",
        ActionKind::Press => "key combination",
        ActionKind::Goto => "url",
        ActionKind::PageFocus => "tab index",
        _ => "value",
    }
}

/// Parses canonical action text (and the `coordinate_x` display variant).
/// Verbs are case-insensitive; `tab_focus` is read as `page_focus`.
pub fn parse_grounded(s: &str, platform: Platform) -> Result<GroundedAction, ActionError> {
    let leading = s.len() - s.trim_start().len();
    let body_end = s.trim_end().len();
    if body_end <= leading {
        return Err(ActionError::Parse {
            offset: 0,
            expected: "an action".into(),
        });
    }
    if let Some(nl) = s[..body_end].find(['\n', '\r']) {
        return Err(ActionError::Parse {
            offset: nl,
            expected: "a single-line action".into(),
        });
    }
    let mut cur = Cursor {
        src: &s[..body_end],
        pos: leading,
    };
    let verb_start = cur.pos;
    let verb = cur.verb();
    if verb.is_empty() {
        return Err(cur.error("an action verb"));
    }
    let kind: ActionKind = verb.parse().map_err(|_| ActionError::Parse {
        offset: verb_start,
        expected: "a known action verb".into(),
    })?;
    if !kind.is_legal(platform) {
        return Err(ActionError::IllegalKindForPlatform { kind, platform });
    }

    let coord = match kind.target_rule(platform) {
        TargetRule::Required => Some(cur.coordinates()?),
        TargetRule::Optional => {
            cur.skip_ws();
            if cur.looks_like_coordinates() {
                Some(cur.coordinates()?)
            } else {
                None
            }
        }
        TargetRule::None => None,
    };

    let value = if kind.requires_value() {
        Some(cur.trailing_value(value_label(kind))?)
    } else {
        None
    };
    cur.skip_ws();
    if !cur.at_end() {
        return Err(cur.error("end of action"));
    }

    GroundedAction::new(platform, kind, coord, value.map(|(_, v)| v)).map_err(|e| match (e, value) {
        (ActionError::MalformedValue { expected, .. }, Some((offset, _))) => ActionError::Parse { offset, expected },
        (e, _) => e,
    })
}

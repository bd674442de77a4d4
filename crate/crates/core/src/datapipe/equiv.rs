//! Consistency check between a generated action and a ground-truth hint.

use super::sample::HintAction;
use crate::actions::value::normalize_value;
use crate::actions::{ActionKind, StopStatus, TargetRule};

/// Default coordinate radius, in normalized screen units.
pub const DEFAULT_TOLERANCE: f64 = 0.05;

fn norm_desc(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

fn targets_match(a: &HintAction, b: &HintAction, tol: f64) -> bool {
    if a.action.kind.target_rule(a.platform) == TargetRule::None {
        return true;
    }
    let targetless = |h: &HintAction| h.coord.is_none() && h.action.element_description.trim().is_empty();
    match (a.coord, b.coord) {
        _ if targetless(a) && targetless(b) => true,
        (Some(p), Some(q)) => p.distance(&q) <= tol,
        _ => {
            let (da, db) = (
                norm_desc(&a.action.element_description),
                norm_desc(&b.action.element_description),
            );
            !da.is_empty() && da == db
        }
    }
}

fn values_match(a: &HintAction, b: &HintAction) -> bool {
    let kind = a.action.kind;
    let (va, vb) = (a.action.value.as_deref(), b.action.value.as_deref());
    match kind {
        ActionKind::Type => va.map(str::trim) == vb.map(str::trim),
        ActionKind::Stop => {
            let fold = |v: Option<&str>| v.map(|v| StopStatus::from_value(v).canonical().to_string());
            fold(va) == fold(vb)
        }
        _ => match (
            normalize_value(kind, a.platform, va),
            normalize_value(kind, b.platform, vb),
        ) {
            (Ok(x), Ok(y)) => x == y,
            _ => va.map(str::trim) == vb.map(str::trim),
        },
    }
}

/// Whether two actions count as the same step: same kind, same target
/// (coordinates within `tol`, or equal descriptions when a coordinate is
/// missing) and the same normalized value. Symmetric in its arguments.
pub fn actions_equivalent(a: &HintAction, b: &HintAction, tol: f64) -> bool {
    a.platform == b.platform && a.action.kind == b.action.kind && targets_match(a, b, tol) && values_match(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actions::{Coordinate, HighLevelAction, Platform};

    fn h(kind: ActionKind, desc: &str, value: Option<&str>, coord: Option<(f64, f64)>) -> HintAction {
        HintAction {
            platform: Platform::Web,
            action: HighLevelAction::new(desc, kind, value.map(String::from)).unwrap(),
            coord: coord.map(|(x, y)| Coordinate::new(x, y).unwrap()),
        }
    }

    #[test]
    fn within_radius() {
        let a = h(ActionKind::Click, "Issues tab", None, Some((0.12, 0.07)));
        let b = h(ActionKind::Click, "the issues link", None, Some((0.13, 0.08)));
        assert!(actions_equivalent(&a, &b, DEFAULT_TOLERANCE));
        let far = h(ActionKind::Click, "Issues tab", None, Some((0.5, 0.5)));
        assert!(!actions_equivalent(&a, &far, DEFAULT_TOLERANCE));
    }

    #[test]
    fn kind_mismatch() {
        let a = h(ActionKind::Type, "Search box", Some("x"), Some((0.2, 0.2)));
        let b = h(ActionKind::Click, "Search box", None, Some((0.2, 0.2)));
        assert!(!actions_equivalent(&a, &b, DEFAULT_TOLERANCE));
    }

    #[test]
    fn description_fallback_and_values() {
        let a = h(ActionKind::Click, "  Search   Box ", None, None);
        let b = h(ActionKind::Click, "search box", None, Some((0.2, 0.2)));
        assert!(actions_equivalent(&a, &b, DEFAULT_TOLERANCE));
        let s1 = h(ActionKind::Stop, "", Some("success"), None);
        let s2 = h(ActionKind::Stop, "", Some("Completed"), None);
        assert!(actions_equivalent(&s1, &s2, DEFAULT_TOLERANCE));
        let t1 = h(ActionKind::Type, "box", Some(" hello "), None);
        let t2 = h(ActionKind::Type, "box", Some("Hello"), None);
        assert!(!actions_equivalent(&t1, &t2, DEFAULT_TOLERANCE));
        let g1 = h(ActionKind::Scroll, "", Some("down"), None);
        let g2 = h(ActionKind::Scroll, "", Some("up"), None);
        assert!(!actions_equivalent(&g1, &g2, DEFAULT_TOLERANCE));
    }
}

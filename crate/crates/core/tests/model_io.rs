mod common;

use common::fixture;
use guiagent_core::actions::{parse_grounded, ActionKind, Coordinate, Platform};
use guiagent_core::model_io::{
    build_planner_prompt, call_grounder, call_planner, format_memory, parse_planner_output, render_template,
    request_hash, DecodingParams, EndpointError, GrounderRequest, ImageRef, Observation, PlannerOutput, PromptError,
    PromptInputs, RetryPolicy, ScriptedGrounder, ScriptedPlanner, TemplateId,
};
use proptest::prelude::*;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

const INTENT: &str = "\u{1}INTENT\u{1}";
const URL: &str = "\u{1}URL\u{1}";
const HINT: &str = "\u{1}HINT\u{1}";
const MEMORY: &str = "\u{1}MEMORY\u{1}";

fn stored_template(t: TemplateId) -> String {
    std::fs::read_to_string(fixture(&format!("prompts/{}.txt", t.as_str()))).unwrap()
}

fn inputs(
    t: TemplateId,
    intent: &'static str,
    memory: &'static str,
    url: &'static str,
    hint: &'static str,
) -> PromptInputs<'static> {
    PromptInputs {
        intent,
        previous_actions: memory,
        url: t.requires_url().then_some(url),
        hint: t.requires_hint().then_some(hint),
    }
}

/// The placeholder tokens of `t` in the order they occur in `text`.
fn split_at_placeholders(t: TemplateId, text: &str) -> Vec<String> {
    let mut parts = Vec::new();
    let mut rest = text;
    loop {
        let next = t
            .placeholders()
            .filter_map(|tok| rest.find(tok).map(|i| (i, tok)))
            .min_by_key(|(i, _)| *i);
        match next {
            Some((i, tok)) => {
                parts.push(rest[..i].to_string());
                rest = &rest[i + tok.len()..];
            }
            None => {
                parts.push(rest.to_string());
                return parts;
            }
        }
    }
}

#[test]
fn templates_match_stored_fixtures_outside_placeholders() {
    for t in TemplateId::ALL {
        let stored = stored_template(t);
        let rendered = render_template(t, &inputs(t, INTENT, MEMORY, URL, HINT)).unwrap();
        let mut restored = rendered.clone();
        for tok in t.placeholders() {
            let marker = match tok {
                "{intent}" | "{task}" => INTENT,
                "{url}" => URL,
                "{previous_actions}" | "{previous actions}" => MEMORY,
                _ => HINT,
            };
            restored = restored.replace(marker, tok);
        }
        assert!(restored == stored, "{} differs from its fixture", t.as_str());

        let empty = render_template(t, &inputs(t, "", "", "", "")).unwrap();
        assert_eq!(empty, split_at_placeholders(t, &stored).concat(), "{}", t.as_str());
        for tok in t.placeholders() {
            assert!(!rendered.contains(tok), "{} left {tok}", t.as_str());
        }
    }
}

#[test]
fn web_prompt_fields() {
    let obs = Observation {
        screenshot: ImageRef::new("s0"),
        url: Some("http://host/gitlab".into()),
        step_index: 0,
    };
    let msgs = build_planner_prompt::<&str>("find the repo", &[], &obs, TemplateId::WebEval).unwrap();
    let text = msgs[0].text();
    assert!(text.contains("**Current URL**: http://host/gitlab"));
    assert!(text.contains("**Previous Actions**: None"));
    let no_url = Observation { url: None, ..obs };
    assert!(matches!(
        build_planner_prompt::<&str>("x", &[], &no_url, TemplateId::WebEval),
        Err(PromptError::MissingUrl(_))
    ));
}

#[test]
fn memory_format() {
    assert_eq!(format_memory::<&str>(&[]), "None");
    assert_eq!(
        format_memory(&[
            "click 'the search results titled with wikipedia'",
            "type 'GUI Agent' into the search bar at the top of the page"
        ]),
        "step 1: click 'the search results titled with wikipedia'; step 2: type 'GUI Agent' into the search bar at the top of the page"
    );
    let long: Vec<String> = (0..30).map(|i| format!("a{i}")).collect();
    let m = format_memory(&long);
    let idx: Vec<usize> = m
        .split("; ")
        .map(|s| {
            s.strip_prefix("step ")
                .unwrap()
                .split(':')
                .next()
                .unwrap()
                .parse()
                .unwrap()
        })
        .collect();
    assert_eq!(idx, (1..=30).collect::<Vec<_>>());
}

struct Golden {
    name: String,
    text: String,
    kind: ActionKind,
    element: String,
    value: Option<String>,
    thought_prefix: String,
}

fn goldens() -> Vec<Golden> {
    let expected: Value =
        serde_json::from_str(&std::fs::read_to_string(fixture("planner/expected.json")).unwrap()).unwrap();
    expected
        .as_object()
        .unwrap()
        .iter()
        .map(|(name, e)| Golden {
            name: name.clone(),
            text: std::fs::read_to_string(fixture(&format!("planner/{name}"))).unwrap(),
            kind: serde_json::from_value(e["kind"].clone()).unwrap(),
            element: e["element"].as_str().unwrap().to_string(),
            value: e["value"].as_str().map(String::from),
            thought_prefix: e["thought_prefix"].as_str().unwrap().to_string(),
        })
        .collect()
}

fn check(g: &Golden, out: &PlannerOutput) {
    assert_eq!(out.action.kind, g.kind, "{}", g.name);
    assert_eq!(out.action.element_description, g.element, "{}", g.name);
    assert_eq!(out.action.value, g.value, "{}", g.name);
}

#[test]
fn golden_planner_outputs_parse_exactly() {
    for g in goldens() {
        let out = parse_planner_output(&g.text).unwrap();
        check(&g, &out);
        assert!(
            out.thought.starts_with(&g.thought_prefix),
            "{}: {:?}",
            g.name,
            out.thought
        );
        assert!(!out.thought.contains('{'), "{}", g.name);
    }
}

#[test]
fn golden_grounded_display_form() {
    let g = goldens().into_iter().find(|g| g.name == "reference_click.txt").unwrap();
    let line = g
        .text
        .lines()
        .find_map(|l| l.strip_prefix("<grounded action>: "))
        .unwrap();
    let a = parse_grounded(line, Platform::Web).unwrap();
    assert_eq!(a.kind, ActionKind::Click);
    let c = a.coord.unwrap();
    assert_eq!((c.x(), c.y()), (0.12, 0.07));
    assert_eq!((&a.value, a.tab_index, &a.url), (&None, None, &None));
    assert_eq!(a.serialize(), "click [[0.12] [0.07]]");
}

/// Re-renders the action block of a golden output with random fences,
/// key spellings, quoting, ordering and trailing commas.
fn mutate(g: &Golden, rng: &mut ChaCha8Rng) -> String {
    let key_forms: [[&str; 3]; 6] = [
        ["Element Description", "Action", "Value"],
        ["element description", "action", "value"],
        ["ELEMENT DESCRIPTION", "ACTION", "VALUE"],
        ["Element_Description", "Action", "Value"],
        ["element  description", " Action ", "value"],
        ["ElementDescription", "action", "Value"],
    ];
    let keys = key_forms.choose(rng).unwrap();
    let kind_text = match rng.random_range(0..3) {
        0 => g.kind.as_str().to_string(),
        1 => g.kind.as_str().to_uppercase(),
        _ => format!(" {} ", g.kind.as_str()),
    };
    let single = rng.random_bool(0.3) && !g.element.contains('\'') && !g.value.as_deref().unwrap_or("").contains('\'');
    let q = if single { '\'' } else { '"' };
    let mut fields = vec![
        format!("{q}{}{q}: {q}{}{q}", keys[0], g.element),
        format!("{q}{}{q}: {q}{}{q}", keys[1], kind_text),
    ];
    match &g.value {
        Some(v) => fields.push(format!("{q}{}{q}: {q}{v}{q}", keys[2])),
        None if rng.random_bool(0.5) => fields.push(format!("{q}{}{q}: {q}{q}", keys[2])),
        None => {}
    }
    fields.shuffle(rng);
    let indent = ["", "  ", "    ", "\t"].choose(rng).unwrap();
    let sep = if rng.random_bool(0.5) { ",\n" } else { ", " };
    let mut body = fields
        .iter()
        .map(|f| format!("{indent}{f}"))
        .collect::<Vec<_>>()
        .join(sep);
    if rng.random_bool(0.4) {
        body.push(',');
    }
    let object = if sep == ", " {
        format!("{{{body}}}")
    } else {
        format!("{{\n{body}\n}}")
    };
    let block = match rng.random_range(0..4) {
        0 => format!("```json\n{object}\n```"),
        1 => format!("```\n{object}\n```"),
        2 => format!("```JSON\n{object}\n```"),
        _ => object,
    };
    let thought = "I will act on the element described below.";
    match rng.random_range(0..3) {
        0 => format!("{thought}\n{block}"),
        1 => format!("<thought>: {thought}\n\n<high-level action>:\n{block}\n"),
        _ => format!("{block}\n\n"),
    }
}

#[test]
fn mutated_goldens_parse_like_the_clean_form() {
    let goldens = goldens();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for i in 0..500 {
        let g = &goldens[i % goldens.len()];
        let text = mutate(g, &mut rng);
        let out = parse_planner_output(&text).unwrap_or_else(|e| panic!("variant {i}: {e}\n{text}"));
        check(g, &out);
    }
}

proptest! {
    #[test]
    fn trailing_prose_keeps_the_last_block(tail in "[a-zA-Z .,;:!?()'\"-]{0,80}") {
        for g in goldens() {
            let clean = parse_planner_output(&g.text).unwrap();
            let out = parse_planner_output(&format!("{}\n{tail}", g.text)).unwrap();
            prop_assert_eq!(&out.action, &clean.action);
            prop_assert_eq!(&out.thought, &clean.thought);
        }
    }
}

#[test]
fn decoding_defaults() {
    let d = DecodingParams::default();
    assert_eq!((d.temperature, d.top_p, d.max_context), (0.0, 1.0, 8192));
}

#[test]
fn stubs_end_to_end() {
    let obs = Observation {
        screenshot: ImageRef::new("s0"),
        url: Some("http://gitlab.local/metaseq".into()),
        step_index: 0,
    };
    let messages = build_planner_prompt::<&str>("find unlabeled issues", &[], &obs, TemplateId::WebEval).unwrap();
    let params = DecodingParams::default();
    let golden = std::fs::read_to_string(fixture("planner/reference_click.txt")).unwrap();
    let planner = ScriptedPlanner::new().with_reply(request_hash(&messages, &params), golden);
    let text = call_planner(&planner, &messages, &params, &RetryPolicy::none()).unwrap();
    let out = parse_planner_output(&text).unwrap();
    assert_eq!(out.action.kind, ActionKind::Click);

    let grounder = ScriptedGrounder::new().with("Issues tab", Coordinate::new(0.12, 0.07).unwrap());
    let req = GrounderRequest {
        element_description: "Issues tab".into(),
        screenshot: obs.screenshot.clone(),
        platform: Platform::Web,
    };
    let r = call_grounder(&grounder, &req, &RetryPolicy::none()).unwrap();
    assert_eq!((r.coord.x(), r.coord.y()), (0.12, 0.07));

    let unknown = build_planner_prompt::<&str>("other goal", &[], &obs, TemplateId::WebEval).unwrap();
    assert!(matches!(
        call_planner(&ScriptedPlanner::new(), &unknown, &params, &RetryPolicy::none()),
        Err(EndpointError::EndpointUnavailable { .. } | EndpointError::MalformedResponse(_))
    ));
}

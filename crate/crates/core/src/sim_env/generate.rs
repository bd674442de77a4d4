//! Random screen graphs and tasks for property and acceptance tests.
//!
//! Every generated graph has one orphan screen (no incoming edges, not
//! addressable, not an app entry) holding the only setter of `locked`.
//! Roughly a quarter of the tasks reference it and are therefore unsolvable.

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::spec::{Effect, Element, EnvFile, Predicate, Screen, ScreenGraph, TaskPack, TaskSpec, PACK_FORMAT_VERSION};
use crate::actions::Platform;

const WORDS: [&str; 8] = [
    "alpha", "bravo", "delta", "harbor", "lantern", "meadow", "quartz", "willow",
];
const FLAGS: usize = 3;

fn cell_bbox(cell: usize) -> [f64; 4] {
    let (col, row) = ((cell % 3) as f64, (cell / 3) as f64);
    let x0 = 0.04 + col * 0.32;
    let y0 = 0.12 + row * 0.28;
    [x0, y0, x0 + 0.26, y0 + 0.2]
}

fn effect_goto(s: &str) -> Option<Effect> {
    Some(Effect {
        goto: Some(s.to_string()),
        set: BTreeMap::new(),
    })
}

fn effect_set(var: &str, value: &str) -> Option<Effect> {
    Some(Effect {
        goto: None,
        set: BTreeMap::from([(var.to_string(), value.to_string())]),
    })
}

fn element(id: String, label: String, cell: usize) -> Element {
    Element {
        id,
        label,
        bbox: cell_bbox(cell),
        min_scroll: 0,
        text_field: None,
        on_click: None,
        on_long_press: None,
        on_hover: None,
        on_type: None,
    }
}

/// Builds a validated pack from a seed. Screens form a chain (so every
/// non-orphan screen is reachable) plus random extra links.
pub fn generate_pack(seed: u64, platform: Platform, n_tasks: usize) -> TaskPack {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(5..=8usize);
    let ids: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
    let orphan = "vault".to_string();

    let mut vars = BTreeMap::new();
    for f in 0..FLAGS {
        vars.insert(format!("flag{f}"), "off".to_string());
    }
    vars.insert("field".into(), String::new());
    vars.insert("saved".into(), String::new());
    vars.insert("locked".into(), "closed".into());

    let mut screens = Vec::new();
    for (i, id) in ids.iter().enumerate() {
        let mut cells: Vec<usize> = (0..9).collect();
        let mut take_cell = |rng: &mut ChaCha8Rng| cells.remove(rng.random_range(0..cells.len()));
        let mut elements = Vec::new();
        let next = &ids[(i + 1) % n];
        let mut link = element(format!("to_{next}"), format!("Open {next} link"), take_cell(&mut rng));
        link.on_click = effect_goto(next);
        elements.push(link);
        if rng.random_bool(0.6) {
            let t = &ids[rng.random_range(0..n)];
            if t != id && t != next {
                let mut l = element(format!("jump_{t}"), format!("Jump to {t} button"), take_cell(&mut rng));
                l.on_click = effect_goto(t);
                elements.push(l);
            }
        }
        if i % 2 == 1 || rng.random_bool(0.3) {
            let f = rng.random_range(0..FLAGS);
            let mut t = element(format!("toggle{f}"), format!("Flag {f} switch"), take_cell(&mut rng));
            let eff = effect_set(&format!("flag{f}"), "on");
            match platform {
                Platform::Mobile if rng.random_bool(0.5) => t.on_long_press = eff,
                _ => t.on_click = eff,
            }
            elements.push(t);
        }
        if i == n / 2 {
            let mut field = element("field".into(), "Entry text box".into(), take_cell(&mut rng));
            field.text_field = Some("field".into());
            elements.push(field);
            let mut save = element("save".into(), "Save entry button".into(), take_cell(&mut rng));
            save.on_click = Some(Effect {
                goto: None,
                set: BTreeMap::from([("saved".to_string(), "$field".to_string())]),
            });
            elements.push(save);
        }
        let max_scroll = u32::from(rng.random_bool(0.3));
        if max_scroll == 1 {
            // a further link only revealed after scrolling down
            let t = &ids[rng.random_range(0..n)];
            if t != id
                && elements
                    .iter()
                    .all(|e| e.on_click.as_ref().and_then(|c| c.goto.as_ref()) != Some(t))
            {
                let mut l = element(format!("below_{t}"), format!("More: {t} entry"), take_cell(&mut rng));
                l.min_scroll = 1;
                l.on_click = effect_goto(t);
                elements.push(l);
            }
        }
        screens.push(Screen {
            id: id.clone(),
            title: format!("Screen {i}"),
            url: (platform == Platform::Web).then(|| format!("http://gen{seed}.local/{id}")),
            addressable: i == 0 || rng.random_bool(0.3),
            max_scroll,
            render_vars: Vec::new(),
            on_submit: None,
            elements,
        });
    }
    let mut lock = element("unlock".into(), "Unlock button".into(), 4);
    lock.on_click = effect_set("locked", "open");
    screens.push(Screen {
        id: orphan.clone(),
        title: "Vault".into(),
        url: (platform == Platform::Web).then(|| format!("http://gen{seed}.local/{orphan}")),
        addressable: false,
        max_scroll: 0,
        render_vars: Vec::new(),
        on_submit: None,
        elements: vec![lock],
    });

    let apps = match platform {
        Platform::Mobile => BTreeMap::from([
            ("Alpha".to_string(), ids[0].clone()),
            ("Beta".to_string(), ids[n - 1].clone()),
        ]),
        Platform::Web => BTreeMap::new(),
    };
    let file = EnvFile {
        version: PACK_FORMAT_VERSION,
        name: format!("gen-{seed}"),
        platform,
        initial_screen: ids[0].clone(),
        home_screen: None,
        apps,
        vars,
        screens,
    };
    let graph = ScreenGraph::from_file(file).expect("generated graphs are valid");

    let flags_set: Vec<usize> = (0..FLAGS)
        .filter(|f| {
            graph
                .screens()
                .iter()
                .any(|s| s.id != orphan && s.elements.iter().any(|e| e.id == format!("toggle{f}")))
        })
        .collect();

    let mut tasks = Vec::new();
    for t in 0..n_tasks {
        let mut subgoals = Vec::new();
        let k = rng.random_range(1..=3usize);
        for _ in 0..k {
            let p = match rng.random_range(0..4u8) {
                0 => Predicate::Visited {
                    screen: ids[rng.random_range(1..n)].clone(),
                },
                1 if !flags_set.is_empty() => Predicate::VarEquals {
                    var: format!("flag{}", flags_set.choose(&mut rng).unwrap()),
                    value: "on".into(),
                },
                2 => Predicate::VarEquals {
                    var: "saved".into(),
                    value: WORDS.choose(&mut rng).unwrap().to_string(),
                },
                _ => Predicate::OnScreen {
                    screen: ids[rng.random_range(0..n)].clone(),
                },
            };
            if !subgoals.contains(&p) {
                subgoals.push(p);
            }
        }
        if t % 4 == 3 {
            let p = if rng.random_bool(0.5) {
                Predicate::Visited { screen: orphan.clone() }
            } else {
                Predicate::VarEquals {
                    var: "locked".into(),
                    value: "open".into(),
                }
            };
            subgoals.insert(rng.random_range(0..=subgoals.len()), p);
        }
        let goal = subgoals.iter().map(describe).collect::<Vec<_>>().join(", then ");
        tasks.push(TaskSpec {
            id: format!("gen{seed}_t{t}"),
            goal: capitalize(&goal),
            platform: None,
            initial_screen: None,
            init_vars: BTreeMap::new(),
            params: Vec::new(),
            subgoals,
        });
    }
    TaskPack {
        graph,
        tasks,
        asset_dir: None,
    }
}

fn describe(p: &Predicate) -> String {
    match p {
        Predicate::VarEquals { var, value } if var == "saved" => format!("save the entry \"{value}\""),
        Predicate::VarEquals { var, value } => format!("set {var} to {value}"),
        Predicate::VarContains { var, value } => format!("make {var} mention {value}"),
        Predicate::OnScreen { screen } => format!("finish on {screen}"),
        Predicate::Visited { screen } => format!("visit {screen}"),
        Predicate::AnswerEquals { value } => format!("answer {value}"),
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    c.next()
        .map(|f| f.to_uppercase().chain(c).collect())
        .unwrap_or_default()
}

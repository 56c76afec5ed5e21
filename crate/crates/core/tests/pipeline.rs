//! End-to-end pipeline tests over the fixture corpus: parse models, derive
//! the transformation grammar, compile and run modules, and round-trip every
//! model through the pretty printer.

use std::fs;
use std::path::{Path, PathBuf};

use proptest::prelude::*;

use cnctrans_core::adl::{check_wellformed, cnc_grammar, component_view, normalize, AccessorTable};
use cnctrans_core::ast::AstNode;
use cnctrans_core::derive::{classify, derive_transformation_grammar, DerivedKind};
use cnctrans_core::engine::parse_model;
use cnctrans_core::matcher::{find_matches, MatchConfig};
use cnctrans_core::modexec::{run_module, RunOptions, RunReport};
use cnctrans_core::pretty::pretty_print;
use cnctrans_core::rule::{compile_module, MethodBody, Module};

fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn fixture(name: &str) -> String {
    let path = fixture_dir().join(name);
    fs::read_to_string(&path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

fn corpus() -> Vec<(String, String)> {
    let mut files: Vec<(String, String)> = fs::read_dir(fixture_dir())
        .unwrap()
        .map(|entry| entry.unwrap().path())
        .filter(|p| p.extension().is_some_and(|ext| ext == "arc"))
        .map(|p| {
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            (name, fs::read_to_string(&p).unwrap())
        })
        .collect();
    files.sort();
    assert!(files.len() >= 8, "corpus should cover the whole language");
    files
}

fn parse(text: &str, file: &str) -> AstNode {
    let mut node = parse_model(cnc_grammar(), "Model", text, file)
        .unwrap_or_else(|e| panic!("{file} must parse: {e}"));
    normalize(&mut node);
    node
}

fn compile(text: &str, file: &str) -> Module {
    let base = cnc_grammar();
    let derived = derive_transformation_grammar(base).unwrap();
    let ast = parse_model(&derived, "Module", text, file)
        .unwrap_or_else(|e| panic!("{file} must parse: {e}"));
    compile_module(&ast, base, &AccessorTable::for_grammar(base))
        .unwrap_or_else(|e| panic!("{file} must compile: {e}"))
}

fn run(model: &mut AstNode, module: &Module) -> RunReport {
    let base = cnc_grammar();
    run_module(
        model,
        module,
        base,
        &AccessorTable::for_grammar(base),
        &MatchConfig::detect(base),
        &RunOptions::default(),
    )
    .unwrap()
}

fn remote_with_actuator() -> AstNode {
    parse(
        &format!("{}{}", fixture("remote_node.arc"), fixture("actuator.arc")),
        "remote_node.arc",
    )
}

#[test]
fn remote_node_parses_with_the_expected_shape() {
    let model = parse(&fixture("remote_node.arc"), "remote_node.arc");
    let defs = model.children("components");
    assert_eq!(defs.len(), 1);
    let view = component_view(&defs[0]);
    assert_eq!(view.name, "RemoteNode");
    let ports: Vec<(&str, Option<&str>, &str)> =
        view.ports.iter().map(|p| (p.dir, p.ty, p.name)).collect();
    assert_eq!(
        ports,
        vec![("in", Some("int"), "el"), ("in", Some("int"), "er")]
    );
    let subs: Vec<(&str, &str)> = view.subs.iter().map(|s| (s.ty, s.name)).collect();
    assert_eq!(subs, vec![("Actuator", "left"), ("Actuator", "right")]);
    let connectors: Vec<(&str, &str)> = view
        .connectors
        .iter()
        .map(|c| (c.source, c.target))
        .collect();
    assert_eq!(
        connectors,
        vec![("el", "left.effort"), ("er", "right.effort")]
    );
}

#[test]
fn the_shipped_modules_compile() {
    compile(&fixture("add_monitoring.mtr"), "add_monitoring.mtr");
    compile(
        &fixture("add_monitoring_guarded.mtr"),
        "add_monitoring_guarded.mtr",
    );
    compile(&fixture("client_auth.mtr"), "client_auth.mtr");
    compile(&fixture("runaway.mtr"), "runaway.mtr");
    compile(&fixture("dup.mtr"), "dup.mtr");
}

#[test]
fn every_model_parses_as_a_variable_free_rule() {
    let derived = derive_transformation_grammar(cnc_grammar()).unwrap();
    for (name, text) in corpus() {
        let rule = parse_model(&derived, "TransformationRule", &text, &name)
            .unwrap_or_else(|e| panic!("{name} must parse as a rule: {e}"));
        for node in rule.walk() {
            assert!(
                !matches!(
                    classify(&node.nonterminal),
                    Some(DerivedKind::VarBlack(_) | DerivedKind::VarWhite(_))
                ) && node.nonterminal != "NameVar",
                "{name}: plain model text must not produce variables, got {}",
                node.nonterminal
            );
        }
    }
}

#[test]
fn monitoring_matches_the_golden_model() {
    let mut model = remote_with_actuator();
    let module = compile(&fixture("add_monitoring.mtr"), "add_monitoring.mtr");
    let report = run(&mut model, &module);
    let counts: Vec<(&str, usize)> = report
        .statements
        .iter()
        .map(|s| (s.label.as_str(), s.applications))
        .collect();
    assert_eq!(
        counts,
        vec![
            ("loop addPorts()", 2),
            ("loop addMonitor()", 1),
            ("loop connect()", 3),
        ]
    );
    assert_eq!(report.total_applications, 6);
    assert!(report.changed);
    assert_eq!(model, parse(&fixture("monitored.arc"), "monitored.arc"));
    // the printed result is byte-identical to the golden file
    assert_eq!(
        pretty_print(cnc_grammar(), &model).unwrap(),
        fixture("monitored.arc")
    );
}

#[test]
fn the_guard_suppresses_the_self_connector() {
    let mut model = remote_with_actuator();
    let module = compile(
        &fixture("add_monitoring_guarded.mtr"),
        "add_monitoring_guarded.mtr",
    );
    let report = run(&mut model, &module);
    let counts: Vec<usize> = report.statements.iter().map(|s| s.applications).collect();
    assert_eq!(counts, vec![2, 1, 2]);
    assert_eq!(
        model,
        parse(&fixture("monitored_guarded.arc"), "monitored_guarded.arc")
    );
    assert_eq!(
        pretty_print(cnc_grammar(), &model).unwrap(),
        fixture("monitored_guarded.arc")
    );
}

#[test]
fn monitoring_is_idempotent() {
    for module_file in ["add_monitoring.mtr", "add_monitoring_guarded.mtr"] {
        let mut model = remote_with_actuator();
        let module = compile(&fixture(module_file), module_file);
        run(&mut model, &module);
        let before = model.clone();
        let report = run(&mut model, &module);
        assert!(!report.changed, "{module_file} must be idempotent");
        assert_eq!(report.total_applications, 0);
        assert!(report.statements.iter().all(|s| s.applications == 0));
        assert_eq!(model, before);
    }
}

#[test]
fn client_auth_grants_exactly_one_access() {
    let mut model = parse(&fixture("shop.arc"), "shop.arc");
    let module = compile(&fixture("client_auth.mtr"), "client_auth.mtr");
    let report = run(&mut model, &module);
    assert_eq!(report.total_applications, 1);
    // the second round finds the same match again and suppresses it
    assert_eq!(
        report.diagnostics,
        vec!["loop accessPort(): fixpoint reached with 1 suppressed match(es)".to_string()]
    );
    assert_eq!(
        model,
        parse(&fixture("shop_authorized.arc"), "shop_authorized.arc")
    );
    assert_eq!(
        pretty_print(cnc_grammar(), &model).unwrap(),
        fixture("shop_authorized.arc")
    );
}

#[test]
fn equal_trust_levels_leave_the_shop_unchanged() {
    let mut model = parse(&fixture("shop_equal_trust.arc"), "shop_equal_trust.arc");
    let before = model.clone();
    let module = compile(&fixture("client_auth.mtr"), "client_auth.mtr");
    let report = run(&mut model, &module);
    assert!(!report.changed);
    assert_eq!(report.total_applications, 0);
    assert_eq!(model, before);
}

#[test]
fn add_ports_matches_once_per_component() {
    let model = remote_with_actuator();
    let module = compile(&fixture("add_monitoring.mtr"), "add_monitoring.mtr");
    let Some(MethodBody::Transformation(rule)) = module.methods.get("addPorts") else {
        panic!("addPorts must be a transformation");
    };
    let base = cnc_grammar();
    let matches = find_matches(
        &model,
        rule,
        base,
        &AccessorTable::for_grammar(base),
        &MatchConfig::detect(base),
    )
    .unwrap();
    let bindings: Vec<Vec<(String, String)>> = matches
        .iter()
        .map(|m| {
            m.env
                .name_vars
                .iter()
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect()
        })
        .collect();
    assert_eq!(
        bindings,
        vec![
            vec![("name".to_string(), "RemoteNode".to_string())],
            vec![("name".to_string(), "Actuator".to_string())],
        ]
    );
}

#[test]
fn the_corpus_is_wellformed_enough_to_transform() {
    for (name, text) in corpus() {
        let model = parse(&text, &name);
        let diagnostics = check_wellformed(&model, false);
        assert!(
            diagnostics.iter().all(|d| !d.is_error()),
            "{name}: {:?}",
            diagnostics
        );
    }
}

#[test]
fn the_corpus_round_trips_through_the_printer() {
    let base = cnc_grammar();
    for (name, text) in corpus() {
        let node = parse_model(base, "Model", &text, &name).unwrap();
        let printed = pretty_print(base, &node).unwrap();
        let reparsed = parse_model(base, "Model", &printed, &name).unwrap();
        assert_eq!(node, reparsed, "{name} must round-trip");
        // printing is a fixpoint, so formatted files stay put
        assert_eq!(pretty_print(base, &reparsed).unwrap(), printed);
    }
}

// --- randomized round-trip coverage ---------------------------------------

fn arb_name() -> impl Strategy<Value = String> {
    (
        prop::sample::select(vec![
            "alpha", "beta", "gamma", "delta", "relay", "probe", "sink",
        ]),
        0u8..10,
    )
        .prop_map(|(base, n)| format!("{base}{n}"))
}

fn arb_qualified_name() -> impl Strategy<Value = String> {
    prop::collection::vec(arb_name(), 1..3).prop_map(|parts| parts.join("."))
}

fn arb_leaf_member() -> impl Strategy<Value = String> {
    prop_oneof![
        // port section with optional types
        prop::collection::vec(
            (prop::bool::ANY, prop::option::of(arb_name()), arb_name()),
            1..3
        )
        .prop_map(|decls| {
            let decls: Vec<String> = decls
                .into_iter()
                .map(|(is_in, ty, name)| {
                    let dir = if is_in { "in" } else { "out" };
                    match ty {
                        Some(ty) => format!("{dir} {ty} {name}"),
                        None => format!("{dir} {name}"),
                    }
                })
                .collect();
            format!("port {};", decls.join(", "))
        }),
        (arb_name(), prop::collection::vec(arb_name(), 1..3))
            .prop_map(|(ty, names)| format!("component {ty} {};", names.join(", "))),
        (arb_qualified_name(), arb_qualified_name())
            .prop_map(|(s, t)| format!("connect {s} -> {t};")),
        (-99i64..100).prop_map(|v| format!("trustlevel {v};")),
        (arb_name(), prop::collection::vec(arb_name(), 1..3))
            .prop_map(|(port, policies)| format!("access {port} ({});", policies.join(", "))),
        prop::collection::vec(arb_name(), 1..3)
            .prop_map(|policies| format!("access ({});", policies.join(", "))),
        (arb_qualified_name(), arb_qualified_name())
            .prop_map(|(p, v)| format!("identity {p} -> {v};")),
    ]
}

fn arb_component_def() -> impl Strategy<Value = String> {
    let member = arb_leaf_member().prop_recursive(2, 12, 3, |inner| {
        (arb_name(), prop::collection::vec(inner, 0..4))
            .prop_map(|(name, members)| format!("component {name} {{ {} }}", members.join(" ")))
    });
    (arb_name(), prop::collection::vec(member, 0..5))
        .prop_map(|(name, members)| format!("component {name} {{ {} }}", members.join(" ")))
}

fn arb_model_text() -> impl Strategy<Value = String> {
    prop::collection::vec(arb_component_def(), 1..4).prop_map(|defs| defs.join("\n"))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_models_round_trip(text in arb_model_text()) {
        let base = cnc_grammar();
        let node = parse_model(base, "Model", &text, "gen.arc").unwrap();
        let printed = pretty_print(base, &node).unwrap();
        let reparsed = parse_model(base, "Model", &printed, "gen.arc").unwrap();
        prop_assert_eq!(&node, &reparsed);
        prop_assert_eq!(pretty_print(base, &reparsed).unwrap(), printed);
    }

    #[test]
    fn normalization_is_idempotent_on_random_models(text in arb_model_text()) {
        let base = cnc_grammar();
        let mut once = parse_model(base, "Model", &text, "gen.arc").unwrap();
        normalize(&mut once);
        let mut twice = once.clone();
        normalize(&mut twice);
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn random_models_parse_as_variable_free_rules(text in arb_model_text()) {
        let derived = derive_transformation_grammar(cnc_grammar()).unwrap();
        let rule = parse_model(&derived, "TransformationRule", &text, "gen.arc").unwrap();
        for node in rule.walk() {
            prop_assert!(!matches!(
                classify(&node.nonterminal),
                Some(DerivedKind::VarBlack(_) | DerivedKind::VarWhite(_))
            ));
        }
    }
}

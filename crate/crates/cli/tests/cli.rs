//! End-to-end tests of the `cnctrans` binary: exit codes, report formats,
//! multi-file splitting, and byte-stable output.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

fn fixture(name: &str) -> String {
    fs::read_to_string(fixtures().join(name)).unwrap()
}

fn cnctrans(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cnctrans"));
    cmd.current_dir(fixtures());
    cmd.env_remove("CNCTRANS_MAX_APPLY");
    for (key, value) in env {
        cmd.env(key, value);
    }
    cmd.args(args);
    cmd.output().unwrap()
}

fn stdout(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).unwrap()
}

fn stderr(output: &Output) -> String {
    String::from_utf8(output.stderr.clone()).unwrap()
}

fn exit_code(output: &Output) -> i32 {
    output.status.code().unwrap()
}

#[test]
fn transform_reports_applications_and_splits_outputs() {
    let out = tempdir("split");
    let result = cnctrans(
        &[
            "transform",
            "add_monitoring.mtr",
            "remote_node.arc",
            "actuator.arc",
            "-o",
            out.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(exit_code(&result), 0, "stderr: {}", stderr(&result));
    assert_eq!(
        stdout(&result),
        "loop addPorts(): 2 application(s)\n\
         loop addMonitor(): 1 application(s)\n\
         loop connect(): 3 application(s)\n\
         total applications: 6\n\
         model changed: true\n"
    );
    // per-file outputs concatenate back to the golden model
    let remote = fs::read_to_string(out.join("remote_node.arc")).unwrap();
    let actuator = fs::read_to_string(out.join("actuator.arc")).unwrap();
    assert_eq!(format!("{remote}{actuator}"), fixture("monitored.arc"));
    fs::remove_dir_all(&out).unwrap();
}

#[test]
fn client_auth_adds_the_access_declaration() {
    let out = tempdir("auth");
    let result = cnctrans(
        &[
            "transform",
            "client_auth.mtr",
            "shop.arc",
            "-o",
            out.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(exit_code(&result), 0);
    assert!(stdout(&result).starts_with("loop accessPort(): 1 application(s)\n"));
    assert_eq!(
        fs::read_to_string(out.join("shop.arc")).unwrap(),
        fixture("shop_authorized.arc")
    );
    fs::remove_dir_all(&out).unwrap();
}

#[test]
fn transform_in_place_rewrites_inputs_idempotently() {
    let dir = tempdir("inplace");
    for name in ["remote_node.arc", "actuator.arc"] {
        fs::copy(fixtures().join(name), dir.join(name)).unwrap();
    }
    let module = fixtures().join("add_monitoring.mtr");
    let remote_path = dir.join("remote_node.arc");
    let actuator_path = dir.join("actuator.arc");
    let args = [
        "transform",
        module.to_str().unwrap(),
        remote_path.to_str().unwrap(),
        actuator_path.to_str().unwrap(),
        "--in-place",
    ];
    let first = cnctrans(&args, &[]);
    assert_eq!(exit_code(&first), 0, "stderr: {}", stderr(&first));
    let remote = fs::read_to_string(dir.join("remote_node.arc")).unwrap();
    let actuator = fs::read_to_string(dir.join("actuator.arc")).unwrap();
    assert_eq!(format!("{remote}{actuator}"), fixture("monitored.arc"));

    let second = cnctrans(&args, &[]);
    assert_eq!(exit_code(&second), 0);
    assert!(stdout(&second).contains("total applications: 0\nmodel changed: false\n"));
    assert_eq!(
        fs::read_to_string(dir.join("remote_node.arc")).unwrap(),
        remote
    );
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn the_cap_stops_runaway_rules_with_exit_3() {
    let result = cnctrans(&["transform", "runaway.mtr", "widgets.arc"], &[]);
    assert_eq!(exit_code(&result), 3);
    assert!(stderr(&result).contains("application limit"));

    // a module that would normally make two applications trips a cap of one
    let result = cnctrans(
        &[
            "transform",
            "add_monitoring.mtr",
            "remote_node.arc",
            "actuator.arc",
            "--max-apply",
            "1",
        ],
        &[],
    );
    assert_eq!(exit_code(&result), 3);

    // duplicate-creating rules stop at a fixpoint instead
    let result = cnctrans(&["transform", "dup.mtr", "shop.arc"], &[]);
    assert_eq!(exit_code(&result), 0);
    assert!(stdout(&result).contains("loop dup(): 3 application(s)"));
    assert!(stderr(&result).contains("fixpoint reached with 3 suppressed match(es)"));
}

#[test]
fn the_environment_sets_the_default_cap() {
    let result = cnctrans(
        &[
            "transform",
            "add_monitoring.mtr",
            "remote_node.arc",
            "actuator.arc",
        ],
        &[("CNCTRANS_MAX_APPLY", "1")],
    );
    assert_eq!(exit_code(&result), 3);

    // an explicit flag wins over the environment
    let result = cnctrans(
        &[
            "transform",
            "add_monitoring.mtr",
            "remote_node.arc",
            "actuator.arc",
            "--max-apply",
            "100",
        ],
        &[("CNCTRANS_MAX_APPLY", "1")],
    );
    assert_eq!(exit_code(&result), 0);

    let result = cnctrans(
        &["transform", "dup.mtr", "shop.arc"],
        &[("CNCTRANS_MAX_APPLY", "a lot")],
    );
    assert_eq!(exit_code(&result), 4);
}

#[test]
fn match_lists_bindings_and_is_byte_stable() {
    let args = [
        "match",
        "add_monitoring.mtr",
        "remote_node.arc",
        "actuator.arc",
        "--rule",
        "addPorts",
    ];
    let first = cnctrans(&args, &[]);
    assert_eq!(exit_code(&first), 0);
    assert_eq!(
        stdout(&first),
        "{$name=RemoteNode, $sp=RemoteNodeState}\n\
         {$name=Actuator, $sp=ActuatorState}\n\
         2 match(es)\n"
    );
    let second = cnctrans(&args, &[]);
    assert_eq!(first.stdout, second.stdout);

    let result = cnctrans(
        &["match", "add_monitoring.mtr", "shop.arc", "--rule", "nope"],
        &[],
    );
    assert_eq!(exit_code(&result), 1);
}

#[test]
fn check_warns_by_default_and_fails_strict() {
    let result = cnctrans(&["check", "remote_node.arc"], &[]);
    assert_eq!(exit_code(&result), 0);
    assert_eq!(
        stdout(&result),
        "warning: unresolved subcomponent type 'Actuator' @ remote_node.arc:3\n"
    );

    let result = cnctrans(&["check", "remote_node.arc", "--strict"], &[]);
    assert_eq!(exit_code(&result), 2);
    assert!(stdout(&result).starts_with("error: unresolved subcomponent type 'Actuator'"));

    // the second file resolves the reference
    let result = cnctrans(
        &["check", "remote_node.arc", "actuator.arc", "--strict"],
        &[],
    );
    assert_eq!(exit_code(&result), 0);
    assert_eq!(stdout(&result), "");
}

#[test]
fn transform_rejects_malformed_models_before_running() {
    let dir = tempdir("malformed");
    fs::write(
        dir.join("dup_port.arc"),
        "component A {\n  port in int x, in int x;\n}\n",
    )
    .unwrap();
    let module = fixtures().join("dup.mtr");
    let result = cnctrans(
        &[
            "transform",
            module.to_str().unwrap(),
            dir.join("dup_port.arc").to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(exit_code(&result), 2);
    assert!(stderr(&result).contains("duplicate port name 'x'"));
    fs::remove_dir_all(&dir).unwrap();

    let result = cnctrans(&["transform", "dup.mtr", "widgets.arc", "--strict"], &[]);
    assert_eq!(exit_code(&result), 2);
}

#[test]
fn fmt_normalizes_and_is_a_fixpoint() {
    let result = cnctrans(&["fmt", "shop.arc"], &[]);
    assert_eq!(exit_code(&result), 0);
    assert_eq!(stdout(&result), fixture("shop.arc"));

    let dir = tempdir("fmt");
    fs::write(
        dir.join("messy.arc"),
        "component  A { component T x , y ; port in a; port out b ; }",
    )
    .unwrap();
    let path = dir.join("messy.arc");
    let result = cnctrans(&["fmt", path.to_str().unwrap()], &[]);
    assert_eq!(exit_code(&result), 0);
    assert_eq!(
        stdout(&result),
        "component A {\n  component T x;\n  component T y;\n  port in a, out b;\n}\n"
    );

    let inplace = cnctrans(&["fmt", path.to_str().unwrap(), "--in-place"], &[]);
    assert_eq!(exit_code(&inplace), 0);
    assert_eq!(fs::read_to_string(&path).unwrap(), stdout(&result));
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn derive_grammar_writes_a_reusable_grammar() {
    let dir = tempdir("derive");
    let out = dir.join("cnc-tr.mcg");
    let written = cnctrans(&["derive-grammar", "-o", out.to_str().unwrap()], &[]);
    assert_eq!(exit_code(&written), 0);
    let to_stdout = cnctrans(&["derive-grammar"], &[]);
    assert_eq!(stdout(&to_stdout), fs::read_to_string(&out).unwrap());

    // the derived grammar reserves `not`, so deriving it again collides
    let again = cnctrans(&["derive-grammar", out.to_str().unwrap()], &[]);
    assert_eq!(exit_code(&again), 3);
    assert!(stderr(&again).contains("collides"));
    fs::remove_dir_all(&dir).unwrap();

    let missing = cnctrans(&["derive-grammar", "no_such.mcg"], &[]);
    assert_eq!(exit_code(&missing), 4);
}

#[test]
fn parse_errors_exit_1_and_io_errors_exit_4() {
    let dir = tempdir("errors");
    fs::write(dir.join("broken.arc"), "component {").unwrap();
    let result = cnctrans(&["check", dir.join("broken.arc").to_str().unwrap()], &[]);
    assert_eq!(exit_code(&result), 1);
    fs::remove_dir_all(&dir).unwrap();

    let result = cnctrans(&["check", "no_such.arc"], &[]);
    assert_eq!(exit_code(&result), 4);

    let result = cnctrans(&["transform", "no_such.mtr", "shop.arc"], &[]);
    assert_eq!(exit_code(&result), 4);
}

fn tempdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("cnctrans-test-{tag}-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}

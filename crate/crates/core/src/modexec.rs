//! Module execution: runs a compiled transformation module against a model.
//!
//! Execution starts at `main()`. A plain call applies a transformation's
//! first changing match once; `loop` reapplies until a fixpoint. Instruction
//! methods inline their statements. All statements share one application
//! budget, so runaway rules are cut off no matter where they run.

use thiserror::Error;

use crate::adl::AccessorTable;
use crate::ast::AstNode;
use crate::grammar::GrammarSpec;
use crate::matcher::MatchConfig;
use crate::rewrite::{
    apply_rule_loop, apply_rule_once, AppliedInfo, ApplyContext, ApplyError, DEFAULT_MAX_APPLY,
};
use crate::rule::{MethodBody, Module, Stmt};

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Limit on changing applications across the whole run.
    pub limit: usize,
    /// Record one trace line per changing application.
    pub trace: bool,
}

impl Default for RunOptions {
    fn default() -> RunOptions {
        RunOptions {
            limit: DEFAULT_MAX_APPLY,
            trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatementReport {
    /// The statement as written, e.g. `loop addPorts()`.
    pub label: String,
    /// The transformation that ran.
    pub rule: String,
    pub applications: usize,
}

#[derive(Debug, Default)]
pub struct RunReport {
    pub statements: Vec<StatementReport>,
    pub total_applications: usize,
    pub diagnostics: Vec<String>,
    pub trace: Vec<String>,
    pub changed: bool,
}

#[derive(Debug, Error, PartialEq)]
pub enum ExecError {
    #[error(transparent)]
    Apply(#[from] ApplyError),
    #[error("no method named '{name}'")]
    UnknownMethod { name: String },
}

/// Runs the module's `main()` against `model`, mutating it in place.
pub fn run_module(
    model: &mut AstNode,
    module: &Module,
    base: &GrammarSpec,
    accessors: &AccessorTable,
    config: &MatchConfig,
    options: &RunOptions,
) -> Result<RunReport, ExecError> {
    let mut ctx = ApplyContext::new(base, accessors, config, options.limit);
    let mut report = RunReport::default();
    match module.methods.get("main") {
        Some(MethodBody::Instruction(stmts)) => {
            run_stmts(stmts, model, module, &mut ctx, options, &mut report)?
        }
        // a transformation main is applied once
        Some(MethodBody::Transformation(_)) => {
            run_call("main", model, module, &mut ctx, options, &mut report)?
        }
        None => {
            return Err(ExecError::UnknownMethod {
                name: "main".into(),
            })
        }
    }
    report.total_applications = ctx.applied;
    report.changed = ctx.applied > 0;
    Ok(report)
}

fn run_stmts(
    stmts: &[Stmt],
    model: &mut AstNode,
    module: &Module,
    ctx: &mut ApplyContext,
    options: &RunOptions,
    report: &mut RunReport,
) -> Result<(), ExecError> {
    for stmt in stmts {
        match stmt {
            Stmt::Call { callee, .. } => run_call(callee, model, module, ctx, options, report)?,
            Stmt::Loop { callee, .. } => run_loop(callee, model, module, ctx, options, report)?,
        }
    }
    Ok(())
}

fn run_call(
    callee: &str,
    model: &mut AstNode,
    module: &Module,
    ctx: &mut ApplyContext,
    options: &RunOptions,
    report: &mut RunReport,
) -> Result<(), ExecError> {
    match module.methods.get(callee) {
        None => Err(ExecError::UnknownMethod {
            name: callee.to_string(),
        }),
        // instruction calls inline their statements
        Some(MethodBody::Instruction(stmts)) => {
            run_stmts(stmts, model, module, ctx, options, report)
        }
        Some(MethodBody::Transformation(rule)) => {
            let outcome = apply_rule_once(model, rule, ctx)?;
            let applications = outcome.applied.is_some() as usize;
            if options.trace {
                if let Some(info) = &outcome.applied {
                    report.trace.push(trace_line(callee, info));
                }
            }
            if applications == 0 && outcome.match_count > 0 {
                report.diagnostics.push(format!(
                    "{callee}(): {} match(es) left the model unchanged",
                    outcome.match_count
                ));
            }
            report.statements.push(StatementReport {
                label: format!("{callee}()"),
                rule: callee.to_string(),
                applications,
            });
            Ok(())
        }
    }
}

fn run_loop(
    callee: &str,
    model: &mut AstNode,
    module: &Module,
    ctx: &mut ApplyContext,
    options: &RunOptions,
    report: &mut RunReport,
) -> Result<(), ExecError> {
    let Some(MethodBody::Transformation(rule)) = module.methods.get(callee) else {
        return Err(ExecError::UnknownMethod {
            name: callee.to_string(),
        });
    };
    let outcome = apply_rule_loop(model, rule, ctx)?;
    if options.trace {
        for info in &outcome.applications {
            report.trace.push(trace_line(callee, info));
        }
    }
    if outcome.suppressed > 0 {
        report.diagnostics.push(format!(
            "loop {callee}(): fixpoint reached with {} suppressed match(es)",
            outcome.suppressed
        ));
    }
    report.statements.push(StatementReport {
        label: format!("loop {callee}()"),
        rule: callee.to_string(),
        applications: outcome.applications.len(),
    });
    Ok(())
}

fn trace_line(rule: &str, info: &AppliedInfo) -> String {
    let (file, line) = match &info.location {
        Some(span) => (span.file.as_ref(), span.line),
        None => ("<synthesized>", 0),
    };
    let bindings = info
        .bindings
        .iter()
        .map(|(var, value)| format!("${var}={value}"))
        .collect::<Vec<_>>()
        .join(", ");
    format!("{rule} @ {file}:{line} bindings {{{bindings}}}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adl::{cnc_grammar, normalize};
    use crate::derive::derive_transformation_grammar;
    use crate::engine::parse_model;
    use crate::rule::compile_module;

    fn model(text: &str, file: &str) -> AstNode {
        let mut node = parse_model(cnc_grammar(), "Model", text, file)
            .unwrap_or_else(|e| panic!("model fixture must parse: {e}"));
        normalize(&mut node);
        node
    }

    fn compile(text: &str) -> Module {
        let base = cnc_grammar();
        let derived = derive_transformation_grammar(base).unwrap();
        let ast = parse_model(&derived, "Module", text, "test.mtr")
            .unwrap_or_else(|e| panic!("module fixture must parse: {e}"));
        compile_module(&ast, base, &AccessorTable::for_grammar(base)).unwrap()
    }

    fn run(
        model: &mut AstNode,
        module: &Module,
        options: &RunOptions,
    ) -> Result<RunReport, ExecError> {
        let base = cnc_grammar();
        run_module(
            model,
            module,
            base,
            &AccessorTable::for_grammar(base),
            &MatchConfig::detect(base),
            options,
        )
    }

    const REMOTE: &str = "component RemoteNode {\n  port in int el, in int er;\n  component Actuator left, right;\n  connect el -> left.effort;\n  connect er -> right.effort;\n}\ncomponent Actuator {\n  port in int effort;\n}\n";

    const ADD_MONITORING: &str = "module AddMonitoring {\n  main() { loop addPorts();\n            loop addMonitor();\n            loop connect(); }\n\n  transformation addPorts() {\n    component $name {\n      port [[ :- out $sp state ]] ;\n      not [[ out $_ state ]]\n    }\n    where { $sp = $name.concat(\"State\"); }\n  }\n\n  transformation addMonitor(){\n    component $name {\n      [[ :- component $type monitor;]]\n      not [[ component $_ monitor; ]]\n      [[ :- connect monitor.state -> state; ]];\n      component $_ {}\n    }\n    where { $type = $name.concat(\"Monitor\") }\n  }\n\n  transformation connect(){\n    component $_ {\n      component $type $name;\n      [[ :- connect $name.state -> monitor.$sp; ]];\n      not [[connect $name.state -> monitor.$_;]]\n    }\n    where {$sp = $name.concat(\"State\");}\n  }\n}\n";

    const MONITORED: &str = "component RemoteNode {\n  port in int el, in int er, out RemoteNodeState state;\n  component Actuator left;\n  component Actuator right;\n  connect el -> left.effort;\n  connect er -> right.effort;\n  component RemoteNodeMonitor monitor;\n  connect monitor.state -> state;\n  connect left.state -> monitor.leftState;\n  connect right.state -> monitor.rightState;\n  connect monitor.state -> monitor.monitorState;\n}\ncomponent Actuator {\n  port in int effort, out ActuatorState state;\n}\n";

    #[test]
    fn monitoring_module_reports_per_statement_counts() {
        let mut m = model(REMOTE, "model.arc");
        let module = compile(ADD_MONITORING);
        let report = run(&mut m, &module, &RunOptions::default()).unwrap();
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
        assert_eq!(m, model(MONITORED, "model.arc"));
    }

    #[test]
    fn second_run_is_a_no_op() {
        let mut m = model(REMOTE, "model.arc");
        let module = compile(ADD_MONITORING);
        run(&mut m, &module, &RunOptions::default()).unwrap();
        let report = run(&mut m, &module, &RunOptions::default()).unwrap();
        assert!(report.statements.iter().all(|s| s.applications == 0));
        assert_eq!(report.total_applications, 0);
        assert!(!report.changed);
        assert_eq!(m, model(MONITORED, "model.arc"));
    }

    #[test]
    fn trace_lines_carry_location_and_bindings() {
        let mut m = model(REMOTE, "model.arc");
        let module = compile(ADD_MONITORING);
        let options = RunOptions {
            trace: true,
            ..RunOptions::default()
        };
        let report = run(&mut m, &module, &options).unwrap();
        assert_eq!(report.trace.len(), 6);
        assert_eq!(
            report.trace[0],
            "addPorts @ model.arc:1 bindings {$name=RemoteNode, $sp=RemoteNodeState}"
        );
        assert_eq!(
            report.trace[2],
            "addMonitor @ model.arc:1 bindings {$name=RemoteNode, $type=RemoteNodeMonitor}"
        );
        assert_eq!(
            report.trace[3],
            "connect @ model.arc:1 bindings {$type=Actuator, $name=left, $sp=leftState}"
        );
    }

    #[test]
    fn plain_calls_apply_once_and_flag_no_ops() {
        let mut m = model("component A {}\ncomponent B {}\n", "m.arc");
        // aux() is inlined; its second dup() call changes the second component
        let module = compile(
            "module M {\n  main() { aux(); dup(); dup(); }\n  aux() { dup(); }\n  transformation dup() { component $n { [[ :- trustlevel 7; ]] } }\n}\n",
        );
        let report = run(&mut m, &module, &RunOptions::default()).unwrap();
        let counts: Vec<usize> = report.statements.iter().map(|s| s.applications).collect();
        assert_eq!(counts, vec![1, 1, 0]);
        assert_eq!(
            report.diagnostics,
            vec!["dup(): 2 match(es) left the model unchanged".to_string()]
        );
        assert_eq!(
            m,
            model(
                "component A {\n  trustlevel 7;\n}\ncomponent B {\n  trustlevel 7;\n}\n",
                "m.arc"
            )
        );
    }

    #[test]
    fn a_transformation_main_is_applied_once() {
        let mut m = model("component A {}\ncomponent B {}\n", "m.arc");
        let module = compile(
            "module M { transformation main() { component $n { [[ :- trustlevel 7; ]] } } }",
        );
        let report = run(&mut m, &module, &RunOptions::default()).unwrap();
        assert_eq!(report.total_applications, 1);
        assert_eq!(report.statements.len(), 1);
        assert_eq!(report.statements[0].label, "main()");
    }

    #[test]
    fn fixpoints_report_suppressed_matches() {
        let mut m = model("component A {\n  trustlevel 7;\n}\n", "m.arc");
        let module = compile(
            "module M { main() { loop dup(); } transformation dup() { component $n { [[ :- trustlevel 7; ]] } } }",
        );
        let report = run(&mut m, &module, &RunOptions::default()).unwrap();
        assert_eq!(report.statements[0].applications, 0);
        assert_eq!(
            report.diagnostics,
            vec!["loop dup(): fixpoint reached with 1 suppressed match(es)".to_string()]
        );
    }

    #[test]
    fn the_application_budget_spans_the_whole_run() {
        let mut m = model("component Root {\n  component Widget w;\n}\n", "m.arc");
        let module = compile(
            "module Runaway {\n  main() { loop grow(); }\n  transformation grow() {\n    [[ component $t $n; :- component $t $n2; ]]\n    where { $n2 = $n.concat(\"X\"); }\n  }\n}\n",
        );
        let options = RunOptions {
            limit: 5,
            ..RunOptions::default()
        };
        let err = run(&mut m, &module, &options).unwrap_err();
        assert_eq!(
            err,
            ExecError::Apply(ApplyError::LimitExceeded { limit: 5 })
        );
    }
}

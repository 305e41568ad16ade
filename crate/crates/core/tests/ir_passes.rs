mod common;

use std::f64::consts::PI;

use common::*;
use dproc_core::asm::AsmInstr;
use dproc_core::ir::{
    lint, resolve_fproc, resolve_gates, schedule, scope_pass, Diagnostic, IrError, IrProgram, Pass,
    PulseStmt, Statement,
};
use dproc_core::qbackend::{ScriptedBackend, ScriptedOutcomes};
use serde_json::json;

fn pulses(p: &IrProgram) -> Vec<PulseStmt> {
    let mut v = Vec::new();
    p.walk(&mut |s| {
        if let Statement::Pulse(p) = s {
            v.push(p.clone());
        }
    });
    v
}

fn starts(p: &IrProgram, dest: &str) -> Vec<u64> {
    pulses(p)
        .iter()
        .filter(|p| p.dest == dest)
        .map(|p| p.start_time.unwrap())
        .collect()
}

fn compile_err(prog: &IrProgram, passes: &[Pass]) -> Vec<IrError> {
    match target().compile(prog, passes) {
        Ok(_) => panic!("expected a compile error"),
        Err(e) => e.errors,
    }
}

fn core_asm<'a>(out: &'a dproc_core::ir::CompileOutput, channel: &str) -> &'a [AsmInstr] {
    out.asm
        .cores
        .iter()
        .find(|(k, _)| k.channels().iter().any(|c| c == channel))
        .map(|(_, v)| v.as_slice())
        .unwrap()
}

#[test]
fn gate_expands_to_calibrated_pulse() {
    let t = target();
    let p = resolve_gates(&program(json!([gate("X90", "Q0"), cz("Q0", "Q1")])), &t.cal).unwrap();
    let ps = pulses(&p);
    assert_eq!(ps.len(), 2);
    assert_eq!(ps[0].dest, "Q0.qdrv");
    let g0 = ps[0].group.as_ref().unwrap();
    let g1 = ps[1].group.as_ref().unwrap();
    assert_eq!((g0.gate.as_str(), g0.primary), ("X90", true));
    assert_eq!(g1.qubits, vec!["Q0", "Q1"]);
    assert_ne!(g0.id, g1.id);
}

#[test]
fn read_expands_to_drive_and_window() {
    let t = target();
    let p = resolve_gates(&program(json!([read("Q1")])), &t.cal).unwrap();
    let dests: Vec<String> = pulses(&p).into_iter().map(|p| p.dest).collect();
    assert_eq!(dests, ["Q1.rdrv", "Q1.rdlo"]);
}

#[test]
fn calibrated_virtual_z_surrounds_pulses() {
    let mut t = target();
    let cal = json!({
        "Q0": [
            {"name": "virtual_z", "freq": "Q0.freq", "phase": 0.5},
            {"name": "pulse", "dest": "Q0.qdrv", "freq": "Q0.freq", "amp": 0.2,
             "env": {"env_func": "square", "paradict": {"twidth": 2e-8}}},
            {"name": "virtual_z", "freq": "Q0.freq", "phase": 0.25}
        ]
    });
    t.cal
        .gates
        .insert("Zx".into(), serde_json::from_value(cal).unwrap());
    let p = resolve_gates(&program(json!([gate("Zx", "Q0")])), &t.cal).unwrap();
    let kinds: Vec<&str> = p.statements.iter().map(Statement::kind).collect();
    assert_eq!(kinds, ["virtual_z", "pulse", "virtual_z"]);
    let out = compile(&t, &program(json!([gate("Zx", "Q0"), gate("X90", "Q0")])));
    let ph: Vec<f64> = pulses(&out.program).iter().map(|p| p.phase).collect();
    assert!((ph[0] - 0.5).abs() < 1e-12 && (ph[1] - 0.75).abs() < 1e-12, "{ph:?}");
}

#[test]
fn unknown_gate_is_reported() {
    let errs = compile_err(&program(json!([gate("Y90", "Q0")])), &Pass::DEFAULT);
    assert!(matches!(&errs[0], IrError::UnknownGate { gate, .. } if gate == "Y90"));
}

#[test]
fn loop_variable_lives_on_every_core_it_touches() {
    let out = compile(
        &target(),
        &program(json!([
            {"name": "declare", "var": "i", "dtype": "int"},
            {"name": "set_var", "var": "i", "value": 0},
            {"name": "loop", "cond_lhs": 3, "alu_cond": "gt", "cond_rhs": "i", "body": [
                gate("X90", "Q0"), gate("X90", "Q1"),
                {"name": "alu", "op": "add", "lhs": 1, "rhs": "i", "out": "i"}
            ]}
        ])),
    );
    for ch in ["Q0.qdrv", "Q1.qdrv"] {
        let asm = core_asm(&out, ch);
        assert!(asm
            .iter()
            .any(|i| matches!(i, AsmInstr::DeclareReg { name, .. } if name == "i")));
        assert!(asm.iter().any(|i| matches!(i, AsmInstr::JumpCond { .. })));
    }
    assert_eq!(out.asm.cores.len(), 2);
}

#[test]
fn explicit_scope_is_enforced() {
    let prog = program(json!([
        {"name": "declare", "var": "v", "dtype": "int", "scope": ["Q0"]},
        {"name": "branch_var", "cond_lhs": 0, "alu_cond": "eq", "cond_rhs": "v",
         "true": [gate("X90", "Q1")], "false": [], "scope": ["Q0"]}
    ]));
    let errs = compile_err(&prog, &Pass::DEFAULT);
    assert!(errs.iter().any(|e| matches!(e, IrError::ScopeViolation { .. })), "{errs:?}");
}

#[test]
fn undeclared_variable_is_reported() {
    let errs = compile_err(
        &program(json!([{"name": "set_var", "var": "x", "value": 1}])),
        &Pass::DEFAULT,
    );
    assert!(matches!(&errs[0], IrError::UndeclaredVariable(v) if v == "x"));
}

#[test]
fn loop_lowers_to_three_blocks_with_back_edge() {
    let t = target();
    let out = t
        .compile(
            &program(json!([
                {"name": "declare", "var": "i", "dtype": "int"},
                {"name": "loop", "cond_lhs": 3, "alu_cond": "gt", "cond_rhs": "i", "body": [
                    gate("X90", "Q0"),
                    {"name": "alu", "op": "add", "lhs": 1, "rhs": "i", "out": "i"}
                ]}
            ])),
            &Pass::DEFAULT,
        )
        .unwrap();
    let labels: Vec<&str> = out.cfg.blocks.iter().map(|b| b.label.as_str()).collect();
    assert_eq!(labels, ["b0", "loop_1_body", "loop_1_exit"]);
    let back: Vec<_> = out.cfg.edges.iter().filter(|e| out.cfg.is_back_edge(e)).collect();
    assert_eq!(back.len(), 1);
    assert_eq!((back[0].from, back[0].to), (1, 1));
}

#[test]
fn accumulated_virtual_z_shifts_later_pulses() {
    let out = compile(&target(), &program(json!([vz("Q0", PI), gate("X90", "Q0")])));
    let p = &pulses(&out.program)[0];
    assert!((p.phase - PI).abs() < 1e-12);
    assert_eq!(p.freq, dproc_core::ir::FreqRef::Hz(4.86e9));
}

#[test]
fn path_dependent_phase_without_binding_fails() {
    let prog = program(json!([
        {"name": "declare", "var": "v", "dtype": "int", "scope": ["Q0"]},
        {"name": "branch_var", "cond_lhs": 0, "alu_cond": "eq", "cond_rhs": "v",
         "true": [vz("Q0", 1.0)], "false": []},
        gate("X90", "Q0")
    ]));
    let errs = compile_err(&prog, &Pass::DEFAULT);
    assert!(
        matches!(&errs[0], IrError::InconsistentPhaseAtMerge { freq_hz, .. } if *freq_hz == 4.86e9),
        "{errs:?}"
    );
    // A full turn on one side is consistent.
    let ok = program(json!([
        {"name": "declare", "var": "v", "dtype": "int", "scope": ["Q0"]},
        {"name": "branch_var", "cond_lhs": 0, "alu_cond": "eq", "cond_rhs": "v",
         "true": [vz("Q0", 2.0 * PI)], "false": []},
        gate("X90", "Q0")
    ]));
    compile(&target(), &ok);
}

#[test]
fn bound_phase_becomes_register_arithmetic() {
    let out = compile(&target(), &load_program("cross_feedback.json"));
    let q0 = core_asm(&out, "Q0.qdrv");
    let add = q0
        .iter()
        .find_map(|i| match i {
            AsmInstr::RegAlu { in0, alu_op, out_reg, .. } => Some((in0.clone(), *alu_op, out_reg.clone())),
            _ => None,
        })
        .unwrap();
    assert_eq!(add.0, dproc_core::asm::Value::Num(PI));
    assert_eq!(add.1, dproc_core::isa::AluOp::Add);
    assert_eq!(add.2, "q0_phase");
    let reg_pulses = q0
        .iter()
        .filter(|i| {
            matches!(i, AsmInstr::Pulse { phase: Some(dproc_core::asm::Value::Reg(r)), .. } if r == "q0_phase")
        })
        .count();
    assert_eq!(reg_pulses, 2);
    assert!(!out
        .program
        .statements
        .iter()
        .any(|s| matches!(s, Statement::BindPhase { .. } | Statement::VirtualZ { .. })));
}

#[test]
fn unknown_fproc_channel_is_reported() {
    let prog = program(json!([
        read("Q1"),
        {"name": "branch_fproc", "cond_lhs": 1, "alu_cond": "eq", "func_id": "Q7.meas",
         "true": [gate("X90", "Q1")], "false": [], "scope": ["Q1"]}
    ]));
    let errs = compile_err(&prog, &Pass::DEFAULT);
    assert!(matches!(&errs[0], IrError::UnknownFprocChannel(n) if n == "Q7.meas"));
}

#[test]
fn first_pulse_starts_after_prologue() {
    let out = compile(&target(), &program(json!([gate("X90", "Q0")])));
    assert_eq!(starts(&out.program, "Q0.qdrv"), [5]);
}

#[test]
fn back_to_back_pulses_are_contiguous() {
    let out = compile(&target(), &program(json!([gate("X90", "Q0"), gate("X90", "Q0")])));
    assert_eq!(starts(&out.program, "Q0.qdrv"), [5, 20]);
}

#[test]
fn barrier_aligns_cores() {
    let out = compile(
        &target(),
        &program(json!([
            gate("X90", "Q0"), gate("X90", "Q0"), gate("X90", "Q0"),
            {"name": "barrier", "qubit": ["Q0", "Q1"]},
            gate("X90", "Q0"), gate("X90", "Q1")
        ])),
    );
    assert_eq!(starts(&out.program, "Q0.qdrv")[3], starts(&out.program, "Q1.qdrv")[0]);
    assert!(starts(&out.program, "Q1.qdrv")[0] >= 50);
}

#[test]
fn delay_shifts_following_pulses() {
    let out = compile(
        &target(),
        &program(json!([gate("X90", "Q0"), {"name": "delay", "t": 1e-6}, gate("X90", "Q0")])),
    );
    assert_eq!(starts(&out.program, "Q0.qdrv"), [5, 520]);
}

#[test]
fn cross_core_gate_waits_for_both_qubits() {
    let out = compile(
        &target(),
        &program(json!([gate("X90", "Q1"), gate("X90", "Q1"), cz("Q0", "Q1")])),
    );
    assert!(starts(&out.program, "Q0.qdrv")[0] >= 35);
}

fn raw_pulse(start: u64) -> serde_json::Value {
    json!({"name": "pulse", "dest": "Q0.qdrv", "freq": 4.86e9, "amp": 0.5, "start_time": start,
           "env": {"env_func": "square", "paradict": {"twidth": 4e-8}}})
}

#[test]
fn lint_flags_early_trigger() {
    let t = target();
    let prog = program(json!([raw_pulse(1)]));
    let ctx = t.context();
    let p = scope_pass(&prog, &ctx).unwrap();
    let d = lint(&p, &ctx).unwrap();
    assert!(matches!(d[0], Diagnostic::TriggerTooEarly { start: 1, .. }), "{d:?}");
    let errs = compile_err(&prog, &[Pass::Scope, Pass::LowerControlFlow, Pass::Lint, Pass::Emit]);
    assert!(matches!(&errs[0], IrError::Lint(_)));
}

#[test]
fn lint_flags_channel_overlap() {
    let t = target();
    let ctx = t.context();
    let p = scope_pass(&program(json!([raw_pulse(10), raw_pulse(20)])), &ctx).unwrap();
    let d = lint(&p, &ctx).unwrap();
    assert!(
        d.iter().any(|d| matches!(d, Diagnostic::ChannelOverlap { start: 20, free: 30, .. })),
        "{d:?}"
    );
}

#[test]
fn scheduler_keeps_explicit_start_times() {
    let t = target();
    let ctx = t.context();
    let p = scope_pass(&program(json!([raw_pulse(100), raw_pulse(140)])), &ctx).unwrap();
    let s = schedule(&p, &ctx).unwrap();
    assert_eq!(starts(&s, "Q0.qdrv"), [100, 140]);
    assert!(lint(&s, &ctx).unwrap().is_empty());
}

#[test]
fn passes_are_idempotent() {
    let t = target();
    let ctx = t.context();
    let prog = load_program("cross_feedback.json");
    let g = resolve_gates(&prog, &t.cal).unwrap();
    assert_eq!(resolve_gates(&g, &t.cal).unwrap(), g);
    let s = scope_pass(&g, &ctx).unwrap();
    assert_eq!(scope_pass(&s, &ctx).unwrap(), s);
    let (l, _) = dproc_core::ir::lower_control_flow(&s, &ctx).unwrap();
    let v = dproc_core::ir::resolve_virtualz(&l, &ctx).unwrap();
    let f = resolve_fproc(&v, &ctx).unwrap();
    assert_eq!(resolve_fproc(&f, &ctx).unwrap(), f);
    let sc = schedule(&f, &ctx).unwrap();
    assert_eq!(schedule(&sc, &ctx).unwrap(), sc);
}

#[test]
fn pass_order_is_checked() {
    let prog = load_program("reset_ir.json");
    for passes in [
        vec![Pass::LowerControlFlow, Pass::Emit],
        vec![Pass::Emit],
        vec![Pass::ResolveGates, Pass::Scope, Pass::Schedule, Pass::Emit],
    ] {
        let errs = compile_err(&prog, &passes);
        assert!(matches!(&errs[0], IrError::InvalidPassOrder { .. }), "{passes:?}: {errs:?}");
    }
    let errs = compile_err(&prog, &[Pass::ResolveGates]);
    assert!(matches!(&errs[0], IrError::InvalidPassOrder { .. }));
    assert!(Pass::parse_list("resolve_gates,bogus").is_err());
    assert_eq!(Pass::parse_list("scope,emit").unwrap(), [Pass::Scope, Pass::Emit]);
}

#[test]
fn scheduled_program_recompiles_to_identical_binary() {
    let t = target();
    for f in ["reset_ir.json", "cross_feedback.json"] {
        let out = compile(&t, &load_program(f));
        let again = t.compile(&out.program, &[Pass::Lint, Pass::Emit]).unwrap();
        assert_eq!(images(&t, &out), images(&t, &again), "{f}");
    }
}

#[test]
fn reset_compiles_to_hand_timing() {
    let t = target();
    let out = compile(&t, &load_program("reset_ir.json"));
    assert_eq!(starts(&out.program, "Q1.rdrv"), [5]);
    assert_eq!(starts(&out.program, "Q1.rdlo"), [325]);
    let asm = core_asm(&out, "Q1.qdrv");
    let i = asm
        .iter()
        .position(|i| matches!(i, AsmInstr::JumpFproc { .. }))
        .unwrap();
    assert_eq!(asm[i - 1], AsmInstr::Idle { end_time: 1184 });

    let mut m = machine(&t, &out);
    let one = run_once(
        &mut m,
        &mut ScriptedBackend::new(ScriptedOutcomes::single("Q1", &[1])),
    );
    let fp = &one.fproc[0];
    assert_eq!(fp.issue_cycle, 1184);
    assert_eq!(one.events_on("Q1.qdrv").count(), 1);
    let zero = run_once(
        &mut m,
        &mut ScriptedBackend::new(ScriptedOutcomes::single("Q1", &[0])),
    );
    assert_eq!(zero.events_on("Q1.qdrv").count(), 0);
}

#[test]
fn cross_core_feedback_timing_matches_single_core_reset() {
    let t = target();
    let reset = compile(&t, &load_program("reset_ir.json"));
    let cross = compile(&t, &load_program("cross_feedback.json"));
    let shift = starts(&cross.program, "Q1.rdrv")[0] - starts(&reset.program, "Q1.rdrv")[0];
    assert_eq!(shift, 250_000);
    let idle = |out: &dproc_core::ir::CompileOutput, ch: &str| {
        let asm = core_asm(out, ch);
        let i = asm
            .iter()
            .position(|i| matches!(i, AsmInstr::JumpFproc { .. }))
            .unwrap();
        match asm[i - 1] {
            AsmInstr::Idle { end_time } => u64::from(end_time),
            _ => panic!("no wait before jump_fproc"),
        }
    };
    assert_eq!(idle(&cross, "Q0.qdrv"), idle(&reset, "Q1.qdrv") + shift);
    let first = |out: &dproc_core::ir::CompileOutput, ch: &str| starts(&out.program, ch)[0];
    assert_eq!(
        first(&cross, "Q0.qdrv") - idle(&cross, "Q0.qdrv"),
        first(&reset, "Q1.qdrv") - idle(&reset, "Q1.qdrv")
    );
    // Final reads are aligned by the barrier.
    assert_eq!(starts(&cross.program, "Q0.rdrv"), starts(&cross.program, "Q1.rdrv")[1..]);

    let mut m = machine(&t, &cross);
    for bit in [0u8, 1] {
        let mut b = ScriptedBackend::new(
            ScriptedOutcomes::from_json(&format!(r#"{{"outcomes": {{"Q1": [{bit}, 0], "Q0": [0]}}}}"#)).unwrap(),
        );
        let tr = run_once(&mut m, &mut b);
        let x90s = tr.events_on("Q0.qdrv").count();
        assert_eq!(x90s, if bit == 1 { 2 } else { 0 });
    }
}

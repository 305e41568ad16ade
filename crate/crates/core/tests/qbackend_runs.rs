mod common;

use std::collections::BTreeMap;

use common::*;
use dproc_core::qbackend::{
    report, run_shots, BackendError, Exhaustion, ScriptedBackend, ScriptedOutcomes,
    StateVectorBackend,
};
use dproc_core::sim::{self, SimError};
use serde_json::json;

#[test]
fn scripted_replay_of_statevector_bits_gives_same_trace() {
    let t = target();
    for (i, (prep, basis)) in [(Prep::Plus, Basis::Y), (Prep::Minus, Basis::Z), (Prep::One, Basis::X)]
        .into_iter()
        .enumerate()
    {
        let out = compile(&t, &teleport(prep, basis));
        let m = machine(&t, &out);
        for seed in 0..8 {
            let mut sv = statevector(&out, &m, seed + 100 * i as u64);
            let recorded = run_once(&mut m.clone(), &mut sv);
            let mut outcomes: BTreeMap<String, Vec<u8>> = BTreeMap::new();
            for r in &recorded.measurements {
                outcomes.entry(r.qubit.clone()).or_default().push(r.bit);
            }
            let mut scripted = ScriptedBackend::new(ScriptedOutcomes {
                outcomes,
                exhausted: Exhaustion::Error,
            });
            let replayed = run_once(&mut m.clone(), &mut scripted);
            assert_eq!(replayed, recorded, "case {i}, seed {seed}");
        }
    }
}

#[test]
fn unmapped_drive_pulse_is_an_error() {
    let t = target();
    let out = compile(&t, &program(json!([gate("X90", "Q0"), read("Q0")])));
    let m = machine(&t, &out);
    let mut sv = StateVectorBackend::seeded(vec!["Q0".into()], BTreeMap::new(), 0).unwrap();
    let err = sim::run(&mut m.clone(), &mut sv).unwrap_err();
    assert!(
        matches!(err.error, SimError::Backend(BackendError::UnmappedPulse { ref channel, .. }) if channel == "Q0.qdrv"),
        "{err}"
    );
}

#[test]
fn scripted_runs_repeat_exactly() {
    let t = target();
    let out = compile(&t, &load_program("reset_ir.json"));
    let m = machine(&t, &out);
    let run = || {
        run_shots(&m, 20, 5, |_, _| Ok(ScriptedBackend::new(ScriptedOutcomes::single("Q1", &[1, 0]))))
            .unwrap()
    };
    let a = run();
    assert_eq!(a, run());
    assert!(a.iter().all(|r| r.mid_bit("Q1") == Some(1)));
}

#[test]
fn report_partitions_by_mid_circuit_bits() {
    let t = target();
    let out = compile(&t, &teleport(Prep::Plus, Basis::Z));
    let m = machine(&t, &out);
    let records = shots(&out, &m, 2000, 9);
    let rep = report(&records, 9);
    assert_eq!(rep.shots, 2000);
    assert_eq!(rep.expectations.len(), 1);
    assert_eq!(rep.expectations[0].qubit, "Q2");
    assert_eq!(rep.conditioned.len(), 4);
    assert_eq!(rep.conditioned.iter().map(|p| p.n).sum::<u64>(), 2000);
    for p in &rep.conditioned {
        assert_eq!(p.mid.len(), 2);
        let e = &p.expectations[0];
        assert_eq!(e.n, p.n);
        assert!(e.expectation.abs() < 4.0 / (p.n as f64).sqrt(), "{p:?}");
    }
    let empty = report(&[], 0);
    assert!(empty.expectations.is_empty() && empty.conditioned.is_empty());
}

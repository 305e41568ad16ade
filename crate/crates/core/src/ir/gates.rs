//! Gate and read expansion through the calibration.

use super::calibration::{CalEntry, GateCalibration};
use super::program::{IrProgram, PulseGroup, PulseStmt, Statement};
use super::IrError;

/// Calibration entry used for `read`.
pub const READ_GATE: &str = "read";

/// Replaces every gate and read with its calibrated pulses and virtual-Z
/// rotations. Pulses of one gate share a [`PulseGroup`] and are listed in
/// offset order.
pub fn resolve_gates(prog: &IrProgram, cal: &GateCalibration) -> Result<IrProgram, Vec<IrError>> {
    let mut x = Expander {
        cal,
        next_group: next_group_id(prog),
        errors: Vec::new(),
    };
    let statements = x.block(&prog.statements);
    if x.errors.is_empty() {
        Ok(IrProgram::new(statements))
    } else {
        Err(x.errors)
    }
}

fn next_group_id(prog: &IrProgram) -> u32 {
    let mut next = 0;
    prog.walk(&mut |s| {
        if let Statement::Pulse(PulseStmt { group: Some(g), .. }) = s {
            next = next.max(g.id + 1);
        }
    });
    next
}

struct Expander<'a> {
    cal: &'a GateCalibration,
    next_group: u32,
    errors: Vec<IrError>,
}

impl Expander<'_> {
    fn block(&mut self, stmts: &[Statement]) -> Vec<Statement> {
        let mut out = Vec::with_capacity(stmts.len());
        for s in stmts {
            match s {
                Statement::Gate { gate, qubit } => self.expand(gate, qubit, &mut out),
                Statement::Read { qubit } => {
                    for q in qubit {
                        self.expand(READ_GATE, std::slice::from_ref(q), &mut out);
                    }
                }
                _ => {
                    let mut s = s.clone();
                    for b in s.blocks_mut() {
                        *b = self.block(b);
                    }
                    out.push(s);
                }
            }
        }
        out
    }

    fn expand(&mut self, gate: &str, qubits: &[String], out: &mut Vec<Statement>) {
        let Some(entries) = self.cal.lookup(gate, qubits) else {
            self.errors.push(IrError::UnknownGate {
                gate: gate.to_string(),
                qubits: qubits.join(","),
            });
            return;
        };
        let id = self.next_group;
        self.next_group += 1;
        let mut pulses = Vec::new();
        let mut after = Vec::new();
        for e in entries {
            match e {
                CalEntry::Pulse {
                    dest,
                    freq,
                    phase,
                    amp,
                    env,
                    t0,
                } => pulses.push(PulseStmt {
                    freq: freq.clone(),
                    phase: *phase,
                    amp: *amp,
                    env: env.clone(),
                    dest: dest.clone(),
                    start_time: None,
                    phase_var: None,
                    group: Some(PulseGroup {
                        id,
                        gate: gate.to_string(),
                        qubits: qubits.to_vec(),
                        offset: *t0,
                        base_phase: *phase,
                        primary: false,
                    }),
                }),
                CalEntry::VirtualZ { freq, phase } => {
                    let vz = Statement::VirtualZ {
                        phase: *phase,
                        qubit: None,
                        freq: Some(freq.clone()),
                    };
                    // Rotations listed before every pulse precede the gate;
                    // the rest follow it.
                    if pulses.is_empty() {
                        out.push(vz);
                    } else {
                        after.push(vz);
                    }
                }
            }
        }
        pulses.sort_by(|a, b| offset(a).total_cmp(&offset(b)));
        let primary = pulses
            .iter()
            .position(|p| p.dest.ends_with(".qdrv"))
            .unwrap_or(0);
        if let Some(g) = pulses.get_mut(primary).and_then(|p| p.group.as_mut()) {
            g.primary = true;
        }
        out.extend(pulses.into_iter().map(Statement::Pulse));
        out.extend(after);
    }
}

fn offset(p: &PulseStmt) -> f64 {
    p.group.as_ref().map_or(0.0, |g| g.offset)
}

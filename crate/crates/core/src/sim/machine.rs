use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use serde::{Deserialize, Serialize};

use super::fproc::FprocBank;
use super::trace::{
    CoreSummary, FprocRecord, MeasurementRecord, PhaseResetRecord, PulseEvent, Termination, Trace,
};
use super::{Readout, SimConfig, SimError, SimFailure};
use crate::asm::{CoreImage, CoreKey, PROGRAM_MEMORY_WORDS};
use crate::isa::{
    decode_with, DecodeMode, FieldSource, Instruction, Operand, PulseFields, AMP_WORD_BITS,
    ENV_WORD_BITS, FREQ_WORD_BITS, NUM_REGS, PHASE_WORD_BITS,
};
use crate::qbackend::MeasurementBackend;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoreStatus {
    Running,
    WaitingTrigger,
    WaitingIdle,
    WaitingFproc,
    Done,
}

/// Latched pulse parameters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PulseRegister {
    pub env: u32,
    pub phase: u32,
    pub freq: u16,
    pub amp: u16,
    pub cfg: u8,
}

fn mask(v: i32, bits: u32) -> u32 {
    (v as u32) & ((1u32 << bits) - 1)
}

impl PulseRegister {
    fn apply(&mut self, f: &PulseFields, reg_value: i32) {
        match f.env {
            FieldSource::Keep => {}
            FieldSource::Imm(v) => self.env = v,
            FieldSource::Reg => self.env = mask(reg_value, ENV_WORD_BITS),
        }
        match f.phase {
            FieldSource::Keep => {}
            FieldSource::Imm(v) => self.phase = v,
            FieldSource::Reg => self.phase = mask(reg_value, PHASE_WORD_BITS),
        }
        match f.freq {
            FieldSource::Keep => {}
            FieldSource::Imm(v) => self.freq = v,
            FieldSource::Reg => self.freq = mask(reg_value, FREQ_WORD_BITS) as u16,
        }
        match f.amp {
            FieldSource::Keep => {}
            FieldSource::Imm(v) => self.amp = v,
            FieldSource::Reg => self.amp = mask(reg_value, AMP_WORD_BITS) as u16,
        }
        if let Some(c) = f.cfg {
            self.cfg = c;
        }
    }
}

/// Architectural state of one core.
#[derive(Debug, Clone, PartialEq)]
pub struct CoreState {
    pub key: CoreKey,
    pub ip: usize,
    pub regs: [i32; NUM_REGS as usize],
    pub pulse: PulseRegister,
    /// Accumulated `inc_qclk` offset: `time_ref = global cycle + offset`.
    pub offset: i64,
    pub status: CoreStatus,
    pub done_cycle: Option<u64>,
    last_cycle: u64,
    program: Vec<Instruction>,
    image: CoreImage,
}

impl CoreState {
    pub fn time_ref(&self, global: u64) -> i64 {
        global as i64 + self.offset
    }

    pub fn program(&self) -> &[Instruction] {
        &self.program
    }

    fn reset(&mut self) {
        self.ip = 0;
        self.regs = [0; NUM_REGS as usize];
        self.pulse = PulseRegister::default();
        self.offset = 0;
        self.status = CoreStatus::Running;
        self.done_cycle = None;
        self.last_cycle = 0;
    }

    fn operand(&self, op: Operand) -> i32 {
        match op {
            Operand::Reg(r) => self.regs[usize::from(r)],
            Operand::Imm(v) => v,
        }
    }
}

/// Loaded core bank. Cloning a machine gives an independent copy, which is
/// how parallel shots run.
#[derive(Debug, Clone)]
pub struct Machine {
    cores: Vec<CoreState>,
    cfg: SimConfig,
    readouts: BTreeMap<String, Readout>,
}

impl Machine {
    pub fn cores(&self) -> &[CoreState] {
        &self.cores
    }

    pub fn core(&self, key: &CoreKey) -> Option<&CoreState> {
        self.cores.iter().find(|c| &c.key == key)
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    fn reset(&mut self) {
        self.cores.iter_mut().for_each(CoreState::reset);
    }
}

/// Decodes every image and resets all cores to address 0 at cycle 0.
pub fn load(images: &BTreeMap<CoreKey, CoreImage>, cfg: &SimConfig) -> Result<Machine, SimError> {
    if !cfg.timing.is_valid() || cfg.max_cycles == 0 {
        return Err(SimError::InvalidConfig(
            "clock, issue costs, FPROC latency and max_cycles must be positive".into(),
        ));
    }
    if images.len() > cfg.max_cores {
        return Err(SimError::TooManyCores {
            images: images.len(),
            max: cfg.max_cores,
        });
    }
    let mode = if cfg.strict {
        DecodeMode::Strict
    } else {
        DecodeMode::Lenient
    };
    let mut cores = Vec::with_capacity(images.len());
    for (key, img) in images {
        if img.binary.len() > PROGRAM_MEMORY_WORDS {
            return Err(SimError::ProgramTooLarge {
                core: key.to_string(),
                words: img.binary.len(),
                limit: PROGRAM_MEMORY_WORDS,
            });
        }
        let program = img
            .binary
            .iter()
            .enumerate()
            .map(|(addr, &w)| {
                decode_with(w, mode)
                    .map(|d| d.instr)
                    .map_err(|source| SimError::Decode {
                        core: key.to_string(),
                        addr,
                        source,
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut core = CoreState {
            key: key.clone(),
            ip: 0,
            regs: [0; NUM_REGS as usize],
            pulse: PulseRegister::default(),
            offset: 0,
            status: CoreStatus::Running,
            done_cycle: None,
            last_cycle: 0,
            program,
            image: img.clone(),
        };
        core.reset();
        cores.push(core);
    }
    let readouts = cfg
        .readouts
        .iter()
        .map(|r| (r.channel.clone(), r.clone()))
        .collect();
    Ok(Machine {
        cores,
        cfg: cfg.clone(),
        readouts,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Kind {
    Visible { slot: u16, bit: u8 },
    Measure { channel: String },
    Fire { core: usize },
    FprocResponse { core: usize, value: i32 },
    Fetch { core: usize },
}

impl Kind {
    // Same-cycle order: results land before reads, measurements precede
    // pulses that start as the window closes, fetches come last.
    fn rank(&self) -> u8 {
        match self {
            Kind::Visible { .. } => 0,
            Kind::Measure { .. } => 1,
            Kind::Fire { .. } => 2,
            Kind::FprocResponse { .. } => 3,
            Kind::Fetch { .. } => 4,
        }
    }
}

#[derive(Debug, PartialEq, Eq)]
struct Event {
    t: u64,
    seq: u64,
    kind: Kind,
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed: BinaryHeap is a max-heap.
        (other.t, other.kind.rank(), other.seq).cmp(&(self.t, self.kind.rank(), self.seq))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Pending {
    addr: usize,
    start_time: u32,
    late: bool,
}

struct Run<'m> {
    m: &'m mut Machine,
    backend: &'m mut dyn MeasurementBackend,
    bank: FprocBank,
    queue: BinaryHeap<Event>,
    seq: u64,
    pending: Vec<Option<Pending>>,
    trace: Trace,
    now: u64,
}

impl Run<'_> {
    fn push(&mut self, t: u64, kind: Kind) {
        self.seq += 1;
        self.queue.push(Event {
            t,
            seq: self.seq,
            kind,
        });
    }

    fn name(&self, core: usize) -> String {
        self.m.cores[core].key.to_string()
    }

    fn step(&mut self, ev: Event) -> Result<(), SimError> {
        if ev.t > self.m.cfg.max_cycles {
            return Err(SimError::MaxCyclesExceeded(self.m.cfg.max_cycles));
        }
        self.now = ev.t;
        match ev.kind {
            Kind::Visible { slot, bit } => self.bank.write(slot, i32::from(bit)),
            Kind::Measure { channel } => {
                let r = self.m.readouts[&channel].clone();
                let bit = u8::from(self.backend.measure(&r, ev.t)?);
                let visible = ev.t + u64::from(r.delay_cycles);
                self.push(visible, Kind::Visible { slot: r.slot, bit });
                self.trace.measurements.push(MeasurementRecord {
                    qubit: r.qubit,
                    channel,
                    slot: r.slot,
                    demod_end: ev.t,
                    visible_cycle: visible,
                    bit,
                });
            }
            Kind::Fire { core } => self.fire(core, ev.t)?,
            Kind::FprocResponse { core, value } => self.fproc_response(core, value, ev.t),
            Kind::Fetch { core } => self.fetch(core, ev.t)?,
        }
        Ok(())
    }

    fn fire(&mut self, core: usize, t: u64) -> Result<(), SimError> {
        let p = self.pending[core].take().expect("trigger pending");
        let c = &self.m.cores[core];
        let channel = c
            .image
            .channel_for_cfg(c.pulse.cfg)
            .expect("cfg checked at latch")
            .to_string();
        let (env_addr, duration) = crate::isa::split_env_word(c.pulse.env);
        let event = PulseEvent {
            core,
            addr: p.addr as u16,
            freq_hz: c.image.freq_hz(&channel, c.pulse.freq),
            channel,
            trigger_cycle: t,
            start_time: p.start_time,
            env_addr,
            duration,
            phase_word: c.pulse.phase,
            freq_word: c.pulse.freq,
            amp_word: c.pulse.amp,
            cfg: c.pulse.cfg,
            late: p.late,
        };
        self.backend.on_pulse(&event)?;
        if self.m.readouts.contains_key(&event.channel) {
            self.push(
                event.end_cycle(),
                Kind::Measure {
                    channel: event.channel.clone(),
                },
            );
        }
        self.trace.events.push(event);
        let c = &mut self.m.cores[core];
        c.ip += 1;
        c.status = CoreStatus::Running;
        self.push(t, Kind::Fetch { core });
        Ok(())
    }

    fn fproc_response(&mut self, core: usize, value: i32, t: u64) {
        let c = &mut self.m.cores[core];
        let cost = match c.program[c.ip] {
            Instruction::JumpFproc { op, in0, addr, .. } => {
                let taken = op.apply(c.operand(in0), value) != 0;
                c.ip = if taken { usize::from(addr) } else { c.ip + 1 };
                self.m.cfg.timing.cost(crate::isa::OpClass::JumpFproc)
            }
            Instruction::AluFproc { op, in0, dest, .. } => {
                c.regs[usize::from(dest)] = op.apply(c.operand(in0), value);
                c.ip += 1;
                self.m.cfg.timing.cost(crate::isa::OpClass::AluFproc)
            }
            _ => unreachable!("FPROC response for a non-FPROC instruction"),
        };
        c.status = CoreStatus::Running;
        self.push(t + u64::from(cost), Kind::Fetch { core });
    }

    fn fetch(&mut self, core: usize, g: u64) -> Result<(), SimError> {
        let strict = self.m.cfg.strict;
        let name = self.name(core);
        let c = &mut self.m.cores[core];
        c.last_cycle = g;
        c.status = CoreStatus::Running;
        let Some(&instr) = c.program.get(c.ip) else {
            return Err(SimError::IpOutOfRange {
                core: name,
                ip: c.ip,
                len: c.program.len(),
            });
        };
        let addr = c.ip;
        let cost = u64::from(self.m.cfg.timing.cost(instr.class()));
        let mut next = Some(g + cost);
        match instr {
            Instruction::PulseWrite { reg, fields } => {
                let v = c.regs[usize::from(reg)];
                c.pulse.apply(&fields, v);
                c.ip += 1;
            }
            Instruction::PulseWriteTrig {
                reg,
                fields,
                start_time,
            } => {
                let v = c.regs[usize::from(reg)];
                c.pulse.apply(&fields, v);
                if c.image.channel_for_cfg(c.pulse.cfg).is_none() {
                    return Err(SimError::UnknownElement {
                        core: name,
                        addr,
                        cfg: c.pulse.cfg,
                    });
                }
                let earliest = (g + cost) as i64;
                let mut fire = i64::from(start_time) - c.offset;
                let mut late = false;
                if fire < earliest {
                    if strict {
                        return Err(SimError::TriggerMissed {
                            core: name,
                            addr,
                            start_time,
                            earliest: earliest + c.offset,
                        });
                    }
                    fire = earliest;
                    late = true;
                }
                c.status = CoreStatus::WaitingTrigger;
                self.pending[core] = Some(Pending {
                    addr,
                    start_time,
                    late,
                });
                self.push(fire as u64, Kind::Fire { core });
                next = None;
            }
            Instruction::RegAlu { op, in0, in1, dest } => {
                c.regs[usize::from(dest)] = op.apply(c.operand(in0), c.regs[usize::from(in1)]);
                c.ip += 1;
            }
            Instruction::Jump { addr } => c.ip = usize::from(addr),
            Instruction::JumpCond { op, in0, in1, addr } => {
                let taken = op.apply(c.operand(in0), c.regs[usize::from(in1)]) != 0;
                c.ip = if taken { usize::from(addr) } else { c.ip + 1 };
            }
            Instruction::JumpFproc { fproc_id, .. } | Instruction::AluFproc { fproc_id, .. } => {
                let value = self
                    .bank
                    .read(fproc_id, strict)
                    .map_err(|source| SimError::Fproc {
                        core: name,
                        addr,
                        source,
                    })?;
                let ready = g + u64::from(self.m.cfg.timing.fproc_latency);
                c.status = CoreStatus::WaitingFproc;
                self.trace.fproc.push(FprocRecord {
                    core,
                    addr: addr as u16,
                    fproc_id,
                    issue_cycle: g,
                    ready_cycle: ready,
                    value,
                });
                self.push(ready, Kind::FprocResponse { core, value });
                next = None;
            }
            Instruction::IncQclk { in0 } => {
                c.offset += i64::from(c.operand(in0));
                c.ip += 1;
            }
            Instruction::Idle { end_time } => {
                let end = i64::from(end_time) - c.offset;
                next = Some((g + cost).max(end.max(0) as u64));
                c.status = CoreStatus::WaitingIdle;
                c.ip += 1;
            }
            Instruction::Done => {
                c.status = CoreStatus::Done;
                c.done_cycle = Some(g);
                next = None;
            }
            Instruction::PhaseReset => {
                c.ip += 1;
                self.trace.phase_resets.push(PhaseResetRecord { core, cycle: g });
                self.backend.on_phase_reset(core, g);
            }
        }
        if let Some(t) = next {
            self.push(t, Kind::Fetch { core });
        }
        Ok(())
    }

    fn finish(mut self, termination: Termination) -> Trace {
        self.trace.termination = termination;
        self.trace.final_cycle = self.now;
        self.trace.cores = self
            .m
            .cores
            .iter()
            .map(|c| CoreSummary {
                key: c.key.to_string(),
                status: c.status,
                cycles: c.done_cycle.unwrap_or(c.last_cycle),
                time_offset: c.offset,
            })
            .collect();
        self.trace
    }
}

/// Resets the machine and runs every core to `done`, then drains pending
/// measurements.
pub fn run(
    machine: &mut Machine,
    backend: &mut dyn MeasurementBackend,
) -> Result<Trace, SimFailure> {
    machine.reset();
    backend.reset();
    let slots: Vec<u16> = machine.cfg.readouts.iter().map(|r| r.slot).collect();
    let n = machine.cores.len();
    let mut run = Run {
        m: machine,
        backend,
        bank: FprocBank::with_slots(slots),
        queue: BinaryHeap::new(),
        seq: 0,
        pending: (0..n).map(|_| None).collect(),
        trace: Trace::empty(),
        now: 0,
    };
    for core in 0..n {
        run.push(0, Kind::Fetch { core });
    }
    while let Some(ev) = run.queue.pop() {
        if let Err(error) = run.step(ev) {
            return Err(SimFailure {
                error,
                trace: Box::new(run.finish(Termination::Failed)),
            });
        }
    }
    Ok(run.finish(Termination::Completed))
}

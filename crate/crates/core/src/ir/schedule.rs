//! Static scheduling and schedule checking.
//!
//! Both passes run one abstract machine over the lowered program in layout
//! order. Per core it tracks the latest cycle at which the next instruction
//! can be fetched (`ready`), a lower bound on the next trigger set by
//! barriers and delays (`floor`), and an epoch: cores in the same epoch share
//! a time reference. Per channel it tracks when the last pulse ends. At a
//! label the states of all incoming forward paths are joined with `max`.
//!
//! The scheduler picks the earliest start time that respects every bound;
//! the linter replays the program with the given start times and reports each
//! bound that is violated.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use super::cfg::stmt_cores;
use super::cores::CoreSet;
use super::program::{walk, FuncRef, IrProgram, PulseStmt, Statement};
use super::{Context, IrError};
use crate::isa::OpClass;
use crate::units::cycles_ceil;

/// A schedule bound that the program's timing fields violate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Diagnostic {
    /// The trigger comes before the core can issue the pulse.
    TriggerTooEarly {
        index: usize,
        channel: String,
        start: i64,
        earliest: i64,
    },
    /// The pulse starts while the previous pulse on the channel still plays.
    ChannelOverlap {
        index: usize,
        channel: String,
        start: i64,
        free: i64,
    },
    /// The pulse starts before a preceding barrier or delay allows.
    BeforeBarrier {
        index: usize,
        channel: String,
        start: i64,
        floor: i64,
    },
    /// The FPROC read can happen before the measurement is visible.
    FprocTooEarly {
        index: usize,
        channel: String,
        issue: i64,
        visible: i64,
    },
    /// The loop body can still be running at its `end`.
    LoopOverrun {
        index: usize,
        loop_id: String,
        end: i64,
        required: i64,
    },
    /// The loop's cores can reach the head after `align`, or the rewind does
    /// not return to the body start.
    LoopMisaligned {
        index: usize,
        loop_id: String,
        value: i64,
        required: i64,
    },
    /// A timing field the scheduler fills is absent.
    MissingTiming { index: usize, field: String },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::TriggerTooEarly {
                index,
                channel,
                start,
                earliest,
            } => write!(
                f,
                "statement {index}: pulse on {channel} at {start} but the core can trigger no earlier than {earliest}"
            ),
            Diagnostic::ChannelOverlap {
                index,
                channel,
                start,
                free,
            } => write!(
                f,
                "statement {index}: pulse on {channel} at {start} overlaps the previous pulse, which ends at {free}"
            ),
            Diagnostic::BeforeBarrier {
                index,
                channel,
                start,
                floor,
            } => write!(
                f,
                "statement {index}: pulse on {channel} at {start} precedes the barrier/delay bound {floor}"
            ),
            Diagnostic::FprocTooEarly {
                index,
                channel,
                issue,
                visible,
            } => write!(
                f,
                "statement {index}: FPROC read at {issue} before the {channel} result is visible at {visible}"
            ),
            Diagnostic::LoopOverrun {
                index,
                loop_id,
                end,
                required,
            } => write!(
                f,
                "statement {index}: loop {loop_id} ends at {end} but its body runs until {required}"
            ),
            Diagnostic::LoopMisaligned {
                index,
                loop_id,
                value,
                required,
            } => write!(
                f,
                "statement {index}: loop {loop_id} timing {value} should be {required}"
            ),
            Diagnostic::MissingTiming { index, field } => {
                write!(f, "statement {index}: missing {field}")
            }
        }
    }
}

/// Fills pulse start times, loop alignment and period, and FPROC waits.
/// Start times already present are kept and checked.
pub fn schedule(prog: &IrProgram, ctx: &Context) -> Result<IrProgram, IrError> {
    precheck(prog, "schedule")?;
    let mut out = prog.clone();
    let mut m = Abstract::new(ctx, Mode::Schedule);
    m.run(&mut out.statements)?;
    Ok(out)
}

/// Checks a scheduled program against the timing model.
pub fn lint(prog: &IrProgram, ctx: &Context) -> Result<Vec<Diagnostic>, IrError> {
    precheck(prog, "lint")?;
    let mut copy = prog.clone();
    let mut m = Abstract::new(ctx, Mode::Check);
    m.run(&mut copy.statements)?;
    Ok(m.diags)
}

fn precheck(prog: &IrProgram, pass: &str) -> Result<(), IrError> {
    let mut reason = None;
    walk(&prog.statements, &mut |s| {
        let r = match s {
            Statement::Gate { .. } | Statement::Read { .. } => "gates must be resolved first",
            Statement::BranchVar { .. } | Statement::BranchFproc { .. } | Statement::Loop { .. } => {
                "control flow must be lowered first"
            }
            Statement::VirtualZ { .. } | Statement::BindPhase { .. } => {
                "virtual-Z must be resolved first"
            }
            Statement::JumpFproc {
                func_id: FuncRef::Name(_),
                ..
            } => "FPROC channels must be resolved first",
            Statement::Pulse(_) => return,
            _ if s.scope().is_none() => "statements must be scoped first",
            _ => return,
        };
        reason.get_or_insert(r);
    });
    match reason {
        Some(r) => Err(IrError::InvalidPassOrder {
            pass: pass.into(),
            reason: r.into(),
        }),
        None => Ok(()),
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mode {
    Schedule,
    Check,
}

#[derive(Debug, Clone, PartialEq)]
struct CoreT {
    ready: i64,
    floor: i64,
    epoch: u32,
}

#[derive(Debug, Clone, PartialEq)]
struct ChanT {
    free: i64,
    /// End of the latest pulse, if every path played one.
    last_end: Option<i64>,
}

#[derive(Debug, Clone, PartialEq)]
struct State {
    cores: Vec<CoreT>,
    chans: BTreeMap<String, ChanT>,
}

struct Abstract<'a> {
    ctx: &'a Context<'a>,
    mode: Mode,
    next_epoch: u32,
    joined: BTreeMap<Vec<u32>, u32>,
    /// Loop id → body entry time.
    loops: BTreeMap<String, i64>,
    diags: Vec<Diagnostic>,
}

fn unsched(msg: String) -> IrError {
    IrError::UnschedulableProgram(msg)
}

impl<'a> Abstract<'a> {
    fn new(ctx: &'a Context<'a>, mode: Mode) -> Self {
        Self {
            ctx,
            mode,
            next_epoch: 1,
            joined: BTreeMap::new(),
            loops: BTreeMap::new(),
            diags: Vec::new(),
        }
    }

    fn cost(&self, class: OpClass) -> i64 {
        i64::from(self.ctx.timing.cost(class))
    }

    fn fresh_epoch(&mut self) -> u32 {
        self.next_epoch += 1;
        self.next_epoch - 1
    }

    fn initial(&self) -> State {
        let ready = if self.ctx.opts.phase_reset {
            self.cost(OpClass::PhaseReset)
        } else {
            0
        };
        State {
            cores: (0..self.ctx.cores.len())
                .map(|_| CoreT {
                    ready,
                    floor: self.ctx.opts.prologue_offset as i64,
                    epoch: 0,
                })
                .collect(),
            chans: self
                .ctx
                .cores
                .all_channels()
                .map(|c| {
                    (
                        c.to_string(),
                        ChanT {
                            free: 0,
                            last_end: None,
                        },
                    )
                })
                .collect(),
        }
    }

    fn join(&mut self, states: Vec<State>) -> Option<State> {
        let mut it = states.into_iter();
        let mut out = it.next()?;
        let rest: Vec<State> = it.collect();
        if rest.is_empty() {
            return Some(out);
        }
        for (c, core) in out.cores.iter_mut().enumerate() {
            let mut epochs = BTreeSet::from([core.epoch]);
            for s in &rest {
                core.ready = core.ready.max(s.cores[c].ready);
                core.floor = core.floor.max(s.cores[c].floor);
                epochs.insert(s.cores[c].epoch);
            }
            if epochs.len() > 1 {
                let key: Vec<u32> = epochs.into_iter().collect();
                core.epoch = match self.joined.get(&key) {
                    Some(&e) => e,
                    None => {
                        let e = self.fresh_epoch();
                        self.joined.insert(key, e);
                        e
                    }
                };
            }
        }
        for (name, ch) in out.chans.iter_mut() {
            for s in &rest {
                let o = &s.chans[name];
                ch.free = ch.free.max(o.free);
                ch.last_end = match (ch.last_end, o.last_end) {
                    (Some(a), Some(b)) => Some(a.max(b)),
                    _ => None,
                };
            }
        }
        Some(out)
    }

    fn same_epoch(&self, st: &State, cores: &CoreSet, what: &str) -> Result<(), IrError> {
        let epochs: BTreeSet<u32> = cores.iter().map(|&c| st.cores[c].epoch).collect();
        if epochs.len() > 1 {
            return Err(unsched(format!(
                "{what} spans cores {} whose time references diverged after a loop, branch or inc_qclk",
                self.ctx.cores.scope_names(cores).join(" | ")
            )));
        }
        Ok(())
    }

    fn cores(&self, s: &Statement) -> Result<CoreSet, IrError> {
        stmt_cores(s, &self.ctx.cores)
    }

    /// Channels named by a barrier or delay scope.
    fn scope_channels(&self, s: &Statement) -> Result<Vec<String>, IrError> {
        let mut out = BTreeSet::new();
        for e in s.scope().into_iter().flatten() {
            out.extend(self.ctx.cores.channels_of(e)?);
        }
        Ok(out.into_iter().collect())
    }

    fn run(&mut self, stmts: &mut [Statement]) -> Result<(), IrError> {
        let mut label_pos = BTreeMap::new();
        for (i, s) in stmts.iter().enumerate() {
            if let Statement::JumpLabel { label, .. } = s {
                label_pos.insert(label.clone(), i);
            }
        }
        let mut pending: BTreeMap<String, Vec<State>> = BTreeMap::new();
        let mut cur = Some(self.initial());
        let mut last_tail = None;
        let mut i = 0;
        while i < stmts.len() {
            if let Statement::JumpLabel { label, .. } = &stmts[i] {
                let mut ins = pending.remove(label).unwrap_or_default();
                ins.extend(cur.take());
                cur = self.join(ins);
            }
            let Some(mut st) = cur.take() else {
                i += 1;
                continue;
            };
            let mut next = i + 1;
            let mut taken: Option<(String, State)> = None;
            let mut falls_through = true;
            if matches!(stmts[i], Statement::Pulse(_)) {
                next = self.pulses(stmts, i, &mut st)?;
                cur = Some(st);
                i = next;
                continue;
            }
            match &mut stmts[i] {
                Statement::Declare { .. } | Statement::JumpLabel { .. } => {}
                s @ (Statement::SetVar { .. } | Statement::Alu { .. } | Statement::PhaseSlot { .. }) => {
                    let c = self.cost(OpClass::RegAlu);
                    for k in self.cores(s)? {
                        st.cores[k].ready += c;
                    }
                }
                s @ Statement::Done { .. } => {
                    let c = self.cost(OpClass::Done);
                    for k in self.cores(s)? {
                        st.cores[k].ready += c;
                    }
                }
                s @ Statement::Idle { .. } => {
                    let Statement::Idle { end_time, .. } = s else { unreachable!() };
                    let end = *end_time as i64;
                    let c = self.cost(OpClass::Idle);
                    for k in self.cores(s)? {
                        let r = &mut st.cores[k].ready;
                        *r = (*r + c).max(end);
                    }
                }
                s @ Statement::IncQclk { .. } => {
                    let Statement::IncQclk { value, .. } = s else { unreachable!() };
                    let v = *value;
                    let cores = self.cores(s)?;
                    let c = self.cost(OpClass::IncQclk);
                    for &k in &cores {
                        st.cores[k].ready += c;
                    }
                    self.shift(&mut st, &cores, v);
                }
                s @ (Statement::Barrier { .. } | Statement::Delay { .. }) => {
                    let d = match s {
                        Statement::Delay { t, .. } => {
                            if !(*t >= 0.0 && t.is_finite()) {
                                return Err(unsched(format!("delay of {t} s")));
                            }
                            cycles_ceil(*t, self.ctx.clock_hz()) as i64
                        }
                        _ => 0,
                    };
                    let cores = self.cores(s)?;
                    let chans = self.scope_channels(s)?;
                    self.same_epoch(&st, &cores, s.kind())?;
                    let c = self.cost(OpClass::PulseWriteTrig);
                    let t = cores
                        .iter()
                        .map(|&k| (st.cores[k].ready + c).max(st.cores[k].floor))
                        .chain(chans.iter().map(|ch| st.chans[ch].free))
                        .max()
                        .unwrap_or(0)
                        + d;
                    for &k in &cores {
                        st.cores[k].floor = st.cores[k].floor.max(t);
                    }
                    for ch in &chans {
                        let f = &mut st.chans.get_mut(ch).expect("known channel").free;
                        *f = (*f).max(t);
                    }
                }
                s @ Statement::JumpI { .. } => {
                    let c = self.cost(OpClass::Jump);
                    for k in self.cores(s)? {
                        st.cores[k].ready += c;
                    }
                    let Statement::JumpI { label, .. } = s else { unreachable!() };
                    taken = Some((label.clone(), st.clone()));
                    falls_through = false;
                }
                s @ Statement::JumpCond { .. } => {
                    let c = self.cost(OpClass::JumpCond);
                    for k in self.cores(s)? {
                        st.cores[k].ready += c;
                    }
                    let Statement::JumpCond { label, .. } = s else { unreachable!() };
                    taken = Some((label.clone(), st.clone()));
                }
                s @ Statement::JumpFproc { .. } => {
                    self.fproc(s, i, &mut st)?;
                    let Statement::JumpFproc { label, .. } = s else { unreachable!() };
                    taken = Some((label.clone(), st.clone()));
                }
                s @ Statement::LoopHead { .. } => self.loop_head(s, i, &mut st)?,
                s @ Statement::LoopTail { .. } => {
                    self.loop_tail(s, i, &mut st)?;
                    last_tail = Some(i);
                }
                s => {
                    return Err(IrError::InvalidPassOrder {
                        pass: "schedule".into(),
                        reason: format!("unexpected `{}` statement", s.kind()),
                    })
                }
            }
            if let Some((label, state)) = taken {
                let Some(&pos) = label_pos.get(&label) else {
                    return Err(IrError::UndefinedLabel(label));
                };
                if pos <= i {
                    // Only the rewinding jump at a loop tail may go back.
                    if last_tail.is_none_or(|t| t + 1 != i) {
                        return Err(unsched(format!(
                            "backward jump to `{label}` outside a loop"
                        )));
                    }
                } else {
                    pending.entry(label).or_default().push(state);
                }
            }
            if falls_through {
                cur = Some(st);
            }
            i = next;
        }
        Ok(())
    }

    /// Shifts every time of `cores` by `v` and gives them a new shared
    /// reference.
    fn shift(&mut self, st: &mut State, cores: &CoreSet, v: i64) {
        let e = self.fresh_epoch();
        for &k in cores {
            let c = &mut st.cores[k];
            c.ready += v;
            c.floor += v;
            c.epoch = e;
            for ch in self.ctx.cores.channels(k) {
                let t = st.chans.get_mut(ch).expect("known channel");
                t.free += v;
                t.last_end = t.last_end.map(|x| x + v);
            }
        }
    }

    /// Schedules or checks the run of same-gate pulses starting at `i`;
    /// returns the index after the run.
    fn pulses(&mut self, stmts: &mut [Statement], i: usize, st: &mut State) -> Result<usize, IrError> {
        let gid = match &stmts[i] {
            Statement::Pulse(p) => p.group.as_ref().map(|g| g.id),
            _ => unreachable!(),
        };
        let mut end = i + 1;
        if gid.is_some() {
            while let Some(Statement::Pulse(p)) = stmts.get(end) {
                if p.group.as_ref().map(|g| g.id) != gid {
                    break;
                }
                end += 1;
            }
        }
        let clock = self.ctx.clock_hz();
        let trig = self.cost(OpClass::PulseWriteTrig);
        struct Item {
            core: usize,
            dur: i64,
            off: i64,
        }
        let mut items = Vec::new();
        for s in &stmts[i..end] {
            let Statement::Pulse(p) = s else { unreachable!() };
            items.push(Item {
                core: self.ctx.cores.core_of(&p.dest)?,
                dur: self.ctx.duration(p)? as i64,
                off: p.group.as_ref().map_or(0, |g| (g.offset * clock).round() as i64),
            });
        }
        // A gate also waits for, and then occupies, every channel of its
        // qubits, so gates on shared qubits stay in program order across
        // cores.
        let mut qchans = BTreeSet::new();
        if let Some(g) = &pulse_at(stmts, i).group {
            for q in &g.qubits {
                qchans.extend(self.ctx.cores.channels_of(q)?);
            }
        }
        let mut cores: CoreSet = items.iter().map(|it| it.core).collect();
        let mut qubit_lb = i64::MIN;
        for ch in &qchans {
            let k = self.ctx.cores.core_of(ch)?;
            cores.insert(k);
            qubit_lb = qubit_lb.max(st.chans[ch].free).max(st.cores[k].floor);
        }
        self.same_epoch(st, &cores, "gate")?;

        let starts: Vec<Option<i64>> = match self.mode {
            Mode::Check => (i..end).map(|k| pulse_at(stmts, k).start_time.map(|t| t as i64)).collect(),
            Mode::Schedule => {
                let fixed = (i..end).find_map(|k| pulse_at(stmts, k).start_time.map(|t| (k - i, t as i64)));
                let g = match fixed {
                    Some((j, t)) => t - items[j].off,
                    None => {
                        let mut seen = BTreeSet::new();
                        items
                            .iter()
                            .enumerate()
                            .map(|(j, it)| {
                                let p = pulse_at(stmts, i + j);
                                let c = &st.cores[it.core];
                                let mut lb = c.floor.max(st.chans[&p.dest].free);
                                if seen.insert(it.core) {
                                    lb = lb.max(c.ready + trig);
                                }
                                lb - it.off
                            })
                            .max()
                            .unwrap_or(0)
                            .max(qubit_lb)
                    }
                };
                (i..end)
                    .map(|k| Some(pulse_at(stmts, k).start_time.map_or(g + items[k - i].off, |t| t as i64)))
                    .collect()
            }
        };

        for (j, it) in items.iter().enumerate() {
            let k = i + j;
            let dest = pulse_at(stmts, k).dest.clone();
            let Some(s) = starts[j] else {
                self.diags.push(Diagnostic::MissingTiming {
                    index: k,
                    field: "pulse start_time".into(),
                });
                st.cores[it.core].ready += trig;
                continue;
            };
            let c = &st.cores[it.core];
            let ch = &st.chans[&dest];
            let checks = [
                (c.ready + trig, 0),
                (ch.free, 1),
                (c.floor, 2),
            ];
            for (bound, which) in checks {
                if s >= bound {
                    continue;
                }
                let d = match which {
                    0 => Diagnostic::TriggerTooEarly {
                        index: k,
                        channel: dest.clone(),
                        start: s,
                        earliest: bound,
                    },
                    1 => Diagnostic::ChannelOverlap {
                        index: k,
                        channel: dest.clone(),
                        start: s,
                        free: bound,
                    },
                    _ => Diagnostic::BeforeBarrier {
                        index: k,
                        channel: dest.clone(),
                        start: s,
                        floor: bound,
                    },
                };
                match self.mode {
                    Mode::Check => self.diags.push(d),
                    Mode::Schedule => return Err(unsched(d.to_string())),
                }
            }
            if !(0..=i64::from(u32::MAX)).contains(&s) {
                return Err(unsched(format!(
                    "statement {k}: start time {s} does not fit the trigger field"
                )));
            }
            let fire = s.max(c.ready + trig);
            st.cores[it.core].ready = fire;
            let ch = st.chans.get_mut(&dest).expect("known channel");
            ch.free = fire + it.dur;
            ch.last_end = Some(fire + it.dur);
            if self.mode == Mode::Schedule {
                if let Statement::Pulse(p) = &mut stmts[k] {
                    p.start_time = Some(s as u64);
                }
            }
        }
        let busy = (i..end)
            .filter_map(|k| {
                let dest = &pulse_at(stmts, k).dest;
                st.chans[dest].last_end
            })
            .max();
        if let Some(b) = busy {
            for ch in &qchans {
                let t = st.chans.get_mut(ch).expect("known channel");
                t.free = t.free.max(b);
            }
        }
        Ok(end)
    }

    fn fproc(&mut self, s: &mut Statement, i: usize, st: &mut State) -> Result<(), IrError> {
        let cores = self.cores(s)?;
        let idle = self.cost(OpClass::Idle);
        let lat = i64::from(self.ctx.timing.fproc_latency) + self.cost(OpClass::JumpFproc);
        let Statement::JumpFproc { wait, .. } = s else { unreachable!() };
        let Some(w) = wait else {
            for &k in &cores {
                st.cores[k].ready += lat;
            }
            return Ok(());
        };
        let src = self.ctx.cores.core_of(&w.channel)?;
        let mut all = cores.clone();
        all.insert(src);
        self.same_epoch(st, &all, "FPROC read")?;
        let Some(end) = st.chans[&w.channel].last_end else {
            return Err(unsched(format!(
                "statement {i}: FPROC read of {} before any measurement on it",
                w.channel
            )));
        };
        let visible = end + w.delay_cycles as i64;
        if self.mode == Mode::Schedule && w.until.is_none_or(|u| (u as i64) < visible) {
            w.until = Some(visible.max(0) as u64);
        }
        let Some(until) = w.until.map(|u| u as i64) else {
            self.diags.push(Diagnostic::MissingTiming {
                index: i,
                field: "FPROC wait time".into(),
            });
            for &k in &cores {
                st.cores[k].ready += lat;
            }
            return Ok(());
        };
        for &k in &cores {
            let issue = (st.cores[k].ready + idle).max(until);
            if issue < visible {
                self.diags.push(Diagnostic::FprocTooEarly {
                    index: i,
                    channel: w.channel.clone(),
                    issue,
                    visible,
                });
            }
            st.cores[k].ready = issue + lat;
        }
        Ok(())
    }

    fn loop_head(&mut self, s: &mut Statement, i: usize, st: &mut State) -> Result<(), IrError> {
        let cores = self.cores(s)?;
        self.same_epoch(st, &cores, "loop")?;
        let required = cores
            .iter()
            .map(|&k| st.cores[k].ready)
            .max()
            .unwrap_or(0)
            + self.cost(OpClass::Idle);
        let jc = self.cost(OpClass::JumpCond);
        let Statement::LoopHead { loop_id, align, .. } = s else { unreachable!() };
        if self.mode == Mode::Schedule && align.is_none_or(|a| (a as i64) < required) {
            *align = Some(required as u64);
        }
        let a = match *align {
            Some(a) => {
                if (a as i64) < required {
                    self.diags.push(Diagnostic::LoopMisaligned {
                        index: i,
                        loop_id: loop_id.clone(),
                        value: a as i64,
                        required,
                    });
                }
                (a as i64).max(required)
            }
            None => {
                self.diags.push(Diagnostic::MissingTiming {
                    index: i,
                    field: "loop_head align".into(),
                });
                required
            }
        };
        for &k in &cores {
            st.cores[k].ready = a;
        }
        self.loops.insert(loop_id.clone(), a + jc);
        Ok(())
    }

    fn loop_tail(&mut self, s: &mut Statement, i: usize, st: &mut State) -> Result<(), IrError> {
        let cores = self.cores(s)?;
        self.same_epoch(st, &cores, "loop")?;
        let idle = self.cost(OpClass::Idle);
        let inc = self.cost(OpClass::IncQclk);
        let jc = self.cost(OpClass::JumpCond);
        let Statement::LoopTail {
            loop_id,
            end,
            period,
            ..
        } = s
        else {
            unreachable!()
        };
        let Some(&body) = self.loops.get(loop_id.as_str()) else {
            return Err(unsched(format!("loop_tail {loop_id} without loop_head")));
        };
        let mut required = i64::MIN;
        for &k in &cores {
            let c = &st.cores[k];
            required = required.max(c.ready + idle).max(c.floor);
            for ch in self.ctx.cores.channels(k) {
                required = required.max(st.chans[ch].free);
            }
        }
        if self.mode == Mode::Schedule {
            if end.is_none_or(|e| (e as i64) < required) {
                *end = Some(required.max(0) as u64);
            }
            let e = end.expect("set above") as i64;
            *period = Some((e + inc + jc - body) as u64);
        }
        let e = match *end {
            Some(e) => {
                if (e as i64) < required {
                    self.diags.push(Diagnostic::LoopOverrun {
                        index: i,
                        loop_id: loop_id.clone(),
                        end: e as i64,
                        required,
                    });
                }
                (e as i64).max(required)
            }
            None => {
                self.diags.push(Diagnostic::MissingTiming {
                    index: i,
                    field: "loop_tail end".into(),
                });
                required
            }
        };
        let want = e + inc + jc - body;
        let p = match *period {
            Some(p) => {
                if p as i64 != want {
                    self.diags.push(Diagnostic::LoopMisaligned {
                        index: i,
                        loop_id: loop_id.clone(),
                        value: p as i64,
                        required: want,
                    });
                }
                want
            }
            None => {
                self.diags.push(Diagnostic::MissingTiming {
                    index: i,
                    field: "loop_tail period".into(),
                });
                want
            }
        };
        for &k in &cores {
            st.cores[k].ready = e + inc;
        }
        self.shift(st, &cores, -p);
        Ok(())
    }
}

fn pulse_at(stmts: &[Statement], k: usize) -> &PulseStmt {
    match &stmts[k] {
        Statement::Pulse(p) => p,
        _ => unreachable!("pulse run"),
    }
}

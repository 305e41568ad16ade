use serde::{Deserialize, Deserializer, Serialize};
use serde_json::{Map, Value as Json};

use crate::asm::{EnvelopeSpec, RegType, Value};
use crate::isa::AluOp;

/// A frequency in Hz, or a name resolved through the calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FreqRef {
    Hz(f64),
    Name(String),
}

/// FPROC source: a named result channel, or a raw function id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FuncRef {
    Id(u16),
    Name(String),
}

/// Marks pulses that came from one calibrated gate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseGroup {
    /// Unique per gate instance.
    pub id: u32,
    pub gate: String,
    pub qubits: Vec<String>,
    /// Offset from the gate start, seconds.
    #[serde(default)]
    pub offset: f64,
    /// Calibrated phase before any virtual-Z frame.
    #[serde(default)]
    pub base_phase: f64,
    /// The pulse the gate is attributed to.
    #[serde(default)]
    pub primary: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseStmt {
    pub freq: FreqRef,
    /// Radians.
    #[serde(default)]
    pub phase: f64,
    pub amp: f64,
    pub env: EnvelopeSpec,
    pub dest: String,
    /// Trigger time in clock cycles.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_time: Option<u64>,
    /// Phase taken from this variable instead of `phase`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_var: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<PulseGroup>,
}

/// Timing requirement of an FPROC read, set by `resolve_fproc`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FprocWait {
    /// Readout channel whose latest window must have completed.
    pub channel: String,
    pub delay_cycles: u64,
    /// Idle target chosen by the scheduler.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub until: Option<u64>,
}

fn one_or_many<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<String>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(String),
        Many(Vec<String>),
    }
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(s) => vec![s],
        OneOrMany::Many(v) => v,
    })
}

fn opt_one_or_many<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<String>>, D::Error> {
    one_or_many(d).map(Some)
}

type Scope = Option<Vec<String>>;

/// One IR statement. Blocks nest; the low-level variants are what control
/// flow lowers to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum Statement {
    /// Native gate; written in JSON as `{"name": "<gate>", "qubit": [...]}`.
    Gate {
        gate: String,
        #[serde(deserialize_with = "one_or_many")]
        qubit: Vec<String>,
    },
    Pulse(PulseStmt),
    VirtualZ {
        /// Rotation angle, radians.
        phase: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        qubit: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        freq: Option<FreqRef>,
    },
    /// One ALU issue slot that emits nothing. Replaces a virtual-Z folded
    /// into pulse phases, so the schedule matches register phase tracking.
    PhaseSlot {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        scope: Scope,
    },
    Declare {
        var: String,
        dtype: RegType,
        #[serde(default, deserialize_with = "opt_one_or_many", skip_serializing_if = "Option::is_none")]
        scope: Scope,
    },
    BindPhase {
        var: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        qubit: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        freq: Option<FreqRef>,
    },
    SetVar {
        var: String,
        value: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        scope: Scope,
    },
    Alu {
        op: AluOp,
        lhs: Value,
        rhs: String,
        out: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        scope: Scope,
    },
    BranchVar {
        cond_lhs: Value,
        alu_cond: AluOp,
        cond_rhs: String,
        #[serde(rename = "true", default)]
        true_block: Vec<Statement>,
        #[serde(rename = "false", default)]
        false_block: Vec<Statement>,
        #[serde(default, deserialize_with = "opt_one_or_many", skip_serializing_if = "Option::is_none")]
        scope: Scope,
    },
    BranchFproc {
        cond_lhs: Value,
        alu_cond: AluOp,
        func_id: FuncRef,
        #[serde(rename = "true", default)]
        true_block: Vec<Statement>,
        #[serde(rename = "false", default)]
        false_block: Vec<Statement>,
        #[serde(default, deserialize_with = "opt_one_or_many", skip_serializing_if = "Option::is_none")]
        scope: Scope,
    },
    /// Pre-test loop: the body runs while `cond_lhs <alu_cond> cond_rhs`.
    Loop {
        cond_lhs: Value,
        alu_cond: AluOp,
        cond_rhs: String,
        body: Vec<Statement>,
        #[serde(default, deserialize_with = "opt_one_or_many", skip_serializing_if = "Option::is_none")]
        scope: Scope,
    },
    Read {
        #[serde(deserialize_with = "one_or_many")]
        qubit: Vec<String>,
    },
    /// Seconds. Without a scope it applies to every channel.
    Delay {
        t: f64,
        #[serde(default, alias = "qubit", deserialize_with = "opt_one_or_many", skip_serializing_if = "Option::is_none")]
        scope: Scope,
    },
    Barrier {
        #[serde(default, alias = "qubit", deserialize_with = "opt_one_or_many", skip_serializing_if = "Option::is_none")]
        scope: Scope,
    },
    Idle {
        end_time: u64,
        #[serde(default, deserialize_with = "opt_one_or_many", skip_serializing_if = "Option::is_none")]
        scope: Scope,
    },
    IncQclk {
        value: i64,
        #[serde(default, deserialize_with = "opt_one_or_many", skip_serializing_if = "Option::is_none")]
        scope: Scope,
    },
    Done {
        #[serde(default, deserialize_with = "opt_one_or_many", skip_serializing_if = "Option::is_none")]
        scope: Scope,
    },
    JumpLabel {
        label: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        scope: Scope,
    },
    JumpI {
        label: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        scope: Scope,
    },
    JumpCond {
        cond_lhs: Value,
        alu_cond: AluOp,
        cond_rhs: String,
        label: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        scope: Scope,
    },
    JumpFproc {
        cond_lhs: Value,
        alu_cond: AluOp,
        func_id: FuncRef,
        label: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        scope: Scope,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        wait: Option<FprocWait>,
    },
    /// Start of a lowered loop; the scheduler aligns the loop's cores here.
    LoopHead {
        loop_id: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        scope: Scope,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        align: Option<u64>,
    },
    /// End of a loop body: idle to `end`, then rewind the time reference by
    /// `period` so the next iteration replays the same start times.
    LoopTail {
        loop_id: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        scope: Scope,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        end: Option<u64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        period: Option<u64>,
    },
}

/// Statement names with a fixed schema; any other name is a gate.
const KEYWORDS: &[&str] = &[
    "gate",
    "pulse",
    "virtual_z",
    "phase_slot",
    "declare",
    "bind_phase",
    "set_var",
    "alu",
    "branch_var",
    "branch_fproc",
    "loop",
    "read",
    "delay",
    "barrier",
    "idle",
    "inc_qclk",
    "done",
    "jump_label",
    "jump_i",
    "jump_cond",
    "jump_fproc",
    "loop_head",
    "loop_tail",
];

impl Statement {
    pub fn kind(&self) -> &'static str {
        match self {
            Statement::Gate { .. } => "gate",
            Statement::Pulse(_) => "pulse",
            Statement::VirtualZ { .. } => "virtual_z",
            Statement::PhaseSlot { .. } => "phase_slot",
            Statement::Declare { .. } => "declare",
            Statement::BindPhase { .. } => "bind_phase",
            Statement::SetVar { .. } => "set_var",
            Statement::Alu { .. } => "alu",
            Statement::BranchVar { .. } => "branch_var",
            Statement::BranchFproc { .. } => "branch_fproc",
            Statement::Loop { .. } => "loop",
            Statement::Read { .. } => "read",
            Statement::Delay { .. } => "delay",
            Statement::Barrier { .. } => "barrier",
            Statement::Idle { .. } => "idle",
            Statement::IncQclk { .. } => "inc_qclk",
            Statement::Done { .. } => "done",
            Statement::JumpLabel { .. } => "jump_label",
            Statement::JumpI { .. } => "jump_i",
            Statement::JumpCond { .. } => "jump_cond",
            Statement::JumpFproc { .. } => "jump_fproc",
            Statement::LoopHead { .. } => "loop_head",
            Statement::LoopTail { .. } => "loop_tail",
        }
    }

    /// Nested blocks, in source order.
    pub fn blocks(&self) -> Vec<&Vec<Statement>> {
        match self {
            Statement::BranchVar {
                true_block,
                false_block,
                ..
            }
            | Statement::BranchFproc {
                true_block,
                false_block,
                ..
            } => vec![true_block, false_block],
            Statement::Loop { body, .. } => vec![body],
            _ => Vec::new(),
        }
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut Vec<Statement>> {
        match self {
            Statement::BranchVar {
                true_block,
                false_block,
                ..
            }
            | Statement::BranchFproc {
                true_block,
                false_block,
                ..
            } => vec![true_block, false_block],
            Statement::Loop { body, .. } => vec![body],
            _ => Vec::new(),
        }
    }

    /// The statement's scope field, for variants that carry one.
    pub fn scope(&self) -> Option<&Vec<String>> {
        self.scope_slot()?.as_ref()
    }

    fn scope_slot(&self) -> Option<&Scope> {
        match self {
            Statement::Declare { scope, .. }
            | Statement::PhaseSlot { scope }
            | Statement::SetVar { scope, .. }
            | Statement::Alu { scope, .. }
            | Statement::BranchVar { scope, .. }
            | Statement::BranchFproc { scope, .. }
            | Statement::Loop { scope, .. }
            | Statement::Delay { scope, .. }
            | Statement::Barrier { scope, .. }
            | Statement::Idle { scope, .. }
            | Statement::IncQclk { scope, .. }
            | Statement::Done { scope, .. }
            | Statement::JumpLabel { scope, .. }
            | Statement::JumpI { scope, .. }
            | Statement::JumpCond { scope, .. }
            | Statement::JumpFproc { scope, .. }
            | Statement::LoopHead { scope, .. }
            | Statement::LoopTail { scope, .. } => Some(scope),
            _ => None,
        }
    }

    pub fn scope_mut(&mut self) -> Option<&mut Scope> {
        match self {
            Statement::Declare { scope, .. }
            | Statement::PhaseSlot { scope }
            | Statement::SetVar { scope, .. }
            | Statement::Alu { scope, .. }
            | Statement::BranchVar { scope, .. }
            | Statement::BranchFproc { scope, .. }
            | Statement::Loop { scope, .. }
            | Statement::Delay { scope, .. }
            | Statement::Barrier { scope, .. }
            | Statement::Idle { scope, .. }
            | Statement::IncQclk { scope, .. }
            | Statement::Done { scope, .. }
            | Statement::JumpLabel { scope, .. }
            | Statement::JumpI { scope, .. }
            | Statement::JumpCond { scope, .. }
            | Statement::JumpFproc { scope, .. }
            | Statement::LoopHead { scope, .. }
            | Statement::LoopTail { scope, .. } => Some(scope),
            _ => None,
        }
    }

    /// Variables read or written by this statement itself (not its blocks).
    pub fn vars(&self) -> Vec<&str> {
        let mut out = Vec::new();
        match self {
            Statement::Declare { var, .. }
            | Statement::BindPhase { var, .. }
            | Statement::SetVar { var, .. } => out.push(var.as_str()),
            Statement::Alu { lhs, rhs, out: o, .. } => {
                if let Value::Reg(r) = lhs {
                    out.push(r.as_str());
                }
                out.push(rhs.as_str());
                out.push(o.as_str());
            }
            Statement::BranchVar { cond_lhs, cond_rhs, .. }
            | Statement::Loop { cond_lhs, cond_rhs, .. }
            | Statement::JumpCond { cond_lhs, cond_rhs, .. } => {
                if let Value::Reg(r) = cond_lhs {
                    out.push(r.as_str());
                }
                out.push(cond_rhs.as_str());
            }
            Statement::BranchFproc { cond_lhs, .. } | Statement::JumpFproc { cond_lhs, .. } => {
                if let Value::Reg(r) = cond_lhs {
                    out.push(r.as_str());
                }
            }
            Statement::Pulse(p) => {
                if let Some(v) = &p.phase_var {
                    out.push(v.as_str());
                }
            }
            _ => {}
        }
        out
    }
}

/// Visits every statement, depth first, parents before children.
pub fn walk<'a>(stmts: &'a [Statement], f: &mut impl FnMut(&'a Statement)) {
    for s in stmts {
        f(s);
        for b in s.blocks() {
            walk(b, f);
        }
    }
}

pub fn walk_mut(stmts: &mut [Statement], f: &mut impl FnMut(&mut Statement)) {
    for s in stmts {
        f(s);
        for b in s.blocks_mut() {
            walk_mut(b, f);
        }
    }
}

/// A single-threaded IR program.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IrProgram {
    pub statements: Vec<Statement>,
}

impl IrProgram {
    pub fn new(statements: Vec<Statement>) -> Self {
        Self { statements }
    }

    /// Parses a JSON statement list. Objects whose `name` is not a keyword
    /// are gates.
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        let mut v: Json = serde_json::from_str(text)?;
        gates_in(&mut v);
        Ok(Self {
            statements: serde_json::from_value(v)?,
        })
    }

    pub fn to_json_value(&self) -> Json {
        let mut v = serde_json::to_value(&self.statements).expect("IR serializes");
        gates_out(&mut v);
        v
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_json_value()).expect("IR serializes")
    }

    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Statement)) {
        walk(&self.statements, f)
    }
}

fn gates_in(v: &mut Json) {
    match v {
        Json::Array(items) => items.iter_mut().for_each(gates_in),
        Json::Object(obj) => {
            let gate = match obj.get("name") {
                Some(Json::String(n)) if !KEYWORDS.contains(&n.as_str()) => Some(n.clone()),
                _ => None,
            };
            if let Some(g) = gate {
                obj.insert("name".into(), Json::String("gate".into()));
                obj.insert("gate".into(), Json::String(g));
            }
            obj.values_mut().for_each(gates_in);
        }
        _ => {}
    }
}

fn gates_out(v: &mut Json) {
    match v {
        Json::Array(items) => items.iter_mut().for_each(gates_out),
        Json::Object(obj) => {
            if obj.get("name") == Some(&Json::String("gate".into())) {
                if let Some(g) = obj.remove("gate") {
                    let mut out = Map::new();
                    out.insert("name".into(), g);
                    for (k, val) in std::mem::take(obj) {
                        if k != "name" {
                            out.insert(k, val);
                        }
                    }
                    *obj = out;
                }
            }
            obj.values_mut().for_each(gates_out);
        }
        _ => {}
    }
}

//! JSON assembly language.
//!
//! A program maps a core key (the comma-joined tuple of channels that core
//! drives, e.g. `"Q1.qdrv,Q1.rdrv,Q1.rdlo"`) to that core's instruction list:
//!
//! ```json
//! {"Q1.qdrv,Q1.rdrv,Q1.rdlo": [
//!     {"op": "phase_reset"},
//!     {"op": "pulse", "freq": 6.5578e9, "phase": 0.0, "amp": 0.041,
//!      "env": {"env_func": "square", "paradict": {"twidth": 1.6e-06}},
//!      "start_time": 5, "dest": "Q1.rdrv"},
//!     {"op": "done_stb"}]}
//! ```

use std::collections::BTreeMap;
use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::envelope::EnvelopeSpec;
use crate::isa::AluOp;

/// Ordered tuple of channel names driven by one core.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct CoreKey(pub Vec<String>);

impl CoreKey {
    pub fn new<S: AsRef<str>>(channels: &[S]) -> Self {
        CoreKey(channels.iter().map(|c| c.as_ref().to_string()).collect())
    }

    pub fn parse(s: &str) -> Self {
        CoreKey(
            s.split(',')
                .map(str::trim)
                .filter(|c| !c.is_empty())
                .map(String::from)
                .collect(),
        )
    }

    pub fn contains(&self, channel: &str) -> bool {
        self.0.iter().any(|c| c == channel)
    }

    pub fn channels(&self) -> &[String] {
        &self.0
    }
}

impl fmt::Display for CoreKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join(","))
    }
}

impl Serialize for CoreKey {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CoreKey {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let key = CoreKey::parse(&s);
        if key.0.is_empty() {
            return Err(D::Error::custom("empty core key"));
        }
        Ok(key)
    }
}

/// A numeric immediate or a register name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Num(f64),
    Reg(String),
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Num(v)
    }
}

impl From<i32> for Value {
    fn from(v: i32) -> Self {
        Value::Num(f64::from(v))
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Reg(v.to_string())
    }
}

/// Envelope field of a pulse: a shape, or an int register holding a raw env word.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EnvValue {
    Reg(String),
    Spec(EnvelopeSpec),
}

/// FPROC function id: a literal, or `[channel, attribute]` resolved through
/// the channel config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FuncId {
    Id(u64),
    Attr(String, String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegType {
    Int,
    Phase,
    Amp,
}

impl fmt::Display for RegType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RegType::Int => "int",
            RegType::Phase => "phase",
            RegType::Amp => "amp",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum AsmInstr {
    PhaseReset {},
    Pulse {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        freq: Option<Value>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        phase: Option<Value>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        amp: Option<Value>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        env: Option<EnvValue>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        start_time: Option<u32>,
        dest: String,
    },
    Idle {
        end_time: u32,
    },
    JumpFproc {
        in0: Value,
        alu_op: AluOp,
        jump_label: String,
        func_id: FuncId,
    },
    JumpI {
        jump_label: String,
    },
    JumpCond {
        in0: Value,
        alu_op: AluOp,
        in1_reg: String,
        jump_label: String,
    },
    JumpLabel {
        dest_label: String,
    },
    RegAlu {
        in0: Value,
        alu_op: AluOp,
        in1_reg: String,
        out_reg: String,
    },
    AluFproc {
        in0: Value,
        alu_op: AluOp,
        func_id: FuncId,
        out_reg: String,
    },
    IncQclk {
        in0: Value,
    },
    DeclareReg {
        name: String,
        dtype: RegType,
    },
    DoneStb {},
}

impl AsmInstr {
    /// Whether this op occupies a word of program memory.
    pub fn emits_word(&self) -> bool {
        !matches!(self, AsmInstr::JumpLabel { .. } | AsmInstr::DeclareReg { .. })
    }

    pub fn op_name(&self) -> &'static str {
        match self {
            AsmInstr::PhaseReset {} => "phase_reset",
            AsmInstr::Pulse { .. } => "pulse",
            AsmInstr::Idle { .. } => "idle",
            AsmInstr::JumpFproc { .. } => "jump_fproc",
            AsmInstr::JumpI { .. } => "jump_i",
            AsmInstr::JumpCond { .. } => "jump_cond",
            AsmInstr::JumpLabel { .. } => "jump_label",
            AsmInstr::RegAlu { .. } => "reg_alu",
            AsmInstr::AluFproc { .. } => "alu_fproc",
            AsmInstr::IncQclk { .. } => "inc_qclk",
            AsmInstr::DeclareReg { .. } => "declare_reg",
            AsmInstr::DoneStb {} => "done_stb",
        }
    }
}

/// Per-core instruction lists keyed by channel tuple.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AsmProgram {
    pub cores: BTreeMap<CoreKey, Vec<AsmInstr>>,
}

impl AsmProgram {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("assembly program serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_ops() {
        let p = AsmProgram::from_json(
            r#"{"Q0.qdrv, Q0.rdrv": [
                {"op": "declare_reg", "name": "x", "dtype": "phase"},
                {"op": "reg_alu", "in0": 3.14, "alu_op": "add", "in1_reg": "x", "out_reg": "x"},
                {"op": "jump_fproc", "in0": 1, "alu_op": "eq", "jump_label": "a",
                 "func_id": ["Q1.rdlo", "core_ind"]},
                {"op": "jump_label", "dest_label": "a"},
                {"op": "pulse", "phase": "x", "dest": "Q0.qdrv"},
                {"op": "done_stb"}]}"#,
        )
        .unwrap();
        let (key, instrs) = p.cores.iter().next().unwrap();
        assert_eq!(key.0, vec!["Q0.qdrv", "Q0.rdrv"]);
        assert_eq!(instrs.len(), 6);
        assert!(matches!(
            &instrs[2],
            AsmInstr::JumpFproc { func_id: FuncId::Attr(c, a), .. } if c == "Q1.rdlo" && a == "core_ind"
        ));
        assert_eq!(instrs.iter().filter(|i| i.emits_word()).count(), 4);
        let again = AsmProgram::from_json(&p.to_json()).unwrap();
        assert_eq!(again, p);
    }

    #[test]
    fn rejects_unknown_keys_and_ops() {
        assert!(AsmProgram::from_json(r#"{"Q0.qdrv": [{"op": "idle", "end_time": 4, "x": 1}]}"#).is_err());
        assert!(AsmProgram::from_json(r#"{"Q0.qdrv": [{"op": "nop"}]}"#).is_err());
        assert!(AsmProgram::from_json(r#"{"Q0.qdrv": [{"op": "done_stb", "extra": 0}]}"#).is_err());
    }
}

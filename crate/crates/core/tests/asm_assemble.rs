use std::collections::BTreeMap;
use std::path::PathBuf;

use dproc_core::asm::{
    self, assemble, assemble_listing, read_manifest, write_images, AsmError, AsmInstr, AsmProgram,
    ChannelConfig, CoreImage, CoreKey, DefaultElementConfig, EnvValue, EnvelopeSpec, RegType,
    Value,
};
use dproc_core::isa::{self, AluOp, FieldSource, Instruction, Operand};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn channels() -> ChannelConfig {
    ChannelConfig::from_json(&std::fs::read_to_string(fixture("channels.json")).unwrap()).unwrap()
}

fn reset_image() -> CoreImage {
    let prog =
        AsmProgram::from_json(&std::fs::read_to_string(fixture("reset_asm.json")).unwrap())
            .unwrap();
    let mut images = assemble(&prog, &channels(), &DefaultElementConfig::default()).unwrap();
    assert_eq!(images.len(), 1);
    images.pop_first().unwrap().1
}

fn single(key: &str, instrs: Vec<AsmInstr>) -> Result<CoreImage, AsmError> {
    let mut prog = AsmProgram::default();
    prog.cores.insert(CoreKey::parse(key), instrs);
    assemble(&prog, &channels(), &DefaultElementConfig::default())
        .map(|mut m| m.pop_first().unwrap().1)
}

fn pulse(dest: &str, env: EnvelopeSpec, start: Option<u32>) -> AsmInstr {
    AsmInstr::Pulse {
        freq: Some(Value::Num(4.5e9)),
        phase: Some(Value::Num(0.0)),
        amp: Some(Value::Num(0.5)),
        env: Some(EnvValue::Spec(env)),
        start_time: start,
        dest: dest.into(),
    }
}

fn drag() -> EnvelopeSpec {
    EnvelopeSpec::func(
        "DRAG",
        &[("alpha", 0.0), ("sigmas", 3.0), ("delta", -2e8), ("twidth", 3e-8)],
    )
}

#[test]
fn reset_program_instruction_sequence() {
    let img = reset_image();
    let instrs: Vec<Instruction> = img.binary.iter().map(|&w| isa::decode(w).unwrap()).collect();
    assert_eq!(instrs.len(), 8);
    assert_eq!(instrs[0], Instruction::PhaseReset);
    let starts: Vec<u32> = instrs
        .iter()
        .filter_map(|i| match i {
            Instruction::PulseWriteTrig { start_time, .. } => Some(*start_time),
            _ => None,
        })
        .collect();
    assert_eq!(starts, vec![5, 325, 1195]);
    assert_eq!(instrs[3], Instruction::Idle { end_time: 1184 });
    assert_eq!(
        instrs[4],
        Instruction::JumpFproc {
            op: AluOp::Eq,
            in0: Operand::Imm(1),
            addr: 6,
            fproc_id: 1
        }
    );
    assert_eq!(instrs[5], Instruction::Jump { addr: 7 });
    assert_eq!(instrs[7], Instruction::Done);
    assert_eq!(img.labels["false_1"], 5);
    assert_eq!(img.labels["true_1"], 6);
    assert_eq!(img.labels["end_1"], 7);
}

#[test]
fn reset_program_fields() {
    let img = reset_image();
    let Instruction::PulseWriteTrig { fields, .. } = isa::decode(img.binary[1]).unwrap() else {
        panic!("expected a triggered pulse");
    };
    // 800 cycles at address 0, amp round(0.041 * 65535), element 1 (rdrv).
    assert_eq!(fields.env, FieldSource::Imm(isa::env_word(0, 800)));
    assert_eq!(fields.amp, FieldSource::Imm(2687));
    assert_eq!(fields.phase, FieldSource::Imm(0));
    assert_eq!(fields.freq, FieldSource::Imm(0));
    assert_eq!(fields.cfg, Some(1));
    let Instruction::PulseWriteTrig { fields, .. } = isa::decode(img.binary[2]).unwrap() else {
        panic!("expected a triggered pulse");
    };
    assert_eq!(fields.env, FieldSource::Imm(isa::env_word(0, 795)));
    assert_eq!(fields.cfg, Some(2));
    let Instruction::PulseWriteTrig { fields, .. } = isa::decode(img.binary[6]).unwrap() else {
        panic!("expected a triggered pulse");
    };
    assert_eq!(fields.env, FieldSource::Imm(isa::env_word(0, 15)));
    assert_eq!(fields.cfg, Some(0));
    assert_eq!(img.freq_buffers["Q1.rdrv"].words, vec![3_520_692_067]);
    assert_eq!(img.freq_buffers["Q1.qdrv"].freqs, vec![4.67035e9]);
    assert_eq!(img.env_buffers["Q1.rdrv"].samples.len(), 800);
    assert_eq!(img.elements[&2], "Q1.rdlo");
}

#[test]
fn reset_disassembly_reassembles() {
    let img = reset_image();
    let listing = isa::disassemble(&img.binary).unwrap();
    assert_eq!(listing.lines().count(), 8);
    for m in ["pulse", "idle", "jump_fproc"] {
        assert!(listing.contains(m), "listing lacks {m}:\n{listing}");
    }
    assert_eq!(assemble_listing(&listing).unwrap(), img.binary);
    let again = isa::disassemble(&assemble_listing(&listing).unwrap()).unwrap();
    assert_eq!(again, listing);
}

#[test]
fn resource_use_of_reset_program() {
    assert!(reset_image().binary.len() * 100 < asm::PROGRAM_MEMORY_WORDS);
}

#[test]
fn assembly_is_deterministic() {
    let a = reset_image();
    let b = reset_image();
    assert_eq!(a, b);
}

#[test]
fn empty_core() {
    let img = single("Q0.qdrv,Q0.rdrv,Q0.rdlo", vec![]).unwrap();
    assert!(img.binary.is_empty());
    assert!(img.env_buffers.is_empty());
    assert!(img.freq_buffers.is_empty());
}

#[test]
fn identical_envelopes_share_an_address() {
    let img = single(
        "Q0.qdrv",
        vec![
            pulse("Q0.qdrv", drag(), Some(10)),
            pulse(
                "Q0.qdrv",
                EnvelopeSpec::func("square", &[("twidth", 2e-8)]),
                Some(40),
            ),
            pulse("Q0.qdrv", drag(), Some(80)),
        ],
    )
    .unwrap();
    let env = |i: usize| match isa::decode(img.binary[i]).unwrap() {
        Instruction::PulseWriteTrig { fields, .. } => fields.env.imm().unwrap(),
        other => panic!("{other:?}"),
    };
    assert_eq!(env(0), env(2));
    assert_ne!(env(0), env(1));
    let buf = &img.env_buffers["Q0.qdrv"];
    assert_eq!(buf.entries.len(), 2);
    assert_eq!(buf.samples.len(), 15 + 10);
    assert_eq!(img.freq_buffers["Q0.qdrv"].words.len(), 1);
}

#[test]
fn every_embedded_address_is_populated() {
    let img = reset_image();
    for &w in &img.binary {
        if let Instruction::PulseWriteTrig { fields, .. } = isa::decode(w).unwrap() {
            let ch = img.channel_for_cfg(fields.cfg.unwrap()).unwrap();
            let (addr, len) = isa::split_env_word(fields.env.imm().unwrap());
            let buf = &img.env_buffers[ch];
            assert!(buf.entries.iter().any(|e| e.addr == addr && e.cycles == len));
            assert!((addr + len) as usize <= buf.samples.len());
            let f = fields.freq.imm().unwrap();
            assert!(img.freq_hz(ch, f).is_some());
        }
    }
}

#[test]
fn label_errors() {
    let undefined = single(
        "Q0.qdrv",
        vec![AsmInstr::JumpI {
            jump_label: "nowhere".into(),
        }],
    )
    .unwrap_err();
    assert_eq!(undefined.root(), &AsmError::UndefinedLabel("nowhere".into()));
    let dup = single(
        "Q0.qdrv",
        vec![
            AsmInstr::JumpLabel { dest_label: "a".into() },
            AsmInstr::DoneStb {},
            AsmInstr::JumpLabel { dest_label: "a".into() },
        ],
    )
    .unwrap_err();
    assert_eq!(dup.root(), &AsmError::DuplicateLabel("a".into()));
}

#[test]
fn channel_errors() {
    let e = single("Q7.qdrv", vec![]).unwrap_err();
    assert_eq!(e, AsmError::UnknownChannel("Q7.qdrv".into()));
    let e = single("Q0.qdrv", vec![pulse("Q1.qdrv", drag(), None)]).unwrap_err();
    assert!(matches!(e.root(), AsmError::ChannelNotInCore { .. }));
}

#[test]
fn typed_registers() {
    let decl = |name: &str, dtype| AsmInstr::DeclareReg {
        name: name.into(),
        dtype,
    };
    let ok = single(
        "Q0.qdrv",
        vec![
            decl("ph", RegType::Phase),
            AsmInstr::RegAlu {
                in0: Value::Num(std::f64::consts::PI),
                alu_op: AluOp::Add,
                in1_reg: "ph".into(),
                out_reg: "ph".into(),
            },
            AsmInstr::Pulse {
                freq: None,
                phase: Some(Value::Reg("ph".into())),
                amp: None,
                env: None,
                start_time: Some(30),
                dest: "Q0.qdrv".into(),
            },
        ],
    )
    .unwrap();
    assert_eq!(
        isa::decode(ok.binary[0]).unwrap(),
        Instruction::RegAlu {
            op: AluOp::Add,
            in0: Operand::Imm(65536),
            in1: 0,
            dest: 0
        }
    );
    assert!(matches!(
        isa::decode(ok.binary[1]).unwrap(),
        Instruction::PulseWriteTrig { reg: 0, fields, .. } if fields.phase == FieldSource::Reg
    ));

    let mixed = single(
        "Q0.qdrv",
        vec![
            decl("ph", RegType::Phase),
            decl("a", RegType::Amp),
            AsmInstr::RegAlu {
                in0: Value::Reg("a".into()),
                alu_op: AluOp::Add,
                in1_reg: "ph".into(),
                out_reg: "ph".into(),
            },
        ],
    )
    .unwrap_err();
    assert!(matches!(mixed.root(), AsmError::RegisterTypeMismatch(_)));

    let wrong_field = single(
        "Q0.qdrv",
        vec![
            decl("a", RegType::Amp),
            AsmInstr::Pulse {
                freq: None,
                phase: Some(Value::Reg("a".into())),
                amp: None,
                env: None,
                start_time: None,
                dest: "Q0.qdrv".into(),
            },
        ],
    )
    .unwrap_err();
    assert!(matches!(wrong_field.root(), AsmError::RegisterTypeMismatch(_)));

    let undeclared = single(
        "Q0.qdrv",
        vec![AsmInstr::IncQclk {
            in0: Value::Reg("t".into()),
        }],
    )
    .unwrap_err();
    assert_eq!(undeclared.root(), &AsmError::UndeclaredRegister("t".into()));
}

#[test]
fn program_memory_limit() {
    let fits = vec![AsmInstr::Idle { end_time: 0 }; asm::PROGRAM_MEMORY_WORDS];
    assert_eq!(single("Q0.qdrv", fits).unwrap().binary.len(), 2048);
    let over = vec![AsmInstr::Idle { end_time: 0 }; asm::PROGRAM_MEMORY_WORDS + 1];
    assert_eq!(
        single("Q0.qdrv", over).unwrap_err(),
        AsmError::ProgramTooLarge {
            words: 2049,
            limit: 2048
        }
    );
}

#[test]
fn buffer_limits() {
    // 513 distinct frequencies overflow the 9-bit frequency address space.
    let many: Vec<AsmInstr> = (0..513)
        .map(|k| AsmInstr::Pulse {
            freq: Some(Value::Num(1e9 + f64::from(k) * 1e3)),
            phase: None,
            amp: None,
            env: None,
            start_time: None,
            dest: "Q0.qdrv".into(),
        })
        .collect();
    let e = single("Q0.qdrv", many).unwrap_err();
    assert!(matches!(e.root(), AsmError::BufferOverflow { buffer: "frequency", .. }));

    // Two 2.4 us envelopes (1200 cycles each) fit; a fourth does not.
    let wide = |w: f64| EnvelopeSpec::func("square", &[("twidth", w)]);
    let envs: Vec<AsmInstr> = [2.4e-6, 2.5e-6, 2.6e-6, 2.7e-6]
        .into_iter()
        .map(|w| pulse("Q0.qdrv", wide(w), None))
        .collect();
    let e = single("Q0.qdrv", envs).unwrap_err();
    assert!(matches!(e.root(), AsmError::BufferOverflow { buffer: "envelope", .. }));

    let e = single("Q0.qdrv", vec![pulse("Q0.qdrv", wide(9e-6), None)]).unwrap_err();
    assert_eq!(e.root(), &AsmError::EnvelopeTooLong(4500));
}

#[test]
fn fproc_id_resolution() {
    let jf = |func_id| AsmInstr::JumpFproc {
        in0: Value::Num(1.0),
        alu_op: AluOp::Eq,
        jump_label: "x".into(),
        func_id,
    };
    let label = AsmInstr::JumpLabel { dest_label: "x".into() };
    let e = single("Q0.qdrv", vec![jf(asm::FuncId::Id(256)), label.clone()]).unwrap_err();
    assert_eq!(e.root(), &AsmError::FprocIdOutOfRange(256));
    let e = single(
        "Q0.qdrv",
        vec![
            jf(asm::FuncId::Attr("Q1.rdlo".into(), "slot".into())),
            label.clone(),
        ],
    )
    .unwrap_err();
    assert!(matches!(e.root(), AsmError::UnknownAttribute { .. }));
    let ok = single(
        "Q0.qdrv",
        vec![jf(asm::FuncId::Attr("Q2.rdlo".into(), "core_ind".into())), label],
    )
    .unwrap();
    assert!(matches!(
        isa::decode(ok.binary[0]).unwrap(),
        Instruction::JumpFproc { fproc_id: 2, addr: 1, .. }
    ));
}

#[test]
fn amplitude_out_of_range() {
    let e = single(
        "Q0.qdrv",
        vec![AsmInstr::Pulse {
            freq: None,
            phase: None,
            amp: Some(Value::Num(1.5)),
            env: None,
            start_time: None,
            dest: "Q0.qdrv".into(),
        }],
    )
    .unwrap_err();
    assert_eq!(e.root(), &AsmError::AmplitudeOutOfRange(1.5));
}

#[test]
fn manifest_roundtrip() {
    let img = reset_image();
    let mut images = BTreeMap::new();
    images.insert(img.key.clone(), img);
    let dir = tempfile::tempdir().unwrap();
    let written = write_images(&images, dir.path(), None).unwrap();
    assert_eq!(written.cores.len(), 1);
    assert_eq!(written.cores[0].words, 8);
    let bin = std::fs::read(dir.path().join("core0.bin")).unwrap();
    assert_eq!(bin.len(), 8 * 16);
    let env = std::fs::read(dir.path().join("core0.Q1.rdrv.env")).unwrap();
    assert_eq!(env.len(), 4 + 800 * 4);
    let (manifest, loaded) = read_manifest(&dir.path().join("manifest.json")).unwrap();
    assert_eq!(manifest, written);
    assert_eq!(loaded, images);
}

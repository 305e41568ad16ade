//! Golden words pinning the bit layout of every instruction variant, plus a
//! randomized encode/decode roundtrip.
//!
//! The golden values are written out by hand, field by field, from the
//! format tables:
//!
//! ```text
//! ALU/flow: 127:124 opcode | 123 r/i | 122:120 alu op | 119:88 in0 | 87:84 in1
//!           | 83:68 dest/jump | 67:52 fproc id | 51:0 zero
//! pulse:    127:120 opcode | 119:116 reg | 115:114 env ctrl | 113:90 env
//!           | 89:88 phase ctrl | 87:71 phase | 70:69 freq ctrl | 68:60 freq
//!           | 59:58 amp ctrl | 57:42 amp | 41 cfg en | 40:37 cfg | 36:5 start | 4:0 zero
//! ```

mod common;

use common::isa_gen::instruction;
use dproc_core::isa::{decode, encode, AluOp, FieldSource, Instruction, Operand, PulseFields};
use proptest::prelude::*;

fn golden() -> Vec<(Instruction, u128)> {
    vec![
        // jump_fproc eq #1 -> 7, fproc 1: opcode 0x5, alu eq = 0b011
        (
            Instruction::JumpFproc {
                op: AluOp::Eq,
                in0: Operand::Imm(1),
                addr: 7,
                fproc_id: 1,
            },
            0x5300_0000_0100_0070_0010_0000_0000_0000,
        ),
        // reg_alu add #3, r2 -> r5
        (
            Instruction::RegAlu {
                op: AluOp::Add,
                in0: Operand::Imm(3),
                in1: 2,
                dest: 5,
            },
            0x1100_0000_0320_0050_0000_0000_0000_0000,
        ),
        // reg_alu sub r9, r1 -> r15 (r/i set)
        (
            Instruction::RegAlu {
                op: AluOp::Sub,
                in0: Operand::Reg(9),
                in1: 1,
                dest: 15,
            },
            0x1A00_0000_0910_00F0_0000_0000_0000_0000,
        ),
        (
            Instruction::Jump { addr: 0x1234 },
            0x2000_0000_0001_2340_0000_0000_0000_0000,
        ),
        // jump_cond lt #-1, r3 -> 2
        (
            Instruction::JumpCond {
                op: AluOp::Lt,
                in0: Operand::Imm(-1),
                in1: 3,
                addr: 2,
            },
            0x34FF_FFFF_FF30_0020_0000_0000_0000_0000,
        ),
        // alu_fproc id1 #0, fproc 200 -> r4
        (
            Instruction::AluFproc {
                op: AluOp::Id1,
                in0: Operand::Imm(0),
                dest: 4,
                fproc_id: 200,
            },
            0x4600_0000_0000_0040_0C80_0000_0000_0000,
        ),
        // inc_qclk #-100
        (
            Instruction::IncQclk {
                in0: Operand::Imm(-100),
            },
            0x60FF_FFFF_9C00_0000_0000_0000_0000_0000,
        ),
        // idle 1184 = 0x4A0, shifted by 5 = 0x9400
        (
            Instruction::Idle { end_time: 1184 },
            0xA000_0000_0000_0000_0000_0000_0000_9400,
        ),
        (
            Instruction::PhaseReset,
            0x7000_0000_0000_0000_0000_0000_0000_0000,
        ),
        (Instruction::Done, 0xF000_0000_0000_0000_0000_0000_0000_0000),
        // pulse_write_trig, all fields immediate:
        //   env 0x001320 -> (0x001320 << 90), ctrl 01 << 114
        //   phase 0x10000 -> << 71, ctrl 01 << 88
        //   freq 0x003 -> << 60, ctrl 01 << 69
        //   amp 0x0a7f -> << 42, ctrl 01 << 58
        //   cfg en << 41, cfg 1 << 37, start 5 << 5
        (
            Instruction::PulseWriteTrig {
                reg: 0,
                fields: PulseFields {
                    env: FieldSource::Imm(0x001320),
                    phase: FieldSource::Imm(0x10000),
                    freq: FieldSource::Imm(3),
                    amp: FieldSource::Imm(0x0a7f),
                    cfg: Some(1),
                },
                start_time: 5,
            },
            (0x90u128 << 120)
                | (0b01 << 114)
                | (0x001320u128 << 90)
                | (0b01 << 88)
                | (0x10000u128 << 71)
                | (0b01 << 69)
                | (3u128 << 60)
                | (0b01 << 58)
                | (0x0a7fu128 << 42)
                | (1 << 41)
                | (1 << 37)
                | (5 << 5),
        ),
        // pulse_write r7, phase from register, rest keep
        (
            Instruction::PulseWrite {
                reg: 7,
                fields: PulseFields {
                    phase: FieldSource::Reg,
                    ..PulseFields::default()
                },
            },
            0x8070_0000_0300_0000_0000_0000_0000_0000,
        ),
    ]
}

#[test]
fn golden_words_pin_layout() {
    for (instr, word) in golden() {
        assert_eq!(encode(&instr).unwrap(), word, "encode {instr:?}");
        assert_eq!(decode(word).unwrap(), instr, "decode {word:032x}");
    }
}

#[test]
fn golden_fixture_file_matches() {
    // One `<hex word>  <listing>` per line; regenerating this file is a
    // deliberate act, so a layout change shows up as a diff here.
    let text = include_str!("fixtures/golden_words.txt");
    let words: Vec<u128> = text
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|l| u128::from_str_radix(l.split_whitespace().next().unwrap(), 16).unwrap())
        .collect();
    let expected: Vec<u128> = golden().into_iter().map(|(_, w)| w).collect();
    assert_eq!(words, expected);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn decode_inverts_encode(instr in instruction()) {
        let word = encode(&instr).unwrap();
        prop_assert_eq!(decode(word).unwrap(), instr);
    }
}

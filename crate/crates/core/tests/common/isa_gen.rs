//! Random instruction words covering every variant and field source.

use dproc_core::isa::{AluOp, FieldSource, Instruction, Operand, PulseFields};
use proptest::prelude::*;
use proptest::strategy::ValueTree;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

pub fn operand() -> impl Strategy<Value = Operand> {
    prop_oneof![(0u8..16).prop_map(Operand::Reg), any::<i32>().prop_map(Operand::Imm)]
}

fn alu_op() -> impl Strategy<Value = AluOp> {
    prop::sample::select(AluOp::ALL.to_vec())
}

fn source<T: std::fmt::Debug + Clone + 'static>(
    imm: impl Strategy<Value = T> + 'static,
) -> impl Strategy<Value = FieldSource<T>> {
    prop_oneof![
        Just(FieldSource::Keep),
        Just(FieldSource::Reg),
        imm.prop_map(FieldSource::Imm)
    ]
}

fn fields() -> impl Strategy<Value = PulseFields> {
    (
        source(0u32..(1 << 24)),
        source(0u32..(1 << 17)),
        source(0u16..(1 << 9)),
        source(any::<u16>()),
        prop::option::of(0u8..16),
    )
        .prop_map(|(env, phase, freq, amp, cfg)| PulseFields {
            env,
            phase,
            freq,
            amp,
            cfg,
        })
}

pub fn instruction() -> impl Strategy<Value = Instruction> {
    prop_oneof![
        (0u8..16, fields()).prop_map(|(reg, fields)| Instruction::PulseWrite { reg, fields }),
        (0u8..16, fields(), any::<u32>()).prop_map(|(reg, fields, start_time)| {
            Instruction::PulseWriteTrig {
                reg,
                fields,
                start_time,
            }
        }),
        (alu_op(), operand(), 0u8..16, 0u8..16)
            .prop_map(|(op, in0, in1, dest)| Instruction::RegAlu { op, in0, in1, dest }),
        any::<u16>().prop_map(|addr| Instruction::Jump { addr }),
        (alu_op(), operand(), 0u8..16, any::<u16>())
            .prop_map(|(op, in0, in1, addr)| Instruction::JumpCond { op, in0, in1, addr }),
        (alu_op(), operand(), any::<u16>(), any::<u16>()).prop_map(|(op, in0, addr, fproc_id)| {
            Instruction::JumpFproc {
                op,
                in0,
                addr,
                fproc_id,
            }
        }),
        (alu_op(), operand(), 0u8..16, any::<u16>()).prop_map(|(op, in0, dest, fproc_id)| {
            Instruction::AluFproc {
                op,
                in0,
                dest,
                fproc_id,
            }
        }),
        operand().prop_map(|in0| Instruction::IncQclk { in0 }),
        any::<u32>().prop_map(|end_time| Instruction::Idle { end_time }),
        Just(Instruction::Done),
        Just(Instruction::PhaseReset),
    ]
}

/// `n` instructions drawn from a fixed seed.
pub fn sample(n: usize, seed: u8) -> Vec<Instruction> {
    let rng = TestRng::from_seed(RngAlgorithm::ChaCha, &[seed; 32]);
    let mut runner = TestRunner::new_with_rng(Config::default(), rng);
    let strat = instruction();
    (0..n)
        .map(|_| strat.new_tree(&mut runner).unwrap().current())
        .collect()
}

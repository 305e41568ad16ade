//! Toolchain for a bank of distributed pulse-processor cores.
//!
//! The crate is organised bottom-up:
//!
//! - [`isa`]: 128-bit instruction words, bit-exact encode/decode and a text listing format.
//! - [`asm`]: JSON assembly language to per-core binaries plus envelope/frequency buffers.
//! - [`ir`]: the multi-level JSON IR and the pass pipeline lowering it to assembly.
//! - [`sim`]: lock-step simulator of the cores, the shared time reference and the
//!   function-processor feedback path.
//! - [`qbackend`]: measurement backends that close the feedback loop (scripted and
//!   an ideal statevector model), plus multi-shot execution.
//!
//! [`timing`] holds the instruction issue-cost table that the scheduler, linter and
//! simulator all read from.

pub mod asm;
pub mod ir;
pub mod isa;
pub mod qbackend;
pub mod sim;
pub mod timing;
pub mod units;

//! Instruction issue costs.
//!
//! The scheduler, the linter and the simulator all read cycle costs from a
//! [`TimingModel`], so a schedule the compiler accepts is one the simulated
//! cores can actually meet.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::isa::OpClass;
use crate::units::DEFAULT_CLOCK_HZ;

pub const DEFAULT_ISSUE_COST: u32 = 2;
pub const DEFAULT_FPROC_LATENCY: u32 = 4;

/// Per-opcode issue costs plus the function-processor round trip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimingModel {
    /// Fabric clock in Hz.
    pub clock_hz: f64,
    /// Issue cost in cycles for opcodes without an override.
    pub default_cost: u32,
    pub costs: BTreeMap<OpClass, u32>,
    /// Cycles between an FPROC request and its response.
    pub fproc_latency: u32,
}

impl Default for TimingModel {
    fn default() -> Self {
        Self {
            clock_hz: DEFAULT_CLOCK_HZ,
            default_cost: DEFAULT_ISSUE_COST,
            costs: BTreeMap::new(),
            fproc_latency: DEFAULT_FPROC_LATENCY,
        }
    }
}

impl TimingModel {
    /// Cycles from an instruction's first cycle until the core can fetch the
    /// next one, ignoring waits (triggers, idles) and FPROC stalls.
    pub fn cost(&self, class: OpClass) -> u32 {
        self.costs.get(&class).copied().unwrap_or(self.default_cost)
    }

    /// Full occupancy of an FPROC instruction: request latency plus issue.
    pub fn fproc_cost(&self, class: OpClass) -> u32 {
        self.cost(class) + self.fproc_latency
    }

    pub fn is_valid(&self) -> bool {
        self.clock_hz > 0.0
            && self.default_cost > 0
            && self.costs.values().all(|&c| c > 0)
            && self.fproc_latency > 0
    }
}

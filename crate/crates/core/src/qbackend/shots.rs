use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{BackendError, MeasurementBackend};
use crate::sim::{self, Machine, SimFailure, Trace};

/// Independent stream for one shot: seeded by the master seed, stream
/// selected by the shot index, so results do not depend on thread scheduling.
pub fn shot_rng(master_seed: u64, shot: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(shot);
    rng
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitRecord {
    pub qubit: String,
    pub cycle: u64,
    pub bit: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub shot: u64,
    /// Measurements read back through the FPROC bank.
    pub mid: Vec<BitRecord>,
    /// Last unconsumed measurement per qubit.
    pub final_bits: BTreeMap<String, u8>,
}

impl ShotRecord {
    pub fn from_trace(shot: u64, trace: &Trace) -> Self {
        let mut mid = Vec::new();
        let mut final_bits = BTreeMap::new();
        for (i, m) in trace.measurements.iter().enumerate() {
            // Visible until the next result on the same slot lands.
            let superseded = trace.measurements[i + 1..]
                .iter()
                .filter(|n| n.slot == m.slot)
                .map(|n| n.visible_cycle)
                .min()
                .unwrap_or(u64::MAX);
            let consumed = trace.fproc.iter().any(|f| {
                f.fproc_id == m.slot && f.issue_cycle >= m.visible_cycle && f.issue_cycle < superseded
            });
            if consumed {
                mid.push(BitRecord {
                    qubit: m.qubit.clone(),
                    cycle: m.demod_end,
                    bit: m.bit,
                });
            } else {
                final_bits.insert(m.qubit.clone(), m.bit);
            }
        }
        Self {
            shot,
            mid,
            final_bits,
        }
    }

    pub fn mid_bit(&self, qubit: &str) -> Option<u8> {
        self.mid.iter().rev().find(|b| b.qubit == qubit).map(|b| b.bit)
    }
}

#[derive(Debug, Error)]
pub enum ShotError {
    #[error("shot {shot}: {failure}")]
    Sim { shot: u64, failure: SimFailure },
    #[error("shot {shot}: {source}")]
    Backend { shot: u64, source: BackendError },
}

impl ShotError {
    pub fn shot(&self) -> u64 {
        match self {
            ShotError::Sim { shot, .. } | ShotError::Backend { shot, .. } => *shot,
        }
    }
}

/// Runs `n_shots` independent simulations in parallel. `factory` builds a
/// fresh backend per shot from that shot's RNG stream. On failure the error
/// of the lowest failing shot is returned.
pub fn run_shots<B, F>(
    machine: &Machine,
    n_shots: u64,
    master_seed: u64,
    factory: F,
) -> Result<Vec<ShotRecord>, ShotError>
where
    B: MeasurementBackend,
    F: Fn(u64, ChaCha8Rng) -> Result<B, BackendError> + Sync,
{
    let results: Vec<Result<ShotRecord, ShotError>> = (0..n_shots)
        .into_par_iter()
        .map(|shot| {
            let mut backend = factory(shot, shot_rng(master_seed, shot))
                .map_err(|source| ShotError::Backend { shot, source })?;
            let mut m = machine.clone();
            let trace =
                sim::run(&mut m, &mut backend).map_err(|failure| ShotError::Sim { shot, failure })?;
            Ok(ShotRecord::from_trace(shot, &trace))
        })
        .collect();
    results.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expectation {
    pub basis: String,
    pub qubit: String,
    /// Mean of `1 − 2·bit`.
    pub expectation: f64,
    /// Binomial standard error of the mean.
    pub stderr: f64,
    pub n: u64,
}

/// Z-type expectation of `qubit`'s final bit over the records that have one.
pub fn aggregate<'a>(
    records: impl IntoIterator<Item = &'a ShotRecord>,
    qubit: &str,
    basis: &str,
) -> Expectation {
    let (mut n, mut ones) = (0u64, 0u64);
    for r in records {
        if let Some(&b) = r.final_bits.get(qubit) {
            n += 1;
            ones += u64::from(b);
        }
    }
    let (expectation, stderr) = if n == 0 {
        (0.0, 0.0)
    } else {
        let p1 = ones as f64 / n as f64;
        let mean = 1.0 - 2.0 * p1;
        (mean, 2.0 * (p1 * (1.0 - p1) / n as f64).sqrt())
    };
    Expectation {
        basis: basis.to_string(),
        qubit: qubit.to_string(),
        expectation,
        stderr,
        n,
    }
}

/// Shots that saw one combination of mid-circuit bits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    /// Last mid-circuit bit per qubit.
    pub mid: BTreeMap<String, u8>,
    pub n: u64,
    pub expectations: Vec<Expectation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub shots: u64,
    pub seed: u64,
    /// Per qubit with a final bit, over all shots.
    pub expectations: Vec<Expectation>,
    /// The same table within each mid-circuit outcome.
    pub conditioned: Vec<Partition>,
}

/// Final-bit expectations, overall and partitioned by mid-circuit outcome.
pub fn report(records: &[ShotRecord], seed: u64) -> Report {
    let qubits: BTreeSet<&String> = records.iter().flat_map(|r| r.final_bits.keys()).collect();
    let table = |rs: &[&ShotRecord]| -> Vec<Expectation> {
        qubits
            .iter()
            .map(|q| aggregate(rs.iter().copied(), q, "Z"))
            .collect()
    };
    let mut groups: BTreeMap<BTreeMap<String, u8>, Vec<&ShotRecord>> = BTreeMap::new();
    for r in records {
        let mid = r.mid.iter().map(|b| (b.qubit.clone(), b.bit)).collect();
        groups.entry(mid).or_default().push(r);
    }
    let all: Vec<&ShotRecord> = records.iter().collect();
    Report {
        shots: records.len() as u64,
        seed,
        expectations: table(&all),
        conditioned: groups
            .iter()
            .map(|(mid, rs)| Partition {
                mid: mid.clone(),
                n: rs.len() as u64,
                expectations: table(rs),
            })
            .collect(),
    }
}

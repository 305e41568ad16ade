use serde::{Deserialize, Serialize};

use super::machine::CoreStatus;

/// A triggered pulse with its resolved pulse-register contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseEvent {
    /// Core index (cores are numbered in core-key order).
    pub core: usize,
    /// Program address of the triggering instruction.
    pub addr: u16,
    pub channel: String,
    /// Global cycle of the trigger: `start_time` minus the core's
    /// accumulated `inc_qclk` offset.
    pub trigger_cycle: u64,
    /// Time-reference value at the trigger (the instruction's start time).
    pub start_time: u32,
    pub env_addr: u32,
    /// Envelope length in cycles.
    pub duration: u32,
    pub phase_word: u32,
    pub freq_word: u16,
    pub amp_word: u16,
    pub cfg: u8,
    /// Frequency from the channel's frequency buffer, when the address is populated.
    pub freq_hz: Option<f64>,
    /// Fired after its start time (lenient trigger-miss policy only).
    pub late: bool,
}

impl PulseEvent {
    pub fn end_cycle(&self) -> u64 {
        self.trigger_cycle + u64::from(self.duration)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FprocRecord {
    pub core: usize,
    pub addr: u16,
    pub fproc_id: u16,
    pub issue_cycle: u64,
    pub ready_cycle: u64,
    pub value: i32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub qubit: String,
    pub channel: String,
    pub slot: u16,
    /// Demodulation-window end; the backend measures here.
    pub demod_end: u64,
    /// First cycle at which an FPROC read sees the result.
    pub visible_cycle: u64,
    pub bit: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseResetRecord {
    pub core: usize,
    pub cycle: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoreSummary {
    pub key: String,
    pub status: CoreStatus,
    /// Cycle at which the core executed `done` (or its last activity).
    pub cycles: u64,
    /// Accumulated `inc_qclk` offset.
    pub time_offset: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Completed,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub events: Vec<PulseEvent>,
    pub fproc: Vec<FprocRecord>,
    pub measurements: Vec<MeasurementRecord>,
    pub phase_resets: Vec<PhaseResetRecord>,
    pub cores: Vec<CoreSummary>,
    pub termination: Termination,
    /// Last simulated cycle.
    pub final_cycle: u64,
}

impl Trace {
    pub fn empty() -> Self {
        Trace {
            events: Vec::new(),
            fproc: Vec::new(),
            measurements: Vec::new(),
            phase_resets: Vec::new(),
            cores: Vec::new(),
            termination: Termination::Completed,
            final_cycle: 0,
        }
    }

    pub fn events_on<'a>(&'a self, channel: &'a str) -> impl Iterator<Item = &'a PulseEvent> + 'a {
        self.events.iter().filter(move |e| e.channel == channel)
    }

    /// One JSON object per line: pulses, FPROC requests and measurements,
    /// each tagged with `kind`.
    pub fn to_jsonl(&self) -> String {
        #[derive(Serialize)]
        #[serde(tag = "kind", rename_all = "snake_case")]
        enum Line<'a> {
            Pulse(&'a PulseEvent),
            Fproc(&'a FprocRecord),
            Measurement(&'a MeasurementRecord),
        }
        let mut out = String::new();
        let lines = self
            .events
            .iter()
            .map(Line::Pulse)
            .chain(self.fproc.iter().map(Line::Fproc))
            .chain(self.measurements.iter().map(Line::Measurement));
        for line in lines {
            out.push_str(&serde_json::to_string(&line).expect("trace line serializes"));
            out.push('\n');
        }
        out
    }
}

/// One pulse in the per-channel timeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineRow {
    pub channel: String,
    pub core: usize,
    pub start_cycle: u64,
    pub duration: u32,
    pub freq_hz: Option<f64>,
    pub freq_word: u16,
    pub phase_word: u32,
    pub amp_word: u16,
    /// Starts before the previous pulse on this channel ended.
    pub overlap: bool,
}

const TIMELINE_HEADER: [&str; 9] = [
    "channel",
    "core",
    "start_cycle",
    "duration",
    "freq_hz",
    "freq_word",
    "phase_word",
    "amp_word",
    "overlap",
];

/// Pulses grouped by channel (alphabetical), each channel in start order.
pub fn timeline(trace: &Trace) -> Vec<TimelineRow> {
    let mut events: Vec<&PulseEvent> = trace.events.iter().collect();
    events.sort_by(|a, b| {
        (&a.channel, a.trigger_cycle, a.core).cmp(&(&b.channel, b.trigger_cycle, b.core))
    });
    let mut rows = Vec::with_capacity(events.len());
    let mut prev: Option<(&str, u64)> = None;
    for e in events {
        let overlap = matches!(prev, Some((ch, end)) if ch == e.channel && e.trigger_cycle < end);
        let end = match prev {
            Some((ch, end)) if ch == e.channel => end.max(e.end_cycle()),
            _ => e.end_cycle(),
        };
        prev = Some((&e.channel, end));
        rows.push(TimelineRow {
            channel: e.channel.clone(),
            core: e.core,
            start_cycle: e.trigger_cycle,
            duration: e.duration,
            freq_hz: e.freq_hz,
            freq_word: e.freq_word,
            phase_word: e.phase_word,
            amp_word: e.amp_word,
            overlap,
        });
    }
    rows
}

pub fn timeline_csv(trace: &Trace) -> String {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    w.write_record(TIMELINE_HEADER).expect("write to memory");
    for row in timeline(trace) {
        w.serialize(row).expect("write to memory");
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv is utf-8")
}

pub fn from_timeline_csv(text: &str) -> Result<Vec<TimelineRow>, csv::Error> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect()
}

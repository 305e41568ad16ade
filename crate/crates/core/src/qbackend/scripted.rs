use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{BackendError, MeasurementBackend};
use crate::sim::Readout;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exhaustion {
    /// Keep returning the last bit of the queue.
    #[default]
    RepeatLast,
    Error,
}

/// Per-qubit outcome queues, consumed in order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedOutcomes {
    pub outcomes: BTreeMap<String, Vec<u8>>,
    #[serde(default)]
    pub exhausted: Exhaustion,
}

impl ScriptedOutcomes {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn single(qubit: &str, bits: &[u8]) -> Self {
        let mut outcomes = BTreeMap::new();
        outcomes.insert(qubit.to_string(), bits.to_vec());
        Self {
            outcomes,
            exhausted: Exhaustion::RepeatLast,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScriptedBackend {
    script: ScriptedOutcomes,
    cursor: BTreeMap<String, usize>,
}

impl ScriptedBackend {
    pub fn new(script: ScriptedOutcomes) -> Self {
        Self {
            script,
            cursor: BTreeMap::new(),
        }
    }
}

impl MeasurementBackend for ScriptedBackend {
    fn measure(&mut self, readout: &Readout, _cycle: u64) -> Result<bool, BackendError> {
        let q = &readout.qubit;
        let bits = self
            .script
            .outcomes
            .get(q)
            .filter(|b| !b.is_empty())
            .ok_or_else(|| BackendError::NoScript(q.clone()))?;
        let i = self.cursor.entry(q.clone()).or_insert(0);
        let bit = match bits.get(*i) {
            Some(&b) => b,
            None if self.script.exhausted == Exhaustion::RepeatLast => *bits.last().expect("nonempty"),
            None => return Err(BackendError::ScriptExhausted(q.clone())),
        };
        *i += 1;
        Ok(bit != 0)
    }

    fn reset(&mut self) {
        self.cursor.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn readout(q: &str) -> Readout {
        Readout {
            channel: format!("{q}.rdlo"),
            qubit: q.into(),
            slot: 0,
            delay_cycles: 0,
        }
    }

    #[test]
    fn queue_order_and_exhaustion() {
        let mut b = ScriptedBackend::new(ScriptedOutcomes::single("Q1", &[1, 0]));
        let r = readout("Q1");
        assert_eq!(b.measure(&r, 0), Ok(true));
        assert_eq!(b.measure(&r, 0), Ok(false));
        assert_eq!(b.measure(&r, 0), Ok(false));
        b.reset();
        assert_eq!(b.measure(&r, 0), Ok(true));
        assert_eq!(b.measure(&readout("Q0"), 0), Err(BackendError::NoScript("Q0".into())));

        let mut strict = ScriptedBackend::new(ScriptedOutcomes {
            exhausted: Exhaustion::Error,
            ..ScriptedOutcomes::single("Q1", &[1])
        });
        assert_eq!(strict.measure(&r, 0), Ok(true));
        assert_eq!(
            strict.measure(&r, 0),
            Err(BackendError::ScriptExhausted("Q1".into()))
        );
    }

    #[test]
    fn json_form() {
        let s = ScriptedOutcomes::from_json(r#"{"outcomes": {"Q1": [1, 1, 0]}, "exhausted": "error"}"#)
            .unwrap();
        assert_eq!(s.outcomes["Q1"], vec![1, 1, 0]);
        assert_eq!(s.exhausted, Exhaustion::Error);
        assert!(ScriptedOutcomes::from_json(r#"{"outcomes": {}, "x": 1}"#).is_err());
    }
}

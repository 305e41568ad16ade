use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FprocError {
    #[error("unknown FPROC id {0}")]
    UnknownId(u16),
    #[error("FPROC slot {0} read before any measurement completed")]
    EmptySlot(u16),
}

/// Most recent discrimination result per qubit slot.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FprocBank {
    slots: BTreeMap<u16, Option<i32>>,
}

impl FprocBank {
    pub fn with_slots(slots: impl IntoIterator<Item = u16>) -> Self {
        Self {
            slots: slots.into_iter().map(|s| (s, None)).collect(),
        }
    }

    pub fn write(&mut self, slot: u16, value: i32) {
        self.slots.insert(slot, Some(value));
    }

    /// Non-destructive read. An empty slot is an error when `strict`, else 0.
    pub fn read(&self, id: u16, strict: bool) -> Result<i32, FprocError> {
        match self.slots.get(&id) {
            None => Err(FprocError::UnknownId(id)),
            Some(Some(v)) => Ok(*v),
            Some(None) if strict => Err(FprocError::EmptySlot(id)),
            Some(None) => Ok(0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads() {
        let mut bank = FprocBank::with_slots([1, 3]);
        assert_eq!(bank.read(1, true), Err(FprocError::EmptySlot(1)));
        assert_eq!(bank.read(1, false), Ok(0));
        assert_eq!(bank.read(2, false), Err(FprocError::UnknownId(2)));
        bank.write(1, 1);
        bank.write(3, 0);
        assert_eq!(bank.read(1, true), Ok(1));
        assert_eq!(bank.read(1, true), Ok(1));
        assert_eq!(bank.read(3, true), Ok(0));
        bank.write(3, 1);
        assert_eq!(bank.read(3, true), Ok(1));
        assert_eq!(bank.read(1, true), Ok(1));
    }
}

use std::collections::{BTreeMap, BTreeSet};

use super::IrError;
use crate::asm::{ChannelConfig, CoreKey};

/// Channel-to-core layout derived from the channel config. Cores are indexed
/// in `core_ind` order; each core's key lists its channels by element index.
#[derive(Debug, Clone, PartialEq)]
pub struct CoreMap {
    keys: Vec<CoreKey>,
    chan_core: BTreeMap<String, usize>,
}

pub type CoreSet = BTreeSet<usize>;

impl CoreMap {
    pub fn new(cfg: &ChannelConfig) -> Self {
        let mut by_core: BTreeMap<u32, Vec<(u8, &str)>> = BTreeMap::new();
        for (name, info) in &cfg.channels {
            by_core
                .entry(info.core_ind)
                .or_default()
                .push((info.elem_ind, name.as_str()));
        }
        let mut keys = Vec::new();
        let mut chan_core = BTreeMap::new();
        for mut chans in by_core.into_values() {
            chans.sort();
            for (_, c) in &chans {
                chan_core.insert(c.to_string(), keys.len());
            }
            keys.push(CoreKey::new(
                &chans.iter().map(|(_, c)| *c).collect::<Vec<_>>(),
            ));
        }
        Self { keys, chan_core }
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn key(&self, core: usize) -> &CoreKey {
        &self.keys[core]
    }

    pub fn all(&self) -> CoreSet {
        (0..self.keys.len()).collect()
    }

    pub fn channels(&self, core: usize) -> &[String] {
        self.keys[core].channels()
    }

    pub fn all_channels(&self) -> impl Iterator<Item = &str> {
        self.chan_core.keys().map(String::as_str)
    }

    pub fn core_of(&self, channel: &str) -> Result<usize, IrError> {
        self.chan_core
            .get(channel)
            .copied()
            .ok_or_else(|| IrError::UnknownChannel(channel.to_string()))
    }

    /// Cores named by a scope entry: a channel, a core key, or a qubit (every
    /// channel `<qubit>.*`).
    pub fn cores_of(&self, entry: &str) -> Result<CoreSet, IrError> {
        if let Some(&c) = self.chan_core.get(entry) {
            return Ok(CoreSet::from([c]));
        }
        if let Some(c) = self.keys.iter().position(|k| k.to_string() == entry) {
            return Ok(CoreSet::from([c]));
        }
        let prefix = format!("{entry}.");
        let set: CoreSet = self
            .chan_core
            .iter()
            .filter(|(ch, _)| ch.starts_with(&prefix))
            .map(|(_, &c)| c)
            .collect();
        if set.is_empty() {
            Err(IrError::UnknownScope(entry.to_string()))
        } else {
            Ok(set)
        }
    }

    /// Channels named by a scope entry: the channel itself, a core's
    /// channels, or every channel of a qubit.
    pub fn channels_of(&self, entry: &str) -> Result<Vec<String>, IrError> {
        if self.chan_core.contains_key(entry) {
            return Ok(vec![entry.to_string()]);
        }
        if let Some(k) = self.keys.iter().find(|k| k.to_string() == entry) {
            return Ok(k.channels().to_vec());
        }
        let prefix = format!("{entry}.");
        let v: Vec<String> = self
            .chan_core
            .keys()
            .filter(|ch| ch.starts_with(&prefix))
            .cloned()
            .collect();
        if v.is_empty() {
            Err(IrError::UnknownScope(entry.to_string()))
        } else {
            Ok(v)
        }
    }

    pub fn resolve(&self, scope: &[String]) -> Result<CoreSet, IrError> {
        let mut out = CoreSet::new();
        for e in scope {
            out.extend(self.cores_of(e)?);
        }
        Ok(out)
    }

    /// Canonical scope field: core keys in core order.
    pub fn scope_names(&self, cores: &CoreSet) -> Vec<String> {
        cores.iter().map(|&c| self.keys[c].to_string()).collect()
    }
}

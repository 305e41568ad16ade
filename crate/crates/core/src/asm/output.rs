//! On-disk form of assembled images.
//!
//! Each core gets `core<N>.bin` (flat little-endian 128-bit words). Each
//! channel buffer is a little-endian `u32` entry count followed by the
//! entries: `i16` I/Q pairs for envelopes (`.env`), `u32` phase increments
//! for frequencies (`.freq`). `manifest.json` ties files to cores and carries
//! the address maps.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::program::{CoreKey, RegType};
use super::{CoreImage, EnvBuffer, EnvEntry, FreqBuffer, RegisterInfo};
use crate::isa::{bytes_to_words, words_to_bytes};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestRegister {
    pub index: u8,
    pub dtype: RegType,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEnv {
    pub file: String,
    /// `[address, cycles]` per stored envelope.
    pub entries: Vec<[u32; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestFreq {
    pub file: String,
    pub freqs_hz: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestCore {
    pub channels: Vec<String>,
    pub binary: String,
    pub words: usize,
    pub elements: BTreeMap<u8, String>,
    pub registers: BTreeMap<String, ManifestRegister>,
    pub labels: BTreeMap<String, u16>,
    pub env_buffers: BTreeMap<String, ManifestEnv>,
    pub freq_buffers: BTreeMap<String, ManifestFreq>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub cores: Vec<ManifestCore>,
    /// Debug symbol table written by the compiler, relative to the manifest.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symbols: Option<String>,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ManifestError + '_ {
    move |source| ManifestError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), ManifestError> {
    fs::write(path, bytes).map_err(io_err(path))
}

fn counted<T: Copy>(items: &[T], per: usize, put: impl Fn(T, &mut Vec<u8>)) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + items.len() * per);
    out.extend_from_slice(&(items.len() as u32).to_le_bytes());
    for &it in items {
        put(it, &mut out);
    }
    out
}

fn env_bytes(b: &EnvBuffer) -> Vec<u8> {
    counted(&b.samples, 4, |[i, q], out| {
        out.extend_from_slice(&i.to_le_bytes());
        out.extend_from_slice(&q.to_le_bytes());
    })
}

fn freq_bytes(b: &FreqBuffer) -> Vec<u8> {
    counted(&b.words, 4, |w, out| out.extend_from_slice(&w.to_le_bytes()))
}

fn read_counted(path: &Path, per: usize) -> Result<Vec<[u8; 4]>, ManifestError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let bad = |msg: String| ManifestError::Format {
        path: path.to_path_buf(),
        msg,
    };
    if bytes.len() < 4 {
        return Err(bad("missing entry count".into()));
    }
    let n = u32::from_le_bytes(bytes[..4].try_into().expect("4 bytes")) as usize;
    if bytes.len() != 4 + n * per {
        return Err(bad(format!("expected {n} entries, file has {} bytes", bytes.len())));
    }
    Ok(bytes[4..]
        .chunks_exact(4)
        .map(|c| c.try_into().expect("4 bytes"))
        .collect())
}

/// Writes binaries, buffers and `manifest.json` into `dir`.
pub fn write_images(
    images: &BTreeMap<CoreKey, CoreImage>,
    dir: &Path,
    symbols: Option<&str>,
) -> Result<Manifest, ManifestError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut manifest = Manifest {
        cores: Vec::new(),
        symbols: symbols.map(String::from),
    };
    for (n, (key, img)) in images.iter().enumerate() {
        let binary = format!("core{n}.bin");
        write_file(&dir.join(&binary), &words_to_bytes(&img.binary))?;
        let mut env_buffers = BTreeMap::new();
        for (ch, buf) in &img.env_buffers {
            let file = format!("core{n}.{ch}.env");
            write_file(&dir.join(&file), &env_bytes(buf))?;
            env_buffers.insert(
                ch.clone(),
                ManifestEnv {
                    file,
                    entries: buf.entries.iter().map(|e| [e.addr, e.cycles]).collect(),
                },
            );
        }
        let mut freq_buffers = BTreeMap::new();
        for (ch, buf) in &img.freq_buffers {
            let file = format!("core{n}.{ch}.freq");
            write_file(&dir.join(&file), &freq_bytes(buf))?;
            freq_buffers.insert(
                ch.clone(),
                ManifestFreq {
                    file,
                    freqs_hz: buf.freqs.clone(),
                },
            );
        }
        manifest.cores.push(ManifestCore {
            channels: key.0.clone(),
            binary,
            words: img.binary.len(),
            elements: img.elements.clone(),
            registers: img
                .registers
                .iter()
                .map(|(k, r)| {
                    (
                        k.clone(),
                        ManifestRegister {
                            index: r.index,
                            dtype: r.dtype,
                        },
                    )
                })
                .collect(),
            labels: img.labels.clone(),
            env_buffers,
            freq_buffers,
        });
    }
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_file(&path, text.as_bytes())?;
    Ok(manifest)
}

/// Loads a manifest and every file it references.
pub fn read_manifest(
    path: &Path,
) -> Result<(Manifest, BTreeMap<CoreKey, CoreImage>), ManifestError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|source| ManifestError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut images = BTreeMap::new();
    for core in &manifest.cores {
        let bin_path = dir.join(&core.binary);
        let bytes = fs::read(&bin_path).map_err(io_err(&bin_path))?;
        let binary = bytes_to_words(&bytes).map_err(|e| ManifestError::Format {
            path: bin_path.clone(),
            msg: e.to_string(),
        })?;
        let mut env_buffers = BTreeMap::new();
        for (ch, m) in &core.env_buffers {
            let raw = read_counted(&dir.join(&m.file), 4)?;
            env_buffers.insert(
                ch.clone(),
                EnvBuffer {
                    samples: raw
                        .iter()
                        .map(|b| {
                            [
                                i16::from_le_bytes([b[0], b[1]]),
                                i16::from_le_bytes([b[2], b[3]]),
                            ]
                        })
                        .collect(),
                    entries: m
                        .entries
                        .iter()
                        .map(|&[addr, cycles]| EnvEntry { addr, cycles })
                        .collect(),
                },
            );
        }
        let mut freq_buffers = BTreeMap::new();
        for (ch, m) in &core.freq_buffers {
            let raw = read_counted(&dir.join(&m.file), 4)?;
            freq_buffers.insert(
                ch.clone(),
                FreqBuffer {
                    words: raw.iter().map(|b| u32::from_le_bytes(*b)).collect(),
                    freqs: m.freqs_hz.clone(),
                },
            );
        }
        let key = CoreKey(core.channels.clone());
        images.insert(
            key.clone(),
            CoreImage {
                key,
                binary,
                elements: core.elements.clone(),
                env_buffers,
                freq_buffers,
                registers: core
                    .registers
                    .iter()
                    .map(|(k, r)| {
                        (
                            k.clone(),
                            RegisterInfo {
                                index: r.index,
                                dtype: r.dtype,
                            },
                        )
                    })
                    .collect(),
                labels: core.labels.clone(),
            },
        );
    }
    Ok((manifest, images))
}

//! Model checkpoints.
//!
//! Layout: an ASCII header of `key=value` lines, opened by the magic line
//! `qrobust-checkpoint` and closed by a line containing only `---`, followed
//! immediately by the angles in row-major `[layer][qubit][k]` order, each as
//! an 8-byte little-endian IEEE-754 double.
//!
//! ```text
//! qrobust-checkpoint
//! version=1
//! n_qubits=2
//! n_layers=2
//! n_measured=1
//! n_classes=2
//! seed=7
//! shape=2,2,3
//! ---
//! <12 x f64 LE>
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::ansatz::{Classifier, ModelConfig, ModelParams};
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const MAGIC: &str = "qrobust-checkpoint";
pub const VERSION: u32 = 1;
const HEADER_END: &str = "---\n";

pub fn to_bytes<T: Real>(model: &Classifier<T>) -> Vec<u8> {
    let c = &model.config;
    let [l, q, k] = model.params.shape();
    let mut out = format!(
        "{MAGIC}\nversion={VERSION}\nn_qubits={}\nn_layers={}\nn_measured={}\nn_classes={}\nseed={}\nshape={l},{q},{k}\n{HEADER_END}",
        c.n_qubits, c.n_layers, c.n_measured, c.n_classes, c.seed
    )
    .into_bytes();
    for v in model.params.as_slice() {
        out.extend_from_slice(&v.to_f64_lossy().to_le_bytes());
    }
    out
}

pub fn from_bytes<T: Real>(bytes: &[u8]) -> Result<Classifier<T>> {
    let bad = |m: &str| Error::Checkpoint(m.to_string());
    let split = bytes
        .windows(HEADER_END.len() + 1)
        .position(|w| w[0] == b'\n' && &w[1..] == HEADER_END.as_bytes())
        .ok_or_else(|| bad("missing header terminator"))?;
    let header = std::str::from_utf8(&bytes[..split]).map_err(|_| bad("header is not UTF-8"))?;
    let body = &bytes[split + 1 + HEADER_END.len()..];

    let mut lines = header.lines();
    if lines.next() != Some(MAGIC) {
        return Err(bad("missing magic line"));
    }
    let fields: BTreeMap<&str, &str> = lines.filter_map(|l| l.split_once('=')).collect();
    let get = |key: &str| -> Result<u64> {
        fields
            .get(key)
            .ok_or_else(|| bad(&format!("missing `{key}`")))?
            .trim()
            .parse()
            .map_err(|_| bad(&format!("`{key}` is not an integer")))
    };
    if get("version")? != u64::from(VERSION) {
        return Err(bad("unsupported version"));
    }
    let config = ModelConfig {
        n_qubits: get("n_qubits")? as usize,
        n_layers: get("n_layers")? as usize,
        n_measured: get("n_measured")? as usize,
        n_classes: get("n_classes")? as usize,
        seed: get("seed")?,
    };
    let shape: Vec<usize> = fields
        .get("shape")
        .ok_or_else(|| bad("missing `shape`"))?
        .split(',')
        .map(|s| s.trim().parse().map_err(|_| bad("malformed shape")))
        .collect::<Result<_>>()?;
    if shape != [config.n_layers, config.n_qubits, 3] {
        return Err(bad("shape disagrees with config"));
    }
    let count = config.n_params();
    if body.len() != count * 8 {
        return Err(bad(&format!(
            "expected {} payload bytes, found {}",
            count * 8,
            body.len()
        )));
    }
    let theta = body
        .chunks_exact(8)
        .map(|b| T::lit(f64::from_le_bytes(b.try_into().expect("8 bytes"))))
        .collect();
    let params = ModelParams::from_flat(config.n_layers, config.n_qubits, theta)?;
    Classifier::new(config, params)
}

/// Writes via a sibling temporary file and rename.
pub fn write_checkpoint<T: Real>(path: &Path, model: &Classifier<T>) -> Result<()> {
    write_atomic(path, &to_bytes(model))
}

pub fn read_checkpoint<T: Real>(path: &Path) -> Result<Classifier<T>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}

/// Writes `bytes` to a sibling temporary file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp~");
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

//! Scenario directory layout.
//!
//! ```text
//! <dir>/manifest.json
//! <dir>/client_0000_train.pfls
//! <dir>/client_0000_test.pfls
//! ...
//! ```
//!
//! Each `.pfls` file is little-endian: the magic `PFLS`, a `u16` version,
//! `u32 n`, `u32 d`, `u32 num_classes`, `n × d` `f32` inputs (row-major),
//! then `n` `u32` labels.

use std::fs;
use std::path::Path;

use super::{ClientData, Dataset, Manifest, Scenario};
use crate::numcore::Matrix;
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"PFLS";
pub const FORMAT_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 4 * 3;

pub fn write_client_file(ds: &Dataset) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + ds.len() * (ds.dim() + 1) * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    for v in [ds.len(), ds.dim(), ds.num_classes()] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for &x in ds.inputs().as_slice() {
        out.extend_from_slice(&(x as f32).to_le_bytes());
    }
    for &y in ds.labels() {
        out.extend_from_slice(&(y as u32).to_le_bytes());
    }
    out
}

fn le_u32(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

pub fn read_client_file(bytes: &[u8]) -> Result<Dataset> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format("client file truncated in header".into()));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Format(format!("bad magic {:?}", &bytes[..4])));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported version {version}, expected {FORMAT_VERSION}"
        )));
    }
    let n = le_u32(bytes, 6) as usize;
    let d = le_u32(bytes, 10) as usize;
    let k = le_u32(bytes, 14) as usize;
    let need = n
        .checked_mul(d)
        .and_then(|nd| nd.checked_add(n))
        .and_then(|v| v.checked_mul(4))
        .ok_or_else(|| Error::Format("dimensions overflow".into()))?;
    let body = &bytes[HEADER_LEN..];
    if body.len() != need {
        return Err(Error::Format(format!(
            "expected {need} payload bytes for n={n}, d={d}, found {}",
            body.len()
        )));
    }
    let inputs = body[..n * d * 4]
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
        .collect();
    let labels = body[n * d * 4..]
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]) as usize)
        .collect();
    Dataset::new(Matrix::from_vec(n, d, inputs)?, labels, k).map_err(|e| Error::Format(e.to_string()))
}

fn client_path(dir: &Path, i: usize, part: &str) -> std::path::PathBuf {
    dir.join(format!("client_{i:04}_{part}.pfls"))
}

pub fn save_scenario(s: &Scenario, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut json = serde_json::to_string_pretty(&s.manifest)?;
    json.push('\n');
    fs::write(dir.join("manifest.json"), json)?;
    for (i, c) in s.clients.iter().enumerate() {
        fs::write(client_path(dir, i, "train"), write_client_file(&c.train))?;
        fs::write(client_path(dir, i, "test"), write_client_file(&c.test))?;
    }
    Ok(())
}

pub fn load_scenario(dir: impl AsRef<Path>) -> Result<Scenario> {
    let dir = dir.as_ref();
    let manifest: Manifest = serde_json::from_slice(&fs::read(dir.join("manifest.json"))?)?;
    if manifest.version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "manifest version {} unsupported",
            manifest.version
        )));
    }
    let mut clients = Vec::with_capacity(manifest.per_client.len());
    for (i, m) in manifest.per_client.iter().enumerate() {
        let train = read_client_file(&fs::read(client_path(dir, i, "train"))?)?;
        let test = read_client_file(&fs::read(client_path(dir, i, "test"))?)?;
        for ds in [&train, &test] {
            if ds.dim() != manifest.source.dim || ds.num_classes() != manifest.source.num_classes {
                return Err(Error::Format(format!(
                    "client {i}: file dimensions disagree with manifest"
                )));
            }
        }
        let mut hist = train.class_histogram();
        for (h, t) in hist.iter_mut().zip(test.class_histogram()) {
            *h += t;
        }
        if train.len() != m.n_train || test.len() != m.n_test || hist != m.class_hist {
            return Err(Error::Format(format!(
                "client {i}: sample counts disagree with manifest"
            )));
        }
        clients.push(ClientData { train, test });
    }
    Ok(Scenario { manifest, clients })
}

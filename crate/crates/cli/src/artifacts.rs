//! Artifact staging and atomic commits.
//!
//! Commands render every output in memory first, then commit the batch:
//! each file is written to a temp path in the destination directory and
//! renamed into place, so a failure never leaves a partially written file.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

pub struct Artifact {
    pub name: String,
    pub content: String,
}

impl Artifact {
    pub fn json<T: Serialize>(name: &str, value: &T) -> Result<Artifact> {
        let mut content =
            serde_json::to_string_pretty(value).context("serializing JSON artifact")?;
        content.push('\n');
        Ok(Artifact {
            name: name.to_string(),
            content,
        })
    }

    pub fn csv(name: &str, header: &str, rows: impl IntoIterator<Item = String>) -> Artifact {
        let mut content = String::from(header);
        content.push('\n');
        for row in rows {
            content.push_str(&row);
            content.push('\n');
        }
        Artifact {
            name: name.to_string(),
            content,
        }
    }
}

/// Write all artifacts into `out_dir` via temp file + rename.
pub fn commit(out_dir: &Path, artifacts: Vec<Artifact>) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;
    let mut written = Vec::with_capacity(artifacts.len());
    for artifact in artifacts {
        let final_path = out_dir.join(&artifact.name);
        let mut tmp = tempfile::NamedTempFile::new_in(out_dir)
            .context("creating temp file for atomic write")?;
        tmp.write_all(artifact.content.as_bytes())
            .with_context(|| format!("writing {}", artifact.name))?;
        tmp.persist(&final_path)
            .with_context(|| format!("renaming into {}", final_path.display()))?;
        written.push(final_path);
    }
    Ok(written)
}

/// FNV-1a 64 content fingerprint of a dataset: feature names, target name,
/// then every value in row-major order as little-endian bits.
pub fn dataset_fingerprint(data: &fuelcast::data::Dataset) -> String {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut hash = OFFSET;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            hash ^= b as u64;
            hash = hash.wrapping_mul(PRIME);
        }
    };
    eat(data.target_name().as_bytes());
    eat(&[0xff]);
    for name in data.feature_names() {
        eat(name.as_bytes());
        eat(&[0xff]);
    }
    for i in 0..data.n_rows() {
        for &v in data.row(i) {
            eat(&v.to_le_bytes());
        }
        eat(&data.target()[i].to_le_bytes());
    }
    format!("{hash:016x}")
}

/// Render an f64 for CSV output (shortest round-trip decimal form).
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

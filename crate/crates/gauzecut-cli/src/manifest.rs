//! Run manifests and machine-readable error records.
//!
//! Every subcommand writes `<command>.manifest.toml` next to its artifacts,
//! recording the effective-config hash, the master seed, crate versions, the
//! worker count, and per-artifact content hashes. The manifest carries the
//! run's only timestamp; result CSVs never contain wall-clock data, so
//! reruns are byte-identical. Failures emit `error.toml` (when the output
//! directory is known) and print the same record to stderr before the
//! nonzero exit.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

/// FNV-1a 64-bit content hash, rendered as 16 hex digits in manifests.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub fn hex64(h: u64) -> String {
    format!("{h:016x}")
}

#[derive(Debug, Serialize)]
struct Versions {
    gauzecut: &'static str,
    gauzecut_cli: &'static str,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    scenario: Option<&'a str>,
    config_hash: String,
    seed: Option<u64>,
    threads: usize,
    /// Seconds since the Unix epoch — the only timestamp in any artifact.
    created_unix_s: u64,
    versions: Versions,
    artifacts: BTreeMap<&'a str, String>,
}

/// One named artifact: file name plus full content bytes.
pub type Artifact = (String, Vec<u8>);

/// Write all artifacts plus the manifest into `out_dir` (single writer;
/// directories created as needed). Returns the manifest path.
pub fn persist_run(
    out_dir: &Path,
    command: &str,
    scenario: Option<&str>,
    canonical_config: &str,
    seed: Option<u64>,
    threads: usize,
    artifacts: &[Artifact],
) -> std::io::Result<PathBuf> {
    std::fs::create_dir_all(out_dir)?;
    let mut hashes = BTreeMap::new();
    for (name, bytes) in artifacts {
        std::fs::write(out_dir.join(name), bytes)?;
        hashes.insert(name.as_str(), hex64(fnv1a64(bytes)));
    }
    let manifest = Manifest {
        command,
        scenario,
        config_hash: hex64(fnv1a64(canonical_config.as_bytes())),
        seed,
        threads,
        created_unix_s: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        versions: Versions {
            gauzecut: gauzecut::VERSION,
            gauzecut_cli: env!("CARGO_PKG_VERSION"),
        },
        artifacts: hashes,
    };
    let text = toml::to_string(&manifest).expect("manifest serializes");
    let path = out_dir.join(format!("{command}.manifest.toml"));
    std::fs::write(&path, text)?;
    Ok(path)
}

#[derive(Debug, Serialize)]
pub struct ErrorRecord<'a> {
    pub command: &'a str,
    pub message: String,
}

/// Emit the machine-readable error record: always to stderr, and as
/// `error.toml` in the output directory when one is known.
pub fn emit_error(out_dir: Option<&Path>, command: &str, message: String) {
    let record = ErrorRecord { command, message };
    let text = toml::to_string(&record).expect("error record serializes");
    eprint!("{text}");
    if let Some(dir) = out_dir {
        if std::fs::create_dir_all(dir).is_ok() {
            let _ = std::fs::write(dir.join("error.toml"), &text);
        }
    }
}

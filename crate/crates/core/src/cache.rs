//! Disk cache for fine-step reference solutions.
//!
//! A reference is identified by the full problem description (form, box,
//! grid size, epsilon, final time, reference step count, potential and
//! initial-data ids). The cache key is the first 16 hex digits of the
//! SHA-256 of that description's canonical JSON. Each entry is a raw
//! little-endian (re, im) f64 dump plus a JSON manifest carrying the
//! description and a content hash of the payload, written tmp-then-rename
//! so a crash never leaves a partial entry under the final name.

use crate::dirac::SpinorForm;
use crate::field::{Space, SpectralField};
use crate::grid::PeriodicGrid;
use crate::{Error, Result};
use once_cell::sync::Lazy;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::HashMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSpec {
    pub form: SpinorForm,
    /// Per-axis (lo, hi).
    pub bounds: Vec<(f64, f64)>,
    /// Per-axis node count.
    pub points: Vec<usize>,
    pub epsilon: f64,
    pub t_final: f64,
    pub ref_steps: usize,
    pub potential_id: String,
    pub initial_id: String,
}

impl ReferenceSpec {
    pub fn for_problem(
        grid: &PeriodicGrid,
        form: SpinorForm,
        epsilon: f64,
        t_final: f64,
        ref_steps: usize,
        potential_id: &str,
        initial_id: &str,
    ) -> Self {
        ReferenceSpec {
            form,
            bounds: grid.axes().iter().map(|a| (a.lo, a.hi)).collect(),
            points: grid.axes().iter().map(|a| a.points).collect(),
            epsilon,
            t_final,
            ref_steps,
            potential_id: potential_id.to_string(),
            initial_id: initial_id.to_string(),
        }
    }

    pub fn tau_ref(&self) -> f64 {
        self.t_final / self.ref_steps as f64
    }

    pub fn grid(&self) -> Result<PeriodicGrid> {
        let axes = self
            .bounds
            .iter()
            .zip(&self.points)
            .map(|(&(lo, hi), &points)| crate::grid::Axis { lo, hi, points })
            .collect();
        PeriodicGrid::new(axes)
    }

    fn manifest(&self, content_hash: String) -> Manifest {
        Manifest {
            form: self.form.as_str().to_string(),
            bounds: self.bounds.iter().map(|&(lo, hi)| [lo, hi]).collect(),
            m: self.points.clone(),
            epsilon: self.epsilon,
            tau_ref: self.tau_ref(),
            t_final: self.t_final,
            steps: self.ref_steps,
            potential_id: self.potential_id.clone(),
            initial_id: self.initial_id.clone(),
            content_hash,
        }
    }

    /// Stable content-addressed key: sha256 of the canonical manifest JSON
    /// (hash field left empty), truncated to 16 hex digits.
    pub fn key(&self) -> String {
        let canonical =
            serde_json::to_string(&self.manifest(String::new())).expect("manifest serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        let mut key = String::with_capacity(16);
        for byte in &digest[..8] {
            key.push_str(&format!("{byte:02x}"));
        }
        key
    }

    fn expected_len(&self) -> usize {
        let nodes: usize = self.points.iter().product();
        nodes * self.form.components()
    }
}

/// On-disk sidecar describing one cached reference.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Manifest {
    pub form: String,
    pub bounds: Vec<[f64; 2]>,
    #[serde(rename = "M")]
    pub m: Vec<usize>,
    pub epsilon: f64,
    pub tau_ref: f64,
    #[serde(rename = "T_final")]
    pub t_final: f64,
    pub steps: usize,
    pub potential_id: String,
    pub initial_id: String,
    pub content_hash: String,
}

// Serializes concurrent get_or_compute calls for the same key so a
// reference is computed once per process even under a parallel sweep.
static KEY_LOCKS: Lazy<Mutex<HashMap<String, Arc<Mutex<()>>>>> =
    Lazy::new(|| Mutex::new(HashMap::new()));

fn key_lock(key: &str) -> Arc<Mutex<()>> {
    let mut map = KEY_LOCKS.lock().expect("key lock registry");
    map.entry(key.to_string()).or_default().clone()
}

#[derive(Debug, Clone)]
pub struct ReferenceCache {
    dir: PathBuf,
}

impl ReferenceCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)
            .map_err(|e| Error::Cache(format!("cannot create {}: {e}", dir.display())))?;
        Ok(ReferenceCache { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn bin_path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("ref_{key}.bin"))
    }

    fn manifest_path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("ref_{key}.json"))
    }

    /// Load a cached reference. Missing entries return None silently; a
    /// present but unreadable or inconsistent entry warns and returns None
    /// so the caller recomputes.
    pub fn load(&self, spec: &ReferenceSpec) -> Option<SpectralField> {
        let key = spec.key();
        let manifest_path = self.manifest_path(&key);
        let bin_path = self.bin_path(&key);
        if !manifest_path.exists() || !bin_path.exists() {
            return None;
        }
        match self.try_load(spec, &key) {
            Ok(field) => Some(field),
            Err(e) => {
                eprintln!(
                    "warning: discarding unusable cache entry {} ({e}); recomputing",
                    bin_path.display()
                );
                None
            }
        }
    }

    fn try_load(&self, spec: &ReferenceSpec, key: &str) -> Result<SpectralField> {
        let manifest_text = fs::read_to_string(self.manifest_path(key))
            .map_err(|e| Error::Cache(format!("manifest unreadable: {e}")))?;
        let manifest: Manifest = serde_json::from_str(&manifest_text)
            .map_err(|e| Error::Cache(format!("manifest malformed: {e}")))?;
        let bytes = fs::read(self.bin_path(key))
            .map_err(|e| Error::Cache(format!("payload unreadable: {e}")))?;

        let payload_hash = hex_digest(&bytes);
        if manifest.content_hash != payload_hash {
            return Err(Error::Cache(format!(
                "content hash mismatch (manifest {}, payload {payload_hash})",
                manifest.content_hash
            )));
        }
        if manifest != spec.manifest(payload_hash) {
            return Err(Error::Cache("manifest does not match the request".into()));
        }
        let expected_bytes = spec.expected_len() * 16;
        if bytes.len() != expected_bytes {
            return Err(Error::Cache(format!(
                "payload is {} bytes, expected {expected_bytes}",
                bytes.len()
            )));
        }

        let mut data = Vec::with_capacity(spec.expected_len());
        for chunk in bytes.chunks_exact(16) {
            let re = f64::from_le_bytes(chunk[..8].try_into().expect("8-byte chunk"));
            let im = f64::from_le_bytes(chunk[8..].try_into().expect("8-byte chunk"));
            data.push(crate::Complex64::new(re, im));
        }
        SpectralField::from_parts(spec.grid()?, spec.form.components(), Space::Physical, data)
    }

    /// Persist a reference. The payload lands first, then the manifest, each
    /// through a temp file and atomic rename; readers accept an entry only
    /// once both files agree.
    pub fn store(&self, spec: &ReferenceSpec, field: &SpectralField) -> Result<()> {
        if field.space() != Space::Physical {
            return Err(Error::Cache("references are stored in physical space".into()));
        }
        if field.data().len() != spec.expected_len() {
            return Err(Error::Cache(format!(
                "field has {} values, spec expects {}",
                field.data().len(),
                spec.expected_len()
            )));
        }
        let key = spec.key();
        let mut bytes = Vec::with_capacity(field.data().len() * 16);
        for z in field.data() {
            bytes.extend_from_slice(&z.re.to_le_bytes());
            bytes.extend_from_slice(&z.im.to_le_bytes());
        }
        let manifest = spec.manifest(hex_digest(&bytes));
        let manifest_text =
            serde_json::to_string_pretty(&manifest).expect("manifest serializes");

        write_atomic(&self.bin_path(&key), &bytes)?;
        write_atomic(&self.manifest_path(&key), manifest_text.as_bytes())?;
        Ok(())
    }

    /// Fetch from disk or compute and persist. The bool is true when the
    /// entry was served from disk.
    pub fn get_or_compute<F>(&self, spec: &ReferenceSpec, compute: F) -> Result<(SpectralField, bool)>
    where
        F: FnOnce() -> Result<SpectralField>,
    {
        let key = spec.key();
        let lock = key_lock(&key);
        let _guard = lock.lock().expect("reference key lock");
        if let Some(field) = self.load(spec) {
            return Ok((field, true));
        }
        let field = compute()?;
        let mut stored = field;
        stored.to_physical();
        self.store(spec, &stored)?;
        Ok((stored, false))
    }

    /// Keys and manifests of every readable entry, sorted by key.
    pub fn entries(&self) -> Result<Vec<(String, Manifest)>> {
        let mut out = Vec::new();
        let dir_iter = match fs::read_dir(&self.dir) {
            Ok(it) => it,
            Err(_) => return Ok(out),
        };
        for entry in dir_iter.flatten() {
            let name = entry.file_name();
            let name = name.to_string_lossy();
            let Some(key) = name.strip_prefix("ref_").and_then(|s| s.strip_suffix(".json"))
            else {
                continue;
            };
            let Ok(text) = fs::read_to_string(entry.path()) else {
                continue;
            };
            if let Ok(manifest) = serde_json::from_str::<Manifest>(&text) {
                out.push((key.to_string(), manifest));
            }
        }
        out.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(out)
    }

    /// Remove every cache entry; returns how many were deleted.
    pub fn clear(&self) -> Result<usize> {
        let mut removed = 0;
        for (key, _) in self.entries()? {
            let _ = fs::remove_file(self.bin_path(&key));
            if fs::remove_file(self.manifest_path(&key)).is_ok() {
                removed += 1;
            }
        }
        Ok(removed)
    }
}

fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!(
        "tmp.{}.{}",
        std::process::id(),
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.subsec_nanos())
            .unwrap_or(0)
    ));
    let mut file = fs::File::create(&tmp)
        .map_err(|e| Error::Cache(format!("cannot create {}: {e}", tmp.display())))?;
    file.write_all(bytes)
        .map_err(|e| Error::Cache(format!("cannot write {}: {e}", tmp.display())))?;
    file.sync_all().ok();
    drop(file);
    fs::rename(&tmp, path)
        .map_err(|e| Error::Cache(format!("cannot rename into {}: {e}", path.display())))?;
    Ok(())
}

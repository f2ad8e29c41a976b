//! Output directory bookkeeping: every file a study writes is recorded
//! with a content hash, and `manifest.json` is emitted last so the
//! manifest always describes a complete run.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use stokeslip::{DomainSpec, Mesh};

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

#[derive(Debug, Clone, Serialize)]
struct FileRecord {
    path: String,
    bytes: usize,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    study: &'a str,
    seed: u64,
    config_sha256: String,
    versions: Versions,
    meshes: Vec<FileRecord>,
    outputs: Vec<FileRecord>,
}

#[derive(Debug, Serialize)]
struct Versions {
    stokeslip: &'static str,
    cli: &'static str,
}

/// Writable run directory. Meshes are cached under `meshes/` and reused
/// across runs pointed at the same directory.
pub struct Workspace {
    root: PathBuf,
    meshes: Vec<FileRecord>,
    outputs: Vec<FileRecord>,
}

impl Workspace {
    pub fn create(root: &Path) -> io::Result<Workspace> {
        fs::create_dir_all(root.join("meshes"))?;
        Ok(Workspace {
            root: root.to_path_buf(),
            meshes: Vec::new(),
            outputs: Vec::new(),
        })
    }

    /// Writes one report file under the run directory and records it for
    /// the manifest. Paths are kept relative so reruns in different
    /// directories produce identical manifests.
    pub fn write(&mut self, rel: &str, content: &str) -> io::Result<()> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, content)?;
        self.outputs.push(FileRecord {
            path: rel.to_string(),
            bytes: content.len(),
            sha256: sha256_hex(content.as_bytes()),
        });
        Ok(())
    }

    /// Returns the mesh for `(spec, h)`, generating and caching it on
    /// first use. The cache file hash goes into the manifest either way.
    pub fn mesh(&mut self, spec: &DomainSpec, h: f64) -> Result<Mesh, String> {
        let rel = format!("meshes/{}_h{h}.txt", spec.id());
        let path = self.root.join(&rel);
        let mesh = if path.exists() {
            Mesh::read_cache(&path).map_err(|e| format!("mesh cache {rel}: {e}"))?
        } else {
            let mesh = Mesh::generate(spec, h).map_err(|e| format!("mesh generation: {e}"))?;
            mesh.write_cache(&path)
                .map_err(|e| format!("mesh cache {rel}: {e}"))?;
            mesh
        };
        if !self.meshes.iter().any(|m| m.path == rel) {
            let bytes = fs::read(&path).map_err(|e| format!("mesh cache {rel}: {e}"))?;
            self.meshes.push(FileRecord {
                path: rel,
                bytes: bytes.len(),
                sha256: sha256_hex(&bytes),
            });
        }
        Ok(mesh)
    }

    /// Writes `manifest.json`. Consumes the workspace: nothing may be
    /// added after the manifest exists.
    pub fn finish(mut self, study: &str, config_text: &str, seed: u64) -> io::Result<()> {
        self.meshes.sort_by(|a, b| a.path.cmp(&b.path));
        self.outputs.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = Manifest {
            study,
            seed,
            config_sha256: sha256_hex(config_text.as_bytes()),
            versions: Versions {
                stokeslip: stokeslip::VERSION,
                cli: env!("CARGO_PKG_VERSION"),
            },
            meshes: self.meshes,
            outputs: self.outputs,
        };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(self.root.join("manifest.json"), text)
    }
}

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Read};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Record of one stage run: what went in, with which parameters, and what
/// came out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    pub params: serde_json::Value,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

fn hash_file(path: &Path, hasher: &mut Sha256) -> io::Result<()> {
    let mut f = fs::File::open(path)?;
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            return Ok(());
        }
        hasher.update(&buf[..n]);
    }
}

/// sha256 of a file, or of every file under a directory (names included, in
/// sorted order).
pub fn hash_path(path: &Path) -> io::Result<String> {
    let mut hasher = Sha256::new();
    if path.is_dir() {
        let mut files = Vec::new();
        collect_files(path, &mut files)?;
        files.sort();
        for f in files {
            hasher.update(f.strip_prefix(path).unwrap_or(&f).to_string_lossy().as_bytes());
            hasher.update([0]);
            hash_file(&f, &mut hasher)?;
        }
    } else {
        hash_file(path, &mut hasher)?;
    }
    Ok(hex::encode(hasher.finalize()))
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> io::Result<()> {
    for entry in fs::read_dir(dir)? {
        let p = entry?.path();
        if p.is_dir() {
            collect_files(&p, out)?;
        } else {
            out.push(p);
        }
    }
    Ok(())
}

pub fn hash_all(paths: &[PathBuf]) -> io::Result<BTreeMap<String, String>> {
    paths.iter().map(|p| Ok((p.display().to_string(), hash_path(p)?))).collect()
}

impl Manifest {
    pub fn read(path: &Path) -> Option<Manifest> {
        serde_json::from_str(&fs::read_to_string(path).ok()?).ok()
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        fs::write(path, serde_json::to_string_pretty(self).expect("manifest serializes") + "\n")
    }

    /// True when the recorded outputs still exist with the recorded hashes.
    pub fn outputs_intact(&self) -> bool {
        self.outputs.iter().all(|(p, h)| hash_path(Path::new(p)).is_ok_and(|x| &x == h))
    }
}

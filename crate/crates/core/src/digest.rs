//! SHA-256 helpers for provenance hashes.

use sha2::{Digest, Sha256};

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_hex(data: &[u8]) -> String {
    hex(&Sha256::digest(data))
}

/// Hash of a float sequence via its little-endian bit patterns.
pub fn hash_f64s<'a>(xs: impl IntoIterator<Item = &'a f64>) -> String {
    let mut h = Sha256::new();
    for x in xs {
        h.update(x.to_le_bytes());
    }
    hex(&h.finalize())
}

/// Order-independent hash of a set of ids: sorted, newline-joined.
pub fn hash_id_set<S: AsRef<str>>(ids: &[S]) -> String {
    let mut v: Vec<&str> = ids.iter().map(AsRef::as_ref).collect();
    v.sort_unstable();
    v.dedup();
    sha256_hex(v.join("\n").as_bytes())
}

/// Digest of a file, or of a directory as the sorted `(name, file digest)`
/// list of its regular files (one level).
pub fn hash_path(path: &std::path::Path) -> std::io::Result<String> {
    if path.is_dir() {
        let mut names: Vec<_> = std::fs::read_dir(path)?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().is_file())
            .map(|e| e.file_name())
            .collect();
        names.sort();
        let mut h = Sha256::new();
        for n in names {
            h.update(n.to_string_lossy().as_bytes());
            h.update([0]);
            h.update(sha256_hex(&std::fs::read(path.join(&n))?).as_bytes());
            h.update(*b"\n");
        }
        Ok(hex(&h.finalize()))
    } else {
        Ok(sha256_hex(&std::fs::read(path)?))
    }
}

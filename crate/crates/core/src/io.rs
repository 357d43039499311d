//! Small helpers shared by the serializers.

use std::io::Write;
use std::path::Path;

use crate::error::Result;

/// Significant digits used for every decimal we write.
pub const SIG_DIGITS: usize = 12;

/// `v` rounded to [`SIG_DIGITS`] significant digits. The result's shortest
/// decimal form parses back to the same `f64`, so write/read is bit-exact.
pub fn round_sig(v: f64) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return v;
    }
    format!("{:.*e}", SIG_DIGITS - 1, v).parse().unwrap_or(v)
}

pub fn fmt_sig(v: f64) -> String {
    round_sig(v).to_string()
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    // Temporary files are created 0600; outputs should be ordinary files.
    #[cfg(unix)]
    let mut tmp = {
        use std::os::unix::fs::PermissionsExt;
        tempfile::Builder::new()
            .permissions(std::fs::Permissions::from_mode(0o644))
            .tempfile_in(dir)?
    };
    #[cfg(not(unix))]
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let f = std::fs::File::open(path)?;
    Ok(serde_json::from_reader(std::io::BufReader::new(f))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_sig_is_idempotent_and_reparses() {
        for v in [std::f64::consts::PI, 1.0 / 3.0, 6.02214076e23, -2.5e-300, 1.0] {
            let r = round_sig(v);
            assert_eq!(round_sig(r).to_bits(), r.to_bits());
            assert_eq!(fmt_sig(v).parse::<f64>().unwrap().to_bits(), r.to_bits());
            assert!((r - v).abs() <= 1e-11 * v.abs());
        }
        assert_eq!(fmt_sig(0.1), "0.1");
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::CliError;

/// A file to write: `suffix` is appended to the main output path (empty for
/// the main file itself).
pub struct Artifact {
    pub suffix: &'static str,
    pub bytes: Vec<u8>,
}

fn target(out: &Path, suffix: &str) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(suffix);
    PathBuf::from(name)
}

/// Writes each artifact to a temporary sibling and renames it into place.
pub fn write_all(out: &Path, artifacts: &[Artifact]) -> Result<(), CliError> {
    let fail = |p: &Path, e: std::io::Error| CliError::Runtime(format!("{}: {e}", p.display()));
    for a in artifacts {
        let path = target(out, a.suffix);
        let tmp = target(&path, ".tmp");
        let mut file = fs::File::create(&tmp).map_err(|e| fail(&tmp, e))?;
        file.write_all(&a.bytes)
            .and_then(|_| file.sync_all())
            .map_err(|e| fail(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| fail(&path, e))?;
    }
    Ok(())
}

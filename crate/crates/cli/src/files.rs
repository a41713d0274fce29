use std::fs;
use std::io::Write;
use std::path::Path;

use cvdist_core::io::from_json;
use serde::de::DeserializeOwned;
use crate::commands::CliError;

/// Writes via a temporary file in the target directory and renames it into
/// place, so readers never see partial output.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::usage(format!("{}: {e}", dir.display())))?;
    tmp.write_all(contents.as_bytes())
        .and_then(|_| tmp.as_file().sync_all())
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    tmp.persist(path)
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    Ok(())
}

/// Writes to `path`, or to stdout when absent.
pub fn emit(path: Option<&Path>, contents: &str) -> Result<(), CliError> {
    match path {
        Some(p) => write_atomic(p, contents),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

pub fn read_json<D: DeserializeOwned>(path: &Path) -> Result<D, CliError> {
    from_json(&read_text(path)?).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

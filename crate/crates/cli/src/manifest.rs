use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::CliResult;

/// Everything needed to re-run a command bit for bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: BTreeMap<String, String>,
    pub master_seed: u64,
    pub tool_version: String,
    pub timestamp: String,
    pub output_files: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, parameters: BTreeMap<String, String>, master_seed: u64, outputs: &[&Path]) -> Self {
        Self {
            command: command.into(),
            parameters,
            master_seed,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            output_files: outputs.iter().map(|p| p.display().to_string()).collect(),
        }
    }

    /// Writes `<stem>.manifest.json` next to `primary` and returns its path.
    pub fn write_next_to(&self, primary: &Path) -> CliResult<PathBuf> {
        let path = sibling(primary, "manifest.json");
        palmfbm::io::write_json_file(&path, self)?;
        Ok(path)
    }
}

/// `dir/stem.<suffix>` for `dir/stem.ext`.
pub fn sibling(primary: &Path, suffix: &str) -> PathBuf {
    let stem = primary.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    primary.with_file_name(format!("{stem}.{suffix}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sibling_replaces_extension() {
        assert_eq!(sibling(Path::new("out/var.csv"), "fit.json"), PathBuf::from("out/var.fit.json"));
        assert_eq!(sibling(Path::new("pts"), "manifest.json"), PathBuf::from("pts.manifest.json"));
    }

    #[test]
    fn timestamp_is_utc() {
        let m = RunManifest::new("sample", BTreeMap::new(), 1, &[Path::new("a.csv")]);
        assert!(m.timestamp.ends_with('Z'));
        assert_eq!(m.output_files, vec!["a.csv".to_string()]);
    }
}

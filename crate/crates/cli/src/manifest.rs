use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;
use twinloop_core::Result;

/// Record of one invocation. Kept out of the main output so that output
/// stays byte-identical across reruns.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: Vec<String>,
    pub config: serde_json::Value,
    pub version: &'static str,
    pub wall_time_s: f64,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn new(command: Vec<String>, config: serde_json::Value, wall: Duration, outputs: Vec<PathBuf>) -> Self {
        RunManifest { command, config, version: env!("CARGO_PKG_VERSION"), wall_time_s: wall.as_secs_f64(), outputs }
    }

    /// Writes `<primary>.manifest.json` next to the primary output, or to
    /// stderr when the output went to stdout.
    pub fn emit(&self, primary: Option<&PathBuf>) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        match primary {
            Some(p) => std::fs::write(sidecar_path(p), text + "\n")?,
            None => eprintln!("{text}"),
        }
        Ok(())
    }
}

pub fn sidecar_path(p: &Path) -> PathBuf {
    let mut s = p.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

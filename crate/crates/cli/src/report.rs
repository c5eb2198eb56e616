//! Report rendering. JSON for summaries, CSV for tables.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

/// A rendered report and, for tables, the resolved config to store beside it.
#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    pub body: String,
    pub sidecar_config: Option<String>,
}

pub fn json<T: Serialize>(value: &T) -> Rendered {
    let mut body = serde_json::to_string_pretty(value).expect("report serializes");
    body.push('\n');
    Rendered { body, sidecar_config: None }
}

pub fn csv<T: Serialize>(rows: &[T], config_json: String) -> Result<Rendered, CliError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.serialize(row).map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    let bytes = writer.into_inner().map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(Rendered {
        body: String::from_utf8(bytes).expect("csv output is utf-8"),
        sidecar_config: Some(config_json),
    })
}

/// Path of the config written next to a CSV report.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".config.json");
    PathBuf::from(name)
}

/// Writes to `path`, or stdout when `None`.
pub fn emit(rendered: &Rendered, path: Option<&Path>) -> Result<(), CliError> {
    match path {
        Some(path) => {
            fs::write(path, &rendered.body)?;
            if let Some(config) = &rendered.sidecar_config {
                fs::write(sidecar_path(path), config)?;
            }
        }
        None => io::stdout().lock().write_all(rendered.body.as_bytes())?,
    }
    Ok(())
}

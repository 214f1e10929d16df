use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde_json::{Map, Value};
use symmin::field::io::{export_field, FieldFormat};
use symmin::GridFunction;

use crate::config::ExperimentConfig;

/// Write `body` as pretty JSON with a trailing `timestamp` field, the only
/// part of a report that differs between identical runs.
pub fn write_json(path: &Path, mut body: Map<String, Value>) -> Result<()> {
    let secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    body.insert("timestamp".into(), Value::from(secs));
    let text = serde_json::to_string_pretty(&Value::Object(body))?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn write_history(path: &Path, energy: &[f64], residual: &[f64]) -> Result<()> {
    let mut text = String::from("iteration,energy,residual\n");
    for (i, (e, r)) in energy.iter().zip(residual).enumerate() {
        text += &format!("{i},{e},{r}\n");
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Text file `<out>_<name>.txt`, plus a PGM when requested.
pub fn write_field(cfg: &ExperimentConfig, name: &str, u: &GridFunction) -> Result<()> {
    let path = cfg.output_path(&format!("{name}.txt"));
    export_field(u, &path, FieldFormat::Text)
        .with_context(|| format!("writing {}", path.display()))?;
    if cfg.pgm {
        let path = cfg.output_path(&format!("{name}.pgm"));
        export_field(u, &path, FieldFormat::Pgm)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

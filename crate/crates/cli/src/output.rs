use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

/// Twelve significant digits, `inf` for +∞.
pub fn format_significant(value: f64) -> String {
    if value.is_infinite() || value.is_nan() {
        return evalab::float_serde::format_value(value);
    }
    let magnitude = if value == 0.0 { -1 } else { value.abs().log10().floor() as i32 };
    if !(-5..=15).contains(&magnitude) {
        return format!("{value:.11e}");
    }
    let decimals = (11 - magnitude).max(0) as usize;
    // Rounding can carry into a new leading digit (9.99… → 10.0…).
    let text = format!("{value:.decimals$}");
    let digits = text.chars().filter(char::is_ascii_digit).collect::<String>();
    if digits.trim_start_matches('0').len() > 12 && decimals > 0 {
        format!("{value:.prec$}", prec = decimals - 1)
    } else {
        text
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable output");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

#[derive(Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedSource {
    Flag,
    Env,
    Config,
}

/// Provenance record written next to every output file.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub command: String,
    pub argv: Vec<String>,
    pub tool_version: String,
    pub inputs: Vec<PathBuf>,
    pub parameters: serde_json::Value,
    pub master_seed: Option<u64>,
    pub seed_source: Option<SeedSource>,
    pub flag_seed: Option<u64>,
    pub env_seed: Option<u64>,
    pub threads: Option<usize>,
    pub outputs: Vec<PathBuf>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        Manifest {
            schema_version: MANIFEST_SCHEMA_VERSION,
            command: command.to_string(),
            argv: std::env::args().collect(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            inputs: Vec::new(),
            parameters: serde_json::Value::Null,
            master_seed: None,
            seed_source: None,
            flag_seed: None,
            env_seed: None,
            threads: None,
            outputs: Vec::new(),
        }
    }

    /// Writes `<output>.manifest.json`.
    pub fn write_next_to(&self, output: &Path) -> Result<(), CliError> {
        let mut name = output.as_os_str().to_owned();
        name.push(".manifest.json");
        write_json(Path::new(&name), self)
    }
}

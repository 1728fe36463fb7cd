//! Recorded run configurations.
//!
//! Every command writes its resolved configuration to `run_config.txt` in
//! the output directory; `labelset rerun --config <file>` replays it and
//! reproduces the outputs byte-for-byte given the same seed.

use crate::error::CliError;

pub const RUNCONFIG_HEADER: &str = "labelset-runconfig";
pub const RUNCONFIG_VERSION: &str = "v1";

/// A command name plus its flags, in a fixed order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunConfig {
    pub command: String,
    pub entries: Vec<(String, String)>,
}

impl RunConfig {
    pub fn new(command: &str) -> Self {
        RunConfig {
            command: command.to_string(),
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn push_opt(&mut self, key: &str, value: Option<impl ToString>) {
        if let Some(v) = value {
            self.push(key, v);
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{RUNCONFIG_HEADER} {RUNCONFIG_VERSION}\n");
        out.push_str(&format!("command {}\n", self.command));
        for (key, value) in &self.entries {
            out.push_str(&format!("{key} {value}\n"));
        }
        out.push_str("end\n");
        out
    }

    pub fn from_text(text: &str) -> Result<Self, CliError> {
        let mut lines = text
            .lines()
            .map(|l| l.trim_end_matches('\r'))
            .filter(|l| !l.trim().is_empty());
        let first = lines
            .next()
            .ok_or_else(|| CliError::data("run config is empty"))?;
        match first.strip_prefix(RUNCONFIG_HEADER).map(str::trim) {
            Some(version) if version == RUNCONFIG_VERSION => {}
            Some(version) => {
                return Err(CliError::version(format!(
                    "unsupported run-config version {version:?} (expected {RUNCONFIG_VERSION:?})"
                )))
            }
            None => return Err(CliError::data("missing labelset-runconfig header")),
        }
        let command_line = lines
            .next()
            .ok_or_else(|| CliError::data("run config ends before the command line"))?;
        let command = command_line
            .strip_prefix("command ")
            .ok_or_else(|| CliError::data("expected `command <name>`"))?
            .trim()
            .to_string();
        let mut entries = Vec::new();
        let mut ended = false;
        for line in lines {
            if line.trim() == "end" {
                ended = true;
                continue;
            }
            if ended {
                return Err(CliError::data("trailing content after end marker"));
            }
            match line.split_once(' ') {
                Some((key, value)) => entries.push((key.to_string(), value.trim().to_string())),
                None => {
                    return Err(CliError::data(format!(
                        "run config line {line:?} has no value"
                    )))
                }
            }
        }
        if !ended {
            return Err(CliError::data("run config has no end marker"));
        }
        Ok(RunConfig { command, entries })
    }

    /// Rebuild the argv this configuration stands for. The `preset` key is
    /// the oracle command's positional argument; everything else becomes a
    /// `--key=value` flag (the `=` form keeps values with leading hyphens,
    /// like raster boxes, parseable).
    pub fn to_argv(&self) -> Vec<String> {
        let mut argv = vec!["labelset".to_string(), self.command.clone()];
        for (key, value) in &self.entries {
            if key == "preset" {
                argv.push(value.clone());
            } else {
                argv.push(format!("--{key}={value}"));
            }
        }
        argv
    }
}

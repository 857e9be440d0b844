use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::fsio;

pub const TOOL: &str = "circdet";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Envelope shared by every JSON report: tool identity, the fully resolved
/// configuration of the run, and the command's result.
#[derive(Debug, Serialize)]
pub struct Report<'a, C: Serialize, R: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub config: &'a C,
    pub result: &'a R,
}

pub fn render<C: Serialize, R: Serialize>(command: &str, config: &C, result: &R) -> String {
    let report = Report {
        tool: TOOL,
        version: TOOL_VERSION,
        command,
        config,
        result,
    };
    let mut s = serde_json::to_string_pretty(&report).expect("report serializes");
    s.push('\n');
    s
}

pub fn write<C: Serialize, R: Serialize>(path: &Path, command: &str, config: &C, result: &R) -> Result<()> {
    fsio::write_atomic(path, render(command, config, result).as_bytes())
}

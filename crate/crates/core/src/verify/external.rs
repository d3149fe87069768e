//! Adapter for an external deductive verifier run as a subprocess.

use std::io::{Read, Write};
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};
use wait_timeout::ChildExt;

use crate::conformance::{Backend, Category, Finding, MergedContract, Mode};

pub const DEFAULT_PASS_REGEX: &str = "No errors";
pub const DEFAULT_DIAGNOSTIC_REGEX: &str = "(?i)(error|might not hold|violat|fail)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToolConfig {
    pub path: PathBuf,
    /// Arguments; `{file}` is replaced by the merged source path.
    pub args: Vec<String>,
    pub timeout_s: u64,
    pub pass_regex: String,
    /// Output lines matching this become SPV findings.
    pub diagnostic_regex: String,
}

impl Default for ToolConfig {
    fn default() -> Self {
        ToolConfig {
            path: PathBuf::from("solc-verify.py"),
            args: vec!["{file}".into()],
            timeout_s: 60,
            pass_regex: DEFAULT_PASS_REGEX.into(),
            diagnostic_regex: DEFAULT_DIAGNOSTIC_REGEX.into(),
        }
    }
}

/// How a finished run was classified.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ToolOutcome {
    Pass,
    Diagnostics(Vec<String>),
    Inconclusive(String),
}

/// Classifies a completed run. Nonzero exit is always inconclusive. The pass
/// pattern may match the whole output or any single line of it.
pub fn classify(exit_code: Option<i32>, output: &str, pass: &Regex, diag: &Regex) -> ToolOutcome {
    match exit_code {
        Some(0) => {}
        Some(c) => return ToolOutcome::Inconclusive(format!("tool exited with status {c}: {}", tail(output))),
        None => return ToolOutcome::Inconclusive(format!("tool terminated by signal: {}", tail(output))),
    }
    if pass.is_match(output) || output.lines().any(|l| pass.is_match(l.trim_end())) {
        return ToolOutcome::Pass;
    }
    let lines: Vec<String> = output.lines().map(str::trim).filter(|l| !l.is_empty() && diag.is_match(l)).map(String::from).collect();
    if lines.is_empty() {
        ToolOutcome::Inconclusive(format!("no verdict in tool output: {}", tail(output)))
    } else {
        ToolOutcome::Diagnostics(lines)
    }
}

fn tail(s: &str) -> String {
    let lines: Vec<&str> = s.lines().filter(|l| !l.trim().is_empty()).collect();
    lines[lines.len().saturating_sub(3)..].join(" | ")
}

/// Site for a diagnostic: the first function of `m` it names, else the contract.
fn site_of(line: &str, m: &MergedContract) -> String {
    m.unit
        .functions
        .iter()
        .filter(|f| f.is_dispatchable())
        .find(|f| line.contains(&format!("::{}", f.name)) || line.contains(&format!("{}(", f.name)) || line.contains(&format!("'{}'", f.name)))
        .map(|f| format!("{}.{}", m.unit.name, f.canonical_signature()))
        .unwrap_or_else(|| m.unit.name.clone())
}

pub fn external_verify(m: &MergedContract, tool: &ToolConfig) -> Vec<Finding> {
    let (pass, diag) = match (Regex::new(&tool.pass_regex), Regex::new(&tool.diagnostic_regex)) {
        (Ok(p), Ok(d)) => (p, d),
        (Err(e), _) | (_, Err(e)) => return vec![Finding::vre("external", format!("invalid tool regex: {e}"))],
    };
    let mut file = match tempfile::Builder::new().prefix("merged-").suffix(".sol").tempfile() {
        Ok(f) => f,
        Err(e) => return vec![Finding::vre("external", format!("cannot write merged contract: {e}"))],
    };
    if let Err(e) = file.write_all(m.to_source().as_bytes()).and_then(|_| file.flush()) {
        return vec![Finding::vre("external", format!("cannot write merged contract: {e}"))];
    }
    let path = file.path().display().to_string();
    let args: Vec<String> = tool.args.iter().map(|a| a.replace("{file}", &path)).collect();
    let mut child = match Command::new(&tool.path).args(&args).stdin(Stdio::null()).stdout(Stdio::piped()).stderr(Stdio::piped()).spawn() {
        Ok(c) => c,
        Err(e) => return vec![Finding::vre("external", format!("backend unavailable: {}: {e}", tool.path.display()))],
    };
    let mut out_pipe = child.stdout.take().expect("piped");
    let mut err_pipe = child.stderr.take().expect("piped");
    let out_reader = std::thread::spawn(move || {
        let mut s = String::new();
        let _ = out_pipe.read_to_string(&mut s);
        s
    });
    let err_reader = std::thread::spawn(move || {
        let mut s = String::new();
        let _ = err_pipe.read_to_string(&mut s);
        s
    });
    let status = match child.wait_timeout(Duration::from_secs(tool.timeout_s)) {
        Ok(Some(s)) => s,
        Ok(None) => {
            let _ = child.kill();
            let _ = child.wait();
            return vec![Finding::vre("external", format!("tool timed out after {} s", tool.timeout_s))];
        }
        Err(e) => return vec![Finding::vre("external", format!("waiting for tool failed: {e}"))],
    };
    let mut output = out_reader.join().unwrap_or_default();
    output.push_str(&err_reader.join().unwrap_or_default());
    match classify(status.code(), &output, &pass, &diag) {
        ToolOutcome::Pass => Vec::new(),
        ToolOutcome::Diagnostics(lines) => {
            lines.into_iter().map(|l| Finding { category: Category::SPV, site: site_of(&l, m), message: l, trace: None }).collect()
        }
        ToolOutcome::Inconclusive(why) => vec![Finding::vre("external", why)],
    }
}

#[derive(Debug, Clone, Default)]
pub struct ExternalBackend {
    pub tool: ToolConfig,
}

impl Backend for ExternalBackend {
    fn name(&self) -> String {
        format!("external:{}", self.tool.path.display())
    }

    fn check(&mut self, m: &MergedContract, _mode: Mode) -> Vec<Finding> {
        external_verify(m, &self.tool)
    }
}

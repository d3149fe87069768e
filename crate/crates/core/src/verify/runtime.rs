//! Runtime monitoring of concrete transaction scenarios.

use std::collections::BTreeSet;
use std::sync::Arc;

use ethnum::U256;

use super::monitor::{render_args, Monitor};
use crate::conformance::{Backend, Finding, MergedContract, Mode, Trace, TraceCall};
use crate::sim::persist::{parse_amount, parse_args, ScriptOp};
use crate::sim::{Address, ChainState, Code, Limits, Receipt, SimError, Status, Value, WrapEvent};

/// Code reference in a scenario's `create` op that names the implementation under test.
pub const IMPL_REF: &str = "@impl";

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("scenario line {line}: {message}")]
    Bad { line: usize, message: String },
}

/// Parses a JSON-lines scenario.
pub fn parse_scenario(text: &str) -> Result<Vec<ScriptOp>, ScenarioError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(k, l)| serde_json::from_str(l).map_err(|e| ScenarioError::Bad { line: k + 1, message: e.to_string() }))
        .collect()
}

type Loader<'a> = dyn FnMut(&str) -> Result<Arc<Code>, String> + 'a;

/// Runs `ops` with `m` monitored wherever its code executes, delegated frames
/// included. Simulator faults become VRE findings.
pub fn run_scenario(m: &MergedContract, mode: Mode, ops: &[ScriptOp], load: &mut Loader<'_>) -> Result<Vec<Finding>, ScenarioError> {
    let code = Code::from_unit(m.unit.clone());
    let mut monitor = Monitor::new(m, &code, mode);
    let obligations = monitor.obligations().to_vec();
    let mut st = ChainState::new();
    let mut calls: Vec<TraceCall> = Vec::new();
    let mut wraps: Vec<WrapEvent> = Vec::new();
    let mut reported = BTreeSet::new();
    let mut findings = Vec::new();
    for (k, op) in ops.iter().enumerate() {
        let line = k + 1;
        let bad = |message: String| ScenarioError::Bad { line, message };
        let value = parse_amount(op.value.as_ref()).map_err(bad)?;
        let addr = |f: &Option<String>, what: &str| -> Result<Address, ScenarioError> {
            f.as_deref().ok_or_else(|| bad(format!("missing `{what}`")))?.parse().map_err(|e: crate::sim::value::AddressParseError| bad(e.to_string()))
        };
        let (result, call) = match op.op.as_str() {
            "fund" => {
                let a = addr(&op.addr, "addr")?;
                st.fund(a, value);
                calls.push(TraceCall {
                    op: "fund".into(),
                    to: Some(a),
                    sig: String::new(),
                    args: Vec::new(),
                    sender: a,
                    value: value.to_string(),
                    status: Status::Success,
                    wraps: Vec::new(),
                });
                continue;
            }
            "create" => {
                let path = op.code.as_deref().ok_or_else(|| bad("missing `code`".into()))?;
                let c = if path == IMPL_REF { code.clone() } else { load(path).map_err(bad)? };
                let sender = addr(&op.sender, "sender")?;
                let ctor = c.unit.constructor();
                let types: Vec<_> = ctor.map(|f| f.params.iter().map(|p| p.ty.clone()).collect()).unwrap_or_default();
                let args = parse_args(&types, &op.args).map_err(bad)?;
                let tys: Vec<String> = types.iter().map(|t| t.abi_name()).collect();
                let call = TraceCall {
                    op: "create".into(),
                    to: None,
                    sig: format!("{}({})", c.name(), tys.join(",")),
                    args: render_args(&args),
                    sender,
                    value: value.to_string(),
                    status: Status::Success,
                    wraps: Vec::new(),
                };
                (st.create_contract_observed(c, args, sender, value, Limits::default(), &mut monitor), call)
            }
            "call" => {
                let to = addr(&op.addr, "addr")?;
                let sender = addr(&op.sender, "sender")?;
                let sig = op.sig.clone().unwrap_or_default();
                let target = st.code(to).cloned().ok_or_else(|| bad(format!("no code at {to}")))?;
                let f = if sig.is_empty() || sig == "()" { target.unit.fallback() } else { target.unit.by_signature(&sig) };
                let f = f.ok_or_else(|| bad(format!("no function `{sig}` at {to}")))?;
                let types: Vec<_> = f.params.iter().map(|p| p.ty.clone()).collect();
                let args = parse_args(&types, &op.args).map_err(bad)?;
                let call = TraceCall {
                    op: "call".into(),
                    to: Some(to),
                    sig: sig.clone(),
                    args: render_args(&args),
                    sender,
                    value: value.to_string(),
                    status: Status::Success,
                    wraps: Vec::new(),
                };
                (st.call_contract_observed(to, &sig, args, sender, value, Limits::default(), &mut monitor), call)
            }
            other => return Err(bad(format!("unknown op `{other}`"))),
        };
        let violations = monitor.take();
        match result {
            Ok(r) => {
                let call = finish(call, &r);
                wraps.extend(r.wrap_events.iter().cloned());
                calls.push(call);
                for v in violations {
                    if reported.insert(v.obligation) {
                        let o = &obligations[v.obligation];
                        let trace = Trace { calls: calls.clone(), seed: None, pre: v.pre, post: v.post, wrap_events: wraps.clone() };
                        findings.push(Finding::violation(o.site.clone(), v.message, trace));
                    }
                }
            }
            Err(e @ (SimError::StepBudget(_) | SimError::CallDepth(_) | SimError::OutOfSubset(_) | SimError::Conservation)) => {
                findings.push(Finding::vre(format!("scenario line {line}"), format!("simulation fault: {e}")));
            }
            Err(e) => return Err(bad(e.to_string())),
        }
    }
    Ok(findings)
}

fn finish(mut call: TraceCall, r: &Receipt) -> TraceCall {
    call.status = r.status;
    call.wraps = r.wrap_events.clone();
    call
}

/// Backend that runs a fixed scenario under the monitor.
pub struct RuntimeBackend<'a> {
    pub scenario: Vec<ScriptOp>,
    pub load: Box<Loader<'a>>,
}

impl<'a> RuntimeBackend<'a> {
    pub fn new(scenario: Vec<ScriptOp>, load: impl FnMut(&str) -> Result<Arc<Code>, String> + 'a) -> Self {
        RuntimeBackend { scenario, load: Box::new(load) }
    }
}

impl Backend for RuntimeBackend<'_> {
    fn name(&self) -> String {
        "runtime".into()
    }

    fn check(&mut self, m: &MergedContract, mode: Mode) -> Vec<Finding> {
        match run_scenario(m, mode, &self.scenario, &mut *self.load) {
            Ok(f) => f,
            Err(e) => vec![Finding::vre("scenario", e.to_string())],
        }
    }
}

/// Convenience for building scenario ops in code.
pub fn call_op(addr: Address, sig: &str, args: &[Value], sender: Address, value: u64) -> ScriptOp {
    ScriptOp::call(addr, sig, args, sender, U256::from(value))
}

pub fn create_op(code: &str, args: &[Value], sender: Address, value: u64) -> ScriptOp {
    ScriptOp::create(code, args, sender, U256::from(value))
}

pub fn fund_op(addr: Address, value: u64) -> ScriptOp {
    ScriptOp::fund(addr, U256::from(value))
}

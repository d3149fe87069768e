//! A chain state together with the transactions that produced it.

use std::sync::Arc;

use ethnum::U256;

use super::exec::{Receipt, SimError};
use super::persist::{apply, ApplyError, ScriptOp, StepResult};
use super::state::{ChainState, Code};
use super::value::{Address, Value};

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error("journal line {line}: {message}")]
    Bad { line: usize, message: String },
    #[error("journal line {line}: {error}")]
    Sim { line: usize, error: SimError },
}

/// Records every transaction that completed with a receipt. Faulted
/// transactions leave no trace in the state and are not recorded.
#[derive(Debug, Clone, Default)]
pub struct Journaled {
    pub state: ChainState,
    pub ops: Vec<ScriptOp>,
}

impl Journaled {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn fund(&mut self, addr: Address, amount: U256) {
        self.state.fund(addr, amount);
        self.ops.push(ScriptOp::fund(addr, amount));
    }

    pub fn create(&mut self, code: Arc<Code>, args: Vec<Value>, sender: Address, value: U256) -> Result<Receipt, SimError> {
        let mut op = ScriptOp::create(&code.id, &args, sender, value);
        op.source = Some(code.source.clone());
        let r = self.state.create_contract(code, args, sender, value)?;
        self.ops.push(op);
        Ok(r)
    }

    pub fn call(&mut self, addr: Address, sig: &str, args: Vec<Value>, sender: Address, value: U256) -> Result<Receipt, SimError> {
        let op = ScriptOp::call(addr, sig, &args, sender, value);
        let r = self.state.call_contract(addr, sig, args, sender, value)?;
        self.ops.push(op);
        Ok(r)
    }

    /// Applies a script op and records it. Sources of `create` ops are
    /// resolved through `load` and stored inline.
    pub fn apply(&mut self, op: &ScriptOp, load: &mut dyn FnMut(&str) -> Result<Arc<Code>, String>) -> Result<StepResult, ApplyError> {
        let mut op = op.clone();
        if op.op == "create" && op.source.is_none() {
            let code = load(op.code.as_deref().unwrap_or_default()).map_err(ApplyError::Bad)?;
            op.source = Some(code.source.clone());
            op.code = Some(code.id.clone());
        }
        let r = apply(&mut self.state, &op, load)?;
        self.ops.push(op);
        Ok(r)
    }

    /// JSON lines, one op per line.
    pub fn journal_text(&self) -> String {
        self.ops.iter().map(|op| serde_json::to_string(op).expect("op serializes") + "\n").collect()
    }

    /// Re-executes `text` from genesis.
    pub fn replay(text: &str) -> Result<Journaled, ReplayError> {
        let mut j = Journaled::new();
        let mut no_load = |p: &str| -> Result<Arc<Code>, String> { Err(format!("journal op references `{p}` without source")) };
        for (k, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let line_no = k + 1;
            let op: ScriptOp = serde_json::from_str(line).map_err(|e| ReplayError::Bad { line: line_no, message: e.to_string() })?;
            apply(&mut j.state, &op, &mut no_load).map_err(|e| match e {
                ApplyError::Bad(message) => ReplayError::Bad { line: line_no, message },
                ApplyError::Sim(error) => ReplayError::Sim { line: line_no, error },
            })?;
            j.ops.push(op);
        }
        Ok(j)
    }
}

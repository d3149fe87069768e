//! JSON persistence of chain state and JSON-lines transaction scripts.

use std::collections::BTreeMap;
use std::sync::Arc;

use ethnum::U256;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value as Json};

use super::exec::{Receipt, SimError};
use super::state::{Account, ChainState, Code, LogEntry};
use super::storage::{storage_from_json, storage_to_json};
use super::value::{parse_uint, Address, Value};
use crate::frontend::TypeExpr;

pub const SCHEMA: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct AccountFile {
    address: Address,
    balance: String,
    storage: Map<String, Json>,
    code_ref: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LogFile {
    tx: u64,
    address: Address,
    event: String,
    args: Vec<Json>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ChainFile {
    schema: u32,
    accounts: Vec<AccountFile>,
    counter: u64,
    log: Vec<LogFile>,
    #[serde(default)]
    tx_count: u64,
    /// Source text for every `code_ref`.
    #[serde(default)]
    codes: BTreeMap<String, String>,
}

#[derive(Debug, thiserror::Error)]
pub enum PersistError {
    #[error("malformed chain file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("chain file: {0}")]
    Invalid(String),
}

pub fn to_json(st: &ChainState) -> Json {
    let mut codes = BTreeMap::new();
    let accounts = st
        .world
        .accounts
        .iter()
        .map(|(a, acc)| {
            let vars = acc.code.as_ref().map(|c| c.unit.vars.as_slice()).unwrap_or(&[]);
            if let Some(c) = &acc.code {
                codes.insert(c.id.clone(), c.source.clone());
            }
            AccountFile {
                address: *a,
                balance: acc.balance.to_string(),
                storage: storage_to_json(&acc.storage, vars),
                code_ref: acc.code.as_ref().map(|c| c.id.clone()),
            }
        })
        .collect();
    let log = st
        .log
        .iter()
        .map(|e| LogFile { tx: e.tx, address: e.address, event: e.event.clone(), args: e.args.iter().map(Value::to_json).collect() })
        .collect();
    let f = ChainFile { schema: SCHEMA, accounts, counter: st.world.counter, log, tx_count: st.tx_count, codes };
    serde_json::to_value(f).expect("chain file serializes")
}

pub fn to_string(st: &ChainState) -> String {
    let mut s = serde_json::to_string_pretty(&to_json(st)).expect("chain file serializes");
    s.push('\n');
    s
}

pub fn from_str(text: &str) -> Result<ChainState, PersistError> {
    let f: ChainFile = serde_json::from_str(text)?;
    if f.schema != SCHEMA {
        return Err(PersistError::Invalid(format!("unsupported schema {}", f.schema)));
    }
    let mut codes: BTreeMap<String, Arc<Code>> = BTreeMap::new();
    for (id, src) in &f.codes {
        let code = Code::from_source(src, id).map_err(|d| PersistError::Invalid(format!("code `{id}`: {d}")))?;
        if code.id != *id {
            return Err(PersistError::Invalid(format!("code `{id}` hashes to `{}`", code.id)));
        }
        codes.insert(id.clone(), code);
    }
    let mut st = ChainState::new();
    for a in f.accounts {
        let code = match &a.code_ref {
            Some(r) => Some(codes.get(r).cloned().ok_or_else(|| PersistError::Invalid(format!("unknown code_ref `{r}`")))?),
            None => None,
        };
        let vars = code.as_ref().map(|c| c.unit.vars.clone()).unwrap_or_default();
        let storage = storage_from_json(&a.storage, &vars).map_err(PersistError::Invalid)?;
        let balance = parse_uint(&a.balance).ok_or_else(|| PersistError::Invalid(format!("bad balance `{}`", a.balance)))?;
        st.world.accounts.insert(a.address, Account { balance, storage, code });
    }
    st.world.counter = f.counter;
    st.tx_count = f.tx_count;
    for e in f.log {
        let decl = st.code(e.address).and_then(|c| c.unit.event(&e.event).cloned());
        let args = match decl {
            Some(d) if d.params.len() == e.args.len() => d
                .params
                .iter()
                .zip(&e.args)
                .map(|(p, j)| Value::from_json(&p.ty, j))
                .collect::<Result<Vec<_>, _>>()
                .map_err(PersistError::Invalid)?,
            _ => return Err(PersistError::Invalid(format!("log entry `{}` does not match any declared event", e.event))),
        };
        st.log.push(LogEntry { tx: e.tx, address: e.address, event: e.event, args });
    }
    Ok(st)
}

/// One line of a transaction script.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScriptOp {
    pub op: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub addr: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sig: Option<String>,
    #[serde(default)]
    pub args: Vec<Json>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sender: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<Json>,
    /// Source path for `create`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code: Option<String>,
    /// Inline source for `create`; takes precedence over `code`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

impl ScriptOp {
    pub fn fund(addr: Address, amount: U256) -> Self {
        ScriptOp { op: "fund".into(), addr: Some(addr.to_string()), value: Some(Value::Uint(amount).to_json()), ..Default::default() }
    }

    pub fn call(addr: Address, sig: &str, args: &[Value], sender: Address, value: U256) -> Self {
        ScriptOp {
            op: "call".into(),
            addr: Some(addr.to_string()),
            sig: Some(sig.into()),
            args: args.iter().map(Value::to_json).collect(),
            sender: Some(sender.to_string()),
            value: Some(Value::Uint(value).to_json()),
            ..Default::default()
        }
    }

    /// A `create` of `code`, which names a source path or an inline reference.
    pub fn create(code: &str, args: &[Value], sender: Address, value: U256) -> Self {
        ScriptOp {
            op: "create".into(),
            args: args.iter().map(Value::to_json).collect(),
            sender: Some(sender.to_string()),
            value: Some(Value::Uint(value).to_json()),
            code: Some(code.into()),
            ..Default::default()
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ScriptError {
    #[error("line {line}: {message}")]
    Bad { line: usize, message: String },
    #[error("line {line}: {error}")]
    Sim { line: usize, error: SimError },
}

#[derive(Debug, Clone)]
pub enum StepResult {
    Funded { addr: Address, amount: U256 },
    Receipt(Receipt),
}

/// Storage of `acc` keyed by its code's variable names.
pub fn account_storage_json(acc: &Account) -> Json {
    let vars = acc.code.as_ref().map(|c| c.unit.vars.as_slice()).unwrap_or(&[]);
    Json::Object(storage_to_json(&acc.storage, vars))
}

pub const RECEIPT_SCHEMA: u32 = 1;

pub fn receipt_to_json(r: &Receipt) -> Json {
    let events: Vec<Json> = r
        .events
        .iter()
        .map(|e| json!({ "address": e.address.to_string(), "event": e.event, "args": e.args.iter().map(Value::to_json).collect::<Vec<_>>() }))
        .collect();
    let mut o = json!({
        "schema": RECEIPT_SCHEMA,
        "status": r.status,
        "return_values": r.return_values.iter().map(Value::to_json).collect::<Vec<_>>(),
        "events": events,
        "wrap_events": r.wrap_events,
        "steps": r.steps,
    });
    if let Some(a) = r.created {
        o["created"] = json!(a.to_string());
    }
    if let Some(why) = &r.revert_reason {
        o["revert_reason"] = json!(why);
    }
    o
}

pub fn parse_amount(j: Option<&Json>) -> Result<U256, String> {
    match j {
        None | Some(Json::Null) => Ok(U256::ZERO),
        Some(j) => Value::from_json(&TypeExpr::Uint256, j).map(|v| v.as_uint().unwrap()),
    }
}

/// Converts JSON arguments using the parameter types of `sig` at `code`.
pub fn parse_args(types: &[TypeExpr], args: &[Json]) -> Result<Vec<Value>, String> {
    if types.len() != args.len() {
        return Err(format!("expected {} argument(s), got {}", types.len(), args.len()));
    }
    types.iter().zip(args).map(|(t, a)| Value::from_json(t, a)).collect()
}

/// Runs a JSON-lines script. `load` resolves `code` paths of `create` ops.
pub fn run_script(
    st: &mut ChainState,
    script: &str,
    load: &mut dyn FnMut(&str) -> Result<Arc<Code>, String>,
) -> Result<Vec<StepResult>, ScriptError> {
    let mut out = Vec::new();
    for (k, line) in script.lines().enumerate() {
        let line_no = k + 1;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| ScriptError::Bad { line: line_no, message };
        let op: ScriptOp = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
        out.push(apply(st, &op, load).map_err(|e| match e {
            ApplyError::Bad(m) => bad(m),
            ApplyError::Sim(error) => ScriptError::Sim { line: line_no, error },
        })?);
    }
    Ok(out)
}

pub enum ApplyError {
    Bad(String),
    Sim(SimError),
}

fn addr_field(f: &Option<String>, what: &str) -> Result<Address, ApplyError> {
    let s = f.as_ref().ok_or_else(|| ApplyError::Bad(format!("missing `{what}`")))?;
    s.parse().map_err(|e: super::value::AddressParseError| ApplyError::Bad(e.to_string()))
}

/// Applies one script operation.
pub fn apply(st: &mut ChainState, op: &ScriptOp, load: &mut dyn FnMut(&str) -> Result<Arc<Code>, String>) -> Result<StepResult, ApplyError> {
    let value = parse_amount(op.value.as_ref()).map_err(ApplyError::Bad)?;
    match op.op.as_str() {
        "fund" => {
            let addr = addr_field(&op.addr, "addr")?;
            st.fund(addr, value);
            Ok(StepResult::Funded { addr, amount: value })
        }
        "create" => {
            let path = op.code.as_deref().unwrap_or("inline.sol");
            let code = match &op.source {
                Some(src) => Code::from_source(src, path).map_err(|d| ApplyError::Bad(d.to_string()))?,
                None if op.code.is_some() => load(path).map_err(ApplyError::Bad)?,
                None => return Err(ApplyError::Bad("missing `code`".into())),
            };
            let sender = addr_field(&op.sender, "sender")?;
            let types: Vec<TypeExpr> = code.unit.constructor().map(|c| c.params.iter().map(|p| p.ty.clone()).collect()).unwrap_or_default();
            let args = parse_args(&types, &op.args).map_err(ApplyError::Bad)?;
            st.create_contract(code, args, sender, value).map(StepResult::Receipt).map_err(ApplyError::Sim)
        }
        "call" => {
            let addr = addr_field(&op.addr, "addr")?;
            let sender = addr_field(&op.sender, "sender")?;
            let sig = op.sig.clone().unwrap_or_default();
            let code = st.code(addr).cloned().ok_or(ApplyError::Sim(SimError::NoCode(addr)))?;
            let f = if sig.is_empty() || sig == "()" { code.unit.fallback() } else { code.unit.by_signature(&sig) };
            let f = f.ok_or_else(|| ApplyError::Sim(SimError::NoSuchFunction { addr, sig: sig.clone() }))?;
            let types: Vec<TypeExpr> = f.params.iter().map(|p| p.ty.clone()).collect();
            let args = parse_args(&types, &op.args).map_err(ApplyError::Bad)?;
            st.call_contract(addr, &sig, args, sender, value).map(StepResult::Receipt).map_err(ApplyError::Sim)
        }
        other => Err(ApplyError::Bad(format!("unknown op `{other}`"))),
    }
}

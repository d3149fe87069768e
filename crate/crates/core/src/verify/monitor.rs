//! Frame observer that checks obligations at every successful exit of a
//! monitored function.

use std::sync::Arc;

use serde_json::{json, Value as Json};

use super::eval::{eval_bool, EvalContext, EvalError};
use crate::conformance::{MergedContract, Mode};
use crate::frontend::FunctionDecl;
use crate::sim::storage::storage_to_json;
use crate::sim::{Address, ChainState, Code, FrameExit, FrameInfo, Observer, Value, World};
use crate::spec::{Annotation, FunctionSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ObligationKind {
    Postcondition(usize),
    Invariant(usize),
    Emits,
}

/// One checkable obligation of one function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Obligation {
    /// Index into the merged unit's functions.
    pub function: usize,
    pub kind: ObligationKind,
    pub site: String,
    pub text: String,
}

fn fn_label(f: &FunctionDecl) -> String {
    if f.is_constructor() {
        let tys: Vec<String> = f.params.iter().map(|p| p.ty.abi_name()).collect();
        format!("constructor({})", tys.join(","))
    } else {
        f.canonical_signature()
    }
}

/// Spec entry of every monitored function; the constructor only in create mode.
pub fn monitored<'a>(m: &'a MergedContract, mode: Mode) -> Vec<(usize, &'a FunctionSpec)> {
    m.unit
        .functions
        .iter()
        .enumerate()
        .filter(|(_, f)| mode == Mode::Create || !f.is_constructor())
        .filter_map(|(i, f)| m.spec_of(f).map(|s| (i, s)))
        .collect()
}

pub fn obligations(m: &MergedContract, mode: Mode) -> Vec<Obligation> {
    let mut out = Vec::new();
    for (i, fs) in monitored(m, mode) {
        let label = format!("{}.{}", m.unit.name, fn_label(&m.unit.functions[i]));
        for (k, a) in fs.postconditions.iter().enumerate() {
            out.push(Obligation {
                function: i,
                kind: ObligationKind::Postcondition(k),
                site: format!("{label} postcondition {}", k + 1),
                text: a.expr.to_string(),
            });
        }
        for (k, a) in m.spec.invariants.iter().enumerate() {
            out.push(Obligation {
                function: i,
                kind: ObligationKind::Invariant(k),
                site: format!("{label} invariant {}", k + 1),
                text: a.expr.to_string(),
            });
        }
        out.push(Obligation { function: i, kind: ObligationKind::Emits, site: format!("{label} emits"), text: fs.emits.join(", ") });
    }
    out
}

/// Monitored account as JSON: address, balance and named storage.
pub fn account_json(w: &World, addr: Address, m: &MergedContract) -> Json {
    let acc = w.accounts.get(&addr);
    let storage = acc.map(|a| storage_to_json(&a.storage, &m.unit.vars)).unwrap_or_default();
    json!({
        "address": addr.to_string(),
        "balance": acc.map_or("0".to_string(), |a| a.balance.to_string()),
        "storage": storage,
    })
}

/// A failed obligation in a frame that committed.
#[derive(Debug, Clone)]
pub struct Violation {
    pub obligation: usize,
    pub message: String,
    pub this: Address,
    pub pre: Json,
    pub post: Json,
}

struct Open {
    frame: u64,
    pre: Option<World>,
    found: Vec<Violation>,
}

/// Observer checking the obligations of `m` on frames running `code`.
pub struct Monitor<'m> {
    merged: &'m MergedContract,
    code_id: String,
    obligations: Vec<Obligation>,
    stack: Vec<Open>,
    committed: Vec<Violation>,
}

impl<'m> Monitor<'m> {
    pub fn new(merged: &'m MergedContract, code: &Arc<Code>, mode: Mode) -> Self {
        Monitor {
            merged,
            code_id: code.id.clone(),
            obligations: obligations(merged, mode),
            stack: Vec::new(),
            committed: Vec::new(),
        }
    }

    pub fn obligations(&self) -> &[Obligation] {
        &self.obligations
    }

    /// Violations from frames whose effects survived, in exit order.
    pub fn take(&mut self) -> Vec<Violation> {
        std::mem::take(&mut self.committed)
    }

    fn watches(&self, frame: &FrameInfo) -> bool {
        frame.code.id == self.code_id && frame.function.is_some_and(|i| self.obligations.iter().any(|o| o.function == i))
    }

    fn invariants_hold(&self, w: &World, this: Address) -> bool {
        self.merged.spec.invariants.iter().all(|a| {
            let ctx = EvalContext {
                pre: w,
                post: w,
                this,
                vars: &self.merged.unit.vars,
                sender: Address::ZERO,
                value: Default::default(),
                params: &[],
                rets: &[],
            };
            eval_bool(&a.expr, &ctx) == Ok(true)
        })
    }

    fn judge(&self, pre: &World, post: &World, frame: &FrameInfo, exit: &FrameExit<'_>) -> Vec<Violation> {
        let f = frame.function.expect("watched frames run a function");
        let fs = self.merged.spec_of(&self.merged.unit.functions[f]).expect("watched");
        let ctx = EvalContext {
            pre,
            post,
            this: frame.this,
            vars: &self.merged.unit.vars,
            sender: frame.sender,
            value: frame.value,
            params: &frame.args,
            rets: exit.returns,
        };
        let is_ctor = frame.decl().is_some_and(FunctionDecl::is_constructor);
        let entered_sound = is_ctor || self.invariants_hold(pre, frame.this);
        let mut out = Vec::new();
        let mut fail = |k: usize, message: String| {
            out.push(Violation {
                obligation: k,
                message,
                this: frame.this,
                pre: account_json(pre, frame.this, self.merged),
                post: account_json(post, frame.this, self.merged),
            })
        };
        let check = |a: &Annotation, what: &str| -> Option<String> {
            match eval_bool(&a.expr, &ctx) {
                Ok(true) => None,
                Ok(false) => Some(format!("{what} `{}` violated", a.expr)),
                Err(EvalError::Undefined(m)) => Some(format!("{what} `{}` is undefined: {m}", a.expr)),
                Err(e) => Some(format!("{what} `{}` could not be evaluated: {e}", a.expr)),
            }
        };
        for (k, o) in self.obligations.iter().enumerate().filter(|(_, o)| o.function == f) {
            let msg = match o.kind {
                ObligationKind::Postcondition(p) => check(&fs.postconditions[p], "postcondition"),
                ObligationKind::Invariant(_) if !entered_sound => None,
                ObligationKind::Invariant(p) => {
                    let what = if is_ctor { "invariant (not established)" } else { "invariant (not preserved)" };
                    check(&self.merged.spec.invariants[p], what)
                }
                ObligationKind::Emits => exit
                    .events
                    .iter()
                    .find(|e| e.address == frame.this && !fs.allows_event(&e.event))
                    .map(|e| format!("event `{}` is not in the emits set [{}]", e.event, fs.emits.join(", "))),
            };
            if let Some(m) = msg {
                fail(k, m);
            }
        }
        out
    }
}

impl Observer for Monitor<'_> {
    fn enter(&mut self, st: &ChainState, frame: &FrameInfo) {
        let pre = self.watches(frame).then(|| st.world.clone());
        self.stack.push(Open { frame: frame.id, pre, found: Vec::new() });
    }

    fn exit(&mut self, st: &ChainState, frame: &FrameInfo, exit: &FrameExit<'_>) {
        let open = match self.stack.pop() {
            Some(o) if o.frame == frame.id => o,
            other => panic!("unbalanced frame exit: {:?} vs {}", other.map(|o| o.frame), frame.id),
        };
        if !exit.success {
            return;
        }
        let mut found = open.found;
        if let Some(pre) = &open.pre {
            found.extend(self.judge(pre, &st.world, frame, exit));
        }
        match self.stack.last_mut() {
            Some(parent) => parent.found.extend(found),
            None => self.committed.extend(found),
        }
    }
}

/// Values rendered for traces.
pub fn render_args(args: &[Value]) -> Vec<String> {
    args.iter().map(Value::to_string).collect()
}

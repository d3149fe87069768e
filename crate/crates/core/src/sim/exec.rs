//! Transaction execution: frames, statements and expressions.

use std::sync::Arc;

use ethnum::U256;
use serde::{Deserialize, Serialize};

use super::state::{ChainState, Code, LogEntry};
use super::storage::StorageError;
use super::value::{Address, Bytes, Value};
use crate::frontend::{
    AssignOp, BinOp, Binding, Expr, ExprKind, FunctionDecl, Mutability, SafeOp, Stmt, StmtKind, TypeExpr, UnOp,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub steps: u64,
    pub depth: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { steps: 1_000_000, depth: 64 }
    }
}

/// An arithmetic operation whose result wrapped modulo 2^256.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WrapEvent {
    pub site: String,
    pub op: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Success,
    Reverted,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Receipt {
    pub status: Status,
    pub return_values: Vec<Value>,
    pub events: Vec<LogEntry>,
    pub wrap_events: Vec<WrapEvent>,
    pub revert_reason: Option<String>,
    pub created: Option<Address>,
    pub steps: u64,
}

impl Receipt {
    pub fn success(&self) -> bool {
        self.status == Status::Success
    }
}

/// Faults abort a transaction without producing a receipt; the state is left
/// as it was before the transaction.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error("no code at {0}")]
    NoCode(Address),
    #[error("no public function `{sig}` at {addr}")]
    NoSuchFunction { addr: Address, sig: String },
    #[error("bad arguments: {0}")]
    BadArguments(String),
    #[error("sender {sender} cannot pay {value} Wei")]
    InsufficientFunds { sender: Address, value: U256 },
    #[error("step budget of {0} exceeded")]
    StepBudget(u64),
    #[error("call depth limit of {0} exceeded")]
    CallDepth(usize),
    #[error("construct outside the supported subset: {0}")]
    OutOfSubset(String),
    #[error("Wei not conserved by transaction")]
    Conservation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameKind {
    Create,
    Call,
    Delegate,
    Fallback,
}

/// A contract execution frame as seen by observers.
#[derive(Debug, Clone)]
pub struct FrameInfo {
    pub id: u64,
    pub depth: usize,
    pub kind: FrameKind,
    pub code: Arc<Code>,
    pub code_addr: Address,
    /// Account whose storage and balance the frame uses.
    pub this: Address,
    pub sender: Address,
    pub value: U256,
    /// Index into `code.unit.functions`.
    pub function: Option<usize>,
    pub args: Vec<Value>,
}

impl FrameInfo {
    pub fn decl(&self) -> Option<&FunctionDecl> {
        self.function.map(|i| &self.code.unit.functions[i])
    }
}

pub struct FrameExit<'a> {
    pub success: bool,
    pub returns: &'a [Value],
    /// Events logged while the frame ran, nested frames included.
    pub events: &'a [LogEntry],
    pub wraps: &'a [WrapEvent],
    pub reason: Option<&'a str>,
}

/// Hooks around every frame. `exit` sees the state after commit or rollback.
pub trait Observer {
    fn enter(&mut self, _st: &ChainState, _frame: &FrameInfo) {}
    fn exit(&mut self, _st: &ChainState, _frame: &FrameInfo, _exit: &FrameExit<'_>) {}
}

pub struct NoObserver;

impl Observer for NoObserver {}

enum Halt {
    Revert(String),
    Fault(SimError),
}

impl From<SimError> for Halt {
    fn from(e: SimError) -> Self {
        Halt::Fault(e)
    }
}

impl From<StorageError> for Halt {
    fn from(e: StorageError) -> Self {
        Halt::Revert(e.to_string())
    }
}

type R<T> = Result<T, Halt>;

enum Flow {
    Next,
    Return(Vec<Value>),
}

struct Ctx {
    code: Arc<Code>,
    this: Address,
    sender: Address,
    value: U256,
    func: usize,
}

struct FrameOut {
    success: bool,
    returns: Vec<Value>,
}

struct Exec<'a> {
    st: &'a mut ChainState,
    obs: &'a mut dyn Observer,
    limits: Limits,
    steps: u64,
    depth: usize,
    wraps: Vec<WrapEvent>,
    frames: u64,
}

fn revert<T>(msg: impl Into<String>) -> R<T> {
    Err(Halt::Revert(msg.into()))
}

fn subset<T>(what: impl Into<String>) -> R<T> {
    Err(Halt::Fault(SimError::OutOfSubset(what.into())))
}

fn pack(mut vs: Vec<Value>) -> Value {
    if vs.len() == 1 {
        vs.pop().unwrap()
    } else {
        Value::Tuple(vs)
    }
}

fn unpack(v: Value) -> Vec<Value> {
    match v {
        Value::Tuple(vs) => vs,
        v => vec![v],
    }
}

fn check_args(f: &FunctionDecl, args: &[Value]) -> Result<(), String> {
    if f.params.len() != args.len() {
        return Err(format!("`{}` takes {} argument(s), {} given", f.canonical_signature(), f.params.len(), args.len()));
    }
    for (p, a) in f.params.iter().zip(args) {
        if !a.has_type(&p.ty) {
            return Err(format!("argument `{}` expects {}, got {a}", p.name, p.ty));
        }
    }
    Ok(())
}

fn find_sig(code: &Code, sig: &str) -> Option<usize> {
    let fs = &code.unit.functions;
    if sig.is_empty() || sig == "()" {
        return fs.iter().position(|f| f.is_fallback());
    }
    fs.iter().position(|f| f.is_dispatchable() && f.canonical_signature() == sig)
}

impl ChainState {
    pub fn create_contract(&mut self, code: Arc<Code>, args: Vec<Value>, sender: Address, value: U256) -> Result<Receipt, SimError> {
        self.create_contract_observed(code, args, sender, value, Limits::default(), &mut NoObserver)
    }

    pub fn call_contract(&mut self, addr: Address, sig: &str, args: Vec<Value>, sender: Address, value: U256) -> Result<Receipt, SimError> {
        self.call_contract_observed(addr, sig, args, sender, value, Limits::default(), &mut NoObserver)
    }

    pub fn create_contract_observed(
        &mut self,
        code: Arc<Code>,
        args: Vec<Value>,
        sender: Address,
        value: U256,
        limits: Limits,
        obs: &mut dyn Observer,
    ) -> Result<Receipt, SimError> {
        let ctor = code.unit.functions.iter().position(|f| f.is_constructor());
        match ctor {
            Some(i) => check_args(&code.unit.functions[i], &args).map_err(SimError::BadArguments)?,
            None if !args.is_empty() => return Err(SimError::BadArguments(format!("`{}` has no constructor", code.name()))),
            None => {}
        }
        self.transaction(sender, value, limits, obs, |ex| {
            let pre = ex.st.world.clone();
            let addr = ex.st.next_address();
            ex.st.world.counter += 1;
            ex.st.account_mut(addr).code = Some(code.clone());
            let out = ex.frame(FrameKind::Create, code.clone(), addr, addr, sender, value, Some(sender), ctor, args)?;
            if !out.success {
                ex.st.world = pre;
                return Ok((out, None));
            }
            Ok((out, Some(addr)))
        })
    }

    pub fn call_contract_observed(
        &mut self,
        addr: Address,
        sig: &str,
        args: Vec<Value>,
        sender: Address,
        value: U256,
        limits: Limits,
        obs: &mut dyn Observer,
    ) -> Result<Receipt, SimError> {
        let code = self.code(addr).cloned().ok_or(SimError::NoCode(addr))?;
        let f = find_sig(&code, sig).ok_or_else(|| SimError::NoSuchFunction { addr, sig: sig.to_string() })?;
        check_args(&code.unit.functions[f], &args).map_err(SimError::BadArguments)?;
        let kind = if code.unit.functions[f].is_fallback() { FrameKind::Fallback } else { FrameKind::Call };
        self.transaction(sender, value, limits, obs, |ex| {
            let out = ex.frame(kind, code.clone(), addr, addr, sender, value, Some(sender), Some(f), args)?;
            Ok((out, None))
        })
    }

    fn transaction(
        &mut self,
        sender: Address,
        value: U256,
        limits: Limits,
        obs: &mut dyn Observer,
        body: impl FnOnce(&mut Exec<'_>) -> Result<(FrameOut, Option<Address>), Halt>,
    ) -> Result<Receipt, SimError> {
        if self.balance(sender) < value {
            return Err(SimError::InsufficientFunds { sender, value });
        }
        let pre_world = self.world.clone();
        let pre_log = self.log.len();
        let total = self.total_balance();
        let tx = self.tx_count;
        let mut ex = Exec { st: self, obs, limits, steps: 0, depth: 0, wraps: Vec::new(), frames: 0 };
        let res = body(&mut ex);
        let steps = ex.steps;
        let wraps = std::mem::take(&mut ex.wraps);
        let restore = |st: &mut ChainState| {
            st.world = pre_world.clone();
            st.log.truncate(pre_log);
        };
        let (out, created) = match res {
            Ok(x) => x,
            Err(Halt::Fault(e)) => {
                restore(self);
                return Err(e);
            }
            Err(Halt::Revert(_)) => unreachable!("frames catch reverts"),
        };
        if self.total_balance() != total {
            restore(self);
            return Err(SimError::Conservation);
        }
        self.tx_count += 1;
        for e in &mut self.log[pre_log..] {
            e.tx = tx;
        }
        if out.success {
            Ok(Receipt {
                status: Status::Success,
                return_values: out.returns,
                events: self.log[pre_log..].to_vec(),
                wrap_events: wraps,
                revert_reason: None,
                created,
                steps,
            })
        } else {
            let reason = out.returns.first().map(|v| match v {
                Value::Bytes(Bytes::Raw(r)) => String::from_utf8_lossy(r).into_owned(),
                v => v.to_string(),
            });
            Ok(Receipt {
                status: Status::Reverted,
                return_values: Vec::new(),
                events: Vec::new(),
                wrap_events: Vec::new(),
                revert_reason: reason,
                created: None,
                steps,
            })
        }
    }
}

impl<'a> Exec<'a> {
    fn tick(&mut self) -> R<()> {
        self.steps += 1;
        if self.steps > self.limits.steps {
            return Err(Halt::Fault(SimError::StepBudget(self.limits.steps)));
        }
        Ok(())
    }

    /// Runs one frame. A revert inside is caught here: state is rolled back
    /// and `success` is false, with the reason as the single return value.
    #[allow(clippy::too_many_arguments)]
    fn frame(
        &mut self,
        kind: FrameKind,
        code: Arc<Code>,
        code_addr: Address,
        this: Address,
        sender: Address,
        value: U256,
        pay_from: Option<Address>,
        function: Option<usize>,
        args: Vec<Value>,
    ) -> R<FrameOut> {
        if self.depth >= self.limits.depth {
            return Err(Halt::Fault(SimError::CallDepth(self.limits.depth)));
        }
        let snapshot = self.st.world.clone();
        let log_len = self.st.log.len();
        let wraps_len = self.wraps.len();
        self.frames += 1;
        let info = FrameInfo { id: self.frames, depth: self.depth, kind, code: code.clone(), code_addr, this, sender, value, function, args };
        self.obs.enter(self.st, &info);
        self.depth += 1;
        let res = self.frame_body(&info, pay_from);
        self.depth -= 1;
        let (success, returns) = match res {
            Ok(rs) => (true, rs),
            Err(Halt::Revert(reason)) => {
                self.st.world = snapshot;
                self.st.log.truncate(log_len);
                self.wraps.truncate(wraps_len);
                (false, vec![Value::Bytes(Bytes::Raw(reason.into_bytes()))])
            }
            Err(fault) => return Err(fault),
        };
        let reason = match (&success, returns.first()) {
            (false, Some(Value::Bytes(Bytes::Raw(r)))) => Some(String::from_utf8_lossy(r).into_owned()),
            _ => None,
        };
        let exit = FrameExit {
            success,
            returns: if success { &returns } else { &[] },
            events: &self.st.log[log_len.min(self.st.log.len())..],
            wraps: &self.wraps[wraps_len.min(self.wraps.len())..],
            reason: reason.as_deref(),
        };
        self.obs.exit(self.st, &info, &exit);
        Ok(FrameOut { success, returns })
    }

    fn frame_body(&mut self, info: &FrameInfo, pay_from: Option<Address>) -> R<Vec<Value>> {
        let decl = info.decl();
        let payable = decl.is_some_and(|f| f.mutability == Mutability::Payable);
        if info.value > U256::ZERO && !payable {
            return revert("non-payable function received value");
        }
        if let Some(from) = pay_from {
            if !self.st.transfer(from, info.this, info.value) {
                return revert("insufficient balance for value transfer");
            }
        }
        let Some(f) = info.function else { return Ok(Vec::new()) };
        let ctx = Ctx { code: info.code.clone(), this: info.this, sender: info.sender, value: info.value, func: f };
        self.run_function(&ctx, info.args.clone())
    }

    fn run_function(&mut self, ctx: &Ctx, args: Vec<Value>) -> R<Vec<Value>> {
        let code = ctx.code.clone();
        let f = &code.unit.functions[ctx.func];
        let Some(body) = &f.body else {
            return revert(format!("function `{}` has no body", f.name));
        };
        let mut locals = args;
        for r in &f.returns {
            locals.push(Value::zero(&r.ty).unwrap_or(Value::Bool(false)));
        }
        locals.resize(f.frame_size.max(locals.len()), Value::Bool(false));
        let np = f.params.len();
        match self.block(ctx, &mut locals, body)? {
            Flow::Return(vs) => Ok(vs),
            Flow::Next => Ok(locals[np..np + f.returns.len()].to_vec()),
        }
    }

    fn block(&mut self, ctx: &Ctx, locals: &mut Vec<Value>, b: &[Stmt]) -> R<Flow> {
        for s in b {
            if let Flow::Return(v) = self.stmt(ctx, locals, s)? {
                return Ok(Flow::Return(v));
            }
        }
        Ok(Flow::Next)
    }

    fn stmt(&mut self, ctx: &Ctx, locals: &mut Vec<Value>, s: &Stmt) -> R<Flow> {
        self.tick()?;
        match &s.kind {
            StmtKind::Block(b) => return self.block(ctx, locals, b),
            StmtKind::VarDecl { decl, init } => {
                let v = match init {
                    Some(e) => self.expr(ctx, locals, e)?,
                    None => Value::zero(&decl.ty).unwrap_or(Value::Bool(false)),
                };
                locals[decl.slot] = v;
            }
            StmtKind::TupleDecl { decls, init } => {
                let vs = unpack(self.expr(ctx, locals, init)?);
                for (d, v) in decls.iter().zip(vs) {
                    if let Some(d) = d {
                        locals[d.slot] = v;
                    }
                }
            }
            StmtKind::Assign { target, op, value } => {
                let v = self.expr(ctx, locals, value)?;
                if let ExprKind::Tuple(items) = &target.kind {
                    for (it, v) in items.iter().zip(unpack(v)) {
                        if let Some(it) = it {
                            let p = self.place(ctx, locals, it)?;
                            self.store(ctx, locals, &p, v)?;
                        }
                    }
                    return Ok(Flow::Next);
                }
                let p = self.place(ctx, locals, target)?;
                let v = match op {
                    AssignOp::Set => v,
                    op => {
                        let cur = self.load(ctx, locals, &p)?;
                        let bop = match op {
                            AssignOp::Add => BinOp::Add,
                            AssignOp::Sub => BinOp::Sub,
                            _ => BinOp::Mul,
                        };
                        self.arith(ctx, s, bop, &cur, &v)?
                    }
                };
                self.store(ctx, locals, &p, v)?;
            }
            StmtKind::IncDec { target, inc, .. } => {
                let p = self.place(ctx, locals, target)?;
                let cur = self.load(ctx, locals, &p)?;
                let op = if *inc { BinOp::Add } else { BinOp::Sub };
                let v = self.arith(ctx, s, op, &cur, &Value::uint(1))?;
                self.store(ctx, locals, &p, v)?;
            }
            StmtKind::If { cond, then, els } => {
                if self.truth(ctx, locals, cond)? {
                    return self.stmt(ctx, locals, then);
                } else if let Some(e) = els {
                    return self.stmt(ctx, locals, e);
                }
            }
            StmtKind::For { init, cond, step, body } => {
                if let Some(i) = init {
                    self.stmt(ctx, locals, i)?;
                }
                loop {
                    self.tick()?;
                    if let Some(c) = cond {
                        if !self.truth(ctx, locals, c)? {
                            break;
                        }
                    }
                    if let Flow::Return(v) = self.stmt(ctx, locals, body)? {
                        return Ok(Flow::Return(v));
                    }
                    if let Some(st) = step {
                        self.stmt(ctx, locals, st)?;
                    }
                }
            }
            StmtKind::Require { cond, msg } => {
                if !self.truth(ctx, locals, cond)? {
                    let m = match msg.as_ref().map(|m| &m.kind) {
                        Some(ExprKind::Str(s)) => s.clone(),
                        _ => format!("require failed at {}", s.pos.0),
                    };
                    return revert(m);
                }
            }
            StmtKind::Emit { event, args } => {
                let args = args.iter().map(|a| self.expr(ctx, locals, a)).collect::<R<Vec<_>>>()?;
                let tx = self.st.tx_count;
                self.st.log.push(LogEntry { tx, address: ctx.this, event: event.clone(), args });
            }
            StmtKind::Return(e) => {
                let vs = match e {
                    None => {
                        let f = &ctx.code.unit.functions[ctx.func];
                        let np = f.params.len();
                        locals[np..np + f.returns.len()].to_vec()
                    }
                    Some(e) => unpack(self.expr(ctx, locals, e)?),
                };
                return Ok(Flow::Return(vs));
            }
            StmtKind::Expr(e) => {
                self.expr(ctx, locals, e)?;
            }
        }
        Ok(Flow::Next)
    }

    fn truth(&mut self, ctx: &Ctx, locals: &[Value], e: &Expr) -> R<bool> {
        match self.expr(ctx, locals, e)? {
            Value::Bool(b) => Ok(b),
            v => subset(format!("condition evaluated to {v}")),
        }
    }

    fn site(&self, ctx: &Ctx, pos: crate::frontend::Pos) -> String {
        let f = &ctx.code.unit.functions[ctx.func];
        let name = if f.is_constructor() {
            "constructor"
        } else if f.is_fallback() {
            "fallback"
        } else {
            f.name.as_str()
        };
        format!("{}.{}@{}", ctx.code.name(), name, pos)
    }

    fn arith(&mut self, ctx: &Ctx, s: &Stmt, op: BinOp, a: &Value, b: &Value) -> R<Value> {
        self.arith_at(ctx, s.pos.0, op, a, b)
    }

    fn arith_at(&mut self, ctx: &Ctx, pos: crate::frontend::Pos, op: BinOp, a: &Value, b: &Value) -> R<Value> {
        let (Some(x), Some(y)) = (a.as_uint(), b.as_uint()) else {
            return subset(format!("arithmetic on {a} and {b}"));
        };
        let (v, wrapped) = match op {
            BinOp::Add => x.overflowing_add(y),
            BinOp::Sub => x.overflowing_sub(y),
            BinOp::Mul => x.overflowing_mul(y),
            BinOp::Div | BinOp::Mod => {
                if y == U256::ZERO {
                    return revert("division by zero");
                }
                (if op == BinOp::Div { x / y } else { x % y }, false)
            }
            _ => unreachable!("not arithmetic"),
        };
        if wrapped {
            self.wraps.push(WrapEvent { site: self.site(ctx, pos), op: op.token().to_string() });
        }
        Ok(Value::Uint(v))
    }

    fn expr(&mut self, ctx: &Ctx, locals: &[Value], e: &Expr) -> R<Value> {
        match &e.kind {
            ExprKind::Number { value, .. } => Ok(Value::Uint(*value)),
            ExprKind::Bool(b) => Ok(Value::Bool(*b)),
            ExprKind::Str(s) => Ok(Value::Bytes(Bytes::Raw(s.as_bytes().to_vec()))),
            ExprKind::MsgSender => Ok(Value::Addr(ctx.sender)),
            ExprKind::MsgValue => Ok(Value::Uint(ctx.value)),
            ExprKind::This => Ok(Value::Addr(ctx.this)),
            ExprKind::Ident { .. } | ExprKind::Index(..) => {
                let p = self.place(ctx, locals, e)?;
                self.load(ctx, locals, &p)
            }
            ExprKind::Unary(UnOp::Not, a) => Ok(Value::Bool(!self.truth(ctx, locals, a)?)),
            ExprKind::Unary(UnOp::Neg, a) => {
                let v = self.expr(ctx, locals, a)?;
                let x = v.as_uint().ok_or(Halt::Fault(SimError::OutOfSubset(format!("negation of {v}"))))?;
                Ok(Value::Uint(U256::ZERO.wrapping_sub(x)))
            }
            ExprKind::Binary(op, a, b) => match op {
                BinOp::And => Ok(Value::Bool(self.truth(ctx, locals, a)? && self.truth(ctx, locals, b)?)),
                BinOp::Or => Ok(Value::Bool(self.truth(ctx, locals, a)? || self.truth(ctx, locals, b)?)),
                BinOp::Eq | BinOp::Ne => {
                    let x = self.expr(ctx, locals, a)?;
                    let y = self.expr(ctx, locals, b)?;
                    Ok(Value::Bool((x == y) == (*op == BinOp::Eq)))
                }
                op if op.is_ordering() => {
                    let x = self.expr(ctx, locals, a)?;
                    let y = self.expr(ctx, locals, b)?;
                    let (Some(x), Some(y)) = (x.as_uint(), y.as_uint()) else {
                        return subset("ordering on non-integers");
                    };
                    Ok(Value::Bool(match op {
                        BinOp::Lt => x < y,
                        BinOp::Le => x <= y,
                        BinOp::Gt => x > y,
                        _ => x >= y,
                    }))
                }
                op => {
                    let x = self.expr(ctx, locals, a)?;
                    let y = self.expr(ctx, locals, b)?;
                    self.arith_at(ctx, e.pos.0, *op, &x, &y)
                }
            },
            ExprKind::Convert(t, a) => {
                let v = self.expr(ctx, locals, a)?;
                convert(t, v)
            }
            ExprKind::Balance(a) => {
                let v = self.expr(ctx, locals, a)?;
                let addr = v.as_addr().ok_or(Halt::Fault(SimError::OutOfSubset("balance of non-address".into())))?;
                Ok(Value::Uint(self.st.balance(addr)))
            }
            ExprKind::Length(a) => match self.expr(ctx, locals, a)? {
                Value::Array(v) => Ok(Value::uint(v.len() as u64)),
                v => subset(format!("length of {v}")),
            },
            ExprKind::Send { target, amount } => {
                let to = self.addr(ctx, locals, target)?;
                let amount = self.uint(ctx, locals, amount)?;
                Ok(Value::Bool(self.st.transfer(ctx.this, to, amount)))
            }
            ExprKind::LowCall { target, value, data } => {
                let to = self.addr(ctx, locals, target)?;
                let amount = match value {
                    Some(v) => self.uint(ctx, locals, v)?,
                    None => U256::ZERO,
                };
                let data = self.expr(ctx, locals, data)?;
                self.low_call(ctx, to, amount, data)
            }
            ExprKind::Delegatecall { target, payload } => {
                let to = self.addr(ctx, locals, target)?;
                let payload = self.expr(ctx, locals, payload)?;
                self.delegate(ctx, to, payload)
            }
            ExprKind::EncodeWithSignature { sig, args } => {
                let args = args.iter().map(|a| self.expr(ctx, locals, a)).collect::<R<Vec<_>>>()?;
                Ok(Value::Bytes(Bytes::Call { sig: sig.clone(), args }))
            }
            ExprKind::Decode { data, types } => {
                let data = self.expr(ctx, locals, data)?;
                match data {
                    Value::Bytes(Bytes::Ret(vs)) if vs.len() == types.len() && vs.iter().zip(types).all(|(v, t)| v.has_type(t)) => {
                        Ok(pack(vs))
                    }
                    d => revert(format!("abi.decode of {d} as ({})", types.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(", "))),
                }
            }
            ExprKind::SafeMath { op, lhs, rhs } => {
                let x = self.uint(ctx, locals, lhs)?;
                let y = self.uint(ctx, locals, rhs)?;
                let r = match op {
                    SafeOp::Add => x.checked_add(y),
                    SafeOp::Sub => x.checked_sub(y),
                };
                match r {
                    Some(v) => Ok(Value::Uint(v)),
                    None => revert(format!("SafeMath.{} overflow", op.method())),
                }
            }
            ExprKind::InternalCall { name, args } => {
                let args = args.iter().map(|a| self.expr(ctx, locals, a)).collect::<R<Vec<_>>>()?;
                let Some(f) = ctx.code.unit.functions.iter().position(|f| f.kind == crate::frontend::FunctionKind::Function && f.name == *name) else {
                    return subset(format!("unknown internal function `{name}`"));
                };
                if self.depth >= self.limits.depth {
                    return Err(Halt::Fault(SimError::CallDepth(self.limits.depth)));
                }
                self.tick()?;
                let inner = Ctx { code: ctx.code.clone(), this: ctx.this, sender: ctx.sender, value: ctx.value, func: f };
                self.depth += 1;
                let r = self.run_function(&inner, args);
                self.depth -= 1;
                Ok(pack(r?))
            }
            ExprKind::ExternalCall { target, sig, value, args, .. } => {
                let to = self.addr(ctx, locals, target)?;
                let amount = match value {
                    Some(v) => self.uint(ctx, locals, v)?,
                    None => U256::ZERO,
                };
                let args = args.iter().map(|a| self.expr(ctx, locals, a)).collect::<R<Vec<_>>>()?;
                let Some(code) = self.st.code(to).cloned() else {
                    return revert(format!("call to non-contract {to}"));
                };
                let Some(f) = find_sig(&code, sig).filter(|_| !sig.is_empty()) else {
                    return revert(format!("{to} has no function `{sig}`"));
                };
                if check_args(&code.unit.functions[f], &args).is_err() {
                    return revert(format!("argument mismatch calling `{sig}`"));
                }
                let out = self.frame(FrameKind::Call, code, to, to, ctx.this, amount, Some(ctx.this), Some(f), args)?;
                if !out.success {
                    return revert(format!("external call to `{sig}` reverted"));
                }
                Ok(pack(out.returns))
            }
            ExprKind::NewArray { elem, len } => {
                let n = self.uint(ctx, locals, len)?;
                if n > U256::from(65_536u32) {
                    return revert("array allocation too large");
                }
                let z = Value::zero(elem).unwrap_or(Value::Bool(false));
                Ok(Value::Array(vec![z; n.as_usize()]))
            }
            ExprKind::Tuple(items) => {
                let mut vs = Vec::new();
                for it in items {
                    match it {
                        Some(x) => vs.push(self.expr(ctx, locals, x)?),
                        None => return subset("empty tuple component in an rvalue"),
                    }
                }
                Ok(Value::Tuple(vs))
            }
            ExprKind::Member(..) | ExprKind::Call(..) => subset("unresolved member or call"),
            ExprKind::Quant { .. } => subset("quantifier in code"),
        }
    }

    fn addr(&mut self, ctx: &Ctx, locals: &[Value], e: &Expr) -> R<Address> {
        match self.expr(ctx, locals, e)? {
            Value::Addr(a) => Ok(a),
            v => subset(format!("expected an address, got {v}")),
        }
    }

    fn uint(&mut self, ctx: &Ctx, locals: &[Value], e: &Expr) -> R<U256> {
        match self.expr(ctx, locals, e)? {
            Value::Uint(v) => Ok(v),
            v => subset(format!("expected a uint256, got {v}")),
        }
    }

    fn low_call(&mut self, ctx: &Ctx, to: Address, amount: U256, data: Value) -> R<Value> {
        let fail = || Value::Tuple(vec![Value::Bool(false), Value::Bytes(Bytes::empty())]);
        let Some(code) = self.st.code(to).cloned() else {
            let ok = self.st.transfer(ctx.this, to, amount);
            return Ok(Value::Tuple(vec![Value::Bool(ok), Value::Bytes(Bytes::empty())]));
        };
        let (f, args) = match data {
            Value::Bytes(Bytes::Call { sig, args }) => match find_sig(&code, &sig) {
                Some(f) if check_args(&code.unit.functions[f], &args).is_ok() => (Some(f), args),
                _ => (code.unit.functions.iter().position(|f| f.is_fallback()), Vec::new()),
            },
            _ => (code.unit.functions.iter().position(|f| f.is_fallback()), Vec::new()),
        };
        let Some(f) = f else {
            return Ok(fail());
        };
        let kind = if code.unit.functions[f].is_fallback() { FrameKind::Fallback } else { FrameKind::Call };
        let out = self.frame(kind, code, to, to, ctx.this, amount, Some(ctx.this), Some(f), args)?;
        if !out.success {
            return Ok(fail());
        }
        Ok(Value::Tuple(vec![Value::Bool(true), Value::Bytes(Bytes::Ret(out.returns))]))
    }

    fn delegate(&mut self, ctx: &Ctx, to: Address, payload: Value) -> R<Value> {
        let fail = || Value::Tuple(vec![Value::Bool(false), Value::Bytes(Bytes::empty())]);
        let Some(code) = self.st.code(to).cloned() else {
            return Ok(fail());
        };
        let (f, args) = match payload {
            Value::Bytes(Bytes::Call { sig, args }) => (find_sig(&code, &sig).filter(|_| !sig.is_empty()), args),
            _ => (code.unit.functions.iter().position(|f| f.is_fallback()), Vec::new()),
        };
        let Some(f) = f else {
            return Ok(fail());
        };
        if check_args(&code.unit.functions[f], &args).is_err() {
            return Ok(fail());
        }
        let out = self.frame(FrameKind::Delegate, code, to, ctx.this, ctx.sender, ctx.value, None, Some(f), args)?;
        if !out.success {
            return Ok(fail());
        }
        Ok(Value::Tuple(vec![Value::Bool(true), Value::Bytes(Bytes::Ret(out.returns))]))
    }

    fn place(&mut self, ctx: &Ctx, locals: &[Value], e: &Expr) -> R<Place> {
        match &e.kind {
            ExprKind::Ident { binding: Binding::Local(s), .. } => Ok(Place { root: Root::Local(*s), path: Vec::new() }),
            ExprKind::Ident { binding: Binding::State(ord), name } => {
                let Some(v) = ctx.code.unit.vars.iter().find(|v| v.ordinal == *ord) else {
                    return subset(format!("unknown state variable `{name}`"));
                };
                Ok(Place { root: Root::State(*ord, v.ty.clone()), path: Vec::new() })
            }
            ExprKind::Index(base, key) => {
                let mut p = self.place(ctx, locals, base)?;
                let k = self.expr(ctx, locals, key)?;
                p.path.push(k);
                Ok(p)
            }
            _ => subset("not a storage or local location"),
        }
    }

    fn load(&mut self, ctx: &Ctx, locals: &[Value], p: &Place) -> R<Value> {
        match &p.root {
            Root::Local(s) => {
                let mut v = &locals[*s];
                for k in &p.path {
                    let items = v.as_array().ok_or(Halt::Fault(SimError::OutOfSubset("indexing a non-array local".into())))?;
                    v = &items[local_index(k, items.len())?];
                }
                Ok(v.clone())
            }
            Root::State(ord, ty) => {
                let acc = self.st.account(ctx.this);
                match acc {
                    Some(a) => Ok(a.storage.read(*ord, ty, &p.path)?),
                    None => Ok(super::storage::Storage::default().read(*ord, ty, &p.path)?),
                }
            }
        }
    }

    fn store(&mut self, ctx: &Ctx, locals: &mut [Value], p: &Place, v: Value) -> R<()> {
        match &p.root {
            Root::Local(s) => {
                let mut slot = &mut locals[*s];
                for k in &p.path {
                    let Value::Array(items) = slot else {
                        return subset("indexing a non-array local");
                    };
                    let i = local_index(k, items.len())?;
                    slot = &mut items[i];
                }
                *slot = v;
                Ok(())
            }
            Root::State(ord, ty) => Ok(self.st.account_mut(ctx.this).storage.write(*ord, ty, &p.path, v)?),
        }
    }
}

fn local_index(k: &Value, len: usize) -> R<usize> {
    match k {
        Value::Uint(i) if *i < U256::from(len as u64) => Ok(i.as_usize()),
        _ => revert(format!("array index {k} out of bounds (length {len})")),
    }
}

enum Root {
    Local(usize),
    State(usize, TypeExpr),
}

struct Place {
    root: Root,
    path: Vec<Value>,
}

/// Explicit conversion `t(v)`.
fn convert(t: &TypeExpr, v: Value) -> R<Value> {
    let bad = |v: &Value| Halt::Fault(SimError::OutOfSubset(format!("conversion of {v} to {t}")));
    Ok(match (t, v) {
        (TypeExpr::Uint256, Value::Uint(x)) => Value::Uint(x),
        (TypeExpr::Uint256, Value::Addr(a)) => Value::Uint(a.word()),
        (TypeExpr::Address | TypeExpr::Contract(_), Value::Uint(x)) => Value::Addr(Address::from_word(x)),
        (TypeExpr::Address | TypeExpr::Contract(_), Value::Addr(a)) => Value::Addr(a),
        (TypeExpr::Bytes32, Value::Uint(x)) => Value::B32(x.to_be_bytes()),
        (TypeExpr::Bytes32, Value::B32(b)) => Value::B32(b),
        (TypeExpr::Bool, Value::Bool(b)) => Value::Bool(b),
        (_, v) => return Err(bad(&v)),
    })
}

//! Evaluation of specification expressions over simulator states.
//!
//! Integers are unbounded, so `__verifier_old_uint(x) - v` may be negative
//! and compares exactly. Quantifiers range over a finite domain built from
//! the keys present in storage, the call's arguments and sentinel addresses.

use std::collections::BTreeSet;

use ethnum::U256;
use num_bigint::{BigInt, Sign};
use num_traits::{Signed, Zero};

use crate::frontend::{BinOp, Quantifier, TypeExpr, VarDecl};
use crate::sim::{Address, Slot, Value, World};
use crate::spec::{SpecExpr, SpecKind};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    /// Out-of-bounds index or division by zero: the annotation has no value.
    #[error("{0}")]
    Undefined(String),
    #[error("cannot resolve `{0}` at runtime")]
    Scope(String),
}

pub struct EvalContext<'a> {
    pub pre: &'a World,
    pub post: &'a World,
    pub this: Address,
    pub vars: &'a [VarDecl],
    pub sender: Address,
    pub value: U256,
    pub params: &'a [Value],
    pub rets: &'a [Value],
}

#[derive(Debug, Clone)]
enum EV<'a> {
    Int(BigInt),
    Bool(bool),
    Addr(Address),
    B32([u8; 32]),
    Array(Vec<EV<'a>>),
    Map(Option<&'a Slot>, &'a TypeExpr),
    Opaque,
}

pub fn big(v: U256) -> BigInt {
    BigInt::from_bytes_be(Sign::Plus, &v.to_be_bytes())
}

fn modulus() -> BigInt {
    BigInt::from(1u8) << 256
}

fn to_u256(x: &BigInt) -> Option<U256> {
    if x.is_negative() || x.bits() > 256 {
        return None;
    }
    let (_, bytes) = x.to_bytes_be();
    let mut out = [0u8; 32];
    out[32 - bytes.len()..].copy_from_slice(&bytes);
    Some(U256::from_be_bytes(out))
}

fn wrap(x: &BigInt) -> U256 {
    let m = modulus();
    let r = ((x % &m) + &m) % &m;
    to_u256(&r).expect("reduced")
}

fn from_value<'a>(v: &Value) -> EV<'a> {
    match v {
        Value::Uint(x) => EV::Int(big(*x)),
        Value::Bool(b) => EV::Bool(*b),
        Value::Addr(a) => EV::Addr(*a),
        Value::B32(b) => EV::B32(*b),
        Value::Array(items) => EV::Array(items.iter().map(from_value).collect()),
        Value::Bytes(_) | Value::Tuple(_) => EV::Opaque,
    }
}

fn from_slot<'a>(s: Option<&'a Slot>, ty: &'a TypeExpr) -> EV<'a> {
    match ty {
        TypeExpr::Mapping(..) => EV::Map(s, ty),
        TypeExpr::Array(et) => match s {
            Some(Slot::Arr(items)) => EV::Array(items.iter().map(|x| from_slot(Some(x), et)).collect()),
            _ => EV::Array(Vec::new()),
        },
        t => match s.and_then(Slot::as_value) {
            Some(v) => from_value(v),
            None => from_value(&Value::zero(t).expect("scalar")),
        },
    }
}

/// Storage key for an evaluated index, if one can exist.
fn key_of(k: &EV<'_>) -> Option<Value> {
    Some(match k {
        EV::Int(x) => Value::Uint(to_u256(x)?),
        EV::Bool(b) => Value::Bool(*b),
        EV::Addr(a) => Value::Addr(*a),
        EV::B32(b) => Value::B32(*b),
        _ => return None,
    })
}

fn eq(a: &EV<'_>, b: &EV<'_>) -> bool {
    match (a, b) {
        (EV::Int(x), EV::Int(y)) => x == y,
        (EV::Bool(x), EV::Bool(y)) => x == y,
        (EV::Addr(x), EV::Addr(y)) => x == y,
        (EV::B32(x), EV::B32(y)) => x == y,
        (EV::Array(x), EV::Array(y)) => x.len() == y.len() && x.iter().zip(y).all(|(p, q)| eq(p, q)),
        _ => false,
    }
}

fn sum_slot(s: Option<&Slot>) -> BigInt {
    let mut total = BigInt::zero();
    if let Some(s) = s {
        for (_, v) in s.entries() {
            match v {
                Slot::Val(Value::Uint(x)) => total += big(*x),
                Slot::Map(_) => total += sum_slot(Some(v)),
                _ => {}
            }
        }
    }
    total
}

/// Finite quantifier domains for one evaluation.
#[derive(Debug, Default, Clone)]
pub struct Domain {
    pub addrs: BTreeSet<Address>,
    pub uints: BTreeSet<U256>,
    pub b32s: BTreeSet<[u8; 32]>,
}

impl Domain {
    fn add_value(&mut self, v: &Value, max_len: &mut usize) {
        match v {
            Value::Addr(a) => {
                self.addrs.insert(*a);
            }
            Value::Uint(x) => {
                self.uints.insert(*x);
            }
            Value::B32(b) => {
                self.b32s.insert(*b);
            }
            Value::Array(items) => {
                *max_len = (*max_len).max(items.len());
                for x in items {
                    self.add_value(x, max_len);
                }
            }
            _ => {}
        }
    }

    fn add_slot(&mut self, s: &Slot, max_len: &mut usize) {
        match s {
            Slot::Val(_) => {}
            Slot::Arr(items) => {
                *max_len = (*max_len).max(items.len());
                for x in items {
                    self.add_slot(x, max_len);
                }
            }
            Slot::Map(m) => {
                for (k, v) in m {
                    self.add_value(k, max_len);
                    self.add_slot(v, max_len);
                }
            }
        }
    }

    pub fn build(ctx: &EvalContext<'_>) -> Domain {
        let mut d = Domain::default();
        let mut max_len = 0usize;
        for w in [ctx.pre, ctx.post] {
            if let Some(acc) = w.accounts.get(&ctx.this) {
                for ord in acc.storage.ordinals() {
                    d.add_slot(acc.storage.slot(ord).expect("listed"), &mut max_len);
                }
            }
        }
        for v in ctx.params.iter().chain(ctx.rets) {
            d.add_value(v, &mut max_len);
        }
        d.addrs.extend([ctx.sender, Address::ZERO, ctx.this]);
        for k in 0..=(max_len as u64 + 1) {
            d.uints.insert(U256::from(k));
        }
        d.b32s.insert([0; 32]);
        d
    }

    fn values<'a>(&self, t: &TypeExpr) -> Vec<EV<'a>> {
        match t {
            TypeExpr::Address | TypeExpr::Contract(_) => self.addrs.iter().map(|a| EV::Addr(*a)).collect(),
            TypeExpr::Uint256 => self.uints.iter().map(|x| EV::Int(big(*x))).collect(),
            TypeExpr::Bool => vec![EV::Bool(false), EV::Bool(true)],
            TypeExpr::Bytes32 => self.b32s.iter().map(|b| EV::B32(*b)).collect(),
            _ => Vec::new(),
        }
    }
}

struct Evaluator<'a> {
    ctx: &'a EvalContext<'a>,
    domain: Domain,
    bound: Vec<EV<'a>>,
    old: bool,
}

/// Evaluates a boolean annotation.
pub fn eval_bool(e: &SpecExpr, ctx: &EvalContext<'_>) -> Result<bool, EvalError> {
    let mut ev = Evaluator { ctx, domain: Domain::build(ctx), bound: Vec::new(), old: false };
    match ev.eval(e)? {
        EV::Bool(b) => Ok(b),
        _ => Err(EvalError::Scope("non-boolean annotation".into())),
    }
}

impl<'a> Evaluator<'a> {
    fn world(&self) -> &'a World {
        if self.old {
            self.ctx.pre
        } else {
            self.ctx.post
        }
    }

    fn int(&mut self, e: &SpecExpr) -> Result<BigInt, EvalError> {
        match self.eval(e)? {
            EV::Int(x) => Ok(x),
            _ => Err(EvalError::Scope(format!("`{e}` is not an integer"))),
        }
    }

    fn boolean(&mut self, e: &SpecExpr) -> Result<bool, EvalError> {
        match self.eval(e)? {
            EV::Bool(b) => Ok(b),
            _ => Err(EvalError::Scope(format!("`{e}` is not a boolean"))),
        }
    }

    fn eval(&mut self, e: &SpecExpr) -> Result<EV<'a>, EvalError> {
        Ok(match &e.kind {
            SpecKind::Int(x) => EV::Int(x.clone()),
            SpecKind::Bool(b) => EV::Bool(*b),
            SpecKind::This => EV::Addr(self.ctx.this),
            SpecKind::MsgSender => EV::Addr(self.ctx.sender),
            SpecKind::MsgValue => EV::Int(big(self.ctx.value)),
            SpecKind::Param(i, n) => from_value(self.ctx.params.get(*i).ok_or_else(|| EvalError::Scope(n.clone()))?),
            SpecKind::Ret(i, n) => from_value(self.ctx.rets.get(*i).ok_or_else(|| EvalError::Scope(n.clone()))?),
            SpecKind::Bound(i, n) => self.bound.get(*i).cloned().ok_or_else(|| EvalError::Scope(n.clone()))?,
            SpecKind::Var(ord, n) => {
                let decl = self.ctx.vars.iter().find(|v| v.ordinal == *ord).ok_or_else(|| EvalError::Scope(n.clone()))?;
                let slot = self.world().accounts.get(&self.ctx.this).and_then(|a| a.storage.slot(*ord));
                from_slot(slot, &decl.ty)
            }
            SpecKind::Convert(t, a) => {
                let v = self.eval(a)?;
                match (t, v) {
                    (TypeExpr::Uint256, EV::Int(x)) => EV::Int(big(wrap(&x))),
                    (TypeExpr::Address, EV::Int(x)) => EV::Addr(Address::from_word(wrap(&x))),
                    (TypeExpr::Address, EV::Addr(a)) => EV::Addr(a),
                    (TypeExpr::Bytes32, EV::Int(x)) => EV::B32(wrap(&x).to_be_bytes()),
                    (_, v) => v,
                }
            }
            SpecKind::Index(b, k) => {
                let base = self.eval(b)?;
                let key = self.eval(k)?;
                match base {
                    EV::Map(slot, TypeExpr::Mapping(_, vt)) => {
                        let child = key_of(&key).and_then(|k| slot.and_then(|s| s.child(&k)));
                        from_slot(child, vt)
                    }
                    EV::Array(items) => {
                        let EV::Int(i) = key else { return Err(EvalError::Scope(format!("index of `{b}`"))) };
                        let len = items.len();
                        match to_u256(&i).filter(|i| *i < U256::from(len as u64)) {
                            Some(i) => items.into_iter().nth(i.as_usize()).expect("in bounds"),
                            None => return Err(EvalError::Undefined(format!("index {i} out of bounds of `{b}` (length {len})"))),
                        }
                    }
                    _ => return Err(EvalError::Scope(format!("cannot index `{b}`"))),
                }
            }
            SpecKind::Length(a) => match self.eval(a)? {
                EV::Array(items) => EV::Int(BigInt::from(items.len())),
                _ => return Err(EvalError::Scope(format!("length of `{a}`"))),
            },
            SpecKind::Balance(a) => match self.eval(a)? {
                EV::Addr(x) => EV::Int(big(self.world().accounts.get(&x).map_or(U256::ZERO, |acc| acc.balance))),
                _ => return Err(EvalError::Scope(format!("balance of `{a}`"))),
            },
            SpecKind::Old(a) => {
                let saved = self.old;
                self.old = true;
                let r = self.eval(a);
                self.old = saved;
                r?
            }
            SpecKind::Sum(a) => match self.eval(a)? {
                EV::Map(slot, _) => EV::Int(sum_slot(slot)),
                _ => return Err(EvalError::Scope(format!("sum of `{a}`"))),
            },
            SpecKind::Not(a) => EV::Bool(!self.boolean(a)?),
            SpecKind::Neg(a) => EV::Int(-self.int(a)?),
            SpecKind::Binary(op, a, b) => self.binary(*op, a, b)?,
            SpecKind::Quant { q, vars, body } => {
                let domains: Vec<Vec<EV<'a>>> = vars.iter().map(|(t, _)| self.domain.values(t)).collect();
                let want = *q == Quantifier::Exists;
                let r = self.quant(&domains, body, want)?;
                EV::Bool(r)
            }
        })
    }

    /// Forall: `want = false` searches for a counterexample; exists: `want = true` searches for a witness.
    fn quant(&mut self, domains: &[Vec<EV<'a>>], body: &SpecExpr, want: bool) -> Result<bool, EvalError> {
        let Some((first, rest)) = domains.split_first() else {
            return Ok(self.boolean(body)? == want);
        };
        for v in first {
            self.bound.push(v.clone());
            let r = self.quant(rest, body, want);
            self.bound.pop();
            if r? {
                return Ok(want);
            }
        }
        Ok(!want)
    }

    fn binary(&mut self, op: BinOp, a: &SpecExpr, b: &SpecExpr) -> Result<EV<'a>, EvalError> {
        Ok(match op {
            BinOp::And => EV::Bool(self.boolean(a)? && self.boolean(b)?),
            BinOp::Or => EV::Bool(self.boolean(a)? || self.boolean(b)?),
            BinOp::Eq | BinOp::Ne => {
                let x = self.eval(a)?;
                let y = self.eval(b)?;
                EV::Bool(eq(&x, &y) == (op == BinOp::Eq))
            }
            _ => {
                let x = self.int(a)?;
                let y = self.int(b)?;
                match op {
                    BinOp::Add => EV::Int(x + y),
                    BinOp::Sub => EV::Int(x - y),
                    BinOp::Mul => EV::Int(x * y),
                    BinOp::Div | BinOp::Mod => {
                        if y.is_zero() {
                            return Err(EvalError::Undefined(format!("division by zero in `{b}`")));
                        }
                        EV::Int(if op == BinOp::Div { x / y } else { x % y })
                    }
                    BinOp::Lt => EV::Bool(x < y),
                    BinOp::Le => EV::Bool(x <= y),
                    BinOp::Gt => EV::Bool(x > y),
                    _ => EV::Bool(x >= y),
                }
            }
        })
    }
}

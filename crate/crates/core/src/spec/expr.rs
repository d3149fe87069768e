//! Typed specification expressions.

use std::fmt;

use num_bigint::BigInt;

use crate::frontend::{BinOp, Expr, ExprKind, Param, Pos, Quantifier, TypeExpr, UnOp, VarDecl};

use super::SpecError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpecExpr {
    pub kind: SpecKind,
    pub ty: TypeExpr,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SpecKind {
    Int(BigInt),
    Bool(bool),
    This,
    MsgSender,
    MsgValue,
    Param(usize, String),
    Ret(usize, String),
    Var(usize, String),
    /// Quantified variable, by position in the enclosing binder stack.
    Bound(usize, String),
    Convert(TypeExpr, Box<SpecExpr>),
    Index(Box<SpecExpr>, Box<SpecExpr>),
    Length(Box<SpecExpr>),
    Balance(Box<SpecExpr>),
    /// `__verifier_old_uint` / `__verifier_old_bool`.
    Old(Box<SpecExpr>),
    Sum(Box<SpecExpr>),
    Not(Box<SpecExpr>),
    Neg(Box<SpecExpr>),
    Binary(BinOp, Box<SpecExpr>, Box<SpecExpr>),
    Quant { q: Quantifier, vars: Vec<(TypeExpr, String)>, body: Box<SpecExpr> },
}

impl SpecExpr {
    fn new(kind: SpecKind, ty: TypeExpr) -> Self {
        Self { kind, ty }
    }

    pub fn uses_old(&self) -> bool {
        let mut found = false;
        self.walk(&mut |e| found |= matches!(e.kind, SpecKind::Old(_)));
        found
    }

    /// Pre-order traversal.
    pub fn walk(&self, f: &mut dyn FnMut(&SpecExpr)) {
        f(self);
        match &self.kind {
            SpecKind::Convert(_, a)
            | SpecKind::Length(a)
            | SpecKind::Balance(a)
            | SpecKind::Old(a)
            | SpecKind::Sum(a)
            | SpecKind::Not(a)
            | SpecKind::Neg(a) => a.walk(f),
            SpecKind::Index(a, b) | SpecKind::Binary(_, a, b) => {
                a.walk(f);
                b.walk(f);
            }
            SpecKind::Quant { body, .. } => body.walk(f),
            _ => {}
        }
    }

    /// Renames parameters and returns positionally; names past the end of
    /// the lists, or empty names, are kept.
    pub fn rename(&self, params: &[String], rets: &[String]) -> SpecExpr {
        let kind = match &self.kind {
            SpecKind::Param(i, n) => SpecKind::Param(*i, pick(params, *i, n)),
            SpecKind::Ret(i, n) => SpecKind::Ret(*i, pick(rets, *i, n)),
            SpecKind::Convert(t, a) => SpecKind::Convert(t.clone(), Box::new(a.rename(params, rets))),
            SpecKind::Index(a, b) => SpecKind::Index(Box::new(a.rename(params, rets)), Box::new(b.rename(params, rets))),
            SpecKind::Length(a) => SpecKind::Length(Box::new(a.rename(params, rets))),
            SpecKind::Balance(a) => SpecKind::Balance(Box::new(a.rename(params, rets))),
            SpecKind::Old(a) => SpecKind::Old(Box::new(a.rename(params, rets))),
            SpecKind::Sum(a) => SpecKind::Sum(Box::new(a.rename(params, rets))),
            SpecKind::Not(a) => SpecKind::Not(Box::new(a.rename(params, rets))),
            SpecKind::Neg(a) => SpecKind::Neg(Box::new(a.rename(params, rets))),
            SpecKind::Binary(op, a, b) => SpecKind::Binary(*op, Box::new(a.rename(params, rets)), Box::new(b.rename(params, rets))),
            SpecKind::Quant { q, vars, body } => SpecKind::Quant { q: *q, vars: vars.clone(), body: Box::new(body.rename(params, rets)) },
            k => k.clone(),
        };
        SpecExpr { kind, ty: self.ty.clone() }
    }
}

fn pick(names: &[String], i: usize, fallback: &str) -> String {
    match names.get(i) {
        Some(n) if !n.is_empty() => n.clone(),
        _ => fallback.to_string(),
    }
}

/// Where an expression appears; controls which names are in scope.
pub struct Scope<'a> {
    pub vars: &'a [VarDecl],
    pub params: &'a [Param],
    pub returns: &'a [Param],
    /// `false` for invariants: no parameters, `msg` or `old`.
    pub in_function: bool,
}

struct Lowerer<'a> {
    scope: &'a Scope<'a>,
    bound: Vec<(String, TypeExpr)>,
    base: Pos,
}

/// Resolves and type-checks a parsed annotation expression. Node positions
/// are relative to the annotation text, which starts at `base`.
pub fn lower(e: &Expr, scope: &Scope<'_>, base: Pos) -> Result<SpecExpr, SpecError> {
    let mut l = Lowerer { scope, bound: Vec::new(), base };
    let out = l.expr(e)?;
    if out.ty != TypeExpr::Bool {
        return Err(SpecError::Type { pos: l.abs(e.pos.0), message: format!("annotation must be bool, found {}", out.ty) });
    }
    Ok(out)
}

fn norm(t: &TypeExpr) -> TypeExpr {
    match t {
        TypeExpr::Contract(_) => TypeExpr::Address,
        TypeExpr::Mapping(k, v) => TypeExpr::Mapping(Box::new(norm(k)), Box::new(norm(v))),
        TypeExpr::Array(e) => TypeExpr::Array(Box::new(norm(e))),
        t => t.clone(),
    }
}

impl<'a> Lowerer<'a> {
    fn abs(&self, p: Pos) -> Pos {
        if p.line == 1 {
            Pos { line: self.base.line, col: p.col + self.base.col - 1 }
        } else {
            Pos { line: p.line + self.base.line - 1, col: p.col }
        }
    }

    fn scope_err<T>(&self, pos: Pos, message: String) -> Result<T, SpecError> {
        Err(SpecError::Scope { pos, message })
    }

    fn type_err<T>(&self, pos: Pos, message: String) -> Result<T, SpecError> {
        Err(SpecError::Type { pos, message })
    }

    fn expect(&self, e: &SpecExpr, want: &TypeExpr, pos: Pos, what: &str) -> Result<(), SpecError> {
        if e.ty != *want {
            return self.type_err(pos, format!("{what}: expected {want}, found {}", e.ty));
        }
        Ok(())
    }

    fn expr(&mut self, e: &Expr) -> Result<SpecExpr, SpecError> {
        let pos = self.abs(e.pos.0);
        match &e.kind {
            ExprKind::Number { value, .. } => {
                Ok(SpecExpr::new(SpecKind::Int(BigInt::from_bytes_be(num_bigint::Sign::Plus, &value.to_be_bytes())), TypeExpr::Uint256))
            }
            ExprKind::Bool(b) => Ok(SpecExpr::new(SpecKind::Bool(*b), TypeExpr::Bool)),
            ExprKind::This => Ok(SpecExpr::new(SpecKind::This, TypeExpr::Address)),
            ExprKind::MsgSender | ExprKind::MsgValue => self.msg(matches!(e.kind, ExprKind::MsgSender), pos),
            ExprKind::Ident { name, .. } => self.ident(name, pos),
            ExprKind::Member(base, m) => {
                if let ExprKind::Ident { name, .. } = &base.kind {
                    if name == "msg" && !self.bound.iter().any(|(n, _)| n == "msg") {
                        return match m.as_str() {
                            "sender" => self.msg(true, pos),
                            "value" => self.msg(false, pos),
                            _ => self.scope_err(pos, format!("`msg.{m}` is not available in annotations")),
                        };
                    }
                }
                let b = self.expr(base)?;
                match (m.as_str(), &b.ty) {
                    ("length", TypeExpr::Array(_)) => Ok(SpecExpr::new(SpecKind::Length(Box::new(b)), TypeExpr::Uint256)),
                    ("balance", TypeExpr::Address) => Ok(SpecExpr::new(SpecKind::Balance(Box::new(b)), TypeExpr::Uint256)),
                    _ => self.type_err(pos, format!("no member `{m}` on {}", b.ty)),
                }
            }
            ExprKind::Balance(b) => {
                let b = self.expr(b)?;
                self.expect(&b, &TypeExpr::Address, pos, "`.balance`")?;
                Ok(SpecExpr::new(SpecKind::Balance(Box::new(b)), TypeExpr::Uint256))
            }
            ExprKind::Length(b) => {
                let b = self.expr(b)?;
                if !matches!(b.ty, TypeExpr::Array(_)) {
                    return self.type_err(pos, format!("`.length` on {}", b.ty));
                }
                Ok(SpecExpr::new(SpecKind::Length(Box::new(b)), TypeExpr::Uint256))
            }
            ExprKind::Call(callee, args) => {
                let ExprKind::Ident { name, .. } = &callee.kind else {
                    return Err(SpecError::Syntax { pos, message: "calls are not allowed in annotations".into() });
                };
                self.builtin(name, args, pos)
            }
            ExprKind::Index(b, k) => {
                let b = self.expr(b)?;
                let k = self.expr(k)?;
                match b.ty.clone() {
                    TypeExpr::Mapping(kt, vt) => {
                        self.expect(&k, &kt, pos, "mapping key")?;
                        Ok(SpecExpr::new(SpecKind::Index(Box::new(b), Box::new(k)), *vt))
                    }
                    TypeExpr::Array(et) => {
                        self.expect(&k, &TypeExpr::Uint256, pos, "array index")?;
                        Ok(SpecExpr::new(SpecKind::Index(Box::new(b), Box::new(k)), *et))
                    }
                    t => self.type_err(pos, format!("cannot index {t}")),
                }
            }
            ExprKind::Unary(UnOp::Not, a) => {
                let a = self.expr(a)?;
                self.expect(&a, &TypeExpr::Bool, pos, "`!`")?;
                Ok(SpecExpr::new(SpecKind::Not(Box::new(a)), TypeExpr::Bool))
            }
            ExprKind::Unary(UnOp::Neg, a) => {
                let a = self.expr(a)?;
                self.expect(&a, &TypeExpr::Uint256, pos, "unary `-`")?;
                Ok(SpecExpr::new(SpecKind::Neg(Box::new(a)), TypeExpr::Uint256))
            }
            ExprKind::Binary(op, a, b) => {
                let a = self.expr(a)?;
                let b = self.expr(b)?;
                let ty = if op.is_arith() {
                    self.expect(&a, &TypeExpr::Uint256, pos, op.token())?;
                    self.expect(&b, &TypeExpr::Uint256, pos, op.token())?;
                    TypeExpr::Uint256
                } else if op.is_ordering() {
                    self.expect(&a, &TypeExpr::Uint256, pos, op.token())?;
                    self.expect(&b, &TypeExpr::Uint256, pos, op.token())?;
                    TypeExpr::Bool
                } else if matches!(op, BinOp::And | BinOp::Or) {
                    self.expect(&a, &TypeExpr::Bool, pos, op.token())?;
                    self.expect(&b, &TypeExpr::Bool, pos, op.token())?;
                    TypeExpr::Bool
                } else {
                    if a.ty != b.ty || !a.ty.is_elementary() {
                        return self.type_err(pos, format!("cannot compare {} with {}", a.ty, b.ty));
                    }
                    TypeExpr::Bool
                };
                Ok(SpecExpr::new(SpecKind::Binary(*op, Box::new(a), Box::new(b)), ty))
            }
            ExprKind::Convert(t, a) => {
                let t = norm(t);
                let a = self.expr(a)?;
                let ok = match &t {
                    TypeExpr::Address => a.ty == TypeExpr::Address || a.ty == TypeExpr::Uint256,
                    TypeExpr::Uint256 => a.ty == TypeExpr::Uint256,
                    TypeExpr::Bytes32 => a.ty == TypeExpr::Uint256 || a.ty == TypeExpr::Bytes32,
                    TypeExpr::Bool => a.ty == TypeExpr::Bool,
                    _ => false,
                };
                if !ok {
                    return self.type_err(pos, format!("cannot convert {} to {t}", a.ty));
                }
                Ok(SpecExpr::new(SpecKind::Convert(t.clone(), Box::new(a)), t))
            }
            ExprKind::Quant { q, vars, body } => {
                let depth = self.bound.len();
                let mut vs = Vec::new();
                for (t, n) in vars {
                    let t = norm(t);
                    if !t.is_elementary() {
                        return self.type_err(pos, format!("cannot quantify over {t}"));
                    }
                    self.bound.push((n.clone(), t.clone()));
                    vs.push((t, n.clone()));
                }
                let b = self.expr(body);
                self.bound.truncate(depth);
                let b = b?;
                self.expect(&b, &TypeExpr::Bool, pos, "quantifier body")?;
                Ok(SpecExpr::new(SpecKind::Quant { q: *q, vars: vs, body: Box::new(b) }, TypeExpr::Bool))
            }
            ExprKind::Str(_) => Err(SpecError::Syntax { pos, message: "string literals are not allowed in annotations".into() }),
            ExprKind::Tuple(_) => Err(SpecError::Syntax { pos, message: "tuples are not allowed in annotations".into() }),
            _ => Err(SpecError::Syntax { pos, message: "side-effecting expressions are not allowed in annotations".into() }),
        }
    }

    fn msg(&self, sender: bool, pos: Pos) -> Result<SpecExpr, SpecError> {
        if !self.scope.in_function {
            return self.scope_err(pos, "`msg` is not in scope in an invariant".into());
        }
        Ok(if sender {
            SpecExpr::new(SpecKind::MsgSender, TypeExpr::Address)
        } else {
            SpecExpr::new(SpecKind::MsgValue, TypeExpr::Uint256)
        })
    }

    fn ident(&self, name: &str, pos: Pos) -> Result<SpecExpr, SpecError> {
        if let Some(i) = self.bound.iter().rposition(|(n, _)| n == name) {
            return Ok(SpecExpr::new(SpecKind::Bound(i, name.into()), self.bound[i].1.clone()));
        }
        if self.scope.in_function {
            if let Some(i) = self.scope.params.iter().position(|p| p.name == name) {
                return Ok(SpecExpr::new(SpecKind::Param(i, name.into()), norm(&self.scope.params[i].ty)));
            }
            if let Some(i) = self.scope.returns.iter().position(|p| p.name == name) {
                return Ok(SpecExpr::new(SpecKind::Ret(i, name.into()), norm(&self.scope.returns[i].ty)));
            }
        }
        if let Some(v) = self.scope.vars.iter().find(|v| v.name == name) {
            return Ok(SpecExpr::new(SpecKind::Var(v.ordinal, name.into()), norm(&v.ty)));
        }
        let hint = if self.scope.in_function { "" } else { " (invariants see only member variables)" };
        self.scope_err(pos, format!("unresolved identifier `{name}`{hint}"))
    }

    fn builtin(&mut self, name: &str, args: &[Expr], pos: Pos) -> Result<SpecExpr, SpecError> {
        let one = |args: &[Expr]| -> Result<(), SpecError> {
            if args.len() != 1 {
                return Err(SpecError::Syntax { pos, message: format!("`{name}` takes one argument") });
            }
            Ok(())
        };
        match name {
            "__verifier_old_uint" | "__verifier_old_bool" => {
                one(args)?;
                if !self.scope.in_function {
                    return Err(SpecError::Placement { pos, message: format!("`{name}` may only appear in postconditions") });
                }
                let a = self.expr(&args[0])?;
                let want = if name.ends_with("uint") { TypeExpr::Uint256 } else { TypeExpr::Bool };
                self.expect(&a, &want, pos, name)?;
                Ok(SpecExpr::new(SpecKind::Old(Box::new(a)), want))
            }
            "__verifier_sum_uint" => {
                one(args)?;
                let a = self.expr(&args[0])?;
                match &a.ty {
                    TypeExpr::Mapping(_, v) if **v == TypeExpr::Uint256 => Ok(SpecExpr::new(SpecKind::Sum(Box::new(a)), TypeExpr::Uint256)),
                    t => self.type_err(pos, format!("`{name}` expects a mapping to uint256, found {t}")),
                }
            }
            _ => Err(SpecError::Syntax { pos, message: format!("call to `{name}` is not allowed in annotations") }),
        }
    }
}

fn prec(e: &SpecExpr) -> u8 {
    match &e.kind {
        SpecKind::Binary(op, ..) => op.precedence(),
        SpecKind::Not(_) | SpecKind::Neg(_) => 7,
        SpecKind::Quant { .. } => 0,
        _ => 8,
    }
}

fn wrap(e: &SpecExpr, min: u8) -> String {
    if prec(e) < min {
        format!("({e})")
    } else {
        e.to_string()
    }
}

/// Source form with minimal parentheses and single spaces around binary operators.
impl fmt::Display for SpecExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            SpecKind::Int(v) => write!(f, "{v}"),
            SpecKind::Bool(b) => write!(f, "{b}"),
            SpecKind::This => f.write_str("this"),
            SpecKind::MsgSender => f.write_str("msg.sender"),
            SpecKind::MsgValue => f.write_str("msg.value"),
            SpecKind::Param(_, n) | SpecKind::Ret(_, n) | SpecKind::Var(_, n) | SpecKind::Bound(_, n) => f.write_str(n),
            SpecKind::Convert(t, a) => write!(f, "{t}({a})"),
            SpecKind::Index(a, b) => write!(f, "{}[{b}]", wrap(a, 8)),
            SpecKind::Length(a) => write!(f, "{}.length", wrap(a, 8)),
            SpecKind::Balance(a) => write!(f, "{}.balance", wrap(a, 8)),
            SpecKind::Old(a) => {
                let which = if self.ty == TypeExpr::Bool { "bool" } else { "uint" };
                write!(f, "__verifier_old_{which}({a})")
            }
            SpecKind::Sum(a) => write!(f, "__verifier_sum_uint({a})"),
            SpecKind::Not(a) => write!(f, "!{}", wrap(a, 7)),
            SpecKind::Neg(a) => write!(f, "-{}", wrap(a, 7)),
            SpecKind::Binary(op, a, b) => {
                let p = op.precedence();
                write!(f, "{} {} {}", wrap(a, p), op.token(), wrap(b, p + 1))
            }
            SpecKind::Quant { q, vars, body } => {
                let kw = match q {
                    Quantifier::Forall => "forall",
                    Quantifier::Exists => "exists",
                };
                let vs: Vec<String> = vars.iter().map(|(t, n)| format!("{t} {n}")).collect();
                write!(f, "{kw} ({}) {body}", vs.join(", "))
            }
        }
    }
}

//! Name resolution and light type checking.
//!
//! Rewrites generic `Member`/`Call` nodes into their resolved forms, binds
//! identifiers to frame slots or state ordinals and records a [`Ty`] on every
//! expression.

use std::collections::{BTreeMap, HashMap};

use super::ast::*;
use super::error::{FrontendError, Pos};

/// Externally visible surface of a contract type.
#[derive(Debug, Clone)]
pub struct ContractInterface {
    pub name: String,
    pub functions: Vec<InterfaceFn>,
}

#[derive(Debug, Clone)]
pub struct InterfaceFn {
    pub name: String,
    pub params: Vec<TypeExpr>,
    pub returns: Vec<TypeExpr>,
}

impl InterfaceFn {
    pub fn signature(&self) -> String {
        signature(&self.name, self.params.iter())
    }
}

impl ContractInterface {
    pub fn of(unit: &ContractUnit) -> Self {
        Self {
            name: unit.name.clone(),
            functions: unit
                .dispatchable()
                .map(|f| InterfaceFn {
                    name: f.name.clone(),
                    params: f.params.iter().map(|p| p.ty.clone()).collect(),
                    returns: f.returns.iter().map(|p| p.ty.clone()).collect(),
                })
                .collect(),
        }
    }

    /// The on-chain registry interface, always in scope.
    pub fn registry() -> Self {
        Self {
            name: "Registry".into(),
            functions: vec![
                InterfaceFn {
                    name: "new_mapping".into(),
                    params: vec![TypeExpr::Address, TypeExpr::Bytes32],
                    returns: vec![],
                },
                InterfaceFn { name: "get_spec".into(), params: vec![TypeExpr::Address], returns: vec![TypeExpr::Bytes32] },
            ],
        }
    }
}

/// Resolves every contract of a source unit in place.
pub fn check_source(unit: &mut SourceUnit) -> Result<(), Vec<FrontendError>> {
    let mut ifaces: BTreeMap<String, ContractInterface> = BTreeMap::new();
    ifaces.insert("Registry".into(), ContractInterface::registry());
    for c in &unit.contracts {
        ifaces.insert(c.name.clone(), ContractInterface::of(c));
    }
    let mut errors = Vec::new();
    for c in &mut unit.contracts {
        check_contract(c, &ifaces, &mut errors);
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors)
    }
}

pub fn check_contract(c: &mut ContractUnit, ifaces: &BTreeMap<String, ContractInterface>, errors: &mut Vec<FrontendError>) {
    let mut seen = HashMap::new();
    for v in &c.vars {
        if seen.insert(v.name.clone(), ()).is_some() {
            errors.push(FrontendError::ty(v.pos.0, format!("duplicate state variable `{}`", v.name)));
        }
        check_type_known(&v.ty, ifaces, v.pos.0, errors);
    }
    let mut fnames = HashMap::new();
    let mut ctors = 0;
    let mut fallbacks = 0;
    for f in &c.functions {
        match f.kind {
            FunctionKind::Constructor => ctors += 1,
            FunctionKind::Fallback => fallbacks += 1,
            FunctionKind::Function => {
                if fnames.insert(f.name.clone(), ()).is_some() {
                    errors.push(FrontendError::ty(f.pos.0, format!("function `{}` declared twice (overloading is not supported)", f.name)));
                }
            }
        }
        for p in f.params.iter().chain(&f.returns) {
            check_type_known(&p.ty, ifaces, f.pos.0, errors);
        }
    }
    if ctors > 1 {
        errors.push(FrontendError::ty(c.pos.0, "more than one constructor"));
    }
    if fallbacks > 1 {
        errors.push(FrontendError::ty(c.pos.0, "more than one fallback function"));
    }
    let mut enames = HashMap::new();
    for e in &c.events {
        if enames.insert(e.name.clone(), ()).is_some() {
            errors.push(FrontendError::ty(e.pos.0, format!("duplicate event `{}`", e.name)));
        }
    }
    let shape = Shape {
        name: c.name.clone(),
        vars: c.vars.iter().map(|v| (v.name.clone(), v.ty.clone())).collect(),
        functions: c
            .functions
            .iter()
            .filter(|f| f.kind == FunctionKind::Function)
            .map(|f| {
                (
                    f.name.clone(),
                    (f.params.iter().map(|p| p.ty.clone()).collect(), f.returns.iter().map(|p| p.ty.clone()).collect()),
                )
            })
            .collect(),
        events: c.events.iter().map(|e| (e.name.clone(), e.params.iter().map(|p| p.ty.clone()).collect())).collect(),
    };
    for f in &mut c.functions {
        let mut cx = FnCx { shape: &shape, ifaces, scopes: vec![Vec::new()], slots: Vec::new(), returns: Vec::new(), errors };
        for p in &f.params {
            cx.declare_param(&p.name, &p.ty, f.pos.0);
        }
        for p in &f.returns {
            cx.declare_param(&p.name, &p.ty, f.pos.0);
        }
        cx.returns = f.returns.iter().map(|p| p.ty.clone()).collect();
        if let Some(body) = &mut f.body {
            cx.block(body);
        }
        f.frame_size = cx.slots.len();
    }
}

fn check_type_known(t: &TypeExpr, ifaces: &BTreeMap<String, ContractInterface>, pos: Pos, errors: &mut Vec<FrontendError>) {
    match t {
        TypeExpr::Contract(n) if !ifaces.contains_key(n) => {
            errors.push(FrontendError::ty(pos, format!("unknown type `{n}`")));
        }
        TypeExpr::Mapping(k, v) => {
            check_type_known(k, ifaces, pos, errors);
            check_type_known(v, ifaces, pos, errors);
        }
        TypeExpr::Array(e) => check_type_known(e, ifaces, pos, errors),
        _ => {}
    }
}

struct Shape {
    name: String,
    vars: Vec<(String, TypeExpr)>,
    functions: HashMap<String, (Vec<TypeExpr>, Vec<TypeExpr>)>,
    events: HashMap<String, Vec<TypeExpr>>,
}

struct FnCx<'a> {
    shape: &'a Shape,
    ifaces: &'a BTreeMap<String, ContractInterface>,
    scopes: Vec<Vec<(String, usize)>>,
    slots: Vec<TypeExpr>,
    returns: Vec<TypeExpr>,
    errors: &'a mut Vec<FrontendError>,
}

fn uint() -> Ty {
    Ty::Value(TypeExpr::Uint256)
}

fn tuple_or_single(mut v: Vec<TypeExpr>) -> Ty {
    match v.len() {
        0 => Ty::Void,
        1 => Ty::Value(v.pop().unwrap()),
        _ => Ty::Tuple(v),
    }
}

/// Can a value of type `got` be stored where `want` is expected?
pub fn assignable(want: &TypeExpr, got: &Ty) -> bool {
    match got {
        Ty::Literal => *want == TypeExpr::Uint256,
        Ty::Value(g) => g == want || (matches!(g, TypeExpr::Contract(_)) && *want == TypeExpr::Address),
        _ => false,
    }
}

impl<'a> FnCx<'a> {
    fn err(&mut self, pos: Pos, msg: impl Into<String>) {
        self.errors.push(FrontendError::ty(pos, msg));
    }

    fn lookup_local(&self, name: &str) -> Option<usize> {
        self.scopes.iter().rev().flat_map(|s| s.iter().rev()).find(|(n, _)| n == name).map(|(_, s)| *s)
    }

    fn declare_param(&mut self, name: &str, ty: &TypeExpr, pos: Pos) {
        let slot = self.slots.len();
        self.slots.push(ty.clone());
        if name.is_empty() {
            return;
        }
        if self.lookup_local(name).is_some() {
            self.err(pos, format!("parameter `{name}` declared twice"));
        }
        self.scopes[0].push((name.to_string(), slot));
    }

    /// Declares a local. A redeclaration with the same type binds to the
    /// existing variable; a different type is an error.
    fn declare_local(&mut self, decl: &mut LocalDecl, pos: Pos) {
        if !matches!(decl.ty, TypeExpr::Mapping(..)) {
            let mut errs = Vec::new();
            check_type_known(&decl.ty, self.ifaces, pos, &mut errs);
            self.errors.extend(errs);
        } else {
            self.err(pos, "local mappings are not supported");
        }
        if let Some(slot) = self.lookup_local(&decl.name) {
            if self.slots[slot] != decl.ty {
                self.err(pos, format!("`{}` redeclared with a different type", decl.name));
            }
            decl.slot = slot;
            return;
        }
        let slot = self.slots.len();
        self.slots.push(decl.ty.clone());
        self.scopes.last_mut().unwrap().push((decl.name.clone(), slot));
        decl.slot = slot;
    }

    fn block(&mut self, b: &mut Block) {
        self.scopes.push(Vec::new());
        for s in b.iter_mut() {
            self.stmt(s);
        }
        self.scopes.pop();
    }

    fn stmt(&mut self, s: &mut Stmt) {
        let pos = s.pos.0;
        match &mut s.kind {
            StmtKind::Block(b) => self.block(b),
            StmtKind::VarDecl { decl, init } => {
                if let Some(e) = init {
                    let t = self.expr(e);
                    if !assignable(&decl.ty, &t) {
                        self.err(pos, format!("cannot initialize `{}` of type {} with {}", decl.name, decl.ty, show(&t)));
                    }
                }
                self.declare_local(decl, pos);
            }
            StmtKind::TupleDecl { decls, init } => {
                let t = self.expr(init);
                let comps = match &t {
                    Ty::Tuple(v) => v.clone(),
                    Ty::Value(v) => vec![v.clone()],
                    _ => Vec::new(),
                };
                if comps.len() != decls.len() {
                    self.err(pos, format!("tuple of {} components assigned from {}", decls.len(), show(&t)));
                } else {
                    for (d, c) in decls.iter_mut().zip(comps) {
                        if let Some(d) = d {
                            if !assignable(&d.ty, &Ty::Value(c.clone())) {
                                self.err(pos, format!("cannot bind `{}` of type {} to {}", d.name, d.ty, c));
                            }
                            self.declare_local(d, pos);
                        }
                    }
                }
            }
            StmtKind::Assign { target, op, value } => {
                let vt = self.expr(value);
                if let ExprKind::Tuple(items) = &mut target.kind {
                    if *op != AssignOp::Set {
                        self.err(pos, "compound assignment to a tuple");
                    }
                    let comps = match &vt {
                        Ty::Tuple(v) => v.clone(),
                        _ => Vec::new(),
                    };
                    if comps.len() != items.len() {
                        self.err(pos, format!("tuple of {} components assigned from {}", items.len(), show(&vt)));
                        return;
                    }
                    let mut tys = Vec::new();
                    for (it, c) in items.iter_mut().zip(comps) {
                        if let Some(it) = it {
                            let t = self.place(it);
                            if let Some(t) = &t {
                                if !assignable(t, &Ty::Value(c.clone())) {
                                    self.err(pos, format!("cannot assign {c} to {t}"));
                                }
                            }
                            tys.push(t.unwrap_or(c));
                        } else {
                            tys.push(c);
                        }
                    }
                    target.ty = Ty::Tuple(tys);
                    return;
                }
                let Some(tt) = self.place(target) else { return };
                if *op == AssignOp::Set {
                    if !assignable(&tt, &vt) {
                        self.err(pos, format!("cannot assign {} to {}", show(&vt), tt));
                    }
                } else if tt != TypeExpr::Uint256 || !assignable(&TypeExpr::Uint256, &vt) {
                    self.err(pos, format!("`{}` needs uint256 operands", op.token()));
                }
            }
            StmtKind::IncDec { target, .. } => {
                if let Some(t) = self.place(target) {
                    if t != TypeExpr::Uint256 {
                        self.err(pos, "increment needs a uint256 operand");
                    }
                }
            }
            StmtKind::If { cond, then, els } => {
                self.expect_bool(cond);
                self.scoped(then);
                if let Some(e) = els {
                    self.scoped(e);
                }
            }
            StmtKind::For { init, cond, step, body } => {
                self.scopes.push(Vec::new());
                if let Some(i) = init {
                    self.stmt(i);
                }
                if let Some(c) = cond {
                    self.expect_bool(c);
                }
                if let Some(st) = step {
                    self.stmt(st);
                }
                self.scoped(body);
                self.scopes.pop();
            }
            StmtKind::Require { cond, msg } => {
                self.expect_bool(cond);
                if let Some(m) = msg {
                    if !matches!(m.kind, ExprKind::Str(_)) {
                        self.err(m.pos.0, "require message must be a string literal");
                    }
                    m.ty = Ty::Value(TypeExpr::Bytes);
                }
            }
            StmtKind::Emit { event, args } => {
                let Some(params) = self.shape.events.get(event.as_str()).cloned() else {
                    self.err(pos, format!("unknown event `{event}`"));
                    for a in args.iter_mut() {
                        self.expr(a);
                    }
                    return;
                };
                self.call_args(pos, event, &params, args);
            }
            StmtKind::Return(e) => {
                let want = self.returns.clone();
                match e {
                    None => {}
                    Some(e) => {
                        let t = self.expr(e);
                        let ok = match (&t, want.len()) {
                            (_, 0) => false,
                            (t, 1) => assignable(&want[0], t),
                            (Ty::Tuple(v), n) if v.len() == n => {
                                v.iter().zip(&want).all(|(g, w)| assignable(w, &Ty::Value(g.clone())))
                            }
                            _ => false,
                        };
                        if !ok {
                            self.err(pos, format!("return of {} from a function returning ({})", show(&t), join_types(&want)));
                        }
                    }
                }
            }
            StmtKind::Expr(e) => {
                self.expr(e);
                if !matches!(
                    e.kind,
                    ExprKind::InternalCall { .. } | ExprKind::ExternalCall { .. } | ExprKind::Send { .. } | ExprKind::LowCall { .. } | ExprKind::Delegatecall { .. }
                ) {
                    self.err(pos, "expression statement has no effect");
                }
            }
        }
    }

    fn scoped(&mut self, s: &mut Stmt) {
        self.scopes.push(Vec::new());
        self.stmt(s);
        self.scopes.pop();
    }

    fn expect_bool(&mut self, e: &mut Expr) {
        let t = self.expr(e);
        if t != Ty::Value(TypeExpr::Bool) {
            self.err(e.pos.0, format!("expected bool, found {}", show(&t)));
        }
    }

    /// Checks an assignable location and returns its type.
    fn place(&mut self, e: &mut Expr) -> Option<TypeExpr> {
        let t = self.expr(e);
        let ok = match &e.kind {
            ExprKind::Ident { .. } => true,
            ExprKind::Index(base, _) => is_place_root(base),
            _ => false,
        };
        if !ok {
            self.err(e.pos.0, "expression is not assignable");
            return None;
        }
        match t {
            Ty::Value(TypeExpr::Mapping(..)) => {
                self.err(e.pos.0, "mappings cannot be assigned as a whole");
                None
            }
            Ty::Value(t) => Some(t),
            _ => None,
        }
    }

    fn call_args(&mut self, pos: Pos, what: &str, params: &[TypeExpr], args: &mut [Expr]) {
        if params.len() != args.len() {
            self.err(pos, format!("`{what}` takes {} argument(s), {} given", params.len(), args.len()));
        }
        for (k, a) in args.iter_mut().enumerate() {
            let t = self.expr(a);
            if let Some(p) = params.get(k) {
                if !assignable(p, &t) {
                    self.err(a.pos.0, format!("argument {} of `{what}`: expected {p}, found {}", k + 1, show(&t)));
                }
            }
        }
    }

    fn expr(&mut self, e: &mut Expr) -> Ty {
        let t = self.expr_inner(e);
        e.ty = t.clone();
        t
    }

    fn expr_inner(&mut self, e: &mut Expr) -> Ty {
        let pos = e.pos.0;
        let kind = std::mem::replace(&mut e.kind, ExprKind::Bool(false));
        let (kind, ty) = self.resolve(kind, pos);
        e.kind = kind;
        ty
    }

    fn resolve(&mut self, kind: ExprKind, pos: Pos) -> (ExprKind, Ty) {
        match kind {
            ExprKind::Number { .. } => (kind, Ty::Literal),
            ExprKind::Bool(_) => (kind, Ty::Value(TypeExpr::Bool)),
            ExprKind::Str(_) => (kind, Ty::Value(TypeExpr::Bytes)),
            ExprKind::MsgSender => (kind, Ty::Value(TypeExpr::Address)),
            ExprKind::MsgValue => (kind, uint()),
            ExprKind::This => (kind, Ty::Value(TypeExpr::Contract(self.shape.name.clone()))),
            ExprKind::Ident { name, .. } => {
                if let Some(slot) = self.lookup_local(&name) {
                    let t = self.slots[slot].clone();
                    return (ExprKind::Ident { name, binding: Binding::Local(slot) }, Ty::Value(t));
                }
                if let Some(ord) = self.shape.vars.iter().position(|(n, _)| *n == name) {
                    let t = self.shape.vars[ord].1.clone();
                    return (ExprKind::Ident { name, binding: Binding::State(ord) }, Ty::Value(t));
                }
                if name == "msg" {
                    self.err(pos, "`msg` must be followed by `.sender` or `.value`");
                } else if name.starts_with("__verifier_") {
                    self.err(pos, format!("`{name}` is only valid in annotations"));
                } else {
                    self.err(pos, format!("unknown identifier `{name}`"));
                }
                (ExprKind::Ident { name, binding: Binding::Unresolved }, Ty::Unresolved)
            }
            ExprKind::Member(base, name) => self.member(*base, name, pos),
            ExprKind::Call(callee, args) => self.call(*callee, args, pos),
            ExprKind::Index(mut base, mut ix) => {
                let bt = self.expr(&mut base);
                let it = self.expr(&mut ix);
                let out = match bt {
                    Ty::Value(TypeExpr::Mapping(k, v)) => {
                        if !assignable(&k, &it) {
                            self.err(pos, format!("mapping key: expected {k}, found {}", show(&it)));
                        }
                        Ty::Value(*v)
                    }
                    Ty::Value(TypeExpr::Array(el)) => {
                        if !assignable(&TypeExpr::Uint256, &it) {
                            self.err(pos, format!("array index must be uint256, found {}", show(&it)));
                        }
                        Ty::Value(*el)
                    }
                    Ty::Unresolved => Ty::Unresolved,
                    other => {
                        self.err(pos, format!("cannot index {}", show(&other)));
                        Ty::Unresolved
                    }
                };
                (ExprKind::Index(base, ix), out)
            }
            ExprKind::Unary(UnOp::Not, mut inner) => {
                self.expect_bool(&mut inner);
                (ExprKind::Unary(UnOp::Not, inner), Ty::Value(TypeExpr::Bool))
            }
            ExprKind::Unary(UnOp::Neg, mut inner) => {
                self.expr(&mut inner);
                self.err(pos, "unary minus is only supported as `uint(-N)`");
                (ExprKind::Unary(UnOp::Neg, inner), uint())
            }
            ExprKind::Binary(op, mut l, mut r) => {
                let lt = self.expr(&mut l);
                let rt = self.expr(&mut r);
                let ty = self.binary(op, &lt, &rt, pos);
                (ExprKind::Binary(op, l, r), ty)
            }
            ExprKind::Convert(t, mut inner) => {
                let ty = self.convert(&t, &mut inner, pos);
                (ExprKind::Convert(t, inner), ty)
            }
            ExprKind::EncodeWithSignature { sig, mut args } => {
                match parse_sig(&sig) {
                    Some((_, params)) => {
                        if params.len() != args.len() {
                            self.err(pos, format!("signature `{sig}` takes {} argument(s), {} given", params.len(), args.len()));
                        }
                        for (k, a) in args.iter_mut().enumerate() {
                            let t = self.expr(a);
                            if let Some(p) = params.get(k) {
                                let ok = match &t {
                                    Ty::Literal => p == "uint256",
                                    Ty::Value(v) => v.abi_name() == *p,
                                    _ => false,
                                };
                                if !ok {
                                    self.err(a.pos.0, format!("argument {} of `{sig}`: expected {p}, found {}", k + 1, show(&t)));
                                }
                            }
                        }
                    }
                    None => {
                        self.err(pos, format!("malformed signature string `{sig}`"));
                        for a in args.iter_mut() {
                            self.expr(a);
                        }
                    }
                }
                (ExprKind::EncodeWithSignature { sig, args }, Ty::Value(TypeExpr::Bytes))
            }
            ExprKind::Decode { mut data, types } => {
                let t = self.expr(&mut data);
                if t != Ty::Value(TypeExpr::Bytes) {
                    self.err(pos, format!("abi.decode expects bytes, found {}", show(&t)));
                }
                let ty = tuple_or_single(types.clone());
                (ExprKind::Decode { data, types }, ty)
            }
            ExprKind::NewArray { elem, mut len } => {
                let t = self.expr(&mut len);
                if !assignable(&TypeExpr::Uint256, &t) {
                    self.err(pos, "array length must be uint256");
                }
                let ty = Ty::Value(TypeExpr::Array(Box::new(elem.clone())));
                (ExprKind::NewArray { elem, len }, ty)
            }
            ExprKind::Tuple(mut items) => {
                let mut tys = Vec::new();
                for it in items.iter_mut() {
                    match it {
                        Some(x) => match self.expr(x) {
                            Ty::Value(t) => tys.push(t),
                            Ty::Literal => tys.push(TypeExpr::Uint256),
                            other => {
                                self.err(pos, format!("tuple component of type {}", show(&other)));
                                tys.push(TypeExpr::Uint256);
                            }
                        },
                        None => tys.push(TypeExpr::Uint256),
                    }
                }
                (ExprKind::Tuple(items), Ty::Tuple(tys))
            }
            ExprKind::Quant { q, vars, body } => {
                self.err(pos, "quantifiers are only valid in annotations");
                (ExprKind::Quant { q, vars, body }, Ty::Value(TypeExpr::Bool))
            }
            // Already-resolved kinds: re-check children so a resolved tree can be checked again.
            ExprKind::Balance(mut x) => {
                self.expect_address(&mut x);
                (ExprKind::Balance(x), uint())
            }
            ExprKind::Length(mut x) => {
                self.expr(&mut x);
                (ExprKind::Length(x), uint())
            }
            ExprKind::Send { mut target, mut amount } => {
                self.expect_address(&mut target);
                self.expect_uint(&mut amount);
                (ExprKind::Send { target, amount }, Ty::Value(TypeExpr::Bool))
            }
            ExprKind::LowCall { mut target, mut value, mut data } => {
                self.expect_address(&mut target);
                if let Some(v) = &mut value {
                    self.expect_uint(v);
                }
                self.expr(&mut data);
                (ExprKind::LowCall { target, value, data }, Ty::Tuple(vec![TypeExpr::Bool, TypeExpr::Bytes]))
            }
            ExprKind::Delegatecall { mut target, mut payload } => {
                self.expect_address(&mut target);
                self.expr(&mut payload);
                (ExprKind::Delegatecall { target, payload }, Ty::Tuple(vec![TypeExpr::Bool, TypeExpr::Bytes]))
            }
            ExprKind::SafeMath { op, mut lhs, mut rhs } => {
                self.expect_uint(&mut lhs);
                self.expect_uint(&mut rhs);
                (ExprKind::SafeMath { op, lhs, rhs }, uint())
            }
            ExprKind::InternalCall { name, mut args } => {
                let Some((params, rets)) = self.shape.functions.get(&name).cloned() else {
                    self.err(pos, format!("unknown function `{name}`"));
                    return (ExprKind::InternalCall { name, args }, Ty::Unresolved);
                };
                self.call_args(pos, &name, &params, &mut args);
                (ExprKind::InternalCall { name, args }, tuple_or_single(rets))
            }
            ExprKind::ExternalCall { mut target, contract, func, sig, mut value, mut args } => {
                self.expr(&mut target);
                if let Some(v) = &mut value {
                    self.expect_uint(v);
                }
                let f = self.ifaces.get(&contract).and_then(|i| i.functions.iter().find(|f| f.name == func)).cloned();
                let Some(f) = f else {
                    self.err(pos, format!("`{contract}` has no public function `{func}`"));
                    return (ExprKind::ExternalCall { target, contract, func, sig, value, args }, Ty::Unresolved);
                };
                self.call_args(pos, &func, &f.params, &mut args);
                (ExprKind::ExternalCall { target, contract, func, sig, value, args }, tuple_or_single(f.returns))
            }
        }
    }

    fn expect_address(&mut self, e: &mut Expr) {
        let t = self.expr(e);
        if !matches!(&t, Ty::Value(v) if v.is_address_like()) {
            self.err(e.pos.0, format!("expected an address, found {}", show(&t)));
        }
    }

    fn expect_uint(&mut self, e: &mut Expr) {
        let t = self.expr(e);
        if !assignable(&TypeExpr::Uint256, &t) {
            self.err(e.pos.0, format!("expected uint256, found {}", show(&t)));
        }
    }

    fn binary(&mut self, op: BinOp, lt: &Ty, rt: &Ty, pos: Pos) -> Ty {
        let is_uint = |t: &Ty| assignable(&TypeExpr::Uint256, t);
        if op.is_arith() {
            if !is_uint(lt) || !is_uint(rt) {
                self.err(pos, format!("`{}` needs uint256 operands, found {} and {}", op.token(), show(lt), show(rt)));
            }
            return if *lt == Ty::Literal && *rt == Ty::Literal { Ty::Literal } else { uint() };
        }
        if op.is_ordering() {
            if !is_uint(lt) || !is_uint(rt) {
                self.err(pos, format!("`{}` needs uint256 operands, found {} and {}", op.token(), show(lt), show(rt)));
            }
            return Ty::Value(TypeExpr::Bool);
        }
        match op {
            BinOp::And | BinOp::Or => {
                let b = Ty::Value(TypeExpr::Bool);
                if *lt != b || *rt != b {
                    self.err(pos, format!("`{}` needs bool operands, found {} and {}", op.token(), show(lt), show(rt)));
                }
            }
            _ => {
                if !comparable(lt, rt) {
                    self.err(pos, format!("cannot compare {} with {}", show(lt), show(rt)));
                }
            }
        }
        Ty::Value(TypeExpr::Bool)
    }

    fn convert(&mut self, t: &TypeExpr, inner: &mut Expr, pos: Pos) -> Ty {
        if *t == TypeExpr::Uint256 {
            if let ExprKind::Unary(UnOp::Neg, lit) = &mut inner.kind {
                if matches!(lit.kind, ExprKind::Number { .. }) {
                    lit.ty = Ty::Literal;
                    inner.ty = Ty::Literal;
                    return uint();
                }
            }
        }
        let it = self.expr(inner);
        let ok = match t {
            TypeExpr::Uint256 => assignable(&TypeExpr::Uint256, &it),
            TypeExpr::Address => matches!(&it, Ty::Literal) || matches!(&it, Ty::Value(v) if v.is_address_like()),
            TypeExpr::Bytes32 => matches!(&it, Ty::Literal | Ty::Value(TypeExpr::Bytes32)),
            TypeExpr::Bool => it == Ty::Value(TypeExpr::Bool),
            TypeExpr::Contract(_) => matches!(&it, Ty::Value(v) if v.is_address_like()),
            _ => false,
        };
        if !ok {
            self.err(pos, format!("cannot convert {} to {t}", show(&it)));
        }
        Ty::Value(t.clone())
    }

    fn member(&mut self, mut base: Expr, name: String, pos: Pos) -> (ExprKind, Ty) {
        if let ExprKind::Ident { name: b, .. } = &base.kind {
            if b == "msg" && self.lookup_local("msg").is_none() {
                return match name.as_str() {
                    "sender" => (ExprKind::MsgSender, Ty::Value(TypeExpr::Address)),
                    "value" => (ExprKind::MsgValue, uint()),
                    _ => {
                        self.err(pos, format!("unsupported member `msg.{name}`"));
                        (ExprKind::MsgSender, Ty::Unresolved)
                    }
                };
            }
        }
        let bt = self.expr(&mut base);
        match (name.as_str(), &bt) {
            ("balance", Ty::Value(v)) if v.is_address_like() => (ExprKind::Balance(Box::new(base)), uint()),
            ("length", Ty::Value(TypeExpr::Array(_))) => (ExprKind::Length(Box::new(base)), uint()),
            _ => {
                if bt != Ty::Unresolved {
                    self.err(pos, format!("unsupported member `{name}` on {}", show(&bt)));
                }
                (ExprKind::Member(Box::new(base), name), Ty::Unresolved)
            }
        }
    }

    fn call(&mut self, callee: Expr, mut args: Vec<Expr>, pos: Pos) -> (ExprKind, Ty) {
        match callee.kind {
            ExprKind::Ident { name, binding } => {
                if self.shape.functions.contains_key(&name) && self.lookup_local(&name).is_none() {
                    return self.resolve(ExprKind::InternalCall { name, args }, pos);
                }
                if self.ifaces.contains_key(&name) && args.len() == 1 {
                    let mut inner = args.pop().unwrap();
                    let t = TypeExpr::Contract(name);
                    let ty = self.convert(&t, &mut inner, pos);
                    return (ExprKind::Convert(t, Box::new(inner)), ty);
                }
                if name == "require" {
                    self.err(pos, "`require` is a statement");
                } else if name == "assert" || name == "revert" || name == "keccak256" || name == "selfdestruct" {
                    self.err(pos, format!("`{name}` is not supported"));
                } else if name.starts_with("__verifier_") {
                    self.err(pos, format!("`{name}` is only valid in annotations"));
                } else {
                    self.err(pos, format!("unknown function `{name}`"));
                }
                for a in args.iter_mut() {
                    self.expr(a);
                }
                let callee = Expr { kind: ExprKind::Ident { name, binding }, ty: Ty::Unresolved, pos: callee.pos };
                (ExprKind::Call(Box::new(callee), args), Ty::Unresolved)
            }
            ExprKind::Member(target, m) => {
                let mut target = *target;
                match m.as_str() {
                    "send" if args.len() == 1 => {
                        let amount = args.pop().unwrap();
                        self.resolve(ExprKind::Send { target: Box::new(target), amount: Box::new(amount) }, pos)
                    }
                    "call" if args.len() == 1 => {
                        let data = args.pop().unwrap();
                        self.resolve(ExprKind::LowCall { target: Box::new(target), value: None, data: Box::new(data) }, pos)
                    }
                    "delegatecall" if args.len() == 1 => {
                        let payload = args.pop().unwrap();
                        self.resolve(ExprKind::Delegatecall { target: Box::new(target), payload: Box::new(payload) }, pos)
                    }
                    "sub" | "add" if args.len() == 1 => {
                        let rhs = args.pop().unwrap();
                        let op = if m == "sub" { SafeOp::Sub } else { SafeOp::Add };
                        self.resolve(ExprKind::SafeMath { op, lhs: Box::new(target), rhs: Box::new(rhs) }, pos)
                    }
                    _ => {
                        let tt = self.expr(&mut target);
                        if let Ty::Value(TypeExpr::Contract(c)) = &tt {
                            let sig = self.external_sig(c, &m);
                            return self.resolve(
                                ExprKind::ExternalCall {
                                    target: Box::new(target),
                                    contract: c.clone(),
                                    func: m,
                                    sig,
                                    value: None,
                                    args,
                                },
                                pos,
                            );
                        }
                        self.err(pos, format!("unsupported call `.{m}(...)` on {}", show(&tt)));
                        (ExprKind::Call(Box::new(Expr { kind: ExprKind::Member(Box::new(target), m), ty: Ty::Unresolved, pos: callee.pos }), args), Ty::Unresolved)
                    }
                }
            }
            // `x.call.value(v)(data)` and `x.f.value(v)(args)`.
            ExprKind::Call(inner, mut vargs) => {
                if let ExprKind::Member(obj, vname) = inner.kind {
                    if vname == "value" && vargs.len() == 1 {
                        if let ExprKind::Member(target, fname) = obj.kind {
                            let value = Some(Box::new(vargs.pop().unwrap()));
                            let mut target = *target;
                            if fname == "call" && args.len() == 1 {
                                let data = args.pop().unwrap();
                                return self.resolve(ExprKind::LowCall { target: Box::new(target), value, data: Box::new(data) }, pos);
                            }
                            let tt = self.expr(&mut target);
                            if let Ty::Value(TypeExpr::Contract(c)) = &tt {
                                let sig = self.external_sig(c, &fname);
                                return self.resolve(
                                    ExprKind::ExternalCall { target: Box::new(target), contract: c.clone(), func: fname, sig, value, args },
                                    pos,
                                );
                            }
                        }
                    }
                }
                self.err(pos, "unsupported call form");
                (ExprKind::Bool(false), Ty::Unresolved)
            }
            _ => {
                self.err(pos, "unsupported call form");
                (ExprKind::Bool(false), Ty::Unresolved)
            }
        }
    }

    fn external_sig(&self, contract: &str, func: &str) -> String {
        self.ifaces
            .get(contract)
            .and_then(|i| i.functions.iter().find(|f| f.name == func))
            .map(|f| f.signature())
            .unwrap_or_else(|| format!("{func}(?)"))
    }
}

fn is_place_root(e: &Expr) -> bool {
    match &e.kind {
        ExprKind::Ident { .. } => true,
        ExprKind::Index(b, _) => is_place_root(b),
        _ => false,
    }
}

pub fn comparable(a: &Ty, b: &Ty) -> bool {
    match (a, b) {
        (Ty::Literal, Ty::Literal) => true,
        (Ty::Literal, Ty::Value(TypeExpr::Uint256)) | (Ty::Value(TypeExpr::Uint256), Ty::Literal) => true,
        (Ty::Value(x), Ty::Value(y)) => x == y || (x.is_address_like() && y.is_address_like()),
        _ => false,
    }
}

/// Splits `name(t1,t2)` into its parts.
pub fn parse_sig(sig: &str) -> Option<(String, Vec<String>)> {
    let open = sig.find('(')?;
    if !sig.ends_with(')') || sig.contains(' ') {
        return None;
    }
    let name = &sig[..open];
    let inner = &sig[open + 1..sig.len() - 1];
    let params = if inner.is_empty() { Vec::new() } else { inner.split(',').map(str::to_string).collect() };
    Some((name.to_string(), params))
}

fn show(t: &Ty) -> String {
    match t {
        Ty::Unresolved => "an unresolved expression".into(),
        Ty::Void => "no value".into(),
        Ty::Value(v) => v.to_string(),
        Ty::Tuple(v) => format!("({})", join_types(v)),
        Ty::Literal => "an integer literal".into(),
    }
}

fn join_types(v: &[TypeExpr]) -> String {
    v.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(",")
}

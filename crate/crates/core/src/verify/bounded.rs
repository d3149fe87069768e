//! Bounded exhaustive checking over small argument domains.
//!
//! Create mode starts from freshly constructed instances; the constructor is
//! the first call of every sequence. Upgrade mode starts from storage seeds
//! that satisfy every invariant and checks each public function once from
//! each seed.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::sync::Arc;

use ethnum::U256;
use serde_json::Value as Json;

use super::eval::{eval_bool, EvalContext};
use super::monitor::{account_json, render_args, Monitor, Violation};
use crate::conformance::{Backend, Finding, MergedContract, Mode, Trace, TraceCall};
use crate::frontend::{visit_unit_exprs, ContractUnit, ExprKind, FunctionDecl, Mutability, TypeExpr};
use crate::sim::{Account, Address, ChainState, Code, Limits, Slot, Status, Storage, Value, WrapEvent, World};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundedConfig {
    /// Externally owned accounts; senders are drawn from these.
    pub users: Vec<Address>,
    pub uint_domain: Vec<U256>,
    /// Calls per sequence. In create mode the constructor counts as one.
    pub sequence_depth: usize,
    pub array_len_bound: usize,
    /// Transitions executed before giving up with VRE.
    pub max_explored: usize,
    pub workers: usize,
    /// Initial balance of every user.
    pub funding: U256,
}

impl Default for BoundedConfig {
    fn default() -> Self {
        BoundedConfig {
            users: (1..=4).map(|k| Address::from_u64(0xA0 + k)).collect(),
            uint_domain: vec![U256::ZERO, U256::ONE, U256::from(2u8), U256::from(10u8), U256::MAX],
            sequence_depth: 3,
            array_len_bound: 2,
            max_explored: 4_000_000,
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            funding: U256::ONE << 128u32,
        }
    }
}

impl BoundedConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.users.is_empty() || self.uint_domain.is_empty() {
            return Err("bounded domains must be non-empty".into());
        }
        if self.sequence_depth == 0 {
            return Err("sequence depth must be at least 1".into());
        }
        Ok(())
    }

    /// Addresses used for arguments: users, the zero address and the contract.
    pub fn address_domain(&self, this: Address) -> Vec<Address> {
        let mut v = self.users.clone();
        v.push(Address::ZERO);
        v.push(this);
        v
    }
}

/// One enumerated transaction. `sig` is empty for constructors and the fallback.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tx {
    pub sig: String,
    pub args: Vec<Value>,
    pub sender: Address,
    pub value: U256,
}

struct Node {
    parent: Option<usize>,
    call: Option<TraceCall>,
}

struct Outcome {
    call: TraceCall,
    wraps: Vec<WrapEvent>,
    violations: Vec<Violation>,
    next: Option<World>,
}

/// Does the code convert a nonzero literal to an address? Such code can
/// single out a user, which breaks user symmetry.
pub fn has_address_literal(unit: &ContractUnit) -> bool {
    let mut found = false;
    visit_unit_exprs(unit, &mut |e| {
        if let ExprKind::Convert(TypeExpr::Address | TypeExpr::Contract(_), inner) = &e.kind {
            found |= matches!(inner.kind, ExprKind::Number { value, .. } if value != U256::ZERO);
        }
    });
    found
}

fn collect_addrs_value(v: &Value, out: &mut BTreeSet<Address>) {
    match v {
        Value::Addr(a) => {
            out.insert(*a);
        }
        Value::Array(items) | Value::Tuple(items) => items.iter().for_each(|x| collect_addrs_value(x, out)),
        _ => {}
    }
}

fn collect_addrs_slot(s: &Slot, out: &mut BTreeSet<Address>) {
    match s {
        Slot::Val(v) => collect_addrs_value(v, out),
        Slot::Arr(items) => items.iter().for_each(|x| collect_addrs_slot(x, out)),
        Slot::Map(m) => {
            for (k, v) in m {
                collect_addrs_value(k, out);
                collect_addrs_slot(v, out);
            }
        }
    }
}

/// Enumeration context for one checked contract.
struct Enumerator<'a> {
    cfg: &'a BoundedConfig,
    unit: &'a ContractUnit,
    this: Address,
    symmetric: bool,
}

impl Enumerator<'_> {
    fn scalar_domain(&self, t: &TypeExpr) -> Vec<Value> {
        match t {
            TypeExpr::Uint256 => self.cfg.uint_domain.iter().map(|x| Value::Uint(*x)).collect(),
            TypeExpr::Bool => vec![Value::Bool(false), Value::Bool(true)],
            TypeExpr::Address | TypeExpr::Contract(_) => self.cfg.address_domain(self.this).into_iter().map(Value::Addr).collect(),
            TypeExpr::Bytes32 => vec![Value::B32([0; 32])],
            TypeExpr::Bytes => vec![Value::zero(t).expect("bytes")],
            TypeExpr::Array(e) => {
                let elems: Vec<Value> = match &**e {
                    TypeExpr::Uint256 => vec![Value::uint(0), Value::uint(1)],
                    TypeExpr::Address | TypeExpr::Contract(_) => self.cfg.users.iter().take(2).map(|a| Value::Addr(*a)).collect(),
                    other => self.scalar_domain(other),
                };
                let mut out = vec![Vec::new()];
                let mut all = vec![Value::Array(Vec::new())];
                for _ in 0..self.cfg.array_len_bound {
                    out = out.iter().flat_map(|p| elems.iter().map(move |x| [p.clone(), vec![x.clone()]].concat())).collect();
                    all.extend(out.iter().cloned().map(Value::Array));
                }
                all
            }
            TypeExpr::Mapping(..) => Vec::new(),
        }
    }

    /// Users that occur nowhere in the contract and still hold their funding.
    fn fresh_users(&self, w: &World) -> Vec<Address> {
        if !self.symmetric {
            return Vec::new();
        }
        let mut seen = BTreeSet::new();
        if let Some(acc) = w.accounts.get(&self.this) {
            for ord in acc.storage.ordinals() {
                collect_addrs_slot(acc.storage.slot(ord).expect("listed"), &mut seen);
            }
        }
        self.cfg
            .users
            .iter()
            .copied()
            .filter(|u| !seen.contains(u) && w.accounts.get(u).map_or(U256::ZERO, |a| a.balance) == self.cfg.funding)
            .collect()
    }

    /// Fresh users must be introduced in order: one representative per orbit.
    fn canonical(fresh: &[Address], sender: Address, args: &[Value]) -> bool {
        let mut seq = BTreeSet::new();
        let mut order = Vec::new();
        let mut push = |a: Address| {
            if fresh.contains(&a) && seq.insert(a) {
                order.push(a);
            }
        };
        push(sender);
        for v in args {
            let mut s = Vec::new();
            flatten_addrs(v, &mut s);
            s.into_iter().for_each(&mut push);
        }
        order.iter().zip(fresh).all(|(a, b)| a == b)
    }

    fn product(&self, types: &[TypeExpr]) -> Vec<Vec<Value>> {
        let mut out = vec![Vec::new()];
        for t in types {
            let dom = self.scalar_domain(t);
            out = out.iter().flat_map(|p| dom.iter().map(move |x| [p.clone(), vec![x.clone()]].concat())).collect();
        }
        out
    }

    fn txs_for(&self, w: &World, f: &FunctionDecl, senders: &[Address], fresh: &[Address]) -> Vec<Tx> {
        let types: Vec<TypeExpr> = f.params.iter().map(|p| p.ty.clone()).collect();
        let arg_sets = self.product(&types);
        let sig = if f.is_fallback() { String::new() } else { f.canonical_signature() };
        let mut out = Vec::new();
        for &sender in senders {
            let bal = w.accounts.get(&sender).map_or(U256::ZERO, |a| a.balance);
            let values: Vec<U256> = if f.mutability == Mutability::Payable {
                self.cfg.uint_domain.iter().copied().filter(|v| *v <= bal).collect()
            } else {
                vec![U256::ZERO]
            };
            for args in &arg_sets {
                if !Self::canonical(fresh, sender, args) {
                    continue;
                }
                for &value in &values {
                    out.push(Tx { sig: sig.clone(), args: args.clone(), sender, value });
                }
            }
        }
        out
    }

    fn calls(&self, w: &World) -> Vec<Tx> {
        let fresh = self.fresh_users(w);
        let mut out = Vec::new();
        for f in &self.unit.functions {
            if f.is_public() && (f.is_dispatchable() || f.is_fallback()) {
                out.extend(self.txs_for(w, f, &self.cfg.users, &fresh));
            }
        }
        out
    }

    fn constructor_calls(&self, w: &World) -> Vec<Tx> {
        let fresh = self.fresh_users(w);
        match self.unit.functions.iter().position(|f| f.is_constructor()) {
            Some(fi) => self.txs_for(w, &self.unit.functions[fi], &self.cfg.users, &fresh),
            None => {
                let sender = self.cfg.users[0];
                let senders: Vec<Address> = if fresh.is_empty() { self.cfg.users.clone() } else { vec![sender] };
                senders.into_iter().map(|s| Tx { sig: String::new(), args: Vec::new(), sender: s, value: U256::ZERO }).collect()
            }
        }
    }
}

/// Every constructor and call transaction the enumerator would consider
/// for `unit` deployed at `this`, with all users holding their funding.
pub fn candidate_txs(unit: &ContractUnit, cfg: &BoundedConfig, this: Address) -> (Vec<Tx>, Vec<Tx>) {
    let en = Enumerator { cfg, unit, this, symmetric: false };
    let w = genesis(cfg).world;
    (en.constructor_calls(&w), en.calls(&w))
}

fn flatten_addrs(v: &Value, out: &mut Vec<Address>) {
    match v {
        Value::Addr(a) => out.push(*a),
        Value::Array(items) | Value::Tuple(items) => items.iter().for_each(|x| flatten_addrs(x, out)),
        _ => {}
    }
}

fn genesis(cfg: &BoundedConfig) -> ChainState {
    let mut st = ChainState::new();
    for u in &cfg.users {
        st.fund(*u, cfg.funding);
    }
    st
}

fn trace_call(op: &str, tx: &Tx, name: &str, unit: &ContractUnit, to: Option<Address>) -> TraceCall {
    let sig = if op == "create" {
        let tys: Vec<String> = unit.constructor().map(|c| c.params.iter().map(|p| p.ty.abi_name()).collect()).unwrap_or_default();
        format!("{name}({})", tys.join(","))
    } else {
        tx.sig.clone()
    };
    TraceCall {
        op: op.into(),
        to,
        sig,
        args: render_args(&tx.args),
        sender: tx.sender,
        value: tx.value.to_string(),
        status: Status::Success,
        wraps: Vec::new(),
    }
}

type Leaf = (usize, Vec<Value>, Value);

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for k in 0..n {
            let mut q = p.clone();
            q.insert(k, n - 1);
            out.push(q);
        }
    }
    out
}

fn rename(v: &Value, users: &[Address], perm: &[usize]) -> Value {
    match v {
        Value::Addr(a) => match users.iter().position(|u| u == a) {
            Some(i) => Value::Addr(users[perm[i]]),
            None => v.clone(),
        },
        Value::Array(items) => Value::Array(items.iter().map(|x| rename(x, users, perm)).collect()),
        Value::Tuple(items) => Value::Tuple(items.iter().map(|x| rename(x, users, perm)).collect()),
        _ => v.clone(),
    }
}

/// Storage seeds for upgrade mode: at most one nonzero entry per variable,
/// one representative per renaming of users. Mapping keys of type uint256
/// range over {0, 1}.
fn seeds(en: &Enumerator<'_>, m: &MergedContract) -> Vec<Storage> {
    let nonzero = |t: &TypeExpr| -> Vec<Value> { en.scalar_domain(t).into_iter().filter(|v| !v.is_zero()).collect() };
    let key_domain = |t: &TypeExpr| -> Vec<Value> {
        match t {
            TypeExpr::Uint256 => vec![Value::uint(0), Value::uint(1)],
            other => en.scalar_domain(other),
        }
    };
    let mut per_var: Vec<Vec<Leaf>> = Vec::new();
    for v in &m.unit.vars {
        let mut ty = &v.ty;
        let mut paths: Vec<Vec<Value>> = vec![Vec::new()];
        while let TypeExpr::Mapping(k, val) = ty {
            let dom = key_domain(k);
            paths = paths.iter().flat_map(|p| dom.iter().map(move |x| [p.clone(), vec![x.clone()]].concat())).collect();
            ty = val;
        }
        let leaves = if matches!(ty, TypeExpr::Bytes) { Vec::new() } else { nonzero(ty) };
        per_var.push(paths.iter().flat_map(|p| leaves.iter().map(move |l| (v.ordinal, p.clone(), l.clone()))).collect());
    }
    let mut combos: Vec<Vec<Leaf>> = vec![Vec::new()];
    for opts in &per_var {
        combos = combos.iter().flat_map(|c| std::iter::once(c.clone()).chain(opts.iter().map(move |o| [c.clone(), vec![o.clone()]].concat()))).collect();
    }
    let users = &en.cfg.users;
    let perms = if en.symmetric { permutations(users.len().min(5)) } else { Vec::new() };
    combos
        .into_iter()
        .filter(|c| {
            perms.iter().all(|p| {
                let mut q: Vec<Leaf> = c
                    .iter()
                    .map(|(o, path, l)| (*o, path.iter().map(|x| rename(x, users, p)).collect(), rename(l, users, p)))
                    .collect();
                q.sort();
                let mut orig = c.clone();
                orig.sort();
                orig <= q
            })
        })
        .map(|c| {
            let mut s = Storage::default();
            for (o, path, l) in c {
                let ty = &m.unit.vars.iter().find(|v| v.ordinal == o).expect("var").ty;
                s.write(o, ty, &path, l).expect("seed write");
            }
            s
        })
        .collect()
}

fn invariants_hold(m: &MergedContract, w: &World, this: Address) -> bool {
    m.spec.invariants.iter().all(|a| {
        let ctx = EvalContext {
            pre: w,
            post: w,
            this,
            vars: &m.unit.vars,
            sender: Address::ZERO,
            value: U256::ZERO,
            params: &[],
            rets: &[],
        };
        eval_bool(&a.expr, &ctx) == Ok(true)
    })
}

/// Executes every transaction of `txs` from `w`.
fn step(m: &MergedContract, code: &Arc<Code>, mode: Mode, w: &World, txs: &[Tx], en: &Enumerator<'_>, create: bool, keep: bool) -> Vec<Outcome> {
    let mut monitor = Monitor::new(m, code, mode);
    let mut out = Vec::new();
    for tx in txs {
        let mut st = ChainState { world: w.clone(), log: Vec::new(), tx_count: 0 };
        let (res, call) = if create {
            let call = trace_call("create", tx, code.name(), &m.unit, None);
            (st.create_contract_observed(code.clone(), tx.args.clone(), tx.sender, tx.value, Limits::default(), &mut monitor), call)
        } else {
            let call = trace_call("call", tx, code.name(), &m.unit, None);
            (st.call_contract_observed(en.this, &tx.sig, tx.args.clone(), tx.sender, tx.value, Limits::default(), &mut monitor), call)
        };
        let violations = monitor.take();
        let Ok(r) = res else { continue };
        let mut call = call;
        call.status = r.status;
        call.wraps = r.wrap_events.clone();
        let next = (keep && r.success() && st.world != *w).then_some(st.world);
        out.push(Outcome { call, wraps: r.wrap_events, violations, next });
    }
    out
}

fn parallel<T: Send>(n: usize, workers: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let workers = workers.clamp(1, n.max(1));
    if workers == 1 {
        return (0..n).map(f).collect();
    }
    let chunk = n.div_ceil(workers);
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let f = &f;
                s.spawn(move || (w * chunk..((w + 1) * chunk).min(n)).map(f).collect::<Vec<T>>())
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}

/// Exhaustive search; returns the first violation of each obligation in
/// breadth-first order, plus VRE when the budget runs out.
pub fn bounded_check(m: &MergedContract, cfg: &BoundedConfig, mode: Mode) -> Vec<Finding> {
    if let Err(e) = cfg.validate() {
        return vec![Finding::vre("bounded", e)];
    }
    let code = Code::from_unit(m.unit.clone());
    let st0 = genesis(cfg);
    let this = st0.next_address();
    let en = Enumerator { cfg, unit: &m.unit, this, symmetric: !has_address_literal(&m.unit) };
    let obligations = Monitor::new(m, &code, mode).obligations().to_vec();

    let mut nodes: Vec<Node> = Vec::new();
    let mut node_wraps: Vec<Vec<WrapEvent>> = Vec::new();
    let mut seen: HashSet<World> = HashSet::new();
    let mut frontier: Vec<(usize, World)> = Vec::new();
    let mut seed_json: BTreeMap<usize, Json> = BTreeMap::new();
    let mut reported: BTreeMap<usize, Finding> = BTreeMap::new();
    let mut explored = 0usize;
    let mut exhausted = false;

    let path = |nodes: &Vec<Node>, node_wraps: &Vec<Vec<WrapEvent>>, mut i: usize| {
        let mut calls = Vec::new();
        let mut wraps = Vec::new();
        loop {
            if let Some(c) = &nodes[i].call {
                calls.push(c.clone());
            }
            wraps.push(node_wraps[i].clone());
            match nodes[i].parent {
                Some(p) => i = p,
                None => break,
            }
        }
        calls.reverse();
        wraps.reverse();
        (calls, i, wraps.concat())
    };

    let record = |nodes: &Vec<Node>, node_wraps: &Vec<Vec<WrapEvent>>, parent: Option<usize>, o: &Outcome, seed_json: &BTreeMap<usize, Json>, reported: &mut BTreeMap<usize, Finding>| {
        for v in &o.violations {
            if reported.contains_key(&v.obligation) {
                continue;
            }
            let (mut calls, root, mut wraps) = match parent {
                Some(p) => path(nodes, node_wraps, p),
                None => (Vec::new(), usize::MAX, Vec::new()),
            };
            calls.push(o.call.clone());
            wraps.extend(o.wraps.iter().cloned());
            let seed = seed_json.get(&root).cloned();
            let trace = Trace { calls, seed, pre: v.pre.clone(), post: v.post.clone(), wrap_events: wraps };
            reported.insert(v.obligation, Finding::violation(obligations[v.obligation].site.clone(), v.message.clone(), trace));
        }
    };

    let depth_after_root;
    match mode {
        Mode::Create => {
            let txs = en.constructor_calls(&st0.world);
            explored += txs.len();
            let outs = step(m, &code, mode, &st0.world, &txs, &en, true, true);
            for o in outs {
                record(&nodes, &node_wraps, None, &o, &seed_json, &mut reported);
                if let Some(w) = o.next {
                    if seen.insert(w.clone()) {
                        nodes.push(Node { parent: None, call: Some(o.call) });
                        node_wraps.push(o.wraps);
                        frontier.push((nodes.len() - 1, w));
                    }
                }
            }
            depth_after_root = cfg.sequence_depth - 1;
        }
        Mode::Upgrade => {
            for s in seeds(&en, m) {
                let mut w = st0.world.clone();
                w.counter += 1;
                w.accounts.insert(this, Account { balance: U256::ZERO, storage: s, code: Some(code.clone()) });
                if !invariants_hold(m, &w, this) || !seen.insert(w.clone()) {
                    continue;
                }
                nodes.push(Node { parent: None, call: None });
                node_wraps.push(Vec::new());
                seed_json.insert(nodes.len() - 1, account_json(&w, this, m));
                frontier.push((nodes.len() - 1, w));
            }
            depth_after_root = 1;
        }
    }

    for level in 0..depth_after_root {
        if frontier.is_empty() || reported.len() == obligations.len() {
            break;
        }
        let keep = level + 1 < depth_after_root;
        let batches: Vec<Vec<Tx>> = frontier.iter().map(|(_, w)| en.calls(w)).collect();
        let total: usize = batches.iter().map(Vec::len).sum();
        if explored + total > cfg.max_explored {
            exhausted = true;
            break;
        }
        explored += total;
        let results = parallel(frontier.len(), cfg.workers, |i| step(m, &code, mode, &frontier[i].1, &batches[i], &en, false, keep));
        let mut next = Vec::new();
        for ((node, _), outs) in frontier.iter().zip(results) {
            for o in outs {
                record(&nodes, &node_wraps, Some(*node), &o, &seed_json, &mut reported);
                if let Some(w) = o.next {
                    if seen.insert(w.clone()) {
                        nodes.push(Node { parent: Some(*node), call: Some(o.call) });
                        node_wraps.push(o.wraps);
                        next.push((nodes.len() - 1, w));
                    }
                }
            }
        }
        frontier = next;
    }

    let mut findings: Vec<Finding> = reported.into_values().collect();
    if exhausted {
        findings.push(Finding::vre("bounded", format!("exploration budget of {} transitions exceeded", cfg.max_explored)));
    }
    findings
}

/// Bounded exhaustive backend.
#[derive(Debug, Clone, Default)]
pub struct BoundedBackend {
    pub config: BoundedConfig,
}

impl BoundedBackend {
    pub fn new(config: BoundedConfig) -> Self {
        BoundedBackend { config }
    }
}

impl Backend for BoundedBackend {
    fn name(&self) -> String {
        "bounded".into()
    }

    fn check(&mut self, m: &MergedContract, mode: Mode) -> Vec<Finding> {
        bounded_check(m, &self.config, mode)
    }
}

//! One PASS/FAIL line per acceptance criterion. Time limits apply to the
//! optimized test profile.

mod common;

use std::fs;
use std::io::Write as _;
use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::{corpus_loader, merged, spec, transparency, unit, user, MAINTAINER, SPEC};
use ethnum::U256;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tdep::conformance::{check_syntactic, verify, Category, Finding, Mode, Report};
use tdep::corpus;
use tdep::deployer::{DeployError, Store, DEFAULT_TRUSTED};
use tdep::frontend::{ContractUnit, TypeExpr, Visibility};
use tdep::proxy::{generate_proxy_for_source, generate_registry};
use tdep::sim::persist::run_script;
use tdep::sim::{Address, ChainState, Code, Journaled, Value};
use tdep::spec::SpecId;
use tdep::verify::runtime::{call_op, create_op, fund_op};
use tdep::verify::{candidate_txs, run_scenario, BoundedBackend, BoundedConfig, ExternalBackend, ToolConfig, IMPL_REF};

/// Journals and final state hashes gathered along the way for criterion 8.
#[derive(Default)]
struct Ledger {
    journals: Vec<(String, String, [u8; 32])>,
    reverts_checked: usize,
}

impl Ledger {
    fn keep(&mut self, name: &str, j: &Journaled) {
        self.journals.push((name.to_string(), j.journal_text(), j.state.state_hash()));
    }
}

/// Calls through `j`; a reverted or faulted call must leave the state hash as it was.
fn checked_call(ledger: &mut Ledger, j: &mut Journaled, to: Address, sig: &str, args: Vec<Value>, from: Address, value: U256) -> Option<bool> {
    let before = j.state.state_hash();
    match j.call(to, sig, args, from, value) {
        Ok(r) if r.success() => Some(true),
        Ok(_) | Err(_) => {
            assert_eq!(j.state.state_hash(), before, "`{sig}` on {to} failed but changed the state");
            ledger.reverts_checked += 1;
            None
        }
    }
}

fn ensure(cond: bool, what: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what.into())
    }
}

fn c1_worked_example(ledger: &mut Ledger) -> Result<String, String> {
    let snd = user(1);
    let mut j = Journaled::new();
    j.fund(snd, U256::from(100u8));
    let code = Code::from_source(corpus::TOY_WALLET, "toy_wallet.sol").unwrap();
    let w = j.create(code, vec![], snd, U256::ZERO).unwrap().created.ok_or("constructor reverted")?;
    for who in [snd, user(2), w, Address::from_u64(0)] {
        ensure(j.state.read_var(w, "accs", &[Value::Addr(who)]).unwrap() == Value::uint(0), "fresh accs not zero")?;
    }
    ensure(j.state.account(w).unwrap().storage.is_empty(), "fresh storage not empty")?;
    ensure(j.state.balance(w) == U256::ZERO, "fresh balance not zero")?;
    ensure(checked_call(ledger, &mut j, w, "deposit()", vec![], snd, U256::from(10u8)) == Some(true), "deposit reverted")?;
    let got = j.state.read_var(w, "accs", &[Value::Addr(snd)]).unwrap();
    ensure(got == Value::uint(10), format!("accs[snd] = {got:?}"))?;
    ensure(j.state.balance(w) == U256::from(10u8), "balance != 10")?;
    ensure(j.state.read_var(w, "accs", &[Value::Addr(user(2))]).unwrap() == Value::uint(0), "other account touched")?;
    ledger.keep("worked example", &j);
    Ok("accs[snd] = 10, balance = 10".into())
}

fn reentrancy(amount: u64, reentries: u64) -> Vec<tdep::sim::persist::ScriptOp> {
    let wallet = Address::from_u64(0x1000);
    vec![
        fund_op(user(1), 1_000),
        fund_op(user(2), 1_000),
        create_op(IMPL_REF, &[], user(1), 0),
        create_op("attacker.sol", &[Value::Addr(wallet)], user(2), 0),
        call_op(wallet, "deposit()", &[], user(1), 100),
        call_op(Address::from_u64(0x1001), "attack(uint256,uint256)", &[Value::uint(amount), Value::uint(reentries)], user(2), 10),
    ]
}

fn c2_reentrancy(_: &mut Ledger) -> Result<String, String> {
    // the attack empties the alternative wallet
    let mut st = ChainState::new();
    let script: String = reentrancy(10, 10).iter().map(|op| serde_json::to_string(op).unwrap() + "\n").collect();
    let mut load = |p: &str| if p == IMPL_REF { corpus_loader("toy_wallet_reentrant.sol") } else { corpus_loader(p) };
    run_script(&mut st, &script, &mut load).map_err(|e| e.to_string())?;
    let wallet = Address::from_u64(0x1000);
    ensure(st.balance(wallet) == U256::ZERO, format!("wallet kept {}", st.balance(wallet)))?;
    ensure(st.balance(Address::from_u64(0x1001)) == U256::from(110u8), "attacker did not collect 110")?;

    let bad = merged("toy_wallet.spec.sol", "toy_wallet_reentrant.sol", Mode::Create);
    let f = run_scenario(&bad, Mode::Create, &reentrancy(5, 1), &mut corpus_loader).map_err(|e| e.to_string())?;
    let spv = f.iter().filter(|x| x.category == Category::SPV && x.site == "ToyWallet.withdraw(uint256) postcondition 1").count();
    ensure(spv >= 1, format!("no SPV on the balance postcondition: {f:?}"))?;
    let good = merged("toy_wallet.spec.sol", "toy_wallet.sol", Mode::Create);
    let g = run_scenario(&good, Mode::Create, &reentrancy(5, 1), &mut corpus_loader).map_err(|e| e.to_string())?;
    ensure(g.is_empty(), format!("original wallet flagged: {g:?}"))?;
    Ok(format!("drained to 0; {spv} SPV on withdraw balance postcondition; original: 0 findings"))
}

fn bounded_report(s: &str, c: &str) -> Report {
    verify(&spec(s), &unit(c), &mut BoundedBackend::new(BoundedConfig::default()), Mode::Create).unwrap()
}

fn has(r: &Report, cat: Category, site: &str) -> bool {
    r.findings.iter().any(|f| f.category == cat && f.site == site)
}

fn c3_verdicts(_: &mut Ledger) -> Result<String, String> {
    let r = bounded_report("erc20.spec.sol", "erc20_uniswap.sol");
    ensure(has(&r, Category::SPV, "UniswapToken.transferFrom(address,address,uint256) postcondition 3"), format!("uniswap: {:?}", r.findings))?;
    let f = r.findings.iter().find(|f| f.site.ends_with("postcondition 3")).unwrap();
    ensure(f.message.contains("allowance[_from][msg.sender] == __verifier_old_uint(allowance[_from][msg.sender]) - _value"), "uniswap: wrong obligation")?;

    let r = bounded_report("erc20.spec.sol", "erc20_digix.sol");
    ensure(r.findings.iter().any(|f| f.category == Category::SPV && f.site.contains(".allowance(address,address)")), format!("digix: {:?}", r.findings))?;

    let r = bounded_report("erc1155.spec.sol", "erc1155_desc_stock.sol");
    let batch: Vec<&Finding> = r.findings.iter().filter(|f| f.category == Category::SPV && f.site.contains("safeBatchTransferFrom")).collect();
    // parameter names follow the implementation after merging
    let lengths = regex::Regex::new(r"^postcondition `(\w+)\.length == (\w+)\.length` violated$").unwrap();
    let f = batch.iter().find(|f| lengths.is_match(&f.message)).ok_or_else(|| format!("erc1155: {:?}", r.findings))?;
    let call = f.trace.as_ref().and_then(|t| t.calls.last()).ok_or("erc1155: no trace")?;
    let len = |a: &str| serde_json::from_str::<serde_json::Value>(a).ok().and_then(|v| v.as_array().map(Vec::len));
    let (ids, values) = (len(&call.args[2]), len(&call.args[3]));
    ensure(ids.is_some() && ids != values, format!("erc1155: array lengths {ids:?} and {values:?} in {call}"))?;

    let r = bounded_report("erc20.spec.sol", "erc20_missing_allowance.sol");
    ensure(!r.findings.is_empty() && r.findings.iter().all(|f| f.category == Category::NTI), format!("missing allowance: {:?}", r.findings))?;

    let r = bounded_report("erc20.spec.sol", "erc20_unchecked.sol");
    let iou: Vec<&Finding> = r.findings.iter().filter(|f| f.category == Category::IOU).collect();
    ensure(!iou.is_empty(), format!("unchecked: {:?}", r.findings))?;
    ensure(iou.iter().all(|f| f.trace.as_ref().is_some_and(|t| !t.wrap_events.is_empty())), "IOU without wrap event")?;

    for (s, c) in [("erc20.spec.sol", "erc20.sol"), ("toy_wallet.spec.sol", "toy_wallet.sol"), ("erc1155.spec.sol", "erc1155.sol")] {
        let r = bounded_report(s, c);
        ensure(r.passed(), format!("{c} should pass: {:?}", r.findings))?;
    }
    Ok("uniswap SPV, digix SPV, erc1155 SPV, missing-allowance NTI, unchecked IOU; 3 reference PASS".into())
}

#[derive(Debug, Clone, Copy)]
enum Mutation {
    SwapVars,
    RetypeVar,
    RenameVar,
    AddPublic,
    RemovePublic,
    RetypeParam,
    AddInternal,
    RenameParam,
    ClearBody,
}

impl Mutation {
    const ALL: [Mutation; 9] = [
        Mutation::SwapVars,
        Mutation::RetypeVar,
        Mutation::RenameVar,
        Mutation::AddPublic,
        Mutation::RemovePublic,
        Mutation::RetypeParam,
        Mutation::AddInternal,
        Mutation::RenameParam,
        Mutation::ClearBody,
    ];

    /// Touches a variable name, type or order, or a public signature.
    fn touches_shape(self) -> bool {
        !matches!(self, Mutation::AddInternal | Mutation::RenameParam | Mutation::ClearBody)
    }
}

fn other_type(t: &TypeExpr, rng: &mut ChaCha8Rng) -> TypeExpr {
    let pool = [
        TypeExpr::Uint256,
        TypeExpr::Bool,
        TypeExpr::Address,
        TypeExpr::Bytes32,
        TypeExpr::Mapping(Box::new(TypeExpr::Address), Box::new(TypeExpr::Uint256)),
        TypeExpr::Mapping(Box::new(TypeExpr::Address), Box::new(TypeExpr::Bool)),
        TypeExpr::Array(Box::new(TypeExpr::Uint256)),
    ];
    loop {
        let c = pool[rng.gen_range(0..pool.len())].clone();
        if &c != t {
            return c;
        }
    }
}

/// Applies `m` to `c`; `None` when `c` offers no place for it.
fn mutate(c: &ContractUnit, m: Mutation, k: usize, rng: &mut ChaCha8Rng) -> Option<ContractUnit> {
    let mut c = c.clone();
    let public: Vec<usize> = (0..c.functions.len()).filter(|&i| c.functions[i].is_dispatchable()).collect();
    let with_params: Vec<usize> = public.iter().copied().filter(|&i| !c.functions[i].params.is_empty()).collect();
    let pick = |v: &[usize], rng: &mut ChaCha8Rng| (!v.is_empty()).then(|| v[rng.gen_range(0..v.len())]);
    match m {
        Mutation::SwapVars => {
            if c.vars.len() < 2 {
                return None;
            }
            let i = rng.gen_range(0..c.vars.len() - 1);
            let j = rng.gen_range(i + 1..c.vars.len());
            c.vars.swap(i, j);
        }
        Mutation::RetypeVar => {
            let i = rng.gen_range(0..c.vars.len().max(1));
            let v = c.vars.get_mut(i)?;
            v.ty = other_type(&v.ty, rng);
        }
        Mutation::RenameVar => {
            let i = rng.gen_range(0..c.vars.len().max(1));
            c.vars.get_mut(i)?.name.push_str("_m");
        }
        Mutation::AddPublic => {
            let mut f = c.functions[pick(&public, rng)?].clone();
            f.name = format!("mutant{k}");
            c.functions.push(f);
        }
        Mutation::RemovePublic => {
            let i = pick(&public, rng)?;
            c.functions.remove(i);
        }
        Mutation::RetypeParam => {
            let f = &mut c.functions[pick(&with_params, rng)?];
            let p = rng.gen_range(0..f.params.len());
            let ty = [TypeExpr::Uint256, TypeExpr::Bool, TypeExpr::Address, TypeExpr::Bytes32].into_iter().find(|t| *t != f.params[p].ty).unwrap();
            f.params[p].ty = ty;
        }
        Mutation::AddInternal => {
            let mut f = c.functions[pick(&public, rng)?].clone();
            f.name = format!("helper{k}");
            f.visibility = Visibility::Internal;
            f.doc = None;
            c.functions.push(f);
        }
        Mutation::RenameParam => {
            let f = &mut c.functions[pick(&with_params, rng)?];
            let p = rng.gen_range(0..f.params.len());
            f.params[p].name.push_str("_renamed");
        }
        Mutation::ClearBody => {
            c.functions[pick(&public, rng)?].body = Some(Vec::new());
        }
    }
    for (i, v) in c.vars.iter_mut().enumerate() {
        v.ordinal = i;
    }
    Some(c)
}

fn c4_mutations(_: &mut Ledger) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let (mut done, mut flagged, mut wrong) = (0, 0, Vec::new());
    while done < 100 {
        let (s, c) = corpus::PAIRS[rng.gen_range(0..corpus::PAIRS.len())];
        let m = Mutation::ALL[rng.gen_range(0..Mutation::ALL.len())];
        let Some(mutant) = mutate(&unit(c), m, done, &mut rng) else { continue };
        let f = check_syntactic(&spec(s), &mutant, Mode::Create);
        if !f.is_empty() != m.touches_shape() {
            wrong.push(format!("{c} {m:?}: {f:?}"));
        }
        if f.iter().any(|x| x.category != Category::NTI) {
            wrong.push(format!("{c} {m:?}: non-NTI syntactic finding"));
        }
        flagged += usize::from(!f.is_empty());
        done += 1;
    }
    ensure(wrong.is_empty(), format!("{} false verdict(s): {}", wrong.len(), wrong.join("; ")))?;
    Ok(format!("100 mutations, {flagged} shape-touching flagged, {} shape-preserving silent, 0 false verdicts", 100 - flagged))
}

fn c5_transparency(_: &mut Ledger) -> Result<String, String> {
    let mut parts = Vec::new();
    for (file, _) in corpus::implementations() {
        let cov = transparency(file, 200, 0xacce)?;
        ensure(cov.scenarios == 200, format!("{file}: only {} of 200 scenarios deployed", cov.scenarios))?;
        ensure(cov.successes > 0, format!("{file}: no call succeeded"))?;
        parts.push(format!("{}:{}/{}", file.trim_end_matches(".sol"), cov.successes, cov.steps));
    }
    Ok(format!("200 scenarios each; successful/total calls {}", parts.join(" ")))
}

fn c6_lifecycle(ledger: &mut Ledger) -> Result<String, String> {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::beside(&dir.path().join("chain.json"));
    let bounded = || BoundedBackend::new(BoundedConfig::default());
    let s = spec("toy_wallet.spec.sol");
    let alice = user(1);

    let mut d = store.open(DEFAULT_TRUSTED).map_err(|e| e.to_string())?;
    let (px, _) = d.create_contract(&s, corpus::TOY_WALLET, "toy_wallet.sol", vec![], "alice", &mut bounded()).map_err(|e| e.to_string())?;
    let id = d.get_spec(px).ok_or("no record")?;
    d.chain.fund(alice, U256::from(100u8));
    ensure(checked_call(ledger, &mut d.chain, px, "deposit()", vec![], alice, U256::from(10u8)) == Some(true), "deposit reverted")?;
    store.save(&mut d).map_err(|e| e.to_string())?;

    let files = || [&store.chain, &store.registry].map(|p| fs::read(p).unwrap());
    let before = files();
    let v2 = corpus::get("toy_wallet_v2.sol").unwrap();

    let mut d = store.open(DEFAULT_TRUSTED).map_err(|e| e.to_string())?;
    let e = d.upgrade_contract(px, v2, "toy_wallet_v2.sol", "mallory", &mut bounded()).unwrap_err();
    ensure(matches!(e, DeployError::NotOwner { .. }), format!("non-creator: {e}"))?;
    store.save(&mut d).map_err(|e| e.to_string())?;
    ensure(files() == before, "non-creator attempt changed chain or registry file")?;

    let bad = corpus::get("toy_wallet_reentrant.sol").unwrap();
    let mut d = store.open(DEFAULT_TRUSTED).map_err(|e| e.to_string())?;
    let e = d.upgrade_contract(px, bad, "toy_wallet_reentrant.sol", "alice", &mut bounded()).unwrap_err();
    ensure(matches!(e, DeployError::VerificationFailed(_)), format!("non-conforming: {e}"))?;
    store.save(&mut d).map_err(|e| e.to_string())?;
    ensure(files() == before, "non-conforming attempt changed chain or registry file")?;

    let mut d = store.open(DEFAULT_TRUSTED).map_err(|e| e.to_string())?;
    d.upgrade_contract(px, v2, "toy_wallet_v2.sol", "alice", &mut bounded()).map_err(|e| e.to_string())?;
    store.save(&mut d).map_err(|e| e.to_string())?;
    let d = store.open(DEFAULT_TRUSTED).map_err(|e| e.to_string())?;
    ensure(d.chain.state.read_var(px, "accs", &[Value::Addr(alice)]).unwrap() == Value::uint(10), "accs lost in upgrade")?;
    ensure(d.get_spec(px) == Some(id) && d.onchain_spec(px).map_err(|e| e.to_string())? == id, "spec changed")?;
    d.check_mirror()?;
    let audit = store.read_audit().map_err(|e| e.to_string())?;
    tdep::deployer::check_gate(&d.chain.journal_text(), &audit, Some(d.chain.state.state_hash()))?;
    ledger.keep("lifecycle", &d.chain);
    Ok("accs = 10 after upgrade to v2, spec unchanged, refused attempts byte-identical".into())
}

fn c7_registry(ledger: &mut Ledger) -> Result<String, String> {
    let author = user(1);
    let mut j = Journaled::new();
    j.fund(MAINTAINER, U256::ONE);
    j.fund(author, U256::ONE);
    let reg = j.create(Code::from_unit(generate_registry()), vec![], MAINTAINER, U256::ZERO).unwrap().created.unwrap();
    let wallet = Code::from_source(corpus::TOY_WALLET, "toy_wallet.sol").unwrap();
    let impl1 = j.create(wallet.clone(), vec![], author, U256::ZERO).unwrap().created.unwrap();
    let map = |j: &mut Journaled, l: &mut Ledger, a: Address, id: SpecId, from: Address| checked_call(l, j, reg, "new_mapping(address,bytes32)", vec![Value::Addr(a), Value::B32(id.0)], from, U256::ZERO);
    map(&mut j, ledger, impl1, SPEC, MAINTAINER).ok_or("maintainer mapping reverted")?;
    let proxy = Code::from_unit(generate_proxy_for_source(corpus::TOY_WALLET, "toy_wallet.sol", SPEC).unwrap().unit);
    let px = j.create(proxy, vec![Value::Addr(reg), Value::B32(SPEC.0), Value::Addr(impl1)], author, U256::ZERO).unwrap().created.ok_or("proxy constructor reverted")?;
    let spec_of = |j: &Journaled, a: Address| {
        let mut st = j.state.clone();
        st.call_contract(reg, "get_spec(address)", vec![Value::Addr(a)], MAINTAINER, U256::ZERO).unwrap().return_values
    };
    let mut passed = 0;

    ensure(spec_of(&j, Address::from_u64(0xBEEF)) == vec![Value::B32([0; 32])], "unknown address has a spec")?;
    passed += 1;

    let stranger = Address::from_u64(0xBEEF);
    let storage = j.state.account(reg).unwrap().storage.clone();
    map(&mut j, ledger, stranger, SPEC, user(2));
    ensure(j.state.account(reg).unwrap().storage == storage && spec_of(&j, stranger) == vec![Value::B32([0; 32])], "non-maintainer mapping took effect")?;
    passed += 1;

    map(&mut j, ledger, stranger, SpecId([0; 32]), MAINTAINER);
    ensure(j.state.account(reg).unwrap().storage == storage, "zero spec mapping took effect")?;
    passed += 1;

    let other = j.create(wallet.clone(), vec![], author, U256::ZERO).unwrap().created.unwrap();
    map(&mut j, ledger, other, SpecId([0x77; 32]), MAINTAINER);
    let up = |j: &mut Journaled, l: &mut Ledger, to: Address, from: Address| checked_call(l, j, px, "upgrade(address)", vec![Value::Addr(to)], from, U256::ZERO);
    ensure(up(&mut j, ledger, other, author).is_none(), "upgrade to a foreign spec succeeded")?;
    passed += 1;

    let good = j.create(wallet, vec![], author, U256::ZERO).unwrap().created.unwrap();
    map(&mut j, ledger, good, SPEC, MAINTAINER);
    ensure(up(&mut j, ledger, good, user(2)).is_none(), "upgrade by non-author succeeded")?;
    passed += 1;

    ensure(up(&mut j, ledger, good, author) == Some(true), "author upgrade with matching spec reverted")?;
    ensure(j.state.read_var(px, "implementation", &[]).unwrap() == Value::Addr(good), "implementation not switched")?;
    passed += 1;
    ledger.keep("registry", &j);
    Ok(format!("{passed} assertions"))
}

/// Random transactions against every implementation, checking reverts.
fn random_runs(ledger: &mut Ledger) {
    let cfg = BoundedConfig::default();
    for (k, (file, _)) in corpus::implementations().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xd00d + k as u64);
        let mut j = Journaled::new();
        for u in &cfg.users {
            j.fund(*u, cfg.funding);
        }
        let at = j.state.next_address();
        let u = tdep::frontend::parse_unit(corpus::get(file).unwrap(), file).unwrap();
        let (ctors, calls) = candidate_txs(&u, &cfg, at);
        let code = Code::from_source(corpus::get(file).unwrap(), file).unwrap();
        let ctor = &ctors[rng.gen_range(0..ctors.len())];
        let before = j.state.state_hash();
        match j.create(code, ctor.args.clone(), ctor.sender, ctor.value) {
            Ok(r) if r.success() => {}
            _ => {
                assert_eq!(j.state.state_hash(), before, "{file}: failed constructor changed the state");
                ledger.reverts_checked += 1;
                continue;
            }
        }
        for _ in 0..60 {
            if calls.is_empty() {
                break;
            }
            let t = &calls[rng.gen_range(0..calls.len())];
            let sig = if t.sig.is_empty() { "" } else { t.sig.as_str() };
            checked_call(ledger, &mut j, at, sig, t.args.clone(), t.sender, t.value);
        }
        ledger.keep(file, &j);
    }
}

fn c8_determinism(ledger: &mut Ledger) -> Result<String, String> {
    random_runs(ledger);
    for (name, text, hash) in &ledger.journals {
        let replayed = Journaled::replay(text).map_err(|e| format!("{name}: {e}"))?;
        ensure(replayed.state.state_hash() == *hash, format!("{name}: replay diverged"))?;
        ensure(Journaled::replay(&replayed.journal_text()).unwrap().state.state_hash() == *hash, format!("{name}: second replay diverged"))?;
    }
    ensure(ledger.reverts_checked > 0, "no reverted transaction observed")?;
    Ok(format!("{} journals replayed to identical hashes; {} reverted/faulted txs left the pre-state hash", ledger.journals.len(), ledger.reverts_checked))
}

fn stub(dir: &std::path::Path, name: &str, body: &str) -> std::path::PathBuf {
    use std::os::unix::fs::PermissionsExt;
    let p = dir.join(name);
    let mut f = fs::File::create(&p).unwrap();
    writeln!(f, "#!/bin/sh\n{body}").unwrap();
    drop(f);
    fs::set_permissions(&p, fs::Permissions::from_mode(0o755)).unwrap();
    p
}

fn c9_external(_: &mut Ledger) -> Result<String, String> {
    let dir = tempfile::tempdir().unwrap();
    let s = spec("toy_wallet.spec.sol");
    let c = unit("toy_wallet.sol");
    let run = |tool: ToolConfig| verify(&s, &c, &mut ExternalBackend { tool }, Mode::Create).unwrap();
    let tool = |path| ToolConfig { path, timeout_s: 2, ..ToolConfig::default() };
    let cats = |r: &Report| r.findings.iter().map(|f| f.category).collect::<Vec<_>>();

    let r = run(tool(stub(dir.path(), "pass.sh", "test -s \"$1\" && echo 'No errors found.'")));
    ensure(r.passed(), format!("exit 0 + pass pattern: {:?}", r.findings))?;

    let r = run(tool(stub(dir.path(), "diag.sh", "echo 'ToyWallet::withdraw: ERROR'; echo ' - w.sol:9:5: Postcondition might not hold at end of function.'")));
    ensure(cats(&r) == [Category::SPV, Category::SPV], format!("diagnostics: {:?}", r.findings))?;
    ensure(r.findings[1].message.contains("Postcondition might not hold"), "diagnostic text lost")?;

    let r = run(tool(stub(dir.path(), "crash.sh", "echo 'No errors'; exit 1")));
    ensure(cats(&r) == [Category::VRE], format!("nonzero exit: {:?}", r.findings))?;

    let r = run(tool(stub(dir.path(), "mute.sh", "echo 'finished'")));
    ensure(cats(&r) == [Category::VRE], format!("no verdict: {:?}", r.findings))?;

    let r = run(tool(stub(dir.path(), "slow.sh", "sleep 10")));
    ensure(cats(&r) == [Category::VRE] && r.findings[0].message.contains("timed out"), format!("timeout: {:?}", r.findings))?;

    let custom = |p| ToolConfig { pass_regex: "^ALL GOOD$".into(), diagnostic_regex: "^BAD".into(), ..tool(p) };
    let r = run(custom(stub(dir.path(), "custom.sh", "echo 'ALL GOOD'")));
    ensure(r.passed(), "custom pass_regex ignored")?;
    let r = run(custom(stub(dir.path(), "custom2.sh", "echo 'No errors'")));
    ensure(cats(&r) == [Category::VRE], format!("default pattern leaked into custom regex: {:?}", r.findings))?;

    let r = run(tool(dir.path().join("absent")));
    ensure(cats(&r) == [Category::VRE] && r.findings[0].message.contains("backend unavailable"), format!("absent tool: {:?}", r.findings))?;
    Ok("PASS, 2 SPV, VRE on exit 1 / no verdict / timeout / absent; custom pass_regex honoured".into())
}

type Check = fn(&mut Ledger) -> Result<String, String>;

fn main() {
    let criteria: [(u32, &str, Check, Duration); 9] = [
        (1, "worked example", c1_worked_example, Duration::from_secs(1)),
        (2, "reentrancy detection", c2_reentrancy, Duration::from_secs(5)),
        (3, "verdict reproduction", c3_verdicts, Duration::from_secs(60)),
        (4, "syntactic mutations", c4_mutations, Duration::from_secs(60)),
        (5, "proxy transparency", c5_transparency, Duration::from_secs(60)),
        (6, "upgrade lifecycle", c6_lifecycle, Duration::from_secs(60)),
        (7, "registry semantics", c7_registry, Duration::from_secs(1)),
        (8, "determinism and atomicity", c8_determinism, Duration::from_secs(60)),
        (9, "external adapter", c9_external, Duration::from_secs(30)),
    ];
    let mut ledger = Ledger::default();
    let mut failed = 0;
    for (n, name, check, limit) in criteria {
        let start = Instant::now();
        let out = panic::catch_unwind(AssertUnwindSafe(|| check(&mut ledger))).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panicked".into()))
        });
        let took = start.elapsed();
        let out = out.and_then(|m| if took <= limit { Ok(m) } else { Err(format!("took {took:.2?}, limit {limit:?}: {m}")) });
        match out {
            Ok(m) => println!("criterion {n} [{name}]: PASS ({:.2} s, limit {} s) {m}", took.as_secs_f64(), limit.as_secs()),
            Err(m) => {
                failed += 1;
                println!("criterion {n} [{name}]: FAIL ({:.2} s, limit {} s) {m}", took.as_secs_f64(), limit.as_secs());
            }
        }
    }
    println!("acceptance: {} of 9 criteria pass", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

mod common;

use std::fs;

use common::{corpus_loader, spec, user};
use ethnum::U256;
use tdep::conformance::{Category, Verdict};
use tdep::corpus;
use tdep::deployer::{check_gate, DeployError, Deployer, Operation, Outcome, Store, DEFAULT_TRUSTED};
use tdep::sim::{Address, Value};
use tdep::spec::SpecId;
use tdep::verify::runtime::{call_op, create_op, fund_op};
use tdep::verify::{BoundedBackend, BoundedConfig, RuntimeBackend, IMPL_REF};

const WALLET_SPEC: &str = "toy_wallet.spec.sol";

fn bounded() -> BoundedBackend {
    BoundedBackend::new(BoundedConfig::default())
}

fn deploy_wallet(d: &mut Deployer) -> Address {
    let src = corpus::get("toy_wallet.sol").unwrap();
    let (px, r) = d.create_contract(&spec(WALLET_SPEC), src, "toy_wallet.sol", vec![], "alice", &mut bounded()).unwrap();
    assert!(r.passed());
    px
}

fn accs(d: &Deployer, px: Address, who: Address) -> Value {
    d.chain.state.read_var(px, "accs", &[Value::Addr(who)]).unwrap()
}

fn snapshot(store: &Store) -> Vec<Vec<u8>> {
    [&store.chain, &store.registry, &store.journal].iter().map(|p| fs::read(p).unwrap()).collect()
}

#[test]
fn wallet_deploys_behind_a_proxy() {
    let mut d = Deployer::new(DEFAULT_TRUSTED).unwrap();
    assert_eq!(d.registry.registry_addr, Address::from_u64(0x1000));
    let px = deploy_wallet(&mut d);
    assert_eq!(px, Address::from_u64(0x1002));
    let rec = d.record(px).unwrap();
    assert_eq!(rec.current_impl, Address::from_u64(0x1001));
    let id = spec(WALLET_SPEC).id().unwrap();
    assert_eq!(d.get_spec(px), Some(id));
    assert_eq!(d.onchain_spec(px).unwrap(), id);
    assert_eq!(d.onchain_spec(rec.current_impl).unwrap(), id);
    d.check_mirror().unwrap();
    assert_eq!(d.chain.state.code(px).unwrap().name(), "Proxy");
}

#[test]
fn unknown_addresses_have_no_spec() {
    let mut d = Deployer::new(DEFAULT_TRUSTED).unwrap();
    deploy_wallet(&mut d);
    let stranger = Address::from_u64(0xBEEF);
    assert_eq!(d.get_spec(stranger), None);
    assert_eq!(d.onchain_spec(stranger).unwrap(), SpecId([0; 32]));
}

#[test]
fn every_deployer_transaction_comes_from_the_trusted_address() {
    let mut d = Deployer::new(DEFAULT_TRUSTED).unwrap();
    deploy_wallet(&mut d);
    for op in d.chain.ops.iter().filter(|o| o.op != "fund") {
        assert_eq!(op.sender.as_deref(), Some(DEFAULT_TRUSTED.to_string().as_str()), "{op:?}");
    }
}

#[test]
fn reentrant_wallet_is_refused_without_transactions() {
    let wallet = Address::from_u64(0x1000);
    let scenario = vec![
        fund_op(user(1), 1_000),
        fund_op(user(2), 1_000),
        create_op(IMPL_REF, &[], user(1), 0),
        create_op("attacker.sol", &[Value::Addr(wallet)], user(2), 0),
        call_op(wallet, "deposit()", &[], user(1), 100),
        call_op(Address::from_u64(0x1001), "attack(uint256,uint256)", &[Value::uint(5), Value::uint(1)], user(2), 10),
    ];
    let mut backend = RuntimeBackend::new(scenario, corpus_loader);
    let mut d = Deployer::new(DEFAULT_TRUSTED).unwrap();
    let before = (d.chain.ops.len(), d.chain.state.state_hash());
    let src = corpus::get("toy_wallet_reentrant.sol").unwrap();
    match d.create_contract(&spec(WALLET_SPEC), src, "toy_wallet_reentrant.sol", vec![], "mallory", &mut backend) {
        Err(DeployError::VerificationFailed(r)) => assert!(r.findings.iter().any(|f| f.category == Category::SPV && f.site.contains("withdraw"))),
        other => panic!("expected a refusal, got {:?}", other.map(|x| x.0)),
    }
    assert_eq!((d.chain.ops.len(), d.chain.state.state_hash()), before);
    assert!(d.registry.records.is_empty());
    assert_eq!(d.audit.len(), 1);
    assert_eq!(d.audit[0].outcome, Outcome::Rejected);
}

#[test]
fn syntactic_failures_report_only_nti() {
    let mut d = Deployer::new(DEFAULT_TRUSTED).unwrap();
    let src = corpus::get("erc20_missing_allowance.sol").unwrap();
    let err = d.create_contract(&spec("erc20.spec.sol"), src, "erc20_missing_allowance.sol", vec![Value::uint(100)], "bob", &mut bounded()).unwrap_err();
    let r = err.report().expect("report attached");
    assert_eq!(r.verdict, Verdict::FAIL);
    assert!(!r.findings.is_empty());
    assert!(r.findings.iter().all(|f| f.category == Category::NTI));
}

#[test]
fn upgrade_keeps_proxy_state_and_spec() {
    let mut d = Deployer::new(DEFAULT_TRUSTED).unwrap();
    let px = deploy_wallet(&mut d);
    let id = d.get_spec(px).unwrap();
    let alice = user(1);
    d.chain.fund(alice, U256::from(100u8));
    assert!(d.chain.call(px, "deposit()", vec![], alice, U256::from(10u8)).unwrap().success());
    assert_eq!(accs(&d, px, alice), Value::uint(10));

    let v2 = corpus::get("toy_wallet_v2.sol").unwrap();
    d.upgrade_contract(px, v2, "toy_wallet_v2.sol", "alice", &mut bounded()).unwrap();
    let rec = d.record(px).unwrap().clone();
    assert_eq!(rec.current_impl, Address::from_u64(0x1003));
    assert_eq!(rec.history.len(), 2);
    assert_eq!(d.get_spec(px), Some(id));
    assert_eq!(accs(&d, px, alice), Value::uint(10));
    assert_eq!(d.chain.state.balance(px), U256::from(10u8));

    assert!(d.chain.call(px, "withdraw(uint256)", vec![Value::uint(4)], alice, U256::ZERO).unwrap().success());
    assert_eq!(accs(&d, px, alice), Value::uint(6));
    assert!(!d.chain.call(px, "withdraw(uint256)", vec![Value::uint(7)], alice, U256::ZERO).unwrap().success());
    d.check_mirror().unwrap();
}

#[test]
fn spec_survives_repeated_upgrades() {
    let mut d = Deployer::new(DEFAULT_TRUSTED).unwrap();
    let px = deploy_wallet(&mut d);
    let id = d.get_spec(px).unwrap();
    let v2 = corpus::get("toy_wallet_v2.sol").unwrap();
    for _ in 0..3 {
        d.upgrade_contract(px, v2, "toy_wallet_v2.sol", "alice", &mut bounded()).unwrap();
        assert_eq!(d.get_spec(px), Some(id));
        assert_eq!(d.onchain_spec(px).unwrap(), id);
        d.check_mirror().unwrap();
    }
    let rec = d.record(px).unwrap();
    assert_eq!(rec.history.len(), 4);
    assert_eq!(rec.spec_id, id);
}

#[test]
fn foreign_or_failing_upgrades_leave_files_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::beside(&dir.path().join("chain.json"));
    let mut d = store.open(DEFAULT_TRUSTED).unwrap();
    let px = deploy_wallet(&mut d);
    d.chain.fund(user(1), U256::from(100u8));
    assert!(d.chain.call(px, "deposit()", vec![], user(1), U256::from(10u8)).unwrap().success());
    store.save(&mut d).unwrap();
    let before = snapshot(&store);

    let v2 = corpus::get("toy_wallet_v2.sol").unwrap();
    let mut d = store.open(DEFAULT_TRUSTED).unwrap();
    let err = d.upgrade_contract(px, v2, "toy_wallet_v2.sol", "mallory", &mut bounded()).unwrap_err();
    assert!(matches!(err, DeployError::NotOwner { .. }), "{err}");
    store.save(&mut d).unwrap();
    assert_eq!(snapshot(&store), before);

    let bad = corpus::get("toy_wallet_reentrant.sol").unwrap();
    let mut d = store.open(DEFAULT_TRUSTED).unwrap();
    let old_impl = d.record(px).unwrap().current_impl;
    let err = d.upgrade_contract(px, bad, "toy_wallet_reentrant.sol", "alice", &mut bounded()).unwrap_err();
    assert!(matches!(err, DeployError::VerificationFailed(_)), "{err}");
    store.save(&mut d).unwrap();
    assert_eq!(snapshot(&store), before);
    assert_eq!(d.chain.state.read_var(px, "implementation", &[]).unwrap(), Value::Addr(old_impl));

    let audit = store.read_audit().unwrap();
    let outcomes: Vec<_> = audit.iter().map(|e| (e.op, e.outcome)).collect();
    assert_eq!(outcomes, vec![(Operation::Create, Outcome::Deployed), (Operation::Upgrade, Outcome::NotOwner), (Operation::Upgrade, Outcome::Rejected)]);
}

#[test]
fn erc20_upgrade_to_the_uniswap_body_is_refused() {
    let mut d = Deployer::new(DEFAULT_TRUSTED).unwrap();
    let s = spec("erc20.spec.sol");
    let (px, _) = d.create_contract(&s, corpus::ERC20, "erc20.sol", vec![Value::uint(1000)], "carol", &mut bounded()).unwrap();
    let before = d.record(px).unwrap().current_impl;
    let ops = d.chain.ops.len();
    let err = d.upgrade_contract(px, corpus::get("erc20_uniswap.sol").unwrap(), "erc20_uniswap.sol", "carol", &mut bounded()).unwrap_err();
    let r = err.report().unwrap();
    assert!(r.findings.iter().any(|f| f.category == Category::SPV && f.site.contains("transferFrom")), "{:?}", r.findings);
    assert_eq!(d.chain.ops.len(), ops);
    assert_eq!(d.chain.state.read_var(px, "implementation", &[]).unwrap(), Value::Addr(before));
    // the trusted address created the proxy, so the inlined constructor credits it
    assert_eq!(d.chain.state.read_var(px, "balanceOf", &[Value::Addr(DEFAULT_TRUSTED)]).unwrap(), Value::uint(1000));
}

#[test]
fn unknown_proxy_is_reported() {
    let mut d = Deployer::new(DEFAULT_TRUSTED).unwrap();
    let v2 = corpus::get("toy_wallet_v2.sol").unwrap();
    let err = d.upgrade_contract(Address::from_u64(0x1234), v2, "toy_wallet_v2.sol", "alice", &mut bounded()).unwrap_err();
    assert!(matches!(err, DeployError::UnknownProxy(_)));
}

#[test]
fn persisted_logs_replay_and_pass_the_gate() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::beside(&dir.path().join("chain.json"));
    let mut d = store.open(DEFAULT_TRUSTED).unwrap();
    let px = deploy_wallet(&mut d);
    let v2 = corpus::get("toy_wallet_v2.sol").unwrap();
    d.upgrade_contract(px, v2, "toy_wallet_v2.sol", "alice", &mut bounded()).unwrap();
    let _ = d.upgrade_contract(px, v2, "toy_wallet_v2.sol", "eve", &mut bounded());
    store.save(&mut d).unwrap();

    let reopened = store.open(DEFAULT_TRUSTED).unwrap();
    assert_eq!(reopened.chain.state.state_hash(), d.chain.state.state_hash());
    assert_eq!(reopened.registry, d.registry);
    let journal = fs::read_to_string(&store.journal).unwrap();
    let audit = store.read_audit().unwrap();
    check_gate(&journal, &audit, Some(d.chain.state.state_hash())).unwrap();

    // an upgrade issued behind the deployer's back is caught
    let mut rogue = store.open(DEFAULT_TRUSTED).unwrap();
    let imp = rogue.record(px).unwrap().current_impl;
    let r = rogue.chain.call(px, "upgrade(address)", vec![Value::Addr(imp)], DEFAULT_TRUSTED, U256::ZERO).unwrap();
    assert!(r.success());
    let err = check_gate(&rogue.chain.journal_text(), &audit, None).unwrap_err();
    assert!(err.contains("without a passing report"), "{err}");

    // as is a tampered report
    let mut forged = audit.clone();
    forged[0].report.as_mut().unwrap().verdict = Verdict::FAIL;
    assert!(check_gate(&journal, &forged, None).is_err());
}

#[test]
fn lock_serializes_writers() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::beside(&dir.path().join("chain.json"));
    let held = store.lock().unwrap();
    let f = fs::OpenOptions::new().write(true).open(&store.lock).unwrap();
    assert!(f.try_lock().is_err());
    drop(held);
    assert!(f.try_lock().is_ok());
}

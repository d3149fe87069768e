use ethnum::U256;
use proptest::prelude::*;
use tdep::corpus;
use tdep::frontend::TypeExpr;
use tdep::sim::{persist, Address, ChainState, Code, SimError, Status, Value};

fn a(n: u64) -> Address {
    Address::from_u64(n)
}

fn u(n: u64) -> U256 {
    U256::from(n)
}

fn accs(st: &ChainState, wallet: Address, who: Address) -> U256 {
    let ty = TypeExpr::Mapping(Box::new(TypeExpr::Address), Box::new(TypeExpr::Uint256));
    st.account(wallet).unwrap().storage.read(0, &ty, &[Value::Addr(who)]).unwrap().as_uint().unwrap()
}

fn funded() -> ChainState {
    let mut st = ChainState::new();
    for k in 1..=3 {
        st.fund(a(k), u(1_000));
    }
    st
}

fn wallet(st: &mut ChainState, src: &str) -> Address {
    let code = Code::from_source(src, "wallet.sol").unwrap();
    let r = st.create_contract(code, vec![], a(1), U256::ZERO).unwrap();
    r.created.unwrap()
}

#[test]
fn addresses_are_sequential() {
    let mut st = funded();
    assert_eq!(wallet(&mut st, corpus::TOY_WALLET), a(0x1000));
    assert_eq!(wallet(&mut st, corpus::TOY_WALLET), a(0x1001));
}

#[test]
fn fresh_wallet_is_empty() {
    let mut st = funded();
    let w = wallet(&mut st, corpus::TOY_WALLET);
    assert_eq!(st.balance(w), U256::ZERO);
    assert!(st.account(w).unwrap().storage.is_empty());
    assert_eq!(accs(&st, w, a(2)), U256::ZERO);
}

#[test]
fn deposit_then_withdraw() {
    let mut st = funded();
    let w = wallet(&mut st, corpus::TOY_WALLET);
    let r = st.call_contract(w, "deposit()", vec![], a(2), u(10)).unwrap();
    assert!(r.success());
    assert_eq!(accs(&st, w, a(2)), u(10));
    assert_eq!(st.balance(w), u(10));
    assert_eq!(st.balance(a(2)), u(990));

    let before = st.state_hash();
    let r = st.call_contract(w, "withdraw(uint256)", vec![Value::uint(11)], a(2), U256::ZERO).unwrap();
    assert_eq!(r.status, Status::Reverted);
    assert!(r.events.is_empty());
    assert_eq!(st.state_hash(), before);

    let r = st.call_contract(w, "withdraw(uint256)", vec![Value::uint(10)], a(2), U256::ZERO).unwrap();
    assert!(r.success());
    assert_eq!(accs(&st, w, a(2)), U256::ZERO);
    assert_eq!(st.balance(w), U256::ZERO);
    assert_eq!(st.balance(a(2)), u(1_000));
}

#[test]
fn value_to_non_payable_reverts() {
    let mut st = funded();
    let w = wallet(&mut st, corpus::TOY_WALLET);
    let r = st.call_contract(w, "withdraw(uint256)", vec![Value::uint(0)], a(2), u(1)).unwrap();
    assert_eq!(r.status, Status::Reverted);
    assert_eq!(st.balance(a(2)), u(1_000));
}

#[test]
fn top_level_errors() {
    let mut st = funded();
    let w = wallet(&mut st, corpus::TOY_WALLET);
    assert!(matches!(st.call_contract(w, "nope()", vec![], a(2), U256::ZERO), Err(SimError::NoSuchFunction { .. })));
    assert!(matches!(st.call_contract(a(9), "deposit()", vec![], a(2), U256::ZERO), Err(SimError::NoCode(_))));
    assert!(matches!(st.call_contract(w, "deposit()", vec![], a(2), u(5_000)), Err(SimError::InsufficientFunds { .. })));
    assert!(matches!(st.call_contract(w, "withdraw(uint256)", vec![Value::Bool(true)], a(2), U256::ZERO), Err(SimError::BadArguments(_))));
}

const PROBE: &str = r#"
contract Probe {
    address seen;
    uint256 got;

    constructor() public payable {
    }

    function record() public payable returns (uint256) {
        seen = msg.sender;
        got = msg.value;
        return 7;
    }

    function pay(address to, uint256 amount) public returns (bool) {
        return to.send(amount);
    }

    function poke(address to, uint256 amount) public returns (bool) {
        bool ok;
        (ok,) = to.call.value(amount)("");
        return ok;
    }

    function forward(address impl) public payable returns (uint256) {
        (bool success, bytes memory data) = impl.delegatecall(abi.encodeWithSignature("record()"));
        require(success);
        return abi.decode(data, (uint256));
    }

    function missing(address impl) public returns (bool) {
        (bool success, bytes memory data) = impl.delegatecall(abi.encodeWithSignature("absent()"));
        return success;
    }

    function () external payable {
        require(msg.value != 13);
        got = got + msg.value;
    }
}
"#;

fn probe(st: &mut ChainState, value: u64) -> Address {
    let code = Code::from_source(PROBE, "probe.sol").unwrap();
    st.create_contract(code, vec![], a(1), u(value)).unwrap().created.unwrap()
}

fn slot(st: &ChainState, at: Address, ord: usize, ty: TypeExpr) -> Value {
    st.account(at).map(|x| x.storage.read(ord, &ty, &[]).unwrap()).unwrap_or_else(|| Value::zero(&ty).unwrap())
}

#[test]
fn send_moves_wei_without_running_code() {
    let mut st = funded();
    let p = probe(&mut st, 100);
    let q = probe(&mut st, 0);
    let r = st.call_contract(p, "pay(address,uint256)", vec![Value::Addr(q), Value::uint(13)], a(2), U256::ZERO).unwrap();
    assert_eq!(r.return_values, vec![Value::Bool(true)]);
    assert_eq!(st.balance(q), u(13));
    assert_eq!(slot(&st, q, 1, TypeExpr::Uint256), Value::uint(0));
    let r = st.call_contract(p, "pay(address,uint256)", vec![Value::Addr(q), Value::uint(1_000)], a(2), U256::ZERO).unwrap();
    assert_eq!(r.return_values, vec![Value::Bool(false)]);
    assert!(r.success());
    assert_eq!(st.balance(p), u(87));
}

#[test]
fn call_value_runs_the_fallback() {
    let mut st = funded();
    let p = probe(&mut st, 100);
    let q = probe(&mut st, 0);
    let r = st.call_contract(p, "poke(address,uint256)", vec![Value::Addr(q), Value::uint(5)], a(2), U256::ZERO).unwrap();
    assert_eq!(r.return_values, vec![Value::Bool(true)]);
    assert_eq!(slot(&st, q, 1, TypeExpr::Uint256), Value::uint(5));
    // Fallback revert: outer sees false and the inner transfer is undone.
    let r = st.call_contract(p, "poke(address,uint256)", vec![Value::Addr(q), Value::uint(13)], a(2), U256::ZERO).unwrap();
    assert_eq!(r.return_values, vec![Value::Bool(false)]);
    assert_eq!(st.balance(q), u(5));
    // No code: plain transfer.
    let r = st.call_contract(p, "poke(address,uint256)", vec![Value::Addr(a(9)), Value::uint(3)], a(2), U256::ZERO).unwrap();
    assert_eq!(r.return_values, vec![Value::Bool(true)]);
    assert_eq!(st.balance(a(9)), u(3));
}

#[test]
fn delegatecall_uses_caller_context() {
    let mut st = funded();
    let proxy = probe(&mut st, 0);
    let imp = probe(&mut st, 0);
    let r = st.call_contract(proxy, "forward(address)", vec![Value::Addr(imp)], a(3), u(4)).unwrap();
    assert!(r.success());
    assert_eq!(r.return_values, vec![Value::uint(7)]);
    assert_eq!(slot(&st, proxy, 0, TypeExpr::Address), Value::Addr(a(3)));
    assert_eq!(slot(&st, proxy, 1, TypeExpr::Uint256), Value::uint(4));
    assert_eq!(slot(&st, imp, 0, TypeExpr::Address), Value::Addr(Address::ZERO));
    assert_eq!(st.balance(proxy), u(4));
    assert_eq!(st.balance(imp), U256::ZERO);
    let r = st.call_contract(proxy, "missing(address)", vec![Value::Addr(imp)], a(3), U256::ZERO).unwrap();
    assert_eq!(r.return_values, vec![Value::Bool(false)]);
}

fn attack(src: &str, amount: u64, reentries: u64) -> (ChainState, Address, Address, tdep::sim::Receipt) {
    let mut st = funded();
    let w = wallet(&mut st, src);
    st.call_contract(w, "deposit()", vec![], a(2), u(100)).unwrap();
    let code = Code::from_source(corpus::ATTACKER, "attacker.sol").unwrap();
    let att = st.create_contract(code, vec![Value::Addr(w)], a(3), U256::ZERO).unwrap().created.unwrap();
    let r = st
        .call_contract(att, "attack(uint256,uint256)", vec![Value::uint(amount), Value::uint(reentries)], a(3), u(10))
        .unwrap();
    (st, w, att, r)
}

#[test]
fn reentrancy_drains_the_flawed_wallet() {
    let (st, w, att, r) = attack(corpus::TOY_WALLET_REENTRANT, 10, 10);
    assert!(r.success(), "{:?}", r.revert_reason);
    assert_eq!(st.balance(w), U256::ZERO);
    assert_eq!(st.balance(att), u(110));
    assert!(!r.wrap_events.is_empty());
}

#[test]
fn original_wallet_resists_the_attack() {
    let (st, w, att, r) = attack(corpus::TOY_WALLET, 10, 10);
    assert!(r.success());
    assert_eq!(st.balance(w), u(100));
    assert_eq!(st.balance(att), u(10));
    assert_eq!(accs(&st, w, att), U256::ZERO);
}

#[test]
fn constructor_revert_creates_nothing() {
    let mut st = funded();
    let src = "contract C { constructor(uint256 x) public { require(x > 0); } }";
    let code = Code::from_source(src, "c.sol").unwrap();
    let before = st.state_hash();
    let r = st.create_contract(code.clone(), vec![Value::uint(0)], a(1), U256::ZERO).unwrap();
    assert_eq!(r.status, Status::Reverted);
    assert_eq!(r.created, None);
    assert_eq!(st.state_hash(), before);
    let r = st.create_contract(code, vec![Value::uint(1)], a(1), U256::ZERO).unwrap();
    assert_eq!(r.created, Some(a(0x1000)));
}

#[test]
fn wrapping_arithmetic_is_recorded() {
    let mut st = funded();
    let src = "contract C { uint256 x; function dec() public { x = x - 1; } function safe() public { x = x.sub(1); } }";
    let c = st.create_contract(Code::from_source(src, "c.sol").unwrap(), vec![], a(1), U256::ZERO).unwrap().created.unwrap();
    let r = st.call_contract(c, "dec()", vec![], a(1), U256::ZERO).unwrap();
    assert_eq!(r.wrap_events.len(), 1);
    assert_eq!(r.wrap_events[0].op, "-");
    assert_eq!(slot(&st, c, 0, TypeExpr::Uint256), Value::Uint(U256::MAX));
    st.call_contract(c, "dec()", vec![], a(1), U256::ZERO).unwrap();
    let r = st.call_contract(c, "safe()", vec![], a(1), U256::ZERO).unwrap();
    assert!(r.success());
    let src2 = "contract D { uint256 x; function f() public { x = x.sub(1); } }";
    let d = st.create_contract(Code::from_source(src2, "d.sol").unwrap(), vec![], a(1), U256::ZERO).unwrap().created.unwrap();
    assert_eq!(st.call_contract(d, "f()", vec![], a(1), U256::ZERO).unwrap().status, Status::Reverted);
}

#[test]
fn step_budget_is_a_fault() {
    let mut st = funded();
    let src = "contract L { uint256 n; function spin() public { for (uint256 i = 0; i < 10000000; i++) { n = i; } } }";
    let c = st.create_contract(Code::from_source(src, "l.sol").unwrap(), vec![], a(1), U256::ZERO).unwrap().created.unwrap();
    let before = st.state_hash();
    assert!(matches!(st.call_contract(c, "spin()", vec![], a(1), U256::ZERO), Err(SimError::StepBudget(_))));
    assert_eq!(st.state_hash(), before);
}

#[test]
fn events_are_logged_and_dropped_on_revert() {
    let mut st = funded();
    let c = st
        .create_contract(Code::from_source(corpus::ERC20, "erc20.sol").unwrap(), vec![Value::uint(50)], a(1), U256::ZERO)
        .unwrap()
        .created
        .unwrap();
    let r = st.call_contract(c, "transfer(address,uint256)", vec![Value::Addr(a(2)), Value::uint(5)], a(1), U256::ZERO).unwrap();
    assert_eq!(r.events.len(), 1);
    assert_eq!(r.events[0].event, "Transfer");
    let r = st.call_contract(c, "transfer(address,uint256)", vec![Value::Addr(a(2)), Value::uint(500)], a(1), U256::ZERO).unwrap();
    assert_eq!(r.status, Status::Reverted);
    assert_eq!(st.log.len(), 1);
}

#[test]
fn persistence_round_trip_and_replay() {
    let run = || {
        let (st, ..) = attack(corpus::TOY_WALLET_REENTRANT, 5, 1);
        st
    };
    let st = run();
    let text = persist::to_string(&st);
    let back = persist::from_str(&text).unwrap();
    assert_eq!(back, st);
    assert_eq!(back.state_hash(), st.state_hash());
    assert_eq!(run().state_hash(), st.state_hash());
}

#[test]
fn scripts_drive_the_chain() {
    let script = r#"{"op":"fund","addr":"0x01","value":100}
{"op":"create","code":"wallet","sender":"0x01"}
{"op":"call","addr":"0x1000","sig":"deposit()","sender":"0x01","value":"40"}
{"op":"call","addr":"0x1000","sig":"withdraw(uint256)","args":["15"],"sender":"0x01"}
"#;
    let mut st = ChainState::new();
    let res = persist::run_script(&mut st, script, &mut |_| Code::from_source(corpus::TOY_WALLET, "w").map_err(|e| e.to_string())).unwrap();
    assert_eq!(res.len(), 4);
    assert_eq!(st.balance(a(0x1000)), u(25));
    assert_eq!(st.balance(a(1)), u(75));
    let err = persist::run_script(&mut st, "{\"op\":\"bogus\"}", &mut |_| Err("no".into())).unwrap_err();
    assert!(err.to_string().starts_with("line 1"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn untouched_keys_read_zero(keys in proptest::collection::vec(any::<u64>(), 1..8), probe_key in any::<u64>()) {
        let mut st = funded();
        let w = wallet(&mut st, corpus::TOY_WALLET);
        for k in &keys {
            st.fund(a(*k | 0x10000), u(10));
            st.call_contract(w, "deposit()", vec![], a(*k | 0x10000), u(1)).unwrap();
        }
        let probe_addr = a(probe_key | 0x1_0000_0000_0000);
        prop_assume!(!keys.iter().any(|k| a(*k | 0x10000) == probe_addr));
        prop_assert_eq!(accs(&st, w, probe_addr), U256::ZERO);
    }

    #[test]
    fn conservation_and_atomicity(ops in proptest::collection::vec((0u8..3, 1u64..4, 0u64..60), 1..12)) {
        let mut st = funded();
        let w = wallet(&mut st, corpus::TOY_WALLET);
        let total = st.total_balance();
        for (kind, who, amt) in ops {
            let before = st.state_hash();
            let r = match kind {
                0 => st.call_contract(w, "deposit()", vec![], a(who), u(amt)),
                _ => st.call_contract(w, "withdraw(uint256)", vec![Value::uint(amt)], a(who), U256::ZERO),
            }
            .unwrap();
            prop_assert_eq!(st.total_balance(), total);
            if r.status == Status::Reverted {
                prop_assert_eq!(st.state_hash(), before);
            }
        }
    }
}

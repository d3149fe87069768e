mod common;

use common::{transparency, user, MAINTAINER, SPEC};
use ethnum::U256;
use proptest::prelude::*;
use tdep::corpus;
use tdep::frontend::{parse_unit, TypeExpr};
use tdep::proxy::{generate_proxy, generate_proxy_for_source, generate_registry, ProxyError, ProxyPlan, INJECTED_VARS, REGISTRY_SOURCE};
use tdep::sim::{Address, ChainState, Code, Value};
use tdep::spec::SpecId;

fn squash(s: &str) -> String {
    s.chars().filter(|c| !c.is_whitespace()).collect()
}

const GOLDEN: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/corpus/golden");

fn golden(name: &str, actual: &str) {
    let path = format!("{GOLDEN}/{name}");
    if std::env::var_os("TDEP_BLESS").is_some() {
        std::fs::write(&path, actual).unwrap();
    }
    let want = std::fs::read_to_string(&path).unwrap();
    assert_eq!(actual, want, "golden {name} differs; rerun with TDEP_BLESS=1 to update");
}

#[test]
fn reference_layout_is_reproduced() {
    let base = parse_unit(&std::fs::read_to_string(format!("{GOLDEN}/fig9_base.sol")).unwrap(), "base.sol").unwrap();
    let want = std::fs::read_to_string(format!("{GOLDEN}/fig9_proxy.sol")).unwrap();
    let got = generate_proxy(&base, SPEC).unwrap();
    assert_eq!(squash(&got.source), squash(&want));
}

#[test]
fn corpus_goldens() {
    for (file, out) in [("erc20.sol", "erc20_proxy.sol"), ("toy_wallet.sol", "toy_wallet_proxy.sol"), ("erc1155.sol", "erc1155_proxy.sol"), ("attacker.sol", "attacker_proxy.sol")] {
        let g = generate_proxy_for_source(corpus::get(file).unwrap(), file, SPEC).unwrap();
        golden(out, &g.source);
    }
}

#[test]
fn every_implementation_gets_a_checked_proxy() {
    for (file, src) in corpus::implementations() {
        let g = generate_proxy_for_source(src, file, SPEC).unwrap_or_else(|e| panic!("{file}: {e}"));
        let base = parse_unit(src, file).unwrap();
        let fwd: Vec<String> = g.unit.dispatchable().map(|f| f.canonical_signature()).collect();
        let mut want: Vec<String> = base.dispatchable().map(|f| f.canonical_signature()).collect();
        want.push("upgrade(address)".into());
        assert_eq!(fwd, want, "{file}");
        assert_eq!(g.unit.fallback().is_some(), base.fallback().is_some());
    }
}

#[test]
fn empty_contract_gets_only_the_machinery() {
    let c = parse_unit("contract E { uint256 x; }", "e.sol").unwrap();
    let g = generate_proxy(&c, SPEC).unwrap();
    let names: Vec<String> = g.unit.functions.iter().map(|f| f.canonical_signature()).collect();
    assert_eq!(names, ["constructor(address,bytes32,address)", "upgrade(address)", "_upgrade(address)"]);
}

#[test]
fn reserved_names_and_zero_id_are_rejected() {
    let c = parse_unit("contract E { address implementation; }", "e.sol").unwrap();
    assert!(matches!(ProxyPlan::new(&c, SPEC), Err(ProxyError::NameClash { name, .. }) if name == "implementation"));
    let c = parse_unit("contract E { uint256 x; function upgrade(address a) public { x = 1; } }", "e.sol").unwrap();
    assert!(matches!(ProxyPlan::new(&c, SPEC), Err(ProxyError::NameClash { name, .. }) if name == "upgrade"));
    let c = parse_unit("contract E { uint256 author; }", "e.sol").unwrap();
    assert!(matches!(ProxyPlan::new(&c, SPEC), Err(ProxyError::NameClash { .. })));
    let c = parse_unit("contract E { uint256 x; }", "e.sol").unwrap();
    assert_eq!(ProxyPlan::new(&c, SpecId::ZERO).unwrap_err(), ProxyError::ZeroSpecId);
}

#[test]
fn forwarders_mirror_payability() {
    let g = generate_proxy_for_source(corpus::TOY_WALLET, "toy_wallet.sol", SPEC).unwrap();
    assert_eq!(g.unit.function("deposit").unwrap().mutability, tdep::frontend::Mutability::Payable);
    assert_eq!(g.unit.function("withdraw").unwrap().mutability, tdep::frontend::Mutability::Nonpayable);

    let cfg = tdep::verify::BoundedConfig::default();
    let ctor = tdep::verify::Tx { sig: String::new(), args: vec![], sender: user(1), value: U256::ZERO };
    let mut t = common::twin("toy_wallet.sol", &ctor, &cfg).unwrap();
    let p = &mut t.proxied;
    let r = p.call_contract(common::TARGET_AT, "deposit()", vec![], user(1), U256::from(10u8)).unwrap();
    assert!(r.success());
    let r = p.call_contract(common::TARGET_AT, "withdraw(uint256)", vec![Value::uint(1)], user(1), U256::ONE).unwrap();
    assert!(!r.success());
    assert_eq!(p.balance(common::TARGET_AT), U256::from(10u8));
    assert_eq!(p.balance(common::IMPL_AT), U256::ZERO);
    assert!(p.account(common::IMPL_AT).unwrap().storage.is_empty());
    let accs = p.account(common::TARGET_AT).unwrap().storage.read(0, &TypeExpr::Mapping(Box::new(TypeExpr::Address), Box::new(TypeExpr::Uint256)), &[Value::Addr(user(1))]);
    assert_eq!(accs.unwrap(), Value::uint(10));
}

#[test]
fn injected_variables_follow_the_mirrored_ones() {
    for (file, src) in corpus::implementations() {
        let base = parse_unit(src, file).unwrap();
        let g = generate_proxy_for_source(src, file, SPEC).unwrap();
        let n = base.vars.len();
        for (a, b) in base.vars.iter().zip(&g.unit.vars) {
            assert_eq!((&a.name, &a.ty, a.ordinal), (&b.name, &b.ty, b.ordinal), "{file}");
        }
        let tail: Vec<&str> = g.unit.vars[n..].iter().map(|v| v.name.as_str()).collect();
        assert_eq!(tail, INJECTED_VARS);
        assert_eq!(g.unit.vars[n].ordinal, n);
    }
}

fn ty_strategy() -> impl Strategy<Value = TypeExpr> {
    let leaf = prop_oneof![Just(TypeExpr::Uint256), Just(TypeExpr::Bool), Just(TypeExpr::Address), Just(TypeExpr::Bytes32)];
    leaf.prop_recursive(2, 6, 2, |inner| {
        prop_oneof![
            (prop_oneof![Just(TypeExpr::Uint256), Just(TypeExpr::Address)], inner.clone()).prop_map(|(k, v)| TypeExpr::Mapping(Box::new(k), Box::new(v))),
            inner.prop_map(|e| TypeExpr::Array(Box::new(e))),
        ]
    })
}

proptest! {
    #[test]
    fn layout_is_preserved(tys in prop::collection::vec(ty_strategy(), 0..6), public in prop::collection::vec(any::<bool>(), 6)) {
        let mut src = String::from("contract R {\n");
        for (k, t) in tys.iter().enumerate() {
            src.push_str(&format!("    {t} v{k};\n"));
        }
        for (k, t) in tys.iter().enumerate().filter(|(k, t)| public[*k] && t.is_elementary()) {
            src.push_str(&format!("    function get{k}() public view returns ({t}) {{ return v{k}; }}\n"));
        }
        src.push_str("}\n");
        let base = parse_unit(&src, "r.sol").unwrap();
        let g = generate_proxy(&base, SPEC).unwrap();
        for (a, b) in base.vars.iter().zip(&g.unit.vars) {
            prop_assert_eq!((&a.name, &a.ty, a.ordinal), (&b.name, &b.ty, b.ordinal));
        }
        prop_assert_eq!(g.unit.vars.len(), base.vars.len() + INJECTED_VARS.len());
    }
}

// ---- registry and upgrade gate ----

fn registry_chain() -> (ChainState, Address) {
    let mut st = ChainState::new();
    st.fund(MAINTAINER, U256::ONE);
    st.fund(user(1), U256::ONE);
    let r = st.create_contract(Code::from_unit(generate_registry()), vec![], MAINTAINER, U256::ZERO).unwrap().created.unwrap();
    (st, r)
}

fn get_spec(st: &mut ChainState, r: Address, a: Address) -> Value {
    st.call_contract(r, "get_spec(address)", vec![Value::Addr(a)], user(1), U256::ZERO).unwrap().return_values[0].clone()
}

#[test]
fn registry_source_parses_with_the_reference_interface() {
    let u = generate_registry();
    assert_eq!(u.name, "Registry");
    let sigs: Vec<String> = u.dispatchable().map(|f| f.canonical_signature()).collect();
    assert_eq!(sigs, ["new_mapping(address,bytes32)", "get_spec(address)"]);
    assert!(REGISTRY_SOURCE.contains("msg.sender == maintainer && spec_id != bytes32(0)"));
}

#[test]
fn registry_guards_are_silent() {
    let (mut st, r) = registry_chain();
    let a = Address::from_u64(0x4242);
    assert_eq!(get_spec(&mut st, r, a), Value::B32([0; 32]));
    let h = st.state_hash();
    let rc = st.call_contract(r, "new_mapping(address,bytes32)", vec![Value::Addr(a), Value::B32(SPEC.0)], user(1), U256::ZERO).unwrap();
    assert!(rc.success());
    assert_eq!(st.state_hash(), h);
    let rc = st.call_contract(r, "new_mapping(address,bytes32)", vec![Value::Addr(a), Value::B32([0; 32])], MAINTAINER, U256::ZERO).unwrap();
    assert!(rc.success());
    assert_eq!(st.state_hash(), h);
    st.call_contract(r, "new_mapping(address,bytes32)", vec![Value::Addr(a), Value::B32(SPEC.0)], MAINTAINER, U256::ZERO).unwrap();
    assert_eq!(get_spec(&mut st, r, a), Value::B32(SPEC.0));
}

#[test]
fn upgrade_is_gated_on_author_and_spec() {
    let cfg = tdep::verify::BoundedConfig::default();
    let ctor = tdep::verify::Tx { sig: String::new(), args: vec![], sender: user(1), value: U256::ZERO };
    let mut t = common::twin("toy_wallet.sol", &ctor, &cfg).unwrap();
    let st = &mut t.proxied;
    st.fund(MAINTAINER, U256::ONE);
    let v2 = st.create_contract(Code::from_source(corpus::TOY_WALLET_V2, "v2.sol").unwrap(), vec![], user(1), U256::ZERO).unwrap().created.unwrap();
    let up = |st: &mut ChainState, from: Address| st.call_contract(common::TARGET_AT, "upgrade(address)", vec![Value::Addr(v2)], from, U256::ZERO).unwrap();

    let h = st.state_hash();
    assert!(!up(st, user(1)).success(), "unregistered implementation");
    assert_eq!(st.state_hash(), h);

    let other = SpecId([0x11; 32]);
    st.call_contract(common::REGISTRY_AT, "new_mapping(address,bytes32)", vec![Value::Addr(v2), Value::B32(other.0)], MAINTAINER, U256::ZERO).unwrap();
    assert!(!up(st, user(1)).success(), "different spec");

    st.call_contract(common::REGISTRY_AT, "new_mapping(address,bytes32)", vec![Value::Addr(v2), Value::B32(SPEC.0)], MAINTAINER, U256::ZERO).unwrap();
    let h = st.state_hash();
    assert!(!up(st, user(2)).success(), "not the author");
    assert_eq!(st.state_hash(), h);
    assert!(up(st, user(1)).success());
    let implementation = st.account(common::TARGET_AT).unwrap().storage.read(3, &TypeExpr::Address, &[]).unwrap();
    assert_eq!(implementation, Value::Addr(v2));
}

#[test]
fn proxy_constructor_rejects_zero_spec() {
    let (mut st, r) = registry_chain();
    let code = Code::from_source(corpus::TOY_WALLET, "w.sol").unwrap();
    let i = st.create_contract(code, vec![], user(1), U256::ZERO).unwrap().created.unwrap();
    let proxy = Code::from_unit(generate_proxy_for_source(corpus::TOY_WALLET, "w.sol", SPEC).unwrap().unit);
    let r = st.create_contract(proxy, vec![Value::Addr(r), Value::B32([0; 32]), Value::Addr(i)], user(1), U256::ZERO).unwrap();
    assert!(!r.success());
}

#[test]
fn delegated_code_sees_the_external_caller() {
    let probe = "contract Probe { address last; function poke() public returns (address) { last = msg.sender; return msg.sender; } }";
    let (mut st, r) = registry_chain();
    let code = Code::from_source(probe, "probe.sol").unwrap();
    let i = st.create_contract(code, vec![], user(1), U256::ZERO).unwrap().created.unwrap();
    st.call_contract(r, "new_mapping(address,bytes32)", vec![Value::Addr(i), Value::B32(SPEC.0)], MAINTAINER, U256::ZERO).unwrap();
    let proxy = Code::from_unit(generate_proxy_for_source(probe, "probe.sol", SPEC).unwrap().unit);
    let p = st.create_contract(proxy, vec![Value::Addr(r), Value::B32(SPEC.0), Value::Addr(i)], user(1), U256::ZERO).unwrap().created.unwrap();
    st.fund(user(3), U256::ONE);
    let rc = st.call_contract(p, "poke()", vec![], user(3), U256::ZERO).unwrap();
    assert_eq!(rc.return_values, vec![Value::Addr(user(3))]);
    assert_eq!(st.account(p).unwrap().storage.read(0, &TypeExpr::Address, &[]).unwrap(), Value::Addr(user(3)));
    assert!(st.account(i).unwrap().storage.is_empty());
}

// ---- transparency ----

#[test]
fn proxies_are_transparent() {
    for (file, _) in corpus::implementations() {
        let cov = transparency(file, 40, 0xC0FFEE).unwrap();
        assert!(cov.successes > 0, "{file}: nothing succeeded");
    }
}

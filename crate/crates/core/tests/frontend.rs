use tdep::corpus;
use tdep::frontend::{parse_source, parse_unit, printer, ErrorKind, ExprKind, StmtKind, TypeExpr};

#[test]
fn corpus_parses_and_round_trips() {
    for (name, src) in corpus::ALL {
        let a = parse_source(src, name).unwrap_or_else(|e| panic!("{name}: {e}"));
        let printed = printer::print_source(&a);
        let b = parse_source(&printed, name).unwrap_or_else(|e| panic!("{name} reprint: {e}\n{printed}"));
        assert_eq!(a, b, "{name}");
        assert_eq!(printed, printer::print_source(&b), "{name}: printer is not a fixpoint");
    }
}

#[test]
fn toy_wallet_shape() {
    let c = parse_unit(corpus::TOY_WALLET, "toy_wallet.sol").unwrap();
    assert_eq!(c.name, "ToyWallet");
    assert_eq!(c.vars.len(), 1);
    assert_eq!(c.vars[0].name, "accs");
    assert_eq!(c.vars[0].ty, TypeExpr::Mapping(Box::new(TypeExpr::Address), Box::new(TypeExpr::Uint256)));
    let sigs: Vec<_> = c.dispatchable().map(|f| f.canonical_signature()).collect();
    assert_eq!(sigs, ["deposit()", "withdraw(uint256)"]);
    assert_eq!(c.function("deposit").unwrap().mutability, tdep::frontend::Mutability::Payable);
}

#[test]
fn empty_contract() {
    let c = parse_unit("contract E { }", "e.sol").unwrap();
    assert!(c.vars.is_empty() && c.functions.is_empty());
}

#[test]
fn uniswap_guard_is_an_if() {
    let c = parse_unit(corpus::ERC20_UNISWAP, "u.sol").unwrap();
    let f = c.function("transferFrom").unwrap();
    let StmtKind::If { cond, .. } = &f.body.as_ref().unwrap()[0].kind else { panic!("expected if") };
    assert_eq!(printer::print_expr(cond), "allowance[from][msg.sender] != uint256(-1)");
}

#[test]
fn canonical_signatures() {
    let c = parse_unit(corpus::ERC1155, "e.sol").unwrap();
    assert_eq!(
        c.function("safeTransferFrom").unwrap().canonical_signature(),
        "safeTransferFrom(address,address,uint256,uint256,bytes)"
    );
    let c = parse_unit("contract A { function approve(address _spender, uint _value) public {} constructor() public {} }", "a").unwrap();
    assert_eq!(c.function("approve").unwrap().canonical_signature(), "approve(address,uint256)");
    assert_eq!(c.constructor().unwrap().canonical_signature(), "constructor()");
}

#[test]
fn calls_are_resolved() {
    let c = parse_unit(corpus::TOY_WALLET_REENTRANT, "r.sol").unwrap();
    let body = c.function("withdraw").unwrap().body.as_ref().unwrap();
    let StmtKind::Assign { value, .. } = &body[2].kind else { panic!() };
    assert!(matches!(value.kind, ExprKind::LowCall { value: Some(_), .. }));
    let c = parse_unit(corpus::ATTACKER, "a.sol").unwrap();
    assert_eq!(c.name, "Attacker");
}

#[test]
fn type_errors_carry_locations() {
    let e = parse_unit("contract A {\n uint x;\n function f() public { x = y; }\n}", "a.sol").unwrap_err();
    let first = e.first();
    assert_eq!(first.kind, ErrorKind::Type);
    assert_eq!(first.pos.line, 3);
    assert!(e.to_string().starts_with("a.sol:3:"), "{e}");
    let e = parse_unit("contract A { bool b; function f() public { b = 1; } }", "a.sol").unwrap_err();
    assert!(e.to_string().contains("cannot assign"), "{e}");
}

#[test]
fn docs_attach_or_orphan() {
    let src = "/// c\ncontract A {\n  /// v\n  uint x;\n  /// f\n  function f() public {}\n}\n/// tail\n";
    let u = parse_source(src, "a").unwrap();
    let c = &u.contracts[0];
    assert_eq!(c.doc.as_ref().unwrap().text, "/// c");
    assert_eq!(c.functions[0].doc.as_ref().unwrap().text, "/// f");
    assert_eq!(c.orphan_docs.len(), 1);
    assert_eq!(u.orphan_docs.len(), 1);
}

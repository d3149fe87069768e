//! Runtime monitoring of a reentrancy attack on the alternative wallet.

use std::sync::Arc;

use tdep::conformance::{merge, Mode};
use tdep::corpus;
use tdep::frontend::parse_unit;
use tdep::sim::{Address, Code, Value};
use tdep::spec::parse_spec;
use tdep::verify::runtime::{call_op, create_op, fund_op};
use tdep::verify::{run_scenario, IMPL_REF};

fn load(path: &str) -> Result<Arc<Code>, String> {
    let src = corpus::get(path).ok_or_else(|| format!("no corpus file `{path}`"))?;
    Code::from_source(src, path).map_err(|d| d.to_string())
}

fn main() {
    let owner = Address::from_u64(0xA1);
    let thief = Address::from_u64(0xA2);
    let wallet = Address::from_u64(0x1000);
    let attacker = Address::from_u64(0x1001);
    let scenario = vec![
        fund_op(owner, 1_000),
        fund_op(thief, 1_000),
        create_op(IMPL_REF, &[], owner, 0),
        create_op("attacker.sol", &[Value::Addr(wallet)], thief, 0),
        call_op(wallet, "deposit()", &[], owner, 100),
        call_op(attacker, "attack(uint256,uint256)", &[Value::uint(5), Value::uint(1)], thief, 10),
    ];
    let spec = parse_spec(corpus::get("toy_wallet.spec.sol").unwrap(), "toy_wallet.spec.sol").unwrap();
    for file in ["toy_wallet.sol", "toy_wallet_reentrant.sol"] {
        let unit = parse_unit(corpus::get(file).unwrap(), file).unwrap();
        let m = merge(&spec, &unit, Mode::Create).unwrap();
        let findings = run_scenario(&m, Mode::Create, &scenario, &mut load).unwrap();
        println!("{file}: {} finding(s)", findings.len());
        for f in &findings {
            println!("  {} {}: {}", f.category, f.site, f.message);
            if let Some(t) = &f.trace {
                println!("    balance before {} after {}", t.pre["balance"], t.post["balance"]);
            }
        }
    }
}

//! The full lifecycle: gated deployment, use, refused and accepted upgrades.

use ethnum::U256;
use tdep::corpus;
use tdep::deployer::{Deployer, DEFAULT_TRUSTED};
use tdep::sim::{Address, Value};
use tdep::spec::parse_spec;
use tdep::verify::{BoundedBackend, BoundedConfig};

fn main() {
    let spec = parse_spec(corpus::get("toy_wallet.spec.sol").unwrap(), "toy_wallet.spec.sol").unwrap();
    let mut backend = BoundedBackend::new(BoundedConfig::default());
    let mut d = Deployer::new(DEFAULT_TRUSTED).unwrap();
    println!("registry at {}", d.registry.registry_addr);

    let (proxy, report) = d.create_contract(&spec, corpus::TOY_WALLET, "toy_wallet.sol", vec![], "alice", &mut backend).unwrap();
    println!("deployed proxy {proxy} ({:?}), spec {}", report.verdict, d.get_spec(proxy).unwrap());

    let user = Address::from_u64(0xA1);
    d.chain.fund(user, U256::from(100u8));
    d.chain.call(proxy, "deposit()", vec![], user, U256::from(10u8)).unwrap();
    println!("accs[user] = {}", d.chain.state.read_var(proxy, "accs", &[Value::Addr(user)]).unwrap());

    let reentrant = corpus::get("toy_wallet_reentrant.sol").unwrap();
    match d.upgrade_contract(proxy, reentrant, "toy_wallet_reentrant.sol", "alice", &mut backend) {
        Ok(_) => println!("unexpected: reentrant wallet accepted"),
        Err(e) => {
            println!("upgrade to toy_wallet_reentrant.sol refused: {e}");
            for f in e.report().map(|r| r.findings.as_slice()).unwrap_or_default() {
                println!("  {} {}", f.category, f.site);
            }
        }
    }
    let v2 = corpus::get("toy_wallet_v2.sol").unwrap();
    if let Err(e) = d.upgrade_contract(proxy, v2, "toy_wallet_v2.sol", "mallory", &mut backend) {
        println!("upgrade by mallory refused: {e}");
    }
    d.upgrade_contract(proxy, v2, "toy_wallet_v2.sol", "alice", &mut backend).unwrap();
    let rec = d.record(proxy).unwrap();
    println!("now delegating to {} after {} implementation(s)", rec.current_impl, rec.history.len());
    println!("accs[user] = {}", d.chain.state.read_var(proxy, "accs", &[Value::Addr(user)]).unwrap());
    println!("spec still {}", d.onchain_spec(proxy).unwrap());
    d.check_mirror().unwrap();
}

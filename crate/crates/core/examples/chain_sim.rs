//! Drives the simulator directly and round-trips the chain through JSON.

use ethnum::U256;
use tdep::corpus;
use tdep::sim::persist;
use tdep::sim::{Address, Code, Journaled, Value};

fn main() {
    let snd = Address::from_u64(0xA1);
    let mut chain = Journaled::new();
    chain.fund(snd, U256::from(100u8));
    let code = Code::from_source(corpus::TOY_WALLET, "toy_wallet.sol").unwrap();
    let wallet = chain.create(code, vec![], snd, U256::ZERO).unwrap().created.unwrap();

    let r = chain.call(wallet, "deposit()", vec![], snd, U256::from(10u8)).unwrap();
    println!("deposit: {}", persist::receipt_to_json(&r));
    let r = chain.call(wallet, "withdraw(uint256)", vec![Value::uint(11)], snd, U256::ZERO).unwrap();
    println!("withdraw 11: {}", persist::receipt_to_json(&r));
    println!("accs[snd] = {}, wallet balance = {}", chain.state.read_var(wallet, "accs", &[Value::Addr(snd)]).unwrap(), chain.state.balance(wallet));

    let text = persist::to_string(&chain.state);
    let back = persist::from_str(&text).unwrap();
    assert_eq!(back.state_hash(), chain.state.state_hash());
    let replayed = Journaled::replay(&chain.journal_text()).unwrap();
    assert_eq!(replayed.state.state_hash(), chain.state.state_hash());
    println!("chain file:\n{text}");
}

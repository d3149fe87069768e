//! Accounts, code objects and the chain state.

use std::collections::BTreeMap;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use ethnum::U256;
use sha2::{Digest, Sha256};

use super::storage::Storage;
use super::value::{Address, Value};
use crate::frontend::{self, printer, ContractUnit, Diagnostics};

/// Executable contract code.
#[derive(Debug)]
pub struct Code {
    /// `Name-<16 hex digits>`, derived from the printed unit.
    pub id: String,
    pub unit: ContractUnit,
    /// Source the unit was parsed from.
    pub source: String,
}

impl Code {
    /// Parses a source file; its last contract becomes the code.
    pub fn from_source(source: &str, origin: &str) -> Result<Arc<Code>, Diagnostics> {
        let unit = frontend::parse_unit(source, origin)?;
        Ok(Code::with_source(unit, source.to_string()))
    }

    /// Wraps an already type-checked unit.
    pub fn from_unit(unit: ContractUnit) -> Arc<Code> {
        let source = printer::print_contract(&unit);
        Code::with_source(unit, source)
    }

    fn with_source(unit: ContractUnit, source: String) -> Arc<Code> {
        let digest = Sha256::digest(printer::print_contract(&unit).as_bytes());
        let id = format!("{}-{}", unit.name, &hex::encode(digest)[..16]);
        Arc::new(Code { id, unit, source })
    }

    pub fn name(&self) -> &str {
        &self.unit.name
    }
}

impl PartialEq for Code {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}

impl Eq for Code {}

impl Hash for Code {
    fn hash<H: Hasher>(&self, h: &mut H) {
        self.id.hash(h)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Account {
    pub balance: U256,
    pub storage: Storage,
    pub code: Option<Arc<Code>>,
}

/// An emitted event.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LogEntry {
    /// Index of the transaction that emitted it.
    pub tx: u64,
    pub address: Address,
    pub event: String,
    pub args: Vec<Value>,
}

/// Accounts and the address counter; everything except the event log.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct World {
    pub accounts: BTreeMap<Address, Account>,
    pub counter: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ChainState {
    pub world: World,
    pub log: Vec<LogEntry>,
    /// Number of transactions processed, reverted ones included.
    pub tx_count: u64,
}

pub const FIRST_ADDRESS: u64 = 0x1000;

impl ChainState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn account(&self, a: Address) -> Option<&Account> {
        self.world.accounts.get(&a)
    }

    pub fn account_mut(&mut self, a: Address) -> &mut Account {
        self.world.accounts.entry(a).or_default()
    }

    pub fn balance(&self, a: Address) -> U256 {
        self.account(a).map_or(U256::ZERO, |x| x.balance)
    }

    pub fn code(&self, a: Address) -> Option<&Arc<Code>> {
        self.account(a).and_then(|x| x.code.as_ref())
    }

    pub fn total_balance(&self) -> U256 {
        self.world.accounts.values().fold(U256::ZERO, |s, a| s.wrapping_add(a.balance))
    }

    /// Adds Wei from outside the system.
    pub fn fund(&mut self, a: Address, amount: U256) {
        let acc = self.account_mut(a);
        acc.balance = acc.balance.saturating_add(amount);
    }

    pub fn next_address(&self) -> Address {
        Address::from_u64(FIRST_ADDRESS + self.world.counter)
    }

    /// Moves Wei; `false` (and no change) on insufficient funds.
    pub fn transfer(&mut self, from: Address, to: Address, amount: U256) -> bool {
        if amount == U256::ZERO {
            return true;
        }
        if self.balance(from) < amount {
            return false;
        }
        self.account_mut(from).balance -= amount;
        let to = self.account_mut(to);
        to.balance = to.balance.checked_add(amount).expect("total supply bounded by funding");
        true
    }

    /// SHA-256 over a canonical rendering of accounts, counter and log.
    pub fn state_hash(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(self.world.counter.to_be_bytes());
        for (a, acc) in &self.world.accounts {
            h.update(a.word().to_be_bytes());
            h.update(acc.balance.to_be_bytes());
            h.update(acc.code.as_ref().map_or("", |c| c.id.as_str()).as_bytes());
            h.update([0]);
            h.update(format!("{:?}", acc.storage).as_bytes());
        }
        for e in &self.log {
            h.update(format!("{e:?}").as_bytes());
        }
        h.finalize().into()
    }

    /// Events emitted by `addr`, oldest first.
    pub fn events_of(&self, addr: Address) -> impl Iterator<Item = &LogEntry> {
        self.log.iter().filter(move |e| e.address == addr)
    }

    /// Reads member variable `var` of the contract at `addr`, following `path`
    /// through mappings and arrays.
    pub fn read_var(&self, addr: Address, var: &str, path: &[Value]) -> Result<Value, String> {
        let acc = self.account(addr).ok_or_else(|| format!("no account at {addr}"))?;
        let code = acc.code.as_ref().ok_or_else(|| format!("{addr} holds no code"))?;
        let (ordinal, decl) = code.unit.vars.iter().enumerate().find(|(_, v)| v.name == var).ok_or_else(|| format!("`{}` has no member `{var}`", code.name()))?;
        acc.storage.read(ordinal, &decl.ty, path).map_err(|e| e.to_string())
    }
}

//! Runtime values, addresses and their JSON forms.

use std::fmt;
use std::str::FromStr;

use ethnum::U256;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value as Json;

use crate::frontend::TypeExpr;

/// A 160-bit account address.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Address(U256);

impl Address {
    pub const ZERO: Address = Address(U256::ZERO);

    pub fn mask() -> U256 {
        (U256::ONE << 160u32) - U256::ONE
    }

    /// Truncates to the low 160 bits.
    pub fn from_word(w: U256) -> Self {
        Address(w & Self::mask())
    }

    pub const fn from_u64(v: u64) -> Self {
        Address(U256::new(v as u128))
    }

    pub fn word(self) -> U256 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == U256::ZERO
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{:040x}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid address `{0}`")]
pub struct AddressParseError(pub String);

impl FromStr for Address {
    type Err = AddressParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || AddressParseError(s.to_string());
        let digits = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")).ok_or_else(err)?;
        if digits.is_empty() || digits.len() > 40 {
            return Err(err());
        }
        U256::from_str_radix(digits, 16).map(Address).map_err(|_| err())
    }
}

impl Serialize for Address {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Address {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Contents of a `bytes` value. Calls are not ABI-encoded; payloads keep
/// their structure so that delegation and decoding can recover it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Bytes {
    Raw(Vec<u8>),
    /// Result of `abi.encodeWithSignature`.
    Call { sig: String, args: Vec<Value> },
    /// Return data of a call or delegatecall.
    Ret(Vec<Value>),
}

impl Bytes {
    pub fn empty() -> Self {
        Bytes::Raw(Vec::new())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Uint(U256),
    Bool(bool),
    Addr(Address),
    B32([u8; 32]),
    Bytes(Bytes),
    Array(Vec<Value>),
    Tuple(Vec<Value>),
}

impl Value {
    pub fn uint(v: u64) -> Self {
        Value::Uint(U256::from(v))
    }

    /// Default value of a type; `None` for mappings, which have no value form.
    pub fn zero(t: &TypeExpr) -> Option<Value> {
        Some(match t {
            TypeExpr::Uint256 => Value::Uint(U256::ZERO),
            TypeExpr::Bool => Value::Bool(false),
            TypeExpr::Address | TypeExpr::Contract(_) => Value::Addr(Address::ZERO),
            TypeExpr::Bytes32 => Value::B32([0; 32]),
            TypeExpr::Bytes => Value::Bytes(Bytes::empty()),
            TypeExpr::Array(_) => Value::Array(Vec::new()),
            TypeExpr::Mapping(..) => return None,
        })
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Value::Uint(v) => *v == U256::ZERO,
            Value::Bool(b) => !b,
            Value::Addr(a) => a.is_zero(),
            Value::B32(b) => *b == [0; 32],
            Value::Bytes(Bytes::Raw(v)) => v.is_empty(),
            Value::Bytes(_) => false,
            Value::Array(v) => v.is_empty(),
            Value::Tuple(_) => false,
        }
    }

    pub fn as_uint(&self) -> Option<U256> {
        match self {
            Value::Uint(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_addr(&self) -> Option<Address> {
        match self {
            Value::Addr(a) => Some(*a),
            _ => None,
        }
    }

    pub fn as_b32(&self) -> Option<[u8; 32]> {
        match self {
            Value::B32(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_array(&self) -> Option<&[Value]> {
        match self {
            Value::Array(v) => Some(v),
            _ => None,
        }
    }

    /// Does the value inhabit `t`? Contract types are addresses.
    pub fn has_type(&self, t: &TypeExpr) -> bool {
        match (self, t) {
            (Value::Uint(_), TypeExpr::Uint256)
            | (Value::Bool(_), TypeExpr::Bool)
            | (Value::Addr(_), TypeExpr::Address | TypeExpr::Contract(_))
            | (Value::B32(_), TypeExpr::Bytes32)
            | (Value::Bytes(_), TypeExpr::Bytes) => true,
            (Value::Array(v), TypeExpr::Array(e)) => v.iter().all(|x| x.has_type(e)),
            _ => false,
        }
    }

    /// JSON form: uints as decimal strings, addresses and bytes as 0x-hex.
    pub fn to_json(&self) -> Json {
        match self {
            Value::Uint(v) => Json::String(v.to_string()),
            Value::Bool(b) => Json::Bool(*b),
            Value::Addr(a) => Json::String(a.to_string()),
            Value::B32(b) => Json::String(format!("0x{}", hex::encode(b))),
            Value::Bytes(Bytes::Raw(v)) => Json::String(format!("0x{}", hex::encode(v))),
            Value::Bytes(Bytes::Call { sig, args }) => {
                serde_json::json!({ "call": sig, "args": args.iter().map(Value::to_json).collect::<Vec<_>>() })
            }
            Value::Bytes(Bytes::Ret(vs)) => serde_json::json!({ "ret": vs.iter().map(Value::to_json).collect::<Vec<_>>() }),
            Value::Array(v) | Value::Tuple(v) => Json::Array(v.iter().map(Value::to_json).collect()),
        }
    }

    /// Reads a value of type `t` from JSON. Uints accept numbers, decimal
    /// strings and 0x-hex strings.
    pub fn from_json(t: &TypeExpr, j: &Json) -> Result<Value, String> {
        let bad = || format!("expected {t}, found {j}");
        match t {
            TypeExpr::Uint256 => match j {
                Json::Number(n) => n.as_u64().map(Value::uint).ok_or_else(bad),
                Json::String(s) => parse_uint(s).map(Value::Uint).ok_or_else(bad),
                _ => Err(bad()),
            },
            TypeExpr::Bool => match j {
                Json::Bool(b) => Ok(Value::Bool(*b)),
                Json::String(s) if s == "true" || s == "false" => Ok(Value::Bool(s == "true")),
                _ => Err(bad()),
            },
            TypeExpr::Address | TypeExpr::Contract(_) => match j {
                Json::String(s) => s.parse().map(Value::Addr).map_err(|_| bad()),
                Json::Number(n) => n.as_u64().map(|v| Value::Addr(Address::from_u64(v))).ok_or_else(bad),
                _ => Err(bad()),
            },
            TypeExpr::Bytes32 => {
                let Json::String(s) = j else { return Err(bad()) };
                let digits = s.strip_prefix("0x").ok_or_else(bad)?;
                let mut out = [0u8; 32];
                let raw = hex::decode(digits).map_err(|_| bad())?;
                if raw.len() > 32 {
                    return Err(bad());
                }
                out[32 - raw.len()..].copy_from_slice(&raw);
                Ok(Value::B32(out))
            }
            TypeExpr::Bytes => match j {
                Json::String(s) => {
                    let digits = s.strip_prefix("0x").ok_or_else(bad)?;
                    hex::decode(digits).map(|v| Value::Bytes(Bytes::Raw(v))).map_err(|_| bad())
                }
                Json::Object(m) => {
                    let vals = |k: &str| -> Result<Vec<Value>, String> {
                        m.get(k).and_then(Json::as_array).ok_or_else(bad)?.iter().map(json_untyped).collect()
                    };
                    if let Some(sig) = m.get("call").and_then(Json::as_str) {
                        Ok(Value::Bytes(Bytes::Call { sig: sig.to_string(), args: vals("args")? }))
                    } else {
                        Ok(Value::Bytes(Bytes::Ret(vals("ret")?)))
                    }
                }
                _ => Err(bad()),
            },
            TypeExpr::Array(e) => {
                let Json::Array(items) = j else { return Err(bad()) };
                items.iter().map(|x| Value::from_json(e, x)).collect::<Result<_, _>>().map(Value::Array)
            }
            TypeExpr::Mapping(..) => Err(format!("mapping values have no JSON form: {j}")),
        }
    }
}

/// Best-effort decoding when no type is known (payload arguments).
fn json_untyped(j: &Json) -> Result<Value, String> {
    match j {
        Json::Bool(b) => Ok(Value::Bool(*b)),
        Json::Number(n) => n.as_u64().map(Value::uint).ok_or_else(|| format!("bad number {n}")),
        Json::String(s) if s.starts_with("0x") && s.len() == 42 => s.parse().map(Value::Addr).map_err(|e| e.to_string()),
        Json::String(s) if s.starts_with("0x") && s.len() == 66 => Value::from_json(&TypeExpr::Bytes32, j),
        Json::String(s) if s.starts_with("0x") => Value::from_json(&TypeExpr::Bytes, j),
        Json::String(s) => parse_uint(s).map(Value::Uint).ok_or_else(|| format!("bad value {s}")),
        Json::Array(v) => v.iter().map(json_untyped).collect::<Result<_, _>>().map(Value::Array),
        Json::Object(_) => Value::from_json(&TypeExpr::Bytes, j),
        Json::Null => Err("null value".into()),
    }
}

pub fn parse_uint(s: &str) -> Option<U256> {
    let s = s.trim();
    if let Some(h) = s.strip_prefix("0x") {
        return U256::from_str_radix(h, 16).ok();
    }
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    U256::from_str_radix(s, 10).ok()
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Uint(v) => write!(f, "{v}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Addr(a) => write!(f, "{a}"),
            Value::B32(b) => write!(f, "0x{}", hex::encode(b)),
            Value::Bytes(Bytes::Raw(v)) => write!(f, "0x{}", hex::encode(v)),
            Value::Bytes(Bytes::Call { sig, args }) => write!(f, "call:{sig}({})", join(args)),
            Value::Bytes(Bytes::Ret(vs)) => write!(f, "ret:({})", join(vs)),
            Value::Array(v) => write!(f, "[{}]", join(v)),
            Value::Tuple(v) => write!(f, "({})", join(v)),
        }
    }
}

pub fn join(vs: &[Value]) -> String {
    vs.iter().map(Value::to_string).collect::<Vec<_>>().join(", ")
}

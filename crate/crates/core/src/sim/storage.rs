//! Typed sparse storage addressed by variable ordinal and key path.
//!
//! Zero values are never stored: writing a type's default removes the entry,
//! so equal contents always have equal representations.

use std::collections::BTreeMap;

use ethnum::U256;
use serde_json::{Map, Value as Json};

use super::value::Value;
use crate::frontend::{TypeExpr, VarDecl};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Slot {
    Val(Value),
    Map(BTreeMap<Value, Slot>),
    Arr(Vec<Slot>),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StorageError {
    #[error("array index {index} out of bounds (length {len})")]
    OutOfBounds { index: U256, len: usize },
    #[error("cannot read a mapping as a value")]
    MappingValue,
    #[error("storage path does not match the declared type {0}")]
    Shape(TypeExpr),
}

impl Slot {
    fn from_value(v: Value) -> Slot {
        match v {
            Value::Array(items) => Slot::Arr(items.into_iter().map(Slot::from_value).collect()),
            v => Slot::Val(v),
        }
    }

    fn to_value(&self) -> Option<Value> {
        match self {
            Slot::Val(v) => Some(v.clone()),
            Slot::Arr(items) => items.iter().map(Slot::to_value).collect::<Option<Vec<_>>>().map(Value::Array),
            Slot::Map(_) => None,
        }
    }

    fn is_empty(&self) -> bool {
        match self {
            Slot::Val(v) => v.is_zero(),
            Slot::Map(m) => m.is_empty(),
            Slot::Arr(a) => a.is_empty(),
        }
    }

    /// Keys present in a mapping slot.
    pub fn keys(&self) -> impl Iterator<Item = &Value> {
        let m = match self {
            Slot::Map(m) => Some(m),
            _ => None,
        };
        m.into_iter().flat_map(|m| m.keys())
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Value, &Slot)> {
        let m = match self {
            Slot::Map(m) => Some(m),
            _ => None,
        };
        m.into_iter().flat_map(|m| m.iter())
    }

    pub fn child(&self, key: &Value) -> Option<&Slot> {
        match (self, key) {
            (Slot::Map(m), k) => m.get(k),
            (Slot::Arr(a), Value::Uint(i)) => usize::try_from(*i).ok().and_then(|i| a.get(i)),
            _ => None,
        }
    }

    pub fn as_value(&self) -> Option<&Value> {
        match self {
            Slot::Val(v) => Some(v),
            _ => None,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Slot::Arr(a) => a.len(),
            Slot::Map(m) => m.len(),
            Slot::Val(_) => 1,
        }
    }
}

fn index(i: &Value, len: usize) -> Result<usize, StorageError> {
    let Value::Uint(i) = i else { return Err(StorageError::OutOfBounds { index: U256::MAX, len }) };
    match usize::try_from(*i) {
        Ok(k) if k < len => Ok(k),
        _ => Err(StorageError::OutOfBounds { index: *i, len }),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Storage(BTreeMap<usize, Slot>);

impl Storage {
    pub fn slot(&self, ordinal: usize) -> Option<&Slot> {
        self.0.get(&ordinal)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn ordinals(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.keys().copied()
    }

    /// Reads the value at `path` below variable `ordinal` of type `ty`.
    pub fn read(&self, ordinal: usize, ty: &TypeExpr, path: &[Value]) -> Result<Value, StorageError> {
        let mut slot = self.0.get(&ordinal);
        let mut ty = ty;
        for k in path {
            match ty {
                TypeExpr::Mapping(_, v) => {
                    slot = slot.and_then(|s| s.child(k));
                    ty = v;
                }
                TypeExpr::Array(e) => {
                    let len = slot.map_or(0, Slot::len);
                    index(k, len)?;
                    slot = slot.and_then(|s| s.child(k));
                    ty = e;
                }
                t => return Err(StorageError::Shape(t.clone())),
            }
        }
        if matches!(ty, TypeExpr::Mapping(..)) {
            return Err(StorageError::MappingValue);
        }
        match slot {
            Some(s) => s.to_value().ok_or(StorageError::MappingValue),
            None => Ok(Value::zero(ty).expect("non-mapping type")),
        }
    }

    pub fn write(&mut self, ordinal: usize, ty: &TypeExpr, path: &[Value], v: Value) -> Result<(), StorageError> {
        let root = self.0.remove(&ordinal);
        let mut root = root.unwrap_or_else(|| empty_slot(ty));
        let res = write_at(&mut root, ty, path, v);
        if !root.is_empty() {
            self.0.insert(ordinal, root);
        }
        res
    }
}

fn empty_slot(ty: &TypeExpr) -> Slot {
    match ty {
        TypeExpr::Mapping(..) => Slot::Map(BTreeMap::new()),
        TypeExpr::Array(_) => Slot::Arr(Vec::new()),
        t => Slot::Val(Value::zero(t).expect("non-mapping type")),
    }
}

fn write_at(slot: &mut Slot, ty: &TypeExpr, path: &[Value], v: Value) -> Result<(), StorageError> {
    let Some((k, rest)) = path.split_first() else {
        if matches!(ty, TypeExpr::Mapping(..)) {
            return Err(StorageError::MappingValue);
        }
        *slot = Slot::from_value(v);
        return Ok(());
    };
    match (ty, slot) {
        (TypeExpr::Mapping(_, vt), Slot::Map(m)) => {
            let mut child = m.remove(k).unwrap_or_else(|| empty_slot(vt));
            let res = write_at(&mut child, vt, rest, v);
            if !child.is_empty() {
                m.insert(k.clone(), child);
            }
            res
        }
        (TypeExpr::Array(et), Slot::Arr(a)) => {
            let i = index(k, a.len())?;
            write_at(&mut a[i], et, rest, v)
        }
        (t, _) => Err(StorageError::Shape(t.clone())),
    }
}

/// JSON key for a mapping key.
pub fn key_string(k: &Value) -> String {
    k.to_string()
}

fn parse_key(t: &TypeExpr, s: &str) -> Result<Value, String> {
    Value::from_json(t, &Json::String(s.to_string()))
}

fn slot_to_json(s: &Slot) -> Json {
    match s {
        Slot::Val(v) => v.to_json(),
        Slot::Arr(a) => Json::Array(a.iter().map(slot_to_json).collect()),
        Slot::Map(m) => Json::Object(m.iter().map(|(k, v)| (key_string(k), slot_to_json(v))).collect()),
    }
}

fn slot_from_json(t: &TypeExpr, j: &Json) -> Result<Slot, String> {
    match t {
        TypeExpr::Mapping(kt, vt) => {
            let Json::Object(o) = j else { return Err(format!("expected object for {t}")) };
            let mut m = BTreeMap::new();
            for (k, v) in o {
                m.insert(parse_key(kt, k)?, slot_from_json(vt, v)?);
            }
            Ok(Slot::Map(m))
        }
        TypeExpr::Array(et) => {
            let Json::Array(a) = j else { return Err(format!("expected array for {t}")) };
            a.iter().map(|x| slot_from_json(et, x)).collect::<Result<_, _>>().map(Slot::Arr)
        }
        t => Value::from_json(t, j).map(Slot::Val),
    }
}

/// Storage as a JSON object keyed by variable name.
pub fn storage_to_json(s: &Storage, vars: &[VarDecl]) -> Map<String, Json> {
    let mut out = Map::new();
    for (ord, slot) in &s.0 {
        let name = vars.iter().find(|v| v.ordinal == *ord).map_or_else(|| format!("#{ord}"), |v| v.name.clone());
        out.insert(name, slot_to_json(slot));
    }
    out
}

pub fn storage_from_json(o: &Map<String, Json>, vars: &[VarDecl]) -> Result<Storage, String> {
    let mut s = Storage::default();
    for (name, j) in o {
        let v = vars.iter().find(|v| v.name == *name).ok_or_else(|| format!("unknown storage variable `{name}`"))?;
        let slot = slot_from_json(&v.ty, j)?;
        if !slot.is_empty() {
            s.0.insert(v.ordinal, slot);
        }
    }
    Ok(s)
}

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lang::{Param, Type};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Bool(bool),
    Array(Vec<i64>),
}

impl Value {
    pub fn default_for(ty: Type) -> Value {
        match ty {
            Type::Integer => Value::Int(0),
            Type::Boolean => Value::Bool(false),
            Type::Array => Value::Array(Vec::new()),
        }
    }

    pub fn type_of(&self) -> Type {
        match self {
            Value::Int(_) => Type::Integer,
            Value::Bool(_) => Type::Boolean,
            Value::Array(_) => Type::Array,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Array(a) => {
                f.write_str("[")?;
                for (i, v) in a.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str("]")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum DomainError {
    #[error("empty integer range {0}..{1}")]
    EmptyRange(i64, i64),
    #[error("cannot parse range `{0}`, expected A..B")]
    BadRange(String),
}

/// A finite input space: integers and array elements range over
/// `int_min..=int_max`; arrays have length at most `array_len_max`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Domain {
    pub int_min: i64,
    pub int_max: i64,
    pub array_len_max: usize,
}

impl Domain {
    pub fn new(int_min: i64, int_max: i64, array_len_max: usize) -> Result<Domain, DomainError> {
        if int_min > int_max {
            return Err(DomainError::EmptyRange(int_min, int_max));
        }
        Ok(Domain {
            int_min,
            int_max,
            array_len_max,
        })
    }

    /// Parses `A..B` (inclusive).
    pub fn parse_range(text: &str) -> Result<(i64, i64), DomainError> {
        let bad = || DomainError::BadRange(text.to_string());
        let (a, b) = text.split_once("..").ok_or_else(bad)?;
        Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
    }

    pub fn contains(&self, v: &Value) -> bool {
        let in_range = |x: &i64| (self.int_min..=self.int_max).contains(x);
        match v {
            Value::Int(x) => in_range(x),
            Value::Bool(_) => true,
            Value::Array(a) => a.len() <= self.array_len_max && a.iter().all(in_range),
        }
    }

    /// Every value of type `ty`, in enumeration order: integers ascending,
    /// `false` before `true`, arrays by length and then lexicographically.
    pub fn values(&self, ty: Type) -> Vec<Value> {
        match ty {
            Type::Integer => (self.int_min..=self.int_max).map(Value::Int).collect(),
            Type::Boolean => vec![Value::Bool(false), Value::Bool(true)],
            Type::Array => {
                let elems: Vec<i64> = (self.int_min..=self.int_max).collect();
                let mut out = vec![Value::Array(Vec::new())];
                let mut layer: Vec<Vec<i64>> = vec![Vec::new()];
                for _ in 0..self.array_len_max {
                    layer = layer
                        .iter()
                        .flat_map(|prefix| {
                            elems.iter().map(move |e| {
                                let mut v = prefix.clone();
                                v.push(*e);
                                v
                            })
                        })
                        .collect();
                    out.extend(layer.iter().cloned().map(Value::Array));
                }
                out
            }
        }
    }

    /// Number of parameter valuations.
    pub fn input_count(&self, params: &[Param]) -> u128 {
        params
            .iter()
            .map(|p| self.values(p.ty).len() as u128)
            .product()
    }

    /// All parameter valuations in lexicographic order of the parameter
    /// list (the last parameter varies fastest).
    pub fn inputs(&self, params: &[Param]) -> Vec<Vec<Value>> {
        let spaces: Vec<Vec<Value>> = params.iter().map(|p| self.values(p.ty)).collect();
        if spaces.iter().any(Vec::is_empty) {
            return Vec::new();
        }
        let mut out = Vec::new();
        let mut idx = vec![0usize; spaces.len()];
        loop {
            out.push(idx.iter().zip(&spaces).map(|(&i, s)| s[i].clone()).collect());
            let mut k = spaces.len();
            loop {
                if k == 0 {
                    return out;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < spaces[k].len() {
                    break;
                }
                idx[k] = 0;
            }
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ints {}..{}, arrays up to {}", self.int_min, self.int_max, self.array_len_max)
    }
}

//! String-keyed heterogeneous configuration.
//!
//! Lookups are typed: asking for a real under a key that holds an integer is
//! a [`Error::ConfigTypeError`], never a silent conversion.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "t", content = "v", rename_all = "lowercase")]
pub enum ParamValue {
    Int(i64),
    Real(f64),
    Bool(bool),
    Str(String),
    Vec(Vec<f64>),
}

impl ParamValue {
    pub fn type_name(&self) -> &'static str {
        match self {
            ParamValue::Int(_) => "int",
            ParamValue::Real(_) => "real",
            ParamValue::Bool(_) => "bool",
            ParamValue::Str(_) => "str",
            ParamValue::Vec(_) => "vec",
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Int(v) => write!(f, "{v}"),
            ParamValue::Real(v) => write!(f, "{v:?}"),
            ParamValue::Bool(v) => write!(f, "{v}"),
            ParamValue::Str(v) => f.write_str(v),
            ParamValue::Vec(v) => {
                let parts: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
                f.write_str(&parts.join(";"))
            }
        }
    }
}

impl From<i64> for ParamValue {
    fn from(v: i64) -> Self {
        ParamValue::Int(v)
    }
}

impl From<f64> for ParamValue {
    fn from(v: f64) -> Self {
        ParamValue::Real(v)
    }
}

impl From<bool> for ParamValue {
    fn from(v: bool) -> Self {
        ParamValue::Bool(v)
    }
}

impl From<&str> for ParamValue {
    fn from(v: &str) -> Self {
        ParamValue::Str(v.to_owned())
    }
}

impl From<String> for ParamValue {
    fn from(v: String) -> Self {
        ParamValue::Str(v)
    }
}

impl From<Vec<f64>> for ParamValue {
    fn from(v: Vec<f64>) -> Self {
        ParamValue::Vec(v)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamMap(BTreeMap<String, ParamValue>);

macro_rules! typed_getters {
    ($get:ident, $get_or:ident, $variant:ident, $ty:ty, $name:literal) => {
        pub fn $get(&self, key: &str) -> Result<$ty> {
            match self.0.get(key) {
                None => Err(Error::MissingConfig(key.to_owned())),
                Some(ParamValue::$variant(v)) => Ok(v.clone()),
                Some(other) => Err(Error::ConfigTypeError {
                    key: key.to_owned(),
                    expected: $name,
                    actual: other.type_name(),
                }),
            }
        }

        pub fn $get_or(&self, key: &str, default: $ty) -> Result<$ty> {
            match self.$get(key) {
                Err(Error::MissingConfig(_)) => Ok(default),
                other => other,
            }
        }
    };
}

impl ParamMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: &str, value: impl Into<ParamValue>) -> Self {
        self.set(key, value);
        self
    }

    /// Inserts or replaces `key`, returning the previous value.
    pub fn set(&mut self, key: &str, value: impl Into<ParamValue>) -> Option<ParamValue> {
        self.0.insert(key.to_owned(), value.into())
    }

    pub fn get(&self, key: &str) -> Option<&ParamValue> {
        self.0.get(key)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.0.contains_key(key)
    }

    pub fn remove(&mut self, key: &str) -> Option<ParamValue> {
        self.0.remove(key)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &ParamValue)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Copies every entry of `other` into `self`, overwriting shared keys.
    pub fn merge(&mut self, other: &ParamMap) {
        for (k, v) in &other.0 {
            self.0.insert(k.clone(), v.clone());
        }
    }

    typed_getters!(int, int_or, Int, i64, "int");
    typed_getters!(real, real_or, Real, f64, "real");
    typed_getters!(boolean, boolean_or, Bool, bool, "bool");
    typed_getters!(string, string_or, Str, String, "str");
    typed_getters!(vector, vector_or, Vec, Vec<f64>, "vec");

    /// A nonnegative integer, read as `usize`.
    pub fn count(&self, key: &str) -> Result<usize> {
        let v = self.int(key)?;
        usize::try_from(v).map_err(|_| Error::InvalidConfig {
            key: key.to_owned(),
            reason: format!("{v} is negative"),
        })
    }

    pub fn count_or(&self, key: &str, default: usize) -> Result<usize> {
        match self.count(key) {
            Err(Error::MissingConfig(_)) => Ok(default),
            other => other,
        }
    }

    /// Reads a per-coordinate bound that may be given either as a real
    /// (broadcast to every coordinate) or as a vector of length `dim`.
    pub fn bound(&self, key: &str, dim: usize) -> Result<Vec<f64>> {
        match self.0.get(key) {
            None => Err(Error::MissingConfig(key.to_owned())),
            Some(ParamValue::Real(v)) => Ok(vec![*v; dim]),
            Some(ParamValue::Vec(v)) if v.len() == dim => Ok(v.clone()),
            Some(ParamValue::Vec(v)) => Err(Error::DimensionMismatch {
                expected: dim,
                actual: v.len(),
            }),
            Some(other) => Err(Error::ConfigTypeError {
                key: key.to_owned(),
                expected: "real or vec",
                actual: other.type_name(),
            }),
        }
    }
}

impl FromIterator<(String, ParamValue)> for ParamMap {
    fn from_iter<I: IntoIterator<Item = (String, ParamValue)>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

use std::collections::BTreeSet;
use std::path::Path;

use crate::benchfns;
use crate::error::Error;
use crate::params::{ParamMap, ParamValue};

use super::methods;
use super::HarnessError;

/// Parses `<key>,<type>,<value>` lines. Blank lines and lines starting with
/// `#` are skipped; line numbers in errors are 1-based.
pub fn parse_config(text: &str) -> Result<ParamMap, HarnessError> {
    let mut out = ParamMap::new();
    let mut seen = BTreeSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw.trim();
        if s.is_empty() || s.starts_with('#') {
            continue;
        }
        let bad = |reason: String| HarnessError::Parse { line, reason };
        let mut parts = s.splitn(3, ',');
        let (Some(key), Some(ty), Some(value)) = (parts.next(), parts.next(), parts.next()) else {
            return Err(bad("expected `<key>,<type>,<value>`".into()));
        };
        let (key, ty, value) = (key.trim(), ty.trim(), value.trim());
        if key.is_empty() {
            return Err(bad("empty key".into()));
        }
        let v = parse_value(ty, value).map_err(bad)?;
        if !seen.insert(key.to_owned()) {
            return Err(HarnessError::DuplicateKey {
                line,
                key: key.to_owned(),
            });
        }
        out.set(key, v);
    }
    Ok(out)
}

fn parse_value(ty: &str, v: &str) -> Result<ParamValue, String> {
    let real = |s: &str| s.trim().parse::<f64>().map_err(|_| format!("`{s}` is not a real"));
    Ok(match ty {
        "int" => ParamValue::Int(v.parse().map_err(|_| format!("`{v}` is not an int"))?),
        "real" => ParamValue::Real(real(v)?),
        "bool" => ParamValue::Bool(v.parse().map_err(|_| format!("`{v}` is not a bool"))?),
        "str" => ParamValue::Str(v.to_owned()),
        "vec" => {
            if v.contains(',') {
                return Err("vec values are separated by `;`".into());
            }
            if v.is_empty() {
                ParamValue::Vec(Vec::new())
            } else {
                ParamValue::Vec(v.split(';').map(real).collect::<Result<_, _>>()?)
            }
        }
        other => return Err(format!("unknown type `{other}`")),
    })
}

pub fn read_config(path: impl AsRef<Path>) -> Result<ParamMap, HarnessError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    parse_config(&text)
}

/// A single-run configuration. `params` keeps every key of the source map,
/// so optimizer settings travel with it.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub function: String,
    pub dim: usize,
    pub method: String,
    pub params: ParamMap,
    pub seed: u64,
    pub budget: u64,
    pub reps: usize,
}

impl RunConfig {
    /// Required: `function`, `dim`, `method`. Optional: `seed` (0),
    /// `budget` (1000 per dimension), `reps` (1).
    pub fn from_params(p: ParamMap) -> Result<Self, HarnessError> {
        let function = p.string("function")?;
        let dim = p.count("dim")?;
        let method = p.string("method")?;
        if !benchfns::is_registered(&function) {
            return Err(Error::UnknownFunction(function).into());
        }
        if !methods::is_method(&method) {
            return Err(Error::UnknownMethod(method).into());
        }
        if dim == 0 {
            return Err(invalid("dim", "must be positive"));
        }
        let seed = p.int_or("seed", 0)?;
        let budget = p.int_or("budget", 1000 * dim as i64)?;
        if budget <= 0 {
            return Err(invalid("budget", "must be positive"));
        }
        let reps = p.count_or("reps", 1)?;
        if reps == 0 {
            return Err(invalid("reps", "must be at least 1"));
        }
        Ok(Self {
            function,
            dim,
            method,
            params: p,
            seed: seed as u64,
            budget: budget as u64,
            reps,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        Self::from_params(read_config(path)?)
    }
}

fn invalid(key: &str, reason: &str) -> HarnessError {
    Error::InvalidConfig {
        key: key.into(),
        reason: reason.into(),
    }
    .into()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn typed_lines() {
        let p = parse_config("de.w,real,0.5\nde.pop,int,40\nok,bool,true\nname,str,de\nx0,vec,1;2.5;-3\n").unwrap();
        assert_eq!(p.real("de.w").unwrap(), 0.5);
        assert_eq!(p.int("de.pop").unwrap(), 40);
        assert!(p.boolean("ok").unwrap());
        assert_eq!(p.string("name").unwrap(), "de");
        assert_eq!(p.vector("x0").unwrap(), vec![1.0, 2.5, -3.0]);
    }

    #[test]
    fn comments_and_blank_lines() {
        let p = parse_config("# comment\n\n   \nde.w,real,0.5\n  # indented\n").unwrap();
        assert_eq!(p.len(), 1);
    }

    #[test]
    fn malformed_value_reports_line() {
        let e = parse_config("# c\nde.w,real,0.5\nde.pop,real,abc\n").unwrap_err();
        assert!(matches!(e, HarnessError::Parse { line: 3, .. }), "{e:?}");
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn other_errors() {
        assert!(matches!(parse_config("a,int\n"), Err(HarnessError::Parse { line: 1, .. })));
        assert!(matches!(parse_config("a,float,1\n"), Err(HarnessError::Parse { line: 1, .. })));
        assert!(matches!(parse_config("a,vec,1,2\n"), Err(HarnessError::Parse { line: 1, .. })));
        assert!(matches!(
            parse_config("a,int,1\nb,int,2\na,int,3\n"),
            Err(HarnessError::DuplicateKey { line: 3, .. })
        ));
    }

    #[test]
    fn str_values_keep_commas() {
        let p = parse_config("note,str,a, b\n").unwrap();
        assert_eq!(p.string("note").unwrap(), "a, b");
    }

    #[test]
    fn run_config_defaults_and_errors() {
        let p = parse_config("function,str,sphere\ndim,int,3\nmethod,str,mc\n").unwrap();
        let c = RunConfig::from_params(p.clone()).unwrap();
        assert_eq!((c.seed, c.budget, c.reps), (0, 3000, 1));
        let mut q = p.clone();
        q.remove("dim");
        let e = RunConfig::from_params(q).unwrap_err();
        assert!(e.to_string().contains("dim"));
        assert_eq!(e.exit_code(), 2);
        let e = RunConfig::from_params(p.clone().with("method", "nope")).unwrap_err();
        assert!(matches!(e, HarnessError::Run(Error::UnknownMethod(_))));
        let e = RunConfig::from_params(p.with("budget", 0)).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }
}

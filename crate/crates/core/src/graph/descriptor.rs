use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::port::{PortDirection, PortSpec};

/// Declared type and range of a block parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ParamKind {
    Number { min: f64, max: f64 },
    Integer { min: i64, max: i64 },
    Enum { options: Vec<String> },
    Text,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Integer(i64),
    Number(f64),
    Text(String),
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Integer(i) => Some(*i as f64),
            ParamValue::Number(x) => Some(*x),
            ParamValue::Text(_) => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            ParamValue::Integer(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            ParamValue::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn from_json(value: &serde_json::Value) -> Option<Self> {
        match value {
            serde_json::Value::Number(n) => match n.as_i64() {
                Some(i) => Some(ParamValue::Integer(i)),
                None => n.as_f64().map(ParamValue::Number),
            },
            serde_json::Value::String(s) => Some(ParamValue::Text(s.clone())),
            _ => None,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("param values always serialize")
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Integer(i) => write!(f, "{i}"),
            ParamValue::Number(x) => write!(f, "{x}"),
            ParamValue::Text(s) => write!(f, "{s:?}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: ParamKind,
    pub default: ParamValue,
    #[serde(skip_serializing_if = "String::is_empty", default)]
    pub doc: String,
}

impl ParamSpec {
    pub fn number(name: &str, min: f64, max: f64, default: f64) -> Self {
        ParamSpec {
            name: name.into(),
            kind: ParamKind::Number { min, max },
            default: ParamValue::Number(default),
            doc: String::new(),
        }
    }

    pub fn integer(name: &str, min: i64, max: i64, default: i64) -> Self {
        ParamSpec {
            name: name.into(),
            kind: ParamKind::Integer { min, max },
            default: ParamValue::Integer(default),
            doc: String::new(),
        }
    }

    pub fn options(name: &str, options: &[&str], default: &str) -> Self {
        ParamSpec {
            name: name.into(),
            kind: ParamKind::Enum {
                options: options.iter().map(|s| s.to_string()).collect(),
            },
            default: ParamValue::Text(default.into()),
            doc: String::new(),
        }
    }

    pub fn text(name: &str, default: &str) -> Self {
        ParamSpec {
            name: name.into(),
            kind: ParamKind::Text,
            default: ParamValue::Text(default.into()),
            doc: String::new(),
        }
    }

    pub fn with_doc(mut self, doc: &str) -> Self {
        self.doc = doc.into();
        self
    }

    /// Checks `value` against the declared type and range, normalizing
    /// integral numbers for `Number` params.
    pub fn check(&self, value: &ParamValue) -> Result<ParamValue, String> {
        match (&self.kind, value) {
            (ParamKind::Number { min, max }, v) => {
                let x = v.as_f64().ok_or_else(|| format!("expected a number, got {v}"))?;
                if !x.is_finite() || x < *min || x > *max {
                    return Err(format!("{x} outside [{min}, {max}]"));
                }
                Ok(ParamValue::Number(x))
            }
            (ParamKind::Integer { min, max }, v) => {
                let i = v.as_i64().ok_or_else(|| format!("expected an integer, got {v}"))?;
                if i < *min || i > *max {
                    return Err(format!("{i} outside [{min}, {max}]"));
                }
                Ok(ParamValue::Integer(i))
            }
            (ParamKind::Enum { options }, ParamValue::Text(s)) => {
                if options.iter().any(|o| o == s) {
                    Ok(value.clone())
                } else {
                    Err(format!("{s:?} is not one of {}", options.join(", ")))
                }
            }
            (ParamKind::Text, ParamValue::Text(_)) => Ok(value.clone()),
            (_, v) => Err(format!("expected text, got {v}")),
        }
    }
}

/// Parameter values of one node, with defaults filled in.
pub type ParamValues = BTreeMap<String, ParamValue>;

/// What the engine does with a block beyond running it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockRole {
    Processor,
    /// Its `bpm` output sets the bar tempo.
    Tempo,
    /// Its `notes` input is collected as a rendered track.
    Sink,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockDescriptor {
    pub kind: String,
    pub doc: String,
    pub role: BlockRole,
    pub inputs: Vec<PortSpec>,
    pub outputs: Vec<PortSpec>,
    pub params: Vec<ParamSpec>,
}

impl BlockDescriptor {
    pub fn input(&self, name: &str) -> Option<&PortSpec> {
        self.inputs.iter().find(|p| p.name == name)
    }

    pub fn output(&self, name: &str) -> Option<&PortSpec> {
        self.outputs.iter().find(|p| p.name == name)
    }

    pub fn param(&self, name: &str) -> Option<&ParamSpec> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn defaults(&self) -> ParamValues {
        self.params.iter().map(|p| (p.name.clone(), p.default.clone())).collect()
    }

    /// Merges `overrides` over the defaults, reporting `(param, reason)` for
    /// every unknown or ill-typed entry.
    pub fn resolve_params(&self, overrides: &ParamValues) -> Result<ParamValues, Vec<(String, String)>> {
        let mut out = self.defaults();
        let mut errors = Vec::new();
        for (name, value) in overrides {
            match self.param(name) {
                None => errors.push((name.clone(), "unknown parameter".to_string())),
                Some(spec) => match spec.check(value) {
                    Ok(v) => {
                        out.insert(name.clone(), v);
                    }
                    Err(reason) => errors.push((name.clone(), reason)),
                },
            }
        }
        if errors.is_empty() {
            Ok(out)
        } else {
            Err(errors)
        }
    }

    /// Structural problems: duplicate port or param names, wrong directions,
    /// defaults that fail their own spec.
    pub fn self_check(&self) -> Result<(), String> {
        for (ports, dir) in [(&self.inputs, PortDirection::Input), (&self.outputs, PortDirection::Output)] {
            for (i, p) in ports.iter().enumerate() {
                if p.direction != dir {
                    return Err(format!("{}: port {} has the wrong direction", self.kind, p.name));
                }
                if ports[..i].iter().any(|q| q.name == p.name) {
                    return Err(format!("{}: duplicate port {}", self.kind, p.name));
                }
            }
        }
        for (i, p) in self.params.iter().enumerate() {
            if self.params[..i].iter().any(|q| q.name == p.name) {
                return Err(format!("{}: duplicate param {}", self.kind, p.name));
            }
            p.check(&p.default).map_err(|e| format!("{}: default of {}: {e}", self.kind, p.name))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn check_types_and_ranges() {
        let n = ParamSpec::number("v", 0.0, 1.0, 0.5);
        assert_eq!(n.check(&ParamValue::Integer(1)), Ok(ParamValue::Number(1.0)));
        assert!(n.check(&ParamValue::Number(1.5)).is_err());
        assert!(n.check(&ParamValue::Text("x".into())).is_err());
        let i = ParamSpec::integer("ch", 0, 15, 0);
        assert!(i.check(&ParamValue::Number(2.5)).is_err());
        assert!(i.check(&ParamValue::Integer(16)).is_err());
        let e = ParamSpec::options("m", &["a", "b"], "a");
        assert!(e.check(&ParamValue::Text("b".into())).is_ok());
        assert!(e.check(&ParamValue::Text("c".into())).is_err());
    }

    #[test]
    fn json_values() {
        assert_eq!(ParamValue::from_json(&serde_json::json!(3)), Some(ParamValue::Integer(3)));
        assert_eq!(ParamValue::from_json(&serde_json::json!(0.25)), Some(ParamValue::Number(0.25)));
        assert_eq!(ParamValue::from_json(&serde_json::json!(true)), None);
    }
}

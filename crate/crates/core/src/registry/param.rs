//! Parameter specifications and value checking.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    Float,
    Int,
    Bool,
    Enum,
    String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Int(i) => Some(*i as f64),
            ParamValue::Float(f) => Some(*f),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            ParamValue::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            ParamValue::Bool(b) => Some(*b),
            _ => None,
        }
    }

    fn type_name(&self) -> &'static str {
        match self {
            ParamValue::Bool(_) => "bool",
            ParamValue::Int(_) => "int",
            ParamValue::Float(_) => "float",
            ParamValue::Str(_) => "string",
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Bool(b) => write!(f, "{b}"),
            ParamValue::Int(i) => write!(f, "{i}"),
            ParamValue::Float(v) => write!(f, "{v}"),
            ParamValue::Str(s) => write!(f, "{s:?}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamSpec {
    pub name: String,
    pub description: String,
    pub kind: ParamKind,
    /// Inclusive `[min, max]`, required for numeric kinds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub options: Vec<String>,
    /// `None` marks the parameter as required: it has no documented default
    /// and triggers a clarity assessment when a proposal omits it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<ParamValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
}

/// One rejected parameter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub param: String,
    pub reason: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hint: Option<String>,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.param, self.reason)?;
        if let Some(h) = &self.hint {
            write!(f, " (did you mean {h:?}?)")?;
        }
        Ok(())
    }
}

impl ParamSpec {
    pub fn is_required(&self) -> bool {
        self.default.is_none()
    }

    /// Checks internal consistency; returns the offending field name.
    pub fn check_schema(&self) -> Result<(), (&'static str, String)> {
        if self.name.trim().is_empty() {
            return Err(("name", "parameter name is empty".into()));
        }
        match self.kind {
            ParamKind::Float | ParamKind::Int => {
                let [lo, hi] = self.range.ok_or(("range", format!("numeric parameter `{}` needs a range", self.name)))?;
                if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                    return Err(("range", format!("invalid range for `{}`", self.name)));
                }
            }
            ParamKind::Enum => {
                if self.options.is_empty() {
                    return Err(("options", format!("enum parameter `{}` has no options", self.name)));
                }
                let mut sorted = self.options.clone();
                sorted.sort();
                sorted.dedup();
                if sorted.len() != self.options.len() {
                    return Err(("options", format!("duplicate options in `{}`", self.name)));
                }
            }
            ParamKind::Bool | ParamKind::String => {}
        }
        if let Some(d) = &self.default {
            if let Err(v) = self.check_value(d) {
                return Err(("default", format!("default of `{}` is invalid: {}", self.name, v.reason)));
            }
        }
        Ok(())
    }

    /// Type- and range-checks `value`, coercing integral floats for `int`
    /// parameters and ints for `float` parameters.
    pub fn check_value(&self, value: &ParamValue) -> Result<ParamValue, Violation> {
        let violation = |reason: String, hint: Option<String>| Violation { param: self.name.clone(), reason, hint };
        let in_range = |v: f64| -> Result<(), Violation> {
            if let Some([lo, hi]) = self.range {
                if v < lo {
                    return Err(violation(format!("below min {lo}"), None));
                }
                if v > hi {
                    return Err(violation(format!("above max {hi}"), None));
                }
            }
            Ok(())
        };
        match (self.kind, value) {
            (ParamKind::Float, ParamValue::Float(_) | ParamValue::Int(_)) => {
                let v = value.as_f64().unwrap_or(f64::NAN);
                if !v.is_finite() {
                    return Err(violation("not a finite number".into(), None));
                }
                in_range(v)?;
                Ok(ParamValue::Float(v))
            }
            (ParamKind::Int, ParamValue::Int(i)) => {
                in_range(*i as f64)?;
                Ok(ParamValue::Int(*i))
            }
            (ParamKind::Int, ParamValue::Float(f)) if f.fract() == 0.0 && f.abs() < 9.0e15 => {
                in_range(*f)?;
                Ok(ParamValue::Int(*f as i64))
            }
            (ParamKind::Bool, ParamValue::Bool(b)) => Ok(ParamValue::Bool(*b)),
            (ParamKind::String, ParamValue::Str(s)) => Ok(ParamValue::Str(s.clone())),
            (ParamKind::Enum, ParamValue::Str(s)) => {
                if self.options.iter().any(|o| o == s) {
                    Ok(ParamValue::Str(s.clone()))
                } else {
                    Err(violation(
                        format!("{s:?} is not one of [{}]", self.options.join(", ")),
                        nearest(s, self.options.iter().map(String::as_str)).map(str::to_string),
                    ))
                }
            }
            (kind, v) => Err(violation(format!("expected {kind:?}, got {}", v.type_name()).to_lowercase(), None)),
        }
    }

    /// A value that always passes [`ParamSpec::check_value`]: the documented
    /// default, else the range midpoint (rounded for ints), the first enum
    /// option, `false`, or the empty string.
    pub fn feasible_value(&self) -> ParamValue {
        if let Some(d) = &self.default {
            return d.clone();
        }
        match self.kind {
            ParamKind::Float => {
                let [lo, hi] = self.range.unwrap_or([0.0, 0.0]);
                ParamValue::Float(lo + (hi - lo) * 0.5)
            }
            ParamKind::Int => {
                let [lo, hi] = self.range.unwrap_or([0.0, 0.0]);
                let mid = (lo + (hi - lo) * 0.5).floor();
                ParamValue::Int(mid.clamp(lo.ceil(), hi.floor()) as i64)
            }
            ParamKind::Bool => ParamValue::Bool(false),
            ParamKind::Enum => ParamValue::Str(self.options.first().cloned().unwrap_or_default()),
            ParamKind::String => ParamValue::Str(String::new()),
        }
    }
}

/// Levenshtein distance over chars.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.chars().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != *cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Closest candidate by edit distance; ties go to the earlier candidate.
pub fn nearest<'a>(needle: &str, candidates: impl Iterator<Item = &'a str>) -> Option<&'a str> {
    candidates
        .map(|c| (edit_distance(&needle.to_lowercase(), &c.to_lowercase()), c))
        .min_by_key(|(d, _)| *d)
        .map(|(_, c)| c)
}

pub type ParamValues = BTreeMap<String, ParamValue>;

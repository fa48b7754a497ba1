//! Mixed-type, conditionally sized hyperparameter spaces.
//!
//! A [`SearchSpace`] holds static parameters (one scalar each) and dynamic
//! list parameters whose length is set by a static integer "controller".
//! Lists are always flattened at their maximum length so the real-valued
//! search dimension never changes; decoding truncates each list to the
//! controller value it sees in the same vector.

mod codec;
mod config;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use codec::{decode, encode, flatten, Axis};
pub use config::{parse_space, table1_space, TABLE1_SPACE};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaceError {
    #[error("config syntax error: {0}")]
    Syntax(String),
    #[error("invalid domain for `{name}`: {reason}")]
    InvalidDomain { name: String, reason: String },
    #[error("duplicate parameter name `{0}`")]
    DuplicateName(String),
    #[error("`{param}` is controlled by `{controller}`, which does not exist")]
    ControllerNotFound { param: String, controller: String },
    #[error("controller `{controller}` of `{param}` is inconsistent: {reason}")]
    ControllerRange {
        param: String,
        controller: String,
        reason: String,
    },
    #[error("vector has {got} components, space has {expected} axes")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite component {value} at axis {axis}")]
    NonFinite { axis: usize, value: f64 },
    #[error("missing value for `{0}`")]
    MissingValue(String),
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
    #[error("value {value} for `{name}` is outside its domain")]
    OutOfDomain { name: String, value: String },
    #[error("value {value} for `{name}` is off the step grid")]
    OffGrid { name: String, value: String },
    #[error("`{name}` has {len} elements but its controller says {expected}")]
    LengthMismatch {
        name: String,
        len: usize,
        expected: i64,
    },
}

/// The set of values one parameter may take.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamDomain {
    Continuous { lo: f64, hi: f64 },
    SteppedInt { lo: i64, hi: i64, step: i64 },
    Categorical { options: Vec<String> },
}

impl ParamDomain {
    fn validate(&self, name: &str) -> Result<(), SpaceError> {
        let bad = |reason: &str| {
            Err(SpaceError::InvalidDomain {
                name: name.to_string(),
                reason: reason.to_string(),
            })
        };
        match self {
            ParamDomain::Continuous { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite()) {
                    return bad("bounds must be finite");
                }
                if lo >= hi {
                    return bad("lo must be < hi");
                }
            }
            ParamDomain::SteppedInt { lo, hi, step } => {
                if *step <= 0 {
                    return bad("step must be positive");
                }
                if lo > hi {
                    return bad("lo must be <= hi");
                }
                if (hi - lo) % step != 0 {
                    return bad("hi - lo must be divisible by step");
                }
            }
            ParamDomain::Categorical { options } => {
                if options.is_empty() {
                    return bad("options must be non-empty");
                }
                for (i, o) in options.iter().enumerate() {
                    if options[..i].contains(o) {
                        return bad(&format!("duplicate option `{o}`"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Checks that a scalar value lies in the domain.
    pub fn check(&self, name: &str, value: &Value) -> Result<(), SpaceError> {
        let out = || SpaceError::OutOfDomain {
            name: name.to_string(),
            value: value.to_string(),
        };
        match (self, value) {
            (ParamDomain::Continuous { lo, hi }, v) => {
                let x = v.as_f64().ok_or_else(out)?;
                if !(x >= *lo && x <= *hi) {
                    return Err(out());
                }
            }
            (ParamDomain::SteppedInt { lo, hi, step }, Value::Int(v)) => {
                if v < lo || v > hi {
                    return Err(out());
                }
                if (v - lo) % step != 0 {
                    return Err(SpaceError::OffGrid {
                        name: name.to_string(),
                        value: value.to_string(),
                    });
                }
            }
            (ParamDomain::Categorical { options }, Value::Category(c)) => {
                if !options.contains(c) {
                    return Err(out());
                }
            }
            _ => return Err(out()),
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParamKind {
    Static,
    DynamicList { max_len: usize, controller: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub domain: ParamDomain,
    pub kind: ParamKind,
    /// Free-form group label (`graph`, `task`, ...) used by ablation masks.
    pub group: Option<String>,
}

impl ParamSpec {
    pub fn new(name: impl Into<String>, domain: ParamDomain) -> Self {
        ParamSpec {
            name: name.into(),
            domain,
            kind: ParamKind::Static,
            group: None,
        }
    }

    pub fn list_of(mut self, controller: impl Into<String>, max_len: usize) -> Self {
        self.kind = ParamKind::DynamicList {
            max_len,
            controller: controller.into(),
        };
        self
    }

    pub fn in_group(mut self, group: impl Into<String>) -> Self {
        self.group = Some(group.into());
        self
    }

    pub fn is_dynamic(&self) -> bool {
        matches!(self.kind, ParamKind::DynamicList { .. })
    }

    pub fn axis_len(&self) -> usize {
        match &self.kind {
            ParamKind::Static => 1,
            ParamKind::DynamicList { max_len, .. } => *max_len,
        }
    }
}

/// Validated, static-first ordered list of parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    params: Vec<ParamSpec>,
    axis_count: usize,
}

impl SearchSpace {
    /// Validates `params` and moves every dynamic list behind the static
    /// parameters, keeping relative order within each class.
    pub fn new(params: Vec<ParamSpec>) -> Result<Self, SpaceError> {
        for (i, p) in params.iter().enumerate() {
            if params[..i].iter().any(|q| q.name == p.name) {
                return Err(SpaceError::DuplicateName(p.name.clone()));
            }
            p.domain.validate(&p.name)?;
        }
        for p in &params {
            let ParamKind::DynamicList {
                max_len,
                controller,
            } = &p.kind
            else {
                continue;
            };
            let range_err = |reason: String| SpaceError::ControllerRange {
                param: p.name.clone(),
                controller: controller.clone(),
                reason,
            };
            if *max_len == 0 {
                return Err(range_err("max_len must be positive".into()));
            }
            let ctl = params.iter().find(|q| &q.name == controller).ok_or_else(|| {
                SpaceError::ControllerNotFound {
                    param: p.name.clone(),
                    controller: controller.clone(),
                }
            })?;
            if ctl.is_dynamic() {
                return Err(range_err("controller must be static".into()));
            }
            match ctl.domain {
                ParamDomain::SteppedInt { lo, hi, .. } => {
                    if lo < 1 {
                        return Err(range_err(format!("controller lo {lo} must be >= 1")));
                    }
                    if hi != *max_len as i64 {
                        return Err(range_err(format!(
                            "controller hi {hi} must equal max_len {max_len}"
                        )));
                    }
                }
                _ => return Err(range_err("controller must be an int parameter".into())),
            }
        }

        let (statics, dynamics): (Vec<_>, Vec<_>) =
            params.into_iter().partition(|p| !p.is_dynamic());
        let params: Vec<ParamSpec> = statics.into_iter().chain(dynamics).collect();
        let axis_count = params.iter().map(ParamSpec::axis_len).sum();
        Ok(SearchSpace { params, axis_count })
    }

    pub fn params(&self) -> &[ParamSpec] {
        &self.params
    }

    pub fn axis_count(&self) -> usize {
        self.axis_count
    }

    pub fn param(&self, name: &str) -> Option<&ParamSpec> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.iter().map(|p| p.name.as_str())
    }

    /// Dynamic lists controlled by `name`.
    pub fn dependents<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a ParamSpec> + 'a {
        self.params.iter().filter(move |p| {
            matches!(&p.kind, ParamKind::DynamicList { controller, .. } if controller == name)
        })
    }

    /// The subspace left after removing `names`.
    ///
    /// Fails if a remaining list loses its controller.
    pub fn without<S: AsRef<str>>(&self, names: &[S]) -> Result<SearchSpace, SpaceError> {
        let keep = self
            .params
            .iter()
            .filter(|p| !names.iter().any(|n| n.as_ref() == p.name))
            .cloned()
            .collect();
        SearchSpace::new(keep)
    }

    /// Checks that `setting` assigns exactly this space's parameters with
    /// in-domain values and list lengths that match their controllers.
    pub fn validate_setting(&self, setting: &Setting) -> Result<(), SpaceError> {
        if let Some(extra) = setting.names().find(|n| self.param(n).is_none()) {
            return Err(SpaceError::UnknownParam(extra.to_string()));
        }
        for p in &self.params {
            let value = setting
                .get(&p.name)
                .ok_or_else(|| SpaceError::MissingValue(p.name.clone()))?;
            match &p.kind {
                ParamKind::Static => p.domain.check(&p.name, value)?,
                ParamKind::DynamicList { controller, .. } => {
                    let Value::List(items) = value else {
                        return Err(SpaceError::OutOfDomain {
                            name: p.name.clone(),
                            value: value.to_string(),
                        });
                    };
                    let expected = setting
                        .get(controller)
                        .and_then(Value::as_int)
                        .ok_or_else(|| SpaceError::MissingValue(controller.clone()))?;
                    if items.len() as i64 != expected {
                        return Err(SpaceError::LengthMismatch {
                            name: p.name.clone(),
                            len: items.len(),
                            expected,
                        });
                    }
                    for item in items {
                        p.domain.check(&p.name, item)?;
                    }
                }
            }
        }
        Ok(())
    }
}

/// A single parameter value.
///
/// `None` only appears in fixed (masked) values such as "no activation".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Float(f64),
    Category(String),
    List(Vec<Value>),
    None,
}

impl Value {
    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(v) => Some(*v as f64),
            Value::Float(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_category(&self) -> Option<&str> {
        match self {
            Value::Category(c) => Some(c),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Value]> {
        match self {
            Value::List(items) => Some(items),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Float(v) => write!(f, "{v}"),
            Value::Category(c) => write!(f, "{c}"),
            Value::None => write!(f, "none"),
            Value::List(items) => {
                write!(f, "[")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{item}")?;
                }
                write!(f, "]")
            }
        }
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v)
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Float(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Category(v.to_string())
    }
}

impl<T: Into<Value>> From<Vec<T>> for Value {
    fn from(v: Vec<T>) -> Self {
        Value::List(v.into_iter().map(Into::into).collect())
    }
}

/// One concrete hyperparameter assignment.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Setting(BTreeMap<String, Value>);

impl Setting {
    pub fn new() -> Self {
        Setting::default()
    }

    pub fn with(mut self, name: impl Into<String>, value: impl Into<Value>) -> Self {
        self.insert(name, value);
        self
    }

    pub fn insert(&mut self, name: impl Into<String>, value: impl Into<Value>) {
        self.0.insert(name.into(), value.into());
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.0.get(name)
    }

    pub fn remove(&mut self, name: &str) -> Option<Value> {
        self.0.remove(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.0.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Value)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn int(&self, name: &str) -> Option<i64> {
        self.get(name).and_then(Value::as_int)
    }

    pub fn list(&self, name: &str) -> Option<&[Value]> {
        self.get(name).and_then(Value::as_list)
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (k, v)) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn int(name: &str, lo: i64, hi: i64, step: i64) -> ParamSpec {
        ParamSpec::new(name, ParamDomain::SteppedInt { lo, hi, step })
    }

    #[test]
    fn dynamic_params_move_behind_statics() {
        let space = SearchSpace::new(vec![
            int("n", 1, 4, 1),
            int("w", 8, 64, 8).list_of("n", 4),
            int("d", 0, 10, 2),
        ])
        .unwrap();
        let names: Vec<_> = space.names().collect();
        assert_eq!(names, ["n", "d", "w"]);
        assert_eq!(space.axis_count(), 6);
    }

    #[test]
    fn rejects_bad_domains() {
        let err = SearchSpace::new(vec![int("x", 0, 5, 2)]).unwrap_err();
        assert!(matches!(err, SpaceError::InvalidDomain { .. }));
        let err = SearchSpace::new(vec![ParamSpec::new(
            "c",
            ParamDomain::Continuous { lo: 1.0, hi: 1.0 },
        )])
        .unwrap_err();
        assert!(matches!(err, SpaceError::InvalidDomain { .. }));
        let err = SearchSpace::new(vec![ParamSpec::new(
            "a",
            ParamDomain::Categorical {
                options: vec!["x".into(), "x".into()],
            },
        )])
        .unwrap_err();
        assert!(matches!(err, SpaceError::InvalidDomain { .. }));
    }

    #[test]
    fn rejects_inconsistent_controllers() {
        let err = SearchSpace::new(vec![int("n", 1, 5, 1), int("w", 8, 64, 8).list_of("n", 4)])
            .unwrap_err();
        assert!(matches!(err, SpaceError::ControllerRange { .. }));
        let err = SearchSpace::new(vec![int("n", 0, 4, 1), int("w", 8, 64, 8).list_of("n", 4)])
            .unwrap_err();
        assert!(matches!(err, SpaceError::ControllerRange { .. }));
        let err = SearchSpace::new(vec![
            int("n", 1, 4, 1),
            int("w", 1, 4, 1).list_of("n", 4),
            int("v", 8, 64, 8).list_of("w", 4),
        ])
        .unwrap_err();
        assert!(matches!(err, SpaceError::ControllerRange { .. }));
    }

    #[test]
    fn subspace_must_keep_controllers() {
        let space = SearchSpace::new(vec![
            int("n", 1, 4, 1),
            int("w", 8, 64, 8).list_of("n", 4),
            int("d", 0, 10, 2),
        ])
        .unwrap();
        assert_eq!(space.without(&["n", "w"]).unwrap().axis_count(), 1);
        assert!(matches!(
            space.without(&["n"]).unwrap_err(),
            SpaceError::ControllerNotFound { .. }
        ));
    }

    #[test]
    fn value_json_shapes() {
        let s: Setting =
            serde_json::from_str(r#"{"n":2,"w":[8,16],"x":0.5,"a":"relu","z":null}"#).unwrap();
        assert_eq!(s.int("n"), Some(2));
        assert_eq!(s.get("x"), Some(&Value::Float(0.5)));
        assert_eq!(s.get("a"), Some(&Value::Category("relu".into())));
        assert_eq!(s.get("z"), Some(&Value::None));
        assert_eq!(s.list("w").unwrap().len(), 2);
        let back: Setting = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
    }
}

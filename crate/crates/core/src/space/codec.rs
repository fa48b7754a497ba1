use std::fmt;

use super::{ParamDomain, ParamKind, SearchSpace, Setting, SpaceError, Value};

/// One scalar coordinate of the flattened space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Axis {
    pub param: String,
    /// 0-based list element for dynamic parameters.
    pub element: Option<usize>,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.element {
            None => write!(f, "{}", self.param),
            Some(i) => write!(f, "{}[{}]", self.param, i + 1),
        }
    }
}

/// Lists the scalar axes in parameter order, lists expanded to `max_len`.
pub fn flatten(space: &SearchSpace) -> Vec<Axis> {
    let mut axes = Vec::with_capacity(space.axis_count());
    for p in space.params() {
        match &p.kind {
            ParamKind::Static => axes.push(Axis {
                param: p.name.clone(),
                element: None,
            }),
            ParamKind::DynamicList { max_len, .. } => {
                axes.extend((0..*max_len).map(|i| Axis {
                    param: p.name.clone(),
                    element: Some(i),
                }));
            }
        }
    }
    axes
}

fn decode_scalar(domain: &ParamDomain, x: f64) -> Value {
    let x = x.clamp(0.0, 1.0);
    match domain {
        ParamDomain::Continuous { lo, hi } => Value::Float((lo + x * (hi - lo)).clamp(*lo, *hi)),
        ParamDomain::SteppedInt { lo, hi, step } => {
            let steps = ((hi - lo) / step) as f64;
            // round half up
            let k = (x * steps + 0.5).floor() as i64;
            Value::Int(lo + step * k)
        }
        ParamDomain::Categorical { options } => {
            let k = options.len();
            let idx = ((x * k as f64).floor() as usize).min(k - 1);
            Value::Category(options[idx].clone())
        }
    }
}

fn encode_scalar(domain: &ParamDomain, value: &Value) -> f64 {
    match (domain, value) {
        (ParamDomain::Continuous { lo, hi }, v) => {
            let x = v.as_f64().unwrap_or(*lo);
            (x - lo) / (hi - lo)
        }
        (ParamDomain::SteppedInt { lo, hi, step }, Value::Int(v)) => {
            if hi == lo {
                0.5
            } else {
                ((v - lo) / step) as f64 / ((hi - lo) / step) as f64
            }
        }
        (ParamDomain::Categorical { options }, Value::Category(c)) => {
            let idx = options.iter().position(|o| o == c).unwrap_or(0);
            (idx as f64 + 0.5) / options.len() as f64
        }
        // unreachable after validation
        _ => 0.5,
    }
}

/// Maps a real vector onto a setting.
///
/// Every axis is read from the unit box (values outside are clamped).
/// Lists are truncated to their controller's decoded value; the trailing
/// axes are ignored.
pub fn decode(space: &SearchSpace, vector: &[f64]) -> Result<Setting, SpaceError> {
    if vector.len() != space.axis_count() {
        return Err(SpaceError::DimensionMismatch {
            expected: space.axis_count(),
            got: vector.len(),
        });
    }
    if let Some((axis, &value)) = vector.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(SpaceError::NonFinite { axis, value });
    }

    let mut setting = Setting::new();
    let mut offset = 0;
    for p in space.params() {
        match &p.kind {
            ParamKind::Static => {
                setting.insert(p.name.clone(), decode_scalar(&p.domain, vector[offset]));
                offset += 1;
            }
            ParamKind::DynamicList {
                max_len,
                controller,
            } => {
                // statics precede lists, so the controller is already decoded
                let len = setting
                    .int(controller)
                    .expect("controller decoded before its list") as usize;
                let items = vector[offset..offset + len]
                    .iter()
                    .map(|&x| decode_scalar(&p.domain, x))
                    .collect();
                setting.insert(p.name.clone(), Value::List(items));
                offset += max_len;
            }
        }
    }
    Ok(setting)
}

/// Inverse of [`decode`]; unused list axes are set to `fill`.
pub fn encode(space: &SearchSpace, setting: &Setting, fill: f64) -> Result<Vec<f64>, SpaceError> {
    space.validate_setting(setting)?;
    let mut out = Vec::with_capacity(space.axis_count());
    for p in space.params() {
        let value = setting.get(&p.name).expect("validated");
        match &p.kind {
            ParamKind::Static => out.push(encode_scalar(&p.domain, value)),
            ParamKind::DynamicList { max_len, .. } => {
                let items = value.as_list().expect("validated");
                out.extend(items.iter().map(|v| encode_scalar(&p.domain, v)));
                out.extend(std::iter::repeat_n(fill, max_len - items.len()));
            }
        }
    }
    Ok(out)
}

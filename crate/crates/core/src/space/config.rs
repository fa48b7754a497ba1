//! TOML space files.
//!
//! ```toml
//! [[param]]
//! name = "s_g"
//! type = "int"          # continuous | int | categorical
//! lo = 32
//! hi = 512
//! step = 32             # int only, defaults to 1
//! list_of = "n_g"       # optional: length follows this controller
//! max_len = 6           # required with list_of
//! group = "graph"       # optional ablation group
//! ```

use serde::Deserialize;

use super::{ParamDomain, ParamKind, ParamSpec, SearchSpace, SpaceError};

/// The graph-convolution space shipped as `tables/table1.space`.
pub const TABLE1_SPACE: &str = include_str!("../../../../tables/table1.space");

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    #[serde(default)]
    param: Vec<RawParam>,
}

#[derive(Deserialize, Clone, Copy)]
#[serde(untagged)]
enum Number {
    Int(i64),
    Float(f64),
}

impl Number {
    fn as_f64(self) -> f64 {
        match self {
            Number::Int(v) => v as f64,
            Number::Float(v) => v,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParam {
    name: String,
    #[serde(rename = "type")]
    kind: String,
    lo: Option<Number>,
    hi: Option<Number>,
    step: Option<Number>,
    options: Option<Vec<String>>,
    list_of: Option<String>,
    max_len: Option<usize>,
    group: Option<String>,
}

impl RawParam {
    fn into_spec(self) -> Result<ParamSpec, SpaceError> {
        let syntax = |msg: String| SpaceError::Syntax(format!("parameter `{}`: {msg}", self.name));
        let need = |field: &str, v: Option<Number>| v.ok_or_else(|| syntax(format!("missing `{field}`")));
        let int = |field: &str, v: Number| match v {
            Number::Int(i) => Ok(i),
            Number::Float(_) => Err(syntax(format!("`{field}` must be an integer"))),
        };

        let domain = match self.kind.as_str() {
            "continuous" => {
                if self.step.is_some() || self.options.is_some() {
                    return Err(syntax("continuous takes only `lo` and `hi`".into()));
                }
                ParamDomain::Continuous {
                    lo: need("lo", self.lo)?.as_f64(),
                    hi: need("hi", self.hi)?.as_f64(),
                }
            }
            "int" => {
                if self.options.is_some() {
                    return Err(syntax("int does not take `options`".into()));
                }
                ParamDomain::SteppedInt {
                    lo: int("lo", need("lo", self.lo)?)?,
                    hi: int("hi", need("hi", self.hi)?)?,
                    step: int("step", self.step.unwrap_or(Number::Int(1)))?,
                }
            }
            "categorical" => {
                if self.lo.is_some() || self.hi.is_some() || self.step.is_some() {
                    return Err(syntax("categorical takes only `options`".into()));
                }
                ParamDomain::Categorical {
                    options: self
                        .options
                        .clone()
                        .ok_or_else(|| syntax("missing `options`".into()))?,
                }
            }
            other => return Err(syntax(format!("unknown type `{other}`"))),
        };

        let mut spec = ParamSpec::new(self.name.clone(), domain);
        match (self.list_of.clone(), self.max_len) {
            (Some(controller), Some(max_len)) => spec = spec.list_of(controller, max_len),
            (None, None) => {}
            (Some(_), None) => return Err(syntax("`list_of` requires `max_len`".into())),
            (None, Some(_)) => return Err(syntax("`max_len` requires `list_of`".into())),
        }
        if let Some(g) = self.group.clone() {
            spec = spec.in_group(g);
        }
        Ok(spec)
    }
}

/// Parses and validates a space file.
pub fn parse_space(text: &str) -> Result<SearchSpace, SpaceError> {
    let raw: RawFile = toml::from_str(text).map_err(|e| SpaceError::Syntax(e.to_string()))?;
    let params = raw
        .param
        .into_iter()
        .map(RawParam::into_spec)
        .collect::<Result<Vec<_>, _>>()?;
    SearchSpace::new(params)
}

fn quote(s: &str) -> String {
    serde_json::to_string(s).expect("string serializes")
}

impl SearchSpace {
    /// Writes the space back out in the format [`parse_space`] reads.
    pub fn to_toml(&self) -> String {
        let mut out = String::new();
        for p in self.params() {
            out.push_str("[[param]]\n");
            out.push_str(&format!("name = {}\n", quote(&p.name)));
            match &p.domain {
                ParamDomain::Continuous { lo, hi } => {
                    out.push_str("type = \"continuous\"\n");
                    out.push_str(&format!("lo = {lo:?}\nhi = {hi:?}\n"));
                }
                ParamDomain::SteppedInt { lo, hi, step } => {
                    out.push_str("type = \"int\"\n");
                    out.push_str(&format!("lo = {lo}\nhi = {hi}\nstep = {step}\n"));
                }
                ParamDomain::Categorical { options } => {
                    out.push_str("type = \"categorical\"\n");
                    let opts: Vec<String> = options.iter().map(|o| quote(o)).collect();
                    out.push_str(&format!("options = [{}]\n", opts.join(", ")));
                }
            }
            if let ParamKind::DynamicList { max_len, controller } = &p.kind {
                out.push_str(&format!("list_of = {}\nmax_len = {max_len}\n", quote(controller)));
            }
            if let Some(g) = &p.group {
                out.push_str(&format!("group = {}\n", quote(g)));
            }
            out.push('\n');
        }
        out
    }
}

pub fn table1_space() -> SearchSpace {
    parse_space(TABLE1_SPACE).expect("bundled table1.space is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table1_matches_summary() {
        let space = table1_space();
        assert_eq!(space.params().len(), 6);
        let dom = |n: &str| space.param(n).unwrap().domain.clone();
        assert_eq!(dom("n_g"), ParamDomain::SteppedInt { lo: 1, hi: 6, step: 1 });
        assert_eq!(dom("s_g"), ParamDomain::SteppedInt { lo: 32, hi: 512, step: 32 });
        assert_eq!(dom("s_d"), ParamDomain::SteppedInt { lo: 64, hi: 1024, step: 64 });
        assert_eq!(dom("n_f"), ParamDomain::SteppedInt { lo: 1, hi: 6, step: 1 });
        assert_eq!(dom("s_f"), ParamDomain::SteppedInt { lo: 64, hi: 1024, step: 64 });
        assert_eq!(
            dom("a"),
            ParamDomain::Categorical {
                options: vec!["sigmoid".into(), "relu".into(), "tanh".into()]
            }
        );
        assert_eq!(
            space.param("s_f").unwrap().kind,
            ParamKind::DynamicList {
                max_len: 6,
                controller: "n_f".into()
            }
        );
        assert_eq!(space.param("s_g").unwrap().group.as_deref(), Some("graph"));
    }

    #[test]
    fn toml_round_trip() {
        let space = table1_space();
        assert_eq!(parse_space(&space.to_toml()).unwrap(), space);
        let odd = SearchSpace::new(vec![ParamSpec::new(
            "lr \"x\"",
            ParamDomain::Continuous { lo: 1e-7, hi: 0.1 + 0.2 },
        )])
        .unwrap();
        assert_eq!(parse_space(&odd.to_toml()).unwrap(), odd);
    }

    #[test]
    fn single_continuous() {
        let space = parse_space(
            r#"
            [[param]]
            name = "x"
            type = "continuous"
            lo = 0
            hi = 1
            "#,
        )
        .unwrap();
        assert_eq!(space.axis_count(), 1);
    }

    #[test]
    fn dangling_controller() {
        let err = parse_space(
            r#"
            [[param]]
            name = "s_g"
            type = "int"
            lo = 32
            hi = 512
            step = 32
            list_of = "n_missing"
            max_len = 6
            "#,
        )
        .unwrap_err();
        assert!(matches!(err, SpaceError::ControllerNotFound { .. }), "{err}");
    }

    #[test]
    fn syntax_and_duplicates() {
        assert!(matches!(parse_space("[[param]\nname="), Err(SpaceError::Syntax(_))));
        assert!(matches!(
            parse_space("[[param]]\nname = \"x\"\ntype = \"int\"\nlo = 1\nhi = 2.5\n"),
            Err(SpaceError::Syntax(_))
        ));
        assert!(matches!(
            parse_space("[[param]]\nname = \"x\"\ntype = \"blob\"\n"),
            Err(SpaceError::Syntax(_))
        ));
        let dup = "[[param]]\nname = \"x\"\ntype = \"int\"\nlo = 1\nhi = 2\n".repeat(2);
        assert!(matches!(parse_space(&dup), Err(SpaceError::DuplicateName(_))));
    }

    #[test]
    fn controller_range_mismatch() {
        let text = r#"
            [[param]]
            name = "n"
            type = "int"
            lo = 1
            hi = 4
            [[param]]
            name = "w"
            type = "int"
            lo = 1
            hi = 9
            list_of = "n"
            max_len = 6
        "#;
        assert!(matches!(parse_space(text), Err(SpaceError::ControllerRange { .. })));
    }
}

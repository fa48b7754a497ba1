//! Line-delimited JSON wire protocol for external evaluators.
//!
//! ```text
//! child  -> {"type":"ready","protocol":1}
//! parent -> {"type":"eval","trial":7,"repeat":0,"seed":123,"setting":{...}}
//! child  -> {"type":"score","value":8.8239999999999996e-1}
//!         | {"type":"error","message":"..."}
//! ```
//!
//! Scores are written with 17 significant digits.

use serde::{Deserialize, Serialize};

use crate::fmt_f64;
use crate::space::Setting;

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Message {
    Ready {
        protocol: u32,
    },
    Eval {
        trial: u64,
        repeat: u32,
        seed: u64,
        setting: Setting,
    },
    Score {
        value: f64,
    },
    Error {
        message: String,
    },
}

impl Message {
    pub fn parse(line: &str) -> Result<Message, String> {
        serde_json::from_str(line.trim()).map_err(|e| e.to_string())
    }

    /// Serializes to one line, without the trailing newline.
    pub fn to_line(&self) -> String {
        match self {
            Message::Score { value } if value.is_finite() => {
                format!(r#"{{"type":"score","value":{}}}"#, fmt_f64(*value))
            }
            other => serde_json::to_string(other).expect("message serializes"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn score_keeps_every_bit() {
        for v in [0.6, 0.9925, 1.0 / 3.0, 1e-300, 123456.789] {
            let line = Message::Score { value: v }.to_line();
            assert_eq!(Message::parse(&line).unwrap(), Message::Score { value: v });
        }
        assert_eq!(
            Message::Score { value: 0.6 }.to_line(),
            r#"{"type":"score","value":5.9999999999999998e-1}"#
        );
    }

    #[test]
    fn request_shape() {
        let m = Message::Eval {
            trial: 3,
            repeat: 1,
            seed: 99,
            setting: Setting::new().with("n_g", 2).with("a", "relu"),
        };
        let line = m.to_line();
        assert_eq!(
            line,
            r#"{"type":"eval","trial":3,"repeat":1,"seed":99,"setting":{"a":"relu","n_g":2}}"#
        );
        assert_eq!(Message::parse(&line).unwrap(), m);
        assert_eq!(
            Message::parse(r#"{"type":"ready","protocol":1}"#).unwrap(),
            Message::Ready { protocol: 1 }
        );
        assert!(Message::parse("not json").is_err());
    }
}

use serde::Serialize;
use serde_json::{Map, Number, Value};

pub const SCHEMA_VERSION: u32 = 1;
const SIGNIFICANT_DIGITS: usize = 12;

/// Rounds to 12 significant digits so printed documents are stable.
pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
        .parse()
        .unwrap_or(x)
}

fn round_value(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => n
            .as_f64()
            .and_then(|x| Number::from_f64(round_sig(x)))
            .map_or(Value::Null, Value::Number),
        Value::Array(a) => Value::Array(a.into_iter().map(round_value).collect()),
        Value::Object(o) => {
            Value::Object(o.into_iter().map(|(k, v)| (k, round_value(v))).collect())
        }
        other => other,
    }
}

/// `{"schema_version": 1, "command": ..., <body fields>}` with rounded numbers.
pub fn document<T: Serialize>(command: &str, body: &T) -> Value {
    let mut map = Map::new();
    map.insert("schema_version".into(), SCHEMA_VERSION.into());
    map.insert("command".into(), command.into());
    match serde_json::to_value(body).expect("documents serialize") {
        Value::Object(fields) => map.extend(fields),
        other => {
            map.insert("result".into(), other);
        }
    }
    round_value(Value::Object(map))
}

pub fn error_document(command: &str, kind: &str, field: Option<&str>, message: &str) -> Value {
    serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "error": {
            "kind": kind,
            "field": field,
            "message": message,
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding() {
        assert_eq!(round_sig(0.012_449_202_258_786_5), 0.0124492022588);
        assert_eq!(round_sig(1.0), 1.0);
        assert_eq!(round_sig(0.0), 0.0);
        let doc = document("x", &serde_json::json!({"a": [1.0 / 3.0], "n": 3}));
        assert_eq!(
            doc.to_string(),
            r#"{"a":[0.333333333333],"command":"x","n":3,"schema_version":1}"#
        );
    }
}

//! Deterministic JSON and CSV emission with atomic writes.

use crate::config::RunConfig;
use serde_json::{Map, Number, Value};
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

/// A float as a JSON number with 17 significant digits; non-finite values
/// become `null` and negative zero is written as zero.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        let x = x + 0.0;
        Value::Number(Number::from_str(&format!("{x:.16e}")).expect("formatted float parses"))
    } else {
        Value::Null
    }
}

pub fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| num(x)).collect())
}

/// 17 significant digits for CSV cells.
pub fn f17(x: f64) -> String {
    format!("{:.16e}", x + 0.0)
}

/// 12 significant digits for CSV cells.
pub fn f12(x: f64) -> String {
    format!("{:.11e}", x + 0.0)
}

/// One named tolerance check. `breach` is true when `value` exceeds
/// `tolerance` or is not finite.
pub fn check(name: &str, value: f64, tolerance: f64) -> Value {
    let mut m = Map::new();
    m.insert("name".into(), Value::String(name.into()));
    m.insert("value".into(), num(value));
    m.insert("tolerance".into(), num(tolerance));
    m.insert("breach".into(), Value::Bool(!(value <= tolerance)));
    Value::Object(m)
}

/// True if any object in the tree has `"breach": true`.
pub fn has_breach(v: &Value) -> bool {
    match v {
        Value::Object(m) => m.get("breach") == Some(&Value::Bool(true)) || m.values().any(has_breach),
        Value::Array(a) => a.iter().any(has_breach),
        _ => false,
    }
}

fn config_value(cfg: &RunConfig) -> Value {
    let mut m = Map::new();
    m.insert("r".into(), num(cfg.r));
    m.insert("mass".into(), num(cfg.mass));
    m.insert("alpha".into(), num(cfg.alpha));
    m.insert("hbar".into(), num(cfg.hbar));
    m.insert("twice_l".into(), cfg.twice_l.into());
    m.insert("twice_j_max".into(), cfg.twice_j_max.into());
    m.insert("tau_override".into(), cfg.tau_override.map_or(Value::Null, num));
    m.insert("seed".into(), cfg.seed.into());
    let tol: Map<String, Value> = cfg.tolerances.iter().map(|(k, v)| (k.clone(), num(*v))).collect();
    m.insert("tolerances".into(), Value::Object(tol));
    Value::Object(m)
}

/// Fields shared by every report, in a fixed order.
pub fn envelope(command: &str, command_line: &str, cfg: &RunConfig, tau_overridden: bool) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("command".into(), Value::String(command.into()));
    m.insert("command_line".into(), Value::String(command_line.into()));
    m.insert("version".into(), Value::String(env!("CARGO_PKG_VERSION").into()));
    m.insert("config_hash".into(), Value::String(cfg.hash()));
    m.insert("config".into(), config_value(cfg));
    m.insert("tau_override".into(), Value::Bool(tau_overridden));
    m
}

pub fn to_json_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

/// Writes `bytes` to `dir/name` through a temporary file and a rename.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(".{name}.tmp"));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, dir.join(name))
}

/// CSV text from a header and rows of preformatted cells.
pub fn csv_text(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for row in rows {
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_carry_seventeen_digits() {
        let t = serde_json::to_string(&num(0.1)).unwrap();
        assert_eq!(t, "1.0000000000000001e-1");
        assert_eq!(t.parse::<f64>().unwrap(), 0.1);
        assert_eq!(num(f64::NAN), Value::Null);
        assert_eq!(num(-0.0), num(0.0));
        assert_eq!(f12(1.0 / 3.0), "3.33333333333e-1");
    }

    #[test]
    fn breach_detection_is_recursive() {
        let ok = serde_json::json!({"a": [check("x", 1.0, 2.0)]});
        assert!(!has_breach(&ok));
        let bad = serde_json::json!({"a": [check("x", 1.0, 2.0), {"b": check("y", 3.0, 2.0)}]});
        assert!(has_breach(&bad));
        assert!(has_breach(&check("nan", f64::NAN, 1.0)));
    }

    #[test]
    fn csv_rows_follow_the_header() {
        let t = csv_text(&["a", "b"], &[vec!["1".into(), "2".into()]]);
        assert_eq!(t, "a,b\n1,2\n");
    }
}

//! A small JSON Schema validator covering the draft-07 subset the bundled
//! report schema uses: type, enum, required, properties,
//! additionalProperties:false, items, minimum, and local $ref into
//! #/definitions.

use serde_json::Value;

/// The schema file shipped with the crate, embedded so validation needs no
/// filesystem access.
pub const REPORT_SCHEMA: &str = include_str!("../schema/report.schema.json");

pub fn report_schema() -> Value {
    serde_json::from_str(REPORT_SCHEMA).expect("bundled schema parses")
}

/// Validate `instance` against `schema`; errors carry a JSON-pointer-style
/// path into the instance.
pub fn validate(schema: &Value, instance: &Value) -> Result<(), String> {
    let root = schema;
    check(schema, instance, root, "")
}

fn resolve<'a>(s: &'a Value, root: &'a Value) -> Result<&'a Value, String> {
    let Some(r) = s.get("$ref").and_then(Value::as_str) else { return Ok(s) };
    let path = r
        .strip_prefix("#/")
        .ok_or_else(|| format!("unsupported $ref '{r}'"))?;
    let mut cur = root;
    for seg in path.split('/') {
        cur = cur.get(seg).ok_or_else(|| format!("dangling $ref '{r}'"))?;
    }
    Ok(cur)
}

fn type_ok(ty: &str, v: &Value) -> bool {
    match ty {
        "object" => v.is_object(),
        "array" => v.is_array(),
        "string" => v.is_string(),
        "integer" => v.is_i64() || v.is_u64(),
        "number" => v.is_number(),
        "boolean" => v.is_boolean(),
        "null" => v.is_null(),
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn bundled_schema_is_valid_json() {
        let s = report_schema();
        assert_eq!(s["properties"]["schema_version"]["enum"][0], json!(1));
    }

    #[test]
    fn minimal_report_validates() {
        let s = report_schema();
        let r = json!({
            "schema_version": 1,
            "command": "verify",
            "config": {"int_min": 0, "int_max": 1, "refs": 1, "gran": 2,
                       "determinize": true, "seed": 0},
            "verdict": "pass",
            "timing_ms": 3
        });
        validate(&s, &r).expect("validates");
    }

    #[test]
    fn violations_are_reported_with_paths() {
        let s = report_schema();
        let mut r = json!({
            "schema_version": 1,
            "command": "verify",
            "config": {"int_min": 0, "int_max": 1, "refs": 1, "gran": 2,
                       "determinize": true, "seed": 0},
            "verdict": "pass",
            "timing_ms": 3
        });
        r["verdict"] = json!("maybe");
        assert!(validate(&s, &r).unwrap_err().contains("enum"));
        r["verdict"] = json!("pass");
        r["bogus"] = json!(1);
        assert!(validate(&s, &r).unwrap_err().contains("bogus"));
        r.as_object_mut().unwrap().remove("bogus");
        r.as_object_mut().unwrap().remove("timing_ms");
        assert!(validate(&s, &r).unwrap_err().contains("timing_ms"));
    }

    #[test]
    fn nested_failures_are_checked() {
        let s = report_schema();
        let r = json!({
            "schema_version": 1,
            "command": "check-pc",
            "config": {"int_min": 0, "int_max": 1, "refs": 1, "gran": 2,
                       "determinize": true, "seed": 0},
            "verdict": "fail",
            "failures": [{"site": "init.0", "clause": "mono", "kind": "output",
                          "detail": "d"}],
            "timing_ms": 1
        });
        validate(&s, &r).expect("validates");
        let bad = json!({
            "schema_version": 1,
            "command": "check-pc",
            "config": {"int_min": 0, "int_max": 1, "refs": 1, "gran": 2,
                       "determinize": true, "seed": 0},
            "verdict": "fail",
            "failures": [{"site": "init.0", "clause": "nonsense", "kind": "output",
                          "detail": "d"}],
            "timing_ms": 1
        });
        assert!(validate(&s, &bad).is_err());
    }
}

fn check(schema: &Value, v: &Value, root: &Value, path: &str) -> Result<(), String> {
    let s = resolve(schema, root)?;
    if let Some(ty) = s.get("type").and_then(Value::as_str) {
        if !type_ok(ty, v) {
            return Err(format!("{path}: expected {ty}"));
        }
    }
    if let Some(options) = s.get("enum").and_then(Value::as_array) {
        if !options.contains(v) {
            return Err(format!("{path}: value {v} not in enum"));
        }
    }
    if let Some(min) = s.get("minimum").and_then(Value::as_i64) {
        if let Some(n) = v.as_i64() {
            if n < min {
                return Err(format!("{path}: {n} below minimum {min}"));
            }
        }
    }
    if let Some(obj) = v.as_object() {
        if let Some(req) = s.get("required").and_then(Value::as_array) {
            for r in req {
                let name = r.as_str().unwrap_or_default();
                if !obj.contains_key(name) {
                    return Err(format!("{path}: missing required property '{name}'"));
                }
            }
        }
        let props = s.get("properties").and_then(Value::as_object);
        let closed = s.get("additionalProperties") == Some(&Value::Bool(false));
        for (k, val) in obj {
            match props.and_then(|p| p.get(k)) {
                Some(sub) => check(sub, val, root, &format!("{path}/{k}"))?,
                None if closed => {
                    return Err(format!("{path}: unexpected property '{k}'"));
                }
                None => {}
            }
        }
    }
    if let Some(arr) = v.as_array() {
        if let Some(items) = s.get("items") {
            for (i, val) in arr.iter().enumerate() {
                check(items, val, root, &format!("{path}/{i}"))?;
            }
        }
    }
    Ok(())
}

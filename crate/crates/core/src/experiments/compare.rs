use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observables::fmt_f64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoldenValue {
    pub expected: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantityCheck {
    pub name: String,
    pub observed: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub checks: Vec<QuantityCheck>,
    pub passed: bool,
}

impl fmt::Display for ComparisonReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{} {}: observed {} expected {} ± {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                fmt_f64(c.observed),
                fmt_f64(c.expected),
                fmt_f64(c.tolerance)
            )?;
        }
        write!(f, "{}", if self.passed { "overall: PASS" } else { "overall: FAIL" })
    }
}

fn quantities(doc: &serde_json::Value, what: &str) -> Result<serde_json::Map<String, serde_json::Value>> {
    doc.get("quantities")
        .and_then(|q| q.as_object())
        .cloned()
        .ok_or_else(|| Error::Schema(format!("{what} has no \"quantities\" object")))
}

/// Check every golden quantity against a run summary. Quantities present
/// only in the result are ignored; golden quantities missing from the
/// result are a schema error.
pub fn compare(result: &serde_json::Value, golden: &serde_json::Value) -> Result<ComparisonReport> {
    let observed = quantities(result, "result")?;
    let golden: BTreeMap<String, GoldenValue> = serde_json::from_value(serde_json::Value::Object(quantities(golden, "golden file")?))
        .map_err(|e| Error::Schema(format!("golden quantities must be {{expected, tolerance}} objects: {e}")))?;
    let mut checks = Vec::new();
    for (name, g) in golden {
        let v = observed
            .get(&name)
            .ok_or_else(|| Error::Schema(format!("quantity {name:?} missing from result")))?;
        let observed = v
            .as_f64()
            .ok_or_else(|| Error::Schema(format!("quantity {name:?} is not a number")))?;
        checks.push(QuantityCheck {
            passed: (observed - g.expected).abs() <= g.tolerance,
            name,
            observed,
            expected: g.expected,
            tolerance: g.tolerance,
        });
    }
    Ok(ComparisonReport {
        passed: checks.iter().all(|c| c.passed),
        checks,
    })
}

pub fn compare_files(result: &Path, golden: &Path) -> Result<ComparisonReport> {
    let read = |p: &Path| -> Result<serde_json::Value> {
        let text = std::fs::read_to_string(p).map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
        Ok(serde_json::from_str(&text)?)
    };
    compare(&read(result)?, &read(golden)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn identical_passes() {
        let r = json!({"quantities": {"tau_hist": 3.54e-8}});
        let g = json!({"quantities": {"tau_hist": {"expected": 3.54e-8, "tolerance": 0.0}}});
        assert!(compare(&r, &g).unwrap().passed);
    }

    #[test]
    fn out_of_tolerance_names_quantity() {
        let r = json!({"quantities": {"tau_hist": 40e-9}});
        let g = json!({"quantities": {"tau_hist": {"expected": 35.4e-9, "tolerance": 2e-9}}});
        let rep = compare(&r, &g).unwrap();
        assert!(!rep.passed);
        assert!(rep.to_string().contains("FAIL tau_hist"));
    }

    #[test]
    fn missing_quantity_is_schema_error() {
        let r = json!({"quantities": {}});
        let g = json!({"quantities": {"tau_hist": {"expected": 1.0, "tolerance": 0.1}}});
        assert!(matches!(compare(&r, &g), Err(Error::Schema(_))));
        assert!(matches!(compare(&json!({}), &g), Err(Error::Schema(_))));
    }
}

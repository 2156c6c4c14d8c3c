//! `dotted.key=value` overrides applied to a JSON config document.
//!
//! Keys must already exist in the document (after defaults are filled in),
//! so a typo is an error rather than a silently ignored field. Array
//! elements are addressed by index, e.g. `methods.0.config.n_samples=200`.
//! The value is parsed as JSON when possible and taken as a string otherwise.

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Override {
    pub path: Vec<String>,
    pub value: Value,
    /// The text as given on the command line.
    pub raw: String,
}

impl Override {
    pub fn parse(raw: &str) -> Result<Self> {
        let (key, value) = raw
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override {raw:?} is not key=value")))?;
        let key = key.trim();
        if key.is_empty() || key.split('.').any(str::is_empty) {
            return Err(Error::Config(format!(
                "override {raw:?} has an empty key segment"
            )));
        }
        let value =
            serde_json::from_str(value.trim()).unwrap_or_else(|_| Value::String(value.to_string()));
        Ok(Self {
            path: key.split('.').map(String::from).collect(),
            value,
            raw: raw.to_string(),
        })
    }

    pub fn apply(&self, doc: &mut Value) -> Result<()> {
        let mut node = doc;
        for (depth, seg) in self.path.iter().enumerate() {
            let here = self.path[..=depth].join(".");
            node = match node {
                Value::Object(map) => map
                    .get_mut(seg)
                    .ok_or_else(|| Error::Config(format!("unknown config key {here:?}")))?,
                Value::Array(items) => {
                    let idx: usize = seg
                        .parse()
                        .map_err(|_| Error::Config(format!("{here:?}: expected an array index")))?;
                    let len = items.len();
                    items.get_mut(idx).ok_or_else(|| {
                        Error::Config(format!("{here:?}: index {idx} out of range (len {len})"))
                    })?
                }
                _ => {
                    return Err(Error::Config(format!(
                        "{here:?}: cannot descend into a scalar"
                    )))
                }
            };
        }
        *node = self.value.clone();
        Ok(())
    }
}

/// Normalizes `doc` through `T` (filling defaults), applies the overrides
/// and parses the result back into `T`. Returns the typed value and the
/// resolved document.
pub fn resolve<T: Serialize + DeserializeOwned>(
    doc: Value,
    overrides: &[Override],
) -> Result<(T, Value)> {
    let typed: T = serde_json::from_value(doc)?;
    let mut full = serde_json::to_value(&typed)?;
    for o in overrides {
        o.apply(&mut full)?;
    }
    let typed: T = serde_json::from_value(full.clone())
        .map_err(|e| Error::Config(format!("after overrides: {e}")))?;
    Ok((typed, full))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::ExperimentPlan;
    use crate::scenario::ScenarioConfig;
    use serde_json::json;

    #[test]
    fn parses_json_and_bare_strings() {
        let o = Override::parse("a.b=3").unwrap();
        assert_eq!(o.path, vec!["a", "b"]);
        assert_eq!(o.value, json!(3));
        assert_eq!(Override::parse("k=hello").unwrap().value, json!("hello"));
        assert_eq!(Override::parse("k=[1,2]").unwrap().value, json!([1, 2]));
        assert!(Override::parse("novalue").is_err());
        assert!(Override::parse("a..b=1").is_err());
        assert!(Override::parse("=1").is_err());
    }

    #[test]
    fn applies_to_nested_keys_and_arrays() {
        let mut doc = json!({"a": {"b": 1}, "list": [{"x": 0}, {"x": 1}]});
        Override::parse("a.b=2").unwrap().apply(&mut doc).unwrap();
        Override::parse("list.1.x=5")
            .unwrap()
            .apply(&mut doc)
            .unwrap();
        assert_eq!(doc, json!({"a": {"b": 2}, "list": [{"x": 0}, {"x": 5}]}));
        assert!(Override::parse("a.c=1").unwrap().apply(&mut doc).is_err());
        assert!(Override::parse("list.7.x=1")
            .unwrap()
            .apply(&mut doc)
            .is_err());
        assert!(Override::parse("a.b.c=1").unwrap().apply(&mut doc).is_err());
    }

    #[test]
    fn resolve_fills_defaults_before_overriding() {
        let (cfg, full): (ScenarioConfig, _) = resolve(
            json!({"n_users": 6}),
            &[Override::parse("pathloss.slope_db_per_decade=35").unwrap()],
        )
        .unwrap();
        assert_eq!(cfg.n_users, 6);
        assert_eq!(cfg.pathloss.slope_db_per_decade, 35.0);
        assert_eq!(full["pathloss"]["slope_db_per_decade"], json!(35));
    }

    #[test]
    fn resolve_plan_method_override() {
        let plan = serde_json::to_value(ExperimentPlan::default()).unwrap();
        let o = Override::parse("methods.0.config.n_samples=123").unwrap();
        let (p, _): (ExperimentPlan, _) = resolve(plan, &[o]).unwrap();
        assert_eq!(p.base_ce_config().n_samples, 123);
    }

    #[test]
    fn type_mismatch_is_config_error() {
        let o = Override::parse("n_users=lots").unwrap();
        let r: Result<(ScenarioConfig, Value)> = resolve(json!({}), &[o]);
        assert!(matches!(r, Err(Error::Config(_))));
    }
}

//! Dataset ingestion: one JSON document per dataset (products, processes,
//! demands, emissions_schedule, scenario) plus side-car CSV profile files
//! with 8760 rows and one column per hourly series.
//!
//! Named scenario variants live under `scenario_overrides` in the same
//! document as JSON patches that are deep-merged onto it before parsing, so
//! a variant only states what differs from the base.

use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::model::{Model, HOURS_PER_YEAR};
use crate::{Error, Result};

pub const BASE_SCENARIO: &str = "base";

/// Path of the bundled desk-scale dataset (for tests and docs).
pub fn desk_dataset_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../datasets/desk/model.json")
}

/// Objects merge key-by-key, recursively; any other value is replaced.
fn deep_merge(base: &mut Value, patch: &Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(k) {
                    Some(slot) => deep_merge(slot, v),
                    None => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (slot, v) => *slot = v.clone(),
    }
}

/// Copies each map key into the entries' `id` fields so the JSON does not
/// have to repeat itself.
fn inject_ids(doc: &mut Value, key: &str) -> Result<()> {
    if let Some(Value::Object(map)) = doc.get_mut(key) {
        for (id, entry) in map.iter_mut() {
            match entry {
                Value::Object(obj) => {
                    obj.insert("id".to_string(), Value::String(id.clone()));
                }
                _ => {
                    return Err(Error::Parse(format!(
                        "'{key}.{id}' must be a JSON object"
                    )))
                }
            }
        }
    }
    Ok(())
}

/// Loads the hourly profile table: a header row of series ids followed by
/// 8760 data rows.
pub fn load_profiles(path: &Path) -> Result<std::collections::BTreeMap<String, Vec<f64>>> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::Parse(format!("cannot read profiles '{}': {e}", path.display())))?;
    let headers: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut columns: Vec<Vec<f64>> = vec![Vec::with_capacity(HOURS_PER_YEAR); headers.len()];
    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != headers.len() {
            return Err(Error::Parse(format!(
                "profiles row {} has {} fields, expected {}",
                row_idx + 2,
                record.len(),
                headers.len()
            )));
        }
        for (col, field) in record.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|e| {
                Error::Parse(format!(
                    "profiles row {}, column '{}': {e}",
                    row_idx + 2,
                    headers[col]
                ))
            })?;
            columns[col].push(v);
        }
    }
    Ok(headers.into_iter().zip(columns).collect())
}

/// Loads a dataset and applies the named scenario's overrides. `scenario`
/// may be [`BASE_SCENARIO`] or any key under `scenario_overrides`.
pub fn load_model(path: &Path, scenario: &str) -> Result<Model> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    let mut doc: Value = serde_json::from_str(&text)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;

    let overrides = doc
        .as_object_mut()
        .ok_or_else(|| Error::Parse("dataset root must be a JSON object".into()))?
        .remove("scenario_overrides")
        .unwrap_or(Value::Object(Default::default()));
    if scenario != BASE_SCENARIO {
        let patch = overrides.get(scenario).ok_or_else(|| {
            let known: Vec<&str> = overrides
                .as_object()
                .map(|o| o.keys().map(String::as_str).collect())
                .unwrap_or_default();
            Error::InvalidArgument(format!(
                "unknown scenario '{scenario}'; available: base{}{}",
                if known.is_empty() { "" } else { ", " },
                known.join(", ")
            ))
        })?;
        deep_merge(&mut doc, patch);
    }

    let profiles_file = doc
        .as_object_mut()
        .unwrap()
        .remove("profiles_file")
        .and_then(|v| v.as_str().map(str::to_string));

    inject_ids(&mut doc, "products")?;
    inject_ids(&mut doc, "processes")?;

    let mut model: Model =
        serde_json::from_value(doc).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;

    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let profiles_path = match profiles_file {
        Some(f) => Some(dir.join(f)),
        None => {
            let default = dir.join("profiles.csv");
            default.exists().then_some(default)
        }
    };
    if let Some(p) = profiles_path {
        model.profiles = load_profiles(&p)?;
    }
    Ok(model)
}

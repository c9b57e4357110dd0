use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DataError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Feature,
    Target,
}

/// One column of a tabular dataset: its CSV header name, short symbol,
/// physical unit and whether it is an input or the response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub symbol: String,
    pub unit: String,
    pub role: Role,
}

impl ColumnSchema {
    pub fn feature(name: &str, symbol: &str, unit: &str) -> Self {
        Self {
            name: name.to_string(),
            symbol: symbol.to_string(),
            unit: unit.to_string(),
            role: Role::Feature,
        }
    }

    pub fn target(name: &str, symbol: &str, unit: &str) -> Self {
        Self {
            role: Role::Target,
            ..Self::feature(name, symbol, unit)
        }
    }
}

const MARUN_COLUMNS: [(&str, &str, &str); 18] = [
    ("Northing", "X1", "m"),
    ("Easting", "X2", "m"),
    ("Depth", "X3", "m"),
    ("Meterage", "X4", "m"),
    ("Drilling time", "X5", "hr"),
    ("Formation type", "X6", "-"),
    ("Hole size", "X7", "in"),
    ("Weight on bit", "X8", "1000 lb"),
    ("Flow rate", "X9", "gpm"),
    ("Mud weight", "X10", "pcf"),
    ("Marsh funnel viscosity", "X11", "-"),
    ("Retort solid", "X12", "%"),
    ("Pore pressure", "X13", "psi"),
    ("Fracture pressure", "X14", "psi"),
    ("FAN600/FAN300", "X15", "-"),
    ("Gel10min/Gel10s", "X16", "-"),
    ("Pump pressure", "X17", "psi"),
    ("Bit rotational speed", "X18", "rpm"),
];

/// The 18-input drilling schema with mud-loss severity (bbl/hr) as target.
pub fn default_schema() -> Vec<ColumnSchema> {
    let mut cols: Vec<ColumnSchema> = MARUN_COLUMNS
        .iter()
        .map(|(n, s, u)| ColumnSchema::feature(n, s, u))
        .collect();
    cols.push(ColumnSchema::target("Mud-loss severity", "Y", "bbl/hr"));
    cols
}

/// Reads a schema from a JSON array of column objects and validates it.
pub fn load_schema(path: &Path) -> Result<Vec<ColumnSchema>> {
    let text = std::fs::read_to_string(path)?;
    let schema: Vec<ColumnSchema> = serde_json::from_str(&text)?;
    validate_schema(&schema)?;
    Ok(schema)
}

pub(crate) fn validate_schema(schema: &[ColumnSchema]) -> Result<()> {
    let targets = schema.iter().filter(|c| c.role == Role::Target).count();
    if targets != 1 {
        return Err(DataError::Schema(format!(
            "exactly one target column required, found {targets}"
        )));
    }
    if schema.len() < 2 {
        return Err(DataError::Schema("at least one feature column required".into()));
    }
    let mut symbols = HashSet::new();
    let mut names = HashSet::new();
    for c in schema {
        if !symbols.insert(c.symbol.as_str()) {
            return Err(DataError::Schema(format!("duplicate symbol {:?}", c.symbol)));
        }
        if !names.insert(c.name.as_str()) {
            return Err(DataError::Schema(format!("duplicate column name {:?}", c.name)));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_schema_shape() {
        let s = default_schema();
        assert_eq!(s.len(), 19);
        assert!(validate_schema(&s).is_ok());
        assert_eq!(s[18].symbol, "Y");
        assert_eq!(s[18].unit, "bbl/hr");
        assert_eq!(s.iter().filter(|c| c.role == Role::Feature).count(), 18);
    }

    #[test]
    fn rejects_two_targets_and_duplicate_symbols() {
        let mut s = default_schema();
        s[0].role = Role::Target;
        assert!(matches!(validate_schema(&s), Err(DataError::Schema(_))));

        let mut s = default_schema();
        s[1].symbol = "X1".into();
        assert!(matches!(validate_schema(&s), Err(DataError::Schema(_))));
    }

    #[test]
    fn schema_json_roundtrip() {
        let s = default_schema();
        let text = serde_json::to_string(&s).unwrap();
        assert!(text.contains("\"role\":\"target\""));
        let back: Vec<ColumnSchema> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
    }
}

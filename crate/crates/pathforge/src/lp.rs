//! Sparse linear-program representation with named rows and columns.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    /// Objective coefficient, k€ per unit of the column.
    pub obj: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Row {
    pub name: String,
    /// (column index, coefficient); indices reference `columns`.
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// A minimization LP. Row/column names are unique; `metadata` carries a
/// semantic tag (balance / capacity / emissions / demand / ...) per name.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LinearProgram {
    pub name: String,
    pub columns: Vec<Column>,
    pub rows: Vec<Row>,
    pub metadata: BTreeMap<String, String>,
    #[serde(skip)]
    col_index: BTreeMap<String, usize>,
}

impl LinearProgram {
    pub fn new(name: &str) -> Self {
        LinearProgram {
            name: name.to_string(),
            ..Default::default()
        }
    }

    pub fn add_column(&mut self, name: &str, lower: f64, upper: f64, obj: f64) -> usize {
        debug_assert!(
            !self.col_index.contains_key(name),
            "duplicate column '{name}'"
        );
        let idx = self.columns.len();
        self.columns.push(Column {
            name: name.to_string(),
            lower,
            upper,
            obj,
        });
        self.col_index.insert(name.to_string(), idx);
        idx
    }

    pub fn add_row(&mut self, name: &str, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) {
        self.rows.push(Row {
            name: name.to_string(),
            coeffs,
            sense,
            rhs,
        });
    }

    pub fn tag(&mut self, name: &str, tag: &str) {
        self.metadata.insert(name.to_string(), tag.to_string());
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.col_index.get(name).copied()
    }

    pub fn row_index(&self, name: &str) -> Option<usize> {
        self.rows.iter().position(|r| r.name == name)
    }

    pub fn n_nonzeros(&self) -> usize {
        self.rows.iter().map(|r| r.coeffs.len()).sum()
    }

    /// Rebuilds the name index after deserialization.
    pub fn reindex(&mut self) {
        self.col_index = self
            .columns
            .iter()
            .enumerate()
            .map(|(i, c)| (c.name.clone(), i))
            .collect();
    }

    /// Structural checks: finite coefficients, valid column references,
    /// consistent bounds, unique names.
    pub fn validate(&self) -> Result<()> {
        let mut names: BTreeMap<&str, ()> = BTreeMap::new();
        for c in &self.columns {
            if names.insert(&c.name, ()).is_some() {
                return Err(Error::InvalidArgument(format!(
                    "duplicate column name '{}'",
                    c.name
                )));
            }
            if !c.obj.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "non-finite objective on column '{}'",
                    c.name
                )));
            }
            if c.lower > c.upper {
                return Err(Error::InvalidArgument(format!(
                    "column '{}' has lower {} > upper {}",
                    c.name, c.lower, c.upper
                )));
            }
            if c.lower.is_nan() || c.upper.is_nan() {
                return Err(Error::InvalidArgument(format!(
                    "NaN bound on column '{}'",
                    c.name
                )));
            }
        }
        let mut row_names: BTreeMap<&str, ()> = BTreeMap::new();
        for r in &self.rows {
            if row_names.insert(&r.name, ()).is_some() {
                return Err(Error::InvalidArgument(format!(
                    "duplicate row name '{}'",
                    r.name
                )));
            }
            if !r.rhs.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "non-finite rhs on row '{}'",
                    r.name
                )));
            }
            for (col, v) in &r.coeffs {
                if *col >= self.columns.len() {
                    return Err(Error::InvalidArgument(format!(
                        "row '{}' references missing column index {col}",
                        r.name
                    )));
                }
                if !v.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "non-finite coefficient in row '{}'",
                        r.name
                    )));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validate_catches_bad_references_and_bounds() {
        let mut lp = LinearProgram::new("t");
        let x = lp.add_column("x", 0.0, f64::INFINITY, 1.0);
        lp.add_row("r", vec![(x, 1.0)], Sense::Le, 5.0);
        assert!(lp.validate().is_ok());

        lp.add_row("bad", vec![(99, 1.0)], Sense::Le, 1.0);
        assert!(lp.validate().is_err());

        let mut lp2 = LinearProgram::new("t2");
        lp2.add_column("x", 1.0, 0.0, 0.0);
        assert!(lp2.validate().is_err());
    }
}

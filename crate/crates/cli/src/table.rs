//! Versioned CSV tables: a `#schema=<name>/<version>` line, optional
//! `;key=value` metadata, then a header row.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{CliError, Result};

pub const VERSION: u32 = 1;

/// Schemas this build reads and writes.
pub const SCHEMAS: &[&str] = &[
    "checks",
    "tails",
    "density",
    "weights",
    "occupation",
    "masses",
    "histogram",
    "correlation",
    "coverage",
    "arcsine",
    "series",
    "decay",
];

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub schema: String,
    pub meta: BTreeMap<String, String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(schema: &str, header: &[&str]) -> Self {
        Self {
            schema: schema.to_string(),
            meta: BTreeMap::new(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.insert(key.to_string(), value.to_string());
        self
    }

    pub fn push<I, S>(&mut self, row: I)
    where
        I: IntoIterator<Item = S>,
        S: ToString,
    {
        let row: Vec<String> = row.into_iter().map(|s| s.to_string()).collect();
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut first = format!("#schema={}/{}", self.schema, VERSION);
        for (k, v) in &self.meta {
            first.push_str(&format!(";{k}={v}"));
        }
        first.push('\n');
        let mut w = csv::Writer::from_writer(first.into_bytes());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?).map_err(|e| CliError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let schema_err = |reason: String| CliError::Schema {
            path: path.to_path_buf(),
            reason,
        };
        let (first, rest) = text.split_once('\n').unwrap_or((text.as_str(), ""));
        let tag = first
            .trim_end()
            .strip_prefix("#schema=")
            .ok_or_else(|| schema_err("missing `#schema=` line".into()))?;
        let mut parts = tag.split(';');
        let (name, version) = parts
            .next()
            .and_then(|s| s.split_once('/'))
            .ok_or_else(|| schema_err(format!("malformed schema tag `{tag}`")))?;
        if !SCHEMAS.contains(&name) {
            return Err(schema_err(format!("unknown schema `{name}`")));
        }
        if version != VERSION.to_string() {
            return Err(schema_err(format!("unsupported version {name}/{version}")));
        }
        let mut meta = BTreeMap::new();
        for kv in parts {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| schema_err(format!("malformed metadata `{kv}`")))?;
            meta.insert(k.to_string(), v.to_string());
        }
        let mut r = csv::Reader::from_reader(rest.as_bytes());
        let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|r| r.iter().map(String::from).collect()))
            .collect::<std::result::Result<Vec<Vec<String>>, _>>()?;
        if rows.is_empty() {
            return Err(schema_err("no data rows".into()));
        }
        Ok(Self {
            schema: name.to_string(),
            meta,
            header,
            rows,
        })
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Config(format!("{} table has no `{name}` column", self.schema)))
    }

    pub fn floats(&self, name: &str) -> Result<Vec<f64>> {
        let i = self.column(name)?;
        self.rows
            .iter()
            .map(|r| {
                r[i].parse::<f64>()
                    .map_err(|_| CliError::Config(format!("`{}` in column `{name}` is not a number", r[i])))
            })
            .collect()
    }

    pub fn strings(&self, name: &str) -> Result<Vec<String>> {
        let i = self.column(name)?;
        Ok(self.rows.iter().map(|r| r[i].clone()).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_keeps_metadata_and_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut t = Table::new("decay", &["n", "mass", "se"]).meta("alpha", 0.5);
        t.push([100.0, 0.25, 0.001]);
        t.push([1000.0, 0.08, 0.001]);
        t.write(&path).unwrap();
        let back = Table::read(&path).unwrap();
        assert_eq!(back, t);
        assert!(fs::read_to_string(&path).unwrap().starts_with("#schema=decay/1;alpha=0.5\n"));
    }

    #[test]
    fn unknown_versions_are_refused() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        fs::write(&path, "#schema=decay/2\nn,mass,se\n1,1,0\n").unwrap();
        assert!(matches!(Table::read(&path), Err(CliError::Schema { .. })));
        fs::write(&path, "n,mass,se\n1,1,0\n").unwrap();
        assert!(matches!(Table::read(&path), Err(CliError::Schema { .. })));
    }
}

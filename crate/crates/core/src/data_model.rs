//! Study records, cell-count tables and CSV ingestion.
//!
//! Cell counts are stored as reals so that expected (non-integer) tables and
//! sampled (integer) tables share one representation.
//!
//! The 48-count vector `m_1..m_48` indexes the observation types of an
//! internal validation design where subjects are validated on both the
//! outcome and the exposure or on neither.  The layout is frozen as
//!
//! * unvalidated (`R_Y=R_A=0`): `m_j` with `j = 1 + 4l + 2z + b`,
//! * validated on one variable only: `m_9..m_16`, structurally zero here,
//! * validated (`R_Y=R_A=1`): `m_j` with `j = 17 + 16l + 8a + 4y + 2z + b`.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};

/// One subject's observed data: surrogates `(Z, B)`, covariates `L`,
/// validation indicators `(R_Y, R_A)` and the validated `(Y, A)` when present.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyRecord {
    pub z: u8,
    pub b: u8,
    pub r_y: u8,
    pub r_a: u8,
    pub y: Option<u8>,
    pub a: Option<u8>,
    pub l: Vec<f64>,
}

impl StudyRecord {
    /// Builds a record, enforcing `y present ⇔ r_y = 1` and `a present ⇔ r_a = 1`.
    pub fn new(
        z: u8,
        b: u8,
        r_y: u8,
        r_a: u8,
        y: Option<u8>,
        a: Option<u8>,
        l: Vec<f64>,
    ) -> Result<Self> {
        for (name, v) in [("z", z), ("b", b), ("r_y", r_y), ("r_a", r_a)] {
            if v > 1 {
                return Err(Error::InvalidInput(format!("{name} must be 0 or 1, got {v}")));
            }
        }
        if (r_y == 1) != y.is_some() {
            return Err(Error::InvalidInput("y must be present exactly when r_y = 1".into()));
        }
        if (r_a == 1) != a.is_some() {
            return Err(Error::InvalidInput("a must be present exactly when r_a = 1".into()));
        }
        if let Some(v) = y {
            if v > 1 {
                return Err(Error::InvalidInput(format!("y must be 0 or 1, got {v}")));
            }
        }
        if let Some(v) = a {
            if v > 1 {
                return Err(Error::InvalidInput(format!("a must be 0 or 1, got {v}")));
            }
        }
        Ok(StudyRecord { z, b, r_y, r_a, y, a, l })
    }
}

/// Which variables index a [`CellCountTable`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableDims {
    /// `(Y, A, L)` with binary `L`: 8 cells, index `4y + 2a + l`.
    Yal,
    /// `(Z, B, Y, A, L)` with binary `L`: 32 cells, index `16z + 8b + 4y + 2a + l`.
    Zbyal,
    /// The `m_1..m_48` validation-type vector (see module docs).
    Validation,
}

impl TableDims {
    pub fn len(self) -> usize {
        match self {
            TableDims::Yal => 8,
            TableDims::Zbyal => 32,
            TableDims::Validation => 48,
        }
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn is_empty(self) -> bool {
        false
    }
}

/// Nonnegative real count per cell over binary `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct CellCountTable {
    dims: TableDims,
    counts: Vec<f64>,
}

impl CellCountTable {
    pub fn zeros(dims: TableDims) -> Self {
        CellCountTable { dims, counts: vec![0.0; dims.len()] }
    }

    pub fn from_counts(dims: TableDims, counts: Vec<f64>) -> Result<Self> {
        if counts.len() != dims.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} counts, got {}",
                dims.len(),
                counts.len()
            )));
        }
        if counts.iter().any(|&c| !c.is_finite() || c < 0.0) {
            return Err(Error::InvalidInput("counts must be finite and nonnegative".into()));
        }
        Ok(CellCountTable { dims, counts })
    }

    pub fn dims(&self) -> TableDims {
        self.dims
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    /// Count for a `(Y, A, L)` cell.
    pub fn yal(&self, y: u8, a: u8, l: u8) -> f64 {
        debug_assert_eq!(self.dims, TableDims::Yal);
        self.counts[yal_index(y, a, l)]
    }

    pub fn set_yal(&mut self, y: u8, a: u8, l: u8, count: f64) {
        debug_assert_eq!(self.dims, TableDims::Yal);
        self.counts[yal_index(y, a, l)] = count;
    }

    /// Count for a `(Z, B, Y, A, L)` cell.
    pub fn zbyal(&self, z: u8, b: u8, y: u8, a: u8, l: u8) -> f64 {
        debug_assert_eq!(self.dims, TableDims::Zbyal);
        self.counts[zbyal_index(z, b, y, a, l)]
    }

    pub fn set_zbyal(&mut self, z: u8, b: u8, y: u8, a: u8, l: u8, count: f64) {
        debug_assert_eq!(self.dims, TableDims::Zbyal);
        self.counts[zbyal_index(z, b, y, a, l)] = count;
    }

    /// `m_j` for `j` in `1..=48`.
    pub fn m(&self, j: usize) -> f64 {
        debug_assert_eq!(self.dims, TableDims::Validation);
        assert!((1..=48).contains(&j), "m index out of range: {j}");
        if (9..=16).contains(&j) {
            0.0
        } else {
            self.counts[j - 1]
        }
    }

    /// The full `m_1..m_48` vector, in order.
    pub fn m_vector(&self) -> [f64; 48] {
        debug_assert_eq!(self.dims, TableDims::Validation);
        let mut m = [0.0; 48];
        m.copy_from_slice(&self.counts);
        m
    }
}

pub(crate) fn yal_index(y: u8, a: u8, l: u8) -> usize {
    4 * y as usize + 2 * a as usize + l as usize
}

pub(crate) fn zbyal_index(z: u8, b: u8, y: u8, a: u8, l: u8) -> usize {
    16 * z as usize + 8 * b as usize + 4 * y as usize + 2 * a as usize + l as usize
}

/// 1-based `m` index of an unvalidated `(Z, B, L)` type.
pub fn m_index_unvalidated(z: u8, b: u8, l: u8) -> usize {
    1 + 4 * l as usize + 2 * z as usize + b as usize
}

/// 1-based `m` index of a fully validated `(Z, B, Y, A, L)` type.
pub fn m_index_validated(z: u8, b: u8, y: u8, a: u8, l: u8) -> usize {
    17 + 16 * l as usize + 8 * a as usize + 4 * y as usize + 2 * z as usize + b as usize
}

/// Misclassification rates `pi[b][y][a][l] = Pr(Z=1|B=b,Y=y,A=a,L=l)` and
/// `lambda[y][a][l] = Pr(B=1|Y=y,A=a,L=l)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MisclassRates {
    pub pi: [[[[f64; 2]; 2]; 2]; 2],
    pub lambda: [[[f64; 2]; 2]; 2],
}

impl MisclassRates {
    pub fn validate(&self) -> Result<()> {
        let ok = |p: f64| (0.0..=1.0).contains(&p);
        for b in 0..2 {
            for y in 0..2 {
                for a in 0..2 {
                    for l in 0..2 {
                        if !ok(self.pi[b][y][a][l]) {
                            return Err(Error::InvalidInput(format!(
                                "pi[{b}][{y}][{a}][{l}] outside [0,1]"
                            )));
                        }
                    }
                }
            }
        }
        for y in 0..2 {
            for a in 0..2 {
                for l in 0..2 {
                    if !ok(self.lambda[y][a][l]) {
                        return Err(Error::InvalidInput(format!(
                            "lambda[{y}][{a}][{l}] outside [0,1]"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Column-name map for [`ingest_csv`].
#[derive(Debug, Clone)]
pub struct ColumnSchema {
    pub z: String,
    pub b: String,
    pub r_y: String,
    pub r_a: String,
    pub y: String,
    pub a: String,
    pub l: Vec<String>,
}

impl ColumnSchema {
    /// The conventional column names `z,b,r_y,r_a,y,a,l1..lk`.
    pub fn standard(n_covariates: usize) -> Self {
        ColumnSchema {
            z: "z".into(),
            b: "b".into(),
            r_y: "r_y".into(),
            r_a: "r_a".into(),
            y: "y".into(),
            a: "a".into(),
            l: (1..=n_covariates).map(|i| format!("l{i}")).collect(),
        }
    }
}

/// Reads study records from a headed CSV file, preserving row order.
///
/// `Y`/`A` cells must be empty exactly where `R_Y`/`R_A` are zero.
pub fn ingest_csv(path: &Path, schema: &ColumnSchema) -> Result<Vec<StudyRecord>> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema { row: 0, message: format!("missing column '{name}'") })
    };
    let iz = col(&schema.z)?;
    let ib = col(&schema.b)?;
    let iry = col(&schema.r_y)?;
    let ira = col(&schema.r_a)?;
    let iy = col(&schema.y)?;
    let ia = col(&schema.a)?;
    let il: Vec<usize> = schema.l.iter().map(|n| col(n)).collect::<Result<_>>()?;

    let mut records = Vec::new();
    for (idx, row) in reader.records().enumerate() {
        let row = row?;
        let rownum = idx + 1;
        let required = |i: usize, name: &str| -> Result<u8> {
            let raw = row.get(i).unwrap_or("").trim();
            raw.parse::<u8>().map_err(|_| Error::Schema {
                row: rownum,
                message: format!("missing or non-binary value for '{name}': '{raw}'"),
            })
        };
        let z = required(iz, &schema.z)?;
        let b = required(ib, &schema.b)?;
        let r_y = required(iry, &schema.r_y)?;
        let r_a = required(ira, &schema.r_a)?;
        let optional = |i: usize, r: u8, name: &str| -> Result<Option<u8>> {
            let raw = row.get(i).unwrap_or("").trim();
            match (raw.is_empty(), r) {
                (true, 0) => Ok(None),
                (false, 1) => Ok(Some(required(i, name)?)),
                (true, 1) => Err(Error::Consistency {
                    row: rownum,
                    message: format!("'{name}' empty although its validation indicator is 1"),
                }),
                (false, 0) => Err(Error::Consistency {
                    row: rownum,
                    message: format!("'{name}' present although its validation indicator is 0"),
                }),
                (_, other) => Err(Error::Schema {
                    row: rownum,
                    message: format!("validation indicator for '{name}' must be 0 or 1, got {other}"),
                }),
            }
        };
        let y = optional(iy, r_y, &schema.y)?;
        let a = optional(ia, r_a, &schema.a)?;
        let mut l = Vec::with_capacity(il.len());
        for (k, &i) in il.iter().enumerate() {
            let raw = row.get(i).unwrap_or("").trim();
            let v: f64 = raw.parse().map_err(|_| Error::Schema {
                row: rownum,
                message: format!("missing or non-numeric value for '{}': '{raw}'", schema.l[k]),
            })?;
            l.push(v);
        }
        records.push(StudyRecord::new(z, b, r_y, r_a, y, a, l).map_err(|e| Error::Schema {
            row: rownum,
            message: e.to_string(),
        })?);
    }
    Ok(records)
}

/// Tabulates records with scalar binary `L` into the `m_1..m_48` vector.
pub fn counts_from_records(records: &[StudyRecord]) -> Result<CellCountTable> {
    let mut table = CellCountTable::zeros(TableDims::Validation);
    for rec in records {
        if rec.l.len() != 1 || (rec.l[0] != 0.0 && rec.l[0] != 1.0) {
            return Err(Error::UnsupportedDimension(
                "counts_from_records requires a single binary covariate".into(),
            ));
        }
        let l = rec.l[0] as u8;
        let j = match (rec.r_y, rec.r_a) {
            (1, 1) => m_index_validated(rec.z, rec.b, rec.y.unwrap(), rec.a.unwrap(), l),
            (0, 0) => m_index_unvalidated(rec.z, rec.b, l),
            (1, 0) => 9 + 2 * rec.z as usize + rec.b as usize,
            _ => 13 + 2 * rec.z as usize + rec.b as usize,
        };
        table.counts[j - 1] += 1.0;
    }
    Ok(table)
}

/// Expands an integer-count table back into records (inverse of
/// [`counts_from_records`] on the `m` vector).
pub fn records_from_counts(table: &CellCountTable) -> Result<Vec<StudyRecord>> {
    if table.dims() != TableDims::Validation {
        return Err(Error::UnsupportedDimension("expected a validation-type table".into()));
    }
    let mut records = Vec::new();
    for l in 0..2u8 {
        for z in 0..2u8 {
            for b in 0..2u8 {
                let n = table.m(m_index_unvalidated(z, b, l));
                for _ in 0..n.round() as u64 {
                    records.push(StudyRecord::new(z, b, 0, 0, None, None, vec![l as f64])?);
                }
            }
        }
    }
    for l in 0..2u8 {
        for a in 0..2u8 {
            for y in 0..2u8 {
                for z in 0..2u8 {
                    for b in 0..2u8 {
                        let n = table.m(m_index_validated(z, b, y, a, l));
                        for _ in 0..n.round() as u64 {
                            records.push(StudyRecord::new(
                                z,
                                b,
                                1,
                                1,
                                Some(y),
                                Some(a),
                                vec![l as f64],
                            )?);
                        }
                    }
                }
            }
        }
    }
    Ok(records)
}

/// Applies the misclassification channel to a `(Y, A, L)` table:
///
/// `count(z,b,y,a,l) = base(y,a,l) · pi^z (1-pi)^{1-z} · lambda^b (1-lambda)^{1-b}`.
pub fn expected_misclassified_counts(
    base: &CellCountTable,
    rates: &MisclassRates,
) -> Result<CellCountTable> {
    if base.dims() != TableDims::Yal {
        return Err(Error::UnsupportedDimension("expected a (Y,A,L) table".into()));
    }
    rates.validate()?;
    let mut out = CellCountTable::zeros(TableDims::Zbyal);
    for y in 0..2u8 {
        for a in 0..2u8 {
            for l in 0..2u8 {
                let n = base.yal(y, a, l);
                let lam = rates.lambda[y as usize][a as usize][l as usize];
                for z in 0..2u8 {
                    for b in 0..2u8 {
                        let pi = rates.pi[b as usize][y as usize][a as usize][l as usize];
                        let pz = if z == 1 { pi } else { 1.0 - pi };
                        let pb = if b == 1 { lam } else { 1.0 - lam };
                        out.set_zbyal(z, b, y, a, l, n * pz * pb);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Splits a full `(Z, B, Y, A, L)` table into the `m` vector of an internal
/// validation design where `R_Y = R_A` and
/// `Pr(R_A=1|Z=z,B=b,L=l) = selection(z,b,l)`.
pub fn expected_validation_counts(
    full: &CellCountTable,
    selection: &dyn Fn(u8, u8, u8) -> f64,
) -> Result<CellCountTable> {
    if full.dims() != TableDims::Zbyal {
        return Err(Error::UnsupportedDimension("expected a (Z,B,Y,A,L) table".into()));
    }
    let mut out = CellCountTable::zeros(TableDims::Validation);
    for z in 0..2u8 {
        for b in 0..2u8 {
            for l in 0..2u8 {
                let s = selection(z, b, l);
                if !(0.0..=1.0).contains(&s) {
                    return Err(Error::InvalidInput(format!(
                        "selection({z},{b},{l}) = {s} outside [0,1]"
                    )));
                }
                for y in 0..2u8 {
                    for a in 0..2u8 {
                        let mass = full.zbyal(z, b, y, a, l);
                        out.counts[m_index_validated(z, b, y, a, l) - 1] += mass * s;
                        out.counts[m_index_unvalidated(z, b, l) - 1] += mass * (1.0 - s);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// A small column-oriented dataset: the bridge between records/count tables
/// and model fitting.  Missing values are stored as NaN; `case_weights`
/// carries the expansion weight of grouped (count-table) rows.
#[derive(Debug, Clone)]
pub struct Dataset {
    names: Vec<String>,
    cols: Vec<Vec<f64>>,
    pub case_weights: Option<Vec<f64>>,
}

impl Dataset {
    pub fn new(names: Vec<String>, cols: Vec<Vec<f64>>, case_weights: Option<Vec<f64>>) -> Self {
        debug_assert_eq!(names.len(), cols.len());
        if let (Some(w), Some(c)) = (&case_weights, cols.first()) {
            debug_assert_eq!(w.len(), c.len());
        }
        Dataset { names, cols, case_weights }
    }

    /// Columns `z,b,r_y,r_a,y,a,l1..lk`; `y`/`a` are NaN where unvalidated.
    pub fn from_records(records: &[StudyRecord]) -> Self {
        let k = records.first().map_or(0, |r| r.l.len());
        let mut names: Vec<String> =
            ["z", "b", "r_y", "r_a", "y", "a"].iter().map(|s| s.to_string()).collect();
        names.extend((1..=k).map(|i| format!("l{i}")));
        let n = records.len();
        let mut cols = vec![Vec::with_capacity(n); names.len()];
        for r in records {
            cols[0].push(r.z as f64);
            cols[1].push(r.b as f64);
            cols[2].push(r.r_y as f64);
            cols[3].push(r.r_a as f64);
            cols[4].push(r.y.map_or(f64::NAN, |v| v as f64));
            cols[5].push(r.a.map_or(f64::NAN, |v| v as f64));
            for (j, &v) in r.l.iter().enumerate() {
                cols[6 + j].push(v);
            }
        }
        Dataset::new(names, cols, None)
    }

    /// Expands a validation-type count table into weighted grouped rows with
    /// a single covariate column `l1`.  Zero-count cells are omitted.
    pub fn from_validation_table(table: &CellCountTable) -> Result<Self> {
        if table.dims() != TableDims::Validation {
            return Err(Error::UnsupportedDimension("expected a validation-type table".into()));
        }
        let names: Vec<String> =
            ["z", "b", "r_y", "r_a", "y", "a", "l1"].iter().map(|s| s.to_string()).collect();
        let mut cols = vec![Vec::new(); names.len()];
        let mut weights = Vec::new();
        let mut push = |z: u8, b: u8, r: u8, y: f64, a: f64, l: u8, w: f64| {
            if w <= 0.0 {
                return;
            }
            cols[0].push(z as f64);
            cols[1].push(b as f64);
            cols[2].push(r as f64);
            cols[3].push(r as f64);
            cols[4].push(y);
            cols[5].push(a);
            cols[6].push(l as f64);
            weights.push(w);
        };
        for l in 0..2u8 {
            for z in 0..2u8 {
                for b in 0..2u8 {
                    push(z, b, 0, f64::NAN, f64::NAN, l, table.m(m_index_unvalidated(z, b, l)));
                }
            }
        }
        for l in 0..2u8 {
            for a in 0..2u8 {
                for y in 0..2u8 {
                    for z in 0..2u8 {
                        for b in 0..2u8 {
                            push(
                                z,
                                b,
                                1,
                                y as f64,
                                a as f64,
                                l,
                                table.m(m_index_validated(z, b, y, a, l)),
                            );
                        }
                    }
                }
            }
        }
        Ok(Dataset::new(names, cols, Some(weights)))
    }

    pub fn len(&self) -> usize {
        self.cols.first().map_or(0, |c| c.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.cols[i].as_slice())
            .ok_or_else(|| Error::UnknownVariable(name.into()))
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.names.iter().any(|n| n == name)
    }

    /// Effective sample size: sum of case weights, or the row count.
    pub fn weight_total(&self) -> f64 {
        match &self.case_weights {
            Some(w) => w.iter().sum(),
            None => self.len() as f64,
        }
    }

    pub fn case_weight(&self, i: usize) -> f64 {
        self.case_weights.as_ref().map_or(1.0, |w| w[i])
    }

    /// Row subset, keeping rows where `keep` is true.
    pub fn filter(&self, keep: impl Fn(usize) -> bool) -> Dataset {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(i)).collect();
        self.select(&idx)
    }

    /// Row subset by index list (with repetition allowed, for resampling).
    pub fn select(&self, idx: &[usize]) -> Dataset {
        let cols = self
            .cols
            .iter()
            .map(|c| idx.iter().map(|&i| c[i]).collect())
            .collect();
        let case_weights = self
            .case_weights
            .as_ref()
            .map(|w| idx.iter().map(|&i| w[i]).collect());
        Dataset::new(self.names.clone(), cols, case_weights)
    }

    /// Rows with validation data on both variables.
    pub fn validation_subset(&self) -> Result<Dataset> {
        let r_y = self.column("r_y")?.to_vec();
        let r_a = self.column("r_a")?.to_vec();
        let sub = self.filter(|i| r_y[i] == 1.0 && r_a[i] == 1.0);
        if sub.is_empty() {
            return Err(Error::EmptyValidationSubset);
        }
        Ok(sub)
    }

    /// Per-row variable lookup with overrides, used to evaluate model
    /// predictions at counterfactual `(z, b, a)` values.
    pub fn row_lookup<'a>(
        &'a self,
        i: usize,
        overrides: &'a HashMap<&'a str, f64>,
    ) -> impl Fn(&str) -> Result<f64> + 'a {
        move |name: &str| {
            if let Some(&v) = overrides.get(name) {
                return Ok(v);
            }
            self.column(name).map(|c| c[i])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reinfarction;
    use std::io::Write;

    #[test]
    fn record_invariants() {
        assert!(StudyRecord::new(1, 0, 1, 1, Some(1), Some(0), vec![0.5]).is_ok());
        assert!(StudyRecord::new(1, 0, 0, 0, Some(1), None, vec![0.5]).is_err());
        assert!(StudyRecord::new(1, 0, 1, 0, None, None, vec![0.5]).is_err());
        assert!(StudyRecord::new(2, 0, 0, 0, None, None, vec![]).is_err());
    }

    #[test]
    fn ingest_basic_rows() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "z,b,r_y,r_a,y,a,l1").unwrap();
        writeln!(f, "1,0,1,1,1,0,0.5").unwrap();
        writeln!(f, "0,1,0,0,,,1.0").unwrap();
        let recs = ingest_csv(f.path(), &ColumnSchema::standard(1)).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].y, Some(1));
        assert_eq!(recs[0].a, Some(0));
        assert_eq!(recs[1].y, None);
        assert_eq!(recs[1].l, vec![1.0]);
    }

    #[test]
    fn ingest_rejects_inconsistent_rows() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "z,b,r_y,r_a,y,a,l1").unwrap();
        writeln!(f, "1,0,0,0,1,,0").unwrap();
        let err = ingest_csv(f.path(), &ColumnSchema::standard(1)).unwrap_err();
        assert!(matches!(err, Error::Consistency { row: 1, .. }));

        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "z,b,r_y,r_a,y,a,l1").unwrap();
        writeln!(f, "1,,0,0,,,0").unwrap();
        let err = ingest_csv(f.path(), &ColumnSchema::standard(1)).unwrap_err();
        assert!(matches!(err, Error::Schema { row: 1, .. }));
    }

    #[test]
    fn counts_empty_and_single() {
        let t = counts_from_records(&[]).unwrap();
        assert_eq!(t.total(), 0.0);

        let rec = StudyRecord::new(0, 0, 1, 1, Some(0), Some(0), vec![0.0]).unwrap();
        let t = counts_from_records(&[rec]).unwrap();
        assert_eq!(t.m(17), 1.0);
        assert_eq!(t.total(), 1.0);
    }

    #[test]
    fn counts_rejects_nonbinary_l() {
        let rec = StudyRecord::new(0, 0, 0, 0, None, None, vec![0.5]).unwrap();
        assert!(matches!(
            counts_from_records(&[rec]),
            Err(Error::UnsupportedDimension(_))
        ));
    }

    #[test]
    fn records_round_trip_m_vector() {
        let table = reinfarction::table5_expected();
        // round the expected counts to integers first
        let rounded = CellCountTable::from_counts(
            TableDims::Validation,
            table.counts().iter().map(|c| c.round()).collect(),
        )
        .unwrap();
        let records = records_from_counts(&rounded).unwrap();
        let back = counts_from_records(&records).unwrap();
        assert_eq!(back.m_vector(), rounded.m_vector());
    }

    #[test]
    fn no_misclassification_is_identity_channel() {
        let base = reinfarction::table1();
        let rates = MisclassRates { pi: [[[[0.0; 2]; 2]; 2]; 2], lambda: [[[0.0; 2]; 2]; 2] };
        let out = expected_misclassified_counts(&base, &rates).unwrap();
        for y in 0..2u8 {
            for a in 0..2u8 {
                for l in 0..2u8 {
                    assert_eq!(out.zbyal(0, 0, y, a, l), base.yal(y, a, l));
                }
            }
        }
        assert!((out.total() - base.total()).abs() < 1e-9 * base.total());
    }

    #[test]
    fn misclassified_cell_matches_table3() {
        let out =
            expected_misclassified_counts(&reinfarction::table1(), &reinfarction::table2()).unwrap();
        let c = out.zbyal(0, 0, 0, 0, 0);
        assert!((c - 11602.0 * 0.95 * 0.99).abs() < 1e-9);
        assert_eq!(c.round(), 10912.0);
        assert!((out.total() - 33007.0).abs() < 1e-9 * 33007.0);
    }

    #[test]
    fn table4_corrected_collapse_for_l1() {
        let out =
            expected_misclassified_counts(&reinfarction::table1(), &reinfarction::table2()).unwrap();
        let mut sum = [[0.0; 2]; 2];
        for z in 0..2u8 {
            for b in 0..2u8 {
                for y in 0..2u8 {
                    for a in 0..2u8 {
                        // the published collapse sums the rounded full-table
                        // cells, so round before summing
                        sum[z as usize][b as usize] += out.zbyal(z, b, y, a, 1).round();
                    }
                }
            }
        }
        assert_eq!(sum[0][0].round(), 1493.0);
        assert_eq!(sum[0][1].round(), 4869.0);
        assert_eq!(sum[1][0].round(), 106.0);
        assert_eq!(sum[1][1].round(), 340.0);
    }

    #[test]
    fn validation_counts_match_table5_anchors() {
        let full =
            expected_misclassified_counts(&reinfarction::table1(), &reinfarction::table2()).unwrap();
        let m = expected_validation_counts(&full, &|_z, b, _l| 0.25 + 0.10 * b as f64).unwrap();
        assert_eq!(m.m(17).round(), 2728.0);
        assert_eq!(m.m(1).round(), 9371.0);
        assert!((m.total() - full.total()).abs() < 1e-9 * full.total());
    }

    #[test]
    fn full_validation_leaves_no_unvalidated_mass() {
        let full =
            expected_misclassified_counts(&reinfarction::table1(), &reinfarction::table2()).unwrap();
        let m = expected_validation_counts(&full, &|_, _, _| 1.0).unwrap();
        for j in 1..=16 {
            assert_eq!(m.m(j), 0.0);
        }
    }

    #[test]
    fn half_selection_halves_validated_mass() {
        let mut full = CellCountTable::zeros(TableDims::Zbyal);
        full.set_zbyal(0, 0, 0, 0, 0, 10.0);
        full.set_zbyal(1, 1, 1, 1, 1, 4.0);
        let m = expected_validation_counts(&full, &|_, _, _| 0.5).unwrap();
        assert_eq!(m.m(m_index_validated(0, 0, 0, 0, 0)), 5.0);
        assert_eq!(m.m(m_index_unvalidated(0, 0, 0)), 5.0);
        assert_eq!(m.m(m_index_validated(1, 1, 1, 1, 1)), 2.0);
        assert_eq!(m.m(m_index_unvalidated(1, 1, 1)), 2.0);
    }
}

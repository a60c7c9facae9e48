use crate::data::RecordSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnMeta {
    pub name: String,
    pub unit: String,
}

impl ColumnMeta {
    pub fn new(name: impl Into<String>, unit: impl Into<String>) -> Self {
        ColumnMeta { name: name.into(), unit: unit.into() }
    }
}

/// Row-major `n × d` table of reals. `mask[i·d + j]` is `true` when the cell
/// is present; absent cells hold NaN and are ignored by every statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub n: usize,
    pub d: usize,
    pub values: Vec<f64>,
    pub mask: Vec<bool>,
    pub columns: Vec<ColumnMeta>,
}

impl FeatureMatrix {
    /// Builds a matrix from rows; NaN marks a missing cell.
    pub fn from_rows(columns: Vec<ColumnMeta>, rows: &[Vec<f64>]) -> Result<Self> {
        let d = columns.len();
        let mut values = Vec::with_capacity(rows.len() * d);
        let mut mask = Vec::with_capacity(rows.len() * d);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::Shape(format!("row {i} has {} values, expected {d}", row.len())));
            }
            for &v in row {
                if v.is_infinite() {
                    return Err(Error::NonFinite(format!("row {i}")));
                }
                mask.push(!v.is_nan());
                values.push(v);
            }
        }
        Ok(FeatureMatrix { n: rows.len(), d, values, mask, columns })
    }

    pub fn from_dense(columns: Vec<ColumnMeta>, n: usize, values: Vec<f64>) -> Result<Self> {
        let d = columns.len();
        if values.len() != n * d {
            return Err(Error::Shape(format!("{} values for a {n}×{d} matrix", values.len())));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("cell ({}, {})", i / d.max(1), i % d.max(1))));
        }
        Ok(FeatureMatrix { n, d, mask: vec![true; values.len()], values, columns })
    }

    /// The static features of a record set.
    pub fn from_statics(records: &RecordSet) -> Result<Self> {
        let columns = records.static_names.iter().map(|n| ColumnMeta::new(n.clone(), "")).collect();
        let rows: Vec<Vec<f64>> = records.records.iter().map(|r| r.statics.clone()).collect();
        let mut m = Self::from_rows(columns, &rows)?;
        for (i, r) in records.records.iter().enumerate() {
            for (j, &present) in r.static_mask.iter().enumerate() {
                m.mask[i * m.d + j] = present;
            }
        }
        Ok(m)
    }

    /// The glucose series of a record set, one column per day.
    pub fn from_series(records: &RecordSet) -> Result<Self> {
        let columns = (1..=records.series_len)
            .map(|t| ColumnMeta::new(crate::data::series_column(t), "mg/dL"))
            .collect();
        let rows: Vec<Vec<f64>> = records.records.iter().map(|r| r.glucose_series.clone()).collect();
        let mut m = Self::from_rows(columns, &rows)?;
        for (i, r) in records.records.iter().enumerate() {
            for (j, &present) in r.series_mask.iter().enumerate() {
                m.mask[i * m.d + j] = present;
            }
        }
        Ok(m)
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let k = i * self.d + j;
        self.mask[k].then_some(self.values[k])
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn column_names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn is_complete(&self) -> bool {
        self.mask.iter().all(|&m| m)
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = Option<f64>> + '_ {
        (0..self.n).map(move |i| self.get(i, j))
    }

    pub fn select_columns(&self, indices: &[usize]) -> FeatureMatrix {
        let d = indices.len();
        let mut values = Vec::with_capacity(self.n * d);
        let mut mask = Vec::with_capacity(self.n * d);
        for i in 0..self.n {
            for &j in indices {
                values.push(self.values[i * self.d + j]);
                mask.push(self.mask[i * self.d + j]);
            }
        }
        FeatureMatrix {
            n: self.n,
            d,
            values,
            mask,
            columns: indices.iter().map(|&j| self.columns[j].clone()).collect(),
        }
    }

    pub fn select_rows(&self, indices: &[usize]) -> FeatureMatrix {
        let mut values = Vec::with_capacity(indices.len() * self.d);
        let mut mask = Vec::with_capacity(indices.len() * self.d);
        for &i in indices {
            values.extend_from_slice(self.row(i));
            mask.extend_from_slice(&self.mask[i * self.d..(i + 1) * self.d]);
        }
        FeatureMatrix { n: indices.len(), d: self.d, values, mask, columns: self.columns.clone() }
    }

    /// Columns of `self` followed by columns of `other`.
    pub fn hconcat(&self, other: &FeatureMatrix) -> Result<FeatureMatrix> {
        if self.n != other.n {
            return Err(Error::Shape(format!("{} rows vs {} rows", self.n, other.n)));
        }
        let d = self.d + other.d;
        let mut values = Vec::with_capacity(self.n * d);
        let mut mask = Vec::with_capacity(self.n * d);
        for i in 0..self.n {
            values.extend_from_slice(self.row(i));
            values.extend_from_slice(other.row(i));
            mask.extend_from_slice(&self.mask[i * self.d..(i + 1) * self.d]);
            mask.extend_from_slice(&other.mask[i * other.d..(i + 1) * other.d]);
        }
        let mut columns = self.columns.clone();
        columns.extend(other.columns.iter().cloned());
        Ok(FeatureMatrix { n: self.n, d, values, mask, columns })
    }

    pub(crate) fn require_complete(&self, op: &'static str) -> Result<()> {
        if self.is_complete() {
            Ok(())
        } else {
            Err(Error::MissingCells(op))
        }
    }

    pub(crate) fn require_finite(&self) -> Result<()> {
        match self.values.iter().zip(&self.mask).position(|(v, &m)| m && !v.is_finite()) {
            Some(k) => Err(Error::NonFinite(format!("cell ({}, {})", k / self.d, k % self.d))),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cols(names: &[&str]) -> Vec<ColumnMeta> {
        names.iter().map(|n| ColumnMeta::new(*n, "")).collect()
    }

    #[test]
    fn nan_marks_missing() {
        let m = FeatureMatrix::from_rows(cols(&["a", "b"]), &[vec![1.0, f64::NAN]]).unwrap();
        assert_eq!(m.get(0, 0), Some(1.0));
        assert_eq!(m.get(0, 1), None);
        assert!(!m.is_complete());
    }

    #[test]
    fn column_and_row_selection() {
        let m = FeatureMatrix::from_rows(cols(&["a", "b", "c"]), &[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let s = m.select_columns(&[2, 0]);
        assert_eq!(s.rows(), vec![vec![3.0, 1.0], vec![6.0, 4.0]]);
        assert_eq!(s.column_names(), vec!["c", "a"]);
        assert_eq!(m.select_rows(&[1]).rows(), vec![vec![4.0, 5.0, 6.0]]);
        let h = s.hconcat(&m.select_columns(&[1])).unwrap();
        assert_eq!(h.row(1), &[6.0, 4.0, 5.0]);
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(FeatureMatrix::from_rows(cols(&["a"]), &[vec![1.0, 2.0]]).is_err());
    }
}

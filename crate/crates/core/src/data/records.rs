use super::table::{Cell, ColumnType, RawTable};
use super::{cohort::NAMED_FEATURES, series_column, ID_COLUMN, LABEL_COLUMN, SERIES_PREFIX};
use crate::error::{invalid, Error, Result};

/// One patient. Missing values are stored as NaN with the mask entry `false`.
#[derive(Debug, Clone, PartialEq)]
pub struct PatientRecord {
    pub patient_id: String,
    pub statics: Vec<f64>,
    pub static_mask: Vec<bool>,
    pub glucose_series: Vec<f64>,
    pub series_mask: Vec<bool>,
    pub label: Option<u8>,
}

/// Records sharing one static-feature layout.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordSet {
    pub static_names: Vec<String>,
    pub series_len: usize,
    pub records: Vec<PatientRecord>,
}

impl RecordSet {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn labels(&self) -> Result<Vec<u8>> {
        self.records
            .iter()
            .map(|r| {
                r.label
                    .ok_or_else(|| invalid(format!("record {} has no label", r.patient_id)))
            })
            .collect()
    }

    pub fn subset(&self, indices: &[usize]) -> RecordSet {
        RecordSet {
            static_names: self.static_names.clone(),
            series_len: self.series_len,
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
        }
    }
}

/// Expected column roles.
#[derive(Debug, Clone, PartialEq)]
pub struct Schema {
    pub id_column: Option<String>,
    pub required_statics: Vec<String>,
    /// Also treat every other numeric, non-series column as a static feature.
    pub include_extras: bool,
    /// `None` detects `glucose_day_1..` consecutively.
    pub series_len: Option<usize>,
    pub label_column: Option<String>,
}

impl Default for Schema {
    fn default() -> Self {
        Schema {
            id_column: Some(ID_COLUMN.to_string()),
            required_statics: NAMED_FEATURES.iter().map(|f| f.name.to_string()).collect(),
            include_extras: true,
            series_len: None,
            label_column: Some(LABEL_COLUMN.to_string()),
        }
    }
}

impl Schema {
    /// Every numeric non-series column is a static; nothing is required by name.
    pub fn any_statics() -> Self {
        Schema {
            required_statics: Vec::new(),
            ..Default::default()
        }
    }
}

fn numeric(table: &RawTable, row: usize, col: usize) -> Result<Option<f64>> {
    match &table.rows[row][col] {
        Cell::Null => Ok(None),
        Cell::Text(s) => match s.trim().parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Some(v)),
            _ => Err(Error::NonNumeric {
                row: row + 1,
                column: table.header[col].clone(),
                value: s.clone(),
            }),
        },
        c => Ok(c.as_f64()),
    }
}

pub fn to_records(table: &RawTable, schema: &Schema) -> Result<RecordSet> {
    let find = |name: &str| {
        table
            .column_index(name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };

    let id_col = schema.id_column.as_deref().map(find).transpose()?;
    let label_col = schema.label_column.as_deref().map(find).transpose()?;

    let series_len = match schema.series_len {
        Some(t) => t,
        None => (1..)
            .take_while(|&d| table.column_index(&series_column(d)).is_some())
            .count(),
    };
    if series_len == 0 {
        return Err(Error::MissingColumn(series_column(1)));
    }
    let series_cols = (1..=series_len)
        .map(|d| find(&series_column(d)))
        .collect::<Result<Vec<_>>>()?;

    let mut static_cols = schema
        .required_statics
        .iter()
        .map(|n| find(n))
        .collect::<Result<Vec<_>>>()?;
    if schema.include_extras {
        for (j, name) in table.header.iter().enumerate() {
            let taken = Some(j) == id_col
                || Some(j) == label_col
                || static_cols.contains(&j)
                || name.starts_with(SERIES_PREFIX);
            if !taken {
                static_cols.push(j);
            }
        }
    }

    let mut records = Vec::with_capacity(table.n_rows());
    for r in 0..table.n_rows() {
        let patient_id = match id_col {
            Some(c) => match &table.rows[r][c] {
                Cell::Text(s) => s.clone(),
                Cell::Integer(v) => v.to_string(),
                Cell::Real(v) => v.to_string(),
                Cell::Null => format!("row{}", r + 1),
            },
            None => format!("row{}", r + 1),
        };
        let read = |cols: &[usize]| -> Result<(Vec<f64>, Vec<bool>)> {
            let mut vals = Vec::with_capacity(cols.len());
            let mut mask = Vec::with_capacity(cols.len());
            for &c in cols {
                let v = numeric(table, r, c)?;
                mask.push(v.is_some());
                vals.push(v.unwrap_or(f64::NAN));
            }
            Ok((vals, mask))
        };
        let (statics, static_mask) = read(&static_cols)?;
        let (glucose_series, series_mask) = read(&series_cols)?;
        let label = match label_col {
            Some(c) => match numeric(table, r, c)? {
                None => None,
                Some(0.0) => Some(0),
                Some(1.0) => Some(1),
                Some(v) => {
                    return Err(invalid(format!("label {v} at row {} is not 0 or 1", r + 1)))
                }
            },
            None => None,
        };
        records.push(PatientRecord {
            patient_id,
            statics,
            static_mask,
            glucose_series,
            series_mask,
            label,
        });
    }

    Ok(RecordSet {
        static_names: static_cols.iter().map(|&c| table.header[c].clone()).collect(),
        series_len,
        records,
    })
}

/// Inverse of [`to_records`]: id, statics, series days, then the label
/// column when any record carries a label.
pub fn from_records(set: &RecordSet) -> RawTable {
    let mut header = vec![ID_COLUMN.to_string()];
    header.extend(set.static_names.iter().cloned());
    header.extend((1..=set.series_len).map(series_column));
    let labelled = set.records.iter().any(|r| r.label.is_some());
    if labelled {
        header.push(LABEL_COLUMN.to_string());
    }
    let mut types = vec![ColumnType::Real; header.len()];
    types[0] = ColumnType::Text;
    if labelled {
        *types.last_mut().expect("label column") = ColumnType::Integer;
    }
    let mut table = RawTable::new(header, types);
    let cell = |v: f64, present: bool| if present { Cell::Real(v) } else { Cell::Null };
    for r in &set.records {
        let mut row = vec![Cell::Text(r.patient_id.clone())];
        row.extend(r.statics.iter().zip(&r.static_mask).map(|(&v, &m)| cell(v, m)));
        row.extend(r.glucose_series.iter().zip(&r.series_mask).map(|(&v, &m)| cell(v, m)));
        if labelled {
            row.push(r.label.map_or(Cell::Null, |l| Cell::Integer(l as i64)));
        }
        table.rows.push(row);
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_cohort, parse_table, write_table, CohortSpec};

    #[test]
    fn cohort_round_trip_is_exact() {
        let spec = CohortSpec { n: 300, seed: 4, missing_rate: 0.1, ..Default::default() };
        let table = generate_cohort(&spec).unwrap();
        let direct = to_records(&table, &Schema::default()).unwrap();
        let parsed = parse_table(&write_table(&table).unwrap()).unwrap();
        let via_text = to_records(&parsed, &Schema::default()).unwrap();
        assert_eq!(direct.series_len, 7);
        assert_eq!(direct.static_names, via_text.static_names);
        for (a, b) in direct.records.iter().zip(&via_text.records) {
            assert_eq!(a.static_mask, b.static_mask);
            assert_eq!(a.series_mask, b.series_mask);
            assert_eq!(a.label, b.label);
            for (x, y) in a.statics.iter().zip(&b.statics).chain(a.glucose_series.iter().zip(&b.glucose_series)) {
                assert!(x.to_bits() == y.to_bits() || (x.is_nan() && y.is_nan()));
            }
        }
    }

    #[test]
    fn missing_bmi_is_named() {
        let t = parse_table("patient_id,fasting_glucose,hba1c,age,systolic_bp,glucose_day_1,label\na,1,2,3,4,5,0").unwrap();
        match to_records(&t, &Schema::default()) {
            Err(Error::MissingColumn(c)) => assert_eq!(c, "bmi"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn null_in_series_sets_mask() {
        let t = parse_table(
            "patient_id,fasting_glucose,hba1c,bmi,age,systolic_bp,glucose_day_1,glucose_day_2,glucose_day_3,label\n\
             a,100,5.5,25,40,120,101,99,,1",
        )
        .unwrap();
        let rs = to_records(&t, &Schema::default()).unwrap();
        assert_eq!(rs.series_len, 3);
        assert_eq!(rs.records[0].series_mask, vec![true, true, false]);
        assert_eq!(rs.records[0].label, Some(1));
    }

    #[test]
    fn text_in_numeric_column_reports_coordinates() {
        let t = parse_table("x,glucose_day_1\n1,2\nabc,3").unwrap();
        match to_records(&t, &Schema { id_column: None, label_column: None, ..Schema::any_statics() }) {
            Err(Error::NonNumeric { row, column, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "x");
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}

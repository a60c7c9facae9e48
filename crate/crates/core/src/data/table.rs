use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Real(f64),
    Integer(i64),
    Text(String),
    Null,
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Cell::Real(v) => Some(v),
            Cell::Integer(v) => Some(v as f64),
            _ => None,
        }
    }

    /// The cell as it would be written, `None` for nulls.
    pub fn as_text(&self) -> Option<String> {
        match self {
            Cell::Real(v) => Some(format!("{v:?}")),
            Cell::Integer(v) => Some(v.to_string()),
            Cell::Text(s) => Some(s.clone()),
            Cell::Null => None,
        }
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Cell::Null)
    }
}

/// Narrowest type covering every non-empty cell of a column.
/// Widening order is integer ⊂ real ⊂ text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ColumnType {
    Integer,
    Real,
    Text,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub header: Vec<String>,
    pub types: Vec<ColumnType>,
    pub rows: Vec<Vec<Cell>>,
}

impl RawTable {
    pub fn new(header: Vec<String>, types: Vec<ColumnType>) -> Self {
        RawTable {
            header,
            types,
            rows: Vec::new(),
        }
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }
}

fn classify(raw: &str) -> ColumnType {
    let s = raw.trim();
    if s.parse::<i64>().is_ok() {
        ColumnType::Integer
    } else if s.parse::<f64>().is_ok_and(f64::is_finite) {
        ColumnType::Real
    } else {
        ColumnType::Text
    }
}

/// Parses comma-separated text. The first record is the header; empty fields are null.
pub fn parse_table(text: &str) -> Result<RawTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());

    let mut records = reader.records();
    let header: Vec<String> = match records.next() {
        Some(rec) => rec?.iter().map(|s| s.trim().to_string()).collect(),
        None => return Err(Error::EmptyInput),
    };
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(Error::EmptyInput);
    }

    let mut raw_rows: Vec<Vec<String>> = Vec::new();
    for (i, rec) in records.enumerate() {
        let rec = rec?;
        let row = i + 1;
        if rec.len() != header.len() {
            return Err(Error::RaggedRow {
                row,
                expected: header.len(),
                found: rec.len(),
            });
        }
        raw_rows.push(rec.iter().map(str::to_string).collect());
    }

    // Pass 1: infer column types.
    let mut types = vec![ColumnType::Integer; header.len()];
    for row in &raw_rows {
        for (j, cell) in row.iter().enumerate() {
            if !cell.trim().is_empty() {
                types[j] = types[j].max(classify(cell));
            }
        }
    }

    // Pass 2: convert.
    let rows = raw_rows
        .into_iter()
        .map(|row| {
            row.into_iter()
                .zip(&types)
                .map(|(cell, ty)| {
                    let s = cell.trim();
                    if s.is_empty() {
                        return Cell::Null;
                    }
                    match ty {
                        ColumnType::Integer => Cell::Integer(s.parse().expect("classified")),
                        ColumnType::Real => Cell::Real(s.parse().expect("classified")),
                        ColumnType::Text => Cell::Text(cell),
                    }
                })
                .collect()
        })
        .collect();

    Ok(RawTable {
        header,
        types,
        rows,
    })
}

/// Serializes with a header row. Reals use shortest round-trip formatting.
pub fn write_table(table: &RawTable) -> Result<String> {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(&table.header)?;
    let mut fields: Vec<String> = Vec::with_capacity(table.header.len());
    for row in &table.rows {
        fields.clear();
        fields.extend(row.iter().map(|c| match c {
            Cell::Real(v) => format!("{v:?}"),
            Cell::Integer(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Null => String::new(),
        }));
        w.write_record(&fields)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Csv(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

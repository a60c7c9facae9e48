//! Synthetic patient cohorts and delimited-text ingestion.

mod cohort;
mod records;
mod table;

pub use cohort::{
    bayes_auc, generate_cohort, generate_cohort_with_oracle, solve_intercept, CohortSpec,
    StaticFeature, NAMED_FEATURES,
};
pub use records::{from_records, to_records, PatientRecord, RecordSet, Schema};
pub use table::{parse_table, write_table, Cell, ColumnType, RawTable};

pub const ID_COLUMN: &str = "patient_id";
pub const LABEL_COLUMN: &str = "label";
pub const SERIES_PREFIX: &str = "glucose_day_";

pub fn series_column(day: usize) -> String {
    format!("{SERIES_PREFIX}{day}")
}

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use super::schema::validate_schema;
use super::{ColumnSchema, DataError, Result, Role};

/// Feature matrix (rows are samples, columns follow the feature entries of
/// the schema in order) plus the target vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: DMatrix<f64>,
    pub target: DVector<f64>,
    pub schema: Vec<ColumnSchema>,
}

impl Dataset {
    pub fn new(
        features: DMatrix<f64>,
        target: DVector<f64>,
        schema: Vec<ColumnSchema>,
    ) -> Result<Self> {
        validate_schema(&schema)?;
        let d = schema.iter().filter(|c| c.role == Role::Feature).count();
        if features.ncols() != d {
            return Err(DataError::Dimension(format!(
                "schema has {d} features, matrix has {} columns",
                features.ncols()
            )));
        }
        if features.nrows() != target.len() {
            return Err(DataError::Dimension(format!(
                "{} feature rows but {} targets",
                features.nrows(),
                target.len()
            )));
        }
        if features.iter().chain(target.iter()).any(|v| !v.is_finite()) {
            return Err(DataError::Dimension("dataset contains non-finite values".into()));
        }
        Ok(Self {
            features,
            target,
            schema,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn feature_columns(&self) -> impl Iterator<Item = &ColumnSchema> {
        self.schema.iter().filter(|c| c.role == Role::Feature)
    }

    pub fn target_column(&self) -> &ColumnSchema {
        self.schema
            .iter()
            .find(|c| c.role == Role::Target)
            .expect("validated schema has a target")
    }

    /// Rows at `indices`, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Dataset {
        let features = self.features.select_rows(indices);
        let target = DVector::from_iterator(indices.len(), indices.iter().map(|&i| self.target[i]));
        Dataset {
            features,
            target,
            schema: self.schema.clone(),
        }
    }

    /// Keeps only the listed feature columns (indices into the feature
    /// matrix), in the given order. The target column is retained.
    pub fn select_features(&self, columns: &[usize]) -> Dataset {
        let features = self.features.select_columns(columns);
        let feature_schema: Vec<&ColumnSchema> = self.feature_columns().collect();
        let mut schema: Vec<ColumnSchema> =
            columns.iter().map(|&j| feature_schema[j].clone()).collect();
        schema.push(self.target_column().clone());
        Dataset {
            features,
            target: self.target.clone(),
            schema,
        }
    }

    fn row_bits(&self, i: usize) -> Vec<u64> {
        self.features
            .row(i)
            .iter()
            .chain(std::iter::once(&self.target[i]))
            .map(|v| v.to_bits())
            .collect()
    }
}

/// Loads a CSV file with a header row. Columns are matched to the schema by
/// name regardless of order; unknown extra columns are ignored.
pub fn load_dataset(path: &Path, schema: &[ColumnSchema]) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    read_dataset(file, schema)
}

pub fn read_dataset<R: Read>(reader: R, schema: &[ColumnSchema]) -> Result<Dataset> {
    validate_schema(schema)?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();

    // Position of every schema column in the file.
    let mut positions = Vec::with_capacity(schema.len());
    for col in schema {
        let pos = headers
            .iter()
            .position(|h| h == col.name)
            .ok_or_else(|| DataError::MissingColumn(col.name.clone()))?;
        positions.push(pos);
    }

    let d = schema.len() - 1;
    let mut feats: Vec<f64> = Vec::new();
    let mut target: Vec<f64> = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let row = r + 1;
        if record.len() != headers.len() {
            return Err(DataError::RowLength {
                row,
                expected: headers.len(),
                found: record.len(),
            });
        }
        for (col, &pos) in schema.iter().zip(&positions) {
            let cell = &record[pos];
            let value: f64 = cell.parse().map_err(|_| DataError::Parse {
                row,
                column: col.name.clone(),
                value: cell.to_string(),
            })?;
            if !value.is_finite() {
                return Err(DataError::NonFinite {
                    row,
                    column: col.name.clone(),
                    value: cell.to_string(),
                });
            }
            match col.role {
                Role::Feature => feats.push(value),
                Role::Target => target.push(value),
            }
        }
    }
    if target.is_empty() {
        return Err(DataError::Empty);
    }
    let n = target.len();
    let features = DMatrix::from_row_slice(n, d, &feats);
    Dataset::new(features, DVector::from_vec(target), schema.to_vec())
}

/// Writes the dataset as CSV with the schema's column order and names.
/// Values are printed in shortest round-trip form.
pub fn write_dataset<W: Write>(ds: &Dataset, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(ds.schema.iter().map(|c| c.name.as_str()))?;
    let mut record = Vec::with_capacity(ds.schema.len());
    for i in 0..ds.n_rows() {
        record.clear();
        let mut j = 0;
        for col in &ds.schema {
            let v = match col.role {
                Role::Feature => {
                    j += 1;
                    ds.features[(i, j - 1)]
                }
                Role::Target => ds.target[i],
            };
            record.push(v.to_string());
        }
        wtr.write_record(&record)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Drops rows whose features and target are bitwise identical to an earlier
/// row. Returns the reduced dataset and the number of rows removed.
pub fn deduplicate(ds: &Dataset) -> (Dataset, usize) {
    let mut seen = HashSet::with_capacity(ds.n_rows());
    let keep: Vec<usize> = (0..ds.n_rows())
        .filter(|&i| seen.insert(ds.row_bits(i)))
        .collect();
    let removed = ds.n_rows() - keep.len();
    (ds.select_rows(&keep), removed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::default_schema;

    fn two_feature_schema() -> Vec<ColumnSchema> {
        vec![
            ColumnSchema::feature("a", "X1", "-"),
            ColumnSchema::feature("b", "X2", "-"),
            ColumnSchema::target("y", "Y", "-"),
        ]
    }

    fn small(rows: &[([f64; 2], f64)]) -> Dataset {
        let flat: Vec<f64> = rows.iter().flat_map(|(x, _)| x.to_vec()).collect();
        Dataset::new(
            DMatrix::from_row_slice(rows.len(), 2, &flat),
            DVector::from_iterator(rows.len(), rows.iter().map(|r| r.1)),
            two_feature_schema(),
        )
        .unwrap()
    }

    fn marun_csv(rows: usize) -> String {
        let schema = default_schema();
        let mut s = schema.iter().map(|c| c.name.clone()).collect::<Vec<_>>().join(",");
        s.push('\n');
        for r in 0..rows {
            let cells: Vec<String> = (0..19).map(|j| format!("{}", r * 19 + j)).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    #[test]
    fn loads_three_rows_with_full_schema() {
        let ds = read_dataset(marun_csv(3).as_bytes(), &default_schema()).unwrap();
        assert_eq!(ds.n_rows(), 3);
        assert_eq!(ds.n_features(), 18);
        assert_eq!(ds.target[1], 37.0);
        assert_eq!(ds.features[(2, 0)], 38.0);
    }

    #[test]
    fn reorders_columns_to_schema_order() {
        let csv = "y,b,a\n1,2,3\n4,5,6\n";
        let ds = read_dataset(csv.as_bytes(), &two_feature_schema()).unwrap();
        assert_eq!(ds.features.row(0).iter().copied().collect::<Vec<_>>(), vec![3.0, 2.0]);
        assert_eq!(ds.target.as_slice(), &[1.0, 4.0]);
    }

    #[test]
    fn missing_column_is_named() {
        let csv = marun_csv(2).replacen("Depth", "Dpth", 1);
        let err = read_dataset(csv.as_bytes(), &default_schema()).unwrap_err();
        assert!(matches!(err, DataError::MissingColumn(ref c) if c == "Depth"));
        assert!(err.to_string().contains("Depth"));
    }

    #[test]
    fn nan_cell_reports_row_and_column() {
        let csv = "a,b,y\n1,2,3\n4,NaN,6\n";
        let err = read_dataset(csv.as_bytes(), &two_feature_schema()).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, DataError::NonFinite { row: 2, .. }), "{msg}");
        assert!(msg.contains("row 2") && msg.contains("\"b\""), "{msg}");
    }

    #[test]
    fn garbage_cell_and_empty_file() {
        let err = read_dataset("a,b,y\n1,x,3\n".as_bytes(), &two_feature_schema()).unwrap_err();
        assert!(matches!(err, DataError::Parse { row: 1, .. }));
        let err = read_dataset("a,b,y\n".as_bytes(), &two_feature_schema()).unwrap_err();
        assert!(matches!(err, DataError::Empty));
    }

    #[test]
    fn write_then_read_is_lossless() {
        let ds = small(&[([0.1, 1e-17], 3.0), ([-2.5, 7.0 / 3.0], 1e300)]);
        let mut buf = Vec::new();
        write_dataset(&ds, &mut buf).unwrap();
        let back = read_dataset(buf.as_slice(), &two_feature_schema()).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn dedup_examples() {
        let (d, removed) = deduplicate(&small(&[([1., 2.], 5.), ([1., 2.], 5.), ([3., 4.], 6.)]));
        assert_eq!((d.n_rows(), removed), (2, 1));
        assert_eq!(d.target.as_slice(), &[5.0, 6.0]);

        let (d, removed) = deduplicate(&small(&[([1., 2.], 5.), ([1., 2.], 7.)]));
        assert_eq!((d.n_rows(), removed), (2, 0));

        let ds = small(&[([1., 2.], 5.), ([3., 2.], 5.), ([1., 4.], 5.)]);
        let (d, removed) = deduplicate(&ds);
        assert_eq!(removed, 0);
        assert_eq!(d, ds);
    }

    #[test]
    fn dedup_keeps_first_occurrence_order() {
        let ds = small(&[
            ([9., 9.], 1.),
            ([1., 1.], 1.),
            ([9., 9.], 1.),
            ([0., 0.], 0.),
            ([1., 1.], 1.),
        ]);
        let (d, removed) = deduplicate(&ds);
        assert_eq!(removed, 2);
        assert_eq!(d.features.column(0).iter().copied().collect::<Vec<_>>(), vec![9., 1., 0.]);
    }

    #[test]
    fn select_features_keeps_target_schema() {
        let ds = small(&[([1., 2.], 5.), ([3., 4.], 6.)]);
        let sub = ds.select_features(&[1]);
        assert_eq!(sub.n_features(), 1);
        assert_eq!(sub.schema.len(), 2);
        assert_eq!(sub.schema[0].name, "b");
        assert_eq!(sub.features[(1, 0)], 4.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn dedup_is_idempotent(rows in proptest::collection::vec((0u8..3, 0u8..3, 0u8..2), 1..40)) {
                let rows: Vec<([f64; 2], f64)> = rows
                    .into_iter()
                    .map(|(a, b, y)| ([a as f64, b as f64], y as f64))
                    .collect();
                let ds = small(&rows);
                let (once, _) = deduplicate(&ds);
                let (twice, removed) = deduplicate(&once);
                prop_assert_eq!(removed, 0);
                prop_assert_eq!(twice, once);
            }
        }
    }
}

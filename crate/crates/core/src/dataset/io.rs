use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use super::schema::{FeatureKind, FeatureSchema, FeatureSpec};
use super::{check_cell, Dataset};
use crate::{Error, Result};

/// A data row dropped by [`load_csv_filtered`]. `row` is the 0-based record
/// index (header excluded).
#[derive(Debug, Clone, PartialEq)]
pub struct RowRejection {
    pub row: usize,
    pub reason: String,
}

/// Loads a CSV file, failing on the first row that violates the schema.
pub fn load_csv(path: impl AsRef<Path>, schema: &FeatureSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema)
}

pub fn read_csv(reader: impl Read, schema: &FeatureSchema) -> Result<Dataset> {
    let (d, rejected) = parse(reader, schema, true)?;
    debug_assert!(rejected.is_empty());
    Ok(d)
}

/// Loads a CSV file, dropping rows that fail range/category checks or have a
/// missing target. Unparseable cells and header problems are still fatal.
pub fn load_csv_filtered(
    path: impl AsRef<Path>,
    schema: &FeatureSchema,
) -> Result<(Dataset, Vec<RowRejection>)> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse(file, schema, false)
}

fn parse(
    reader: impl Read,
    schema: &FeatureSchema,
    strict: bool,
) -> Result<(Dataset, Vec<RowRejection>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let positions: HashMap<&str, usize> = header.iter().enumerate().map(|(i, h)| (h, i)).collect();
    for h in header.iter() {
        if !schema.entries().any(|e| e.name == h) {
            return Err(Error::UnknownColumn(h.to_string()));
        }
    }
    let feature_pos = schema
        .features()
        .iter()
        .map(|f| {
            positions
                .get(f.name.as_str())
                .copied()
                .ok_or_else(|| Error::MissingColumn(f.name.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    let target_pos = schema
        .targets()
        .iter()
        .map(|t| {
            positions
                .get(t.name.as_str())
                .copied()
                .ok_or_else(|| Error::MissingColumn(t.name.clone()))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); schema.n_features()];
    let mut targets: [Vec<u8>; 2] = [Vec::new(), Vec::new()];
    let mut rejected = Vec::new();
    let mut cells = vec![0.0; schema.n_features()];

    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let mut reason = None;
        for (j, (spec, &pos)) in schema.features().iter().zip(&feature_pos).enumerate() {
            let raw = rec.get(pos).unwrap_or("");
            let v = parse_cell(spec, raw).map_err(|why| Error::Parse {
                row,
                column: spec.name.clone(),
                value: raw.to_string(),
                reason: why,
            })?;
            if let Some(v) = v {
                if let Err(why) = check_cell(spec, v) {
                    reason.get_or_insert(why);
                }
            }
            cells[j] = v.unwrap_or(f64::NAN);
        }
        let mut tv = [0u8; 2];
        for (k, (spec, &pos)) in schema.targets().iter().zip(&target_pos).enumerate() {
            let raw = rec.get(pos).unwrap_or("");
            match parse_cell(spec, raw) {
                Ok(Some(v)) => tv[k] = v as u8,
                Ok(None) => {
                    reason.get_or_insert(format!("missing target {}", spec.name));
                }
                Err(why) => {
                    return Err(Error::Parse {
                        row,
                        column: spec.name.clone(),
                        value: raw.to_string(),
                        reason: why,
                    })
                }
            }
        }
        if let Some(reason) = reason {
            if strict {
                return Err(Error::RowRejected { row, reason });
            }
            rejected.push(RowRejection { row, reason });
            continue;
        }
        for (col, &v) in columns.iter_mut().zip(&cells) {
            col.push(v);
        }
        targets[0].push(tv[0]);
        targets[1].push(tv[1]);
    }
    let d = Dataset {
        schema: Arc::new(schema.clone()),
        columns,
        targets,
    };
    Ok((d, rejected))
}

fn parse_cell(spec: &FeatureSpec, raw: &str) -> std::result::Result<Option<f64>, String> {
    if raw.is_empty() {
        return Ok(None);
    }
    match &spec.kind {
        FeatureKind::Continuous { .. } => {
            let v: f64 = raw.parse().map_err(|_| "not a number".to_string())?;
            if !v.is_finite() {
                return Err("not a finite number".into());
            }
            Ok(Some(v))
        }
        FeatureKind::Binary => match raw {
            "0" => Ok(Some(0.0)),
            "1" => Ok(Some(1.0)),
            _ => Err("expected 0 or 1".into()),
        },
        FeatureKind::Categorical { categories } | FeatureKind::Ordinal { categories } => categories
            .iter()
            .position(|c| c == raw)
            .map(|i| Some(i as f64))
            .ok_or_else(|| format!("unknown category (allowed: {})", categories.join(", "))),
    }
}

fn format_cell(spec: &FeatureSpec, v: f64) -> String {
    if v.is_nan() {
        return String::new();
    }
    match &spec.kind {
        FeatureKind::Continuous { .. } => format!("{v}"),
        FeatureKind::Binary => if v == 1.0 { "1" } else { "0" }.to_string(),
        FeatureKind::Categorical { categories } | FeatureKind::Ordinal { categories } => {
            categories[v as usize].clone()
        }
    }
}

/// Writes the dataset with a header of schema symbols (features, then targets).
pub fn write_csv(d: &Dataset, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let schema = d.schema();
    w.write_record(schema.entries().map(|e| e.name.as_str()))?;
    let mut fields = Vec::with_capacity(schema.n_features() + 2);
    for row in 0..d.n_rows() {
        fields.clear();
        for (j, spec) in schema.features().iter().enumerate() {
            fields.push(format_cell(spec, d.columns[j][row]));
        }
        fields.push(d.targets[0][row].to_string());
        fields.push(d.targets[1][row].to_string());
        w.write_record(&fields)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{DELAYED_TARGET, EARLY_TARGET};

    fn schema() -> FeatureSchema {
        FeatureSchema::new(vec![
            FeatureSpec::continuous("AGE", 18.0, 120.0),
            FeatureSpec::categorical("GENDER", &["female", "male"]),
            FeatureSpec::binary("HX_PONV"),
            FeatureSpec::target(EARLY_TARGET),
            FeatureSpec::target(DELAYED_TARGET),
        ])
        .unwrap()
    }

    #[test]
    fn loads_reordered_columns_and_missing_cells() {
        let text = "GENDER,PONV_24H,AGE,HX_PONV,PONV_PACU\nfemale,1,30,0,0\nmale,0,,1,1\n";
        let d = read_csv(text.as_bytes(), &schema()).unwrap();
        assert_eq!(d.n_rows(), 2);
        assert_eq!(d.column(0)[0], 30.0);
        assert!(d.column(0)[1].is_nan());
        assert_eq!(d.column(1), &[0.0, 1.0]);
        assert_eq!(d.target(crate::dataset::Target::Early), &[0, 1]);
    }

    #[test]
    fn hash_lines_are_comments() {
        let text = "# config_hash: abc\nAGE,GENDER,HX_PONV,PONV_PACU,PONV_24H\n# note\n40,male,0,0,1\n";
        let d = read_csv(text.as_bytes(), &schema()).unwrap();
        assert_eq!(d.n_rows(), 1);
        assert_eq!(d.target(crate::dataset::Target::Delayed), &[1]);
    }

    #[test]
    fn underage_row_is_rejected_citing_age() {
        let text = "AGE,GENDER,HX_PONV,PONV_PACU,PONV_24H\n40,male,0,0,0\n5,female,0,0,0\n";
        let err = read_csv(text.as_bytes(), &schema()).unwrap_err();
        match err {
            Error::RowRejected { row, reason } => {
                assert_eq!(row, 1);
                assert!(reason.contains("AGE") && reason.contains("[18, 120]"), "{reason}");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn missing_target_column_is_a_schema_error() {
        let text = "AGE,GENDER,HX_PONV,PONV_24H\n40,male,0,0\n";
        let err = read_csv(text.as_bytes(), &schema()).unwrap_err();
        assert!(matches!(err, Error::MissingColumn(ref c) if c == "PONV_PACU"), "{err}");
    }

    #[test]
    fn unparseable_cell_reports_row_and_column() {
        let text = "AGE,GENDER,HX_PONV,PONV_PACU,PONV_24H\nforty,male,0,0,0\n";
        let err = read_csv(text.as_bytes(), &schema()).unwrap_err();
        assert!(matches!(err, Error::Parse { row: 0, ref column, .. } if column == "AGE"), "{err}");
        let text = "AGE,GENDER,HX_PONV,PONV_PACU,PONV_24H\n40,other,0,0,0\n";
        assert!(matches!(read_csv(text.as_bytes(), &schema()), Err(Error::Parse { .. })));
    }

    #[test]
    fn missing_target_value_rejects_row() {
        let text = "AGE,GENDER,HX_PONV,PONV_PACU,PONV_24H\n40,male,0,,0\n";
        let err = read_csv(text.as_bytes(), &schema()).unwrap_err();
        assert!(matches!(err, Error::RowRejected { row: 0, .. }));
    }

    #[test]
    fn extra_column_is_rejected() {
        let text = "AGE,GENDER,HX_PONV,PONV_PACU,PONV_24H,BOGUS\n40,male,0,0,0,1\n";
        assert!(matches!(read_csv(text.as_bytes(), &schema()), Err(Error::UnknownColumn(_))));
    }

    #[test]
    fn filtered_load_drops_invalid_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(
            &path,
            "AGE,GENDER,HX_PONV,PONV_PACU,PONV_24H\n40,male,0,0,0\n5,female,0,0,0\n50,female,1,,1\n60,male,1,1,1\n",
        )
        .unwrap();
        let (d, rej) = load_csv_filtered(&path, &schema()).unwrap();
        assert_eq!(d.n_rows(), 2);
        assert_eq!(rej.iter().map(|r| r.row).collect::<Vec<_>>(), vec![1, 2]);
    }

    #[test]
    fn write_then_read_is_identity() {
        let text = "AGE,GENDER,HX_PONV,PONV_PACU,PONV_24H\n40.125,male,0,0,0\n,female,,1,0\n18,female,1,1,1\n";
        let d = read_csv(text.as_bytes(), &schema()).unwrap();
        let mut buf = Vec::new();
        write_csv(&d, &mut buf).unwrap();
        let back = read_csv(buf.as_slice(), &schema()).unwrap();
        assert_eq!(back.n_rows(), d.n_rows());
        for j in 0..d.n_features() {
            for (a, b) in d.column(j).iter().zip(back.column(j)) {
                assert!(a == b || (a.is_nan() && b.is_nan()));
            }
        }
    }
}

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{Dataset, LabeledExample, LabelingPolicy, MAX_SEVERITY};
use crate::error::{Error, Result};

/// Expected layout of a dataset CSV: feature columns `f0..f{d-1}` followed
/// by `severity` and `fault_id`. Column order is not significant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CsvSchema {
    /// Required feature count; inferred from the header when `None`.
    pub dim: Option<usize>,
    pub policy: LabelingPolicy,
}

struct Columns {
    features: Vec<usize>,
    severity: usize,
    fault_id: usize,
}

fn resolve_columns(header: &csv::StringRecord, schema: &CsvSchema) -> Result<Columns> {
    let position = |name: &str| header.iter().position(|h| h.trim() == name);
    let missing = |name: &str| Error::Parse { row: 0, message: format!("missing column `{name}`") };

    let dim = match schema.dim {
        Some(d) => d,
        None => (0..).take_while(|i| position(&format!("f{i}")).is_some()).count(),
    };
    if dim == 0 {
        return Err(missing("f0"));
    }
    let features = (0..dim)
        .map(|i| {
            let name = format!("f{i}");
            position(&name).ok_or_else(|| missing(&name))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Columns {
        features,
        severity: position("severity").ok_or_else(|| missing("severity"))?,
        fault_id: position("fault_id").ok_or_else(|| missing("fault_id"))?,
    })
}

/// Parse a dataset from any reader. Rows are numbered from 1, header excluded.
pub fn read_dataset<R: Read>(reader: R, schema: &CsvSchema) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers()?.clone();
    let cols = resolve_columns(&header, schema)?;
    let mut data = Dataset::new(cols.features.len(), schema.policy);

    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Parse { row, message: e.to_string() })?;
        let cell = |c: usize| -> Result<&str> {
            record.get(c).map(str::trim).ok_or_else(|| Error::Parse { row, message: format!("missing cell {c}") })
        };
        let features = cols
            .features
            .iter()
            .map(|&c| {
                let s = cell(c)?;
                s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Parse {
                    row,
                    message: format!("non-numeric feature `{s}` in `{}`", &header[c]),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let severity_raw = cell(cols.severity)?;
        let severity = severity_raw
            .parse::<u8>()
            .ok()
            .filter(|s| *s <= MAX_SEVERITY)
            .ok_or_else(|| Error::Parse { row, message: format!("severity `{severity_raw}` not in 0..=4") })?;
        let fault_raw = cell(cols.fault_id)?;
        let fault_id = fault_raw.parse::<u32>().map_err(|_| Error::Parse {
            row,
            message: format!("fault_id `{fault_raw}` is not a non-negative integer"),
        })?;
        if (severity == 0) != (fault_id == 0) {
            return Err(Error::Parse {
                row,
                message: format!("severity {severity} with fault_id {fault_id}: fault_id 0 is reserved for SL0"),
            });
        }
        data.examples.push(LabeledExample { features, z: schema.policy.is_positive(severity), severity, fault_id });
    }
    Ok(data)
}

pub fn ingest_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(file, schema)
}

pub fn write_dataset<W: Write>(writer: W, data: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (0..data.dim).map(|i| format!("f{i}")).collect();
    header.push("severity".into());
    header.push("fault_id".into());
    w.write_record(&header)?;
    for e in &data.examples {
        let mut row: Vec<String> = e.features.iter().map(|v| v.to_string()).collect();
        row.push(e.severity.to_string());
        row.push(e.fault_id.to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn write_csv(path: impl AsRef<Path>, data: &Dataset) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_dataset(file, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate, GeneratorConfig};

    fn header(d: usize) -> String {
        let mut cols: Vec<String> = (0..d).map(|i| format!("f{i}")).collect();
        cols.push("severity".into());
        cols.push("fault_id".into());
        cols.join(",")
    }

    #[test]
    fn sixteen_features_and_all_severities() {
        let mut text = header(16) + "\n";
        for sl in 0..=4u8 {
            let feats: Vec<String> = (0..16).map(|i| format!("{}.5", i)).collect();
            text += &format!("{},{},{}\n", feats.join(","), sl, if sl == 0 { 0 } else { 2 });
        }
        let data = read_dataset(text.as_bytes(), &CsvSchema::default()).unwrap();
        assert_eq!(data.dim, 16);
        assert_eq!(data.len(), 5);
        assert_eq!(data.labels(), vec![false, true, true, true, true]);

        let dr = read_dataset(text.as_bytes(), &CsvSchema { dim: Some(16), policy: LabelingPolicy::Dr }).unwrap();
        assert_eq!(dr.labels(), vec![false, false, true, true, true]);
    }

    #[test]
    fn header_only_is_empty() {
        let data = read_dataset((header(3) + "\n").as_bytes(), &CsvSchema::default()).unwrap();
        assert!(data.is_empty());
        assert_eq!(data.dim, 3);
    }

    #[test]
    fn bad_severity_cites_row() {
        let mut text = header(2) + "\n";
        for _ in 0..11 {
            text += "0.1,0.2,1,1\n";
        }
        text += "0.1,0.2,7,1\n";
        match read_dataset(text.as_bytes(), &CsvSchema::default()) {
            Err(Error::Parse { row, .. }) => assert_eq!(row, 12),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn missing_column_and_non_numeric_cell() {
        let err = read_dataset("f0,f1,severity\n1,2,0\n".as_bytes(), &CsvSchema::default()).unwrap_err();
        assert!(err.to_string().contains("fault_id"));
        let err = read_dataset("f0,severity,fault_id\nabc,0,0\n".as_bytes(), &CsvSchema::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { row: 1, .. }));
        let err = read_dataset(
            "f0,f1,severity,fault_id\n1,2,0,0\n".as_bytes(),
            &CsvSchema { dim: Some(3), ..Default::default() },
        )
        .unwrap_err();
        assert!(err.to_string().contains("f2"));
    }

    #[test]
    fn write_then_read_is_exact() {
        let config = GeneratorConfig { normal_count: 20, cell_count: 3, dim: 4, ..Default::default() };
        let data = generate(&config, LabelingPolicy::Chiller).unwrap();
        let mut buf = Vec::new();
        write_dataset(&mut buf, &data).unwrap();
        let back = read_dataset(buf.as_slice(), &CsvSchema::default()).unwrap();
        assert_eq!(back, data);
    }
}

//! CSV datasets, the `meta.json` sidecar, JSON helpers and file
//! fingerprints.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use survkan_core::data::encode_labels;
use survkan_core::{ColumnMeta, Dataset, GeneratorSpec, Matrix, Provenance, SurvivalOutcome};
use survkan_core::data::ColumnKind;

use crate::error::{Error, Result};

pub const DATA_FORMAT: &str = "survkan-data/1";
pub const META_FILE: &str = "meta.json";

/// How to read a survival CSV: which columns hold the outcome and which
/// covariates are categorical. Every other column is a continuous covariate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CsvSchema {
    pub duration: String,
    pub event: String,
    pub categorical: Vec<String>,
    /// Fixed label order per categorical column; columns not listed are
    /// encoded in first-appearance order.
    pub labels: BTreeMap<String, Vec<String>>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self { duration: "duration".into(), event: "event".into(), categorical: Vec::new(), labels: BTreeMap::new() }
    }
}

/// Sidecar describing the CSV files of one directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub format: String,
    pub schema: CsvSchema,
    pub columns: Vec<ColumnMeta>,
    #[serde(default)]
    pub generator: Option<GeneratorSpec>,
    /// Keyed by file name.
    pub files: BTreeMap<String, FileMeta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileMeta {
    pub rows: usize,
    pub sha256: String,
    /// True log-partial hazard per row, for generated data.
    #[serde(default)]
    pub provenance: Option<Provenance>,
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    serde_json::from_str(&text).map_err(Error::json(path))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(Error::json(path))?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(Error::io(dir))?;
    }
    fs::write(path, bytes).map_err(Error::io(path))
}

/// Hex SHA-256 of a file's bytes.
pub fn fingerprint(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(Error::io(path))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn parse_real(cell: &str, what: &str, row: usize) -> Result<f64> {
    match cell.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Data(format!("row {row}: {what} value {cell:?} is not a finite number"))),
    }
}

/// Reads a survival CSV with a header row. Row numbers in errors count data
/// rows from 1.
pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(Error::csv(path))?;
    let headers: Vec<String> = reader.headers().map_err(Error::csv(path))?.iter().map(str::to_string).collect();
    let find = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Data(format!("{}: missing column {name:?}", path.display())))
    };
    let t_col = find(&schema.duration)?;
    let d_col = find(&schema.event)?;
    for name in &schema.categorical {
        find(name)?;
    }
    let covariates: Vec<usize> = (0..headers.len()).filter(|&c| c != t_col && c != d_col).collect();
    let categorical: Vec<bool> = covariates.iter().map(|&c| schema.categorical.contains(&headers[c])).collect();

    let mut durations = Vec::new();
    let mut events = Vec::new();
    let mut cells: Vec<Vec<String>> = vec![Vec::new(); covariates.len()];
    for (k, record) in reader.records().enumerate() {
        let row = k + 1;
        let record = record.map_err(Error::csv(path))?;
        let t = parse_real(&record[t_col], &schema.duration, row)?;
        if t <= 0.0 {
            return Err(Error::Data(format!("row {row}: duration {t} must be positive")));
        }
        let d = match record[d_col].trim().parse::<f64>() {
            Ok(v) if v == 0.0 => false,
            Ok(v) if v == 1.0 => true,
            _ => return Err(Error::Data(format!("row {row}: event value {:?} must be 0 or 1", &record[d_col]))),
        };
        durations.push(t);
        events.push(d);
        for (slot, &c) in covariates.iter().enumerate() {
            cells[slot].push(record[c].to_string());
        }
    }
    let rows = durations.len();
    if rows == 0 {
        return Err(Error::Data(format!("{}: no data rows", path.display())));
    }

    let mut columns = Vec::with_capacity(covariates.len());
    let mut values: Vec<Vec<f64>> = Vec::with_capacity(covariates.len());
    for (slot, &c) in covariates.iter().enumerate() {
        let name = headers[c].clone();
        if categorical[slot] {
            let (codes, labels) = match schema.labels.get(&name) {
                Some(known) => (encode_known(&cells[slot], known, &name)?, known.clone()),
                None => encode_labels(&cells[slot]),
            };
            values.push(codes);
            columns.push(ColumnMeta::categorical(name, labels));
        } else {
            let parsed = cells[slot].iter().enumerate().map(|(r, s)| parse_real(s, &name, r + 1)).collect::<Result<Vec<_>>>()?;
            values.push(parsed);
            columns.push(ColumnMeta::continuous(name));
        }
    }
    let mut x = Vec::with_capacity(rows * columns.len());
    for r in 0..rows {
        x.extend(values.iter().map(|col| col[r]));
    }
    let x = Matrix::from_vec(rows, columns.len(), x)?;
    Ok(Dataset::new(x, columns, SurvivalOutcome::new(durations, events)?)?)
}

fn encode_known(cells: &[String], labels: &[String], column: &str) -> Result<Vec<f64>> {
    cells
        .iter()
        .enumerate()
        .map(|(r, s)| match labels.iter().position(|l| l == s) {
            Some(code) => Ok(code as f64),
            None => Err(Error::Data(format!("row {}: unknown category {s:?} in column {column}", r + 1))),
        })
        .collect()
}

/// Writes `ds` as CSV: covariates (category labels for categorical
/// columns), then `duration` and `event`. Reals use the shortest text that
/// reads back to the same bits.
pub fn write_csv(ds: &Dataset, path: &Path) -> Result<()> {
    let mut out = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        let mut header = ds.names();
        header.push("duration".into());
        header.push("event".into());
        w.write_record(&header).map_err(Error::csv(path))?;
        let labels = ds.labels();
        for r in 0..ds.rows() {
            let mut rec: Vec<String> = (0..ds.cols())
                .map(|c| {
                    let v = ds.x.get(r, c);
                    match labels[c].get(v as usize) {
                        Some(label) => label.clone(),
                        None => format!("{v}"),
                    }
                })
                .collect();
            rec.push(format!("{}", ds.outcome.durations()[r]));
            rec.push(if ds.outcome.events()[r] { "1" } else { "0" }.into());
            w.write_record(&rec).map_err(Error::csv(path))?;
        }
        w.flush().map_err(Error::io(path))?;
    }
    write_file(path, &out)
}

/// Loads a CSV, taking column kinds, label orders and generator provenance
/// from a `meta.json` in the same directory when it lists the file. Label
/// orders already fixed in `schema` (e.g. from a trained model) win over the
/// sidecar's.
pub fn load_dataset(path: &Path, schema: &CsvSchema) -> Result<Dataset> {
    let meta_path = path.parent().unwrap_or(Path::new(".")).join(META_FILE);
    let file_name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
    let meta: Option<DatasetMeta> = if meta_path.exists() { Some(read_json(&meta_path)?) } else { None };
    let Some(meta) = meta.filter(|m| m.files.contains_key(&file_name)) else {
        return load_csv(path, schema);
    };
    let mut merged = meta.schema.clone();
    for c in &meta.columns {
        if let ColumnKind::Categorical { labels } = &c.kind {
            merged.labels.insert(c.name.clone(), labels.clone());
        }
    }
    for name in &schema.categorical {
        if !merged.categorical.contains(name) {
            merged.categorical.push(name.clone());
        }
    }
    merged.labels.extend(schema.labels.clone());
    let mut ds = load_csv(path, &merged)?;
    let entry = &meta.files[&file_name];
    if fingerprint(path)? == entry.sha256 {
        ds.provenance = entry.provenance.clone();
    } else {
        log::warn!("{} differs from the file recorded in {META_FILE}; ignoring its provenance", path.display());
    }
    Ok(ds)
}

/// Writes `files` (name, dataset) as CSVs plus a `meta.json` sidecar into
/// `dir`.
pub fn write_dataset_dir(dir: &Path, files: &[(&str, &Dataset)], generator: Option<&GeneratorSpec>) -> Result<()> {
    let mut entries = BTreeMap::new();
    for (name, ds) in files {
        let path = dir.join(name);
        write_csv(ds, &path)?;
        entries.insert(
            name.to_string(),
            FileMeta { rows: ds.rows(), sha256: fingerprint(&path)?, provenance: ds.provenance.clone() },
        );
    }
    let columns = files.first().map(|(_, ds)| ds.columns.clone()).unwrap_or_default();
    let categorical = columns.iter().filter(|c| matches!(c.kind, ColumnKind::Categorical { .. })).map(|c| c.name.clone()).collect();
    let meta = DatasetMeta {
        format: DATA_FORMAT.into(),
        schema: CsvSchema { categorical, ..CsvSchema::default() },
        columns,
        generator: generator.cloned(),
        files: entries,
    };
    write_json(&dir.join(META_FILE), &meta)
}

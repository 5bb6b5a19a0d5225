use std::io::{Read, Write};
use std::path::Path;

use crate::data::{ColumnSpec, Dataset, Exposure, ExposureKind, Schema};
use crate::error::{Error, Result};

/// Reads a comma-separated file with a header row into a validated dataset.
pub fn load_dataset(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    read_dataset(file, schema)
}

/// Same as [`load_dataset`] for any reader. Row numbers in errors are 1-based
/// data rows (the header is row 0).
pub fn read_dataset<R: Read>(mut reader: R, schema: &Schema) -> Result<Dataset> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    if text.trim().is_empty() {
        return Err(Error::EmptyFile);
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing column '{name}'")))
    };
    let d_idx = find(&schema.outcome)?;
    let a1_idx = find(&schema.a1.column)?;
    let a2_idx = find(&schema.a2.column)?;
    let cov_idx = schema
        .covariates
        .iter()
        .map(|c| find(c))
        .collect::<Result<Vec<_>>>()?;
    let w_idx = schema.weight.as_deref().map(find).transpose()?;

    let mut d = Vec::new();
    let mut a1 = Vec::new();
    let mut a2 = Vec::new();
    let mut covs = vec![Vec::new(); cov_idx.len()];
    let mut w = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let row = r + 1;
        let record = record?;
        let cell = |idx: usize, name: &str| -> Result<f64> {
            let raw = record.get(idx).unwrap_or("");
            if raw.is_empty() {
                return Err(Error::Validation {
                    row,
                    message: format!("missing value in column '{name}'"),
                });
            }
            raw.parse::<f64>().map_err(|_| Error::Validation {
                row,
                message: format!("non-numeric value '{raw}' in column '{name}'"),
            })
        };
        let dv = cell(d_idx, &schema.outcome)?;
        if dv != 0.0 && dv != 1.0 {
            return Err(Error::Validation {
                row,
                message: format!("outcome must be 0 or 1, got {dv}"),
            });
        }
        d.push(dv as u8);
        a1.push(cell(a1_idx, &schema.a1.column)?);
        a2.push(cell(a2_idx, &schema.a2.column)?);
        for (k, &idx) in cov_idx.iter().enumerate() {
            covs[k].push(cell(idx, &schema.covariates[k])?);
        }
        if let (Some(idx), Some(name)) = (w_idx, schema.weight.as_deref()) {
            w.push(cell(idx, name)?);
        }
    }
    if d.is_empty() {
        return Err(Error::InvalidData("file has a header but no data rows".into()));
    }
    let exposure = |spec: &ColumnSpec, values| Exposure::new(spec.column.clone(), spec.kind, values);
    Dataset::new(
        schema.outcome.clone(),
        d,
        exposure(&schema.a1, a1),
        exposure(&schema.a2, a2),
        schema.covariates.iter().cloned().zip(covs).collect(),
        schema.weight.clone().map(|name| (name, w)),
    )
}

fn fmt_value(kind: Option<ExposureKind>, v: f64) -> String {
    match kind {
        Some(k) if k.is_discrete() => format!("{}", v as i64),
        // `Display` for f64 is the shortest string that parses back exactly.
        _ => format!("{v}"),
    }
}

/// Writes a dataset as CSV: outcome, a1, a2, covariates, then weight.
pub fn write_dataset<W: Write>(ds: &Dataset, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec![
        ds.outcome_name().to_string(),
        ds.a1().name.clone(),
        ds.a2().name.clone(),
    ];
    header.extend(ds.covariate_names().iter().cloned());
    if let Some(w) = ds.weight_name() {
        header.push(w.to_string());
    }
    wtr.write_record(&header)?;
    for i in 0..ds.n() {
        let mut rec = vec![
            ds.d()[i].to_string(),
            fmt_value(Some(ds.a1().kind), ds.a1().values[i]),
            fmt_value(Some(ds.a2().kind), ds.a2().values[i]),
        ];
        rec.extend(ds.x_row(i).iter().map(|&v| fmt_value(None, v)));
        if let Some(w) = ds.weights() {
            rec.push(fmt_value(None, w[i]));
        }
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

impl Dataset {
    /// Schema describing this dataset's own column layout.
    pub fn schema(&self) -> Schema {
        Schema {
            outcome: self.outcome_name().to_string(),
            a1: ColumnSpec {
                column: self.a1().name.clone(),
                kind: self.a1().kind,
            },
            a2: ColumnSpec {
                column: self.a2().name.clone(),
                kind: self.a2().kind,
            },
            covariates: self.covariate_names().to_vec(),
            weight: self.weight_name().map(String::from),
        }
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        write_dataset(self, &mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}

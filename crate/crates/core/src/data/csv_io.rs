use std::collections::HashSet;
use std::fs;
use std::path::Path;

use ndarray::Array2;

use super::sidecar::{DeclaredKind, Sidecar};
use super::{
    kind_of, ColumnKind, DataError, ImputedDataset, IncompleteDataset, Mask, Result, Schema,
    DEFAULT_MAX_CATEGORICAL_CARD,
};

/// Options for [`read_csv`].
#[derive(Clone, Debug)]
pub struct CsvOptions {
    /// Field values treated as missing, compared after trimming.
    pub na_tokens: Vec<String>,
    pub max_categorical_card: usize,
    /// Declared column kinds overriding inference.
    pub sidecar: Option<Sidecar>,
    /// Reject columns with no observed value. The iterative engine cannot
    /// fit a model on an empty target, so this is on by default.
    pub reject_fully_missing: bool,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            na_tokens: vec![String::new(), "NA".into(), "nan".into()],
            max_categorical_card: DEFAULT_MAX_CATEGORICAL_CARD,
            sidecar: None,
            reject_fully_missing: true,
        }
    }
}

pub fn read_csv(path: impl AsRef<Path>, options: &CsvOptions) -> Result<IncompleteDataset> {
    let bytes = fs::read(path)?;
    read_csv_bytes(&bytes, options)
}

/// Parses a headed CSV document into an incomplete dataset.
pub fn read_csv_bytes(bytes: &[u8], options: &CsvOptions) -> Result<IncompleteDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let names: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    if names.is_empty() || (names.len() == 1 && names[0].is_empty()) {
        return Err(DataError::Invalid("missing header row".into()));
    }
    let mut seen = HashSet::new();
    for name in &names {
        if !seen.insert(name.as_str()) {
            return Err(DataError::DuplicateColumn(name.clone()));
        }
    }
    let d = names.len();

    // tokens[j][i] is the field of row i, column j; None for NA
    let mut tokens: Vec<Vec<Option<String>>> = vec![Vec::new(); d];
    let mut lines = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != d {
            return Err(DataError::RaggedRow {
                line,
                expected: d,
                found: record.len(),
            });
        }
        for (j, field) in record.iter().enumerate() {
            let is_na = options.na_tokens.iter().any(|t| t == field);
            tokens[j].push((!is_na).then(|| field.to_owned()));
        }
        lines.push(line);
    }
    let n = lines.len();
    if n == 0 {
        return Err(DataError::Invalid("no data rows".into()));
    }

    let mut values = Array2::from_elem((n, d), f64::NAN);
    let mut mask = Array2::from_elem((n, d), false);
    let mut kinds = Vec::with_capacity(d);
    let mut levels = Vec::with_capacity(d);
    for (j, column) in tokens.iter().enumerate() {
        if options.reject_fully_missing && column.iter().all(Option::is_none) {
            return Err(DataError::FullyMissingColumn(names[j].clone()));
        }
        let decl = options.sidecar.as_ref().and_then(|s| s.get(&names[j]));
        let (kind, col_levels, coded) = match decl.map(|c| &c.kind) {
            Some(DeclaredKind::Categorical) => {
                let declared = decl.and_then(|c| c.levels.clone());
                encode_tokens(&names[j], column, declared)?
            }
            Some(DeclaredKind::Continuous) => {
                let parsed = parse_numeric(&names[j], column, &lines)?;
                (ColumnKind::Continuous, None, parsed)
            }
            None => {
                let parsed = parse_numeric(&names[j], column, &lines)?;
                let observed: Vec<f64> = parsed.iter().flatten().copied().collect();
                match kind_of(&observed, options.max_categorical_card) {
                    ColumnKind::Continuous => (ColumnKind::Continuous, None, parsed),
                    ColumnKind::Categorical { .. } => encode_numeric(&parsed),
                }
            }
        };
        for (i, v) in coded.into_iter().enumerate() {
            if let Some(v) = v {
                values[[i, j]] = v;
                mask[[i, j]] = true;
            }
        }
        kinds.push(kind);
        levels.push(col_levels);
    }
    IncompleteDataset::new(
        values,
        Mask::new(mask),
        Schema {
            names,
            kinds,
            levels,
        },
    )
}

fn parse_numeric(column: &str, tokens: &[Option<String>], lines: &[usize]) -> Result<Vec<Option<f64>>> {
    tokens
        .iter()
        .zip(lines)
        .map(|(t, &line)| match t {
            None => Ok(None),
            Some(s) => match s.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(Some(v)),
                _ => Err(DataError::Unparseable {
                    line,
                    column: column.to_owned(),
                    field: s.clone(),
                }),
            },
        })
        .collect()
}

type Encoded = (ColumnKind, Option<Vec<String>>, Vec<Option<f64>>);

fn encode_numeric(parsed: &[Option<f64>]) -> Encoded {
    let mut distinct: Vec<f64> = parsed.iter().flatten().copied().collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let coded = parsed
        .iter()
        .map(|v| v.map(|v| (distinct.partition_point(|x| *x < v) + 1) as f64))
        .collect();
    let levels = distinct.iter().map(|v| format_value(*v)).collect();
    (
        ColumnKind::Categorical {
            cardinality: distinct.len(),
        },
        Some(levels),
        coded,
    )
}

/// Label-encodes string tokens. Without declared levels, the levels are the
/// distinct tokens in numeric order when all parse as numbers, otherwise in
/// lexicographic order.
fn encode_tokens(column: &str, tokens: &[Option<String>], declared: Option<Vec<String>>) -> Result<Encoded> {
    let levels = match declared {
        Some(levels) => levels,
        None => {
            let mut distinct: Vec<&String> = tokens.iter().flatten().collect();
            distinct.sort();
            distinct.dedup();
            let numeric: Option<Vec<f64>> = distinct.iter().map(|s| s.parse::<f64>().ok()).collect();
            match numeric {
                Some(mut nums) => {
                    let mut pairs: Vec<(f64, &String)> = nums.drain(..).zip(distinct).collect();
                    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
                    pairs.into_iter().map(|(_, s)| s.clone()).collect()
                }
                None => distinct.into_iter().cloned().collect(),
            }
        }
    };
    if levels.len() < 2 {
        return Err(DataError::Sidecar(format!(
            "categorical column '{column}' needs at least 2 levels, found {}",
            levels.len()
        )));
    }
    let coded = tokens
        .iter()
        .map(|t| match t {
            None => Ok(None),
            Some(s) => levels
                .iter()
                .position(|l| l == s)
                .map(|k| Some((k + 1) as f64))
                .ok_or_else(|| DataError::InvalidCategory {
                    column: column.to_owned(),
                    value: s.clone(),
                    cardinality: levels.len(),
                }),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((
        ColumnKind::Categorical {
            cardinality: levels.len(),
        },
        Some(levels),
        coded,
    ))
}

/// Formats a value with 12 significant digits, using the shortest
/// representation that parses back to the rounded value.
pub fn format_value(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let rounded: f64 = format!("{v:.11e}").parse().unwrap_or(v);
    let magnitude = rounded.abs();
    if (1e-5..1e15).contains(&magnitude) {
        format!("{rounded}")
    } else {
        format!("{rounded:e}")
    }
}

fn format_cell(schema: &Schema, col: usize, v: f64) -> String {
    match (&schema.kinds[col], &schema.levels[col]) {
        (ColumnKind::Categorical { .. }, Some(levels)) => {
            let code = v.round() as usize;
            levels
                .get(code.wrapping_sub(1))
                .cloned()
                .unwrap_or_else(|| format_value(v))
        }
        _ => format_value(v),
    }
}

fn to_string(writer: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = writer
        .into_inner()
        .map_err(|e| DataError::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| DataError::Invalid(e.to_string()))
}

/// Serializes an imputed dataset, decoding categorical codes to their levels.
pub fn write_csv_string(data: &ImputedDataset) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&data.schema().names)?;
    for row in data.values().rows() {
        w.write_record(
            row.iter()
                .enumerate()
                .map(|(j, &v)| format_cell(data.schema(), j, v)),
        )?;
    }
    to_string(w)
}

pub fn write_csv(data: &ImputedDataset, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, write_csv_string(data)?)?;
    Ok(())
}

/// Writes an incomplete dataset with empty fields at masked cells.
pub fn write_incomplete_csv(data: &IncompleteDataset, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(data.names())?;
    for i in 0..data.n_rows() {
        w.write_record((0..data.n_cols()).map(|j| match data.get(i, j) {
            Some(v) => format_cell(data.schema(), j, v),
            None => String::new(),
        }))?;
    }
    fs::write(path, to_string(w)?)?;
    Ok(())
}

pub fn write_mask_csv(mask: &Mask, names: &[String], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(names)?;
    for row in mask.bits().rows() {
        w.write_record(row.iter().map(|b| if *b { "1" } else { "0" }))?;
    }
    fs::write(path, to_string(w)?)?;
    Ok(())
}

pub fn read_mask_csv(path: impl AsRef<Path>) -> Result<(Vec<String>, Mask)> {
    read_mask_csv_str(&fs::read_to_string(path)?)
}

/// Parses a headed 0/1 mask table.
pub fn read_mask_csv_str(text: &str) -> Result<(Vec<String>, Mask)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let names: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    let d = names.len();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != d {
            return Err(DataError::RaggedRow {
                line,
                expected: d,
                found: record.len(),
            });
        }
        let row = record
            .iter()
            .zip(&names)
            .map(|(f, name)| match f {
                "0" => Ok(0u8),
                "1" => Ok(1u8),
                _ => Err(DataError::Unparseable {
                    line,
                    column: name.clone(),
                    field: f.to_owned(),
                }),
            })
            .collect::<Result<Vec<u8>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Ok((names, Mask::new(Array2::from_elem((0, d), true))));
    }
    Ok((names, Mask::from_rows(&rows)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::sidecar::ColumnDecl;
    use ndarray::array;

    #[test]
    fn reads_missing_cells() {
        let ds = read_csv_bytes(b"a,b\n1,\n2,3\n", &CsvOptions::default()).unwrap();
        assert_eq!((ds.n_rows(), ds.n_cols()), (2, 2));
        assert_eq!(ds.mask(), &Mask::from_rows(&[vec![1, 0], vec![1, 1]]).unwrap());
        assert_eq!(ds.names(), ["a", "b"]);
    }

    #[test]
    fn na_tokens_are_configurable() {
        let text = b"a,b\n1.5,NA\nnan,3.25\n?,1.0\n";
        assert!(read_csv_bytes(text, &CsvOptions::default()).is_err());
        let opts = CsvOptions {
            na_tokens: vec!["NA".into(), "nan".into(), "?".into()],
            ..CsvOptions::default()
        };
        let ds = read_csv_bytes(text, &opts).unwrap();
        assert_eq!(ds.mask().n_missing(), 3);
    }

    #[test]
    fn ragged_row_reports_line() {
        let err = read_csv_bytes(b"a,b\n1,2\n3\n", &CsvOptions::default()).unwrap_err();
        assert_eq!(err.to_string(), "ragged row at line 3: expected 2 fields, found 1");
    }

    #[test]
    fn rejects_bad_fields_and_headers() {
        let err = read_csv_bytes(b"a,b\n1,x\n", &CsvOptions::default()).unwrap_err();
        assert!(matches!(err, DataError::Unparseable { line: 2, .. }));
        let err = read_csv_bytes(b"a,a\n1,2\n", &CsvOptions::default()).unwrap_err();
        assert!(matches!(err, DataError::DuplicateColumn(_)));
        let err = read_csv_bytes(b"a,b\n1,\n2,\n", &CsvOptions::default()).unwrap_err();
        assert!(matches!(err, DataError::FullyMissingColumn(ref c) if c == "b"));
    }

    #[test]
    fn complete_round_trip() {
        let x = array![[1.25, -3.5, 1e-7], [0.1, 2.5e10, 7.0], [-0.333333333333, 4.0, 12.5]];
        let ds = crate::data::apply_mask(&x, &Mask::all_observed(3, 3), None).unwrap();
        let imputed = ImputedDataset::from_parts(&ds, x.clone()).unwrap();
        let text = write_csv_string(&imputed).unwrap();
        let back = read_csv_bytes(text.as_bytes(), &CsvOptions::default()).unwrap();
        assert_eq!(back.values(), x.view());
    }

    #[test]
    fn integer_categoricals_decode_to_original_tokens() {
        let text = b"g,v\n0,1.5\n5,2.5\n0,\n5,0.5\n";
        let ds = read_csv_bytes(text, &CsvOptions::default()).unwrap();
        assert_eq!(ds.kinds()[0], ColumnKind::Categorical { cardinality: 2 });
        assert_eq!(ds.get(1, 0), Some(2.0));
        let mut values = ds.values().to_owned();
        values[[2, 1]] = 9.0;
        let imputed = ImputedDataset::from_parts(&ds, values).unwrap();
        assert_eq!(write_csv_string(&imputed).unwrap(), "g,v\n0,1.5\n5,2.5\n0,9\n5,0.5\n");
    }

    #[test]
    fn sidecar_declares_string_categories() {
        let sidecar = Sidecar {
            columns: vec![ColumnDecl {
                name: "color".into(),
                kind: DeclaredKind::Categorical,
                levels: None,
            }],
        };
        let opts = CsvOptions {
            sidecar: Some(sidecar),
            ..CsvOptions::default()
        };
        let ds = read_csv_bytes(b"color,w\nred,1\nblue,2\n,3\nred,4\n", &opts).unwrap();
        assert_eq!(ds.kinds()[0], ColumnKind::Categorical { cardinality: 2 });
        assert_eq!(ds.schema().levels[0], Some(vec!["blue".to_string(), "red".to_string()]));
        assert_eq!(ds.get(0, 0), Some(2.0));
        assert_eq!(ds.get(2, 0), None);
    }

    #[test]
    fn format_keeps_twelve_digits() {
        assert_eq!(format_value(0.1), "0.1");
        assert_eq!(format_value(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_value(-2.0), "-2");
        assert_eq!(format_value(1e-300), "1e-300");
    }

    #[test]
    fn mask_table_round_trip() {
        let m = Mask::from_rows(&[vec![1, 0], vec![0, 1]]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mask.csv");
        write_mask_csv(&m, &["a".into(), "b".into()], &path).unwrap();
        let (names, back) = read_mask_csv(&path).unwrap();
        assert_eq!(names, ["a", "b"]);
        assert_eq!(back, m);
        assert!(read_mask_csv_str("a,b\n1,2\n").is_err());
    }
}

// SPDX-License-Identifier: MIT OR Apache-2.0

//! CSV ingestion and emission for series, plus JSON artifact helpers.

use crate::error::{Result, VarsegError};
use crate::model::TimeSeries;
use serde::Serialize;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

/// Preprocessing applied after parsing, in the order downsample,
/// difference, center.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IngestOptions {
    pub difference: bool,
    pub downsample: Option<usize>,
    pub center: bool,
}

pub fn ingest_csv(path: &Path, options: &IngestOptions) -> Result<TimeSeries> {
    let file = File::open(path)?;
    let series = parse_csv(file)?;
    preprocess(series, options)
}

pub fn preprocess(mut series: TimeSeries, options: &IngestOptions) -> Result<TimeSeries> {
    if let Some(k) = options.downsample {
        series = series.downsample(k)?;
    }
    if options.difference {
        series = series.difference()?;
    }
    if options.center {
        series = series.centered();
    }
    Ok(series)
}

/// Parses a `t,y1,...,yp` file or a headerless numeric grid.
///
/// A first row that does not parse as numbers is a header; when its first
/// cell is `t` that column is an index and is dropped.
pub fn parse_csv<R: Read>(reader: R) -> Result<TimeSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut skip_first_col = false;
    let mut width: Option<usize> = None;
    for (idx, record) in rdr.records().enumerate() {
        let record = record?;
        let line = idx + 1;
        if record.iter().all(str::is_empty) {
            continue;
        }
        if idx == 0 && record.iter().any(|c| c.parse::<f64>().is_err()) {
            skip_first_col = record.get(0).is_some_and(|c| c.eq_ignore_ascii_case("t"));
            width = Some(record.len());
            continue;
        }
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(VarsegError::Parse {
                row: line,
                column: record.len().min(expected) + 1,
                message: format!("expected {expected} columns, found {}", record.len()),
            });
        }
        let mut row = Vec::with_capacity(expected);
        for (col, cell) in record.iter().enumerate() {
            if skip_first_col && col == 0 {
                continue;
            }
            let value: f64 = cell.parse().map_err(|_| VarsegError::Parse {
                row: line,
                column: col + 1,
                message: format!("'{cell}' is not a number"),
            })?;
            if !value.is_finite() {
                return Err(VarsegError::Parse {
                    row: line,
                    column: col + 1,
                    message: format!("non-finite value '{cell}'"),
                });
            }
            row.push(value);
        }
        rows.push(row);
    }
    if rows.is_empty() || rows[0].is_empty() {
        return Err(VarsegError::Parse {
            row: 1,
            column: 1,
            message: "no numeric data".into(),
        });
    }
    TimeSeries::from_rows(&rows)
}

/// Writes `t,y1,...,yp` with 17 significant digits per value.
pub fn write_series_csv<W: Write>(series: &TimeSeries, writer: W) -> Result<()> {
    let mut w = BufWriter::new(writer);
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=series.dim()).map(|j| format!("y{j}")))
        .collect();
    writeln!(w, "{}", header.join(","))?;
    for (t, row) in series.rows().enumerate() {
        write!(w, "{}", t + 1)?;
        for v in row {
            write!(w, ",{v:.16e}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_series_file(series: &TimeSeries, path: &Path) -> Result<()> {
    write_series_csv(series, File::create(path)?)
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn headerless_grid() {
        let s = parse_csv("1,2\n3,4\n5,6\n".as_bytes()).unwrap();
        assert_eq!((s.len(), s.dim()), (3, 2));
        assert_eq!(s.values(), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn header_with_index_column() {
        let s = parse_csv("t,y1,y2\n1,0.5,-1\n2,1.5,2e-3\n".as_bytes()).unwrap();
        assert_eq!(s.values(), &[0.5, -1.0, 1.5, 2e-3]);
    }

    #[test]
    fn header_without_index_column() {
        let s = parse_csv("a,b\n1,2\n".as_bytes()).unwrap();
        assert_eq!(s.values(), &[1.0, 2.0]);
    }

    #[test]
    fn errors_name_row_and_column() {
        match parse_csv("1,2\n3\n".as_bytes()) {
            Err(VarsegError::Parse { row: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        match parse_csv("1,2\n3,x\n".as_bytes()) {
            Err(VarsegError::Parse { row: 2, column: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        match parse_csv("t,y1\n1,NaN\n".as_bytes()) {
            Err(VarsegError::Parse { row: 2, column: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        match parse_csv("1,inf\n".as_bytes()) {
            Err(VarsegError::Parse { row: 1, column: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn preprocessing_order() {
        let s = TimeSeries::new(10, 1, (1..=10).map(|v| f64::from(v * v)).collect()).unwrap();
        let opts = IngestOptions {
            difference: true,
            downsample: Some(2),
            center: false,
        };
        // Rows 1,3,5,7,9 squared = 1,9,25,49,81, then differenced.
        assert_eq!(preprocess(s, &opts).unwrap().values(), &[8.0, 16.0, 24.0, 32.0]);
    }

    #[test]
    fn written_file_has_expected_header() {
        let s = TimeSeries::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let mut buf = Vec::new();
        write_series_csv(&s, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,y1,y2\n1,1.0000000000000000e0,"));
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_bit_exact(
            rows in 1usize..20,
            cols in 1usize..5,
            seed in proptest::collection::vec(proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO, 100),
        ) {
            let values: Vec<f64> = (0..rows * cols).map(|i| seed[i % seed.len()]).collect();
            let s = TimeSeries::new(rows, cols, values).unwrap();
            let mut buf = Vec::new();
            write_series_csv(&s, &mut buf).unwrap();
            let back = parse_csv(buf.as_slice()).unwrap();
            prop_assert_eq!(back.len(), s.len());
            for (a, b) in back.values().iter().zip(s.values()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}

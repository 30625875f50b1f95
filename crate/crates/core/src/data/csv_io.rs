use std::io::{BufRead, BufReader, Read, Write};

use csv::{ReaderBuilder, Trim};

use super::{ClassAssignment, Dataset};
use crate::error::{Error, Result};

/// Reads a headed, comma-separated table of numeric attributes. The header
/// fixes the arity; every following row must have exactly that many cells.
pub fn load_dataset_csv<R: Read>(source: R) -> Result<Dataset> {
    let mut reader = ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(Trim::All)
        .from_reader(source);
    let mut rows = reader.records();

    let header = match rows.next() {
        Some(h) => h.map_err(|e| csv_error(0, e))?,
        None => {
            return Err(Error::Parse {
                row: 0,
                column: None,
                reason: "empty file: a header row is required".into(),
            })
        }
    };
    let arity = header.len();
    if arity == 0 || header.iter().all(str::is_empty) {
        return Err(Error::Parse {
            row: 0,
            column: None,
            reason: "header names no attribute columns".into(),
        });
    }

    let mut values = Vec::new();
    for (i, row) in rows.enumerate() {
        let row_no = i + 1;
        let row = row.map_err(|e| csv_error(row_no, e))?;
        if row.len() != arity {
            return Err(Error::Parse {
                row: row_no,
                column: Some(row.len().min(arity) + 1),
                reason: format!("expected {arity} cells, found {}", row.len()),
            });
        }
        for (j, cell) in row.iter().enumerate() {
            let v: f32 = cell.parse().map_err(|_| Error::Parse {
                row: row_no,
                column: Some(j + 1),
                reason: format!("not a number: {cell:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row: row_no,
                    column: Some(j + 1),
                    reason: format!("non-finite value: {cell:?}"),
                });
            }
            values.push(v);
        }
    }
    Dataset::new(arity, values)
}

fn csv_error(row: usize, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse {
            row,
            column: None,
            reason: format!("{other:?}"),
        },
    }
}

/// Writes `a0,...,a{A-1}` as header, then one row per record. `f32` values
/// are printed in their shortest exact round-trip form.
pub fn save_dataset_csv<W: Write>(d: &Dataset, mut sink: W) -> Result<()> {
    let header: Vec<String> = (0..d.arity()).map(|a| format!("a{a}")).collect();
    writeln!(sink, "{}", header.join(","))?;
    let mut line = String::new();
    for r in d.records() {
        line.clear();
        for (j, v) in r.iter().enumerate() {
            if j > 0 {
                line.push(',');
            }
            line.push_str(&v.to_string());
        }
        line.push('\n');
        sink.write_all(line.as_bytes())?;
    }
    sink.flush()?;
    Ok(())
}

/// One class id per line, newline-terminated. An empty assignment writes
/// nothing.
pub fn save_assignments<W: Write>(c: &ClassAssignment, mut sink: W) -> Result<()> {
    let mut buf = String::with_capacity(c.len() * 3);
    for v in c.as_slice() {
        buf.push_str(&v.to_string());
        buf.push('\n');
    }
    sink.write_all(buf.as_bytes())?;
    sink.flush()?;
    Ok(())
}

pub fn load_assignments<R: Read>(source: R) -> Result<ClassAssignment> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(source).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        out.push(line.parse().map_err(|_| Error::Parse {
            row: i + 1,
            column: None,
            reason: format!("not a class id: {line:?}"),
        })?);
    }
    Ok(ClassAssignment::from(out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_row() {
        let d = load_dataset_csv("x,y\n0.5,1.0\n".as_bytes()).unwrap();
        assert_eq!((d.arity(), d.len()), (2, 1));
        assert_eq!(d.record(0), &[0.5, 1.0]);
    }

    #[test]
    fn header_only_is_empty_dataset() {
        let d = load_dataset_csv("x,y\n".as_bytes()).unwrap();
        assert_eq!((d.arity(), d.len()), (2, 0));
    }

    #[test]
    fn short_row_reports_its_position() {
        let mut text = (0..19)
            .map(|i| format!("a{i}"))
            .collect::<Vec<_>>()
            .join(",");
        text.push('\n');
        let full = vec!["0.1"; 19].join(",");
        let short = vec!["0.1"; 18].join(",");
        text.push_str(&format!("{full}\n{full}\n{short}\n{full}\n"));
        match load_dataset_csv(text.as_bytes()) {
            Err(Error::Parse { row, column, .. }) => {
                assert_eq!(row, 3);
                assert_eq!(column, Some(19));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn bad_cells() {
        let err = load_dataset_csv("a,b\n1,zz\n".as_bytes()).unwrap_err();
        assert!(matches!(
            err,
            Error::Parse {
                row: 1,
                column: Some(2),
                ..
            }
        ));
        assert!(load_dataset_csv("a\nNaN\n".as_bytes()).is_err());
        assert!(load_dataset_csv("a\ninf\n".as_bytes()).is_err());
        assert!(matches!(
            load_dataset_csv("".as_bytes()),
            Err(Error::Parse { row: 0, .. })
        ));
    }

    #[test]
    fn uci_shaped_table() {
        let mut text = (0..19)
            .map(|i| format!("a{i}"))
            .collect::<Vec<_>>()
            .join(",");
        text.push('\n');
        for r in 0..2310 {
            let row: Vec<String> = (0..19).map(|c| format!("{}.25", r + c)).collect();
            text.push_str(&row.join(","));
            text.push('\n');
        }
        let d = load_dataset_csv(text.as_bytes()).unwrap();
        assert_eq!((d.arity(), d.len()), (19, 2310));
    }

    #[test]
    fn assignments_round_trip_and_empty() {
        let mut buf = Vec::new();
        save_assignments(&ClassAssignment::default(), &mut buf).unwrap();
        assert!(buf.is_empty());
        let c = ClassAssignment::from(vec![3, 0, 6, 6]);
        save_assignments(&c, &mut buf).unwrap();
        assert_eq!(buf, b"3\n0\n6\n6\n");
        assert_eq!(load_assignments(buf.as_slice()).unwrap(), c);
        assert!(load_assignments("1\nx\n".as_bytes()).is_err());
    }
}

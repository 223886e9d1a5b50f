//! Plain-text formats: dataset CSV, coefficient and curve tables.
//!
//! Floats are written in scientific form with 17 significant digits so
//! every value reads back bit for bit.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::samplers::Dataset;
use crate::{Error, Problem, Result};

/// `x` with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_dataset<W: Write>(mut w: W, d: &Dataset) -> Result<()> {
    writeln!(
        w,
        "# problem={} n={} seed={} stream={}",
        d.problem.tag(),
        d.n,
        d.seed,
        d.stream
    )?;
    match d.problem {
        Problem::R => {
            writeln!(w, "x,y")?;
            for (x, y) in d.xs.iter().zip(&d.values) {
                writeln!(w, "{},{}", fmt_f64(*x), fmt_f64(*y))?;
            }
        }
        Problem::D | Problem::S => {
            writeln!(w, "value")?;
            for v in &d.values {
                writeln!(w, "{}", fmt_f64(*v))?;
            }
        }
    }
    Ok(())
}

pub fn write_dataset_file(path: &Path, d: &Dataset) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_dataset(&mut w, d)?;
    w.flush()?;
    Ok(())
}

#[derive(Debug, Default)]
struct Meta {
    problem: Option<Problem>,
    seed: Option<u64>,
    stream: Option<u64>,
}

fn parse_meta(line: &str, line_no: usize, meta: &mut Meta) -> Result<()> {
    for field in line.trim_start_matches('#').split_whitespace() {
        let Some((key, value)) = field.split_once('=') else {
            continue;
        };
        let bad = |what: &str| Error::Parse {
            line: line_no,
            message: format!("invalid {what} '{value}'"),
        };
        match key {
            "problem" => meta.problem = Some(value.parse().map_err(|_| bad("problem"))?),
            "seed" => meta.seed = Some(value.parse().map_err(|_| bad("seed"))?),
            "stream" => meta.stream = Some(value.parse().map_err(|_| bad("stream"))?),
            _ => {}
        }
    }
    Ok(())
}

fn parse_number(field: &str, line_no: usize) -> Result<f64> {
    let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
        line: line_no,
        message: format!("'{}' is not a number", field.trim()),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line: line_no,
            message: format!("'{}' is not finite", field.trim()),
        });
    }
    Ok(v)
}

/// Parse a dataset. `problem` overrides the header tag; a conflicting tag
/// is an error.
pub fn read_dataset<R: BufRead>(r: R, problem: Option<Problem>) -> Result<Dataset> {
    let mut meta = Meta::default();
    let mut header_seen = false;
    let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if trimmed.starts_with('#') {
            parse_meta(trimmed, line_no, &mut meta)?;
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if !header_seen && rows.is_empty() && fields[0].trim().parse::<f64>().is_err() {
            header_seen = true;
            continue;
        }
        let values = fields
            .iter()
            .map(|f| parse_number(f, line_no))
            .collect::<Result<Vec<_>>>()?;
        rows.push((line_no, values));
    }

    let problem = match (problem, meta.problem) {
        (Some(p), Some(q)) if p != q => return Err(Error::ProblemMismatch { expected: p, found: q }),
        (Some(p), _) | (None, Some(p)) => p,
        (None, None) => {
            return Err(Error::Parse {
                line: 1,
                message: "no problem given on the command line or in the header".into(),
            })
        }
    };
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "no data rows".into(),
        });
    }

    let n = rows.len();
    let width = if problem == Problem::R { 2 } else { 1 };
    let mut values = Vec::with_capacity(n);
    for (i, (line_no, row)) in rows.iter().enumerate() {
        if row.len() != width {
            return Err(Error::Parse {
                line: *line_no,
                message: format!("expected {width} column(s), found {}", row.len()),
            });
        }
        let v = row[width - 1];
        match problem {
            Problem::R => {
                let want = (i + 1) as f64 / n as f64;
                if (row[0] - want).abs() > 1e-9 {
                    return Err(Error::Parse {
                        line: *line_no,
                        message: format!("design point {} differs from {}/{n}", row[0], i + 1),
                    });
                }
            }
            Problem::D if !(0.0..=1.0).contains(&v) => {
                return Err(Error::Parse {
                    line: *line_no,
                    message: format!("density observation {v} lies outside [0, 1]"),
                });
            }
            _ => {}
        }
        values.push(v);
    }
    let d = match problem {
        Problem::R => Dataset::regression(values)?,
        Problem::D => Dataset::density(values)?,
        Problem::S => Dataset::spectral(values)?,
    };
    Ok(d.with_seed(crate::samplers::SeedStream::new(
        meta.seed.unwrap_or(0),
        meta.stream.unwrap_or(0),
    )))
}

pub fn read_dataset_file(path: &Path, problem: Option<Problem>) -> Result<Dataset> {
    read_dataset(BufReader::new(File::open(path)?), problem)
}

/// Columns `j,c`, 1-based.
pub fn write_coefficients<W: Write>(mut w: W, coeffs: &[f64]) -> Result<()> {
    writeln!(w, "j,c")?;
    for (i, c) in coeffs.iter().enumerate() {
        writeln!(w, "{},{}", i + 1, fmt_f64(*c))?;
    }
    Ok(())
}

/// Columns `N,tau` plus `A,B` when the oracle curves are known.
pub fn write_curve<W: Write>(mut w: W, tau: &[f64], oracle: Option<(&[f64], &[f64])>) -> Result<()> {
    match oracle {
        None => {
            writeln!(w, "N,tau")?;
            for (i, t) in tau.iter().enumerate() {
                writeln!(w, "{},{}", i + 1, fmt_f64(*t))?;
            }
        }
        Some((a, b)) => {
            writeln!(w, "N,tau,A,B")?;
            for (i, t) in tau.iter().enumerate() {
                let get = |v: &[f64]| v.get(i).map_or(String::new(), |x| fmt_f64(*x));
                writeln!(w, "{},{},{},{}", i + 1, fmt_f64(*t), get(a), get(b))?;
            }
        }
    }
    Ok(())
}

/// Columns `x,f_hat`.
pub fn write_grid<W: Write>(mut w: W, xs: &[f64], values: &[f64]) -> Result<()> {
    writeln!(w, "x,f_hat")?;
    for (x, v) in xs.iter().zip(values) {
        writeln!(w, "{},{}", fmt_f64(*x), fmt_f64(*v))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::{gen_regression, NoiseSpec};
    use crate::targets::{make_w_target, Constraint};
    use proptest::prelude::*;

    fn roundtrip(d: &Dataset) -> Dataset {
        let mut buf = Vec::new();
        write_dataset(&mut buf, d).unwrap();
        read_dataset(&buf[..], None).unwrap()
    }

    #[test]
    fn regression_roundtrip() {
        let t = make_w_target(1.0, 0.0, 1.0, 64, Constraint::None).unwrap();
        let d = gen_regression(&t, 50, NoiseSpec::gaussian(1.0), crate::samplers::SeedStream::new(9, 3)).unwrap();
        let back = roundtrip(&d);
        assert_eq!(back.values, d.values);
        assert_eq!(back.xs, d.xs);
        assert_eq!((back.seed, back.stream), (9, 3));
    }

    proptest! {
        #[test]
        fn floats_roundtrip(v in prop::collection::vec(-1e300f64..1e300, 1..50)) {
            let d = Dataset::spectral(v.clone()).unwrap();
            prop_assert_eq!(roundtrip(&d).values, v);
        }
    }

    #[test]
    fn errors_name_the_line() {
        let text = "# problem=D n=3\nvalue\n0.1\n1.5\n0.2\n";
        match read_dataset(text.as_bytes(), None) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        match read_dataset("value\n0.1\nabc\n".as_bytes(), Some(Problem::S)) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        match read_dataset("x,y\n0.5,1\n0.9,2\n".as_bytes(), Some(Problem::R)) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            read_dataset("# problem=S\n1\n".as_bytes(), Some(Problem::D)),
            Err(Error::ProblemMismatch { .. })
        ));
        assert!(read_dataset("1\n2\n".as_bytes(), None).is_err());
        assert!(read_dataset("value\n".as_bytes(), Some(Problem::S)).is_err());
    }

    #[test]
    fn headerless_input() {
        let d = read_dataset("0.5\n-1\n2\n".as_bytes(), Some(Problem::S)).unwrap();
        assert_eq!(d.values, vec![0.5, -1.0, 2.0]);
    }

    #[test]
    fn tables() {
        let mut buf = Vec::new();
        write_curve(&mut buf, &[0.5, 0.25], Some((&[1.0, 2.0], &[3.0]))).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "N,tau,A,B");
        assert!(lines[2].ends_with(','));
        let mut buf = Vec::new();
        write_coefficients(&mut buf, &[1.0]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "j,c\n1,1.0000000000000000e0\n");
    }
}

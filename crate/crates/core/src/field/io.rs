//! Text and PGM serialization of grid functions.
//!
//! Text format: line 1 is `nx ny hx hy`; then `nx·ny` whitespace-separated
//! values in row-major order (one lattice row per line when written).
//! Nodes outside the mask are written as `nan` and read back as outside the
//! domain. Floats are written in shortest round-trip form, so a text file
//! reproduces the grid function bit for bit.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use super::{make_grid, Domain, Grid, GridFunction};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldFormat {
    Text,
    /// Binary 16-bit PGM, linearly rescaled. Lossy; for viewing only.
    Pgm,
}

pub fn write_text<W: Write>(u: &GridFunction, mut w: W) -> Result<()> {
    let g = u.grid();
    writeln!(w, "{} {} {} {}", g.nx(), g.ny(), g.hx(), g.hy())?;
    for j in 0..g.ny() {
        let row: Vec<String> = (0..g.nx())
            .map(|i| {
                let k = g.index(i, j);
                if g.mask()[k] {
                    format!("{}", u.values()[k])
                } else {
                    "nan".to_string()
                }
            })
            .collect();
        writeln!(w, "{}", row.join(" "))?;
    }
    Ok(())
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Standard domains tried when recognizing an imported mask.
fn candidate_domains() -> Vec<Domain> {
    let mut v = vec![Domain::Interval, Domain::Square, Domain::Disk];
    v.extend((3..=12).map(|sides| Domain::RegularPolygon { sides }));
    v
}

pub fn read_text<R: Read>(r: R) -> Result<GridFunction> {
    let reader = BufReader::new(r);
    let mut lines = reader.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty file, expected header 'nx ny hx hy'"))?;
    let header = header?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 4 {
        return Err(parse_err(
            1,
            format!(
                "header needs 4 fields 'nx ny hx hy', found {}",
                fields.len()
            ),
        ));
    }
    let nx: usize = fields[0]
        .parse()
        .map_err(|e| parse_err(1, format!("nx '{}': {e}", fields[0])))?;
    let ny: usize = fields[1]
        .parse()
        .map_err(|e| parse_err(1, format!("ny '{}': {e}", fields[1])))?;
    let hx: f64 = fields[2]
        .parse()
        .map_err(|e| parse_err(1, format!("hx '{}': {e}", fields[2])))?;
    let hy: f64 = fields[3]
        .parse()
        .map_err(|e| parse_err(1, format!("hy '{}': {e}", fields[3])))?;
    let expected = nx
        .checked_mul(ny)
        .ok_or_else(|| parse_err(1, "grid size overflows"))?;

    let mut values = Vec::with_capacity(expected);
    let mut mask = Vec::with_capacity(expected);
    let mut last_line = 1;
    for (idx, line) in lines {
        let line = line?;
        last_line = idx + 1;
        for tok in line.split_whitespace() {
            if values.len() == expected {
                return Err(parse_err(
                    last_line,
                    format!("more than the expected {expected} values"),
                ));
            }
            let v: f64 = tok
                .parse()
                .map_err(|e| parse_err(last_line, format!("value '{tok}': {e}")))?;
            if v.is_nan() {
                mask.push(false);
                values.push(0.0);
            } else if v.is_finite() {
                mask.push(true);
                values.push(v);
            } else {
                return Err(parse_err(last_line, format!("non-finite value '{tok}'")));
            }
        }
    }
    if values.len() != expected {
        return Err(parse_err(
            last_line,
            format!("expected {expected} values, found {}", values.len()),
        ));
    }
    let grid =
        Grid::new(nx, ny, hx, hy, mask, Domain::Masked).map_err(|e| parse_err(1, e.to_string()))?;
    let grid = candidate_domains()
        .into_iter()
        .filter_map(|d| make_grid(d, nx).ok())
        .find(|g| *g == grid)
        .unwrap_or(grid);
    GridFunction::from_values(&Arc::new(grid), values)
        .map_err(|e| parse_err(last_line, e.to_string()))
}

pub fn write_pgm<W: Write>(u: &GridFunction, mut w: W) -> Result<()> {
    let g = u.grid();
    let inside = || (0..g.len()).filter(|&k| g.mask()[k]).map(|k| u.values()[k]);
    let lo = inside().fold(f64::INFINITY, f64::min);
    let hi = inside().fold(f64::NEG_INFINITY, f64::max);
    write!(w, "P5\n{} {}\n65535\n", g.nx(), g.ny())?;
    // Top row of the image is the largest y.
    for j in (0..g.ny()).rev() {
        for i in 0..g.nx() {
            let k = g.index(i, j);
            let level: u16 = if !g.mask()[k] {
                0
            } else if hi > lo {
                (((u.values()[k] - lo) / (hi - lo)) * 65535.0).round() as u16
            } else {
                32768
            };
            w.write_all(&level.to_be_bytes())?;
        }
    }
    Ok(())
}

pub fn export_field(u: &GridFunction, path: impl AsRef<Path>, format: FieldFormat) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    match format {
        FieldFormat::Text => write_text(u, &mut w)?,
        FieldFormat::Pgm => write_pgm(u, &mut w)?,
    }
    w.flush()?;
    Ok(())
}

pub fn import_field(path: impl AsRef<Path>) -> Result<GridFunction> {
    read_text(File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::random_field;

    #[test]
    fn text_round_trip_is_bit_exact() {
        for d in [
            Domain::Interval,
            Domain::Square,
            Domain::Disk,
            Domain::Annulus { inner: 0.35 },
        ] {
            let g = Arc::new(make_grid(d, 17).unwrap());
            let u = random_field(&g, 8, 1).scaled(-1.0 / 3.0);
            let mut buf = Vec::new();
            write_text(&u, &mut buf).unwrap();
            let back = read_text(buf.as_slice()).unwrap();
            assert_eq!(back, u);
            let bits: Vec<u64> = back.values().iter().map(|v| v.to_bits()).collect();
            let orig: Vec<u64> = u.values().iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits, orig);
        }
    }

    #[test]
    fn standard_domains_are_recognized() {
        let g = Arc::new(make_grid(Domain::Disk, 21).unwrap());
        let mut buf = Vec::new();
        write_text(&GridFunction::zeros(&g), &mut buf).unwrap();
        assert_eq!(
            read_text(buf.as_slice()).unwrap().grid().domain(),
            Domain::Disk
        );
    }

    #[test]
    fn nan_marks_outside_nodes() {
        let u = read_text("3 1 1.0 1.0\n0 nan 0\n".as_bytes()).unwrap();
        assert_eq!(u.grid().mask(), &[true, false, true]);
        assert_eq!(u.grid().nx(), 3);
        assert!(u.grid().is_1d());

        let g = Arc::new(make_grid(Domain::Disk, 9).unwrap());
        let mut buf = Vec::new();
        write_text(&GridFunction::zeros(&g), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let toks: Vec<&str> = text
            .lines()
            .skip(1)
            .flat_map(|l| l.split_whitespace())
            .collect();
        for (k, t) in toks.iter().enumerate() {
            assert_eq!(*t == "nan", !g.mask()[k]);
        }
    }

    #[test]
    fn truncated_file_names_expected_count() {
        let err = read_text("2 2 1 1\n0 0 0\n".as_bytes()).unwrap_err();
        match err {
            Error::Parse { line, message } => {
                assert_eq!(line, 2);
                assert!(message.contains("expected 4"), "{message}");
            }
            e => panic!("unexpected {e}"),
        }
        assert!(matches!(
            read_text("2 2 1\n".as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            read_text("1 3 1 1\n0\nx\n0\n".as_bytes()),
            Err(Error::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn pgm_of_zero_is_uniform_gray() {
        let g = Arc::new(make_grid(Domain::Square, 5).unwrap());
        let mut buf = Vec::new();
        write_pgm(&GridFunction::zeros(&g), &mut buf).unwrap();
        let header = b"P5\n5 5\n65535\n";
        assert_eq!(&buf[..header.len()], header);
        let body = &buf[header.len()..];
        assert_eq!(body.len(), 50);
        assert!(body
            .chunks(2)
            .all(|c| u16::from_be_bytes([c[0], c[1]]) == 32768));
    }
}

//! Plain-text field dumps.
//!
//! Format: one ASCII header `field <scalar|vector> n=<n> L=<L>` followed by
//! row-major lines of decimal values (pairs for vector fields), all printed
//! to 15 significant digits. Reading a dump and writing it again reproduces
//! the bytes exactly.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::field::{GridSpec, ScalarField, VectorField};
use crate::mat2::Vec2;

/// 15-significant-digit decimal rendering used by every dump and CSV row.
pub fn format_sig15(x: f64) -> String {
    format!("{x:.14e}")
}

pub fn write_scalar(field: &ScalarField, out: &mut impl Write) -> Result<()> {
    let n = field.grid().n();
    writeln!(
        out,
        "field scalar n={} L={}",
        n,
        format_sig15(field.grid().halfwidth())
    )?;
    for j in 0..n {
        let row: Vec<String> = (0..n).map(|i| format_sig15(field.value(i, j))).collect();
        writeln!(out, "{}", row.join(" "))?;
    }
    Ok(())
}

pub fn write_vector(field: &VectorField, out: &mut impl Write) -> Result<()> {
    let n = field.grid().n();
    writeln!(
        out,
        "field vector n={} L={}",
        n,
        format_sig15(field.grid().halfwidth())
    )?;
    for j in 0..=n {
        let row: Vec<String> = (0..=n)
            .map(|i| {
                let v = field.vertex(i, j);
                format!("{} {}", format_sig15(v.x), format_sig15(v.y))
            })
            .collect();
        writeln!(out, "{}", row.join(" "))?;
    }
    Ok(())
}

fn parse_header(line: &str) -> Result<(String, usize, f64)> {
    let parts: Vec<&str> = line.split_whitespace().collect();
    if parts.len() != 4 || parts[0] != "field" {
        return Err(Error::Parse(format!("bad dump header: {line:?}")));
    }
    let kind = parts[1].to_string();
    let n = parts[2]
        .strip_prefix("n=")
        .ok_or_else(|| Error::Parse(format!("bad n field: {}", parts[2])))?
        .parse::<usize>()
        .map_err(|e| Error::Parse(format!("bad n value: {e}")))?;
    let l = parts[3]
        .strip_prefix("L=")
        .ok_or_else(|| Error::Parse(format!("bad L field: {}", parts[3])))?
        .parse::<f64>()
        .map_err(|e| Error::Parse(format!("bad L value: {e}")))?;
    Ok((kind, n, l))
}

/// Either kind of dumped field.
pub enum Dump {
    Scalar(ScalarField),
    Vector(VectorField),
}

pub fn read_dump(input: &mut impl BufRead) -> Result<Dump> {
    let mut header = String::new();
    if input.read_line(&mut header)? == 0 {
        return Err(Error::Parse("empty dump".into()));
    }
    let (kind, n, l) = parse_header(header.trim_end())?;
    let grid = GridSpec::new(n, l)?;
    match kind.as_str() {
        "scalar" => {
            let mut values = Vec::with_capacity(n * n);
            for _ in 0..n {
                let mut line = String::new();
                if input.read_line(&mut line)? == 0 {
                    return Err(Error::Parse("scalar dump truncated".into()));
                }
                for tok in line.split_whitespace() {
                    values.push(
                        tok.parse::<f64>()
                            .map_err(|e| Error::Parse(format!("bad value {tok:?}: {e}")))?,
                    );
                }
            }
            Ok(Dump::Scalar(ScalarField::from_values(grid, values)?))
        }
        "vector" => {
            let mut values = Vec::with_capacity((n + 1) * (n + 1));
            for _ in 0..=n {
                let mut line = String::new();
                if input.read_line(&mut line)? == 0 {
                    return Err(Error::Parse("vector dump truncated".into()));
                }
                let toks: Vec<&str> = line.split_whitespace().collect();
                if toks.len() != 2 * (n + 1) {
                    return Err(Error::Parse(format!(
                        "vector row has {} entries, expected {}",
                        toks.len(),
                        2 * (n + 1)
                    )));
                }
                for pair in toks.chunks(2) {
                    let x = pair[0]
                        .parse::<f64>()
                        .map_err(|e| Error::Parse(format!("bad value: {e}")))?;
                    let y = pair[1]
                        .parse::<f64>()
                        .map_err(|e| Error::Parse(format!("bad value: {e}")))?;
                    values.push(Vec2::new(x, y));
                }
            }
            Ok(Dump::Vector(VectorField::from_values(grid, values)?))
        }
        other => Err(Error::Parse(format!("unknown field kind {other:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::BufReader;

    #[test]
    fn scalar_round_trip_is_byte_exact() {
        let grid = GridSpec::new(16, 1.5).unwrap();
        let field = ScalarField::from_signed_distance(grid, |p| 0.7 - p.norm());
        let mut bytes = Vec::new();
        write_scalar(&field, &mut bytes).unwrap();
        let reread = match read_dump(&mut BufReader::new(bytes.as_slice())).unwrap() {
            Dump::Scalar(f) => f,
            _ => panic!("expected scalar"),
        };
        let mut bytes2 = Vec::new();
        write_scalar(&reread, &mut bytes2).unwrap();
        assert_eq!(bytes, bytes2);
    }

    #[test]
    fn vector_round_trip_is_byte_exact() {
        let grid = GridSpec::new(12, 2.0).unwrap();
        let field = VectorField::from_map(grid, |p| {
            Vec2::new(p.x + 0.1 * (p.y * 3.0).sin(), p.y - 0.2 * (p.x).cos())
        });
        let mut bytes = Vec::new();
        write_vector(&field, &mut bytes).unwrap();
        let reread = match read_dump(&mut BufReader::new(bytes.as_slice())).unwrap() {
            Dump::Vector(f) => f,
            _ => panic!("expected vector"),
        };
        let mut bytes2 = Vec::new();
        write_vector(&reread, &mut bytes2).unwrap();
        assert_eq!(bytes, bytes2);
    }

    #[test]
    fn rejects_malformed_dumps() {
        let mut r = BufReader::new("not a dump\n".as_bytes());
        assert!(read_dump(&mut r).is_err());
        let mut r = BufReader::new("field scalar n=16 L=1.0\n1.0 2.0\n".as_bytes());
        assert!(read_dump(&mut r).is_err());
    }
}

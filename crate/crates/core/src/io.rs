//! Plain-text formats shared by the matrix-like types.

use std::fmt::Write;

use crate::error::{Error, Result};

/// Fixed 17-significant-digit rendering so that values round-trip exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Row-major matrix as CSV with a `n=<n>` header line.
pub fn matrix_to_csv(n: usize, values: &[f64]) -> String {
    let mut out = format!("n={n}\n");
    for row in values.chunks(n) {
        let line: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
        writeln!(out, "{}", line.join(",")).unwrap();
    }
    out
}

/// Parses a square matrix. The `n=<n>` header is optional; without it the
/// size is taken from the first row.
pub fn matrix_from_csv(text: &str) -> Result<(usize, Vec<f64>)> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty()).peekable();
    let first = *lines
        .peek()
        .ok_or_else(|| Error::Parse("empty matrix file".into()))?;
    let n: usize = match first.strip_prefix("n=") {
        Some(rest) => {
            lines.next();
            rest.trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad header '{first}', expected 'n=<n>'")))?
        }
        None => first.split(',').count(),
    };
    if n == 0 {
        return Err(Error::Parse("matrix size must be positive".into()));
    }
    let mut values = Vec::with_capacity(n * n);
    let mut rows = 0;
    for (r, line) in lines.enumerate() {
        let row: Vec<f64> = line
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("row {r}: '{s}': {e}")))
            })
            .collect::<Result<_>>()?;
        if row.len() != n {
            return Err(Error::Parse(format!(
                "row {r} has {} entries, expected {n}",
                row.len()
            )));
        }
        values.extend(row);
        rows += 1;
    }
    if rows != n {
        return Err(Error::Parse(format!("found {rows} rows, expected {n}")));
    }
    Ok((n, values))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formatting_round_trips() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 0.0, std::f64::consts::PI] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn malformed_matrices() {
        assert!(matrix_from_csv("").is_err());
        assert!(matrix_from_csv("n=2\n1,2\n").is_err());
        assert!(matrix_from_csv("n=2\n1,2\n3\n").is_err());
        assert!(matrix_from_csv("size=1\n1\n").is_err());
        assert!(matrix_from_csv("n=1\nx\n").is_err());
        assert!(matrix_from_csv("n=x\n1\n").is_err());
        assert_eq!(matrix_from_csv("n=1\n0.5\n").unwrap(), (1, vec![0.5]));
        assert_eq!(matrix_from_csv("1,0\n0,1\n").unwrap(), (2, vec![1.0, 0.0, 0.0, 1.0]));
        assert!(matrix_from_csv("1,0\n0\n").is_err());
    }
}

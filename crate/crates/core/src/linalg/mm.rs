use std::fmt::Write as _;
use std::path::Path;

use super::{C64, CMat, CscMatrix, Matrix};
use crate::error::{Error, Result};

/// Reads a Matrix Market file: coordinate storage yields a sparse matrix,
/// array storage a dense one.
pub fn mm_read(path: impl AsRef<Path>) -> Result<Matrix> {
    let text = std::fs::read_to_string(path)?;
    mm_read_str(&text)
}

pub fn mm_write(path: impl AsRef<Path>, m: &Matrix) -> Result<()> {
    std::fs::write(path, mm_write_string(m))?;
    Ok(())
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

pub fn mm_read_str(text: &str) -> Result<Matrix> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (hline, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let tokens: Vec<String> = header.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(parse_err(hline, "missing %%MatrixMarket matrix header"));
    }
    let coordinate = match tokens[2].as_str() {
        "coordinate" => true,
        "array" => false,
        other => return Err(Error::UnsupportedFormat(format!("storage '{other}'"))),
    };
    let complex = match tokens[3].as_str() {
        "real" | "integer" | "double" => false,
        "complex" => true,
        other => return Err(Error::UnsupportedFormat(format!("field '{other}'"))),
    };
    if tokens[4] != "general" {
        return Err(Error::UnsupportedFormat(format!("symmetry '{}'", tokens[4])));
    }
    let mut data = lines.filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });
    let (sline, size) = data.next().ok_or_else(|| parse_err(hline + 1, "missing size line"))?;
    let dims = parse_usizes(size, sline)?;
    let per = if complex { 2 } else { 1 };
    let value = |fields: &[&str], line: usize| -> Result<C64> {
        let re = parse_f64(fields[0], line)?;
        let im = if complex { parse_f64(fields[1], line)? } else { 0.0 };
        Ok(C64::new(re, im))
    };
    if coordinate {
        if dims.len() != 3 {
            return Err(parse_err(sline, "coordinate size line needs rows, cols, entries"));
        }
        let (rows, cols, nnz) = (dims[0], dims[1], dims[2]);
        let mut trip = Vec::with_capacity(nnz);
        let mut seen = std::collections::HashSet::with_capacity(nnz);
        for _ in 0..nnz {
            let (ln, l) = data.next().ok_or_else(|| parse_err(sline, format!("expected {nnz} entries")))?;
            let f: Vec<&str> = l.split_whitespace().collect();
            if f.len() != 2 + per {
                return Err(parse_err(ln, format!("expected {} fields", 2 + per)));
            }
            let i: usize = f[0].parse().map_err(|_| parse_err(ln, "bad row index"))?;
            let j: usize = f[1].parse().map_err(|_| parse_err(ln, "bad column index"))?;
            if i == 0 || j == 0 || i > rows || j > cols {
                return Err(parse_err(ln, format!("index ({i}, {j}) out of range")));
            }
            if !seen.insert((i, j)) {
                return Err(parse_err(ln, format!("duplicate entry ({i}, {j})")));
            }
            let v = value(&f[2..], ln)?;
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(parse_err(ln, "non-finite value"));
            }
            trip.push((i - 1, j - 1, v));
        }
        if let Some((ln, _)) = data.next() {
            return Err(parse_err(ln, "trailing data after the declared entries"));
        }
        Ok(Matrix::Sparse(CscMatrix::from_triplets(rows, cols, &trip)?))
    } else {
        if dims.len() != 2 {
            return Err(parse_err(sline, "array size line needs rows and cols"));
        }
        let (rows, cols) = (dims[0], dims[1]);
        let mut m = CMat::zeros(rows, cols);
        for k in 0..rows * cols {
            let (ln, l) = data.next().ok_or_else(|| parse_err(sline, format!("expected {} values", rows * cols)))?;
            let f: Vec<&str> = l.split_whitespace().collect();
            if f.len() != per {
                return Err(parse_err(ln, format!("expected {per} fields")));
            }
            let v = value(&f, ln)?;
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(parse_err(ln, "non-finite value"));
            }
            m[(k % rows, k / rows)] = v;
        }
        if let Some((ln, _)) = data.next() {
            return Err(parse_err(ln, "trailing data after the declared values"));
        }
        Ok(Matrix::Dense(m))
    }
}

fn parse_usizes(line: &str, ln: usize) -> Result<Vec<usize>> {
    line.split_whitespace().map(|t| t.parse().map_err(|_| parse_err(ln, format!("bad size field '{t}'")))).collect()
}

fn parse_f64(t: &str, ln: usize) -> Result<f64> {
    t.parse().map_err(|_| parse_err(ln, format!("bad number '{t}'")))
}

/// Serializes with shortest round-trip formatting, so exact values survive.
pub fn mm_write_string(m: &Matrix) -> String {
    let complex = match m {
        Matrix::Dense(d) => d.iter().any(|z| z.im != 0.0),
        Matrix::Sparse(s) => s.values().iter().any(|z| z.im != 0.0),
    };
    let field = if complex { "complex" } else { "real" };
    let fmt = |z: C64| if complex { format!("{:e} {:e}", z.re, z.im) } else { format!("{:e}", z.re) };
    let mut out = String::new();
    match m {
        Matrix::Sparse(s) => {
            let _ = writeln!(out, "%%MatrixMarket matrix coordinate {field} general");
            let _ = writeln!(out, "{} {} {}", s.nrows(), s.ncols(), s.nnz());
            for (i, j, v) in s.triplets() {
                let _ = writeln!(out, "{} {} {}", i + 1, j + 1, fmt(v));
            }
        }
        Matrix::Dense(d) => {
            let _ = writeln!(out, "%%MatrixMarket matrix array {field} general");
            let _ = writeln!(out, "{} {}", d.nrows(), d.ncols());
            for j in 0..d.ncols() {
                for i in 0..d.nrows() {
                    let _ = writeln!(out, "{}", fmt(d[(i, j)]));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_coordinate() {
        let m = mm_read_str("%%MatrixMarket matrix coordinate real general\n% c\n2 2 2\n1 1 1\n2 2 1\n").unwrap();
        match m {
            Matrix::Sparse(s) => {
                assert_eq!(s.nnz(), 2);
                assert_eq!(s.get(1, 1), C64::new(1.0, 0.0));
            }
            _ => panic!("expected sparse"),
        }
    }

    #[test]
    fn complex_array() {
        let m = mm_read_str("%%MatrixMarket matrix array complex general\n1 1\n1 2\n").unwrap();
        assert_eq!(m.to_dense()[(0, 0)], C64::new(1.0, 2.0));
        assert!(!m.is_sparse());
    }

    #[test]
    fn rejects_pattern_and_skew() {
        let p = mm_read_str("%%MatrixMarket matrix coordinate pattern general\n1 1 1\n1 1\n");
        assert!(matches!(p, Err(Error::UnsupportedFormat(_))));
        let s = mm_read_str("%%MatrixMarket matrix coordinate real skew-symmetric\n1 1 0\n");
        assert!(matches!(s, Err(Error::UnsupportedFormat(_))));
    }

    #[test]
    fn parse_error_carries_line() {
        let e = mm_read_str("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1\n2 x 1\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 4, .. }));
    }

    #[test]
    fn awkward_values_roundtrip() {
        let vals = [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE];
        let mut d = CMat::zeros(5, 1);
        for (i, v) in vals.iter().enumerate() {
            d[(i, 0)] = C64::new(*v, -*v * 0.7);
        }
        let back = mm_read_str(&mm_write_string(&Matrix::Dense(d.clone()))).unwrap();
        assert_eq!(back, Matrix::Dense(d));
    }
}

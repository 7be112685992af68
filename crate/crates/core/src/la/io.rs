//! MatrixMarket coordinate format (`real general`, 1-based indices).

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::la::CsrMatrix;

pub const MM_HEADER: &str = "%%MatrixMarket matrix coordinate real general";

pub fn write_matrix_market<W: Write>(m: &CsrMatrix, mut out: W) -> Result<()> {
    writeln!(out, "{MM_HEADER}")?;
    writeln!(out, "{} {} {}", m.n_rows(), m.n_cols(), m.nnz())?;
    for r in 0..m.n_rows() {
        for (c, v) in m.row(r) {
            // {:e} with full precision round-trips f64 exactly.
            writeln!(out, "{} {} {:.17e}", r + 1, c + 1, v)?;
        }
    }
    Ok(())
}

pub fn read_matrix_market<R: BufRead>(input: R) -> Result<CsrMatrix> {
    let mut lines = input.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "empty input".into(),
    })?;
    let header = header?;
    if !header.trim().eq_ignore_ascii_case(MM_HEADER) {
        return Err(Error::Parse {
            line: 1,
            msg: format!("unsupported header `{header}`"),
        });
    }
    let mut size: Option<(usize, usize, usize)> = None;
    let mut triplets = Vec::new();
    for (i, line) in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let lineno = i + 1;
        let fields: Vec<&str> = t.split_whitespace().collect();
        let bad = |msg: &str| Error::Parse {
            line: lineno,
            msg: msg.to_string(),
        };
        match size {
            None => {
                if fields.len() != 3 {
                    return Err(bad("expected `rows cols nnz`"));
                }
                let p = |s: &str| s.parse::<usize>().map_err(|_| bad("bad size"));
                size = Some((p(fields[0])?, p(fields[1])?, p(fields[2])?));
            }
            Some((nr, nc, _)) => {
                if fields.len() != 3 {
                    return Err(bad("expected `i j value`"));
                }
                let r: usize = fields[0].parse().map_err(|_| bad("bad row index"))?;
                let c: usize = fields[1].parse().map_err(|_| bad("bad column index"))?;
                let v: f64 = fields[2].parse().map_err(|_| bad("bad value"))?;
                if r == 0 || c == 0 || r > nr || c > nc {
                    return Err(bad("index out of range"));
                }
                triplets.push((r - 1, c - 1, v));
            }
        }
    }
    let (nr, nc, nnz) = size.ok_or(Error::Parse {
        line: 2,
        msg: "missing size line".into(),
    })?;
    if triplets.len() != nnz {
        return Err(Error::Parse {
            line: 0,
            msg: format!("expected {nnz} entries, found {}", triplets.len()),
        });
    }
    Ok(CsrMatrix::from_triplets(nr, nc, &triplets))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let m = CsrMatrix::from_triplets(2, 3, &[(0, 0, 0.1), (1, 2, -1.0 / 3.0), (0, 2, 1e-300)]);
        let mut buf = Vec::new();
        write_matrix_market(&m, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(MM_HEADER));
        let back = read_matrix_market(&buf[..]).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn rejects_bad_header() {
        assert!(
            read_matrix_market("%%MatrixMarket matrix array real general\n".as_bytes()).is_err()
        );
    }
}

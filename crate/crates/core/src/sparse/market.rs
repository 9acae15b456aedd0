use std::io::{BufRead, Write};

use super::{SparseMatrix, TripletBuilder};
use crate::error::{Error, Result};

/// Writes `a` in Matrix Market coordinate real general format (1-based).
pub fn write_matrix_market<W: Write>(a: &SparseMatrix, mut w: W) -> std::io::Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", a.nrows(), a.ncols(), a.nnz())?;
    for (i, j, v) in a.triplets() {
        writeln!(w, "{} {} {:e}", i + 1, j + 1, v)?;
    }
    Ok(())
}

/// Reads the coordinate real general format written by [`write_matrix_market`].
pub fn read_matrix_market<R: BufRead>(r: R) -> Result<SparseMatrix> {
    let bad = |line: usize, tok: &str| Error::Syntax {
        line,
        token: tok.to_string(),
        reason: "malformed Matrix Market data".into(),
    };
    let mut builder: Option<TripletBuilder> = None;
    for (idx, line) in r.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| bad(line_no, &e.to_string()))?;
        let l = line.trim();
        if l.is_empty() || l.starts_with('%') {
            continue;
        }
        let toks: Vec<&str> = l.split_whitespace().collect();
        match &mut builder {
            None => {
                let dims: Vec<usize> = toks
                    .iter()
                    .map(|t| t.parse().map_err(|_| bad(line_no, t)))
                    .collect::<Result<_>>()?;
                if dims.len() != 3 {
                    return Err(bad(line_no, l));
                }
                builder = Some(TripletBuilder::with_capacity(dims[0], dims[1], dims[2]));
            }
            Some(b) => {
                if toks.len() != 3 {
                    return Err(bad(line_no, l));
                }
                let i: usize = toks[0].parse().map_err(|_| bad(line_no, toks[0]))?;
                let j: usize = toks[1].parse().map_err(|_| bad(line_no, toks[1]))?;
                let v: f64 = toks[2].parse().map_err(|_| bad(line_no, toks[2]))?;
                if i == 0 || j == 0 || i > b.dims().0 || j > b.dims().1 {
                    return Err(bad(line_no, l));
                }
                b.push(i - 1, j - 1, v);
            }
        }
    }
    builder.map(TripletBuilder::build).ok_or_else(|| bad(0, "missing size line"))
}

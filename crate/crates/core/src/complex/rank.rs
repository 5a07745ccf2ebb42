//! Exact integer matrix rank via fraction-free (Bareiss) elimination.
//!
//! Incidence matrices are eliminated in integer arithmetic so Betti numbers
//! come out exact rather than depending on a floating-point rank threshold.
//! Columns or rows with a single nonzero are peeled off first; each such
//! pivot contributes one to the rank and leaves the complementary submatrix
//! untouched, which strips tree-like structure cheaply before elimination.

use crate::error::{GvfError, Result};

/// Rank of a sparse integer matrix given as `(row, col, value)` triplets.
pub fn integer_rank(nrows: usize, ncols: usize, triplets: &[(usize, usize, i64)]) -> Result<usize> {
    if nrows == 0 || ncols == 0 {
        return Ok(0);
    }
    let mut dense = vec![0i128; nrows * ncols];
    for &(r, c, v) in triplets {
        debug_assert!(r < nrows && c < ncols);
        dense[r * ncols + c] += v as i128;
    }
    let mut active_rows: Vec<usize> = (0..nrows).collect();
    let mut active_cols: Vec<usize> = (0..ncols).collect();
    let mut rank = 0usize;

    // Peeling phase: any row or column holding exactly one nonzero can be
    // pivoted on without touching the rest of the matrix.
    loop {
        let mut row_nnz = vec![0usize; active_rows.len()];
        let mut col_nnz = vec![0usize; active_cols.len()];
        for (ri, &r) in active_rows.iter().enumerate() {
            for (ci, &c) in active_cols.iter().enumerate() {
                if dense[r * ncols + c] != 0 {
                    row_nnz[ri] += 1;
                    col_nnz[ci] += 1;
                }
            }
        }
        let mut pivot: Option<(usize, usize)> = None;
        'scan: for (ri, &r) in active_rows.iter().enumerate() {
            if row_nnz[ri] == 1 {
                for &c in &active_cols {
                    if dense[r * ncols + c] != 0 {
                        pivot = Some((r, c));
                        break 'scan;
                    }
                }
            }
        }
        if pivot.is_none() {
            'scan2: for (ci, &c) in active_cols.iter().enumerate() {
                if col_nnz[ci] == 1 {
                    for &r in &active_rows {
                        if dense[r * ncols + c] != 0 {
                            pivot = Some((r, c));
                            break 'scan2;
                        }
                    }
                }
            }
        }
        match pivot {
            Some((r, c)) => {
                rank += 1;
                active_rows.retain(|&x| x != r);
                active_cols.retain(|&x| x != c);
                if active_rows.is_empty() || active_cols.is_empty() {
                    return Ok(rank);
                }
            }
            None => break,
        }
    }

    // Bareiss elimination on the remaining dense core. `prev` is the previous
    // pivot; every division below is exact.
    let rows = active_rows;
    let cols = active_cols;
    let mut m: Vec<Vec<i128>> = rows
        .iter()
        .map(|&r| cols.iter().map(|&c| dense[r * ncols + c]).collect())
        .collect();
    let (nr, nc) = (m.len(), m[0].len());
    let mut prev: i128 = 1;
    let mut pr = 0usize;
    for pc in 0..nc {
        if pr == nr {
            break;
        }
        // Smallest-magnitude pivot in the column block keeps entry growth down.
        let mut best: Option<(usize, usize)> = None;
        for j in pc..nc {
            for i in pr..nr {
                let v = m[i][j].unsigned_abs();
                if v != 0 && best.map_or(true, |(bi, bj)| v < m[bi][bj].unsigned_abs()) {
                    best = Some((i, j));
                }
            }
            if best.is_some() {
                break; // stay on the leftmost nonzero column
            }
        }
        let Some((bi, bj)) = best else { break };
        m.swap(pr, bi);
        if bj != pc {
            for row in m.iter_mut() {
                row.swap(pc, bj);
            }
        }
        let piv = m[pr][pc];
        for i in (pr + 1)..nr {
            for j in (pc + 1)..nc {
                let a = piv.checked_mul(m[i][j]).ok_or(GvfError::RankOverflow)?;
                let b = m[i][pc]
                    .checked_mul(m[pr][j])
                    .ok_or(GvfError::RankOverflow)?;
                let num = a.checked_sub(b).ok_or(GvfError::RankOverflow)?;
                m[i][j] = num / prev;
            }
            m[i][pc] = 0;
        }
        prev = piv;
        pr += 1;
    }
    Ok(rank + pr)
}

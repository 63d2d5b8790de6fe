//! Sparse LU factorization with Markowitz pivot selection and threshold
//! partial pivoting, used for simplex basis matrices.

const DROP_TOL: f64 = 1e-14;
const THRESHOLD: f64 = 0.1;
const SEARCH_COLS: usize = 4;

#[derive(Debug, Clone)]
pub struct Singular {
    /// Basis positions (columns) that could not be pivoted.
    pub cols: Vec<usize>,
    /// Rows left without a pivot, same length as `cols`.
    pub rows: Vec<usize>,
}

/// `P B Q = L U` stored as elimination steps.
#[derive(Debug, Clone, Default)]
pub struct LuFactor {
    m: usize,
    piv_row: Vec<usize>,
    piv_col: Vec<usize>,
    piv_val: Vec<f64>,
    l_start: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    u_start: Vec<usize>,
    u_idx: Vec<usize>,
    u_val: Vec<f64>,
}

struct Buckets {
    lists: Vec<Vec<usize>>,
}

impl Buckets {
    fn new(max: usize) -> Self {
        Self {
            lists: vec![Vec::new(); max + 2],
        }
    }

    fn push(&mut self, count: usize, item: usize) {
        let c = count.min(self.lists.len() - 1);
        self.lists[c].push(item);
    }
}

impl LuFactor {
    /// Factor the square matrix given by sparse columns. On structural or
    /// numerical singularity the unpivoted columns and rows are returned so
    /// the caller can patch the basis.
    pub fn factor(m: usize, cols_in: &[Vec<(usize, f64)>], abs_tol: f64) -> Result<LuFactor, Singular> {
        assert_eq!(cols_in.len(), m);
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
        let mut cols: Vec<Vec<usize>> = vec![Vec::new(); m];
        for (j, col) in cols_in.iter().enumerate() {
            for &(i, v) in col {
                if v.abs() > DROP_TOL {
                    rows[i].push((j, v));
                    cols[j].push(i);
                }
            }
        }
        let mut row_active = vec![true; m];
        let mut col_active = vec![true; m];
        let max_cnt = m.max(1);
        let mut cb = Buckets::new(max_cnt);
        let mut rb = Buckets::new(max_cnt);
        for j in 0..m {
            cb.push(cols[j].len(), j);
        }
        for i in 0..m {
            rb.push(rows[i].len(), i);
        }

        let mut f = LuFactor {
            m,
            l_start: vec![0],
            u_start: vec![0],
            ..Default::default()
        };
        let mut bad_cols = Vec::new();
        // scatter map: column -> position in the row being updated
        let mut pos = vec![usize::MAX; m];
        let mut pivoted = 0usize;

        let col_val = |rows: &Vec<Vec<(usize, f64)>>, i: usize, j: usize| -> f64 {
            rows[i].iter().find(|e| e.0 == j).map(|e| e.1).unwrap_or(0.0)
        };

        while pivoted + bad_cols.len() < m {
            // pick pivot
            let mut choice: Option<(usize, usize)> = None;

            // empty active columns are singular
            while let Some(&j) = cb.lists[0].last() {
                cb.lists[0].pop();
                if col_active[j] && cols[j].is_empty() {
                    col_active[j] = false;
                    bad_cols.push(j);
                }
            }
            if pivoted + bad_cols.len() >= m {
                break;
            }

            // column singletons
            while let Some(&j) = cb.lists[1].last() {
                if !col_active[j] || cols[j].len() != 1 {
                    cb.lists[1].pop();
                    continue;
                }
                let i = cols[j][0];
                if col_val(&rows, i, j).abs() > abs_tol {
                    choice = Some((i, j));
                } else {
                    cb.lists[1].pop();
                    // numerically empty column
                    rows[i].retain(|e| e.0 != j);
                    cols[j].clear();
                    rb.push(rows[i].len(), i);
                    cb.push(0, j);
                }
                break;
            }

            // row singletons
            if choice.is_none() {
                let mut k = 0;
                while k < rb.lists[1].len() {
                    let i = rb.lists[1][k];
                    if !row_active[i] || rows[i].len() != 1 {
                        rb.lists[1].swap_remove(k);
                        continue;
                    }
                    let (j, v) = rows[i][0];
                    let cmax = cols[j]
                        .iter()
                        .map(|&r| col_val(&rows, r, j).abs())
                        .fold(0.0, f64::max);
                    if v.abs() > abs_tol && v.abs() >= THRESHOLD * cmax {
                        choice = Some((i, j));
                        break;
                    }
                    k += 1;
                }
            }

            // general Markowitz search over the sparsest columns
            if choice.is_none() {
                let mut best: Option<(usize, usize, usize)> = None;
                let mut examined = 0;
                'outer: for cnt in 2..cb.lists.len() {
                    let mut k = 0;
                    while k < cb.lists[cnt].len() {
                        let j = cb.lists[cnt][k];
                        let c = cols[j].len();
                        if !col_active[j] || c != cnt {
                            cb.lists[cnt].swap_remove(k);
                            continue;
                        }
                        let vals: Vec<(usize, f64)> =
                            cols[j].iter().map(|&r| (r, col_val(&rows, r, j))).collect();
                        let cmax = vals.iter().fold(0.0f64, |a, e| a.max(e.1.abs()));
                        for &(r, v) in &vals {
                            if v.abs() > abs_tol && v.abs() >= THRESHOLD * cmax {
                                let cost = (rows[r].len() - 1) * (c - 1);
                                if best.is_none_or(|b| cost < b.2) {
                                    best = Some((r, j, cost));
                                }
                            }
                        }
                        examined += 1;
                        if examined >= SEARCH_COLS && best.is_some() {
                            break 'outer;
                        }
                        k += 1;
                    }
                    if let Some(b) = best {
                        if b.2 <= (cnt - 1) * (cnt - 1) {
                            break;
                        }
                    }
                }
                choice = best.map(|b| (b.0, b.1));
            }

            let Some((r, c)) = choice else {
                // everything left is numerically zero
                for j in 0..m {
                    if col_active[j] {
                        col_active[j] = false;
                        bad_cols.push(j);
                    }
                }
                break;
            };

            // eliminate
            let pivot_row = std::mem::take(&mut rows[r]);
            let piv = pivot_row.iter().find(|e| e.0 == c).unwrap().1;
            row_active[r] = false;
            col_active[c] = false;
            for &(j, _) in &pivot_row {
                if let Some(p) = cols[j].iter().position(|&x| x == r) {
                    cols[j].swap_remove(p);
                }
            }
            let others = std::mem::take(&mut cols[c]);
            for &i in &others {
                let row = &mut rows[i];
                let pc = row.iter().position(|e| e.0 == c).unwrap();
                let mult = row[pc].1 / piv;
                row.swap_remove(pc);
                f.l_idx.push(i);
                f.l_val.push(mult);
                for (p, e) in row.iter().enumerate() {
                    pos[e.0] = p;
                }
                for &(j, v) in &pivot_row {
                    if j == c {
                        continue;
                    }
                    let p = pos[j];
                    if p != usize::MAX && p < row.len() && row[p].0 == j {
                        row[p].1 -= mult * v;
                    } else {
                        row.push((j, -mult * v));
                        cols[j].push(i);
                    }
                }
                for e in row.iter() {
                    pos[e.0] = usize::MAX;
                }
                // drop cancellations
                let mut q = 0;
                while q < row.len() {
                    if row[q].1.abs() <= DROP_TOL {
                        let j = row[q].0;
                        row.swap_remove(q);
                        if let Some(p) = cols[j].iter().position(|&x| x == i) {
                            cols[j].swap_remove(p);
                        }
                    } else {
                        q += 1;
                    }
                }
                rb.push(row.len(), i);
            }
            for &(j, _) in &pivot_row {
                if j != c && col_active[j] {
                    cb.push(cols[j].len(), j);
                }
            }
            f.l_start.push(f.l_idx.len());
            for &(j, v) in &pivot_row {
                if j != c {
                    f.u_idx.push(j);
                    f.u_val.push(v);
                }
            }
            f.u_start.push(f.u_idx.len());
            f.piv_row.push(r);
            f.piv_col.push(c);
            f.piv_val.push(piv);
            pivoted += 1;
        }

        if bad_cols.is_empty() {
            Ok(f)
        } else {
            let bad_rows: Vec<usize> = (0..m).filter(|&i| row_active[i]).collect();
            bad_cols.truncate(bad_rows.len());
            Err(Singular {
                cols: bad_cols,
                rows: bad_rows,
            })
        }
    }

    /// Solve `B x = b` in place: `b` is indexed by row on entry and by basis
    /// position on exit.
    pub fn ftran(&self, b: &mut [f64], work: &mut Vec<f64>) {
        for s in 0..self.piv_row.len() {
            let br = b[self.piv_row[s]];
            if br != 0.0 {
                for p in self.l_start[s]..self.l_start[s + 1] {
                    b[self.l_idx[p]] -= self.l_val[p] * br;
                }
            }
        }
        work.clear();
        work.resize(self.m, 0.0);
        for s in (0..self.piv_row.len()).rev() {
            let mut v = b[self.piv_row[s]];
            for p in self.u_start[s]..self.u_start[s + 1] {
                v -= self.u_val[p] * work[self.u_idx[p]];
            }
            work[self.piv_col[s]] = v / self.piv_val[s];
        }
        b.copy_from_slice(work);
    }

    /// Solve `B^T y = c` in place: `c` is indexed by basis position on entry
    /// and by row on exit.
    pub fn btran(&self, c: &mut [f64], work: &mut Vec<f64>) {
        work.clear();
        work.resize(self.m, 0.0);
        for s in 0..self.piv_row.len() {
            let z = c[self.piv_col[s]] / self.piv_val[s];
            work[self.piv_row[s]] = z;
            if z != 0.0 {
                for p in self.u_start[s]..self.u_start[s + 1] {
                    c[self.u_idx[p]] -= self.u_val[p] * z;
                }
            }
        }
        for s in (0..self.piv_row.len()).rev() {
            let mut z = work[self.piv_row[s]];
            for p in self.l_start[s]..self.l_start[s + 1] {
                z -= self.l_val[p] * work[self.l_idx[p]];
            }
            work[self.piv_row[s]] = z;
        }
        c.copy_from_slice(work);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense_mul(cols: &[Vec<(usize, f64)>], x: &[f64], m: usize) -> Vec<f64> {
        let mut out = vec![0.0; m];
        for (j, col) in cols.iter().enumerate() {
            for &(i, v) in col {
                out[i] += v * x[j];
            }
        }
        out
    }

    fn random_matrix(rng: &mut ChaCha8Rng, m: usize) -> Vec<Vec<(usize, f64)>> {
        // diagonal plus random sparse entries: nonsingular with high probability
        (0..m)
            .map(|j| {
                let mut col = vec![((j * 7 + 3) % m, rng.gen_range(1.0..3.0))];
                for _ in 0..2 {
                    let i = rng.gen_range(0..m);
                    if col.iter().all(|e| e.0 != i) {
                        col.push((i, rng.gen_range(-1.0..1.0)));
                    }
                }
                col
            })
            .collect()
    }

    #[test]
    fn solves_match_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for m in [1, 2, 5, 20, 80] {
            for _ in 0..10 {
                let cols = random_matrix(&mut rng, m);
                let Ok(lu) = LuFactor::factor(m, &cols, 1e-11) else { continue };
                let x: Vec<f64> = (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let mut b = dense_mul(&cols, &x, m);
                let mut w = Vec::new();
                lu.ftran(&mut b, &mut w);
                for j in 0..m {
                    assert!((b[j] - x[j]).abs() < 1e-8, "ftran m={m}");
                }
                // B^T y = c  <=>  for every column j: col_j . y = c_j
                let y: Vec<f64> = (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let mut c: Vec<f64> = cols.iter().map(|col| col.iter().map(|&(i, v)| v * y[i]).sum()).collect();
                lu.btran(&mut c, &mut w);
                for i in 0..m {
                    assert!((c[i] - y[i]).abs() < 1e-8, "btran m={m}");
                }
            }
        }
    }

    #[test]
    fn reports_singular_columns() {
        let cols = vec![vec![(0, 1.0), (1, 1.0)], vec![(0, 2.0), (1, 2.0)], vec![(2, 1.0)]];
        let err = LuFactor::factor(3, &cols, 1e-11).unwrap_err();
        assert_eq!(err.cols.len(), 1);
        assert_eq!(err.rows.len(), 1);
    }
}

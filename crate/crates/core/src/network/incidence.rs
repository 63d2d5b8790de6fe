use super::Network;

/// One column of the node-link incidence matrix: `(row, value)` pairs.
pub type SparseCol = Vec<(usize, f64)>;

/// `A` (origins x links, destination row removed), `A+` and the capacity
/// diagonal of `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceMatrices {
    pub rows: usize,
    pub a: Vec<SparseCol>,
    pub a_plus: Vec<SparseCol>,
    pub mu: Vec<f64>,
}

pub fn build_incidence(network: &Network) -> IncidenceMatrices {
    let mut a = Vec::with_capacity(network.n_links());
    let mut a_plus = Vec::with_capacity(network.n_links());
    for link in &network.links {
        let mut col = Vec::with_capacity(2);
        let mut pos = Vec::with_capacity(1);
        if network.is_origin(link.tail) {
            col.push((link.tail, 1.0));
            pos.push((link.tail, 1.0));
        }
        if network.is_origin(link.head) {
            col.push((link.head, -1.0));
        }
        a.push(col);
        a_plus.push(pos);
    }
    IncidenceMatrices {
        rows: network.n_origins(),
        a,
        a_plus,
        mu: network.capacities(),
    }
}

impl IncidenceMatrices {
    pub fn cols(&self) -> usize {
        self.a.len()
    }

    /// `A x` for a link vector `x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        for (col, &v) in self.a.iter().zip(x) {
            for &(r, a) in col {
                out[r] += a * v;
            }
        }
        out
    }

    /// `A^T p` for an origin vector `p`.
    pub fn apply_transpose(&self, p: &[f64]) -> Vec<f64> {
        self.a
            .iter()
            .map(|col| col.iter().map(|&(r, a)| a * p[r]).sum())
            .collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        dense(&self.a, self.rows)
    }

    pub fn plus_to_dense(&self) -> Vec<Vec<f64>> {
        dense(&self.a_plus, self.rows)
    }
}

fn dense(cols: &[SparseCol], rows: usize) -> Vec<Vec<f64>> {
    let mut m = vec![vec![0.0; cols.len()]; rows];
    for (j, col) in cols.iter().enumerate() {
        for &(r, v) in col {
            m[r][j] = v;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    #[test]
    fn single_link() {
        let n = Network::from_parts("one", 2, &[(1, 1, 2, 50.0, 0.0)], &BTreeMap::from([(1, 600.0)])).unwrap();
        let inc = build_incidence(&n);
        assert_eq!(inc.to_dense(), vec![vec![1.0]]);
        assert_eq!(inc.plus_to_dense(), vec![vec![1.0]]);
        assert_eq!(inc.mu, vec![50.0]);
    }

    #[test]
    fn transpose_is_adjoint() {
        let links = [(1, 1, 2, 1.0, 1.0), (2, 1, 3, 1.0, 1.0), (3, 2, 3, 1.0, 1.0), (4, 2, 4, 1.0, 1.0), (5, 3, 4, 1.0, 1.0)];
        let n = Network::from_parts("b", 4, &links, &BTreeMap::from([(1, 1.0)])).unwrap();
        let inc = build_incidence(&n);
        let x = [1.0, -2.0, 0.5, 3.0, 4.0];
        let p = [0.3, -1.0, 2.0];
        let lhs: f64 = inc.apply(&x).iter().zip(&p).map(|(a, b)| a * b).sum();
        let rhs: f64 = inc.apply_transpose(&p).iter().zip(&x).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }
}

//! Symmetric positive-definite solves in envelope (skyline) storage with a
//! reverse Cuthill-McKee ordering.
//!
//! Collocation Hessian models couple only neighbouring nodes, so after
//! reordering the profile stays within a narrow band and the factorization
//! costs `O(n b²)`.

/// Reverse Cuthill-McKee ordering of the graph in which two variables are
/// adjacent when they appear together in some row (clique). Returns
/// `perm` with `perm[new] = old`.
pub fn reverse_cuthill_mckee(n: usize, cliques: &[Vec<usize>]) -> Vec<usize> {
    let mut var_rows: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut degree = vec![0usize; n];
    for (r, clique) in cliques.iter().enumerate() {
        for &v in clique {
            var_rows[v].push(r);
            degree[v] += clique.len().saturating_sub(1);
        }
    }

    let mut visited = vec![false; n];
    let mut row_seen = vec![false; cliques.len()];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&v| (degree[v], v));

    for &start in &by_degree {
        if visited[start] {
            continue;
        }
        visited[start] = true;
        let mut head = order.len();
        order.push(start);
        while head < order.len() {
            let v = order[head];
            head += 1;
            let mut next = Vec::new();
            for &r in &var_rows[v] {
                if row_seen[r] {
                    continue;
                }
                row_seen[r] = true;
                for &w in &cliques[r] {
                    if !visited[w] {
                        visited[w] = true;
                        next.push(w);
                    }
                }
            }
            next.sort_by_key(|&w| (degree[w], w));
            order.extend(next);
        }
    }
    order.reverse();
    order
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NotPositiveDefinite {
    pub pivot: usize,
}

/// Lower-triangular envelope storage: row `i` holds columns
/// `first[i]..=i` contiguously.
#[derive(Debug, Clone)]
pub struct EnvelopeMatrix {
    first: Vec<usize>,
    start: Vec<usize>,
    data: Vec<f64>,
}

impl EnvelopeMatrix {
    /// Allocates a zero matrix whose envelope covers every `(i, j)` with
    /// `j ≥ first[i]`.
    pub fn with_envelope(first: Vec<usize>) -> Self {
        let mut start = Vec::with_capacity(first.len() + 1);
        let mut acc = 0usize;
        for (i, &f) in first.iter().enumerate() {
            assert!(f <= i);
            start.push(acc);
            acc += i - f + 1;
        }
        start.push(acc);
        Self {
            first,
            start,
            data: vec![0.0; acc],
        }
    }

    pub fn dim(&self) -> usize {
        self.first.len()
    }

    pub fn storage(&self) -> usize {
        self.data.len()
    }

    /// Adds `v` to entry `(i, j)` (and implicitly `(j, i)`).
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        debug_assert!(j >= self.first[i], "entry ({i}, {j}) outside envelope");
        self.data[self.start[i] + j - self.first[i]] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if j < self.first[i] {
            0.0
        } else {
            self.data[self.start[i] + j - self.first[i]]
        }
    }

    /// In-place Cholesky factorization `A = L Lᵀ`.
    pub fn factorize(mut self) -> Result<EnvelopeCholesky, NotPositiveDefinite> {
        let n = self.dim();
        for i in 0..n {
            let fi = self.first[i];
            let si = self.start[i];
            for j in fi..i {
                let fj = self.first[j];
                let sj = self.start[j];
                let k0 = fi.max(fj);
                let row_i = &self.data[si + k0 - fi..si + j - fi];
                let row_j = &self.data[sj + k0 - fj..sj + j - fj];
                let dot: f64 = row_i.iter().zip(row_j).map(|(a, b)| a * b).sum();
                let diag_j = self.data[sj + j - fj];
                let idx = si + j - fi;
                self.data[idx] = (self.data[idx] - dot) / diag_j;
            }
            let row = &self.data[si..si + i - fi];
            let sq: f64 = row.iter().map(|a| a * a).sum();
            let d = self.data[si + i - fi] - sq;
            if !(d > 0.0) || !d.is_finite() {
                return Err(NotPositiveDefinite { pivot: i });
            }
            self.data[si + i - fi] = d.sqrt();
        }
        Ok(EnvelopeCholesky { l: self })
    }
}

#[derive(Debug, Clone)]
pub struct EnvelopeCholesky {
    l: EnvelopeMatrix,
}

impl EnvelopeCholesky {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let l = &self.l;
        let n = l.dim();
        assert_eq!(b.len(), n);
        let mut y = b.to_vec();
        for i in 0..n {
            let fi = l.first[i];
            let si = l.start[i];
            let row = &l.data[si..si + i - fi];
            let dot: f64 = row.iter().zip(&y[fi..i]).map(|(a, b)| a * b).sum();
            y[i] = (y[i] - dot) / l.data[si + i - fi];
        }
        for i in (0..n).rev() {
            let fi = l.first[i];
            let si = l.start[i];
            y[i] /= l.data[si + i - fi];
            let xi = y[i];
            for (k, a) in (fi..i).zip(&l.data[si..si + i - fi]) {
                y[k] -= a * xi;
            }
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    fn tridiagonal(n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                4.0 + i as f64 * 0.1
            } else if i.abs_diff(j) == 1 {
                -1.0
            } else if i.abs_diff(j) == 3 {
                0.5
            } else {
                0.0
            }
        })
    }

    fn envelope_of(a: &DMatrix<f64>) -> EnvelopeMatrix {
        let n = a.nrows();
        let first: Vec<usize> = (0..n)
            .map(|i| (0..=i).find(|&j| a[(i, j)] != 0.0).unwrap())
            .collect();
        let mut e = EnvelopeMatrix::with_envelope(first);
        for i in 0..n {
            for j in 0..=i {
                if a[(i, j)] != 0.0 {
                    e.add(i, j, a[(i, j)]);
                }
            }
        }
        e
    }

    #[test]
    fn solve_matches_dense() {
        let a = tridiagonal(12);
        let b = DVector::from_fn(12, |i, _| (i as f64).sin());
        let chol = envelope_of(&a).factorize().unwrap();
        let x = DVector::from_vec(chol.solve(b.as_slice()));
        assert!((&a * &x - &b).norm() < 1e-12);
    }

    #[test]
    fn indefinite_is_rejected() {
        let mut a = tridiagonal(5);
        a[(3, 3)] = -2.0;
        assert!(envelope_of(&a).factorize().is_err());
    }

    #[test]
    fn rcm_narrows_a_shuffled_chain() {
        // chain 0-5-2-7-1-6-3-4 expressed as 2-cliques
        let chain = [0usize, 5, 2, 7, 1, 6, 3, 4];
        let cliques: Vec<Vec<usize>> = chain.windows(2).map(|w| w.to_vec()).collect();
        let perm = reverse_cuthill_mckee(8, &cliques);
        let mut inv = [0; 8];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let bandwidth = cliques
            .iter()
            .map(|c| inv[c[0]].abs_diff(inv[c[1]]))
            .max()
            .unwrap();
        assert_eq!(bandwidth, 1);
        let mut sorted = perm.clone();
        sorted.sort();
        assert_eq!(sorted, (0..8).collect::<Vec<_>>());
    }
}

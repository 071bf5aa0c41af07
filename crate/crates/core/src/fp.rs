//! Dense-column linear algebra over 𝔽_p for cochain spaces.
//!
//! Cocycle conditions arrive as a long stream of sparse constraint rows over
//! a moderately large variable space. The solver keeps a basis of the current
//! solution space as columns and cuts it down one rank per effective
//! constraint, which beats row echelon when rows are sparse and the final
//! kernel is what's wanted. Coboundary images use a plain row echelon.

/// p < 256; entries live in [0, p).
#[derive(Debug, Clone)]
pub struct KernelSolver {
    p: u16,
    vars: usize,
    /// columns spanning the current candidate kernel
    cols: Vec<Vec<u8>>,
}

impl KernelSolver {
    pub fn new(p: u64, vars: usize) -> Self {
        let mut cols = Vec::with_capacity(vars);
        for i in 0..vars {
            let mut c = vec![0u8; vars];
            c[i] = 1;
            cols.push(c);
        }
        KernelSolver {
            p: p as u16,
            vars,
            cols,
        }
    }

    /// Imposes Σ row[i].1 · x[row[i].0] = 0.
    pub fn add_constraint(&mut self, row: &[(usize, u8)]) {
        let p = self.p;
        // w = row · cols
        let mut w: Vec<u8> = Vec::with_capacity(self.cols.len());
        for col in &self.cols {
            let mut acc: u32 = 0;
            for &(i, v) in row {
                acc += v as u32 * col[i] as u32;
            }
            w.push((acc % p as u32) as u8);
        }
        let Some(pivot) = w.iter().position(|&x| x != 0) else {
            return;
        };
        let wp_inv = inv_mod(w[pivot] as u16, p);
        let pivot_col = self.cols[pivot].clone();
        for (j, &wj) in w.iter().enumerate() {
            if j == pivot || wj == 0 {
                continue;
            }
            // col_j -= (w_j / w_pivot)·col_pivot
            let f = (wj as u16 * wp_inv % p) as u32;
            let neg = (p as u32 - f) % p as u32;
            let col = &mut self.cols[j];
            for (cj, &cp) in col.iter_mut().zip(pivot_col.iter()) {
                *cj = ((*cj as u32 + neg * cp as u32) % p as u32) as u8;
            }
        }
        self.cols.swap_remove(pivot);
    }

    pub fn nullity(&self) -> usize {
        self.cols.len()
    }

    pub fn rank(&self) -> usize {
        self.vars - self.cols.len()
    }

    /// Kernel basis, deterministic for a fixed constraint order.
    pub fn into_basis(self) -> Vec<Vec<u8>> {
        self.cols
    }
}

/// Row echelon over 𝔽_p with membership queries.
#[derive(Debug, Clone)]
pub struct Echelon {
    p: u16,
    pub rows: Vec<Vec<u8>>,
    pivots: Vec<usize>,
}

impl Echelon {
    pub fn new(p: u64) -> Self {
        Echelon {
            p: p as u16,
            rows: Vec::new(),
            pivots: Vec::new(),
        }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Reduces v against the basis in place; returns the pivot position if a
    /// nonzero residual remains.
    pub fn reduce(&self, v: &mut [u8]) -> Option<usize> {
        let p = self.p as u32;
        for (row, &piv) in self.rows.iter().zip(self.pivots.iter()) {
            if v[piv] == 0 {
                continue;
            }
            let f = v[piv] as u16 * inv_mod(row[piv] as u16, self.p) % self.p;
            let neg = (p - f as u32) % p;
            for (vi, ri) in v.iter_mut().zip(row.iter()) {
                *vi = ((*vi as u32 + neg * *ri as u32) % p) as u8;
            }
        }
        v.iter().position(|&x| x != 0)
    }

    /// Inserts v; true when the rank grew.
    pub fn insert(&mut self, mut v: Vec<u8>) -> bool {
        match self.reduce(&mut v) {
            None => false,
            Some(piv) => {
                self.rows.push(v);
                self.pivots.push(piv);
                // keep rows sorted by pivot for reproducibility
                let mut idx: Vec<usize> = (0..self.rows.len()).collect();
                idx.sort_by_key(|&i| self.pivots[i]);
                let rows = idx.iter().map(|&i| self.rows[i].clone()).collect();
                let pivots = idx.iter().map(|&i| self.pivots[i]).collect();
                self.rows = rows;
                self.pivots = pivots;
                true
            }
        }
    }

    pub fn contains(&self, v: &[u8]) -> bool {
        let mut w = v.to_vec();
        self.reduce(&mut w).is_none()
    }
}

pub fn inv_mod(x: u16, p: u16) -> u16 {
    // p is prime and small
    let mut acc = 1u32;
    let mut base = x as u32 % p as u32;
    let mut e = p as u32 - 2;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * base % p as u32;
        }
        base = base * base % p as u32;
        e >>= 1;
    }
    acc as u16
}

/// n×n matrix product over 𝔽_p on flattened u8 slices.
pub fn matmul(p: u64, n: usize, a: &[u8], b: &[u8]) -> Vec<u8> {
    let p = p as u32;
    let mut out = vec![0u8; n * n];
    for i in 0..n {
        for k in 0..n {
            let v = a[i * n + k] as u32;
            if v == 0 {
                continue;
            }
            for j in 0..n {
                let idx = i * n + j;
                out[idx] = ((out[idx] as u32 + v * b[k * n + j] as u32) % p) as u8;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_of_simple_system() {
        // over F_3: x0 + x1 = 0, x1 + x2 = 0 on 3 vars → kernel dim 1
        let mut s = KernelSolver::new(3, 3);
        s.add_constraint(&[(0, 1), (1, 1)]);
        s.add_constraint(&[(1, 1), (2, 1)]);
        assert_eq!(s.nullity(), 1);
        let b = s.into_basis();
        let v = &b[0];
        assert_eq!((v[0] + v[1]) % 3, 0);
        assert_eq!((v[1] + v[2]) % 3, 0);
        assert!(v.iter().any(|&x| x != 0));
    }

    #[test]
    fn redundant_constraints_ignored() {
        let mut s = KernelSolver::new(5, 4);
        s.add_constraint(&[(0, 1), (1, 4)]);
        s.add_constraint(&[(0, 2), (1, 3)]); // 2·(first)
        assert_eq!(s.rank(), 1);
    }

    #[test]
    fn echelon_membership() {
        let mut e = Echelon::new(5);
        assert!(e.insert(vec![1, 2, 0]));
        assert!(e.insert(vec![0, 1, 1]));
        assert!(!e.insert(vec![1, 3, 1])); // sum of the two
        assert!(e.contains(&[2, 4, 0]));
        assert!(!e.contains(&[0, 0, 1]));
        assert_eq!(e.rank(), 2);
    }

    #[test]
    fn matmul_small() {
        // [[1,1],[0,1]]² = [[1,2],[0,1]] mod 3
        let m = matmul(3, 2, &[1, 1, 0, 1], &[1, 1, 0, 1]);
        assert_eq!(m, vec![1, 2, 0, 1]);
    }
}

//! Square matrices with entries in a finite local algebra.
//!
//! Matrices are dense and small (n ≤ 4 under the default cap). A matrix is
//! invertible iff its residue matrix is invertible over 𝔽_p, and then
//! Gauss–Jordan elimination with unit pivots stays inside the ring.

use crate::error::{Error, Result};
use crate::ring::{Elt, FiniteLocalAlgebra, RingId};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Mat {
    pub ring: RingId,
    pub n: usize,
    /// row-major entries
    pub entries: Vec<Elt>,
}

impl Mat {
    pub fn from_entries(ring: &FiniteLocalAlgebra, n: usize, entries: Vec<Elt>) -> Mat {
        assert_eq!(entries.len(), n * n);
        debug_assert!(entries.iter().all(|e| e.ring == ring.id()));
        Mat {
            ring: ring.id(),
            n,
            entries,
        }
    }

    pub fn zero(ring: &FiniteLocalAlgebra, n: usize) -> Mat {
        Mat {
            ring: ring.id(),
            n,
            entries: vec![ring.zero(); n * n],
        }
    }

    pub fn identity(ring: &FiniteLocalAlgebra, n: usize) -> Mat {
        let mut m = Self::zero(ring, n);
        for i in 0..n {
            m.entries[i * n + i] = ring.one();
        }
        m
    }

    /// Scalar matrix λ·1.
    pub fn scalar(ring: &FiniteLocalAlgebra, n: usize, lambda: &Elt) -> Mat {
        let mut m = Self::zero(ring, n);
        for i in 0..n {
            m.entries[i * n + i] = lambda.clone();
        }
        m
    }

    /// Entrywise construction from integer coordinates (rank-1 rings) or
    /// coordinate vectors.
    pub fn from_int_rows(ring: &FiniteLocalAlgebra, rows: &[Vec<u64>]) -> Mat {
        let n = rows.len();
        let mut entries = Vec::with_capacity(n * n);
        for row in rows {
            assert_eq!(row.len(), n);
            for &x in row {
                entries.push(ring.from_int(x));
            }
        }
        Mat {
            ring: ring.id(),
            n,
            entries,
        }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> &Elt {
        &self.entries[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, x: Elt) {
        self.entries[i * self.n + j] = x;
    }

    pub fn add(&self, ring: &FiniteLocalAlgebra, other: &Mat) -> Mat {
        debug_assert_eq!(self.n, other.n);
        Mat {
            ring: self.ring,
            n: self.n,
            entries: self
                .entries
                .iter()
                .zip(other.entries.iter())
                .map(|(a, b)| ring.add(a, b))
                .collect(),
        }
    }

    pub fn sub(&self, ring: &FiniteLocalAlgebra, other: &Mat) -> Mat {
        Mat {
            ring: self.ring,
            n: self.n,
            entries: self
                .entries
                .iter()
                .zip(other.entries.iter())
                .map(|(a, b)| ring.sub(a, b))
                .collect(),
        }
    }

    pub fn mul(&self, ring: &FiniteLocalAlgebra, other: &Mat) -> Mat {
        debug_assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = Mat::zero(ring, n);
        for i in 0..n {
            for k in 0..n {
                let a = self.at(i, k);
                if ring.is_zero(a) {
                    continue;
                }
                for j in 0..n {
                    let prod = ring.mul(a, other.at(k, j));
                    out.entries[i * n + j] = ring.add(&out.entries[i * n + j], &prod);
                }
            }
        }
        out
    }

    pub fn scale(&self, ring: &FiniteLocalAlgebra, lambda: &Elt) -> Mat {
        Mat {
            ring: self.ring,
            n: self.n,
            entries: self
                .entries
                .iter()
                .map(|a| ring.mul(lambda, a))
                .collect(),
        }
    }

    pub fn transpose(&self) -> Mat {
        let n = self.n;
        let mut entries = self.entries.clone();
        for i in 0..n {
            for j in 0..n {
                entries[j * n + i] = self.entries[i * n + j].clone();
            }
        }
        Mat {
            ring: self.ring,
            n,
            entries,
        }
    }

    pub fn is_identity(&self, ring: &FiniteLocalAlgebra) -> bool {
        *self == Mat::identity(ring, self.n)
    }

    /// Residue matrix over 𝔽_p, flattened row-major.
    pub fn residue(&self, ring: &FiniteLocalAlgebra) -> Vec<u64> {
        self.entries.iter().map(|e| ring.residue(e)).collect()
    }

    pub fn is_invertible(&self, ring: &FiniteLocalAlgebra) -> bool {
        fp_det(&self.residue(ring), self.n, ring.p) != 0
    }

    /// Inverse via Gauss–Jordan with unit pivots.
    pub fn inv(&self, ring: &FiniteLocalAlgebra) -> Result<Mat> {
        let n = self.n;
        let mut a = self.clone();
        let mut b = Mat::identity(ring, n);
        for col in 0..n {
            let pivot = (col..n)
                .find(|&r| ring.is_unit(a.at(r, col)))
                .ok_or(Error::NotInvertible(col))?;
            if pivot != col {
                for j in 0..n {
                    a.entries.swap(col * n + j, pivot * n + j);
                    b.entries.swap(col * n + j, pivot * n + j);
                }
            }
            let inv = ring.inv(a.at(col, col)).expect("unit pivot");
            for j in 0..n {
                a.entries[col * n + j] = ring.mul(&inv, &a.entries[col * n + j]);
                b.entries[col * n + j] = ring.mul(&inv, &b.entries[col * n + j]);
            }
            for r in 0..n {
                if r == col || ring.is_zero(a.at(r, col)) {
                    continue;
                }
                let f = a.at(r, col).clone();
                for j in 0..n {
                    let sa = ring.mul(&f, a.at(col, j));
                    let sb = ring.mul(&f, b.at(col, j));
                    a.entries[r * n + j] = ring.sub(&a.entries[r * n + j], &sa);
                    b.entries[r * n + j] = ring.sub(&b.entries[r * n + j], &sb);
                }
            }
        }
        debug_assert!(self.mul(ring, &b).is_identity(ring));
        Ok(b)
    }

    /// u·self·u⁻¹ with a precomputed inverse.
    pub fn conj(&self, ring: &FiniteLocalAlgebra, u: &Mat, u_inv: &Mat) -> Mat {
        u.mul(ring, self).mul(ring, u_inv)
    }

    /// Entrywise image under a ring morphism.
    pub fn map(
        &self,
        src: &FiniteLocalAlgebra,
        dst: &FiniteLocalAlgebra,
        phi: &crate::ring::RingMorphism,
    ) -> Mat {
        Mat {
            ring: dst.id(),
            n: self.n,
            entries: self
                .entries
                .iter()
                .map(|e| phi.apply(src, dst, e))
                .collect(),
        }
    }

    /// Flattened coordinates, the canonical comparison and hashing key.
    pub fn key(&self) -> Vec<u64> {
        let mut k = Vec::with_capacity(self.entries.len() * 2);
        for e in &self.entries {
            k.extend(e.coords.iter());
        }
        k
    }
}

/// Determinant over 𝔽_p of a flattened n×n residue matrix.
pub fn fp_det(m: &[u64], n: usize, p: u64) -> u64 {
    let mut a: Vec<u64> = m.iter().map(|&x| x % p).collect();
    let mut det = 1u64;
    for col in 0..n {
        let Some(pivot) = (col..n).find(|&r| a[r * n + col] != 0) else {
            return 0;
        };
        if pivot != col {
            for j in 0..n {
                a.swap(col * n + j, pivot * n + j);
            }
            det = (p - det) % p;
        }
        let pv = a[col * n + col];
        det = det * pv % p;
        let inv = crate::zmod::pow_mod(pv, p - 2, p);
        for r in col + 1..n {
            let f = a[r * n + col] * inv % p;
            if f == 0 {
                continue;
            }
            for j in col..n {
                a[r * n + j] = (a[r * n + j] + (p - f) * a[col * n + j]) % p;
            }
        }
    }
    det
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::ring_zpn;
    use crate::Caps;

    #[test]
    fn inverse_over_z9() {
        let r = ring_zpn(3, 2, &Caps::default()).unwrap();
        let m = Mat::from_int_rows(&r, &[vec![1, 1], vec![0, 1]]);
        let mi = m.inv(&r).unwrap();
        assert!(m.mul(&r, &mi).is_identity(&r));
        let s = Mat::from_int_rows(&r, &[vec![2, 1], vec![1, 1]]);
        let si = s.inv(&r).unwrap();
        assert!(s.mul(&r, &si).is_identity(&r));
    }

    #[test]
    fn non_invertible_detected() {
        let r = ring_zpn(3, 2, &Caps::default()).unwrap();
        let m = Mat::from_int_rows(&r, &[vec![3, 0], vec![0, 1]]);
        assert!(!m.is_invertible(&r));
        assert!(m.inv(&r).is_err());
    }

    #[test]
    fn det_mod_p() {
        assert_eq!(fp_det(&[1, 2, 3, 4], 2, 5), (5 + 4 - 6 % 5) % 5);
        assert_eq!(fp_det(&[1, 0, 0, 1], 2, 3), 1);
        assert_eq!(fp_det(&[1, 2, 2, 4], 2, 5), 0);
    }
}

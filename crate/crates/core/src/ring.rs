//! Finite commutative local ℤ/pᴺ-algebras given by structure constants.
//!
//! A ring is a free-with-annihilators module ⊕ᵢ ℤ/p^{aᵢ} together with a
//! commutative associative multiplication table on the basis, a distinguished
//! unit, additive generators of the maximal ideal, and the residue projection
//! onto 𝔽_p. All invariants are verified at construction; rings whose
//! cardinality stays under the cap are additionally checked exhaustively
//! (every element outside m is inverted, every element of m is nilpotent).
//!
//! Additive subgroup computations embed ⊕ᵢ ℤ/p^{aᵢ} into (ℤ/pᴺ)ⁿ by scaling
//! coordinate i with p^{N−aᵢ}, where N = max aᵢ, and then run the chain-ring
//! Smith machinery from [`crate::zmod`].

use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::zmod::{
    is_prime, kernel_basis, quotient_of_free, solve, subgroup_basis, Modulus, SubgroupBasis, ZMat,
};
use crate::Caps;

pub type RingId = u32;

static NEXT_RING_ID: AtomicU32 = AtomicU32::new(1);

fn fresh_id() -> RingId {
    NEXT_RING_ID.fetch_add(1, Ordering::Relaxed)
}

/// An element of a [`FiniteLocalAlgebra`], stored as reduced coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Elt {
    pub ring: RingId,
    pub coords: Vec<u64>,
}

/// A finite commutative local algebra over ℤ/pᴺ with residue field 𝔽_p.
#[derive(Debug)]
pub struct FiniteLocalAlgebra {
    id: RingId,
    pub name: String,
    pub p: u64,
    /// the algebra lives over ℤ/pᴺ; N equals the additive order of 1
    pub n_exp: u32,
    md: Modulus,
    pub rank: usize,
    /// coordinate i ranges over ℤ/p^{ann[i]}
    pub ann: Vec<u32>,
    /// rank³ structure constants: entry (i·rank+j) holds coords of eᵢ·eⱼ
    mul_table: Vec<Vec<u64>>,
    unit: Vec<u64>,
    /// additive generators of the maximal ideal
    max_ideal_gens: Vec<Vec<u64>>,
    /// residue projection x ↦ Σ residue[i]·xᵢ mod p
    residue: Vec<u64>,
    /// smallest e with m^e = 0
    pub nilpotency: u32,
    m_span: SubgroupBasis,
}

impl FiniteLocalAlgebra {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: String,
        p: u64,
        ann: Vec<u32>,
        mul_table: Vec<Vec<u64>>,
        unit: Vec<u64>,
        max_ideal_gens: Vec<Vec<u64>>,
        residue: Vec<u64>,
        caps: &Caps,
    ) -> Result<Arc<Self>> {
        if !is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        let rank = ann.len();
        if rank == 0 || ann.iter().any(|&a| a == 0) {
            return Err(Error::InvalidRing("empty basis or zero annihilator".into()));
        }
        let n_exp = *ann.iter().max().unwrap();
        let md = Modulus::new(p, n_exp)?;
        let log_size: u32 = ann.iter().sum();
        let size = (p as u128).checked_pow(log_size).unwrap_or(u128::MAX);
        caps.check("ring cardinality", size, caps.ring_elems)?;
        if mul_table.len() != rank * rank || mul_table.iter().any(|c| c.len() != rank) {
            return Err(Error::InvalidRing("structure constant shape".into()));
        }
        if unit.len() != rank || residue.len() != rank {
            return Err(Error::InvalidRing("unit/residue coordinate length".into()));
        }

        let reduce = |coords: &[u64]| -> Vec<u64> {
            coords
                .iter()
                .zip(ann.iter())
                .map(|(&x, &a)| x % md.p.pow(a))
                .collect()
        };
        let mul_table: Vec<Vec<u64>> = mul_table.iter().map(|c| reduce(c)).collect();
        let unit = reduce(&unit);
        let max_ideal_gens: Vec<Vec<u64>> = max_ideal_gens.iter().map(|c| reduce(c)).collect();
        let residue: Vec<u64> = residue.iter().map(|&x| x % p).collect();

        // annihilator compatibility: p^{aᵢ}·(eᵢeⱼ) = 0 and symmetrically
        for i in 0..rank {
            for j in 0..rank {
                let c = &mul_table[i * rank + j];
                let bound = ann[i].min(ann[j]);
                for k in 0..rank {
                    if md.val(c[k]) + bound < ann[k] {
                        return Err(Error::InvalidRing(format!(
                            "structure constants incompatible with annihilators at ({i},{j},{k})"
                        )));
                    }
                }
                if c != &mul_table[j * rank + i] {
                    return Err(Error::InvalidRing(format!(
                        "multiplication not commutative at ({i},{j})"
                    )));
                }
            }
        }

        let m_span = {
            let scaled: Vec<Vec<u64>> = max_ideal_gens
                .iter()
                .map(|g| {
                    g.iter()
                        .zip(ann.iter())
                        .map(|(&x, &a)| x * md.p_pow(n_exp - a).max(1) % md.q)
                        .collect()
                })
                .collect();
            subgroup_basis(md, rank, &scaled)
        };

        let mut ring = FiniteLocalAlgebra {
            id: fresh_id(),
            name,
            p,
            n_exp,
            md,
            rank,
            ann,
            mul_table,
            unit,
            max_ideal_gens,
            residue,
            nilpotency: 0,
            m_span,
        };
        ring.verify_basic()?;
        ring.nilpotency = ring.compute_nilpotency()?;
        ring.verify_exhaustive()?;
        Ok(Arc::new(ring))
    }

    pub fn id(&self) -> RingId {
        self.id
    }

    pub fn modulus(&self) -> Modulus {
        self.md
    }

    pub fn log_size(&self) -> u32 {
        self.ann.iter().sum()
    }

    pub fn size(&self) -> u128 {
        (self.p as u128).pow(self.log_size())
    }

    pub fn max_ideal_log_size(&self) -> u32 {
        self.m_span.log_size()
    }

    pub fn max_ideal_gens(&self) -> &[Vec<u64>] {
        &self.max_ideal_gens
    }

    pub fn is_field(&self) -> bool {
        self.max_ideal_log_size() == 0
    }

    fn reduce(&self, coords: &mut [u64]) {
        for (x, &a) in coords.iter_mut().zip(self.ann.iter()) {
            *x %= self.p.pow(a);
        }
    }

    pub fn elt(&self, coords: Vec<u64>) -> Elt {
        assert_eq!(coords.len(), self.rank);
        let mut coords = coords;
        self.reduce(&mut coords);
        Elt {
            ring: self.id,
            coords,
        }
    }

    pub fn zero(&self) -> Elt {
        self.elt(vec![0; self.rank])
    }

    pub fn one(&self) -> Elt {
        self.elt(self.unit.clone())
    }

    /// Image of the integer n under ℤ → A.
    pub fn from_int(&self, n: u64) -> Elt {
        self.scalar_mul(n, &self.one())
    }

    pub fn check_owner(&self, x: &Elt) -> Result<()> {
        if x.ring != self.id {
            return Err(Error::RingMismatch {
                expected: self.id,
                got: x.ring,
            });
        }
        Ok(())
    }

    pub fn add(&self, x: &Elt, y: &Elt) -> Elt {
        debug_assert!(x.ring == self.id && y.ring == self.id);
        let coords = x
            .coords
            .iter()
            .zip(y.coords.iter())
            .zip(self.ann.iter())
            .map(|((&a, &b), &e)| (a + b) % self.p.pow(e))
            .collect();
        Elt {
            ring: self.id,
            coords,
        }
    }

    pub fn neg(&self, x: &Elt) -> Elt {
        let coords = x
            .coords
            .iter()
            .zip(self.ann.iter())
            .map(|(&a, &e)| {
                let q = self.p.pow(e);
                (q - a % q) % q
            })
            .collect();
        Elt {
            ring: self.id,
            coords,
        }
    }

    pub fn sub(&self, x: &Elt, y: &Elt) -> Elt {
        self.add(x, &self.neg(y))
    }

    pub fn scalar_mul(&self, n: u64, x: &Elt) -> Elt {
        let coords = x
            .coords
            .iter()
            .zip(self.ann.iter())
            .map(|(&a, &e)| {
                let q = self.p.pow(e);
                a % q * (n % q) % q
            })
            .collect();
        Elt {
            ring: self.id,
            coords,
        }
    }

    pub fn mul(&self, x: &Elt, y: &Elt) -> Elt {
        debug_assert!(x.ring == self.id && y.ring == self.id);
        let mut acc = vec![0u64; self.rank];
        for (i, &xi) in x.coords.iter().enumerate() {
            if xi == 0 {
                continue;
            }
            for (j, &yj) in y.coords.iter().enumerate() {
                if yj == 0 {
                    continue;
                }
                let c = &self.mul_table[i * self.rank + j];
                let f = xi % self.md.q * (yj % self.md.q) % self.md.q;
                for (k, &ck) in c.iter().enumerate() {
                    let q = self.p.pow(self.ann[k]);
                    acc[k] = (acc[k] + f % q * (ck % q)) % q;
                }
            }
        }
        Elt {
            ring: self.id,
            coords: acc,
        }
    }

    pub fn pow(&self, x: &Elt, mut e: u64) -> Elt {
        let mut acc = self.one();
        let mut base = x.clone();
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(&acc, &base);
            }
            base = self.mul(&base, &base);
            e >>= 1;
        }
        acc
    }

    pub fn is_zero(&self, x: &Elt) -> bool {
        x.coords.iter().all(|&c| c == 0)
    }

    /// Residue of x in 𝔽_p.
    pub fn residue(&self, x: &Elt) -> u64 {
        let mut acc = 0u64;
        for (&c, &r) in x.coords.iter().zip(self.residue.iter()) {
            acc = (acc + c % self.p * r) % self.p;
        }
        acc
    }

    pub fn is_unit(&self, x: &Elt) -> bool {
        self.residue(x) != 0
    }

    /// Inverse of a unit: write x = c(1 + v) with v nilpotent and sum the
    /// geometric series.
    pub fn inv(&self, x: &Elt) -> Option<Elt> {
        let r = self.residue(x);
        if r == 0 {
            return None;
        }
        let c_inv = self.md.inv_unit(r);
        let v = self.sub(&self.scalar_mul(c_inv, x), &self.one());
        let mut acc = self.one();
        let mut term = self.one();
        for _ in 0..self.nilpotency.max(1) {
            term = self.neg(&self.mul(&term, &v));
            if self.is_zero(&term) {
                break;
            }
            acc = self.add(&acc, &term);
        }
        let out = self.scalar_mul(c_inv, &acc);
        debug_assert_eq!(self.mul(&out, x), self.one());
        Some(out)
    }

    pub fn in_max_ideal(&self, x: &Elt) -> bool {
        self.m_span.contains(&self.embed(&x.coords))
    }

    /// All ring elements in deterministic mixed-radix order.
    pub fn elements(&self) -> Vec<Elt> {
        let mut out = Vec::with_capacity(self.size() as usize);
        let mut coords = vec![0u64; self.rank];
        loop {
            out.push(Elt {
                ring: self.id,
                coords: coords.clone(),
            });
            let mut k = self.rank;
            loop {
                if k == 0 {
                    return out;
                }
                k -= 1;
                coords[k] += 1;
                if coords[k] < self.p.pow(self.ann[k]) {
                    break;
                }
                coords[k] = 0;
            }
        }
    }

    /// Elements of the maximal ideal.
    pub fn max_ideal_elements(&self) -> Vec<Elt> {
        self.m_span
            .enumerate()
            .into_iter()
            .map(|v| self.elt(self.unembed(&v)))
            .collect()
    }

    // ---- scaled embedding -------------------------------------------------

    pub fn embed(&self, coords: &[u64]) -> Vec<u64> {
        coords
            .iter()
            .zip(self.ann.iter())
            .map(|(&x, &a)| x * self.md.p_pow(self.n_exp - a).max(1) % self.md.q)
            .collect()
    }

    pub fn unembed(&self, scaled: &[u64]) -> Vec<u64> {
        scaled
            .iter()
            .zip(self.ann.iter())
            .map(|(&x, &a)| {
                let s = self.md.p_pow(self.n_exp - a).max(1);
                debug_assert_eq!(x % s, 0, "scaled coordinate not divisible");
                x / s
            })
            .collect()
    }

    /// Additive span of the given elements, with a natural-coordinate API.
    pub fn span(&self, gens: &[Elt]) -> RingSubgroup {
        let scaled: Vec<Vec<u64>> = gens.iter().map(|g| self.embed(&g.coords)).collect();
        RingSubgroup {
            ring: self.id,
            sb: subgroup_basis(self.md, self.rank, &scaled),
        }
    }

    /// Additive span of the ideal generated by the given elements.
    pub fn ideal_span(&self, gens: &[Elt]) -> RingSubgroup {
        let mut prods = Vec::new();
        for g in gens {
            for i in 0..self.rank {
                let mut e = vec![0u64; self.rank];
                e[i] = 1;
                prods.push(self.mul(&self.elt(e), g));
            }
        }
        self.span(&prods)
    }

    /// Additive generators of m^k (k ≥ 1).
    pub fn ideal_power_gens(&self, k: u32) -> Vec<Elt> {
        let m_gens: Vec<Elt> = self
            .max_ideal_gens
            .iter()
            .map(|g| self.elt(g.clone()))
            .collect();
        let mut cur = m_gens.clone();
        for _ in 1..k {
            let mut next = Vec::new();
            for x in &cur {
                for y in &m_gens {
                    next.push(self.mul(x, y));
                }
            }
            cur = self.span(&next).smith_gens(self);
        }
        cur
    }

    /// Socle ann(m) = {x : x·m = 0}.
    pub fn socle(&self) -> RingSubgroup {
        // stack the multiplication-by-generator maps; the socle is the kernel
        // of the stack, parametrized by natural coordinates
        let rows: Vec<ZMat> = self
            .max_ideal_gens
            .iter()
            .map(|g| self.mult_matrix_nat(&self.elt(g.clone())))
            .collect();
        let total_rows: usize = rows.iter().map(|m| m.rows).sum();
        let mut stacked = ZMat::zero(self.md, total_rows.max(1), self.rank);
        let mut off = 0;
        for m in &rows {
            for i in 0..m.rows {
                for j in 0..m.cols {
                    stacked.set(off + i, j, m.at(i, j));
                }
            }
            off += m.rows;
        }
        let kn = kernel_basis(&stacked);
        let gens: Vec<Elt> = kn
            .gens
            .iter()
            .map(|v| {
                let nat: Vec<u64> = v
                    .iter()
                    .zip(self.ann.iter())
                    .map(|(&x, &a)| x % self.p.pow(a))
                    .collect();
                self.elt(nat)
            })
            .collect();
        self.span(&gens)
    }

    /// Matrix of the scaled coordinates of g·eᵢ as a function of natural
    /// coordinates: column i holds embed(g·eᵢ). Kernels of such matrices,
    /// read in natural coordinates, are kernels of multiplication maps.
    pub fn mult_matrix_nat(&self, g: &Elt) -> ZMat {
        let mut m = ZMat::zero(self.md, self.rank, self.rank);
        for i in 0..self.rank {
            let prod = self.mul(g, &self.basis(i));
            let scaled = self.embed(&prod.coords);
            for (k, &s) in scaled.iter().enumerate() {
                m.set(k, i, s);
            }
        }
        m
    }

    // ---- verification -----------------------------------------------------

    fn verify_basic(&self) -> Result<()> {
        let rank = self.rank;
        // unital
        let one = self.one();
        if self.is_zero(&one) {
            return Err(Error::InvalidRing("unit is zero".into()));
        }
        for i in 0..rank {
            let mut e = vec![0u64; rank];
            e[i] = 1;
            let ei = self.elt(e);
            if self.mul(&one, &ei) != ei {
                return Err(Error::InvalidRing(format!("unit fails on basis {i}")));
            }
        }
        // associativity on all basis triples
        for i in 0..rank {
            for j in 0..rank {
                for k in 0..rank {
                    let (ei, ej, ek) = (self.basis(i), self.basis(j), self.basis(k));
                    let l = self.mul(&self.mul(&ei, &ej), &ek);
                    let r = self.mul(&ei, &self.mul(&ej, &ek));
                    if l != r {
                        return Err(Error::InvalidRing(format!(
                            "multiplication not associative at ({i},{j},{k})"
                        )));
                    }
                }
            }
        }
        // residue projection is a ring morphism onto 𝔽_p
        if self.residue(&one) != 1 {
            return Err(Error::InvalidRing("residue(1) ≠ 1".into()));
        }
        for i in 0..rank {
            for j in 0..rank {
                let prod = self.mul(&self.basis(i), &self.basis(j));
                let lhs = self.residue(&prod);
                let rhs = self.residue(&self.basis(i)) * self.residue(&self.basis(j)) % self.p;
                if lhs != rhs {
                    return Err(Error::InvalidRing(format!(
                        "residue not multiplicative at ({i},{j})"
                    )));
                }
            }
        }
        // maximal ideal: generators in ker(residue), index-p span
        for g in &self.max_ideal_gens {
            if self.residue(&self.elt(g.clone())) != 0 {
                return Err(Error::InvalidRing("maximal-ideal generator is a unit".into()));
            }
        }
        if self.m_span.log_size() + 1 != self.log_size() {
            return Err(Error::InvalidRing(format!(
                "maximal ideal has index p^{} instead of p",
                self.log_size() - self.m_span.log_size()
            )));
        }
        Ok(())
    }

    fn compute_nilpotency(&self) -> Result<u32> {
        let bound = self.rank as u32 * self.n_exp + 1;
        let mut gens: Vec<Elt> = self
            .max_ideal_gens
            .iter()
            .map(|g| self.elt(g.clone()))
            .collect();
        gens.retain(|g| !self.is_zero(g));
        let mut e = 1u32;
        while !gens.is_empty() {
            if e > bound {
                return Err(Error::InvalidRing("maximal ideal is not nilpotent".into()));
            }
            let m_gens: Vec<Elt> = self
                .max_ideal_gens
                .iter()
                .map(|g| self.elt(g.clone()))
                .collect();
            let mut next = Vec::new();
            for x in &gens {
                for y in &m_gens {
                    let prod = self.mul(x, y);
                    if !self.is_zero(&prod) {
                        next.push(prod);
                    }
                }
            }
            gens = if next.is_empty() {
                Vec::new()
            } else {
                self.span(&next).smith_gens(self)
            };
            e += 1;
        }
        Ok(e)
    }

    /// Every element outside span(m) is a verified unit; every element of
    /// span(m) is nilpotent.
    fn verify_exhaustive(&self) -> Result<()> {
        for x in self.elements() {
            if self.in_max_ideal(&x) {
                if self.residue(&x) != 0 {
                    return Err(Error::InvalidRing("unit inside maximal ideal".into()));
                }
                let mut y = x.clone();
                let mut steps = 0;
                while !self.is_zero(&y) {
                    y = self.mul(&y, &x);
                    steps += 1;
                    if steps > self.nilpotency + 1 {
                        return Err(Error::InvalidRing(
                            "non-nilpotent element in maximal ideal".into(),
                        ));
                    }
                }
            } else {
                match self.inv(&x) {
                    Some(inv) => {
                        if self.mul(&inv, &x) != self.one() {
                            return Err(Error::Internal("inverse verification failed".into()));
                        }
                    }
                    None => {
                        return Err(Error::InvalidRing(
                            "element outside maximal ideal is not a unit".into(),
                        ))
                    }
                }
            }
        }
        Ok(())
    }

    pub fn basis(&self, i: usize) -> Elt {
        let mut e = vec![0u64; self.rank];
        e[i] = 1;
        self.elt(e)
    }
}

/// An additive subgroup of a ring with natural-coordinate accessors.
#[derive(Debug, Clone)]
pub struct RingSubgroup {
    pub ring: RingId,
    sb: SubgroupBasis,
}

impl RingSubgroup {
    pub fn log_size(&self) -> u32 {
        self.sb.log_size()
    }

    pub fn size(&self) -> u128 {
        self.sb.size()
    }

    pub fn contains_elt(&self, ring: &FiniteLocalAlgebra, x: &Elt) -> bool {
        self.sb.contains(&ring.embed(&x.coords))
    }

    pub fn smith_gens(&self, ring: &FiniteLocalAlgebra) -> Vec<Elt> {
        self.sb
            .gens
            .iter()
            .map(|g| ring.elt(ring.unembed(g)))
            .collect()
    }

    pub fn orders(&self) -> &[u32] {
        &self.sb.orders
    }

    pub fn elements(&self, ring: &FiniteLocalAlgebra) -> Vec<Elt> {
        self.sb
            .enumerate()
            .into_iter()
            .map(|v| ring.elt(ring.unembed(&v)))
            .collect()
    }

    /// Coordinates of an element w.r.t. the smith generators, or None when
    /// the element lies outside the subgroup.
    pub fn coords_of(&self, ring: &FiniteLocalAlgebra, x: &Elt) -> Option<Vec<u64>> {
        self.sb.coords(&ring.embed(&x.coords))
    }
}

/// A unital algebra morphism between finite local algebras.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RingMorphism {
    pub source: RingId,
    pub target: RingId,
    /// target coordinates of each source basis vector
    pub matrix: Vec<Vec<u64>>,
}

impl RingMorphism {
    pub fn new(
        a: &FiniteLocalAlgebra,
        b: &FiniteLocalAlgebra,
        matrix: Vec<Vec<u64>>,
    ) -> Result<Self> {
        if a.p != b.p {
            return Err(Error::InvalidMorphism("primes differ".into()));
        }
        if matrix.len() != a.rank || matrix.iter().any(|c| c.len() != b.rank) {
            return Err(Error::InvalidMorphism("matrix shape".into()));
        }
        let matrix: Vec<Vec<u64>> = matrix.iter().map(|c| b.elt(c.clone()).coords).collect();
        let phi = RingMorphism {
            source: a.id(),
            target: b.id(),
            matrix,
        };
        // annihilator compatibility: p^{aᵢ}·φ(eᵢ) = 0
        for i in 0..a.rank {
            let img = phi.apply_basis(b, i);
            if !b.is_zero(&b.scalar_mul(a.p.pow(a.ann[i].min(b.n_exp)), &img)) {
                return Err(Error::InvalidMorphism(format!(
                    "image of basis {i} not killed by p^{}",
                    a.ann[i]
                )));
            }
        }
        // unital
        if phi.apply(a, b, &a.one()) != b.one() {
            return Err(Error::InvalidMorphism("not unital".into()));
        }
        // multiplicative on basis pairs
        for i in 0..a.rank {
            for j in 0..a.rank {
                let lhs = phi.apply(a, b, &a.mul(&a.basis(i), &a.basis(j)));
                let rhs = b.mul(&phi.apply_basis(b, i), &phi.apply_basis(b, j));
                if lhs != rhs {
                    return Err(Error::InvalidMorphism(format!(
                        "not multiplicative at ({i},{j})"
                    )));
                }
            }
        }
        // local: m_A into m_B, identity on residue fields
        for g in a.max_ideal_gens() {
            let img = phi.apply(a, b, &a.elt(g.clone()));
            if !b.in_max_ideal(&img) {
                return Err(Error::InvalidMorphism(
                    "maximal ideal not mapped into maximal ideal".into(),
                ));
            }
        }
        for i in 0..a.rank {
            if b.residue(&phi.apply_basis(b, i)) != a.residue(&a.basis(i)) {
                return Err(Error::InvalidMorphism(
                    "does not induce the identity on residue fields".into(),
                ));
            }
        }
        Ok(phi)
    }

    pub fn identity(a: &FiniteLocalAlgebra) -> Self {
        let matrix = (0..a.rank).map(|i| a.basis(i).coords).collect();
        RingMorphism {
            source: a.id(),
            target: a.id(),
            matrix,
        }
    }

    fn apply_basis(&self, b: &FiniteLocalAlgebra, i: usize) -> Elt {
        b.elt(self.matrix[i].clone())
    }

    pub fn apply(&self, a: &FiniteLocalAlgebra, b: &FiniteLocalAlgebra, x: &Elt) -> Elt {
        debug_assert_eq!(x.ring, self.source);
        debug_assert_eq!(a.id(), self.source);
        debug_assert_eq!(b.id(), self.target);
        let mut acc = b.zero();
        for (i, &xi) in x.coords.iter().enumerate() {
            if xi == 0 {
                continue;
            }
            acc = b.add(&acc, &b.scalar_mul(xi, &self.apply_basis(b, i)));
        }
        acc
    }

    /// ψ∘φ for φ: A→B (self = φ), ψ: B→C.
    pub fn then(
        &self,
        psi: &RingMorphism,
        a: &FiniteLocalAlgebra,
        b: &FiniteLocalAlgebra,
        c: &FiniteLocalAlgebra,
    ) -> RingMorphism {
        assert_eq!(self.target, psi.source);
        let matrix = (0..a.rank)
            .map(|i| psi.apply(b, c, &self.apply_basis(b, i)).coords)
            .collect();
        RingMorphism {
            source: a.id(),
            target: c.id(),
            matrix,
        }
    }

    /// Matrix of φ on scaled coordinates, over the source modulus.
    pub fn scaled_matrix(&self, a: &FiniteLocalAlgebra, b: &FiniteLocalAlgebra) -> ZMat {
        let md = a.modulus();
        let mut m = ZMat::zero(md, b.rank, a.rank);
        for i in 0..a.rank {
            for k in 0..b.rank {
                // entry·p^{N_A - aᵢ} ≡ matrix[i][k]·p^{N_A - b_k}  (mod p^{N_A})
                let up = md.p_pow(a.n_exp - b.ann[k].min(a.n_exp)).max(1);
                let scaled_img = self.matrix[i][k] % md.q * (up % md.q) % md.q;
                let down = md.p_pow(a.n_exp - a.ann[i]).max(1);
                debug_assert_eq!(scaled_img % down, 0, "annihilator compatibility");
                m.set(k, i, scaled_img / down);
            }
        }
        m
    }

    pub fn image_log_size(&self, a: &FiniteLocalAlgebra, b: &FiniteLocalAlgebra) -> u32 {
        let imgs: Vec<Elt> = (0..a.rank).map(|i| self.apply_basis(b, i)).collect();
        b.span(&imgs).log_size()
    }

    pub fn is_surjective(&self, a: &FiniteLocalAlgebra, b: &FiniteLocalAlgebra) -> bool {
        self.image_log_size(a, b) == b.log_size()
    }

    /// Kernel as an additive subgroup of the source.
    pub fn kernel(&self, a: &FiniteLocalAlgebra, b: &FiniteLocalAlgebra) -> RingSubgroup {
        let md = a.modulus();
        let f = self.scaled_matrix(a, b);
        // parametrize the embedded copy of A: x natural ↦ diag(p^{N-aᵢ})·x
        let diag_cols: Vec<Vec<u64>> = (0..a.rank)
            .map(|i| {
                let mut v = vec![0u64; a.rank];
                v[i] = md.p_pow(a.n_exp - a.ann[i]).max(1);
                v
            })
            .collect();
        let g = f.mul(&ZMat::from_cols(md, &diag_cols));
        let kn = kernel_basis(&g);
        let gens: Vec<Elt> = kn
            .gens
            .iter()
            .map(|v| {
                let nat: Vec<u64> = v
                    .iter()
                    .zip(a.ann.iter())
                    .map(|(&x, &e)| x % a.p.pow(e))
                    .collect();
                a.elt(nat)
            })
            .collect();
        a.span(&gens)
    }

    /// Canonical preimage of y under a surjective morphism.
    pub fn section(&self, a: &FiniteLocalAlgebra, b: &FiniteLocalAlgebra, y: &Elt) -> Elt {
        let md = a.modulus();
        // natural-coordinate parametrization: G·x_nat = embed(φ(x_nat))
        let f = self.scaled_matrix(a, b);
        let diag_cols: Vec<Vec<u64>> = (0..a.rank)
            .map(|i| {
                let mut v = vec![0u64; a.rank];
                v[i] = md.p_pow(a.n_exp - a.ann[i]).max(1);
                v
            })
            .collect();
        let g = f.mul(&ZMat::from_cols(md, &diag_cols));
        let target_scaled: Vec<u64> = y
            .coords
            .iter()
            .zip(b.ann.iter())
            .map(|(&x, &e)| x * md.p_pow(a.n_exp - e.min(a.n_exp)).max(1) % md.q)
            .collect();
        let x = solve(&g, &target_scaled).expect("section of a surjective morphism");
        let nat: Vec<u64> = x
            .iter()
            .zip(a.ann.iter())
            .map(|(&v, &e)| v % a.p.pow(e))
            .collect();
        a.elt(nat)
    }
}

// ---- presets ---------------------------------------------------------------

/// Constructs ℤ/pᴺ.
pub fn ring_zpn(p: u64, n: u32, caps: &Caps) -> Result<Arc<FiniteLocalAlgebra>> {
    let q = {
        let mut q = 1u64;
        for _ in 0..n {
            q = q.saturating_mul(p);
        }
        q
    };
    FiniteLocalAlgebra::new(
        if n == 1 {
            format!("F{p}")
        } else {
            format!("Z/{q}")
        },
        p,
        vec![n],
        vec![vec![1]],
        vec![1],
        vec![vec![p % q]],
        vec![1],
        caps,
    )
}

/// Constructs the truncated polynomial ring 𝔽_p[x]/(xᵉ); e = 2 is the ring
/// of dual numbers 𝔽_p[ε].
pub fn ring_trunc(p: u64, e: u32, caps: &Caps) -> Result<Arc<FiniteLocalAlgebra>> {
    if e == 0 {
        return Err(Error::InvalidRing("truncation order must be ≥ 1".into()));
    }
    let rank = e as usize;
    let mut table = vec![vec![0u64; rank]; rank * rank];
    for i in 0..rank {
        for j in 0..rank {
            if i + j < rank {
                table[i * rank + j][i + j] = 1;
            }
        }
    }
    let mut unit = vec![0u64; rank];
    unit[0] = 1;
    let mut residue = vec![0u64; rank];
    residue[0] = 1;
    let m_gens: Vec<Vec<u64>> = (1..rank)
        .map(|i| {
            let mut v = vec![0u64; rank];
            v[i] = 1;
            v
        })
        .collect();
    let name = match e {
        1 => format!("F{p}"),
        2 => format!("F{p}[e]"),
        _ => format!("F{p}[x]/x^{e}"),
    };
    FiniteLocalAlgebra::new(name, p, vec![1; rank], table, unit, m_gens, residue, caps)
}

/// Constructs ℤ/pᴺ[x]/(x², px).
pub fn ring_mixed(p: u64, n: u32, caps: &Caps) -> Result<Arc<FiniteLocalAlgebra>> {
    let rank = 2;
    let mut table = vec![vec![0u64; rank]; rank * rank];
    table[0] = vec![1, 0]; // 1·1
    table[1] = vec![0, 1]; // 1·x
    table[2] = vec![0, 1]; // x·1
    table[3] = vec![0, 0]; // x·x
    let q = p.pow(n);
    FiniteLocalAlgebra::new(
        format!("Z/{q}[x]/(x2,{p}x)"),
        p,
        vec![n, 1],
        table,
        vec![1, 0],
        vec![vec![p % q, 0], vec![0, 1]],
        vec![1, 0],
        caps,
    )
}

/// Named presets addressable from the CLI.
pub fn make_preset_ring(
    preset: &str,
    p: u64,
    n: Option<u32>,
    e: Option<u32>,
    caps: &Caps,
) -> Result<Arc<FiniteLocalAlgebra>> {
    match preset {
        "Zpn" => ring_zpn(p, n.unwrap_or(1), caps),
        "dual" => ring_trunc(p, 2, caps),
        "trunc" => ring_trunc(p, e.unwrap_or(2), caps),
        "mixed" => ring_mixed(p, n.unwrap_or(2), caps),
        other => Err(Error::UnknownPreset(other.into())),
    }
}

// ---- fiber products ---------------------------------------------------------

/// The fiber product A₁ ×_{A₀} A₂ = {(a₁,a₂) : φ₁(a₁) = φ₂(a₂)} together
/// with its two projections. Both φᵢ must be surjective so that the result
/// is local with residue field 𝔽_p.
pub fn fiber_product(
    a1: &FiniteLocalAlgebra,
    a2: &FiniteLocalAlgebra,
    a0: &FiniteLocalAlgebra,
    phi1: &RingMorphism,
    phi2: &RingMorphism,
    caps: &Caps,
) -> Result<(Arc<FiniteLocalAlgebra>, RingMorphism, RingMorphism)> {
    if a1.p != a2.p || a1.p != a0.p {
        return Err(Error::InvalidMorphism("primes differ".into()));
    }
    if phi1.source != a1.id() || phi1.target != a0.id() || phi2.source != a2.id()
        || phi2.target != a0.id()
    {
        return Err(Error::InvalidMorphism("fiber product legs mismatch".into()));
    }
    if !phi1.is_surjective(a1, a0) || !phi2.is_surjective(a2, a0) {
        return Err(Error::NotSurjective);
    }
    let n_exp = a1.n_exp.max(a2.n_exp);
    let md = Modulus::new(a1.p, n_exp)?;
    let dim = a1.rank + a2.rank;

    // scaled matrix of (x,y) ↦ φ₁(x) − φ₂(y) on the embedded copies
    let scale_map = |a: &FiniteLocalAlgebra, phi: &RingMorphism, negate: bool| -> Vec<Vec<u64>> {
        (0..a.rank)
            .map(|i| {
                (0..a0.rank)
                    .map(|k| {
                        let up = md.p_pow(n_exp - a0.ann[k].min(n_exp)).max(1);
                        let scaled = phi.matrix[i][k] % md.q * (up % md.q) % md.q;
                        let down = md.p_pow(n_exp - a.ann[i]).max(1);
                        debug_assert_eq!(scaled % down, 0);
                        let v = scaled / down;
                        if negate {
                            md.neg(v)
                        } else {
                            v
                        }
                    })
                    .collect()
            })
            .collect()
    };
    let cols1 = scale_map(a1, phi1, false);
    let cols2 = scale_map(a2, phi2, true);
    let mut f = ZMat::zero(md, a0.rank, dim);
    for (i, col) in cols1.iter().chain(cols2.iter()).enumerate() {
        for (k, &v) in col.iter().enumerate() {
            f.set(k, i, v);
        }
    }
    // compose with the diagonal parametrization of ∏ℤ/p^{aᵢ}
    let anns: Vec<u32> = a1.ann.iter().chain(a2.ann.iter()).copied().collect();
    let diag_cols: Vec<Vec<u64>> = (0..dim)
        .map(|i| {
            let mut v = vec![0u64; dim];
            v[i] = md.p_pow(n_exp - anns[i]).max(1);
            v
        })
        .collect();
    let g = f.mul(&ZMat::from_cols(md, &diag_cols));
    let kn = kernel_basis(&g);
    // natural pair coordinates of the equalizer generators
    let nat_gens: Vec<Vec<u64>> = kn
        .gens
        .iter()
        .map(|v| {
            v.iter()
                .zip(anns.iter())
                .map(|(&x, &e)| x % a1.p.pow(e))
                .collect()
        })
        .collect();
    // smith basis of the equalizer inside the (scaled) product group
    let embed_pair = |nat: &[u64]| -> Vec<u64> {
        nat.iter()
            .zip(anns.iter())
            .map(|(&x, &e)| x * md.p_pow(n_exp - e).max(1) % md.q)
            .collect()
    };
    let eq = subgroup_basis(md, dim, &nat_gens.iter().map(|g| embed_pair(g)).collect::<Vec<_>>());
    let expected_log = a1.log_size() + a2.log_size() - a0.log_size();
    if eq.log_size() != expected_log {
        return Err(Error::Internal(format!(
            "equalizer has log size {} instead of {expected_log}",
            eq.log_size()
        )));
    }
    caps.check(
        "ring cardinality",
        (a1.p as u128).pow(eq.log_size()),
        caps.ring_elems,
    )?;

    // basis of the new ring: smith generators, in natural pair coordinates
    let unscale_pair = |v: &[u64]| -> Vec<u64> {
        v.iter()
            .zip(anns.iter())
            .map(|(&x, &e)| {
                let s = md.p_pow(n_exp - e).max(1);
                debug_assert_eq!(x % s, 0);
                x / s
            })
            .collect()
    };
    let basis_nat: Vec<Vec<u64>> = eq.gens.iter().map(|g| unscale_pair(g)).collect();
    let new_rank = basis_nat.len();
    let new_ann: Vec<u32> = eq.orders.clone();

    let pair_mul = |x: &[u64], y: &[u64]| -> Vec<u64> {
        let x1 = a1.elt(x[..a1.rank].to_vec());
        let x2 = a2.elt(x[a1.rank..].to_vec());
        let y1 = a1.elt(y[..a1.rank].to_vec());
        let y2 = a2.elt(y[a1.rank..].to_vec());
        let mut out = a1.mul(&x1, &y1).coords;
        out.extend(a2.mul(&x2, &y2).coords);
        out
    };
    let coords_of = |nat: &[u64]| -> Vec<u64> {
        let sc = embed_pair(nat);
        let y = eq
            .coords(&sc)
            .expect("product of equalizer elements stays in the equalizer");
        y.iter()
            .zip(new_ann.iter())
            .map(|(&c, &e)| c % a1.p.pow(e))
            .collect()
    };

    let mut table = Vec::with_capacity(new_rank * new_rank);
    for i in 0..new_rank {
        for j in 0..new_rank {
            table.push(coords_of(&pair_mul(&basis_nat[i], &basis_nat[j])));
        }
    }
    let mut unit_nat = a1.one().coords;
    unit_nat.extend(a2.one().coords);
    let unit = coords_of(&unit_nat);
    let residue: Vec<u64> = basis_nat
        .iter()
        .map(|g| a1.residue(&a1.elt(g[..a1.rank].to_vec())))
        .collect();
    // m₃ = kernel of the residue functional Σ residue[j]·cⱼ on coordinates:
    // basis vectors with residue 0, pivot combinations for the rest, and
    // p·eⱼ throughout
    let pivot = residue.iter().position(|&r| r != 0);
    let mut m_gens: Vec<Vec<u64>> = Vec::new();
    for j in 0..new_rank {
        match residue[j] {
            0 => {
                let mut v = vec![0u64; new_rank];
                v[j] = 1;
                m_gens.push(v);
            }
            r => {
                let base = pivot.expect("unit has nonzero residue");
                if base != j {
                    // residue[base]·e_j − r·e_base lies in the kernel
                    let mut v = vec![0u64; new_rank];
                    v[j] = residue[base];
                    let pb = a1.p.pow(new_ann[base]);
                    v[base] = (pb - r % pb) % pb;
                    m_gens.push(v);
                }
                let mut v = vec![0u64; new_rank];
                v[j] = a1.p % a1.p.pow(new_ann[j]);
                m_gens.push(v);
            }
        }
    }

    let name = format!("({}x{})/{}", a1.name, a2.name, a0.name);
    let ring = FiniteLocalAlgebra::new(name, a1.p, new_ann, table, unit, m_gens, residue, caps)?;

    let proj = |take_first: bool, tgt: &FiniteLocalAlgebra| -> Result<RingMorphism> {
        let matrix: Vec<Vec<u64>> = basis_nat
            .iter()
            .map(|g| {
                if take_first {
                    g[..a1.rank].to_vec()
                } else {
                    g[a1.rank..].to_vec()
                }
            })
            .collect();
        RingMorphism::new(&ring, tgt, matrix)
    };
    let pr1 = proj(true, a1)?;
    let pr2 = proj(false, a2)?;
    Ok((ring, pr1, pr2))
}

/// The canonical projection onto a rank-1 avatar of the residue field.
pub fn residue_morphism(
    a: &FiniteLocalAlgebra,
    fp_ring: &FiniteLocalAlgebra,
) -> Result<RingMorphism> {
    if fp_ring.rank != 1 || fp_ring.n_exp != 1 {
        return Err(Error::Precondition(
            "residue target must be a rank-1 prime field".into(),
        ));
    }
    let matrix: Vec<Vec<u64>> = (0..a.rank).map(|i| vec![a.residue(&a.basis(i))]).collect();
    RingMorphism::new(a, fp_ring, matrix)
}

/// The element of the source mapping to the given pair under two morphisms,
/// when one exists. Used to assemble fiber-product elements from compatible
/// pairs.
pub fn pair_preimage(
    src: &FiniteLocalAlgebra,
    t1: &FiniteLocalAlgebra,
    t2: &FiniteLocalAlgebra,
    pr1: &RingMorphism,
    pr2: &RingMorphism,
    x1: &Elt,
    x2: &Elt,
) -> Option<Elt> {
    let md = src.modulus();
    let f1 = pr1.scaled_matrix(src, t1);
    let f2 = pr2.scaled_matrix(src, t2);
    let diag_cols: Vec<Vec<u64>> = (0..src.rank)
        .map(|i| {
            let mut v = vec![0u64; src.rank];
            v[i] = md.p_pow(src.n_exp - src.ann[i]).max(1);
            v
        })
        .collect();
    let diag = ZMat::from_cols(md, &diag_cols);
    let g1 = f1.mul(&diag);
    let g2 = f2.mul(&diag);
    let mut stacked = ZMat::zero(md, t1.rank + t2.rank, src.rank);
    for i in 0..t1.rank {
        for j in 0..src.rank {
            stacked.set(i, j, g1.at(i, j));
        }
    }
    for i in 0..t2.rank {
        for j in 0..src.rank {
            stacked.set(t1.rank + i, j, g2.at(i, j));
        }
    }
    let scale_target = |t: &FiniteLocalAlgebra, x: &Elt| -> Vec<u64> {
        x.coords
            .iter()
            .zip(t.ann.iter())
            .map(|(&v, &e)| v * md.p_pow(src.n_exp - e.min(src.n_exp)).max(1) % md.q)
            .collect()
    };
    let mut rhs = scale_target(t1, x1);
    rhs.extend(scale_target(t2, x2));
    let sol = solve(&stacked, &rhs)?;
    let nat: Vec<u64> = sol
        .iter()
        .zip(src.ann.iter())
        .map(|(&v, &e)| v % src.p.pow(e))
        .collect();
    let out = src.elt(nat);
    debug_assert_eq!(pr1.apply(src, t1, &out), *x1);
    debug_assert_eq!(pr2.apply(src, t2, &out), *x2);
    Some(out)
}

/// Tensor product A ⊗ B over ℤ_p (through its finite quotients), with basis
/// eᵢ⊗fⱼ of annihilator exponent min(aᵢ, bⱼ), together with the bilinear map
/// on elements.
pub fn tensor_algebra(
    a: &Arc<FiniteLocalAlgebra>,
    b: &Arc<FiniteLocalAlgebra>,
    caps: &Caps,
) -> Result<(
    Arc<FiniteLocalAlgebra>,
    impl Fn(&FiniteLocalAlgebra, &Elt, &Elt) -> Elt,
)> {
    if a.p != b.p {
        return Err(Error::InvalidMorphism("primes differ".into()));
    }
    let p = a.p;
    let (ra, rb) = (a.rank, b.rank);
    let rank = ra * rb;
    let ann: Vec<u32> = (0..rank)
        .map(|t| a.ann[t / rb].min(b.ann[t % rb]))
        .collect();
    let log_size: u32 = ann.iter().sum();
    caps.check(
        "ring cardinality",
        (p as u128).pow(log_size),
        caps.ring_elems,
    )?;
    let pair_coords = move |x: &[u64], y: &[u64]| -> Vec<u64> {
        let mut out = vec![0u64; ra * rb];
        for (i, &xi) in x.iter().enumerate() {
            for (j, &yj) in y.iter().enumerate() {
                out[i * rb + j] = xi * yj;
            }
        }
        out
    };
    let mut table = Vec::with_capacity(rank * rank);
    for s in 0..rank {
        for t in 0..rank {
            let u = a.mul(&a.basis(s / rb), &a.basis(t / rb));
            let v = b.mul(&b.basis(s % rb), &b.basis(t % rb));
            table.push(pair_coords(&u.coords, &v.coords));
        }
    }
    let unit = pair_coords(&a.one().coords, &b.one().coords);
    // m_{A⊗B} = m_A⊗B + A⊗m_B: span additively against full bases
    let mut m_gens: Vec<Vec<u64>> = Vec::new();
    for g in a.max_ideal_gens() {
        for j in 0..rb {
            m_gens.push(pair_coords(g, &b.basis(j).coords));
        }
    }
    for g in b.max_ideal_gens() {
        for i in 0..ra {
            m_gens.push(pair_coords(&a.basis(i).coords, g));
        }
    }
    let residue: Vec<u64> = (0..rank)
        .map(|t| a.residue(&a.basis(t / rb)) * b.residue(&b.basis(t % rb)) % p)
        .collect();
    let ring = FiniteLocalAlgebra::new(
        format!("{}(x){}", a.name, b.name),
        p,
        ann,
        table,
        unit,
        m_gens,
        residue,
        caps,
    )?;
    let tensor_elt = move |t: &FiniteLocalAlgebra, x: &Elt, y: &Elt| -> Elt {
        t.elt(pair_coords(&x.coords, &y.coords))
    };
    Ok((ring, tensor_elt))
}

// ---- quotients and small extensions -----------------------------------------

/// Quotient of A by the ideal generated by the given elements, with the
/// projection morphism. The ideal must be proper.
pub fn quotient_by_ideal(
    a: &FiniteLocalAlgebra,
    gens: &[Elt],
    caps: &Caps,
) -> Result<(Arc<FiniteLocalAlgebra>, RingMorphism)> {
    for g in gens {
        a.check_owner(g)?;
        if a.is_unit(g) {
            return Err(Error::InvalidRing("quotient by the unit ideal".into()));
        }
    }
    let ideal = a.ideal_span(gens);
    let md = a.modulus();
    // quotient of the free module (ℤ/pᴺ)^rank by ideal gens + annihilator rows
    let mut cols: Vec<Vec<u64>> = ideal
        .smith_gens(a)
        .iter()
        .map(|e| e.coords.clone())
        .collect();
    for i in 0..a.rank {
        let mut v = vec![0u64; a.rank];
        v[i] = md.p_pow(a.ann[i]);
        cols.push(v);
    }
    let fq = quotient_of_free(md, a.rank, &cols);
    let new_rank = fq.gen_lifts.len();
    let new_ann: Vec<u32> = fq.exps.clone();
    let ann_for_project = new_ann.clone();
    caps.check(
        "ring cardinality",
        (a.p as u128).pow(fq.log_size()),
        caps.ring_elems,
    )?;

    let lift_elt = |j: usize| -> Elt {
        let nat: Vec<u64> = fq.gen_lifts[j]
            .iter()
            .zip(a.ann.iter())
            .map(|(&x, &e)| x % a.p.pow(e))
            .collect();
        a.elt(nat)
    };
    let project = |x: &Elt| -> Vec<u64> {
        fq.project(&x.coords)
            .iter()
            .zip(ann_for_project.iter())
            .map(|(&c, &e)| c % a.p.pow(e))
            .collect()
    };

    let mut table = Vec::with_capacity(new_rank * new_rank);
    for i in 0..new_rank {
        for j in 0..new_rank {
            table.push(project(&a.mul(&lift_elt(i), &lift_elt(j))));
        }
    }
    let unit = project(&a.one());
    let m_gens: Vec<Vec<u64>> = a
        .max_ideal_gens()
        .iter()
        .map(|g| project(&a.elt(g.clone())))
        .collect();
    let residue: Vec<u64> = (0..new_rank).map(|j| a.residue(&lift_elt(j))).collect();
    let ring = FiniteLocalAlgebra::new(
        format!("{}/I", a.name),
        a.p,
        new_ann,
        table,
        unit,
        m_gens,
        residue,
        caps,
    )?;
    let matrix: Vec<Vec<u64>> = (0..a.rank)
        .map(|i| {
            let e = a.basis(i);
            project(&e)
        })
        .collect();
    let phi = RingMorphism::new(a, &ring, matrix)?;
    Ok((ring, phi))
}

/// Outcome of the small-extension test.
#[derive(Debug, Clone)]
pub struct SmallExtension {
    pub is_small: bool,
    /// a generator of the kernel when the extension is small
    pub generator: Option<Elt>,
}

/// φ is a small extension iff ker φ is nonzero, principal, and killed by m_A.
pub fn is_small_extension(
    phi: &RingMorphism,
    a: &FiniteLocalAlgebra,
    b: &FiniteLocalAlgebra,
) -> Result<SmallExtension> {
    if !phi.is_surjective(a, b) {
        return Err(Error::NotSurjective);
    }
    let ker = phi.kernel(a, b);
    if ker.log_size() == 0 {
        return Ok(SmallExtension {
            is_small: false,
            generator: None,
        });
    }
    let elems = ker.elements(a);
    let killed = |t: &Elt| {
        a.max_ideal_gens()
            .iter()
            .all(|g| a.is_zero(&a.mul(t, &a.elt(g.clone()))))
    };
    // principal with m·ker = 0: scan for a generator (kernels are tiny);
    // m·(A·t) = 0 reduces to m·t = 0
    let mut elems_sorted = elems;
    elems_sorted.sort();
    for t in &elems_sorted {
        if a.is_zero(t) {
            continue;
        }
        if a.ideal_span(std::slice::from_ref(t)).log_size() == ker.log_size() {
            if killed(t) {
                return Ok(SmallExtension {
                    is_small: true,
                    generator: Some(t.clone()),
                });
            }
            return Ok(SmallExtension {
                is_small: false,
                generator: None,
            });
        }
    }
    Ok(SmallExtension {
        is_small: false,
        generator: None,
    })
}

/// One link of a small-extension chain.
#[derive(Debug, Clone)]
pub struct ChainLink {
    pub source: Arc<FiniteLocalAlgebra>,
    pub target: Arc<FiniteLocalAlgebra>,
    pub map: RingMorphism,
    pub kernel_generator: Elt,
}

/// Factors a surjection into a composable chain of small extensions whose
/// composite equals φ. The identity factors as the empty chain.
pub fn factor_into_small_extensions(
    phi: &RingMorphism,
    a: &Arc<FiniteLocalAlgebra>,
    b: &Arc<FiniteLocalAlgebra>,
    caps: &Caps,
) -> Result<Vec<ChainLink>> {
    if !phi.is_surjective(a, b) {
        return Err(Error::NotSurjective);
    }
    let mut chain: Vec<ChainLink> = Vec::new();
    let mut cur_ring = a.clone();
    let mut cur_map = phi.clone(); // cur_ring → B
    loop {
        let ker = cur_map.kernel(&cur_ring, b);
        if ker.log_size() == 0 {
            break;
        }
        // pick the lexicographically smallest nonzero socle element of the kernel
        let socle = cur_ring.socle();
        let mut candidates: Vec<Elt> = ker
            .elements(&cur_ring)
            .into_iter()
            .filter(|t| !cur_ring.is_zero(t) && socle.contains_elt(&cur_ring, t))
            .collect();
        candidates.sort();
        let t = candidates.into_iter().next().ok_or_else(|| {
            Error::Internal("nonzero kernel with trivial socle intersection".into())
        })?;
        let (next_ring, step) = quotient_by_ideal(&cur_ring, std::slice::from_ref(&t), caps)?;
        let se = is_small_extension(&step, &cur_ring, &next_ring)?;
        if !se.is_small {
            return Err(Error::Internal("socle quotient step is not small".into()));
        }
        // the remaining map next_ring → B: well-defined since (t) ⊆ ker
        let sect = |y_basis: usize| step.section(&cur_ring, &next_ring, &next_ring.basis(y_basis));
        let matrix: Vec<Vec<u64>> = (0..next_ring.rank)
            .map(|j| cur_map.apply(&cur_ring, b, &sect(j)).coords)
            .collect();
        let rest = RingMorphism::new(&next_ring, b, matrix)?;
        chain.push(ChainLink {
            source: cur_ring.clone(),
            target: next_ring.clone(),
            map: step,
            kernel_generator: se.generator.expect("small extension has a generator"),
        });
        cur_ring = next_ring;
        cur_map = rest;
    }
    Ok(chain)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn caps() -> Caps {
        Caps::default()
    }

    #[test]
    fn preset_f3_is_a_field() {
        let r = ring_zpn(3, 1, &caps()).unwrap();
        assert!(r.is_field());
        assert_eq!(r.size(), 3);
        assert_eq!(r.max_ideal_log_size(), 0);
    }

    #[test]
    fn preset_dual_numbers() {
        let r = ring_trunc(2, 2, &caps()).unwrap();
        assert_eq!(r.rank, 2);
        assert_eq!(r.size(), 4);
        // ε² = 0, m = (ε), m² = 0
        let eps = r.basis(1);
        assert!(r.is_zero(&r.mul(&eps, &eps)));
        assert_eq!(r.nilpotency, 2);
    }

    #[test]
    fn preset_z8() {
        let r = ring_zpn(2, 3, &caps()).unwrap();
        assert_eq!(r.size(), 8);
        // m = (2) with m³ = 0, m² ≠ 0
        assert_eq!(r.nilpotency, 3);
        let two = r.from_int(2);
        assert!(r.in_max_ideal(&two));
        assert!(!r.is_unit(&two));
        assert!(r.is_unit(&r.from_int(3)));
        assert_eq!(r.inv(&r.from_int(3)).unwrap(), r.from_int(3)); // 3·3 = 9 = 1
    }

    #[test]
    fn preset_mixed() {
        let r = ring_mixed(2, 2, &caps()).unwrap();
        assert_eq!(r.size(), 8);
        assert_eq!(r.nilpotency, 2); // m² = (p², px, x²) = 0 over ℤ/p²… p²=0? p=2,N=2: 4=0 ✓
        let x = r.basis(1);
        assert!(r.is_zero(&r.mul(&x, &x)));
        assert!(r.is_zero(&r.scalar_mul(2, &x)));
    }

    #[test]
    fn unknown_preset_rejected() {
        assert!(matches!(
            make_preset_ring("bogus", 3, None, None, &caps()),
            Err(Error::UnknownPreset(_))
        ));
        assert!(matches!(
            make_preset_ring("Zpn", 4, Some(1), None, &caps()),
            Err(Error::NotPrime(4))
        ));
    }

    #[test]
    fn cap_enforced() {
        let tight = Caps::default().with_ring_cap(10);
        assert!(matches!(
            ring_zpn(2, 4, &tight),
            Err(Error::CapExceeded { .. })
        ));
    }

    fn residue_map(
        a: &FiniteLocalAlgebra,
        fp: &FiniteLocalAlgebra,
    ) -> RingMorphism {
        let matrix: Vec<Vec<u64>> = (0..a.rank)
            .map(|i| vec![a.residue(&a.basis(i))])
            .collect();
        RingMorphism::new(a, fp, matrix).unwrap()
    }

    #[test]
    fn fiber_of_dual_numbers() {
        let c = caps();
        let dual = ring_trunc(3, 2, &c).unwrap();
        let fp = ring_zpn(3, 1, &c).unwrap();
        let phi = residue_map(&dual, &fp);
        let (a3, pr1, pr2) = fiber_product(&dual, &dual, &fp, &phi, &phi, &c).unwrap();
        assert_eq!(a3.size(), 27); // 𝔽_p-dimension 3
        assert!(pr1.is_surjective(&a3, &dual));
        assert!(pr2.is_surjective(&a3, &dual));
        // m³ = 0
        assert!(a3.nilpotency <= 3);
        // projections agree after composing with φ
        for x in a3.elements() {
            let l = phi.apply(&dual, &fp, &pr1.apply(&a3, &dual, &x));
            let r = phi.apply(&dual, &fp, &pr2.apply(&a3, &dual, &x));
            assert_eq!(l, r);
        }
    }

    #[test]
    fn fiber_z4_z4_over_z2() {
        let c = caps();
        let z4 = ring_zpn(2, 2, &c).unwrap();
        let z2 = ring_zpn(2, 1, &c).unwrap();
        let phi = residue_map(&z4, &z2);
        let (a3, _, _) = fiber_product(&z4, &z4, &z2, &phi, &phi, &c).unwrap();
        assert_eq!(a3.size(), 8); // pairs with equal parity
    }

    #[test]
    fn fiber_against_identity_is_isomorphic() {
        let c = caps();
        let z4 = ring_zpn(2, 2, &c).unwrap();
        let z2 = ring_zpn(2, 1, &c).unwrap();
        let psi = residue_map(&z4, &z2);
        let idm = RingMorphism::identity(&z2);
        let (a3, _, pr2) = fiber_product(&z2, &z4, &z2, &idm, &psi, &c).unwrap();
        assert_eq!(a3.size(), z4.size());
        assert!(pr2.is_surjective(&a3, &z4));
        // second projection is injective on a set of the same size ⟹ iso
        let mut seen = std::collections::BTreeSet::new();
        for x in a3.elements() {
            seen.insert(pr2.apply(&a3, &z4, &x).coords);
        }
        assert_eq!(seen.len() as u128, z4.size());
    }

    #[test]
    fn small_extension_checks() {
        let c = caps();
        let z4 = ring_zpn(2, 2, &c).unwrap();
        let z2 = ring_zpn(2, 1, &c).unwrap();
        let z8 = ring_zpn(2, 3, &c).unwrap();
        let phi42 = residue_map(&z4, &z2);
        let se = is_small_extension(&phi42, &z4, &z2).unwrap();
        assert!(se.is_small);
        assert_eq!(se.generator.unwrap(), z4.from_int(2));

        let dual = ring_trunc(5, 2, &c).unwrap();
        let f5 = ring_zpn(5, 1, &c).unwrap();
        let se = is_small_extension(&residue_map(&dual, &f5), &dual, &f5).unwrap();
        assert!(se.is_small);
        assert_eq!(se.generator.unwrap(), dual.basis(1));

        // ℤ/8 → ℤ/2 is not small: kernel (2) is not killed by m
        let phi82 = residue_map(&z8, &z2);
        let se = is_small_extension(&phi82, &z8, &z2).unwrap();
        assert!(!se.is_small);

        // ℤ/8 → ℤ/4 is small with generator 4
        let m48 = RingMorphism::new(&z8, &z4, vec![vec![1]]).unwrap();
        let se = is_small_extension(&m48, &z8, &z4).unwrap();
        assert!(se.is_small);
        assert_eq!(se.generator.unwrap(), z8.from_int(4));
    }

    #[test]
    fn factor_z8_to_z2() {
        let c = caps();
        let z8 = ring_zpn(2, 3, &c).unwrap();
        let z2 = ring_zpn(2, 1, &c).unwrap();
        let phi = residue_map(&z8, &z2);
        let chain = factor_into_small_extensions(&phi, &z8, &z2, &c).unwrap();
        assert_eq!(chain.len(), 2); // ℤ/8 → ℤ/4 → ℤ/2
        assert_eq!(chain[0].source.size(), 8);
        assert_eq!(chain[0].target.size(), 4);
        assert_eq!(chain[1].target.size(), 2);
        // composite reproduces φ on every element
        for x in z8.elements() {
            let y1 = chain[0].map.apply(&chain[0].source, &chain[0].target, &x);
            let y2 = chain[1].map.apply(&chain[1].source, &chain[1].target, &y1);
            // identify the final quotient with ℤ/2 via residues
            assert_eq!(
                chain[1].target.residue(&y2),
                z2.residue(&phi.apply(&z8, &z2, &x))
            );
        }
    }

    #[test]
    fn factor_identity_is_empty() {
        let c = caps();
        let z4 = ring_zpn(2, 2, &c).unwrap();
        let idm = RingMorphism::identity(&z4);
        let chain = factor_into_small_extensions(&idm, &z4, &z4, &c).unwrap();
        assert!(chain.is_empty());
    }

    #[test]
    fn factor_fiber_product_of_duals() {
        let c = caps();
        let dual = ring_trunc(2, 2, &c).unwrap();
        let f2 = ring_zpn(2, 1, &c).unwrap();
        let phi = residue_map(&dual, &f2);
        let (a3, _, _) = fiber_product(&dual, &dual, &f2, &phi, &phi, &c).unwrap();
        let res = residue_map(&a3, &f2);
        let chain = factor_into_small_extensions(&res, &a3, &f2, &c).unwrap();
        assert_eq!(chain.len(), 2); // kernel has p² elements, killed by m
    }

    #[test]
    fn section_inverts_surjection() {
        let c = caps();
        let z8 = ring_zpn(2, 3, &c).unwrap();
        let z4 = ring_zpn(2, 2, &c).unwrap();
        let phi = RingMorphism::new(&z8, &z4, vec![vec![1]]).unwrap();
        for y in z4.elements() {
            let x = phi.section(&z8, &z4, &y);
            assert_eq!(phi.apply(&z8, &z4, &x), y);
        }
    }

    #[test]
    fn morphism_composition_associative() {
        let c = caps();
        let z8 = ring_zpn(2, 3, &c).unwrap();
        let z4 = ring_zpn(2, 2, &c).unwrap();
        let z2 = ring_zpn(2, 1, &c).unwrap();
        let a = RingMorphism::new(&z8, &z4, vec![vec![1]]).unwrap();
        let b = RingMorphism::new(&z4, &z2, vec![vec![1]]).unwrap();
        let ab = a.then(&b, &z8, &z4, &z2);
        for x in z8.elements() {
            assert_eq!(
                ab.apply(&z8, &z2, &x),
                b.apply(&z4, &z2, &a.apply(&z8, &z4, &x))
            );
        }
    }

    #[test]
    fn socle_of_z8() {
        let c = caps();
        let z8 = ring_zpn(2, 3, &c).unwrap();
        let s = z8.socle();
        assert_eq!(s.log_size(), 1); // {0, 4}
        assert!(s.contains_elt(&z8, &z8.from_int(4)));
        assert!(!s.contains_elt(&z8, &z8.from_int(2)));
    }
}

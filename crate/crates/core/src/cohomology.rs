//! Inhomogeneous group cohomology H¹ and H² with adjoint coefficients, plus
//! the obstruction cochain for lifting along a small extension.
//!
//! Cochains live on the full group (memory O(|G|ⁱ·n²) under the cap), the
//! cocycle conditions are fed to the sparse kernel solver, and coboundary
//! spaces are kept as echelons for membership queries. Everything is over
//! 𝔽_p.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fp::{matmul, Echelon, KernelSolver};
use crate::group::FiniteGroup;
use crate::matrix::Mat;
use crate::rep::MatrixRep;
use crate::ring::{Elt, FiniteLocalAlgebra, RingMorphism};
use crate::Caps;

/// The conjugation action of G on Mₙ(𝔽_p) through a residual representation.
#[derive(Debug, Clone)]
pub struct Adjoint {
    pub p: u64,
    pub n: usize,
    pub order: usize,
    mats: Vec<Vec<u8>>,
    invs: Vec<Vec<u8>>,
}

impl Adjoint {
    pub fn new(rep: &MatrixRep) -> Result<Adjoint> {
        if !rep.ring.is_field() {
            return Err(Error::BaseNotField);
        }
        let p = rep.ring.p;
        let n = rep.dim;
        let mats: Vec<Vec<u8>> = rep
            .images
            .iter()
            .map(|m| m.residue(&rep.ring).iter().map(|&x| x as u8).collect())
            .collect();
        let invs: Vec<Vec<u8>> = (0..rep.group.order)
            .map(|g| mats[rep.group.inv(g)].clone())
            .collect();
        Ok(Adjoint {
            p,
            n,
            order: rep.group.order,
            mats,
            invs,
        })
    }

    /// ρ̄(g)·M·ρ̄(g)⁻¹
    pub fn act(&self, g: usize, m: &[u8]) -> Vec<u8> {
        matmul(self.p, self.n, &matmul(self.p, self.n, &self.mats[g], m), &self.invs[g])
    }

    pub fn mat(&self, g: usize) -> &[u8] {
        &self.mats[g]
    }

    /// Coefficient of var (h,γ,δ) in entry (α,β) of Ad(g)·c(h):
    /// ρ(g)_{αγ}·ρ(g)⁻¹_{δβ}.
    fn ad_coeff(&self, g: usize, alpha: usize, beta: usize, gamma: usize, delta: usize) -> u8 {
        let n = self.n;
        ((self.mats[g][alpha * n + gamma] as u32 * self.invs[g][delta * n + beta] as u32)
            % self.p as u32) as u8
    }
}

fn push_acc(acc: &mut BTreeMap<usize, u32>, idx: usize, coef: u32, p: u64) {
    if coef % p as u32 == 0 {
        return;
    }
    *acc.entry(idx).or_insert(0) += coef;
}

fn acc_to_row(acc: BTreeMap<usize, u32>, p: u64) -> Vec<(usize, u8)> {
    acc.into_iter()
        .filter_map(|(i, c)| {
            let c = (c % p as u32) as u8;
            if c == 0 {
                None
            } else {
                Some((i, c))
            }
        })
        .collect()
}

/// First cohomology: cocycles c with c(gh) = c(g) + Ad(g)c(h).
pub struct H1 {
    pub p: u64,
    pub n: usize,
    pub order: usize,
    pub vars: usize,
    pub dim: usize,
    pub z_dim: usize,
    pub b_dim: usize,
    /// full basis of Z¹
    pub z_basis: Vec<Vec<u8>>,
    /// representatives of an H¹ basis (subset of Z¹, independent mod B¹)
    pub reps: Vec<Vec<u8>>,
    pub b_ech: Echelon,
}

impl H1 {
    /// Coordinates of a cocycle's class w.r.t. `reps`, if it is a cocycle.
    pub fn class_coords(&self, cocycle: &[u8]) -> Option<Vec<u8>> {
        // reduce mod B¹, then express in the reduced representative span
        let mut v = cocycle.to_vec();
        self.b_ech.reduce(&mut v);
        let reduced_reps: Vec<Vec<u8>> = self
            .reps
            .iter()
            .map(|r| {
                let mut w = r.clone();
                self.b_ech.reduce(&mut w);
                w
            })
            .collect();
        express_in_span(self.p, &reduced_reps, &v)
    }
}

/// Solves a small dense system: v = Σ aᵢ·basis[i]; None if inconsistent.
pub fn express_in_span(p: u64, basis: &[Vec<u8>], v: &[u8]) -> Option<Vec<u8>> {
    let k = basis.len();
    if k == 0 {
        return if v.iter().all(|&x| x == 0) {
            Some(vec![])
        } else {
            None
        };
    }
    // joint elimination tracking coefficients
    let mut coeffs: Vec<Vec<u8>> = Vec::new(); // row i as combination of basis
    let mut rows: Vec<Vec<u8>> = Vec::new();
    for (i, b) in basis.iter().enumerate() {
        let mut unit = vec![0u8; k];
        unit[i] = 1;
        rows.push(b.clone());
        coeffs.push(unit);
    }
    let vars = v.len();
    let mut used = vec![false; k];
    let mut w = v.to_vec();
    let mut wc = vec![0u8; k];
    let p32 = p as u32;
    for col in 0..vars {
        let Some(r) = (0..k).find(|&r| !used[r] && rows[r][col] != 0) else {
            continue;
        };
        used[r] = true;
        let inv = crate::fp::inv_mod(rows[r][col] as u16, p as u16) as u32;
        for rr in 0..k {
            if rr == r || rows[rr][col] == 0 {
                continue;
            }
            let f = rows[rr][col] as u32 * inv % p32;
            let neg = (p32 - f) % p32;
            for j in 0..vars {
                rows[rr][j] = ((rows[rr][j] as u32 + neg * rows[r][j] as u32) % p32) as u8;
            }
            for j in 0..k {
                coeffs[rr][j] = ((coeffs[rr][j] as u32 + neg * coeffs[r][j] as u32) % p32) as u8;
            }
        }
        if w[col] != 0 {
            let f = w[col] as u32 * inv % p32;
            let neg = (p32 - f) % p32;
            for j in 0..vars {
                w[j] = ((w[j] as u32 + neg * rows[r][j] as u32) % p32) as u8;
            }
            for j in 0..k {
                wc[j] = ((wc[j] as u32 + f * coeffs[r][j] as u32) % p32) as u8;
            }
        }
    }
    if w.iter().any(|&x| x != 0) {
        return None;
    }
    Some(wc)
}

pub fn h1(group: &FiniteGroup, rhobar: &MatrixRep, caps: &Caps) -> Result<H1> {
    let adj = Adjoint::new(rhobar)?;
    h1_with_adjoint(group, &adj, caps)
}

pub fn h1_with_adjoint(group: &FiniteGroup, adj: &Adjoint, caps: &Caps) -> Result<H1> {
    let p = adj.p;
    let n = adj.n;
    let n2 = n * n;
    let order = group.order;
    let vars = order * n2;
    caps.check("cochain coordinates", vars as u128, caps.cochain_coords)?;
    let var = |g: usize, a: usize, b: usize| g * n2 + a * n + b;

    let mut solver = KernelSolver::new(p, vars);
    for g in 0..order {
        for h in 0..order {
            let gh = group.mul(g, h);
            for alpha in 0..n {
                for beta in 0..n {
                    let mut acc = BTreeMap::new();
                    push_acc(&mut acc, var(gh, alpha, beta), 1, p);
                    push_acc(&mut acc, var(g, alpha, beta), (p - 1) as u32, p);
                    for gamma in 0..n {
                        for delta in 0..n {
                            let c = adj.ad_coeff(g, alpha, beta, gamma, delta) as u32;
                            if c != 0 {
                                push_acc(
                                    &mut acc,
                                    var(h, gamma, delta),
                                    (p as u32 - c) % p as u32,
                                    p,
                                );
                            }
                        }
                    }
                    let row = acc_to_row(acc, p);
                    if !row.is_empty() {
                        solver.add_constraint(&row);
                    }
                }
            }
        }
    }
    let z_basis = solver.into_basis();
    let z_dim = z_basis.len();

    // B¹ = image of m ↦ (g ↦ m − Ad(g)m)
    let mut b_ech = Echelon::new(p);
    for a in 0..n {
        for b in 0..n {
            let mut m = vec![0u8; n2];
            m[a * n + b] = 1;
            let mut img = vec![0u8; vars];
            for g in 0..order {
                let ad = adj.act(g, &m);
                for (e, &v) in ad.iter().enumerate() {
                    let base = m[e] as u32;
                    img[g * n2 + e] = ((base + (p as u32 - v as u32)) % p as u32) as u8;
                }
            }
            b_ech.insert(img);
        }
    }
    let b_dim = b_ech.rank();

    let mut reps = Vec::new();
    let mut combined = b_ech.clone();
    for z in &z_basis {
        if combined.insert(z.clone()) {
            reps.push(z.clone());
        }
    }
    Ok(H1 {
        p,
        n,
        order,
        vars,
        dim: z_dim - b_dim,
        z_dim,
        b_dim,
        z_basis,
        reps,
        b_ech,
    })
}

/// Second cohomology with normalized cochains.
pub struct H2 {
    pub p: u64,
    pub n: usize,
    pub order: usize,
    pub vars: usize,
    pub dim: usize,
    pub z_dim: usize,
    pub b_dim: usize,
    pub b_ech: Echelon,
}

impl H2 {
    pub fn var(&self, g: usize, h: usize, a: usize, b: usize) -> usize {
        (g * self.order + h) * self.n * self.n + a * self.n + b
    }

    pub fn class_vanishes(&self, cochain: &[u8]) -> bool {
        self.b_ech.contains(cochain)
    }

    /// Canonical residual mod B²; equal residuals mean equal classes.
    pub fn class_residual(&self, cochain: &[u8]) -> Vec<u8> {
        let mut v = cochain.to_vec();
        self.b_ech.reduce(&mut v);
        v
    }
}

pub fn h2(group: &FiniteGroup, rhobar: &MatrixRep, caps: &Caps) -> Result<H2> {
    let adj = Adjoint::new(rhobar)?;
    h2_with_adjoint(group, &adj, caps)
}

pub fn h2_with_adjoint(group: &FiniteGroup, adj: &Adjoint, caps: &Caps) -> Result<H2> {
    let p = adj.p;
    let n = adj.n;
    let n2 = n * n;
    let order = group.order;
    let vars = order * order * n2;
    caps.check("cochain coordinates", vars as u128, caps.cochain_coords)?;
    let var = |g: usize, h: usize, a: usize, b: usize| (g * order + h) * n2 + a * n + b;

    let mut solver = KernelSolver::new(p, vars);
    // normalization: kill the blocks c(1,h) and c(g,1)
    for h in 0..order {
        for e in 0..n2 {
            solver.add_constraint(&[(h * n2 + e, 1)]);
        }
    }
    for g in 0..order {
        for e in 0..n2 {
            solver.add_constraint(&[(g * order * n2 + e, 1)]);
        }
    }
    // cocycle condition Ad(g)c(h,k) − c(gh,k) + c(g,hk) − c(g,h) = 0
    for g in 0..order {
        for h in 0..order {
            let gh = group.mul(g, h);
            for k in 0..order {
                let hk = group.mul(h, k);
                for alpha in 0..n {
                    for beta in 0..n {
                        let mut acc = BTreeMap::new();
                        for gamma in 0..n {
                            for delta in 0..n {
                                let c = adj.ad_coeff(g, alpha, beta, gamma, delta) as u32;
                                push_acc(&mut acc, var(h, k, gamma, delta), c, p);
                            }
                        }
                        let m1 = (p - 1) as u32;
                        push_acc(&mut acc, var(gh, k, alpha, beta), m1, p);
                        push_acc(&mut acc, var(g, hk, alpha, beta), 1, p);
                        push_acc(&mut acc, var(g, h, alpha, beta), m1, p);
                        let row = acc_to_row(acc, p);
                        if !row.is_empty() {
                            solver.add_constraint(&row);
                        }
                    }
                }
            }
        }
    }
    let z_dim = solver.nullity();

    // B² = d¹(normalized 1-cochains)
    let mut b_ech = Echelon::new(p);
    for h0 in 1..order {
        for e in 0..n2 {
            let mut b = vec![0u8; order * n2];
            b[h0 * n2 + e] = 1;
            let img = coboundary_1(group, adj, &b);
            b_ech.insert(img);
        }
    }
    let b_dim = b_ech.rank();
    Ok(H2 {
        p,
        n,
        order,
        vars,
        dim: z_dim - b_dim,
        z_dim,
        b_dim,
        b_ech,
    })
}

/// d¹b(g,h) = Ad(g)b(h) − b(gh) + b(g).
pub fn coboundary_1(group: &FiniteGroup, adj: &Adjoint, b: &[u8]) -> Vec<u8> {
    let p = adj.p as u32;
    let n2 = adj.n * adj.n;
    let order = group.order;
    let mut img = vec![0u8; order * order * n2];
    for g in 0..order {
        for h in 0..order {
            let gh = group.mul(g, h);
            let ad = adj.act(g, &b[h * n2..(h + 1) * n2]);
            for e in 0..n2 {
                let val = (ad[e] as u32 + p - b[gh * n2 + e] as u32 + b[g * n2 + e] as u32) % p;
                img[(g * order + h) * n2 + e] = val as u8;
            }
        }
    }
    img
}

/// Checks the 2-cocycle condition for a full 2-cochain.
pub fn is_two_cocycle(group: &FiniteGroup, adj: &Adjoint, c: &[u8]) -> bool {
    let p = adj.p as u32;
    let n2 = adj.n * adj.n;
    let order = group.order;
    let block = |g: usize, h: usize| &c[(g * order + h) * n2..(g * order + h + 1) * n2];
    for g in 0..order {
        for h in 0..order {
            let gh = group.mul(g, h);
            for k in 0..order {
                let hk = group.mul(h, k);
                let ad = adj.act(g, block(h, k));
                for e in 0..n2 {
                    let lhs = (ad[e] as u32 + block(g, hk)[e] as u32
                        + 2 * p
                        - block(gh, k)[e] as u32
                        - block(g, h)[e] as u32)
                        % p;
                    if lhs != 0 {
                        return false;
                    }
                }
            }
        }
    }
    true
}

/// The obstruction 2-cochain of lifting ρ_B along a small extension
/// φ: A → B with kernel generator t: pick an entrywise set-theoretic lift L
/// with L(1) = 1 and measure L(g)L(h)L(gh)⁻¹ − 1 in units of t.
///
/// With `perturb` a different set-theoretic lift is chosen; the class in H²
/// must not change.
pub fn obstruction_cochain(
    rep_b: &MatrixRep,
    a: &Arc<FiniteLocalAlgebra>,
    phi: &RingMorphism,
    t: &Elt,
    perturb: bool,
) -> Result<Vec<u8>> {
    let b = &rep_b.ring;
    let group = &rep_b.group;
    let n = rep_b.dim;
    let p = a.p;
    // scalar multiples of t, for exact division
    let mut t_table: BTreeMap<Vec<u64>, u8> = BTreeMap::new();
    for s in 0..p {
        t_table.insert(a.scalar_mul(s, t).coords.clone(), s as u8);
    }
    let lift_mat = |g: usize| -> Mat {
        if g == 0 {
            return Mat::identity(a, n);
        }
        let mut m = Mat::zero(a, n);
        for i in 0..n {
            for j in 0..n {
                let mut e = phi.section(a, b, rep_b.images[g].at(i, j));
                if perturb && i == 0 && j == 0 {
                    e = a.add(&e, &a.scalar_mul((g as u64) % p, t));
                }
                m.set(i, j, e);
            }
        }
        m
    };
    let lifts: Vec<Mat> = (0..group.order).map(lift_mat).collect();
    let inv_lifts: Vec<Mat> = lifts
        .iter()
        .map(|m| m.inv(a).expect("lift of an invertible matrix"))
        .collect();
    let n2 = n * n;
    let mut out = vec![0u8; group.order * group.order * n2];
    for g in 0..group.order {
        for h in 0..group.order {
            let gh = group.mul(g, h);
            let w = lifts[g]
                .mul(a, &lifts[h])
                .mul(a, &inv_lifts[gh])
                .sub(a, &Mat::identity(a, n));
            for (e, entry) in w.entries.iter().enumerate() {
                let s = t_table.get(&entry.coords).ok_or_else(|| {
                    Error::Internal("obstruction entry outside the kernel line".into())
                })?;
                out[(g * group.order + h) * n2 + e] = *s;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{group_cyclic, group_product, group_quaternion, group_symmetric};
    use crate::matrix::Mat;
    use crate::rep::MatrixRep;
    use crate::ring::{is_small_extension, ring_zpn};

    fn caps() -> Caps {
        Caps::default()
    }

    fn trivial_char(order: usize, p: u64) -> (Arc<FiniteGroup>, MatrixRep) {
        let g = group_cyclic(order, &caps()).unwrap();
        let r = ring_zpn(p, 1, &caps()).unwrap();
        let rep = MatrixRep::trivial(g.clone(), r, 1);
        (g, rep)
    }

    #[test]
    fn h1_of_cp_trivial_character() {
        for p in [2u64, 3, 5] {
            let (g, rep) = trivial_char(p as usize, p);
            let h = h1(&g, &rep, &caps()).unwrap();
            assert_eq!(h.dim, 1, "H¹(C_{p}, F_{p})");
        }
    }

    #[test]
    fn h1_vanishes_for_coprime_order() {
        let g = group_symmetric(3, &caps()).unwrap();
        let r = ring_zpn(5, 1, &caps()).unwrap();
        let t = Mat::from_int_rows(&r, &[vec![0, 1], vec![1, 0]]);
        let c = Mat::from_int_rows(&r, &[vec![0, 4], vec![1, 4]]);
        let rep = MatrixRep::make(g.clone(), r, vec![t, c], &caps()).unwrap();
        let h = h1(&g, &rep, &caps()).unwrap();
        assert_eq!(h.dim, 0);
        let h = h2(&g, &rep, &caps()).unwrap();
        assert_eq!(h.dim, 0);
    }

    #[test]
    fn h1_h2_of_trivial_group() {
        let (g, rep) = trivial_char(1, 3);
        assert_eq!(h1(&g, &rep, &caps()).unwrap().dim, 0);
        assert_eq!(h2(&g, &rep, &caps()).unwrap().dim, 0);
    }

    #[test]
    fn h2_of_cp_trivial_character() {
        for p in [2u64, 3] {
            let (g, rep) = trivial_char(p as usize, p);
            let h = h2(&g, &rep, &caps()).unwrap();
            assert_eq!(h.dim, 1, "H²(C_{p}, F_{p})");
        }
    }

    #[test]
    fn q8_mod3_rigid() {
        let g = group_quaternion(&caps()).unwrap();
        let r = ring_zpn(3, 1, &caps()).unwrap();
        let i = Mat::from_int_rows(&r, &[vec![0, 2], vec![1, 0]]);
        let j = Mat::from_int_rows(&r, &[vec![1, 1], vec![1, 2]]);
        let rep = MatrixRep::make(g.clone(), r, vec![i, j], &caps()).unwrap();
        assert!(crate::rep::is_absolutely_irreducible(&rep).unwrap());
        assert_eq!(h1(&g, &rep, &caps()).unwrap().dim, 0);
        assert_eq!(h2(&g, &rep, &caps()).unwrap().dim, 0);
    }

    #[test]
    fn coboundaries_are_cocycles() {
        // d²∘d¹ = 0 on a spanning set
        let g = group_cyclic(4, &caps()).unwrap();
        let r = ring_zpn(2, 1, &caps()).unwrap();
        let m = Mat::from_int_rows(&r, &[vec![1, 1], vec![0, 1]]);
        let rep = MatrixRep::make(g.clone(), r, vec![m], &caps()).unwrap();
        let adj = Adjoint::new(&rep).unwrap();
        let n2 = 4;
        for h0 in 0..g.order {
            for e in 0..n2 {
                let mut b = vec![0u8; g.order * n2];
                b[h0 * n2 + e] = 1;
                let img = coboundary_1(&g, &adj, &b);
                assert!(is_two_cocycle(&g, &adj, &img));
            }
        }
    }

    #[test]
    fn obstruction_of_liftable_rep_vanishes() {
        let c = caps();
        let g = group_cyclic(2, &c).unwrap();
        let z8 = ring_zpn(2, 3, &c).unwrap();
        let z4 = ring_zpn(2, 2, &c).unwrap();
        let z2 = ring_zpn(2, 1, &c).unwrap();
        let phi = RingMorphism::new(&z8, &z4, vec![vec![1]]).unwrap();
        let se = is_small_extension(&phi, &z8, &z4).unwrap();
        let t = se.generator.unwrap();
        // trivial 2-dim rep over ℤ/4 lifts trivially
        let rep_b = MatrixRep::trivial(g.clone(), z4.clone(), 2);
        let rbar = MatrixRep::trivial(g.clone(), z2.clone(), 2);
        let adj = Adjoint::new(&rbar).unwrap();
        let co = obstruction_cochain(&rep_b, &z8, &phi, &t, false).unwrap();
        assert!(is_two_cocycle(&g, &adj, &co));
        let h = h2(&g, &rbar, &c).unwrap();
        assert!(h.class_vanishes(&co));
    }

    #[test]
    fn obstruction_detects_non_liftable_rep() {
        // over C₂×C₂ at p = 2: a ↦ 1+2E₁₂ mod 4 squares to 1+4E₁₂ ≠ 1 mod 8
        let c = caps();
        let c2 = group_cyclic(2, &c).unwrap();
        let g = group_product(&c2, &c2, &c).unwrap();
        let z8 = ring_zpn(2, 3, &c).unwrap();
        let z4 = ring_zpn(2, 2, &c).unwrap();
        let z2 = ring_zpn(2, 1, &c).unwrap();
        let phi = RingMorphism::new(&z8, &z4, vec![vec![1]]).unwrap();
        let t = is_small_extension(&phi, &z8, &z4)
            .unwrap()
            .generator
            .unwrap();
        let ma = Mat::from_int_rows(&z4, &[vec![1, 2], vec![0, 1]]);
        let mb = Mat::identity(&z4, 2);
        let rep_b = MatrixRep::make(g.clone(), z4.clone(), vec![ma, mb], &c).unwrap();
        let rbar = MatrixRep::trivial(g.clone(), z2.clone(), 2);
        let adj = Adjoint::new(&rbar).unwrap();
        let co = obstruction_cochain(&rep_b, &z8, &phi, &t, false).unwrap();
        assert!(is_two_cocycle(&g, &adj, &co));
        let h = h2(&g, &rbar, &c).unwrap();
        assert!(!h.class_vanishes(&co));
    }

    #[test]
    fn obstruction_class_independent_of_lift() {
        let c = caps();
        let c2 = group_cyclic(2, &c).unwrap();
        let g = group_product(&c2, &c2, &c).unwrap();
        let z8 = ring_zpn(2, 3, &c).unwrap();
        let z4 = ring_zpn(2, 2, &c).unwrap();
        let z2 = ring_zpn(2, 1, &c).unwrap();
        let phi = RingMorphism::new(&z8, &z4, vec![vec![1]]).unwrap();
        let t = is_small_extension(&phi, &z8, &z4)
            .unwrap()
            .generator
            .unwrap();
        let ma = Mat::from_int_rows(&z4, &[vec![1, 2], vec![0, 1]]);
        let mb = Mat::from_int_rows(&z4, &[vec![3, 0], vec![0, 1]]);
        let rep_b = MatrixRep::make(g.clone(), z4.clone(), vec![ma, mb], &c).unwrap();
        let rbar = MatrixRep::trivial(g.clone(), z2.clone(), 2);
        let h = h2(&g, &rbar, &c).unwrap();
        let co1 = obstruction_cochain(&rep_b, &z8, &phi, &t, false).unwrap();
        let co2 = obstruction_cochain(&rep_b, &z8, &phi, &t, true).unwrap();
        assert_eq!(h.class_residual(&co1), h.class_residual(&co2));
    }
}

//! Matrix representations of finite groups over finite local rings.
//!
//! A representation stores its full image table. Construction propagates
//! generator images along the Cayley table and checks every product against
//! the table, which proves the homomorphism property; fixture constructors
//! additionally run the all-pairs scan.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::group::{FiniteGroup, GroupHom};
use crate::matrix::Mat;
use crate::ring::{tensor_algebra, Elt, FiniteLocalAlgebra, RingMorphism};
use crate::zmod::{kernel_basis, ZMat};
use crate::Caps;

#[derive(Debug, Clone)]
pub struct MatrixRep {
    pub group: Arc<FiniteGroup>,
    pub ring: Arc<FiniteLocalAlgebra>,
    pub dim: usize,
    /// image table indexed by group element
    pub images: Vec<Mat>,
}

impl MatrixRep {
    /// Builds the full image table from generator images and verifies the
    /// homomorphism property exhaustively.
    pub fn make(
        group: Arc<FiniteGroup>,
        ring: Arc<FiniteLocalAlgebra>,
        gen_images: Vec<Mat>,
        caps: &Caps,
    ) -> Result<MatrixRep> {
        let rep = Self::from_gen_images(group, ring, gen_images, caps)?;
        // all-pairs verification on top of the propagation consistency check
        let g = &rep.group;
        for a in 0..g.order {
            for b in 0..g.order {
                let prod = rep.images[a].mul(&rep.ring, &rep.images[b]);
                if prod != rep.images[g.mul(a, b)] {
                    return Err(Error::NotHomomorphism { g: a, h: b });
                }
            }
        }
        Ok(rep)
    }

    /// Propagation + consistency over all (element, generator) pairs; this
    /// already implies the homomorphism property.
    pub fn from_gen_images(
        group: Arc<FiniteGroup>,
        ring: Arc<FiniteLocalAlgebra>,
        gen_images: Vec<Mat>,
        caps: &Caps,
    ) -> Result<MatrixRep> {
        if gen_images.len() != group.generators.len() {
            return Err(Error::Precondition(
                "one image per distinguished generator required".into(),
            ));
        }
        let n = gen_images.first().map_or(1, |m| m.n);
        if n > caps.dim {
            return Err(Error::DimensionCap(n, caps.dim));
        }
        for (i, m) in gen_images.iter().enumerate() {
            ring.check_owner(&m.entries[0])?;
            if m.n != n {
                return Err(Error::Precondition("generator image sizes differ".into()));
            }
            if !m.is_invertible(&ring) {
                return Err(Error::NotInvertible(i));
            }
        }
        let images = propagate(&group, &ring, &gen_images)?;
        Ok(MatrixRep {
            group,
            ring,
            dim: n,
            images,
        })
    }

    pub fn trivial(group: Arc<FiniteGroup>, ring: Arc<FiniteLocalAlgebra>, n: usize) -> MatrixRep {
        let images = vec![Mat::identity(&ring, n); group.order];
        MatrixRep {
            group,
            ring,
            dim: n,
            images,
        }
    }

    /// Generator images, the compact form of the representation.
    pub fn gen_images(&self) -> Vec<Mat> {
        self.group
            .generators
            .iter()
            .map(|&s| self.images[s as usize].clone())
            .collect()
    }

    /// Canonical key: concatenated generator-image coordinates.
    pub fn key(&self) -> Vec<u64> {
        let mut k = Vec::new();
        for &s in &self.group.generators {
            k.extend(self.images[s as usize].key());
        }
        k
    }

    pub fn equal_as_map(&self, other: &MatrixRep) -> bool {
        self.ring.id() == other.ring.id() && self.images == other.images
    }
}

/// BFS propagation with full (element, generator) consistency checking.
pub(crate) fn propagate(
    group: &FiniteGroup,
    ring: &FiniteLocalAlgebra,
    gen_images: &[Mat],
) -> Result<Vec<Mat>> {
    let n = gen_images.first().map_or(1, |m| m.n);
    let mut images: Vec<Option<Mat>> = vec![None; group.order];
    images[0] = Some(Mat::identity(ring, n));
    let mut queue = std::collections::VecDeque::from([0usize]);
    while let Some(g) = queue.pop_front() {
        for (si, &s) in group.generators.iter().enumerate() {
            let h = group.mul(g, s as usize);
            let prod = images[g].as_ref().unwrap().mul(ring, &gen_images[si]);
            match &images[h] {
                None => {
                    images[h] = Some(prod);
                    queue.push_back(h);
                }
                Some(existing) => {
                    if *existing != prod {
                        return Err(Error::NotHomomorphism { g, h: s as usize });
                    }
                }
            }
        }
    }
    // second pass: every (g, s) product must agree (the BFS only checks each
    // first arrival; collisions after dequeue are caught here)
    let images: Vec<Mat> = images.into_iter().map(|m| m.unwrap()).collect();
    for g in 0..group.order {
        for (si, &s) in group.generators.iter().enumerate() {
            let h = group.mul(g, s as usize);
            if images[g].mul(ring, &gen_images[si]) != images[h] {
                return Err(Error::NotHomomorphism { g, h: s as usize });
            }
        }
    }
    Ok(images)
}

/// Entrywise base change along φ; functorial in φ.
pub fn reduce_rep(
    rep: &MatrixRep,
    phi: &RingMorphism,
    target: &Arc<FiniteLocalAlgebra>,
) -> Result<MatrixRep> {
    if phi.source != rep.ring.id() || phi.target != target.id() {
        return Err(Error::RingMismatch {
            expected: rep.ring.id(),
            got: phi.source,
        });
    }
    let images: Vec<Mat> = rep
        .images
        .iter()
        .map(|m| m.map(&rep.ring, target, phi))
        .collect();
    Ok(MatrixRep {
        group: rep.group.clone(),
        ring: target.clone(),
        dim: rep.dim,
        images,
    })
}

/// Burnside span test over 𝔽_p: the image spans the full matrix algebra iff
/// the representation is absolutely irreducible.
pub fn is_absolutely_irreducible(rep: &MatrixRep) -> Result<bool> {
    if !rep.ring.is_field() {
        return Err(Error::BaseNotField);
    }
    let p = rep.ring.p;
    let n2 = rep.dim * rep.dim;
    // row echelon over F_p of the image vectors
    let mut basis: Vec<Vec<u64>> = Vec::new();
    for m in &rep.images {
        let mut v = m.residue(&rep.ring);
        for b in &basis {
            let lead = b.iter().position(|&x| x != 0).unwrap();
            if v[lead] != 0 {
                let f = v[lead] * crate::zmod::pow_mod(b[lead], p - 2, p) % p;
                for (vi, bi) in v.iter_mut().zip(b.iter()) {
                    *vi = (*vi + (p - f) * bi) % p;
                }
            }
        }
        if v.iter().any(|&x| x != 0) {
            basis.push(v);
            basis.sort_by_key(|b| b.iter().position(|&x| x != 0).unwrap());
        }
        if basis.len() == n2 {
            return Ok(true);
        }
    }
    Ok(basis.len() == n2)
}

/// Smith generators of the commutant {X : Xρ(s) = ρ(s)X ∀s}, together with
/// its exact cardinality. The scalars A·1 always embed; absolute
/// irreducibility of the reduction forces equality.
pub struct Centralizer {
    pub generators: Vec<Mat>,
    pub log_size: u32,
}

impl Centralizer {
    pub fn size(&self, ring: &FiniteLocalAlgebra) -> u128 {
        (ring.p as u128).pow(self.log_size)
    }
}

pub fn centralizer(rep: &MatrixRep) -> Centralizer {
    let ring = &rep.ring;
    let md = ring.modulus();
    let n = rep.dim;
    let n2 = n * n;
    let rank = ring.rank;
    let dim = n2 * rank;
    let gens: Vec<&Mat> = rep
        .group
        .generators
        .iter()
        .map(|&s| &rep.images[s as usize])
        .collect();
    // columns: natural basis E_kl ⊗ e_c ↦ stacked scaled coords of
    // (E ρ(s) − ρ(s) E) over all generators s
    let mut big = ZMat::zero(md, gens.len() * dim, dim);
    for k in 0..n {
        for l in 0..n {
            for c in 0..rank {
                let col = (k * n + l) * rank + c;
                let mut unit = Mat::zero(ring, n);
                unit.set(k, l, ring.basis(c));
                for (gi, gm) in gens.iter().enumerate() {
                    let d = unit.mul(ring, gm).sub(ring, &gm.mul(ring, &unit));
                    for (ei, e) in d.entries.iter().enumerate() {
                        let scaled = ring.embed(&e.coords);
                        for (ci, &s) in scaled.iter().enumerate() {
                            big.set(gi * dim + ei * rank + ci, col, s);
                        }
                    }
                }
            }
        }
    }
    let kn = kernel_basis(&big);
    let mut mats = Vec::new();
    let mut log_size = 0u32;
    // natural reduction of kernel generators; recompute exact subgroup size
    // in the product of coordinate groups
    let mut scaled_gens: Vec<Vec<u64>> = Vec::new();
    for v in &kn.gens {
        let mut m = Mat::zero(ring, n);
        let mut scaled = vec![0u64; dim];
        for k in 0..n {
            for l in 0..n {
                let coords: Vec<u64> = (0..rank)
                    .map(|c| {
                        let x = v[(k * n + l) * rank + c];
                        x % ring.p.pow(ring.ann[c])
                    })
                    .collect();
                let e = ring.elt(coords);
                let emb = ring.embed(&e.coords);
                for (c, &s) in emb.iter().enumerate() {
                    scaled[(k * n + l) * rank + c] = s;
                }
                m.set(k, l, e);
            }
        }
        mats.push(m);
        scaled_gens.push(scaled);
    }
    let span = crate::zmod::subgroup_basis(md, dim, &scaled_gens);
    log_size += span.log_size();
    Centralizer {
        generators: mats,
        log_size,
    }
}

/// Pointwise scalar twist by a character (1-dimensional representation over
/// the same ring).
pub fn twist(rep: &MatrixRep, chi: &MatrixRep) -> Result<MatrixRep> {
    if chi.dim != 1 {
        return Err(Error::Precondition("twisting character must be 1-dim".into()));
    }
    if chi.ring.id() != rep.ring.id() {
        return Err(Error::RingMismatch {
            expected: rep.ring.id(),
            got: chi.ring.id(),
        });
    }
    let images: Vec<Mat> = rep
        .images
        .iter()
        .zip(chi.images.iter())
        .map(|(m, c)| m.scale(&rep.ring, c.at(0, 0)))
        .collect();
    let out = MatrixRep {
        group: rep.group.clone(),
        ring: rep.ring.clone(),
        dim: rep.dim,
        images,
    };
    verify_table(&out)?;
    Ok(out)
}

/// Kronecker product over the tensor algebra A ⊗ A'.
pub fn tensor_reps(
    rep: &MatrixRep,
    other: &MatrixRep,
    caps: &Caps,
) -> Result<(MatrixRep, Arc<FiniteLocalAlgebra>)> {
    if rep.group.order != other.group.order || rep.group.table != other.group.table {
        return Err(Error::Precondition(
            "tensor product needs representations of the same group".into(),
        ));
    }
    let (t, tensor_elt) = tensor_algebra(&rep.ring, &other.ring, caps)?;
    let n = rep.dim * other.dim;
    if n > caps.dim {
        return Err(Error::DimensionCap(n, caps.dim));
    }
    let kron = |a: &Mat, b: &Mat| -> Mat {
        let mut m = Mat::zero(&t, n);
        for i in 0..a.n {
            for j in 0..a.n {
                for k in 0..b.n {
                    for l in 0..b.n {
                        m.set(
                            i * b.n + k,
                            j * b.n + l,
                            tensor_elt(&t, a.at(i, j), b.at(k, l)),
                        );
                    }
                }
            }
        }
        m
    };
    let images: Vec<Mat> = rep
        .images
        .iter()
        .zip(other.images.iter())
        .map(|(a, b)| kron(a, b))
        .collect();
    let out = MatrixRep {
        group: rep.group.clone(),
        ring: t.clone(),
        dim: n,
        images,
    };
    verify_table(&out)?;
    Ok((out, t))
}

/// Inverse-transpose.
pub fn contragredient(rep: &MatrixRep) -> MatrixRep {
    let images: Vec<Mat> = (0..rep.group.order)
        .map(|g| rep.images[rep.group.inv(g)].transpose())
        .collect();
    let out = MatrixRep {
        group: rep.group.clone(),
        ring: rep.ring.clone(),
        dim: rep.dim,
        images,
    };
    debug_assert!(verify_table(&out).is_ok());
    out
}

/// Precomposition with a verified homomorphism f: G → G'.
pub fn pullback(rep: &MatrixRep, group: Arc<FiniteGroup>, f: &GroupHom) -> Result<MatrixRep> {
    if f.map.len() != group.order {
        return Err(Error::InvalidGroup("homomorphism does not match source".into()));
    }
    let images: Vec<Mat> = (0..group.order)
        .map(|g| rep.images[f.map[g] as usize].clone())
        .collect();
    let out = MatrixRep {
        group,
        ring: rep.ring.clone(),
        dim: rep.dim,
        images,
    };
    verify_table(&out)?;
    Ok(out)
}

/// Full homomorphism-table check.
pub fn verify_table(rep: &MatrixRep) -> Result<()> {
    let g = &rep.group;
    if !rep.images[0].is_identity(&rep.ring) {
        return Err(Error::NotHomomorphism { g: 0, h: 0 });
    }
    for a in 0..g.order {
        for b in 0..g.order {
            if rep.images[a].mul(&rep.ring, &rep.images[b]) != rep.images[g.mul(a, b)] {
                return Err(Error::NotHomomorphism { g: a, h: b });
            }
        }
    }
    Ok(())
}

/// Central-character test: true iff every central element acts by a scalar;
/// returns the scalar character on the center when it exists.
pub fn has_central_character(rep: &MatrixRep) -> (bool, Option<Vec<(usize, Elt)>>) {
    let center = rep.group.center();
    let mut chars = Vec::new();
    for z in center {
        let m = &rep.images[z];
        let lambda = m.at(0, 0).clone();
        if *m != Mat::scalar(&rep.ring, rep.dim, &lambda) {
            return (false, None);
        }
        chars.push((z, lambda));
    }
    (true, Some(chars))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{group_cyclic, group_symmetric};
    use crate::ring::{ring_trunc, ring_zpn};

    fn caps() -> Caps {
        Caps::default()
    }

    pub(crate) fn s3_standard(
        caps: &Caps,
    ) -> (Arc<FiniteGroup>, Arc<FiniteLocalAlgebra>, MatrixRep) {
        let g = group_symmetric(3, caps).unwrap();
        let r = ring_zpn(5, 1, caps).unwrap();
        // transposition ↦ [[0,1],[1,0]], 3-cycle ↦ [[0,-1],[1,-1]]
        let t = Mat::from_int_rows(&r, &[vec![0, 1], vec![1, 0]]);
        let c = Mat::from_int_rows(&r, &[vec![0, 4], vec![1, 4]]);
        let rep = MatrixRep::make(g.clone(), r.clone(), vec![t, c], caps).unwrap();
        (g, r, rep)
    }

    #[test]
    fn s3_standard_is_valid_and_irreducible() {
        let (_, _, rep) = s3_standard(&caps());
        assert!(is_absolutely_irreducible(&rep).unwrap());
    }

    #[test]
    fn trivial_character_always_works() {
        let g = group_cyclic(4, &caps()).unwrap();
        let r = ring_zpn(2, 3, &caps()).unwrap();
        let rep = MatrixRep::trivial(g, r, 1);
        assert!(verify_table(&rep).is_ok());
    }

    #[test]
    fn nonsemisimple_c2_rep() {
        let g = group_cyclic(2, &caps()).unwrap();
        let r = ring_zpn(2, 1, &caps()).unwrap();
        let m = Mat::from_int_rows(&r, &[vec![1, 1], vec![0, 1]]);
        let rep = MatrixRep::make(g, r, vec![m], &caps()).unwrap();
        assert!(!is_absolutely_irreducible(&rep).unwrap());
    }

    #[test]
    fn relation_violation_reported() {
        let g = group_cyclic(3, &caps()).unwrap();
        let r = ring_zpn(5, 1, &caps()).unwrap();
        // an element of order 4 cannot generate a C₃ representation
        let m = Mat::from_int_rows(&r, &[vec![0, 1], vec![4, 0]]);
        assert!(matches!(
            MatrixRep::make(g, r, vec![m], &caps()),
            Err(Error::NotHomomorphism { .. })
        ));
    }

    #[test]
    fn centralizer_of_irreducible_is_scalars() {
        let (_, r, rep) = s3_standard(&caps());
        let c = centralizer(&rep);
        assert_eq!(c.size(&r), r.size());
    }

    #[test]
    fn centralizer_of_trivial_is_full_matrix_algebra() {
        let g = group_cyclic(3, &caps()).unwrap();
        let r = ring_zpn(5, 1, &caps()).unwrap();
        let rep = MatrixRep::trivial(g, r.clone(), 2);
        let c = centralizer(&rep);
        assert_eq!(c.size(&r), r.size().pow(4));
    }

    #[test]
    fn direct_sum_of_characters_not_irreducible() {
        let g = group_cyclic(2, &caps()).unwrap();
        let r = ring_zpn(3, 1, &caps()).unwrap();
        let m = Mat::from_int_rows(&r, &[vec![1, 0], vec![0, 2]]);
        let rep = MatrixRep::make(g, r, vec![m], &caps()).unwrap();
        assert!(!is_absolutely_irreducible(&rep).unwrap());
    }

    #[test]
    fn twist_by_trivial_character_is_identity() {
        let (g, r, rep) = s3_standard(&caps());
        let chi = MatrixRep::trivial(g, r, 1);
        let t = twist(&rep, &chi).unwrap();
        assert!(t.equal_as_map(&rep));
    }

    #[test]
    fn contragredient_involutive() {
        let (_, _, rep) = s3_standard(&caps());
        let cc = contragredient(&contragredient(&rep));
        assert!(cc.equal_as_map(&rep));
    }

    #[test]
    fn central_character_tests() {
        let (_, _, rep) = s3_standard(&caps());
        let (ok, _) = has_central_character(&rep);
        assert!(ok); // center of S₃ is trivial
        let g = group_cyclic(2, &caps()).unwrap();
        let r = ring_zpn(3, 1, &caps()).unwrap();
        let m = Mat::from_int_rows(&r, &[vec![1, 0], vec![0, 2]]);
        let sum = MatrixRep::make(g, r, vec![m], &caps()).unwrap();
        let (ok, _) = has_central_character(&sum);
        assert!(!ok); // distinct characters of the central C₂
    }

    #[test]
    fn reduce_is_functorial() {
        let c = caps();
        let g = group_cyclic(2, &c).unwrap();
        let z8 = ring_zpn(2, 3, &c).unwrap();
        let z4 = ring_zpn(2, 2, &c).unwrap();
        let z2 = ring_zpn(2, 1, &c).unwrap();
        let m = Mat::from_int_rows(&z8, &[vec![7, 0], vec![4, 1]]);
        let rep = MatrixRep::make(g, z8.clone(), vec![m], &c).unwrap();
        let r84 = RingMorphism::new(&z8, &z4, vec![vec![1]]).unwrap();
        let r42 = RingMorphism::new(&z4, &z2, vec![vec![1]]).unwrap();
        let r82 = r84.then(&r42, &z8, &z4, &z2);
        let two_step = reduce_rep(&reduce_rep(&rep, &r84, &z4).unwrap(), &r42, &z2).unwrap();
        let one_step = reduce_rep(&rep, &r82, &z2).unwrap();
        assert!(two_step.equal_as_map(&one_step));
    }

    #[test]
    fn tensor_of_characters() {
        let c = caps();
        let g = group_cyclic(2, &c).unwrap();
        let r = ring_trunc(3, 2, &c).unwrap();
        let chi = {
            let m = Mat::from_int_rows(&r, &[vec![2]]);
            MatrixRep::make(g.clone(), r.clone(), vec![m], &c).unwrap()
        };
        let (t, tring) = tensor_reps(&chi, &chi, &c).unwrap();
        assert_eq!(t.dim, 1);
        // (−1)⊗(−1) acts as the product character
        let sq = t.images[1].at(0, 0);
        assert_eq!(tring.residue(sq), 4 % 3);
    }
}

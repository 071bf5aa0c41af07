//! The deformation functor at enumerable scale: lift sets E_A, orbit spaces
//! D(A) = E_A / (1 + m·Mₙ(A)), tangent spaces, obstruction-driven lifting,
//! fiber-product gluing and inverse-limit compatibility.
//!
//! Lifts are stored as generator-image tuples; orbits are computed by BFS
//! under congruence generators 1 + g·E_{kl} whose generation of the full
//! congruence subgroup is certified once per ring by closure counting, so
//! orbit-stabilizer bookkeeping is exact. Canonical class representatives
//! are the lexicographically smallest generator-image coordinate tuples in
//! their orbit.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::sync::Arc;

use crate::cohomology::{
    coboundary_1, express_in_span, h1_with_adjoint, h2_with_adjoint, is_two_cocycle,
    obstruction_cochain, Adjoint, H1,
};
use crate::error::{Error, Result};
use crate::group::FiniteGroup;
use crate::matrix::Mat;
use crate::rep::{reduce_rep, verify_table, MatrixRep};
use crate::ring::{
    factor_into_small_extensions, is_small_extension, pair_preimage, residue_morphism, Elt,
    FiniteLocalAlgebra, RingMorphism, RingSubgroup,
};
use crate::zmod::{solve, ZMat};
use crate::Caps;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Exhaustive,
    Tower,
    Auto,
}

/// The set of lifts of ρ̄ to A, as generator-image tuples in canonical order.
pub struct LiftSet {
    pub rhobar: MatrixRep,
    pub ring: Arc<FiniteLocalAlgebra>,
    pub to_residue: RingMorphism,
    pub lifts: Vec<Vec<Mat>>,
    pub complete: bool,
}

impl LiftSet {
    pub fn len(&self) -> usize {
        self.lifts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lifts.is_empty()
    }

    pub fn materialize(&self, i: usize) -> MatrixRep {
        MatrixRep::from_gen_images(
            self.rhobar.group.clone(),
            self.ring.clone(),
            self.lifts[i].clone(),
            &Caps {
                dim: self.rhobar.dim.max(1),
                ..Caps::default()
            },
        )
        .expect("stored lift is a homomorphism")
    }

    pub fn keys(&self) -> Vec<Vec<u64>> {
        self.lifts.iter().map(|t| tuple_key(t)).collect()
    }
}

/// A point of D(A): canonical orbit representative with orbit bookkeeping.
pub struct DeformationClass {
    pub ring: Arc<FiniteLocalAlgebra>,
    pub representative: MatrixRep,
    pub gen_images: Vec<Mat>,
    pub orbit_size: u128,
    pub stabilizer_size: u128,
}

impl DeformationClass {
    pub fn key(&self) -> Vec<u64> {
        tuple_key(&self.gen_images)
    }
}

pub fn tuple_key(mats: &[Mat]) -> Vec<u64> {
    let mut k = Vec::new();
    for m in mats {
        k.extend(m.key());
    }
    k
}

/// The congruence subgroup 1 + m·Mₙ(A) with certified generators.
pub struct CongruenceGroup {
    pub ring: Arc<FiniteLocalAlgebra>,
    pub n: usize,
    pub generators: Vec<(Mat, Mat)>,
    pub log_size: u32,
    pub size: u128,
}

impl CongruenceGroup {
    pub fn new(ring: &Arc<FiniteLocalAlgebra>, n: usize, caps: &Caps) -> Result<CongruenceGroup> {
        let m_log = ring.max_ideal_log_size();
        let log_size = m_log * (n * n) as u32;
        let size = (ring.p as u128).pow(log_size);
        caps.check("congruence subgroup", size, caps.congruence_group)?;
        // generators 1 + g·E_kl for g running over smith generators of every
        // ideal power m^j; the deeper levels are needed because products of
        // level-1 generators only reach part of the higher filtration
        let mut seen_g = std::collections::BTreeSet::new();
        let mut generators = Vec::new();
        for j in 1..ring.nilpotency.max(1) {
            let gens_j = if j == 1 {
                ring.span(
                    &ring
                        .max_ideal_gens()
                        .iter()
                        .map(|g| ring.elt(g.clone()))
                        .collect::<Vec<_>>(),
                )
                .smith_gens(ring)
            } else {
                let pw = ring.ideal_power_gens(j);
                ring.span(&pw).smith_gens(ring)
            };
            for g in gens_j {
                if ring.is_zero(&g) || !seen_g.insert(g.coords.clone()) {
                    continue;
                }
                for k in 0..n {
                    for l in 0..n {
                        let mut u = Mat::identity(ring, n);
                        u.set(k, l, ring.add(u.at(k, l), &g));
                        let ui = u.inv(ring).expect("congruence element is invertible");
                        generators.push((u, ui));
                    }
                }
            }
        }
        let cg = CongruenceGroup {
            ring: ring.clone(),
            n,
            generators,
            log_size,
            size,
        };
        cg.certify()?;
        Ok(cg)
    }

    /// Closure counting: the elementary congruence generators must generate
    /// the whole group 1 + m·Mₙ(A). Certified once per (ring, n).
    fn certify(&self) -> Result<()> {
        if self.n == 1 || self.size == 1 {
            // conjugation is trivial / group is trivial; generation is not used
            return Ok(());
        }
        static CERTIFIED: std::sync::OnceLock<std::sync::Mutex<std::collections::HashSet<(u32, usize)>>> =
            std::sync::OnceLock::new();
        let cache = CERTIFIED.get_or_init(|| std::sync::Mutex::new(std::collections::HashSet::new()));
        if cache.lock().unwrap().contains(&(self.ring.id(), self.n)) {
            return Ok(());
        }
        let ring = &self.ring;
        let m_span = ring.span(
            &ring
                .max_ideal_gens()
                .iter()
                .map(|g| ring.elt(g.clone()))
                .collect::<Vec<_>>(),
        );
        let key_of = |m: &Mat| -> Option<Vec<u64>> {
            let mut k = Vec::with_capacity(self.n * self.n);
            for (e, entry) in m.entries.iter().enumerate() {
                let row = e / self.n;
                let col = e % self.n;
                let x = if row == col {
                    ring.sub(entry, &ring.one())
                } else {
                    entry.clone()
                };
                let sg = m_span.coords_of(ring, &x)?;
                k.extend(sg);
            }
            Some(k)
        };
        let start = Mat::identity(ring, self.n);
        let mut seen: HashMap<Vec<u64>, ()> = HashMap::new();
        seen.insert(key_of(&start).expect("identity lies in the subgroup"), ());
        let mut queue = VecDeque::from([start]);
        while let Some(m) = queue.pop_front() {
            for (u, _) in &self.generators {
                let next = m.mul(ring, u);
                let k = key_of(&next).ok_or_else(|| {
                    Error::Internal("congruence closure left the subgroup".into())
                })?;
                if seen.insert(k, ()).is_none() {
                    queue.push_back(next);
                }
            }
        }
        if seen.len() as u128 != self.size {
            return Err(Error::Internal(format!(
                "congruence generators span {} of {} elements",
                seen.len(),
                self.size
            )));
        }
        cache.lock().unwrap().insert((self.ring.id(), self.n));
        Ok(())
    }
}

// ---- enumeration -------------------------------------------------------------

/// Entrywise canonical lift of a matrix along a surjection.
fn lift_matrix(
    phi: &RingMorphism,
    a: &FiniteLocalAlgebra,
    b: &FiniteLocalAlgebra,
    m: &Mat,
) -> Mat {
    let mut out = Mat::zero(a, m.n);
    for i in 0..m.n {
        for j in 0..m.n {
            out.set(i, j, phi.section(a, b, m.at(i, j)));
        }
    }
    out
}

/// All lifts of ρ̄ to A. `Exhaustive` walks every candidate generator tuple;
/// `Tower` climbs the small-extension chain of the residue map, finding one
/// lift per fiber by solving the coboundary equation and expanding the
/// 1-cocycle torsor. Both return the same set whenever both run.
pub fn enumerate_lifts(
    rhobar: &MatrixRep,
    ring: &Arc<FiniteLocalAlgebra>,
    strategy: Strategy,
    caps: &Caps,
) -> Result<LiftSet> {
    if !rhobar.ring.is_field() {
        return Err(Error::BaseNotField);
    }
    let to_residue = residue_morphism(ring, &rhobar.ring)?;
    let n = rhobar.dim;
    let k = rhobar.group.generators.len();
    let m_log = ring.max_ideal_log_size();
    let space: u128 = (ring.p as u128).pow(m_log * (n * n * k) as u32);
    let strategy = match strategy {
        Strategy::Auto => {
            if space <= caps.lift_candidates {
                Strategy::Exhaustive
            } else {
                Strategy::Tower
            }
        }
        s => s,
    };
    let mut lifts = match strategy {
        Strategy::Exhaustive => {
            caps.check("lift candidates", space, caps.lift_candidates)?;
            enumerate_exhaustive(rhobar, ring, &to_residue, caps)?
        }
        Strategy::Tower => enumerate_tower(rhobar, ring, &to_residue, caps)?,
        Strategy::Auto => unreachable!(),
    };
    lifts.sort_by_key(|t| tuple_key(t));
    lifts.dedup_by_key(|t| tuple_key(t));
    Ok(LiftSet {
        rhobar: rhobar.clone(),
        ring: ring.clone(),
        to_residue,
        lifts,
        complete: true,
    })
}

fn enumerate_exhaustive(
    rhobar: &MatrixRep,
    ring: &Arc<FiniteLocalAlgebra>,
    to_residue: &RingMorphism,
    caps: &Caps,
) -> Result<Vec<Vec<Mat>>> {
    let group = &rhobar.group;
    let n = rhobar.dim;
    let m_elems = ring.max_ideal_elements();
    // candidates per generator: section lift + m·Mₙ(A) offsets, pre-filtered
    // by the element-order condition Xᵒ = 1
    let mut per_gen: Vec<Vec<Mat>> = Vec::new();
    for &s in &group.generators {
        let base = lift_matrix(to_residue, ring, &rhobar.ring, &rhobar.images[s as usize]);
        let ord = group.element_order(s as usize) as u64;
        let mut cands = Vec::new();
        let mut offsets = vec![0usize; n * n];
        loop {
            let mut m = base.clone();
            for (e, &oi) in offsets.iter().enumerate() {
                let add = &m_elems[oi];
                m.entries[e] = ring.add(&m.entries[e], add);
            }
            if mat_pow(ring, &m, ord).is_identity(ring) {
                cands.push(m);
            }
            // mixed-radix increment
            let mut c = 0;
            while c < offsets.len() {
                offsets[c] += 1;
                if offsets[c] < m_elems.len() {
                    break;
                }
                offsets[c] = 0;
                c += 1;
            }
            if c == offsets.len() {
                break;
            }
        }
        per_gen.push(cands);
    }
    // cartesian product with full propagation check, split across workers on
    // the first generator's candidates
    let total: u128 = per_gen.iter().map(|c| c.len() as u128).product();
    caps.check("lift candidates", total, caps.lift_candidates)?;
    let workers = caps.workers.max(1).min(per_gen[0].len().max(1));
    let first = &per_gen[0];
    let chunk = first.len().div_ceil(workers.max(1)).max(1);
    let results: Vec<Vec<Vec<Mat>>> = std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for w in 0..workers {
            let lo = w * chunk;
            let hi = ((w + 1) * chunk).min(first.len());
            if lo >= hi {
                continue;
            }
            let per_gen = &per_gen;
            let group = group.clone();
            let ring = ring.clone();
            handles.push(scope.spawn(move || {
                let mut found = Vec::new();
                let mut tuple: Vec<usize> = vec![0; per_gen.len()];
                for f in lo..hi {
                    tuple[0] = f;
                    search_rest(&group, &ring, per_gen, &mut tuple, 1, &mut found);
                }
                found
            }));
        }
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mut out = Vec::new();
    for r in results {
        out.extend(r);
    }
    Ok(out)
}

fn search_rest(
    group: &FiniteGroup,
    ring: &FiniteLocalAlgebra,
    per_gen: &[Vec<Mat>],
    tuple: &mut Vec<usize>,
    depth: usize,
    found: &mut Vec<Vec<Mat>>,
) {
    if depth == per_gen.len() {
        let gens: Vec<Mat> = tuple
            .iter()
            .zip(per_gen.iter())
            .map(|(&i, c)| c[i].clone())
            .collect();
        if propagate_ok(group, ring, &gens) {
            found.push(gens);
        }
        return;
    }
    for i in 0..per_gen[depth].len() {
        tuple[depth] = i;
        search_rest(group, ring, per_gen, tuple, depth + 1, found);
    }
}

/// BFS propagation with consistency; boolean form used in inner loops.
fn propagate_ok(group: &FiniteGroup, ring: &FiniteLocalAlgebra, gens: &[Mat]) -> bool {
    let n = gens.first().map_or(1, |m| m.n);
    let mut images: Vec<Option<Mat>> = vec![None; group.order];
    images[0] = Some(Mat::identity(ring, n));
    let mut queue = VecDeque::from([0usize]);
    while let Some(g) = queue.pop_front() {
        for (si, &s) in group.generators.iter().enumerate() {
            let h = group.mul(g, s as usize);
            let prod = images[g].as_ref().unwrap().mul(ring, &gens[si]);
            match &images[h] {
                None => {
                    images[h] = Some(prod);
                    queue.push_back(h);
                }
                Some(existing) => {
                    if *existing != prod {
                        return false;
                    }
                }
            }
        }
    }
    for g in 0..group.order {
        for (si, &s) in group.generators.iter().enumerate() {
            let h = group.mul(g, s as usize);
            if images[g].as_ref().unwrap().mul(ring, &gens[si]) != *images[h].as_ref().unwrap() {
                return false;
            }
        }
    }
    true
}

fn mat_pow(ring: &FiniteLocalAlgebra, m: &Mat, e: u64) -> Mat {
    let mut acc = Mat::identity(ring, m.n);
    let mut base = m.clone();
    let mut e = e;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc.mul(ring, &base);
        }
        base = base.mul(ring, &base);
        e >>= 1;
    }
    acc
}

fn enumerate_tower(
    rhobar: &MatrixRep,
    ring: &Arc<FiniteLocalAlgebra>,
    to_residue: &RingMorphism,
    caps: &Caps,
) -> Result<Vec<Vec<Mat>>> {
    let group = rhobar.group.clone();
    let adj = Adjoint::new(rhobar)?;
    let h1 = h1_with_adjoint(&group, &adj, caps)?;
    let chain = factor_into_small_extensions(to_residue, ring, &rhobar.ring, caps)?;
    // seed at the bottom: ρ̄ transported along the canonical identification
    let bottom: Arc<FiniteLocalAlgebra> = chain
        .last()
        .map(|l| l.target.clone())
        .unwrap_or_else(|| ring.clone());
    let seed_rep = if bottom.id() == rhobar.ring.id() {
        rhobar.clone()
    } else {
        let iso = RingMorphism::new(&rhobar.ring, &bottom, vec![bottom.one().coords])?;
        reduce_rep(rhobar, &iso, &bottom)?
    };
    // coboundary images for solving d¹b = c, shared along the chain
    let n2 = adj.n * adj.n;
    let mut d1_basis: Vec<Vec<u8>> = Vec::new();
    for h0 in 1..group.order {
        for e in 0..n2 {
            let mut bvec = vec![0u8; group.order * n2];
            bvec[h0 * n2 + e] = 1;
            d1_basis.push(coboundary_1(&group, &adj, &bvec));
        }
    }
    let mut cur: Vec<Vec<Mat>> = vec![seed_rep.gen_images()];
    let mut cur_ring = bottom;
    for link in chain.iter().rev() {
        let a = &link.source;
        let b = &link.target;
        debug_assert_eq!(b.id(), cur_ring.id());
        let t = &link.kernel_generator;
        let mut next: Vec<Vec<Mat>> = Vec::new();
        let total: u128 =
            cur.len() as u128 * (ring.p as u128).pow(h1.z_basis.len() as u32);
        caps.check("lift candidates", total, caps.lift_candidates)?;
        for gens in &cur {
            let rep_b = MatrixRep::from_gen_images(group.clone(), cur_ring.clone(), gens.clone(), caps)?;
            let cochain = obstruction_cochain(&rep_b, a, &link.map, t, false)?;
            debug_assert!(is_two_cocycle(&group, &adj, &cochain));
            let Some(coeffs) = express_in_span(a.p, &d1_basis, &cochain) else {
                continue; // obstructed fiber: no lifts over this point
            };
            // corrected homomorphic lift L'(g) = (1 − t·b(g))·L(g)
            let mut bfun = vec![0u8; group.order * n2];
            for (j, &c) in coeffs.iter().enumerate() {
                if c != 0 {
                    let h0 = 1 + j / n2;
                    let e = j % n2;
                    bfun[h0 * n2 + e] = (bfun[h0 * n2 + e] + c) % a.p as u8;
                }
            }
            let base: Vec<Mat> = group
                .generators
                .iter()
                .map(|&s| {
                    let sec = lift_matrix(&link.map, a, b, &rep_b.images[s as usize]);
                    let corr = one_plus_t_times(a, t, &neg_block(a.p, &bfun, s as usize, n2), adj.n);
                    corr.mul(a, &sec)
                })
                .collect();
            debug_assert!(propagate_ok(&group, a, &base));
            // the fiber is the torsor {(1 + t·z(s))·base(s) : z ∈ Z¹}
            let zdim = h1.z_basis.len();
            let mut sel = vec![0u8; zdim];
            loop {
                let mut tuple = Vec::with_capacity(base.len());
                for (gi, &s) in group.generators.iter().enumerate() {
                    let mut zval = vec![0u8; n2];
                    for (zi, z) in h1.z_basis.iter().enumerate() {
                        if sel[zi] != 0 {
                            for e in 0..n2 {
                                zval[e] = ((zval[e] as u32
                                    + sel[zi] as u32 * z[s as usize * n2 + e] as u32)
                                    % a.p as u32) as u8;
                            }
                        }
                    }
                    let corr = one_plus_t_times(a, t, &zval, adj.n);
                    tuple.push(corr.mul(a, &base[gi]));
                }
                next.push(tuple);
                let mut c = 0;
                while c < zdim {
                    sel[c] += 1;
                    if (sel[c] as u64) < a.p {
                        break;
                    }
                    sel[c] = 0;
                    c += 1;
                }
                if c == zdim {
                    break;
                }
            }
        }
        cur = next;
        cur_ring = a.clone();
    }
    debug_assert_eq!(cur_ring.id(), ring.id());
    Ok(cur)
}

fn neg_block(p: u64, bfun: &[u8], g: usize, n2: usize) -> Vec<u8> {
    bfun[g * n2..(g + 1) * n2]
        .iter()
        .map(|&x| ((p - x as u64) % p) as u8)
        .collect()
}

/// 1 + t·Z for an 𝔽_p matrix Z.
fn one_plus_t_times(ring: &FiniteLocalAlgebra, t: &Elt, z: &[u8], n: usize) -> Mat {
    let mut m = Mat::identity(ring, n);
    for i in 0..n {
        for j in 0..n {
            let s = z[i * n + j] as u64;
            if s != 0 {
                let add = ring.scalar_mul(s, t);
                m.set(i, j, ring.add(m.at(i, j), &add));
            }
        }
    }
    m
}

// ---- orbits -------------------------------------------------------------------

/// Partitions a lift set into conjugation orbits under 1 + m·Mₙ(A) and
/// returns canonical representatives.
pub fn deformation_classes(lifts: &LiftSet, caps: &Caps) -> Result<Vec<DeformationClass>> {
    let ring = &lifts.ring;
    let n = lifts.rhobar.dim;
    let cong = CongruenceGroup::new(ring, n, caps)?;
    deformation_classes_with(lifts, &cong)
}

pub fn deformation_classes_with(
    lifts: &LiftSet,
    cong: &CongruenceGroup,
) -> Result<Vec<DeformationClass>> {
    let ring = &lifts.ring;
    let n = lifts.rhobar.dim;
    let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
    for (i, t) in lifts.lifts.iter().enumerate() {
        index.insert(tuple_key(t), i);
    }
    let mut visited = vec![false; lifts.lifts.len()];
    let mut classes = Vec::new();
    for start in 0..lifts.lifts.len() {
        if visited[start] {
            continue;
        }
        // BFS over the orbit
        let mut orbit: Vec<usize> = vec![start];
        visited[start] = true;
        let mut queue = VecDeque::from([start]);
        let mut min_idx = start;
        let mut min_key = tuple_key(&lifts.lifts[start]);
        while let Some(cur) = queue.pop_front() {
            for (u, ui) in &cong.generators {
                let conj: Vec<Mat> = lifts.lifts[cur]
                    .iter()
                    .map(|m| m.conj(ring, u, ui))
                    .collect();
                let key = tuple_key(&conj);
                let &idx = index.get(&key).ok_or_else(|| {
                    Error::Internal("conjugate of a lift is not a recorded lift".into())
                })?;
                if !visited[idx] {
                    visited[idx] = true;
                    queue.push_back(idx);
                    orbit.push(idx);
                    if key < min_key {
                        min_key = key;
                        min_idx = idx;
                    }
                }
            }
        }
        let orbit_size = orbit.len() as u128;
        // orbit sizes divide |G_A| because the generators are certified
        if n > 1 && cong.size % orbit_size != 0 {
            return Err(Error::Internal("orbit size does not divide |G_A|".into()));
        }
        let stabilizer_size = if n == 1 {
            // conjugation is trivial in the 1-dimensional case
            cong.size
        } else {
            cong.size / orbit_size
        };
        let gen_images = lifts.lifts[min_idx].clone();
        let representative = MatrixRep::from_gen_images(
            lifts.rhobar.group.clone(),
            ring.clone(),
            gen_images.clone(),
            &Caps {
                dim: n.max(1),
                ..Caps::default()
            },
        )?;
        classes.push(DeformationClass {
            ring: ring.clone(),
            representative,
            gen_images,
            orbit_size,
            stabilizer_size,
        });
    }
    classes.sort_by_key(|c| c.key());
    Ok(classes)
}

/// Canonical key of the orbit of an arbitrary lift: BFS to the lex-min tuple.
pub fn orbit_canonical_key(
    gens: &[Mat],
    ring: &Arc<FiniteLocalAlgebra>,
    cong: &CongruenceGroup,
) -> Vec<u64> {
    let mut seen: HashMap<Vec<u64>, ()> = HashMap::new();
    let start_key = tuple_key(gens);
    seen.insert(start_key.clone(), ());
    let mut min_key = start_key;
    let mut queue = VecDeque::from([gens.to_vec()]);
    while let Some(cur) = queue.pop_front() {
        for (u, ui) in &cong.generators {
            let conj: Vec<Mat> = cur.iter().map(|m| m.conj(ring, u, ui)).collect();
            let key = tuple_key(&conj);
            if !seen.contains_key(&key) {
                if key < min_key {
                    min_key = key.clone();
                }
                seen.insert(key, ());
                queue.push_back(conj);
            }
        }
    }
    min_key
}

/// Index of the class a representation belongs to.
pub fn classify(
    rep_gens: &[Mat],
    classes: &[DeformationClass],
    ring: &Arc<FiniteLocalAlgebra>,
    cong: &CongruenceGroup,
) -> Option<usize> {
    let key = orbit_canonical_key(rep_gens, ring, cong);
    classes.iter().position(|c| c.key() == key)
}

// ---- tangent space -------------------------------------------------------------

pub struct TangentSpace {
    pub ring: Arc<FiniteLocalAlgebra>,
    pub classes: Vec<DeformationClass>,
    pub h1: H1,
    /// H¹ coordinates of each class, parallel to `classes`
    pub coords: Vec<Vec<u8>>,
}

/// D(k[ε]) together with the explicit bijection onto H¹.
pub fn tangent_space(rhobar: &MatrixRep, caps: &Caps) -> Result<TangentSpace> {
    let p = rhobar.ring.p;
    let keps = crate::ring::ring_trunc(p, 2, caps)?;
    let lifts = enumerate_lifts(rhobar, &keps, Strategy::Exhaustive, caps)?;
    let classes = deformation_classes(&lifts, caps)?;
    let adj = Adjoint::new(rhobar)?;
    let h1 = h1_with_adjoint(&rhobar.group, &adj, caps)?;
    let eps = keps.basis(1);
    let mut coords = Vec::new();
    for c in &classes {
        let z = cocycle_of_lift(rhobar, &c.representative, &eps)?;
        let coord = h1
            .class_coords(&z)
            .ok_or_else(|| Error::Internal("lift cocycle is not closed".into()))?;
        coords.push(coord);
    }
    Ok(TangentSpace {
        ring: keps,
        classes,
        h1,
        coords,
    })
}

/// Extracts c from ρ(g) = (1 + εc(g))·L(ρ̄(g)).
pub fn cocycle_of_lift(rhobar: &MatrixRep, lift: &MatrixRep, eps: &Elt) -> Result<Vec<u8>> {
    let keps = &lift.ring;
    let group = &lift.group;
    let n = lift.dim;
    let n2 = n * n;
    let p = keps.p;
    let mut table: BTreeMap<Vec<u64>, u8> = BTreeMap::new();
    for s in 0..p {
        table.insert(keps.scalar_mul(s, eps).coords.clone(), s as u8);
    }
    let to_res = residue_morphism(keps, &rhobar.ring)?;
    let mut out = vec![0u8; group.order * n2];
    for g in 0..group.order {
        let base = lift_matrix(&to_res, keps, &rhobar.ring, &rhobar.images[g]);
        let w = lift.images[g]
            .mul(keps, &base.inv(keps)?)
            .sub(keps, &Mat::identity(keps, n));
        for (e, entry) in w.entries.iter().enumerate() {
            let s = table
                .get(&entry.coords)
                .ok_or_else(|| Error::Internal("tangent entry outside εk".into()))?;
            out[g * n2 + e] = *s;
        }
    }
    Ok(out)
}

/// Builds the lift g ↦ (1 + εc(g))·ρ̄(g) over k[ε] from a cocycle.
pub fn lift_from_cocycle(
    rhobar: &MatrixRep,
    keps: &Arc<FiniteLocalAlgebra>,
    z: &[u8],
    caps: &Caps,
) -> Result<MatrixRep> {
    let to_res = residue_morphism(keps, &rhobar.ring)?;
    let eps = keps.basis(1);
    let n = rhobar.dim;
    let n2 = n * n;
    let gens: Vec<Mat> = rhobar
        .group
        .generators
        .iter()
        .map(|&s| {
            let base = lift_matrix(&to_res, keps, &rhobar.ring, &rhobar.images[s as usize]);
            let corr = one_plus_t_times(keps, &eps, &z[s as usize * n2..(s as usize + 1) * n2], n);
            corr.mul(keps, &base)
        })
        .collect();
    MatrixRep::from_gen_images(rhobar.group.clone(), keps.clone(), gens, caps)
}

// ---- functor checks -------------------------------------------------------------

/// Outcome of comparing D(A₃) with D(A₁) ×_{D(A₀)} D(A₂).
#[derive(Debug)]
pub struct FiberCheckReport {
    pub d3: usize,
    pub d1: usize,
    pub d2: usize,
    pub d0: usize,
    pub fiber_pairs: usize,
    pub bijective: bool,
    pub irreducible: bool,
    pub counterexample: Option<String>,
}

pub struct FiberLegs<'a> {
    pub a1: &'a Arc<FiniteLocalAlgebra>,
    pub a2: &'a Arc<FiniteLocalAlgebra>,
    pub a0: &'a Arc<FiniteLocalAlgebra>,
    pub phi1: &'a RingMorphism,
    pub phi2: &'a RingMorphism,
}

/// Conditions of §-style deformation filtering.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    CentralCharacter,
    /// the designated central element must act trivially
    CentralElementTrivial(usize),
}

pub fn satisfies_condition(rep: &MatrixRep, cond: Condition) -> Result<bool> {
    match cond {
        Condition::CentralCharacter => Ok(crate::rep::has_central_character(rep).0),
        Condition::CentralElementTrivial(z) => {
            if !rep.group.center().contains(&z) {
                return Err(Error::NotCentral(z));
            }
            Ok(rep.images[z].is_identity(&rep.ring))
        }
    }
}

/// Keeps the classes whose representatives satisfy the condition; the
/// property is re-checked on a conjugate to confirm conjugation invariance.
pub fn filter_by_condition(
    classes: Vec<DeformationClass>,
    cond: Condition,
    cong: &CongruenceGroup,
) -> Result<Vec<DeformationClass>> {
    let mut out = Vec::new();
    for c in classes {
        let ok = satisfies_condition(&c.representative, cond)?;
        if let Some((u, ui)) = cong.generators.first() {
            let conj_gens: Vec<Mat> = c
                .gen_images
                .iter()
                .map(|m| m.conj(&c.ring, u, ui))
                .collect();
            let conj = MatrixRep::from_gen_images(
                c.representative.group.clone(),
                c.ring.clone(),
                conj_gens,
                &Caps {
                    dim: c.representative.dim,
                    ..Caps::default()
                },
            )?;
            if satisfies_condition(&conj, cond)? != ok {
                return Err(Error::Internal(
                    "condition is not conjugation invariant".into(),
                ));
            }
        }
        if ok {
            out.push(c);
        }
    }
    Ok(out)
}

/// Computes both sides of the comparison map
/// D(A₃) → D(A₁) ×_{D(A₀)} D(A₂) and checks bijectivity. With a condition,
/// both sides are filtered first.
pub fn fiber_product_check(
    rhobar: &MatrixRep,
    legs: &FiberLegs,
    condition: Option<Condition>,
    caps: &Caps,
) -> Result<FiberCheckReport> {
    let irreducible = crate::rep::is_absolutely_irreducible(rhobar)?;
    let (a3, pr1, pr2) = crate::ring::fiber_product(
        legs.a1, legs.a2, legs.a0, legs.phi1, legs.phi2, caps,
    )?;
    let n = rhobar.dim;
    let cong3 = CongruenceGroup::new(&a3, n, caps)?;
    let cong1 = CongruenceGroup::new(legs.a1, n, caps)?;
    let cong2 = CongruenceGroup::new(legs.a2, n, caps)?;
    let cong0 = CongruenceGroup::new(legs.a0, n, caps)?;

    let classes = |ring: &Arc<FiniteLocalAlgebra>, cong: &CongruenceGroup| -> Result<Vec<DeformationClass>> {
        let lifts = enumerate_lifts(rhobar, ring, Strategy::Auto, caps)?;
        let cl = deformation_classes_with(&lifts, cong)?;
        match condition {
            Some(c) => filter_by_condition(cl, c, cong),
            None => Ok(cl),
        }
    };
    let d3 = classes(&a3, &cong3)?;
    let d1 = classes(legs.a1, &cong1)?;
    let d2 = classes(legs.a2, &cong2)?;
    let d0 = classes(legs.a0, &cong0)?;

    let reduce_to = |c: &DeformationClass,
                     phi: &RingMorphism,
                     src: &Arc<FiniteLocalAlgebra>,
                     dst: &Arc<FiniteLocalAlgebra>,
                     dst_classes: &[DeformationClass],
                     dst_cong: &CongruenceGroup|
     -> Result<usize> {
        let gens: Vec<Mat> = c.gen_images.iter().map(|m| m.map(src, dst, phi)).collect();
        classify(&gens, dst_classes, dst, dst_cong)
            .ok_or_else(|| Error::Internal("reduction of a class not found downstream".into()))
    };

    // the two legs of the comparison
    let mut images: Vec<(usize, usize)> = Vec::new();
    for c in &d3 {
        let i1 = reduce_to(c, &pr1, &a3, legs.a1, &d1, &cong1)?;
        let i2 = reduce_to(c, &pr2, &a3, legs.a2, &d2, &cong2)?;
        images.push((i1, i2));
    }
    // fiber pairs downstream
    let q1: Vec<usize> = d1
        .iter()
        .map(|c| reduce_to(c, legs.phi1, legs.a1, legs.a0, &d0, &cong0))
        .collect::<Result<_>>()?;
    let q2: Vec<usize> = d2
        .iter()
        .map(|c| reduce_to(c, legs.phi2, legs.a2, legs.a0, &d0, &cong0))
        .collect::<Result<_>>()?;
    let mut fiber_pairs = Vec::new();
    for (i1, &r1) in q1.iter().enumerate() {
        for (i2, &r2) in q2.iter().enumerate() {
            if r1 == r2 {
                fiber_pairs.push((i1, i2));
            }
        }
    }
    // compare: b is injective and surjective onto the fiber pairs
    let mut seen = std::collections::BTreeSet::new();
    let mut counterexample = None;
    for (ci, pair) in images.iter().enumerate() {
        if !seen.insert(*pair) {
            counterexample = Some(format!(
                "classes {ci} and an earlier one share image {pair:?}"
            ));
        }
        if !fiber_pairs.contains(pair) {
            counterexample = Some(format!("image {pair:?} is outside the fiber"));
        }
    }
    for pair in &fiber_pairs {
        if !images.contains(pair) {
            counterexample.get_or_insert(format!("fiber pair {pair:?} has no preimage"));
        }
    }
    let bijective = counterexample.is_none() && images.len() == fiber_pairs.len();
    Ok(FiberCheckReport {
        d3: d3.len(),
        d1: d1.len(),
        d2: d2.len(),
        d0: d0.len(),
        fiber_pairs: fiber_pairs.len(),
        bijective,
        irreducible,
        counterexample,
    })
}

/// Constructive surjectivity: conjugates ρ₁, ρ₂ stepwise along the socle
/// filtration of A₀ until their pushforwards agree, decomposing each
/// discrepancy as scalar + ψ(m₂) − φ(m₁), then pairs them into a lift over
/// the fiber product.
#[allow(clippy::too_many_arguments)]
pub fn glue_over_fiber_product(
    rhobar: &MatrixRep,
    rho1: &MatrixRep,
    rho2: &MatrixRep,
    legs: &FiberLegs,
    a3: &Arc<FiniteLocalAlgebra>,
    pr1: &RingMorphism,
    pr2: &RingMorphism,
    caps: &Caps,
) -> Result<MatrixRep> {
    if !crate::rep::is_absolutely_irreducible(rhobar)? {
        return Err(Error::Precondition(
            "gluing requires an absolutely irreducible residual representation".into(),
        ));
    }
    let (a0, a1, a2) = (legs.a0, legs.a1, legs.a2);
    let n = rhobar.dim;
    let mut r1 = rho1.clone();
    let mut r2 = rho2.clone();
    let nil = a0.nilpotency;
    for _round in 0..=nil + 1 {
        let x: Vec<Mat> = r1.images.iter().map(|m| m.map(a1, a0, legs.phi1)).collect();
        let y: Vec<Mat> = r2.images.iter().map(|m| m.map(a2, a0, legs.phi2)).collect();
        if x == y {
            break;
        }
        // valuation k of the discrepancy along the ideal filtration
        let k = diff_valuation(a0, &x, &y)?;
        // solve [l, x] ≡ x − y (mod m^{k+1}) for l ∈ m^k·Mₙ(A₀)
        let l = solve_bracket(a0, &x, &y, k)?;
        // decompose l = λ·1 + ψ(m₂) − φ(m₁)
        let (m1, m2) = decompose_discrepancy(a0, a1, a2, legs.phi1, legs.phi2, &l, k)?;
        // conjugate both sides
        let u1 = Mat::identity(a1, n).add(a1, &m1);
        let u2 = Mat::identity(a2, n).add(a2, &m2);
        let u1i = u1.inv(a1)?;
        let u2i = u2.inv(a2)?;
        r1 = MatrixRep {
            group: r1.group.clone(),
            ring: r1.ring.clone(),
            dim: n,
            images: r1.images.iter().map(|m| m.conj(a1, &u1, &u1i)).collect(),
        };
        r2 = MatrixRep {
            group: r2.group.clone(),
            ring: r2.ring.clone(),
            dim: n,
            images: r2.images.iter().map(|m| m.conj(a2, &u2, &u2i)).collect(),
        };
    }
    let x: Vec<Mat> = r1.images.iter().map(|m| m.map(a1, a0, legs.phi1)).collect();
    let y: Vec<Mat> = r2.images.iter().map(|m| m.map(a2, a0, legs.phi2)).collect();
    if x != y {
        return Err(Error::Precondition(
            "classes do not agree over the base of the fiber product".into(),
        ));
    }
    // pair into the fiber product
    let images: Vec<Mat> = (0..rhobar.group.order)
        .map(|g| {
            let mut m = Mat::zero(a3, n);
            for i in 0..n {
                for j in 0..n {
                    let e = pair_preimage(
                        a3,
                        a1,
                        a2,
                        pr1,
                        pr2,
                        r1.images[g].at(i, j),
                        r2.images[g].at(i, j),
                    )
                    .ok_or_else(|| {
                        Error::Internal("compatible pair not in the fiber product".into())
                    })?;
                    m.set(i, j, e);
                }
            }
            Ok(m)
        })
        .collect::<Result<_>>()?;
    let glued = MatrixRep {
        group: rhobar.group.clone(),
        ring: a3.clone(),
        dim: n,
        images,
    };
    verify_table(&glued)?;
    let _ = caps;
    Ok(glued)
}

/// Largest k ≤ nilpotency with all entries of x − y in m^k; errors when the
/// difference is nonzero yet outside m (impossible for lifts of the same ρ̄).
fn diff_valuation(a0: &FiniteLocalAlgebra, x: &[Mat], y: &[Mat], ) -> Result<u32> {
    let mut k = 1u32;
    'outer: while k < a0.nilpotency {
        let span = power_span(a0, k + 1);
        for (mx, my) in x.iter().zip(y.iter()) {
            for (ex, ey) in mx.entries.iter().zip(my.entries.iter()) {
                let d = a0.sub(ex, ey);
                if !a0.is_zero(&d) && !span.contains_elt(a0, &d) {
                    break 'outer;
                }
            }
        }
        k += 1;
    }
    Ok(k)
}

fn power_span(a: &FiniteLocalAlgebra, k: u32) -> RingSubgroup {
    if k >= a.nilpotency {
        a.span(&[])
    } else {
        let gens = a.ideal_power_gens(k);
        a.span(&gens)
    }
}

/// Solves [l, x(g)] ≡ x(g) − y(g) mod m^{k+1} for l ∈ m^k·Mₙ(A₀).
fn solve_bracket(a0: &FiniteLocalAlgebra, x: &[Mat], y: &[Mat], k: u32) -> Result<Mat> {
    let n = x[0].n;
    let md = a0.modulus();
    let mk = power_span(a0, k);
    let mk_gens = mk.smith_gens(a0);
    let slack = power_span(a0, k + 1).smith_gens(a0);
    let order = x.len();
    let rows = order * n * n * a0.rank;
    let unknown_mats: Vec<Mat> = {
        let mut v = Vec::new();
        for b in &mk_gens {
            for i in 0..n {
                for j in 0..n {
                    let mut m = Mat::zero(a0, n);
                    m.set(i, j, b.clone());
                    v.push(m);
                }
            }
        }
        v
    };
    let slack_mats: Vec<Mat> = {
        let mut v = Vec::new();
        for b in &slack {
            for i in 0..n {
                for j in 0..n {
                    let mut m = Mat::zero(a0, n);
                    m.set(i, j, b.clone());
                    v.push(m);
                }
            }
        }
        v
    };
    let cols = unknown_mats.len() + slack_mats.len();
    let mut sys = ZMat::zero(md, rows, cols.max(1));
    let fill = |col: usize, img_of: &dyn Fn(usize) -> Mat, sys: &mut ZMat| {
        for (g, _) in x.iter().enumerate() {
            let m = img_of(g);
            for (e, entry) in m.entries.iter().enumerate() {
                let sc = a0.embed(&entry.coords);
                for (c, &v) in sc.iter().enumerate() {
                    sys.set((g * n * n + e) * a0.rank + c, col, v);
                }
            }
        }
    };
    for (ui, um) in unknown_mats.iter().enumerate() {
        let f = |g: usize| -> Mat {
            um.mul(a0, &x[g]).sub(a0, &x[g].mul(a0, um))
        };
        fill(ui, &f, &mut sys);
    }
    for (si, sm) in slack_mats.iter().enumerate() {
        let sm = sm.clone();
        let f = move |_g: usize| -> Mat { sm.clone() };
        fill(unknown_mats.len() + si, &f, &mut sys);
    }
    let mut rhs = vec![0u64; rows];
    for g in 0..order {
        let d = x[g].sub(a0, &y[g]);
        for (e, entry) in d.entries.iter().enumerate() {
            let sc = a0.embed(&entry.coords);
            for (c, &v) in sc.iter().enumerate() {
                rhs[(g * n * n + e) * a0.rank + c] = v;
            }
        }
    }
    let sol = solve(&sys, &rhs).ok_or_else(|| {
        Error::Internal("discrepancy bracket equation unsolvable (contradicts scalar centralizer)".into())
    })?;
    let mut l = Mat::zero(a0, n);
    for (ui, um) in unknown_mats.iter().enumerate() {
        let tau = sol[ui];
        if tau != 0 {
            l = l.add(a0, &um.scale(a0, &a0.from_int(tau)));
        }
    }
    Ok(l)
}

/// Writes l = λ·1 + ψ(m₂) − φ(m₁) with λ a scalar in m^k and mᵢ ∈ m^k·Mₙ(Aᵢ);
/// failure would contradict the scalar-centralizer lemma and is reported
/// with the offending matrix.
fn decompose_discrepancy(
    a0: &FiniteLocalAlgebra,
    a1: &FiniteLocalAlgebra,
    a2: &FiniteLocalAlgebra,
    phi1: &RingMorphism,
    phi2: &RingMorphism,
    l: &Mat,
    k: u32,
) -> Result<(Mat, Mat)> {
    let n = l.n;
    let md0 = a0.modulus();
    let g1 = power_span(a1, k).smith_gens(a1);
    let g2 = power_span(a2, k).smith_gens(a2);
    let g0 = power_span(a0, k).smith_gens(a0);
    // unknowns: scalar coefficients for λ over g0, entries over g1 (negated),
    // entries over g2
    struct Unknown {
        image: Mat,   // image in Mₙ(A₀)
        side: usize,  // 0 = λ, 1 = m₁, 2 = m₂
        pos: (usize, usize),
        elt1: Option<Elt>,
        elt2: Option<Elt>,
    }
    let mut unknowns: Vec<Unknown> = Vec::new();
    for b in &g0 {
        unknowns.push(Unknown {
            image: Mat::scalar(a0, n, b),
            side: 0,
            pos: (0, 0),
            elt1: None,
            elt2: None,
        });
    }
    for b in &g1 {
        let img = phi1.apply(a1, a0, b);
        for i in 0..n {
            for j in 0..n {
                let mut m = Mat::zero(a0, n);
                m.set(i, j, a0.neg(&img));
                unknowns.push(Unknown {
                    image: m,
                    side: 1,
                    pos: (i, j),
                    elt1: Some(b.clone()),
                    elt2: None,
                });
            }
        }
    }
    for b in &g2 {
        let img = phi2.apply(a2, a0, b);
        for i in 0..n {
            for j in 0..n {
                let mut m = Mat::zero(a0, n);
                m.set(i, j, img.clone());
                unknowns.push(Unknown {
                    image: m,
                    side: 2,
                    pos: (i, j),
                    elt1: None,
                    elt2: Some(b.clone()),
                });
            }
        }
    }
    let rows = n * n * a0.rank;
    let mut sys = ZMat::zero(md0, rows, unknowns.len().max(1));
    for (ci, u) in unknowns.iter().enumerate() {
        for (e, entry) in u.image.entries.iter().enumerate() {
            let sc = a0.embed(&entry.coords);
            for (c, &v) in sc.iter().enumerate() {
                sys.set(e * a0.rank + c, ci, v);
            }
        }
    }
    let mut rhs = vec![0u64; rows];
    for (e, entry) in l.entries.iter().enumerate() {
        let sc = a0.embed(&entry.coords);
        for (c, &v) in sc.iter().enumerate() {
            rhs[e * a0.rank + c] = v;
        }
    }
    let sol = solve(&sys, &rhs).ok_or_else(|| {
        Error::Internal(format!(
            "discrepancy not decomposable as scalar + ψ(m₂) − φ(m₁): {:?}",
            l.entries.iter().map(|e| e.coords.clone()).collect::<Vec<_>>()
        ))
    })?;
    let mut m1 = Mat::zero(a1, n);
    let mut m2 = Mat::zero(a2, n);
    for (ci, u) in unknowns.iter().enumerate() {
        let tau = sol[ci];
        if tau == 0 {
            continue;
        }
        match u.side {
            1 => {
                let add = a1.scalar_mul(tau, u.elt1.as_ref().unwrap());
                let cur = m1.at(u.pos.0, u.pos.1).clone();
                m1.set(u.pos.0, u.pos.1, a1.add(&cur, &add));
            }
            2 => {
                let add = a2.scalar_mul(tau, u.elt2.as_ref().unwrap());
                let cur = m2.at(u.pos.0, u.pos.1).clone();
                m2.set(u.pos.0, u.pos.1, a2.add(&cur, &add));
            }
            _ => {}
        }
    }
    Ok((m1, m2))
}

// ---- towers and lifting ------------------------------------------------------

#[derive(Debug)]
pub struct InverseLimitReport {
    pub levels: Vec<usize>,
    pub chains: usize,
    pub top_classes: usize,
    pub bijective: bool,
}

/// Checks D(ℤ/pᴺ) → lim D(ℤ/pⁿ) on the tower of canonical reductions.
pub fn inverse_limit_check(
    rhobar: &MatrixRep,
    levels: u32,
    caps: &Caps,
) -> Result<InverseLimitReport> {
    let p = rhobar.ring.p;
    let mut rings = Vec::new();
    for j in 1..=levels {
        rings.push(crate::ring::ring_zpn(p, j, caps)?);
    }
    let mut congs = Vec::new();
    let mut class_sets = Vec::new();
    for r in &rings {
        let cong = CongruenceGroup::new(r, rhobar.dim, caps)?;
        let lifts = enumerate_lifts(rhobar, r, Strategy::Auto, caps)?;
        class_sets.push(deformation_classes_with(&lifts, &cong)?);
        congs.push(cong);
    }
    // reduction maps between consecutive levels, on class indices
    let mut maps: Vec<Vec<usize>> = Vec::new();
    for j in 1..rings.len() {
        let phi = RingMorphism::new(&rings[j], &rings[j - 1], vec![vec![1]])?;
        let mut m = Vec::new();
        for c in &class_sets[j] {
            let gens: Vec<Mat> = c
                .gen_images
                .iter()
                .map(|mm| mm.map(&rings[j], &rings[j - 1], &phi))
                .collect();
            let idx = classify(&gens, &class_sets[j - 1], &rings[j - 1], &congs[j - 1])
                .ok_or_else(|| Error::Internal("class reduction missing".into()))?;
            m.push(idx);
        }
        maps.push(m);
    }
    // all compatible chains (c₁,…,c_N) of the finite inverse system
    let sizes: Vec<usize> = class_sets.iter().map(|c| c.len()).collect();
    let mut all_chains = std::collections::BTreeSet::new();
    fn extend_chains(
        level: usize,
        maps: &[Vec<usize>],
        sizes: &[usize],
        partial: &mut Vec<usize>,
        out: &mut std::collections::BTreeSet<Vec<usize>>,
    ) {
        if level == sizes.len() {
            out.insert(partial.clone());
            return;
        }
        for c in 0..sizes[level] {
            let ok = level == 0 || maps[level - 1][c] == partial[level - 1];
            if ok {
                partial.push(c);
                extend_chains(level + 1, maps, sizes, partial, out);
                partial.pop();
            }
        }
    }
    extend_chains(0, &maps, &sizes, &mut Vec::new(), &mut all_chains);
    // the natural map sends a top class to the chain of its reductions;
    // bijectivity = distinct chains per top class + every chain is hit
    let top = class_sets.len() - 1;
    let mut from_top = std::collections::BTreeSet::new();
    for c in 0..sizes[top] {
        let mut chain = vec![c];
        let mut cur = c;
        for m in maps.iter().rev() {
            cur = m[cur];
            chain.push(cur);
        }
        chain.reverse();
        from_top.insert(chain);
    }
    let top_classes = sizes[top];
    let bijective = from_top.len() == top_classes && from_top == all_chains;
    Ok(InverseLimitReport {
        levels: sizes,
        chains: all_chains.len(),
        top_classes,
        bijective,
    })
}

/// Classes over A lying over a given class over B, across a small extension.
pub struct LiftClassesResult {
    pub obstruction_vanishes: bool,
    pub lifted: Vec<DeformationClass>,
}

pub fn lift_classes(
    rhobar: &MatrixRep,
    class_b: &DeformationClass,
    a: &Arc<FiniteLocalAlgebra>,
    phi: &RingMorphism,
    caps: &Caps,
) -> Result<LiftClassesResult> {
    let b = &class_b.ring;
    let se = is_small_extension(phi, a, b)?;
    if !se.is_small {
        return Err(Error::NotSmallExtension("lift_classes needs a small step"));
    }
    let t = se.generator.unwrap();
    let cochain = obstruction_cochain(&class_b.representative, a, phi, &t, false)?;
    let h2 = h2_with_adjoint(&rhobar.group, &Adjoint::new(rhobar)?, caps)?;
    let vanishes = h2.class_vanishes(&cochain);
    // exact set of classes over A reducing to the given class
    let lifts_a = enumerate_lifts(rhobar, a, Strategy::Auto, caps)?;
    let cong_a = CongruenceGroup::new(a, rhobar.dim, caps)?;
    let cong_b = CongruenceGroup::new(b, rhobar.dim, caps)?;
    let classes_a = deformation_classes_with(&lifts_a, &cong_a)?;
    let lifts_b = enumerate_lifts(rhobar, b, Strategy::Auto, caps)?;
    let classes_b = deformation_classes_with(&lifts_b, &cong_b)?;
    let target = classify(&class_b.gen_images, &classes_b, b, &cong_b)
        .ok_or_else(|| Error::Internal("input class not found over B".into()))?;
    let mut lifted = Vec::new();
    for c in classes_a {
        let gens: Vec<Mat> = c.gen_images.iter().map(|m| m.map(a, b, phi)).collect();
        let idx = classify(&gens, &classes_b, b, &cong_b)
            .ok_or_else(|| Error::Internal("reduced class not found over B".into()))?;
        if idx == target {
            lifted.push(c);
        }
    }
    Ok(LiftClassesResult {
        obstruction_vanishes: vanishes,
        lifted,
    })
}

// ---- twisting and tensor on classes --------------------------------------------

/// Twisting a class by a character lift is well-defined on orbits.
pub fn twist_class(
    class: &DeformationClass,
    chi: &MatrixRep,
    cong: &CongruenceGroup,
) -> Result<DeformationClass> {
    let twisted = crate::rep::twist(&class.representative, chi)?;
    let gens = twisted.gen_images();
    let key = orbit_canonical_key(&gens, &class.ring, cong);
    // rebuild the canonical representative from the key by walking the orbit
    let canon = orbit_member_with_key(&gens, &class.ring, cong, &key)
        .ok_or_else(|| Error::Internal("canonical member not found in orbit".into()))?;
    let representative = MatrixRep::from_gen_images(
        class.representative.group.clone(),
        class.ring.clone(),
        canon.clone(),
        &Caps {
            dim: class.representative.dim,
            ..Caps::default()
        },
    )?;
    Ok(DeformationClass {
        ring: class.ring.clone(),
        representative,
        gen_images: canon,
        orbit_size: class.orbit_size,
        stabilizer_size: class.stabilizer_size,
    })
}

fn orbit_member_with_key(
    gens: &[Mat],
    ring: &Arc<FiniteLocalAlgebra>,
    cong: &CongruenceGroup,
    key: &[u64],
) -> Option<Vec<Mat>> {
    let mut seen: HashMap<Vec<u64>, ()> = HashMap::new();
    seen.insert(tuple_key(gens), ());
    let mut queue = VecDeque::from([gens.to_vec()]);
    if tuple_key(gens) == key {
        return Some(gens.to_vec());
    }
    while let Some(cur) = queue.pop_front() {
        for (u, ui) in &cong.generators {
            let conj: Vec<Mat> = cur.iter().map(|m| m.conj(ring, u, ui)).collect();
            let k = tuple_key(&conj);
            if k == key {
                return Some(conj);
            }
            if !seen.contains_key(&k) {
                seen.insert(k, ());
                queue.push_back(conj);
            }
        }
    }
    None
}

/// Kronecker product of class representatives over the tensor ring.
pub fn tensor_classes(
    c1: &DeformationClass,
    c2: &DeformationClass,
    caps: &Caps,
) -> Result<(DeformationClass, Arc<FiniteLocalAlgebra>)> {
    let (rep, tring) = crate::rep::tensor_reps(&c1.representative, &c2.representative, caps)?;
    let cong = CongruenceGroup::new(&tring, rep.dim, caps)?;
    let gens = rep.gen_images();
    let key = orbit_canonical_key(&gens, &tring, &cong);
    let canon = orbit_member_with_key(&gens, &tring, &cong, &key)
        .ok_or_else(|| Error::Internal("canonical member not found in orbit".into()))?;
    let representative =
        MatrixRep::from_gen_images(rep.group.clone(), tring.clone(), canon.clone(), caps)?;
    let class = DeformationClass {
        ring: tring.clone(),
        representative,
        gen_images: canon,
        orbit_size: 0,
        stabilizer_size: 0,
    };
    Ok((class, tring))
}

// ---- summary -------------------------------------------------------------------

#[derive(Debug, serde::Serialize)]
pub struct DeformationSummary {
    pub tangent_dim: usize,
    pub h2_dim: usize,
    pub rigid: bool,
    pub ring_counts: Vec<(String, usize)>,
    /// true when H² = 0 and every count matches p^(d·log_p|m_A|)
    pub matches_free_model: Option<bool>,
}

pub fn summary(
    rhobar: &MatrixRep,
    catalog: &[Arc<FiniteLocalAlgebra>],
    caps: &Caps,
) -> Result<DeformationSummary> {
    let adj = Adjoint::new(rhobar)?;
    let h1 = h1_with_adjoint(&rhobar.group, &adj, caps)?;
    let h2 = h2_with_adjoint(&rhobar.group, &adj, caps)?;
    let mut ring_counts = Vec::new();
    let mut free_ok = true;
    for r in catalog {
        let lifts = enumerate_lifts(rhobar, r, Strategy::Auto, caps)?;
        let classes = deformation_classes(&lifts, caps)?;
        let expected = (r.p as u128).pow(h1.dim as u32 * r.max_ideal_log_size());
        if classes.len() as u128 != expected {
            free_ok = false;
        }
        ring_counts.push((r.name.clone(), classes.len()));
    }
    Ok(DeformationSummary {
        tangent_dim: h1.dim,
        h2_dim: h2.dim,
        rigid: h1.dim == 0,
        ring_counts,
        matches_free_model: if h2.dim == 0 { Some(free_ok) } else { None },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::*;
    use crate::ring::{ring_trunc, ring_zpn};

    fn caps() -> Caps {
        Caps::default()
    }

    #[test]
    fn lifts_to_the_residue_field_are_a_singleton() {
        let c = caps();
        let fx = fixture_s3_standard(&c).unwrap();
        let lifts = enumerate_lifts(&fx.rhobar, &fx.field, Strategy::Exhaustive, &c).unwrap();
        assert_eq!(lifts.len(), 1);
        let classes = deformation_classes(&lifts, &c).unwrap();
        assert_eq!(classes.len(), 1);
    }

    #[test]
    fn trivial_character_of_cp_over_dual_numbers() {
        let c = caps();
        let fx = fixture_cp_trivial(3, &c).unwrap();
        let keps = ring_trunc(3, 2, &c).unwrap();
        let lifts = enumerate_lifts(&fx.rhobar, &keps, Strategy::Exhaustive, &c).unwrap();
        assert_eq!(lifts.len(), 3); // g ↦ 1 + εc
        let classes = deformation_classes(&lifts, &c).unwrap();
        assert_eq!(classes.len(), 3); // n = 1: classes = lifts
    }

    #[test]
    fn s3_standard_over_z25_is_rigid() {
        let c = caps();
        let fx = fixture_s3_standard(&c).unwrap();
        let z25 = ring_zpn(5, 2, &c).unwrap();
        let lifts = enumerate_lifts(&fx.rhobar, &z25, Strategy::Exhaustive, &c).unwrap();
        assert_eq!(lifts.len(), 125); // |B¹|-torsor over one class
        let classes = deformation_classes(&lifts, &c).unwrap();
        assert_eq!(classes.len(), 1);
        assert_eq!(classes[0].orbit_size, 125);
        assert_eq!(classes[0].stabilizer_size, 5); // 1 + m
    }

    #[test]
    fn strategies_agree() {
        let c = caps();
        // three different rings, three fixtures
        let fx = fixture_s3_standard(&c).unwrap();
        let z25 = ring_zpn(5, 2, &c).unwrap();
        let ex = enumerate_lifts(&fx.rhobar, &z25, Strategy::Exhaustive, &c).unwrap();
        let tw = enumerate_lifts(&fx.rhobar, &z25, Strategy::Tower, &c).unwrap();
        assert_eq!(ex.keys(), tw.keys());

        let fx = fixture_c2_nonsemisimple(&c).unwrap();
        let z8 = ring_zpn(2, 3, &c).unwrap();
        let ex = enumerate_lifts(&fx.rhobar, &z8, Strategy::Exhaustive, &c).unwrap();
        let tw = enumerate_lifts(&fx.rhobar, &z8, Strategy::Tower, &c).unwrap();
        assert_eq!(ex.keys(), tw.keys());

        let fx = fixture_cp_trivial(3, &c).unwrap();
        let t3 = ring_trunc(3, 3, &c).unwrap();
        let ex = enumerate_lifts(&fx.rhobar, &t3, Strategy::Exhaustive, &c).unwrap();
        let tw = enumerate_lifts(&fx.rhobar, &t3, Strategy::Tower, &c).unwrap();
        assert_eq!(ex.keys(), tw.keys());
    }

    #[test]
    fn tangent_space_of_trivial_cp_character() {
        let c = caps();
        let fx = fixture_cp_trivial(3, &c).unwrap();
        let t = tangent_space(&fx.rhobar, &c).unwrap();
        assert_eq!(t.h1.dim, 1);
        assert_eq!(t.classes.len(), 3); // p^d
        // bijection: distinct coordinates
        let mut seen = std::collections::BTreeSet::new();
        for co in &t.coords {
            assert!(seen.insert(co.clone()));
        }
    }

    #[test]
    fn tangent_space_of_rigid_fixture() {
        let c = caps();
        let fx = fixture_s3_standard(&c).unwrap();
        let t = tangent_space(&fx.rhobar, &c).unwrap();
        assert_eq!(t.h1.dim, 0);
        assert_eq!(t.classes.len(), 1);
    }

    #[test]
    fn tangent_space_additivity() {
        let c = caps();
        let fx = fixture_cp_trivial(2, &c).unwrap();
        let t = tangent_space(&fx.rhobar, &c).unwrap();
        // ε-coordinate addition matches cocycle addition mod coboundaries
        let keps = &t.ring;
        let p = 2u64;
        for i in 0..t.classes.len() {
            for j in 0..t.classes.len() {
                let zi = cocycle_of_lift(&fx.rhobar, &t.classes[i].representative, &keps.basis(1)).unwrap();
                let zj = cocycle_of_lift(&fx.rhobar, &t.classes[j].representative, &keps.basis(1)).unwrap();
                let sum: Vec<u8> = zi.iter().zip(zj.iter()).map(|(&a, &b)| ((a as u64 + b as u64) % p) as u8).collect();
                let lift = lift_from_cocycle(&fx.rhobar, keps, &sum, &c).unwrap();
                let cong = CongruenceGroup::new(keps, fx.rhobar.dim, &c).unwrap();
                let key = orbit_canonical_key(&lift.gen_images(), keps, &cong);
                // the sum's class coordinates are the sums of coordinates
                let want: Vec<u8> = t.coords[i]
                    .iter()
                    .zip(t.coords[j].iter())
                    .map(|(&a, &b)| ((a as u64 + b as u64) % p) as u8)
                    .collect();
                let found = t
                    .classes
                    .iter()
                    .position(|cl| cl.key() == key)
                    .expect("sum lift lands in a class");
                assert_eq!(t.coords[found], want);
            }
        }
    }

    #[test]
    fn fiber_check_rigid_and_degenerate() {
        let c = caps();
        let fx = fixture_s3_standard(&c).unwrap();
        for cfg in fiber_configs(5, &c).unwrap() {
            let legs = FiberLegs {
                a1: &cfg.a1,
                a2: &cfg.a2,
                a0: &cfg.a0,
                phi1: &cfg.phi1,
                phi2: &cfg.phi2,
            };
            let rep = fiber_product_check(&fx.rhobar, &legs, None, &c).unwrap();
            assert!(rep.bijective, "config {}: {:?}", cfg.label, rep);
            assert_eq!(rep.d3, 1, "rigid fixture has singleton class sets");
        }
    }

    #[test]
    fn fiber_check_with_positive_tangent() {
        let c = caps();
        let fx = fixture_sl2f3_natural(&c).unwrap();
        let cfgs = fiber_configs(3, &c).unwrap();
        let cfg = &cfgs[0]; // dual,dual/Fp
        let legs = FiberLegs {
            a1: &cfg.a1,
            a2: &cfg.a2,
            a0: &cfg.a0,
            phi1: &cfg.phi1,
            phi2: &cfg.phi2,
        };
        let rep = fiber_product_check(&fx.rhobar, &legs, None, &c).unwrap();
        assert!(rep.bijective, "{:?}", rep);
        assert_eq!(rep.d3, rep.d1 * rep.d2); // D(A₀) is a singleton
        assert!(rep.d1 > 1, "positive tangent dimension expected");
    }

    #[test]
    fn glue_rigid_lifts() {
        let c = caps();
        let fx = fixture_s3_standard(&c).unwrap();
        let cfgs = fiber_configs(5, &c).unwrap();
        let cfg = &cfgs[1]; // Zp2,Zp2/Zp
        let legs = FiberLegs {
            a1: &cfg.a1,
            a2: &cfg.a2,
            a0: &cfg.a0,
            phi1: &cfg.phi1,
            phi2: &cfg.phi2,
        };
        let (a3, pr1, pr2) = crate::ring::fiber_product(
            legs.a1, legs.a2, legs.a0, legs.phi1, legs.phi2, &c,
        )
        .unwrap();
        let lifts1 = enumerate_lifts(&fx.rhobar, legs.a1, Strategy::Auto, &c).unwrap();
        let lifts2 = enumerate_lifts(&fx.rhobar, legs.a2, Strategy::Auto, &c).unwrap();
        // two arbitrary members (classes agree over A₀ by rigidity)
        let r1 = lifts1.materialize(0);
        let r2 = lifts2.materialize(lifts2.len() - 1);
        let glued =
            glue_over_fiber_product(&fx.rhobar, &r1, &r2, &legs, &a3, &pr1, &pr2, &c).unwrap();
        // projections are conjugate to the inputs
        let cong1 = CongruenceGroup::new(legs.a1, 2, &c).unwrap();
        let p1 = reduce_rep(&glued, &pr1, legs.a1).unwrap();
        assert_eq!(
            orbit_canonical_key(&p1.gen_images(), legs.a1, &cong1),
            orbit_canonical_key(&r1.gen_images(), legs.a1, &cong1)
        );
        let cong2 = CongruenceGroup::new(legs.a2, 2, &c).unwrap();
        let p2 = reduce_rep(&glued, &pr2, legs.a2).unwrap();
        assert_eq!(
            orbit_canonical_key(&p2.gen_images(), legs.a2, &cong2),
            orbit_canonical_key(&r2.gen_images(), legs.a2, &cong2)
        );
    }

    #[test]
    fn inverse_limit_rigid_and_character() {
        let c = caps();
        let fx = fixture_s3_standard(&c).unwrap();
        let rep = inverse_limit_check(&fx.rhobar, 3, &c).unwrap();
        assert!(rep.bijective);
        assert_eq!(rep.top_classes, 1);

        // trivial character of C₂ at p = 2: |Hom(C₂, 1+2ℤ/8)| = 4
        let fx = fixture_cp_trivial(2, &c).unwrap();
        let rep = inverse_limit_check(&fx.rhobar, 3, &c).unwrap();
        assert!(rep.bijective);
        assert_eq!(rep.top_classes, 4);
        assert_eq!(rep.chains, 4);

        // N = 1 degenerates to the identity map
        let rep = inverse_limit_check(&fx.rhobar, 1, &c).unwrap();
        assert!(rep.bijective);
    }

    #[test]
    fn lift_classes_rigid_unique() {
        let c = caps();
        let fx = fixture_s3_standard(&c).unwrap();
        let z25 = ring_zpn(5, 2, &c).unwrap();
        let z5 = ring_zpn(5, 1, &c).unwrap();
        let phi = RingMorphism::new(&z25, &z5, vec![vec![1]]).unwrap();
        let lifts_b = enumerate_lifts(&fx.rhobar, &z5, Strategy::Auto, &c).unwrap();
        let classes_b = deformation_classes(&lifts_b, &c).unwrap();
        let res = lift_classes(&fx.rhobar, &classes_b[0], &z25, &phi, &c).unwrap();
        assert!(res.obstruction_vanishes);
        assert_eq!(res.lifted.len(), 1);
    }

    #[test]
    fn lift_classes_obstruction_consistency_on_klein() {
        let c = caps();
        let fx = fixture_klein_trivial2(&c).unwrap();
        let z8 = ring_zpn(2, 3, &c).unwrap();
        let z4 = ring_zpn(2, 2, &c).unwrap();
        let phi = RingMorphism::new(&z8, &z4, vec![vec![1]]).unwrap();
        let lifts_b = enumerate_lifts(&fx.rhobar, &z4, Strategy::Auto, &c).unwrap();
        let classes_b = deformation_classes(&lifts_b, &c).unwrap();
        let mut some_obstructed = false;
        let mut some_liftable = false;
        for cl in &classes_b {
            let res = lift_classes(&fx.rhobar, cl, &z8, &phi, &c).unwrap();
            assert_eq!(res.obstruction_vanishes, !res.lifted.is_empty());
            some_obstructed |= !res.obstruction_vanishes;
            some_liftable |= res.obstruction_vanishes;
        }
        assert!(some_obstructed, "an obstructed class exists at p = 2");
        assert!(some_liftable, "the trivial class always lifts");
    }

    #[test]
    fn filter_by_central_conditions() {
        let c = caps();
        let fx = fixture_q8_mod3(&c).unwrap();
        let keps = ring_trunc(3, 2, &c).unwrap();
        let lifts = enumerate_lifts(&fx.rhobar, &keps, Strategy::Auto, &c).unwrap();
        let cong = CongruenceGroup::new(&keps, 2, &c).unwrap();
        let classes = deformation_classes_with(&lifts, &cong).unwrap();
        let total = classes.len();
        assert!(total >= 1);
        // Schur: absolutely irreducible classes all have central characters
        let kept = filter_by_condition(
            deformation_classes_with(&lifts, &cong).unwrap(),
            Condition::CentralCharacter,
            &cong,
        )
        .unwrap();
        assert_eq!(kept.len(), total);
        // z = −1 ∈ Q₈ acts by −1 on the 2-dim representation: filtered away
        let z = 4usize; // −1 in the {±1,±i,±j,±k} encoding
        assert!(fx.group.center().contains(&z));
        let kept = filter_by_condition(
            deformation_classes_with(&lifts, &cong).unwrap(),
            Condition::CentralElementTrivial(z),
            &cong,
        )
        .unwrap();
        assert!(kept.is_empty());
        // trivial representation is retained by every central filter
        let fx2 = fixture_cp_trivial(3, &c).unwrap();
        let lifts2 = enumerate_lifts(&fx2.rhobar, &keps, Strategy::Auto, &c).unwrap();
        let cong2 = CongruenceGroup::new(&keps, 1, &c).unwrap();
        let classes2 = deformation_classes_with(&lifts2, &cong2).unwrap();
        let n2 = classes2.len();
        let kept2 =
            filter_by_condition(classes2, Condition::CentralElementTrivial(0), &cong2).unwrap();
        assert_eq!(kept2.len(), n2); // identity acts trivially everywhere
    }

    #[test]
    fn twist_by_trivial_character_fixes_classes() {
        let c = caps();
        let fx = fixture_s3_standard(&c).unwrap();
        let z25 = ring_zpn(5, 2, &c).unwrap();
        let lifts = enumerate_lifts(&fx.rhobar, &z25, Strategy::Auto, &c).unwrap();
        let cong = CongruenceGroup::new(&z25, 2, &c).unwrap();
        let classes = deformation_classes_with(&lifts, &cong).unwrap();
        let chi = MatrixRep::trivial(fx.group.clone(), z25.clone(), 1);
        for cl in &classes {
            let t = twist_class(cl, &chi, &cong).unwrap();
            assert_eq!(t.key(), cl.key());
        }
    }

    #[test]
    fn summary_of_rigid_fixture() {
        let c = caps();
        let fx = fixture_s3_standard(&c).unwrap();
        let catalog = ring_catalog(5, &c).unwrap();
        let small: Vec<_> = catalog
            .into_iter()
            .filter(|r| (r.max_ideal_log_size() * 4) <= 8) // keep |G_A| small here
            .collect();
        let s = summary(&fx.rhobar, &small, &c).unwrap();
        assert_eq!(s.tangent_dim, 0);
        assert_eq!(s.h2_dim, 0);
        assert!(s.rigid);
        assert!(s.ring_counts.iter().all(|(_, n)| *n == 1));
        assert_eq!(s.matches_free_model, Some(true));
    }
}

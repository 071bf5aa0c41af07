//! Finite groups as Cayley tables with distinguished generators.
//!
//! Orders stay small (cap 200 by default), so everything downstream iterates
//! over actual elements: no coset enumeration, no presentations. The identity
//! is normalized to index 0.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::zmod::is_prime;
use crate::Caps;

/// A group given by its full multiplication table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteGroup {
    pub name: String,
    pub order: usize,
    /// table[g·order + h] = g·h
    pub table: Vec<u32>,
    pub inverse: Vec<u32>,
    pub generators: Vec<u32>,
}

impl FiniteGroup {
    pub fn new(
        name: String,
        table: Vec<Vec<u32>>,
        generators: Vec<u32>,
        caps: &Caps,
    ) -> Result<Arc<Self>> {
        let order = table.len();
        if order == 0 {
            return Err(Error::InvalidGroup("empty table".into()));
        }
        if order > caps.group_order {
            return Err(Error::CapExceeded {
                what: "group order",
                needed: order as u128,
                cap: caps.group_order as u128,
            });
        }
        if table.iter().any(|r| r.len() != order) {
            return Err(Error::InvalidGroup("table is not square".into()));
        }
        let flat: Vec<u32> = table.iter().flatten().copied().collect();
        if flat.iter().any(|&x| x as usize >= order) {
            return Err(Error::InvalidGroup("table entry out of range".into()));
        }
        // identity at index 0
        for g in 0..order {
            if flat[g] as usize != g || flat[g * order] as usize != g {
                return Err(Error::InvalidGroup("index 0 is not an identity".into()));
            }
        }
        // associativity
        for a in 0..order {
            for b in 0..order {
                let ab = flat[a * order + b] as usize;
                for c in 0..order {
                    let bc = flat[b * order + c] as usize;
                    if flat[ab * order + c] != flat[a * order + bc] {
                        return Err(Error::InvalidGroup(format!(
                            "not associative at ({a},{b},{c})"
                        )));
                    }
                }
            }
        }
        // inverses
        let mut inverse = vec![u32::MAX; order];
        for g in 0..order {
            match (0..order).find(|&h| flat[g * order + h] == 0) {
                Some(h) if flat[h * order + g] == 0 => inverse[g] = h as u32,
                _ => return Err(Error::InvalidGroup(format!("no inverse for {g}"))),
            }
        }
        // generators generate
        let mut generators = generators;
        if generators.is_empty() {
            generators = (1..order as u32).collect();
            if order == 1 {
                generators = vec![0];
            }
        }
        if generators.iter().any(|&g| g as usize >= order) {
            return Err(Error::InvalidGroup("generator index out of range".into()));
        }
        let mut reached = vec![false; order];
        reached[0] = true;
        let mut stack = vec![0usize];
        while let Some(g) = stack.pop() {
            for &s in &generators {
                let n = flat[g * order + s as usize] as usize;
                if !reached[n] {
                    reached[n] = true;
                    stack.push(n);
                }
            }
        }
        if !reached.iter().all(|&r| r) {
            return Err(Error::InvalidGroup(
                "generators do not generate the group".into(),
            ));
        }
        Ok(Arc::new(FiniteGroup {
            name,
            order,
            table: flat,
            inverse,
            generators,
        }))
    }

    #[inline]
    pub fn mul(&self, g: usize, h: usize) -> usize {
        self.table[g * self.order + h] as usize
    }

    #[inline]
    pub fn inv(&self, g: usize) -> usize {
        self.inverse[g] as usize
    }

    pub fn element_order(&self, g: usize) -> usize {
        let mut x = g;
        let mut n = 1;
        while x != 0 {
            x = self.mul(x, g);
            n += 1;
        }
        n
    }

    /// Exact set of elements commuting with everything.
    pub fn center(&self) -> Vec<usize> {
        (0..self.order)
            .filter(|&z| (0..self.order).all(|g| self.mul(z, g) == self.mul(g, z)))
            .collect()
    }

    /// Expresses each element as a word in the generators (BFS, shortest
    /// first; deterministic).
    pub fn generator_words(&self) -> Vec<Vec<usize>> {
        let mut words: Vec<Option<Vec<usize>>> = vec![None; self.order];
        words[0] = Some(vec![]);
        let mut queue = std::collections::VecDeque::from([0usize]);
        while let Some(g) = queue.pop_front() {
            for (si, &s) in self.generators.iter().enumerate() {
                let n = self.mul(g, s as usize);
                if words[n].is_none() {
                    let mut w = words[g].clone().unwrap();
                    w.push(si);
                    words[n] = Some(w);
                    queue.push_back(n);
                }
            }
        }
        words.into_iter().map(|w| w.unwrap()).collect()
    }

    /// The subgroup generated by a set, as a sorted element list.
    pub fn closure(&self, gens: &[usize]) -> Vec<usize> {
        let mut inside = vec![false; self.order];
        inside[0] = true;
        let mut stack = vec![0usize];
        while let Some(g) = stack.pop() {
            for &s in gens {
                for n in [self.mul(g, s), self.mul(g, self.inv(s))] {
                    if !inside[n] {
                        inside[n] = true;
                        stack.push(n);
                    }
                }
            }
        }
        (0..self.order).filter(|&g| inside[g]).collect()
    }
}

/// A verified homomorphism between Cayley groups, as an image table.
#[derive(Debug, Clone)]
pub struct GroupHom {
    pub map: Vec<u32>,
}

impl GroupHom {
    pub fn new(src: &FiniteGroup, dst: &FiniteGroup, map: Vec<u32>) -> Result<Self> {
        if map.len() != src.order || map.iter().any(|&x| x as usize >= dst.order) {
            return Err(Error::InvalidGroup("homomorphism table shape".into()));
        }
        for g in 0..src.order {
            for h in 0..src.order {
                if map[src.mul(g, h)] as usize != dst.mul(map[g] as usize, map[h] as usize) {
                    return Err(Error::NotHomomorphism { g, h });
                }
            }
        }
        Ok(GroupHom { map })
    }
}

/// Free rank and p-torsion exponents of the pro-p completion of the
/// abelianization: Γ ≅ ℤ_p^r × ∏ᵢ ℤ/p^{eᵢ}.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct AbelianizationDescriptor {
    pub p: u64,
    pub free_rank: u32,
    pub torsion: Vec<u32>,
}

impl AbelianizationDescriptor {
    /// |Γ| for finite Γ (free rank 0).
    pub fn size(&self) -> Option<u128> {
        if self.free_rank > 0 {
            return None;
        }
        Some((self.p as u128).pow(self.torsion.iter().sum()))
    }
}

/// The p-part invariants of G/[G,G]; free rank is always 0 for finite G.
pub fn abelianization(g: &FiniteGroup, p: u64) -> Result<AbelianizationDescriptor> {
    if !is_prime(p) {
        return Err(Error::NotPrime(p));
    }
    // commutator subgroup: closure of all [a,b] = a b a⁻¹ b⁻¹
    let mut comms = Vec::new();
    for a in 0..g.order {
        for b in 0..g.order {
            let c = g.mul(g.mul(a, b), g.mul(g.inv(a), g.inv(b)));
            if c != 0 {
                comms.push(c);
            }
        }
    }
    comms.sort_unstable();
    comms.dedup();
    let derived = g.closure(&comms);
    // quotient group on coset representatives
    let mut coset_of = vec![usize::MAX; g.order];
    let mut reps = Vec::new();
    for x in 0..g.order {
        if coset_of[x] != usize::MAX {
            continue;
        }
        let idx = reps.len();
        for &d in &derived {
            coset_of[g.mul(x, d)] = idx;
        }
        reps.push(x);
    }
    let ab_order = reps.len();
    // p-primary invariants by torsion counting: the number of cyclic factors
    // of exponent ≥ k equals log_p |X[p^k]| − log_p |X[p^{k-1}]|
    let quot_mul = |a: usize, b: usize| coset_of[g.mul(reps[a], reps[b])];
    let elt_order = |a: usize| -> usize {
        let mut x = a;
        let mut n = 1;
        while x != 0 {
            x = quot_mul(x, a);
            n += 1;
        }
        n
    };
    let orders: Vec<usize> = (0..ab_order).map(elt_order).collect();
    // d_k := log_p|X[pᵏ]| − log_p|X[p^{k−1}]| counts the cyclic factors of
    // exponent ≥ k; the multiset of exponents follows by differencing
    let log_torsion = |k: u32| -> u32 {
        let pk = (p as u128).pow(k);
        let count = orders.iter().filter(|&&o| pk % (o as u128) == 0).count();
        let mut log = 0u32;
        let mut n = 1u128;
        while n < count as u128 {
            n *= p as u128;
            log += 1;
        }
        debug_assert_eq!(n, count as u128, "p-torsion count is not a p-power");
        log
    };
    let mut ge_counts: Vec<u32> = Vec::new();
    let mut prev = 0u32;
    for k in 1..=64u32 {
        let cur = log_torsion(k);
        if cur == prev {
            break;
        }
        ge_counts.push(cur - prev);
        prev = cur;
    }
    let mut exps = Vec::new();
    for k in 1..=ge_counts.len() {
        let ge_k = ge_counts[k - 1];
        let ge_next = if k < ge_counts.len() { ge_counts[k] } else { 0 };
        for _ in 0..(ge_k - ge_next) {
            exps.push(k as u32);
        }
    }
    exps.sort_unstable();
    Ok(AbelianizationDescriptor {
        p,
        free_rank: 0,
        torsion: exps,
    })
}

/// Descriptor of the pro-p completion of the abelianization of GLₙ(ℚ_p):
/// determinant and valuation give ℤ_p × U¹ ≅ ℤ_p², so r = 2 with no torsion.
/// p = 2 is rejected (U¹ picks up extra 2-torsion).
pub fn glqp_descriptor(n: u32, p: u64) -> Result<AbelianizationDescriptor> {
    if n == 0 {
        return Err(Error::Precondition("n must be at least 1".into()));
    }
    if !is_prime(p) {
        return Err(Error::NotPrime(p));
    }
    if p == 2 {
        return Err(Error::EvenPrime(
            "the unit decomposition degenerates at p = 2",
        ));
    }
    Ok(AbelianizationDescriptor {
        p,
        free_rank: 2,
        torsion: vec![],
    })
}

// ---- presets ----------------------------------------------------------------

fn table_from_op(
    name: String,
    elems: usize,
    op: impl Fn(usize, usize) -> usize,
    gens: Vec<u32>,
    caps: &Caps,
) -> Result<Arc<FiniteGroup>> {
    let table: Vec<Vec<u32>> = (0..elems)
        .map(|a| (0..elems).map(|b| op(a, b) as u32).collect())
        .collect();
    FiniteGroup::new(name, table, gens, caps)
}

pub fn group_cyclic(n: usize, caps: &Caps) -> Result<Arc<FiniteGroup>> {
    if n == 0 {
        return Err(Error::InvalidGroup("cyclic group of order 0".into()));
    }
    table_from_op(
        format!("C{n}"),
        n,
        |a, b| (a + b) % n,
        if n == 1 { vec![0] } else { vec![1] },
        caps,
    )
}

/// Dihedral group of order 2n: elements r^a s^e encoded as a + n·e.
pub fn group_dihedral(n: usize, caps: &Caps) -> Result<Arc<FiniteGroup>> {
    if n < 1 {
        return Err(Error::InvalidGroup("dihedral parameter must be ≥ 1".into()));
    }
    let op = move |x: usize, y: usize| {
        let (a, e) = (x % n, x / n);
        let (b, f) = (y % n, y / n);
        // (r^a s^e)(r^b s^f) = r^{a + (-1)^e b} s^{e+f}
        let exp = if e == 0 { (a + b) % n } else { (a + n - b % n) % n };
        exp + n * ((e + f) % 2)
    };
    table_from_op(format!("D{n}"), 2 * n, op, vec![1, n as u32], caps)
}

/// Quaternion group {±1, ±i, ±j, ±k}; index = u + 4·s encodes (−1)^s·basis(u)
/// with basis order 1, i, j, k.
pub fn group_quaternion(caps: &Caps) -> Result<Arc<FiniteGroup>> {
    // multiplication of {1,i,j,k} with sign: (u, v) ↦ (sign, w)
    let base = |u: usize, v: usize| -> (i32, usize) {
        match (u, v) {
            (0, v) => (1, v),
            (u, 0) => (1, u),
            (1, 1) => (-1, 0),
            (2, 2) => (-1, 0),
            (3, 3) => (-1, 0),
            (1, 2) => (1, 3),
            (2, 1) => (-1, 3),
            (2, 3) => (1, 1),
            (3, 2) => (-1, 1),
            (3, 1) => (1, 2),
            (1, 3) => (-1, 2),
            _ => unreachable!(),
        }
    };
    let op = move |x: usize, y: usize| {
        let (u, s) = (x % 4, x / 4);
        let (v, t) = (y % 4, y / 4);
        let (sign, w) = base(u, v);
        let neg = (s + t + usize::from(sign < 0)) % 2;
        w + 4 * neg
    };
    table_from_op("Q8".into(), 8, op, vec![1, 2], caps)
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = vec![vec![]];
    for k in 0..n {
        let mut next = Vec::new();
        for p in &out {
            for pos in 0..=k {
                let mut q = p.clone();
                q.insert(pos, k);
                next.push(q);
            }
        }
        out = next;
    }
    out.sort();
    out
}

/// Symmetric group Sₙ (n ≤ 5), elements in lexicographic one-line order.
pub fn group_symmetric(n: usize, caps: &Caps) -> Result<Arc<FiniteGroup>> {
    if n == 0 || n > 5 {
        return Err(Error::Precondition("symmetric preset needs 1 ≤ n ≤ 5".into()));
    }
    let perms = permutations(n);
    let index: std::collections::BTreeMap<Vec<usize>, usize> = perms
        .iter()
        .enumerate()
        .map(|(i, p)| (p.clone(), i))
        .collect();
    let compose = |a: &[usize], b: &[usize]| -> Vec<usize> {
        // (a∘b)(x) = a(b(x))
        (0..a.len()).map(|x| a[b[x]]).collect()
    };
    let op = |x: usize, y: usize| index[&compose(&perms[x], &perms[y])];
    // transposition (0 1) and the n-cycle generate
    let mut transp: Vec<usize> = (0..n).collect();
    transp.swap(0, 1);
    let cycle: Vec<usize> = (0..n).map(|i| (i + 1) % n).collect();
    let gens = if n == 1 {
        vec![0]
    } else if n == 2 {
        vec![index[&transp] as u32]
    } else {
        vec![index[&transp] as u32, index[&cycle] as u32]
    };
    table_from_op(format!("S{n}"), perms.len(), op, gens, caps)
}

/// Alternating group A₄ as even permutations of S₄.
pub fn group_alternating4(caps: &Caps) -> Result<Arc<FiniteGroup>> {
    let perms = permutations(4);
    let parity = |p: &[usize]| -> usize {
        let mut inv = 0;
        for i in 0..p.len() {
            for j in i + 1..p.len() {
                if p[i] > p[j] {
                    inv += 1;
                }
            }
        }
        inv % 2
    };
    let even: Vec<Vec<usize>> = perms.into_iter().filter(|p| parity(p) == 0).collect();
    let index: std::collections::BTreeMap<Vec<usize>, usize> = even
        .iter()
        .enumerate()
        .map(|(i, p)| (p.clone(), i))
        .collect();
    let op = |x: usize, y: usize| {
        let c: Vec<usize> = (0..4).map(|t| even[x][even[y][t]]).collect();
        index[&c]
    };
    // (0 1 2) and (0 1)(2 3)
    let three_cycle = vec![1, 2, 0, 3];
    let double = vec![1, 0, 3, 2];
    let gens = vec![index[&three_cycle] as u32, index[&double] as u32];
    table_from_op("A4".into(), even.len(), op, gens, caps)
}

/// SL₂(𝔽_p) for p ≤ 3: identity first, then lexicographic matrix order.
pub fn group_sl2(p: u64, caps: &Caps) -> Result<Arc<FiniteGroup>> {
    if !is_prime(p) {
        return Err(Error::NotPrime(p));
    }
    if p > 3 {
        return Err(Error::Precondition("SL2 preset needs p ≤ 3".into()));
    }
    let mut mats = vec![[1, 0, 0, 1]];
    for a in 0..p {
        for b in 0..p {
            for c in 0..p {
                for d in 0..p {
                    let m = [a, b, c, d];
                    if (a * d % p + p - b * c % p) % p == 1 && m != [1, 0, 0, 1] {
                        mats.push(m);
                    }
                }
            }
        }
    }
    let index: std::collections::BTreeMap<[u64; 4], usize> = mats
        .iter()
        .enumerate()
        .map(|(i, m)| (*m, i))
        .collect();
    let op = |x: usize, y: usize| {
        let (m, n) = (mats[x], mats[y]);
        let prod = [
            (m[0] * n[0] + m[1] * n[2]) % p,
            (m[0] * n[1] + m[1] * n[3]) % p,
            (m[2] * n[0] + m[3] * n[2]) % p,
            (m[2] * n[1] + m[3] * n[3]) % p,
        ];
        index[&prod]
    };
    let e = index[&[1, 1, 0, 1]];
    let w = index[&[0, p - 1, 1, 0]];
    table_from_op(format!("SL2(F{p})"), mats.len(), op, vec![e as u32, w as u32], caps)
}

/// Direct product with componentwise multiplication.
pub fn group_product(
    g: &FiniteGroup,
    h: &FiniteGroup,
    caps: &Caps,
) -> Result<Arc<FiniteGroup>> {
    let (og, oh) = (g.order, h.order);
    let op = |x: usize, y: usize| {
        let (a, b) = (x / oh, x % oh);
        let (c, d) = (y / oh, y % oh);
        g.mul(a, c) * oh + h.mul(b, d)
    };
    let mut gens: Vec<u32> = g.generators.iter().map(|&s| s * oh as u32).collect();
    gens.extend(h.generators.iter().map(|&s| s));
    table_from_op(format!("{}x{}", g.name, h.name), og * oh, op, gens, caps)
}

/// Named presets addressable from the CLI.
pub fn make_group(preset: &str, n: usize, caps: &Caps) -> Result<Arc<FiniteGroup>> {
    match preset {
        "C" => group_cyclic(n, caps),
        "D" => group_dihedral(n, caps),
        "Q8" => group_quaternion(caps),
        "S" => group_symmetric(n, caps),
        "A4" => group_alternating4(caps),
        "SL2" => group_sl2(n as u64, caps),
        other => Err(Error::UnknownPreset(other.into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn caps() -> Caps {
        Caps::default()
    }

    #[test]
    fn trivial_group() {
        let g = group_cyclic(1, &caps()).unwrap();
        assert_eq!(g.order, 1);
    }

    #[test]
    fn s3_structure() {
        let g = group_symmetric(3, &caps()).unwrap();
        assert_eq!(g.order, 6);
        assert_eq!(g.generators.len(), 2);
        let ab2 = abelianization(&g, 2).unwrap();
        assert_eq!(ab2.torsion, vec![1]); // S₃ᵃᵇ = ℤ/2
        let ab3 = abelianization(&g, 3).unwrap();
        assert!(ab3.torsion.is_empty());
    }

    #[test]
    fn sl2_f3_order() {
        let g = group_sl2(3, &caps()).unwrap();
        assert_eq!(g.order, 24);
    }

    #[test]
    fn quaternion_center() {
        let g = group_quaternion(&caps()).unwrap();
        assert_eq!(g.order, 8);
        let z = g.center();
        assert_eq!(z.len(), 2); // {±1}
        assert_eq!(z[0], 0);
    }

    #[test]
    fn cyclic_center_is_everything() {
        let g = group_cyclic(6, &caps()).unwrap();
        assert_eq!(g.center().len(), 6);
    }

    #[test]
    fn abelianization_of_cp2() {
        let g = group_cyclic(9, &caps()).unwrap();
        let ab = abelianization(&g, 3).unwrap();
        assert_eq!(ab.torsion, vec![2]); // ℤ/9 = ℤ/3²
        assert_eq!(ab.free_rank, 0);
    }

    #[test]
    fn abelianization_of_klein_four() {
        let c2 = group_cyclic(2, &caps()).unwrap();
        let v4 = group_product(&c2, &c2, &caps()).unwrap();
        let ab = abelianization(&v4, 2).unwrap();
        assert_eq!(ab.torsion, vec![1, 1]);
    }

    #[test]
    fn abelianization_of_q8() {
        let g = group_quaternion(&caps()).unwrap();
        let ab = abelianization(&g, 2).unwrap();
        assert_eq!(ab.torsion, vec![1, 1]); // Q₈ᵃᵇ = ℤ/2 × ℤ/2
    }

    #[test]
    fn abelianization_mixed_part() {
        // C₁₂ at p = 2 has 2-part ℤ/4; at p = 3 has 3-part ℤ/3
        let g = group_cyclic(12, &caps()).unwrap();
        assert_eq!(abelianization(&g, 2).unwrap().torsion, vec![2]);
        assert_eq!(abelianization(&g, 3).unwrap().torsion, vec![1]);
    }

    #[test]
    fn glqp_examples() {
        let d = glqp_descriptor(2, 5).unwrap();
        assert_eq!((d.free_rank, d.torsion.len()), (2, 0));
        let d = glqp_descriptor(1, 3).unwrap();
        assert_eq!((d.free_rank, d.torsion.len()), (2, 0));
        assert!(glqp_descriptor(3, 2).is_err());
    }

    #[test]
    fn abelianization_generator_independent() {
        // recompute with a different generating set: invariants agree
        let g = group_symmetric(4, &caps()).unwrap();
        let ab = abelianization(&g, 2).unwrap();
        let alt = FiniteGroup::new(
            "S4'".into(),
            (0..g.order)
                .map(|a| (0..g.order).map(|b| g.mul(a, b) as u32).collect())
                .collect(),
            (1..g.order as u32).collect(),
            &caps(),
        )
        .unwrap();
        let ab2 = abelianization(&alt, 2).unwrap();
        assert_eq!(ab.torsion, ab2.torsion);
    }

    #[test]
    fn dihedral_orders() {
        for n in 1..=6 {
            let g = group_dihedral(n, &caps()).unwrap();
            assert_eq!(g.order, 2 * n);
        }
    }

    #[test]
    fn words_reconstruct_elements() {
        let g = group_quaternion(&caps()).unwrap();
        let words = g.generator_words();
        for (x, w) in words.iter().enumerate() {
            let mut acc = 0usize;
            for &si in w {
                acc = g.mul(acc, g.generators[si] as usize);
            }
            assert_eq!(acc, x);
        }
    }

    #[test]
    fn hom_validation() {
        let c4 = group_cyclic(4, &caps()).unwrap();
        let c2 = group_cyclic(2, &caps()).unwrap();
        assert!(GroupHom::new(&c4, &c2, vec![0, 1, 0, 1]).is_ok());
        assert!(GroupHom::new(&c4, &c2, vec![0, 1, 1, 0]).is_err());
    }
}

//! The shipped fixture pack: residual representations and coefficient-ring
//! catalogs that every structural check runs against.

use std::sync::Arc;

use crate::error::Result;
use crate::group::{
    group_cyclic, group_product, group_quaternion, group_sl2, group_symmetric, FiniteGroup,
};
use crate::matrix::Mat;
use crate::rep::MatrixRep;
use crate::ring::{
    fiber_product, residue_morphism, ring_mixed, ring_trunc, ring_zpn, FiniteLocalAlgebra,
    RingMorphism,
};
use crate::Caps;

pub struct Fixture {
    pub name: &'static str,
    pub p: u64,
    pub group: Arc<FiniteGroup>,
    pub field: Arc<FiniteLocalAlgebra>,
    pub rhobar: MatrixRep,
    pub abs_irreducible: bool,
}

pub fn fixture_cp_trivial(p: u64, caps: &Caps) -> Result<Fixture> {
    let group = group_cyclic(p as usize, caps)?;
    let field = ring_zpn(p, 1, caps)?;
    let rhobar = MatrixRep::trivial(group.clone(), field.clone(), 1);
    Ok(Fixture {
        name: "cp-trivial-char",
        p,
        group,
        field,
        rhobar,
    abs_irreducible: true,
    })
}

pub fn fixture_s3_standard(caps: &Caps) -> Result<Fixture> {
    let group = group_symmetric(3, caps)?;
    let field = ring_zpn(5, 1, caps)?;
    let t = Mat::from_int_rows(&field, &[vec![0, 1], vec![1, 0]]);
    let c = Mat::from_int_rows(&field, &[vec![0, 4], vec![1, 4]]);
    let rhobar = MatrixRep::make(group.clone(), field.clone(), vec![t, c], caps)?;
    Ok(Fixture {
        name: "s3-standard-mod5",
        p: 5,
        group,
        field,
        rhobar,
        abs_irreducible: true,
    })
}

pub fn fixture_q8_mod3(caps: &Caps) -> Result<Fixture> {
    let group = group_quaternion(caps)?;
    let field = ring_zpn(3, 1, caps)?;
    let i = Mat::from_int_rows(&field, &[vec![0, 2], vec![1, 0]]);
    let j = Mat::from_int_rows(&field, &[vec![1, 1], vec![1, 2]]);
    let rhobar = MatrixRep::make(group.clone(), field.clone(), vec![i, j], caps)?;
    Ok(Fixture {
        name: "q8-2dim-mod3",
        p: 3,
        group,
        field,
        rhobar,
        abs_irreducible: true,
    })
}

pub fn fixture_sl2f3_natural(caps: &Caps) -> Result<Fixture> {
    let group = group_sl2(3, caps)?;
    let field = ring_zpn(3, 1, caps)?;
    let e = Mat::from_int_rows(&field, &[vec![1, 1], vec![0, 1]]);
    let w = Mat::from_int_rows(&field, &[vec![0, 2], vec![1, 0]]);
    let rhobar = MatrixRep::make(group.clone(), field.clone(), vec![e, w], caps)?;
    Ok(Fixture {
        name: "sl2f3-natural-mod3",
        p: 3,
        group,
        field,
        rhobar,
        abs_irreducible: true,
    })
}

pub fn fixture_c2_nonsemisimple(caps: &Caps) -> Result<Fixture> {
    let group = group_cyclic(2, caps)?;
    let field = ring_zpn(2, 1, caps)?;
    let m = Mat::from_int_rows(&field, &[vec![1, 1], vec![0, 1]]);
    let rhobar = MatrixRep::make(group.clone(), field.clone(), vec![m], caps)?;
    Ok(Fixture {
        name: "c2-nonsemisimple-mod2",
        p: 2,
        group,
        field,
        rhobar,
        abs_irreducible: false,
    })
}

/// The obstruction playground: trivial 2-dimensional representation of
/// C₂×C₂ at p = 2, where some mod-4 lifts fail to lift mod 8.
pub fn fixture_klein_trivial2(caps: &Caps) -> Result<Fixture> {
    let c2 = group_cyclic(2, caps)?;
    let group = group_product(&c2, &c2, caps)?;
    let field = ring_zpn(2, 1, caps)?;
    let rhobar = MatrixRep::trivial(group.clone(), field.clone(), 2);
    Ok(Fixture {
        name: "klein-trivial-2dim-mod2",
        p: 2,
        group,
        field,
        rhobar,
        abs_irreducible: false,
    })
}

/// The five tangent-theorem fixtures plus the obstruction playground.
pub fn all_fixtures(caps: &Caps) -> Result<Vec<Fixture>> {
    Ok(vec![
        fixture_cp_trivial(3, caps)?,
        fixture_s3_standard(caps)?,
        fixture_q8_mod3(caps)?,
        fixture_sl2f3_natural(caps)?,
        fixture_c2_nonsemisimple(caps)?,
        fixture_klein_trivial2(caps)?,
    ])
}

/// Coefficient-ring catalog at a given prime: the prime field, dual numbers,
/// ℤ/p², ℤ/p³, 𝔽_p[x]/x³, ℤ/p²[x]/(x², px), and two fiber products.
pub fn ring_catalog(p: u64, caps: &Caps) -> Result<Vec<Arc<FiniteLocalAlgebra>>> {
    let fp = ring_zpn(p, 1, caps)?;
    let dual = ring_trunc(p, 2, caps)?;
    let zp2 = ring_zpn(p, 2, caps)?;
    let zp3 = ring_zpn(p, 3, caps)?;
    let trunc3 = ring_trunc(p, 3, caps)?;
    let mixed = ring_mixed(p, 2, caps)?;
    let res_dual = residue_morphism(&dual, &fp)?;
    let (fib_dual, _, _) = fiber_product(&dual, &dual, &fp, &res_dual, &res_dual, caps)?;
    let zp1 = ring_zpn(p, 1, caps)?;
    let red2 = RingMorphism::new(&zp2, &zp1, vec![vec![1]])?;
    let (fib_zp2, _, _) = fiber_product(&zp2, &zp2, &zp1, &red2, &red2, caps)?;
    Ok(vec![fp, dual, zp2, zp3, trunc3, mixed, fib_dual, fib_zp2])
}

pub struct FiberConfig {
    pub label: String,
    pub a1: Arc<FiniteLocalAlgebra>,
    pub a2: Arc<FiniteLocalAlgebra>,
    pub a0: Arc<FiniteLocalAlgebra>,
    pub phi1: RingMorphism,
    pub phi2: RingMorphism,
}

/// Fiber-product configurations with surjective legs, including the
/// degenerate one with an identity leg.
pub fn fiber_configs(p: u64, caps: &Caps) -> Result<Vec<FiberConfig>> {
    let fp = ring_zpn(p, 1, caps)?;
    let dual = ring_trunc(p, 2, caps)?;
    let zp = ring_zpn(p, 1, caps)?;
    let zp2 = ring_zpn(p, 2, caps)?;
    let trunc3 = ring_trunc(p, 3, caps)?;
    let mixed = ring_mixed(p, 2, caps)?;
    let res = |a: &Arc<FiniteLocalAlgebra>| residue_morphism(a, &fp);
    let mut out = Vec::new();
    out.push(FiberConfig {
        label: "dual,dual/Fp".into(),
        a1: dual.clone(),
        a2: dual.clone(),
        a0: fp.clone(),
        phi1: res(&dual)?,
        phi2: res(&dual)?,
    });
    let red22 = RingMorphism::new(&zp2, &zp, vec![vec![1]])?;
    out.push(FiberConfig {
        label: "Zp2,Zp2/Zp".into(),
        a1: zp2.clone(),
        a2: zp2.clone(),
        a0: zp.clone(),
        phi1: red22.clone(),
        phi2: red22.clone(),
    });
    out.push(FiberConfig {
        label: "Zp2,dual/Fp".into(),
        a1: zp2.clone(),
        a2: dual.clone(),
        a0: fp.clone(),
        phi1: residue_morphism(&zp2, &fp)?,
        phi2: res(&dual)?,
    });
    // degenerate: second leg is the identity
    out.push(FiberConfig {
        label: "Zp2,Zp/Zp-id".into(),
        a1: zp2.clone(),
        a2: zp.clone(),
        a0: zp.clone(),
        phi1: red22.clone(),
        phi2: RingMorphism::identity(&zp),
    });
    // 𝔽_p[x]/x³ → 𝔽_p[x]/x² ≅ dual: kill x²
    let tr32 = RingMorphism::new(
        &trunc3,
        &dual,
        vec![vec![1, 0], vec![0, 1], vec![0, 0]],
    )?;
    out.push(FiberConfig {
        label: "trunc3,trunc3/dual".into(),
        a1: trunc3.clone(),
        a2: trunc3.clone(),
        a0: dual.clone(),
        phi1: tr32.clone(),
        phi2: tr32.clone(),
    });
    out.push(FiberConfig {
        label: "mixed,dual/Fp".into(),
        a1: mixed.clone(),
        a2: dual.clone(),
        a0: fp.clone(),
        phi1: residue_morphism(&mixed, &fp)?,
        phi2: res(&dual)?,
    });
    Ok(out)
}

/// Small extensions harvested from the factor chains of the catalog rings.
pub struct SmallStep {
    pub label: String,
    pub source: Arc<FiniteLocalAlgebra>,
    pub target: Arc<FiniteLocalAlgebra>,
    pub map: RingMorphism,
    pub generator: crate::ring::Elt,
}

pub fn small_extension_catalog(p: u64, caps: &Caps) -> Result<Vec<SmallStep>> {
    let fp = ring_zpn(p, 1, caps)?;
    let mut out = Vec::new();
    for ring in ring_catalog(p, caps)? {
        if ring.is_field() {
            continue;
        }
        let res = residue_morphism(&ring, &fp)?;
        let chain = crate::ring::factor_into_small_extensions(&res, &ring, &fp, caps)?;
        for (i, link) in chain.into_iter().enumerate() {
            out.push(SmallStep {
                label: format!("{}[step{}]", ring.name, i),
                source: link.source,
                target: link.target,
                map: link.map,
                generator: link.kernel_generator,
            });
        }
    }
    Ok(out)
}

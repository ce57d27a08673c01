//! Naturality of the retraction: how the construction commutes with
//! morphisms of projective systems and with a change of the index
//! through an injective cofinal isotone map carrying the ultrafilter.
//!
//! All claims are verified componentwise at explicitly supplied systems;
//! horizontal composition with a reindexing functor is realized as
//! reindex-then-evaluate.

use std::collections::BTreeMap;

use crate::algebra::Homomorphism;
use crate::error::{Error, Result};
use crate::filters::UffsMorphism;
use crate::retraction::{Retraction, RetractionInstance};
use crate::sorted::SortedMapping;
use crate::systems::ProjectiveSystem;

/// A morphism of projective systems over one index: a commuting family of
/// componentwise homomorphisms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemMorphism {
    components: Vec<SortedMapping>,
}

impl SystemMorphism {
    pub fn new(
        a: &ProjectiveSystem,
        b: &ProjectiveSystem,
        components: Vec<SortedMapping>,
    ) -> Result<Self> {
        if a.index() != b.index() {
            return Err(Error::NotASystemMorphism(
                "systems live over different indices".into(),
            ));
        }
        if components.len() != a.index().len() {
            return Err(Error::NotASystemMorphism(
                "one component per index is required".into(),
            ));
        }
        for (i, u) in components.iter().enumerate() {
            if u.source() != a.algebra(i).carrier() || u.target() != b.algebra(i).carrier() {
                return Err(Error::NotASystemMorphism(format!(
                    "component {i} runs between the wrong carriers"
                )));
            }
            if !crate::algebra::is_homomorphism(u, a.algebra(i), b.algebra(i))? {
                return Err(Error::NotASystemMorphism(format!(
                    "component {i} is not a homomorphism"
                )));
            }
        }
        for (i, j) in a.index().pairs() {
            // down-then-across equals across-then-down
            let lhs = a.transition(i, j).then(&components[i])?;
            let rhs = components[j].then(b.transition(i, j))?;
            if lhs != rhs {
                return Err(Error::NotASystemMorphism(format!(
                    "components do not commute with the transition ({i},{j})"
                )));
            }
        }
        Ok(SystemMorphism { components })
    }

    pub fn identity(a: &ProjectiveSystem) -> Self {
        SystemMorphism {
            components: a
                .algebras()
                .iter()
                .map(|alg| SortedMapping::identity(alg.carrier()))
                .collect(),
        }
    }

    pub fn component(&self, i: usize) -> &SortedMapping {
        &self.components[i]
    }
}

/// Outcome of the naturality check for a system morphism.
#[derive(Debug, Clone)]
pub struct NaturalityVerdict {
    pub square_commutes: bool,
    pub section_natural: bool,
    pub section_right_inverse: bool,
    pub pass: bool,
    /// The (sort, element) where the main square first fails to commute.
    pub counterexample: Option<(String, String)>,
}

/// The limit of a system morphism: threads map componentwise.
fn limit_of_morphism(
    a: &Retraction,
    b: &Retraction,
    u: &SystemMorphism,
) -> Result<Homomorphism> {
    let mut tables = BTreeMap::new();
    let n = a.instance().system().index().len();
    for s in a.limit.apex.carrier().sorts() {
        let size = a.limit.apex.carrier().carrier(s).len();
        let mut table = Vec::with_capacity(size);
        let mut coords = vec![0usize; n];
        for t in 0..size {
            for i in 0..n {
                coords[i] = u
                    .component(i)
                    .apply_pos(s, a.limit.legs[i].map().apply_pos(s, t));
            }
            let ppos = b.limit.product.data.encode(s, &coords);
            let name = &b.limit.product.algebra.carrier().carrier(s)[ppos];
            let tpos = b.limit.apex.carrier().position(s, name).ok_or_else(|| {
                Error::NotASystemMorphism(format!("image {name} is not a thread"))
            })?;
            table.push(tpos as u32);
        }
        tables.insert(s.clone(), table);
    }
    let map = SortedMapping::from_positions(
        a.limit.apex.carrier().clone(),
        b.limit.apex.carrier().clone(),
        tables,
    )?;
    Homomorphism::new(a.limit.apex.clone(), b.limit.apex.clone(), map)
}

/// The colimit of the memberwise products of a system morphism: classes
/// map through coordinatewise images.
fn colimit_of_morphism(
    a: &Retraction,
    b: &Retraction,
    u: &SystemMorphism,
) -> Result<Homomorphism> {
    if a.reduced.member_masks != b.reduced.member_masks {
        return Err(Error::GroundMismatch(
            "the two reduced systems enumerate different members".into(),
        ));
    }
    let index_len = a.instance().system().index().len();
    let mut tables = BTreeMap::new();
    for s in a.colimit.apex.carrier().sorts() {
        let size = a.colimit.apex.carrier().carrier(s).len();
        let mut table = Vec::with_capacity(size);
        for c in 0..size {
            let (jm, p) = a.colimit.witness(s, c);
            let mask = a.reduced.member_masks[jm];
            let j_points: Vec<usize> =
                (0..index_len).filter(|i| mask >> i & 1 == 1).collect();
            let coords: Vec<usize> = j_points
                .iter()
                .enumerate()
                .map(|(rank, &j)| {
                    u.component(j)
                        .apply_pos(s, a.reduced.member_products[jm].data.coord(rank, s, p))
                })
                .collect();
            let bpos = b.reduced.member_products[jm].data.encode(s, &coords);
            table.push(b.colimit.legs[jm].map().apply_pos(s, bpos) as u32);
        }
        tables.insert(s.clone(), table);
    }
    let map = SortedMapping::from_positions(
        a.colimit.apex.carrier().clone(),
        b.colimit.apex.carrier().clone(),
        tables,
    )?;
    let h = Homomorphism::new(a.colimit.apex.clone(), b.colimit.apex.clone(), map)?;
    // the defining squares on every member leg
    for jm in 0..a.reduced.member_masks.len() {
        let mask = a.reduced.member_masks[jm];
        let j_points: Vec<usize> = (0..index_len).filter(|i| mask >> i & 1 == 1).collect();
        // u(J): the product map on the member
        let mut tables = BTreeMap::new();
        for s in a.colimit.apex.carrier().sorts() {
            let src = &a.reduced.member_products[jm];
            let dst = &b.reduced.member_products[jm];
            let size = src.algebra.carrier().carrier(s).len();
            let mut table = Vec::with_capacity(size);
            let mut coords = vec![0usize; j_points.len()];
            for p in 0..size {
                for (rank, &j) in j_points.iter().enumerate() {
                    coords[rank] = u.component(j).apply_pos(s, src.data.coord(rank, s, p));
                }
                table.push(dst.data.encode(s, &coords) as u32);
            }
            tables.insert(s.clone(), table);
        }
        let u_j = SortedMapping::from_positions(
            a.reduced.member_products[jm].algebra.carrier().clone(),
            b.reduced.member_products[jm].algebra.carrier().clone(),
            tables,
        )?;
        if a.colimit.legs[jm].map().then(h.map())?
            != u_j.then(b.colimit.legs[jm].map())?
        {
            return Err(Error::NotASystemMorphism(format!(
                "member {jm} does not commute with the colimit of the morphism"
            )));
        }
    }
    Ok(h)
}

/// The canonical section of the retraction: embed the limit into the full
/// product and pass to the ultraproduct class.
fn section(r: &Retraction) -> Result<SortedMapping> {
    let full = crate::filters::full_mask(r.instance().system().index().len());
    let full_pos = r
        .reduced
        .member_masks
        .iter()
        .position(|&m| m == full)
        .expect("the ground is always a filter member");
    r.limit
        .embedding
        .map()
        .then(r.colimit.legs[full_pos].map())
}

/// Checks that the retraction is natural in the system: the square with
/// the limit and colimit of a system morphism commutes, the canonical
/// section is natural too, and it is a right inverse of the retraction.
pub fn naturality_check(
    a: &Retraction,
    system_b: &ProjectiveSystem,
    u: &SystemMorphism,
) -> Result<NaturalityVerdict> {
    // re-validate u against the two systems
    let u = SystemMorphism::new(
        a.instance().system(),
        system_b,
        (0..a.instance().system().index().len())
            .map(|i| u.component(i).clone())
            .collect(),
    )?;
    let inst_b =
        RetractionInstance::new(system_b.clone(), a.instance().ultra().clone())?;
    let b = Retraction::build(inst_b)?;
    let lim_u = limit_of_morphism(a, &b, &u)?;
    let colim_u = colimit_of_morphism(a, &b, &u)?;
    let one_way = a.hom.map().then(lim_u.map())?;
    let other_way = colim_u.map().then(b.hom.map())?;
    let counterexample = first_mismatch(&one_way, &other_way);
    let square_commutes = counterexample.is_none();
    let sect_a = section(a)?;
    let sect_b = section(&b)?;
    let section_natural = lim_u.map().then(&sect_b)? == sect_a.then(colim_u.map())?;
    let section_right_inverse =
        sect_a.then(a.hom.map())? == SortedMapping::identity(a.limit.apex.carrier());
    Ok(NaturalityVerdict {
        square_commutes,
        section_natural,
        section_right_inverse,
        pass: square_commutes && section_natural && section_right_inverse,
        counterexample,
    })
}

/// Reindexes a projective system along an isotone map into its index.
pub fn reindex_system(
    phi: &UffsMorphism,
    sys: &ProjectiveSystem,
) -> Result<ProjectiveSystem> {
    if sys.index() != phi.dst().preorder() {
        return Err(Error::GroundMismatch(
            "system index differs from the morphism target".into(),
        ));
    }
    let index = phi.src().preorder().clone();
    let algebras = (0..index.len())
        .map(|i| sys.algebra(phi.map().apply(i)).clone())
        .collect();
    let mut transitions = BTreeMap::new();
    for (i, j) in index.pairs() {
        transitions.insert(
            (i, j),
            sys.transition(phi.map().apply(i), phi.map().apply(j)).clone(),
        );
    }
    ProjectiveSystem::new(index, algebras, transitions)
}

/// Retraction data on both sides of a change of index, with the two
/// mediating maps between the limits and the ultraproducts.
#[derive(Debug, Clone)]
pub struct ChangeOfIndex {
    pub phi: UffsMorphism,
    /// Retraction of the reindexed system over the source index.
    pub source: Retraction,
    /// Retraction of the original system over the target index.
    pub target: Retraction,
    /// From the limit over the target index to the limit of the reindexed
    /// system: threads restrict along the map.
    pub p: Homomorphism,
    /// From the ultraproduct of the reindexed system to the ultraproduct
    /// of the original: classes re-tag along the image.
    pub q: Homomorphism,
}

impl ChangeOfIndex {
    pub fn build(phi: &UffsMorphism, sys: &ProjectiveSystem) -> Result<Self> {
        let reindexed = reindex_system(phi, sys)?;
        let source = Retraction::build(RetractionInstance::new(
            reindexed,
            phi.src().ultra().clone(),
        )?)?;
        let target = Retraction::build(RetractionInstance::new(
            sys.clone(),
            phi.dst().ultra().clone(),
        )?)?;
        let p = build_p(phi, &source, &target)?;
        let q = build_q(phi, &source, &target)?;
        Ok(ChangeOfIndex {
            phi: phi.clone(),
            source,
            target,
            p,
            q,
        })
    }

    /// The cylinder equation at this system: restricting the retraction
    /// along the change of index equals conjugating it by the two
    /// mediating maps.
    pub fn cylinder_check(&self) -> Result<CylinderVerdict> {
        let composite = self
            .q
            .map()
            .then(self.target.hom.map())?
            .then(self.p.map())?;
        let counterexample = first_mismatch(&composite, self.source.hom.map());
        Ok(CylinderVerdict {
            pass: counterexample.is_none(),
            counterexample,
        })
    }
}

/// The first point where two parallel mappings differ, as a witness.
pub(crate) fn first_mismatch(
    f: &SortedMapping,
    g: &SortedMapping,
) -> Option<(String, String)> {
    for s in f.source().sorts() {
        for p in 0..f.source().carrier(s).len() {
            if f.apply_pos(s, p) != g.apply_pos(s, p) {
                return Some((s.to_string(), f.source().carrier(s)[p].clone()));
            }
        }
    }
    None
}

#[derive(Debug, Clone)]
pub struct CylinderVerdict {
    pub pass: bool,
    /// The (sort, element) where the two sides first differ.
    pub counterexample: Option<(String, String)>,
}

/// Builds the restriction of threads: the unique map with
/// `leg_i ∘ p = leg_{φ(i)}`, verified for every source index.
fn build_p(
    phi: &UffsMorphism,
    source: &Retraction,
    target: &Retraction,
) -> Result<Homomorphism> {
    let index_len = phi.src().preorder().len();
    let mut tables = BTreeMap::new();
    for s in target.limit.apex.carrier().sorts() {
        let size = target.limit.apex.carrier().carrier(s).len();
        let mut table = Vec::with_capacity(size);
        let mut coords = vec![0usize; index_len];
        for t in 0..size {
            for (i, c) in coords.iter_mut().enumerate() {
                *c = target.limit.legs[phi.map().apply(i)].map().apply_pos(s, t);
            }
            let ppos = source.limit.product.data.encode(s, &coords);
            let name = &source.limit.product.algebra.carrier().carrier(s)[ppos];
            let tpos = source.limit.apex.carrier().position(s, name).ok_or_else(|| {
                Error::Invalid(format!("restricted thread {name} is not a thread"))
            })?;
            table.push(tpos as u32);
        }
        tables.insert(s.clone(), table);
    }
    let map = SortedMapping::from_positions(
        target.limit.apex.carrier().clone(),
        source.limit.apex.carrier().clone(),
        tables,
    )?;
    let p = Homomorphism::new(
        target.limit.apex.clone(),
        source.limit.apex.clone(),
        map,
    )?;
    for i in 0..index_len {
        if p.map().then(source.limit.legs[i].map())?
            != *target.limit.legs[phi.map().apply(i)].map()
        {
            return Err(Error::Invalid(format!(
                "restriction does not satisfy the leg equation at {i}"
            )));
        }
    }
    Ok(p)
}

/// Builds the class re-tagging: the unique map with
/// `q ∘ p^J = p^{φ[J]} ∘ retag`, verified for every member.
fn build_q(
    phi: &UffsMorphism,
    source: &Retraction,
    target: &Retraction,
) -> Result<Homomorphism> {
    let src_ground = phi.src().preorder().len();
    let tgt_ground = phi.dst().preorder().len();
    // member position translation: J in the source filter to φ[J] in the
    // target filter, with the coordinate permutation induced by φ
    let mut member_map = Vec::with_capacity(source.reduced.member_masks.len());
    for &mj in &source.reduced.member_masks {
        let image = phi.map().image_mask(mj);
        let tgt_pos = target
            .reduced
            .member_masks
            .iter()
            .position(|&m| m == image)
            .ok_or_else(|| {
                Error::JNotInFilter("image of a member is not a member".into())
            })?;
        let j_points: Vec<usize> = (0..src_ground).filter(|i| mj >> i & 1 == 1).collect();
        let image_points: Vec<usize> =
            (0..tgt_ground).filter(|p| image >> p & 1 == 1).collect();
        // source coordinate rank feeding each target coordinate rank
        let retag: Vec<usize> = image_points
            .iter()
            .map(|&pt| {
                j_points
                    .iter()
                    .position(|&j| phi.map().apply(j) == pt)
                    .expect("injective image")
            })
            .collect();
        member_map.push((tgt_pos, retag));
    }

    let mut tables = BTreeMap::new();
    for s in source.colimit.apex.carrier().sorts() {
        let size = source.colimit.apex.carrier().carrier(s).len();
        let mut table = Vec::with_capacity(size);
        for c in 0..size {
            let (jm, p) = source.colimit.witness(s, c);
            let (tgt_pos, retag) = &member_map[jm];
            let coords: Vec<usize> = retag
                .iter()
                .map(|&rank| source.reduced.member_products[jm].data.coord(rank, s, p))
                .collect();
            let tpos = target.reduced.member_products[*tgt_pos].data.encode(s, &coords);
            table.push(target.colimit.legs[*tgt_pos].map().apply_pos(s, tpos) as u32);
        }
        tables.insert(s.clone(), table);
    }
    let map = SortedMapping::from_positions(
        source.colimit.apex.carrier().clone(),
        target.colimit.apex.carrier().clone(),
        tables,
    )?;
    let q = Homomorphism::new(
        source.colimit.apex.clone(),
        target.colimit.apex.clone(),
        map,
    )?;
    // defining equation on every member
    for (jm, (tgt_pos, retag)) in member_map.iter().enumerate() {
        let src_prod = &source.reduced.member_products[jm];
        let tgt_prod = &target.reduced.member_products[*tgt_pos];
        for s in source.colimit.apex.carrier().sorts() {
            for p in 0..src_prod.algebra.carrier().carrier(s).len() {
                let via_q = q
                    .map()
                    .apply_pos(s, source.colimit.legs[jm].map().apply_pos(s, p));
                let coords: Vec<usize> = retag
                    .iter()
                    .map(|&rank| src_prod.data.coord(rank, s, p))
                    .collect();
                let direct = target.colimit.legs[*tgt_pos]
                    .map()
                    .apply_pos(s, tgt_prod.data.encode(s, &coords));
                if via_q != direct {
                    return Err(Error::Invalid(format!(
                        "re-tagging does not satisfy the member equation at {jm}"
                    )));
                }
            }
        }
    }
    Ok(q)
}

/// The tail inclusions of a preorder that keep the principal point: one
/// change-of-index morphism for each final section, including the full
/// index itself (an identity up to relabelling).
pub fn tail_morphisms(
    index: &crate::preorder::Preorder,
    ultra: &crate::filters::Ultrafilter,
) -> Vec<(String, UffsMorphism)> {
    use crate::filters::{UffsObject, Ultrafilter};
    use crate::preorder::IsotoneMap;

    let mut out = Vec::new();
    let Ok(dst_obj) = UffsObject::new(index.clone(), ultra.clone()) else {
        return out;
    };
    for q in 0..index.len() {
        let mask = index.up_set(q);
        let Ok((tail, old)) = index.restrict(mask) else {
            continue;
        };
        // the principal point must survive into the tail
        let Some(point) = old.iter().position(|&o| o == ultra.principal_point()) else {
            continue;
        };
        let Ok(tail_ultra) = Ultrafilter::principal(tail.elems().to_vec(), point) else {
            continue;
        };
        let Ok(src_obj) = UffsObject::new(tail.clone(), tail_ultra) else {
            continue;
        };
        let pairs: Vec<(String, String)> = old
            .iter()
            .enumerate()
            .map(|(new, &o)| (tail.elems()[new].clone(), index.elems()[o].clone()))
            .collect();
        let Ok(map) = IsotoneMap::from_names(tail, index.clone(), &pairs) else {
            continue;
        };
        if let Ok(phi) = UffsMorphism::new(src_obj, dst_obj.clone(), map) {
            out.push((format!("↑{}", index.elems()[q]), phi));
        }
    }
    out
}

/// Outcome of the composition laws for two composable changes of index.
#[derive(Debug, Clone)]
pub struct CompositionVerdict {
    pub p_composes: bool,
    pub q_composes: bool,
    pub composed_cylinder: bool,
    pub pass: bool,
    /// Where the composed cylinder first fails, when it does.
    pub counterexample: Option<(String, String)>,
}

/// Verifies that the mediating maps of a composite change of index are
/// the composites of the stepwise ones, and the cylinder equation for the
/// composite.
pub fn composition_check(
    phi: &UffsMorphism,
    psi: &UffsMorphism,
    sys: &ProjectiveSystem,
) -> Result<CompositionVerdict> {
    let chain_psi = ChangeOfIndex::build(psi, sys)?;
    let reindexed_psi = chain_psi.source.instance().system().clone();
    let chain_phi = ChangeOfIndex::build(phi, &reindexed_psi)?;
    let composed = phi.then(psi)?;
    let chain_comp = ChangeOfIndex::build(&composed, sys)?;

    let p_composes =
        chain_psi.p.map().then(chain_phi.p.map())? == *chain_comp.p.map();
    let q_composes =
        chain_phi.q.map().then(chain_psi.q.map())? == *chain_comp.q.map();
    let cylinder = chain_comp.cylinder_check()?;
    Ok(CompositionVerdict {
        p_composes,
        q_composes,
        composed_cylinder: cylinder.pass,
        pass: p_composes && q_composes && cylinder.pass,
        counterexample: cylinder.counterexample,
    })
}

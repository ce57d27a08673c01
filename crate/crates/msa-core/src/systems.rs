//! Projective and inductive systems of algebras over directed preorders,
//! their limits, the eventually-consistent quotient, reduced products and
//! ultraproducts, and the instance checks relating them.

use std::collections::BTreeMap;
use std::fmt;

use crate::algebra::{
    is_homomorphism, product_algebra, quotient_algebra, Algebra, Congruence, Homomorphism,
    ProductAlgebra, Signature,
};
use crate::error::{Error, Result};
use crate::filters::{Filter, Ultrafilter};
use crate::preorder::Preorder;
use crate::search::{find_isomorphism, UnionFind};
use crate::sorted::{
    constant_support_check, coproduct, IndexedFamily, SortId, SortedEquivalence,
    SortedMapping, SortedSet,
};

/// Defects of a would-be system: everything the functor laws require.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SystemDefect {
    CountMismatch,
    SignatureMismatch { index: String },
    MissingTransition { from: String, to: String },
    CarrierMismatch { from: String, to: String },
    NotHomomorphism { from: String, to: String },
    NotIdentity { index: String },
    Composition { i: String, j: String, k: String },
}

impl fmt::Display for SystemDefect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SystemDefect::CountMismatch => write!(f, "one algebra per index is required"),
            SystemDefect::SignatureMismatch { index } => {
                write!(f, "algebra at {index} is over a different signature")
            }
            SystemDefect::MissingTransition { from, to } => {
                write!(f, "no transition from {from} to {to}")
            }
            SystemDefect::CarrierMismatch { from, to } => {
                write!(f, "transition {from} -> {to} runs between the wrong carriers")
            }
            SystemDefect::NotHomomorphism { from, to } => {
                write!(f, "transition {from} -> {to} is not a homomorphism")
            }
            SystemDefect::NotIdentity { index } => {
                write!(f, "transition at {index} is not the identity")
            }
            SystemDefect::Composition { i, j, k } => {
                write!(f, "transition triangle ({i},{j},{k}) does not commute")
            }
        }
    }
}

/// A projective system: algebras indexed by a directed preorder with
/// transition homomorphisms `A^j -> A^i` for every `i ≤ j`, keyed here by
/// the pair `(i, j)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjectiveSystem {
    index: Preorder,
    algebras: Vec<Algebra>,
    transitions: BTreeMap<(usize, usize), SortedMapping>,
}

/// An inductive system: transitions run upward, `A^i -> A^j` for `i ≤ j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InductiveSystem {
    index: Preorder,
    algebras: Vec<Algebra>,
    transitions: BTreeMap<(usize, usize), SortedMapping>,
}

fn validate_system(
    index: &Preorder,
    algebras: &[Algebra],
    transitions: &BTreeMap<(usize, usize), SortedMapping>,
    covariant: bool,
) -> Vec<SystemDefect> {
    let mut defects = Vec::new();
    if algebras.len() != index.len() {
        defects.push(SystemDefect::CountMismatch);
        return defects;
    }
    let sig = algebras[0].signature();
    for (i, a) in algebras.iter().enumerate() {
        if a.signature() != sig {
            defects.push(SystemDefect::SignatureMismatch {
                index: index.elems()[i].clone(),
            });
        }
    }
    if !defects.is_empty() {
        return defects;
    }
    let name = |i: usize| index.elems()[i].clone();
    // the (source, target) algebra positions of the transition at pair (i, j)
    let ends = |i: usize, j: usize| if covariant { (i, j) } else { (j, i) };
    for (i, j) in index.pairs() {
        let (src, dst) = ends(i, j);
        let Some(t) = transitions.get(&(i, j)) else {
            defects.push(SystemDefect::MissingTransition {
                from: name(src),
                to: name(dst),
            });
            continue;
        };
        if t.source() != algebras[src].carrier() || t.target() != algebras[dst].carrier() {
            defects.push(SystemDefect::CarrierMismatch {
                from: name(src),
                to: name(dst),
            });
            continue;
        }
        match is_homomorphism(t, &algebras[src], &algebras[dst]) {
            Ok(true) => {}
            _ => defects.push(SystemDefect::NotHomomorphism {
                from: name(src),
                to: name(dst),
            }),
        }
        if i == j && t != &SortedMapping::identity(algebras[i].carrier()) {
            defects.push(SystemDefect::NotIdentity { index: name(i) });
        }
    }
    if !defects.is_empty() {
        return defects;
    }
    let n = index.len();
    for i in 0..n {
        for j in 0..n {
            if !index.le(i, j) {
                continue;
            }
            for k in 0..n {
                if !index.le(j, k) {
                    continue;
                }
                // covariant: t(i,j) then t(j,k) == t(i,k)
                // contravariant: t(j,k) then t(i,j) == t(i,k)
                let (first, second) = if covariant {
                    (&transitions[&(i, j)], &transitions[&(j, k)])
                } else {
                    (&transitions[&(j, k)], &transitions[&(i, j)])
                };
                if first.then(second).unwrap() != transitions[&(i, k)] {
                    defects.push(SystemDefect::Composition {
                        i: name(i),
                        j: name(j),
                        k: name(k),
                    });
                }
            }
        }
    }
    defects
}

macro_rules! system_impl {
    ($ty:ident, $covariant:expr) => {
        impl $ty {
            pub fn new(
                index: Preorder,
                algebras: Vec<Algebra>,
                transitions: BTreeMap<(usize, usize), SortedMapping>,
            ) -> Result<Self> {
                let sys = Self::new_unchecked(index, algebras, transitions);
                let defects = sys.validate();
                if defects.is_empty() {
                    Ok(sys)
                } else {
                    Err(Error::Invalid(format!(
                        "invalid system: {}",
                        defects
                            .iter()
                            .map(|d| d.to_string())
                            .collect::<Vec<_>>()
                            .join("; ")
                    )))
                }
            }

            pub fn new_unchecked(
                index: Preorder,
                algebras: Vec<Algebra>,
                transitions: BTreeMap<(usize, usize), SortedMapping>,
            ) -> Self {
                Self {
                    index,
                    algebras,
                    transitions,
                }
            }

            pub fn validate(&self) -> Vec<SystemDefect> {
                validate_system(&self.index, &self.algebras, &self.transitions, $covariant)
            }

            pub fn index(&self) -> &Preorder {
                &self.index
            }

            pub fn algebras(&self) -> &[Algebra] {
                &self.algebras
            }

            pub fn algebra(&self, i: usize) -> &Algebra {
                &self.algebras[i]
            }

            pub fn signature(&self) -> &Signature {
                self.algebras[0].signature()
            }

            /// The transition mapping for `i ≤ j`.
            pub fn transition(&self, i: usize, j: usize) -> &SortedMapping {
                &self.transitions[&(i, j)]
            }

            pub fn transitions(&self) -> &BTreeMap<(usize, usize), SortedMapping> {
                &self.transitions
            }

            pub fn carrier_family(&self) -> IndexedFamily {
                IndexedFamily::new(
                    self.index.elems().to_vec(),
                    self.algebras.iter().map(|a| a.carrier().clone()).collect(),
                )
                .unwrap()
            }

            /// True when all member algebras share one support.
            pub fn constant_support(&self) -> bool {
                constant_support_check(&self.carrier_family())
            }
        }
    };
}

system_impl!(ProjectiveSystem, false);
system_impl!(InductiveSystem, true);

pub fn validate_projective_system(p: &ProjectiveSystem) -> Vec<SystemDefect> {
    p.validate()
}

pub fn validate_inductive_system(d: &InductiveSystem) -> Vec<SystemDefect> {
    d.validate()
}

/// A computed projective limit: the thread subalgebra of the product,
/// with its legs, plus the product and embedding as the witness trace.
#[derive(Debug, Clone)]
pub struct ProjectiveLimit {
    pub apex: Algebra,
    pub legs: Vec<Homomorphism>,
    pub product: ProductAlgebra,
    pub embedding: Homomorphism,
}

/// The projective limit: threads of the product compatible with every
/// transition.
pub fn projective_limit(p: &ProjectiveSystem) -> Result<ProjectiveLimit> {
    let prod = product_algebra(p.signature(), p.algebras())?;
    let mut threads = prod.algebra.carrier().clone();
    for s in p.signature().sorts().to_vec() {
        let elems: Vec<String> = prod
            .algebra
            .carrier()
            .carrier(&s)
            .iter()
            .enumerate()
            .filter(|(pos, _)| {
                p.index().pairs().iter().all(|&(i, j)| {
                    let xj = prod.data.coord(j, &s, *pos);
                    let xi = prod.data.coord(i, &s, *pos);
                    p.transition(i, j).apply_pos(&s, xj) == xi
                })
            })
            .map(|(_, e)| e.clone())
            .collect();
        threads = threads.with_carrier(&s, elems);
    }
    let (apex, embedding) = crate::algebra::induced_subalgebra(&threads, &prod.algebra)?;
    let legs = prod
        .projections
        .iter()
        .map(|pr| embedding.then(pr))
        .collect::<Result<Vec<_>>>()?;
    Ok(ProjectiveLimit {
        apex,
        legs,
        product: prod,
        embedding,
    })
}

/// The unique mediating homomorphism from a projective cone into the
/// computed limit.
pub fn mediating_into_limit(
    p: &ProjectiveSystem,
    lim: &ProjectiveLimit,
    cone_apex: &Algebra,
    cone_legs: &[Homomorphism],
) -> Result<Homomorphism> {
    if cone_legs.len() != p.algebras().len() {
        return Err(Error::NotACone("one leg per index is required".into()));
    }
    for (i, leg) in cone_legs.iter().enumerate() {
        if leg.source() != cone_apex {
            return Err(Error::NotACone("legs have different sources".into()));
        }
        if leg.target() != p.algebra(i) {
            return Err(Error::NotACone(format!(
                "leg {i} does not land in its algebra"
            )));
        }
    }
    for (i, j) in p.index().pairs() {
        let via = cone_legs[j].map().then(p.transition(i, j))?;
        if via != *cone_legs[i].map() {
            return Err(Error::NotACone(format!(
                "legs do not commute with the transition ({i},{j})"
            )));
        }
    }
    let mut tables = BTreeMap::new();
    for s in cone_apex.carrier().sorts() {
        let mut table = Vec::with_capacity(cone_apex.carrier().carrier(s).len());
        let mut coords = vec![0usize; cone_legs.len()];
        for pos in 0..cone_apex.carrier().carrier(s).len() {
            for (i, leg) in cone_legs.iter().enumerate() {
                coords[i] = leg.map().apply_pos(s, pos);
            }
            let ppos = lim.product.data.encode(s, &coords);
            let name = &lim.product.algebra.carrier().carrier(s)[ppos];
            let apos = lim.apex.carrier().position(s, name).ok_or_else(|| {
                Error::NotACone(format!("cone image {name} is not a thread"))
            })?;
            table.push(apos as u32);
        }
        tables.insert(s.clone(), table);
    }
    let map = SortedMapping::from_positions(
        cone_apex.carrier().clone(),
        lim.apex.carrier().clone(),
        tables,
    )?;
    let h = Homomorphism::new(cone_apex.clone(), lim.apex.clone(), map)?;
    for (i, leg) in lim.legs.iter().enumerate() {
        debug_assert_eq!(h.then(leg).unwrap().map(), cone_legs[i].map());
    }
    Ok(h)
}

/// A computed inductive limit: the coproduct classes under eventual
/// agreement, with legs and the carrier-level witness trace.
#[derive(Debug, Clone)]
pub struct InductiveLimit {
    pub apex: Algebra,
    pub legs: Vec<Homomorphism>,
    pub coproduct: SortedSet,
    pub injections: Vec<SortedMapping>,
    pub class_map: SortedMapping,
    /// Per sort, per apex position: one (member, member position) whose
    /// image is that class.
    witnesses: BTreeMap<SortId, Vec<(u32, u32)>>,
}

impl InductiveLimit {
    /// A representative preimage of an apex element under the legs.
    pub fn witness(&self, s: &SortId, class_pos: usize) -> (usize, usize) {
        let (m, p) = self.witnesses[s][class_pos];
        (m as usize, p as usize)
    }
}

/// The inductive limit with the canonical upper-bound choice (the least
/// candidate in canonical index order).
pub fn inductive_limit(d: &InductiveSystem) -> Result<InductiveLimit> {
    inductive_limit_with(d, |candidates| candidates[0])
}

/// The inductive limit with an explicit upper-bound chooser for the
/// operation tables. The result does not depend on the choice (this is
/// verified against every candidate during construction).
pub fn inductive_limit_with(
    d: &InductiveSystem,
    mut choose: impl FnMut(&[usize]) -> usize,
) -> Result<InductiveLimit> {
    let sorts = d.signature().sorts().to_vec();
    let fam = d.carrier_family();
    let (cop, injections) = coproduct(&fam, &sorts);

    // eventual agreement = the closure of gluing each element onto its
    // transition images; directedness makes this exactly the relation
    // "equal somewhere above both tags"
    let mut blocks = BTreeMap::new();
    let mut tag_of: BTreeMap<SortId, Vec<(u32, u32)>> = BTreeMap::new();
    for s in &sorts {
        let mut tags = vec![(0u32, 0u32); cop.carrier(s).len()];
        for (m, inj) in injections.iter().enumerate() {
            for p in 0..fam.members()[m].carrier(s).len() {
                tags[inj.apply_pos(s, p)] = (m as u32, p as u32);
            }
        }
        let mut uf = UnionFind::new(cop.carrier(s).len());
        for (&(i, j), t) in d.transitions() {
            if i == j {
                continue;
            }
            for p in 0..d.algebra(i).carrier().carrier(s).len() {
                let a = injections[i].apply_pos(s, p);
                let b = injections[j].apply_pos(s, t.apply_pos(s, p));
                uf.union(a, b);
            }
        }
        blocks.insert(s.clone(), uf.blocks());
        tag_of.insert(s.clone(), tags);
    }
    let eq = SortedEquivalence::from_blocks(cop.clone(), blocks)?;
    let (apex_set, class_map) = crate::sorted::quotient(&cop, &eq)?;

    let mut witnesses = BTreeMap::new();
    for s in &sorts {
        let w: Vec<(u32, u32)> = eq
            .blocks(s)
            .iter()
            .map(|b| tag_of[s][b[0] as usize])
            .collect();
        witnesses.insert(s.clone(), w);
    }

    // operations: push representatives to a common upper bound
    let mut tables = BTreeMap::new();
    for (op, ar) in d.signature().ops() {
        let space = crate::sorted::TupleSpace::new(
            ar.word.iter().map(|s| apex_set.carrier(s).len()).collect(),
        );
        let mut table = vec![0u32; space.size];
        let mut coords = Vec::new();
        for raw in 0..space.size {
            space.decode(raw, &mut coords);
            let reps: Vec<(usize, usize)> = coords
                .iter()
                .enumerate()
                .map(|(k, &c)| {
                    let (m, p) = witnesses[&ar.word[k]][c];
                    (m as usize, p as usize)
                })
                .collect();
            let members: Vec<usize> = reps.iter().map(|&(m, _)| m).collect();
            let ub_mask = d.index().upper_bounds_of(&members);
            let candidates: Vec<usize> =
                (0..d.index().len()).filter(|k| ub_mask >> k & 1 == 1).collect();
            debug_assert!(!candidates.is_empty());
            let eval = |k: usize| -> usize {
                let pushed: Vec<usize> = reps
                    .iter()
                    .enumerate()
                    .map(|(a, &(m, p))| d.transition(m, k).apply_pos(&ar.word[a], p))
                    .collect();
                let res = d.algebra(k).apply_pos(op, &pushed);
                let cp = injections[k].apply_pos(&ar.result, res);
                class_map.apply_pos(&ar.result, cp)
            };
            let chosen = choose(&candidates);
            let value = eval(chosen);
            for &k in &candidates {
                if eval(k) != value {
                    return Err(Error::Invalid(format!(
                        "inductive limit operation {op} depends on the upper-bound choice"
                    )));
                }
            }
            table[raw] = value as u32;
        }
        tables.insert(op.clone(), table);
    }
    let apex = Algebra::from_tables(d.signature().clone(), apex_set, tables);
    let legs = injections
        .iter()
        .enumerate()
        .map(|(i, inj)| {
            Homomorphism::new(d.algebra(i).clone(), apex.clone(), inj.then(&class_map)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(InductiveLimit {
        apex,
        legs,
        coproduct: cop,
        injections,
        class_map,
        witnesses,
    })
}

/// The unique mediating homomorphism out of the computed inductive limit
/// into an inductive cocone.
pub fn mediating_from_colimit(
    d: &InductiveSystem,
    lim: &InductiveLimit,
    cocone_apex: &Algebra,
    cocone_legs: &[Homomorphism],
) -> Result<Homomorphism> {
    if cocone_legs.len() != d.algebras().len() {
        return Err(Error::NotACone("one leg per index is required".into()));
    }
    for (i, leg) in cocone_legs.iter().enumerate() {
        if leg.target() != cocone_apex {
            return Err(Error::NotACone("legs have different targets".into()));
        }
        if leg.source() != d.algebra(i) {
            return Err(Error::NotACone(format!("leg {i} has the wrong source")));
        }
    }
    for (i, j) in d.index().pairs() {
        let via = d.transition(i, j).then(cocone_legs[j].map())?;
        if via != *cocone_legs[i].map() {
            return Err(Error::NotACone(format!(
                "legs do not commute with the transition ({i},{j})"
            )));
        }
    }
    let mut tables = BTreeMap::new();
    for s in cocone_apex.carrier().sorts() {
        let mut table = Vec::with_capacity(lim.apex.carrier().carrier(s).len());
        for c in 0..lim.apex.carrier().carrier(s).len() {
            let (m, p) = lim.witness(s, c);
            table.push(cocone_legs[m].map().apply_pos(s, p) as u32);
        }
        tables.insert(s.clone(), table);
    }
    let map = SortedMapping::from_positions(
        lim.apex.carrier().clone(),
        cocone_apex.carrier().clone(),
        tables,
    )?;
    let h = Homomorphism::new(lim.apex.clone(), cocone_apex.clone(), map)?;
    for (i, leg) in lim.legs.iter().enumerate() {
        if leg.then(&h)?.map() != cocone_legs[i].map() {
            return Err(Error::NotACone(format!(
                "mediating map does not factor leg {i}"
            )));
        }
    }
    Ok(h)
}

/// Result of dropping initial algebras from an inductive system.
#[derive(Debug, Clone)]
pub struct PruneResult {
    pub system: InductiveSystem,
    pub dropped: Vec<String>,
    pub all_initial: bool,
}

/// Suppresses the initial (all-empty) algebras; the limit is unchanged.
/// When every algebra is initial the system is returned as is, flagged.
pub fn prune_initial(d: &InductiveSystem) -> Result<PruneResult> {
    let keep: Vec<usize> = (0..d.index().len())
        .filter(|&i| !d.algebra(i).is_initial())
        .collect();
    if keep.is_empty() {
        return Ok(PruneResult {
            system: d.clone(),
            dropped: Vec::new(),
            all_initial: true,
        });
    }
    if keep.len() == d.index().len() {
        return Ok(PruneResult {
            system: d.clone(),
            dropped: Vec::new(),
            all_initial: false,
        });
    }
    let mask = keep.iter().fold(0u64, |m, &i| m | 1 << i);
    let (sub, old) = d.index().restrict(mask)?;
    let algebras = old.iter().map(|&i| d.algebra(i).clone()).collect();
    let mut transitions = BTreeMap::new();
    for a in 0..old.len() {
        for b in 0..old.len() {
            if sub.le(a, b) {
                transitions.insert((a, b), d.transition(old[a], old[b]).clone());
            }
        }
    }
    let dropped = (0..d.index().len())
        .filter(|i| !old.contains(i))
        .map(|i| d.index().elems()[i].clone())
        .collect();
    Ok(PruneResult {
        system: InductiveSystem::new(sub, algebras, transitions)?,
        dropped,
        all_initial: false,
    })
}

/// The eventually-consistent subalgebra of the product and its quotient
/// by eventual equality. Under constant support this is the inductive
/// limit up to isomorphism; in general it need not be.
pub fn eventually_consistent_quotient(d: &InductiveSystem) -> Result<Algebra> {
    let prod = product_algebra(d.signature(), d.algebras())?;
    let n = d.index().len();
    let mut c_set = prod.algebra.carrier().clone();
    for s in d.signature().sorts().to_vec() {
        let elems: Vec<String> = prod
            .algebra
            .carrier()
            .carrier(&s)
            .iter()
            .enumerate()
            .filter(|(pos, _)| {
                (0..n).any(|k| {
                    (0..n).all(|i| {
                        if !d.index().le(k, i) {
                            return true;
                        }
                        (0..n).all(|j| {
                            if !d.index().le(i, j) {
                                return true;
                            }
                            let xi = prod.data.coord(i, &s, *pos);
                            let xj = prod.data.coord(j, &s, *pos);
                            d.transition(i, j).apply_pos(&s, xi) == xj
                        })
                    })
                })
            })
            .map(|(_, e)| e.clone())
            .collect();
        c_set = c_set.with_carrier(&s, elems);
    }
    let (c_alg, _emb) = crate::algebra::induced_subalgebra(&c_set, &prod.algebra)?;

    // x ≡ y iff the coordinates agree from some index on
    let mut blocks = BTreeMap::new();
    for s in d.signature().sorts() {
        let m = c_alg.carrier().carrier(s).len();
        let coord = |pos: usize, i: usize| {
            let name = &c_alg.carrier().carrier(s)[pos];
            let ppos = prod.algebra.carrier().position(s, name).unwrap();
            prod.data.coord(i, s, ppos)
        };
        let mut uf = UnionFind::new(m);
        for x in 0..m {
            for y in x + 1..m {
                let agree = (0..n).any(|k| {
                    (0..n)
                        .filter(|&i| d.index().le(k, i))
                        .all(|i| coord(x, i) == coord(y, i))
                });
                if agree {
                    uf.union(x, y);
                }
            }
        }
        blocks.insert(s.clone(), uf.blocks());
    }
    let eq = SortedEquivalence::from_blocks(c_alg.carrier().clone(), blocks)?;
    let cong = Congruence::new(c_alg, eq)?;
    let (q, _) = quotient_algebra(&cong)?;
    Ok(q)
}

/// Verdict of the constant-support biconditional for inductive limits:
/// both computed algebras are retained for post-mortem.
#[derive(Debug, Clone)]
pub struct Prop25Verdict {
    pub constant_support: bool,
    pub quotient: Algebra,
    pub colimit: Algebra,
    pub iso: Option<Homomorphism>,
    pub consistent: bool,
}

/// Computes the eventually-consistent quotient and the inductive limit
/// and checks that an isomorphism exists exactly under constant support.
pub fn prop25_check(d: &InductiveSystem, iso_cap: usize) -> Result<Prop25Verdict> {
    let constant_support = d.constant_support();
    let quotient = eventually_consistent_quotient(d)?;
    let colimit = inductive_limit(d)?.apex;
    let iso = find_isomorphism(&quotient, &colimit, iso_cap)?;
    let consistent = constant_support == iso.is_some();
    Ok(Prop25Verdict {
        constant_support,
        quotient,
        colimit,
        iso,
        consistent,
    })
}

/// A family of algebras over a shared signature, indexed by named ground
/// points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlgebraFamily {
    index: Vec<String>,
    algebras: Vec<Algebra>,
}

impl AlgebraFamily {
    pub fn new(index: Vec<String>, algebras: Vec<Algebra>) -> Result<Self> {
        if index.is_empty() || index.len() != algebras.len() {
            return Err(Error::Invalid(
                "family needs one algebra per ground point".into(),
            ));
        }
        let sig = algebras[0].signature();
        if algebras.iter().any(|a| a.signature() != sig) {
            return Err(Error::SignatureMismatch(
                "family members are over different signatures".into(),
            ));
        }
        let mut sorted_idx = index.clone();
        sorted_idx.sort();
        if sorted_idx != index || sorted_idx.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Invalid(
                "family index must be in canonical order without duplicates".into(),
            ));
        }
        Ok(AlgebraFamily { index, algebras })
    }

    pub fn index(&self) -> &[String] {
        &self.index
    }

    pub fn algebras(&self) -> &[Algebra] {
        &self.algebras
    }

    pub fn signature(&self) -> &Signature {
        self.algebras[0].signature()
    }

    pub fn carrier_family(&self) -> IndexedFamily {
        IndexedFamily::new(
            self.index.clone(),
            self.algebras.iter().map(|a| a.carrier().clone()).collect(),
        )
        .unwrap()
    }

    pub fn constant_support(&self) -> bool {
        constant_support_check(&self.carrier_family())
    }

    /// The product over the ground points selected by `mask`.
    pub fn sub_product(&self, mask: u64) -> Result<ProductAlgebra> {
        let members: Vec<Algebra> = (0..self.index.len())
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| self.algebras[i].clone())
            .collect();
        product_algebra(self.signature(), &members)
    }
}

/// The inductive system of sub-products `A(J)` over the members of a
/// filter ordered by reverse inclusion, with restriction transitions.
#[derive(Debug, Clone)]
pub struct ReducedProductSystem {
    pub system: InductiveSystem,
    /// The filter member mask at each index position of `system.index()`.
    pub member_masks: Vec<u64>,
    pub member_products: Vec<ProductAlgebra>,
}

pub fn reduced_product_system(
    family: &AlgebraFamily,
    f: &Filter,
) -> Result<ReducedProductSystem> {
    if f.ground() != family.index() {
        return Err(Error::GroundMismatch(
            "filter ground differs from the family index".into(),
        ));
    }
    if f.members().len() > 64 {
        return Err(Error::CapExceeded(
            "reduced products over filters with more than 64 members".into(),
        ));
    }
    // member names in canonical order give the index preorder positions
    let mut named: Vec<(String, u64)> = f
        .members()
        .iter()
        .map(|&m| (f.subset_name(m), m))
        .collect();
    named.sort();
    let elems: Vec<String> = named.iter().map(|(n, _)| n.clone()).collect();
    let member_masks: Vec<u64> = named.iter().map(|(_, m)| *m).collect();
    let mut pairs = Vec::new();
    for (a, &ma) in member_masks.iter().enumerate() {
        for (b, &mb) in member_masks.iter().enumerate() {
            if ma & mb == mb {
                // ma ⊇ mb, so position a ≤ position b in (F, ⊇)
                pairs.push((elems[a].clone(), elems[b].clone()));
            }
        }
    }
    let index = Preorder::new(elems, &pairs)?;

    let member_products: Vec<ProductAlgebra> = member_masks
        .iter()
        .map(|&m| family.sub_product(m))
        .collect::<Result<Vec<_>>>()?;
    let algebras: Vec<Algebra> = member_products
        .iter()
        .map(|p| p.algebra.clone())
        .collect();

    let mut transitions = BTreeMap::new();
    for a in 0..member_masks.len() {
        for b in 0..member_masks.len() {
            if !index.le(a, b) {
                continue;
            }
            // restriction from the J-product to the K-product, K ⊆ J
            let (mj, mk) = (member_masks[a], member_masks[b]);
            let keep: Vec<usize> = {
                // positions within the J-coordinate list of the K points
                let j_points: Vec<usize> =
                    (0..family.index().len()).filter(|i| mj >> i & 1 == 1).collect();
                (0..family.index().len())
                    .filter(|i| mk >> i & 1 == 1)
                    .map(|i| j_points.iter().position(|&p| p == i).unwrap())
                    .collect()
            };
            let src = &member_products[a];
            let dst = &member_products[b];
            let mut tables = BTreeMap::new();
            for s in family.signature().sorts() {
                let mut table =
                    Vec::with_capacity(src.algebra.carrier().carrier(s).len());
                let mut coords = vec![0usize; keep.len()];
                for pos in 0..src.algebra.carrier().carrier(s).len() {
                    for (k, &jpos) in keep.iter().enumerate() {
                        coords[k] = src.data.coord(jpos, s, pos);
                    }
                    table.push(dst.data.encode(s, &coords) as u32);
                }
                tables.insert(s.clone(), table);
            }
            let map = SortedMapping::from_positions(
                src.algebra.carrier().clone(),
                dst.algebra.carrier().clone(),
                tables,
            )?;
            transitions.insert((a, b), map);
        }
    }
    let system = InductiveSystem::new(index, algebras, transitions)?;
    Ok(ReducedProductSystem {
        system,
        member_masks,
        member_products,
    })
}

/// The reduced product: inductive limit of the sub-product system.
pub fn reduced_product(family: &AlgebraFamily, f: &Filter) -> Result<Algebra> {
    Ok(inductive_limit(&reduced_product_system(family, f)?.system)?.apex)
}

/// The congruence on the full product relating tuples whose equalizer set
/// belongs to the filter. Compatibility is verified at construction.
pub fn filter_congruence(
    family: &AlgebraFamily,
    f: &Filter,
) -> Result<(Congruence, ProductAlgebra)> {
    if f.ground() != family.index() {
        return Err(Error::GroundMismatch(
            "filter ground differs from the family index".into(),
        ));
    }
    let prod = family.sub_product(crate::filters::full_mask(family.index().len()))?;
    let n = family.index().len();
    let mut blocks = BTreeMap::new();
    for s in family.signature().sorts() {
        let m = prod.algebra.carrier().carrier(s).len();
        let mut uf = UnionFind::new(m);
        for x in 0..m {
            for y in x + 1..m {
                let mut eq_mask = 0u64;
                for i in 0..n {
                    if prod.data.coord(i, s, x) == prod.data.coord(i, s, y) {
                        eq_mask |= 1 << i;
                    }
                }
                if f.contains_mask(eq_mask) {
                    uf.union(x, y);
                }
            }
        }
        blocks.insert(s.clone(), uf.blocks());
    }
    let eq = SortedEquivalence::from_blocks(prod.algebra.carrier().clone(), blocks)?;
    let cong = Congruence::new(prod.algebra.clone(), eq)?;
    Ok((cong, prod))
}

/// Verdict relating the quotient of the product by a principal filter to
/// the sub-product over the generating subset.
#[derive(Debug, Clone)]
pub struct Prop28Verdict {
    pub constant_support: bool,
    pub quotient: Algebra,
    pub sub_product: Algebra,
    pub iso: Option<Homomorphism>,
    pub holds: bool,
}

/// For the principal filter generated by `j_mask`: computes the quotient
/// of the full product by the filter congruence and the product over the
/// subset, and finds the isomorphism. The isomorphism is first built
/// constructively (restriction factored through the quotient); search is
/// the fallback.
pub fn prop28_check(
    family: &AlgebraFamily,
    j_mask: u64,
    iso_cap: usize,
) -> Result<Prop28Verdict> {
    if j_mask == 0 {
        return Err(Error::Invalid("subset must be nonempty".into()));
    }
    let f = Filter::principal(family.index().to_vec(), j_mask)?;
    let (cong, prod) = filter_congruence(family, &f)?;
    let (quotient, _) = quotient_algebra(&cong)?;
    let subp = family.sub_product(j_mask)?;
    let restriction = {
        let keep: Vec<usize> =
            (0..family.index().len()).filter(|i| j_mask >> i & 1 == 1).collect();
        let mut tables = BTreeMap::new();
        for s in family.signature().sorts() {
            let mut table = Vec::with_capacity(prod.algebra.carrier().carrier(s).len());
            let mut coords = vec![0usize; keep.len()];
            for pos in 0..prod.algebra.carrier().carrier(s).len() {
                for (k, &i) in keep.iter().enumerate() {
                    coords[k] = prod.data.coord(i, s, pos);
                }
                table.push(subp.data.encode(s, &coords) as u32);
            }
            tables.insert(s.clone(), table);
        }
        SortedMapping::from_positions(
            prod.algebra.carrier().clone(),
            subp.algebra.carrier().clone(),
            tables,
        )?
    };
    let iso = match crate::sorted::factor_through(&restriction, cong.eq()) {
        Ok(p_map) if p_map.is_bijective() => Some(Homomorphism::new(
            quotient.clone(),
            subp.algebra.clone(),
            p_map,
        )?),
        _ => find_isomorphism(&quotient, &subp.algebra, iso_cap)?,
    };
    let constant_support = family.constant_support();
    let holds = !constant_support || iso.is_some();
    Ok(Prop28Verdict {
        constant_support,
        quotient,
        sub_product: subp.algebra,
        iso,
        holds,
    })
}

/// Verdict relating the reduced product to the quotient of the product by
/// the filter congruence, with the support side condition of the converse.
#[derive(Debug, Clone)]
pub struct Prop29Verdict {
    pub constant_support: bool,
    pub reduced: Algebra,
    pub quotient: Algebra,
    pub iso: Option<Homomorphism>,
    pub remark_condition: bool,
    pub holds: bool,
    pub consistent: bool,
}

/// Computes both sides and finds the isomorphism; under constant support
/// it must exist. Additionally evaluates the converse side condition
/// (every sort's support set belongs to the filter): whenever the
/// isomorphism exists together with that condition, the family must have
/// constant support, and `consistent` records that no contradiction was
/// observed.
pub fn prop29_check(
    family: &AlgebraFamily,
    f: &Filter,
    iso_cap: usize,
) -> Result<Prop29Verdict> {
    let rps = reduced_product_system(family, f)?;
    let colim = inductive_limit(&rps.system)?;
    let (cong, prod) = filter_congruence(family, f)?;
    let (quotient, pr) = quotient_algebra(&cong)?;

    // constructive candidate: each A(J) maps into the quotient by
    // extending tuples over the missing coordinates; the choice washes
    // out inside a filter member
    let iso = match build_reduced_to_quotient(family, &rps, &colim, &prod, &pr)? {
        Some(h) => Some(h),
        None => find_isomorphism(&colim.apex, &quotient, iso_cap)?,
    };

    let constant_support = family.constant_support();
    let remark_condition = family.signature().sorts().iter().all(|s| {
        let mut mask = 0u64;
        for (i, a) in family.algebras().iter().enumerate() {
            if !a.carrier().carrier(s).is_empty() {
                mask |= 1 << i;
            }
        }
        f.contains_mask(mask)
    });
    let holds = !constant_support || iso.is_some();
    let consistent = !(iso.is_some() && remark_condition && !constant_support);
    Ok(Prop29Verdict {
        constant_support,
        reduced: colim.apex,
        quotient,
        iso,
        remark_condition,
        holds,
        consistent,
    })
}

/// Tries to build the canonical isomorphism from the reduced product to
/// the quotient of the product. Returns Ok(None) when the construction
/// does not apply (the cocone cannot be formed or the map is not
/// bijective), which happens exactly when the hypotheses fail.
fn build_reduced_to_quotient(
    family: &AlgebraFamily,
    rps: &ReducedProductSystem,
    colim: &InductiveLimit,
    prod: &ProductAlgebra,
    pr: &Homomorphism,
) -> Result<Option<Homomorphism>> {
    let n = family.index().len();
    let mut legs = Vec::new();
    for (pos, &mask) in rps.member_masks.iter().enumerate() {
        let member = &rps.member_products[pos];
        let j_points: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        let mut tables = BTreeMap::new();
        for s in family.signature().sorts() {
            let msize = member.algebra.carrier().carrier(s).len();
            let mut table = Vec::with_capacity(msize);
            for p in 0..msize {
                let mut coords = vec![usize::MAX; n];
                for (k, &i) in j_points.iter().enumerate() {
                    coords[i] = member.data.coord(k, s, p);
                }
                for (i, c) in coords.iter_mut().enumerate() {
                    if *c == usize::MAX {
                        if family.algebras()[i].carrier().carrier(s).is_empty() {
                            // no extension exists: the construction fails
                            return Ok(None);
                        }
                        *c = 0;
                    }
                }
                let ppos = prod.data.encode(s, &coords);
                table.push(pr.map().apply_pos(s, ppos) as u32);
            }
            tables.insert(s.clone(), table);
        }
        let map = SortedMapping::from_positions(
            member.algebra.carrier().clone(),
            pr.target().carrier().clone(),
            tables,
        )?;
        match is_homomorphism(&map, &member.algebra, pr.target()) {
            Ok(true) => legs.push(Homomorphism::new(
                member.algebra.clone(),
                pr.target().clone(),
                map,
            )?),
            _ => return Ok(None),
        }
    }
    match mediating_from_colimit(&rps.system, colim, pr.target(), &legs) {
        Ok(h) if h.map().is_bijective() => Ok(Some(h)),
        _ => Ok(None),
    }
}

/// The ultraproduct form of the reduced-product comparison.
pub fn ultraproduct_check(
    family: &AlgebraFamily,
    u: &Ultrafilter,
    iso_cap: usize,
) -> Result<Prop29Verdict> {
    prop29_check(family, u.filter(), iso_cap)
}

/// The support-transfer biconditional: the family has constant support
/// exactly when every member algebra's support equals the support of the
/// sub-product over every filter member.
pub fn support_transfer_check(family: &AlgebraFamily, f: &Filter) -> Result<bool> {
    let constant = family.constant_support();
    let mut per_member = true;
    for &mask in f.members() {
        let sub = family.sub_product(mask)?;
        let sub_supp = sub.algebra.support();
        for a in family.algebras() {
            if a.support() != sub_supp {
                per_member = false;
            }
        }
    }
    Ok(constant == per_member)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{Arity, OpRows};
    use crate::filters::{final_sections_filter, full_mask};
    use crate::sorted::SortId;

    fn sid(s: &str) -> SortId {
        SortId::new(s)
    }

    fn chain(n: usize) -> Preorder {
        let elems: Vec<String> = (0..n).map(|i| i.to_string()).collect();
        let pairs: Vec<(String, String)> = (0..n - 1)
            .map(|i| (i.to_string(), (i + 1).to_string()))
            .collect();
        Preorder::from_generators(elems, &pairs).unwrap()
    }

    fn unary_sig() -> Signature {
        Signature::new(
            vec![sid("s")],
            [(
                "f".to_string(),
                Arity {
                    word: vec![sid("s")],
                    result: sid("s"),
                },
            )]
            .into(),
        )
        .unwrap()
    }

    fn two_elem(names: [&str; 2], f: [&str; 2]) -> Algebra {
        let carrier = SortedSet::new(
            vec![sid("s")],
            [(sid("s"), vec![names[0].to_string(), names[1].to_string()])].into(),
        )
        .unwrap();
        let rows: OpRows = [(
            "f".to_string(),
            vec![
                (vec![names[0].to_string()], f[0].to_string()),
                (vec![names[1].to_string()], f[1].to_string()),
            ],
        )]
        .into();
        Algebra::from_rows(unary_sig(), carrier, &rows).unwrap()
    }

    /// The constant system on one algebra over a chain, with identity
    /// transitions.
    fn constant_proj_system(a: &Algebra, n: usize) -> ProjectiveSystem {
        let index = chain(n);
        let algebras = vec![a.clone(); n];
        let transitions = index
            .pairs()
            .into_iter()
            .map(|p| (p, SortedMapping::identity(a.carrier())))
            .collect();
        ProjectiveSystem::new(index, algebras, transitions).unwrap()
    }

    #[test]
    fn validators_catch_defects() {
        let a = two_elem(["0", "1"], ["0", "1"]);
        let sys = constant_proj_system(&a, 2);
        assert!(sys.validate().is_empty());

        // break the identity law
        let mut bad = sys.transitions().clone();
        let swap = SortedMapping::from_names(
            a.carrier().clone(),
            a.carrier().clone(),
            &[(sid("s"), vec![("0".into(), "1".into()), ("1".into(), "0".into())])].into(),
        )
        .unwrap();
        bad.insert((0, 0), swap.clone());
        let broken = ProjectiveSystem::new_unchecked(
            sys.index().clone(),
            sys.algebras().to_vec(),
            bad,
        );
        assert!(broken
            .validate()
            .iter()
            .any(|d| matches!(d, SystemDefect::NotIdentity { .. })));

        // break the composition law on a 3-chain
        let sys3 = constant_proj_system(&a, 3);
        let mut bad3 = sys3.transitions().clone();
        bad3.insert((0, 2), swap);
        let broken3 = ProjectiveSystem::new_unchecked(
            sys3.index().clone(),
            sys3.algebras().to_vec(),
            bad3,
        );
        assert!(broken3
            .validate()
            .iter()
            .any(|d| matches!(d, SystemDefect::Composition { .. })));

        // a transition that is not a homomorphism: a constant map between
        // fixed-point-free swap algebras
        let swap_alg = two_elem(["0", "1"], ["1", "0"]);
        let index = chain(2);
        let non_hom = SortedMapping::constant(
            swap_alg.carrier(),
            swap_alg.carrier(),
            &[(sid("s"), "1".to_string())].into(),
        )
        .unwrap();
        let mut transitions: BTreeMap<(usize, usize), SortedMapping> = BTreeMap::new();
        transitions.insert((0, 0), SortedMapping::identity(swap_alg.carrier()));
        transitions.insert((1, 1), SortedMapping::identity(swap_alg.carrier()));
        transitions.insert((0, 1), non_hom);
        let broken_hom = ProjectiveSystem::new_unchecked(
            index,
            vec![swap_alg.clone(), swap_alg],
            transitions,
        );
        assert!(broken_hom
            .validate()
            .iter()
            .any(|d| matches!(d, SystemDefect::NotHomomorphism { .. })));
    }

    #[test]
    fn projective_limit_of_constant_system_is_diagonal() {
        let a = two_elem(["0", "1"], ["1", "0"]);
        let sys = constant_proj_system(&a, 2);
        let lim = projective_limit(&sys).unwrap();
        assert_eq!(
            lim.apex.carrier().carrier(&sid("s")),
            ["(0,0)", "(1,1)"]
        );
        let iso = find_isomorphism(&lim.apex, &a, 1_000_000).unwrap();
        assert!(iso.is_some());
    }

    #[test]
    fn projective_limit_with_initial_member_is_empty() {
        let a = two_elem(["0", "1"], ["0", "1"]);
        let empty_carrier =
            SortedSet::new(vec![sid("s")], [(sid("s"), vec![])].into()).unwrap();
        let initial = Algebra::from_rows(unary_sig(), empty_carrier, &OpRows::new()).unwrap();
        let index = chain(2);
        // the empty algebra sits on top: its outgoing transition is empty
        let mut transitions = BTreeMap::new();
        transitions.insert((0, 0), SortedMapping::identity(a.carrier()));
        transitions.insert((1, 1), SortedMapping::identity(initial.carrier()));
        transitions.insert(
            (0, 1),
            SortedMapping::from_positions(
                initial.carrier().clone(),
                a.carrier().clone(),
                [(sid("s"), vec![])].into(),
            )
            .unwrap(),
        );
        let sys =
            ProjectiveSystem::new(index, vec![a.clone(), initial], transitions).unwrap();
        let lim = projective_limit(&sys).unwrap();
        assert!(lim.apex.carrier().carrier(&sid("s")).is_empty());
    }

    #[test]
    fn projective_limit_threads_filtered() {
        // chain 0≤1, both algebras ({0,1}, f=id), identity transition:
        // threads are the diagonal tuples
        let a = two_elem(["0", "1"], ["0", "1"]);
        let sys = constant_proj_system(&a, 2);
        let lim = projective_limit(&sys).unwrap();
        assert_eq!(lim.apex.carrier().carrier(&sid("s")), ["(0,0)", "(1,1)"]);
    }

    #[test]
    fn mediating_into_limit_unique() {
        let a = two_elem(["0", "1"], ["1", "0"]);
        let sys = constant_proj_system(&a, 2);
        let lim = projective_limit(&sys).unwrap();
        // the identity cone from the apex itself
        let h = mediating_into_limit(&sys, &lim, &lim.apex, &lim.legs).unwrap();
        assert_eq!(h.map(), Homomorphism::identity(&lim.apex).map());
        // the diagonal cone from A
        let cone: Vec<Homomorphism> =
            (0..2).map(|_| Homomorphism::identity(&a)).collect();
        let diag = mediating_into_limit(&sys, &lim, &a, &cone).unwrap();
        assert!(diag.map().is_bijective());
        // non-commuting legs rejected on a system where transitions matter
        let b = two_elem(["0", "1"], ["0", "1"]);
        let index = chain(2);
        let collapse = SortedMapping::constant(
            b.carrier(),
            b.carrier(),
            &[(sid("s"), "0".to_string())].into(),
        )
        .unwrap();
        let mut transitions = BTreeMap::new();
        transitions.insert((0, 0), SortedMapping::identity(b.carrier()));
        transitions.insert((1, 1), SortedMapping::identity(b.carrier()));
        transitions.insert((0, 1), collapse);
        let sys2 = ProjectiveSystem::new(index, vec![b.clone(), b.clone()], transitions)
            .unwrap();
        let lim2 = projective_limit(&sys2).unwrap();
        let bad_cone: Vec<Homomorphism> =
            (0..2).map(|_| Homomorphism::identity(&b)).collect();
        assert!(matches!(
            mediating_into_limit(&sys2, &lim2, &b, &bad_cone),
            Err(Error::NotACone(_))
        ));
    }

    fn constant_ind_system(a: &Algebra, n: usize) -> InductiveSystem {
        let index = chain(n);
        let algebras = vec![a.clone(); n];
        let transitions = index
            .pairs()
            .into_iter()
            .map(|p| (p, SortedMapping::identity(a.carrier())))
            .collect();
        InductiveSystem::new(index, algebras, transitions).unwrap()
    }

    #[test]
    fn inductive_limit_of_single_algebra() {
        let a = two_elem(["0", "1"], ["1", "0"]);
        let sys = constant_ind_system(&a, 1);
        let lim = inductive_limit(&sys).unwrap();
        assert!(find_isomorphism(&lim.apex, &a, 1_000_000)
            .unwrap()
            .is_some());
    }

    #[test]
    fn inductive_limit_collapses_along_surjection() {
        // A^0 = three points with f: 0->0, 1->0, 2->2; A^1 = two points f=id;
        // transition merges 0 and 1
        let carrier3 = SortedSet::new(
            vec![sid("s")],
            [(sid("s"), vec!["0".into(), "1".into(), "2".into()])].into(),
        )
        .unwrap();
        let rows: OpRows = [(
            "f".to_string(),
            vec![
                (vec!["0".to_string()], "0".to_string()),
                (vec!["1".to_string()], "0".to_string()),
                (vec!["2".to_string()], "2".to_string()),
            ],
        )]
        .into();
        let a0 = Algebra::from_rows(unary_sig(), carrier3, &rows).unwrap();
        let a1 = two_elem(["x", "z"], ["x", "z"]);
        let t = SortedMapping::from_names(
            a0.carrier().clone(),
            a1.carrier().clone(),
            &[(
                sid("s"),
                vec![
                    ("0".into(), "x".into()),
                    ("1".into(), "x".into()),
                    ("2".into(), "z".into()),
                ],
            )]
            .into(),
        )
        .unwrap();
        let index = chain(2);
        let mut transitions = BTreeMap::new();
        transitions.insert((0, 0), SortedMapping::identity(a0.carrier()));
        transitions.insert((1, 1), SortedMapping::identity(a1.carrier()));
        transitions.insert((0, 1), t);
        let sys = InductiveSystem::new(index, vec![a0, a1.clone()], transitions).unwrap();
        let lim = inductive_limit(&sys).unwrap();
        assert!(find_isomorphism(&lim.apex, &a1, 1_000_000)
            .unwrap()
            .is_some());
        // legs commute: leg_0 = t then leg_1
        assert_eq!(
            sys.transition(0, 1).then(lim.legs[1].map()).unwrap(),
            *lim.legs[0].map()
        );
    }

    #[test]
    fn eventual_agreement_matches_definition() {
        // the classes of the computed limit agree with the literal
        // "equal somewhere above both tags" relation
        let carrier3 = SortedSet::new(
            vec![sid("s")],
            [(sid("s"), vec!["0".into(), "1".into(), "2".into()])].into(),
        )
        .unwrap();
        let rows: OpRows = [(
            "f".to_string(),
            vec![
                (vec!["0".to_string()], "0".to_string()),
                (vec!["1".to_string()], "0".to_string()),
                (vec!["2".to_string()], "2".to_string()),
            ],
        )]
        .into();
        let a0 = Algebra::from_rows(unary_sig(), carrier3, &rows).unwrap();
        let a1 = two_elem(["x", "z"], ["x", "z"]);
        let collapse = SortedMapping::from_names(
            a0.carrier().clone(),
            a1.carrier().clone(),
            &[(
                sid("s"),
                vec![
                    ("0".into(), "x".into()),
                    ("1".into(), "x".into()),
                    ("2".into(), "z".into()),
                ],
            )]
            .into(),
        )
        .unwrap();
        let index = chain(2);
        let mut transitions = BTreeMap::new();
        transitions.insert((0, 0), SortedMapping::identity(a0.carrier()));
        transitions.insert((1, 1), SortedMapping::identity(a1.carrier()));
        transitions.insert((0, 1), collapse);
        let sys = InductiveSystem::new(index, vec![a0, a1], transitions).unwrap();
        let lim = inductive_limit(&sys).unwrap();
        let s = sid("s");
        let n = sys.index().len();
        let mut tagged = Vec::new();
        for (m, inj) in lim.injections.iter().enumerate() {
            for p in 0..sys.algebra(m).carrier().carrier(&s).len() {
                tagged.push((m, p, inj.apply_pos(&s, p)));
            }
        }
        for &(i, a, ca) in &tagged {
            for &(j, b, cb) in &tagged {
                let computed = lim.class_map.apply_pos(&s, ca)
                    == lim.class_map.apply_pos(&s, cb);
                let literal = (0..n).any(|k| {
                    sys.index().le(i, k)
                        && sys.index().le(j, k)
                        && sys.transition(i, k).apply_pos(&s, a)
                            == sys.transition(j, k).apply_pos(&s, b)
                });
                assert_eq!(computed, literal);
            }
        }
    }

    #[test]
    fn inductive_limit_upper_bound_choice_is_immaterial() {
        let a = two_elem(["0", "1"], ["1", "0"]);
        let sys = constant_ind_system(&a, 3);
        let canonical = inductive_limit(&sys).unwrap();
        let other = inductive_limit_with(&sys, |cands| cands[cands.len() - 1]).unwrap();
        assert_eq!(canonical.apex, other.apex);
        for (l, r) in canonical.legs.iter().zip(&other.legs) {
            assert_eq!(l.map(), r.map());
        }
    }

    #[test]
    fn prune_initial_cases() {
        let a = two_elem(["0", "1"], ["0", "1"]);
        let sys = constant_ind_system(&a, 2);
        let pr = prune_initial(&sys).unwrap();
        assert!(!pr.all_initial);
        assert!(pr.dropped.is_empty());

        // initial member below a nonempty one
        let empty_carrier =
            SortedSet::new(vec![sid("s")], [(sid("s"), vec![])].into()).unwrap();
        let initial = Algebra::from_rows(unary_sig(), empty_carrier, &OpRows::new()).unwrap();
        let index = chain(2);
        let mut transitions = BTreeMap::new();
        transitions.insert((0, 0), SortedMapping::identity(initial.carrier()));
        transitions.insert((1, 1), SortedMapping::identity(a.carrier()));
        transitions.insert(
            (0, 1),
            SortedMapping::from_positions(
                initial.carrier().clone(),
                a.carrier().clone(),
                [(sid("s"), vec![])].into(),
            )
            .unwrap(),
        );
        let sys2 =
            InductiveSystem::new(index, vec![initial.clone(), a.clone()], transitions)
                .unwrap();
        let before = inductive_limit(&sys2).unwrap().apex;
        let pruned = prune_initial(&sys2).unwrap();
        assert_eq!(pruned.dropped, ["0"]);
        let after = inductive_limit(&pruned.system).unwrap().apex;
        assert!(find_isomorphism(&before, &after, 1_000_000)
            .unwrap()
            .is_some());

        // all initial: unchanged, flagged
        let sys3 = constant_ind_system(&initial, 2);
        let pr3 = prune_initial(&sys3).unwrap();
        assert!(pr3.all_initial);
    }

    #[test]
    fn prop25_biconditional_on_both_kinds() {
        // constant support: C/≡ ≅ colim
        let a = two_elem(["0", "1"], ["1", "0"]);
        let sys = constant_ind_system(&a, 2);
        let v = prop25_check(&sys, 1_000_000).unwrap();
        assert!(v.constant_support && v.iso.is_some() && v.consistent);

        // support violation: a second sort appearing only upstream
        let sig2 = Signature::new(vec![sid("s"), sid("t")], BTreeMap::new()).unwrap();
        let lo = Algebra::from_rows(
            sig2.clone(),
            SortedSet::new(
                vec![sid("s"), sid("t")],
                [(sid("s"), vec!["a".into()]), (sid("t"), vec![])].into(),
            )
            .unwrap(),
            &OpRows::new(),
        )
        .unwrap();
        let hi = Algebra::from_rows(
            sig2.clone(),
            SortedSet::new(
                vec![sid("s"), sid("t")],
                [(sid("s"), vec!["a".into()]), (sid("t"), vec!["z".into()])].into(),
            )
            .unwrap(),
            &OpRows::new(),
        )
        .unwrap();
        let index = chain(2);
        let up = SortedMapping::from_names(
            lo.carrier().clone(),
            hi.carrier().clone(),
            &[(sid("s"), vec![("a".into(), "a".into())]), (sid("t"), vec![])].into(),
        )
        .unwrap();
        let mut transitions = BTreeMap::new();
        transitions.insert((0, 0), SortedMapping::identity(lo.carrier()));
        transitions.insert((1, 1), SortedMapping::identity(hi.carrier()));
        transitions.insert((0, 1), up);
        let sys2 = InductiveSystem::new(index, vec![lo, hi], transitions).unwrap();
        let v2 = prop25_check(&sys2, 1_000_000).unwrap();
        assert!(!v2.constant_support);
        assert!(v2.iso.is_none());
        assert!(v2.consistent);

        // single algebra
        let v3 = prop25_check(&constant_ind_system(&a, 1), 1_000_000).unwrap();
        assert!(v3.constant_support && v3.iso.is_some() && v3.consistent);
    }

    fn family2(a: &Algebra, b: &Algebra) -> AlgebraFamily {
        AlgebraFamily::new(vec!["0".into(), "1".into()], vec![a.clone(), b.clone()])
            .unwrap()
    }

    #[test]
    fn reduced_product_system_shapes() {
        let a = two_elem(["0", "1"], ["1", "0"]);
        let fam = family2(&a, &a);
        // trivial filter: one-object system
        let f = Filter::trivial(fam.index().to_vec()).unwrap();
        let rps = reduced_product_system(&fam, &f).unwrap();
        assert_eq!(rps.system.index().len(), 1);

        // principal at {1}: members {1} and {0,1}
        let f2 = Filter::principal(fam.index().to_vec(), 0b10).unwrap();
        let rps2 = reduced_product_system(&fam, &f2).unwrap();
        assert_eq!(rps2.system.index().len(), 2);
        assert!(rps2.system.validate().is_empty());
        // the transition out of the full member drops coordinate 0
        let full_pos = rps2
            .member_masks
            .iter()
            .position(|&m| m == full_mask(2))
            .unwrap();
        let single_pos = rps2.member_masks.iter().position(|&m| m == 0b10).unwrap();
        let t = rps2.system.transition(
            full_pos.min(single_pos),
            full_pos.max(single_pos),
        );
        // (0,1) restricted to {1} is (1)
        assert_eq!(t.apply(&sid("s"), "(0,1)"), Some("(1)"));
    }

    #[test]
    fn reduced_product_matches_quotient_for_ultrafilters() {
        let a = two_elem(["0", "1"], ["1", "0"]);
        let b = two_elem(["x", "y"], ["x", "y"]);
        let fam = family2(&a, &b);
        let u = Ultrafilter::principal(fam.index().to_vec(), 1).unwrap();
        let v = ultraproduct_check(&fam, &u, 1_000_000).unwrap();
        assert!(v.constant_support && v.iso.is_some() && v.holds && v.consistent);
        // the ultraproduct at a principal point is the algebra there
        assert!(find_isomorphism(&v.reduced, &b, 1_000_000).unwrap().is_some());
    }

    #[test]
    fn filter_congruence_cases() {
        let a = two_elem(["0", "1"], ["1", "0"]);
        let fam = family2(&a, &a);
        // trivial filter: equality
        let f = Filter::trivial(fam.index().to_vec()).unwrap();
        let (cong, prod) = filter_congruence(&fam, &f).unwrap();
        assert_eq!(
            cong.eq().blocks(&sid("s")).len(),
            prod.algebra.carrier().carrier(&sid("s")).len()
        );
        // principal at 1: related iff coordinate 1 agrees
        let f2 = Filter::principal(fam.index().to_vec(), 0b10).unwrap();
        let (cong2, _) = filter_congruence(&fam, &f2).unwrap();
        assert_eq!(cong2.eq().related(&sid("s"), "(0,1)", "(1,1)"), Some(true));
        assert_eq!(cong2.eq().related(&sid("s"), "(0,1)", "(0,0)"), Some(false));
    }

    #[test]
    fn prop28_cases() {
        let a = two_elem(["0", "1"], ["1", "0"]);
        let b = two_elem(["x", "y"], ["y", "x"]);
        let fam = family2(&a, &b);
        // J = ground: quotient by equality vs the full product
        let v = prop28_check(&fam, full_mask(2), 1_000_000).unwrap();
        assert!(v.holds && v.iso.is_some());
        // singleton J with constant support
        let v2 = prop28_check(&fam, 0b10, 1_000_000).unwrap();
        assert!(v2.constant_support && v2.iso.is_some());
        assert!(find_isomorphism(&v2.sub_product, &b, 1_000_000)
            .unwrap()
            .is_some());

        // support violation at the dropped coordinate: guaranteed no iso
        let sig2 = Signature::new(vec![sid("s"), sid("t")], BTreeMap::new()).unwrap();
        let wide = Algebra::from_rows(
            sig2.clone(),
            SortedSet::new(
                vec![sid("s"), sid("t")],
                [(sid("s"), vec!["a".into()]), (sid("t"), vec!["z".into()])].into(),
            )
            .unwrap(),
            &OpRows::new(),
        )
        .unwrap();
        let narrow = Algebra::from_rows(
            sig2.clone(),
            SortedSet::new(
                vec![sid("s"), sid("t")],
                [(sid("s"), vec!["a".into()]), (sid("t"), vec![])].into(),
            )
            .unwrap(),
            &OpRows::new(),
        )
        .unwrap();
        let fam2 =
            AlgebraFamily::new(vec!["0".into(), "1".into()], vec![narrow, wide]).unwrap();
        let v3 = prop28_check(&fam2, 0b10, 1_000_000).unwrap();
        assert!(!v3.constant_support);
        assert!(v3.iso.is_none());
        assert!(v3.holds); // nothing is asserted without constant support
    }

    #[test]
    fn prop29_remark_condition() {
        // non-constant family, ultrafilter at the wide member: iso exists
        // but the remark condition fails, so no contradiction arises
        let sig2 = Signature::new(vec![sid("s"), sid("t")], BTreeMap::new()).unwrap();
        let wide = Algebra::from_rows(
            sig2.clone(),
            SortedSet::new(
                vec![sid("s"), sid("t")],
                [(sid("s"), vec!["a".into()]), (sid("t"), vec!["z".into()])].into(),
            )
            .unwrap(),
            &OpRows::new(),
        )
        .unwrap();
        let narrow = Algebra::from_rows(
            sig2.clone(),
            SortedSet::new(
                vec![sid("s"), sid("t")],
                [(sid("s"), vec!["a".into()]), (sid("t"), vec![])].into(),
            )
            .unwrap(),
            &OpRows::new(),
        )
        .unwrap();
        let fam =
            AlgebraFamily::new(vec!["0".into(), "1".into()], vec![wide, narrow.clone()])
                .unwrap();
        let u = Ultrafilter::principal(fam.index().to_vec(), 1).unwrap();
        let v = ultraproduct_check(&fam, &u, 1_000_000).unwrap();
        assert!(!v.constant_support);
        assert!(!v.remark_condition);
        assert!(v.consistent);

        // and the support-transfer biconditional
        let f = Filter::principal(fam.index().to_vec(), 0b10).unwrap();
        assert!(support_transfer_check(&fam, &f).unwrap());
    }

    #[test]
    fn frechet_filter_reduced_product() {
        let a = two_elem(["0", "1"], ["1", "0"]);
        let fam = family2(&a, &a);
        let c = chain(2);
        let f = final_sections_filter(&c).unwrap();
        let rp = reduced_product(&fam, &f).unwrap();
        assert!(find_isomorphism(&rp, &a, 1_000_000).unwrap().is_some());
    }
}

//! The retraction of a projective limit of finite algebras onto itself
//! through the ultraproduct of its members.
//!
//! Given a projective system with constant support over a directed index
//! and an ultrafilter containing the final sections, every sub-product
//! `A(J)` votes: for a tuple `x` and a candidate `y` of `A^i`, the voters
//! are the indices `j ∈ J∩↑i` whose transition sends `x_j` to `y`. The
//! vote sets partition `J∩↑i`, exactly one of them lies in the
//! ultrafilter, and the elected values assemble into homomorphisms
//! `h^{J,i}`, the mediating maps `h^i` out of the ultraproduct, and the
//! retraction onto the limit. Every step of that argument is verified on
//! the instance rather than assumed.

use std::collections::BTreeMap;

use crate::algebra::{is_homomorphism, Homomorphism};
use crate::error::{Error, Result, VoteWitness};
use crate::filters::{final_sections_basis, Ultrafilter};
use crate::sorted::{SortId, SortedMapping};
use crate::systems::{
    inductive_limit, projective_limit, reduced_product_system, InductiveLimit,
    ProjectiveLimit, ProjectiveSystem, ReducedProductSystem,
};

/// A projective system of finite algebras with constant support, paired
/// with an ultrafilter containing the filter of the final sections.
#[derive(Debug, Clone)]
pub struct RetractionInstance {
    system: ProjectiveSystem,
    ultra: Ultrafilter,
}

impl RetractionInstance {
    pub fn new(system: ProjectiveSystem, ultra: Ultrafilter) -> Result<Self> {
        let inst = RetractionInstance::new_unchecked(system, ultra);
        let problems = inst.validate();
        if problems.is_empty() {
            Ok(inst)
        } else {
            Err(Error::Invalid(problems.join("; ")))
        }
    }

    /// Skips the hypothesis checks; used to demonstrate how the vote
    /// construction fails when the hypotheses do not hold.
    pub fn new_unchecked(system: ProjectiveSystem, ultra: Ultrafilter) -> Self {
        RetractionInstance { system, ultra }
    }

    /// The hypothesis checks, as data: system validity, matching ground,
    /// constant support, and the final sections being in the ultrafilter.
    pub fn validate(&self) -> Vec<String> {
        let mut problems: Vec<String> = self
            .system
            .validate()
            .iter()
            .map(|d| d.to_string())
            .collect();
        if self.ultra.ground() != self.system.index().elems() {
            problems.push("ultrafilter ground differs from the system index".into());
        } else {
            for up in final_sections_basis(self.system.index()) {
                if !self.ultra.contains_mask(up) {
                    problems.push(format!(
                        "ultrafilter does not contain the final section {up:#b}"
                    ));
                }
            }
        }
        if !self.system.constant_support() {
            problems.push("the algebra family does not have constant support".into());
        }
        problems
    }

    pub fn system(&self) -> &ProjectiveSystem {
        &self.system
    }

    pub fn ultra(&self) -> &Ultrafilter {
        &self.ultra
    }
}

/// The fully computed retraction data for one instance.
#[derive(Debug, Clone)]
pub struct Retraction {
    instance: RetractionInstance,
    pub reduced: ReducedProductSystem,
    pub colimit: InductiveLimit,
    pub limit: ProjectiveLimit,
    /// `h^{J,i}` per filter-member position and index.
    h_member: Vec<Vec<SortedMapping>>,
    /// `h^i` per index: out of the colimit apex.
    h_index: Vec<SortedMapping>,
    /// The mediating homomorphism from the ultraproduct to the limit.
    pub hom: Homomorphism,
}

impl Retraction {
    /// Runs the whole construction: sub-products, colimit, limit, votes,
    /// mediating maps, and the retraction homomorphism. Violated
    /// hypotheses surface as [`Error::VoteFailure`] and the defining
    /// equations of every mediating map are recomputed and checked.
    pub fn build(instance: RetractionInstance) -> Result<Self> {
        let system = instance.system.clone();
        let family = crate::systems::AlgebraFamily::new(
            system.index().elems().to_vec(),
            system.algebras().to_vec(),
        )?;
        let reduced = reduced_product_system(&family, instance.ultra.filter())?;
        let colimit = inductive_limit(&reduced.system)?;
        let limit = projective_limit(&system)?;

        let n = system.index().len();
        let mut h_member = Vec::with_capacity(reduced.member_masks.len());
        for (jm, &mask) in reduced.member_masks.iter().enumerate() {
            let mut per_index = Vec::with_capacity(n);
            for i in 0..n {
                per_index.push(build_h_ji(&instance, &reduced, jm, mask, i)?);
            }
            h_member.push(per_index);
        }

        // compatibility with the restriction transitions
        for (km, &mk) in reduced.member_masks.iter().enumerate() {
            for (jm, &mj) in reduced.member_masks.iter().enumerate() {
                if mk & mj != mj || km == jm {
                    continue; // need mk ⊇ mj
                }
                let t = reduced.system.transition(km, jm);
                for i in 0..n {
                    if t.then(&h_member[jm][i])? != h_member[km][i] {
                        return Err(Error::Invalid(format!(
                            "vote maps are incompatible with the restriction {} -> {}",
                            reduced.system.index().elems()[km],
                            reduced.system.index().elems()[jm],
                        )));
                    }
                }
            }
        }

        // mediating maps out of the colimit, defined on class witnesses
        // and checked to factor every h^{J,i}
        let mut h_index = Vec::with_capacity(n);
        for i in 0..n {
            let mut tables = BTreeMap::new();
            for s in system.signature().sorts() {
                let apex_size = colimit.apex.carrier().carrier(s).len();
                let mut table = Vec::with_capacity(apex_size);
                for c in 0..apex_size {
                    let (jm, p) = colimit.witness(s, c);
                    table.push(h_member[jm][i].apply_pos(s, p) as u32);
                }
                tables.insert(s.clone(), table);
            }
            let h_i = SortedMapping::from_positions(
                colimit.apex.carrier().clone(),
                system.algebra(i).carrier().clone(),
                tables,
            )?;
            for (jm, leg) in colimit.legs.iter().enumerate() {
                if leg.map().then(&h_i)? != h_member[jm][i] {
                    return Err(Error::Invalid(format!(
                        "mediating map at index {} does not factor member {}",
                        system.index().elems()[i],
                        reduced.system.index().elems()[jm],
                    )));
                }
            }
            if !is_homomorphism(&h_i, &colimit.apex, system.algebra(i))? {
                return Err(Error::NotAHomomorphism(format!(
                    "mediating map at index {} is not a homomorphism",
                    system.index().elems()[i]
                )));
            }
            h_index.push(h_i);
        }

        // coherence with the system transitions: f^{k,i} ∘ h^k = h^i
        for (i, k) in system.index().pairs() {
            if h_index[k].then(system.transition(i, k))? != h_index[i] {
                return Err(Error::Invalid(format!(
                    "mediating maps are incoherent at {} ≤ {}",
                    system.index().elems()[i],
                    system.index().elems()[k]
                )));
            }
        }

        // the retraction homomorphism into the limit: classes map to the
        // thread of their mediated values
        let mut tables = BTreeMap::new();
        for s in system.signature().sorts() {
            let apex_size = colimit.apex.carrier().carrier(s).len();
            let mut table = Vec::with_capacity(apex_size);
            let mut coords = vec![0usize; n];
            for c in 0..apex_size {
                for (i, h_i) in h_index.iter().enumerate() {
                    coords[i] = h_i.apply_pos(s, c);
                }
                let ppos = limit.product.data.encode(s, &coords);
                let name = &limit.product.algebra.carrier().carrier(s)[ppos];
                let tpos = limit.apex.carrier().position(s, name).ok_or_else(|| {
                    Error::Invalid(format!("mediated values {name} are not a thread"))
                })?;
                table.push(tpos as u32);
            }
            tables.insert(s.clone(), table);
        }
        let map = SortedMapping::from_positions(
            colimit.apex.carrier().clone(),
            limit.apex.carrier().clone(),
            tables,
        )?;
        let hom = Homomorphism::new(colimit.apex.clone(), limit.apex.clone(), map)?;
        for (i, leg) in limit.legs.iter().enumerate() {
            debug_assert_eq!(hom.map().then(leg.map()).unwrap(), h_index[i]);
        }

        Ok(Retraction {
            instance,
            reduced,
            colimit,
            limit,
            h_member,
            h_index,
            hom,
        })
    }

    pub fn instance(&self) -> &RetractionInstance {
        &self.instance
    }

    /// The position of a filter member given by ground-point names.
    pub fn member_position(&self, j: &[&str]) -> Result<usize> {
        let ground = self.instance.ultra.ground();
        let mut mask = 0u64;
        for name in j {
            let p = ground
                .iter()
                .position(|g| g == name)
                .ok_or_else(|| Error::JNotInFilter(format!("{name} is not a ground point")))?;
            mask |= 1 << p;
        }
        self.reduced
            .member_masks
            .iter()
            .position(|&m| m == mask)
            .ok_or_else(|| {
                Error::JNotInFilter(format!("{{{}}} is not a filter member", j.join(",")))
            })
    }

    /// The vote set `V^{J,i,s}(x, y)` as a mask over the ground.
    pub fn vote_set(
        &self,
        member: usize,
        i: usize,
        s: &SortId,
        x: usize,
        y: usize,
    ) -> Result<u64> {
        let system = self.instance.system();
        if system.algebra(i).carrier().carrier(s).is_empty() {
            return Err(Error::SortNotSupported(format!(
                "sort {s} is not in the support of the algebra at {}",
                system.index().elems()[i]
            )));
        }
        let mask = self.reduced.member_masks[member];
        let member_prod = &self.reduced.member_products[member];
        let j_points: Vec<usize> = (0..system.index().len())
            .filter(|p| mask >> p & 1 == 1)
            .collect();
        let mut votes = 0u64;
        for (rank, &j) in j_points.iter().enumerate() {
            if !system.index().le(i, j) {
                continue;
            }
            let xj = member_prod.data.coord(rank, s, x);
            if system.transition(i, j).apply_pos(s, xj) == y {
                votes |= 1 << j;
            }
        }
        Ok(votes)
    }

    /// Name-level form of [`Self::vote_set`], for reports and tests.
    pub fn vote_set_by_names(
        &self,
        j: &[&str],
        i: &str,
        s: &SortId,
        x: &[&str],
        y: &str,
    ) -> Result<Vec<String>> {
        let member = self.member_position(j)?;
        let system = self.instance.system();
        let i = system
            .index()
            .position(i)
            .ok_or_else(|| Error::Invalid(format!("unknown index {i}")))?;
        let name = format!("({})", x.join(","));
        let xpos = self.reduced.member_products[member]
            .algebra
            .carrier()
            .position(s, &name)
            .ok_or_else(|| Error::BadTuple(format!("{name} is not in the sub-product")))?;
        let ypos = system
            .algebra(i)
            .carrier()
            .position(s, y)
            .ok_or_else(|| Error::BadTuple(format!("{y} is not in the target carrier")))?;
        let votes = self.vote_set(member, i, s, xpos, ypos)?;
        Ok((0..system.index().len())
            .filter(|p| votes >> p & 1 == 1)
            .map(|p| system.index().elems()[p].clone())
            .collect())
    }

    /// `h^{J,i}` as a mapping from the sub-product at the member to the
    /// algebra at `i`.
    pub fn h_ji(&self, member: usize, i: usize) -> &SortedMapping {
        &self.h_member[member][i]
    }

    /// `h^i` from the colimit apex to the algebra at `i`.
    pub fn h_i(&self, i: usize) -> &SortedMapping {
        &self.h_index[i]
    }

    /// `h^{J,i} ∘ p^{K,J} = h^{K,i}` for members `K ⊇ J`.
    pub fn h_ji_compatibility_check(&self, j: usize, k: usize, i: usize) -> Result<bool> {
        let (mj, mk) = (self.reduced.member_masks[j], self.reduced.member_masks[k]);
        if mk & mj != mj {
            return Err(Error::JNotInFilter(
                "compatibility needs K ⊇ J between filter members".into(),
            ));
        }
        if j == k {
            return Ok(true);
        }
        let t = self.reduced.system.transition(k, j);
        Ok(t.then(&self.h_member[j][i])? == self.h_member[k][i])
    }

    /// `f^{k,i} ∘ h^k = h^i` for `i ≤ k`.
    pub fn transition_coherence_check(&self, i: usize, k: usize) -> Result<bool> {
        if !self.instance.system().index().le(i, k) {
            return Err(Error::Invalid("transition coherence needs i ≤ k".into()));
        }
        Ok(self.h_index[k].then(self.instance.system().transition(i, k))?
            == self.h_index[i])
    }

    /// On a finite index the ultrafilter is principal at a point above
    /// everything; there `h^{I,i}` collapses to `f^{p,i} ∘ pr^{I,p}`.
    pub fn degenerate_shape_check(&self) -> Result<bool> {
        let system = self.instance.system();
        let p = self.instance.ultra.principal_point();
        let full = crate::filters::full_mask(system.index().len());
        let full_pos = self
            .reduced
            .member_masks
            .iter()
            .position(|&m| m == full)
            .expect("the ground is always a filter member");
        let prod = &self.reduced.member_products[full_pos];
        for i in 0..system.index().len() {
            if !system.index().le(i, p) {
                return Ok(false);
            }
            let composite = prod.projections[p].map().then(system.transition(i, p))?;
            if composite != self.h_member[full_pos][i] {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// The retraction identity, thread by thread: the class of a thread
    /// under the full-member leg maps back to the thread itself. Also
    /// rechecks the identities `h^{I,i} ∘ in = pr^{I,i} ∘ in = f^i` and
    /// that the relevant vote sets are exactly the final sections.
    pub fn retraction_check(&self) -> Result<RetractionVerdict> {
        let system = self.instance.system();
        let full = crate::filters::full_mask(system.index().len());
        let full_pos = self
            .reduced
            .member_masks
            .iter()
            .position(|&m| m == full)
            .expect("the ground is always a filter member");
        let full_leg = &self.colimit.legs[full_pos];
        let mut failures = Vec::new();
        let mut vote_sets_are_final_sections = true;
        let mut leg_identities = true;
        for s in system.signature().sorts() {
            let apex = self.limit.apex.carrier();
            for t in 0..apex.carrier(s).len() {
                let name = &apex.carrier(s)[t];
                // the thread as an element of the full sub-product
                let ppos = self.reduced.member_products[full_pos]
                    .algebra
                    .carrier()
                    .position(s, name)
                    .expect("limit threads live in the full product");
                let class = full_leg.map().apply_pos(s, ppos);
                let back = self.hom.map().apply_pos(s, class);
                if back != t {
                    failures.push(format!(
                        "thread {name} at sort {s} returns as {}",
                        apex.carrier(s)[back]
                    ));
                }
                for i in 0..system.index().len() {
                    let xi = self.limit.legs[i].map().apply_pos(s, t);
                    if self.h_member[full_pos][i].apply_pos(s, ppos) != xi {
                        leg_identities = false;
                    }
                    let votes = self.vote_set(full_pos, i, s, ppos, xi)?;
                    if votes != system.index().up_set(i) {
                        vote_sets_are_final_sections = false;
                    }
                }
            }
        }
        let degenerate_shape_ok = self.degenerate_shape_check()?;
        Ok(RetractionVerdict {
            pass: failures.is_empty() && leg_identities,
            thread_failures: failures,
            leg_identities,
            vote_sets_are_final_sections,
            degenerate_shape_ok,
        })
    }
}

/// Outcome of the retraction identity check, with witnesses.
#[derive(Debug, Clone)]
pub struct RetractionVerdict {
    pub pass: bool,
    pub thread_failures: Vec<String>,
    pub leg_identities: bool,
    pub vote_sets_are_final_sections: bool,
    pub degenerate_shape_ok: bool,
}

/// Elects, per element of the sub-product at one member, the unique value
/// of `A^i` whose vote set lies in the ultrafilter, and packages the
/// election as a mapping. Any breakdown of existence or uniqueness is
/// reported with the full tally.
fn build_h_ji(
    instance: &RetractionInstance,
    reduced: &ReducedProductSystem,
    member: usize,
    mask: u64,
    i: usize,
) -> Result<SortedMapping> {
    let system = instance.system();
    let ultra = instance.ultra();
    let member_prod = &reduced.member_products[member];
    let member_name = &reduced.system.index().elems()[member];
    let j_points: Vec<usize> = (0..system.index().len())
        .filter(|p| mask >> p & 1 == 1)
        .collect();
    let mut tables = BTreeMap::new();
    for s in system.signature().sorts() {
        let src = member_prod.algebra.carrier().carrier(s);
        let dst = system.algebra(i).carrier().carrier(s);
        let mut table = Vec::with_capacity(src.len());
        for x in 0..src.len() {
            if dst.is_empty() {
                // a nonempty sub-product must land somewhere
                return Err(Error::VoteFailure(Box::new(VoteWitness {
                    member: member_name.clone(),
                    index: system.index().elems()[i].clone(),
                    sort: s.clone(),
                    tuple: vec![src[x].clone()],
                    tally: Vec::new(),
                    reason: format!(
                        "sort {s} is inhabited at the member but empty at the index"
                    ),
                })));
            }
            // tally the voters per candidate value
            let mut tally: Vec<u64> = vec![0; dst.len()];
            for (rank, &j) in j_points.iter().enumerate() {
                if !system.index().le(i, j) {
                    continue;
                }
                let xj = member_prod.data.coord(rank, s, x);
                tally[system.transition(i, j).apply_pos(s, xj)] |= 1 << j;
            }
            let elected: Vec<usize> = (0..dst.len())
                .filter(|&y| tally[y] != 0 && ultra.contains_mask(tally[y]))
                .collect();
            if elected.len() != 1 {
                let witness = VoteWitness {
                    member: member_name.clone(),
                    index: system.index().elems()[i].clone(),
                    sort: s.clone(),
                    tuple: vec![src[x].clone()],
                    tally: (0..dst.len())
                        .filter(|&y| tally[y] != 0)
                        .map(|y| {
                            (
                                dst[y].clone(),
                                (0..system.index().len())
                                    .filter(|p| tally[y] >> p & 1 == 1)
                                    .map(|p| system.index().elems()[p].clone())
                                    .collect(),
                            )
                        })
                        .collect(),
                    reason: if elected.is_empty() {
                        "no candidate's vote set belongs to the ultrafilter".into()
                    } else {
                        "several candidates' vote sets belong to the ultrafilter".into()
                    },
                };
                return Err(Error::VoteFailure(Box::new(witness)));
            }
            table.push(elected[0] as u32);
        }
        tables.insert(s.clone(), table);
    }
    let map = SortedMapping::from_positions(
        member_prod.algebra.carrier().clone(),
        system.algebra(i).carrier().clone(),
        tables,
    )?;
    if !is_homomorphism(&map, &member_prod.algebra, system.algebra(i))? {
        return Err(Error::NotAHomomorphism(format!(
            "elected map from {member_name} to {} is not a homomorphism",
            system.index().elems()[i]
        )));
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{Algebra, Arity, OpRows, Signature};
    use crate::filters::Filter;
    use crate::preorder::Preorder;
    use crate::sorted::{SortId, SortedSet};
    use std::collections::BTreeMap;

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

    fn id_alg() -> Algebra {
        let carrier = SortedSet::new(
            vec![sid("s")],
            [(sid("s"), vec!["0".to_string(), "1".to_string()])].into(),
        )
        .unwrap();
        let rows: OpRows = [(
            "f".to_string(),
            vec![
                (vec!["0".to_string()], "0".to_string()),
                (vec!["1".to_string()], "1".to_string()),
            ],
        )]
        .into();
        Algebra::from_rows(unary_sig(), carrier, &rows).unwrap()
    }

    /// The two-index fixture: a chain 0 ≤ 1, both algebras ({0,1}, f = id),
    /// identity transitions, ultrafilter principal at 1.
    fn chain2_instance() -> RetractionInstance {
        let a = id_alg();
        let index = chain(2);
        let transitions = index
            .pairs()
            .into_iter()
            .map(|p| (p, SortedMapping::identity(a.carrier())))
            .collect();
        let system = ProjectiveSystem::new(index, vec![a.clone(), a], transitions).unwrap();
        let ultra = Ultrafilter::principal(system.index().elems().to_vec(), 1).unwrap();
        RetractionInstance::new(system, ultra).unwrap()
    }

    #[test]
    fn chain2_vote_sets() {
        let r = Retraction::build(chain2_instance()).unwrap();
        let votes = r
            .vote_set_by_names(&["0", "1"], "0", &sid("s"), &["0", "1"], "1")
            .unwrap();
        assert_eq!(votes, ["1"]);
        let votes0 = r
            .vote_set_by_names(&["0", "1"], "0", &sid("s"), &["0", "1"], "0")
            .unwrap();
        assert_eq!(votes0, ["0"]);
        // distinct candidates have disjoint vote sets
        let full = r.member_position(&["0", "1"]).unwrap();
        let x = r.reduced.member_products[full]
            .algebra
            .carrier()
            .position(&sid("s"), "(0,1)")
            .unwrap();
        let v0 = r.vote_set(full, 0, &sid("s"), x, 0).unwrap();
        let v1 = r.vote_set(full, 0, &sid("s"), x, 1).unwrap();
        assert_eq!(v0 & v1, 0);
        // and they partition J∩↑i
        assert_eq!(v0 | v1, 0b11);
    }

    #[test]
    fn chain2_elected_maps() {
        let r = Retraction::build(chain2_instance()).unwrap();
        let full = r.member_position(&["0", "1"]).unwrap();
        // the principal point picks coordinate 1
        assert_eq!(r.h_ji(full, 0).apply(&sid("s"), "(0,1)"), Some("1"));
        assert_eq!(r.h_ji(full, 1).apply(&sid("s"), "(0,1)"), Some("1"));
        // the singleton member maps by its only coordinate
        let single = r.member_position(&["1"]).unwrap();
        assert_eq!(r.h_ji(single, 1).apply(&sid("s"), "(0)"), Some("0"));
        assert_eq!(r.h_ji(single, 1).apply(&sid("s"), "(1)"), Some("1"));
    }

    #[test]
    fn chain2_compatibility_and_coherence() {
        let r = Retraction::build(chain2_instance()).unwrap();
        let full = r.member_position(&["0", "1"]).unwrap();
        let single = r.member_position(&["1"]).unwrap();
        assert!(r.h_ji_compatibility_check(single, full, 0).unwrap());
        assert!(r.h_ji_compatibility_check(full, full, 0).unwrap());
        assert!(r.transition_coherence_check(0, 1).unwrap());
        assert!(r.transition_coherence_check(0, 0).unwrap());
    }

    #[test]
    fn chain2_retraction_holds() {
        let r = Retraction::build(chain2_instance()).unwrap();
        let v = r.retraction_check().unwrap();
        assert!(v.pass);
        assert!(v.leg_identities);
        assert!(v.vote_sets_are_final_sections);
        assert!(v.degenerate_shape_ok);
        // the retraction maps the class of (x0,x1) to the thread (x1,x1)
        let full = r.member_position(&["0", "1"]).unwrap();
        let leg = &r.colimit.legs[full];
        let x = r.reduced.member_products[full]
            .algebra
            .carrier()
            .position(&sid("s"), "(0,1)")
            .unwrap();
        let class = leg.map().apply_pos(&sid("s"), x);
        let thread = r.hom.map().apply_pos(&sid("s"), class);
        assert_eq!(r.limit.apex.carrier().carrier(&sid("s"))[thread], "(1,1)");
    }

    #[test]
    fn single_index_system_retracts() {
        let a = id_alg();
        let index = chain(1);
        let transitions = [((0usize, 0usize), SortedMapping::identity(a.carrier()))]
            .into_iter()
            .collect();
        let system = ProjectiveSystem::new(index, vec![a], transitions).unwrap();
        let ultra = Ultrafilter::principal(system.index().elems().to_vec(), 0).unwrap();
        let r =
            Retraction::build(RetractionInstance::new(system, ultra).unwrap()).unwrap();
        assert!(r.retraction_check().unwrap().pass);
    }

    #[test]
    fn validation_rejects_support_violation() {
        // sort t inhabited at the bottom only: a valid projective system
        // without constant support
        let sig = Signature::new(vec![sid("s"), sid("t")], BTreeMap::new()).unwrap();
        let wide = Algebra::from_rows(
            sig.clone(),
            SortedSet::new(
                vec![sid("s"), sid("t")],
                [(sid("s"), vec!["a".into()]), (sid("t"), vec!["z".into()])].into(),
            )
            .unwrap(),
            &OpRows::new(),
        )
        .unwrap();
        let narrow = Algebra::from_rows(
            sig.clone(),
            SortedSet::new(
                vec![sid("s"), sid("t")],
                [(sid("s"), vec!["a".into()]), (sid("t"), vec![])].into(),
            )
            .unwrap(),
            &OpRows::new(),
        )
        .unwrap();
        let index = chain(2);
        let down = SortedMapping::from_names(
            narrow.carrier().clone(),
            wide.carrier().clone(),
            &[(sid("s"), vec![("a".into(), "a".into())]), (sid("t"), vec![])].into(),
        )
        .unwrap();
        let mut transitions = BTreeMap::new();
        transitions.insert((0, 0), SortedMapping::identity(wide.carrier()));
        transitions.insert((1, 1), SortedMapping::identity(narrow.carrier()));
        transitions.insert((0, 1), down);
        let system = ProjectiveSystem::new(index, vec![wide, narrow], transitions).unwrap();
        let ultra = Ultrafilter::principal(system.index().elems().to_vec(), 1).unwrap();
        let err = RetractionInstance::new(system.clone(), ultra.clone());
        assert!(matches!(err, Err(Error::Invalid(_))));
        // the unchecked instance still goes through the construction and
        // the retraction identity holds at this scale; the rejection above
        // is the diagnostic for the violated hypothesis
        let unchecked = RetractionInstance::new_unchecked(system, ultra);
        assert!(!unchecked.validate().is_empty());
        let r = Retraction::build(unchecked).unwrap();
        assert!(r.retraction_check().unwrap().pass);
    }

    #[test]
    fn fake_ultrafilter_fails_votes() {
        // the trivial filter passed off as an ultrafilter: no candidate
        // collects a vote set inside it
        let inst = chain2_instance();
        let trivial = Filter::trivial(inst.system().index().elems().to_vec()).unwrap();
        let fake = Ultrafilter::new_unchecked(trivial, 1);
        let unchecked = RetractionInstance::new_unchecked(inst.system().clone(), fake);
        match Retraction::build(unchecked) {
            Err(Error::VoteFailure(w)) => {
                assert!(w.reason.contains("no candidate"));
                assert!(!w.tally.is_empty());
            }
            other => panic!("expected a vote failure, got {other:?}"),
        }
    }

    #[test]
    fn ultrafilter_below_final_sections_rejected() {
        let inst = chain2_instance();
        let bottom =
            Ultrafilter::principal(inst.system().index().elems().to_vec(), 0).unwrap();
        assert!(RetractionInstance::new(inst.system().clone(), bottom).is_err());
    }
}

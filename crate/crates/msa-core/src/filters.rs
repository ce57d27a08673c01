//! Filters and ultrafilters on finite index sets, the final-section
//! (Fréchet) filter of a directed preorder, co-optimal lifts, and the
//! objects and morphisms pairing a preorder with an admissible
//! ultrafilter.
//!
//! Subsets are bit masks over the canonical order of the ground set; the
//! ground is capped at 16 elements so exhaustive subset checks stay cheap.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::preorder::{IsotoneMap, Preorder};

/// Hard cap on the ground size for explicit filter member sets.
pub const MAX_GROUND: usize = 16;

/// A filter: a nonempty upward- and intersection-closed family of
/// nonempty subsets of a finite ground set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Filter {
    ground: Vec<String>,
    members: Vec<u64>, // sorted masks
}

impl Filter {
    pub fn new(ground: Vec<String>, members: impl IntoIterator<Item = u64>) -> Result<Self> {
        if ground.is_empty() {
            return Err(Error::Invalid("filter ground must be nonempty".into()));
        }
        if ground.len() > MAX_GROUND {
            return Err(Error::CapExceeded(format!(
                "filter grounds are capped at {MAX_GROUND} elements"
            )));
        }
        let full = full_mask(ground.len());
        let mut members: Vec<u64> = members.into_iter().collect();
        members.sort_unstable();
        members.dedup();
        if members.iter().any(|&m| m & !full != 0) {
            return Err(Error::Invalid("member is not a subset of the ground".into()));
        }
        let f = Filter { ground, members };
        f.validate()?;
        Ok(f)
    }

    fn validate(&self) -> Result<()> {
        let full = full_mask(self.ground.len());
        if !self.contains_mask(full) {
            return Err(Error::Invalid("ground set is not a member".into()));
        }
        if self.contains_mask(0) {
            return Err(Error::Invalid("the empty set is a member".into()));
        }
        // on a finite ground the filter axioms pin the family to the
        // supersets of the total intersection; for large member counts
        // checking against that shape avoids the quadratic scan
        if self.members.len() > 4096 {
            let base = self.intersection_all();
            let expected = 1u64 << (self.ground.len() as u32 - base.count_ones());
            if base == 0
                || self.members.len() as u64 != expected
                || self.members.iter().any(|&m| m & base != base)
            {
                return Err(Error::Invalid(
                    "member family is not a filter on the ground".into(),
                ));
            }
            return Ok(());
        }
        for &m in &self.members {
            // single-element steps generate all supersets
            for b in 0..self.ground.len() {
                if m >> b & 1 == 0 && !self.contains_mask(m | 1 << b) {
                    return Err(Error::Invalid(
                        "member family is not closed under supersets".into(),
                    ));
                }
            }
        }
        for &m in &self.members {
            for &k in &self.members {
                if !self.contains_mask(m & k) {
                    return Err(Error::Invalid(
                        "member family is not closed under intersections".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// The principal filter of all supersets of `base`.
    pub fn principal(ground: Vec<String>, base: u64) -> Result<Self> {
        if base == 0 {
            return Err(Error::Invalid(
                "principal filter at the empty set does not exist".into(),
            ));
        }
        let n = ground.len();
        let members = (0..=full_mask(n)).filter(|m| m & base == base);
        Filter::new(ground, members)
    }

    /// The trivial filter `{ground}`.
    pub fn trivial(ground: Vec<String>) -> Result<Self> {
        let full = full_mask(ground.len());
        Filter::new(ground, [full])
    }

    pub fn ground(&self) -> &[String] {
        &self.ground
    }

    pub fn members(&self) -> &[u64] {
        &self.members
    }

    pub fn contains_mask(&self, m: u64) -> bool {
        self.members.binary_search(&m).is_ok()
    }

    /// The intersection of all members. On a finite ground every filter is
    /// exactly the family of supersets of this set.
    pub fn intersection_all(&self) -> u64 {
        self.members
            .iter()
            .fold(full_mask(self.ground.len()), |acc, &m| acc & m)
    }

    pub fn mask_names(&self, m: u64) -> Vec<String> {
        mask_names(&self.ground, m)
    }

    pub fn subset_name(&self, m: u64) -> String {
        format!("{{{}}}", self.mask_names(m).join(","))
    }
}

pub fn full_mask(n: usize) -> u64 {
    !0u64 >> (64 - n)
}

pub fn mask_names(ground: &[String], m: u64) -> Vec<String> {
    (0..ground.len())
        .filter(|i| m >> i & 1 == 1)
        .map(|i| ground[i].clone())
        .collect()
}

/// An ultrafilter: a maximal filter. On a finite ground this is exactly a
/// principal ultrafilter; the point is recorded alongside the full member
/// set, and maximality is checked at construction rather than assumed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ultrafilter {
    filter: Filter,
    principal_point: usize,
}

impl Ultrafilter {
    pub fn new(filter: Filter) -> Result<Self> {
        if !is_ultrafilter(&filter) {
            return Err(Error::Invalid("filter is not maximal".into()));
        }
        let inter = filter.intersection_all();
        if inter.count_ones() != 1 {
            return Err(Error::Invalid(
                "finite ultrafilter must be principal at a single point".into(),
            ));
        }
        let principal_point = inter.trailing_zeros() as usize;
        Ok(Ultrafilter {
            filter,
            principal_point,
        })
    }

    /// The principal ultrafilter at one point of the ground.
    pub fn principal(ground: Vec<String>, point: usize) -> Result<Self> {
        if point >= ground.len() {
            return Err(Error::Invalid("principal point outside the ground".into()));
        }
        Ultrafilter::new(Filter::principal(ground, 1 << point)?)
    }

    /// Wraps a filter without the maximality check. Exists so that the
    /// vote-failure diagnostics of the retraction construction can be
    /// exercised against a hypothesis violation; not for regular use.
    pub fn new_unchecked(filter: Filter, principal_point: usize) -> Self {
        Ultrafilter {
            filter,
            principal_point,
        }
    }

    pub fn filter(&self) -> &Filter {
        &self.filter
    }

    pub fn ground(&self) -> &[String] {
        self.filter.ground()
    }

    pub fn principal_point(&self) -> usize {
        self.principal_point
    }

    pub fn contains_mask(&self, m: u64) -> bool {
        self.filter.contains_mask(m)
    }
}

/// Maximality via membership of each subset or its complement. (The
/// union-splitting form quantifies over pairs; over a finite ground the
/// two are equivalent, and the pair form is what the oracle tests use.)
pub fn is_ultrafilter(f: &Filter) -> bool {
    let full = full_mask(f.ground().len());
    (0..=full).all(|m| f.contains_mask(m) || f.contains_mask(full & !m))
}

/// All ultrafilters containing the given filter: on a finite ground these
/// are the principal ultrafilters at the points of the intersection of
/// all members. The result is never empty.
pub fn ultrafilters_containing(f: &Filter) -> Vec<Ultrafilter> {
    let inter = f.intersection_all();
    (0..f.ground().len())
        .filter(|p| inter >> p & 1 == 1)
        .map(|p| Ultrafilter::principal(f.ground().to_vec(), p).unwrap())
        .collect()
}

/// The final sections `↑i` of a directed preorder, as a filter basis.
pub fn final_sections_basis(p: &Preorder) -> BTreeSet<u64> {
    (0..p.len()).map(|i| p.up_set(i)).collect()
}

/// The filter generated by a filter basis: upward closure of the basis
/// (which already contains lower bounds for finite intersections).
pub fn filter_from_basis(basis: &BTreeSet<u64>, ground: Vec<String>) -> Result<Filter> {
    if basis.is_empty() {
        return Err(Error::NotABasis("basis is empty".into()));
    }
    if basis.contains(&0) {
        return Err(Error::NotABasis("basis contains the empty set".into()));
    }
    for &a in basis {
        for &b in basis {
            if !basis.iter().any(|&c| c & !(a & b) == 0) {
                return Err(Error::NotABasis(format!(
                    "no basis element below the intersection of {a:#b} and {b:#b}"
                )));
            }
        }
    }
    if ground.len() > MAX_GROUND {
        return Err(Error::CapExceeded(format!(
            "filter grounds are capped at {MAX_GROUND} elements"
        )));
    }
    let full = full_mask(ground.len());
    let members = (0..=full).filter(|&m| basis.iter().any(|&b| b & !m == 0));
    Filter::new(ground, members)
}

/// The Fréchet filter of a directed preorder: generated by its final
/// sections.
pub fn final_sections_filter(p: &Preorder) -> Result<Filter> {
    filter_from_basis(&final_sections_basis(p), p.elems().to_vec())
}

/// The co-optimal lift of a plain map out of an ultrafilter's ground: the
/// filter generated by the images of the members. It is again an
/// ultrafilter, which is verified at construction.
pub fn co_optimal_lift(
    phi: &[usize],
    target_ground: &[String],
    f: &Ultrafilter,
) -> Result<Ultrafilter> {
    if phi.len() != f.ground().len() {
        return Err(Error::GroundMismatch(
            "map is not total on the ultrafilter's ground".into(),
        ));
    }
    if phi.iter().any(|&t| t >= target_ground.len()) {
        return Err(Error::GroundMismatch("map lands outside the target".into()));
    }
    let image = |m: u64| -> u64 {
        let mut out = 0u64;
        for (i, &t) in phi.iter().enumerate() {
            if m >> i & 1 == 1 {
                out |= 1 << t;
            }
        }
        out
    };
    let images: BTreeSet<u64> = f.filter().members().iter().map(|&m| image(m)).collect();
    let full = full_mask(target_ground.len());
    let members = (0..=full).filter(|&q| images.iter().any(|&b| b & !q == 0));
    Ultrafilter::new(Filter::new(target_ground.to_vec(), members)?)
}

/// A preorder paired with an ultrafilter containing its final sections.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UffsObject {
    preorder: Preorder,
    ultra: Ultrafilter,
}

impl UffsObject {
    pub fn new(preorder: Preorder, ultra: Ultrafilter) -> Result<Self> {
        if preorder.elems() != ultra.ground() {
            return Err(Error::GroundMismatch(
                "ultrafilter ground differs from the preorder".into(),
            ));
        }
        for up in final_sections_basis(&preorder) {
            if !ultra.contains_mask(up) {
                return Err(Error::Invalid(format!(
                    "ultrafilter misses the final section {:#b}",
                    up
                )));
            }
        }
        Ok(UffsObject { preorder, ultra })
    }

    pub fn preorder(&self) -> &Preorder {
        &self.preorder
    }

    pub fn ultra(&self) -> &Ultrafilter {
        &self.ultra
    }
}

/// The morphism condition between two such objects: injective, isotone,
/// cofinal, and the co-optimal lift of the source ultrafilter is exactly
/// the target one.
pub fn uffs_morphism_check(src: &UffsObject, dst: &UffsObject, phi: &IsotoneMap) -> bool {
    phi.source() == src.preorder()
        && phi.target() == dst.preorder()
        && phi.is_injective()
        && phi.is_cofinal()
        && co_optimal_lift(phi.table(), dst.preorder().elems(), src.ultra())
            .map(|lift| &lift == dst.ultra())
            .unwrap_or(false)
}

/// A checked morphism of the category of preorder/ultrafilter pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UffsMorphism {
    src: UffsObject,
    dst: UffsObject,
    map: IsotoneMap,
}

impl UffsMorphism {
    pub fn new(src: UffsObject, dst: UffsObject, map: IsotoneMap) -> Result<Self> {
        if !uffs_morphism_check(&src, &dst, &map) {
            return Err(Error::Invalid(
                "map is not an injective cofinal isotone lift of the ultrafilter".into(),
            ));
        }
        Ok(UffsMorphism { src, dst, map })
    }

    pub fn identity(obj: &UffsObject) -> Self {
        UffsMorphism {
            src: obj.clone(),
            dst: obj.clone(),
            map: IsotoneMap::identity(obj.preorder()),
        }
    }

    pub fn src(&self) -> &UffsObject {
        &self.src
    }

    pub fn dst(&self) -> &UffsObject {
        &self.dst
    }

    pub fn map(&self) -> &IsotoneMap {
        &self.map
    }

    pub fn then(&self, g: &UffsMorphism) -> Result<UffsMorphism> {
        UffsMorphism::new(self.src.clone(), g.dst.clone(), self.map.then(&g.map)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(n: usize) -> Preorder {
        let elems: Vec<String> = (0..n).map(|i| i.to_string()).collect();
        let pairs: Vec<(String, String)> = (0..n - 1)
            .map(|i| (i.to_string(), (i + 1).to_string()))
            .collect();
        Preorder::from_generators(elems, &pairs).unwrap()
    }

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| i.to_string()).collect()
    }

    #[test]
    fn final_sections_of_chains() {
        let c = chain(2);
        let basis = final_sections_basis(&c);
        assert_eq!(basis, [0b11u64, 0b10].into());
        let single = chain(1);
        assert_eq!(final_sections_basis(&single), [0b1u64].into());
        // antichain with a top
        let p = Preorder::from_generators(
            vec!["a".into(), "b".into(), "t".into()],
            &[("a".into(), "t".into()), ("b".into(), "t".into())],
        )
        .unwrap();
        let t = p.position("t").unwrap();
        assert_eq!(p.up_set(t), 1 << t);
    }

    #[test]
    fn filter_from_basis_cases() {
        // principal basis {{1}} on {0,1}
        let f = filter_from_basis(&[0b10u64].into(), names(2)).unwrap();
        assert_eq!(f.members(), [0b10, 0b11]);
        // final sections of the 3-chain: supersets of {2}
        let c = chain(3);
        let f2 = final_sections_filter(&c).unwrap();
        assert_eq!(f2.members(), [0b100, 0b101, 0b110, 0b111]);
        // trivial basis
        let f3 = filter_from_basis(&[0b11u64].into(), names(2)).unwrap();
        assert_eq!(f3.members(), [0b11]);
        // empty-set basis rejected
        assert!(matches!(
            filter_from_basis(&[0b0u64].into(), names(2)),
            Err(Error::NotABasis(_))
        ));
        // no lower bound rejected
        assert!(matches!(
            filter_from_basis(&[0b01u64, 0b10].into(), names(2)),
            Err(Error::NotABasis(_))
        ));
    }

    #[test]
    fn ultrafilter_recognition() {
        let principal = Filter::principal(names(3), 0b010).unwrap();
        assert!(is_ultrafilter(&principal));
        let trivial = Filter::trivial(names(2)).unwrap();
        assert!(!is_ultrafilter(&trivial));
        // Fréchet filter of the 3-chain is principal at the top
        let f = final_sections_filter(&chain(3)).unwrap();
        assert!(is_ultrafilter(&f));
        assert_eq!(Ultrafilter::new(f).unwrap().principal_point(), 2);
    }

    #[test]
    fn ultrafilters_containing_cases() {
        let f = final_sections_filter(&chain(2)).unwrap();
        let us = ultrafilters_containing(&f);
        assert_eq!(us.len(), 1);
        assert_eq!(us[0].principal_point(), 1);

        let trivial = Filter::trivial(names(2)).unwrap();
        let us2 = ultrafilters_containing(&trivial);
        assert_eq!(
            us2.iter().map(|u| u.principal_point()).collect::<Vec<_>>(),
            [0, 1]
        );

        let single = Filter::trivial(names(1)).unwrap();
        assert_eq!(ultrafilters_containing(&single).len(), 1);
    }

    #[test]
    fn ultrafilters_containing_matches_brute_force() {
        // enumerate all filters on grounds of size <= 4 and compare against
        // maximal-filter enumeration from first principles
        for n in 1..=4usize {
            let full = full_mask(n);
            let all_filters: Vec<Vec<u64>> = enumerate_filters(n);
            let all_ultra: Vec<Vec<u64>> = all_filters
                .iter()
                .filter(|members| {
                    // maximal: no strictly larger filter
                    all_filters.iter().all(|other| {
                        !(members.iter().all(|m| other.contains(m))
                            && other.len() > members.len())
                    })
                })
                .cloned()
                .collect();
            for members in &all_filters {
                let f = Filter::new(names(n), members.iter().copied()).unwrap();
                let got: Vec<Vec<u64>> = ultrafilters_containing(&f)
                    .into_iter()
                    .map(|u| u.filter().members().to_vec())
                    .collect();
                let want: Vec<Vec<u64>> = all_ultra
                    .iter()
                    .filter(|u| members.iter().all(|m| u.contains(m)))
                    .cloned()
                    .collect();
                assert_eq!(got.len(), want.len());
                for u in &got {
                    assert!(want.contains(u));
                }
                assert!(!got.is_empty());
            }
            let _ = full;
        }
    }

    /// Literal filter enumeration used only as an oracle: every family of
    /// subsets satisfying the filter axioms verbatim.
    fn enumerate_filters(n: usize) -> Vec<Vec<u64>> {
        let full = full_mask(n);
        let subsets: Vec<u64> = (0..=full).collect();
        let mut out = Vec::new();
        // a candidate family is a subset of the 2^n subsets
        for fam in 0u64..(1 << subsets.len()) {
            let members: Vec<u64> = subsets
                .iter()
                .enumerate()
                .filter(|(k, _)| fam >> k & 1 == 1)
                .map(|(_, &m)| m)
                .collect();
            if members.is_empty() || members.contains(&0) || !members.contains(&full) {
                continue;
            }
            let has = |m: u64| members.contains(&m);
            let inter_ok = members.iter().all(|&a| members.iter().all(|&b| has(a & b)));
            let up_ok = members
                .iter()
                .all(|&a| (0..=full).all(|b| a & !b != 0 || has(b)));
            if inter_ok && up_ok {
                out.push(members);
            }
        }
        out
    }

    #[test]
    fn pairwise_union_splitting_matches() {
        // the union-splitting pair characterization against the complement
        // form, for all filters on a 3-element ground
        for members in enumerate_filters(3) {
            let f = Filter::new(names(3), members).unwrap();
            let full = full_mask(3);
            let pairs = (0..=full).all(|j| {
                (0..=full).all(|k| {
                    !f.contains_mask(j | k) || f.contains_mask(j) || f.contains_mask(k)
                })
            });
            assert_eq!(pairs, is_ultrafilter(&f));
        }
    }

    #[test]
    fn co_optimal_lift_cases() {
        let u = Ultrafilter::principal(names(2), 1).unwrap();
        // identity
        let lifted = co_optimal_lift(&[0, 1], &names(2), &u).unwrap();
        assert_eq!(&lifted, &u);
        // map 1 -> x of a 3-element target
        let lifted2 = co_optimal_lift(&[0, 2], &names(3), &u).unwrap();
        assert_eq!(lifted2.principal_point(), 2);
        assert!(is_ultrafilter(lifted2.filter()));
    }

    #[test]
    fn co_optimal_lift_functorial_small() {
        // all composable maps between grounds of size <= 3
        for n1 in 1..=3usize {
            for n2 in 1..=3usize {
                for n3 in 1..=3usize {
                    for phi_code in 0..n2.pow(n1 as u32) {
                        let phi: Vec<usize> =
                            (0..n1).map(|i| phi_code / n2.pow(i as u32) % n2).collect();
                        for psi_code in 0..n3.pow(n2 as u32) {
                            let psi: Vec<usize> = (0..n2)
                                .map(|i| psi_code / n3.pow(i as u32) % n3)
                                .collect();
                            let comp: Vec<usize> = phi.iter().map(|&t| psi[t]).collect();
                            for p in 0..n1 {
                                let f = Ultrafilter::principal(names(n1), p).unwrap();
                                let one = co_optimal_lift(&comp, &names(n3), &f).unwrap();
                                let two = co_optimal_lift(
                                    &psi,
                                    &names(n3),
                                    &co_optimal_lift(&phi, &names(n2), &f).unwrap(),
                                )
                                .unwrap();
                                assert_eq!(one, two);
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn uffs_morphism_cases() {
        let c3 = chain(3);
        let top = Ultrafilter::principal(names(3), 2).unwrap();
        let obj3 = UffsObject::new(c3.clone(), top).unwrap();
        // identity is a morphism
        assert!(uffs_morphism_check(
            &obj3,
            &obj3,
            &IsotoneMap::identity(&c3)
        ));

        // inclusion of the 2-chain at the bottom is not cofinal
        let c2 = chain(2);
        let u2 = Ultrafilter::principal(names(2), 1).unwrap();
        let obj2 = UffsObject::new(c2.clone(), u2).unwrap();
        let low = IsotoneMap::from_names(
            c2.clone(),
            c3.clone(),
            &[("0".into(), "0".into()), ("1".into(), "1".into())],
        )
        .unwrap();
        assert!(!uffs_morphism_check(&obj2, &obj3, &low));

        // inclusion of the tail {1,2} with matching principal points
        let (tail, _) = c3.restrict(c3.up_set(1)).unwrap();
        let tail_top =
            Ultrafilter::principal(tail.elems().to_vec(), tail.position("2").unwrap())
                .unwrap();
        let tail_obj = UffsObject::new(tail.clone(), tail_top).unwrap();
        let inc = IsotoneMap::from_names(
            tail,
            c3,
            &[("1".into(), "1".into()), ("2".into(), "2".into())],
        )
        .unwrap();
        assert!(uffs_morphism_check(&tail_obj, &obj3, &inc));
        UffsMorphism::new(tail_obj, obj3, inc).unwrap();
    }

    #[test]
    fn uffs_object_requires_final_sections() {
        let c2 = chain(2);
        let bottom = Ultrafilter::principal(names(2), 0).unwrap();
        assert!(UffsObject::new(c2, bottom).is_err());
    }
}

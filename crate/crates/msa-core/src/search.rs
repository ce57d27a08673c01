//! Brute-force searches over finite algebras: isomorphism backtracking,
//! homomorphism enumeration, and congruence generation from pair sets.

use std::collections::BTreeMap;

use crate::algebra::{is_homomorphism, Algebra, Congruence, Homomorphism};
use crate::error::{Error, Result};
use crate::sorted::{all_mappings, SortId, SortedEquivalence, SortedMapping};

/// Default node cap for the isomorphism search.
pub const DEFAULT_ISO_CAP: usize = 1_000_000;

/// Default cap on the number of enumerated mappings.
pub const DEFAULT_HOM_CAP: usize = 1_000_000;

/// Searches for an isomorphism by backtracking over sortwise bijections,
/// pruned by carrier sizes and by checking each operation as soon as all
/// the sorts it mentions are assigned. Returns the lexicographically least
/// bijection in canonical element order, or `None`.
///
/// `cap` bounds the number of per-sort bijections tried; exceeding it is
/// an error, not a silent `None`.
pub fn find_isomorphism(
    a: &Algebra,
    b: &Algebra,
    cap: usize,
) -> Result<Option<Homomorphism>> {
    if a.signature() != b.signature() {
        return Err(Error::SignatureMismatch(
            "isomorphism search across different signatures".into(),
        ));
    }
    let sorts: Vec<SortId> = a.carrier().sorts().to_vec();
    for s in &sorts {
        if a.carrier().carrier(s).len() != b.carrier().carrier(s).len() {
            return Ok(None);
        }
    }
    // ops become checkable at the level where their last mentioned sort
    // (in assignment order) is assigned
    let level_of = |s: &SortId| sorts.iter().position(|x| x == s).unwrap();
    let mut ops_at_level: Vec<Vec<String>> = vec![Vec::new(); sorts.len().max(1)];
    for (op, ar) in a.signature().ops() {
        let lvl = ar
            .word
            .iter()
            .chain([&ar.result])
            .map(level_of)
            .max()
            .unwrap_or(0);
        if !sorts.is_empty() {
            ops_at_level[lvl].push(op.clone());
        }
    }

    struct Ctx<'x> {
        a: &'x Algebra,
        b: &'x Algebra,
        sorts: Vec<SortId>,
        ops_at_level: Vec<Vec<String>>,
        nodes: usize,
        cap: usize,
    }

    fn ops_ok(ctx: &Ctx, assigned: &BTreeMap<SortId, Vec<u32>>, lvl: usize) -> bool {
        for op in &ctx.ops_at_level[lvl] {
            let ar = &ctx.a.signature().ops()[op];
            let space_a = ctx.a.space(op);
            let space_b = ctx.b.space(op);
            let table_a = ctx.a.table(op);
            let table_b = ctx.b.table(op);
            let mut coords = Vec::new();
            let mut mapped = vec![0usize; ar.word.len()];
            for raw in 0..space_a.size {
                space_a.decode(raw, &mut coords);
                for (k, &c) in coords.iter().enumerate() {
                    mapped[k] = assigned[&ar.word[k]][c] as usize;
                }
                let lhs = assigned[&ar.result][table_a[raw] as usize];
                if lhs != table_b[space_b.encode(&mapped)] {
                    return false;
                }
            }
        }
        true
    }

    fn dfs(
        ctx: &mut Ctx,
        lvl: usize,
        assigned: &mut BTreeMap<SortId, Vec<u32>>,
    ) -> Result<bool> {
        if lvl == ctx.sorts.len() {
            return Ok(true);
        }
        let s = ctx.sorts[lvl].clone();
        let n = ctx.a.carrier().carrier(&s).len();
        let mut perm: Vec<u32> = (0..n as u32).collect();
        loop {
            ctx.nodes += 1;
            if ctx.nodes > ctx.cap {
                return Err(Error::CapExceeded(format!(
                    "isomorphism search exceeded {} nodes",
                    ctx.cap
                )));
            }
            assigned.insert(s.clone(), perm.clone());
            if ops_ok(ctx, assigned, lvl) && dfs(ctx, lvl + 1, assigned)? {
                return Ok(true);
            }
            if !next_permutation(&mut perm) {
                break;
            }
        }
        assigned.remove(&s);
        Ok(false)
    }

    let mut ctx = Ctx {
        a,
        b,
        sorts: sorts.clone(),
        ops_at_level,
        nodes: 0,
        cap,
    };
    let mut assigned = BTreeMap::new();
    if !dfs(&mut ctx, 0, &mut assigned)? {
        return Ok(None);
    }
    let map = SortedMapping::from_positions(
        a.carrier().clone(),
        b.carrier().clone(),
        assigned,
    )?;
    let iso = Homomorphism::new(a.clone(), b.clone(), map)?;
    // the inverse of a bijective homomorphism between total finite
    // algebras is again one; verified rather than assumed
    iso.inverse()?;
    Ok(Some(iso))
}

/// Lexicographic next-permutation step; false when wrapped around.
fn next_permutation(perm: &mut [u32]) -> bool {
    if perm.len() < 2 {
        return false;
    }
    let mut i = perm.len() - 1;
    while i > 0 && perm[i - 1] >= perm[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = perm.len() - 1;
    while perm[j] <= perm[i - 1] {
        j -= 1;
    }
    perm.swap(i - 1, j);
    perm[i..].reverse();
    true
}

/// Enumerates every homomorphism from `a` to `b`, in canonical order. The
/// cap bounds the number of candidate mappings `∏_s |B_s|^|A_s|`.
pub fn all_homomorphisms(a: &Algebra, b: &Algebra, cap: usize) -> Result<Vec<Homomorphism>> {
    if a.signature() != b.signature() {
        return Err(Error::SignatureMismatch(
            "homomorphism enumeration across different signatures".into(),
        ));
    }
    let mut out = Vec::new();
    for map in all_mappings(a.carrier(), b.carrier(), cap)? {
        if is_homomorphism(&map, a, b)? {
            out.push(Homomorphism::new(a.clone(), b.clone(), map)?);
        }
    }
    Ok(out)
}

/// Union-find over positions of one carrier.
#[derive(Debug, Clone)]
pub(crate) struct UnionFind {
    parent: Vec<u32>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n as u32).collect(),
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] as usize != x {
            let up = self.parent[x] as usize;
            self.parent[x] = self.parent[up];
            x = up;
        }
        x
    }

    /// Unions two classes, keeping the smaller root as representative.
    pub fn union(&mut self, x: usize, y: usize) -> bool {
        let (rx, ry) = (self.find(x), self.find(y));
        if rx == ry {
            return false;
        }
        let (lo, hi) = (rx.min(ry), rx.max(ry));
        self.parent[hi] = lo as u32;
        true
    }

    /// Blocks of the partition, ordered by least member.
    pub fn blocks(&mut self) -> Vec<Vec<u32>> {
        let n = self.parent.len();
        let mut by_root: BTreeMap<usize, Vec<u32>> = BTreeMap::new();
        for x in 0..n {
            let r = self.find(x);
            by_root.entry(r).or_default().push(x as u32);
        }
        by_root.into_values().collect()
    }
}

/// The least congruence containing the given pairs: union-find seeded with
/// the pairs, then operation tables propagated to a fixpoint. A test
/// fixture utility.
pub fn congruence_generated_by(
    a: &Algebra,
    pairs: &[(SortId, String, String)],
) -> Result<Congruence> {
    let mut uf: BTreeMap<SortId, UnionFind> = a
        .carrier()
        .sorts()
        .iter()
        .map(|s| (s.clone(), UnionFind::new(a.carrier().carrier(s).len())))
        .collect();
    for (s, x, y) in pairs {
        let p = a
            .carrier()
            .position(s, x)
            .ok_or_else(|| Error::Invalid(format!("{x} not in carrier at {s}")))?;
        let q = a
            .carrier()
            .position(s, y)
            .ok_or_else(|| Error::Invalid(format!("{y} not in carrier at {s}")))?;
        uf.get_mut(s).unwrap().union(p, q);
    }
    // propagate: tuples with pairwise-related coordinates must have
    // related results; group tuples by class vector and union the results
    loop {
        let mut changed = false;
        for (op, ar) in a.signature().ops() {
            let space = a.space(op);
            let table = a.table(op);
            let mut groups: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
            let mut coords = Vec::new();
            for raw in 0..space.size {
                space.decode(raw, &mut coords);
                let key: Vec<usize> = coords
                    .iter()
                    .enumerate()
                    .map(|(k, &c)| uf.get_mut(&ar.word[k]).unwrap().find(c))
                    .collect();
                let res = table[raw] as usize;
                match groups.get(&key) {
                    None => {
                        groups.insert(key, res);
                    }
                    Some(&prev) => {
                        changed |= uf.get_mut(&ar.result).unwrap().union(prev, res);
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    let blocks = uf
        .iter_mut()
        .map(|(s, u)| (s.clone(), u.blocks()))
        .collect();
    let eq = SortedEquivalence::from_blocks(a.carrier().clone(), blocks)?;
    Congruence::new(a.clone(), eq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{Algebra, Arity, OpRows, Signature};
    use crate::sorted::{SortedSet, SortId};

    fn sid(s: &str) -> SortId {
        SortId::new(s)
    }

    fn unary(names: &[&str], images: &[&str]) -> Algebra {
        let sig = Signature::new(
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
        .unwrap();
        let carrier = SortedSet::new(
            vec![sid("s")],
            [(sid("s"), names.iter().map(|n| n.to_string()).collect())].into(),
        )
        .unwrap();
        let rows: OpRows = [(
            "f".to_string(),
            names
                .iter()
                .zip(images)
                .map(|(n, i)| (vec![n.to_string()], i.to_string()))
                .collect(),
        )]
        .into();
        Algebra::from_rows(sig, carrier, &rows).unwrap()
    }

    #[test]
    fn iso_with_itself_is_identity() {
        let a = unary(&["0", "1"], &["1", "0"]);
        let iso = find_isomorphism(&a, &a, DEFAULT_ISO_CAP).unwrap().unwrap();
        assert_eq!(iso.map(), Homomorphism::identity(&a).map());
    }

    #[test]
    fn iso_respects_carrier_sizes() {
        let a = unary(&["0", "1"], &["1", "0"]);
        let b = unary(&["0"], &["0"]);
        assert!(find_isomorphism(&a, &b, DEFAULT_ISO_CAP).unwrap().is_none());
    }

    #[test]
    fn iso_found_between_swaps() {
        let a = unary(&["0", "1"], &["1", "0"]);
        let b = unary(&["a", "b"], &["b", "a"]);
        let iso = find_isomorphism(&a, &b, DEFAULT_ISO_CAP).unwrap().unwrap();
        assert_eq!(iso.map().apply(&sid("s"), "0"), Some("a"));
        assert_eq!(iso.map().apply(&sid("s"), "1"), Some("b"));
    }

    #[test]
    fn iso_absent_between_different_structures() {
        let a = unary(&["0", "1"], &["1", "0"]); // swap
        let b = unary(&["0", "1"], &["0", "1"]); // identity
        assert!(find_isomorphism(&a, &b, DEFAULT_ISO_CAP).unwrap().is_none());
    }

    #[test]
    fn iso_is_symmetric_and_matches_brute_force() {
        let shapes: Vec<Vec<&str>> = vec![
            vec!["0", "0", "0"],
            vec!["0", "0", "1"],
            vec!["1", "0", "0"],
            vec!["1", "2", "0"],
            vec!["1", "1", "2"],
        ];
        let algebras: Vec<Algebra> = shapes
            .iter()
            .map(|im| unary(&["0", "1", "2"], im))
            .collect();
        for a in &algebras {
            for b in &algebras {
                let ab = find_isomorphism(a, b, DEFAULT_ISO_CAP).unwrap().is_some();
                let ba = find_isomorphism(b, a, DEFAULT_ISO_CAP).unwrap().is_some();
                assert_eq!(ab, ba);
                // brute force over all bijections
                let brute = all_mappings(a.carrier(), b.carrier(), 10_000)
                    .unwrap()
                    .into_iter()
                    .filter(|m| m.is_bijective())
                    .any(|m| is_homomorphism(&m, a, b).unwrap());
                assert_eq!(ab, brute);
            }
        }
    }

    #[test]
    fn cap_is_enforced() {
        let a = unary(&["0", "1", "2"], &["0", "1", "2"]);
        let b = unary(&["0", "1", "2"], &["1", "2", "0"]);
        assert!(matches!(
            find_isomorphism(&a, &b, 2),
            Err(Error::CapExceeded(_))
        ));
    }

    #[test]
    fn hom_enumeration_counts() {
        let a = unary(&["0", "1"], &["0", "1"]); // identity action
        let homs = all_homomorphisms(&a, &a, DEFAULT_HOM_CAP).unwrap();
        // every mapping commutes with the identity op
        assert_eq!(homs.len(), 4);
    }

    #[test]
    fn generated_congruence_propagates() {
        // f: 0->1, 1->2, 2->2; identifying 0~1 forces 1~2
        let a = unary(&["0", "1", "2"], &["1", "2", "2"]);
        let cong =
            congruence_generated_by(&a, &[(sid("s"), "0".to_string(), "1".to_string())])
                .unwrap();
        assert_eq!(cong.eq().blocks(&sid("s")).len(), 1);
    }
}

//! S-sorted sets and S-sorted mappings.
//!
//! A sorted set assigns a finite carrier to every sort of a fixed sort
//! universe; carriers may be empty, and emptiness at individual sorts is
//! what the support bookkeeping of the rest of the crate is about. All
//! carriers are kept sorted lexicographically so that products, quotients
//! and reports are deterministic.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};

/// Reserved element identifier of the final sorted set.
pub const STAR: &str = "⋆";

/// An interned sort name, unique within one instance universe.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SortId(String);

impl SortId {
    pub fn new(name: impl Into<String>) -> Self {
        SortId(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SortId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for SortId {
    fn from(s: &str) -> Self {
        SortId::new(s)
    }
}

/// A finite S-sorted set: one carrier per sort, in canonical order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SortedSet {
    sorts: Vec<SortId>,
    carriers: BTreeMap<SortId, Vec<String>>,
}

impl SortedSet {
    /// Builds a sorted set, sorting each carrier into canonical order.
    /// Sorts missing from `carriers` get an empty carrier; duplicate
    /// elements within a carrier are rejected.
    pub fn new(
        sorts: Vec<SortId>,
        carriers: BTreeMap<SortId, Vec<String>>,
    ) -> Result<Self> {
        let sort_set: BTreeSet<&SortId> = sorts.iter().collect();
        if sort_set.len() != sorts.len() {
            return Err(Error::Invalid("duplicate sort in sort universe".into()));
        }
        for s in carriers.keys() {
            if !sort_set.contains(s) {
                return Err(Error::Invalid(format!(
                    "carrier declared for unknown sort {s}"
                )));
            }
        }
        let mut canon = BTreeMap::new();
        for s in &sorts {
            let mut v = carriers.get(s).cloned().unwrap_or_default();
            v.sort();
            if v.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Invalid(format!(
                    "duplicate element in carrier at sort {s}"
                )));
            }
            canon.insert(s.clone(), v);
        }
        Ok(SortedSet {
            sorts,
            carriers: canon,
        })
    }

    /// The initial sorted set: every carrier empty.
    pub fn initial(sorts: Vec<SortId>) -> Self {
        let carriers = sorts.iter().map(|s| (s.clone(), Vec::new())).collect();
        SortedSet { sorts, carriers }
    }

    /// The final sorted set `1`: the single element `⋆` at every sort.
    pub fn final_set(sorts: Vec<SortId>) -> Self {
        let carriers = sorts
            .iter()
            .map(|s| (s.clone(), vec![STAR.to_string()]))
            .collect();
        SortedSet { sorts, carriers }
    }

    pub fn sorts(&self) -> &[SortId] {
        &self.sorts
    }

    pub fn carrier(&self, s: &SortId) -> &[String] {
        self.carriers
            .get(s)
            .map(|v| v.as_slice())
            .unwrap_or_else(|| panic!("unknown sort {s}"))
    }

    /// Position of `name` in the carrier at `s`, if present.
    pub fn position(&self, s: &SortId, name: &str) -> Option<usize> {
        self.carrier(s)
            .binary_search_by(|e| e.as_str().cmp(name))
            .ok()
    }

    pub fn has_sort(&self, s: &SortId) -> bool {
        self.carriers.contains_key(s)
    }

    /// The support: sorts with a nonempty carrier.
    pub fn support(&self) -> BTreeSet<SortId> {
        self.sorts
            .iter()
            .filter(|s| !self.carrier(s).is_empty())
            .cloned()
            .collect()
    }

    /// True when every carrier is empty.
    pub fn is_initial(&self) -> bool {
        self.sorts.iter().all(|s| self.carrier(s).is_empty())
    }

    /// Total number of elements, over all sorts.
    pub fn total_size(&self) -> usize {
        self.sorts.iter().map(|s| self.carrier(s).len()).sum()
    }

    /// Sortwise subset test (requires the same sort universe).
    pub fn is_subset_of(&self, other: &SortedSet) -> bool {
        self.sorts == other.sorts
            && self.sorts.iter().all(|s| {
                self.carrier(s)
                    .iter()
                    .all(|e| other.position(s, e).is_some())
            })
    }

    /// Replaces the carrier at one sort; used by constructions that carve
    /// subsets out of an existing set.
    pub(crate) fn with_carrier(&self, s: &SortId, elems: Vec<String>) -> Self {
        let mut out = self.clone();
        out.carriers.insert(s.clone(), elems);
        out
    }
}

/// Support of a sorted set (free-function form of [`SortedSet::support`]).
pub fn support(a: &SortedSet) -> BTreeSet<SortId> {
    a.support()
}

/// A total S-sorted mapping, tabulated positionally per sort.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SortedMapping {
    source: SortedSet,
    target: SortedSet,
    tables: BTreeMap<SortId, Vec<u32>>,
}

impl SortedMapping {
    /// Builds a mapping from per-sort position tables. Each table must be
    /// total on the source carrier and land in the target carrier.
    pub fn from_positions(
        source: SortedSet,
        target: SortedSet,
        tables: BTreeMap<SortId, Vec<u32>>,
    ) -> Result<Self> {
        if source.sorts() != target.sorts() {
            return Err(Error::SourceMismatch(
                "source and target have different sort universes".into(),
            ));
        }
        for s in source.sorts() {
            let table = tables
                .get(s)
                .ok_or_else(|| Error::Invalid(format!("missing table at sort {s}")))?;
            if table.len() != source.carrier(s).len() {
                return Err(Error::Invalid(format!(
                    "table at sort {s} is not total: {} entries for {} elements",
                    table.len(),
                    source.carrier(s).len()
                )));
            }
            let n = target.carrier(s).len();
            if table.iter().any(|&t| t as usize >= n) {
                return Err(Error::Invalid(format!(
                    "table at sort {s} maps outside the target carrier"
                )));
            }
        }
        Ok(SortedMapping {
            source,
            target,
            tables,
        })
    }

    /// Builds a mapping from name pairs per sort.
    pub fn from_names(
        source: SortedSet,
        target: SortedSet,
        names: &BTreeMap<SortId, Vec<(String, String)>>,
    ) -> Result<Self> {
        let mut tables = BTreeMap::new();
        for s in source.sorts() {
            let mut table: Vec<Option<u32>> = vec![None; source.carrier(s).len()];
            if let Some(pairs) = names.get(s) {
                for (from, to) in pairs {
                    let p = source.position(s, from).ok_or_else(|| {
                        Error::Invalid(format!("{from} is not in the source carrier at {s}"))
                    })?;
                    let q = target.position(s, to).ok_or_else(|| {
                        Error::Invalid(format!("{to} is not in the target carrier at {s}"))
                    })?;
                    if table[p].is_some() {
                        return Err(Error::Invalid(format!(
                            "{from} is mapped twice at sort {s}"
                        )));
                    }
                    table[p] = Some(q as u32);
                }
            }
            let table: Option<Vec<u32>> = table.into_iter().collect();
            let table = table.ok_or_else(|| {
                Error::Invalid(format!("table at sort {s} is not total"))
            })?;
            tables.insert(s.clone(), table);
        }
        SortedMapping::from_positions(source, target, tables)
    }

    pub fn identity(set: &SortedSet) -> Self {
        let tables = set
            .sorts()
            .iter()
            .map(|s| {
                (
                    s.clone(),
                    (0..set.carrier(s).len() as u32).collect::<Vec<_>>(),
                )
            })
            .collect();
        SortedMapping {
            source: set.clone(),
            target: set.clone(),
            tables,
        }
    }

    /// The inclusion of a sortwise subset into a superset.
    pub fn inclusion(sub: &SortedSet, sup: &SortedSet) -> Result<Self> {
        if !sub.is_subset_of(sup) {
            return Err(Error::NotSubset(
                "inclusion source is not a subset of the target".into(),
            ));
        }
        let tables = sub
            .sorts()
            .iter()
            .map(|s| {
                let table = sub
                    .carrier(s)
                    .iter()
                    .map(|e| sup.position(s, e).unwrap() as u32)
                    .collect();
                (s.clone(), table)
            })
            .collect();
        Ok(SortedMapping {
            source: sub.clone(),
            target: sup.clone(),
            tables,
        })
    }

    /// A constant mapping onto one chosen target element per supported
    /// sort. Fails when the source is supported at a sort the target is
    /// not, or when no value is given for a supported sort.
    pub fn constant(
        source: &SortedSet,
        target: &SortedSet,
        values: &BTreeMap<SortId, String>,
    ) -> Result<Self> {
        let mut tables = BTreeMap::new();
        for s in source.sorts() {
            let n = source.carrier(s).len();
            if n == 0 {
                tables.insert(s.clone(), Vec::new());
                continue;
            }
            let v = values
                .get(s)
                .ok_or_else(|| Error::Invalid(format!("no constant value at sort {s}")))?;
            let q = target
                .position(s, v)
                .ok_or_else(|| Error::Invalid(format!("{v} not in target at {s}")))?
                as u32;
            tables.insert(s.clone(), vec![q; n]);
        }
        SortedMapping::from_positions(source.clone(), target.clone(), tables)
    }

    pub fn source(&self) -> &SortedSet {
        &self.source
    }

    pub fn target(&self) -> &SortedSet {
        &self.target
    }

    pub fn apply_pos(&self, s: &SortId, pos: usize) -> usize {
        self.tables[s][pos] as usize
    }

    pub fn apply(&self, s: &SortId, name: &str) -> Option<&str> {
        let p = self.source.position(s, name)?;
        Some(&self.target.carrier(s)[self.apply_pos(s, p)])
    }

    pub fn table(&self, s: &SortId) -> &[u32] {
        &self.tables[s]
    }

    /// Composition `g ∘ self` (apply `self` first, then `g`).
    pub fn then(&self, g: &SortedMapping) -> Result<SortedMapping> {
        if self.target != g.source {
            return Err(Error::SourceMismatch(
                "composition: target of the first mapping differs from the source of the second"
                    .into(),
            ));
        }
        let tables = self
            .source
            .sorts()
            .iter()
            .map(|s| {
                let table = self.tables[s]
                    .iter()
                    .map(|&p| g.tables[s][p as usize])
                    .collect();
                (s.clone(), table)
            })
            .collect();
        Ok(SortedMapping {
            source: self.source.clone(),
            target: g.target.clone(),
            tables,
        })
    }

    pub fn is_surjective(&self) -> bool {
        self.source.sorts().iter().all(|s| {
            let n = self.target.carrier(s).len();
            let mut hit = vec![false; n];
            for &t in &self.tables[s] {
                hit[t as usize] = true;
            }
            hit.into_iter().all(|h| h)
        })
    }

    pub fn is_injective(&self) -> bool {
        self.source.sorts().iter().all(|s| {
            let mut seen = BTreeSet::new();
            self.tables[s].iter().all(|&t| seen.insert(t))
        })
    }

    pub fn is_bijective(&self) -> bool {
        self.is_injective() && self.is_surjective()
    }

    /// The inverse of a bijective mapping.
    pub fn inverse(&self) -> Result<SortedMapping> {
        if !self.is_bijective() {
            return Err(Error::Invalid("mapping is not bijective".into()));
        }
        let tables = self
            .source
            .sorts()
            .iter()
            .map(|s| {
                let mut inv = vec![0u32; self.tables[s].len()];
                for (p, &q) in self.tables[s].iter().enumerate() {
                    inv[q as usize] = p as u32;
                }
                (s.clone(), inv)
            })
            .collect();
        Ok(SortedMapping {
            source: self.target.clone(),
            target: self.source.clone(),
            tables,
        })
    }
}

/// An S-sorted equivalence: a partition of each carrier into blocks.
/// Blocks are canonicalized (sorted within and by least member), so equal
/// equivalences compare equal structurally.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SortedEquivalence {
    base: SortedSet,
    blocks: BTreeMap<SortId, Vec<Vec<u32>>>,
    class_of: BTreeMap<SortId, Vec<u32>>,
}

impl SortedEquivalence {
    /// Builds an equivalence from per-sort blocks of element positions.
    /// Blocks must be nonempty, disjoint, and cover the carrier.
    pub fn from_blocks(
        base: SortedSet,
        blocks: BTreeMap<SortId, Vec<Vec<u32>>>,
    ) -> Result<Self> {
        let mut canon_blocks = BTreeMap::new();
        let mut class_of = BTreeMap::new();
        for s in base.sorts() {
            let n = base.carrier(s).len();
            let mut bs = blocks.get(s).cloned().unwrap_or_default();
            for b in &mut bs {
                b.sort_unstable();
                if b.is_empty() {
                    return Err(Error::PartitionMismatch(format!("empty block at {s}")));
                }
            }
            bs.sort_by_key(|b| b[0]);
            let mut seen = vec![false; n];
            for b in &bs {
                for &p in b {
                    if p as usize >= n || seen[p as usize] {
                        return Err(Error::PartitionMismatch(format!(
                            "blocks at {s} are not a partition of the carrier"
                        )));
                    }
                    seen[p as usize] = true;
                }
            }
            if seen.iter().any(|&x| !x) {
                return Err(Error::PartitionMismatch(format!(
                    "blocks at {s} do not cover the carrier"
                )));
            }
            let mut cls = vec![0u32; n];
            for (k, b) in bs.iter().enumerate() {
                for &p in b {
                    cls[p as usize] = k as u32;
                }
            }
            canon_blocks.insert(s.clone(), bs);
            class_of.insert(s.clone(), cls);
        }
        Ok(SortedEquivalence {
            base,
            blocks: canon_blocks,
            class_of,
        })
    }

    /// Builds an equivalence from blocks of element names.
    pub fn from_named_blocks(
        base: SortedSet,
        named: &BTreeMap<SortId, Vec<Vec<String>>>,
    ) -> Result<Self> {
        let mut blocks = BTreeMap::new();
        for (s, bs) in named {
            let mut out = Vec::new();
            for b in bs {
                let mut blk = Vec::new();
                for e in b {
                    let p = base.position(s, e).ok_or_else(|| {
                        Error::PartitionMismatch(format!("{e} not in carrier at {s}"))
                    })?;
                    blk.push(p as u32);
                }
                out.push(blk);
            }
            blocks.insert(s.clone(), out);
        }
        SortedEquivalence::from_blocks(base, blocks)
    }

    /// The discrete (identity) equivalence.
    pub fn discrete(base: &SortedSet) -> Self {
        let blocks = base
            .sorts()
            .iter()
            .map(|s| {
                (
                    s.clone(),
                    (0..base.carrier(s).len() as u32).map(|p| vec![p]).collect(),
                )
            })
            .collect();
        SortedEquivalence::from_blocks(base.clone(), blocks).unwrap()
    }

    /// The total equivalence: one block per nonempty carrier.
    pub fn total(base: &SortedSet) -> Self {
        let blocks = base
            .sorts()
            .iter()
            .map(|s| {
                let n = base.carrier(s).len() as u32;
                let bs = if n == 0 { vec![] } else { vec![(0..n).collect()] };
                (s.clone(), bs)
            })
            .collect();
        SortedEquivalence::from_blocks(base.clone(), blocks).unwrap()
    }

    pub fn base(&self) -> &SortedSet {
        &self.base
    }

    pub fn blocks(&self, s: &SortId) -> &[Vec<u32>] {
        &self.blocks[s]
    }

    pub fn class_of_pos(&self, s: &SortId, pos: usize) -> usize {
        self.class_of[s][pos] as usize
    }

    pub fn related_pos(&self, s: &SortId, x: usize, y: usize) -> bool {
        self.class_of[s][x] == self.class_of[s][y]
    }

    pub fn related(&self, s: &SortId, x: &str, y: &str) -> Option<bool> {
        let p = self.base.position(s, x)?;
        let q = self.base.position(s, y)?;
        Some(self.related_pos(s, p, q))
    }

    /// `self ⊆ other` blockwise: every block of `self` sits inside a
    /// block of `other`.
    pub fn refines(&self, other: &SortedEquivalence) -> bool {
        self.base == other.base
            && self.base.sorts().iter().all(|s| {
                self.blocks[s]
                    .iter()
                    .all(|b| b.iter().all(|&p| other.class_of[s][p as usize] == other.class_of[s][b[0] as usize]))
            })
    }
}

/// An I-indexed family of sorted sets over one sort universe.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexedFamily {
    index: Vec<String>,
    members: Vec<SortedSet>,
}

impl IndexedFamily {
    pub fn new(index: Vec<String>, members: Vec<SortedSet>) -> Result<Self> {
        if index.len() != members.len() {
            return Err(Error::Invalid(
                "index and member counts differ".into(),
            ));
        }
        if let Some(first) = members.first() {
            if members.iter().any(|m| m.sorts() != first.sorts()) {
                return Err(Error::Invalid(
                    "family members have different sort universes".into(),
                ));
            }
        }
        Ok(IndexedFamily { index, members })
    }

    pub fn index(&self) -> &[String] {
        &self.index
    }

    pub fn members(&self) -> &[SortedSet] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Mixed-radix tuple index; the first coordinate is most significant.
#[derive(Debug, Clone)]
pub(crate) struct TupleSpace {
    pub dims: Vec<usize>,
    pub size: usize,
}

impl TupleSpace {
    pub fn new(dims: Vec<usize>) -> Self {
        // empty product is 1; any zero dimension gives an empty space
        let size = dims.iter().product();
        TupleSpace { dims, size }
    }

    pub fn encode(&self, coords: &[usize]) -> usize {
        debug_assert_eq!(coords.len(), self.dims.len());
        let mut idx = 0;
        for (c, d) in coords.iter().zip(&self.dims) {
            idx = idx * d + c;
        }
        idx
    }

    pub fn decode(&self, mut idx: usize, out: &mut Vec<usize>) {
        out.clear();
        out.resize(self.dims.len(), 0);
        for k in (0..self.dims.len()).rev() {
            out[k] = idx % self.dims[k];
            idx /= self.dims[k];
        }
    }
}

/// Product of a family plus the per-sort coordinate bookkeeping used by
/// algebra constructions.
#[derive(Debug, Clone)]
pub(crate) struct ProductData {
    pub set: SortedSet,
    pub projections: Vec<SortedMapping>,
    /// Per sort: tuple space over the member carriers and a map from raw
    /// mixed-radix index to the final (name-sorted) carrier position.
    pub spaces: BTreeMap<SortId, (TupleSpace, Vec<u32>)>,
}

impl ProductData {
    pub fn encode(&self, s: &SortId, coords: &[usize]) -> usize {
        let (space, raw_to_final) = &self.spaces[s];
        raw_to_final[space.encode(coords)] as usize
    }

    /// Coordinate of product element `pos` in member `i`.
    pub fn coord(&self, i: usize, s: &SortId, pos: usize) -> usize {
        self.projections[i].apply_pos(s, pos)
    }
}

pub(crate) fn product_data(family: &IndexedFamily, sorts: &[SortId]) -> ProductData {
    if family.is_empty() {
        let set = SortedSet::final_set(sorts.to_vec());
        let spaces = sorts
            .iter()
            .map(|s| (s.clone(), (TupleSpace::new(Vec::new()), vec![0u32])))
            .collect();
        return ProductData {
            set,
            projections: Vec::new(),
            spaces,
        };
    }
    let members = family.members();
    let sorts = members[0].sorts().to_vec();
    let mut carriers = BTreeMap::new();
    let mut spaces = BTreeMap::new();
    let mut proj_tables: Vec<BTreeMap<SortId, Vec<u32>>> =
        vec![BTreeMap::new(); members.len()];
    for s in &sorts {
        let dims: Vec<usize> = members.iter().map(|m| m.carrier(s).len()).collect();
        let space = TupleSpace::new(dims);
        let mut names = Vec::with_capacity(space.size);
        let mut coords = Vec::new();
        for raw in 0..space.size {
            space.decode(raw, &mut coords);
            let parts: Vec<&str> = coords
                .iter()
                .enumerate()
                .map(|(i, &c)| members[i].carrier(s)[c].as_str())
                .collect();
            names.push((format!("({})", parts.join(",")), raw));
        }
        names.sort();
        let mut raw_to_final = vec![0u32; space.size];
        for (final_pos, (_, raw)) in names.iter().enumerate() {
            raw_to_final[*raw] = final_pos as u32;
        }
        // projection tables, indexed by final position
        let mut per_member: Vec<Vec<u32>> = vec![vec![0; space.size]; members.len()];
        for (_, raw) in &names {
            space.decode(*raw, &mut coords);
            let fin = raw_to_final[*raw] as usize;
            for (i, &c) in coords.iter().enumerate() {
                per_member[i][fin] = c as u32;
            }
        }
        for (i, table) in per_member.into_iter().enumerate() {
            proj_tables[i].insert(s.clone(), table);
        }
        carriers.insert(
            s.clone(),
            names.into_iter().map(|(n, _)| n).collect::<Vec<_>>(),
        );
        spaces.insert(s.clone(), (space, raw_to_final));
    }
    let set = SortedSet { sorts, carriers };
    let projections = proj_tables
        .into_iter()
        .enumerate()
        .map(|(i, tables)| {
            SortedMapping::from_positions(set.clone(), members[i].clone(), tables).unwrap()
        })
        .collect();
    ProductData {
        set,
        projections,
        spaces,
    }
}

/// Product of an indexed family, with the canonical projections. The empty
/// family yields the final sorted set `1` (its "projections" are none).
///
/// For the empty family the sort universe cannot be inferred from members,
/// so it must be supplied.
pub fn product(family: &IndexedFamily, sorts: &[SortId]) -> (SortedSet, Vec<SortedMapping>) {
    let data = product_data(family, sorts);
    (data.set, data.projections)
}

/// Self-check of the support law for products: the support of the product
/// equals the intersection of the member supports.
pub fn support_of_product_law(family: &IndexedFamily, sorts: &[SortId]) -> bool {
    let (prod, _) = product(family, sorts);
    let lhs = prod.support();
    let mut rhs: Option<BTreeSet<SortId>> = None;
    for m in family.members() {
        let s = m.support();
        rhs = Some(match rhs {
            None => s,
            Some(acc) => acc.intersection(&s).cloned().collect(),
        });
    }
    let rhs = rhs.unwrap_or_else(|| sorts.iter().cloned().collect());
    lhs == rhs
}

/// Coproduct (disjoint union) of a family: elements are tagged pairs,
/// named `elem@index`. Returns the injections alongside.
pub fn coproduct(
    family: &IndexedFamily,
    sorts: &[SortId],
) -> (SortedSet, Vec<SortedMapping>) {
    let mut carriers: BTreeMap<SortId, Vec<String>> = BTreeMap::new();
    for s in sorts {
        let mut names = Vec::new();
        for (i, m) in family.members().iter().enumerate() {
            for e in m.carrier(s) {
                names.push(format!("{}@{}", e, family.index()[i]));
            }
        }
        names.sort();
        carriers.insert(s.clone(), names);
    }
    let set = SortedSet {
        sorts: sorts.to_vec(),
        carriers,
    };
    let injections = family
        .members()
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let tables = sorts
                .iter()
                .map(|s| {
                    let table = m
                        .carrier(s)
                        .iter()
                        .map(|e| {
                            let name = format!("{}@{}", e, family.index()[i]);
                            set.position(s, &name).unwrap() as u32
                        })
                        .collect();
                    (s.clone(), table)
                })
                .collect();
            SortedMapping::from_positions(m.clone(), set.clone(), tables).unwrap()
        })
        .collect();
    (set, injections)
}

/// Equalizer of a parallel pair: the subset of the common source where the
/// two mappings agree, with its canonical embedding.
pub fn equalizer(f: &SortedMapping, g: &SortedMapping) -> Result<(SortedSet, SortedMapping)> {
    if f.source() != g.source() || f.target() != g.target() {
        return Err(Error::SourceMismatch(
            "equalizer requires a parallel pair".into(),
        ));
    }
    let mut set = f.source().clone();
    for s in f.source().sorts().to_vec() {
        let elems = f
            .source()
            .carrier(&s)
            .iter()
            .enumerate()
            .filter(|(p, _)| f.apply_pos(&s, *p) == g.apply_pos(&s, *p))
            .map(|(_, e)| e.clone())
            .collect();
        set = set.with_carrier(&s, elems);
    }
    let emb = SortedMapping::inclusion(&set, f.source())?;
    Ok((set, emb))
}

/// Kernel of a mapping: positions share a block iff they share an image.
pub fn kernel(f: &SortedMapping) -> SortedEquivalence {
    let mut blocks = BTreeMap::new();
    for s in f.source().sorts() {
        let mut by_image: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
        for (p, &q) in f.table(s).iter().enumerate() {
            by_image.entry(q).or_default().push(p as u32);
        }
        blocks.insert(s.clone(), by_image.into_values().collect());
    }
    SortedEquivalence::from_blocks(f.source().clone(), blocks).unwrap()
}

/// Quotient of a sorted set by an equivalence. The carrier keeps the least
/// element of each block as the class representative; the projection sends
/// every element to its representative. Supports are preserved.
pub fn quotient(
    a: &SortedSet,
    phi: &SortedEquivalence,
) -> Result<(SortedSet, SortedMapping)> {
    if phi.base() != a {
        return Err(Error::PartitionMismatch(
            "equivalence is not on the given sorted set".into(),
        ));
    }
    let mut set = a.clone();
    let mut tables = BTreeMap::new();
    for s in a.sorts() {
        // blocks are ordered by least member, and carriers are name-sorted,
        // so representatives come out already in canonical order
        let reps: Vec<String> = phi
            .blocks(s)
            .iter()
            .map(|b| a.carrier(s)[b[0] as usize].clone())
            .collect();
        debug_assert!(reps.windows(2).all(|w| w[0] < w[1]));
        let table = (0..a.carrier(s).len())
            .map(|p| phi.class_of_pos(s, p) as u32)
            .collect();
        set = set.with_carrier(s, reps);
        tables.insert(s.clone(), table);
    }
    let proj = SortedMapping::from_positions(a.clone(), set.clone(), tables)?;
    Ok((set, proj))
}

/// Factors `f` through the quotient by `phi`: the unique `p` with
/// `f = p ∘ projection`. Requires `phi ⊆ Ker(f)` blockwise.
pub fn factor_through(
    f: &SortedMapping,
    phi: &SortedEquivalence,
) -> Result<SortedMapping> {
    if phi.base() != f.source() {
        return Err(Error::PartitionMismatch(
            "equivalence is not on the source of the mapping".into(),
        ));
    }
    let (q, _proj) = quotient(f.source(), phi)?;
    let mut tables = BTreeMap::new();
    for s in f.source().sorts() {
        let mut table = Vec::with_capacity(phi.blocks(s).len());
        for b in phi.blocks(s) {
            let img = f.apply_pos(s, b[0] as usize);
            if b.iter().any(|&p| f.apply_pos(s, p as usize) != img) {
                return Err(Error::NotRefining(format!(
                    "a block at sort {s} maps to two different targets"
                )));
            }
            table.push(img as u32);
        }
        tables.insert(s.clone(), table);
    }
    SortedMapping::from_positions(q, f.target().clone(), tables)
}

/// Decides whether any sorted mapping `A → B` exists: exactly when
/// `supp(A) ⊆ supp(B)`.
pub fn hom_exists(a: &SortedSet, b: &SortedSet) -> bool {
    a.support().is_subset(&b.support())
}

/// True iff all members of the family share the same support.
pub fn constant_support_check(family: &IndexedFamily) -> bool {
    let mut supports = family.members().iter().map(|m| m.support());
    match supports.next() {
        None => true,
        Some(first) => supports.all(|s| s == first),
    }
}

/// Enumerates every sorted mapping from `a` to `b`, in canonical order.
/// The number of mappings is `∏_s |B_s|^|A_s|`; `cap` bounds it.
pub fn all_mappings(
    a: &SortedSet,
    b: &SortedSet,
    cap: usize,
) -> Result<Vec<SortedMapping>> {
    let mut total: usize = 1;
    for s in a.sorts() {
        let n = a.carrier(s).len();
        let m = b.carrier(s).len();
        if n > 0 && m == 0 {
            return Ok(Vec::new());
        }
        for _ in 0..n {
            total = total.saturating_mul(m);
            if total > cap {
                return Err(Error::CapExceeded(format!(
                    "mapping enumeration exceeds cap {cap}"
                )));
            }
        }
    }
    let mut out = Vec::with_capacity(total);
    let sorts = a.sorts().to_vec();
    let mut tables: BTreeMap<SortId, Vec<u32>> = sorts
        .iter()
        .map(|s| (s.clone(), vec![0u32; a.carrier(s).len()]))
        .collect();
    loop {
        out.push(
            SortedMapping::from_positions(a.clone(), b.clone(), tables.clone()).unwrap(),
        );
        // odometer step over all per-sort tables
        let mut bumped = false;
        'outer: for s in sorts.iter().rev() {
            let m = b.carrier(s).len() as u32;
            let table = tables.get_mut(s).unwrap();
            for k in (0..table.len()).rev() {
                if table[k] + 1 < m {
                    table[k] += 1;
                    for t in table.iter_mut().skip(k + 1) {
                        *t = 0;
                    }
                    bumped = true;
                    break 'outer;
                }
                table[k] = 0;
            }
        }
        if !bumped {
            break;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sid(s: &str) -> SortId {
        SortId::new(s)
    }

    fn set(pairs: &[(&str, &[&str])]) -> SortedSet {
        let sorts = pairs.iter().map(|(s, _)| sid(s)).collect();
        let carriers = pairs
            .iter()
            .map(|(s, es)| (sid(s), es.iter().map(|e| e.to_string()).collect()))
            .collect();
        SortedSet::new(sorts, carriers).unwrap()
    }

    #[test]
    fn support_scans_carriers() {
        let a = set(&[("s", &["a", "b"]), ("t", &[])]);
        assert_eq!(a.support(), [sid("s")].into());
        let empty = set(&[("s", &[]), ("t", &[])]);
        assert!(empty.support().is_empty());
        let three = set(&[("s", &["a"]), ("t", &["b"]), ("u", &[])]);
        assert_eq!(three.support(), [sid("s"), sid("t")].into());
    }

    #[test]
    fn product_counts_tuples() {
        let a = set(&[("s", &["a", "b"])]);
        let b = set(&[("s", &["x"])]);
        let fam = IndexedFamily::new(vec!["0".into(), "1".into()], vec![a, b]).unwrap();
        let (p, projs) = product(&fam, &[sid("s")]);
        assert_eq!(p.carrier(&sid("s")), ["(a,x)", "(b,x)"]);
        assert_eq!(projs.len(), 2);
        assert_eq!(projs[0].apply(&sid("s"), "(b,x)"), Some("b"));
        assert_eq!(projs[1].apply(&sid("s"), "(b,x)"), Some("x"));
    }

    #[test]
    fn empty_product_is_final() {
        let fam = IndexedFamily::new(vec![], vec![]).unwrap();
        let (p, projs) = product(&fam, &[sid("s"), sid("t")]);
        assert_eq!(p.carrier(&sid("s")), [STAR]);
        assert_eq!(p.carrier(&sid("t")), [STAR]);
        assert!(projs.is_empty());
        assert_eq!(p.support().len(), 2);
    }

    #[test]
    fn product_with_empty_member_is_empty() {
        let a = set(&[("s", &["a"])]);
        let b = set(&[("s", &[])]);
        let fam = IndexedFamily::new(vec!["0".into(), "1".into()], vec![a, b]).unwrap();
        let (p, _) = product(&fam, &[sid("s")]);
        assert!(p.carrier(&sid("s")).is_empty());
    }

    #[test]
    fn product_support_law_cases() {
        let a = set(&[("s", &["a"]), ("t", &["b"])]);
        let b = set(&[("s", &[]), ("t", &["c"])]);
        let fam =
            IndexedFamily::new(vec!["0".into(), "1".into()], vec![a.clone(), b]).unwrap();
        assert!(support_of_product_law(&fam, &[sid("s"), sid("t")]));
        let single = IndexedFamily::new(vec!["0".into()], vec![a.clone()]).unwrap();
        assert!(support_of_product_law(&single, &[sid("s"), sid("t")]));
        let disj1 = set(&[("s", &["a"]), ("t", &[])]);
        let disj2 = set(&[("s", &[]), ("t", &["b"])]);
        let fam2 = IndexedFamily::new(vec!["0".into(), "1".into()], vec![disj1, disj2]).unwrap();
        assert!(support_of_product_law(&fam2, &[sid("s"), sid("t")]));
    }

    #[test]
    fn coproduct_tags_elements() {
        let a = set(&[("s", &["a"])]);
        let b = set(&[("s", &["a"])]);
        let fam = IndexedFamily::new(vec!["0".into(), "1".into()], vec![a, b]).unwrap();
        let (c, injs) = coproduct(&fam, &[sid("s")]);
        assert_eq!(c.carrier(&sid("s")), ["a@0", "a@1"]);
        assert_eq!(injs[1].apply(&sid("s"), "a"), Some("a@1"));

        let empty = IndexedFamily::new(vec![], vec![]).unwrap();
        let (e, _) = coproduct(&empty, &[sid("s")]);
        assert!(e.carrier(&sid("s")).is_empty());

        let x = set(&[("s", &["a", "b"])]);
        let y = set(&[("s", &["c"])]);
        let fam3 = IndexedFamily::new(vec!["0".into(), "1".into()], vec![x, y]).unwrap();
        let (c3, _) = coproduct(&fam3, &[sid("s")]);
        assert_eq!(c3.carrier(&sid("s")).len(), 3);
    }

    #[test]
    fn equalizer_cases() {
        let a = set(&[("s", &["a", "b"])]);
        let id = SortedMapping::identity(&a);
        let (eq, emb) = equalizer(&id, &id).unwrap();
        assert_eq!(eq, a);
        assert!(emb.is_bijective());

        let to_a = SortedMapping::constant(&a, &a, &[(sid("s"), "a".to_string())].into())
            .unwrap();
        let (eq2, _) = equalizer(&id, &to_a).unwrap();
        assert_eq!(eq2.carrier(&sid("s")), ["a"]);

        let to_b = SortedMapping::constant(&a, &a, &[(sid("s"), "b".to_string())].into())
            .unwrap();
        let (eq3, _) = equalizer(&to_a, &to_b).unwrap();
        assert!(eq3.carrier(&sid("s")).is_empty());

        let other = set(&[("s", &["z"])]);
        let f = SortedMapping::constant(&a, &other, &[(sid("s"), "z".to_string())].into())
            .unwrap();
        assert!(matches!(equalizer(&id, &f), Err(Error::SourceMismatch(_))));
    }

    #[test]
    fn kernel_groups_by_image() {
        let a = set(&[("s", &["a", "b", "c"])]);
        let b = set(&[("s", &["x", "y"])]);
        let f = SortedMapping::from_names(
            a.clone(),
            b.clone(),
            &[(
                sid("s"),
                vec![
                    ("a".into(), "x".into()),
                    ("b".into(), "x".into()),
                    ("c".into(), "y".into()),
                ],
            )]
            .into(),
        )
        .unwrap();
        let ker = kernel(&f);
        assert_eq!(ker.blocks(&sid("s")), &[vec![0, 1], vec![2]]);

        let inj = SortedMapping::identity(&a);
        assert_eq!(kernel(&inj).blocks(&sid("s")).len(), 3);

        let konst =
            SortedMapping::constant(&a, &a, &[(sid("s"), "a".to_string())].into()).unwrap();
        assert_eq!(kernel(&konst).blocks(&sid("s")).len(), 1);
    }

    #[test]
    fn quotient_uses_least_representative() {
        let a = set(&[("s", &["a", "b", "c"])]);
        let phi = SortedEquivalence::from_named_blocks(
            a.clone(),
            &[(sid("s"), vec![vec!["a".into(), "b".into()], vec!["c".into()]])].into(),
        )
        .unwrap();
        let (q, proj) = quotient(&a, &phi).unwrap();
        assert_eq!(q.carrier(&sid("s")), ["a", "c"]);
        assert_eq!(proj.apply(&sid("s"), "b"), Some("a"));
        assert_eq!(a.support(), q.support());

        let discrete = SortedEquivalence::discrete(&a);
        let (qd, pd) = quotient(&a, &discrete).unwrap();
        assert_eq!(qd, a);
        assert!(pd.is_bijective());

        let ab = set(&[("s", &["a", "b"])]);
        let total = SortedEquivalence::total(&ab);
        let (qt, _) = quotient(&ab, &total).unwrap();
        assert_eq!(qt.carrier(&sid("s")), ["a"]);
    }

    #[test]
    fn factor_through_cases() {
        let a = set(&[("s", &["a", "b", "c"])]);
        let b = set(&[("s", &["x", "y"])]);
        let f = SortedMapping::from_names(
            a.clone(),
            b.clone(),
            &[(
                sid("s"),
                vec![
                    ("a".into(), "x".into()),
                    ("b".into(), "x".into()),
                    ("c".into(), "y".into()),
                ],
            )]
            .into(),
        )
        .unwrap();
        // phi = Ker(f): p injective
        let p = factor_through(&f, &kernel(&f)).unwrap();
        assert!(p.is_injective());
        let (_, proj) = quotient(&a, &kernel(&f)).unwrap();
        assert_eq!(proj.then(&p).unwrap(), f);

        // discrete phi: p is f under the representative bijection
        let p2 = factor_through(&f, &SortedEquivalence::discrete(&a)).unwrap();
        let (_, proj2) = quotient(&a, &SortedEquivalence::discrete(&a)).unwrap();
        assert_eq!(proj2.then(&p2).unwrap(), f);

        // total phi with non-constant f: rejected
        let total = SortedEquivalence::total(&a);
        assert!(matches!(
            factor_through(&f, &total),
            Err(Error::NotRefining(_))
        ));

        // total phi with constant f: single class
        let konst =
            SortedMapping::constant(&a, &b, &[(sid("s"), "x".to_string())].into()).unwrap();
        let p3 = factor_through(&konst, &total).unwrap();
        assert_eq!(p3.source().carrier(&sid("s")).len(), 1);
    }

    #[test]
    fn hom_exists_matches_support_rule() {
        let a = set(&[("s", &["a"]), ("t", &[])]);
        let b = set(&[("s", &[]), ("t", &[])]);
        assert!(!hom_exists(&a, &b));
        assert!(hom_exists(&b, &a));
        let c = set(&[("s", &["x"]), ("t", &["y"])]);
        assert!(hom_exists(&a, &c));
    }

    #[test]
    fn hom_exists_agrees_with_enumeration_small() {
        // all sorted sets over sorts {s,t} with carriers from subsets of {x0,x1}
        let pool: Vec<Vec<&str>> = vec![vec![], vec!["x0"], vec!["x0", "x1"]];
        let mut sets = Vec::new();
        for cs in &pool {
            for ct in &pool {
                sets.push(set(&[("s", cs), ("t", ct)]));
            }
        }
        for a in &sets {
            for b in &sets {
                let brute = !all_mappings(a, b, 1_000_000).unwrap().is_empty();
                assert_eq!(hom_exists(a, b), brute, "disagree on {a:?} -> {b:?}");
            }
        }
    }

    #[test]
    fn surjective_mapping_preserves_support() {
        let a = set(&[("s", &["a", "b"]), ("t", &["c"])]);
        let b = set(&[("s", &["x"]), ("t", &["y"])]);
        for f in all_mappings(&a, &b, 10_000).unwrap() {
            if f.is_surjective() {
                assert_eq!(f.source().support(), f.target().support());
            }
        }
    }

    #[test]
    fn constant_support_cases() {
        let a = set(&[("s", &["a"]), ("t", &[])]);
        let b = set(&[("s", &[]), ("t", &["b"])]);
        let fam =
            IndexedFamily::new(vec!["0".into(), "1".into()], vec![a.clone(), b]).unwrap();
        assert!(!constant_support_check(&fam));
        let fam2 =
            IndexedFamily::new(vec!["0".into(), "1".into()], vec![a.clone(), a.clone()])
                .unwrap();
        assert!(constant_support_check(&fam2));
        let fam3 = IndexedFamily::new(vec!["0".into()], vec![a]).unwrap();
        assert!(constant_support_check(&fam3));
    }

    #[test]
    fn factor_is_unique_by_search() {
        let a = set(&[("s", &["a", "b", "c"])]);
        let b = set(&[("s", &["x", "y"])]);
        let f = SortedMapping::from_names(
            a.clone(),
            b.clone(),
            &[(
                sid("s"),
                vec![
                    ("a".into(), "x".into()),
                    ("b".into(), "x".into()),
                    ("c".into(), "y".into()),
                ],
            )]
            .into(),
        )
        .unwrap();
        let phi = kernel(&f);
        let (q, proj) = quotient(&a, &phi).unwrap();
        let witnesses: Vec<_> = all_mappings(&q, &b, 10_000)
            .unwrap()
            .into_iter()
            .filter(|p| proj.then(p).unwrap() == f)
            .collect();
        assert_eq!(witnesses.len(), 1);
        assert_eq!(witnesses[0], factor_through(&f, &phi).unwrap());
    }
}

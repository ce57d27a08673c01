//! Signatures, finite Σ-algebras, homomorphisms, congruences, and the
//! constructions on them: products, subalgebras, quotients, equalizers,
//! and reducts along signature morphisms.
//!
//! Operation tables are extensional. Internally a table is a flat vector
//! indexed by the mixed-radix encoding of the argument positions, which
//! keeps the desk-scale constructions cheap; names only appear at the
//! boundaries.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::sorted::{
    self, IndexedFamily, SortId, SortedEquivalence, SortedMapping, SortedSet,
};
use crate::sorted::{product_data, ProductData, TupleSpace};

/// The rank of a formal operation: a word of argument sorts and a result
/// sort. Constants have the empty word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Arity {
    pub word: Vec<SortId>,
    pub result: SortId,
}

impl fmt::Display for Arity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let w: Vec<&str> = self.word.iter().map(|s| s.as_str()).collect();
        write!(f, "{} -> {}", w.join(" "), self.result)
    }
}

/// A many-sorted signature: operation symbols with their arities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Signature {
    sorts: Vec<SortId>,
    ops: BTreeMap<String, Arity>,
}

impl Signature {
    pub fn new(sorts: Vec<SortId>, ops: BTreeMap<String, Arity>) -> Result<Self> {
        for (op, ar) in &ops {
            for s in ar.word.iter().chain([&ar.result]) {
                if !sorts.contains(s) {
                    return Err(Error::Invalid(format!(
                        "operation {op} uses unknown sort {s}"
                    )));
                }
            }
        }
        Ok(Signature { sorts, ops })
    }

    pub fn sorts(&self) -> &[SortId] {
        &self.sorts
    }

    pub fn ops(&self) -> &BTreeMap<String, Arity> {
        &self.ops
    }

    pub fn arity(&self, op: &str) -> Option<&Arity> {
        self.ops.get(op)
    }
}

/// Defects found while validating an algebra against its signature.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AlgebraDefect {
    UnknownOp { op: String },
    MissingTable { op: String },
    Totality { op: String, tuple: Vec<String> },
    DuplicateRow { op: String, tuple: Vec<String> },
    BadArgument { op: String, tuple: Vec<String> },
    Codomain { op: String, tuple: Vec<String>, value: String },
}

impl fmt::Display for AlgebraDefect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlgebraDefect::UnknownOp { op } => write!(f, "op {op} is not in the signature"),
            AlgebraDefect::MissingTable { op } => write!(f, "op {op} has no table"),
            AlgebraDefect::Totality { op, tuple } => {
                write!(f, "op {op} has no row for ({})", tuple.join(","))
            }
            AlgebraDefect::DuplicateRow { op, tuple } => {
                write!(f, "op {op} has two rows for ({})", tuple.join(","))
            }
            AlgebraDefect::BadArgument { op, tuple } => {
                write!(f, "op {op}: argument not in carrier in ({})", tuple.join(","))
            }
            AlgebraDefect::Codomain { op, tuple, value } => write!(
                f,
                "op {op}({}) = {value} lands outside the result carrier",
                tuple.join(",")
            ),
        }
    }
}

/// Extensional rows of an operation table, keyed by operation symbol.
pub type OpRows = BTreeMap<String, Vec<(Vec<String>, String)>>;

/// A finite Σ-algebra: a carrier plus one total table per operation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Algebra {
    sig: Signature,
    carrier: SortedSet,
    tables: BTreeMap<String, Vec<u32>>,
}

impl Algebra {
    /// Builds an algebra from extensional rows, rejecting any defect.
    pub fn from_rows(
        sig: Signature,
        carrier: SortedSet,
        rows: &OpRows,
    ) -> std::result::Result<Self, Vec<AlgebraDefect>> {
        let defects = validate_rows(&sig, &carrier, rows);
        if !defects.is_empty() {
            return Err(defects);
        }
        let mut tables = BTreeMap::new();
        for (op, ar) in sig.ops() {
            let space = arg_space(&carrier, ar);
            let mut table = vec![0u32; space.size];
            if let Some(list) = rows.get(op) {
                for (args, value) in list {
                    let coords: Vec<usize> = args
                        .iter()
                        .zip(&ar.word)
                        .map(|(a, s)| carrier.position(s, a).unwrap())
                        .collect();
                    table[space.encode(&coords)] =
                        carrier.position(&ar.result, value).unwrap() as u32;
                }
            }
            tables.insert(op.clone(), table);
        }
        Ok(Algebra {
            sig,
            carrier,
            tables,
        })
    }

    /// Builds an algebra from positional tables without cross-checks
    /// beyond sizes. Intended for construction code that derives the
    /// tables itself.
    pub(crate) fn from_tables(
        sig: Signature,
        carrier: SortedSet,
        tables: BTreeMap<String, Vec<u32>>,
    ) -> Self {
        let alg = Algebra {
            sig,
            carrier,
            tables,
        };
        debug_assert!(alg.validate().is_empty(), "derived algebra has defects");
        alg
    }

    /// Revalidates the tables against the signature and carrier.
    pub fn validate(&self) -> Vec<AlgebraDefect> {
        let mut defects = Vec::new();
        for (op, ar) in self.sig.ops() {
            let space = arg_space(&self.carrier, ar);
            match self.tables.get(op) {
                None => defects.push(AlgebraDefect::MissingTable { op: op.clone() }),
                Some(table) => {
                    if table.len() != space.size {
                        defects.push(AlgebraDefect::Totality {
                            op: op.clone(),
                            tuple: vec![format!("{} rows, {} expected", table.len(), space.size)],
                        });
                        continue;
                    }
                    let n = self.carrier.carrier(&ar.result).len();
                    let mut coords = Vec::new();
                    for (raw, &v) in table.iter().enumerate() {
                        if v as usize >= n {
                            space.decode(raw, &mut coords);
                            defects.push(AlgebraDefect::Codomain {
                                op: op.clone(),
                                tuple: self.tuple_names(ar, &coords),
                                value: format!("#{v}"),
                            });
                        }
                    }
                }
            }
        }
        for op in self.tables.keys() {
            if self.sig.arity(op).is_none() {
                defects.push(AlgebraDefect::UnknownOp { op: op.clone() });
            }
        }
        defects
    }

    pub fn signature(&self) -> &Signature {
        &self.sig
    }

    pub fn carrier(&self) -> &SortedSet {
        &self.carrier
    }

    pub fn support(&self) -> std::collections::BTreeSet<SortId> {
        self.carrier.support()
    }

    pub fn is_initial(&self) -> bool {
        self.carrier.is_initial()
    }

    fn tuple_names(&self, ar: &Arity, coords: &[usize]) -> Vec<String> {
        coords
            .iter()
            .zip(&ar.word)
            .map(|(&c, s)| self.carrier.carrier(s)[c].clone())
            .collect()
    }

    pub(crate) fn space(&self, op: &str) -> TupleSpace {
        arg_space(&self.carrier, &self.sig.ops()[op])
    }

    pub(crate) fn table(&self, op: &str) -> &[u32] {
        &self.tables[op]
    }

    pub(crate) fn apply_pos(&self, op: &str, coords: &[usize]) -> usize {
        let space = self.space(op);
        self.tables[op][space.encode(coords)] as usize
    }

    /// Applies an operation to a tuple of element names.
    pub fn apply(&self, op: &str, args: &[&str]) -> Result<&str> {
        let ar = self
            .sig
            .arity(op)
            .ok_or_else(|| Error::BadTuple(format!("unknown op {op}")))?;
        if args.len() != ar.word.len() {
            return Err(Error::BadTuple(format!(
                "op {op} expects {} arguments, got {}",
                ar.word.len(),
                args.len()
            )));
        }
        let mut coords = Vec::with_capacity(args.len());
        for (a, s) in args.iter().zip(&ar.word) {
            coords.push(self.carrier.position(s, a).ok_or_else(|| {
                Error::BadTuple(format!("{a} is not in the carrier at sort {s}"))
            })?);
        }
        let res = self.apply_pos(op, &coords);
        Ok(&self.carrier.carrier(&ar.result)[res])
    }

    /// Extensional rows of every table, in canonical order.
    pub fn rows(&self) -> OpRows {
        let mut rows = OpRows::new();
        for (op, ar) in self.sig.ops() {
            let space = self.space(op);
            let mut list = Vec::with_capacity(space.size);
            let mut coords = Vec::new();
            for raw in 0..space.size {
                space.decode(raw, &mut coords);
                let args = self.tuple_names(ar, &coords);
                let value =
                    self.carrier.carrier(&ar.result)[self.tables[op][raw] as usize].clone();
                list.push((args, value));
            }
            rows.insert(op.clone(), list);
        }
        rows
    }
}

fn arg_space(carrier: &SortedSet, ar: &Arity) -> TupleSpace {
    TupleSpace::new(ar.word.iter().map(|s| carrier.carrier(s).len()).collect())
}

/// Validates extensional rows without building the algebra.
pub fn validate_rows(sig: &Signature, carrier: &SortedSet, rows: &OpRows) -> Vec<AlgebraDefect> {
    let mut defects = Vec::new();
    for op in rows.keys() {
        if sig.arity(op).is_none() {
            defects.push(AlgebraDefect::UnknownOp { op: op.clone() });
        }
    }
    for (op, ar) in sig.ops() {
        let space = arg_space(carrier, ar);
        let mut seen = vec![false; space.size];
        if let Some(list) = rows.get(op) {
            for (args, value) in list {
                if args.len() != ar.word.len() {
                    defects.push(AlgebraDefect::BadArgument {
                        op: op.clone(),
                        tuple: args.clone(),
                    });
                    continue;
                }
                let coords: Option<Vec<usize>> = args
                    .iter()
                    .zip(&ar.word)
                    .map(|(a, s)| carrier.position(s, a))
                    .collect();
                let Some(coords) = coords else {
                    defects.push(AlgebraDefect::BadArgument {
                        op: op.clone(),
                        tuple: args.clone(),
                    });
                    continue;
                };
                let raw = space.encode(&coords);
                if seen[raw] {
                    defects.push(AlgebraDefect::DuplicateRow {
                        op: op.clone(),
                        tuple: args.clone(),
                    });
                }
                seen[raw] = true;
                if carrier.position(&ar.result, value).is_none() {
                    defects.push(AlgebraDefect::Codomain {
                        op: op.clone(),
                        tuple: args.clone(),
                        value: value.clone(),
                    });
                }
            }
        }
        let mut coords = Vec::new();
        for (raw, &s) in seen.iter().enumerate() {
            if !s {
                space.decode(raw, &mut coords);
                defects.push(AlgebraDefect::Totality {
                    op: op.clone(),
                    tuple: coords
                        .iter()
                        .zip(&ar.word)
                        .map(|(&c, srt)| carrier.carrier(srt)[c].clone())
                        .collect(),
                });
            }
        }
    }
    defects
}

/// Checks the homomorphism equation for every operation and tuple.
pub fn is_homomorphism(f: &SortedMapping, a: &Algebra, b: &Algebra) -> Result<bool> {
    if a.signature() != b.signature() {
        return Err(Error::SignatureMismatch(
            "homomorphism check across different signatures".into(),
        ));
    }
    if f.source() != a.carrier() || f.target() != b.carrier() {
        return Err(Error::CarrierMismatch(
            "mapping does not run between the carriers of the algebras".into(),
        ));
    }
    for (op, ar) in a.signature().ops() {
        let space_a = a.space(op);
        let space_b = b.space(op);
        let table_a = a.table(op);
        let table_b = b.table(op);
        let mut coords = Vec::new();
        let mut mapped = vec![0usize; ar.word.len()];
        for raw in 0..space_a.size {
            space_a.decode(raw, &mut coords);
            for (k, &c) in coords.iter().enumerate() {
                mapped[k] = f.apply_pos(&ar.word[k], c);
            }
            let lhs = f.apply_pos(&ar.result, table_a[raw] as usize);
            let rhs = table_b[space_b.encode(&mapped)] as usize;
            if lhs != rhs {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// A homomorphism between Σ-algebras; the defining equation is checked at
/// construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Homomorphism {
    source: Algebra,
    target: Algebra,
    map: SortedMapping,
}

impl Homomorphism {
    pub fn new(source: Algebra, target: Algebra, map: SortedMapping) -> Result<Self> {
        if !is_homomorphism(&map, &source, &target)? {
            return Err(Error::NotAHomomorphism(
                "mapping does not commute with the operations".into(),
            ));
        }
        Ok(Homomorphism {
            source,
            target,
            map,
        })
    }

    pub fn identity(a: &Algebra) -> Self {
        Homomorphism {
            source: a.clone(),
            target: a.clone(),
            map: SortedMapping::identity(a.carrier()),
        }
    }

    pub fn source(&self) -> &Algebra {
        &self.source
    }

    pub fn target(&self) -> &Algebra {
        &self.target
    }

    pub fn map(&self) -> &SortedMapping {
        &self.map
    }

    pub fn then(&self, g: &Homomorphism) -> Result<Homomorphism> {
        if self.target != g.source {
            return Err(Error::SourceMismatch(
                "homomorphism composition mismatch".into(),
            ));
        }
        Ok(Homomorphism {
            source: self.source.clone(),
            target: g.target.clone(),
            map: self.map.then(&g.map)?,
        })
    }

    pub fn is_surjective(&self) -> bool {
        self.map.is_surjective()
    }

    pub fn is_injective(&self) -> bool {
        self.map.is_injective()
    }

    /// The inverse of a bijective homomorphism (for total finite algebras
    /// the inverse mapping is itself a homomorphism; it is still checked).
    pub fn inverse(&self) -> Result<Homomorphism> {
        Homomorphism::new(
            self.target.clone(),
            self.source.clone(),
            self.map.inverse()?,
        )
    }
}

/// A congruence: a sorted equivalence compatible with every operation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Congruence {
    base: Algebra,
    eq: SortedEquivalence,
}

impl Congruence {
    pub fn new(base: Algebra, eq: SortedEquivalence) -> Result<Self> {
        if !is_congruence(&eq, &base)? {
            return Err(Error::NotCongruence(
                "equivalence is not compatible with the operations".into(),
            ));
        }
        Ok(Congruence { base, eq })
    }

    pub fn base(&self) -> &Algebra {
        &self.base
    }

    pub fn eq(&self) -> &SortedEquivalence {
        &self.eq
    }
}

/// Compatibility of an equivalence with the operations, checked in one
/// pass per table by grouping argument tuples by their class vectors.
pub fn is_congruence(phi: &SortedEquivalence, a: &Algebra) -> Result<bool> {
    if phi.base() != a.carrier() {
        return Err(Error::PartitionMismatch(
            "equivalence is not on the carrier of the algebra".into(),
        ));
    }
    for (op, ar) in a.signature().ops() {
        let space = a.space(op);
        let class_dims: Vec<usize> = ar
            .word
            .iter()
            .map(|s| phi.blocks(s).len())
            .collect();
        let class_space = TupleSpace::new(class_dims);
        let mut seen: Vec<Option<u32>> = vec![None; class_space.size];
        let table = a.table(op);
        let mut coords = Vec::new();
        let mut classes = vec![0usize; ar.word.len()];
        for raw in 0..space.size {
            space.decode(raw, &mut coords);
            for (k, &c) in coords.iter().enumerate() {
                classes[k] = phi.class_of_pos(&ar.word[k], c);
            }
            let res_class = phi.class_of_pos(&ar.result, table[raw] as usize) as u32;
            let slot = &mut seen[class_space.encode(&classes)];
            match slot {
                None => *slot = Some(res_class),
                Some(prev) if *prev != res_class => return Ok(false),
                _ => {}
            }
        }
    }
    Ok(true)
}

/// Product of algebras over a shared signature, with projections and the
/// coordinate bookkeeping needed to tuple into it. The empty family gives
/// the final algebra.
#[derive(Debug, Clone)]
pub struct ProductAlgebra {
    pub algebra: Algebra,
    pub projections: Vec<Homomorphism>,
    pub(crate) data: ProductData,
}

pub fn product_algebra(sig: &Signature, family: &[Algebra]) -> Result<ProductAlgebra> {
    for a in family {
        if a.signature() != sig {
            return Err(Error::SignatureMismatch(
                "product over mixed signatures".into(),
            ));
        }
    }
    let carriers: Vec<SortedSet> = family.iter().map(|a| a.carrier().clone()).collect();
    let index: Vec<String> = (0..family.len()).map(|i| i.to_string()).collect();
    let fam = IndexedFamily::new(index, carriers)?;
    let data = product_data(&fam, sig.sorts());
    let mut tables = BTreeMap::new();
    for (op, ar) in sig.ops() {
        let space = arg_space(&data.set, ar);
        let mut table = vec![0u32; space.size];
        let mut coords = Vec::new();
        let mut member_args = vec![0usize; ar.word.len()];
        let mut member_results = vec![0usize; family.len()];
        for raw in 0..space.size {
            space.decode(raw, &mut coords);
            for (i, member) in family.iter().enumerate() {
                for (k, &c) in coords.iter().enumerate() {
                    member_args[k] = data.coord(i, &ar.word[k], c);
                }
                member_results[i] = member.apply_pos(op, &member_args);
            }
            table[raw] = data.encode(&ar.result, &member_results) as u32;
        }
        tables.insert(op.clone(), table);
    }
    let algebra = Algebra::from_tables(sig.clone(), data.set.clone(), tables);
    let projections = data
        .projections
        .iter()
        .enumerate()
        .map(|(i, p)| Homomorphism::new(algebra.clone(), family[i].clone(), p.clone()))
        .collect::<Result<Vec<_>>>()?;
    Ok(ProductAlgebra {
        algebra,
        projections,
        data,
    })
}

/// The mediating homomorphism `⟨f^i⟩` into a product: the unique map with
/// `pr^i ∘ ⟨f^i⟩ = f^i`.
pub fn tuple_into_product(
    prod: &ProductAlgebra,
    maps: &[Homomorphism],
) -> Result<Homomorphism> {
    if maps.len() != prod.projections.len() {
        return Err(Error::Invalid(
            "tupling needs one map per product member".into(),
        ));
    }
    let Some(first) = maps.first() else {
        // empty product: the unique map to the final algebra
        let src = prod.algebra.carrier();
        return Err(Error::Invalid(format!(
            "tupling into the empty product needs an explicit source (target {:?})",
            src.sorts()
        )));
    };
    let source = first.source().clone();
    for m in maps {
        if m.source() != &source {
            return Err(Error::SourceMismatch(
                "tupling components have different sources".into(),
            ));
        }
    }
    let mut tables = BTreeMap::new();
    for s in source.carrier().sorts() {
        let mut table = Vec::with_capacity(source.carrier().carrier(s).len());
        let mut coords = vec![0usize; maps.len()];
        for p in 0..source.carrier().carrier(s).len() {
            for (i, m) in maps.iter().enumerate() {
                coords[i] = m.map().apply_pos(s, p);
            }
            table.push(prod.data.encode(s, &coords) as u32);
        }
        tables.insert(s.clone(), table);
    }
    let map = SortedMapping::from_positions(
        source.carrier().clone(),
        prod.algebra.carrier().clone(),
        tables,
    )?;
    Homomorphism::new(source, prod.algebra.clone(), map)
}

/// Is `x` (a sortwise subset of the carrier) closed under the operations?
pub fn is_subalgebra(x: &SortedSet, a: &Algebra) -> Result<bool> {
    if !x.is_subset_of(a.carrier()) {
        return Err(Error::NotSubset(
            "candidate subalgebra is not a subset of the carrier".into(),
        ));
    }
    for (op, ar) in a.signature().ops() {
        let space = arg_space(x, ar);
        let mut coords = Vec::new();
        let mut amb = vec![0usize; ar.word.len()];
        for raw in 0..space.size {
            space.decode(raw, &mut coords);
            for (k, &c) in coords.iter().enumerate() {
                let name = &x.carrier(&ar.word[k])[c];
                amb[k] = a.carrier().position(&ar.word[k], name).unwrap();
            }
            let res = a.apply_pos(op, &amb);
            let res_name = &a.carrier().carrier(&ar.result)[res];
            if x.position(&ar.result, res_name).is_none() {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// The subalgebra induced on a closed subset, with its embedding.
pub fn induced_subalgebra(x: &SortedSet, a: &Algebra) -> Result<(Algebra, Homomorphism)> {
    if !is_subalgebra(x, a)? {
        return Err(Error::NotClosed(
            "subset is not closed under the operations".into(),
        ));
    }
    let mut tables = BTreeMap::new();
    for (op, ar) in a.signature().ops() {
        let space = arg_space(x, ar);
        let mut table = vec![0u32; space.size];
        let mut coords = Vec::new();
        let mut amb = vec![0usize; ar.word.len()];
        for raw in 0..space.size {
            space.decode(raw, &mut coords);
            for (k, &c) in coords.iter().enumerate() {
                let name = &x.carrier(&ar.word[k])[c];
                amb[k] = a.carrier().position(&ar.word[k], name).unwrap();
            }
            let res = a.apply_pos(op, &amb);
            let res_name = &a.carrier().carrier(&ar.result)[res];
            table[raw] = x.position(&ar.result, res_name).unwrap() as u32;
        }
        tables.insert(op.clone(), table);
    }
    let sub = Algebra::from_tables(a.signature().clone(), x.clone(), tables);
    let emb = Homomorphism::new(
        sub.clone(),
        a.clone(),
        SortedMapping::inclusion(x, a.carrier())?,
    )?;
    Ok((sub, emb))
}

/// Quotient algebra by a congruence, with the canonical projection.
/// The kernel of the projection is exactly the congruence.
pub fn quotient_algebra(phi: &Congruence) -> Result<(Algebra, Homomorphism)> {
    let a = phi.base();
    let (qset, proj) = sorted::quotient(a.carrier(), phi.eq())?;
    let mut tables = BTreeMap::new();
    for (op, ar) in a.signature().ops() {
        let space = arg_space(&qset, ar);
        let mut table = vec![0u32; space.size];
        let mut coords = Vec::new();
        let mut reps = vec![0usize; ar.word.len()];
        for raw in 0..space.size {
            space.decode(raw, &mut coords);
            for (k, &c) in coords.iter().enumerate() {
                reps[k] = phi.eq().blocks(&ar.word[k])[c][0] as usize;
            }
            let res = a.apply_pos(op, &reps);
            table[raw] = phi.eq().class_of_pos(&ar.result, res) as u32;
        }
        tables.insert(op.clone(), table);
    }
    let q = Algebra::from_tables(a.signature().clone(), qset, tables);
    let pr = Homomorphism::new(a.clone(), q.clone(), proj)?;
    Ok((q, pr))
}

/// Factors a homomorphism through a quotient: the unique `p` with
/// `f = p ∘ pr`. Requires the congruence to refine the kernel of `f`.
pub fn factor_hom(f: &Homomorphism, phi: &Congruence) -> Result<Homomorphism> {
    if phi.base() != f.source() {
        return Err(Error::SourceMismatch(
            "congruence is not on the source of the homomorphism".into(),
        ));
    }
    let (q, _) = quotient_algebra(phi)?;
    let map = sorted::factor_through(f.map(), phi.eq())?;
    Homomorphism::new(q, f.target().clone(), map)
}

/// Equalizer of a parallel pair of homomorphisms: the induced subalgebra
/// on the sorted-set equalizer. Closure is verified, not assumed.
pub fn equalizer_algebra(
    f: &Homomorphism,
    g: &Homomorphism,
) -> Result<(Algebra, Homomorphism)> {
    if f.source() != g.source() || f.target() != g.target() {
        return Err(Error::NotParallel(
            "equalizer requires a parallel pair of homomorphisms".into(),
        ));
    }
    let (eqset, _) = sorted::equalizer(f.map(), g.map())?;
    induced_subalgebra(&eqset, f.source())
}

/// A signature morphism: a sort translation together with an operation
/// translation that respects arities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignatureMorphism {
    source: Signature,
    target: Signature,
    sort_map: BTreeMap<SortId, SortId>,
    op_map: BTreeMap<String, String>,
}

impl SignatureMorphism {
    pub fn new(
        source: Signature,
        target: Signature,
        sort_map: BTreeMap<SortId, SortId>,
        op_map: BTreeMap<String, String>,
    ) -> Result<Self> {
        for s in source.sorts() {
            let t = sort_map
                .get(s)
                .ok_or_else(|| Error::Invalid(format!("sort {s} is not translated")))?;
            if !target.sorts().contains(t) {
                return Err(Error::Invalid(format!("{t} is not a target sort")));
            }
        }
        for (op, ar) in source.ops() {
            let d = op_map
                .get(op)
                .ok_or_else(|| Error::Invalid(format!("op {op} is not translated")))?;
            let tar = target
                .arity(d)
                .ok_or_else(|| Error::ArityMismatch(format!("{d} is not a target op")))?;
            let want = Arity {
                word: ar.word.iter().map(|s| sort_map[s].clone()).collect(),
                result: sort_map[&ar.result].clone(),
            };
            if *tar != want {
                return Err(Error::ArityMismatch(format!(
                    "op {op} translates to {d} of arity {tar}, expected {want}"
                )));
            }
        }
        Ok(SignatureMorphism {
            source,
            target,
            sort_map,
            op_map,
        })
    }

    pub fn source(&self) -> &Signature {
        &self.source
    }

    pub fn target(&self) -> &Signature {
        &self.target
    }
}

/// The reduct of an algebra along a signature morphism: carriers are
/// relabelled through the sort map and each operation takes the table of
/// its translation.
pub fn reduct(d: &SignatureMorphism, b: &Algebra) -> Result<Algebra> {
    if b.signature() != &d.target {
        return Err(Error::SignatureMismatch(
            "algebra is not over the target signature of the morphism".into(),
        ));
    }
    let sorts = d.source.sorts().to_vec();
    let carriers = sorts
        .iter()
        .map(|s| (s.clone(), b.carrier().carrier(&d.sort_map[s]).to_vec()))
        .collect();
    let carrier = SortedSet::new(sorts, carriers)?;
    let tables = d
        .source
        .ops()
        .keys()
        .map(|op| (op.clone(), b.table(&d.op_map[op]).to_vec()))
        .collect();
    Ok(Algebra::from_tables(d.source.clone(), carrier, tables))
}

/// The reduct of a homomorphism: the same per-sort tables, relabelled.
pub fn reduct_hom(d: &SignatureMorphism, f: &Homomorphism) -> Result<Homomorphism> {
    let src = reduct(d, f.source())?;
    let dst = reduct(d, f.target())?;
    let tables = d
        .source
        .sorts()
        .iter()
        .map(|s| (s.clone(), f.map().table(&d.sort_map[s]).to_vec()))
        .collect();
    let map = SortedMapping::from_positions(
        src.carrier().clone(),
        dst.carrier().clone(),
        tables,
    )?;
    Homomorphism::new(src, dst, map)
}

//! Finite nonempty upward directed preorders and isotone maps.
//!
//! Index sets live here as bit positions over a canonically ordered list
//! of element names; subsets are `u64` masks.

use crate::error::{Error, Result};

/// A finite preorder, validated to be nonempty, reflexive, transitive and
/// upward directed. Invalid input is rejected, never repaired.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Preorder {
    elems: Vec<String>,
    le: Vec<bool>, // n*n, row-major: le[i*n+j] == (i ≤ j)
}

impl Preorder {
    /// Builds a preorder from the full relation, given as pairs of element
    /// names. Elements are put into canonical (lexicographic) order.
    pub fn new(elems: Vec<String>, pairs: &[(String, String)]) -> Result<Self> {
        let (elems, le) = Self::assemble(elems, pairs)?;
        let p = Preorder { elems, le };
        p.validate()?;
        Ok(p)
    }

    /// Builds a preorder from generating pairs: the reflexive-transitive
    /// closure is taken first, then directedness is validated.
    pub fn from_generators(elems: Vec<String>, pairs: &[(String, String)]) -> Result<Self> {
        let (elems, mut le) = Self::assemble(elems, pairs)?;
        let n = elems.len();
        for i in 0..n {
            le[i * n + i] = true;
        }
        // Warshall
        for k in 0..n {
            for i in 0..n {
                if le[i * n + k] {
                    for j in 0..n {
                        if le[k * n + j] {
                            le[i * n + j] = true;
                        }
                    }
                }
            }
        }
        let p = Preorder { elems, le };
        p.validate()?;
        Ok(p)
    }

    fn assemble(
        mut elems: Vec<String>,
        pairs: &[(String, String)],
    ) -> Result<(Vec<String>, Vec<bool>)> {
        if elems.is_empty() {
            return Err(Error::Invalid("preorder must be nonempty".into()));
        }
        elems.sort();
        if elems.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Invalid("duplicate preorder element".into()));
        }
        let n = elems.len();
        if n > 64 {
            return Err(Error::CapExceeded(
                "preorders are capped at 64 elements".into(),
            ));
        }
        let mut le = vec![false; n * n];
        let pos = |name: &str| {
            elems
                .binary_search_by(|e| e.as_str().cmp(name))
                .map_err(|_| Error::Invalid(format!("unknown preorder element {name}")))
        };
        for (a, b) in pairs {
            le[pos(a)? * n + pos(b)?] = true;
        }
        Ok((elems, le))
    }

    fn validate(&self) -> Result<()> {
        let n = self.elems.len();
        for i in 0..n {
            if !self.le[i * n + i] {
                return Err(Error::Invalid(format!(
                    "preorder is not reflexive at {}",
                    self.elems[i]
                )));
            }
        }
        for i in 0..n {
            for j in 0..n {
                if !self.le[i * n + j] {
                    continue;
                }
                for k in 0..n {
                    if self.le[j * n + k] && !self.le[i * n + k] {
                        return Err(Error::Invalid(format!(
                            "preorder is not transitive: {} ≤ {} ≤ {} but not {} ≤ {}",
                            self.elems[i], self.elems[j], self.elems[k], self.elems[i],
                            self.elems[k]
                        )));
                    }
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                if !(0..n).any(|k| self.le[i * n + k] && self.le[j * n + k]) {
                    return Err(Error::Invalid(format!(
                        "preorder is not upward directed: {} and {} have no upper bound",
                        self.elems[i], self.elems[j]
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn elems(&self) -> &[String] {
        &self.elems
    }

    pub fn len(&self) -> usize {
        self.elems.len()
    }

    pub fn is_empty(&self) -> bool {
        false // validated nonempty
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.elems.binary_search_by(|e| e.as_str().cmp(name)).ok()
    }

    pub fn le(&self, i: usize, j: usize) -> bool {
        self.le[i * self.elems.len() + j]
    }

    /// All related pairs (i, j) with i ≤ j, as index pairs.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let n = self.elems.len();
        (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| self.le(i, j))
            .collect()
    }

    /// The final section `↑i` as a bit mask.
    pub fn up_set(&self, i: usize) -> u64 {
        let mut mask = 0u64;
        for j in 0..self.elems.len() {
            if self.le(i, j) {
                mask |= 1 << j;
            }
        }
        mask
    }

    /// Indices above every element (nonempty by directedness).
    pub fn global_upper_bounds(&self) -> u64 {
        (0..self.elems.len()).fold(!0u64 >> (64 - self.elems.len()), |acc, i| {
            acc & self.up_set(i)
        })
    }

    /// Common upper bounds of a set of indices.
    pub fn upper_bounds_of(&self, indices: &[usize]) -> u64 {
        let all = !0u64 >> (64 - self.elems.len());
        indices.iter().fold(all, |acc, &i| acc & self.up_set(i))
    }

    /// The restriction to the elements in `mask`, together with the map
    /// from new positions to old ones. The restriction must itself be a
    /// valid (directed, nonempty) preorder.
    pub fn restrict(&self, mask: u64) -> Result<(Preorder, Vec<usize>)> {
        let old: Vec<usize> = (0..self.elems.len()).filter(|i| mask >> i & 1 == 1).collect();
        if old.is_empty() {
            return Err(Error::Invalid("restriction to the empty set".into()));
        }
        let elems: Vec<String> = old.iter().map(|&i| self.elems[i].clone()).collect();
        let m = old.len();
        let mut le = vec![false; m * m];
        for a in 0..m {
            for b in 0..m {
                le[a * m + b] = self.le(old[a], old[b]);
            }
        }
        let p = Preorder { elems, le };
        p.validate()?;
        Ok((p, old))
    }
}

/// An order-preserving map between preorders, with its injectivity and
/// cofinality recorded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IsotoneMap {
    source: Preorder,
    target: Preorder,
    table: Vec<usize>,
    injective: bool,
    cofinal: bool,
}

impl IsotoneMap {
    pub fn new(source: Preorder, target: Preorder, table: Vec<usize>) -> Result<Self> {
        if table.len() != source.len() {
            return Err(Error::Invalid("isotone map table is not total".into()));
        }
        if table.iter().any(|&t| t >= target.len()) {
            return Err(Error::Invalid("isotone map lands outside the target".into()));
        }
        for i in 0..source.len() {
            for j in 0..source.len() {
                if source.le(i, j) && !target.le(table[i], table[j]) {
                    return Err(Error::Invalid(format!(
                        "map is not isotone at {} ≤ {}",
                        source.elems()[i],
                        source.elems()[j]
                    )));
                }
            }
        }
        let injective = {
            let mut seen = vec![false; target.len()];
            table.iter().all(|&t| !std::mem::replace(&mut seen[t], true))
        };
        // cofinal: every target element is below some image point
        let cofinal = (0..target.len()).all(|p| table.iter().any(|&t| target.le(p, t)));
        Ok(IsotoneMap {
            source,
            target,
            table,
            injective,
            cofinal,
        })
    }

    pub fn from_names(
        source: Preorder,
        target: Preorder,
        pairs: &[(String, String)],
    ) -> Result<Self> {
        let mut table = vec![usize::MAX; source.len()];
        for (a, b) in pairs {
            let i = source
                .position(a)
                .ok_or_else(|| Error::Invalid(format!("unknown source element {a}")))?;
            let p = target
                .position(b)
                .ok_or_else(|| Error::Invalid(format!("unknown target element {b}")))?;
            table[i] = p;
        }
        if table.contains(&usize::MAX) {
            return Err(Error::Invalid("isotone map table is not total".into()));
        }
        IsotoneMap::new(source, target, table)
    }

    pub fn identity(p: &Preorder) -> Self {
        IsotoneMap::new(p.clone(), p.clone(), (0..p.len()).collect()).unwrap()
    }

    pub fn source(&self) -> &Preorder {
        &self.source
    }

    pub fn target(&self) -> &Preorder {
        &self.target
    }

    pub fn apply(&self, i: usize) -> usize {
        self.table[i]
    }

    pub fn table(&self) -> &[usize] {
        &self.table
    }

    pub fn is_injective(&self) -> bool {
        self.injective
    }

    pub fn is_cofinal(&self) -> bool {
        self.cofinal
    }

    /// Image of a source-index mask.
    pub fn image_mask(&self, mask: u64) -> u64 {
        let mut out = 0u64;
        for (i, &t) in self.table.iter().enumerate() {
            if mask >> i & 1 == 1 {
                out |= 1 << t;
            }
        }
        out
    }

    pub fn then(&self, g: &IsotoneMap) -> Result<IsotoneMap> {
        if self.target != g.source {
            return Err(Error::SourceMismatch(
                "isotone map composition mismatch".into(),
            ));
        }
        IsotoneMap::new(
            self.source.clone(),
            g.target.clone(),
            self.table.iter().map(|&t| g.table[t]).collect(),
        )
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

    #[test]
    fn closure_and_validation() {
        let c = chain(3);
        assert!(c.le(0, 2));
        assert!(!c.le(2, 0));
        assert_eq!(c.up_set(0), 0b111);
        assert_eq!(c.up_set(2), 0b100);
        assert_eq!(c.global_upper_bounds(), 0b100);
    }

    #[test]
    fn non_directed_rejected() {
        // two incomparable points
        let err = Preorder::from_generators(vec!["a".into(), "b".into()], &[]);
        assert!(matches!(err, Err(Error::Invalid(_))));
        // adding a top makes it directed
        let ok = Preorder::from_generators(
            vec!["a".into(), "b".into(), "t".into()],
            &[("a".into(), "t".into()), ("b".into(), "t".into())],
        );
        assert!(ok.is_ok());
    }

    #[test]
    fn raw_relation_not_repaired() {
        // missing reflexivity
        let err = Preorder::new(vec!["a".into()], &[]);
        assert!(matches!(err, Err(Error::Invalid(_))));
        // missing transitivity
        let err2 = Preorder::new(
            vec!["a".into(), "b".into(), "c".into()],
            &[
                ("a".into(), "a".into()),
                ("b".into(), "b".into()),
                ("c".into(), "c".into()),
                ("a".into(), "b".into()),
                ("b".into(), "c".into()),
            ],
        );
        assert!(matches!(err2, Err(Error::Invalid(_))));
    }

    #[test]
    fn cycles_are_preorders() {
        let p = Preorder::from_generators(
            vec!["a".into(), "b".into()],
            &[("a".into(), "b".into()), ("b".into(), "a".into())],
        )
        .unwrap();
        assert!(p.le(0, 1) && p.le(1, 0));
        assert_eq!(p.global_upper_bounds(), 0b11);
    }

    #[test]
    fn restriction_to_up_set() {
        let c = chain(3);
        let (tail, old) = c.restrict(c.up_set(1)).unwrap();
        assert_eq!(tail.elems(), ["1", "2"]);
        assert_eq!(old, vec![1, 2]);
    }

    #[test]
    fn isotone_flags() {
        let c2 = chain(2);
        let c3 = chain(3);
        // inclusion of {0,1} into the 3-chain: not cofinal (2 is above the images)
        let inc = IsotoneMap::from_names(
            c2.clone(),
            c3.clone(),
            &[("0".into(), "0".into()), ("1".into(), "1".into())],
        )
        .unwrap();
        assert!(inc.is_injective());
        assert!(!inc.is_cofinal());
        // inclusion of a tail is cofinal
        let (tail, _) = c3.restrict(c3.up_set(1)).unwrap();
        let tail_inc = IsotoneMap::from_names(
            tail,
            c3.clone(),
            &[("1".into(), "1".into()), ("2".into(), "2".into())],
        )
        .unwrap();
        assert!(tail_inc.is_cofinal());
        // non-isotone rejected
        let err = IsotoneMap::from_names(
            c2,
            c3,
            &[("0".into(), "2".into()), ("1".into(), "0".into())],
        );
        assert!(err.is_err());
    }
}

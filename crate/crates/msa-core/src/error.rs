//! Crate-wide error type.

use std::fmt;

use crate::sorted::SortId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("source/target mismatch: {0}")]
    SourceMismatch(String),
    #[error("partition does not match the carrier: {0}")]
    PartitionMismatch(String),
    #[error("equivalence does not refine the kernel: {0}")]
    NotRefining(String),
    #[error("signature mismatch: {0}")]
    SignatureMismatch(String),
    #[error("carrier mismatch: {0}")]
    CarrierMismatch(String),
    #[error("not a sortwise subset: {0}")]
    NotSubset(String),
    #[error("not closed under the operations: {0}")]
    NotClosed(String),
    #[error("not a congruence: {0}")]
    NotCongruence(String),
    #[error("not a parallel pair: {0}")]
    NotParallel(String),
    #[error("arity mismatch: {0}")]
    ArityMismatch(String),
    #[error("bad tuple: {0}")]
    BadTuple(String),
    #[error("not a homomorphism: {0}")]
    NotAHomomorphism(String),
    #[error("not a filter basis: {0}")]
    NotABasis(String),
    #[error("ground mismatch: {0}")]
    GroundMismatch(String),
    #[error("not a cone: {0}")]
    NotACone(String),
    #[error("not a morphism of systems: {0}")]
    NotASystemMorphism(String),
    #[error("sort not supported: {0}")]
    SortNotSupported(String),
    #[error("subset not in the filter: {0}")]
    JNotInFilter(String),
    #[error("vote failed: {0}")]
    VoteFailure(Box<VoteWitness>),
    #[error("search cap exceeded: {0}")]
    CapExceeded(String),
    #[error("invalid structure: {0}")]
    Invalid(String),
}

/// Full witness of a failed ultrafilter vote: the member, the target index
/// and sort, the voted-on tuple, and the tally of voters per candidate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoteWitness {
    pub member: String,
    pub index: String,
    pub sort: SortId,
    pub tuple: Vec<String>,
    pub tally: Vec<(String, Vec<String>)>,
    pub reason: String,
}

impl fmt::Display for VoteWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} (member {}, index {}, sort {}, tuple ({}), tally:",
            self.reason,
            self.member,
            self.index,
            self.sort,
            self.tuple.join(",")
        )?;
        for (y, voters) in &self.tally {
            write!(f, " {}<-{{{}}}", y, voters.join(","))?;
        }
        write!(f, ")")
    }
}

//! Seeded random instance generation.
//!
//! Systems are produced as quotient chains: one base algebra, one chain
//! of congruences graded by depth in the index, and canonical factor
//! maps as transitions. The functor laws then hold by construction and
//! all transitions are surjective, so the family has constant support
//! unless a violation is injected deliberately through an extra sort
//! that no operation touches.
//!
//! The same seed and configuration always produce the same file.

use std::collections::BTreeMap;

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;

use crate::algebra::{Algebra, Arity, Congruence, OpRows, Signature};
use crate::dsl::{Decl, InstanceFile, OpDecl, OpRow, Sp};
use crate::error::{Error, Result};
use crate::preorder::Preorder;
use crate::search::congruence_generated_by;
use crate::sorted::{SortId, SortedEquivalence, SortedMapping, SortedSet};

/// Size caps and semantic flags for the generator. The caps mirror the
/// desk scale of the whole crate and are enforced, not advisory.
#[derive(Debug, Clone)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub max_sorts: usize,
    pub max_carrier: usize,
    pub max_ops: usize,
    pub max_index: usize,
    pub force_constant_support: bool,
    pub force_surjective_transitions: bool,
    pub inject_support_violation: bool,
}

impl GeneratorConfig {
    pub fn new(seed: u64) -> Self {
        GeneratorConfig {
            seed,
            max_sorts: 3,
            max_carrier: 3,
            max_ops: 3,
            max_index: 4,
            force_constant_support: false,
            force_surjective_transitions: false,
            inject_support_violation: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_sorts == 0 || self.max_sorts > 4 {
            return Err(Error::Invalid("sorts cap must be in 1..=4".into()));
        }
        if self.max_carrier == 0 || self.max_carrier > 4 {
            return Err(Error::Invalid("carrier cap must be in 1..=4".into()));
        }
        if self.max_ops > 4 {
            return Err(Error::Invalid("ops cap must be at most 4".into()));
        }
        if self.max_index == 0 || self.max_index > 5 {
            return Err(Error::Invalid("index cap must be in 1..=5".into()));
        }
        if self.inject_support_violation
            && (self.force_constant_support || self.force_surjective_transitions)
        {
            return Err(Error::Invalid(
                "a support violation contradicts the force flags".into(),
            ));
        }
        if self.inject_support_violation && (self.max_sorts < 2 || self.max_index < 2) {
            return Err(Error::Invalid(
                "a support violation needs at least two sorts and two indices".into(),
            ));
        }
        Ok(())
    }
}

/// Generates a complete instance file: a signature, a projective and an
/// inductive system over one preorder, the admissible ultrafilter and the
/// final-section filter, and a standalone family for the product checks.
pub fn generate(config: &GeneratorConfig) -> Result<InstanceFile> {
    config.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let violation = config.inject_support_violation;

    // sorts: the last one is reserved for the violation when requested
    let n_sorts = if violation {
        rng.gen_range(2..=config.max_sorts)
    } else {
        rng.gen_range(1..=config.max_sorts)
    };
    let sorts: Vec<SortId> = (0..n_sorts).map(|k| SortId::new(format!("s{k}"))).collect();
    let normal = if violation { n_sorts - 1 } else { n_sorts };
    let spare = if violation {
        Some(sorts[n_sorts - 1].clone())
    } else {
        None
    };

    // signature over the normal sorts
    let n_ops = rng.gen_range(0..=config.max_ops);
    let mut ops = BTreeMap::new();
    for k in 0..n_ops {
        let len = rng.gen_range(0..=2usize);
        let word: Vec<SortId> = (0..len)
            .map(|_| sorts[rng.gen_range(0..normal)].clone())
            .collect();
        let result = sorts[rng.gen_range(0..normal)].clone();
        ops.insert(format!("f{k}"), Arity { word, result });
    }
    let sig = Signature::new(sorts.clone(), ops)?;

    // base algebra with random total tables
    let base = random_algebra(&mut rng, &sig, normal, config.max_carrier, &spare, true);

    // directed index
    let (index, le_decls) = random_preorder(&mut rng, config.max_index, violation);
    let depth = depths(&index);
    let max_depth = *depth.iter().max().unwrap();

    // congruence chains: finer at the top for the projective system,
    // finer at the bottom for the inductive one
    let proj_chain = congruence_chain(&mut rng, &base, max_depth + 1);
    let ind_chain = proj_chain.clone();

    let top_mask = index.global_upper_bounds();
    let top_points: Vec<usize> = (0..index.len()).filter(|i| top_mask >> i & 1 == 1).collect();
    let principal = top_points[rng.gen_range(0..top_points.len())];

    // projective: algebra at i is the quotient at depth max_depth - d(i),
    // so deeper indices are finer and factor maps run downward
    let proj_level = |i: usize| max_depth - depth[i];
    // inductive: coarsen upward
    let ind_level = |i: usize| depth[i];

    // spare-sort inhabitation per index
    let proj_spare_inhabited =
        |i: usize| violation && top_mask >> i & 1 == 0; // empty exactly on the top cluster
    let ind_spare_inhabited = |i: usize| {
        // empty exactly on the minimal points with nothing strictly below
        !violation || (0..index.len()).any(|j| index.le(j, i) && !index.le(i, j))
    };

    let proj_algebras: Vec<Algebra> = (0..index.len())
        .map(|i| with_spare(&proj_chain[proj_level(i)].0, &spare, proj_spare_inhabited(i)))
        .collect();
    let ind_algebras: Vec<Algebra> = (0..index.len())
        .map(|i| with_spare(&ind_chain[ind_level(i)].0, &spare, ind_spare_inhabited(i)))
        .collect();

    // family: fresh random algebras; a violating family is inhabited at
    // the spare sort exactly on the top cluster, which pins the support
    // mismatch inside every final-section member
    let family_algebras: Vec<Algebra> = (0..index.len())
        .map(|i| {
            let inhabit = !violation || top_mask >> i & 1 == 1;
            random_algebra(&mut rng, &sig, normal, config.max_carrier, &spare, inhabit)
        })
        .collect();

    // assemble the declarations
    let mut file = InstanceFile {
        sorts: sorts.iter().map(|s| Sp::new(s.as_str())).collect(),
        decls: Vec::new(),
    };
    file.decls.push(signature_decl("SIG", &sig));
    for (i, a) in proj_algebras.iter().enumerate() {
        file.decls.push(algebra_decl(&format!("pa{i}"), "SIG", a));
    }
    for (i, a) in ind_algebras.iter().enumerate() {
        file.decls.push(algebra_decl(&format!("ia{i}"), "SIG", a));
    }
    for (i, a) in family_algebras.iter().enumerate() {
        file.decls.push(algebra_decl(&format!("fa{i}"), "SIG", a));
    }

    // transitions as factor maps, deduplicated into named homs
    let mut homs: Vec<(String, String, SortedMapping)> = Vec::new();
    let mut hom_decls = Vec::new();
    let mut proj_maps = Vec::new();
    let mut ind_maps = Vec::new();
    {
        let mut register = |src_name: String,
                            dst_name: String,
                            map: SortedMapping,
                            decls: &mut Vec<Decl>|
         -> String {
            if let Some(pos) = homs
                .iter()
                .position(|(s, d, m)| *s == src_name && *d == dst_name && *m == map)
            {
                return format!("h{pos}");
            }
            let name = format!("h{}", homs.len());
            decls.push(hom_decl(&name, &src_name, &dst_name, &map));
            homs.push((src_name, dst_name, map));
            name
        };
        for (i, j) in index.pairs() {
            if i == j {
                continue;
            }
            // projective travel: from j down to i
            let pmap = factor_between(
                &proj_chain[proj_level(j)],
                &proj_chain[proj_level(i)],
                &base,
            )?;
            let pmap = with_spare_map(
                &pmap,
                &proj_algebras[j],
                &proj_algebras[i],
                &spare,
            )?;
            let h = register(
                format!("pa{j}"),
                format!("pa{i}"),
                pmap,
                &mut hom_decls,
            );
            proj_maps.push((
                Sp::new(index.elems()[j].clone()),
                Sp::new(index.elems()[i].clone()),
                Sp::new(h),
            ));
            // inductive travel: from i up to j
            let imap =
                factor_between(&ind_chain[ind_level(i)], &ind_chain[ind_level(j)], &base)?;
            let imap =
                with_spare_map(&imap, &ind_algebras[i], &ind_algebras[j], &spare)?;
            let h = register(
                format!("ia{i}"),
                format!("ia{j}"),
                imap,
                &mut hom_decls,
            );
            ind_maps.push((
                Sp::new(index.elems()[i].clone()),
                Sp::new(index.elems()[j].clone()),
                Sp::new(h),
            ));
        }
    }
    file.decls.extend(hom_decls);

    file.decls.push(Decl::Preorder {
        name: Sp::new("I"),
        elems: index.elems().iter().map(Sp::new).collect(),
        le: le_decls
            .iter()
            .map(|(a, b)| (Sp::new(a), Sp::new(b)))
            .collect(),
    });
    file.decls.push(Decl::ProjSys {
        name: Sp::new("PS"),
        over: Sp::new("I"),
        at: (0..index.len())
            .map(|i| (Sp::new(index.elems()[i].clone()), Sp::new(format!("pa{i}"))))
            .collect(),
        maps: proj_maps,
    });
    file.decls.push(Decl::IndSys {
        name: Sp::new("DS"),
        over: Sp::new("I"),
        at: (0..index.len())
            .map(|i| (Sp::new(index.elems()[i].clone()), Sp::new(format!("ia{i}"))))
            .collect(),
        maps: ind_maps,
    });
    file.decls.push(Decl::Ultrafilter {
        name: Sp::new("U"),
        on: Sp::new("I"),
        point: Sp::new(index.elems()[principal].clone()),
    });
    file.decls.push(Decl::Filter {
        name: Sp::new("F"),
        on: Sp::new("I"),
    });
    file.decls.push(Decl::Family {
        name: Sp::new("FAM"),
        on: Sp::new("I"),
        at: (0..index.len())
            .map(|i| (Sp::new(index.elems()[i].clone()), Sp::new(format!("fa{i}"))))
            .collect(),
    });
    Ok(file)
}

fn random_algebra(
    rng: &mut ChaCha12Rng,
    sig: &Signature,
    normal: usize,
    max_carrier: usize,
    spare: &Option<SortId>,
    spare_inhabited: bool,
) -> Algebra {
    let mut carriers = BTreeMap::new();
    for (k, s) in sig.sorts().iter().enumerate() {
        if k < normal {
            let size = rng.gen_range(1..=max_carrier);
            carriers.insert(s.clone(), (0..size).map(|e| format!("e{e}")).collect());
        }
    }
    if let Some(t) = spare {
        carriers.insert(
            t.clone(),
            if spare_inhabited {
                vec!["z".to_string()]
            } else {
                Vec::new()
            },
        );
    }
    let carrier = SortedSet::new(sig.sorts().to_vec(), carriers).unwrap();
    let mut rows = OpRows::new();
    for (op, ar) in sig.ops() {
        let dims: Vec<usize> = ar.word.iter().map(|s| carrier.carrier(s).len()).collect();
        let result = carrier.carrier(&ar.result);
        let mut list = Vec::new();
        let total: usize = dims.iter().product();
        for raw in 0..total {
            let mut rest = raw;
            let mut args = Vec::new();
            for &d in dims.iter().rev() {
                args.push(rest % d);
                rest /= d;
            }
            args.reverse();
            let args: Vec<String> = args
                .iter()
                .zip(&ar.word)
                .map(|(&c, s)| carrier.carrier(s)[c].clone())
                .collect();
            let value = result[rng.gen_range(0..result.len())].clone();
            list.push((args, value));
        }
        rows.insert(op.clone(), list);
    }
    Algebra::from_rows(sig.clone(), carrier, &rows).unwrap()
}

/// A random nonempty upward directed preorder with its generating edges.
/// With a violation requested, the first element is strictly below
/// everything and nothing comes back down to it.
fn random_preorder(
    rng: &mut ChaCha12Rng,
    max_index: usize,
    violation: bool,
) -> (Preorder, Vec<(String, String)>) {
    let n = if violation {
        rng.gen_range(2..=max_index)
    } else {
        rng.gen_range(1..=max_index)
    };
    let elems: Vec<String> = (0..n).map(|i| format!("i{i}")).collect();
    let mut edges: Vec<(String, String)> = Vec::new();
    let lo = usize::from(violation);
    if violation {
        for b in 1..n {
            edges.push((elems[0].clone(), elems[b].clone()));
        }
    }
    for a in lo..n {
        for b in a + 1..n {
            if rng.gen_bool(0.4) {
                edges.push((elems[a].clone(), elems[b].clone()));
                // occasionally close a two-cycle into a cluster
                if !violation && rng.gen_bool(0.2) {
                    edges.push((elems[b].clone(), elems[a].clone()));
                }
            }
        }
    }
    if Preorder::from_generators(elems.clone(), &edges).is_err() {
        // force a top so the order is directed
        for a in lo..n.saturating_sub(1) {
            edges.push((elems[a].clone(), elems[n - 1].clone()));
        }
        edges.dedup();
    }
    let p = Preorder::from_generators(elems, &edges).unwrap();
    (p, edges)
}

/// Depth of each index: the longest strictly increasing chain below it.
fn depths(p: &Preorder) -> Vec<usize> {
    let n = p.len();
    let mut d = vec![0usize; n];
    for _ in 0..n {
        for i in 0..n {
            for j in 0..n {
                if p.le(j, i) && !p.le(i, j) {
                    d[i] = d[i].max(d[j] + 1);
                }
            }
        }
    }
    d
}

/// A chain of congruences on the base, finest first, together with the
/// quotient algebra and projection at each level.
type Level = (Algebra, crate::algebra::Homomorphism, Congruence);

fn congruence_chain(rng: &mut ChaCha12Rng, base: &Algebra, levels: usize) -> Vec<Level> {
    let mut out: Vec<Level> = Vec::with_capacity(levels);
    let mut current = Congruence::new(base.clone(), SortedEquivalence::discrete(base.carrier()))
        .unwrap();
    for _ in 0..levels {
        let (q, pr) = crate::algebra::quotient_algebra(&current).unwrap();
        out.push((q, pr, current.clone()));
        // choose a sort with at least two classes and merge two of them
        let mergeable: Vec<&SortId> = base
            .carrier()
            .sorts()
            .iter()
            .filter(|s| current.eq().blocks(s).len() >= 2)
            .collect();
        if mergeable.is_empty() || rng.gen_bool(0.3) {
            continue; // keep this level's congruence for the next one too
        }
        let s = mergeable[rng.gen_range(0..mergeable.len())].clone();
        let blocks = current.eq().blocks(&s);
        let a = rng.gen_range(0..blocks.len());
        let b = (a + 1 + rng.gen_range(0..blocks.len() - 1)) % blocks.len();
        let x = base.carrier().carrier(&s)[blocks[a][0] as usize].clone();
        let y = base.carrier().carrier(&s)[blocks[b][0] as usize].clone();
        let mut seed: Vec<(SortId, String, String)> = vec![(s, x, y)];
        for srt in base.carrier().sorts() {
            for blk in current.eq().blocks(srt) {
                for w in blk.windows(2) {
                    seed.push((
                        srt.clone(),
                        base.carrier().carrier(srt)[w[0] as usize].clone(),
                        base.carrier().carrier(srt)[w[1] as usize].clone(),
                    ));
                }
            }
        }
        current = congruence_generated_by(base, &seed).unwrap();
    }
    out
}

/// The factor map between two quotient levels of the same base: defined
/// on representatives, landing in classes. The source level must refine
/// the target level.
fn factor_between(fine: &Level, coarse: &Level, base: &Algebra) -> Result<SortedMapping> {
    let _ = base;
    crate::sorted::factor_through(coarse.1.map(), fine.2.eq())
}

/// Extends a factor map over the spare sort, whose component is either
/// empty or the constant on `z`.
fn with_spare_map(
    map: &SortedMapping,
    src: &Algebra,
    dst: &Algebra,
    spare: &Option<SortId>,
) -> Result<SortedMapping> {
    let Some(t) = spare else {
        return Ok(map.clone());
    };
    let mut tables: BTreeMap<SortId, Vec<u32>> = src
        .carrier()
        .sorts()
        .iter()
        .filter(|s| *s != t)
        .map(|s| (s.clone(), map.table(s).to_vec()))
        .collect();
    let spare_table = if src.carrier().carrier(t).is_empty() {
        Vec::new()
    } else {
        vec![0u32; src.carrier().carrier(t).len()]
    };
    if !src.carrier().carrier(t).is_empty() && dst.carrier().carrier(t).is_empty() {
        return Err(Error::Invalid(
            "spare sort cannot map from inhabited to empty".into(),
        ));
    }
    tables.insert(t.clone(), spare_table);
    SortedMapping::from_positions(src.carrier().clone(), dst.carrier().clone(), tables)
}

/// Rebuilds a quotient-level algebra over the full sort universe with the
/// spare sort inhabited or empty.
fn with_spare(a: &Algebra, spare: &Option<SortId>, inhabited: bool) -> Algebra {
    let Some(t) = spare else {
        return a.clone();
    };
    let mut carriers: BTreeMap<SortId, Vec<String>> = a
        .carrier()
        .sorts()
        .iter()
        .filter(|s| *s != t)
        .map(|s| (s.clone(), a.carrier().carrier(s).to_vec()))
        .collect();
    carriers.insert(
        t.clone(),
        if inhabited {
            vec!["z".to_string()]
        } else {
            Vec::new()
        },
    );
    let carrier = SortedSet::new(a.carrier().sorts().to_vec(), carriers).unwrap();
    Algebra::from_rows(a.signature().clone(), carrier, &a.rows()).unwrap()
}

fn signature_decl(name: &str, sig: &Signature) -> Decl {
    Decl::Signature {
        name: Sp::new(name),
        ops: sig
            .ops()
            .iter()
            .map(|(op, ar)| OpDecl {
                name: Sp::new(op),
                word: ar.word.iter().map(|s| Sp::new(s.as_str())).collect(),
                result: Sp::new(ar.result.as_str()),
            })
            .collect(),
    }
}

fn algebra_decl(name: &str, sig_name: &str, a: &Algebra) -> Decl {
    let carriers = a
        .carrier()
        .sorts()
        .iter()
        .map(|s| {
            (
                Sp::new(s.as_str()),
                a.carrier().carrier(s).iter().map(Sp::new).collect(),
            )
        })
        .collect();
    let ops = a
        .rows()
        .into_iter()
        .flat_map(|(op, list)| {
            list.into_iter().map(move |(args, value)| OpRow {
                op: Sp::new(&op),
                args: args.iter().map(Sp::new).collect(),
                value: Sp::new(value),
            })
        })
        .collect();
    Decl::Algebra {
        name: Sp::new(name),
        sig: Sp::new(sig_name),
        carriers,
        ops,
    }
}

fn hom_decl(name: &str, source: &str, target: &str, map: &SortedMapping) -> Decl {
    let lines = map
        .source()
        .sorts()
        .iter()
        .filter(|s| !map.source().carrier(s).is_empty())
        .map(|s| {
            (
                Sp::new(s.as_str()),
                map.source()
                    .carrier(s)
                    .iter()
                    .enumerate()
                    .map(|(p, e)| {
                        (
                            Sp::new(e),
                            Sp::new(&map.target().carrier(s)[map.apply_pos(s, p)]),
                        )
                    })
                    .collect(),
            )
        })
        .collect();
    Decl::Hom {
        name: Sp::new(name),
        source: Sp::new(source),
        target: Sp::new(target),
        lines,
    }
}

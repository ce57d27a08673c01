//! Check dispatch and JSON reports.
//!
//! A report is schema-stable JSON: one entry per executed check in
//! declaration order, each with a pass flag and, on failure, a witness.
//! Timings are kept in a separate section so the verdict bodies are
//! byte-stable for a fixed input.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::dsl::{self, Decl, InstanceFile, ResolvedInstance};
use crate::error::Error;
use crate::naturality::{naturality_check, tail_morphisms, ChangeOfIndex, SystemMorphism};
use crate::retraction::{Retraction, RetractionInstance};
use crate::systems::{
    prop25_check, prop28_check, prop29_check, inductive_limit, projective_limit,
    reduced_product,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub target: String,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Value>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema: u32,
    pub command: String,
    pub instance_digest: String,
    pub checks: Vec<CheckResult>,
    pub timings_ms: BTreeMap<String, u64>,
}

impl Report {
    fn new(command: &str, text: &str) -> Self {
        Report {
            schema: SCHEMA_VERSION,
            command: command.to_string(),
            instance_digest: digest(text),
            checks: Vec::new(),
            timings_ms: BTreeMap::new(),
        }
    }

    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    fn push(&mut self, name: &str, target: &str, pass: bool, witness: Option<Value>) {
        self.checks.push(CheckResult {
            name: name.to_string(),
            target: target.to_string(),
            pass,
            witness,
        });
    }

    fn diagnostics(&mut self, name: &str, diags: &[dsl::Diagnostic]) {
        for d in diags {
            self.push(
                name,
                "file",
                false,
                Some(json!({
                    "message": d.message,
                    "line": d.line,
                    "col": d.col,
                    "related": d.related,
                })),
            );
        }
    }

    fn time<T>(&mut self, key: &str, f: impl FnOnce(&mut Self) -> T) -> T {
        let start = Instant::now();
        let out = f(self);
        let ms = start.elapsed().as_millis() as u64;
        *self.timings_ms.entry(key.to_string()).or_insert(0) += ms;
        out
    }
}

pub fn digest(text: &str) -> String {
    let hash = Sha256::digest(text.as_bytes());
    hash.iter().map(|b| format!("{b:02x}")).collect()
}

/// Which family of checks to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckKind {
    All,
    Prop25,
    Prop28,
    Prop29,
    Retraction,
    Naturality,
    Cylinder,
    Composition,
}

impl CheckKind {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "all" => CheckKind::All,
            "prop25" => CheckKind::Prop25,
            "prop28" => CheckKind::Prop28,
            "prop29" => CheckKind::Prop29,
            "retraction" => CheckKind::Retraction,
            "naturality" => CheckKind::Naturality,
            "cylinder" => CheckKind::Cylinder,
            "composition" => CheckKind::Composition,
            _ => return None,
        })
    }

    fn wants(&self, other: CheckKind) -> bool {
        *self == CheckKind::All || *self == other
    }
}

/// Runs every structural validator over the declarations of a file.
pub fn cmd_validate(text: &str) -> Report {
    let mut report = Report::new("validate", text);
    report.time("validate", |report| {
        match dsl::parse_and_resolve(text) {
            Err(diags) => report.diagnostics("parse", &diags),
            Ok((file, resolved)) => {
                report.push("parse", "file", true, None);
                for decl in &file.decls {
                    let name = &decl.name().v;
                    // resolution already validated each item; re-run the
                    // item validators so the report lists them one by one
                    let pass = match decl {
                        Decl::Algebra { .. } => {
                            resolved.algebras[name].1.validate().is_empty()
                        }
                        Decl::ProjSys { .. } => {
                            resolved.projsys[name].1.validate().is_empty()
                        }
                        Decl::IndSys { .. } => resolved.indsys[name].1.validate().is_empty(),
                        _ => true,
                    };
                    report.push("validate", name, pass, None);
                }
            }
        }
    });
    report
}

/// Dispatches the named verdict operations on every applicable declared
/// instance.
pub fn cmd_check(text: &str, which: CheckKind, iso_cap: usize) -> Report {
    let mut report = Report::new(&format!("check {which:?}"), text);
    let resolved = match dsl::parse_and_resolve(text) {
        Err(diags) => {
            report.diagnostics("parse", &diags);
            return report;
        }
        Ok((_, r)) => r,
    };

    if which.wants(CheckKind::Prop25) {
        for (name, (_, sys)) in &resolved.indsys {
            report.time("prop25", |report| match prop25_check(sys, iso_cap) {
                Ok(v) => report.push(
                    "prop25",
                    name,
                    v.consistent,
                    Some(json!({
                        "constant_support": v.constant_support,
                        "iso_found": v.iso.is_some(),
                    })),
                ),
                Err(e) => report.push("prop25", name, false, Some(error_witness(&e))),
            });
        }
    }
    if which.wants(CheckKind::Prop28) {
        for (fname, (on, fam)) in &resolved.families {
            for (flt_name, (flt_on, flt)) in &resolved.filters {
                if flt_on != on {
                    continue;
                }
                let target = format!("{fname}/{flt_name}");
                let j = flt.intersection_all();
                report.time("prop28", |report| {
                    match prop28_check(fam, j, iso_cap) {
                        Ok(v) => report.push(
                            "prop28",
                            &target,
                            v.holds,
                            Some(json!({
                                "constant_support": v.constant_support,
                                "iso_found": v.iso.is_some(),
                                "subset": flt.subset_name(j),
                            })),
                        ),
                        Err(e) => {
                            report.push("prop28", &target, false, Some(error_witness(&e)))
                        }
                    }
                });
            }
        }
    }
    if which.wants(CheckKind::Prop29) {
        for (fname, (on, fam)) in &resolved.families {
            let filters = resolved
                .filters
                .iter()
                .map(|(n, (o, f))| (n.clone(), o.clone(), f.clone()))
                .chain(
                    resolved
                        .ultrafilters
                        .iter()
                        .map(|(n, (o, u))| (n.clone(), o.clone(), u.filter().clone())),
                );
            for (flt_name, flt_on, flt) in filters {
                if &flt_on != on {
                    continue;
                }
                let target = format!("{fname}/{flt_name}");
                report.time("prop29", |report| {
                    match prop29_check(fam, &flt, iso_cap) {
                        Ok(v) => report.push(
                            "prop29",
                            &target,
                            v.holds && v.consistent,
                            Some(json!({
                                "constant_support": v.constant_support,
                                "iso_found": v.iso.is_some(),
                                "remark_condition": v.remark_condition,
                            })),
                        ),
                        Err(e) => {
                            report.push("prop29", &target, false, Some(error_witness(&e)))
                        }
                    }
                });
            }
        }
    }

    let needs_retractions = which.wants(CheckKind::Retraction)
        || which.wants(CheckKind::Naturality)
        || which.wants(CheckKind::Cylinder)
        || which.wants(CheckKind::Composition);
    if !needs_retractions {
        return report;
    }

    for (sname, (on, sys)) in &resolved.projsys {
        for (uname, (u_on, ultra)) in &resolved.ultrafilters {
            if u_on != on {
                continue;
            }
            let target = format!("{sname}/{uname}");
            let inst = match RetractionInstance::new(sys.clone(), ultra.clone()) {
                Ok(inst) => inst,
                Err(e) => {
                    if which.wants(CheckKind::Retraction) {
                        report.push("retraction", &target, false, Some(error_witness(&e)));
                    }
                    continue;
                }
            };
            let retr = match report.time("retraction-build", |_| Retraction::build(inst)) {
                Ok(r) => r,
                Err(e) => {
                    report.push("retraction", &target, false, Some(error_witness(&e)));
                    continue;
                }
            };
            if which.wants(CheckKind::Retraction) {
                report.time("retraction", |report| match retr.retraction_check() {
                    Ok(v) => report.push(
                        "retraction",
                        &target,
                        v.pass && v.degenerate_shape_ok,
                        Some(json!({
                            "thread_failures": v.thread_failures,
                            "leg_identities": v.leg_identities,
                            "vote_sets_are_final_sections": v.vote_sets_are_final_sections,
                            "degenerate_shape_ok": v.degenerate_shape_ok,
                        })),
                    ),
                    Err(e) => {
                        report.push("retraction", &target, false, Some(error_witness(&e)))
                    }
                });
            }
            if which.wants(CheckKind::Naturality) {
                report.time("naturality", |report| {
                    // the identity morphism is always applicable
                    let ident = SystemMorphism::identity(sys);
                    match naturality_check(&retr, sys, &ident) {
                        Ok(v) => report.push(
                            "naturality",
                            &format!("{target}/identity"),
                            v.pass,
                            naturality_witness(&v),
                        ),
                        Err(e) => report.push(
                            "naturality",
                            &format!("{target}/identity"),
                            false,
                            Some(error_witness(&e)),
                        ),
                    }
                    // declared homs that assemble into a system morphism
                    for (bname, (b_on, bsys)) in &resolved.projsys {
                        if b_on != on {
                            continue;
                        }
                        if let Some(u) = assemble_morphism(&resolved, sys, sname, bsys, bname)
                        {
                            match naturality_check(&retr, bsys, &u) {
                                Ok(v) => report.push(
                                    "naturality",
                                    &format!("{target}/{bname}"),
                                    v.pass,
                                    naturality_witness(&v),
                                ),
                                Err(e) => report.push(
                                    "naturality",
                                    &format!("{target}/{bname}"),
                                    false,
                                    Some(error_witness(&e)),
                                ),
                            }
                        }
                    }
                });
            }
            if which.wants(CheckKind::Cylinder) || which.wants(CheckKind::Composition) {
                let tails = tail_morphisms(sys.index(), ultra);
                if which.wants(CheckKind::Cylinder) {
                    report.time("cylinder", |report| {
                        for (tname, phi) in &tails {
                            match ChangeOfIndex::build(phi, sys)
                                .and_then(|c| c.cylinder_check())
                            {
                                Ok(v) => report.push(
                                    "cylinder",
                                    &format!("{target}/{tname}"),
                                    v.pass,
                                    v.counterexample.as_ref().map(|(s, e)| {
                                        json!({ "sort": s, "element": e })
                                    }),
                                ),
                                Err(e) => report.push(
                                    "cylinder",
                                    &format!("{target}/{tname}"),
                                    false,
                                    Some(error_witness(&e)),
                                ),
                            }
                        }
                    });
                }
                if which.wants(CheckKind::Composition) {
                    report.time("composition", |report| {
                        // nested tails compose into the full index
                        for (tname, psi) in &tails {
                            for (t2name, phi) in tail_morphisms(
                                psi.src().preorder(),
                                psi.src().ultra(),
                            ) {
                                match crate::naturality::composition_check(&phi, psi, sys) {
                                    Ok(v) => report.push(
                                        "composition",
                                        &format!("{target}/{t2name}∘{tname}"),
                                        v.pass,
                                        if v.pass {
                                            None
                                        } else {
                                            Some(json!({
                                                "p_composes": v.p_composes,
                                                "q_composes": v.q_composes,
                                                "composed_cylinder": v.composed_cylinder,
                                                "counterexample": v.counterexample,
                                            }))
                                        },
                                    ),
                                    Err(e) => report.push(
                                        "composition",
                                        &format!("{target}/{t2name}∘{tname}"),
                                        false,
                                        Some(error_witness(&e)),
                                    ),
                                }
                            }
                        }
                    });
                }
            }
        }
    }
    report
}

/// Assembles a system morphism from declared homs when every index has
/// exactly one declared hom between the respective algebra names and the
/// family commutes; anything else is silently not a morphism.
fn assemble_morphism(
    resolved: &ResolvedInstance,
    a: &crate::systems::ProjectiveSystem,
    a_name: &str,
    b: &crate::systems::ProjectiveSystem,
    b_name: &str,
) -> Option<SystemMorphism> {
    if a_name == b_name {
        return None; // the identity case is handled separately
    }
    let alg_name = |resolved: &ResolvedInstance, alg: &crate::algebra::Algebra| {
        resolved
            .algebras
            .iter()
            .find(|(_, (_, v))| v == alg)
            .map(|(n, _)| n.clone())
    };
    let mut components = Vec::new();
    for i in 0..a.index().len() {
        let src_name = alg_name(resolved, a.algebra(i))?;
        let dst_name = alg_name(resolved, b.algebra(i))?;
        let mut candidates = resolved
            .homs
            .values()
            .filter(|(s, d, _)| *s == src_name && *d == dst_name)
            .map(|(_, _, m)| m.clone());
        let first = candidates.next()?;
        if candidates.next().is_some() {
            return None;
        }
        components.push(first);
    }
    SystemMorphism::new(a, b, components).ok()
}

fn error_witness(e: &Error) -> Value {
    json!({ "error": e.to_string() })
}

fn naturality_witness(v: &crate::naturality::NaturalityVerdict) -> Option<Value> {
    if v.pass {
        None
    } else {
        Some(json!({
            "square_commutes": v.square_commutes,
            "section_natural": v.section_natural,
            "section_right_inverse": v.section_right_inverse,
            "counterexample": v.counterexample,
        }))
    }
}

/// What to construct and emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstructKind {
    ProjLim,
    IndLim,
    Ultraproduct,
    ReducedProduct,
}

impl ConstructKind {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "projlim" => ConstructKind::ProjLim,
            "indlim" => ConstructKind::IndLim,
            "ultraproduct" => ConstructKind::Ultraproduct,
            "reducedproduct" => ConstructKind::ReducedProduct,
            _ => return None,
        })
    }
}

/// Computes the requested construction for the named declaration and
/// emits it as a fresh instance file (sorts, signature, and the computed
/// algebra with canonically relabelled carriers).
pub fn cmd_construct(
    text: &str,
    what: ConstructKind,
    name: &str,
) -> Result<(Report, String), Report> {
    let mut report = Report::new(&format!("construct {what:?} {name}"), text);
    let (file, resolved) = match dsl::parse_and_resolve(text) {
        Err(diags) => {
            report.diagnostics("parse", &diags);
            return Err(report);
        }
        Ok(x) => x,
    };
    let outcome = report.time("construct", |_| -> std::result::Result<_, Error> {
        let (algebra, label) = match what {
            ConstructKind::ProjLim => {
                let (_, sys) = resolved
                    .projsys
                    .get(name)
                    .ok_or_else(|| Error::Invalid(format!("no projsys named {name}")))?;
                (projective_limit(sys)?.apex, format!("{name}_projlim"))
            }
            ConstructKind::IndLim => {
                let (_, sys) = resolved
                    .indsys
                    .get(name)
                    .ok_or_else(|| Error::Invalid(format!("no indsys named {name}")))?;
                (inductive_limit(sys)?.apex, format!("{name}_indlim"))
            }
            ConstructKind::Ultraproduct => {
                let (on, fam) = resolved
                    .families
                    .get(name)
                    .ok_or_else(|| Error::Invalid(format!("no family named {name}")))?;
                let mut ultras = resolved
                    .ultrafilters
                    .values()
                    .filter(|(o, _)| o == on)
                    .map(|(_, u)| u);
                let u = ultras
                    .next()
                    .ok_or_else(|| Error::Invalid("no ultrafilter on the family's preorder".into()))?;
                if ultras.next().is_some() {
                    return Err(Error::Invalid(
                        "several ultrafilters on the family's preorder; name is ambiguous"
                            .into(),
                    ));
                }
                (
                    reduced_product(fam, u.filter())?,
                    format!("{name}_ultraproduct"),
                )
            }
            ConstructKind::ReducedProduct => {
                let (on, fam) = resolved
                    .families
                    .get(name)
                    .ok_or_else(|| Error::Invalid(format!("no family named {name}")))?;
                let mut filters = resolved
                    .filters
                    .values()
                    .filter(|(o, _)| o == on)
                    .map(|(_, f)| f);
                let f = filters
                    .next()
                    .ok_or_else(|| Error::Invalid("no filter on the family's preorder".into()))?;
                if filters.next().is_some() {
                    return Err(Error::Invalid(
                        "several filters on the family's preorder; name is ambiguous".into(),
                    ));
                }
                (
                    reduced_product(fam, f)?,
                    format!("{name}_reducedproduct"),
                )
            }
        };
        // the emitted file reuses the signature declaration of the input
        let sig_name = match what {
            ConstructKind::ProjLim => sys_sig_name(&file, &resolved, name, true),
            ConstructKind::IndLim => sys_sig_name(&file, &resolved, name, false),
            _ => family_sig_name(&file, name),
        }
        .ok_or_else(|| Error::Invalid("cannot locate the signature declaration".into()))?;
        let sig_decl = file
            .decls
            .iter()
            .find(|d| matches!(d, Decl::Signature { name, .. } if name.v == sig_name))
            .cloned()
            .ok_or_else(|| Error::Invalid("cannot locate the signature declaration".into()))?;
        let out_file = InstanceFile {
            sorts: file.sorts.clone(),
            decls: vec![sig_decl, dsl::algebra_to_decl(&label, &sig_name, &algebra)],
        };
        Ok((algebra, out_file))
    });
    match outcome {
        Ok((algebra, out_file)) => {
            let sizes: BTreeMap<String, usize> = algebra
                .carrier()
                .sorts()
                .iter()
                .map(|s| (s.to_string(), algebra.carrier().carrier(s).len()))
                .collect();
            report.push(
                "construct",
                name,
                true,
                Some(json!({ "carrier_sizes": sizes })),
            );
            Ok((report, dsl::serialize(&out_file)))
        }
        Err(e) => {
            report.push("construct", name, false, Some(error_witness(&e)));
            Err(report)
        }
    }
}

fn sys_sig_name(
    file: &InstanceFile,
    resolved: &ResolvedInstance,
    name: &str,
    projective: bool,
) -> Option<String> {
    let first_alg = file.decls.iter().find_map(|d| match d {
        Decl::ProjSys { name: n, at, .. } if projective && n.v == name => {
            at.first().map(|(_, a)| a.v.clone())
        }
        Decl::IndSys { name: n, at, .. } if !projective && n.v == name => {
            at.first().map(|(_, a)| a.v.clone())
        }
        _ => None,
    })?;
    resolved.algebras.get(&first_alg).map(|(s, _)| s.clone())
}

fn family_sig_name(file: &InstanceFile, name: &str) -> Option<String> {
    let first_alg = file.decls.iter().find_map(|d| match d {
        Decl::Family { name: n, at, .. } if n.v == name => {
            at.first().map(|(_, a)| a.v.clone())
        }
        _ => None,
    })?;
    file.decls.iter().find_map(|d| match d {
        Decl::Algebra { name: n, sig, .. } if n.v == first_alg => Some(sig.v.clone()),
        _ => None,
    })
}

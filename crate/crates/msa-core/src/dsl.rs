//! The `.msa` instance format: a line-oriented declarative text format
//! for sorts, signatures, algebras, homomorphisms, preorders, systems,
//! filters and families, with located diagnostics.
//!
//! Users declare generating data: preorders are given by generating pairs
//! (the reflexive-transitive closure is taken, then directedness is
//! validated) and systems by generating transition maps (the composition
//! closure is synthesized and checked for coherence; a composite
//! reachable two ways must agree). Identity transitions are implicit.
//!
//! One file is one instance universe: a single `sorts` declaration, which
//! every later declaration refers back to.

use std::collections::BTreeMap;
use std::fmt;

use crate::algebra::{Algebra, Arity, OpRows, Signature};
use crate::filters::{final_sections_filter, Filter, Ultrafilter};
use crate::preorder::Preorder;
use crate::sorted::{SortId, SortedMapping, SortedSet};
use crate::systems::{AlgebraFamily, InductiveSystem, ProjectiveSystem};

const KEYWORDS: &[&str] = &[
    "sorts",
    "signature",
    "op",
    "algebra",
    "over",
    "carrier",
    "hom",
    "preorder",
    "elems",
    "le",
    "projsys",
    "indsys",
    "at",
    "map",
    "filter",
    "ultrafilter",
    "on",
    "principal",
    "finalsections",
    "family",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

/// A located message; every parse or validation failure produces at
/// least one of these.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
    pub line: u32,
    pub col: u32,
    pub related: Option<String>,
}

impl Diagnostic {
    fn error(message: impl Into<String>, line: u32, col: u32) -> Self {
        Diagnostic {
            severity: Severity::Error,
            message: message.into(),
            line,
            col,
            related: None,
        }
    }

    fn with_related(mut self, name: &str) -> Self {
        self.related = Some(name.to_string());
        self
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.message)
    }
}

/// An identifier with its source position. Positions are carried for
/// diagnostics but ignored by equality, so round-tripped files compare
/// equal structurally.
#[derive(Debug, Clone, Eq)]
pub struct Sp {
    pub v: String,
    pub line: u32,
    pub col: u32,
}

impl Sp {
    pub fn new(v: impl Into<String>) -> Self {
        Sp {
            v: v.into(),
            line: 0,
            col: 0,
        }
    }
}

impl PartialEq for Sp {
    fn eq(&self, other: &Self) -> bool {
        self.v == other.v
    }
}

impl fmt::Display for Sp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.v)
    }
}

/// One table row of an algebra declaration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpRow {
    pub op: Sp,
    pub args: Vec<Sp>,
    pub value: Sp,
}

/// An operation declaration of a signature.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpDecl {
    pub name: Sp,
    pub word: Vec<Sp>,
    pub result: Sp,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decl {
    Signature {
        name: Sp,
        ops: Vec<OpDecl>,
    },
    Algebra {
        name: Sp,
        sig: Sp,
        carriers: Vec<(Sp, Vec<Sp>)>,
        ops: Vec<OpRow>,
    },
    Hom {
        name: Sp,
        source: Sp,
        target: Sp,
        lines: Vec<(Sp, Vec<(Sp, Sp)>)>,
    },
    Preorder {
        name: Sp,
        elems: Vec<Sp>,
        le: Vec<(Sp, Sp)>,
    },
    ProjSys {
        name: Sp,
        over: Sp,
        at: Vec<(Sp, Sp)>,
        maps: Vec<(Sp, Sp, Sp)>,
    },
    IndSys {
        name: Sp,
        over: Sp,
        at: Vec<(Sp, Sp)>,
        maps: Vec<(Sp, Sp, Sp)>,
    },
    Ultrafilter {
        name: Sp,
        on: Sp,
        point: Sp,
    },
    Filter {
        name: Sp,
        on: Sp,
    },
    Family {
        name: Sp,
        on: Sp,
        at: Vec<(Sp, Sp)>,
    },
}

impl Decl {
    pub fn name(&self) -> &Sp {
        match self {
            Decl::Signature { name, .. }
            | Decl::Algebra { name, .. }
            | Decl::Hom { name, .. }
            | Decl::Preorder { name, .. }
            | Decl::ProjSys { name, .. }
            | Decl::IndSys { name, .. }
            | Decl::Ultrafilter { name, .. }
            | Decl::Filter { name, .. }
            | Decl::Family { name, .. } => name,
        }
    }
}

/// A parsed instance file: the sort universe and the declarations in
/// source order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct InstanceFile {
    pub sorts: Vec<Sp>,
    pub decls: Vec<Decl>,
}

/// The semantic values of a file, every one already validated.
#[derive(Debug, Clone, Default)]
pub struct ResolvedInstance {
    pub sorts: Vec<SortId>,
    pub signatures: BTreeMap<String, Signature>,
    pub algebras: BTreeMap<String, (String, Algebra)>,
    pub homs: BTreeMap<String, (String, String, SortedMapping)>,
    pub preorders: BTreeMap<String, Preorder>,
    pub projsys: BTreeMap<String, (String, ProjectiveSystem)>,
    pub indsys: BTreeMap<String, (String, InductiveSystem)>,
    pub filters: BTreeMap<String, (String, Filter)>,
    pub ultrafilters: BTreeMap<String, (String, Ultrafilter)>,
    pub families: BTreeMap<String, (String, AlgebraFamily)>,
}

// ---------------------------------------------------------------- lexer

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Punct(&'static str),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: u32,
    col: u32,
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '⋆'
}

fn lex(text: &str) -> Result<Vec<Token>, Vec<Diagnostic>> {
    let mut toks = Vec::new();
    let mut line = 1u32;
    let mut col = 1u32;
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        if c == '\n' {
            chars.next();
            line += 1;
            col = 1;
        } else if c.is_whitespace() {
            chars.next();
            col += 1;
        } else if c == '#' {
            while let Some(&c) = chars.peek() {
                if c == '\n' {
                    break;
                }
                chars.next();
                col += 1;
            }
        } else if is_ident_char(c) {
            let (l0, c0) = (line, col);
            let mut s = String::new();
            while let Some(&c) = chars.peek() {
                if is_ident_char(c) {
                    s.push(c);
                    chars.next();
                    col += 1;
                } else {
                    break;
                }
            }
            toks.push(Token {
                tok: Tok::Ident(s),
                line: l0,
                col: c0,
            });
        } else if c == '-' {
            let (l0, c0) = (line, col);
            chars.next();
            col += 1;
            if chars.peek() == Some(&'>') {
                chars.next();
                col += 1;
                toks.push(Token {
                    tok: Tok::Punct("->"),
                    line: l0,
                    col: c0,
                });
            } else {
                return Err(vec![Diagnostic::error("expected `->`", l0, c0)]);
            }
        } else {
            let p = match c {
                '{' => "{",
                '}' => "}",
                '(' => "(",
                ')' => ")",
                ':' => ":",
                ';' => ";",
                '=' => "=",
                ',' => ",",
                _ => {
                    return Err(vec![Diagnostic::error(
                        format!("unexpected character `{c}`"),
                        line,
                        col,
                    )])
                }
            };
            toks.push(Token {
                tok: Tok::Punct(p),
                line,
                col,
            });
            chars.next();
            col += 1;
        }
    }
    Ok(toks)
}

// --------------------------------------------------------------- parser

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

type PResult<T> = Result<T, Diagnostic>;

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn here(&self) -> (u32, u32) {
        self.peek()
            .map(|t| (t.line, t.col))
            .or_else(|| self.toks.last().map(|t| (t.line, t.col + 1)))
            .unwrap_or((1, 1))
    }

    fn at_ident(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Token { tok: Tok::Ident(s), .. }) if s == kw)
    }

    fn at_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Some(Token { tok: Tok::Punct(q), .. }) if *q == p)
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        self.pos += 1;
        t
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<()> {
        if self.at_ident(kw) {
            self.bump();
            Ok(())
        } else {
            let (l, c) = self.here();
            Err(Diagnostic::error(format!("expected `{kw}`"), l, c))
        }
    }

    fn expect_punct(&mut self, p: &str) -> PResult<()> {
        if self.at_punct(p) {
            self.bump();
            Ok(())
        } else {
            let (l, c) = self.here();
            Err(Diagnostic::error(format!("expected `{p}`"), l, c))
        }
    }

    /// A non-keyword identifier.
    fn expect_name(&mut self) -> PResult<Sp> {
        let (l, c) = self.here();
        match self.peek() {
            Some(Token { tok: Tok::Ident(s), .. }) if !KEYWORDS.contains(&s.as_str()) => {
                let s = s.clone();
                self.bump();
                Ok(Sp { v: s, line: l, col: c })
            }
            Some(Token { tok: Tok::Ident(s), .. }) => Err(Diagnostic::error(
                format!("`{s}` is a keyword and cannot be used as a name"),
                l,
                c,
            )),
            _ => Err(Diagnostic::error("expected an identifier", l, c)),
        }
    }

    fn names_until_punct(&mut self, stop: &str) -> PResult<Vec<Sp>> {
        let mut out = Vec::new();
        while !self.at_punct(stop) {
            out.push(self.expect_name()?);
        }
        Ok(out)
    }

    fn file(&mut self) -> PResult<InstanceFile> {
        let mut file = InstanceFile::default();
        let mut seen_sorts = false;
        while let Some(t) = self.peek() {
            let (l, c) = (t.line, t.col);
            match &t.tok {
                Tok::Ident(kw) => match kw.as_str() {
                    "sorts" => {
                        if seen_sorts {
                            return Err(Diagnostic::error(
                                "a file declares its sorts once",
                                l,
                                c,
                            ));
                        }
                        if !file.decls.is_empty() {
                            return Err(Diagnostic::error(
                                "`sorts` must be the first declaration",
                                l,
                                c,
                            ));
                        }
                        seen_sorts = true;
                        self.bump();
                        let names = self.names_until_punct(";")?;
                        if names.is_empty() {
                            return Err(Diagnostic::error(
                                "at least one sort is required",
                                l,
                                c,
                            ));
                        }
                        self.expect_punct(";")?;
                        file.sorts = names;
                    }
                    "signature" => {
                        let d = self.signature()?;
                        file.decls.push(d);
                    }
                    "algebra" => {
                        let d = self.algebra()?;
                        file.decls.push(d);
                    }
                    "hom" => {
                        let d = self.hom()?;
                        file.decls.push(d);
                    }
                    "preorder" => {
                        let d = self.preorder()?;
                        file.decls.push(d);
                    }
                    "projsys" | "indsys" => {
                        let d = self.system()?;
                        file.decls.push(d);
                    }
                    "ultrafilter" | "filter" => {
                        let d = self.filter()?;
                        file.decls.push(d);
                    }
                    "family" => {
                        let d = self.family()?;
                        file.decls.push(d);
                    }
                    other => {
                        return Err(Diagnostic::error(
                            format!("unknown declaration `{other}`"),
                            l,
                            c,
                        ))
                    }
                },
                Tok::Punct(p) => {
                    return Err(Diagnostic::error(format!("unexpected `{p}`"), l, c))
                }
            }
            if !file.decls.is_empty() && !seen_sorts {
                let (l, c) = self.here();
                return Err(Diagnostic::error(
                    "declarations require a preceding `sorts` declaration",
                    l,
                    c,
                ));
            }
        }
        Ok(file)
    }

    fn signature(&mut self) -> PResult<Decl> {
        self.expect_kw("signature")?;
        let name = self.expect_name()?;
        self.expect_punct("{")?;
        let mut ops = Vec::new();
        while self.at_ident("op") {
            self.bump();
            let op_name = self.expect_name()?;
            self.expect_punct(":")?;
            let word = self.names_until_punct("->")?;
            self.expect_punct("->")?;
            let result = self.expect_name()?;
            self.expect_punct(";")?;
            ops.push(OpDecl {
                name: op_name,
                word,
                result,
            });
        }
        self.expect_punct("}")?;
        Ok(Decl::Signature { name, ops })
    }

    fn algebra(&mut self) -> PResult<Decl> {
        self.expect_kw("algebra")?;
        let name = self.expect_name()?;
        self.expect_kw("over")?;
        let sig = self.expect_name()?;
        self.expect_punct("{")?;
        let mut carriers = Vec::new();
        while self.at_ident("carrier") {
            self.bump();
            let sort = self.expect_name()?;
            self.expect_punct("=")?;
            self.expect_punct("{")?;
            let elems = self.names_until_punct("}")?;
            self.expect_punct("}")?;
            self.expect_punct(";")?;
            carriers.push((sort, elems));
        }
        let mut ops = Vec::new();
        while self.at_ident("op") {
            self.bump();
            let op = self.expect_name()?;
            self.expect_punct("(")?;
            let mut args = Vec::new();
            if !self.at_punct(")") {
                args.push(self.expect_name()?);
                while self.at_punct(",") {
                    self.bump();
                    args.push(self.expect_name()?);
                }
            }
            self.expect_punct(")")?;
            self.expect_punct("=")?;
            let value = self.expect_name()?;
            self.expect_punct(";")?;
            ops.push(OpRow { op, args, value });
        }
        self.expect_punct("}")?;
        Ok(Decl::Algebra {
            name,
            sig,
            carriers,
            ops,
        })
    }

    fn hom(&mut self) -> PResult<Decl> {
        self.expect_kw("hom")?;
        let name = self.expect_name()?;
        self.expect_punct(":")?;
        let source = self.expect_name()?;
        self.expect_punct("->")?;
        let target = self.expect_name()?;
        self.expect_punct("{")?;
        let mut lines = Vec::new();
        while !self.at_punct("}") {
            let sort = self.expect_name()?;
            self.expect_punct(":")?;
            let mut pairs = Vec::new();
            loop {
                let from = self.expect_name()?;
                self.expect_punct("->")?;
                let to = self.expect_name()?;
                pairs.push((from, to));
                if self.at_punct(",") {
                    self.bump();
                } else {
                    break;
                }
            }
            self.expect_punct(";")?;
            lines.push((sort, pairs));
        }
        self.expect_punct("}")?;
        Ok(Decl::Hom {
            name,
            source,
            target,
            lines,
        })
    }

    fn preorder(&mut self) -> PResult<Decl> {
        self.expect_kw("preorder")?;
        let name = self.expect_name()?;
        self.expect_punct("{")?;
        self.expect_kw("elems")?;
        let elems = self.names_until_punct(";")?;
        if elems.is_empty() {
            let (l, c) = self.here();
            return Err(Diagnostic::error("a preorder is nonempty", l, c));
        }
        self.expect_punct(";")?;
        let mut le = Vec::new();
        while self.at_ident("le") {
            self.bump();
            let a = self.expect_name()?;
            let b = self.expect_name()?;
            self.expect_punct(";")?;
            le.push((a, b));
        }
        self.expect_punct("}")?;
        Ok(Decl::Preorder { name, elems, le })
    }

    fn system(&mut self) -> PResult<Decl> {
        let projective = self.at_ident("projsys");
        self.bump();
        let name = self.expect_name()?;
        self.expect_kw("over")?;
        let over = self.expect_name()?;
        self.expect_punct("{")?;
        let mut at = Vec::new();
        while self.at_ident("at") {
            self.bump();
            let idx = self.expect_name()?;
            self.expect_punct("=")?;
            let alg = self.expect_name()?;
            self.expect_punct(";")?;
            at.push((idx, alg));
        }
        let mut maps = Vec::new();
        while self.at_ident("map") {
            self.bump();
            let from = self.expect_name()?;
            self.expect_punct("->")?;
            let to = self.expect_name()?;
            self.expect_punct("=")?;
            let h = self.expect_name()?;
            self.expect_punct(";")?;
            maps.push((from, to, h));
        }
        self.expect_punct("}")?;
        Ok(if projective {
            Decl::ProjSys {
                name,
                over,
                at,
                maps,
            }
        } else {
            Decl::IndSys {
                name,
                over,
                at,
                maps,
            }
        })
    }

    fn filter(&mut self) -> PResult<Decl> {
        let ultra = self.at_ident("ultrafilter");
        self.bump();
        let name = self.expect_name()?;
        self.expect_kw("on")?;
        let on = self.expect_name()?;
        self.expect_punct("=")?;
        let d = if ultra {
            self.expect_kw("principal")?;
            let point = self.expect_name()?;
            Decl::Ultrafilter { name, on, point }
        } else {
            self.expect_kw("finalsections")?;
            Decl::Filter { name, on }
        };
        self.expect_punct(";")?;
        Ok(d)
    }

    fn family(&mut self) -> PResult<Decl> {
        self.expect_kw("family")?;
        let name = self.expect_name()?;
        self.expect_kw("on")?;
        let on = self.expect_name()?;
        self.expect_punct("{")?;
        let mut at = Vec::new();
        while self.at_ident("at") {
            self.bump();
            let idx = self.expect_name()?;
            self.expect_punct("=")?;
            let alg = self.expect_name()?;
            self.expect_punct(";")?;
            at.push((idx, alg));
        }
        self.expect_punct("}")?;
        Ok(Decl::Family { name, on, at })
    }
}

/// Parses and fully validates an instance file.
pub fn parse(text: &str) -> Result<InstanceFile, Vec<Diagnostic>> {
    let (file, _resolved) = parse_and_resolve(text)?;
    Ok(file)
}

/// Parses and returns both the syntax tree and the resolved values.
pub fn parse_and_resolve(
    text: &str,
) -> Result<(InstanceFile, ResolvedInstance), Vec<Diagnostic>> {
    let toks = lex(text)?;
    let mut parser = Parser { toks, pos: 0 };
    let file = parser.file().map_err(|d| vec![d])?;
    let resolved = resolve(&file)?;
    Ok((file, resolved))
}

// ------------------------------------------------------------- resolver

fn resolve(file: &InstanceFile) -> Result<ResolvedInstance, Vec<Diagnostic>> {
    let mut diags = Vec::new();
    let mut out = ResolvedInstance::default();

    {
        let mut seen = BTreeMap::new();
        for s in &file.sorts {
            if seen.insert(s.v.clone(), ()).is_some() {
                diags.push(
                    Diagnostic::error(format!("duplicate sort {s}"), s.line, s.col)
                        .with_related(&s.v),
                );
            }
        }
    }
    out.sorts = file.sorts.iter().map(|s| SortId::new(&s.v)).collect();

    let mut names: BTreeMap<String, ()> = BTreeMap::new();
    for decl in &file.decls {
        let name = decl.name();
        if names.insert(name.v.clone(), ()).is_some() {
            diags.push(
                Diagnostic::error(format!("duplicate name {name}"), name.line, name.col)
                    .with_related(&name.v),
            );
            continue;
        }
        match decl {
            Decl::Signature { name, ops } => {
                resolve_signature(&mut out, &mut diags, name, ops);
            }
            Decl::Algebra {
                name,
                sig,
                carriers,
                ops,
            } => {
                resolve_algebra(&mut out, &mut diags, name, sig, carriers, ops);
            }
            Decl::Hom {
                name,
                source,
                target,
                lines,
            } => {
                resolve_hom(&mut out, &mut diags, name, source, target, lines);
            }
            Decl::Preorder { name, elems, le } => {
                let elem_names: Vec<String> = elems.iter().map(|e| e.v.clone()).collect();
                let pairs: Vec<(String, String)> = le
                    .iter()
                    .map(|(a, b)| (a.v.clone(), b.v.clone()))
                    .collect();
                for (a, _) in le {
                    if !elem_names.contains(&a.v) {
                        diags.push(Diagnostic::error(
                            format!("unknown element {a}"),
                            a.line,
                            a.col,
                        ));
                    }
                }
                match Preorder::from_generators(elem_names, &pairs) {
                    Ok(p) => {
                        out.preorders.insert(name.v.clone(), p);
                    }
                    Err(e) => diags.push(
                        Diagnostic::error(e.to_string(), name.line, name.col)
                            .with_related(&name.v),
                    ),
                }
            }
            Decl::ProjSys {
                name,
                over,
                at,
                maps,
            } => {
                resolve_system(&mut out, &mut diags, name, over, at, maps, true);
            }
            Decl::IndSys {
                name,
                over,
                at,
                maps,
            } => {
                resolve_system(&mut out, &mut diags, name, over, at, maps, false);
            }
            Decl::Ultrafilter { name, on, point } => {
                let Some(p) = out.preorders.get(&on.v) else {
                    diags.push(Diagnostic::error(
                        format!("unknown preorder {on}"),
                        on.line,
                        on.col,
                    ));
                    continue;
                };
                match p.position(&point.v) {
                    None => diags.push(Diagnostic::error(
                        format!("{point} is not an element of {on}"),
                        point.line,
                        point.col,
                    )),
                    Some(pt) => match Ultrafilter::principal(p.elems().to_vec(), pt) {
                        Ok(u) => {
                            out.ultrafilters.insert(name.v.clone(), (on.v.clone(), u));
                        }
                        Err(e) => diags.push(Diagnostic::error(
                            e.to_string(),
                            name.line,
                            name.col,
                        )),
                    },
                }
            }
            Decl::Filter { name, on } => {
                let Some(p) = out.preorders.get(&on.v) else {
                    diags.push(Diagnostic::error(
                        format!("unknown preorder {on}"),
                        on.line,
                        on.col,
                    ));
                    continue;
                };
                match final_sections_filter(p) {
                    Ok(f) => {
                        out.filters.insert(name.v.clone(), (on.v.clone(), f));
                    }
                    Err(e) => {
                        diags.push(Diagnostic::error(e.to_string(), name.line, name.col))
                    }
                }
            }
            Decl::Family { name, on, at } => {
                let Some(p) = out.preorders.get(&on.v).cloned() else {
                    diags.push(Diagnostic::error(
                        format!("unknown preorder {on}"),
                        on.line,
                        on.col,
                    ));
                    continue;
                };
                if let Some(algebras) = collect_assignment(&out, &mut diags, &p, at) {
                    match AlgebraFamily::new(p.elems().to_vec(), algebras) {
                        Ok(f) => {
                            out.families.insert(name.v.clone(), (on.v.clone(), f));
                        }
                        Err(e) => diags.push(Diagnostic::error(
                            e.to_string(),
                            name.line,
                            name.col,
                        )),
                    }
                }
            }
        }
    }
    if diags.is_empty() {
        Ok(out)
    } else {
        Err(diags)
    }
}

fn resolve_signature(
    out: &mut ResolvedInstance,
    diags: &mut Vec<Diagnostic>,
    name: &Sp,
    ops: &[OpDecl],
) {
    let mut op_map = BTreeMap::new();
    let mut ok = true;
    for op in ops {
        let sort_of = |s: &Sp, diags: &mut Vec<Diagnostic>| -> Option<SortId> {
            if out.sorts.iter().any(|x| x.as_str() == s.v) {
                Some(SortId::new(&s.v))
            } else {
                diags.push(Diagnostic::error(
                    format!("unknown sort {s}"),
                    s.line,
                    s.col,
                ));
                None
            }
        };
        let word: Option<Vec<SortId>> =
            op.word.iter().map(|s| sort_of(s, diags)).collect();
        let result = sort_of(&op.result, diags);
        match (word, result) {
            (Some(word), Some(result)) => {
                if op_map
                    .insert(op.name.v.clone(), Arity { word, result })
                    .is_some()
                {
                    diags.push(Diagnostic::error(
                        format!("duplicate op {}", op.name),
                        op.name.line,
                        op.name.col,
                    ));
                    ok = false;
                }
            }
            _ => ok = false,
        }
    }
    if !ok {
        return;
    }
    match Signature::new(out.sorts.clone(), op_map) {
        Ok(sig) => {
            out.signatures.insert(name.v.clone(), sig);
        }
        Err(e) => diags.push(Diagnostic::error(e.to_string(), name.line, name.col)),
    }
}

fn resolve_algebra(
    out: &mut ResolvedInstance,
    diags: &mut Vec<Diagnostic>,
    name: &Sp,
    sig_name: &Sp,
    carriers: &[(Sp, Vec<Sp>)],
    ops: &[OpRow],
) {
    let Some(sig) = out.signatures.get(&sig_name.v).cloned() else {
        diags.push(Diagnostic::error(
            format!("unknown signature {sig_name}"),
            sig_name.line,
            sig_name.col,
        ));
        return;
    };
    let mut carrier_map: BTreeMap<SortId, Vec<String>> = BTreeMap::new();
    let mut ok = true;
    for (sort, elems) in carriers {
        if !out.sorts.iter().any(|x| x.as_str() == sort.v) {
            diags.push(Diagnostic::error(
                format!("unknown sort {sort}"),
                sort.line,
                sort.col,
            ));
            ok = false;
            continue;
        }
        if carrier_map
            .insert(
                SortId::new(&sort.v),
                elems.iter().map(|e| e.v.clone()).collect(),
            )
            .is_some()
        {
            diags.push(Diagnostic::error(
                format!("carrier at {sort} declared twice"),
                sort.line,
                sort.col,
            ));
            ok = false;
        }
    }
    if !ok {
        return;
    }
    let carrier = match SortedSet::new(out.sorts.clone(), carrier_map) {
        Ok(c) => c,
        Err(e) => {
            diags.push(Diagnostic::error(e.to_string(), name.line, name.col));
            return;
        }
    };
    let mut rows = OpRows::new();
    for row in ops {
        rows.entry(row.op.v.clone()).or_default().push((
            row.args.iter().map(|a| a.v.clone()).collect(),
            row.value.v.clone(),
        ));
    }
    match Algebra::from_rows(sig, carrier, &rows) {
        Ok(a) => {
            out.algebras.insert(name.v.clone(), (sig_name.v.clone(), a));
        }
        Err(defects) => {
            for d in defects {
                // point the diagnostic at the exact offending token
                let row_named = |op: &str, args: &[String]| {
                    ops.iter().find(|r| {
                        r.op.v == op
                            && r.args.len() == args.len()
                            && r.args.iter().zip(args).all(|(a, b)| a.v == *b)
                    })
                };
                use crate::algebra::AlgebraDefect as D;
                let pos = match &d {
                    D::Codomain { op, tuple, .. } => {
                        row_named(op, tuple).map(|r| (r.value.line, r.value.col))
                    }
                    D::DuplicateRow { op, tuple } | D::BadArgument { op, tuple } => {
                        row_named(op, tuple)
                            .map(|r| (r.op.line, r.op.col))
                            .or_else(|| {
                                ops.iter()
                                    .find(|r| r.op.v == *op)
                                    .map(|r| (r.op.line, r.op.col))
                            })
                    }
                    D::Totality { op, .. }
                    | D::UnknownOp { op }
                    | D::MissingTable { op } => ops
                        .iter()
                        .find(|r| r.op.v == *op)
                        .map(|r| (r.op.line, r.op.col)),
                }
                .unwrap_or((name.line, name.col));
                diags.push(
                    Diagnostic::error(d.to_string(), pos.0, pos.1).with_related(&name.v),
                );
            }
        }
    }
}

fn resolve_hom(
    out: &mut ResolvedInstance,
    diags: &mut Vec<Diagnostic>,
    name: &Sp,
    source: &Sp,
    target: &Sp,
    lines: &[(Sp, Vec<(Sp, Sp)>)],
) {
    let Some((_, src)) = out.algebras.get(&source.v).cloned() else {
        diags.push(Diagnostic::error(
            format!("unknown algebra {source}"),
            source.line,
            source.col,
        ));
        return;
    };
    let Some((_, dst)) = out.algebras.get(&target.v).cloned() else {
        diags.push(Diagnostic::error(
            format!("unknown algebra {target}"),
            target.line,
            target.col,
        ));
        return;
    };
    let mut table: BTreeMap<SortId, Vec<(String, String)>> = BTreeMap::new();
    for (sort, pairs) in lines {
        if !out.sorts.iter().any(|x| x.as_str() == sort.v) {
            diags.push(Diagnostic::error(
                format!("unknown sort {sort}"),
                sort.line,
                sort.col,
            ));
            return;
        }
        table
            .entry(SortId::new(&sort.v))
            .or_default()
            .extend(pairs.iter().map(|(a, b)| (a.v.clone(), b.v.clone())));
    }
    match SortedMapping::from_names(src.carrier().clone(), dst.carrier().clone(), &table) {
        Ok(map) => match crate::algebra::is_homomorphism(&map, &src, &dst) {
            Ok(true) => {
                out.homs
                    .insert(name.v.clone(), (source.v.clone(), target.v.clone(), map));
            }
            Ok(false) => diags.push(
                Diagnostic::error(
                    format!("{name} does not commute with the operations"),
                    name.line,
                    name.col,
                )
                .with_related(&name.v),
            ),
            Err(e) => diags.push(Diagnostic::error(e.to_string(), name.line, name.col)),
        },
        Err(e) => diags.push(Diagnostic::error(e.to_string(), name.line, name.col)),
    }
}

fn collect_assignment(
    out: &ResolvedInstance,
    diags: &mut Vec<Diagnostic>,
    p: &Preorder,
    at: &[(Sp, Sp)],
) -> Option<Vec<Algebra>> {
    let mut algebras: Vec<Option<(String, Algebra)>> = vec![None; p.len()];
    let mut ok = true;
    for (idx, alg) in at {
        let Some(pos) = p.position(&idx.v) else {
            diags.push(Diagnostic::error(
                format!("unknown index {idx}"),
                idx.line,
                idx.col,
            ));
            ok = false;
            continue;
        };
        let Some((_, a)) = out.algebras.get(&alg.v) else {
            diags.push(Diagnostic::error(
                format!("unknown algebra {alg}"),
                alg.line,
                alg.col,
            ));
            ok = false;
            continue;
        };
        if algebras[pos].is_some() {
            diags.push(Diagnostic::error(
                format!("index {idx} assigned twice"),
                idx.line,
                idx.col,
            ));
            ok = false;
        }
        algebras[pos] = Some((alg.v.clone(), a.clone()));
    }
    for (pos, slot) in algebras.iter().enumerate() {
        if slot.is_none() {
            diags.push(Diagnostic::error(
                format!("index {} has no algebra", p.elems()[pos]),
                at.first().map(|(i, _)| i.line).unwrap_or(1),
                at.first().map(|(i, _)| i.col).unwrap_or(1),
            ));
            ok = false;
        }
    }
    if ok {
        Some(algebras.into_iter().map(|o| o.unwrap().1).collect())
    } else {
        None
    }
}

#[allow(clippy::too_many_arguments)]
fn resolve_system(
    out: &mut ResolvedInstance,
    diags: &mut Vec<Diagnostic>,
    name: &Sp,
    over: &Sp,
    at: &[(Sp, Sp)],
    maps: &[(Sp, Sp, Sp)],
    projective: bool,
) {
    let Some(p) = out.preorders.get(&over.v).cloned() else {
        diags.push(Diagnostic::error(
            format!("unknown preorder {over}"),
            over.line,
            over.col,
        ));
        return;
    };
    let Some(algebras) = collect_assignment(out, diags, &p, at) else {
        return;
    };
    let alg_names: BTreeMap<usize, String> = at
        .iter()
        .filter_map(|(idx, alg)| p.position(&idx.v).map(|pos| (pos, alg.v.clone())))
        .collect();

    // declared travel maps: from -> to in the direction of the mapping
    let mut travel: BTreeMap<(usize, usize), SortedMapping> = BTreeMap::new();
    let mut ok = true;
    for (from, to, hname) in maps {
        let (Some(f), Some(t)) = (p.position(&from.v), p.position(&to.v)) else {
            diags.push(Diagnostic::error(
                format!("unknown index in map {from} -> {to}"),
                from.line,
                from.col,
            ));
            ok = false;
            continue;
        };
        let le_ok = if projective { p.le(t, f) } else { p.le(f, t) };
        if !le_ok {
            diags.push(Diagnostic::error(
                format!("map {from} -> {to} runs against the order"),
                from.line,
                from.col,
            ));
            ok = false;
            continue;
        }
        let Some((hsrc, hdst, hmap)) = out.homs.get(&hname.v) else {
            diags.push(Diagnostic::error(
                format!("unknown hom {hname}"),
                hname.line,
                hname.col,
            ));
            ok = false;
            continue;
        };
        if hsrc != &alg_names[&f] || hdst != &alg_names[&t] {
            diags.push(Diagnostic::error(
                format!("hom {hname} does not run from the algebra at {from} to the algebra at {to}"),
                hname.line,
                hname.col,
            ));
            ok = false;
            continue;
        }
        if travel.insert((f, t), hmap.clone()).is_some() {
            diags.push(Diagnostic::error(
                format!("map {from} -> {to} declared twice"),
                from.line,
                from.col,
            ));
            ok = false;
        }
    }
    if !ok {
        return;
    }
    // identities, then the composition closure; a composite reachable two
    // ways must agree
    for i in 0..p.len() {
        let id = SortedMapping::identity(algebras[i].carrier());
        if let Some(existing) = travel.get(&(i, i)) {
            if existing != &id {
                diags.push(Diagnostic::error(
                    format!("map at {} is not the identity", p.elems()[i]),
                    name.line,
                    name.col,
                ));
                return;
            }
        }
        travel.insert((i, i), id);
    }
    loop {
        let mut added = Vec::new();
        for (&(a, b), f) in &travel {
            for (&(b2, c), g) in &travel {
                if b != b2 || a == c && a == b {
                    continue;
                }
                let composite = f.then(g).unwrap();
                match travel.get(&(a, c)) {
                    Some(existing) => {
                        if existing != &composite {
                            diags.push(Diagnostic::error(
                                format!(
                                    "transitions from {} to {} are incoherent",
                                    p.elems()[a], p.elems()[c]
                                ),
                                name.line,
                                name.col,
                            ));
                            return;
                        }
                    }
                    None => added.push(((a, c), composite)),
                }
            }
        }
        if added.is_empty() {
            break;
        }
        for (k, v) in added {
            // two different new derivations of the same composite
            if let Some(existing) = travel.get(&k) {
                if existing != &v {
                    diags.push(Diagnostic::error(
                        format!(
                            "transitions from {} to {} are incoherent",
                            p.elems()[k.0],
                            p.elems()[k.1]
                        ),
                        name.line,
                        name.col,
                    ));
                    return;
                }
            }
            travel.insert(k, v);
        }
    }
    // every order pair must be covered, in system key convention
    let mut transitions = BTreeMap::new();
    for (i, j) in p.pairs() {
        let key = if projective { (j, i) } else { (i, j) };
        match travel.get(&key) {
            Some(m) => {
                transitions.insert((i, j), m.clone());
            }
            None => {
                diags.push(Diagnostic::error(
                    format!(
                        "no transition between {} and {} is declared or derivable",
                        p.elems()[i],
                        p.elems()[j]
                    ),
                    name.line,
                    name.col,
                ));
                return;
            }
        }
    }
    if projective {
        match ProjectiveSystem::new(p, algebras, transitions) {
            Ok(sys) => {
                out.projsys.insert(name.v.clone(), (over.v.clone(), sys));
            }
            Err(e) => diags.push(Diagnostic::error(e.to_string(), name.line, name.col)),
        }
    } else {
        match InductiveSystem::new(p, algebras, transitions) {
            Ok(sys) => {
                out.indsys.insert(name.v.clone(), (over.v.clone(), sys));
            }
            Err(e) => diags.push(Diagnostic::error(e.to_string(), name.line, name.col)),
        }
    }
}

// ----------------------------------------------------------- serializer

/// Canonical text for an instance file; `parse` of the output yields a
/// structurally equal file.
pub fn serialize(file: &InstanceFile) -> String {
    let mut w = String::new();
    if !file.sorts.is_empty() {
        let names: Vec<&str> = file.sorts.iter().map(|s| s.v.as_str()).collect();
        w.push_str(&format!("sorts {};\n", names.join(" ")));
    }
    for decl in &file.decls {
        w.push('\n');
        match decl {
            Decl::Signature { name, ops } => {
                w.push_str(&format!("signature {name} {{\n"));
                for op in ops {
                    let word: Vec<&str> = op.word.iter().map(|s| s.v.as_str()).collect();
                    if word.is_empty() {
                        w.push_str(&format!("  op {} : -> {};\n", op.name, op.result));
                    } else {
                        w.push_str(&format!(
                            "  op {} : {} -> {};\n",
                            op.name,
                            word.join(" "),
                            op.result
                        ));
                    }
                }
                w.push_str("}\n");
            }
            Decl::Algebra {
                name,
                sig,
                carriers,
                ops,
            } => {
                w.push_str(&format!("algebra {name} over {sig} {{\n"));
                for (sort, elems) in carriers {
                    let names: Vec<&str> = elems.iter().map(|e| e.v.as_str()).collect();
                    w.push_str(&format!(
                        "  carrier {sort} = {{ {} }};\n",
                        names.join(" ")
                    ));
                }
                for row in ops {
                    let args: Vec<&str> = row.args.iter().map(|a| a.v.as_str()).collect();
                    w.push_str(&format!(
                        "  op {}({}) = {};\n",
                        row.op,
                        args.join(","),
                        row.value
                    ));
                }
                w.push_str("}\n");
            }
            Decl::Hom {
                name,
                source,
                target,
                lines,
            } => {
                w.push_str(&format!("hom {name} : {source} -> {target} {{\n"));
                for (sort, pairs) in lines {
                    let body: Vec<String> = pairs
                        .iter()
                        .map(|(a, b)| format!("{a} -> {b}"))
                        .collect();
                    w.push_str(&format!("  {sort}: {};\n", body.join(", ")));
                }
                w.push_str("}\n");
            }
            Decl::Preorder { name, elems, le } => {
                w.push_str(&format!("preorder {name} {{\n"));
                let names: Vec<&str> = elems.iter().map(|e| e.v.as_str()).collect();
                w.push_str(&format!("  elems {};\n", names.join(" ")));
                for (a, b) in le {
                    w.push_str(&format!("  le {a} {b};\n"));
                }
                w.push_str("}\n");
            }
            Decl::ProjSys {
                name,
                over,
                at,
                maps,
            }
            | Decl::IndSys {
                name,
                over,
                at,
                maps,
            } => {
                let kw = if matches!(decl, Decl::ProjSys { .. }) {
                    "projsys"
                } else {
                    "indsys"
                };
                w.push_str(&format!("{kw} {name} over {over} {{\n"));
                for (idx, alg) in at {
                    w.push_str(&format!("  at {idx} = {alg};\n"));
                }
                for (from, to, h) in maps {
                    w.push_str(&format!("  map {from} -> {to} = {h};\n"));
                }
                w.push_str("}\n");
            }
            Decl::Ultrafilter { name, on, point } => {
                w.push_str(&format!("ultrafilter {name} on {on} = principal {point};\n"));
            }
            Decl::Filter { name, on } => {
                w.push_str(&format!("filter {name} on {on} = finalsections;\n"));
            }
            Decl::Family { name, on, at } => {
                w.push_str(&format!("family {name} on {on} {{\n"));
                for (idx, alg) in at {
                    w.push_str(&format!("  at {idx} = {alg};\n"));
                }
                w.push_str("}\n");
            }
        }
    }
    w
}

/// Renders a computed algebra as a declaration, relabelling the carrier
/// elements canonically (generated names like tuples or tagged classes
/// are not identifiers).
pub fn algebra_to_decl(name: &str, sig_name: &str, a: &Algebra) -> Decl {
    let mut renames: BTreeMap<SortId, Vec<String>> = BTreeMap::new();
    for s in a.carrier().sorts() {
        let n = a.carrier().carrier(s).len();
        let width = if n <= 1 { 1 } else { (n - 1).to_string().len() };
        renames.insert(
            s.clone(),
            (0..n).map(|k| format!("x{k:0width$}")).collect(),
        );
    }
    let carriers = a
        .carrier()
        .sorts()
        .iter()
        .map(|s| {
            (
                Sp::new(s.as_str()),
                renames[s].iter().map(Sp::new).collect(),
            )
        })
        .collect();
    let mut ops = Vec::new();
    for (op, ar) in a.signature().ops() {
        let space = a.space(op);
        let mut coords = Vec::new();
        for raw in 0..space.size {
            space.decode(raw, &mut coords);
            let args: Vec<Sp> = coords
                .iter()
                .zip(&ar.word)
                .map(|(&c, s)| Sp::new(&renames[s][c]))
                .collect();
            let value = Sp::new(&renames[&ar.result][a.table(op)[raw] as usize]);
            ops.push(OpRow {
                op: Sp::new(op),
                args,
                value,
            });
        }
    }
    Decl::Algebra {
        name: Sp::new(name),
        sig: Sp::new(sig_name),
        carriers,
        ops,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const CHAIN2: &str = "\
sorts s;

signature SIG {
  op f : s -> s;
}

algebra A over SIG {
  carrier s = { 0 1 };
  op f(0) = 0;
  op f(1) = 1;
}

hom t : A -> A {
  s: 0 -> 0, 1 -> 1;
}

preorder I {
  elems i0 i1;
  le i0 i1;
}

projsys PS over I {
  at i0 = A;
  at i1 = A;
  map i1 -> i0 = t;
}

indsys DS over I {
  at i0 = A;
  at i1 = A;
  map i0 -> i1 = t;
}

ultrafilter U on I = principal i1;
filter F on I = finalsections;

family FAM on I {
  at i0 = A;
  at i1 = A;
}
";

    #[test]
    fn empty_file_parses() {
        let f = parse("").unwrap();
        assert!(f.sorts.is_empty());
        assert!(f.decls.is_empty());
        assert_eq!(parse(&serialize(&f)).unwrap(), f);
    }

    #[test]
    fn chain2_loads_and_validates() {
        let (file, resolved) = parse_and_resolve(CHAIN2).unwrap();
        assert_eq!(file.decls.len(), 9);
        assert!(resolved.projsys.contains_key("PS"));
        assert!(resolved.indsys.contains_key("DS"));
        assert!(resolved.ultrafilters.contains_key("U"));
        let (_, sys) = &resolved.projsys["PS"];
        assert!(sys.validate().is_empty());
        // identity transitions synthesized
        assert_eq!(sys.transitions().len(), 3);
    }

    #[test]
    fn chain2_round_trips() {
        let file = parse(CHAIN2).unwrap();
        let text = serialize(&file);
        let again = parse(&text).unwrap();
        assert_eq!(file, again);
        assert_eq!(text, serialize(&again));
    }

    #[test]
    fn codomain_defect_located() {
        let text = CHAIN2.replace("op f(1) = 1;", "op f(1) = z;");
        let errs = parse(&text).unwrap_err();
        assert!(errs.iter().any(|d| d.message.contains("z")));
        // the diagnostic points into the algebra declaration
        let d = &errs[0];
        assert!(d.line >= 8 && d.line <= 12, "line {} col {}", d.line, d.col);
    }

    #[test]
    fn dangling_reference_located() {
        let text = CHAIN2.replace("at i0 = A;\n  at i1 = A;\n  map i1 -> i0 = t;", "at i0 = A;\n  at i1 = B;\n  map i1 -> i0 = t;");
        let errs = parse(&text).unwrap_err();
        assert!(errs.iter().any(|d| d.message.contains("unknown algebra B")));
    }

    #[test]
    fn syntax_error_located() {
        let text = "sorts s;\nsignature {\n}";
        let errs = parse(text).unwrap_err();
        assert_eq!(errs[0].line, 2);
    }

    #[test]
    fn non_homomorphism_rejected() {
        // a constant map between fixed-point-free swap algebras
        let text = "\
sorts s;
signature SIG { op f : s -> s; }
algebra A over SIG {
  carrier s = { 0 1 };
  op f(0) = 1;
  op f(1) = 0;
}
hom bad : A -> A { s: 0 -> 1, 1 -> 1; }
";
        let errs = parse(text).unwrap_err();
        assert!(errs.iter().any(|d| d.message.contains("commute")));
        assert_eq!(errs[0].line, 8);
    }

    #[test]
    fn incoherent_transitions_rejected() {
        // a 3-chain where the declared long map disagrees with the
        // composite of the two short ones
        let text = "\
sorts s;
signature SIG { op f : s -> s; }
algebra A over SIG {
  carrier s = { 0 1 };
  op f(0) = 0;
  op f(1) = 1;
}
hom id : A -> A { s: 0 -> 0, 1 -> 1; }
hom sw : A -> A { s: 0 -> 1, 1 -> 0; }
preorder I { elems i0 i1 i2; le i0 i1; le i1 i2; }
projsys PS over I {
  at i0 = A; at i1 = A; at i2 = A;
  map i1 -> i0 = id;
  map i2 -> i1 = id;
  map i2 -> i0 = sw;
}
";
        let errs = parse(text).unwrap_err();
        assert!(errs.iter().any(|d| d.message.contains("incoherent")));
    }

    #[test]
    fn composite_transitions_synthesized() {
        let text = "\
sorts s;
signature SIG { op f : s -> s; }
algebra A over SIG {
  carrier s = { 0 1 };
  op f(0) = 0;
  op f(1) = 1;
}
hom sw : A -> A { s: 0 -> 1, 1 -> 0; }
preorder I { elems i0 i1 i2; le i0 i1; le i1 i2; }
projsys PS over I {
  at i0 = A; at i1 = A; at i2 = A;
  map i1 -> i0 = sw;
  map i2 -> i1 = sw;
}
";
        let (_, resolved) = parse_and_resolve(text).unwrap();
        let (_, sys) = &resolved.projsys["PS"];
        // the synthesized long transition is the double swap = identity
        assert_eq!(
            sys.transition(0, 2),
            &SortedMapping::identity(sys.algebra(2).carrier())
        );
    }

    #[test]
    fn keyword_names_rejected() {
        let errs = parse("sorts s;\nsignature op { }").unwrap_err();
        assert!(errs[0].message.contains("keyword"));
    }

    #[test]
    fn computed_algebra_declaration_round_trips() {
        let (_, resolved) = parse_and_resolve(CHAIN2).unwrap();
        let (_, sys) = &resolved.projsys["PS"];
        let lim = crate::systems::projective_limit(sys).unwrap();
        let decl = algebra_to_decl("LIM", "SIG", &lim.apex);
        let file = InstanceFile {
            sorts: vec![Sp::new("s")],
            decls: vec![
                parse(CHAIN2).unwrap().decls[0].clone(),
                decl,
            ],
        };
        let text = serialize(&file);
        let again = parse(&text).unwrap();
        assert_eq!(file, again);
        // and the emitted algebra is isomorphic to the computed one
        let (_, r2) = parse_and_resolve(&text).unwrap();
        let (_, emitted) = &r2.algebras["LIM"];
        assert!(crate::search::find_isomorphism(emitted, &lim.apex, 1_000_000)
            .unwrap()
            .is_some());
    }
}

//! S-expression reader and the `:strips :typing` subset built on it.

use std::collections::BTreeSet;

use super::ast::*;

pub const SUPPORTED_REQUIREMENTS: [&str; 2] = [":strips", ":typing"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl std::fmt::Display for Pos {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PddlError {
    #[error("{pos}: unbalanced parenthesis")]
    Unbalanced { pos: Pos },
    #[error("{pos}: {message}")]
    Syntax { pos: Pos, message: String },
    #[error("{pos}: unsupported requirement {flag}")]
    UnsupportedRequirement { pos: Pos, flag: String },
    #[error("{pos}: unknown predicate {name}")]
    UnknownPredicate { pos: Pos, name: String },
    #[error("{pos}: {name} expects {expected} arguments, got {found}")]
    Arity {
        pos: Pos,
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("{pos}: unknown term {name}")]
    UnknownTerm { pos: Pos, name: String },
    #[error("{pos}: unknown type {name}")]
    UnknownType { pos: Pos, name: String },
    #[error("{pos}: {term} is not of type {expected}")]
    TypeMismatch { pos: Pos, term: String, expected: String },
    #[error("duplicate action {0}")]
    DuplicateAction(String),
    #[error("problem is for domain {found}, not {expected}")]
    DomainMismatch { expected: String, found: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Sexp {
    Atom(String, Pos),
    List(Vec<Sexp>, Pos),
}

impl Sexp {
    fn pos(&self) -> Pos {
        match self {
            Sexp::Atom(_, p) | Sexp::List(_, p) => *p,
        }
    }

    fn atom(&self) -> Option<&str> {
        match self {
            Sexp::Atom(s, _) => Some(s),
            Sexp::List(..) => None,
        }
    }

    fn list(&self) -> Option<&[Sexp]> {
        match self {
            Sexp::List(items, _) => Some(items),
            Sexp::Atom(..) => None,
        }
    }
}

fn syntax(pos: Pos, message: impl Into<String>) -> PddlError {
    PddlError::Syntax {
        pos,
        message: message.into(),
    }
}

fn read(text: &str) -> Result<Sexp, PddlError> {
    let mut stack: Vec<(Vec<Sexp>, Pos)> = Vec::new();
    let mut top: Option<Sexp> = None;
    let mut line = 1;
    let mut col = 0;
    let mut chars = text.chars().peekable();
    let mut word = String::new();
    let mut word_pos = Pos { line, col };

    fn flush(word: &mut String, pos: Pos, stack: &mut [(Vec<Sexp>, Pos)]) -> Result<(), PddlError> {
        if word.is_empty() {
            return Ok(());
        }
        let atom = Sexp::Atom(std::mem::take(word).to_lowercase(), pos);
        match stack.last_mut() {
            Some((items, _)) => {
                items.push(atom);
                Ok(())
            }
            None => Err(syntax(pos, "atom outside any list")),
        }
    }

    while let Some(c) = chars.next() {
        col += 1;
        let here = Pos { line, col };
        match c {
            ';' => {
                flush(&mut word, word_pos, &mut stack)?;
                for c in chars.by_ref() {
                    if c == '\n' {
                        line += 1;
                        col = 0;
                        break;
                    }
                }
            }
            '(' => {
                flush(&mut word, word_pos, &mut stack)?;
                if top.is_some() && stack.is_empty() {
                    return Err(syntax(here, "text after the top-level expression"));
                }
                stack.push((Vec::new(), here));
            }
            ')' => {
                flush(&mut word, word_pos, &mut stack)?;
                let (items, pos) = stack.pop().ok_or(PddlError::Unbalanced { pos: here })?;
                let list = Sexp::List(items, pos);
                match stack.last_mut() {
                    Some((parent, _)) => parent.push(list),
                    None => top = Some(list),
                }
            }
            c if c.is_whitespace() => {
                flush(&mut word, word_pos, &mut stack)?;
                if c == '\n' {
                    line += 1;
                    col = 0;
                }
            }
            c => {
                if word.is_empty() {
                    word_pos = here;
                }
                word.push(c);
            }
        }
    }
    flush(&mut word, word_pos, &mut stack)?;
    if let Some((_, pos)) = stack.pop() {
        return Err(PddlError::Unbalanced { pos });
    }
    top.ok_or_else(|| syntax(Pos { line, col }, "empty input"))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PddlFile {
    Domain(StripsDomain),
    Problem(StripsProblem),
}

pub fn parse_pddl(text: &str) -> Result<PddlFile, PddlError> {
    let top = read(text)?;
    let items = top.list().ok_or_else(|| syntax(top.pos(), "expected (define ...)"))?;
    if items.first().and_then(Sexp::atom) != Some("define") {
        return Err(syntax(top.pos(), "expected (define ...)"));
    }
    let header = items
        .get(1)
        .and_then(Sexp::list)
        .ok_or_else(|| syntax(top.pos(), "expected (domain NAME) or (problem NAME)"))?;
    let kind = header.first().and_then(Sexp::atom);
    let name = header
        .get(1)
        .and_then(Sexp::atom)
        .ok_or_else(|| syntax(items[1].pos(), "missing name"))?
        .to_string();
    match kind {
        Some("domain") => Ok(PddlFile::Domain(domain(name, &items[2..])?)),
        Some("problem") => Ok(PddlFile::Problem(problem(name, &items[2..])?)),
        _ => Err(syntax(items[1].pos(), "expected domain or problem")),
    }
}

pub fn parse_domain(text: &str) -> Result<StripsDomain, PddlError> {
    match parse_pddl(text)? {
        PddlFile::Domain(d) => Ok(d),
        PddlFile::Problem(_) => Err(syntax(Pos { line: 1, col: 1 }, "expected a domain")),
    }
}

/// Parse a problem and check it against `domain`.
pub fn parse_problem(text: &str, domain: &StripsDomain) -> Result<StripsProblem, PddlError> {
    match parse_pddl(text)? {
        PddlFile::Problem(p) => {
            check_problem(&p, domain)?;
            Ok(p)
        }
        PddlFile::Domain(_) => Err(syntax(Pos { line: 1, col: 1 }, "expected a problem")),
    }
}

fn section(s: &Sexp) -> Result<(&str, &[Sexp]), PddlError> {
    let items = s.list().ok_or_else(|| syntax(s.pos(), "expected a (:section ...)"))?;
    let key = items
        .first()
        .and_then(Sexp::atom)
        .ok_or_else(|| syntax(s.pos(), "empty section"))?;
    Ok((key, &items[1..]))
}

fn typed_list(items: &[Sexp], default_ty: &str) -> Result<Vec<Typed>, PddlError> {
    let mut out = Vec::new();
    let mut pending: Vec<&str> = Vec::new();
    let mut i = 0;
    while i < items.len() {
        let word = items[i].atom().ok_or_else(|| syntax(items[i].pos(), "expected a name"))?;
        if word == "-" {
            let ty = items
                .get(i + 1)
                .and_then(Sexp::atom)
                .ok_or_else(|| syntax(items[i].pos(), "expected a type after -"))?;
            if pending.is_empty() {
                return Err(syntax(items[i].pos(), "type without names"));
            }
            out.extend(pending.drain(..).map(|n| Typed::new(n, ty)));
            i += 2;
        } else {
            pending.push(word);
            i += 1;
        }
    }
    out.extend(pending.into_iter().map(|n| Typed::new(n, default_ty)));
    Ok(out)
}

/// An atom with its source position, checked later against declarations.
type Located = (Atom, Pos);

fn atom(s: &Sexp) -> Result<Located, PddlError> {
    let items = s.list().ok_or_else(|| syntax(s.pos(), "expected an atom"))?;
    let pred = items
        .first()
        .and_then(Sexp::atom)
        .ok_or_else(|| syntax(s.pos(), "expected a predicate name"))?;
    if pred == "not" || pred == "and" {
        return Err(syntax(s.pos(), format!("unexpected {pred}")));
    }
    if matches!(pred, "or" | "imply" | "forall" | "exists" | "when" | "=") && items.len() > 1 && items[1].list().is_some() {
        return Err(syntax(s.pos(), format!("{pred} is outside the STRIPS subset")));
    }
    let args = items[1..]
        .iter()
        .map(|a| a.atom().map(str::to_string).ok_or_else(|| syntax(a.pos(), "expected a term")))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((
        Atom {
            predicate: pred.to_string(),
            args,
        },
        s.pos(),
    ))
}

/// `(and a b (not c))` or a single literal. Returns positives and negatives.
fn literals(s: &Sexp, allow_negative: bool) -> Result<(Vec<Located>, Vec<Located>), PddlError> {
    let items = s.list().ok_or_else(|| syntax(s.pos(), "expected a formula"))?;
    let parts: Vec<&Sexp> = if items.first().and_then(Sexp::atom) == Some("and") {
        items[1..].iter().collect()
    } else {
        vec![s]
    };
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for p in parts {
        let inner = p.list().ok_or_else(|| syntax(p.pos(), "expected a literal"))?;
        if inner.first().and_then(Sexp::atom) == Some("not") {
            if !allow_negative {
                return Err(syntax(p.pos(), "negative preconditions are outside the STRIPS subset"));
            }
            let target = inner.get(1).filter(|_| inner.len() == 2).ok_or_else(|| syntax(p.pos(), "malformed not"))?;
            neg.push(atom(target)?);
        } else {
            pos.push(atom(p)?);
        }
    }
    Ok((pos, neg))
}

struct Scope<'a> {
    domain: &'a StripsDomain,
    terms: Vec<Typed>,
}

impl Scope<'_> {
    fn check(&self, (a, pos): &Located) -> Result<(), PddlError> {
        let decl = self.domain.predicate(&a.predicate).ok_or_else(|| PddlError::UnknownPredicate {
            pos: *pos,
            name: a.predicate.clone(),
        })?;
        if decl.params.len() != a.args.len() {
            return Err(PddlError::Arity {
                pos: *pos,
                name: a.predicate.clone(),
                expected: decl.params.len(),
                found: a.args.len(),
            });
        }
        for (arg, param) in a.args.iter().zip(&decl.params) {
            let term = self.terms.iter().find(|t| t.name == *arg).ok_or_else(|| PddlError::UnknownTerm {
                pos: *pos,
                name: arg.clone(),
            })?;
            if !self.domain.is_subtype(&term.ty, &param.ty) {
                return Err(PddlError::TypeMismatch {
                    pos: *pos,
                    term: arg.clone(),
                    expected: param.ty.clone(),
                });
            }
        }
        Ok(())
    }
}

fn check_types(domain: &StripsDomain, list: &[Typed], pos: Pos) -> Result<(), PddlError> {
    for t in list {
        if t.ty != ROOT_TYPE && !domain.types.iter().any(|d| d.name == t.ty) {
            return Err(PddlError::UnknownType { pos, name: t.ty.clone() });
        }
    }
    Ok(())
}

fn domain(name: String, sections: &[Sexp]) -> Result<StripsDomain, PddlError> {
    let mut d = StripsDomain {
        name,
        requirements: Vec::new(),
        types: Vec::new(),
        constants: Vec::new(),
        predicates: Vec::new(),
        actions: Vec::new(),
    };
    let mut raw_actions: Vec<(&Sexp, &[Sexp])> = Vec::new();
    for s in sections {
        let (key, body) = section(s)?;
        match key {
            ":requirements" => {
                for r in body {
                    let flag = r.atom().ok_or_else(|| syntax(r.pos(), "expected a flag"))?;
                    if !SUPPORTED_REQUIREMENTS.contains(&flag) {
                        return Err(PddlError::UnsupportedRequirement {
                            pos: r.pos(),
                            flag: flag.to_string(),
                        });
                    }
                    d.requirements.push(flag.to_string());
                }
            }
            ":types" => d.types = typed_list(body, ROOT_TYPE)?,
            ":constants" => d.constants = typed_list(body, ROOT_TYPE)?,
            ":predicates" => {
                for p in body {
                    let items = p.list().ok_or_else(|| syntax(p.pos(), "expected (pred ?x - t ...)"))?;
                    let pname = items
                        .first()
                        .and_then(Sexp::atom)
                        .ok_or_else(|| syntax(p.pos(), "expected a predicate name"))?;
                    d.predicates.push(PredicateDecl {
                        name: pname.to_string(),
                        params: typed_list(&items[1..], ROOT_TYPE)?,
                    });
                }
            }
            ":action" => raw_actions.push((s, body)),
            other => return Err(syntax(s.pos(), format!("unsupported section {other}"))),
        }
    }
    check_types(&d, &d.types, Pos { line: 1, col: 1 })?;
    check_types(&d, &d.constants, Pos { line: 1, col: 1 })?;
    for p in &d.predicates {
        check_types(&d, &p.params, Pos { line: 1, col: 1 })?;
    }
    let mut seen = BTreeSet::new();
    for (s, body) in raw_actions {
        let action = action(&d, s, body)?;
        if !seen.insert(action.name.clone()) {
            return Err(PddlError::DuplicateAction(action.name));
        }
        d.actions.push(action);
    }
    Ok(d)
}

fn action(d: &StripsDomain, s: &Sexp, body: &[Sexp]) -> Result<ActionSchema, PddlError> {
    let name = body
        .first()
        .and_then(Sexp::atom)
        .ok_or_else(|| syntax(s.pos(), "expected an action name"))?;
    let mut params = Vec::new();
    let mut pre = Vec::new();
    let mut add = Vec::new();
    let mut del = Vec::new();
    let mut i = 1;
    while i < body.len() {
        let key = body[i].atom().ok_or_else(|| syntax(body[i].pos(), "expected :parameters, :precondition or :effect"))?;
        let val = body.get(i + 1).ok_or_else(|| syntax(body[i].pos(), format!("{key} without a value")))?;
        match key {
            ":parameters" => {
                let items = val.list().ok_or_else(|| syntax(val.pos(), "expected a parameter list"))?;
                params = typed_list(items, ROOT_TYPE)?;
                check_types(d, &params, val.pos())?;
            }
            ":precondition" => pre = literals(val, false)?.0,
            ":effect" => (add, del) = literals(val, true)?,
            other => return Err(syntax(body[i].pos(), format!("unsupported action key {other}"))),
        }
        i += 2;
    }
    let mut terms = d.constants.clone();
    terms.extend(params.iter().cloned());
    let scope = Scope { domain: d, terms };
    for a in pre.iter().chain(&add).chain(&del) {
        scope.check(a)?;
    }
    let strip = |v: Vec<Located>| v.into_iter().map(|(a, _)| a).collect();
    Ok(ActionSchema {
        name: name.to_string(),
        params,
        precondition: strip(pre),
        add: strip(add),
        delete: strip(del),
    })
}

fn problem(name: String, sections: &[Sexp]) -> Result<StripsProblem, PddlError> {
    let mut p = StripsProblem {
        name,
        domain: String::new(),
        objects: Vec::new(),
        init: Vec::new(),
        goal: Vec::new(),
    };
    for s in sections {
        let (key, body) = section(s)?;
        match key {
            ":domain" => {
                p.domain = body
                    .first()
                    .and_then(Sexp::atom)
                    .ok_or_else(|| syntax(s.pos(), "expected a domain name"))?
                    .to_string()
            }
            ":requirements" => {
                for r in body {
                    let flag = r.atom().unwrap_or_default();
                    if !SUPPORTED_REQUIREMENTS.contains(&flag) {
                        return Err(PddlError::UnsupportedRequirement {
                            pos: r.pos(),
                            flag: flag.to_string(),
                        });
                    }
                }
            }
            ":objects" => p.objects = typed_list(body, ROOT_TYPE)?,
            ":init" => {
                for a in body {
                    p.init.push(atom(a)?.0);
                }
            }
            ":goal" => {
                let g = body.first().ok_or_else(|| syntax(s.pos(), "empty goal"))?;
                p.goal = literals(g, false)?.0.into_iter().map(|(a, _)| a).collect();
            }
            other => return Err(syntax(s.pos(), format!("unsupported section {other}"))),
        }
    }
    Ok(p)
}

/// Every init and goal atom uses a declared predicate over declared,
/// correctly typed objects.
pub fn check_problem(p: &StripsProblem, d: &StripsDomain) -> Result<(), PddlError> {
    let origin = Pos { line: 1, col: 1 };
    if p.domain != d.name {
        return Err(PddlError::DomainMismatch {
            expected: d.name.clone(),
            found: p.domain.clone(),
        });
    }
    check_types(d, &p.objects, origin)?;
    let mut terms = d.constants.clone();
    terms.extend(p.objects.iter().cloned());
    let scope = Scope { domain: d, terms };
    for a in p.init.iter().chain(&p.goal) {
        scope.check(&(a.clone(), origin))?;
    }
    Ok(())
}

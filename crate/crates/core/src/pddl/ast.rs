use std::fmt::{self, Write as _};

/// `?x - type` or `name - type`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Typed {
    pub name: String,
    pub ty: String,
}

impl Typed {
    pub fn new(name: &str, ty: &str) -> Self {
        Typed {
            name: name.to_string(),
            ty: ty.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<String>,
}

impl Atom {
    pub fn new<S: AsRef<str>>(predicate: &str, args: &[S]) -> Self {
        Atom {
            predicate: predicate.to_string(),
            args: args.iter().map(|a| a.as_ref().to_string()).collect(),
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.predicate)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredicateDecl {
    pub name: String,
    pub params: Vec<Typed>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionSchema {
    pub name: String,
    pub params: Vec<Typed>,
    pub precondition: Vec<Atom>,
    pub add: Vec<Atom>,
    pub delete: Vec<Atom>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StripsDomain {
    pub name: String,
    pub requirements: Vec<String>,
    /// `(type, parent)`; the implicit root is `object`.
    pub types: Vec<Typed>,
    pub constants: Vec<Typed>,
    pub predicates: Vec<PredicateDecl>,
    pub actions: Vec<ActionSchema>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StripsProblem {
    pub name: String,
    pub domain: String,
    pub objects: Vec<Typed>,
    pub init: Vec<Atom>,
    pub goal: Vec<Atom>,
}

pub const ROOT_TYPE: &str = "object";

impl StripsDomain {
    pub fn predicate(&self, name: &str) -> Option<&PredicateDecl> {
        self.predicates.iter().find(|p| p.name == name)
    }

    pub fn action(&self, name: &str) -> Option<&ActionSchema> {
        self.actions.iter().find(|a| a.name == name)
    }

    /// True iff `ty` equals `ancestor` or inherits from it.
    pub fn is_subtype(&self, ty: &str, ancestor: &str) -> bool {
        let mut cur = ty.to_string();
        for _ in 0..=self.types.len() {
            if cur == ancestor {
                return true;
            }
            match self.types.iter().find(|t| t.name == cur) {
                Some(t) => cur = t.ty.clone(),
                None => return ancestor == ROOT_TYPE,
            }
        }
        false
    }
}

/// Groups consecutive entries that share a type: `a b - t c - u`.
fn typed_list(items: &[Typed]) -> String {
    let mut out = String::new();
    let mut i = 0;
    while i < items.len() {
        let ty = &items[i].ty;
        let mut j = i;
        while j < items.len() && items[j].ty == *ty {
            if !out.is_empty() {
                out.push(' ');
            }
            out.push_str(&items[j].name);
            j += 1;
        }
        let _ = write!(out, " - {ty}");
        i = j;
    }
    out
}

fn conjunction(atoms: &[Atom], negated: &[Atom]) -> String {
    let mut parts: Vec<String> = atoms.iter().map(Atom::to_string).collect();
    parts.extend(negated.iter().map(|a| format!("(not {a})")));
    if parts.is_empty() {
        "(and)".to_string()
    } else {
        format!("(and {})", parts.join(" "))
    }
}

impl fmt::Display for StripsDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "(define (domain {})", self.name)?;
        if !self.requirements.is_empty() {
            writeln!(f, "  (:requirements {})", self.requirements.join(" "))?;
        }
        if !self.types.is_empty() {
            writeln!(f, "  (:types {})", typed_list(&self.types))?;
        }
        if !self.constants.is_empty() {
            writeln!(f, "  (:constants {})", typed_list(&self.constants))?;
        }
        writeln!(f, "  (:predicates")?;
        for p in &self.predicates {
            if p.params.is_empty() {
                writeln!(f, "    ({})", p.name)?;
            } else {
                writeln!(f, "    ({} {})", p.name, typed_list(&p.params))?;
            }
        }
        writeln!(f, "  )")?;
        for a in &self.actions {
            writeln!(f, "  (:action {}", a.name)?;
            writeln!(f, "    :parameters ({})", typed_list(&a.params))?;
            writeln!(f, "    :precondition {}", conjunction(&a.precondition, &[]))?;
            writeln!(f, "    :effect {})", conjunction(&a.add, &a.delete))?;
        }
        writeln!(f, ")")
    }
}

impl fmt::Display for StripsProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "(define (problem {})", self.name)?;
        writeln!(f, "  (:domain {})", self.domain)?;
        if !self.objects.is_empty() {
            writeln!(f, "  (:objects {})", typed_list(&self.objects))?;
        }
        writeln!(f, "  (:init")?;
        for a in &self.init {
            writeln!(f, "    {a}")?;
        }
        writeln!(f, "  )")?;
        writeln!(f, "  (:goal {})", conjunction(&self.goal, &[]))?;
        writeln!(f, ")")
    }
}

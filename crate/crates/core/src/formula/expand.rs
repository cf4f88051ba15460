use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::ast::*;
use super::render::{render_arith, render_name, render_term};

/// One factor of a model term.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Factor {
    Variable(String),
    Func { name: String, args: Vec<CallArg> },
    Arith(ArithExpr),
}

impl Factor {
    /// Label used in column names, e.g. `log(x)` or `I(a/b)`.
    pub fn label(&self) -> String {
        match self {
            Factor::Variable(v) => v.clone(),
            Factor::Func { name, args } => render_term(&TermExpr::Func {
                name: name.clone(),
                args: args.clone(),
            }),
            Factor::Arith(a) => format!("I({})", render_arith(a)),
        }
    }

    pub fn dependencies(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        match self {
            Factor::Variable(v) => {
                out.insert(v.clone());
            }
            Factor::Func { args, .. } => {
                for a in args {
                    arith_vars(&a.value, &mut out);
                }
            }
            Factor::Arith(a) => arith_vars(a, &mut out),
        }
        out
    }

    pub fn is_variable(&self) -> bool {
        matches!(self, Factor::Variable(_))
    }
}

/// Adds the variable names used by an expression to `out`.
pub fn arith_vars(expr: &ArithExpr, out: &mut BTreeSet<String>) {
    match expr {
        ArithExpr::Number(_) | ArithExpr::Str(_) => {}
        ArithExpr::Var(v) => {
            out.insert(v.clone());
        }
        ArithExpr::Neg(e) => arith_vars(e, out),
        ArithExpr::Binary(_, l, r) => {
            arith_vars(l, out);
            arith_vars(r, out);
        }
        ArithExpr::Call(_, args) => {
            for a in args {
                arith_vars(&a.value, out);
            }
        }
    }
}

/// A canonical model term: a set of factors kept sorted by label. The empty
/// term is the intercept.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    factors: Vec<Factor>,
}

impl Term {
    pub fn intercept() -> Self {
        Term {
            factors: Vec::new(),
        }
    }

    pub fn new(factors: Vec<Factor>) -> Self {
        let mut factors = factors;
        factors.sort_by_key(|f| f.label());
        factors.dedup_by(|a, b| a.label() == b.label());
        Term { factors }
    }

    pub fn variable(name: &str) -> Self {
        Term::new(vec![Factor::Variable(name.to_string())])
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn degree(&self) -> usize {
        self.factors.len()
    }

    pub fn is_intercept(&self) -> bool {
        self.factors.is_empty()
    }

    /// Canonical name: factor labels sorted lexicographically, joined by `:`.
    pub fn name(&self) -> String {
        if self.factors.is_empty() {
            return "(Intercept)".to_string();
        }
        self.factors
            .iter()
            .map(Factor::label)
            .collect::<Vec<_>>()
            .join(":")
    }

    fn combine(&self, other: &Term) -> Term {
        let mut f = self.factors.clone();
        f.extend(other.factors.iter().cloned());
        Term::new(f)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// All variables a term depends on, including those inside function calls
/// and `I()` arithmetic.
pub fn term_dependencies(term: &Term) -> BTreeSet<String> {
    term.factors
        .iter()
        .flat_map(|f| f.dependencies())
        .collect()
}

/// Expands the fixed part of a formula into canonical terms (intercept not
/// included).
pub fn expand_terms(ast: &FormulaAst) -> Result<Vec<Term>> {
    expand_term_expr(&ast.fixed)
}

/// Expands a term tree: duplicates removed, main effects first in order of
/// appearance, then interactions by ascending degree.
pub fn expand_term_expr(expr: &TermExpr) -> Result<Vec<Term>> {
    let mut terms = expand(expr)?;
    terms.retain(|t| !t.is_intercept());
    // stable sort keeps first-appearance order within a degree
    terms.sort_by_key(Term::degree);
    Ok(terms)
}

fn push_unique(out: &mut Vec<Term>, t: Term) {
    if !out.iter().any(|u| u.name() == t.name()) {
        out.push(t);
    }
}

fn cross(a: &[Term], b: &[Term]) -> Vec<Term> {
    let mut out = Vec::new();
    for x in a {
        for y in b {
            push_unique(&mut out, x.combine(y));
        }
    }
    out
}

fn expand(expr: &TermExpr) -> Result<Vec<Term>> {
    match expr {
        TermExpr::Variable(v) => Ok(vec![Term::variable(v)]),
        TermExpr::Literal(v) if *v == 0.0 || *v == 1.0 => Ok(Vec::new()),
        TermExpr::Literal(v) => Err(Error::Formula(format!(
            "numeric literal {v} is not a valid term"
        ))),
        TermExpr::Func { name, args } => Ok(vec![Term::new(vec![Factor::Func {
            name: name.clone(),
            args: args.clone(),
        }])]),
        TermExpr::Arith(a) => Ok(vec![Term::new(vec![Factor::Arith(a.clone())])]),
        TermExpr::Interaction(parts) => {
            let mut acc = vec![Term::intercept()];
            for p in parts {
                acc = cross(&acc, &expand(p)?);
            }
            Ok(acc)
        }
        TermExpr::Cross(parts) => {
            let mut acc: Vec<Term> = Vec::new();
            for p in parts {
                let next = expand(p)?;
                let prod = cross(&acc, &next);
                for t in next.into_iter().chain(prod) {
                    push_unique(&mut acc, t);
                }
            }
            Ok(acc)
        }
        TermExpr::Sum(items) => {
            let mut acc: Vec<Term> = Vec::new();
            for item in items {
                let ts = expand(&item.expr)?;
                if item.removed {
                    acc.retain(|t| !ts.iter().any(|r| r.name() == t.name()));
                } else {
                    for t in ts {
                        push_unique(&mut acc, t);
                    }
                }
            }
            Ok(acc)
        }
        TermExpr::Power(base, k) => {
            if k.fract() != 0.0 || *k < 1.0 {
                return Err(Error::Formula(format!(
                    "interaction order must be an integer >= 1, got {k}"
                )));
            }
            let base = expand(base)?;
            let mut acc = base.clone();
            for _ in 1..(*k as usize).min(base.len().max(1)) {
                let prod = cross(&acc, &base);
                for t in prod {
                    push_unique(&mut acc, t);
                }
            }
            Ok(acc)
        }
    }
}

/// Human-readable rendering of a term list, mostly for messages.
pub fn term_names(terms: &[Term]) -> Vec<String> {
    terms.iter().map(Term::name).collect()
}

/// Quoted name for use when a term is written back into a formula.
pub fn term_formula_label(term: &Term) -> String {
    term.factors
        .iter()
        .map(|f| match f {
            Factor::Variable(v) => render_name(v),
            other => other.label(),
        })
        .collect::<Vec<_>>()
        .join(":")
}

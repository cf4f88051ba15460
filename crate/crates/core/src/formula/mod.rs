//! Parsing and expansion of R-style model formulas.

pub mod ast;
mod expand;
mod lexer;
mod parser;
mod registry;
mod render;

pub use ast::*;
pub use expand::{
    arith_vars,    expand_term_expr, expand_terms, term_dependencies, term_formula_label, term_names, Factor,
    Term,
};
pub use parser::{parse_formula, parse_formula_with, parse_one_sided, ParseOptions};
pub use registry::{eval_arith, FunctionRegistry, Scalar, ScalarFn, RESERVED_FUNCTIONS};
pub use render::{render_arith, render_formula, render_name, render_response, render_term};

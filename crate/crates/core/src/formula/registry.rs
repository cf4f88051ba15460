use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};

use super::ast::{ArithExpr, ArithOp};

pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Function names that the parser treats specially and that cannot be
/// registered by users.
pub const RESERVED_FUNCTIONS: [&str; 2] = ["I", "Surv"];

/// Functions that may appear in formula terms, keyed by name.
#[derive(Clone)]
pub struct FunctionRegistry {
    funcs: BTreeMap<String, (usize, ScalarFn)>,
}

impl fmt::Debug for FunctionRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FunctionRegistry")
            .field("functions", &self.funcs.keys().collect::<Vec<_>>())
            .finish()
    }
}

impl Default for FunctionRegistry {
    fn default() -> Self {
        let mut reg = FunctionRegistry {
            funcs: BTreeMap::new(),
        };
        let unary: [(&str, fn(f64) -> f64); 6] = [
            ("log", f64::ln),
            ("exp", f64::exp),
            ("sqrt", f64::sqrt),
            ("abs", f64::abs),
            ("sin", f64::sin),
            ("cos", f64::cos),
        ];
        for (name, f) in unary {
            reg.funcs
                .insert(name.to_string(), (1, Arc::new(move |a: &[f64]| f(a[0]))));
        }
        reg
    }
}

impl FunctionRegistry {
    /// Shared registry holding only the built-in functions.
    pub fn builtin() -> &'static FunctionRegistry {
        static REG: OnceLock<FunctionRegistry> = OnceLock::new();
        REG.get_or_init(FunctionRegistry::default)
    }

    pub fn register<F>(&mut self, name: &str, arity: usize, f: F) -> Result<()>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        if RESERVED_FUNCTIONS.contains(&name) {
            return Err(Error::Formula(format!("'{name}' is reserved")));
        }
        self.funcs.insert(name.to_string(), (arity, Arc::new(f)));
        Ok(())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.funcs.contains_key(name) || RESERVED_FUNCTIONS.contains(&name)
    }

    pub fn call(&self, name: &str, args: &[f64]) -> Result<f64> {
        let (arity, f) = self
            .funcs
            .get(name)
            .ok_or_else(|| Error::Formula(format!("unknown function '{name}'")))?;
        if *arity != args.len() {
            return Err(Error::Formula(format!(
                "function '{name}' takes {arity} argument(s), got {}",
                args.len()
            )));
        }
        Ok(f(args))
    }
}

/// Value of a variable or intermediate result while evaluating an expression.
#[derive(Clone, Debug, PartialEq)]
pub enum Scalar {
    Num(f64),
    Str(String),
}

impl Scalar {
    fn num(&self) -> Result<f64> {
        match self {
            Scalar::Num(v) => Ok(*v),
            Scalar::Str(s) => Err(Error::Formula(format!(
                "string value \"{s}\" used in arithmetic"
            ))),
        }
    }
}

/// Evaluates an arithmetic expression in double precision. `lookup` resolves
/// variable names; a missing value should be returned as `Num(NaN)`.
pub fn eval_arith(
    expr: &ArithExpr,
    registry: &FunctionRegistry,
    lookup: &mut dyn FnMut(&str) -> Result<Scalar>,
) -> Result<f64> {
    eval_scalar(expr, registry, lookup)?.num()
}

fn eval_scalar(
    expr: &ArithExpr,
    registry: &FunctionRegistry,
    lookup: &mut dyn FnMut(&str) -> Result<Scalar>,
) -> Result<Scalar> {
    Ok(match expr {
        ArithExpr::Number(v) => Scalar::Num(*v),
        ArithExpr::Str(s) => Scalar::Str(s.clone()),
        ArithExpr::Var(name) => lookup(name)?,
        ArithExpr::Neg(inner) => Scalar::Num(-eval_scalar(inner, registry, lookup)?.num()?),
        ArithExpr::Call(name, args) => {
            if name == "I" && args.len() == 1 {
                return eval_scalar(&args[0].value, registry, lookup);
            }
            let vals = args
                .iter()
                .map(|a| eval_scalar(&a.value, registry, lookup)?.num())
                .collect::<Result<Vec<_>>>()?;
            Scalar::Num(registry.call(name, &vals)?)
        }
        ArithExpr::Binary(op, l, r) => {
            let a = eval_scalar(l, registry, lookup)?;
            let b = eval_scalar(r, registry, lookup)?;
            if op.is_comparison() {
                return compare(*op, &a, &b).map(Scalar::Num);
            }
            let (x, y) = (a.num()?, b.num()?);
            Scalar::Num(match op {
                ArithOp::Add => x + y,
                ArithOp::Sub => x - y,
                ArithOp::Mul => x * y,
                ArithOp::Div => x / y,
                ArithOp::Pow => x.powf(y),
                _ => unreachable!(),
            })
        }
    })
}

fn compare(op: ArithOp, a: &Scalar, b: &Scalar) -> Result<f64> {
    use std::cmp::Ordering;
    let ord = match (a, b) {
        (Scalar::Num(x), Scalar::Num(y)) => {
            if x.is_nan() || y.is_nan() {
                return Ok(f64::NAN);
            }
            x.partial_cmp(y).unwrap()
        }
        (Scalar::Str(x), Scalar::Str(y)) => x.cmp(y),
        _ => {
            return Err(Error::Formula(
                "comparison between a string and a number".into(),
            ))
        }
    };
    let hit = match op {
        ArithOp::Eq => ord == Ordering::Equal,
        ArithOp::Ne => ord != Ordering::Equal,
        ArithOp::Lt => ord == Ordering::Less,
        ArithOp::Le => ord != Ordering::Greater,
        ArithOp::Gt => ord == Ordering::Greater,
        ArithOp::Ge => ord != Ordering::Less,
        _ => unreachable!(),
    };
    Ok(if hit { 1.0 } else { 0.0 })
}

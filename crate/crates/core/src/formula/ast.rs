use serde::{Deserialize, Serialize};

/// Binary operators available inside `I(...)`, function arguments and
/// survival event expressions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl ArithOp {
    pub fn symbol(self) -> &'static str {
        match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
            ArithOp::Mul => "*",
            ArithOp::Div => "/",
            ArithOp::Pow => "^",
            ArithOp::Eq => "==",
            ArithOp::Ne => "!=",
            ArithOp::Lt => "<",
            ArithOp::Le => "<=",
            ArithOp::Gt => ">",
            ArithOp::Ge => ">=",
        }
    }

    pub(crate) fn precedence(self) -> u8 {
        match self {
            ArithOp::Eq | ArithOp::Ne | ArithOp::Lt | ArithOp::Le | ArithOp::Gt | ArithOp::Ge => 1,
            ArithOp::Add | ArithOp::Sub => 2,
            ArithOp::Mul | ArithOp::Div => 3,
            ArithOp::Pow => 5,
        }
    }

    pub fn is_comparison(self) -> bool {
        self.precedence() == 1
    }
}

/// Precedence of unary minus, between `*` and `^` as in R.
pub(crate) const NEG_PRECEDENCE: u8 = 4;

/// Plain arithmetic expression (the protected part of a formula).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ArithExpr {
    Number(f64),
    Str(String),
    Var(String),
    Neg(Box<ArithExpr>),
    Binary(ArithOp, Box<ArithExpr>, Box<ArithExpr>),
    Call(String, Vec<CallArg>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CallArg {
    pub name: Option<String>,
    pub value: ArithExpr,
}

impl CallArg {
    pub fn positional(value: ArithExpr) -> Self {
        CallArg { name: None, value }
    }
}

/// Formula-algebra tree for the right-hand side of a model formula.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum TermExpr {
    Variable(String),
    Literal(f64),
    /// Function of covariates, e.g. `log(x)` or `abs(a - b)`.
    Func { name: String, args: Vec<CallArg> },
    /// Protected arithmetic from `I(...)`.
    Arith(ArithExpr),
    /// `a:b:c`
    Interaction(Vec<TermExpr>),
    /// `a*b*c`
    Cross(Vec<TermExpr>),
    /// `a + b - c`
    Sum(Vec<SumItem>),
    /// `(a + b)^k`
    Power(Box<TermExpr>, f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SumItem {
    pub removed: bool,
    pub expr: TermExpr,
}

impl TermExpr {
    pub fn empty() -> Self {
        TermExpr::Sum(Vec::new())
    }

    pub fn is_empty_sum(&self) -> bool {
        matches!(self, TermExpr::Sum(items) if items.is_empty())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ResponseSpec {
    Variable(String),
    /// `Surv(time, event)`; the event is an expression that evaluates to 0/1.
    Survival { time: String, event: ArithExpr },
}

impl ResponseSpec {
    /// Name used for the response in node names and sub-model labels.
    pub fn name(&self) -> &str {
        match self {
            ResponseSpec::Variable(v) => v,
            ResponseSpec::Survival { time, .. } => time,
        }
    }
}

/// One `(terms | group)` block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomPart {
    pub terms: TermExpr,
    pub group: String,
    pub intercept: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FormulaAst {
    pub response: Option<ResponseSpec>,
    pub fixed: TermExpr,
    pub random_parts: Vec<RandomPart>,
    pub intercept: bool,
}

use crate::error::{Error, Result};

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::registry::FunctionRegistry;

/// Options controlling [`parse_formula_with`].
#[derive(Clone, Copy, Debug)]
pub struct ParseOptions<'a> {
    pub registry: &'a FunctionRegistry,
    /// Reject calls to functions that are not in the registry.
    pub strict: bool,
    /// Accept formulas without a response (`~ a + b` or `a + b`).
    pub one_sided: bool,
}

impl Default for ParseOptions<'_> {
    fn default() -> Self {
        ParseOptions {
            registry: FunctionRegistry::builtin(),
            strict: true,
            one_sided: false,
        }
    }
}

/// Parses a two-sided model formula with the built-in function set.
pub fn parse_formula(text: &str) -> Result<FormulaAst> {
    parse_formula_with(text, &ParseOptions::default())
}

/// Parses a one-sided formula such as an auxiliary-variable list.
pub fn parse_one_sided(text: &str) -> Result<FormulaAst> {
    parse_formula_with(
        text,
        &ParseOptions {
            one_sided: true,
            ..ParseOptions::default()
        },
    )
}

pub fn parse_formula_with(text: &str, opts: &ParseOptions<'_>) -> Result<FormulaAst> {
    let tokens = tokenize(text)?;
    let mut p = Parser {
        toks: tokens,
        pos: 0,
        end: text.len(),
        opts,
    };
    p.formula()
}

struct Parser<'a> {
    toks: Vec<Token>,
    pos: usize,
    end: usize,
    opts: &'a ParseOptions<'a>,
}

/// A summand of the right-hand side before intercept markers and random
/// parts are split off.
enum Item {
    Term(SumItem),
    Random(RandomPart),
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |t| t.offset)
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: &Tok, what: &str) -> Result<()> {
        if self.eat(tok) {
            Ok(())
        } else {
            Err(self.unexpected(what))
        }
    }

    fn unexpected(&self, expected: &str) -> Error {
        match self.peek() {
            None => Error::syntax(self.end, format!("unexpected end of formula, expected {expected}")),
            Some(Tok::Pipe) => Error::syntax(
                self.offset(),
                "'|' is only allowed inside a parenthesised random-effects term",
            ),
            Some(t) => Error::syntax(self.offset(), format!("unexpected {t:?}, expected {expected}")),
        }
    }

    fn formula(&mut self) -> Result<FormulaAst> {
        let has_tilde = self.toks.iter().any(|t| t.tok == Tok::Tilde);
        let response = if self.eat(&Tok::Tilde) {
            if !self.opts.one_sided {
                return Err(Error::syntax(0, "formula has no response"));
            }
            None
        } else if has_tilde {
            let r = self.response()?;
            self.expect(&Tok::Tilde, "'~'")?;
            Some(r)
        } else if self.opts.one_sided {
            None
        } else {
            return Err(Error::syntax(self.end, "formula has no '~'"));
        };
        if self.peek().is_none() {
            return Err(self.unexpected("right-hand side"));
        }
        let items = self.sum_items(true)?;
        if self.pos < self.toks.len() {
            return Err(self.unexpected("'+', '-' or end of formula"));
        }
        let mut intercept = true;
        let mut fixed = Vec::new();
        let mut random_parts = Vec::new();
        for item in items {
            match item {
                Item::Random(rp) => random_parts.push(rp),
                Item::Term(si) => match intercept_marker(&si) {
                    Some(flag) => intercept = flag,
                    None => fixed.push(si),
                },
            }
        }
        Ok(FormulaAst {
            response,
            fixed: TermExpr::Sum(fixed),
            random_parts,
            intercept,
        })
    }

    fn response(&mut self) -> Result<ResponseSpec> {
        let start = self.offset();
        match self.bump().map(|t| t.tok) {
            Some(Tok::Ident(name)) if name == "Surv" && self.peek() == Some(&Tok::LParen) => {
                self.bump();
                let time = match self.arith(false)? {
                    ArithExpr::Var(v) => v,
                    _ => return Err(Error::syntax(start, "Surv() time must be a variable name")),
                };
                self.expect(&Tok::Comma, "',' between Surv() arguments")?;
                let event = self.arith(true)?;
                self.expect(&Tok::RParen, "')'")?;
                Ok(ResponseSpec::Survival { time, event })
            }
            Some(Tok::Ident(name)) => Ok(ResponseSpec::Variable(name)),
            _ => Err(Error::syntax(
                start,
                "response must be a variable name or Surv(time, event)",
            )),
        }
    }

    /// Parses `[-] item (('+' | '-') item)*`. Random-effects parts are only
    /// accepted when `top` is set.
    fn sum_items(&mut self, top: bool) -> Result<Vec<Item>> {
        let mut items = Vec::new();
        let mut removed = self.eat(&Tok::Minus);
        loop {
            let at = self.offset();
            if self.peek() == Some(&Tok::LParen) && self.paren_has_pipe() {
                if !top || removed {
                    return Err(Error::syntax(
                        at,
                        "random-effects term must be a top-level summand",
                    ));
                }
                let rp = self.random_part()?;
                if matches!(self.peek(), Some(Tok::Star | Tok::Colon | Tok::Caret)) {
                    return Err(Error::syntax(
                        at,
                        "random-effects term must be a top-level summand",
                    ));
                }
                items.push(Item::Random(rp));
            } else {
                let expr = self.product()?;
                items.push(Item::Term(SumItem { removed, expr }));
            }
            if self.eat(&Tok::Plus) {
                removed = false;
            } else if self.eat(&Tok::Minus) {
                removed = true;
            } else {
                break;
            }
        }
        Ok(items)
    }

    /// True when the parenthesis at the cursor contains a `|` at its own depth.
    fn paren_has_pipe(&self) -> bool {
        let mut depth = 0usize;
        for t in &self.toks[self.pos..] {
            match t.tok {
                Tok::LParen => depth += 1,
                Tok::RParen => {
                    depth -= 1;
                    if depth == 0 {
                        return false;
                    }
                }
                Tok::Pipe if depth == 1 => return true,
                _ => {}
            }
        }
        false
    }

    fn random_part(&mut self) -> Result<RandomPart> {
        self.expect(&Tok::LParen, "'('")?;
        let items = self.sum_items(false)?;
        self.expect(&Tok::Pipe, "'|'")?;
        let at = self.offset();
        let group = match self.bump().map(|t| t.tok) {
            Some(Tok::Ident(g)) => g,
            _ => return Err(Error::syntax(at, "grouping factor must be a variable name")),
        };
        if self.peek() != Some(&Tok::RParen) {
            return Err(Error::syntax(
                self.offset(),
                "grouping factor must be a single variable name",
            ));
        }
        self.bump();
        let mut intercept = true;
        let mut terms = Vec::new();
        for item in items {
            if let Item::Term(si) = item {
                match intercept_marker(&si) {
                    Some(flag) => intercept = flag,
                    None => terms.push(si),
                }
            }
        }
        Ok(RandomPart {
            terms: TermExpr::Sum(terms),
            group,
            intercept,
        })
    }

    fn product(&mut self) -> Result<TermExpr> {
        let first = self.interaction()?;
        if self.peek() != Some(&Tok::Star) {
            return Ok(first);
        }
        let mut parts = vec![first];
        while self.eat(&Tok::Star) {
            parts.push(self.interaction()?);
        }
        Ok(TermExpr::Cross(parts))
    }

    fn interaction(&mut self) -> Result<TermExpr> {
        let first = self.power()?;
        if self.peek() != Some(&Tok::Colon) {
            return Ok(first);
        }
        let mut parts = vec![first];
        while self.eat(&Tok::Colon) {
            parts.push(self.power()?);
        }
        Ok(TermExpr::Interaction(parts))
    }

    fn power(&mut self) -> Result<TermExpr> {
        let base = self.term_primary()?;
        if self.eat(&Tok::Caret) {
            let at = self.offset();
            match self.bump().map(|t| t.tok) {
                Some(Tok::Number(k)) => Ok(TermExpr::Power(Box::new(base), k)),
                _ => Err(Error::syntax(at, "'^' in a formula must be followed by a number")),
            }
        } else {
            Ok(base)
        }
    }

    fn term_primary(&mut self) -> Result<TermExpr> {
        let at = self.offset();
        match self.peek().cloned() {
            Some(Tok::LParen) => {
                self.bump();
                let items = self.sum_items(false)?;
                self.expect(&Tok::RParen, "')'")?;
                let mut terms: Vec<SumItem> = items
                    .into_iter()
                    .filter_map(|i| match i {
                        Item::Term(si) => Some(si),
                        Item::Random(_) => None,
                    })
                    .collect();
                if terms.len() == 1 && !terms[0].removed {
                    Ok(terms.pop().unwrap().expr)
                } else {
                    Ok(TermExpr::Sum(terms))
                }
            }
            Some(Tok::Number(v)) => {
                self.bump();
                Ok(TermExpr::Literal(v))
            }
            Some(Tok::Ident(name)) => {
                self.bump();
                if self.peek() != Some(&Tok::LParen) {
                    return Ok(TermExpr::Variable(name));
                }
                self.bump();
                if name == "I" {
                    let inner = self.arith(false)?;
                    self.expect(&Tok::RParen, "')'")?;
                    return Ok(TermExpr::Arith(inner));
                }
                if name == "Surv" {
                    return Err(Error::syntax(at, "Surv() is only valid as the response"));
                }
                self.check_function(&name, at)?;
                let args = self.call_args(false)?;
                Ok(TermExpr::Func { name, args })
            }
            Some(Tok::Slash) => Err(Error::syntax(
                at,
                "the nesting operator '/' is not supported; use I() for division",
            )),
            _ => Err(self.unexpected("a term")),
        }
    }

    fn check_function(&self, name: &str, at: usize) -> Result<()> {
        if self.opts.strict && !self.opts.registry.contains(name) {
            return Err(Error::syntax(at, format!("unknown function '{name}'")));
        }
        Ok(())
    }

    /// Parses call arguments after the opening parenthesis, through `)`.
    fn call_args(&mut self, cmp: bool) -> Result<Vec<CallArg>> {
        let mut args = Vec::new();
        if self.eat(&Tok::RParen) {
            return Ok(args);
        }
        loop {
            let named = matches!(
                (self.peek(), self.toks.get(self.pos + 1).map(|t| &t.tok)),
                (Some(Tok::Ident(_)), Some(Tok::Assign))
            );
            let name = if named {
                match self.bump().map(|t| t.tok) {
                    Some(Tok::Ident(n)) => {
                        self.bump();
                        Some(n)
                    }
                    _ => unreachable!(),
                }
            } else {
                None
            };
            let value = self.arith(cmp)?;
            args.push(CallArg { name, value });
            if self.eat(&Tok::Comma) {
                continue;
            }
            self.expect(&Tok::RParen, "',' or ')'")?;
            return Ok(args);
        }
    }

    /// Arithmetic expression; comparisons and string literals only when `cmp`.
    fn arith(&mut self, cmp: bool) -> Result<ArithExpr> {
        let lhs = self.additive(cmp)?;
        let op = match self.peek() {
            Some(Tok::EqEq) => ArithOp::Eq,
            Some(Tok::NotEq) => ArithOp::Ne,
            Some(Tok::Lt) => ArithOp::Lt,
            Some(Tok::Le) => ArithOp::Le,
            Some(Tok::Gt) => ArithOp::Gt,
            Some(Tok::Ge) => ArithOp::Ge,
            _ => return Ok(lhs),
        };
        if !cmp {
            return Err(Error::syntax(
                self.offset(),
                "comparisons are only allowed in the Surv() event expression",
            ));
        }
        self.bump();
        let rhs = self.additive(cmp)?;
        if matches!(
            self.peek(),
            Some(Tok::EqEq | Tok::NotEq | Tok::Lt | Tok::Le | Tok::Gt | Tok::Ge)
        ) {
            return Err(Error::syntax(self.offset(), "comparisons cannot be chained"));
        }
        Ok(ArithExpr::Binary(op, Box::new(lhs), Box::new(rhs)))
    }

    fn additive(&mut self, cmp: bool) -> Result<ArithExpr> {
        let mut lhs = self.multiplicative(cmp)?;
        loop {
            let op = match self.peek() {
                Some(Tok::Plus) => ArithOp::Add,
                Some(Tok::Minus) => ArithOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.multiplicative(cmp)?;
            lhs = ArithExpr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn multiplicative(&mut self, cmp: bool) -> Result<ArithExpr> {
        let mut lhs = self.unary(cmp)?;
        loop {
            let op = match self.peek() {
                Some(Tok::Star) => ArithOp::Mul,
                Some(Tok::Slash) => ArithOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary(cmp)?;
            lhs = ArithExpr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self, cmp: bool) -> Result<ArithExpr> {
        if self.eat(&Tok::Minus) {
            return Ok(ArithExpr::Neg(Box::new(self.unary(cmp)?)));
        }
        self.arith_power(cmp)
    }

    fn arith_power(&mut self, cmp: bool) -> Result<ArithExpr> {
        let base = self.arith_primary(cmp)?;
        if self.eat(&Tok::Caret) {
            // right associative, exponent may carry a unary minus
            let exp = self.unary(cmp)?;
            return Ok(ArithExpr::Binary(ArithOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn arith_primary(&mut self, cmp: bool) -> Result<ArithExpr> {
        let at = self.offset();
        match self.bump().map(|t| t.tok) {
            Some(Tok::Number(v)) => Ok(ArithExpr::Number(v)),
            Some(Tok::Str(s)) if cmp => Ok(ArithExpr::Str(s)),
            Some(Tok::Str(_)) => Err(Error::syntax(
                at,
                "string literals are only allowed in the Surv() event expression",
            )),
            Some(Tok::LParen) => {
                let e = self.arith(cmp)?;
                self.expect(&Tok::RParen, "')'")?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                if !self.eat(&Tok::LParen) {
                    return Ok(ArithExpr::Var(name));
                }
                if name == "Surv" {
                    return Err(Error::syntax(at, "Surv() is only valid as the response"));
                }
                self.check_function(&name, at)?;
                let args = self.call_args(cmp)?;
                Ok(ArithExpr::Call(name, args))
            }
            _ => {
                self.pos -= 1;
                Err(self.unexpected("an expression"))
            }
        }
    }
}

/// `1`/`0` summands toggle the intercept (`-1` and `+0` remove it).
fn intercept_marker(item: &SumItem) -> Option<bool> {
    match item.expr {
        TermExpr::Literal(v) if v == 1.0 => Some(!item.removed),
        TermExpr::Literal(v) if v == 0.0 => Some(item.removed),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var(n: &str) -> TermExpr {
        TermExpr::Variable(n.into())
    }

    fn plain(items: Vec<TermExpr>) -> TermExpr {
        TermExpr::Sum(
            items
                .into_iter()
                .map(|expr| SumItem {
                    removed: false,
                    expr,
                })
                .collect(),
        )
    }

    #[test]
    fn simple_linear_formula() {
        let ast = parse_formula("SBP ~ gender + WC + alc + creat").unwrap();
        assert_eq!(ast.response, Some(ResponseSpec::Variable("SBP".into())));
        assert_eq!(
            ast.fixed,
            plain(vec![var("gender"), var("WC"), var("alc"), var("creat")])
        );
        assert!(ast.intercept);
        assert!(ast.random_parts.is_empty());
    }

    #[test]
    fn intercept_only() {
        let ast = parse_formula("y ~ 1").unwrap();
        assert!(ast.fixed.is_empty_sum());
        assert!(ast.intercept);
    }

    #[test]
    fn intercept_removal() {
        assert!(!parse_formula("y ~ 0 + a").unwrap().intercept);
        assert!(!parse_formula("y ~ a - 1").unwrap().intercept);
        assert!(!parse_formula("y~-1+a").unwrap().intercept);
        assert!(parse_formula("y ~ a - 1 + 1").unwrap().intercept);
    }

    #[test]
    fn random_intercept_is_implicit() {
        let ast = parse_formula("bmi ~ GESTBIR + ETHN + (time | ID)").unwrap();
        assert_eq!(ast.fixed, plain(vec![var("GESTBIR"), var("ETHN")]));
        assert_eq!(ast.random_parts.len(), 1);
        let rp = &ast.random_parts[0];
        assert_eq!(rp.group, "ID");
        assert!(rp.intercept);
        assert_eq!(rp.terms, plain(vec![var("time")]));

        let ast = parse_formula("y ~ x + (0 + time | ID)").unwrap();
        assert!(!ast.random_parts[0].intercept);
        let ast = parse_formula("y ~ x + (1 | ID)").unwrap();
        assert!(ast.random_parts[0].terms.is_empty_sum());
    }

    #[test]
    fn pipe_outside_parentheses() {
        let err = parse_formula("y ~ a | g").unwrap_err();
        match err {
            Error::Syntax { offset, message } => {
                assert_eq!(offset, 6);
                assert!(message.contains('|'));
            }
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn nested_grouping_rejected() {
        assert!(parse_formula("y ~ x + (1 | a/b)").is_err());
        assert!(parse_formula("y ~ x * (1 | a)").is_err());
        assert!(parse_formula("y ~ x + log((1 | a))").is_err());
    }

    #[test]
    fn unknown_function_strict_vs_lenient() {
        let err = parse_formula("y ~ ns(age, df = 2)").unwrap_err();
        assert!(matches!(err, Error::Syntax { offset: 4, .. }));
        let opts = ParseOptions {
            strict: false,
            ..ParseOptions::default()
        };
        let ast = parse_formula_with("y ~ ns(age, df = 2)", &opts).unwrap();
        match &ast.fixed {
            TermExpr::Sum(items) => match &items[0].expr {
                TermExpr::Func { name, args } => {
                    assert_eq!(name, "ns");
                    assert_eq!(args[1].name.as_deref(), Some("df"));
                }
                e => panic!("{e:?}"),
            },
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn survival_response() {
        let ast = parse_formula("Surv(futime, status != \"alive\") ~ age + sex").unwrap();
        match ast.response.unwrap() {
            ResponseSpec::Survival { time, event } => {
                assert_eq!(time, "futime");
                assert!(matches!(event, ArithExpr::Binary(ArithOp::Ne, _, _)));
            }
            r => panic!("{r:?}"),
        }
        assert!(parse_formula("y ~ Surv(a, b)").is_err());
        assert!(parse_formula("Surv(log(t), d) ~ x").is_err());
    }

    #[test]
    fn precedence_follows_r() {
        let ast = parse_formula("y ~ a*b:c^2").unwrap();
        let expected = plain(vec![TermExpr::Cross(vec![
            var("a"),
            TermExpr::Interaction(vec![var("b"), TermExpr::Power(Box::new(var("c")), 2.0)]),
        ])]);
        assert_eq!(ast.fixed, expected);
    }

    #[test]
    fn arithmetic_inside_i() {
        let ast = parse_formula("y ~ I(creat/albu^2)").unwrap();
        let expected = ArithExpr::Binary(
            ArithOp::Div,
            Box::new(ArithExpr::Var("creat".into())),
            Box::new(ArithExpr::Binary(
                ArithOp::Pow,
                Box::new(ArithExpr::Var("albu".into())),
                Box::new(ArithExpr::Number(2.0)),
            )),
        );
        assert_eq!(ast.fixed, plain(vec![TermExpr::Arith(expected)]));
        assert!(parse_formula("y ~ I(a == 1)").is_err());
    }

    #[test]
    fn one_sided() {
        assert!(parse_formula("~ a + b").is_err());
        let ast = parse_one_sided("~ a + log(b)").unwrap();
        assert!(ast.response.is_none());
        let ast = parse_one_sided("a + b").unwrap();
        assert!(ast.response.is_none());
    }

    #[test]
    fn syntax_errors_have_offsets() {
        for (text, off) in [("y ~ a +", 7), ("y ~ (a + b", 10), ("y ~ a^b", 6), ("y ~ a ~ b", 6)] {
            match parse_formula(text) {
                Err(Error::Syntax { offset, .. }) => assert_eq!(offset, off, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }
}

use std::fmt::Write;

use super::ast::*;

/// Renders a formula back to text. The output reparses to the same AST.
pub fn render_formula(ast: &FormulaAst) -> String {
    let mut out = String::new();
    if let Some(resp) = &ast.response {
        out.push_str(&render_response(resp));
        out.push_str(" ~ ");
    } else {
        out.push_str("~ ");
    }
    let mut parts = Vec::new();
    let fixed = render_sum_body(&ast.fixed);
    match (ast.intercept, fixed.is_empty()) {
        (true, true) if ast.random_parts.is_empty() => parts.push("1".to_string()),
        (true, true) => {}
        (true, false) => parts.push(fixed),
        (false, true) => parts.push("0".to_string()),
        (false, false) => parts.push(without_intercept(&fixed)),
    }
    for rp in &ast.random_parts {
        parts.push(render_random(rp));
    }
    out.push_str(&parts.join(" + "));
    out
}

pub fn render_response(resp: &ResponseSpec) -> String {
    match resp {
        ResponseSpec::Variable(v) => render_name(v),
        ResponseSpec::Survival { time, event } => {
            format!("Surv({}, {})", render_name(time), render_arith(event))
        }
    }
}

fn render_random(rp: &RandomPart) -> String {
    let body = render_sum_body(&rp.terms);
    let lhs = match (rp.intercept, body.is_empty()) {
        (true, true) => "1".to_string(),
        (true, false) => body,
        (false, true) => "0".to_string(),
        (false, false) => without_intercept(&body),
    };
    format!("({lhs} | {})", render_name(&rp.group))
}

fn without_intercept(body: &str) -> String {
    match body.strip_prefix('-') {
        Some(rest) => format!("0 - {rest}"),
        None => format!("0 + {body}"),
    }
}

/// Renders a `Sum` without enclosing parentheses; other nodes as usual.
fn render_sum_body(expr: &TermExpr) -> String {
    match expr {
        TermExpr::Sum(items) => {
            let mut out = String::new();
            for (i, item) in items.iter().enumerate() {
                let s = render_operand(&item.expr, 0);
                match (i, item.removed) {
                    (0, false) => out.push_str(&s),
                    (0, true) => {
                        out.push('-');
                        out.push_str(&s);
                    }
                    (_, false) => write!(out, " + {s}").unwrap(),
                    (_, true) => write!(out, " - {s}").unwrap(),
                }
            }
            out
        }
        other => render_term(other),
    }
}

fn term_precedence(expr: &TermExpr) -> u8 {
    match expr {
        TermExpr::Sum(_) => 0,
        TermExpr::Cross(_) => 1,
        TermExpr::Interaction(_) => 2,
        TermExpr::Power(..) => 3,
        _ => 4,
    }
}

fn render_operand(expr: &TermExpr, min_prec: u8) -> String {
    // a nested sum always needs parentheses to survive reparsing
    if matches!(expr, TermExpr::Sum(_)) || term_precedence(expr) <= min_prec {
        format!("({})", render_sum_body(expr))
    } else {
        render_term(expr)
    }
}

/// Renders one formula term.
pub fn render_term(expr: &TermExpr) -> String {
    match expr {
        TermExpr::Variable(v) => render_name(v),
        TermExpr::Literal(v) => format_number(*v),
        TermExpr::Func { name, args } => render_call(name, args),
        TermExpr::Arith(a) => format!("I({})", render_arith(a)),
        TermExpr::Interaction(parts) => join_parts(parts, ":", 2),
        TermExpr::Cross(parts) => join_parts(parts, " * ", 1),
        TermExpr::Sum(_) => format!("({})", render_sum_body(expr)),
        TermExpr::Power(base, k) => format!("{}^{}", render_operand(base, 3), format_number(*k)),
    }
}

fn join_parts(parts: &[TermExpr], sep: &str, prec: u8) -> String {
    parts
        .iter()
        .map(|p| render_operand(p, prec))
        .collect::<Vec<_>>()
        .join(sep)
}

fn render_call(name: &str, args: &[CallArg]) -> String {
    let rendered: Vec<String> = args
        .iter()
        .map(|a| match &a.name {
            Some(n) => format!("{} = {}", render_name(n), render_arith(&a.value)),
            None => render_arith(&a.value),
        })
        .collect();
    format!("{}({})", render_name(name), rendered.join(", "))
}

fn arith_precedence(expr: &ArithExpr) -> u8 {
    match expr {
        ArithExpr::Binary(op, ..) => op.precedence(),
        ArithExpr::Neg(_) => NEG_PRECEDENCE,
        _ => u8::MAX,
    }
}

/// Renders arithmetic with the minimum parentheses needed to keep its shape.
pub fn render_arith(expr: &ArithExpr) -> String {
    match expr {
        ArithExpr::Number(v) => format_number(*v),
        ArithExpr::Str(s) => {
            let escaped = s.replace('\\', "\\\\").replace('"', "\\\"");
            format!("\"{escaped}\"")
        }
        ArithExpr::Var(v) => render_name(v),
        ArithExpr::Call(name, args) => render_call(name, args),
        ArithExpr::Neg(inner) => {
            let s = render_arith(inner);
            if arith_precedence(inner) < NEG_PRECEDENCE {
                format!("-({s})")
            } else {
                format!("-{s}")
            }
        }
        ArithExpr::Binary(op, l, r) => {
            let p = op.precedence();
            let (lp, rp) = (arith_precedence(l), arith_precedence(r));
            let (wrap_l, wrap_r) = match op {
                // right associative; a negated base needs parentheses too
                ArithOp::Pow => (lp <= p, rp < NEG_PRECEDENCE),
                _ if op.is_comparison() => (lp <= p, rp <= p),
                _ => (lp < p, rp <= p),
            };
            let ls = paren_if(render_arith(l), wrap_l);
            let rs = paren_if(render_arith(r), wrap_r);
            match op {
                ArithOp::Pow | ArithOp::Div => format!("{ls}{}{rs}", op.symbol()),
                _ => format!("{ls} {} {rs}", op.symbol()),
            }
        }
    }
}

fn paren_if(s: String, wrap: bool) -> String {
    if wrap {
        format!("({s})")
    } else {
        s
    }
}

pub(crate) fn format_number(v: f64) -> String {
    format!("{v}")
}

fn is_plain_name(name: &str) -> bool {
    let mut chars = name.chars();
    let first = match chars.next() {
        Some(c) => c,
        None => return false,
    };
    let starts_ok = first.is_ascii_alphabetic()
        || !first.is_ascii()
        || (first == '.' && !name[1..].starts_with(|c: char| c.is_ascii_digit()));
    starts_ok && chars.all(|c| c.is_ascii_alphanumeric() || c == '.' || c == '_' || !c.is_ascii())
}

/// Quotes a name with backticks when it is not a plain identifier.
pub fn render_name(name: &str) -> String {
    if is_plain_name(name) {
        name.to_string()
    } else {
        format!("`{name}`")
    }
}

#[cfg(test)]
mod tests {
    use super::super::parser::parse_formula;
    use super::*;

    fn round_trip(text: &str) -> String {
        let ast = parse_formula(text).unwrap();
        let rendered = render_formula(&ast);
        let again = parse_formula(&rendered).unwrap();
        assert_eq!(ast, again, "{text} -> {rendered}");
        rendered
    }

    #[test]
    fn canonical_spacing() {
        assert_eq!(round_trip("y~a+b"), "y ~ a + b");
        assert_eq!(round_trip("y ~ 1"), "y ~ 1");
        assert_eq!(round_trip("y ~ a - 1"), "y ~ 0 + a");
        assert_eq!(round_trip("y ~ -1"), "y ~ 0");
        assert_eq!(round_trip("y ~ I(creat/albu^2)"), "y ~ I(creat/albu^2)");
        assert_eq!(round_trip("y ~ x + (1|id)"), "y ~ x + (1 | id)");
        assert_eq!(round_trip("y ~ (1|id)"), "y ~ (1 | id)");
    }

    #[test]
    fn parentheses_preserved_where_needed() {
        round_trip("y ~ gender * (age + smoke + creat)");
        round_trip("y ~ gender + (age + smoke + creat)^3");
        round_trip("y ~ (a:b)^2 + (a*b):c");
        round_trip("y ~ I((a - b) * -c^2) + I(-(a + b)) + I((-a)^2) + I(a - (b - c))");
        round_trip("y ~ I(a^b^c) + I((a^b)^c)");
        round_trip("Surv(t, status != \"a\\\"b\") ~ `odd name` + log(x + 1)");
        round_trip("y ~ -a + (b - c)");
    }
}

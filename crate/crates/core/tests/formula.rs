use std::collections::BTreeSet;

use jointgibbs::formula::{
    expand_terms, parse_formula, parse_formula_with, render_formula, term_dependencies, FormulaAst, FunctionRegistry,
    ParseOptions, Term,
};
use proptest::prelude::*;

const CORPUS: &[&str] = &[
    "SBP ~ age + gender + WC + alc + educ + bili",
    "SBP ~ gender + age + race + WC + alc + educ + albu + bili",
    "SBP ~ ns(age, df = 2) + gender + I(bili^2) + I(bili^3)",
    "SBP ~ age + gender + log(bili) + exp(creat)",
    "SBP ~ age + gender + bili + occup + age:occup",
    "SBP ~ age * gender + bili * occup",
    "bmi ~ GESTBIR + ETHN + HEIGHT_M + SMOKE + hc + MARITAL + ns(age, df = 2) + (ns(age, df = 2) | ID)",
    "y ~ x + (1 | id)",
    "y ~ x + (x | id)",
    "y ~ 0 + x",
    "y ~ 1",
    "y ~ x - 1",
    "y ~ (a + b + c)^2",
    "y ~ I(a/b) + I(-x) + I(x * (y + 1))",
    "Surv(time, status) ~ age + sex + ph.karno",
    "y ~ log(x) + abs(x - 3) + sqrt(z)",
];

fn lenient(text: &str) -> FormulaAst {
    let reg = FunctionRegistry::default();
    parse_formula_with(text, &ParseOptions { registry: &reg, strict: false, one_sided: false }).unwrap()
}

fn names(terms: &[Term]) -> BTreeSet<String> {
    terms.iter().map(Term::name).collect()
}

#[test]
fn corpus_round_trip() {
    for f in CORPUS {
        let ast = lenient(f);
        let again = lenient(&render_formula(&ast));
        assert_eq!(ast, again, "{f}");
    }
}

fn var() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["a", "b", "c", "x1", "x_2", "z.k"]).prop_map(str::to_string)
}

fn item() -> impl Strategy<Value = String> {
    prop_oneof![
        var(),
        (var(), var()).prop_map(|(a, b)| format!("{a}:{b}")),
        (var(), var()).prop_map(|(a, b)| format!("{a} * {b}")),
        var().prop_map(|a| format!("log({a})")),
        var().prop_map(|a| format!("I({a}^2)")),
        (var(), var()).prop_map(|(a, b)| format!("I({a} - 2 * {b})")),
        (var(), var()).prop_map(|(a, b)| format!("({a} + {b})^2")),
        var().prop_map(|a| format!("ns({a}, df = 3)")),
    ]
}

fn formula() -> impl Strategy<Value = String> {
    (prop::collection::vec(item(), 1..6), any::<bool>(), prop::option::of(var())).prop_map(|(items, no_int, grp)| {
        let mut s = format!("y ~ {}", items.join(" + "));
        if no_int {
            s.push_str(" - 1");
        }
        if let Some(g) = grp {
            s.push_str(&format!(" + (1 | {g}_id)"));
        }
        s
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn render_then_parse_is_identity(f in formula()) {
        let ast = lenient(&f);
        let text = render_formula(&ast);
        prop_assert_eq!(&ast, &lenient(&text), "{} rendered as {}", f, text);
    }

    #[test]
    fn interaction_order_is_irrelevant(vs in prop::collection::vec(var(), 2..4)) {
        let fwd = parse_formula(&format!("y ~ {}", vs.join(" * "))).unwrap();
        let rev: Vec<String> = vs.iter().rev().cloned().collect();
        let rev = parse_formula(&format!("y ~ {}", rev.join(" * "))).unwrap();
        let (a, b) = (expand_terms(&fwd).unwrap(), expand_terms(&rev).unwrap());
        prop_assert_eq!(names(&a), names(&b));
        prop_assert_eq!(expand_terms(&fwd).unwrap(), a);
    }

    #[test]
    fn interaction_dependencies_are_the_union(f in formula()) {
        let ast = lenient(&f);
        for t in expand_terms(&ast).unwrap() {
            let union: BTreeSet<String> = t.factors().iter().flat_map(|x| x.dependencies()).collect();
            prop_assert_eq!(term_dependencies(&t), union);
        }
    }
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the reference category is chosen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefCatSpec {
    First,
    Last,
    /// Most frequent observed category; ties go to the earlier category.
    Largest,
    Label(String),
    /// 1-based position in category order.
    Index(usize),
}

impl RefCatSpec {
    /// Reads `first`, `last`, `largest`, an existing label, or a 1-based
    /// index, in that order of precedence.
    pub fn parse(text: &str, levels: &[String]) -> RefCatSpec {
        match text {
            "first" => RefCatSpec::First,
            "last" => RefCatSpec::Last,
            "largest" => RefCatSpec::Largest,
            _ if levels.iter().any(|l| l == text) => RefCatSpec::Label(text.to_string()),
            _ => match text.parse::<usize>() {
                Ok(i) => RefCatSpec::Index(i),
                Err(_) => RefCatSpec::Label(text.to_string()),
            },
        }
    }
}

/// Index of the reference category.
pub fn resolve_refcat(
    spec: &RefCatSpec,
    levels: &[String],
    codes: &[Option<usize>],
) -> Result<usize> {
    let k = levels.len();
    if k == 0 {
        return Err(Error::Data("variable has no categories".into()));
    }
    match spec {
        RefCatSpec::First => Ok(0),
        RefCatSpec::Last => Ok(k - 1),
        RefCatSpec::Largest => {
            let mut counts = vec![0usize; k];
            for c in codes.iter().flatten() {
                counts[*c] += 1;
            }
            let max = *counts.iter().max().unwrap();
            Ok(counts.iter().position(|&c| c == max).unwrap())
        }
        RefCatSpec::Label(l) => levels
            .iter()
            .position(|x| x == l)
            .ok_or_else(|| Error::Data(format!("reference category '{l}' does not exist"))),
        RefCatSpec::Index(i) => {
            if *i >= 1 && *i <= k {
                Ok(i - 1)
            } else {
                Err(Error::Data(format!(
                    "reference index {i} out of range 1..={k}"
                )))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coding {
    Dummy,
    Effect,
}

impl std::str::FromStr for Coding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Coding> {
        match s {
            "dummy" => Ok(Coding::Dummy),
            "effect" => Ok(Coding::Effect),
            other => Err(Error::Config(format!(
                "unsupported contrast coding '{other}' (use dummy or effect)"
            ))),
        }
    }
}

/// Contrast values for one category: `K-1` entries, one per non-reference
/// category in category order.
pub fn contrast_row(category: usize, k: usize, reference: usize, coding: Coding) -> Vec<f64> {
    let mut row = Vec::with_capacity(k - 1);
    for j in (0..k).filter(|&j| j != reference) {
        let v = if category == j {
            1.0
        } else if category == reference && coding == Coding::Effect {
            -1.0
        } else {
            0.0
        };
        row.push(v);
    }
    row
}

/// Encoded design columns of a categorical variable.
#[derive(Clone, Debug, PartialEq)]
pub struct Contrasts {
    pub names: Vec<String>,
    /// One row per data row; `None` where the category is missing, to be
    /// filled from the imputed category during sampling.
    pub rows: Vec<Option<Vec<f64>>>,
}

impl Contrasts {
    pub fn is_dynamic(&self) -> bool {
        self.rows.iter().any(Option::is_none)
    }
}

pub fn encode_contrasts(
    var: &str,
    levels: &[String],
    codes: &[Option<usize>],
    reference: usize,
    coding: Coding,
) -> Contrasts {
    let k = levels.len();
    let names = (0..k)
        .filter(|&j| j != reference)
        .map(|j| format!("{var}{}", levels[j]))
        .collect();
    let rows = codes
        .iter()
        .map(|c| c.map(|c| contrast_row(c, k, reference, coding)))
        .collect();
    Contrasts { names, rows }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn lv(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn refcat_rules() {
        let levels = lv(&["A", "B"]);
        let mut codes = vec![Some(0); 10];
        codes.extend(vec![Some(1); 20]);
        assert_eq!(resolve_refcat(&RefCatSpec::Largest, &levels, &codes).unwrap(), 1);
        let sexes = lv(&["male", "female"]);
        assert_eq!(resolve_refcat(&RefCatSpec::First, &sexes, &[]).unwrap(), 0);
        let occ = lv(&["working", "looking for work", "not working"]);
        let spec = RefCatSpec::parse("not working", &occ);
        assert_eq!(resolve_refcat(&spec, &occ, &[]).unwrap(), 2);
        assert_eq!(resolve_refcat(&RefCatSpec::Index(2), &occ, &[]).unwrap(), 1);
        assert!(resolve_refcat(&RefCatSpec::Index(4), &occ, &[]).is_err());
        assert!(resolve_refcat(&RefCatSpec::Label("x".into()), &occ, &[]).is_err());
        let tie = [Some(1), Some(0)];
        assert_eq!(resolve_refcat(&RefCatSpec::Largest, &levels, &tie).unwrap(), 0);
    }

    #[test]
    fn dummy_binary() {
        let c = encode_contrasts(
            "gender",
            &lv(&["male", "female"]),
            &[Some(0), Some(1), None],
            0,
            Coding::Dummy,
        );
        assert_eq!(c.names, ["genderfemale"]);
        assert_eq!(c.rows, vec![Some(vec![0.0]), Some(vec![1.0]), None]);
        assert!(c.is_dynamic());
    }

    #[test]
    fn effect_coding_reference_row() {
        let c = encode_contrasts("x", &lv(&["c1", "c2", "c3"]), &[Some(0), Some(2)], 0, Coding::Effect);
        assert_eq!(c.rows[0], Some(vec![-1.0, -1.0]));
        assert_eq!(c.rows[1], Some(vec![0.0, 1.0]));
        assert!("poly".parse::<Coding>().is_err());
    }

    proptest! {
        #[test]
        fn full_column_rank(k in 2usize..6, reference in 0usize..6, effect in any::<bool>(), extra in prop::collection::vec(0usize..6, 0..30)) {
            let reference = reference % k;
            let mut codes: Vec<Option<usize>> = (0..k).map(Some).collect();
            codes.extend(extra.into_iter().map(|c| Some(c % k)));
            let levels: Vec<String> = (0..k).map(|i| format!("l{i}")).collect();
            let coding = if effect { Coding::Effect } else { Coding::Dummy };
            let c = encode_contrasts("v", &levels, &codes, reference, coding);
            let n = codes.len();
            let x = DMatrix::from_fn(n, k, |i, j| if j == 0 { 1.0 } else { c.rows[i].as_ref().unwrap()[j - 1] });
            let sv = x.svd(false, false).singular_values;
            prop_assert!(sv.iter().all(|s| *s > 1e-8));
        }
    }
}

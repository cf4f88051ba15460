use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::scaling::{scaling_stats, ScaleStats};
use super::{Column, ColumnData, Dataset, Grouping};

/// Level name used for variables that vary within groups.
pub const LVLONE: &str = "lvlone";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarType {
    Continuous,
    Binary,
    Unordered(usize),
    Ordered(usize),
}

impl VarType {
    pub fn is_categorical(self) -> bool {
        !matches!(self, VarType::Continuous)
    }

    pub fn n_categories(self) -> usize {
        match self {
            VarType::Continuous => 0,
            VarType::Binary => 2,
            VarType::Unordered(k) | VarType::Ordered(k) => k,
        }
    }
}

impl fmt::Display for VarType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VarType::Continuous => write!(f, "continuous"),
            VarType::Binary => write!(f, "binary"),
            VarType::Unordered(k) => write!(f, "unordered-cat({k})"),
            VarType::Ordered(k) => write!(f, "ordered-cat({k})"),
        }
    }
}

/// User-declared measurement type.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeclaredType {
    Continuous,
    Binary,
    Unordered,
    Ordered,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetaOverride {
    #[serde(default)]
    pub vtype: Option<DeclaredType>,
    /// `"lvlone"` or the grouping variable.
    #[serde(default)]
    pub level: Option<String>,
    /// Category order; must cover every observed label.
    #[serde(default)]
    pub levels: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariableMeta {
    pub name: String,
    pub vtype: VarType,
    /// `"lvlone"` or the name of the grouping variable.
    pub level: String,
    /// Missing count at the variable's level (groups for level-2 variables).
    pub n_missing: usize,
    /// Category labels in model order (empty for continuous variables).
    pub levels: Vec<String>,
    /// Reference category label, set during contrast resolution.
    pub ref_cat: Option<String>,
    /// Observed-value mean and sd for continuous variables with spread.
    pub scale: Option<ScaleStats>,
}

impl VariableMeta {
    pub fn is_level2(&self) -> bool {
        self.level != LVLONE
    }

    pub fn is_incomplete(&self) -> bool {
        self.n_missing > 0
    }
}

const TRUE_LABELS: [&str; 4] = ["TRUE", "True", "true", "T"];
const FALSE_LABELS: [&str; 4] = ["FALSE", "False", "false", "F"];

fn boolean_levels(levels: &[String]) -> Option<Vec<String>> {
    let f = levels.iter().find(|l| FALSE_LABELS.contains(&l.as_str()));
    let t = levels.iter().find(|l| TRUE_LABELS.contains(&l.as_str()));
    let all_bool = levels
        .iter()
        .all(|l| TRUE_LABELS.contains(&l.as_str()) || FALSE_LABELS.contains(&l.as_str()));
    if !all_bool || levels.len() > 2 {
        return None;
    }
    match (f, t) {
        (Some(f), Some(t)) => Some(vec![f.clone(), t.clone()]),
        _ => None,
    }
}

fn distinct_sorted(values: &[Option<f64>]) -> Vec<f64> {
    let mut d: Vec<f64> = values.iter().flatten().copied().collect();
    d.sort_by(|a, b| a.partial_cmp(b).unwrap());
    d.dedup();
    d
}

/// Observed category labels of a column that is treated as categorical.
/// Numeric columns use their distinct values in ascending order.
fn natural_levels(col: &Column) -> Vec<String> {
    match &col.data {
        ColumnData::Numeric(v) => distinct_sorted(v).iter().map(|x| format!("{x}")).collect(),
        ColumnData::Categorical { codes, levels } => {
            let mut used = vec![false; levels.len()];
            for c in codes.iter().flatten() {
                used[*c] = true;
            }
            levels
                .iter()
                .zip(used)
                .filter(|(_, u)| *u)
                .map(|(l, _)| l.clone())
                .collect()
        }
    }
}

/// Category index of every cell of `col` under `meta.levels`.
pub fn category_codes(col: &Column, meta: &VariableMeta) -> Result<Vec<Option<usize>>> {
    (0..col.len())
        .map(|r| match col.label(r) {
            None => Ok(None),
            Some(lab) => meta
                .levels
                .iter()
                .position(|l| *l == lab)
                .map(Some)
                .ok_or_else(|| {
                    Error::Data(format!(
                        "value '{lab}' of '{}' is not one of its categories",
                        col.name
                    ))
                }),
        })
        .collect()
}

/// True when every group has at most one distinct observed value.
fn group_constant(col: &Column, grouping: &Grouping) -> bool {
    grouping.rows.iter().all(|rows| {
        let mut first: Option<String> = None;
        rows.iter().all(|&r| match col.label(r) {
            None => true,
            Some(v) => match &first {
                None => {
                    first = Some(v);
                    true
                }
                Some(f) => *f == v,
            },
        })
    })
}

fn groups_missing(col: &Column, grouping: &Grouping) -> usize {
    grouping
        .rows
        .iter()
        .filter(|rows| rows.iter().all(|&r| col.is_missing(r)))
        .count()
}

/// Determines type, hierarchy level and missingness of each column in
/// `vars` (all columns except the grouping variable when `vars` is `None`).
pub fn infer_variable_meta(
    ds: &Dataset,
    grouping: Option<&str>,
    overrides: &BTreeMap<String, MetaOverride>,
    vars: Option<&[String]>,
) -> Result<Vec<VariableMeta>> {
    let grouping = match grouping {
        Some(g) => Some(ds.grouping(g)?),
        None => None,
    };
    for name in overrides.keys() {
        ds.require(name)?;
    }
    let names: Vec<String> = match vars {
        Some(v) => v.to_vec(),
        None => ds
            .names()
            .into_iter()
            .filter(|n| Some(*n) != grouping.as_ref().map(|g| g.var.as_str()))
            .map(str::to_string)
            .collect(),
    };
    let default = MetaOverride::default();
    names
        .iter()
        .map(|name| {
            let col = ds.require(name)?;
            let ov = overrides.get(name).unwrap_or(&default);
            one_meta(col, grouping.as_ref(), ov)
        })
        .collect()
}

fn one_meta(col: &Column, grouping: Option<&Grouping>, ov: &MetaOverride) -> Result<VariableMeta> {
    let name = &col.name;
    let observed = natural_levels(col);
    let (vtype, levels) = match ov.vtype {
        None => match &col.data {
            ColumnData::Numeric(_) if observed.len() == 2 => (VarType::Binary, observed),
            ColumnData::Numeric(_) => (VarType::Continuous, Vec::new()),
            ColumnData::Categorical { .. } => {
                if let Some(b) = boolean_levels(&observed) {
                    (VarType::Binary, b)
                } else if observed.len() == 2 {
                    (VarType::Binary, observed)
                } else {
                    (VarType::Unordered(observed.len()), observed)
                }
            }
        },
        Some(DeclaredType::Continuous) => {
            if !col.is_numeric() {
                return Err(Error::Data(format!(
                    "'{name}' is declared continuous but has non-numeric values"
                )));
            }
            (VarType::Continuous, Vec::new())
        }
        Some(DeclaredType::Binary) => {
            if observed.len() > 2 {
                return Err(Error::Data(format!(
                    "'{name}' is declared binary but has {} distinct values",
                    observed.len()
                )));
            }
            let lv = boolean_levels(&observed).unwrap_or(observed);
            (VarType::Binary, lv)
        }
        Some(DeclaredType::Unordered) => (VarType::Unordered(observed.len()), observed),
        Some(DeclaredType::Ordered) => (VarType::Ordered(observed.len()), observed),
    };
    let (vtype, levels) = match &ov.levels {
        Some(order) if vtype.is_categorical() => {
            for l in &levels {
                if !order.contains(l) {
                    return Err(Error::Data(format!(
                        "category '{l}' of '{name}' is missing from the declared levels"
                    )));
                }
            }
            let k = order.len();
            let vt = match vtype {
                VarType::Binary if k == 2 => VarType::Binary,
                VarType::Binary | VarType::Unordered(_) => VarType::Unordered(k),
                VarType::Ordered(_) => VarType::Ordered(k),
                VarType::Continuous => unreachable!(),
            };
            (vt, order.clone())
        }
        Some(_) => {
            return Err(Error::Data(format!(
                "levels given for continuous variable '{name}'"
            )))
        }
        None => (vtype, levels),
    };
    if vtype.is_categorical() && levels.len() < 2 {
        return Err(Error::Data(format!(
            "categorical variable '{name}' has fewer than two categories"
        )));
    }

    let constant = grouping.is_some_and(|g| group_constant(col, g));
    let level = match (ov.level.as_deref(), grouping) {
        (None, Some(g)) if constant => g.var.clone(),
        (None, _) => LVLONE.to_string(),
        (Some(LVLONE), _) => LVLONE.to_string(),
        (Some(l), Some(g)) if l == g.var => {
            if !constant {
                return Err(Error::Data(format!(
                    "'{name}' is declared at level '{l}' but varies within groups"
                )));
            }
            l.to_string()
        }
        (Some(l), _) => {
            return Err(Error::Data(format!(
                "unknown level '{l}' declared for '{name}'"
            )))
        }
    };
    let n_missing = match grouping {
        Some(g) if level != LVLONE => groups_missing(col, g),
        _ => col.n_missing(),
    };
    let scale = match (&col.data, vtype) {
        (ColumnData::Numeric(v), VarType::Continuous) => scaling_stats(v).ok(),
        _ => None,
    };
    Ok(VariableMeta {
        name: name.clone(),
        vtype,
        level,
        n_missing,
        levels,
        ref_cat: None,
        scale,
    })
}

#[cfg(test)]
mod tests {
    use super::super::read_csv_str;
    use super::*;

    fn meta(csv: &str, grouping: Option<&str>) -> Vec<VariableMeta> {
        let ds = read_csv_str(csv, "NA").unwrap();
        infer_variable_meta(&ds, grouping, &BTreeMap::new(), None).unwrap()
    }

    #[test]
    fn two_valued_numeric_is_binary() {
        let m = meta("x\n0\n1\n1\n0\n", None);
        assert_eq!(m[0].vtype, VarType::Binary);
        assert_eq!(m[0].levels, ["0", "1"]);
    }

    #[test]
    fn labels_and_booleans() {
        let m = meta("a,b,c\nlow,TRUE,x\nhigh,FALSE,y\nlow,TRUE,z\n", None);
        assert_eq!(m[0].vtype, VarType::Binary);
        assert_eq!(m[0].levels, ["low", "high"]);
        assert_eq!(m[1].levels, ["FALSE", "TRUE"]);
        assert_eq!(m[2].vtype, VarType::Unordered(3));
    }

    #[test]
    fn level_two_detection_and_missing_per_group() {
        let mut csv = String::from("ID,H,x\n");
        for g in 0..200 {
            for j in 0..3 {
                let h = if g < 4 { "NA".to_string() } else { format!("{}", 1.5 + g as f64 / 100.0) };
                let h = if g == 10 && j == 1 { "NA".to_string() } else { h };
                csv.push_str(&format!("{g},{h},{}\n", g * 3 + j));
            }
        }
        let m = meta(&csv, Some("ID"));
        assert_eq!(m[0].name, "H");
        assert_eq!(m[0].level, "ID");
        assert_eq!(m[0].n_missing, 4);
        assert_eq!(m[1].level, LVLONE);
        assert_eq!(m[1].n_missing, 0);
        assert_eq!(m[1].vtype, VarType::Continuous);
    }

    #[test]
    fn override_conflicts() {
        let ds = read_csv_str("g,x\n1,1\n1,2\n2,3\n2,4\n", "NA").unwrap();
        let mut ov = BTreeMap::new();
        ov.insert(
            "x".to_string(),
            MetaOverride {
                level: Some("g".into()),
                ..Default::default()
            },
        );
        assert!(infer_variable_meta(&ds, Some("g"), &ov, None).is_err());
        ov.insert(
            "x".to_string(),
            MetaOverride {
                vtype: Some(DeclaredType::Ordered),
                ..Default::default()
            },
        );
        let m = infer_variable_meta(&ds, Some("g"), &ov, None).unwrap();
        assert_eq!(m[0].vtype, VarType::Ordered(4));
        ov.insert(
            "x".to_string(),
            MetaOverride {
                vtype: Some(DeclaredType::Binary),
                ..Default::default()
            },
        );
        assert!(infer_variable_meta(&ds, Some("g"), &ov, None).is_err());
    }

    #[test]
    fn explicit_level_order() {
        let ds = read_csv_str("s\nmid\nlow\nhigh\n", "NA").unwrap();
        let mut ov = BTreeMap::new();
        ov.insert(
            "s".to_string(),
            MetaOverride {
                vtype: Some(DeclaredType::Ordered),
                levels: Some(vec!["low".into(), "mid".into(), "high".into()]),
                ..Default::default()
            },
        );
        let m = infer_variable_meta(&ds, None, &ov, None).unwrap();
        assert_eq!(m[0].levels, ["low", "mid", "high"]);
        let codes = category_codes(ds.column("s").unwrap(), &m[0]).unwrap();
        assert_eq!(codes, [Some(1), Some(0), Some(2)]);
    }
}

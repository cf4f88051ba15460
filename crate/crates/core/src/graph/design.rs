use std::collections::{BTreeSet, HashMap};

use serde::Serialize;

use crate::data::{category_codes, contrast_row, ColumnData, Dataset, ScaleStats, VariableMeta};
use crate::error::{Error, Result};
use crate::formula::{eval_arith, ArithExpr, Factor, FunctionRegistry, Scalar, Term};

use super::build::{ModelGraph, SubModel};
use super::model_type::Family;

/// Variables of a model with their current values, one row per data row.
/// Categorical values are stored as category indices; missing cells are NaN.
#[derive(Clone, Debug)]
pub struct VarTable {
    pub metas: Vec<VariableMeta>,
    index: HashMap<String, usize>,
    /// Contrast matrix (one row per category) of categorical variables.
    pub contrasts: Vec<Option<Vec<Vec<f64>>>>,
    pub reference: Vec<Option<usize>>,
}

impl VarTable {
    pub fn new(graph: &ModelGraph) -> VarTable {
        let metas = graph.metas.clone();
        let index = metas
            .iter()
            .enumerate()
            .map(|(i, m)| (m.name.clone(), i))
            .collect();
        let reference: Vec<Option<usize>> =
            metas.iter().map(|m| graph.refcat_index(&m.name)).collect();
        let contrasts = metas
            .iter()
            .zip(&reference)
            .map(|(m, r)| {
                r.map(|r| {
                    let k = m.levels.len();
                    (0..k).map(|c| contrast_row(c, k, r, graph.coding)).collect()
                })
            })
            .collect();
        VarTable {
            metas,
            index,
            contrasts,
            reference,
        }
    }

    pub fn len(&self) -> usize {
        self.metas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.metas.is_empty()
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn require(&self, name: &str) -> Result<usize> {
        self.index(name)
            .ok_or_else(|| Error::Model(format!("variable '{name}' is not part of the model")))
    }

    pub fn is_categorical(&self, var: usize) -> bool {
        self.metas[var].vtype.is_categorical()
    }

    /// Values of every model variable taken from `ds`. With `group_rows`,
    /// level-2 variables are spread over all rows of their group.
    pub fn values(&self, ds: &Dataset, group_rows: Option<&[Vec<usize>]>) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(self.len());
        for m in &self.metas {
            let col = ds.require(&m.name)?;
            let mut v: Vec<f64> = if m.vtype.is_categorical() {
                category_codes(col, m)?
                    .into_iter()
                    .map(|c| c.map_or(f64::NAN, |c| c as f64))
                    .collect()
            } else {
                match &col.data {
                    ColumnData::Numeric(x) => x.iter().map(|x| x.unwrap_or(f64::NAN)).collect(),
                    ColumnData::Categorical { .. } => {
                        return Err(Error::Data(format!("variable '{}' is not numeric", m.name)))
                    }
                }
            };
            if let (true, Some(groups)) = (m.is_level2(), group_rows) {
                for rows in groups {
                    let fill = rows.iter().map(|&r| v[r]).find(|x| !x.is_nan());
                    if let Some(x) = fill {
                        for &r in rows {
                            v[r] = x;
                        }
                    }
                }
            }
            out.push(v);
        }
        Ok(out)
    }

    fn scalar(&self, var: usize, x: f64) -> Scalar {
        if x.is_nan() || !self.is_categorical(var) {
            return Scalar::Num(x);
        }
        let label = &self.metas[var].levels[x as usize];
        match label.parse::<f64>() {
            Ok(v) => Scalar::Num(v),
            Err(_) => Scalar::Str(label.clone()),
        }
    }
}

/// One factor of a design column.
#[derive(Clone, Debug, Serialize)]
pub enum ColumnPart {
    Value(usize),
    /// Entry `j` of the contrast row of the variable's category.
    Contrast { var: usize, j: usize },
    /// Function or `I()` expression; `vars` maps names to table indices.
    Expr {
        expr: ArithExpr,
        vars: Vec<(String, usize)>,
    },
}

#[derive(Clone, Debug, Serialize)]
pub struct DesignColumn {
    pub name: String,
    pub parts: Vec<ColumnPart>,
    /// Variables the column is computed from.
    pub deps: Vec<usize>,
    /// Whether any dependency has missing values.
    pub dynamic: bool,
    /// Centering and scaling applied before the column enters the linear
    /// predictor; identity when `None`.
    pub scale: Option<ScaleStats>,
}

impl DesignColumn {
    pub fn intercept() -> Self {
        DesignColumn {
            name: "(Intercept)".to_string(),
            parts: Vec::new(),
            deps: Vec::new(),
            dynamic: false,
            scale: None,
        }
    }

    pub fn is_intercept(&self) -> bool {
        self.parts.is_empty()
    }

    /// Value on the data scale at one row.
    pub fn raw(
        &self,
        values: &[Vec<f64>],
        row: usize,
        vt: &VarTable,
        registry: &FunctionRegistry,
    ) -> f64 {
        let mut out = 1.0;
        for p in &self.parts {
            out *= match p {
                ColumnPart::Value(v) => values[*v][row],
                ColumnPart::Contrast { var, j } => {
                    let c = values[*var][row];
                    if c.is_nan() {
                        f64::NAN
                    } else {
                        vt.contrasts[*var].as_ref().expect("categorical")[c as usize][*j]
                    }
                }
                ColumnPart::Expr { expr, vars } => {
                    let mut lookup = |name: &str| -> Result<Scalar> {
                        let (_, i) = vars
                            .iter()
                            .find(|(n, _)| n == name)
                            .ok_or_else(|| Error::Model(format!("unknown variable '{name}'")))?;
                        Ok(vt.scalar(*i, values[*i][row]))
                    };
                    eval_arith(expr, registry, &mut lookup).unwrap_or(f64::NAN)
                }
            };
        }
        out
    }

    /// Value as used in the linear predictor.
    pub fn value(
        &self,
        values: &[Vec<f64>],
        row: usize,
        vt: &VarTable,
        registry: &FunctionRegistry,
    ) -> f64 {
        let x = self.raw(values, row, vt, registry);
        match self.scale {
            Some(s) => (x - s.mean) / s.sd,
            None => x,
        }
    }

    /// Checks that expression parts can be evaluated, so unknown functions
    /// are reported before sampling.
    pub fn check(&self, values: &[Vec<f64>], row: usize, vt: &VarTable, registry: &FunctionRegistry) -> Result<()> {
        for p in &self.parts {
            if let ColumnPart::Expr { expr, vars } = p {
                let mut lookup = |name: &str| -> Result<Scalar> {
                    let (_, i) = vars.iter().find(|(n, _)| n == name).unwrap();
                    Ok(vt.scalar(*i, values[*i][row]))
                };
                eval_arith(expr, registry, &mut lookup)?;
            }
        }
        Ok(())
    }
}

/// Design columns of one linear predictor together with their values at
/// the model's units.
#[derive(Clone, Debug)]
pub struct DesignPlan {
    pub columns: Vec<DesignColumn>,
    /// Data row representing each unit (all rows for level-1 models, one
    /// row per group for level-2 models).
    pub unit_rows: Vec<usize>,
    /// Row-major `units x columns`; NaN where a dynamic column's value
    /// depends on a missing cell.
    pub values: Vec<f64>,
    /// Indices of dynamic columns.
    pub dynamic: Vec<usize>,
    /// For each dynamic column, the units at which it must be recomputed.
    pub affected: Vec<Vec<usize>>,
}

impl DesignPlan {
    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn is_static(&self, col: usize) -> bool {
        !self.columns[col].dynamic
    }
}

fn factor_columns(f: &Factor, vt: &VarTable) -> Result<Vec<(String, ColumnPart, Vec<usize>)>> {
    Ok(match f {
        Factor::Variable(v) => {
            let i = vt.require(v)?;
            match &vt.contrasts[i] {
                Some(_) => {
                    let m = &vt.metas[i];
                    let r = vt.reference[i].unwrap();
                    (0..m.levels.len())
                        .filter(|&c| c != r)
                        .enumerate()
                        .map(|(j, c)| {
                            (
                                format!("{v}{}", m.levels[c]),
                                ColumnPart::Contrast { var: i, j },
                                vec![i],
                            )
                        })
                        .collect()
                }
                None => vec![(v.clone(), ColumnPart::Value(i), vec![i])],
            }
        }
        Factor::Func { name, args } => {
            let expr = ArithExpr::Call(name.clone(), args.clone());
            expr_column(f.label(), expr, f, vt)?
        }
        Factor::Arith(a) => expr_column(f.label(), a.clone(), f, vt)?,
    })
}

fn expr_column(
    label: String,
    expr: ArithExpr,
    f: &Factor,
    vt: &VarTable,
) -> Result<Vec<(String, ColumnPart, Vec<usize>)>> {
    let vars: Vec<(String, usize)> = f
        .dependencies()
        .into_iter()
        .map(|d| vt.require(&d).map(|i| (d, i)))
        .collect::<Result<_>>()?;
    let deps = vars.iter().map(|(_, i)| *i).collect();
    Ok(vec![(label, ColumnPart::Expr { expr, vars }, deps)])
}

/// Columns of a list of terms (contrast columns for categorical factors,
/// products for interactions).
pub fn term_columns(terms: &[Term], vt: &VarTable) -> Result<Vec<DesignColumn>> {
    let mut out = Vec::new();
    for t in terms {
        let mut acc: Vec<(Vec<String>, Vec<ColumnPart>, BTreeSet<usize>)> =
            vec![(Vec::new(), Vec::new(), BTreeSet::new())];
        for f in t.factors() {
            let cols = factor_columns(f, vt)?;
            let mut next = Vec::new();
            for (names, parts, deps) in &acc {
                for (n, p, d) in &cols {
                    let mut names = names.clone();
                    names.push(n.clone());
                    let mut parts = parts.clone();
                    parts.push(p.clone());
                    let mut deps = deps.clone();
                    deps.extend(d.iter().copied());
                    next.push((names, parts, deps));
                }
            }
            acc = next;
        }
        for (names, parts, deps) in acc {
            let dynamic = deps.iter().any(|&d| vt.metas[d].is_incomplete());
            out.push(DesignColumn {
                name: names.join(":"),
                parts,
                deps: deps.into_iter().collect(),
                dynamic,
                scale: None,
            });
        }
    }
    Ok(out)
}

/// Units (representative rows) of a sub-model.
pub fn model_units(sm: &SubModel, n_rows: usize, group_rows: Option<&[Vec<usize>]>) -> Vec<usize> {
    match group_rows {
        Some(groups) if sm.level != crate::data::LVLONE => groups.iter().map(|r| r[0]).collect(),
        _ => (0..n_rows).collect(),
    }
}

/// Builds the fixed-effects design of a sub-model. Columns of continuous
/// variables listed in the graph's `scale_vars` are standardized with the
/// mean and sd over units where they are observed; centering is used only
/// when the model has an intercept or thresholds.
pub fn design_plan(
    sm: &SubModel,
    graph: &ModelGraph,
    vt: &VarTable,
    values: &[Vec<f64>],
    units: &[usize],
    warnings: &mut Vec<String>,
) -> Result<DesignPlan> {
    let mut columns = Vec::new();
    if sm.intercept {
        columns.push(DesignColumn::intercept());
    }
    let mut cols = term_columns(&sm.terms, vt)?;
    let center = sm.intercept || sm.model_type.family() == Family::Ordinal;
    for c in cols.iter_mut() {
        let scalable = !c.parts.is_empty()
            && c.parts.iter().all(|p| !matches!(p, ColumnPart::Contrast { .. }))
            && c
                .deps
                .iter()
                .all(|&d| graph.scale_vars.contains(&vt.metas[d].name));
        if !scalable {
            continue;
        }
        let obs: Vec<f64> = units
            .iter()
            .map(|&r| c.raw(values, r, vt, &graph.registry))
            .filter(|x| x.is_finite())
            .collect();
        let n = obs.len() as f64;
        let mean = obs.iter().sum::<f64>() / n;
        let var = obs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        if obs.len() < 2 || !(var > 0.0) {
            let msg = format!(
                "column '{}' in the model for '{}' has no spread and is not scaled",
                c.name,
                sm.name()
            );
            log::warn!("{msg}");
            warnings.push(msg);
            continue;
        }
        c.scale = Some(ScaleStats {
            mean: if center { mean } else { 0.0 },
            sd: var.sqrt(),
        });
    }
    columns.extend(cols);

    let p = columns.len();
    let mut data = vec![0.0; units.len() * p];
    let mut dynamic = Vec::new();
    let mut affected = Vec::new();
    for (j, c) in columns.iter().enumerate() {
        let mut aff = Vec::new();
        let mut checked = false;
        for (u, &r) in units.iter().enumerate() {
            let missing = c.deps.iter().any(|&d| values[d][r].is_nan());
            if missing {
                aff.push(u);
                data[u * p + j] = f64::NAN;
            } else {
                if !checked {
                    c.check(values, r, vt, &graph.registry)?;
                    checked = true;
                }
                data[u * p + j] = c.value(values, r, vt, &graph.registry);
            }
        }
        if c.dynamic {
            dynamic.push(j);
            affected.push(aff);
        }
    }
    Ok(DesignPlan {
        columns,
        unit_rows: units.to_vec(),
        values: data,
        dynamic,
        affected,
    })
}

/// Random-effects design columns (unscaled), intercept first.
pub fn random_columns(sm: &SubModel, vt: &VarTable) -> Result<Vec<DesignColumn>> {
    let mut out = Vec::new();
    if sm.random_intercept {
        out.push(DesignColumn::intercept());
    }
    out.extend(term_columns(&sm.random_terms, vt)?);
    Ok(out)
}

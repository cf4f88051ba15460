//! Sub-models compiled against a data set.

use crate::data::{Dataset, Grouping};
use crate::error::{Error, Result};
use crate::formula::{arith_vars, ResponseSpec};
use crate::graph::{
    design_plan, model_units, random_columns, ColumnPart, DesignColumn, DesignPlan, Family,
    FamilyPrior, Link, ModelGraph, ModelType, Shrinkage, SubModel, Trunc, VarTable,
};

use super::density as dens;
use super::state::ChainState;

/// Random-effects structure of a mixed sub-model.
#[derive(Clone, Debug)]
pub struct Ranef {
    pub columns: Vec<DesignColumn>,
    pub q: usize,
    /// Row-major `units x q`.
    pub z: Vec<f64>,
    pub group_of_unit: Vec<usize>,
    pub units_of_group: Vec<Vec<usize>>,
    pub kinvd: f64,
    pub shape_rinvd: f64,
    pub rate_rinvd: f64,
}

impl Ranef {
    pub fn n_groups(&self) -> usize {
        self.units_of_group.len()
    }
}

#[derive(Clone, Debug)]
pub struct CompiledModel {
    pub sm: SubModel,
    pub model_type: ModelType,
    pub family: Family,
    pub link: Link,
    /// Response variable (survival time for `survreg`).
    pub var: usize,
    /// Event indicator per unit for survival models.
    pub event: Option<Vec<bool>>,
    pub level2: bool,
    pub design: DesignPlan,
    pub p: usize,
    /// Linear predictors: one, or `K - 1` for multinomial models.
    pub n_lp: usize,
    pub n_cat: usize,
    /// Reference category (binomial failure, multinomial baseline).
    pub ref_cat: Option<usize>,
    /// Categories of the multinomial linear predictors.
    pub lp_cats: Vec<usize>,
    pub prior: FamilyPrior,
    pub mu_delta: f64,
    pub tau_delta: f64,
    pub rate_shape: f64,
    pub ridge: bool,
    pub ranef: Option<Ranef>,
    /// Gaussian identity and log-normal models use conjugate updates.
    pub conjugate: bool,
}

impl CompiledModel {
    pub fn name(&self) -> &str {
        self.sm.name()
    }

    pub fn n_units(&self) -> usize {
        self.design.unit_rows.len()
    }

    pub fn n_coef(&self) -> usize {
        self.p * self.n_lp
    }

    /// Labels of the coefficients, `K - 1` blocks for multinomial models.
    pub fn coef_labels(&self) -> Vec<String> {
        let names = self.design.names();
        if self.family == Family::Multinomial {
            let mut out = Vec::new();
            for _ in &self.lp_cats {
                out.extend(names.iter().cloned());
            }
            out
        } else {
            names
        }
    }
}

/// Missing value (one cell, or one group value of a level-2 variable).
#[derive(Clone, Debug)]
pub struct ImpTarget {
    pub var: usize,
    pub rows: Vec<usize>,
    pub group: Option<usize>,
    pub kind: ImpKind,
    pub trunc: Option<Trunc>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ImpKind {
    Real,
    Positive,
    Unit,
    Count,
    Categorical(usize),
}

#[derive(Clone, Debug)]
pub struct Engine {
    pub graph: ModelGraph,
    pub vt: VarTable,
    pub n_rows: usize,
    pub grouping: Option<Grouping>,
    /// Observed values, NaN where missing.
    pub data: Vec<Vec<f64>>,
    pub models: Vec<CompiledModel>,
    pub imps: Vec<ImpTarget>,
    /// Per variable, the model whose response it is.
    pub own: Vec<Option<usize>>,
    /// Per variable, the models whose predictors read it.
    pub users: Vec<Vec<usize>>,
    pub warnings: Vec<String>,
}

impl Engine {
    pub fn new(graph: &ModelGraph, ds: &Dataset) -> Result<Engine> {
        let vt = VarTable::new(graph);
        let grouping = match &graph.grouping {
            Some(g) => Some(ds.grouping(g)?),
            None => None,
        };
        let group_rows = grouping.as_ref().map(|g| g.rows.as_slice());
        let data = vt.values(ds, group_rows)?;
        let n_rows = ds.n_rows();
        let mut warnings = graph.warnings.clone();
        let mut models = Vec::new();
        for sm in &graph.submodels {
            models.push(compile(sm, graph, &vt, &data, n_rows, grouping.as_ref(), &mut warnings)?);
        }

        let mut own = vec![None; vt.len()];
        let mut users = vec![Vec::new(); vt.len()];
        for (m, cm) in models.iter().enumerate() {
            own[cm.var] = Some(m);
            let mut read: Vec<usize> = cm.design.columns.iter().flat_map(|c| c.deps.clone()).collect();
            if let Some(r) = &cm.ranef {
                read.extend(r.columns.iter().flat_map(|c| c.deps.clone()));
            }
            read.sort_unstable();
            read.dedup();
            for v in read {
                users[v].push(m);
            }
        }

        // graph order, then row order
        let mut imps = Vec::new();
        for (m, cm) in models.iter().enumerate() {
            let v = cm.var;
            let meta = &vt.metas[v];
            if !meta.is_incomplete() || own[v] != Some(m) {
                continue;
            }
            let kind = match cm.family {
                Family::Binomial | Family::Ordinal | Family::Multinomial => {
                    ImpKind::Categorical(meta.levels.len())
                }
                Family::Lognormal | Family::Gamma | Family::Weibull => ImpKind::Positive,
                Family::Beta => ImpKind::Unit,
                Family::Poisson => ImpKind::Count,
                Family::Gaussian => ImpKind::Real,
            };
            let trunc = cm.sm.trunc;
            match (&grouping, meta.is_level2()) {
                (Some(g), true) => {
                    for (gi, rows) in g.rows.iter().enumerate() {
                        if data[v][rows[0]].is_nan() {
                            imps.push(ImpTarget { var: v, rows: rows.clone(), group: Some(gi), kind, trunc });
                        }
                    }
                }
                _ => {
                    for r in 0..n_rows {
                        if data[v][r].is_nan() {
                            imps.push(ImpTarget { var: v, rows: vec![r], group: None, kind, trunc });
                        }
                    }
                }
            }
        }

        Ok(Engine {
            graph: graph.clone(),
            vt,
            n_rows,
            grouping,
            data,
            models,
            imps,
            own,
            users,
            warnings,
        })
    }

    pub fn n_analysis(&self) -> usize {
        self.models.iter().filter(|m| m.sm.is_analysis()).count()
    }

    /// Units of model `m` that involve any of `rows`.
    pub fn units_touching(&self, m: usize, rows: &[usize]) -> Vec<usize> {
        let cm = &self.models[m];
        if cm.level2 {
            let g = self.grouping.as_ref().expect("level-2 model without grouping");
            vec![g.ids[rows[0]]]
        } else {
            rows.to_vec()
        }
    }

    /// Linear predictor(s) of unit `u`, computing dynamic columns from the
    /// current values.
    pub fn unit_eta(&self, m: usize, st: &ChainState, u: usize, out: &mut [f64]) {
        let cm = &self.models[m];
        let ms = &st.models[m];
        let row = cm.design.unit_rows[u];
        let p = cm.p;
        for k in 0..cm.n_lp {
            out[k] = 0.0;
        }
        for j in 0..p {
            let col = &cm.design.columns[j];
            let x = if col.dynamic {
                col.value(&st.values, row, &self.vt, &self.graph.registry)
            } else {
                cm.design.values[u * p + j]
            };
            for k in 0..cm.n_lp {
                out[k] += ms.beta[k * p + j] * x;
            }
        }
        if let Some(r) = &cm.ranef {
            let g = r.group_of_unit[u];
            let re: f64 = (0..r.q).map(|l| r.z[u * r.q + l] * ms.b[g * r.q + l]).sum();
            out[0] += re;
        }
    }

    /// Log-likelihood contribution of unit `u` given its linear predictor.
    pub fn unit_loglik(&self, m: usize, st: &ChainState, u: usize, eta: &[f64]) -> f64 {
        let cm = &self.models[m];
        let ms = &st.models[m];
        let y = st.values[cm.var][cm.design.unit_rows[u]];
        let e = eta[0];
        match cm.family {
            Family::Gaussian => dens::normal(y, cm.link.inverse(e), ms.tau),
            Family::Lognormal => dens::lognormal(y, e, ms.tau),
            Family::Gamma => dens::gamma_mean(y, cm.link.inverse(e), ms.tau),
            Family::Beta => dens::beta_mean(y, dens::sigmoid(e), ms.tau),
            Family::Poisson => dens::poisson(y, cm.link.inverse(e)),
            Family::Binomial => dens::bernoulli(Some(y as usize) != cm.ref_cat, e, cm.link),
            Family::Ordinal => dens::cumulative_logit(y as usize, e, &ms.thresholds()),
            Family::Multinomial => {
                let mut etas = vec![0.0; cm.n_cat];
                for (k, &c) in cm.lp_cats.iter().enumerate() {
                    etas[c] = eta[k];
                }
                dens::multinomial_logit(y as usize, &etas)
            }
            Family::Weibull => {
                let ev = cm.event.as_ref().expect("survival model has events")[u];
                dens::weibull(y, ev, e, ms.shape)
            }
        }
    }

    /// Log-likelihood of unit `u` with its linear predictor computed from
    /// scratch.
    pub fn unit_loglik_fresh(&self, m: usize, st: &ChainState, u: usize, buf: &mut [f64]) -> f64 {
        self.unit_eta(m, st, u, buf);
        self.unit_loglik(m, st, u, buf)
    }

    /// Recomputes cached design values of dynamic columns after `var`
    /// changed at `rows`.
    pub fn refresh_design(&self, st: &mut ChainState, var: usize, rows: &[usize]) {
        for &m in &self.users[var] {
            let cm = &self.models[m];
            let p = cm.p;
            let units = self.units_touching(m, rows);
            for &j in &cm.design.dynamic {
                let col = &cm.design.columns[j];
                if !col.deps.contains(&var) {
                    continue;
                }
                for &u in &units {
                    let row = cm.design.unit_rows[u];
                    st.models[m].x[u * p + j] = col.value(&st.values, row, &self.vt, &self.graph.registry);
                }
            }
        }
    }
}

fn compile(
    sm: &SubModel,
    graph: &ModelGraph,
    vt: &VarTable,
    values: &[Vec<f64>],
    n_rows: usize,
    grouping: Option<&Grouping>,
    warnings: &mut Vec<String>,
) -> Result<CompiledModel> {
    let group_rows = grouping.map(|g| g.rows.as_slice());
    let units = model_units(sm, n_rows, group_rows);
    let design = design_plan(sm, graph, vt, values, &units, warnings)?;
    let model_type = sm.model_type;
    let family = model_type.family();
    let var = vt.require(sm.name())?;
    let meta = &vt.metas[var];
    let n_cat = meta.levels.len();
    let ref_cat = vt.reference[var];
    let lp_cats: Vec<usize> = if family == Family::Multinomial {
        let r = ref_cat.ok_or_else(|| Error::Model(format!("'{}' has no reference category", sm.name())))?;
        (0..n_cat).filter(|&c| c != r).collect()
    } else {
        Vec::new()
    };
    let n_lp = if family == Family::Multinomial { lp_cats.len() } else { 1 };
    if family == Family::Ordinal && n_cat < 2 {
        return Err(Error::Model(format!("ordinal variable '{}' needs two or more categories", sm.name())));
    }

    let event = match &sm.response {
        ResponseSpec::Survival { event, .. } => {
            let mut names = std::collections::BTreeSet::new();
            arith_vars(event, &mut names);
            let vars = names
                .into_iter()
                .map(|n| vt.require(&n).map(|i| (n, i)))
                .collect::<Result<Vec<_>>>()?;
            let col = DesignColumn {
                name: "event".into(),
                deps: vars.iter().map(|(_, i)| *i).collect(),
                parts: vec![ColumnPart::Expr { expr: event.clone(), vars }],
                dynamic: false,
                scale: None,
            };
            let mut ev = Vec::with_capacity(units.len());
            for &r in &units {
                let x = col.raw(values, r, vt, &graph.registry);
                if x == 1.0 {
                    ev.push(true);
                } else if x == 0.0 {
                    ev.push(false);
                } else {
                    return Err(Error::Data(format!(
                        "event indicator of '{}' is not 0/1 in row {}",
                        sm.name(),
                        r + 1
                    )));
                }
            }
            Some(ev)
        }
        ResponseSpec::Variable(_) => None,
    };

    let ranef = if model_type.is_mixed() {
        let g = grouping.ok_or_else(|| Error::Model(format!("mixed model for '{}' without grouping", sm.name())))?;
        let columns = random_columns(sm, vt)?;
        let q = columns.len();
        let mut z = Vec::with_capacity(units.len() * q);
        for &r in &units {
            for c in &columns {
                let x = c.raw(values, r, vt, &graph.registry);
                if !x.is_finite() {
                    return Err(Error::Data(format!(
                        "random-effects column '{}' of '{}' is missing in row {}",
                        c.name,
                        sm.name(),
                        r + 1
                    )));
                }
                z.push(x);
            }
        }
        let group_of_unit: Vec<usize> = units.iter().map(|&r| g.ids[r]).collect();
        let mut units_of_group = vec![Vec::new(); g.n_groups()];
        for (u, &gi) in group_of_unit.iter().enumerate() {
            units_of_group[gi].push(u);
        }
        Some(Ranef {
            columns,
            q,
            z,
            group_of_unit,
            units_of_group,
            kinvd: graph.hyper.kinvd(q)?,
            shape_rinvd: graph.hyper.ranef.shape_diag_rinvd,
            rate_rinvd: graph.hyper.ranef.rate_diag_rinvd,
        })
    } else {
        None
    };

    let p = design.n_cols();
    Ok(CompiledModel {
        sm: sm.clone(),
        model_type,
        family,
        link: model_type.link(),
        var,
        event,
        level2: grouping.is_some() && sm.level != crate::data::LVLONE,
        design,
        p,
        n_lp,
        n_cat,
        ref_cat,
        lp_cats,
        prior: graph.hyper.for_family(family),
        mu_delta: graph.hyper.ordinal.mu_delta,
        tau_delta: graph.hyper.ordinal.tau_delta,
        rate_shape: graph.hyper.weibull.rate_shape,
        ridge: sm.shrinkage == Shrinkage::Ridge,
        ranef,
        conjugate: model_type.is_gaussian_identity() || family == Family::Lognormal,
    })
}

use std::collections::{BTreeMap, BTreeSet};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::data::{
    category_codes, infer_variable_meta, resolve_refcat, Coding, Dataset, MetaOverride, RefCatSpec,
    VarType, VariableMeta, LVLONE,
};
use crate::error::{Error, Result};
use crate::formula::{
    arith_vars, expand_term_expr, expand_terms, Factor, FormulaAst, FunctionRegistry,
    ResponseSpec, Term,
};

use super::hyper::HyperParameters;
use super::model_type::{default_analysis_type, select_model_type, ModelType};
use super::monitor::MonitorSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Analysis,
    Covariate,
    /// Model for a variable that only enters through `auxvars`.
    Auxiliary,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shrinkage {
    #[default]
    None,
    Ridge,
}

/// Bounds for imputed values; `None` means unbounded.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trunc {
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl Trunc {
    pub fn contains(&self, x: f64) -> bool {
        self.lower.is_none_or(|l| x >= l) && self.upper.is_none_or(|u| x <= u)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubModel {
    pub response: ResponseSpec,
    pub model_type: ModelType,
    /// Predictor terms without the intercept.
    pub terms: Vec<Term>,
    pub intercept: bool,
    pub group: Option<String>,
    pub random_terms: Vec<Term>,
    pub random_intercept: bool,
    pub trunc: Option<Trunc>,
    pub shrinkage: Shrinkage,
    pub role: Role,
    /// `"lvlone"` or the grouping variable.
    pub level: String,
}

impl SubModel {
    pub fn name(&self) -> &str {
        self.response.name()
    }

    pub fn is_analysis(&self) -> bool {
        self.role == Role::Analysis
    }

    pub fn n_ranef(&self) -> usize {
        usize::from(self.random_intercept) + self.random_terms.len()
    }

    /// Variables read by the linear predictor, fixed and random parts.
    pub fn predictor_variables(&self) -> BTreeSet<String> {
        self.terms
            .iter()
            .chain(&self.random_terms)
            .flat_map(crate::formula::term_dependencies)
            .collect()
    }
}

/// How covariates are scaled before sampling.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScaleVars {
    #[default]
    All,
    Flag(bool),
    Vars(Vec<String>),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ShrinkageSpec {
    #[default]
    None,
    /// `"ridge"` for all sub-models.
    All(Shrinkage),
    /// Per-response choice.
    PerModel(BTreeMap<String, Shrinkage>),
}

#[derive(Clone, Debug)]
pub struct GraphOptions {
    /// Model types by response, for analysis and covariate models.
    pub models: BTreeMap<String, ModelType>,
    pub no_model: BTreeSet<String>,
    pub auxvars: Option<FormulaAst>,
    /// Reference category per variable; `default_refcat` for the rest.
    pub refcats: BTreeMap<String, String>,
    pub default_refcat: String,
    pub coding: Coding,
    pub trunc: BTreeMap<String, Trunc>,
    pub shrinkage: ShrinkageSpec,
    pub monitor: MonitorSet,
    pub hyper: HyperParameters,
    pub scale_vars: ScaleVars,
    pub meta_overrides: BTreeMap<String, MetaOverride>,
    pub registry: FunctionRegistry,
}

impl Default for GraphOptions {
    fn default() -> Self {
        GraphOptions {
            models: BTreeMap::new(),
            no_model: BTreeSet::new(),
            auxvars: None,
            refcats: BTreeMap::new(),
            default_refcat: "first".to_string(),
            coding: Coding::Dummy,
            trunc: BTreeMap::new(),
            shrinkage: ShrinkageSpec::None,
            monitor: MonitorSet::analysis_main(),
            hyper: HyperParameters::default(),
            scale_vars: ScaleVars::All,
            meta_overrides: BTreeMap::new(),
            registry: FunctionRegistry::default(),
        }
    }
}

/// The full model: analysis sub-models first, then covariate models in
/// sampling order.
#[derive(Clone, Debug, Serialize)]
pub struct ModelGraph {
    pub submodels: Vec<SubModel>,
    /// Every variable the model reads, in order of first use. Categorical
    /// variables carry their reference category.
    pub metas: Vec<VariableMeta>,
    pub grouping: Option<String>,
    pub monitor: MonitorSet,
    pub hyper: HyperParameters,
    /// Continuous variables whose design columns are scaled.
    pub scale_vars: BTreeSet<String>,
    pub coding: Coding,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub registry: FunctionRegistry,
}

impl ModelGraph {
    pub fn meta(&self, name: &str) -> Option<&VariableMeta> {
        self.metas.iter().find(|m| m.name == name)
    }

    pub fn analysis(&self) -> impl Iterator<Item = &SubModel> {
        self.submodels.iter().filter(|s| s.is_analysis())
    }

    pub fn covariate_models(&self) -> impl Iterator<Item = &SubModel> {
        self.submodels.iter().filter(|s| !s.is_analysis())
    }

    pub fn model_for(&self, var: &str) -> Option<&SubModel> {
        self.submodels.iter().find(|s| s.name() == var)
    }

    /// Variables with at least one missing value.
    pub fn incomplete(&self) -> BTreeSet<String> {
        self.metas
            .iter()
            .filter(|m| m.is_incomplete())
            .map(|m| m.name.clone())
            .collect()
    }

    /// Index of the reference category of a categorical variable.
    pub fn refcat_index(&self, var: &str) -> Option<usize> {
        let m = self.meta(var)?;
        let r = m.ref_cat.as_ref()?;
        m.levels.iter().position(|l| l == r)
    }

    /// `(response, model type)` in sampling order.
    pub fn model_types(&self) -> Vec<(String, String)> {
        self.submodels
            .iter()
            .map(|s| (s.name().to_string(), s.model_type.to_string()))
            .collect()
    }
}

/// Main-effect terms that may enter covariate models, in order of first
/// appearance. Functions and interactions contribute the main effects of
/// the variables they use; function terms listed in `auxvars` are kept as
/// given.
fn covariate_candidates(
    formulas: &[FormulaAst],
    aux_terms: &[Term],
    excluded: &BTreeSet<String>,
) -> Vec<Term> {
    let mut out: Vec<Term> = Vec::new();
    let push = |t: Term, out: &mut Vec<Term>| {
        let deps = crate::formula::term_dependencies(&t);
        if deps.iter().any(|d| excluded.contains(d)) || deps.is_empty() {
            return;
        }
        if !out.iter().any(|u| u.name() == t.name()) {
            out.push(t);
        }
    };
    let add_main_effects = |terms: &[Term], keep_functions: bool, out: &mut Vec<Term>| {
        for t in terms {
            let simple = t.degree() == 1
                && (t.factors()[0].is_variable() || keep_functions);
            if simple {
                push(t.clone(), out);
            } else {
                for f in t.factors() {
                    for d in f.dependencies() {
                        push(Term::variable(&d), out);
                    }
                }
            }
        }
    };
    for f in formulas {
        if let Ok(terms) = expand_terms(f) {
            add_main_effects(&terms, false, &mut out);
        }
    }
    for f in formulas {
        for rp in &f.random_parts {
            if let Ok(terms) = expand_term_expr(&rp.terms) {
                add_main_effects(&terms, false, &mut out);
            }
        }
    }
    add_main_effects(aux_terms, true, &mut out);
    out
}

fn random_structure(f: &FormulaAst) -> Result<Option<(String, Vec<Term>, bool)>> {
    let mut group: Option<String> = None;
    let mut terms: Vec<Term> = Vec::new();
    let mut intercept = false;
    for rp in &f.random_parts {
        match &group {
            Some(g) if *g != rp.group => {
                return Err(Error::Model(format!(
                    "random effects for more than one grouping variable ('{g}' and '{}') are not supported",
                    rp.group
                )))
            }
            _ => group = Some(rp.group.clone()),
        }
        intercept |= rp.intercept;
        for t in expand_term_expr(&rp.terms)? {
            if !terms.iter().any(|u| u.name() == t.name()) {
                terms.push(t);
            }
        }
    }
    Ok(group.map(|g| (g, terms, intercept)))
}

/// Positions of first use, for tie-breaking.
fn appearance_order(formulas: &[FormulaAst], candidates: &[Term]) -> Vec<String> {
    let mut order: Vec<String> = Vec::new();
    let mut add = |v: String| {
        if !order.contains(&v) {
            order.push(v);
        }
    };
    for f in formulas {
        if let Some(r) = &f.response {
            match r {
                ResponseSpec::Variable(v) => add(v.clone()),
                ResponseSpec::Survival { time, event } => {
                    add(time.clone());
                    let mut s = BTreeSet::new();
                    arith_vars(event, &mut s);
                    s.into_iter().for_each(&mut add);
                }
            }
        }
    }
    for t in candidates {
        for f in t.factors() {
            f.dependencies().into_iter().for_each(&mut add);
        }
    }
    order
}

/// Orders covariate-model responses: lowest level first, then by number of
/// missing values (descending), then by first appearance.
pub fn order_submodels(metas: &[&VariableMeta], appearance: &[String]) -> Vec<String> {
    let mut v: Vec<&VariableMeta> = metas.to_vec();
    let pos = |n: &str| appearance.iter().position(|a| a == n).unwrap_or(usize::MAX);
    v.sort_by(|a, b| {
        a.is_level2()
            .cmp(&b.is_level2())
            .then(b.n_missing.cmp(&a.n_missing))
            .then(pos(&a.name).cmp(&pos(&b.name)))
    });
    v.into_iter().map(|m| m.name.clone()).collect()
}

fn check_functions(terms: &[Term], registry: &FunctionRegistry, incomplete: &BTreeSet<String>) -> Result<()> {
    for t in terms {
        for f in t.factors() {
            let mut names = Vec::new();
            match f {
                Factor::Func { name, args } => {
                    names.push(name.clone());
                    for a in args {
                        collect_calls(&a.value, &mut names);
                    }
                }
                Factor::Arith(a) => collect_calls(a, &mut names),
                Factor::Variable(_) => {}
            }
            for n in names {
                if !registry.contains(&n) {
                    let deps = f.dependencies();
                    if let Some(d) = deps.iter().find(|d| incomplete.contains(*d)) {
                        return Err(Error::Model(format!(
                            "function '{n}' in term '{}' is not available for incomplete variable '{d}'",
                            t.name()
                        )));
                    }
                }
            }
        }
    }
    Ok(())
}

fn collect_calls(e: &crate::formula::ArithExpr, out: &mut Vec<String>) {
    use crate::formula::ArithExpr;
    match e {
        ArithExpr::Call(n, args) => {
            if n != "I" {
                out.push(n.clone());
            }
            for a in args {
                collect_calls(&a.value, out);
            }
        }
        ArithExpr::Neg(x) => collect_calls(x, out),
        ArithExpr::Binary(_, l, r) => {
            collect_calls(l, out);
            collect_calls(r, out);
        }
        _ => {}
    }
}

fn shrinkage_for(spec: &ShrinkageSpec, resp: &str) -> Shrinkage {
    match spec {
        ShrinkageSpec::None => Shrinkage::None,
        ShrinkageSpec::All(s) => *s,
        ShrinkageSpec::PerModel(m) => m.get(resp).copied().unwrap_or_default(),
    }
}

/// Builds the sequence of sub-models for the given analysis formulas.
pub fn build_model_graph(
    formulas: &[FormulaAst],
    ds: &Dataset,
    opts: &GraphOptions,
) -> Result<ModelGraph> {
    if formulas.is_empty() {
        return Err(Error::Model("at least one analysis formula is needed".into()));
    }
    let mut warnings: Vec<String> = Vec::new();

    // grouping structure
    let mut grouping: Option<String> = None;
    let mut randoms = Vec::new();
    for f in formulas {
        let r = random_structure(f)?;
        if let Some((g, _, _)) = &r {
            if grouping.as_ref().is_some_and(|h| h != g) {
                return Err(Error::Model(
                    "all analysis models must use the same grouping variable".into(),
                ));
            }
            grouping = Some(g.clone());
        }
        randoms.push(r);
    }
    if let Some(g) = &grouping {
        ds.require(g)?;
    }

    // analysis responses
    let mut responses: Vec<ResponseSpec> = Vec::new();
    let mut excluded: BTreeSet<String> = BTreeSet::new();
    for f in formulas {
        let r = f
            .response
            .clone()
            .ok_or_else(|| Error::Model("analysis formula needs a response".into()))?;
        match &r {
            ResponseSpec::Variable(v) => {
                excluded.insert(v.clone());
            }
            ResponseSpec::Survival { time, event } => {
                excluded.insert(time.clone());
                let mut s = BTreeSet::new();
                arith_vars(event, &mut s);
                excluded.extend(s);
            }
        }
        if responses.iter().any(|q| q.name() == r.name()) {
            return Err(Error::Model(format!(
                "response '{}' is used by more than one analysis model",
                r.name()
            )));
        }
        responses.push(r);
    }
    if let Some(g) = &grouping {
        excluded.insert(g.clone());
    }

    let aux_terms: Vec<Term> = match &opts.auxvars {
        Some(a) => expand_terms(a)?,
        None => Vec::new(),
    };
    for t in &aux_terms {
        for d in crate::formula::term_dependencies(t) {
            if excluded.contains(&d) {
                return Err(Error::Model(format!(
                    "auxiliary variable '{d}' is an analysis response or the grouping variable"
                )));
            }
        }
    }

    let candidates = covariate_candidates(formulas, &aux_terms, &excluded);
    let appearance = appearance_order(formulas, &candidates);

    // every variable the model reads
    let mut used: Vec<String> = appearance.clone();
    let add_used = |v: String, used: &mut Vec<String>| {
        if !used.contains(&v) {
            used.push(v);
        }
    };
    for f in formulas {
        for t in expand_terms(f)? {
            crate::formula::term_dependencies(&t)
                .into_iter()
                .for_each(|d| add_used(d, &mut used));
        }
    }
    for t in &aux_terms {
        crate::formula::term_dependencies(t)
            .into_iter()
            .for_each(|d| add_used(d, &mut used));
    }
    used.retain(|v| Some(v) != grouping.as_ref());
    for v in &used {
        ds.require(v)?;
    }
    let mut metas = infer_variable_meta(ds, grouping.as_deref(), &opts.meta_overrides, Some(&used))?;

    // reference categories
    for m in metas.iter_mut() {
        if !m.vtype.is_categorical() {
            if opts.refcats.contains_key(&m.name) {
                return Err(Error::Config(format!(
                    "reference category given for continuous variable '{}'",
                    m.name
                )));
            }
            continue;
        }
        let text = opts.refcats.get(&m.name).unwrap_or(&opts.default_refcat);
        let spec = RefCatSpec::parse(text, &m.levels);
        let codes = category_codes(ds.require(&m.name)?, m)?;
        let r = resolve_refcat(&spec, &m.levels, &codes)
            .map_err(|e| Error::Config(format!("refcat for '{}': {e}", m.name)))?;
        m.ref_cat = Some(m.levels[r].clone());
    }
    for name in opts.refcats.keys() {
        if !metas.iter().any(|m| &m.name == name) {
            return Err(Error::Config(format!(
                "reference category given for unused variable '{name}'"
            )));
        }
    }
    let meta_of = |n: &str| metas.iter().find(|m| m.name == n);

    let incomplete: BTreeSet<String> = metas
        .iter()
        .filter(|m| m.is_incomplete())
        .map(|m| m.name.clone())
        .collect();
    for f in formulas {
        check_functions(&expand_terms(f)?, &opts.registry, &incomplete)?;
    }
    check_functions(&aux_terms, &opts.registry, &incomplete)?;

    // which candidate variables need models
    let candidate_vars: Vec<String> = appearance
        .iter()
        .filter(|v| !excluded.contains(*v))
        .cloned()
        .collect();
    for v in &opts.no_model {
        let m = meta_of(v).ok_or_else(|| {
            Error::Config(format!("no_model variable '{v}' is not used in the model"))
        })?;
        if m.is_incomplete() {
            return Err(Error::Model(format!(
                "variable '{v}' has missing values and needs a model; it cannot be listed in no_model"
            )));
        }
        let msg = format!(
            "no model for '{v}': incomplete covariates are assumed to be independent of it"
        );
        warn!("{msg}");
        warnings.push(msg);
    }
    let grouped = grouping.is_some();
    let level2_incomplete = candidate_vars
        .iter()
        .any(|v| meta_of(v).is_some_and(|m| m.is_level2() && m.is_incomplete()));
    let mut modelled: Vec<&VariableMeta> = Vec::new();
    for v in &candidate_vars {
        let m = meta_of(v).unwrap();
        if opts.no_model.contains(v) {
            continue;
        }
        let needed = m.is_incomplete()
            || (level2_incomplete && !m.is_level2())
            || opts.models.contains_key(v);
        if needed {
            modelled.push(m);
        }
    }
    for (v, _) in &opts.models {
        let is_resp = responses.iter().any(|r| r.name() == v);
        if !is_resp && !modelled.iter().any(|m| &m.name == v) {
            return Err(Error::Config(format!(
                "model type given for '{v}', which is not a covariate of the model"
            )));
        }
    }
    let order = order_submodels(&modelled, &appearance);

    let aux_only: BTreeSet<String> = {
        let mut in_formula = BTreeSet::new();
        for f in formulas {
            for t in expand_terms(f)? {
                in_formula.extend(crate::formula::term_dependencies(&t));
            }
            for rp in &f.random_parts {
                for t in expand_term_expr(&rp.terms)? {
                    in_formula.extend(crate::formula::term_dependencies(&t));
                }
            }
        }
        order
            .iter()
            .filter(|v| !in_formula.contains(*v))
            .cloned()
            .collect()
    };

    let mut submodels = Vec::new();

    // analysis models
    for ((f, resp), random) in formulas.iter().zip(&responses).zip(&randoms) {
        let name = resp.name().to_string();
        let mixed = random.is_some();
        let model_type = match (resp, opts.models.get(&name)) {
            (ResponseSpec::Survival { .. }, Some(m)) if *m != ModelType::Survreg => {
                return Err(Error::Model(format!(
                    "survival response '{name}' needs model type survreg, got '{m}'"
                )))
            }
            (ResponseSpec::Survival { .. }, _) => ModelType::Survreg,
            (_, Some(m)) => *m,
            (_, None) => default_analysis_type(meta_of(&name).unwrap(), mixed)?,
        };
        if model_type.is_mixed() != mixed {
            return Err(Error::Model(format!(
                "model type '{model_type}' for '{name}' {} random effects",
                if mixed { "does not allow" } else { "requires" }
            )));
        }
        if model_type == ModelType::Survreg && !matches!(resp, ResponseSpec::Survival { .. }) {
            return Err(Error::Model(format!(
                "survreg needs a Surv(time, event) response for '{name}'"
            )));
        }
        let meta = meta_of(&name).unwrap();
        model_type.check_response(meta)?;
        if meta.is_level2() && mixed {
            return Err(Error::Model(format!(
                "response '{name}' is constant within groups; a mixed model is not identifiable"
            )));
        }
        let (group, random_terms, random_intercept) = match random {
            Some((g, t, i)) => (Some(g.clone()), t.clone(), *i),
            None => (None, Vec::new(), false),
        };
        for t in &random_terms {
            for d in crate::formula::term_dependencies(t) {
                if incomplete.contains(&d) {
                    return Err(Error::Model(format!(
                        "random-effects variable '{d}' has missing values, which is not supported"
                    )));
                }
            }
        }
        if let ResponseSpec::Survival { .. } = resp {
            if incomplete.contains(&name) {
                return Err(Error::Model(format!(
                    "survival time '{name}' has missing values, which is not supported"
                )));
            }
        }
        submodels.push(SubModel {
            response: resp.clone(),
            model_type,
            terms: expand_terms(f)?,
            intercept: f.intercept && model_type.has_intercept(),
            group,
            random_terms,
            random_intercept,
            trunc: None,
            shrinkage: shrinkage_for(&opts.shrinkage, &name),
            role: Role::Analysis,
            level: meta.level.clone(),
        });
    }

    // covariate models
    for (i, v) in order.iter().enumerate() {
        let meta = meta_of(v).unwrap();
        let lower_level = grouped && !meta.is_level2();
        let model_type = match opts.models.get(v) {
            Some(m) => *m,
            None => select_model_type(meta, lower_level)?,
        };
        model_type.check_response(meta)?;
        if model_type == ModelType::Survreg {
            return Err(Error::Model(format!(
                "survreg cannot be used as covariate model for '{v}'"
            )));
        }
        if model_type.is_mixed() && !lower_level {
            return Err(Error::Model(format!(
                "mixed model '{model_type}' for '{v}' needs a level-1 variable in a grouped model"
            )));
        }
        let later: BTreeSet<&String> = order[i + 1..].iter().collect();
        let terms: Vec<Term> = candidates
            .iter()
            .filter(|t| {
                crate::formula::term_dependencies(t).iter().all(|d| {
                    let dm = meta_of(d).unwrap();
                    let available = later.contains(d)
                        || (!order.contains(d) && !dm.is_incomplete());
                    let level_ok = !meta.is_level2() || dm.is_level2();
                    d != v && available && level_ok
                })
            })
            .cloned()
            .collect();
        submodels.push(SubModel {
            response: ResponseSpec::Variable(v.clone()),
            model_type,
            terms,
            intercept: model_type.has_intercept(),
            group: if model_type.is_mixed() { grouping.clone() } else { None },
            random_terms: Vec::new(),
            random_intercept: model_type.is_mixed(),
            trunc: None,
            shrinkage: shrinkage_for(&opts.shrinkage, v),
            role: if aux_only.contains(v) {
                Role::Auxiliary
            } else {
                Role::Covariate
            },
            level: meta.level.clone(),
        });
    }

    for (v, tr) in &opts.trunc {
        if let (Some(l), Some(u)) = (tr.lower, tr.upper) {
            if l >= u {
                return Err(Error::Config(format!(
                    "truncation bounds for '{v}' need lower < upper"
                )));
            }
        }
        let sm = submodels
            .iter_mut()
            .find(|s| s.name() == v)
            .ok_or_else(|| Error::Config(format!("truncation given for '{v}', which has no model")))?;
        if sm.model_type.family().is_categorical() {
            return Err(Error::Config(format!(
                "truncation is not available for categorical variable '{v}'"
            )));
        }
        sm.trunc = Some(*tr);
    }
    if let ShrinkageSpec::PerModel(m) = &opts.shrinkage {
        for k in m.keys() {
            if !submodels.iter().any(|s| s.name() == k) {
                return Err(Error::Config(format!("shrinkage given for '{k}', which has no model")));
            }
        }
    }

    // support checks for responses with restricted ranges
    for sm in &submodels {
        let ResponseSpec::Variable(v) = &sm.response else {
            continue;
        };
        let col = ds.require(v)?;
        let Ok(values) = col.numeric_values() else {
            continue;
        };
        use super::model_type::Family;
        let bad = |pred: &dyn Fn(f64) -> bool| values.iter().flatten().any(|&x| !pred(x));
        let msg = match sm.model_type.family() {
            Family::Lognormal | Family::Gamma if bad(&|x| x > 0.0) => Some("strictly positive"),
            Family::Beta if bad(&|x| x > 0.0 && x < 1.0) => Some("in (0, 1)"),
            Family::Poisson if bad(&|x| x >= 0.0 && x.fract() == 0.0) => {
                Some("non-negative integers")
            }
            _ => None,
        };
        if let Some(m) = msg {
            return Err(Error::Data(format!(
                "model type '{}' needs values of '{v}' that are {m}",
                sm.model_type
            )));
        }
    }

    let scale_vars: BTreeSet<String> = match &opts.scale_vars {
        ScaleVars::All | ScaleVars::Flag(true) => metas
            .iter()
            .filter(|m| m.vtype == VarType::Continuous)
            .map(|m| m.name.clone())
            .collect(),
        ScaleVars::Flag(false) => BTreeSet::new(),
        ScaleVars::Vars(v) => {
            let mut s = BTreeSet::new();
            for name in v {
                let m = meta_of(name).ok_or_else(|| {
                    Error::Config(format!("scale_vars names unknown variable '{name}'"))
                })?;
                if m.vtype != VarType::Continuous {
                    return Err(Error::Config(format!(
                        "scale_vars names categorical variable '{name}'"
                    )));
                }
                s.insert(name.clone());
            }
            s
        }
    };

    let graph = ModelGraph {
        submodels,
        metas,
        grouping,
        monitor: opts.monitor.clone(),
        hyper: opts.hyper.clone(),
        scale_vars,
        coding: opts.coding,
        warnings,
        registry: opts.registry.clone(),
    };
    check_graph(&graph)?;
    Ok(graph)
}

/// Structural invariants of a built graph.
fn check_graph(g: &ModelGraph) -> Result<()> {
    for (i, sm) in g.submodels.iter().enumerate() {
        for d in sm.predictor_variables() {
            let m = g
                .meta(&d)
                .ok_or_else(|| Error::Model(format!("variable '{d}' has no metadata")))?;
            if sm.level != LVLONE && !m.is_level2() {
                return Err(Error::Model(format!(
                    "level-1 variable '{d}' is a predictor in the model for level-2 variable '{}'",
                    sm.name()
                )));
            }
            match g.submodels.iter().position(|s| s.name() == d) {
                Some(j) if !sm.is_analysis() && j <= i => {
                    return Err(Error::Model(format!(
                        "model for '{}' uses '{d}', which is modelled earlier",
                        sm.name()
                    )))
                }
                None if m.is_incomplete() => {
                    return Err(Error::Model(format!("incomplete variable '{d}' has no model")))
                }
                _ => {}
            }
        }
    }
    Ok(())
}

impl ModelGraph {
    /// Plain-text listing of sub-models with family, link and predictor
    /// columns.
    pub fn list_models(&self, columns: &[Vec<String>]) -> String {
        let mut out = String::new();
        for (sm, cols) in self.submodels.iter().zip(columns) {
            out.push_str(&format!("{} model for \"{}\"\n", describe(sm.model_type), sm.name()));
            use super::model_type::Family;
            let fam = sm.model_type.family();
            if !matches!(fam, Family::Ordinal | Family::Multinomial) {
                let fname = match fam {
                    Family::Gaussian => "gaussian",
                    Family::Binomial => "binomial",
                    Family::Gamma => "Gamma",
                    Family::Poisson => "poisson",
                    Family::Lognormal => "lognormal",
                    Family::Beta => "beta",
                    Family::Weibull => "weibull",
                    _ => unreachable!(),
                };
                out.push_str(&format!("   family: {fname} \n"));
                out.push_str(&format!("   link: {} \n", sm.model_type.link().name()));
            }
            if let Some(tr) = &sm.trunc {
                let f = |x: Option<f64>| x.map_or("NA".to_string(), |v| format!("{v}"));
                out.push_str(&format!("   truncation: [{}, {}] \n", f(tr.lower), f(tr.upper)));
            }
            out.push_str("* Predictor variables:\n");
            out.push_str(&format!("  {} \n", cols.join(", ")));
            if sm.n_ranef() > 0 {
                let mut r = Vec::new();
                if sm.random_intercept {
                    r.push("(Intercept)".to_string());
                }
                r.extend(sm.random_terms.iter().map(Term::name));
                out.push_str(&format!(
                    "* Random effects ({}):\n  {} \n",
                    sm.group.as_deref().unwrap_or(""),
                    r.join(", ")
                ));
            }
            out.push_str("\n\n");
        }
        out
    }
}

fn describe(m: ModelType) -> &'static str {
    use super::model_type::Family;
    let mixed = m.is_mixed();
    match m.family() {
        Family::Gaussian if m.link().name() == "identity" => {
            if mixed {
                "Linear mixed"
            } else {
                "Linear"
            }
        }
        Family::Binomial if mixed => "Binomial mixed",
        Family::Binomial => "Binomial",
        Family::Gaussian | Family::Gamma | Family::Poisson if mixed => "Generalized linear mixed",
        Family::Gaussian | Family::Gamma | Family::Poisson => "Generalized linear",
        Family::Lognormal => "Log-normal",
        Family::Beta => "Beta",
        Family::Ordinal => "Cumulative logit",
        Family::Multinomial => "Multinomial logit",
        Family::Weibull => "Weibull survival",
    }
}

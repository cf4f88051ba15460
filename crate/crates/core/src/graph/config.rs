//! Model specification as read from a JSON configuration file.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::data::{Coding, Dataset, MetaOverride};
use crate::error::{Error, Result};
use crate::formula::{parse_formula_with, FormulaAst, FunctionRegistry, ParseOptions};

use super::build::{build_model_graph, GraphOptions, ModelGraph, ScaleVars, ShrinkageSpec, Trunc};
use super::hyper::HyperParameters;
use super::model_type::ModelType;
use super::monitor::monitor_from_json;

/// One formula or a list of formulas.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Formulas {
    One(String),
    Many(Vec<String>),
}

impl Formulas {
    pub fn texts(&self) -> Vec<&str> {
        match self {
            Formulas::One(s) => vec![s.as_str()],
            Formulas::Many(v) => v.iter().map(String::as_str).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub formula: Option<Formulas>,
    /// Family of the (first) analysis model, e.g. `gaussian`, `binomial`,
    /// `lognorm` or `clm`.
    pub family: Option<String>,
    pub link: Option<String>,
    /// Model type by variable name.
    pub models: BTreeMap<String, String>,
    pub no_model: Vec<String>,
    pub auxvars: Option<String>,
    pub refcats: BTreeMap<String, String>,
    pub default_refcat: String,
    pub coding: Coding,
    pub trunc: BTreeMap<String, Trunc>,
    pub shrinkage: ShrinkageSpec,
    pub monitor_params: Value,
    pub hyperpars: Value,
    pub scale_vars: ScaleVars,
    pub variables: BTreeMap<String, MetaOverride>,
    /// Reject calls to functions that are not known.
    pub strict: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            formula: None,
            family: None,
            link: None,
            models: BTreeMap::new(),
            no_model: Vec::new(),
            auxvars: None,
            refcats: BTreeMap::new(),
            default_refcat: "first".into(),
            coding: Coding::Dummy,
            trunc: BTreeMap::new(),
            shrinkage: ShrinkageSpec::None,
            monitor_params: Value::Null,
            hyperpars: Value::Null,
            scale_vars: ScaleVars::All,
            variables: BTreeMap::new(),
            strict: true,
        }
    }
}

fn default_link(family: &str) -> Option<&'static str> {
    Some(match family {
        "gaussian" => "identity",
        "binomial" => "logit",
        "Gamma" | "gamma" => "inverse",
        "poisson" => "log",
        _ => return None,
    })
}

/// Model type named by a family and an optional link.
pub fn family_model_type(family: &str, link: Option<&str>, mixed: bool) -> Result<ModelType> {
    let base: ModelType = match default_link(family) {
        Some(d) => format!("glm_{}_{}", family.to_lowercase(), link.unwrap_or(d)).parse()?,
        None => {
            if link.is_some() {
                return Err(Error::Config(format!("family '{family}' takes no link")));
            }
            family.parse()?
        }
    };
    base.with_mixed(mixed)
}

impl ModelConfig {
    pub fn from_json(text: &str) -> Result<ModelConfig> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid configuration: {e}")))
    }

    fn parse(&self, text: &str, one_sided: bool, registry: &FunctionRegistry) -> Result<FormulaAst> {
        parse_formula_with(text, &ParseOptions { registry, strict: self.strict, one_sided })
    }

    pub fn formulas(&self) -> Result<Vec<FormulaAst>> {
        let f = self
            .formula
            .as_ref()
            .ok_or_else(|| Error::Config("no formula given".into()))?;
        let registry = FunctionRegistry::default();
        let texts = f.texts();
        if texts.is_empty() {
            return Err(Error::Config("no formula given".into()));
        }
        texts.into_iter().map(|t| self.parse(t, false, &registry)).collect()
    }

    pub fn graph_options(&self, formulas: &[FormulaAst]) -> Result<GraphOptions> {
        let mut models = BTreeMap::new();
        for (v, m) in &self.models {
            models.insert(v.clone(), m.parse::<ModelType>()?);
        }
        if self.link.is_some() && self.family.is_none() {
            return Err(Error::Config("a link needs a family".into()));
        }
        if let Some(fam) = &self.family {
            let first = formulas
                .first()
                .ok_or_else(|| Error::Config("no formula given".into()))?;
            let name = first
                .response
                .as_ref()
                .map(|r| r.name().to_string())
                .ok_or_else(|| Error::Config("the analysis formula has no response".into()))?;
            let mixed = !first.random_parts.is_empty();
            let m = family_model_type(fam, self.link.as_deref(), mixed)?;
            if models.get(&name).is_some_and(|x| *x != m) {
                return Err(Error::Config(format!(
                    "family '{fam}' conflicts with the model given for '{name}'"
                )));
            }
            models.insert(name, m);
        }
        let registry = FunctionRegistry::default();
        let auxvars = match &self.auxvars {
            Some(t) => Some(self.parse(t, true, &registry)?),
            None => None,
        };
        let hyper = if self.hyperpars.is_null() {
            HyperParameters::default()
        } else {
            HyperParameters::default().merged(&self.hyperpars)?
        };
        Ok(GraphOptions {
            models,
            no_model: self.no_model.iter().cloned().collect::<BTreeSet<_>>(),
            auxvars,
            refcats: self.refcats.clone(),
            default_refcat: self.default_refcat.clone(),
            coding: self.coding,
            trunc: self.trunc.clone(),
            shrinkage: self.shrinkage.clone(),
            monitor: monitor_from_json(&self.monitor_params)?,
            hyper,
            scale_vars: self.scale_vars.clone(),
            meta_overrides: self.variables.clone(),
            registry,
        })
    }

    /// Parses the formulas and builds the model graph for `ds`.
    pub fn build(&self, ds: &Dataset) -> Result<ModelGraph> {
        let formulas = self.formulas()?;
        let opts = self.graph_options(&formulas)?;
        build_model_graph(&formulas, ds, &opts)
    }
}

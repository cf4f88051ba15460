use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::data::{VarType, VariableMeta};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    Gaussian,
    Binomial,
    Gamma,
    Poisson,
    Lognormal,
    Beta,
    Ordinal,
    Multinomial,
    Weibull,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Link {
    Identity,
    Logit,
    Probit,
    Log,
    Cloglog,
    Inverse,
}

impl Link {
    pub fn name(self) -> &'static str {
        match self {
            Link::Identity => "identity",
            Link::Logit => "logit",
            Link::Probit => "probit",
            Link::Log => "log",
            Link::Cloglog => "cloglog",
            Link::Inverse => "inverse",
        }
    }

    fn parse(s: &str) -> Option<Link> {
        Some(match s {
            "identity" => Link::Identity,
            "logit" => Link::Logit,
            "probit" => Link::Probit,
            "log" => Link::Log,
            "cloglog" => Link::Cloglog,
            "inverse" => Link::Inverse,
            _ => return None,
        })
    }

    /// Mean as a function of the linear predictor.
    pub fn inverse(self, eta: f64) -> f64 {
        match self {
            Link::Identity => eta,
            Link::Logit => 1.0 / (1.0 + (-eta).exp()),
            Link::Probit => statrs::function::erf::erfc(-eta / std::f64::consts::SQRT_2) / 2.0,
            Link::Log => eta.exp(),
            Link::Cloglog => -(-eta.exp()).exp_m1(),
            Link::Inverse => 1.0 / eta,
        }
    }
}

impl Family {
    fn glm_name(self) -> Option<&'static str> {
        Some(match self {
            Family::Gaussian => "gaussian",
            Family::Binomial => "binomial",
            Family::Gamma => "gamma",
            Family::Poisson => "poisson",
            _ => return None,
        })
    }

    fn links(self) -> &'static [Link] {
        match self {
            Family::Gaussian => &[Link::Identity, Link::Log, Link::Inverse],
            Family::Binomial => &[Link::Logit, Link::Probit, Link::Log, Link::Cloglog],
            Family::Gamma => &[Link::Inverse, Link::Identity, Link::Log],
            Family::Poisson => &[Link::Log, Link::Identity],
            _ => &[],
        }
    }

    pub fn is_categorical(self) -> bool {
        matches!(
            self,
            Family::Binomial | Family::Ordinal | Family::Multinomial
        )
    }
}

/// Distribution and link of one sub-model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelType {
    Lm,
    Lmm,
    Glm(Family, Link),
    Glmm(Family, Link),
    Lognorm,
    Betareg,
    Clm,
    Mlogit,
    Survreg,
}

impl ModelType {
    pub fn family(self) -> Family {
        match self {
            ModelType::Lm | ModelType::Lmm => Family::Gaussian,
            ModelType::Glm(f, _) | ModelType::Glmm(f, _) => f,
            ModelType::Lognorm => Family::Lognormal,
            ModelType::Betareg => Family::Beta,
            ModelType::Clm => Family::Ordinal,
            ModelType::Mlogit => Family::Multinomial,
            ModelType::Survreg => Family::Weibull,
        }
    }

    pub fn link(self) -> Link {
        match self {
            ModelType::Glm(_, l) | ModelType::Glmm(_, l) => l,
            ModelType::Betareg | ModelType::Clm | ModelType::Mlogit => Link::Logit,
            ModelType::Survreg => Link::Log,
            _ => Link::Identity,
        }
    }

    pub fn is_mixed(self) -> bool {
        matches!(self, ModelType::Lmm | ModelType::Glmm(..))
    }

    /// Same distribution with (or without) random effects.
    pub fn with_mixed(self, mixed: bool) -> Result<ModelType> {
        Ok(match (self, mixed) {
            (ModelType::Lm, true) => ModelType::Lmm,
            (ModelType::Lmm, false) => ModelType::Lm,
            (ModelType::Glm(f, l), true) => ModelType::Glmm(f, l),
            (ModelType::Glmm(f, l), false) => ModelType::Glm(f, l),
            (m, false) if !m.is_mixed() => m,
            (m, true) if m.is_mixed() => m,
            (m, _) => {
                return Err(Error::Model(format!(
                    "model type '{m}' has no mixed-model version"
                )))
            }
        })
    }

    /// Gaussian identity models have conjugate coefficient and precision
    /// updates.
    pub fn is_gaussian_identity(self) -> bool {
        self.family() == Family::Gaussian && self.link() == Link::Identity
    }

    /// Whether the family carries a residual precision `tau`.
    pub fn has_precision(self) -> bool {
        matches!(
            self.family(),
            Family::Gaussian | Family::Lognormal | Family::Gamma | Family::Beta
        )
    }

    /// Whether the linear predictor contains an intercept column.
    pub fn has_intercept(self) -> bool {
        self != ModelType::Clm
    }

    /// Checks the model against the type of its response variable.
    pub fn check_response(self, meta: &VariableMeta) -> Result<()> {
        let ok = match self.family() {
            Family::Gaussian | Family::Lognormal | Family::Gamma | Family::Beta | Family::Poisson => {
                meta.vtype == VarType::Continuous
            }
            Family::Binomial => meta.vtype == VarType::Binary,
            Family::Ordinal => meta.vtype.is_categorical(),
            Family::Multinomial => meta.vtype.is_categorical(),
            Family::Weibull => meta.vtype == VarType::Continuous,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Model(format!(
                "model type '{self}' does not fit variable '{}' of type {}",
                meta.name, meta.vtype
            )))
        }
    }
}

impl fmt::Display for ModelType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelType::Lm => f.write_str("lm"),
            ModelType::Lmm => f.write_str("lmm"),
            ModelType::Glm(fam, l) => write!(f, "glm_{}_{}", fam.glm_name().unwrap(), l.name()),
            ModelType::Glmm(fam, l) => write!(f, "glmm_{}_{}", fam.glm_name().unwrap(), l.name()),
            ModelType::Lognorm => f.write_str("lognorm"),
            ModelType::Betareg => f.write_str("betareg"),
            ModelType::Clm => f.write_str("clm"),
            ModelType::Mlogit => f.write_str("mlogit"),
            ModelType::Survreg => f.write_str("survreg"),
        }
    }
}

impl FromStr for ModelType {
    type Err = Error;

    fn from_str(s: &str) -> Result<ModelType> {
        let simple = match s {
            "lm" => Some(ModelType::Lm),
            "lmm" => Some(ModelType::Lmm),
            "lognorm" => Some(ModelType::Lognorm),
            "betareg" | "beta" => Some(ModelType::Betareg),
            "clm" => Some(ModelType::Clm),
            "mlogit" => Some(ModelType::Mlogit),
            "survreg" => Some(ModelType::Survreg),
            _ => None,
        };
        if let Some(m) = simple {
            return Ok(m);
        }
        let bad = || Error::Config(format!("unknown model type '{s}'"));
        let (mixed, rest) = if let Some(r) = s.strip_prefix("glmm_") {
            (true, r)
        } else if let Some(r) = s.strip_prefix("glm_") {
            (false, r)
        } else {
            return Err(bad());
        };
        let (fam, link) = rest.split_once('_').ok_or_else(bad)?;
        let family = match fam {
            "gaussian" => Family::Gaussian,
            "binomial" => Family::Binomial,
            "gamma" => Family::Gamma,
            "poisson" => Family::Poisson,
            _ => return Err(bad()),
        };
        let link = Link::parse(link).ok_or_else(bad)?;
        if !family.links().contains(&link) {
            return Err(bad());
        }
        Ok(if mixed {
            ModelType::Glmm(family, link)
        } else {
            ModelType::Glm(family, link)
        })
    }
}

impl Serialize for ModelType {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ModelType {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Default covariate model for a variable. `lower_level` marks level-1
/// variables in a two-level model, which get mixed models.
pub fn select_model_type(meta: &VariableMeta, lower_level: bool) -> Result<ModelType> {
    match (meta.vtype, lower_level) {
        (VarType::Continuous, false) => Ok(ModelType::Lm),
        (VarType::Binary, false) => Ok(ModelType::Glm(Family::Binomial, Link::Logit)),
        (VarType::Unordered(_), false) => Ok(ModelType::Mlogit),
        (VarType::Ordered(_), false) => Ok(ModelType::Clm),
        (VarType::Continuous, true) => Ok(ModelType::Lmm),
        (VarType::Binary, true) => Ok(ModelType::Glmm(Family::Binomial, Link::Logit)),
        (t, true) => Err(Error::Model(format!(
            "no mixed model available for level-1 variable '{}' of type {t}",
            meta.name
        ))),
    }
}

/// Default analysis model for a response. Gaussian responses are reported
/// under their generalized name, as for explicitly chosen families.
pub fn default_analysis_type(meta: &VariableMeta, mixed: bool) -> Result<ModelType> {
    let base = match meta.vtype {
        VarType::Continuous => ModelType::Glm(Family::Gaussian, Link::Identity),
        _ => select_model_type(meta, false)?,
    };
    base.with_mixed(mixed)
}

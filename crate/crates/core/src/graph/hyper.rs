use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::formula::{eval_arith, parse_one_sided, FunctionRegistry, Scalar, TermExpr};

use super::model_type::Family;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegPrior {
    pub mu_reg: f64,
    pub tau_reg: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegPrecisionPrior {
    pub mu_reg: f64,
    pub tau_reg: f64,
    pub shape_tau: f64,
    pub rate_tau: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrdinalPrior {
    pub mu_reg: f64,
    pub tau_reg: f64,
    pub mu_delta: f64,
    pub tau_delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RanefPrior {
    pub shape_diag_rinvd: f64,
    pub rate_diag_rinvd: f64,
    /// Wishart degrees of freedom as an expression in `nranef`.
    pub kinvd_expr: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeibullPrior {
    /// Rate of the exponential prior on the shape.
    pub rate_shape: f64,
}

/// Prior hyper-parameters, grouped by family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperParameters {
    pub norm: RegPrecisionPrior,
    pub gamma: RegPrecisionPrior,
    pub beta: RegPrecisionPrior,
    pub binom: RegPrior,
    pub poisson: RegPrior,
    pub multinomial: RegPrior,
    pub ordinal: OrdinalPrior,
    pub ranef: RanefPrior,
    pub surv: RegPrior,
    pub weibull: WeibullPrior,
}

impl Default for HyperParameters {
    fn default() -> Self {
        let reg_prec = RegPrecisionPrior {
            mu_reg: 0.0,
            tau_reg: 1e-4,
            shape_tau: 0.01,
            rate_tau: 0.01,
        };
        let reg = RegPrior {
            mu_reg: 0.0,
            tau_reg: 1e-4,
        };
        HyperParameters {
            norm: reg_prec.clone(),
            gamma: reg_prec.clone(),
            beta: reg_prec,
            binom: reg.clone(),
            poisson: reg.clone(),
            multinomial: reg,
            ordinal: OrdinalPrior {
                mu_reg: 0.0,
                tau_reg: 1e-4,
                mu_delta: 0.0,
                tau_delta: 1e-4,
            },
            ranef: RanefPrior {
                shape_diag_rinvd: 0.01,
                rate_diag_rinvd: 0.001,
                kinvd_expr: "nranef + 1.0".to_string(),
            },
            surv: RegPrior {
                mu_reg: 0.0,
                tau_reg: 0.001,
            },
            weibull: WeibullPrior { rate_shape: 0.01 },
        }
    }
}

pub fn default_hyperparameters() -> HyperParameters {
    HyperParameters::default()
}

/// Coefficient prior and optional residual-precision prior of a family.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FamilyPrior {
    pub mu_reg: f64,
    pub tau_reg: f64,
    pub shape_tau: f64,
    pub rate_tau: f64,
}

impl HyperParameters {
    pub fn for_family(&self, family: Family) -> FamilyPrior {
        let rp = |p: &RegPrecisionPrior| FamilyPrior {
            mu_reg: p.mu_reg,
            tau_reg: p.tau_reg,
            shape_tau: p.shape_tau,
            rate_tau: p.rate_tau,
        };
        let r = |p: &RegPrior| FamilyPrior {
            mu_reg: p.mu_reg,
            tau_reg: p.tau_reg,
            shape_tau: f64::NAN,
            rate_tau: f64::NAN,
        };
        match family {
            Family::Gaussian | Family::Lognormal => rp(&self.norm),
            Family::Gamma => rp(&self.gamma),
            Family::Beta => rp(&self.beta),
            Family::Binomial => r(&self.binom),
            Family::Poisson => r(&self.poisson),
            Family::Multinomial => r(&self.multinomial),
            Family::Ordinal => FamilyPrior {
                mu_reg: self.ordinal.mu_reg,
                tau_reg: self.ordinal.tau_reg,
                shape_tau: f64::NAN,
                rate_tau: f64::NAN,
            },
            Family::Weibull => r(&self.surv),
        }
    }

    /// Wishart degrees of freedom for `nranef` random effects.
    pub fn kinvd(&self, nranef: usize) -> Result<f64> {
        let ast = parse_one_sided(&format!("~ I({})", self.ranef.kinvd_expr))
            .map_err(|e| Error::Config(format!("invalid kinvd_expr: {e}")))?;
        let TermExpr::Sum(items) = &ast.fixed else {
            unreachable!("top-level fixed part is a sum")
        };
        let Some(TermExpr::Arith(expr)) = items.first().map(|i| &i.expr) else {
            return Err(Error::Config("invalid kinvd_expr".into()));
        };
        let mut lookup = |name: &str| match name {
            "nranef" => Ok(Scalar::Num(nranef as f64)),
            other => Err(Error::Config(format!(
                "unknown symbol '{other}' in kinvd_expr"
            ))),
        };
        let k = eval_arith(expr, FunctionRegistry::builtin(), &mut lookup)?;
        if !(k > nranef as f64 - 1.0) {
            return Err(Error::Config(format!(
                "kinvd_expr gives {k}, which is not a valid Wishart degrees of freedom for {nranef} random effects"
            )));
        }
        Ok(k)
    }

    /// Applies a partial override such as `{"norm": {"tau_reg": 0.01}}`.
    pub fn merged(&self, overrides: &Value) -> Result<HyperParameters> {
        let mut base = serde_json::to_value(self)?;
        let Value::Object(groups) = overrides else {
            return Err(Error::Config("hyperparameter overrides must be an object".into()));
        };
        for (group, fields) in groups {
            let target = base
                .get_mut(group)
                .ok_or_else(|| Error::Config(format!("unknown hyperparameter group '{group}'")))?;
            let Value::Object(fields) = fields else {
                return Err(Error::Config(format!(
                    "hyperparameter group '{group}' must be an object"
                )));
            };
            for (field, v) in fields {
                let slot = target.get_mut(field).ok_or_else(|| {
                    Error::Config(format!("unknown hyperparameter '{group}.{field}'"))
                })?;
                *slot = v.clone();
            }
        }
        let out: HyperParameters = serde_json::from_value(base)
            .map_err(|e| Error::Config(format!("invalid hyperparameter value: {e}")))?;
        out.validate()?;
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("norm.tau_reg", self.norm.tau_reg),
            ("norm.shape_tau", self.norm.shape_tau),
            ("norm.rate_tau", self.norm.rate_tau),
            ("gamma.tau_reg", self.gamma.tau_reg),
            ("gamma.shape_tau", self.gamma.shape_tau),
            ("gamma.rate_tau", self.gamma.rate_tau),
            ("beta.tau_reg", self.beta.tau_reg),
            ("beta.shape_tau", self.beta.shape_tau),
            ("beta.rate_tau", self.beta.rate_tau),
            ("binom.tau_reg", self.binom.tau_reg),
            ("poisson.tau_reg", self.poisson.tau_reg),
            ("multinomial.tau_reg", self.multinomial.tau_reg),
            ("ordinal.tau_reg", self.ordinal.tau_reg),
            ("ordinal.tau_delta", self.ordinal.tau_delta),
            ("ranef.shape_diag_rinvd", self.ranef.shape_diag_rinvd),
            ("ranef.rate_diag_rinvd", self.ranef.rate_diag_rinvd),
            ("surv.tau_reg", self.surv.tau_reg),
            ("weibull.rate_shape", self.weibull.rate_shape),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!(
                    "hyperparameter {name} must be positive, got {v}"
                )));
            }
        }
        let finite = [
            ("norm.mu_reg", self.norm.mu_reg),
            ("gamma.mu_reg", self.gamma.mu_reg),
            ("beta.mu_reg", self.beta.mu_reg),
            ("binom.mu_reg", self.binom.mu_reg),
            ("poisson.mu_reg", self.poisson.mu_reg),
            ("multinomial.mu_reg", self.multinomial.mu_reg),
            ("ordinal.mu_reg", self.ordinal.mu_reg),
            ("ordinal.mu_delta", self.ordinal.mu_delta),
            ("surv.mu_reg", self.surv.mu_reg),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(Error::Config(format!("hyperparameter {name} must be finite")));
            }
        }
        self.kinvd(1)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn defaults() {
        let h = default_hyperparameters();
        assert_eq!(
            (h.norm.mu_reg, h.norm.tau_reg, h.norm.shape_tau, h.norm.rate_tau),
            (0.0, 1e-4, 0.01, 0.01)
        );
        assert_eq!((h.surv.mu_reg, h.surv.tau_reg), (0.0, 0.001));
        assert_eq!(h.kinvd(3).unwrap(), 4.0);
        h.validate().unwrap();
    }

    #[test]
    fn merge_fieldwise() {
        let h = default_hyperparameters()
            .merged(&json!({"norm": {"tau_reg": 0.5}, "ranef": {"kinvd_expr": "nranef + 3"}}))
            .unwrap();
        assert_eq!(h.norm.tau_reg, 0.5);
        assert_eq!(h.norm.shape_tau, 0.01);
        assert_eq!(h.kinvd(2).unwrap(), 5.0);
    }

    #[test]
    fn merge_rejects_bad_values() {
        let d = default_hyperparameters();
        assert!(d.merged(&json!({"norm": {"tau_reg": 0.0}})).is_err());
        assert!(d.merged(&json!({"norm": {"rate_tau": -1.0}})).is_err());
        assert!(d.merged(&json!({"nrom": {"tau_reg": 1.0}})).is_err());
        assert!(d.merged(&json!({"norm": {"tau": 1.0}})).is_err());
        assert!(d.merged(&json!({"ranef": {"kinvd_expr": "nranef - 5"}})).is_err());
    }
}

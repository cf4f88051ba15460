use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// Elementary groups of nodes that can be stored or selected.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeGroup {
    Betas,
    TauMain,
    /// Precision of beta analysis models, implied by `analysis_main`.
    TauMainBeta,
    SigmaMain,
    GammaMain,
    DeltaMain,
    ShapeMain,
    DMain,
    RanefMain,
    InvDMain,
    RinvDMain,
    Alphas,
    TauOther,
    SigmaOther,
    GammaOther,
    DeltaOther,
    Imps,
    RanefOther,
    DOther,
    InvDOther,
    RinvDOther,
}

const KEYS: [(&str, &[NodeGroup]); 24] = {
    use NodeGroup::*;
    [
        (
            "analysis_main",
            &[Betas, SigmaMain, TauMainBeta, GammaMain, ShapeMain, DMain],
        ),
        ("betas", &[Betas]),
        ("tau_main", &[TauMain, TauMainBeta]),
        ("sigma_main", &[SigmaMain]),
        ("gamma_main", &[GammaMain]),
        ("delta_main", &[DeltaMain]),
        ("shape_main", &[ShapeMain]),
        ("D_main", &[DMain]),
        ("analysis_random", &[RanefMain, DMain, InvDMain, RinvDMain]),
        ("ranef_main", &[RanefMain]),
        ("invD_main", &[InvDMain]),
        ("RinvD_main", &[RinvDMain]),
        (
            "other_models",
            &[Alphas, TauOther, SigmaOther, GammaOther, DeltaOther],
        ),
        ("alphas", &[Alphas]),
        ("tau_other", &[TauOther]),
        ("sigma_other", &[SigmaOther]),
        ("gamma_other", &[GammaOther]),
        ("delta_other", &[DeltaOther]),
        ("imps", &[Imps]),
        ("ranef_other", &[RanefOther]),
        ("D_other", &[DOther]),
        ("invD_other", &[InvDOther]),
        ("RinvD_other", &[RinvDOther]),
        ("other", &[]),
    ]
};

const GROUP_KEYS: [&str; 3] = ["analysis_main", "analysis_random", "other_models"];

/// Resolved selection: node groups plus explicitly named nodes.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonitorSet {
    pub groups: BTreeSet<NodeGroup>,
    pub other: Vec<String>,
}

impl MonitorSet {
    pub fn contains(&self, g: NodeGroup) -> bool {
        self.groups.contains(&g)
    }

    /// The default: main parameters of the analysis model(s).
    pub fn analysis_main() -> Self {
        resolve_monitor(&BTreeMap::new()).expect("default monitor resolves")
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty() && self.other.is_empty()
    }
}

fn lookup(key: &str) -> Result<&'static [NodeGroup]> {
    KEYS.iter()
        .find(|(k, _)| *k == key)
        .map(|(_, g)| *g)
        .ok_or_else(|| Error::Config(format!("unknown monitor keyword '{key}'")))
}

/// Resolves a keyword map. Group keywords are applied first and keywords for
/// single groups override them; `analysis_main` is on unless set otherwise.
pub fn resolve_monitor(spec: &BTreeMap<String, Value>) -> Result<MonitorSet> {
    let mut flags: BTreeMap<&str, bool> = BTreeMap::new();
    let mut other = Vec::new();
    for (key, v) in spec {
        if key == "other" {
            match v {
                Value::String(s) => other.push(s.clone()),
                Value::Array(items) => {
                    for item in items {
                        let s = item.as_str().ok_or_else(|| {
                            Error::Config("monitor 'other' must list node names".into())
                        })?;
                        other.push(s.to_string());
                    }
                }
                _ => return Err(Error::Config("monitor 'other' must list node names".into())),
            }
            continue;
        }
        lookup(key)?;
        let on = v
            .as_bool()
            .ok_or_else(|| Error::Config(format!("monitor keyword '{key}' needs true or false")))?;
        let k = KEYS.iter().find(|(k, _)| k == key).unwrap().0;
        flags.insert(k, on);
    }
    flags.entry("analysis_main").or_insert(true);

    let mut groups = BTreeSet::new();
    for key in GROUP_KEYS {
        if flags.get(key) == Some(&true) {
            groups.extend(lookup(key)?.iter().copied());
        }
    }
    for (key, on) in &flags {
        if GROUP_KEYS.contains(key) {
            continue;
        }
        for g in lookup(key)? {
            if *on {
                groups.insert(*g);
            } else {
                groups.remove(g);
            }
        }
    }
    Ok(MonitorSet { groups, other })
}

/// Parses the JSON object form, e.g. `{"analysis_random": true}`.
pub fn monitor_from_json(v: &Value) -> Result<MonitorSet> {
    match v {
        Value::Null => Ok(MonitorSet::analysis_main()),
        Value::Object(m) => resolve_monitor(&m.iter().map(|(k, v)| (k.clone(), v.clone())).collect()),
        _ => Err(Error::Config("monitor_params must be an object".into())),
    }
}

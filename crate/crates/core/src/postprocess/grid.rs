//! Prediction grids.

use std::collections::BTreeMap;

use crate::data::{Column, Dataset};
use crate::error::{Error, Result};
use crate::formula::{expand_terms, parse_one_sided, term_dependencies};
use crate::graph::ModelGraph;

pub const DEFAULT_GRID_LENGTH: usize = 100;

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// One column of the grid before the cross product.
enum Values {
    Num(Vec<f64>),
    Cat(Vec<String>),
}

impl Values {
    fn len(&self) -> usize {
        match self {
            Values::Num(v) => v.len(),
            Values::Cat(v) => v.len(),
        }
    }
}

/// Grid for predictions: the variables in `vars` vary over an evenly
/// spaced grid of their observed range (all categories for categorical
/// variables); other model variables are held at their median or reference
/// category. `overrides` fixes the values of any variable. Columns follow
/// the model's variable order, the first varying fastest.
pub fn pred_df(
    graph: &ModelGraph,
    data: &Dataset,
    vars: &str,
    grid_length: usize,
    overrides: &BTreeMap<String, Vec<String>>,
) -> Result<Dataset> {
    if grid_length == 0 {
        return Err(Error::Config("grid_length must be at least 1".into()));
    }
    let ast = parse_one_sided(vars)?;
    let mut varying: Vec<String> = Vec::new();
    for t in expand_terms(&ast)? {
        for v in term_dependencies(&t) {
            if !varying.contains(&v) {
                varying.push(v);
            }
        }
    }
    for v in varying.iter().chain(overrides.keys()) {
        if graph.meta(v).is_none() {
            return Err(Error::Config(format!("'{v}' is not a variable of the model")));
        }
    }

    let mut columns: Vec<(String, Values)> = Vec::new();
    for meta in &graph.metas {
        let name = &meta.name;
        let col = data.require(name)?;
        let cat = meta.vtype.is_categorical();
        let values = if let Some(o) = overrides.get(name) {
            if o.is_empty() {
                return Err(Error::Config(format!("override for '{name}' has no values")));
            }
            if cat {
                if let Some(bad) = o.iter().find(|l| !meta.levels.contains(l)) {
                    return Err(Error::Config(format!("'{bad}' is not a category of '{name}'")));
                }
                Values::Cat(o.clone())
            } else {
                Values::Num(
                    o.iter()
                        .map(|s| {
                            s.trim().parse::<f64>().map_err(|_| {
                                Error::Config(format!("override value '{s}' for '{name}' is not a number"))
                            })
                        })
                        .collect::<Result<_>>()?,
                )
            }
        } else if cat {
            if varying.contains(name) {
                Values::Cat(meta.levels.clone())
            } else {
                let r = graph.refcat_index(name).unwrap_or(0);
                Values::Cat(vec![meta.levels[r].clone()])
            }
        } else {
            let mut obs: Vec<f64> = col.numeric_values()?.iter().flatten().copied().collect();
            if obs.is_empty() {
                return Err(Error::Data(format!("'{name}' has no observed values")));
            }
            obs.sort_by(f64::total_cmp);
            if varying.contains(name) {
                let (lo, hi) = (obs[0], obs[obs.len() - 1]);
                if lo == hi || grid_length == 1 {
                    Values::Num(vec![lo])
                } else {
                    let step = (hi - lo) / (grid_length - 1) as f64;
                    Values::Num((0..grid_length).map(|i| if i + 1 == grid_length { hi } else { lo + step * i as f64 }).collect())
                }
            } else {
                Values::Num(vec![median(&obs)])
            }
        };
        columns.push((name.clone(), values));
    }

    let total: usize = columns.iter().map(|(_, v)| v.len()).product();
    let mut out = Vec::with_capacity(columns.len());
    let mut stride = 1;
    for (name, values) in &columns {
        let len = values.len();
        let pick = |r: usize| (r / stride) % len;
        out.push(match values {
            Values::Num(v) => Column::numeric(name, (0..total).map(|r| Some(v[pick(r)])).collect()),
            Values::Cat(v) => {
                let labels: Vec<Option<&str>> = (0..total).map(|r| Some(v[pick(r)].as_str())).collect();
                Column::categorical(name, &labels)
            }
        });
        stride *= len;
    }
    Dataset::new(out)
}

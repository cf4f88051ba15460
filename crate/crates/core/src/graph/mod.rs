//! Sub-model sequence, priors, monitors and design plans.

mod build;
mod config;
mod design;
mod hyper;
mod model_type;
mod monitor;

pub use build::{
    build_model_graph, order_submodels, GraphOptions, ModelGraph, Role, ScaleVars, Shrinkage,
    ShrinkageSpec, SubModel, Trunc,
};
pub use config::{family_model_type, Formulas, ModelConfig};
pub use design::{
    design_plan, model_units, random_columns, term_columns, ColumnPart, DesignColumn, DesignPlan,
    VarTable,
};
pub use hyper::{
    default_hyperparameters, FamilyPrior, HyperParameters, OrdinalPrior, RanefPrior, RegPrecisionPrior,
    RegPrior, WeibullPrior,
};
pub use model_type::{default_analysis_type, select_model_type, Family, Link, ModelType};
pub use monitor::{monitor_from_json, resolve_monitor, MonitorSet, NodeGroup};

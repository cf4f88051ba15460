//! Predictions, prediction grids, completed datasets and plot data.

mod grid;
mod impute;
mod plot;
mod predict;

pub use grid::{pred_df, DEFAULT_GRID_LENGTH};
pub use impute::{get_mi_dat, ImputedStack, MiOptions, Pick, DEFAULT_MINSPACE};
pub use plot::{emit_plot_data, imp_distr_data, kernel_density, silverman_bandwidth, PlotData, PlotKind, DENSITY_POINTS};
pub use predict::{predict, PredictOptions, PredictType, PredictionResult};

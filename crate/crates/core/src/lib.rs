pub mod error;
pub mod formula;
pub mod data;
pub mod graph;
pub mod sampler;
pub mod diagnostics;
pub mod postprocess;

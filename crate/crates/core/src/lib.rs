//! Compiler toolkit for GNN accelerators: declarative model specs, a
//! bit-accurate fixed-point simulator, HLS-style C++ code generation and
//! latency/BRAM models driving design-space exploration.

pub mod cases;
pub mod codegen;
pub mod dse;
pub mod error;
pub mod fixed_point;
pub mod graph;
pub mod kernels;
pub mod model_ir;
pub mod perf;
pub mod weights;

pub use error::{Error, Result};

//! Performance modelling: the design space, an analytic surrogate, a
//! random-forest regressor and the database it is trained on.

pub mod database;
pub mod forest;
pub mod models;
pub mod space;
pub mod surrogate;

pub use database::{build_surrogate_database, DesignDatabase, DesignRecord};
pub use forest::RandomForest;
pub use models::{
    cross_validate, features, fit_random_forest, mape, CvReport, PerfModels, Regressor, Target, TargetScale,
};
pub use space::{sample_design_space, DesignConfig, DesignContext, DesignSpace};
pub use surrogate::{estimate_project, surrogate_estimate, PerfEstimate};

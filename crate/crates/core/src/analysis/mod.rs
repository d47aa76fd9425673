//! Empirical measures, distances between wealth laws, covariance estimates,
//! and the experiments comparing the three models.

pub mod covariance;
pub mod distance;
pub mod experiments;
pub mod measure;
pub mod report;
pub mod stats;

pub use covariance::{exchangeable_covariance, indicator_above, pair_covariance, CovarianceEstimate};
pub use distance::{ks_distance, wasserstein1, Conditioning, WealthMarginal};
pub use experiments::{
    chaos_experiment, homogenization_experiment, occupation_experiment, ChaosConfig, HomogenizationConfig,
    OccupationConfig, SpotCheck,
};
pub use measure::{dead_wealth, EmpiricalMeasure, Level};
pub use report::{Cell, CellVerdict, ExperimentReport, Verdict};

//! Estimation of the number of significant principal components in the
//! extremal dependence structure of heavy-tailed data.
//!
//! The pipeline keeps the `k` observations with the largest Euclidean norm,
//! projects them onto the unit sphere and forms their empirical covariance
//! ([`angular`]). Its eigenvalues ([`spectrum`]) feed AIC/BIC-type criteria
//! ([`criteria`]) whose argmin estimates the spike location `p*`. The
//! criterion family depends on whether `k > d` or `d > k`.
//!
//! [`theory`] holds the random-matrix limits that explain when the criteria
//! are consistent, and [`simulate`] the generative models and replication
//! harness used to check them.

pub mod angular;
pub mod criteria;
pub mod data;
pub mod error;
pub mod simulate;
pub mod spectrum;
pub mod theory;

pub use angular::{
    empirical_angular_covariance, empirical_mean_direction, frechet_margin_transform,
    select_extremes, AngularCovariance, AngularSample, MarginTransform,
};
pub use criteria::{estimate_p, select_regime, CriterionCurve, CriterionKind, Regime};
pub use data::{read_csv, read_csv_path, CsvOptions, DataMatrix};
pub use error::{Error, Result};
pub use simulate::{
    angular_spectrum, run_experiment, run_experiment_with_threads, ExperimentResult, KSpec,
    ModelKind, ModelSpec,
};
pub use spectrum::{eigenvalues_descending, scree, ScreeTable, Spectrum};
pub use theory::{AspectRatio, GapCheck, MarchenkoPastur, SpikeForecast};

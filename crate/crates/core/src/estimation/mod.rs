//! Parameter estimation: decay-rate calibration, driven-ODE fits to score series,
//! profile likelihood, comparison models, and benchmark-based capability ratios.

pub mod alt;
pub mod benchmarks;
pub mod calibration;
pub mod data;
pub mod fit;
pub mod optimizer;
pub mod pisa;
pub mod recovery;

pub use alt::{fit_alt_model, AltData, AltOptions};
pub use benchmarks::{k_ratio, kbar, kbar_table, BenchmarkScore, Domain, KBar};
pub use calibration::{beta_eff, predict_decline_curve, DeskillObservation};
pub use data::{AdoptionObservation, CountrySeries, Driver, PanelDataset, ScoreObservation};
pub use fit::{compare_models, ComparisonRow, Criterion, FitResult, ModelKind};
pub use pisa::{fit_ode_panel, fit_ode_single, profile_likelihood_alpha, OdeFitOptions, ProfileLikelihood, ProfileTarget};
pub use recovery::{recovery_comparison, RecoveryComparison};

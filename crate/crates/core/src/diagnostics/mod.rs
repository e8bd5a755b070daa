//! Trial ensembles and the measurements made on them: prediction histograms
//! and total variation, mixing times, chaotic divergence, and parameter
//! averaging.

mod chaos;
mod histogram;
mod mixing;
mod record;
mod swa;
mod trial;

pub use chaos::{chaos_divergence, chaos_gradient_flow, ChaosResult};
pub use histogram::{
    collect_histograms, mean_tv_distance, multinomial_tv_floor, tv_baseline, PredictionHistogram,
};
pub use mixing::{measure_mixing_time, recovery_steps, MixingCriterion, MixingResult};
pub use record::{RecordRow, TrajectoryRecord};
pub use swa::{pairwise_distance_matrix, swa_average, SwaAverage};
pub use trial::{run_ensemble, run_trial, EnsembleSpec, InitSpec, Metrics, RecordPlan, Stepper, Trainer};

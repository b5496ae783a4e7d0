//! Evaluation of generated samples and closed-form theory checks.

mod convolution;
mod energy;
mod fourier;
mod recovery;
mod speciation;

pub use convolution::{convolution_metric, default_filter_sizes, max_gap, ConvolutionCurve};
pub use energy::{energy_distance, ENERGY_SUBSAMPLE};
pub use fourier::{fourier_decay_rates, FourierRates, ModeRate};
pub use recovery::{mixture_recovery, MixtureRecoveryReport, UNASSIGNED_SIGMAS};
pub use speciation::{speciation_times, SpeciationTimes};

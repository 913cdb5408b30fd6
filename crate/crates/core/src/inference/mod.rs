//! Scene parsing by sequential Monte Carlo with a coarse-to-fine proposal,
//! and posterior summaries.

mod proposal;
mod schedule;
mod smc;
mod summary;

pub use proposal::{Branch, Cell, Proposal, SceneProblem, Span, Target};
pub use schedule::{NoiseGrid, Schedule, ScheduleStage};
pub use smc::{
    effective_sample_size, log_sum_exp, map_particle, normalized_weights, particle_rng, resample_systematic, run_smc,
    smc_extend, smc_init, Particle, SmcConfig, SmcResult,
};
pub use summary::{bessel_ratio, fit_von_mises, posterior_object_marginal, von_mises_logpdf, VonMisesFit, KAPPA_MAX};

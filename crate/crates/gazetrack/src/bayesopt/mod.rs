//! Bayesian optimization of the gaze-reward map over a continuous
//! fixation domain: a Gaussian-process surrogate with MAP-fit
//! hyperparameters, UCB acquisition, and a deterministic DIRECT search
//! as the inner maximizer.

pub mod direct;
pub mod gp;

pub use direct::{direct_maximize, ActionDomain, DEFAULT_DIRECT_BUDGET};
pub use gp::{
    log_posterior, map_fit, se_kernel, ucb_acquire, ucb_beta, GpHyperparams, GpModel,
    HyperPriors, MapFitOutcome, StudentTPrior, DEFAULT_UCB_DELTA, DEFAULT_WARMUP,
};

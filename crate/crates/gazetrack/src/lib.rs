//! Simultaneous object tracking and gaze control.
//!
//! A particle filter tracks a target through a video, but instead of
//! observing whole frames it takes one foveated glimpse per frame at a
//! gaze offset it chooses itself. Informative gazes concentrate the
//! importance weights; the weight concentration is fed back as reward to
//! an attention policy that learns online where to look. Policies cover
//! adversarial bandits over a discrete fixation grid (Hedge with full
//! reward information, EXP3 with bandit feedback) and Bayesian
//! optimization over a continuous gaze domain (Gaussian-process UCB with
//! a deterministic DIRECT inner search). A second, multi-fixation RBM
//! consumes the glimpse features alongside their gaze positions to
//! classify the target's identity while it is being tracked.
//!
//! The crate is organised as a library with one thin command-line
//! harness. Each major capability has a runnable example:
//!
//! ```text
//! cargo run --example foveated_glimpses     # glimpse sampling geometry
//! cargo run --example appearance_training   # first-layer RBM on glyphs
//! cargo run --example bandit_policies       # Hedge and EXP3 regret
//! cargo run --example direct_search         # DIRECT global optimizer
//! cargo run --example bayesopt_quadratic    # GP-UCB on a noisy bowl
//! cargo run --example synthetic_video       # sequence generator output
//! cargo run --example track_and_look        # full tracking pipeline
//! cargo run --example identity_readout      # multi-fixation classifier
//! cargo run --example reward_surface        # learned gaze-reward map
//! ```
//!
//! The harness binary (`gazetrack`) drives pretraining and the policy
//! comparison grid from a TOML config; see the repository README.

pub mod appearance;
pub mod bayesopt;
pub mod error;
pub mod frame;
pub mod harness;
pub mod identity;
pub mod policies;
pub mod rng;
pub mod simulator;
pub mod state_space;
pub mod tracker;

pub use error::{Error, Result};

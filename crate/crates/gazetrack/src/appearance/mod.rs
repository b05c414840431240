//! Appearance modelling: foveated glimpses, the feature RBM trained on
//! them, and template matching in feature space.

pub mod foveate;
pub mod rbm;
pub mod template;

pub use foveate::{foveate, FoveaGeometry, FoveatedPatch};
pub use rbm::{train_rbm_cd1, HiddenFeatures, Rbm};
pub use template::{observation_likelihood, Template};

//! Reward-surface export: run the Bayesian-optimization policy on one
//! sequence, then sample its learned gaze-reward model on a grid.
//!
//! The output is a CSV of `x,y,mean,std` rows over the gaze domain and
//! a grayscale heatmap of the posterior mean, normalized to the
//! observed range.

use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::rng::child_seed;
use crate::tracker::GazePolicy;

use super::config::ExperimentConfig;
use super::pretrain::PretrainedModels;
use super::run::cell_video;

#[derive(Debug, Clone)]
pub struct SurfaceOptions {
    pub out_dir: PathBuf,
    pub glyph: usize,
    pub seed_index: usize,
    /// Grid points per axis.
    pub resolution: usize,
    pub base_seed: Option<u64>,
}

impl Default for SurfaceOptions {
    fn default() -> Self {
        SurfaceOptions {
            out_dir: PathBuf::from("surface"),
            glyph: 0,
            seed_index: 0,
            resolution: 64,
            base_seed: None,
        }
    }
}

/// Run one Bayesian-optimization cell and dump its posterior reward
/// surface. Returns the CSV and heatmap paths.
pub fn dump_surface(
    config: &ExperimentConfig,
    models: &PretrainedModels,
    options: &SurfaceOptions,
) -> Result<(PathBuf, PathBuf)> {
    config.validate()?;
    if options.resolution < 2 {
        return Err(Error::ConfigInvalid("surface resolution must be at least 2".into()));
    }
    let store = config.glyph_store();
    let base_seed = options.base_seed.unwrap_or(config.experiment.base_seed);
    let (frames, truth) =
        cell_video(config, &store, base_seed, options.glyph, options.seed_index)?;
    let tracker = config.build_tracker(models.rbm.clone(), None)?;
    let mut policy = config.build_policy("bayesopt")?;
    // Seeded exactly like the grid's bayesopt cell, so the surface
    // matches that run.
    let cell_seed = child_seed(
        base_seed,
        &format!("bayesopt/glyph{}/seed{}", options.glyph, options.seed_index),
    );
    tracker.run_sequence(&frames, &truth.states[0], &mut policy, cell_seed)?;
    let model = match policy {
        GazePolicy::BayesOpt(b) => b.model,
        _ => unreachable!("bayesopt was requested"),
    };

    let domain = config.gaze_domain();
    let res = options.resolution;
    let coord = |d: usize, i: usize| {
        domain.min[d] + domain.side(d) * i as f64 / (res - 1) as f64
    };
    let mut csv = String::from("x,y,mean,std\n");
    let mut means = vec![0.0f64; res * res];
    for row in 0..res {
        let y = coord(1, row);
        for col in 0..res {
            let x = coord(0, col);
            let (mean, variance) = model.posterior([x, y]);
            means[row * res + col] = mean;
            csv.push_str(&format!("{x:.6},{y:.6},{mean:.6},{:.6}\n", variance.sqrt()));
        }
    }

    let lo = means.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = (hi - lo).max(1e-12);
    let pixels: Vec<f64> = means.iter().map(|m| (m - lo) / span).collect();
    let heatmap = Frame::from_data(res, res, pixels)?;

    std::fs::create_dir_all(&options.out_dir)?;
    let csv_path = options.out_dir.join(format!(
        "surface_g{}_s{}.csv",
        options.glyph, options.seed_index
    ));
    let pgm_path = options.out_dir.join(format!(
        "surface_g{}_s{}.pgm",
        options.glyph, options.seed_index
    ));
    std::fs::write(&csv_path, csv)?;
    heatmap.write_pgm(&pgm_path)?;
    Ok((csv_path, pgm_path))
}

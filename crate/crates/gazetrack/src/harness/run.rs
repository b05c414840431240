//! The experiment grid: every configured policy against every target
//! class over repeated seeds, in parallel, with CSV result tables.
//!
//! Videos are seeded by (glyph, repetition) only, so every policy
//! tracks the identical sequence; particle and policy randomness is
//! seeded by (policy, glyph, repetition). Each table cell reports
//! "mean (std)" across repetitions.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::identity::ClassPosterior;
use crate::rng::{child_seed, stream_rng};
use crate::simulator::glyphs::GlyphStore;
use crate::simulator::{classification_accuracy, generate_sequence, tracking_error, GroundTruth};
use crate::state_space::State;
use crate::tracker::{ClassifierBundle, GazeAction, TrackEstimate};

use super::config::ExperimentConfig;
use super::pretrain::PretrainedModels;

/// Result of one (policy, glyph, repetition) run.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub policy: String,
    pub glyph: usize,
    pub seed_index: usize,
    /// Mean and std of the per-frame position error.
    pub mean_error: f64,
    pub std_error: f64,
    pub final_error: f64,
    pub lost: bool,
    /// Fraction of classified frames whose accumulated posterior picks
    /// the true class, when the classifier ran.
    pub accuracy: Option<f64>,
    pub cumulative_reward: f64,
    /// Frames whose weights vanished and were reset.
    pub flagged_frames: usize,
}

/// Outcome of a whole grid.
#[derive(Debug)]
pub struct RunReport {
    pub cells: Vec<CellResult>,
    /// Cells that returned an error: (cell label, message).
    pub failures: Vec<(String, String)>,
    pub files_written: Vec<PathBuf>,
}

impl RunReport {
    /// 0 when every cell ran, 3 when any failed.
    pub fn exit_code(&self) -> i32 {
        if self.failures.is_empty() {
            0
        } else {
            3
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Restrict the grid to one policy.
    pub policy: Option<String>,
    /// Restrict the grid to one target class.
    pub glyph: Option<usize>,
    /// Replace the configured base seed.
    pub base_seed: Option<u64>,
}

/// The video of one (glyph, repetition): identical for every policy.
pub fn cell_video(
    config: &ExperimentConfig,
    store: &GlyphStore,
    base_seed: u64,
    glyph: usize,
    seed_index: usize,
) -> Result<(Vec<Frame>, GroundTruth)> {
    let video_seed = child_seed(base_seed, &format!("video/{glyph}/{seed_index}"));
    let mut rng = stream_rng(video_seed, "simulator");
    let mut spec = config.sequence_spec(glyph);
    if config.sequence.randomize_direction {
        use rand::Rng;
        // First draw of the stream, before any noise is sampled, so
        // clean and noisy variants share the trajectory.
        let angle = rng.random::<f64>() * std::f64::consts::TAU;
        let speed = (spec.velocity[0].powi(2) + spec.velocity[1].powi(2)).sqrt();
        spec.velocity = [speed * angle.cos(), speed * angle.sin()];
    }
    generate_sequence(&spec, store, &mut rng)
}

fn cell_label(policy: &str, glyph: usize, seed_index: usize) -> String {
    format!("{policy}/glyph{glyph}/seed{seed_index}")
}

/// Run one cell of the grid.
pub fn run_cell(
    config: &ExperimentConfig,
    models: &PretrainedModels,
    store: &GlyphStore,
    base_seed: u64,
    policy_name: &str,
    glyph: usize,
    seed_index: usize,
) -> Result<CellResult> {
    let (frames, truth) = cell_video(config, store, base_seed, glyph, seed_index)?;
    let classifier = config.classifier.enabled.then(|| ClassifierBundle {
        model: models.mfrbm.clone(),
        readout: models.readout.clone(),
        gaze_source: config.classifier.gaze_source,
    });
    let tracker = config.build_tracker(models.rbm.clone(), classifier)?;
    let mut policy = config.build_policy(policy_name)?;
    let cell_seed = child_seed(base_seed, &cell_label(policy_name, glyph, seed_index));
    let estimates = tracker.run_sequence(&frames, &truth.states[0], &mut policy, cell_seed)?;

    let states: Vec<State> = estimates.iter().map(|e| e.state).collect();
    let (mean_error, std_error) = tracking_error(&states, &truth)?;
    let last = states.last().expect("nonempty sequence");
    let last_truth = truth.states.last().expect("nonempty sequence");
    let final_error = ((last.position[0] - last_truth.position[0]).powi(2)
        + (last.position[1] - last_truth.position[1]).powi(2))
    .sqrt();
    let posteriors: Vec<ClassPosterior> =
        estimates.iter().filter_map(|e| e.posterior.clone()).collect();
    let accuracy = (config.classifier.enabled && !posteriors.is_empty())
        .then(|| classification_accuracy(&posteriors, glyph));
    Ok(CellResult {
        policy: policy_name.to_string(),
        glyph,
        seed_index,
        mean_error,
        std_error,
        final_error,
        lost: final_error > config.experiment.track_loss_threshold,
        accuracy,
        cumulative_reward: estimates.last().unwrap().cumulative_reward,
        flagged_frames: estimates.iter().filter(|e| e.flagged).count(),
    })
}

/// Trace rows for one run, used when `write_traces` is on.
pub fn trace_csv(estimates: &[TrackEstimate], truth: &GroundTruth) -> String {
    let mut out = String::from(
        "frame,x,y,scale,orientation,truth_x,truth_y,error,reward,cumulative,action,flagged\n",
    );
    for (t, (e, truth_state)) in estimates.iter().zip(&truth.states).enumerate() {
        let action = match e.action {
            None => "-".to_string(),
            Some(GazeAction::Discrete(i)) => i.to_string(),
            Some(GazeAction::Continuous(a)) => format!("{:.3};{:.3}", a[0], a[1]),
        };
        let error = ((e.state.position[0] - truth_state.position[0]).powi(2)
            + (e.state.position[1] - truth_state.position[1]).powi(2))
        .sqrt();
        out.push_str(&format!(
            "{t},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{action},{}\n",
            e.state.position[0],
            e.state.position[1],
            e.state.scale(),
            e.state.orientation,
            truth_state.position[0],
            truth_state.position[1],
            error,
            e.reward,
            e.cumulative_reward,
            e.flagged as u8,
        ));
    }
    out
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn format_cell(values: &[f64]) -> String {
    if values.is_empty() {
        return "-".to_string();
    }
    let (mean, std) = mean_std(values);
    format!("{mean:.3} ({std:.3})")
}

/// One "mean (std)" table: rows are policies, columns the target
/// classes plus a pooled average.
fn write_table<F>(
    path: &Path,
    policies: &[String],
    glyphs: &[usize],
    cells: &[CellResult],
    value: F,
) -> Result<()>
where
    F: Fn(&CellResult) -> Option<f64>,
{
    let mut out = String::from("policy");
    for g in glyphs {
        out.push_str(&format!(",glyph{g}"));
    }
    out.push_str(",avg\n");
    for policy in policies {
        out.push_str(policy);
        let mut pooled = Vec::new();
        for g in glyphs {
            let values: Vec<f64> = cells
                .iter()
                .filter(|c| &c.policy == policy && c.glyph == *g)
                .filter_map(&value)
                .collect();
            pooled.extend_from_slice(&values);
            out.push(',');
            out.push_str(&format_cell(&values));
        }
        out.push(',');
        out.push_str(&format_cell(&pooled));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn write_cells_csv(path: &Path, cells: &[CellResult]) -> Result<()> {
    let mut out = String::from(
        "policy,glyph,seed,mean_error,std_error,final_error,lost,accuracy,cumulative_reward,flagged\n",
    );
    for c in cells {
        let accuracy = c.accuracy.map_or("-".to_string(), |a| format!("{a:.6}"));
        out.push_str(&format!(
            "{},{},{},{:.6},{:.6},{:.6},{},{},{:.6},{}\n",
            c.policy,
            c.glyph,
            c.seed_index,
            c.mean_error,
            c.std_error,
            c.final_error,
            c.lost as u8,
            accuracy,
            c.cumulative_reward,
            c.flagged_frames,
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Run the whole grid and write the result tables.
pub fn run_experiment(
    config: &ExperimentConfig,
    models: &PretrainedModels,
    options: &RunOptions,
) -> Result<RunReport> {
    config.validate()?;
    let store = config.glyph_store();
    let base_seed = options.base_seed.unwrap_or(config.experiment.base_seed);
    let policies: Vec<String> = config
        .experiment
        .policies
        .iter()
        .filter(|p| options.policy.as_ref().is_none_or(|f| f == *p))
        .cloned()
        .collect();
    let glyphs: Vec<usize> = config
        .experiment
        .glyphs
        .iter()
        .filter(|g| options.glyph.is_none_or(|f| f == **g))
        .copied()
        .collect();
    if policies.is_empty() || glyphs.is_empty() {
        return Err(Error::ConfigInvalid(
            "filters left no (policy, glyph) cells to run".into(),
        ));
    }

    let mut keys = Vec::new();
    for policy in &policies {
        for glyph in &glyphs {
            for seed_index in 0..config.experiment.seeds {
                keys.push((policy.clone(), *glyph, seed_index));
            }
        }
    }

    let outcomes: Vec<(String, Result<CellResult>)> = keys
        .par_iter()
        .map(|(policy, glyph, seed_index)| {
            let label = cell_label(policy, *glyph, *seed_index);
            let result =
                run_cell(config, models, &store, base_seed, policy, *glyph, *seed_index);
            (label, result)
        })
        .collect();

    let mut cells = Vec::new();
    let mut failures = Vec::new();
    for (label, outcome) in outcomes {
        match outcome {
            Ok(cell) => cells.push(cell),
            Err(e) => failures.push((label, e.to_string())),
        }
    }

    std::fs::create_dir_all(&options.out_dir)?;
    let mut files_written = Vec::new();
    let results = options.out_dir.join("results.csv");
    write_table(&results, &policies, &glyphs, &cells, |c| Some(c.mean_error))?;
    files_written.push(results);
    let rewards = options.out_dir.join("rewards.csv");
    write_table(&rewards, &policies, &glyphs, &cells, |c| Some(c.cumulative_reward))?;
    files_written.push(rewards);
    if config.classifier.enabled {
        let classification = options.out_dir.join("classification.csv");
        write_table(&classification, &policies, &glyphs, &cells, |c| c.accuracy)?;
        files_written.push(classification);
    }
    let cells_path = options.out_dir.join("cells.csv");
    write_cells_csv(&cells_path, &cells)?;
    files_written.push(cells_path);

    if config.experiment.write_traces {
        let trace_dir = options.out_dir.join("traces");
        std::fs::create_dir_all(&trace_dir)?;
        for (policy, glyph, seed_index) in &keys {
            // Re-run deterministically; traces are opt-in and rare.
            let (frames, truth) = cell_video(config, &store, base_seed, *glyph, *seed_index)?;
            let tracker = config.build_tracker(models.rbm.clone(), None)?;
            let mut p = config.build_policy(policy)?;
            let cell_seed = child_seed(base_seed, &cell_label(policy, *glyph, *seed_index));
            if let Ok(estimates) =
                tracker.run_sequence(&frames, &truth.states[0], &mut p, cell_seed)
            {
                let path = trace_dir.join(format!("{policy}_g{glyph}_s{seed_index}.csv"));
                std::fs::write(&path, trace_csv(&estimates, &truth))?;
                files_written.push(path);
            }
        }
    }

    Ok(RunReport { cells, failures, files_written })
}

/// Human-readable per-policy summary for the terminal.
pub fn format_summary(config: &ExperimentConfig, report: &RunReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "experiment {:?}: {} cells, {} failures\n",
        config.experiment.name,
        report.cells.len(),
        report.failures.len()
    ));
    out.push_str("policy      error px        reward          accuracy        lost\n");
    for policy in &config.experiment.policies {
        let cells: Vec<&CellResult> =
            report.cells.iter().filter(|c| &c.policy == policy).collect();
        if cells.is_empty() {
            continue;
        }
        let errors: Vec<f64> = cells.iter().map(|c| c.mean_error).collect();
        let rewards: Vec<f64> = cells.iter().map(|c| c.cumulative_reward).collect();
        let accuracies: Vec<f64> = cells.iter().filter_map(|c| c.accuracy).collect();
        let lost = cells.iter().filter(|c| c.lost).count();
        out.push_str(&format!(
            "{policy:<11} {:<15} {:<15} {:<15} {lost}/{}\n",
            format_cell(&errors),
            format_cell(&rewards),
            format_cell(&accuracies),
            cells.len(),
        ));
    }
    for (label, message) in &report.failures {
        out.push_str(&format!("FAILED {label}: {message}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::{ActionsSection, AppearanceSection};
    use crate::harness::pretrain::{train_features, train_identity};

    fn tiny_setup() -> (ExperimentConfig, PretrainedModels) {
        let mut config = ExperimentConfig::default();
        config.experiment.seeds = 2;
        config.experiment.policies = vec!["random".into(), "circular".into()];
        config.experiment.glyphs = vec![3];
        config.sequence.width = 72;
        config.sequence.height = 72;
        config.sequence.frames = 12;
        config.appearance = AppearanceSection { rings: 2, fovea: 4, hidden: 16 };
        config.actions = ActionsSection { grid: 3, spacing: 6.0 };
        config.tracker.particles = 30;
        config.classifier.window = 3;
        config.classifier.hidden = 10;
        config.classifier.factors = 8;
        config.pretrain.rbm_samples_per_glyph = 6;
        config.pretrain.rbm_epochs = 2;
        config.pretrain.mfrbm_windows_per_glyph = 4;
        config.pretrain.mfrbm_epochs = 1;
        config.pretrain.readout_epochs = 20;
        let store = config.glyph_store();
        let rbm = train_features(&config, &store, 1).unwrap();
        let (mfrbm, readout) = train_identity(&config, &store, &rbm, 1).unwrap();
        (config, PretrainedModels { rbm, mfrbm, readout })
    }

    #[test]
    fn videos_are_shared_across_policies_and_distinct_across_seeds() {
        let (config, _) = tiny_setup();
        let store = config.glyph_store();
        let (a, ta) = cell_video(&config, &store, 7, 3, 0).unwrap();
        let (b, tb) = cell_video(&config, &store, 7, 3, 0).unwrap();
        assert_eq!(ta.states, tb.states);
        assert_eq!(a[5].data(), b[5].data());
        let (_, tc) = cell_video(&config, &store, 7, 3, 1).unwrap();
        assert_ne!(ta.states, tc.states);
    }

    #[test]
    fn grid_runs_and_writes_tables() {
        let (config, models) = tiny_setup();
        let dir = tempfile::tempdir().unwrap();
        let options = RunOptions {
            out_dir: dir.path().to_path_buf(),
            ..RunOptions::default()
        };
        let report = run_experiment(&config, &models, &options).unwrap();
        assert_eq!(report.exit_code(), 0);
        assert_eq!(report.cells.len(), 2 * 2); // policies x seeds
        let results = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
        assert!(results.starts_with("policy,glyph3,avg\n"));
        assert_eq!(results.lines().count(), 3);
        for line in results.lines().skip(1) {
            assert!(line.contains('('), "cell carries a std: {line}");
        }
        let cells = std::fs::read_to_string(dir.path().join("cells.csv")).unwrap();
        assert_eq!(cells.lines().count(), 1 + 4);
        assert!(dir.path().join("classification.csv").exists());
    }

    #[test]
    fn cells_are_deterministic() {
        let (config, models) = tiny_setup();
        let store = config.glyph_store();
        let a = run_cell(&config, &models, &store, 9, "random", 3, 0).unwrap();
        let b = run_cell(&config, &models, &store, 9, "random", 3, 0).unwrap();
        assert_eq!(a.mean_error.to_bits(), b.mean_error.to_bits());
        assert_eq!(a.cumulative_reward.to_bits(), b.cumulative_reward.to_bits());
    }

    #[test]
    fn filters_restrict_the_grid() {
        let (config, models) = tiny_setup();
        let dir = tempfile::tempdir().unwrap();
        let options = RunOptions {
            out_dir: dir.path().to_path_buf(),
            policy: Some("circular".into()),
            ..RunOptions::default()
        };
        let report = run_experiment(&config, &models, &options).unwrap();
        assert!(report.cells.iter().all(|c| c.policy == "circular"));
        let options = RunOptions {
            out_dir: dir.path().to_path_buf(),
            policy: Some("nonexistent".into()),
            ..RunOptions::default()
        };
        assert!(run_experiment(&config, &models, &options).is_err());
    }

    #[test]
    fn summary_mentions_each_policy() {
        let (config, models) = tiny_setup();
        let dir = tempfile::tempdir().unwrap();
        let options = RunOptions {
            out_dir: dir.path().to_path_buf(),
            ..RunOptions::default()
        };
        let report = run_experiment(&config, &models, &options).unwrap();
        let summary = format_summary(&config, &report);
        assert!(summary.contains("random"));
        assert!(summary.contains("circular"));
        assert!(summary.contains("0 failures"));
    }
}

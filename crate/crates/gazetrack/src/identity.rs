//! Identity recognition from a short window of glimpses.
//!
//! While the tracker follows a target it only ever sees foveated
//! fragments, each taken at a known gaze offset. A factored three-way
//! RBM fuses a window of the last `window` glimpse feature vectors with
//! one-hot encodings of where each was taken: factor `f` multiplies a
//! projection of the second-layer hidden units, one of the glimpse
//! features, and one of the gaze position, so the model can learn
//! "feature pattern X at gaze Y" conjunctions. The second-layer hidden
//! probabilities summarize the window and feed a multinomial logistic
//! readout; per-step class posteriors are accumulated over time in log
//! space, sharpening identity evidence while tracking continues.
//!
//! With hidden configuration `h2`, glimpse features `h_i`, and one-hot
//! gazes `z_i`, the energy is
//!
//! ```text
//! E = -d.h2 - sum_i b.h_i
//!     + sum_i sum_f (P_f . h2) (W_f . h_i) (V_f . z_i)
//! ```
//!
//! and the conditionals used for inference and Gibbs steps follow from
//! it by isolating one unit's linear coefficient in `E`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;

use crate::appearance::rbm::{logistic, read_f64s, read_u32};
use crate::error::{Error, Result};

const MF_MAGIC: &[u8; 4] = b"MFR1";
const READOUT_MAGIC: &[u8; 4] = b"LRD1";

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Factored three-way RBM over (glimpse features, gaze position,
/// second-layer hidden units).
#[derive(Debug, Clone, PartialEq)]
pub struct MultiFixationRbm {
    /// Number of factors `F`.
    pub factors: usize,
    /// Glimpse feature dimension (first-layer hidden size).
    pub n_input: usize,
    /// Second-layer hidden dimension.
    pub n_hidden: usize,
    /// Number of discrete gaze positions `K`.
    pub gaze_positions: usize,
    /// Window length: glimpses fused per inference.
    pub window: usize,
    /// `P`: factors x n_hidden, row-major.
    pub factor_hidden: Vec<f64>,
    /// `W`: factors x n_input, row-major.
    pub factor_input: Vec<f64>,
    /// `V`: factors x gaze_positions, row-major.
    pub factor_gaze: Vec<f64>,
    /// `b`: per glimpse feature unit.
    pub input_bias: Vec<f64>,
    /// `d`: per second-layer hidden unit.
    pub hidden_bias: Vec<f64>,
}

/// One training or inference window: `window` glimpse feature vectors
/// and the gaze index each was taken at.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSample {
    pub features: Vec<Vec<f64>>,
    pub gazes: Vec<usize>,
}

/// Second-layer hidden probabilities summarizing one window.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateFeatures {
    pub probs: Vec<f64>,
}

/// Normalized class log probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassPosterior {
    pub log_probs: Vec<f64>,
}

impl ClassPosterior {
    pub fn probs(&self) -> Vec<f64> {
        self.log_probs.iter().map(|l| l.exp()).collect()
    }

    /// Most probable class; ties break to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, l) in self.log_probs.iter().enumerate() {
            if *l > self.log_probs[best] {
                best = i;
            }
        }
        best
    }
}

impl MultiFixationRbm {
    pub fn zeros(
        factors: usize,
        n_input: usize,
        n_hidden: usize,
        gaze_positions: usize,
        window: usize,
    ) -> Self {
        MultiFixationRbm {
            factors,
            n_input,
            n_hidden,
            gaze_positions,
            window,
            factor_hidden: vec![0.0; factors * n_hidden],
            factor_input: vec![0.0; factors * n_input],
            factor_gaze: vec![0.0; factors * gaze_positions],
            input_bias: vec![0.0; n_input],
            hidden_bias: vec![0.0; n_hidden],
        }
    }

    /// Small-Gaussian factor initialization, zero biases.
    pub fn init_random<R: Rng>(
        factors: usize,
        n_input: usize,
        n_hidden: usize,
        gaze_positions: usize,
        window: usize,
        std: f64,
        rng: &mut R,
    ) -> Self {
        use rand_distr::{Distribution, Normal};
        let normal = Normal::new(0.0, std).unwrap();
        let mut model = Self::zeros(factors, n_input, n_hidden, gaze_positions, window);
        for w in model
            .factor_hidden
            .iter_mut()
            .chain(&mut model.factor_input)
            .chain(&mut model.factor_gaze)
        {
            *w = normal.sample(rng);
        }
        model
    }

    pub fn check_window(&self, sample: &WindowSample) -> Result<()> {
        if sample.features.len() != self.window {
            return Err(Error::LengthMismatch {
                left: self.window,
                right: sample.features.len(),
            });
        }
        if sample.gazes.len() != self.window {
            return Err(Error::LengthMismatch { left: self.window, right: sample.gazes.len() });
        }
        for h in &sample.features {
            if h.len() != self.n_input {
                return Err(Error::DimensionMismatch { expected: self.n_input, got: h.len() });
            }
        }
        for &z in &sample.gazes {
            if z >= self.gaze_positions {
                return Err(Error::DimensionMismatch { expected: self.gaze_positions, got: z });
            }
        }
        Ok(())
    }

    /// Per-factor contraction `t_f = sum_i (W_f . h_i)(V_f . z_i)`.
    fn factor_totals(&self, sample: &WindowSample) -> Vec<f64> {
        let mut totals = vec![0.0; self.factors];
        for (h, &z) in sample.features.iter().zip(&sample.gazes) {
            for f in 0..self.factors {
                let row = &self.factor_input[f * self.n_input..(f + 1) * self.n_input];
                let mut wh = 0.0;
                for (w, x) in row.iter().zip(h) {
                    wh += w * x;
                }
                totals[f] += wh * self.factor_gaze[f * self.gaze_positions + z];
            }
        }
        totals
    }

    /// Energy of a full configuration; `h2` may be binary or real.
    pub fn energy(&self, sample: &WindowSample, h2: &[f64]) -> Result<f64> {
        self.check_window(sample)?;
        if h2.len() != self.n_hidden {
            return Err(Error::DimensionMismatch { expected: self.n_hidden, got: h2.len() });
        }
        let mut e = 0.0;
        for (d, h) in self.hidden_bias.iter().zip(h2) {
            e -= d * h;
        }
        for h in &sample.features {
            for (b, x) in self.input_bias.iter().zip(h) {
                e -= b * x;
            }
        }
        let totals = self.factor_totals(sample);
        for f in 0..self.factors {
            let row = &self.factor_hidden[f * self.n_hidden..(f + 1) * self.n_hidden];
            let mut ph = 0.0;
            for (p, h) in row.iter().zip(h2) {
                ph += p * h;
            }
            e += ph * totals[f];
        }
        Ok(e)
    }

    /// Posterior probabilities of the second-layer hidden units given a
    /// window: `p(h2_j = 1) = logistic(d_j - sum_f P_fj t_f)`. The
    /// minus sign carries the positive factored term of the energy into
    /// the conditional.
    pub fn hidden_probs(&self, sample: &WindowSample) -> Result<AggregateFeatures> {
        self.check_window(sample)?;
        let totals = self.factor_totals(sample);
        Ok(AggregateFeatures { probs: self.hidden_probs_from_totals(&totals) })
    }

    fn hidden_probs_from_totals(&self, totals: &[f64]) -> Vec<f64> {
        (0..self.n_hidden)
            .map(|j| {
                let mut s = 0.0;
                for f in 0..self.factors {
                    s += self.factor_hidden[f * self.n_hidden + j] * totals[f];
                }
                logistic(self.hidden_bias[j] - s)
            })
            .collect()
    }

    /// Mean-field reconstruction of the glimpse features given `h2` and
    /// the gaze indices: `p(h_ik = 1) = logistic(b_k - sum_f (P_f . h2)
    /// W_fk V_f(z_i))`.
    fn reconstruct_inputs(&self, gazes: &[usize], h2: &[f64]) -> Vec<Vec<f64>> {
        let factor_load: Vec<f64> = (0..self.factors)
            .map(|f| {
                let row = &self.factor_hidden[f * self.n_hidden..(f + 1) * self.n_hidden];
                row.iter().zip(h2).map(|(p, h)| p * h).sum()
            })
            .collect();
        gazes
            .iter()
            .map(|&z| {
                (0..self.n_input)
                    .map(|k| {
                        let mut s = 0.0;
                        for f in 0..self.factors {
                            s += factor_load[f]
                                * self.factor_input[f * self.n_input + k]
                                * self.factor_gaze[f * self.gaze_positions + z];
                        }
                        logistic(self.input_bias[k] - s)
                    })
                    .collect()
            })
            .collect()
    }

    /// Free energy of a window: `-log sum_h2 exp(-E)` up to the parts
    /// independent of the parameters. Lower means better explained.
    pub fn free_energy(&self, sample: &WindowSample) -> Result<f64> {
        self.check_window(sample)?;
        let totals = self.factor_totals(sample);
        let mut fe = 0.0;
        for h in &sample.features {
            for (b, x) in self.input_bias.iter().zip(h) {
                fe -= b * x;
            }
        }
        for j in 0..self.n_hidden {
            let mut s = 0.0;
            for f in 0..self.factors {
                s += self.factor_hidden[f * self.n_hidden + j] * totals[f];
            }
            fe -= softplus(self.hidden_bias[j] - s);
        }
        Ok(fe)
    }

    fn all_finite(&self) -> bool {
        self.factor_hidden
            .iter()
            .chain(&self.factor_input)
            .chain(&self.factor_gaze)
            .chain(&self.input_bias)
            .chain(&self.hidden_bias)
            .all(|v| v.is_finite())
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(MF_MAGIC)?;
        for dim in [self.factors, self.n_input, self.n_hidden, self.gaze_positions, self.window]
        {
            w.write_all(&(dim as u32).to_le_bytes())?;
        }
        for v in self
            .factor_hidden
            .iter()
            .chain(&self.factor_input)
            .chain(&self.factor_gaze)
            .chain(&self.input_bias)
            .chain(&self.hidden_bias)
        {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R, origin: &str) -> Result<Self> {
        let bad = |reason: &str| Error::BadFile {
            path: origin.to_string(),
            reason: reason.to_string(),
        };
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|_| bad("truncated header"))?;
        if &magic != MF_MAGIC {
            return Err(bad("wrong magic"));
        }
        let mut dims = [0usize; 5];
        for d in &mut dims {
            *d = read_u32(r).map_err(|_| bad("truncated header"))? as usize;
        }
        let [factors, n_input, n_hidden, gaze_positions, window] = dims;
        if dims.iter().any(|d| *d == 0 || *d > 1 << 20) {
            return Err(bad("implausible dimensions"));
        }
        let mut model = Self::zeros(factors, n_input, n_hidden, gaze_positions, window);
        read_f64s(r, &mut model.factor_hidden).map_err(|_| bad("truncated factors"))?;
        read_f64s(r, &mut model.factor_input).map_err(|_| bad("truncated factors"))?;
        read_f64s(r, &mut model.factor_gaze).map_err(|_| bad("truncated factors"))?;
        read_f64s(r, &mut model.input_bias).map_err(|_| bad("truncated biases"))?;
        read_f64s(r, &mut model.hidden_bias).map_err(|_| bad("truncated biases"))?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        Self::read_from(&mut r, &path.display().to_string())
    }
}

/// Gradients of the energy with respect to every parameter, evaluated
/// with expected hidden units `q` on the given window.
struct EnergyStats {
    p: Vec<f64>,
    w: Vec<f64>,
    v: Vec<f64>,
    b: Vec<f64>,
    d: Vec<f64>,
}

fn energy_gradients(model: &MultiFixationRbm, sample: &WindowSample, q: &[f64]) -> EnergyStats {
    let totals = model.factor_totals(sample);
    let factor_load: Vec<f64> = (0..model.factors)
        .map(|f| {
            let row = &model.factor_hidden[f * model.n_hidden..(f + 1) * model.n_hidden];
            row.iter().zip(q).map(|(p, h)| p * h).sum()
        })
        .collect();
    let mut stats = EnergyStats {
        p: vec![0.0; model.factors * model.n_hidden],
        w: vec![0.0; model.factors * model.n_input],
        v: vec![0.0; model.factors * model.gaze_positions],
        b: vec![0.0; model.n_input],
        d: vec![0.0; model.n_hidden],
    };
    for f in 0..model.factors {
        for j in 0..model.n_hidden {
            stats.p[f * model.n_hidden + j] = q[j] * totals[f];
        }
    }
    for (h, &z) in sample.features.iter().zip(&sample.gazes) {
        for f in 0..model.factors {
            let vz = model.factor_gaze[f * model.gaze_positions + z];
            let w_row = &model.factor_input[f * model.n_input..(f + 1) * model.n_input];
            let mut wh = 0.0;
            for (w, x) in w_row.iter().zip(h) {
                wh += w * x;
            }
            for k in 0..model.n_input {
                stats.w[f * model.n_input + k] += factor_load[f] * vz * h[k];
            }
            stats.v[f * model.gaze_positions + z] += factor_load[f] * wh;
        }
        for k in 0..model.n_input {
            stats.b[k] -= h[k];
        }
    }
    for j in 0..model.n_hidden {
        stats.d[j] = -q[j];
    }
    stats
}

/// One-step contrastive divergence on windows of glimpse features with
/// their gaze positions. The positive phase uses exact hidden
/// posteriors; the negative phase reconstructs the features through one
/// Gibbs alternation conditioned on a sampled hidden vector, keeping
/// gaze indices clamped.
pub fn train_mfrbm<R: Rng>(
    dataset: &[WindowSample],
    model: &MultiFixationRbm,
    learning_rate: f64,
    epochs: usize,
    rng: &mut R,
) -> Result<MultiFixationRbm> {
    let mut m = model.clone();
    for _ in 0..epochs {
        for sample in dataset {
            m.check_window(sample)?;
            let q = m.hidden_probs(sample)?.probs;
            let h2_sample: Vec<f64> = q
                .iter()
                .map(|&p| if rng.random::<f64>() < p { 1.0 } else { 0.0 })
                .collect();
            let recon = WindowSample {
                features: m.reconstruct_inputs(&sample.gazes, &h2_sample),
                gazes: sample.gazes.clone(),
            };
            let q_recon = m.hidden_probs(&recon)?.probs;
            let pos = energy_gradients(&m, sample, &q);
            let neg = energy_gradients(&m, &recon, &q_recon);
            let apply = |theta: &mut [f64], pos: &[f64], neg: &[f64]| {
                for i in 0..theta.len() {
                    theta[i] += learning_rate * (neg[i] - pos[i]);
                }
            };
            apply(&mut m.factor_hidden, &pos.p, &neg.p);
            apply(&mut m.factor_input, &pos.w, &neg.w);
            apply(&mut m.factor_gaze, &pos.v, &neg.v);
            apply(&mut m.input_bias, &pos.b, &neg.b);
            apply(&mut m.hidden_bias, &pos.d, &neg.d);
        }
    }
    if !m.all_finite() {
        return Err(Error::TrainingDiverged("multi-fixation model".into()));
    }
    Ok(m)
}

/// Multinomial logistic readout from aggregate features to classes.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticReadout {
    pub classes: usize,
    pub inputs: usize,
    /// classes x inputs, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LogisticReadout {
    pub fn zeros(classes: usize, inputs: usize) -> Self {
        LogisticReadout {
            classes,
            inputs,
            weights: vec![0.0; classes * inputs],
            bias: vec![0.0; classes],
        }
    }

    fn logits(&self, features: &AggregateFeatures) -> Result<Vec<f64>> {
        if features.probs.len() != self.inputs {
            return Err(Error::DimensionMismatch {
                expected: self.inputs,
                got: features.probs.len(),
            });
        }
        Ok((0..self.classes)
            .map(|c| {
                let row = &self.weights[c * self.inputs..(c + 1) * self.inputs];
                let mut s = self.bias[c];
                for (w, x) in row.iter().zip(&features.probs) {
                    s += w * x;
                }
                s
            })
            .collect())
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(READOUT_MAGIC)?;
        w.write_all(&(self.classes as u32).to_le_bytes())?;
        w.write_all(&(self.inputs as u32).to_le_bytes())?;
        for v in self.weights.iter().chain(&self.bias) {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R, origin: &str) -> Result<Self> {
        let bad = |reason: &str| Error::BadFile {
            path: origin.to_string(),
            reason: reason.to_string(),
        };
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|_| bad("truncated header"))?;
        if &magic != READOUT_MAGIC {
            return Err(bad("wrong magic"));
        }
        let classes = read_u32(r).map_err(|_| bad("truncated header"))? as usize;
        let inputs = read_u32(r).map_err(|_| bad("truncated header"))? as usize;
        if classes == 0 || inputs == 0 || classes > 1 << 16 || inputs > 1 << 20 {
            return Err(bad("implausible dimensions"));
        }
        let mut readout = Self::zeros(classes, inputs);
        read_f64s(r, &mut readout.weights).map_err(|_| bad("truncated weights"))?;
        read_f64s(r, &mut readout.bias).map_err(|_| bad("truncated bias"))?;
        Ok(readout)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        Self::read_from(&mut r, &path.display().to_string())
    }
}

fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().fold(f64::NEG_INFINITY, |m, &l| m.max(l));
    let log_z = logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln() + max;
    logits.iter().map(|l| l - log_z).collect()
}

/// Class posterior of one window's aggregate features.
pub fn classify(features: &AggregateFeatures, readout: &LogisticReadout) -> Result<ClassPosterior> {
    Ok(ClassPosterior { log_probs: log_softmax(&readout.logits(features)?) })
}

/// Cross-entropy training of the readout by full-batch gradient
/// descent: the mean gradient over the dataset is applied once per
/// epoch, so the result is independent of sample order (per-sample
/// updates forget earlier classes when the data arrives sorted).
pub fn train_readout(
    dataset: &[(AggregateFeatures, usize)],
    classes: usize,
    inputs: usize,
    learning_rate: f64,
    epochs: usize,
) -> Result<LogisticReadout> {
    let mut readout = LogisticReadout::zeros(classes, inputs);
    if dataset.is_empty() {
        return Ok(readout);
    }
    let scale = learning_rate / dataset.len() as f64;
    for _ in 0..epochs {
        let mut grad_w = vec![0.0; classes * inputs];
        let mut grad_b = vec![0.0; classes];
        for (features, label) in dataset {
            if *label >= classes {
                return Err(Error::DimensionMismatch { expected: classes, got: *label });
            }
            let posterior = classify(features, &readout)?;
            let probs = posterior.probs();
            for c in 0..classes {
                let err = if c == *label { 1.0 - probs[c] } else { -probs[c] };
                let row = &mut grad_w[c * inputs..(c + 1) * inputs];
                for (g, x) in row.iter_mut().zip(&features.probs) {
                    *g += err * x;
                }
                grad_b[c] += err;
            }
        }
        for (w, g) in readout.weights.iter_mut().zip(&grad_w) {
            *w += scale * g;
        }
        for (b, g) in readout.bias.iter_mut().zip(&grad_b) {
            *b += scale * g;
        }
    }
    if !readout.weights.iter().chain(&readout.bias).all(|v| v.is_finite()) {
        return Err(Error::TrainingDiverged("identity readout".into()));
    }
    Ok(readout)
}

/// Fuse per-step posteriors by summing log probabilities and
/// renormalizing; with conditionally independent evidence this is exact
/// Bayesian accumulation, and it is invariant to the order of the
/// history.
pub fn accumulate(history: &[ClassPosterior]) -> ClassPosterior {
    assert!(!history.is_empty(), "cannot accumulate an empty history");
    let classes = history[0].log_probs.len();
    let mut sums = vec![0.0; classes];
    for posterior in history {
        assert_eq!(posterior.log_probs.len(), classes);
        for (s, l) in sums.iter_mut().zip(&posterior.log_probs) {
            *s += l;
        }
    }
    ClassPosterior { log_probs: log_softmax(&sums) }
}

//! Restricted Boltzmann machine over real-valued glimpses.
//!
//! Visible units hold glimpse intensities in `[0, 1]` and are treated as
//! means throughout; hidden units are logistic. The hidden activation
//! vector serves as the appearance descriptor that glimpses are compared
//! in, so inference only ever needs the deterministic up-pass. Training
//! is single-step contrastive divergence.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;

use crate::appearance::foveate::FoveatedPatch;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"RBM1";

/// Numerically safe logistic function.
#[inline]
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Hidden activation probabilities of one glimpse; every entry lies in
/// `(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenFeatures {
    pub activations: Vec<f64>,
}

/// Weights and biases of a binary-hidden, real-visible RBM.
#[derive(Debug, Clone, PartialEq)]
pub struct Rbm {
    pub n_visible: usize,
    pub n_hidden: usize,
    /// `n_hidden x n_visible`, row-major.
    pub weights: Vec<f64>,
    pub visible_bias: Vec<f64>,
    pub hidden_bias: Vec<f64>,
}

impl Rbm {
    pub fn zeros(n_visible: usize, n_hidden: usize) -> Self {
        Rbm {
            n_visible,
            n_hidden,
            weights: vec![0.0; n_hidden * n_visible],
            visible_bias: vec![0.0; n_visible],
            hidden_bias: vec![0.0; n_hidden],
        }
    }

    /// Small-Gaussian weight initialization, zero biases.
    pub fn init_random<R: Rng>(n_visible: usize, n_hidden: usize, std: f64, rng: &mut R) -> Self {
        use rand_distr::{Distribution, Normal};
        let normal = Normal::new(0.0, std).unwrap();
        let mut rbm = Rbm::zeros(n_visible, n_hidden);
        for w in &mut rbm.weights {
            *w = normal.sample(rng);
        }
        rbm
    }

    fn check_visible(&self, len: usize) -> Result<()> {
        if len != self.n_visible {
            return Err(Error::DimensionMismatch { expected: self.n_visible, got: len });
        }
        Ok(())
    }

    /// Hidden activation probabilities given visible means.
    pub fn hidden(&self, visible: &[f64]) -> Result<HiddenFeatures> {
        self.check_visible(visible.len())?;
        let mut activations = Vec::with_capacity(self.n_hidden);
        for j in 0..self.n_hidden {
            let row = &self.weights[j * self.n_visible..(j + 1) * self.n_visible];
            let mut x = self.hidden_bias[j];
            for (w, v) in row.iter().zip(visible) {
                x += w * v;
            }
            activations.push(logistic(x));
        }
        Ok(HiddenFeatures { activations })
    }

    /// Glimpse descriptor: the hidden activations of its values.
    pub fn features(&self, patch: &FoveatedPatch) -> Result<HiddenFeatures> {
        self.hidden(&patch.values)
    }

    /// Visible means given hidden unit values.
    pub fn visible_means(&self, hidden: &[f64]) -> Result<Vec<f64>> {
        if hidden.len() != self.n_hidden {
            return Err(Error::DimensionMismatch { expected: self.n_hidden, got: hidden.len() });
        }
        let mut means = Vec::with_capacity(self.n_visible);
        for i in 0..self.n_visible {
            let mut x = self.visible_bias[i];
            for (j, h) in hidden.iter().enumerate() {
                x += self.weights[j * self.n_visible + i] * h;
            }
            means.push(logistic(x));
        }
        Ok(means)
    }

    /// Mean squared one-step reconstruction error over a batch; the
    /// quantity logged to watch training progress.
    pub fn reconstruction_error(&self, batch: &[FoveatedPatch]) -> Result<f64> {
        let mut total = 0.0;
        let mut count = 0usize;
        for patch in batch {
            let h = self.hidden(&patch.values)?;
            let v1 = self.visible_means(&h.activations)?;
            for (a, b) in patch.values.iter().zip(&v1) {
                total += (a - b) * (a - b);
                count += 1;
            }
        }
        Ok(if count == 0 { 0.0 } else { total / count as f64 })
    }

    fn all_finite(&self) -> bool {
        self.weights.iter().all(|w| w.is_finite())
            && self.visible_bias.iter().all(|b| b.is_finite())
            && self.hidden_bias.iter().all(|b| b.is_finite())
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.n_visible as u32).to_le_bytes())?;
        w.write_all(&(self.n_hidden as u32).to_le_bytes())?;
        for v in self.weights.iter().chain(&self.visible_bias).chain(&self.hidden_bias) {
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
        if &magic != MAGIC {
            return Err(bad("wrong magic"));
        }
        let n_visible = read_u32(r).map_err(|_| bad("truncated header"))? as usize;
        let n_hidden = read_u32(r).map_err(|_| bad("truncated header"))? as usize;
        if n_visible == 0 || n_hidden == 0 || n_visible > 1 << 20 || n_hidden > 1 << 20 {
            return Err(bad("implausible dimensions"));
        }
        let mut rbm = Rbm::zeros(n_visible, n_hidden);
        read_f64s(r, &mut rbm.weights).map_err(|_| bad("truncated weights"))?;
        read_f64s(r, &mut rbm.visible_bias).map_err(|_| bad("truncated visible bias"))?;
        read_f64s(r, &mut rbm.hidden_bias).map_err(|_| bad("truncated hidden bias"))?;
        Ok(rbm)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        Rbm::read_from(&mut r, &path.display().to_string())
    }
}

pub(crate) fn read_u32<R: Read>(r: &mut R) -> std::io::Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

pub(crate) fn read_f64s<R: Read>(r: &mut R, out: &mut [f64]) -> std::io::Result<()> {
    let mut buf = [0u8; 8];
    for slot in out {
        r.read_exact(&mut buf)?;
        *slot = f64::from_le_bytes(buf);
    }
    Ok(())
}

/// Positive-phase sufficient statistics of a batch: batch means of
/// `v_i E[h_j | v]`, `v_i`, and `E[h_j | v]`. Exposed so the gradient's
/// data term can be checked against direct summation.
pub fn positive_statistics(
    rbm: &Rbm,
    batch: &[FoveatedPatch],
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let mut w_stats = vec![0.0; rbm.n_hidden * rbm.n_visible];
    let mut v_stats = vec![0.0; rbm.n_visible];
    let mut h_stats = vec![0.0; rbm.n_hidden];
    for patch in batch {
        let h = rbm.hidden(&patch.values)?;
        for (j, hj) in h.activations.iter().enumerate() {
            for (i, vi) in patch.values.iter().enumerate() {
                w_stats[j * rbm.n_visible + i] += hj * vi;
            }
            h_stats[j] += hj;
        }
        for (i, vi) in patch.values.iter().enumerate() {
            v_stats[i] += vi;
        }
    }
    let n = batch.len().max(1) as f64;
    for s in w_stats.iter_mut().chain(&mut v_stats).chain(&mut h_stats) {
        *s /= n;
    }
    Ok((w_stats, v_stats, h_stats))
}

/// One-step contrastive divergence over the batch, `epochs` passes of
/// per-sample updates in batch order. The positive phase uses hidden
/// probabilities; the down-pass conditions on a sampled binary hidden
/// vector and keeps the visible reconstruction real-valued.
pub fn train_rbm_cd1<R: Rng>(
    data: &[FoveatedPatch],
    rbm: &Rbm,
    learning_rate: f64,
    epochs: usize,
    rng: &mut R,
) -> Result<Rbm> {
    let mut model = rbm.clone();
    for _ in 0..epochs {
        for patch in data {
            model.check_visible(patch.values.len())?;
            let v0 = &patch.values;
            let h0 = model.hidden(v0)?.activations;
            let h0_sample: Vec<f64> = h0
                .iter()
                .map(|&p| if rng.random::<f64>() < p { 1.0 } else { 0.0 })
                .collect();
            let v1 = model.visible_means(&h0_sample)?;
            let h1 = model.hidden(&v1)?.activations;
            for j in 0..model.n_hidden {
                let row = &mut model.weights[j * model.n_visible..(j + 1) * model.n_visible];
                for i in 0..model.n_visible {
                    row[i] += learning_rate * (h0[j] * v0[i] - h1[j] * v1[i]);
                }
                model.hidden_bias[j] += learning_rate * (h0[j] - h1[j]);
            }
            for i in 0..model.n_visible {
                model.visible_bias[i] += learning_rate * (v0[i] - v1[i]);
            }
        }
    }
    if !model.all_finite() {
        return Err(Error::TrainingDiverged("glimpse feature model".into()));
    }
    Ok(model)
}

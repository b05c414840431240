//! Gaussian-process reward model and the UCB acquisition rule.
//!
//! The Bayesian-optimization policy treats the gaze-to-reward map as an
//! unknown function over a continuous 2-D fixation domain. Rewards
//! observed at past fixations feed a GP with a squared-exponential
//! kernel; the next fixation maximizes the upper confidence bound
//! `mean + sqrt(beta_t) * std` with the schedule
//! `beta_t = 2 ln(t^3 pi^2 / (3 delta))`. Hyperparameters are refit
//! periodically by maximizing the log marginal likelihood plus priors
//! (Student-t on each length scale, uniform boxes on the variances) with
//! projected gradient ascent in log space.
//!
//! The Cholesky factor is extended by one row per observation; a full
//! refactorization only happens after a hyperparameter change or when
//! the incremental step goes numerically infeasible, in which case a
//! diagonal jitter escalates geometrically before the model gives up
//! with [`Error::SingularGram`].

use nalgebra::{DMatrix, DVector};

use crate::bayesopt::direct::{direct_maximize, ActionDomain};
use crate::error::{Error, Result};

/// Observations required before the first hyperparameter fit.
pub const DEFAULT_WARMUP: usize = 10;
/// Default confidence parameter of the UCB schedule.
pub const DEFAULT_UCB_DELTA: f64 = 0.001;
/// Jitter starts at this fraction of the signal variance.
const JITTER_BASE: f64 = 1e-10;
/// Jitter gives up at this fraction of the signal variance.
const JITTER_CAP: f64 = 1e-4;

/// Squared-exponential kernel hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GpHyperparams {
    pub signal_variance: f64,
    pub noise_variance: f64,
    pub length_scales: [f64; 2],
}

impl GpHyperparams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.signal_variance > 0.0
            && self.noise_variance > 0.0
            && self.length_scales.iter().all(|l| *l > 0.0)
            && self.signal_variance.is_finite()
            && self.noise_variance.is_finite()
            && self.length_scales.iter().all(|l| l.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::ConfigInvalid("GP hyperparameters must be positive and finite".into()))
        }
    }
}

/// `k(a, b) = signal_variance * exp(-1/2 sum ((a_d - b_d) / l_d)^2)`.
pub fn se_kernel(a: [f64; 2], b: [f64; 2], hyper: &GpHyperparams) -> f64 {
    let mut quad = 0.0;
    for d in 0..2 {
        let z = (a[d] - b[d]) / hyper.length_scales[d];
        quad += z * z;
    }
    hyper.signal_variance * (-0.5 * quad).exp()
}

/// Student-t prior over a length scale, truncated to positive values.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudentTPrior {
    pub degrees: f64,
    pub location: f64,
    pub scale: f64,
}

impl StudentTPrior {
    /// Log density up to an additive constant, as a function of the
    /// linear-space value.
    fn log_density(&self, x: f64) -> f64 {
        let z = (x - self.location) / self.scale;
        -0.5 * (self.degrees + 1.0) * (z * z / self.degrees).ln_1p()
    }

    /// Derivative of [`Self::log_density`] with respect to `x`.
    fn log_density_grad(&self, x: f64) -> f64 {
        let d = x - self.location;
        -(self.degrees + 1.0) * d / (self.degrees * self.scale * self.scale + d * d)
    }
}

/// Priors for the MAP hyperparameter fit.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperPriors {
    pub length_scale: [StudentTPrior; 2],
    pub signal_variance_bounds: (f64, f64),
    pub noise_variance_bounds: (f64, f64),
}

impl HyperPriors {
    /// Default priors scaled to the search domain: each length scale
    /// gets a Student-t with 4 degrees of freedom located at a quarter
    /// of the domain side with matching scale; the variances get broad
    /// uniform boxes.
    pub fn for_domain(domain: &ActionDomain) -> Self {
        let prior = |side: f64| StudentTPrior {
            degrees: 4.0,
            location: 0.25 * side,
            scale: 0.25 * side,
        };
        HyperPriors {
            length_scale: [prior(domain.side(0)), prior(domain.side(1))],
            signal_variance_bounds: (1e-4, 10.0),
            noise_variance_bounds: (1e-6, 1.0),
        }
    }

    fn in_support(&self, hyper: &GpHyperparams) -> bool {
        let (s_lo, s_hi) = self.signal_variance_bounds;
        let (n_lo, n_hi) = self.noise_variance_bounds;
        hyper.signal_variance >= s_lo
            && hyper.signal_variance <= s_hi
            && hyper.noise_variance >= n_lo
            && hyper.noise_variance <= n_hi
            && hyper.length_scales.iter().all(|l| *l > 0.0)
    }
}

/// GP over gaze-reward observations.
#[derive(Debug, Clone)]
pub struct GpModel {
    hyper: GpHyperparams,
    points: Vec<[f64; 2]>,
    rewards: Vec<f64>,
    /// Lower Cholesky factor of `K + (noise + jitter) I`.
    chol: DMatrix<f64>,
    /// `(K + (noise + jitter) I)^-1 rewards`.
    alpha: DVector<f64>,
    /// Current absolute jitter on the gram diagonal.
    jitter: f64,
}

impl GpModel {
    pub fn new(hyper: GpHyperparams) -> Result<Self> {
        hyper.validate()?;
        Ok(GpModel {
            jitter: JITTER_BASE * hyper.signal_variance,
            hyper,
            points: Vec::new(),
            rewards: Vec::new(),
            chol: DMatrix::zeros(0, 0),
            alpha: DVector::zeros(0),
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn hyper(&self) -> &GpHyperparams {
        &self.hyper
    }

    pub fn observations(&self) -> (&[[f64; 2]], &[f64]) {
        (&self.points, &self.rewards)
    }

    /// Best observed fixation and its reward; ties keep the earliest.
    pub fn incumbent(&self) -> Option<([f64; 2], f64)> {
        let mut best: Option<([f64; 2], f64)> = None;
        for (p, r) in self.points.iter().zip(&self.rewards) {
            if best.is_none_or(|(_, br)| *r > br) {
                best = Some((*p, *r));
            }
        }
        best
    }

    /// Add one observation, extending the Cholesky factor by a single
    /// row. Falls back to a full refactorization with escalating jitter
    /// if the new diagonal entry is not positive.
    pub fn observe(&mut self, point: [f64; 2], reward: f64) -> Result<()> {
        assert!(reward.is_finite() && point.iter().all(|x| x.is_finite()));
        let n = self.len();
        self.points.push(point);
        self.rewards.push(reward);
        let mut k = DVector::zeros(n);
        for i in 0..n {
            k[i] = se_kernel(self.points[i], point, &self.hyper);
        }
        let diagonal = self.hyper.signal_variance + self.hyper.noise_variance + self.jitter;
        let row = forward_substitute(&self.chol, &k);
        let pivot_sq = diagonal - row.dot(&row);
        if pivot_sq > 0.0 {
            let mut grown = DMatrix::zeros(n + 1, n + 1);
            grown.view_mut((0, 0), (n, n)).copy_from(&self.chol);
            for i in 0..n {
                grown[(n, i)] = row[i];
            }
            grown[(n, n)] = pivot_sq.sqrt();
            self.chol = grown;
            self.refresh_alpha();
            Ok(())
        } else {
            self.refactor()
        }
    }

    /// Posterior mean and variance of the latent reward at `point`.
    /// With no data this is the prior: mean 0, variance equal to the
    /// signal variance.
    pub fn posterior(&self, point: [f64; 2]) -> (f64, f64) {
        if self.is_empty() {
            return (0.0, self.hyper.signal_variance);
        }
        let n = self.len();
        let mut k = DVector::zeros(n);
        for i in 0..n {
            k[i] = se_kernel(self.points[i], point, &self.hyper);
        }
        let mean = k.dot(&self.alpha);
        let v = forward_substitute(&self.chol, &k);
        let variance = (self.hyper.signal_variance - v.dot(&v)).max(0.0);
        (mean, variance)
    }

    /// Replace the hyperparameters and rebuild the factorization.
    pub fn set_hyper(&mut self, hyper: GpHyperparams) -> Result<()> {
        hyper.validate()?;
        self.hyper = hyper;
        self.jitter = JITTER_BASE * self.hyper.signal_variance;
        if self.is_empty() {
            Ok(())
        } else {
            self.refactor()
        }
    }

    /// Refit hyperparameters by MAP once at least `warmup` observations
    /// have arrived; below that the model is returned untouched. A
    /// singular gram during the fit leaves the previous hyperparameters
    /// in place and reports `degenerate = true`.
    pub fn refit(&mut self, priors: &HyperPriors, warmup: usize) -> MapFitOutcome {
        if self.len() < warmup {
            return MapFitOutcome { hyper: self.hyper, converged: false, degenerate: false };
        }
        let outcome = map_fit(&self.points, &self.rewards, &self.hyper, priors, 100);
        if !outcome.degenerate {
            // A fit that walked out of all bounds would have been
            // projected back, so applying it cannot fail validation.
            if self.set_hyper(outcome.hyper).is_err() {
                return MapFitOutcome { hyper: self.hyper, converged: false, degenerate: true };
            }
        }
        outcome
    }

    fn refresh_alpha(&mut self) {
        let r = DVector::from_column_slice(&self.rewards);
        let y = forward_substitute(&self.chol, &r);
        self.alpha = back_substitute(&self.chol, &y);
    }

    fn refactor(&mut self) -> Result<()> {
        let n = self.len();
        let mut base = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let k = se_kernel(self.points[i], self.points[j], &self.hyper);
                base[(i, j)] = k;
                base[(j, i)] = k;
            }
        }
        let mut jitter = JITTER_BASE * self.hyper.signal_variance;
        let cap = JITTER_CAP * self.hyper.signal_variance;
        loop {
            let mut gram = base.clone();
            for i in 0..n {
                gram[(i, i)] += self.hyper.noise_variance + jitter;
            }
            if let Some(chol) = nalgebra::Cholesky::new(gram) {
                self.chol = chol.unpack();
                self.jitter = jitter;
                self.refresh_alpha();
                return Ok(());
            }
            jitter *= 10.0;
            if jitter > cap {
                return Err(Error::SingularGram);
            }
        }
    }
}

fn forward_substitute(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = b.len();
    let mut y = DVector::zeros(n);
    for i in 0..n {
        let mut s = b[i];
        for j in 0..i {
            s -= l[(i, j)] * y[j];
        }
        y[i] = s / l[(i, i)];
    }
    y
}

fn back_substitute(l: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let n = y.len();
    let mut x = DVector::zeros(n);
    for i in (0..n).rev() {
        let mut s = y[i];
        for j in i + 1..n {
            s -= l[(j, i)] * x[j];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

/// Log-space coordinates of the MAP objective, in the frozen order
/// `[ln signal_variance, ln noise_variance, ln l_0, ln l_1]`.
fn to_log(hyper: &GpHyperparams) -> [f64; 4] {
    [
        hyper.signal_variance.ln(),
        hyper.noise_variance.ln(),
        hyper.length_scales[0].ln(),
        hyper.length_scales[1].ln(),
    ]
}

fn from_log(u: &[f64; 4]) -> GpHyperparams {
    GpHyperparams {
        signal_variance: u[0].exp(),
        noise_variance: u[1].exp(),
        length_scales: [u[2].exp(), u[3].exp()],
    }
}

/// MAP objective: log marginal likelihood of the observations plus log
/// priors (up to an additive constant), with its analytic gradient in
/// log space. The priors are densities over the linear-space values;
/// log space is only the optimizer's coordinate system, so each linear
/// gradient is simply scaled by its parameter.
pub fn log_posterior(
    points: &[[f64; 2]],
    rewards: &[f64],
    hyper: &GpHyperparams,
    priors: &HyperPriors,
) -> Result<(f64, [f64; 4])> {
    if points.len() != rewards.len() {
        return Err(Error::LengthMismatch { left: points.len(), right: rewards.len() });
    }
    hyper.validate()?;
    if !priors.in_support(hyper) {
        return Ok((f64::NEG_INFINITY, [0.0; 4]));
    }
    let n = points.len();
    let signal_only = GpHyperparams { noise_variance: hyper.noise_variance, ..*hyper };
    let mut kf = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let k = se_kernel(points[i], points[j], &signal_only);
            kf[(i, j)] = k;
            kf[(j, i)] = k;
        }
    }
    let cap = JITTER_CAP * hyper.signal_variance;
    let mut jitter = JITTER_BASE * hyper.signal_variance;
    let chol = loop {
        let mut gram = kf.clone();
        for i in 0..n {
            gram[(i, i)] += hyper.noise_variance + jitter;
        }
        if let Some(c) = nalgebra::Cholesky::new(gram) {
            break c.unpack();
        }
        jitter *= 10.0;
        if jitter > cap {
            return Err(Error::SingularGram);
        }
    };
    let r = DVector::from_column_slice(rewards);
    let alpha = back_substitute(&chol, &forward_substitute(&chol, &r));

    let mut log_det_half = 0.0;
    for i in 0..n {
        log_det_half += chol[(i, i)].ln();
    }
    let mut value = -0.5 * r.dot(&alpha)
        - log_det_half
        - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();

    // K^-1 via triangular solves against the identity.
    let mut k_inv = DMatrix::zeros(n, n);
    for col in 0..n {
        let mut e = DVector::zeros(n);
        e[col] = 1.0;
        let x = back_substitute(&chol, &forward_substitute(&chol, &e));
        for row in 0..n {
            k_inv[(row, col)] = x[row];
        }
    }
    // M = alpha alpha^T - K^-1; gradient of the marginal likelihood for
    // parameter theta is 1/2 tr(M dK/dtheta).
    let trace_with = |dk: &dyn Fn(usize, usize) -> f64| -> f64 {
        let mut t = 0.0;
        for i in 0..n {
            for j in 0..n {
                let m = alpha[i] * alpha[j] - k_inv[(i, j)];
                t += m * dk(j, i);
            }
        }
        0.5 * t
    };
    let mut grad = [0.0; 4];
    // d/d ln(signal_variance): the signal part of K itself.
    grad[0] = trace_with(&|i, j| kf[(i, j)]);
    // d/d ln(noise_variance): noise_variance on the diagonal.
    grad[1] = trace_with(&|i, j| if i == j { hyper.noise_variance } else { 0.0 });
    for d in 0..2 {
        let l = hyper.length_scales[d];
        grad[2 + d] = trace_with(&|i, j| {
            let diff = points[i][d] - points[j][d];
            kf[(i, j)] * diff * diff / (l * l)
        });
    }

    for d in 0..2 {
        let l = hyper.length_scales[d];
        value += priors.length_scale[d].log_density(l);
        grad[2 + d] += priors.length_scale[d].log_density_grad(l) * l;
    }
    // Uniform variance priors contribute nothing inside their boxes.
    Ok((value, grad))
}

/// Result of a MAP fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapFitOutcome {
    pub hyper: GpHyperparams,
    pub converged: bool,
    /// The gram matrix was singular; `hyper` is the unchanged input.
    pub degenerate: bool,
}

/// Projected gradient ascent on [`log_posterior`] in log space with
/// backtracking line search. Variances are clamped to their prior
/// boxes, length scales to a wide positive range.
pub fn map_fit(
    points: &[[f64; 2]],
    rewards: &[f64],
    start: &GpHyperparams,
    priors: &HyperPriors,
    max_iters: usize,
) -> MapFitOutcome {
    let project = |u: &mut [f64; 4]| {
        let (s_lo, s_hi) = priors.signal_variance_bounds;
        let (n_lo, n_hi) = priors.noise_variance_bounds;
        u[0] = u[0].clamp(s_lo.ln(), s_hi.ln());
        u[1] = u[1].clamp(n_lo.ln(), n_hi.ln());
        for d in 0..2 {
            u[2 + d] = u[2 + d].clamp((1e-6f64).ln(), (1e6f64).ln());
        }
    };
    let mut u = to_log(start);
    project(&mut u);
    let evaluate = |u: &[f64; 4]| log_posterior(points, rewards, &from_log(u), priors);
    let (mut value, mut grad) = match evaluate(&u) {
        Ok(v) => v,
        Err(_) => return MapFitOutcome { hyper: *start, converged: false, degenerate: true },
    };
    let mut converged = false;
    for _ in 0..max_iters {
        let grad_norm = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if grad_norm < 1e-6 {
            converged = true;
            break;
        }
        let mut step = 0.5 / grad_norm.max(1.0);
        let mut improved = false;
        for _ in 0..30 {
            let mut candidate = [0.0; 4];
            for i in 0..4 {
                candidate[i] = u[i] + step * grad[i];
            }
            project(&mut candidate);
            match evaluate(&candidate) {
                Ok((cand_value, cand_grad)) if cand_value > value => {
                    u = candidate;
                    value = cand_value;
                    grad = cand_grad;
                    improved = true;
                    break;
                }
                Ok(_) => step *= 0.5,
                Err(_) => step *= 0.5,
            }
        }
        if !improved {
            // No ascent direction at any step size: numerically at an
            // optimum.
            converged = true;
            break;
        }
    }
    MapFitOutcome { hyper: from_log(&u), converged, degenerate: false }
}

/// Confidence schedule `beta_t = 2 ln(t^3 pi^2 / (3 delta))` for step
/// `t >= 1`.
pub fn ucb_beta(t: usize, delta: f64) -> f64 {
    assert!(t >= 1 && delta > 0.0);
    let t = t as f64;
    2.0 * (t.powi(3) * std::f64::consts::PI.powi(2) / (3.0 * delta)).ln()
}

/// Next fixation: maximize `mean + sqrt(beta_t) * std` over the domain
/// with DIRECT under the given evaluation budget.
pub fn ucb_acquire(
    model: &GpModel,
    domain: &ActionDomain,
    t: usize,
    delta: f64,
    direct_budget: usize,
) -> [f64; 2] {
    let beta_sqrt = ucb_beta(t, delta).sqrt();
    let (point, _) = direct_maximize(
        |a| {
            let (mean, variance) = model.posterior(a);
            mean + beta_sqrt * variance.sqrt()
        },
        domain,
        direct_budget,
    );
    point
}

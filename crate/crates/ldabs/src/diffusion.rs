//! Latent diffusion math over the wireless channel: DDPM-style noise
//! schedules, the AWGN latent channel, CSI-matched selection of the denoising
//! start step, reverse denoising, and conditional refinement of
//! dependent-frame latents.
//!
//! The denoising network is replaced by analytic denoisers so every claim is
//! checkable in closed form: [`OracleDenoiser`] returns a stored ground
//! truth, and [`GaussianPriorDenoiser`] is the exact MMSE predictor when the
//! clean latent is standard normal per element. External implementations
//! plug in through the [`Denoiser`] trait.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DiffusionError {
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("step {t} outside [{min}, {max}]")]
    StepOutOfRange { t: usize, min: usize, max: usize },
    #[error("dimension mismatch: {expected} vs {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("latent values must be finite and non-empty")]
    InvalidLatent,
}

/// A real latent feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentVector {
    pub values: Vec<f64>,
}

impl LatentVector {
    pub fn new(values: Vec<f64>) -> Result<Self, DiffusionError> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(DiffusionError::InvalidLatent);
        }
        Ok(Self { values })
    }

    pub fn zeros(dim: usize) -> Self {
        Self { values: vec![0.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Mean squared difference to another vector of the same dimension.
    pub fn mse(&self, other: &Self) -> f64 {
        assert_eq!(self.dim(), other.dim());
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / self.dim() as f64
    }

    /// Largest absolute elementwise difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim(), other.dim());
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    fn check_dim(&self, other: &Self) -> Result<(), DiffusionError> {
        if self.dim() != other.dim() {
            return Err(DiffusionError::DimMismatch { expected: self.dim(), got: other.dim() });
        }
        Ok(())
    }
}

/// Draws a seeded i.i.d. standard-normal latent vector.
pub fn standard_normal(dim: usize, seed: u64) -> LatentVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    LatentVector { values: (0..dim).map(|_| rng.sample(StandardNormal)).collect() }
}

/// Per-step corruption levels of the diffusion process. `alpha_bar(t)` is the
/// cumulative signal retention, with `alpha_bar(0) = 1` by convention.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    beta: Vec<f64>,
    /// alpha_bar[t] for t in 0..=T.
    alpha_bar: Vec<f64>,
}

impl NoiseSchedule {
    pub fn steps(&self) -> usize {
        self.beta.len()
    }

    pub fn beta(&self, t: usize) -> f64 {
        assert!(t >= 1 && t <= self.steps());
        self.beta[t - 1]
    }

    pub fn alpha(&self, t: usize) -> f64 {
        1.0 - self.beta(t)
    }

    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bar[t]
    }

    /// Noise-to-signal ratio (1 - alpha_bar) / alpha_bar at step t.
    pub fn noise_ratio(&self, t: usize) -> f64 {
        (1.0 - self.alpha_bar[t]) / self.alpha_bar[t]
    }

    fn check_step(&self, t: usize) -> Result<(), DiffusionError> {
        if t < 1 || t > self.steps() {
            return Err(DiffusionError::StepOutOfRange { t, min: 1, max: self.steps() });
        }
        Ok(())
    }

    /// The canonical defaults: T = 1000, beta linear in [1e-4, 0.02].
    pub fn default_linear() -> Self {
        build_schedule(1000, 1e-4, 0.02).unwrap()
    }
}

/// Builds a linear beta schedule from `beta_start` to `beta_end` over `steps`
/// steps and precomputes the cumulative signal retentions.
pub fn build_schedule(
    steps: usize,
    beta_start: f64,
    beta_end: f64,
) -> Result<NoiseSchedule, DiffusionError> {
    if steps < 1 {
        return Err(DiffusionError::InvalidSchedule("need at least one step".into()));
    }
    if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
        return Err(DiffusionError::InvalidSchedule(format!(
            "need 0 < beta_start <= beta_end < 1, got [{beta_start}, {beta_end}]"
        )));
    }
    let beta: Vec<f64> = if steps == 1 {
        vec![beta_start]
    } else {
        (0..steps)
            .map(|i| beta_start + (beta_end - beta_start) * i as f64 / (steps - 1) as f64)
            .collect()
    };
    let mut alpha_bar = Vec::with_capacity(steps + 1);
    alpha_bar.push(1.0);
    let mut prod = 1.0;
    for &b in &beta {
        prod *= 1.0 - b;
        alpha_bar.push(prod);
    }
    Ok(NoiseSchedule { beta, alpha_bar })
}

/// Flat-gain AWGN channel for latent transmission. Signal power is assumed
/// normalized to 1 per element by the caller; `snr_db` may be
/// `f64::INFINITY` for a noiseless channel. `csi_error_db` is the estimation
/// error added to the true SNR to form the receiver's estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    pub snr_db: f64,
    pub gain: f64,
    pub csi_error_db: f64,
}

impl ChannelModel {
    pub fn new(snr_db: f64, gain: f64, csi_error_db: f64) -> Self {
        assert!(gain > 0.0, "channel gain must be positive");
        Self { snr_db, gain, csi_error_db }
    }

    pub fn estimated_snr_db(&self) -> f64 {
        self.snr_db + self.csi_error_db
    }

    /// Per-element noise variance of the gain-equalized received signal.
    pub fn noise_variance(&self) -> f64 {
        noise_variance_for_snr(self.snr_db)
    }
}

/// sigma^2 = 10^(-snr_db / 10); infinity maps to 0.
pub fn noise_variance_for_snr(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

/// q(z_t | z_0): z_t = sqrt(alpha_bar_t) z0 + sqrt(1 - alpha_bar_t) noise.
/// Accepts t = 0 (identity) through t = T.
pub fn forward_diffuse(
    z0: &LatentVector,
    t: usize,
    noise: &LatentVector,
    sched: &NoiseSchedule,
) -> Result<LatentVector, DiffusionError> {
    if t > sched.steps() {
        return Err(DiffusionError::StepOutOfRange { t, min: 0, max: sched.steps() });
    }
    z0.check_dim(noise)?;
    let ab = sched.alpha_bar(t);
    let (cs, cn) = (ab.sqrt(), (1.0 - ab).sqrt());
    Ok(LatentVector {
        values: z0
            .values
            .iter()
            .zip(&noise.values)
            .map(|(z, n)| cs * z + cn * n)
            .collect(),
    })
}

/// Sends a latent over the channel: y = gain * z0 + n with n i.i.d. zero-mean
/// Gaussian of variance gain^2 * sigma^2 per element, so the gain-equalized
/// signal carries noise variance sigma^2. Deterministic per seed.
pub fn transmit(z0: &LatentVector, ch: &ChannelModel, rng_seed: u64) -> LatentVector {
    let sigma = ch.noise_variance().sqrt() * ch.gain;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    LatentVector {
        values: z0
            .values
            .iter()
            .map(|z| {
                let n: f64 = rng.sample(StandardNormal);
                ch.gain * z + sigma * n
            })
            .collect(),
    }
}

/// Selects the denoising start step whose schedule noise level matches the
/// estimated channel noise: the smallest t with
/// (1 - alpha_bar_t) / alpha_bar_t >= sigma^2, or T when the channel is
/// noisier than the schedule allows.
pub fn match_step(estimated_snr_db: f64, sched: &NoiseSchedule) -> usize {
    let sigma2 = noise_variance_for_snr(estimated_snr_db);
    for t in 1..=sched.steps() {
        if sched.noise_ratio(t) >= sigma2 {
            return t;
        }
    }
    sched.steps()
}

/// Embeds the received latent at schedule step r: equalizes the gain, adds
/// make-up Gaussian noise of variance
/// max(0, (1 - alpha_bar_r)/alpha_bar_r - sigma_true^2) so the total
/// effective noise lands exactly on step r when the CSI estimate is accurate,
/// then scales by sqrt(alpha_bar_r).
pub fn embed_received(
    y: &LatentVector,
    ch: &ChannelModel,
    r: usize,
    sched: &NoiseSchedule,
    rng_seed: u64,
) -> Result<LatentVector, DiffusionError> {
    sched.check_step(r)?;
    let makeup_var = (sched.noise_ratio(r) - ch.noise_variance()).max(0.0);
    let makeup_sigma = makeup_var.sqrt();
    let scale = sched.alpha_bar(r).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    Ok(LatentVector {
        values: y
            .values
            .iter()
            .map(|v| {
                let n: f64 = rng.sample(StandardNormal);
                scale * (v / ch.gain + makeup_sigma * n)
            })
            .collect(),
    })
}

/// q-posterior mean of z_{t-1} given z_t and a prediction of z_0:
/// mu = [sqrt(ab_{t-1}) beta_t / (1 - ab_t)] z0_hat
///    + [sqrt(alpha_t) (1 - ab_{t-1}) / (1 - ab_t)] z_t.
pub fn posterior_mean(
    z_t: &LatentVector,
    z0_hat: &LatentVector,
    t: usize,
    sched: &NoiseSchedule,
) -> Result<LatentVector, DiffusionError> {
    sched.check_step(t)?;
    z_t.check_dim(z0_hat)?;
    let ab_t = sched.alpha_bar(t);
    let ab_prev = sched.alpha_bar(t - 1);
    let c0 = ab_prev.sqrt() * sched.beta(t) / (1.0 - ab_t);
    let ct = sched.alpha(t).sqrt() * (1.0 - ab_prev) / (1.0 - ab_t);
    Ok(LatentVector {
        values: z_t
            .values
            .iter()
            .zip(&z0_hat.values)
            .map(|(zt, z0)| c0 * z0 + ct * zt)
            .collect(),
    })
}

/// Predicts the clean latent z_0 from a noisy latent at a known step.
pub trait Denoiser {
    fn predict_z0(
        &self,
        z_t: &LatentVector,
        t: usize,
        condition: Option<&LatentVector>,
    ) -> Result<LatentVector, DiffusionError>;
}

/// Returns a stored ground-truth z_0; when a condition is supplied, returns
/// the conditioned target z_0 + condition.
#[derive(Debug, Clone)]
pub struct OracleDenoiser {
    pub target: LatentVector,
}

impl OracleDenoiser {
    pub fn new(target: LatentVector) -> Self {
        Self { target }
    }
}

impl Denoiser for OracleDenoiser {
    fn predict_z0(
        &self,
        z_t: &LatentVector,
        _t: usize,
        condition: Option<&LatentVector>,
    ) -> Result<LatentVector, DiffusionError> {
        z_t.check_dim(&self.target)?;
        match condition {
            None => Ok(self.target.clone()),
            Some(delta) => {
                self.target.check_dim(delta)?;
                Ok(LatentVector {
                    values: self
                        .target
                        .values
                        .iter()
                        .zip(&delta.values)
                        .map(|(a, b)| a + b)
                        .collect(),
                })
            }
        }
    }
}

/// The exact MMSE predictor sqrt(alpha_bar_t) * z_t for z_0 ~ N(0, I) per
/// element: z_t then has unit marginal variance and E[z_0 | z_t] reduces to
/// this scaling. Ignores the condition.
#[derive(Debug, Clone)]
pub struct GaussianPriorDenoiser {
    sched: NoiseSchedule,
}

impl GaussianPriorDenoiser {
    pub fn new(sched: NoiseSchedule) -> Self {
        Self { sched }
    }
}

impl Denoiser for GaussianPriorDenoiser {
    fn predict_z0(
        &self,
        z_t: &LatentVector,
        t: usize,
        _condition: Option<&LatentVector>,
    ) -> Result<LatentVector, DiffusionError> {
        self.sched.check_step(t)?;
        let scale = self.sched.alpha_bar(t).sqrt();
        Ok(LatentVector { values: z_t.values.iter().map(|v| scale * v).collect() })
    }
}

/// Runs the reverse process from step r down to 0. Each step predicts z_0
/// with the denoiser and takes the q-posterior mean; in stochastic mode,
/// Gaussian noise with the standard posterior variance
/// beta_t (1 - ab_{t-1}) / (1 - ab_t) is added (zero at t = 1).
pub fn denoise_from(
    z_r: &LatentVector,
    r: usize,
    den: &dyn Denoiser,
    sched: &NoiseSchedule,
    stochastic: bool,
    rng_seed: u64,
    condition: Option<&LatentVector>,
) -> Result<LatentVector, DiffusionError> {
    sched.check_step(r)?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut z = z_r.clone();
    for t in (1..=r).rev() {
        let z0_hat = den.predict_z0(&z, t, condition)?;
        z = posterior_mean(&z, &z0_hat, t, sched)?;
        if stochastic && t > 1 {
            let var = sched.beta(t) * (1.0 - sched.alpha_bar(t - 1)) / (1.0 - sched.alpha_bar(t));
            let sigma = var.sqrt();
            for v in &mut z.values {
                let n: f64 = rng.sample(StandardNormal);
                *v += sigma * n;
            }
        }
    }
    Ok(z)
}

/// Refines a dependent-frame latent from a reconstructed reference: applies a
/// short forward noising to step s, then reverse-denoises conditioned on the
/// adjustment metadata. The forward noise is drawn from `rng_seed`; the
/// stochastic reverse pass (if enabled) uses a seed derived from it.
pub fn conditional_refine(
    z0_ref: &LatentVector,
    metadata: &LatentVector,
    s: usize,
    den: &dyn Denoiser,
    sched: &NoiseSchedule,
    stochastic: bool,
    rng_seed: u64,
) -> Result<LatentVector, DiffusionError> {
    sched.check_step(s)?;
    z0_ref.check_dim(metadata)?;
    let noise = standard_normal(z0_ref.dim(), rng_seed);
    let z_s = forward_diffuse(z0_ref, s, &noise, sched)?;
    let reverse_seed = rng_seed ^ 0x9E37_79B9_7F4A_7C15;
    denoise_from(&z_s, s, den, sched, stochastic, reverse_seed, Some(metadata))
}

/// Reconstruction-quality proxy for a chunk denoised from the step matched to
/// the estimated SNR while the channel actually runs at the true SNR:
/// 1 - kappa * residual-MSE, clamped to [0, 1].
///
/// The residual MSE of the deterministic Gaussian-prior reverse pass from
/// step r is (1 - ab_r)^2 + ab_r^2 * max(ratio_r, sigma_true^2); with
/// accurate CSI this collapses to 1 - ab_r, so the proxy is monotone in SNR
/// and any estimation error (either direction) can only lower it.
pub fn reconstruction_quality(
    estimated_snr_db: f64,
    true_snr_db: f64,
    sched: &NoiseSchedule,
    kappa: f64,
) -> f64 {
    let r = match_step(estimated_snr_db, sched);
    let ab = sched.alpha_bar(r);
    let effective_noise = sched.noise_ratio(r).max(noise_variance_for_snr(true_snr_db));
    let mse = (1.0 - ab) * (1.0 - ab) + ab * ab * effective_noise;
    (1.0 - kappa * mse).clamp(0.0, 1.0)
}

//! Trace-driven simulator and algorithm library for adaptive-bitrate video
//! streaming over noisy wireless channels, with latent-diffusion semantic
//! transmission of key frames.
//!
//! The crate models the full decision loop of a streaming session:
//!
//! * [`trace`] — network throughput traces and exact download-time integration
//! * [`media`] — bitrate ladders, chunk manifests, GOP frame structure and
//!   semantic (latent + metadata) size accounting
//! * [`diffusion`] — DDPM-style noise schedules, the AWGN latent channel,
//!   CSI-matched denoising start-step selection and conditional refinement
//! * [`player`] — virtual player with buffer dynamics and rebuffer accounting
//! * [`abr`] — bitrate-selection policies (rate-based, buffer-based, BOLA,
//!   RobustMPC, offline-optimal DP, and the semantic-aware wrapper)
//! * [`qoe`] — per-chunk QoE scoring (bitrate utility, smoothness penalty,
//!   rebuffer penalty) and distribution statistics
//! * [`latency`] — per-chunk processing-latency accounting and end-to-end
//!   comparison tables
//! * [`cli`] — experiment runner: config parsing, single runs, batch
//!   cross-products and deterministic CSV/JSON artifacts
//!
//! Every stochastic operation takes an explicit seed and is reproducible
//! bit-exactly. See the `examples/` directory for one runnable example per
//! major capability.

pub mod abr;
pub mod cli;
pub mod diffusion;
pub mod latency;
pub mod media;
pub mod player;
pub mod qoe;
pub mod trace;

//! Loss-proportional importance sampling with unbiased reweighting.
//!
//! Example `i` is kept with probability
//! `p_i = clamp(s · n · ℓ̂⁺_i / Σ_j ℓ̂⁺_j, p_min, 1)` where `ℓ̂⁺ = max(ℓ̂, 0)` and
//! `s` is the target keep ratio; all-zero estimates fall back to `p_i = s`.
//! Kept examples carry weight `1/p_i`, so the weighted loss of the kept set is
//! an unbiased estimate of the full-batch loss.

use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    /// Expected fraction of each batch that is kept.
    pub target_ratio: f64,
    /// Iterations trained on full batches while the sketch fills.
    pub warmup_iters: u64,
    /// Floor on the accept probability; bounds weights by `1/p_min`.
    pub p_min: f64,
    /// First gap between sketch updates after warm-up.
    pub update_period: u64,
    /// Growth factor of successive update gaps (`1` keeps the period fixed).
    pub update_decay: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            target_ratio: 0.5,
            warmup_iters: 50,
            p_min: 0.1,
            update_period: 1,
            update_decay: 1.5,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.target_ratio > 0.0 && self.target_ratio <= 1.0) {
            return Err(Error::InvalidParam("target_ratio must be in (0, 1]"));
        }
        if !(self.p_min > 0.0 && self.p_min <= 1.0) {
            return Err(Error::InvalidParam("p_min must be in (0, 1]"));
        }
        if self.target_ratio < self.p_min {
            return Err(Error::InvalidParam("target_ratio must be >= p_min"));
        }
        if self.update_period == 0 {
            return Err(Error::InvalidParam("update_period must be >= 1"));
        }
        if !(self.update_decay >= 1.0 && self.update_decay.is_finite()) {
            return Err(Error::InvalidParam("update_decay must be >= 1"));
        }
        Ok(())
    }

    /// Whether sampling can never drop an example.
    pub fn keeps_everything(&self) -> bool {
        self.p_min >= 1.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplingPlan {
    probabilities: Vec<f64>,
    accepted: Vec<bool>,
    weights: Vec<f64>,
}

impl SamplingPlan {
    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn accepted(&self) -> &[bool] {
        &self.accepted
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn n_accepted(&self) -> usize {
        self.accepted.iter().filter(|&&a| a).count()
    }

    pub fn accepted_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.accepted.iter().enumerate().filter(|(_, &a)| a).map(|(i, _)| i)
    }
}

/// Accept probabilities for a batch of estimated losses.
pub fn accept_probabilities(est_losses: &[f64], cfg: &SamplerConfig) -> Result<Vec<f64>> {
    if est_losses.is_empty() {
        return Err(Error::InvalidParam("cannot sample an empty batch"));
    }
    if let Some(index) = est_losses.iter().position(|l| !l.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let total: f64 = est_losses.iter().map(|l| l.max(0.0)).sum();
    if total <= 0.0 {
        return Ok(alloc::vec![cfg.target_ratio.max(cfg.p_min); est_losses.len()]);
    }
    let scale = cfg.target_ratio * est_losses.len() as f64 / total;
    Ok(est_losses
        .iter()
        .map(|l| (scale * l.max(0.0)).clamp(cfg.p_min, 1.0))
        .collect())
}

/// Draws one accept decision per example (one uniform draw each, always).
pub fn make_plan<R: Rng + ?Sized>(
    est_losses: &[f64],
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<SamplingPlan> {
    cfg.validate()?;
    let probabilities = accept_probabilities(est_losses, cfg)?;
    let accepted: Vec<bool> = probabilities.iter().map(|&p| rng.random::<f64>() < p).collect();
    let weights = probabilities
        .iter()
        .zip(&accepted)
        .map(|(&p, &a)| if a { 1.0 / p } else { 0.0 })
        .collect();
    Ok(SamplingPlan { probabilities, accepted, weights })
}

/// `Σ_i w_i · ℓ_i`; rejected examples contribute nothing.
pub fn debiased_batch_loss(plan: &SamplingPlan, true_losses: &[f64]) -> Result<f64> {
    if plan.len() != true_losses.len() {
        return Err(Error::LengthMismatch { expected: plan.len(), got: true_losses.len() });
    }
    Ok(plan
        .weights
        .iter()
        .zip(&plan.accepted)
        .zip(true_losses)
        .filter(|((_, &a), _)| a)
        .map(|((w, _), l)| w * l)
        .sum())
}

/// Whether iteration `iter` (0-based) writes to the sketch.
///
/// Every warm-up iteration does. Afterwards the update rounds are
/// `u_0 = warmup_iters` and `u_{k+1} = u_k + g_k` with `g_0 = update_period`
/// and `g_{k+1} = ceil(g_k · update_decay)`.
pub fn should_update_sketch(iter: u64, cfg: &SamplerConfig) -> bool {
    if iter < cfg.warmup_iters {
        return true;
    }
    let offset = iter - cfg.warmup_iters;
    if cfg.update_decay <= 1.0 {
        return offset.is_multiple_of(cfg.update_period.max(1));
    }
    UpdateSchedule::new(cfg).take_while(|&u| u <= iter).any(|u| u == iter)
}

/// Post-warm-up update rounds in increasing order.
#[derive(Debug, Clone)]
pub struct UpdateSchedule {
    next: Option<u64>,
    gap: u64,
    decay: f64,
}

impl UpdateSchedule {
    pub fn new(cfg: &SamplerConfig) -> Self {
        UpdateSchedule {
            next: Some(cfg.warmup_iters),
            gap: cfg.update_period.max(1),
            decay: cfg.update_decay,
        }
    }
}

impl Iterator for UpdateSchedule {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        let current = self.next?;
        self.next = current.checked_add(self.gap);
        if self.decay > 1.0 {
            let grown = libm::ceil(self.gap as f64 * self.decay);
            self.gap = if grown >= u64::MAX as f64 { u64::MAX } else { grown as u64 };
        }
        Some(current)
    }
}

//! Closed-form PS design for a DF-SWIPT chain.
//!
//! Both optimization problems reduce to per-hop weights
//! `w_k = c_k * beta_k / Gamma_k`, where `c_k` is `snr_threshold * id_noise`
//! for source-power minimization and `id_noise` for max-min rate. With
//! `W = sum_k w_k`:
//!
//! * the minimum source power is `W` (thresholds folded into the weights);
//! * the best common SNR at source power `E_0` is `E_0 / W`;
//! * the optimal split leaves hop `k` the ID share
//!   `A_{k-1} (1 - rho_k) = w_k / W`, i.e. `rho_k = tail_{k+1} / tail_k`
//!   with `tail_k = sum_{j >= k} w_j`.
//!
//! Every constraint is then met with equality, which is what makes the
//! design optimal: the source pays for exactly what each hop needs.

use serde::{Deserialize, Serialize};

use crate::channel::ChannelState;
use crate::error::{Error, Result};
use crate::model::{NetworkConfig, NodeParams, PsAllocation};
use crate::units::rate_from_snr;

/// Which hop SNR expression to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SnrModel {
    /// Antenna noise neglected against decoder noise.
    Approximate,
    /// `E_{k-1} |h_k|^2 (1 - rho_k) / ((1 - rho_k) delta_k^2 + sigma_k^2)`.
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerMinSolution {
    /// Minimum source power in watts.
    pub e0_star: f64,
    pub allocation: PsAllocation,
    pub hop_snrs: Vec<f64>,
    /// Per-hop `SNR_k / threshold_k - 1` (absolute difference when the
    /// threshold is zero). Zero at the optimum up to rounding.
    pub slacks: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateMaxSolution {
    /// Common SNR reached by every hop.
    pub gamma_hat_star: f64,
    /// `log2(1 + gamma_hat_star)` in bits/s/Hz.
    pub rate_star: f64,
    pub allocation: PsAllocation,
    pub hop_snrs: Vec<f64>,
}

/// Fixed-ratio reference design evaluated on the same channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedBaseline {
    pub allocation: PsAllocation,
    /// Smallest source power meeting every threshold with the fixed ratios.
    pub min_power: f64,
    /// Bottleneck SNR at the configured source power.
    pub min_snr: f64,
    /// Bottleneck rate at the configured source power.
    pub min_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Duality {
    /// Source power budget to the common SNR it supports.
    PowerToSnr,
    /// Target common SNR to the source power it requires.
    SnrToPower,
}

/// Harvested power `E_k = E_0 Gamma_k A_k` at each relay `k = 1..K`.
pub fn harvested_energy(e0: f64, channel: &ChannelState, alloc: &PsAllocation) -> Result<Vec<f64>> {
    alloc.check_relays(channel.relays())?;
    Ok((1..=channel.relays())
        .map(|k| e0 * channel.cumulative(k) * alloc.cumulative(k))
        .collect())
}

/// SNR at the receiver of 1-based hop `k`.
pub fn hop_snr(
    e0: f64,
    cfg: &NetworkConfig,
    channel: &ChannelState,
    alloc: &PsAllocation,
    k: usize,
    model: SnrModel,
) -> Result<f64> {
    cfg.check_channel(channel)?;
    alloc.check_relays(cfg.relays())?;
    let hops = channel.hops();
    if k == 0 || k > hops {
        return Err(Error::HopOutOfRange {
            index: k,
            max: hops,
        });
    }
    Ok(snr_unchecked(e0, cfg.node(k), channel, alloc, k, model))
}

fn snr_unchecked(
    e0: f64,
    node: &NodeParams,
    channel: &ChannelState,
    alloc: &PsAllocation,
    k: usize,
    model: SnrModel,
) -> f64 {
    let share = alloc.id_share(k);
    match model {
        SnrModel::Approximate => {
            e0 * channel.cumulative(k) / (node.id_noise * node.beta)
                * alloc.cumulative(k - 1)
                * share
        }
        SnrModel::Exact => {
            let incoming = e0 * channel.cumulative(k - 1) * alloc.cumulative(k - 1);
            incoming * channel.hop_gain(k) * share / (share * node.antenna_noise + node.id_noise)
        }
    }
}

/// SNR at every hop, `k = 1..K + 1`.
pub fn hop_snrs(
    e0: f64,
    cfg: &NetworkConfig,
    channel: &ChannelState,
    alloc: &PsAllocation,
    model: SnrModel,
) -> Result<Vec<f64>> {
    cfg.check_channel(channel)?;
    alloc.check_relays(cfg.relays())?;
    Ok((1..=channel.hops())
        .map(|k| snr_unchecked(e0, cfg.node(k), channel, alloc, k, model))
        .collect())
}

pub fn bottleneck(snrs: &[f64]) -> f64 {
    snrs.iter().copied().fold(f64::INFINITY, f64::min)
}

fn weights_with(
    cfg: &NetworkConfig,
    channel: &ChannelState,
    scale: impl Fn(&NodeParams) -> f64,
) -> Result<Vec<f64>> {
    cfg.check_channel(channel)?;
    channel.ensure_nondegenerate()?;
    Ok((1..=channel.hops())
        .map(|k| {
            let n = cfg.node(k);
            scale(n) * n.beta / channel.cumulative(k)
        })
        .collect())
}

/// `threshold_k * sigma_k^2 * beta_k / Gamma_k` for every hop.
pub fn threshold_weights(cfg: &NetworkConfig, channel: &ChannelState) -> Result<Vec<f64>> {
    weights_with(cfg, channel, |n| n.snr_threshold * n.id_noise)
}

/// `sigma_k^2 * beta_k / Gamma_k` for every hop.
pub fn noise_weights(cfg: &NetworkConfig, channel: &ChannelState) -> Result<Vec<f64>> {
    weights_with(cfg, channel, |n| n.id_noise)
}

/// The split that hands hop `k` exactly the fraction `w_k / W` of the source
/// power for decoding. Hops with zero weight (and everything after them, if
/// all remaining weights vanish) pass all power on: `rho_k = 1`.
pub fn allocation_from_weights(weights: &[f64]) -> PsAllocation {
    let hops = weights.len();
    let relays = hops.saturating_sub(1);
    let mut tails = vec![0.0; hops + 1];
    for k in (0..hops).rev() {
        tails[k] = tails[k + 1] + weights[k];
    }
    let mut rho = Vec::with_capacity(relays);
    let mut share = Vec::with_capacity(relays);
    for k in 0..relays {
        if tails[k] > 0.0 {
            rho.push(tails[k + 1] / tails[k]);
            share.push(weights[k] / tails[k]);
        } else {
            rho.push(1.0);
            share.push(0.0);
        }
    }
    PsAllocation::from_split(rho, share)
}

fn total(weights: &[f64]) -> f64 {
    // Summed from the far end: the largest weights usually sit there.
    weights.iter().rev().sum()
}

/// Minimum source power meeting every node's SNR threshold.
pub fn min_source_power(cfg: &NetworkConfig, channel: &ChannelState) -> Result<PowerMinSolution> {
    let weights = threshold_weights(cfg, channel)?;
    let e0_star = total(&weights);
    let allocation = allocation_from_weights(&weights);
    let hop_snrs = hop_snrs(e0_star, cfg, channel, &allocation, SnrModel::Approximate)?;
    let slacks = hop_snrs
        .iter()
        .zip(cfg.nodes())
        .map(|(snr, n)| {
            if n.snr_threshold > 0.0 {
                snr / n.snr_threshold - 1.0
            } else {
                *snr
            }
        })
        .collect();
    Ok(PowerMinSolution {
        e0_star,
        allocation,
        hop_snrs,
        slacks,
    })
}

/// Max-min rate at the configured source power.
pub fn max_min_rate(cfg: &NetworkConfig, channel: &ChannelState) -> Result<RateMaxSolution> {
    let e0 = cfg.source_power();
    if !(e0 > 0.0) {
        return Err(Error::invalid(
            "source power",
            format!("{e0} must be positive"),
        ));
    }
    let weights = noise_weights(cfg, channel)?;
    let gamma_hat_star = e0 / total(&weights);
    let allocation = allocation_from_weights(&weights);
    let hop_snrs = hop_snrs(e0, cfg, channel, &allocation, SnrModel::Approximate)?;
    Ok(RateMaxSolution {
        gamma_hat_star,
        rate_star: rate_from_snr(gamma_hat_star),
        allocation,
        hop_snrs,
    })
}

/// `E_0 / gamma_hat = sum_k sigma_k^2 beta_k / Gamma_k`, applied in either
/// direction.
pub fn duality_exchange(
    value: f64,
    direction: Duality,
    cfg: &NetworkConfig,
    channel: &ChannelState,
) -> Result<f64> {
    if !(value > 0.0 && value.is_finite()) {
        return Err(Error::invalid(
            "duality input",
            format!("{value} must be positive"),
        ));
    }
    let ratio = total(&noise_weights(cfg, channel)?);
    Ok(match direction {
        Duality::PowerToSnr => value / ratio,
        Duality::SnrToPower => value * ratio,
    })
}

/// Every relay splits with the same `rho_fixed`; the destination decodes
/// everything it receives.
pub fn fixed_ps_baseline(
    cfg: &NetworkConfig,
    channel: &ChannelState,
    rho_fixed: f64,
) -> Result<FixedBaseline> {
    if !(rho_fixed > 0.0 && rho_fixed < 1.0) {
        return Err(Error::invalid(
            "fixed PS ratio",
            format!("{rho_fixed} must lie in (0, 1)"),
        ));
    }
    cfg.check_channel(channel)?;
    channel.ensure_nondegenerate()?;
    let allocation = PsAllocation::uniform(cfg.relays(), rho_fixed)?;
    let min_power = (1..=channel.hops())
        .map(|k| {
            let n = cfg.node(k);
            n.snr_threshold * n.id_noise * n.beta
                / (channel.cumulative(k) * allocation.cumulative(k - 1) * allocation.id_share(k))
        })
        .fold(0.0, f64::max);
    let snrs = hop_snrs(
        cfg.source_power(),
        cfg,
        channel,
        &allocation,
        SnrModel::Approximate,
    )?;
    let min_snr = bottleneck(&snrs);
    Ok(FixedBaseline {
        allocation,
        min_power,
        min_snr,
        min_rate: rate_from_snr(min_snr),
    })
}

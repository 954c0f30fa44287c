//! Centralized and distributed dissemination of PS ratios along the chain.
//!
//! Centralized: the source computes every ratio and ships the remaining
//! `(index, ratio)` list hop by hop. Distributed: the source computes only the
//! first ratio and a scalar `psi`; each relay derives its successor's ratio
//! from the inbound `(rho_k, psi_k)`, its own efficiency and the gain of the
//! hop it transmits on:
//!
//! ```text
//! psi_{k+1} = psi_k / (rho_k * beta_k * |h_{k+1}|^2)
//! rho_{k+1} = 1 - c_{k+1} * psi_{k+1}
//! ```
//!
//! with `psi_k = (beta_k / Gamma_k) / (W * A_{k-1})` and `c_k` the node's
//! weight scale (`snr_threshold * sigma^2` for power minimization, `sigma^2`
//! for max-min rate). Bit counts follow the analytic budgets; messages are
//! in-process records, not encoded frames.

use serde::{Deserialize, Serialize};

use crate::channel::ChannelState;
use crate::error::{Error, Result};
use crate::model::{NetworkConfig, NodeParams, PsAllocation};
use crate::solver::{allocation_from_weights, noise_weights, threshold_weights};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Objective {
    MinSourcePower,
    MaxMinRate,
}

impl Objective {
    fn weight_scale(self, node: &NodeParams) -> f64 {
        match self {
            Objective::MinSourcePower => node.snr_threshold * node.id_noise,
            Objective::MaxMinRate => node.id_noise,
        }
    }

    fn weights(self, cfg: &NetworkConfig, channel: &ChannelState) -> Result<Vec<f64>> {
        match self {
            Objective::MinSourcePower => threshold_weights(cfg, channel),
            Objective::MaxMinRate => noise_weights(cfg, channel),
        }
    }
}

/// Bits per payload element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitBudget {
    /// Information payload `F`.
    pub info_bits: u64,
    /// One real number `B`.
    pub real_bits: u64,
    /// Per unit of `log2` index width, `i_0`.
    pub index_bits: u64,
}

impl BitBudget {
    pub fn new(info_bits: u64, real_bits: u64, index_bits: u64) -> Result<Self> {
        if info_bits == 0 || real_bits == 0 || index_bits == 0 {
            return Err(Error::invalid(
                "bit budget",
                "all bit widths must be positive",
            ));
        }
        Ok(BitBudget {
            info_bits,
            real_bits,
            index_bits,
        })
    }

    /// Source in the centralized scheme: `K (i_0 log2 K + B) + F`.
    pub fn centralized_source(&self, relays: u64) -> u64 {
        relays * (self.index_bits * ceil_log2(relays) + self.real_bits) + self.info_bits
    }

    /// Relay `k` in the centralized scheme: `(K - k) {i_0 log2(K - k) + 2B} + F`.
    pub fn centralized_relay(&self, relays: u64, k: u64) -> u64 {
        let rest = relays - k;
        rest * (self.index_bits * ceil_log2(rest) + 2 * self.real_bits) + self.info_bits
    }

    /// Any node in the distributed scheme: `2B + F`.
    pub fn distributed_node(&self) -> u64 {
        2 * self.real_bits + self.info_bits
    }
}

/// `ceil(log2 n)`, with `log2 0` and `log2 1` both taken as 0.
pub fn ceil_log2(n: u64) -> u64 {
    if n <= 1 {
        0
    } else {
        u64::from(64 - (n - 1).leading_zeros())
    }
}

/// Node 0 is the source, node `k` relay `k`, node `K + 1` the destination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Payload {
    /// Ratios for relays `first..=last`, each with its index.
    RatioList { first: usize, last: usize },
    /// `rho_k` and `psi_k` for the next relay.
    RatioAndPsi { rho: f64, psi: f64 },
    /// Decoded information only.
    InfoOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub sender: usize,
    pub receiver: usize,
    pub payload: Payload,
    pub bits: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolTrace {
    /// Transmitted bits of nodes `0..=K` (the destination sends nothing).
    pub transmitted_bits: Vec<u64>,
    /// Arithmetic operations of nodes `0..=K`, in units of one
    /// constant-cost ratio evaluation.
    pub arithmetic_ops: Vec<u64>,
    pub messages: Vec<Message>,
    pub allocation: PsAllocation,
}

impl ProtocolTrace {
    pub fn max_node_bits(&self) -> u64 {
        self.transmitted_bits.iter().copied().max().unwrap_or(0)
    }

    pub fn total_bits(&self) -> u64 {
        self.transmitted_bits.iter().sum()
    }

    pub fn total_ops(&self) -> u64 {
        self.arithmetic_ops.iter().sum()
    }
}

pub fn run_centralized(
    cfg: &NetworkConfig,
    channel: &ChannelState,
    budget: &BitBudget,
    objective: Objective,
) -> Result<ProtocolTrace> {
    let relays = cfg.relays();
    let allocation = allocation_from_weights(&objective.weights(cfg, channel)?);
    let k_total = relays as u64;

    let mut transmitted_bits = Vec::with_capacity(relays + 1);
    let mut messages = Vec::with_capacity(relays + 1);
    let source_bits = budget.centralized_source(k_total);
    transmitted_bits.push(source_bits);
    messages.push(Message {
        sender: 0,
        receiver: 1,
        payload: if relays > 0 {
            Payload::RatioList {
                first: 1,
                last: relays,
            }
        } else {
            Payload::InfoOnly
        },
        bits: source_bits,
    });
    for k in 1..=relays {
        let bits = budget.centralized_relay(k_total, k as u64);
        transmitted_bits.push(bits);
        messages.push(Message {
            sender: k,
            receiver: k + 1,
            payload: if k < relays {
                Payload::RatioList {
                    first: k + 1,
                    last: relays,
                }
            } else {
                Payload::InfoOnly
            },
            bits,
        });
    }

    let mut arithmetic_ops = vec![0; relays + 1];
    // Source power (or common SNR) plus K ratios.
    arithmetic_ops[0] = k_total + 1;

    Ok(ProtocolTrace {
        transmitted_bits,
        arithmetic_ops,
        messages,
        allocation,
    })
}

/// What relay `k` may read when computing its successor's ratio.
pub trait LocalCsi {
    /// Own energy conversion efficiency `beta_k`.
    fn beta(&self) -> f64;
    /// Power gain `|h_{k+1}|^2` of the hop this relay transmits on.
    fn next_hop_gain(&self) -> f64;
    /// Weight scale `c_{k+1}` of the node it transmits to.
    fn next_weight_scale(&self) -> f64;
}

/// Inbound state of a relay in the distributed scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Handoff {
    pub rho: f64,
    pub psi: f64,
}

/// One relay's step: from `(rho_k, psi_k)` and local CSI to
/// `(rho_{k+1}, psi_{k+1})`.
pub fn relay_step<L: LocalCsi + ?Sized>(
    relay: usize,
    inbound: Handoff,
    local: &L,
) -> Result<Handoff> {
    if inbound.rho == 0.0 {
        return Err(Error::ZeroRatio { relay });
    }
    let psi = inbound.psi / (inbound.rho * local.beta() * local.next_hop_gain());
    Ok(Handoff {
        rho: 1.0 - local.next_weight_scale() * psi,
        psi,
    })
}

struct RelayView<'a> {
    node: &'a NodeParams,
    next: &'a NodeParams,
    next_gain: f64,
    objective: Objective,
}

impl LocalCsi for RelayView<'_> {
    fn beta(&self) -> f64 {
        self.node.beta
    }

    fn next_hop_gain(&self) -> f64 {
        self.next_gain
    }

    fn next_weight_scale(&self) -> f64 {
        self.objective.weight_scale(self.next)
    }
}

pub fn run_distributed(
    cfg: &NetworkConfig,
    channel: &ChannelState,
    budget: &BitBudget,
    objective: Objective,
) -> Result<ProtocolTrace> {
    run_distributed_with(cfg, channel, budget, objective, |k, h, l| {
        relay_step(k, h, l)
    })
}

/// Distributed run with a caller-supplied relay step, for instrumentation.
pub fn run_distributed_with(
    cfg: &NetworkConfig,
    channel: &ChannelState,
    budget: &BitBudget,
    objective: Objective,
    mut step: impl FnMut(usize, Handoff, &dyn LocalCsi) -> Result<Handoff>,
) -> Result<ProtocolTrace> {
    let relays = cfg.relays();
    let weights = objective.weights(cfg, channel)?;
    let total: f64 = weights.iter().rev().sum();

    let node_bits = budget.distributed_node();
    let transmitted_bits = vec![node_bits; relays + 1];
    // The source and every relay but the last evaluate one ratio each.
    let arithmetic_ops: Vec<u64> = (0..=relays).map(|k| u64::from(k < relays.max(1))).collect();
    let mut messages = Vec::with_capacity(relays + 1);
    let mut rho = Vec::with_capacity(relays);

    if relays == 0 {
        messages.push(Message {
            sender: 0,
            receiver: 1,
            payload: Payload::InfoOnly,
            bits: node_bits,
        });
    } else {
        // Source: psi_1 = (beta_1 / Gamma_1) / W.
        let first = cfg.node(1);
        let psi = (first.beta / channel.cumulative(1)) / total;
        let mut handoff = Handoff {
            rho: 1.0 - objective.weight_scale(first) * psi,
            psi,
        };
        messages.push(Message {
            sender: 0,
            receiver: 1,
            payload: Payload::RatioAndPsi {
                rho: handoff.rho,
                psi: handoff.psi,
            },
            bits: node_bits,
        });
        rho.push(handoff.rho);
        for k in 1..=relays {
            if k < relays {
                let view = RelayView {
                    node: cfg.node(k),
                    next: cfg.node(k + 1),
                    next_gain: channel.hop_gain(k + 1),
                    objective,
                };
                handoff = step(k, handoff, &view)?;
                rho.push(handoff.rho);
                messages.push(Message {
                    sender: k,
                    receiver: k + 1,
                    payload: Payload::RatioAndPsi {
                        rho: handoff.rho,
                        psi: handoff.psi,
                    },
                    bits: node_bits,
                });
            } else {
                messages.push(Message {
                    sender: k,
                    receiver: k + 1,
                    payload: Payload::InfoOnly,
                    bits: node_bits,
                });
            }
        }
    }

    Ok(ProtocolTrace {
        transmitted_bits,
        arithmetic_ops,
        messages,
        allocation: PsAllocation::from_ratios(rho)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub max_node_bits: u64,
    pub source_bits: u64,
    pub total_bits: u64,
    pub total_ops: u64,
}

impl From<&ProtocolTrace> for MethodSummary {
    fn from(t: &ProtocolTrace) -> Self {
        MethodSummary {
            max_node_bits: t.max_node_bits(),
            source_bits: t.transmitted_bits[0],
            total_bits: t.total_bits(),
            total_ops: t.total_ops(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodComparison {
    pub centralized: ProtocolTrace,
    pub distributed: ProtocolTrace,
    pub centralized_summary: MethodSummary,
    pub distributed_summary: MethodSummary,
    /// Largest elementwise gap between the two allocations.
    pub max_ratio_gap: f64,
}

pub fn compare_methods(
    cfg: &NetworkConfig,
    channel: &ChannelState,
    budget: &BitBudget,
    objective: Objective,
) -> Result<MethodComparison> {
    let centralized = run_centralized(cfg, channel, budget, objective)?;
    let distributed = run_distributed(cfg, channel, budget, objective)?;
    let max_ratio_gap = centralized
        .allocation
        .ratios()
        .iter()
        .zip(distributed.allocation.ratios())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(MethodComparison {
        centralized_summary: (&centralized).into(),
        distributed_summary: (&distributed).into(),
        centralized,
        distributed,
        max_ratio_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::HopGeometry;

    fn unit_chain(betas: &[f64]) -> (NetworkConfig, ChannelState) {
        let nodes = betas
            .iter()
            .map(|&beta| NodeParams {
                beta,
                id_noise: 1.0,
                antenna_noise: 0.0,
                snr_threshold: 1.0,
            })
            .collect::<Vec<_>>();
        let hop = HopGeometry::new(1.0, 1.0, 3.0, 1.0).unwrap();
        let cfg = NetworkConfig::new(nodes, vec![hop; betas.len()], 7.0).unwrap();
        let ch = cfg.channel(&vec![1.0; betas.len()]).unwrap();
        (cfg, ch)
    }

    fn table_budget() -> BitBudget {
        BitBudget::new(1024, 32, 16).unwrap()
    }

    #[test]
    fn ceil_log2_values() {
        let expect = [
            (0, 0),
            (1, 0),
            (2, 1),
            (3, 2),
            (4, 2),
            (5, 3),
            (8, 3),
            (9, 4),
            (64, 6),
        ];
        for (n, l) in expect {
            assert_eq!(ceil_log2(n), l, "n = {n}");
        }
    }

    #[test]
    fn worked_bit_counts() {
        let b = table_budget();
        assert_eq!(b.centralized_source(4), 1280);
        assert_eq!(b.centralized_relay(4, 2), 1184);
        assert_eq!(b.distributed_node(), 1088);
        assert_eq!(b.centralized_source(0), 1024);
        assert_eq!(b.centralized_source(1), 1056);
        assert_eq!(b.centralized_relay(4, 4), 1024);
    }

    #[test]
    fn distributed_k2_handoffs() {
        let (cfg, ch) = unit_chain(&[0.5, 0.5, 1.0]);
        let t = run_distributed(&cfg, &ch, &table_budget(), Objective::MaxMinRate).unwrap();
        match t.messages[0].payload {
            Payload::RatioAndPsi { rho, psi } => {
                assert!((psi - 1.0 / 7.0).abs() < 1e-15);
                assert!((rho - 6.0 / 7.0).abs() < 1e-15);
            }
            ref p => panic!("unexpected payload {p:?}"),
        }
        match t.messages[1].payload {
            Payload::RatioAndPsi { rho, psi } => {
                assert!((psi - 1.0 / 3.0).abs() < 1e-15);
                assert!((rho - 2.0 / 3.0).abs() < 1e-15);
            }
            ref p => panic!("unexpected payload {p:?}"),
        }
        assert!(t.transmitted_bits.iter().all(|b| *b == 1088));
        assert_eq!(t.arithmetic_ops, vec![1, 1, 0]);
    }

    #[test]
    fn centralized_k0_sends_info_only() {
        let (cfg, ch) = unit_chain(&[1.0]);
        let t = run_centralized(&cfg, &ch, &table_budget(), Objective::MaxMinRate).unwrap();
        assert_eq!(t.transmitted_bits, vec![1024]);
        assert_eq!(t.messages.len(), 1);
        assert_eq!(t.messages[0].payload, Payload::InfoOnly);
        assert!(t.allocation.ratios().is_empty());
    }

    #[test]
    fn methods_agree_and_compare() {
        let (cfg, ch) = unit_chain(&[0.5, 0.5, 0.5, 0.5, 1.0]);
        let c = compare_methods(&cfg, &ch, &table_budget(), Objective::MaxMinRate).unwrap();
        assert!(c.max_ratio_gap <= 1e-12);
        assert_eq!(c.centralized_summary.source_bits, 1280);
        assert_eq!(c.distributed_summary.source_bits, 1088);
        assert_eq!(c.centralized.transmitted_bits[2], 1184);
        assert_eq!(c.centralized.arithmetic_ops, vec![5, 0, 0, 0, 0]);

        let (cfg, ch) = unit_chain(&[0.5, 1.0]);
        let c = compare_methods(&cfg, &ch, &table_budget(), Objective::MaxMinRate).unwrap();
        assert_eq!(c.centralized_summary.source_bits, 1056);
        assert_eq!(c.distributed_summary.source_bits, 1088);
        assert!(c.max_ratio_gap <= 1e-12);
    }

    #[test]
    fn zero_ratio_stalls_the_chain() {
        let local = RelayView {
            node: &NodeParams {
                beta: 0.5,
                id_noise: 1.0,
                antenna_noise: 0.0,
                snr_threshold: 1.0,
            },
            next: &NodeParams {
                beta: 1.0,
                id_noise: 1.0,
                antenna_noise: 0.0,
                snr_threshold: 1.0,
            },
            next_gain: 1.0,
            objective: Objective::MaxMinRate,
        };
        let err = relay_step(3, Handoff { rho: 0.0, psi: 0.5 }, &local).unwrap_err();
        assert_eq!(err, Error::ZeroRatio { relay: 3 });
    }

    #[test]
    fn zero_bit_budget_rejected() {
        assert!(BitBudget::new(0, 32, 16).is_err());
    }
}

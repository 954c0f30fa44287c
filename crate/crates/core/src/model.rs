//! Network description and power-splitting allocations.

use serde::{Deserialize, Serialize};

use crate::channel::{build_channel_state, ChannelState, HopGeometry};
use crate::error::{Error, Result};

/// Radio parameters of one receiving node (a relay or the destination).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeParams {
    /// Energy conversion efficiency, in (0, 1].
    pub beta: f64,
    /// Information-decoder noise power in watts.
    pub id_noise: f64,
    /// Antenna noise power in watts.
    pub antenna_noise: f64,
    /// Linear SNR the node must reach.
    pub snr_threshold: f64,
}

impl NodeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::invalid(
                "beta",
                format!("{} must lie in (0, 1]", self.beta),
            ));
        }
        if !(self.id_noise > 0.0 && self.id_noise.is_finite()) {
            return Err(Error::invalid(
                "decoder noise",
                format!("{} must be positive", self.id_noise),
            ));
        }
        if !(self.antenna_noise >= 0.0 && self.antenna_noise.is_finite()) {
            return Err(Error::invalid(
                "antenna noise",
                format!("{} must be nonnegative", self.antenna_noise),
            ));
        }
        if !(self.snr_threshold >= 0.0 && self.snr_threshold.is_finite()) {
            return Err(Error::invalid(
                "SNR threshold",
                format!("{} must be nonnegative", self.snr_threshold),
            ));
        }
        Ok(())
    }
}

/// A source, `K` relays and a destination. `nodes[k - 1]` and `hops[k - 1]`
/// describe the receiver of hop `k` and the hop itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    nodes: Vec<NodeParams>,
    hops: Vec<HopGeometry>,
    /// Source transmit power in watts. Only the rate problem reads it.
    source_power: f64,
}

impl NetworkConfig {
    /// Validates every entry. The destination's efficiency is set to 1 since
    /// it only decodes.
    pub fn new(
        mut nodes: Vec<NodeParams>,
        hops: Vec<HopGeometry>,
        source_power: f64,
    ) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::invalid(
                "network",
                "at least the destination is required",
            ));
        }
        if hops.len() != nodes.len() {
            return Err(Error::LengthMismatch {
                what: "hops",
                expected: nodes.len(),
                got: hops.len(),
            });
        }
        if let Some(dest) = nodes.last_mut() {
            dest.beta = 1.0;
        }
        for n in &nodes {
            n.validate()?;
        }
        for h in &hops {
            h.validate()?;
        }
        if !(source_power >= 0.0 && source_power.is_finite()) {
            return Err(Error::invalid(
                "source power",
                format!("{source_power} must be nonnegative"),
            ));
        }
        Ok(NetworkConfig {
            nodes,
            hops,
            source_power,
        })
    }

    /// Identical relays and hops; `K + 1` copies of each.
    pub fn homogeneous(
        relays: usize,
        node: NodeParams,
        hop: HopGeometry,
        source_power: f64,
    ) -> Result<Self> {
        NetworkConfig::new(vec![node; relays + 1], vec![hop; relays + 1], source_power)
    }

    pub fn relays(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn nodes(&self) -> &[NodeParams] {
        &self.nodes
    }

    pub fn hops(&self) -> &[HopGeometry] {
        &self.hops
    }

    /// Receiver of 1-based hop `k`.
    pub fn node(&self, k: usize) -> &NodeParams {
        &self.nodes[k - 1]
    }

    pub fn source_power(&self) -> f64 {
        self.source_power
    }

    pub fn with_source_power(mut self, watts: f64) -> Result<Self> {
        if !(watts >= 0.0 && watts.is_finite()) {
            return Err(Error::invalid(
                "source power",
                format!("{watts} must be nonnegative"),
            ));
        }
        self.source_power = watts;
        Ok(self)
    }

    /// Replace every node's SNR threshold.
    pub fn with_uniform_threshold(mut self, snr: f64) -> Result<Self> {
        for n in &mut self.nodes {
            n.snr_threshold = snr;
            n.validate()?;
        }
        Ok(self)
    }

    pub fn betas(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.beta).collect()
    }

    /// Channel state for one set of small-scale power gains.
    pub fn channel(&self, small_scale: &[f64]) -> Result<ChannelState> {
        build_channel_state(&self.hops, &self.betas(), small_scale)
    }

    /// Channel state from total per-hop power gains, bypassing the geometry.
    pub fn channel_from_hop_gains(&self, hop_gains: Vec<f64>) -> Result<ChannelState> {
        ChannelState::from_hop_gains(hop_gains, &self.betas())
    }

    pub(crate) fn check_channel(&self, channel: &ChannelState) -> Result<()> {
        if channel.hops() != self.nodes.len() {
            return Err(Error::LengthMismatch {
                what: "channel hops",
                expected: self.nodes.len(),
                got: channel.hops(),
            });
        }
        Ok(())
    }
}

/// PS ratios `rho_1..rho_K` of the relays and their running products
/// `A_k = rho_1 * ... * rho_k` (`A_0 = 1`, `A_{K+1} = 0`).
///
/// The information-decoding share `1 - rho_k` is stored alongside `rho_k`:
/// optimal ratios sit very close to 1, where recomputing `1 - rho_k` from a
/// rounded `rho_k` throws away most of its significant digits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsAllocation {
    rho: Vec<f64>,
    id_share: Vec<f64>,
    cumulative: Vec<f64>,
}

impl PsAllocation {
    pub fn from_ratios(rho: Vec<f64>) -> Result<Self> {
        if let Some(r) = rho.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(Error::invalid(
                "PS ratio",
                format!("{r} must lie in [0, 1]"),
            ));
        }
        let id_share = rho.iter().map(|r| 1.0 - r).collect();
        Ok(Self::assemble(rho, id_share))
    }

    /// The same ratio at every relay.
    pub fn uniform(relays: usize, rho: f64) -> Result<Self> {
        Self::from_ratios(vec![rho; relays])
    }

    /// Ratios given as `rho_k` together with an accurately computed `1 - rho_k`.
    pub(crate) fn from_split(rho: Vec<f64>, id_share: Vec<f64>) -> Self {
        debug_assert_eq!(rho.len(), id_share.len());
        Self::assemble(rho, id_share)
    }

    fn assemble(rho: Vec<f64>, id_share: Vec<f64>) -> Self {
        let mut cumulative = Vec::with_capacity(rho.len() + 1);
        let mut acc = 1.0;
        cumulative.push(acc);
        for r in &rho {
            acc *= r;
            cumulative.push(acc);
        }
        PsAllocation {
            rho,
            id_share,
            cumulative,
        }
    }

    pub fn relays(&self) -> usize {
        self.rho.len()
    }

    pub fn ratios(&self) -> &[f64] {
        &self.rho
    }

    /// `rho_k` for 1-based `k`; the destination (`k = K + 1`) harvests nothing.
    pub fn ratio(&self, k: usize) -> f64 {
        if k > self.rho.len() {
            0.0
        } else {
            self.rho[k - 1]
        }
    }

    /// `1 - rho_k` for 1-based `k`.
    pub fn id_share(&self, k: usize) -> f64 {
        if k > self.rho.len() {
            1.0
        } else {
            self.id_share[k - 1]
        }
    }

    /// `A_k` for `k` in `0..=K + 1`.
    pub fn cumulative(&self, k: usize) -> f64 {
        if k > self.rho.len() {
            0.0
        } else {
            self.cumulative[k]
        }
    }

    pub(crate) fn check_relays(&self, relays: usize) -> Result<()> {
        if self.rho.len() != relays {
            return Err(Error::LengthMismatch {
                what: "PS ratios",
                expected: relays,
                got: self.rho.len(),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(beta: f64) -> NodeParams {
        NodeParams {
            beta,
            id_noise: 1.0,
            antenna_noise: 0.0,
            snr_threshold: 1.0,
        }
    }

    #[test]
    fn cumulative_products() {
        let a = PsAllocation::from_ratios(vec![6.0 / 7.0, 2.0 / 3.0]).unwrap();
        assert_eq!(a.cumulative(0), 1.0);
        assert!((a.cumulative(2) - 4.0 / 7.0).abs() < 1e-15);
        assert_eq!(a.cumulative(3), 0.0);
        assert_eq!(a.ratio(3), 0.0);
        assert_eq!(a.id_share(3), 1.0);
        for k in 1..=2 {
            assert_eq!(a.cumulative(k), a.cumulative(k - 1) * a.ratio(k));
        }
    }

    #[test]
    fn ratios_outside_unit_interval_are_rejected() {
        assert!(PsAllocation::from_ratios(vec![0.5, 1.2]).is_err());
        assert!(PsAllocation::from_ratios(vec![-0.1]).is_err());
        assert!(PsAllocation::from_ratios(vec![]).is_ok());
    }

    #[test]
    fn destination_beta_forced() {
        let hop = HopGeometry::new(1.0, 1.0, 2.0, 1.0).unwrap();
        let cfg = NetworkConfig::new(vec![node(0.5), node(0.3)], vec![hop; 2], 1.0).unwrap();
        assert_eq!(cfg.node(2).beta, 1.0);
        assert_eq!(cfg.node(1).beta, 0.5);
    }

    #[test]
    fn invalid_node_parameters() {
        let hop = HopGeometry::new(1.0, 1.0, 2.0, 1.0).unwrap();
        let mut bad = node(0.0);
        assert!(NetworkConfig::new(vec![bad, node(1.0)], vec![hop; 2], 1.0).is_err());
        bad = node(0.5);
        bad.id_noise = 0.0;
        assert!(NetworkConfig::new(vec![bad, node(1.0)], vec![hop; 2], 1.0).is_err());
        assert!(NetworkConfig::new(vec![node(0.5)], vec![hop; 2], 1.0).is_err());
        assert!(NetworkConfig::new(vec![node(0.5)], vec![hop], -1.0).is_err());
    }
}

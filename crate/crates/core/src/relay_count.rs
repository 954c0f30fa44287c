//! Closed-form estimate of how many relays a source power budget supports in
//! a homogeneous chain.
//!
//! With per-hop average gain `G = m * beta * C * (d / d_0)^(-alpha)` and
//! `a0 = snr * sigma^2 * beta`, the required power is approximated by the
//! geometric series `sum_{k=1}^{K+1} a0 / G^k`. [`estimate_relay_count`]
//! inverts that series with the published log formula, taken as is. It lands
//! one hop above the direct inversion in [`crate::oracle::exact_relay_count`]
//! because the series closed form it starts from sums one term fewer.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::channel::HopGeometry;
use crate::error::{Error, Result};

/// Average small-scale power gain assumed by the estimate. The published
/// derivation uses 1/2 even though a unit-variance Rayleigh power gain has
/// mean 1; pass `1.0` for the self-consistent variant.
pub const DEFAULT_FADING_MEAN: f64 = 0.5;

/// Guard against `ln` round-off pushing an integer result just below itself.
const FLOOR_GUARD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RelayCount {
    /// Not even the direct source-destination hop is affordable.
    Unaffordable,
    Finite(usize),
    /// The series converges below the budget: any chain length works.
    Unbounded,
}

impl RelayCount {
    pub fn finite(self) -> Option<usize> {
        match self {
            RelayCount::Finite(k) => Some(k),
            _ => None,
        }
    }

    /// Signed difference `self - other`, when both are finite or one is
    /// unaffordable (counted as -1).
    pub fn difference(self, other: RelayCount) -> Option<i64> {
        let as_int = |c: RelayCount| match c {
            RelayCount::Unaffordable => Some(-1),
            RelayCount::Finite(k) => Some(k as i64),
            RelayCount::Unbounded => None,
        };
        match (self, other) {
            (RelayCount::Unbounded, RelayCount::Unbounded) => Some(0),
            _ => Some(as_int(self)? - as_int(other)?),
        }
    }
}

impl fmt::Display for RelayCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RelayCount::Unaffordable => f.write_str("none"),
            RelayCount::Finite(k) => write!(f, "{k}"),
            RelayCount::Unbounded => f.write_str("unbounded"),
        }
    }
}

/// Average per-hop gain `m * beta * C * (d / d_0)^(-alpha)`.
pub fn average_hop_gain(beta: f64, geometry: &HopGeometry, fading_mean: f64) -> Result<f64> {
    if !(fading_mean > 0.0 && fading_mean.is_finite()) {
        return Err(Error::invalid(
            "fading mean",
            format!("{fading_mean} must be positive"),
        ));
    }
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::invalid("beta", format!("{beta} must lie in (0, 1]")));
    }
    Ok(fading_mean * beta * geometry.large_scale_gain()?)
}

/// The two-branch log formula in terms of `E_0 / a0` and the per-hop gain.
pub fn relay_count_formula(e0: f64, a0: f64, hop_gain: f64) -> Result<RelayCount> {
    if !(e0 >= 0.0 && e0.is_finite()) {
        return Err(Error::invalid(
            "source power",
            format!("{e0} must be nonnegative"),
        ));
    }
    if !(a0 > 0.0 && a0.is_finite()) {
        return Err(Error::invalid(
            "per-hop requirement",
            format!("{a0} must be positive"),
        ));
    }
    if !(hop_gain > 0.0 && hop_gain.is_finite()) {
        return Err(Error::invalid(
            "hop gain",
            format!("{hop_gain} must be positive"),
        ));
    }
    if hop_gain == 1.0 {
        return Err(Error::UnitHopGain);
    }
    let budget = e0 / a0 + 1.0;
    let argument = if hop_gain > 1.0 {
        1.0 - budget * (1.0 - 1.0 / hop_gain)
    } else {
        1.0 + budget * (1.0 / hop_gain - 1.0)
    };
    if argument <= 0.0 {
        return Ok(RelayCount::Unbounded);
    }
    let k = argument.ln() / -hop_gain.ln() - 1.0;
    Ok(RelayCount::Finite(
        (k + FLOOR_GUARD).floor().max(0.0) as usize
    ))
}

/// Estimated maximum number of relays for a homogeneous chain.
pub fn estimate_relay_count(
    e0: f64,
    snr_threshold: f64,
    id_noise: f64,
    beta: f64,
    geometry: &HopGeometry,
    fading_mean: f64,
) -> Result<RelayCount> {
    let hop_gain = average_hop_gain(beta, geometry, fading_mean)?;
    relay_count_formula(e0, snr_threshold * id_noise * beta, hop_gain)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn documented_cases() {
        assert_eq!(
            relay_count_formula(6.0, 1.0, 0.5).unwrap(),
            RelayCount::Finite(2)
        );
        assert_eq!(
            relay_count_formula(0.75, 1.0, 2.0).unwrap(),
            RelayCount::Finite(2)
        );
        assert_eq!(
            relay_count_formula(0.0, 1.0, 0.5).unwrap(),
            RelayCount::Finite(0)
        );
    }

    #[test]
    fn unit_gain_is_unsupported() {
        assert_eq!(relay_count_formula(1.0, 1.0, 1.0), Err(Error::UnitHopGain));
    }

    #[test]
    fn converging_series_is_unbounded() {
        // r = 0.5: the infinite tail sums to 1.
        assert_eq!(
            relay_count_formula(1.0, 1.0, 2.0).unwrap(),
            RelayCount::Unbounded
        );
        assert_eq!(
            relay_count_formula(5.0, 1.0, 2.0).unwrap(),
            RelayCount::Unbounded
        );
        assert_eq!(
            relay_count_formula(0.9, 1.0, 2.0).unwrap(),
            RelayCount::Finite(3)
        );
    }

    #[test]
    fn geometry_entry_point() {
        let geom = HopGeometry::new(2.0, 1.0, 3.0, 0.1).unwrap();
        let g = average_hop_gain(0.7, &geom, DEFAULT_FADING_MEAN).unwrap();
        assert!((g - 0.004375).abs() < 1e-15);
        let a = estimate_relay_count(6.0 * 0.7, 1.0, 1.0, 0.7, &geom, 0.5).unwrap();
        assert_eq!(a, relay_count_formula(6.0, 1.0, g).unwrap());
        assert!(estimate_relay_count(1.0, 1.0, 1.0, 0.7, &geom, 0.0).is_err());
    }

    #[test]
    fn difference_treats_none_as_minus_one() {
        assert_eq!(
            RelayCount::Finite(0).difference(RelayCount::Unaffordable),
            Some(1)
        );
        assert_eq!(
            RelayCount::Unbounded.difference(RelayCount::Unbounded),
            Some(0)
        );
        assert_eq!(
            RelayCount::Finite(3).difference(RelayCount::Unbounded),
            None
        );
        assert_eq!(RelayCount::Finite(4).to_string(), "4");
    }
}

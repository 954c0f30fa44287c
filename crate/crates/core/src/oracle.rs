//! Independent checks for the closed forms in [`crate::solver`] and
//! [`crate::relay_count`].
//!
//! Nothing here uses the weight sums the closed forms are built on. The
//! oracles only evaluate the SNR constraints themselves:
//!
//! * exhaustive search over a grid of PS ratios;
//! * bisection on a target SNR (or source power), with feasibility decided by
//!   giving each hop exactly the decoding share it needs and passing the rest
//!   on;
//! * an optimality certificate built from constraint slacks and the implied
//!   per-hop power increments;
//! * term-by-term summation of the geometric power series for relay counts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{draw_fading, stream_seed, ChannelState, HopGeometry};
use crate::error::{Error, Result};
use crate::model::{NetworkConfig, NodeParams, PsAllocation};
use crate::relay_count::RelayCount;
use crate::solver::{PowerMinSolution, RateMaxSolution};
use crate::units::{db_to_linear, dbm_to_watts};

/// Largest number of grid points [`grid_search_max_min_rate`] will visit.
pub const GRID_POINT_LIMIT: f64 = 1e9;
const MAX_BISECTION_STEPS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Spacing of the PS-ratio grid, in (0, 0.1].
    pub step: f64,
    /// Longest chain (in relays) searched exhaustively, at most 3.
    pub max_relays: usize,
}

impl GridSpec {
    pub fn new(step: f64, max_relays: usize) -> Result<Self> {
        if !(step > 0.0 && step <= 0.1) {
            return Err(Error::invalid(
                "grid step",
                format!("{step} must lie in (0, 0.1]"),
            ));
        }
        if max_relays > 3 {
            return Err(Error::invalid(
                "grid depth",
                format!("{max_relays} relays exceeds the exhaustive limit of 3"),
            ));
        }
        Ok(GridSpec { step, max_relays })
    }

    /// Ratios visited per relay: `0, step, 2 step, ...` below 1.
    pub fn levels(&self) -> usize {
        (1.0 / self.step).round() as usize
    }

    /// Index of the grid ratio nearest to `rho`.
    pub fn nearest(&self, rho: f64) -> usize {
        ((rho / self.step).round() as usize).min(self.levels() - 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridOptimum {
    pub gamma_hat: f64,
    pub rho: Vec<f64>,
}

/// Evidence that a PS design is optimal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalityCertificate {
    /// Per hop, `SNR_k / target_k - 1` (plain `SNR_k` for a zero target).
    /// Negative means the constraint is violated.
    pub slacks: Vec<f64>,
    /// `max_k r_k - min_k r_k` over `r_k = SNR_k / target_k`.
    pub snr_spread: f64,
    /// Largest gap between the decoding share `A_{k-1} - A_k` a hop receives
    /// and the share `target_k sigma_k^2 beta_k / (Gamma_k E_0)` its
    /// constraint needs. All multipliers being equal at the optimum makes
    /// these coincide.
    pub increment_deviation: f64,
}

impl OptimalityCertificate {
    pub fn max_abs_slack(&self) -> f64 {
        self.slacks.iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    pub fn min_slack(&self) -> f64 {
        self.slacks.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Feasible, all constraints active, and shares matching the weights.
    pub fn passes(&self, tol: f64) -> bool {
        self.max_abs_slack() <= tol && self.snr_spread <= tol && self.increment_deviation <= tol
    }
}

/// A design whose optimality can be certified: its source power and the SNR
/// each hop is meant to reach.
pub trait Certifiable {
    fn source_power(&self, cfg: &NetworkConfig) -> f64;
    fn targets(&self, cfg: &NetworkConfig) -> Vec<f64>;
    fn allocation(&self) -> &PsAllocation;
}

impl Certifiable for PowerMinSolution {
    fn source_power(&self, _cfg: &NetworkConfig) -> f64 {
        self.e0_star
    }

    fn targets(&self, cfg: &NetworkConfig) -> Vec<f64> {
        cfg.nodes().iter().map(|n| n.snr_threshold).collect()
    }

    fn allocation(&self) -> &PsAllocation {
        &self.allocation
    }
}

impl Certifiable for RateMaxSolution {
    fn source_power(&self, cfg: &NetworkConfig) -> f64 {
        cfg.source_power()
    }

    fn targets(&self, cfg: &NetworkConfig) -> Vec<f64> {
        vec![self.gamma_hat_star; cfg.nodes().len()]
    }

    fn allocation(&self) -> &PsAllocation {
        &self.allocation
    }
}

/// `E_0 Gamma_k / (sigma_k^2 beta_k)`: hop `k`'s SNR per unit of decoding share.
fn snr_coefficients(e0: f64, cfg: &NetworkConfig, channel: &ChannelState) -> Result<Vec<f64>> {
    if channel.hops() != cfg.nodes().len() {
        return Err(Error::LengthMismatch {
            what: "channel hops",
            expected: cfg.nodes().len(),
            got: channel.hops(),
        });
    }
    channel.ensure_nondegenerate()?;
    Ok(cfg
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, n)| e0 * channel.cumulative(i + 1) / (n.id_noise * n.beta))
        .collect())
}

fn evaluate_snrs(coefs: &[f64], alloc: &PsAllocation) -> Vec<f64> {
    coefs
        .iter()
        .enumerate()
        .map(|(i, c)| c * alloc.cumulative(i) * alloc.id_share(i + 1))
        .collect()
}

/// Exhaustive max-min SNR over the PS-ratio grid.
pub fn grid_search_max_min_rate(
    cfg: &NetworkConfig,
    channel: &ChannelState,
    grid: &GridSpec,
) -> Result<GridOptimum> {
    let relays = cfg.relays();
    if relays > grid.max_relays {
        return Err(Error::invalid(
            "grid depth",
            format!(
                "{relays} relays exceeds the configured maximum of {}",
                grid.max_relays
            ),
        ));
    }
    let levels = grid.levels();
    let points = (levels as f64).powi(relays as i32);
    if points > GRID_POINT_LIMIT {
        return Err(Error::GridTooLarge {
            points,
            limit: GRID_POINT_LIMIT,
        });
    }
    let coefs = snr_coefficients(cfg.source_power(), cfg, channel)?;
    if relays == 0 {
        return Ok(GridOptimum {
            gamma_hat: coefs[0],
            rho: Vec::new(),
        });
    }
    let ratios: Vec<f64> = (0..levels).map(|i| i as f64 * grid.step).collect();

    let per_branch: Vec<(f64, Vec<usize>)> = (0..levels)
        .into_par_iter()
        .map(|first| {
            let mut path = vec![0; relays];
            path[0] = first;
            let mut best = (f64::NEG_INFINITY, path.clone());
            let share = 1.0 - ratios[first];
            let snr = coefs[0] * share;
            descend(&coefs, &ratios, 1, ratios[first], snr, &mut path, &mut best);
            best
        })
        .collect();

    // Sequential reduce: ties go to the earliest branch whatever the thread
    // schedule was.
    let (gamma_hat, idx) =
        per_branch
            .into_iter()
            .fold((f64::NEG_INFINITY, Vec::new()), |acc, cand| {
                if cand.0 > acc.0 {
                    cand
                } else {
                    acc
                }
            });
    Ok(GridOptimum {
        gamma_hat,
        rho: idx.iter().map(|&i| ratios[i]).collect(),
    })
}

fn descend(
    coefs: &[f64],
    ratios: &[f64],
    depth: usize,
    cumulative: f64,
    running_min: f64,
    path: &mut Vec<usize>,
    best: &mut (f64, Vec<usize>),
) {
    // The bottleneck can only shrink further down the chain.
    if running_min <= best.0 {
        return;
    }
    let relays = path.len();
    if depth == relays {
        let dest = coefs[relays] * cumulative;
        let value = running_min.min(dest);
        if value > best.0 {
            best.0 = value;
            best.1.clone_from(path);
        }
        return;
    }
    for (i, &rho) in ratios.iter().enumerate() {
        let snr = coefs[depth] * cumulative * (1.0 - rho);
        path[depth] = i;
        descend(
            coefs,
            ratios,
            depth + 1,
            cumulative * rho,
            running_min.min(snr),
            path,
            best,
        );
    }
}

/// Can every hop reach its target? Each relay keeps exactly the decoding
/// share its own constraint needs and forwards the remainder, which leaves
/// the most power for the rest of the chain.
fn greedy_feasible(coefs: &[f64], targets: &[f64]) -> bool {
    let last = coefs.len() - 1;
    let mut cumulative = 1.0;
    for k in 0..last {
        let need = targets[k] / (coefs[k] * cumulative);
        if !(need <= 1.0) {
            return false;
        }
        cumulative *= 1.0 - need;
    }
    coefs[last] * cumulative >= targets[last]
}

/// Largest common SNR reachable at the configured source power, by
/// bisection to relative tolerance `tol`.
pub fn bisection_max_min_rate(
    cfg: &NetworkConfig,
    channel: &ChannelState,
    tol: f64,
) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::invalid(
            "tolerance",
            format!("{tol} must be positive"),
        ));
    }
    let coefs = snr_coefficients(cfg.source_power(), cfg, channel)?;
    let hops = coefs.len();
    let feasible = |gamma: f64| greedy_feasible(&coefs, &vec![gamma; hops]);

    let mut hi = coefs.iter().copied().fold(0.0, f64::max);
    if feasible(hi) {
        return Ok(hi);
    }
    let mut lo = 0.0;
    for _ in 0..MAX_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= tol * lo {
            break;
        }
    }
    Ok(lo)
}

/// Smallest source power meeting every node's threshold, by bisection to
/// relative tolerance `tol`.
pub fn bisection_min_source_power(
    cfg: &NetworkConfig,
    channel: &ChannelState,
    tol: f64,
) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::invalid(
            "tolerance",
            format!("{tol} must be positive"),
        ));
    }
    let unit = snr_coefficients(1.0, cfg, channel)?;
    let targets: Vec<f64> = cfg.nodes().iter().map(|n| n.snr_threshold).collect();
    if targets.iter().all(|t| *t == 0.0) {
        return Ok(0.0);
    }
    let feasible = |e0: f64| {
        let coefs: Vec<f64> = unit.iter().map(|c| c * e0).collect();
        greedy_feasible(&coefs, &targets)
    };
    // Each hop alone needs at least target / coefficient.
    let mut lo = targets
        .iter()
        .zip(&unit)
        .map(|(t, c)| t / c)
        .fold(0.0, f64::max);
    let mut hi = lo.max(f64::MIN_POSITIVE);
    while !feasible(hi) {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::invalid(
                "thresholds",
                "no finite source power meets them",
            ));
        }
    }
    for _ in 0..MAX_BISECTION_STEPS {
        if hi - lo <= tol * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Certify a PS design against its own targets.
pub fn verify_certificate<S: Certifiable>(
    solution: &S,
    cfg: &NetworkConfig,
    channel: &ChannelState,
) -> Result<OptimalityCertificate> {
    let alloc = solution.allocation();
    if alloc.relays() != cfg.relays() {
        return Err(Error::LengthMismatch {
            what: "PS ratios",
            expected: cfg.relays(),
            got: alloc.relays(),
        });
    }
    let e0 = solution.source_power(cfg);
    let targets = solution.targets(cfg);
    let snrs = evaluate_snrs(&snr_coefficients(e0, cfg, channel)?, alloc);

    let slacks: Vec<f64> = snrs
        .iter()
        .zip(&targets)
        .map(|(s, t)| if *t > 0.0 { s / t - 1.0 } else { *s })
        .collect();
    let ratios: Vec<f64> = snrs
        .iter()
        .zip(&targets)
        .filter(|(_, t)| **t > 0.0)
        .map(|(s, t)| s / t)
        .collect();
    let snr_spread = if ratios.is_empty() {
        0.0
    } else {
        let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        hi - lo
    };

    let increment_deviation = if e0 > 0.0 {
        cfg.nodes()
            .iter()
            .enumerate()
            .map(|(i, n)| {
                let k = i + 1;
                let observed = alloc.cumulative(k - 1) * alloc.id_share(k);
                let needed = targets[i] * n.id_noise * n.beta / (channel.cumulative(k) * e0);
                (observed - needed).abs()
            })
            .fold(0.0, f64::max)
    } else {
        0.0
    };

    Ok(OptimalityCertificate {
        slacks,
        snr_spread,
        increment_deviation,
    })
}

/// Largest `K` with `sum_{k=1}^{K+1} a0 / G^k <= E_0`, by direct summation.
pub fn exact_relay_count(e0: f64, a0: f64, hop_gain: f64) -> Result<RelayCount> {
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
    let budget = e0 * (1.0 + 1e-12);
    let ratio = 1.0 / hop_gain;
    if ratio < 1.0 && a0 * ratio / (1.0 - ratio) <= budget {
        return Ok(RelayCount::Unbounded);
    }
    let mut sum = 0.0;
    let mut term = a0;
    let mut terms = 0usize;
    loop {
        term *= ratio;
        sum += term;
        if sum > budget {
            break;
        }
        terms += 1;
    }
    Ok(match terms {
        0 => RelayCount::Unaffordable,
        n => RelayCount::Finite(n - 1),
    })
}

/// Seeded heterogeneous chain for oracle runs: per node `beta` in [0.2, 1),
/// noise in [-90, -70] dBm and threshold in [-10, 20] dB; per hop distance
/// in [1, 5] m and Rayleigh fading; source power 30 dBm.
pub fn random_instance(relays: usize, seed: u64) -> Result<(NetworkConfig, ChannelState)> {
    let hops = relays + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes = Vec::with_capacity(hops);
    let mut geoms = Vec::with_capacity(hops);
    for _ in 0..hops {
        nodes.push(NodeParams {
            beta: rng.random_range(0.2..1.0),
            id_noise: dbm_to_watts(rng.random_range(-90.0..=-70.0)),
            antenna_noise: 0.0,
            snr_threshold: db_to_linear(rng.random_range(-10.0..=20.0)),
        });
        geoms.push(HopGeometry::new(
            rng.random_range(1.0..=5.0),
            1.0,
            3.0,
            0.1,
        )?);
    }
    let cfg = NetworkConfig::new(nodes, geoms, dbm_to_watts(30.0))?;
    let fading = (0..hops)
        .map(|h| draw_fading(stream_seed(seed, 0, h as u64), 0.0).map(|d| d.true_gain))
        .collect::<Result<Vec<_>>>()?;
    let channel = cfg.channel(&fading)?;
    Ok((cfg, channel))
}

/// `(E_0 / a0, G)` pairs on which the relay-count formula is checked against
/// [`exact_relay_count`]: budgets from 1e-2 to 1e10 and per-hop gains from
/// 1e-4 to 10, both at four points per decade, skipping `G = 1`.
pub fn relay_count_grid() -> Vec<(f64, f64)> {
    let budgets = (-8..=40).map(|i| 10f64.powf(f64::from(i) / 4.0));
    budgets
        .flat_map(|b| {
            (-16..=4)
                .filter(|j| *j != 0)
                .map(move |j| (b, 10f64.powf(f64::from(j) / 4.0)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{max_min_rate, min_source_power};

    fn unit_chain(betas: &[f64], e0: f64) -> (NetworkConfig, ChannelState) {
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
        let cfg = NetworkConfig::new(nodes, vec![hop; betas.len()], e0).unwrap();
        let ch = cfg.channel(&vec![1.0; betas.len()]).unwrap();
        (cfg, ch)
    }

    #[test]
    fn grid_finds_the_k2_optimum() {
        let (cfg, ch) = unit_chain(&[0.5, 0.5, 1.0], 7.0);
        let grid = GridSpec::new(1e-3, 3).unwrap();
        let best = grid_search_max_min_rate(&cfg, &ch, &grid).unwrap();
        assert!((best.gamma_hat - 1.0).abs() < 1e-2, "{}", best.gamma_hat);
        assert!(best.gamma_hat <= 1.0 + 1e-12);
        assert!((best.rho[0] - 6.0 / 7.0).abs() <= grid.step);
        assert!((best.rho[1] - 2.0 / 3.0).abs() <= grid.step);
    }

    #[test]
    fn grid_trivial_and_one_dimensional() {
        let (cfg, ch) = unit_chain(&[1.0], 3.0);
        let grid = GridSpec::new(1e-3, 3).unwrap();
        let best = grid_search_max_min_rate(&cfg, &ch, &grid).unwrap();
        assert_eq!(best.gamma_hat, 3.0);
        assert!(best.rho.is_empty());

        let (cfg, ch) = unit_chain(&[0.5, 1.0], 3.0);
        let best = grid_search_max_min_rate(&cfg, &ch, &grid).unwrap();
        assert!((best.gamma_hat - 1.0).abs() < 1e-2);
    }

    #[test]
    fn grid_limits() {
        assert!(GridSpec::new(0.2, 2).is_err());
        assert!(GridSpec::new(0.01, 4).is_err());
        let (cfg, ch) = unit_chain(&[0.5, 0.5, 0.5, 1.0], 7.0);
        let grid = GridSpec::new(0.01, 2).unwrap();
        assert!(grid_search_max_min_rate(&cfg, &ch, &grid).is_err());
        let grid = GridSpec::new(1e-4, 3).unwrap();
        assert!(matches!(
            grid_search_max_min_rate(&cfg, &ch, &grid),
            Err(Error::GridTooLarge { .. })
        ));
    }

    #[test]
    fn bisection_examples() {
        let (cfg, ch) = unit_chain(&[0.5, 0.5, 1.0], 7.0);
        let g = bisection_max_min_rate(&cfg, &ch, 1e-12).unwrap();
        assert!((g - 1.0).abs() <= 1e-9, "{g}");

        let doubled = cfg.clone().with_source_power(14.0).unwrap();
        let g2 = bisection_max_min_rate(&doubled, &ch, 1e-12).unwrap();
        assert!((g2 / g - 2.0).abs() <= 1e-9);

        let (cfg, ch) = unit_chain(&[1.0], 3.0);
        assert_eq!(bisection_max_min_rate(&cfg, &ch, 1e-12).unwrap(), 3.0);
    }

    #[test]
    fn bisection_min_power_matches_k2() {
        let (cfg, ch) = unit_chain(&[0.5, 0.5, 1.0], 0.0);
        let e0 = bisection_min_source_power(&cfg, &ch, 1e-13).unwrap();
        assert!((e0 - 7.0).abs() <= 7e-9, "{e0}");
    }

    #[test]
    fn certificate_accepts_closed_form_and_rejects_perturbation() {
        let (cfg, ch) = unit_chain(&[0.5, 0.5, 1.0], 7.0);
        let sol = min_source_power(&cfg, &ch).unwrap();
        let cert = verify_certificate(&sol, &cfg, &ch).unwrap();
        assert!(cert.max_abs_slack() <= 1e-9);
        assert!(cert.increment_deviation <= 1e-9);
        assert!(cert.passes(1e-9));

        let mut bumped = sol.clone();
        let mut rho = bumped.allocation.ratios().to_vec();
        rho[0] += 0.05;
        bumped.allocation = PsAllocation::from_ratios(rho).unwrap();
        let cert = verify_certificate(&bumped, &cfg, &ch).unwrap();
        assert!(cert.min_slack() < 0.0 || cert.snr_spread > 0.01);
        assert!(!cert.passes(1e-9));

        let rate = max_min_rate(&cfg, &ch).unwrap();
        assert!(verify_certificate(&rate, &cfg, &ch).unwrap().passes(1e-9));

        let (cfg, ch) = unit_chain(&[1.0], 3.0);
        let sol = min_source_power(&cfg, &ch).unwrap();
        assert!(verify_certificate(&sol, &cfg, &ch).unwrap().passes(1e-12));
    }

    #[test]
    fn exact_relay_count_examples() {
        assert_eq!(
            exact_relay_count(6.0, 1.0, 0.5).unwrap(),
            RelayCount::Finite(1)
        );
        assert_eq!(
            exact_relay_count(0.75, 1.0, 2.0).unwrap(),
            RelayCount::Finite(1)
        );
        assert_eq!(
            exact_relay_count(1.9, 1.0, 0.5).unwrap(),
            RelayCount::Unaffordable
        );
        assert_eq!(
            exact_relay_count(0.0, 1.0, 0.5).unwrap(),
            RelayCount::Unaffordable
        );
        assert_eq!(
            exact_relay_count(1.0, 1.0, 2.0).unwrap(),
            RelayCount::Unbounded
        );
        // G = 1: every hop costs a0.
        assert_eq!(
            exact_relay_count(3.0, 1.0, 1.0).unwrap(),
            RelayCount::Finite(2)
        );
    }

    #[test]
    fn random_instances_are_seeded_and_in_range() {
        let (a, ca) = random_instance(3, 9).unwrap();
        let (b, cb) = random_instance(3, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(ca, cb);
        assert_ne!(random_instance(3, 10).unwrap().1, ca);
        assert_eq!(a.relays(), 3);
        for n in &a.nodes()[..3] {
            assert!((0.2..1.0).contains(&n.beta));
            assert!(n.id_noise >= 1e-12 && n.id_noise <= 1e-10);
            assert!(n.snr_threshold >= 0.1 && n.snr_threshold <= 100.0);
        }
        assert!(a.hops().iter().all(|h| (1.0..=5.0).contains(&h.distance)));
    }
}

//! Seeded Monte Carlo sweeps comparing the optimal split with a fixed split.
//!
//! Every trial draws fresh Rayleigh fading for each hop from the stream
//! `(seed, trial, hop)`. The same streams are reused at every point of a
//! sweep, so curves are smooth in the swept parameter and a run is a pure
//! function of its spec. Trials run in parallel on the current rayon pool;
//! results are gathered in trial order and reduced with pairwise summation,
//! so the thread count never changes the output.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{draw_fading, stream_seed, ChannelState, HopGeometry};
use crate::error::{Error, Result};
use crate::model::{NetworkConfig, NodeParams, PsAllocation};
use crate::oracle::exact_relay_count;
use crate::relay_count::{average_hop_gain, estimate_relay_count, RelayCount};
use crate::solver::{
    bottleneck, fixed_ps_baseline, harvested_energy, hop_snrs, max_min_rate, min_source_power,
    SnrModel,
};
use crate::units::{
    db_to_linear, dbm_to_watts, linear_to_db, rate_from_snr, snr_from_rate, watts_to_dbm,
};

/// Per-node quantity that can be set for a single index of a chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeField {
    Beta,
    IdNoise,
    AntennaNoise,
    SnrThreshold,
    Distance,
    RefDistance,
    PathlossExponent,
    Attenuation,
}

/// Linear value of one field at 1-based index `index` (node `k` / hop `k`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeOverride {
    pub index: usize,
    pub field: NodeField,
    pub value: f64,
}

/// A homogeneous chain template plus optional per-index overrides. All
/// values are linear (watts, linear SNR).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub relays: usize,
    pub distance: f64,
    pub ref_distance: f64,
    pub pathloss_exponent: f64,
    pub attenuation: f64,
    pub beta: f64,
    pub id_noise: f64,
    pub antenna_noise: f64,
    pub snr_threshold: f64,
    pub source_power: f64,
    pub fixed_rho: f64,
    pub fading_mean: f64,
    pub overrides: Vec<NodeOverride>,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            relays: 2,
            distance: 2.0,
            ref_distance: 1.0,
            pathloss_exponent: 3.0,
            attenuation: db_to_linear(-10.0),
            beta: 0.7,
            id_noise: dbm_to_watts(-80.0),
            antenna_noise: 0.0,
            snr_threshold: 1.0,
            source_power: dbm_to_watts(30.0),
            fixed_rho: 0.5,
            fading_mean: crate::relay_count::DEFAULT_FADING_MEAN,
            overrides: Vec::new(),
        }
    }
}

impl Scenario {
    pub fn node(&self) -> NodeParams {
        NodeParams {
            beta: self.beta,
            id_noise: self.id_noise,
            antenna_noise: self.antenna_noise,
            snr_threshold: self.snr_threshold,
        }
    }

    pub fn hop(&self) -> HopGeometry {
        HopGeometry {
            distance: self.distance,
            ref_distance: self.ref_distance,
            pathloss_exponent: self.pathloss_exponent,
            attenuation: self.attenuation,
        }
    }

    /// The chain this template describes. Overrides for indices past the end
    /// of the chain are ignored.
    pub fn network(&self) -> Result<NetworkConfig> {
        let hops_n = self.relays + 1;
        let mut nodes = vec![self.node(); hops_n];
        let mut hops = vec![self.hop(); hops_n];
        for o in &self.overrides {
            if o.index == 0 {
                return Err(Error::invalid("override index", "indices start at 1"));
            }
            if o.index > hops_n {
                continue;
            }
            let n = &mut nodes[o.index - 1];
            let h = &mut hops[o.index - 1];
            match o.field {
                NodeField::Beta => n.beta = o.value,
                NodeField::IdNoise => n.id_noise = o.value,
                NodeField::AntennaNoise => n.antenna_noise = o.value,
                NodeField::SnrThreshold => n.snr_threshold = o.value,
                NodeField::Distance => h.distance = o.value,
                NodeField::RefDistance => h.ref_distance = o.value,
                NodeField::PathlossExponent => h.pathloss_exponent = o.value,
                NodeField::Attenuation => h.attenuation = o.value,
            }
        }
        NetworkConfig::new(nodes, hops, self.source_power)
    }

    fn validate_fixed_rho(&self) -> Result<()> {
        if self.fixed_rho > 0.0 && self.fixed_rho < 1.0 {
            Ok(())
        } else {
            Err(Error::invalid(
                "fixed PS ratio",
                format!("{} must lie in (0, 1)", self.fixed_rho),
            ))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweptParameter {
    /// Common SNR threshold in dB.
    SnrThresholdDb,
    /// Inter-node distance in meters.
    Distance,
    /// Common rate threshold in bits/s/Hz (threshold `2^R - 1`).
    RateThreshold,
    /// Number of relays.
    Relays,
    /// Source power in dBm.
    SourcePowerDbm,
    /// Channel estimation error variance.
    EstimationError,
}

impl SweptParameter {
    /// `base` with this parameter set to `value`. Estimation error is not a
    /// scenario field; it is handled per trial.
    pub fn apply(self, base: &Scenario, value: f64) -> Result<Scenario> {
        let mut s = base.clone();
        match self {
            SweptParameter::SnrThresholdDb => s.snr_threshold = db_to_linear(value),
            SweptParameter::Distance => s.distance = value,
            SweptParameter::RateThreshold => {
                if !(value >= 0.0) {
                    return Err(Error::invalid(
                        "rate threshold",
                        format!("{value} must be nonnegative"),
                    ));
                }
                s.snr_threshold = snr_from_rate(value);
            }
            SweptParameter::Relays => {
                if !(value >= 0.0 && value.fract() == 0.0) {
                    return Err(Error::invalid(
                        "relay count",
                        format!("{value} is not a count"),
                    ));
                }
                s.relays = value as usize;
            }
            SweptParameter::SourcePowerDbm => s.source_power = dbm_to_watts(value),
            SweptParameter::EstimationError => {
                if !(0.0..1.0).contains(&value) {
                    return Err(Error::invalid(
                        "estimation error variance",
                        format!("{value} must lie in [0, 1)"),
                    ));
                }
            }
        }
        Ok(s)
    }

    pub fn name(self) -> &'static str {
        match self {
            SweptParameter::SnrThresholdDb => "snr_threshold_db",
            SweptParameter::Distance => "distance_m",
            SweptParameter::RateThreshold => "rate_threshold_bps_hz",
            SweptParameter::Relays => "relays",
            SweptParameter::SourcePowerDbm => "source_power_dbm",
            SweptParameter::EstimationError => "estimation_error_variance",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    /// Minimum source power meeting the thresholds. Log column in dBm.
    MinPower,
    /// Bottleneck rate at the source power. Log column in bits/s/Hz,
    /// linear column the bottleneck SNR.
    Rate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub parameter: SweptParameter,
    pub values: Vec<f64>,
    pub trials: usize,
    pub metric: Metric,
    pub base: Scenario,
    pub seed: u64,
}

impl SweepSpec {
    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::invalid("trials", "at least one trial is required"));
        }
        if self.values.is_empty() {
            return Err(Error::invalid(
                "sweep values",
                "at least one value is required",
            ));
        }
        if self.parameter == SweptParameter::EstimationError && self.metric != Metric::Rate {
            return Err(Error::invalid(
                "sweep",
                "estimation error only applies to the rate metric",
            ));
        }
        self.base.validate_fixed_rho()
    }
}

/// Mean and standard error of one column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStat {
    pub mean: f64,
    pub stderr: f64,
}

/// Pairwise (cascade) summation; fixed evaluation order for a given length.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if values.len() <= LEAF {
        values.iter().sum()
    } else {
        let (a, b) = values.split_at(values.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}

impl MeanStat {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = pairwise_sum(values) / n;
        let stderr = if values.len() > 1 {
            let dev: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
            (pairwise_sum(&dev) / (n - 1.0) / n).sqrt()
        } else {
            0.0
        };
        MeanStat { mean, stderr }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub swept_value: f64,
    /// Mean of per-trial dBm (power) or bits/s/Hz (rate).
    pub optimal_db: MeanStat,
    pub fixed_db: MeanStat,
    /// Mean of per-trial watts (power) or linear SNR (rate).
    pub optimal_linear: f64,
    pub fixed_linear: f64,
    pub trials: usize,
    /// Trials where the fixed split beat the optimal one.
    pub dominance_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub parameter: SweptParameter,
    pub metric: Metric,
    pub seed: u64,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn dominance_violations(&self) -> usize {
        self.points.iter().map(|p| p.dominance_violations).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "swept_value,metric_optimal_db,metric_fixed_db,metric_optimal_linear,metric_fixed_linear,stderr_optimal,stderr_fixed,trials,seed\n",
        );
        for p in &self.points {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                p.swept_value,
                p.optimal_db.mean,
                p.fixed_db.mean,
                p.optimal_linear,
                p.fixed_linear,
                p.optimal_db.stderr,
                p.fixed_db.stderr,
                p.trials,
                self.seed
            );
        }
        out
    }
}

/// True and estimated channels of one trial.
fn trial_channels(
    cfg: &NetworkConfig,
    seed: u64,
    trial: usize,
    sigma_e2: f64,
) -> Result<(ChannelState, ChannelState)> {
    let hops = cfg.hops().len();
    let mut truth = Vec::with_capacity(hops);
    let mut estimate = Vec::with_capacity(hops);
    for hop in 0..hops {
        let d = draw_fading(stream_seed(seed, trial as u64, hop as u64), sigma_e2)?;
        truth.push(d.true_gain);
        estimate.push(d.estimated_gain);
    }
    Ok((cfg.channel(&truth)?, cfg.channel(&estimate)?))
}

#[derive(Debug, Clone, Copy)]
struct TrialOutcome {
    optimal_db: f64,
    fixed_db: f64,
    optimal_linear: f64,
    fixed_linear: f64,
    violation: bool,
}

/// Dominance slack for rounding in the last bits.
const DOMINANCE_RTOL: f64 = 1e-12;

fn run_trial(
    cfg: &NetworkConfig,
    metric: Metric,
    fixed_rho: f64,
    sigma_e2: f64,
    seed: u64,
    trial: usize,
) -> Result<TrialOutcome> {
    let (truth, estimate) = trial_channels(cfg, seed, trial, sigma_e2)?;
    let fixed = fixed_ps_baseline(cfg, &truth, fixed_rho)?;
    match metric {
        Metric::MinPower => {
            let opt = min_source_power(cfg, &truth)?.e0_star;
            Ok(TrialOutcome {
                optimal_db: watts_to_dbm(opt),
                fixed_db: watts_to_dbm(fixed.min_power),
                optimal_linear: opt,
                fixed_linear: fixed.min_power,
                violation: opt > fixed.min_power * (1.0 + DOMINANCE_RTOL),
            })
        }
        Metric::Rate => {
            // Designed on the estimate, experienced on the true channel.
            let alloc = max_min_rate(cfg, &estimate)?.allocation;
            let snr = bottleneck(&hop_snrs(
                cfg.source_power(),
                cfg,
                &truth,
                &alloc,
                SnrModel::Approximate,
            )?);
            Ok(TrialOutcome {
                optimal_db: rate_from_snr(snr),
                fixed_db: fixed.min_rate,
                optimal_linear: snr,
                fixed_linear: fixed.min_snr,
                violation: sigma_e2 == 0.0 && snr < fixed.min_snr * (1.0 - DOMINANCE_RTOL),
            })
        }
    }
}

fn run_trials<T: Send>(
    trials: usize,
    f: impl Fn(usize) -> Result<T> + Sync + Send,
) -> Result<Vec<T>> {
    (0..trials).into_par_iter().map(f).collect()
}

fn column(outcomes: &[TrialOutcome], f: impl Fn(&TrialOutcome) -> f64) -> Vec<f64> {
    outcomes.iter().map(f).collect()
}

pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let mut points = Vec::with_capacity(spec.values.len());
    for &value in &spec.values {
        let scenario = spec.parameter.apply(&spec.base, value)?;
        let cfg = scenario.network()?;
        let sigma_e2 = match spec.parameter {
            SweptParameter::EstimationError => value,
            _ => 0.0,
        };
        if spec.metric == Metric::Rate && !(cfg.source_power() > 0.0) {
            return Err(Error::invalid(
                "source power",
                "the rate metric needs a positive source power",
            ));
        }
        let outcomes = run_trials(spec.trials, |t| {
            run_trial(
                &cfg,
                spec.metric,
                scenario.fixed_rho,
                sigma_e2,
                spec.seed,
                t,
            )
        })?;
        points.push(SweepPoint {
            swept_value: value,
            optimal_db: MeanStat::of(&column(&outcomes, |o| o.optimal_db)),
            fixed_db: MeanStat::of(&column(&outcomes, |o| o.fixed_db)),
            optimal_linear: MeanStat::of(&column(&outcomes, |o| o.optimal_linear)).mean,
            fixed_linear: MeanStat::of(&column(&outcomes, |o| o.fixed_linear)).mean,
            trials: spec.trials,
            dominance_violations: outcomes.iter().filter(|o| o.violation).count(),
        });
    }
    Ok(SweepResult {
        parameter: spec.parameter,
        metric: spec.metric,
        seed: spec.seed,
        points,
    })
}

/// Rate under imperfect CSI for each estimation error variance.
pub fn icsi_sweep(
    base: &Scenario,
    sigma_e2: &[f64],
    trials: usize,
    seed: u64,
) -> Result<SweepResult> {
    run_sweep(&SweepSpec {
        parameter: SweptParameter::EstimationError,
        values: sigma_e2.to_vec(),
        trials,
        metric: Metric::Rate,
        base: base.clone(),
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarvestRow {
    pub snr_threshold_db: f64,
    /// 1-based relay index.
    pub node: usize,
    /// Mean harvested power in dBm.
    pub optimal_db: MeanStat,
    pub fixed_db: MeanStat,
    /// Mean harvested power in watts.
    pub optimal_linear: f64,
    pub fixed_linear: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarvestProfile {
    pub seed: u64,
    pub rows: Vec<HarvestRow>,
    /// Trials in which the optimal design's harvested power failed to drop
    /// strictly from one relay to the next.
    pub non_decreasing_trials: usize,
}

impl HarvestProfile {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "swept_value,node,metric_optimal_db,metric_fixed_db,metric_optimal_linear,metric_fixed_linear,stderr_optimal,stderr_fixed,trials,seed\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.snr_threshold_db,
                r.node,
                r.optimal_db.mean,
                r.fixed_db.mean,
                r.optimal_linear,
                r.fixed_linear,
                r.optimal_db.stderr,
                r.fixed_db.stderr,
                r.trials,
                self.seed
            );
        }
        out
    }
}

/// Mean harvested power per relay when the source transmits the optimal
/// minimum power, under the optimal and the fixed split.
pub fn harvest_profile(
    base: &Scenario,
    thresholds_db: &[f64],
    trials: usize,
    seed: u64,
) -> Result<HarvestProfile> {
    if base.relays == 0 {
        return Err(Error::invalid(
            "relays",
            "the harvest profile needs at least one relay",
        ));
    }
    if trials == 0 {
        return Err(Error::invalid("trials", "at least one trial is required"));
    }
    base.validate_fixed_rho()?;
    let mut rows = Vec::new();
    let mut non_decreasing_trials = 0;
    for &snr_db in thresholds_db {
        let scenario = SweptParameter::SnrThresholdDb.apply(base, snr_db)?;
        let cfg = scenario.network()?;
        let fixed = PsAllocation::uniform(cfg.relays(), scenario.fixed_rho)?;
        let per_trial = run_trials(trials, |t| {
            let (truth, _) = trial_channels(&cfg, seed, t, 0.0)?;
            let sol = min_source_power(&cfg, &truth)?;
            let opt = harvested_energy(sol.e0_star, &truth, &sol.allocation)?;
            let fix = harvested_energy(sol.e0_star, &truth, &fixed)?;
            Ok((opt, fix))
        })?;
        non_decreasing_trials += per_trial
            .iter()
            .filter(|(opt, _)| opt.windows(2).any(|w| w[1] >= w[0]))
            .count();
        for node in 1..=cfg.relays() {
            let opt_w: Vec<f64> = per_trial.iter().map(|(o, _)| o[node - 1]).collect();
            let fix_w: Vec<f64> = per_trial.iter().map(|(_, f)| f[node - 1]).collect();
            let opt_dbm: Vec<f64> = opt_w.iter().map(|w| watts_to_dbm(*w)).collect();
            let fix_dbm: Vec<f64> = fix_w.iter().map(|w| watts_to_dbm(*w)).collect();
            rows.push(HarvestRow {
                snr_threshold_db: snr_db,
                node,
                optimal_db: MeanStat::of(&opt_dbm),
                fixed_db: MeanStat::of(&fix_dbm),
                optimal_linear: MeanStat::of(&opt_w).mean,
                fixed_linear: MeanStat::of(&fix_w).mean,
                trials,
            });
        }
    }
    Ok(HarvestProfile {
        seed,
        rows,
        non_decreasing_trials,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NodeCountAxis {
    /// Sweep source power (dBm) at a fixed SNR threshold (dB).
    SourcePowerDbm { snr_threshold_db: f64 },
    /// Sweep SNR threshold (dB) at a fixed source power (dBm).
    SnrThresholdDb { source_power_dbm: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeCountRow {
    pub swept_value: f64,
    /// Closed-form estimate.
    pub paper: RelayCount,
    /// Direct inversion of the same geometric series.
    pub exact: RelayCount,
    /// Largest `K` whose Monte Carlo mean minimum power (in dBm) fits the
    /// budget, searched up to the configured cap.
    pub empirical: RelayCount,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeCountCurves {
    pub seed: u64,
    pub trials: usize,
    pub max_relays: usize,
    pub rows: Vec<NodeCountRow>,
}

impl NodeCountCurves {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("swept_value,k_formula,k_exact,k_empirical,trials,seed\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.swept_value, r.paper, r.exact, r.empirical, self.trials, self.seed
            );
        }
        out
    }
}

/// Formula, exact and Monte Carlo relay counts along a power or threshold
/// sweep of a homogeneous chain.
pub fn node_count_curves(
    base: &Scenario,
    axis: NodeCountAxis,
    values: &[f64],
    trials: usize,
    seed: u64,
    max_relays: usize,
) -> Result<NodeCountCurves> {
    if trials == 0 {
        return Err(Error::invalid("trials", "at least one trial is required"));
    }
    let hop = base.hop();
    let hop_gain = average_hop_gain(base.beta, &hop, base.fading_mean)?;

    // Mean dBm of the minimum power at unit threshold, per chain length. The
    // minimum power scales linearly with a common threshold.
    let mut unit = base.clone();
    unit.snr_threshold = 1.0;
    unit.overrides
        .retain(|o| o.field != NodeField::SnrThreshold);
    let mut mean_dbm = Vec::with_capacity(max_relays + 1);
    for relays in 0..=max_relays {
        let mut s = unit.clone();
        s.relays = relays;
        let cfg = s.network()?;
        let per_trial = run_trials(trials, |t| {
            let (truth, _) = trial_channels(&cfg, seed, t, 0.0)?;
            Ok(watts_to_dbm(min_source_power(&cfg, &truth)?.e0_star))
        })?;
        mean_dbm.push(MeanStat::of(&per_trial).mean);
    }

    let rows = values
        .iter()
        .map(|&v| {
            let (e0_dbm, snr_db) = match axis {
                NodeCountAxis::SourcePowerDbm { snr_threshold_db } => (v, snr_threshold_db),
                NodeCountAxis::SnrThresholdDb { source_power_dbm } => (source_power_dbm, v),
            };
            let e0 = dbm_to_watts(e0_dbm);
            let snr = db_to_linear(snr_db);
            let paper =
                estimate_relay_count(e0, snr, base.id_noise, base.beta, &hop, base.fading_mean)?;
            let exact = exact_relay_count(e0, snr * base.id_noise * base.beta, hop_gain)?;
            let affordable = mean_dbm
                .iter()
                .take_while(|m| **m + snr_db <= e0_dbm)
                .count();
            let empirical = match affordable {
                0 => RelayCount::Unaffordable,
                n => RelayCount::Finite(n - 1),
            };
            Ok(NodeCountRow {
                swept_value: v,
                paper,
                exact,
                empirical,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(NodeCountCurves {
        seed,
        trials,
        max_relays,
        rows,
    })
}

/// Figure presets. Each fixes the swept axis, its default values and any
/// scenario tweak the figure calls for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Figure {
    /// Harvested power per relay (K = 3).
    Fig3,
    /// Minimum power against SNR threshold.
    Fig4,
    /// Minimum power against inter-node distance (threshold -10 dB).
    Fig5,
    /// Minimum power against rate threshold.
    Fig6,
    /// Minimum power against number of relays.
    Fig7,
    /// Rate against source power.
    Fig8,
    /// Rate against number of relays.
    Fig9,
    /// Rate against inter-node distance.
    Fig10,
    /// Rate under channel estimation error.
    Fig11,
    /// Supported relays against source power (threshold 20 dB).
    NodesVsPower,
    /// Supported relays against SNR threshold (source power 50 dBm).
    NodesVsSnr,
}

impl Figure {
    pub const ALL: [Figure; 11] = [
        Figure::Fig3,
        Figure::Fig4,
        Figure::Fig5,
        Figure::Fig6,
        Figure::Fig7,
        Figure::Fig8,
        Figure::Fig9,
        Figure::Fig10,
        Figure::Fig11,
        Figure::NodesVsPower,
        Figure::NodesVsSnr,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
            Figure::Fig5 => "fig5",
            Figure::Fig6 => "fig6",
            Figure::Fig7 => "fig7",
            Figure::Fig8 => "fig8",
            Figure::Fig9 => "fig9",
            Figure::Fig10 => "fig10",
            Figure::Fig11 => "fig11",
            Figure::NodesVsPower => "nodes-power",
            Figure::NodesVsSnr => "nodes-snr",
        }
    }

    /// Scenario adjustments applied to the built-in defaults, before any
    /// user configuration.
    pub fn preset_defaults(self, s: &mut Scenario) {
        match self {
            Figure::Fig3 => s.relays = 3,
            Figure::Fig5 | Figure::Fig7 => s.snr_threshold = db_to_linear(-10.0),
            Figure::NodesVsPower => s.snr_threshold = db_to_linear(20.0),
            Figure::NodesVsSnr => s.source_power = dbm_to_watts(50.0),
            _ => {}
        }
    }

    /// Default swept values.
    pub fn default_values(self) -> Vec<f64> {
        let range = |lo: f64, hi: f64, step: f64| {
            let n = ((hi - lo) / step).round() as usize;
            (0..=n).map(|i| lo + step * i as f64).collect::<Vec<_>>()
        };
        match self {
            Figure::Fig3 => vec![-10.0, 0.0, 10.0, 20.0],
            Figure::Fig4 => range(-10.0, 30.0, 5.0),
            Figure::Fig5 | Figure::Fig10 => range(1.0, 10.0, 1.0),
            Figure::Fig6 => range(1.0, 10.0, 1.0),
            Figure::Fig7 => range(1.0, 6.0, 1.0),
            Figure::Fig8 => range(0.0, 60.0, 5.0),
            Figure::Fig9 => range(1.0, 10.0, 1.0),
            Figure::Fig11 => vec![0.0, 0.1, 0.2, 0.3],
            Figure::NodesVsPower => range(0.0, 100.0, 5.0),
            Figure::NodesVsSnr => range(-20.0, 40.0, 5.0),
        }
    }

    /// Swept parameter and metric for the figures that are plain sweeps.
    pub fn sweep(self) -> Option<(SweptParameter, Metric)> {
        use Metric::*;
        use SweptParameter::*;
        match self {
            Figure::Fig4 => Some((SnrThresholdDb, MinPower)),
            Figure::Fig5 => Some((Distance, MinPower)),
            Figure::Fig6 => Some((RateThreshold, MinPower)),
            Figure::Fig7 => Some((Relays, MinPower)),
            Figure::Fig8 => Some((SourcePowerDbm, Rate)),
            Figure::Fig9 => Some((Relays, Rate)),
            Figure::Fig10 => Some((Distance, Rate)),
            Figure::Fig11 => Some((EstimationError, Rate)),
            _ => None,
        }
    }
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Figure::ALL
            .into_iter()
            .find(|fig| fig.id() == s)
            .ok_or_else(|| {
                let known: Vec<_> = Figure::ALL.iter().map(|f| f.id()).collect();
                Error::invalid(
                    "figure id",
                    format!("`{s}` is not one of {}", known.join(", ")),
                )
            })
    }
}

/// Output of [`run_figure`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FigureData {
    Sweep(SweepResult),
    Harvest(HarvestProfile),
    NodeCount(NodeCountCurves),
}

impl FigureData {
    pub fn to_csv(&self) -> String {
        match self {
            FigureData::Sweep(r) => r.to_csv(),
            FigureData::Harvest(r) => r.to_csv(),
            FigureData::NodeCount(r) => r.to_csv(),
        }
    }
}

/// Largest chain length searched by the Monte Carlo relay count.
pub const NODE_COUNT_MAX_RELAYS: usize = 30;

pub fn run_figure(
    figure: Figure,
    base: &Scenario,
    values: &[f64],
    trials: usize,
    seed: u64,
) -> Result<FigureData> {
    if let Some((parameter, metric)) = figure.sweep() {
        return run_sweep(&SweepSpec {
            parameter,
            values: values.to_vec(),
            trials,
            metric,
            base: base.clone(),
            seed,
        })
        .map(FigureData::Sweep);
    }
    match figure {
        Figure::Fig3 => harvest_profile(base, values, trials, seed).map(FigureData::Harvest),
        Figure::NodesVsPower => node_count_curves(
            base,
            NodeCountAxis::SourcePowerDbm {
                snr_threshold_db: linear_to_db(base.snr_threshold),
            },
            values,
            trials,
            seed,
            NODE_COUNT_MAX_RELAYS,
        )
        .map(FigureData::NodeCount),
        Figure::NodesVsSnr => node_count_curves(
            base,
            NodeCountAxis::SnrThresholdDb {
                source_power_dbm: watts_to_dbm(base.source_power),
            },
            values,
            trials,
            seed,
            NODE_COUNT_MAX_RELAYS,
        )
        .map(FigureData::NodeCount),
        _ => unreachable!("sweep figures handled above"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(
        parameter: SweptParameter,
        values: Vec<f64>,
        metric: Metric,
        trials: usize,
    ) -> SweepSpec {
        SweepSpec {
            parameter,
            values,
            trials,
            metric,
            base: Scenario::default(),
            seed: 7,
        }
    }

    #[test]
    fn default_scenario_matches_reference_setup() {
        let s = Scenario::default();
        let cfg = s.network().unwrap();
        assert_eq!(cfg.relays(), 2);
        assert!((cfg.hops()[0].large_scale_gain().unwrap() - 0.0125).abs() < 1e-15);
        assert!((cfg.node(1).id_noise - 1e-11).abs() < 1e-24);
        assert_eq!(cfg.node(3).beta, 1.0);
    }

    #[test]
    fn overrides_apply_per_index() {
        let mut s = Scenario::default();
        s.overrides.push(NodeOverride {
            index: 2,
            field: NodeField::Beta,
            value: 0.3,
        });
        s.overrides.push(NodeOverride {
            index: 9,
            field: NodeField::Beta,
            value: 0.3,
        });
        s.overrides.push(NodeOverride {
            index: 1,
            field: NodeField::Distance,
            value: 3.0,
        });
        let cfg = s.network().unwrap();
        assert_eq!(cfg.node(2).beta, 0.3);
        assert_eq!(cfg.node(1).beta, 0.7);
        assert_eq!(cfg.hops()[0].distance, 3.0);
        s.overrides.push(NodeOverride {
            index: 0,
            field: NodeField::Beta,
            value: 0.3,
        });
        assert!(s.network().is_err());
    }

    #[test]
    fn single_trial_is_deterministic() {
        let s = spec(
            SweptParameter::SnrThresholdDb,
            vec![0.0, 10.0],
            Metric::MinPower,
            1,
        );
        let a = run_sweep(&s).unwrap();
        assert_eq!(a.to_csv(), run_sweep(&s).unwrap().to_csv());
        assert_eq!(a.points[0].optimal_db.stderr, 0.0);
    }

    #[test]
    fn thread_count_does_not_change_output() {
        let s = spec(
            SweptParameter::SourcePowerDbm,
            vec![30.0, 40.0],
            Metric::Rate,
            500,
        );
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let four = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap();
        let a = one.install(|| run_sweep(&s)).unwrap();
        let b = four.install(|| run_sweep(&s)).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
    }

    #[test]
    fn threshold_shift_moves_power_by_the_same_db() {
        // Minimum powers scale linearly in a common threshold, so the dBm
        // means move one-for-one with the threshold in dB.
        let r = run_sweep(&spec(
            SweptParameter::SnrThresholdDb,
            vec![0.0, 10.0],
            Metric::MinPower,
            200,
        ))
        .unwrap();
        let shift = r.points[1].optimal_db.mean - r.points[0].optimal_db.mean;
        assert!((shift - 10.0).abs() < 1e-9, "{shift}");
        let shift = r.points[1].fixed_db.mean - r.points[0].fixed_db.mean;
        assert!((shift - 10.0).abs() < 1e-9, "{shift}");
    }

    #[test]
    fn rate_threshold_maps_to_snr() {
        let s = SweptParameter::RateThreshold
            .apply(&Scenario::default(), 1.0)
            .unwrap();
        assert_eq!(s.snr_threshold, 1.0);
        assert!(SweptParameter::Relays
            .apply(&Scenario::default(), 1.5)
            .is_err());
        assert!(SweptParameter::EstimationError
            .apply(&Scenario::default(), 1.0)
            .is_err());
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(run_sweep(&spec(SweptParameter::Relays, vec![], Metric::Rate, 10)).is_err());
        assert!(run_sweep(&spec(SweptParameter::Relays, vec![1.0], Metric::Rate, 0)).is_err());
        assert!(run_sweep(&spec(
            SweptParameter::EstimationError,
            vec![0.1],
            Metric::MinPower,
            10
        ))
        .is_err());
        let mut s = spec(SweptParameter::Relays, vec![1.0], Metric::Rate, 10);
        s.base.fixed_rho = 1.0;
        assert!(run_sweep(&s).is_err());
    }

    #[test]
    fn icsi_zero_error_matches_perfect_csi() {
        let base = Scenario::default();
        let icsi = icsi_sweep(&base, &[0.0], 300, 3).unwrap();
        let perfect = run_sweep(&SweepSpec {
            parameter: SweptParameter::SourcePowerDbm,
            values: vec![30.0],
            trials: 300,
            metric: Metric::Rate,
            base,
            seed: 3,
        })
        .unwrap();
        assert_eq!(icsi.points[0].optimal_db, perfect.points[0].optimal_db);
        assert_eq!(icsi.points[0].fixed_db, perfect.points[0].fixed_db);
    }

    #[test]
    fn harvest_k1_matches_hand_product() {
        // One relay, one trial: E_1 = E0* Gamma_1 rho_1 for both splits.
        let base = Scenario {
            relays: 1,
            ..Scenario::default()
        };
        let prof = harvest_profile(&base, &[0.0], 1, 5).unwrap();
        let cfg = base.network().unwrap();
        let (truth, _) = trial_channels(&cfg, 5, 0, 0.0).unwrap();
        let sol = min_source_power(&cfg, &truth).unwrap();
        let expect_opt = sol.e0_star * truth.cumulative(1) * sol.allocation.ratio(1);
        let expect_fix = sol.e0_star * truth.cumulative(1) * 0.5;
        assert_eq!(prof.rows.len(), 1);
        assert!((prof.rows[0].optimal_linear / expect_opt - 1.0).abs() < 1e-12);
        assert!((prof.rows[0].fixed_linear / expect_fix - 1.0).abs() < 1e-12);
        assert!(harvest_profile(
            &Scenario {
                relays: 0,
                ..Scenario::default()
            },
            &[0.0],
            1,
            5
        )
        .is_err());
    }

    #[test]
    fn figure_ids_round_trip() {
        for f in Figure::ALL {
            assert_eq!(f.id().parse::<Figure>().unwrap(), f);
        }
        assert!("fig99".parse::<Figure>().is_err());
    }

    #[test]
    fn pairwise_sum_matches_naive_for_small_inputs() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(pairwise_sum(&v), 5050.0);
        let s = MeanStat::of(&[1.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert!((s.stderr - 1.0).abs() < 1e-15);
    }
}

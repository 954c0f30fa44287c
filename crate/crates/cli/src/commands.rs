use anyhow::{bail, Result};
use serde_json::json;
use swipt_core::channel::{draw_fading, stream_seed};
use swipt_core::experiments::{harvest_profile, icsi_sweep, run_figure, Figure, Scenario};
use swipt_core::oracle::{
    bisection_max_min_rate, bisection_min_source_power, exact_relay_count,
    grid_search_max_min_rate, random_instance, relay_count_grid, verify_certificate, GridSpec,
};
use swipt_core::protocol::{compare_methods, BitBudget, Objective};
use swipt_core::relay_count::{average_hop_gain, relay_count_formula};
use swipt_core::solver::{
    duality_exchange, fixed_ps_baseline, max_min_rate, min_source_power, Duality,
};
use swipt_core::units::{linear_to_db, watts_to_dbm};
use swipt_core::{ChannelState, NetworkConfig};

use crate::config::{Resolved, UsageError};

/// Text to write plus whether the command succeeded on its own terms.
pub struct Output {
    pub body: String,
    pub ok: bool,
}

impl Output {
    fn ok(body: String) -> Self {
        Output { body, ok: true }
    }

    fn json(value: serde_json::Value) -> Self {
        Output::ok(format!("{value}\n"))
    }
}

/// The single channel realization used by the one-shot commands: total hop
/// gains from `gain`, else small-scale gains from `fading`, else a draw from
/// the seed.
fn one_channel(r: &Resolved, cfg: &NetworkConfig) -> Result<ChannelState> {
    let hops = cfg.hops().len();
    let seed = r.seed()?;
    let gains = r.per_hop("gain", hops)?;
    let fading = r.per_hop("fading", hops)?;
    if let Some(gains) = gains {
        if fading.is_some() {
            return Err(UsageError("`gain` and `fading` are mutually exclusive".into()).into());
        }
        let gains = gains
            .into_iter()
            .enumerate()
            .map(|(i, g)| g.ok_or_else(|| UsageError(format!("no `gain` for hop {}", i + 1))))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        return Ok(cfg.channel_from_hop_gains(gains)?);
    }
    let fading = fading.unwrap_or_else(|| vec![None; hops]);
    let small = fading
        .into_iter()
        .enumerate()
        .map(|(h, f)| match f {
            Some(v) => Ok(v),
            None => Ok(draw_fading(stream_seed(seed, 0, h as u64), 0.0)?.true_gain),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(cfg.channel(&small)?)
}

fn instance(r: &Resolved) -> Result<(Scenario, NetworkConfig, ChannelState)> {
    let scenario = r.scenario()?;
    let cfg = scenario.network()?;
    let channel = one_channel(r, &cfg)?;
    Ok((scenario, cfg, channel))
}

pub fn min_power(r: &Resolved) -> Result<Output> {
    let (scenario, cfg, channel) = instance(r)?;
    let sol = min_source_power(&cfg, &channel)?;
    let fixed = fixed_ps_baseline(&cfg, &channel, scenario.fixed_rho)?;
    Ok(Output::json(json!({
        "e0_star_w": sol.e0_star,
        "e0_star_dbm": watts_to_dbm(sol.e0_star),
        "rho": sol.allocation.ratios(),
        "hop_snrs": sol.hop_snrs,
        "fixed_rho": scenario.fixed_rho,
        "fixed_min_power_w": fixed.min_power,
        "fixed_min_power_dbm": watts_to_dbm(fixed.min_power),
    })))
}

pub fn max_rate(r: &Resolved) -> Result<Output> {
    let (scenario, cfg, channel) = instance(r)?;
    let sol = max_min_rate(&cfg, &channel)?;
    let fixed = fixed_ps_baseline(&cfg, &channel, scenario.fixed_rho)?;
    Ok(Output::json(json!({
        "e0_dbm": watts_to_dbm(cfg.source_power()),
        "gamma_hat": sol.gamma_hat_star,
        "gamma_hat_db": linear_to_db(sol.gamma_hat_star),
        "rate_bps_hz": sol.rate_star,
        "rho": sol.allocation.ratios(),
        "hop_snrs": sol.hop_snrs,
        "fixed_rho": scenario.fixed_rho,
        "fixed_rate_bps_hz": fixed.min_rate,
    })))
}

pub fn node_count(r: &Resolved) -> Result<Output> {
    let s = r.scenario()?;
    if !s.overrides.is_empty() {
        return Err(UsageError(
            "node-count needs a homogeneous chain; drop the indexed keys".into(),
        )
        .into());
    }
    let hop_gain = average_hop_gain(s.beta, &s.hop(), s.fading_mean)?;
    let a0 = s.snr_threshold * s.id_noise * s.beta;
    let formula = relay_count_formula(s.source_power, a0, hop_gain)?;
    let exact = exact_relay_count(s.source_power, a0, hop_gain)?;
    Ok(Output::json(json!({
        "e0_dbm": watts_to_dbm(s.source_power),
        "gamma_db": linear_to_db(s.snr_threshold),
        "fading_mean": s.fading_mean,
        "hop_gain": hop_gain,
        "k_formula": formula.to_string(),
        "k_exact": exact.to_string(),
        "difference": formula.difference(exact),
    })))
}

pub fn protocol_compare(r: &Resolved, objective: Objective, budget: BitBudget) -> Result<Output> {
    let (_, cfg, channel) = instance(r)?;
    let cmp = compare_methods(&cfg, &channel, &budget, objective)?;
    Ok(Output::json(json!({
        "objective": objective,
        "relays": cfg.relays(),
        "centralized": cmp.centralized_summary,
        "distributed": cmp.distributed_summary,
        "centralized_node_bits": cmp.centralized.transmitted_bits,
        "distributed_node_bits": cmp.distributed.transmitted_bits,
        "centralized_rho": cmp.centralized.allocation.ratios(),
        "distributed_rho": cmp.distributed.allocation.ratios(),
        "max_ratio_gap": cmp.max_ratio_gap,
    })))
}

pub fn sweep(r: &Resolved, figure: Figure) -> Result<Output> {
    let data = run_figure(
        figure,
        &r.scenario()?,
        &r.list("values")?,
        r.trials()?,
        r.seed()?,
    )?;
    Ok(Output::ok(data.to_csv()))
}

pub fn icsi(r: &Resolved) -> Result<Output> {
    let res = icsi_sweep(&r.scenario()?, &r.list("sigma_e2")?, r.trials()?, r.seed()?)?;
    Ok(Output::ok(res.to_csv()))
}

pub fn harvest(r: &Resolved) -> Result<Output> {
    let res = harvest_profile(&r.scenario()?, &r.list("values")?, r.trials()?, r.seed()?)?;
    Ok(Output::ok(res.to_csv()))
}

struct Check {
    name: &'static str,
    cases: usize,
    worst: f64,
    tolerance: f64,
}

impl Check {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Check {
            name,
            cases: 0,
            worst: 0.0,
            tolerance,
        }
    }

    fn record(&mut self, err: f64) {
        self.cases += 1;
        // NaN must fail, so it wins the comparison.
        if !(err <= self.worst) {
            self.worst = err;
        }
    }

    fn pass(&self) -> bool {
        self.worst <= self.tolerance
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Oracle suite on seeded random chains of 1..=`max_relays` relays.
pub fn verify(r: &Resolved, instances: usize, max_relays: usize, grid_step: f64) -> Result<Output> {
    if instances == 0 {
        bail!(UsageError("--instances must be positive".into()));
    }
    let seed = r.seed()?;
    let grid = GridSpec::new(grid_step, max_relays.min(3))?;
    let mut bis_rate = Check::new("bisection_rate", 1e-9);
    let mut bis_power = Check::new("bisection_power", 1e-9);
    let mut cert = Check::new("certificate", 1e-9);
    let mut grid_excess = Check::new("grid_excess_cells", 1.0);
    let mut duality = Check::new("duality_round_trip", 1e-12);
    let mut equiv = Check::new("uniform_threshold_equivalence", 1e-12);
    let mut proto = Check::new("protocol_equivalence", 1e-12);
    let budget = BitBudget::new(1024, 32, 16)?;

    for relays in 1..=max_relays {
        for i in 0..instances {
            let inst_seed = stream_seed(seed, i as u64, relays as u64);
            let (cfg, ch) = random_instance(relays, inst_seed)?;
            let rate = max_min_rate(&cfg, &ch)?;
            let power = min_source_power(&cfg, &ch)?;
            bis_rate.record(rel_err(
                bisection_max_min_rate(&cfg, &ch, 1e-13)?,
                rate.gamma_hat_star,
            ));
            bis_power.record(rel_err(
                bisection_min_source_power(&cfg, &ch, 1e-13)?,
                power.e0_star,
            ));
            for c in [
                verify_certificate(&rate, &cfg, &ch)?,
                verify_certificate(&power, &cfg, &ch)?,
            ] {
                cert.record(
                    c.max_abs_slack()
                        .max(c.snr_spread)
                        .max(c.increment_deviation),
                );
            }
            if relays <= grid.max_relays {
                let g = grid_search_max_min_rate(&cfg, &ch, &grid)?;
                // Excess over the closed form, in units of one cell's
                // relative SNR change.
                grid_excess.record(
                    ((g.gamma_hat - rate.gamma_hat_star) / rate.gamma_hat_star / grid.step)
                        .max(0.0),
                );
            }
            let snr = duality_exchange(cfg.source_power(), Duality::PowerToSnr, &cfg, &ch)?;
            let back = duality_exchange(snr, Duality::SnrToPower, &cfg, &ch)?;
            duality.record(rel_err(back, cfg.source_power()));

            let uniform = cfg
                .clone()
                .with_uniform_threshold(cfg.node(1).snr_threshold)?;
            let p = min_source_power(&uniform, &ch)?;
            let q = max_min_rate(&uniform, &ch)?;
            equiv.record(max_gap(p.allocation.ratios(), q.allocation.ratios()));

            for objective in [Objective::MinSourcePower, Objective::MaxMinRate] {
                let cmp = compare_methods(&cfg, &ch, &budget, objective)?;
                proto.record(cmp.max_ratio_gap);
            }
        }
    }

    let mut relay_count = Check::new("relay_count_within_one", 1.0);
    for (ratio, gain) in relay_count_grid() {
        let paper = relay_count_formula(ratio, 1.0, gain)?;
        let exact = exact_relay_count(ratio, 1.0, gain)?;
        relay_count.record(
            paper
                .difference(exact)
                .map_or(f64::NAN, |d| (d as f64).abs()),
        );
    }

    let checks = [
        bis_rate,
        bis_power,
        cert,
        grid_excess,
        duality,
        equiv,
        proto,
        relay_count,
    ];
    let mut body = String::new();
    let mut ok = true;
    for c in &checks {
        ok &= c.pass();
        body.push_str(
            &json!({
                "check": c.name,
                "cases": c.cases,
                "worst": c.worst,
                "tolerance": c.tolerance,
                "pass": c.pass(),
            })
            .to_string(),
        );
        body.push('\n');
    }
    Ok(Output { body, ok })
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

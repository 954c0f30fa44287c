//! Flat `key = value` configuration with per-index suffixes.
//!
//! Every key has a built-in default. A config file overrides defaults and a
//! command-line flag overrides both. `beta = 0.6` sets every node while
//! `beta.2 = 0.4` sets node 2 only; suffixed keys are applied after the
//! broadcast value whatever their order in the file.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use swipt_core::experiments::{NodeField, NodeOverride, Scenario};
use swipt_core::units::{db_to_linear, dbm_to_watts, linear_to_db, watts_to_dbm};

/// A malformed key or value. Reported with exit status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Keys that take one number, with the unit used on the boundary.
const SCALAR_KEYS: &[&str] = &[
    "k",
    "e0_dbm",
    "gamma_db",
    "noise_dbm",
    "antenna_noise_dbm",
    "beta",
    "d",
    "d0",
    "alpha",
    "c_db",
    "rho_fixed",
    "fading_mean",
    "seed",
    "trials",
    "threads",
];

/// Keys that may carry a `.i` suffix.
const INDEXED_KEYS: &[&str] = &[
    "beta",
    "noise_dbm",
    "antenna_noise_dbm",
    "gamma_db",
    "d",
    "d0",
    "alpha",
    "c_db",
    "gain",
    "fading",
];

/// Comma-separated lists.
const LIST_KEYS: &[&str] = &["values", "sigma_e2"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Default,
    Config,
    Flag,
}

#[derive(Debug, Clone, Serialize)]
pub struct Entry {
    pub value: String,
    pub source: Source,
}

/// Split `beta.3` into `("beta", Some(3))`.
fn split_key(key: &str) -> anyhow::Result<(&str, Option<usize>)> {
    match key.split_once('.') {
        None => {
            if SCALAR_KEYS.contains(&key) || LIST_KEYS.contains(&key) || INDEXED_KEYS.contains(&key)
            {
                Ok((key, None))
            } else {
                Err(usage(format!("unknown config key `{key}`")))
            }
        }
        Some((base, idx)) => {
            if !INDEXED_KEYS.contains(&base) {
                return Err(usage(format!("`{base}` does not take an index suffix")));
            }
            match idx.parse::<usize>() {
                Ok(i) if i >= 1 => Ok((base, Some(i))),
                _ => Err(usage(format!("bad index in `{key}`: indices start at 1"))),
            }
        }
    }
}

/// Shortest decimal that survives a round trip at 12 significant digits, so
/// defaults computed through unit conversions print cleanly.
pub fn fmt_num(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("formatted float");
    format!("{rounded}")
}

fn parse_num(key: &str, value: &str) -> anyhow::Result<f64> {
    value
        .trim()
        .parse::<f64>()
        .map_err(|_| usage(format!("`{key}` expects a number, got `{value}`")))
}

fn parse_count<T: std::str::FromStr>(key: &str, value: &str) -> anyhow::Result<T> {
    value.trim().parse::<T>().map_err(|_| {
        usage(format!(
            "`{key}` expects a nonnegative integer, got `{value}`"
        ))
    })
}

pub fn parse_list(key: &str, value: &str) -> anyhow::Result<Vec<f64>> {
    value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_num(key, s))
        .collect()
}

/// `(key, value)` pairs of a config file, in file order. `#` starts a
/// comment.
pub fn parse_config_text(text: &str) -> anyhow::Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(usage(format!(
                "config line {}: expected `key = value`",
                n + 1
            )));
        };
        let key = key.trim();
        split_key(key).map_err(|e| usage(format!("config line {}: {e}", n + 1)))?;
        pairs.push((key.to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

/// Fully materialized settings and where each came from.
#[derive(Debug, Clone)]
pub struct Resolved {
    entries: BTreeMap<String, Entry>,
}

impl Resolved {
    /// Defaults taken from `base`, with `values` the default sweep list.
    pub fn from_defaults(base: &Scenario, values: &[f64]) -> Self {
        let mut r = Resolved {
            entries: BTreeMap::new(),
        };
        let defaults = [
            ("k", base.relays.to_string()),
            ("e0_dbm", fmt_num(watts_to_dbm(base.source_power))),
            ("gamma_db", fmt_num(linear_to_db(base.snr_threshold))),
            ("noise_dbm", fmt_num(watts_to_dbm(base.id_noise))),
            (
                "antenna_noise_dbm",
                fmt_num(watts_to_dbm(base.antenna_noise)),
            ),
            ("beta", fmt_num(base.beta)),
            ("d", fmt_num(base.distance)),
            ("d0", fmt_num(base.ref_distance)),
            ("alpha", fmt_num(base.pathloss_exponent)),
            ("c_db", fmt_num(linear_to_db(base.attenuation))),
            ("rho_fixed", fmt_num(base.fixed_rho)),
            ("fading_mean", fmt_num(base.fading_mean)),
            ("seed", "1".to_string()),
            ("trials", "10000".to_string()),
            ("threads", "0".to_string()),
            ("values", join(values)),
            ("sigma_e2", "0,0.1,0.2,0.3".to_string()),
        ];
        for (k, v) in defaults {
            r.entries.insert(
                k.to_string(),
                Entry {
                    value: v,
                    source: Source::Default,
                },
            );
        }
        r
    }

    pub fn apply(&mut self, pairs: &[(String, String)], source: Source) -> anyhow::Result<()> {
        for (key, value) in pairs {
            split_key(key)?;
            self.entries.insert(
                key.clone(),
                Entry {
                    value: value.clone(),
                    source,
                },
            );
        }
        Ok(())
    }

    pub fn entries(&self) -> &BTreeMap<String, Entry> {
        &self.entries
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.value.as_str())
    }

    pub fn num(&self, key: &str) -> anyhow::Result<f64> {
        let v = self
            .raw(key)
            .ok_or_else(|| usage(format!("missing `{key}`")))?;
        parse_num(key, v)
    }

    pub fn count<T: std::str::FromStr>(&self, key: &str) -> anyhow::Result<T> {
        let v = self
            .raw(key)
            .ok_or_else(|| usage(format!("missing `{key}`")))?;
        parse_count(key, v)
    }

    pub fn list(&self, key: &str) -> anyhow::Result<Vec<f64>> {
        let v = self
            .raw(key)
            .ok_or_else(|| usage(format!("missing `{key}`")))?;
        parse_list(key, v)
    }

    pub fn seed(&self) -> anyhow::Result<u64> {
        self.count("seed")
    }

    pub fn trials(&self) -> anyhow::Result<usize> {
        self.count("trials")
    }

    pub fn threads(&self) -> anyhow::Result<usize> {
        self.count("threads")
    }

    /// `(index, value)` for every suffixed form of `base`, by index.
    fn indexed(&self, base: &str) -> anyhow::Result<Vec<(usize, f64)>> {
        let prefix = format!("{base}.");
        let mut out = Vec::new();
        for (key, entry) in &self.entries {
            if let Some(idx) = key.strip_prefix(&prefix) {
                let i = idx
                    .parse::<usize>()
                    .map_err(|_| usage(format!("bad index in `{key}`")))?;
                out.push((i, parse_num(key, &entry.value)?));
            }
        }
        out.sort_by_key(|(i, _)| *i);
        Ok(out)
    }

    /// The chain template with all per-index overrides, in linear units.
    pub fn scenario(&self) -> anyhow::Result<Scenario> {
        let mut s = Scenario {
            relays: self.count("k")?,
            distance: self.num("d")?,
            ref_distance: self.num("d0")?,
            pathloss_exponent: self.num("alpha")?,
            attenuation: db_to_linear(self.num("c_db")?),
            beta: self.num("beta")?,
            id_noise: dbm_to_watts(self.num("noise_dbm")?),
            antenna_noise: dbm_to_watts(self.num("antenna_noise_dbm")?),
            snr_threshold: db_to_linear(self.num("gamma_db")?),
            source_power: dbm_to_watts(self.num("e0_dbm")?),
            fixed_rho: self.num("rho_fixed")?,
            fading_mean: self.num("fading_mean")?,
            overrides: Vec::new(),
        };
        type Convert = fn(f64) -> f64;
        let fields: [(&str, NodeField, Convert); 8] = [
            ("beta", NodeField::Beta, |x| x),
            ("noise_dbm", NodeField::IdNoise, dbm_to_watts),
            ("antenna_noise_dbm", NodeField::AntennaNoise, dbm_to_watts),
            ("gamma_db", NodeField::SnrThreshold, db_to_linear),
            ("d", NodeField::Distance, |x| x),
            ("d0", NodeField::RefDistance, |x| x),
            ("alpha", NodeField::PathlossExponent, |x| x),
            ("c_db", NodeField::Attenuation, db_to_linear),
        ];
        for (key, field, convert) in fields {
            for (index, value) in self.indexed(key)? {
                s.overrides.push(NodeOverride {
                    index,
                    field,
                    value: convert(value),
                });
            }
        }
        Ok(s)
    }

    /// Per-hop values of `gain` or `fading`: the broadcast value, then any
    /// suffixed ones. `None` where neither is set; `None` overall when the
    /// key is not used at all.
    pub fn per_hop(&self, base: &str, hops: usize) -> anyhow::Result<Option<Vec<Option<f64>>>> {
        let broadcast = match self.raw(base) {
            Some(v) => Some(parse_num(base, v)?),
            None => None,
        };
        let indexed = self.indexed(base)?;
        if broadcast.is_none() && indexed.is_empty() {
            return Ok(None);
        }
        let mut out = vec![broadcast; hops];
        for (i, v) in indexed {
            if i <= hops {
                out[i - 1] = Some(v);
            }
        }
        Ok(Some(out))
    }
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| fmt_num(*v))
        .collect::<Vec<_>>()
        .join(",")
}
